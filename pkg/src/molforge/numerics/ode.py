"""Adaptive Runge-Kutta integration for the ODE families."""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from ..catalog import ODE_RHS, EquationSpec, InitialCondition, ParameterSet
from ..errors import NonFinite, StiffnessFailure
from .records import TrajectoryRecord

RTOL = 1e-8
ATOL = 1e-10
BLOWUP_LIMIT = 1e6


def integrate_ode(spec: EquationSpec, params: ParameterSet,
                  ic: InitialCondition, times: np.ndarray,
                  rtol: float = RTOL, atol: float = ATOL) -> TrajectoryRecord:
    """RK45 with adaptive step and dense output sampled at ``times``."""
    if not spec.is_ode:
        raise ValueError(f"family {spec.index} is not an ODE family")
    rhs = ODE_RHS[spec.index]
    p = params.as_dict()
    times = np.asarray(times, dtype=np.float64)
    y0 = np.atleast_1d(np.asarray(ic.values, dtype=np.float64))

    def fun(t, y):
        return np.atleast_1d(rhs(t, y if spec.state_dim > 1 else y[0], p))

    sol = solve_ivp(fun, (times[0], times[-1]), y0, method="RK45",
                    t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        if "step size" in (sol.message or "").lower():
            raise StiffnessFailure(f"family {spec.index}: {sol.message}")
        raise NonFinite(f"family {spec.index}: {sol.message}")
    values = sol.y.T            # [T_s, state_dim]
    if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > BLOWUP_LIMIT:
        raise NonFinite(f"family {spec.index}: state blew up before t={times[-1]}")
    meta = {"method": "RK45", "rtol": rtol, "atol": atol}
    return TrajectoryRecord(family_index=spec.index, params=params, ic=ic,
                            times=times, values=values, solver_meta=meta)


def integrate_ode_fixed_rk4(spec: EquationSpec, params: ParameterSet,
                            ic: InitialCondition, times: np.ndarray,
                            dt: float) -> TrajectoryRecord:
    """Fixed-step classical RK4 variant, used for convergence-order checks."""
    if not spec.is_ode:
        raise ValueError(f"family {spec.index} is not an ODE family")
    rhs = ODE_RHS[spec.index]
    p = params.as_dict()
    times = np.asarray(times, dtype=np.float64)
    y = np.atleast_1d(np.asarray(ic.values, dtype=np.float64)).copy()

    def fun(t, y):
        return np.atleast_1d(rhs(t, y if spec.state_dim > 1 else y[0], p))

    out = np.empty((times.shape[0], y.shape[0]))
    out[0] = y
    t = times[0]
    for i in range(1, times.shape[0]):
        span = times[i] - t
        n = max(int(np.ceil(span / dt)), 1)
        h = span / n
        for _ in range(n):
            k1 = fun(t, y)
            k2 = fun(t + h / 2, y + h / 2 * k1)
            k3 = fun(t + h / 2, y + h / 2 * k2)
            k4 = fun(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        t = times[i]
        out[i] = y
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"family {spec.index}: fixed-step RK4 blew up")
    meta = {"method": "RK4-fixed", "dt": dt}
    return TrajectoryRecord(family_index=spec.index, params=params, ic=ic,
                            times=times, values=out, solver_meta=meta)
