"""Conservative finite-volume solver for the conservation-law families.

Local Lax-Friedrichs numerical flux for -q1 (f(u))_x, central second
difference for the viscous term, two-stage SSP-RK2 in time with the step
chosen from CFL 0.4 against both the advective and diffusive limits.
"""

from __future__ import annotations

import math

import numpy as np

from ..catalog import (FLUX_FUNCS, N_GRID, EqClass, EquationSpec,
                       InitialCondition, ParameterSet)
from ..errors import CFLViolation, NonFinite
from .records import TrajectoryRecord

CFL = 0.4
MIN_SUBSTEPS = 20          # sub-steps per saved frame, at least


def _viscosity(spec: EquationSpec, params: dict) -> np.ndarray | float:
    if spec.viscosity_coeff is None:
        return np.asarray(params["q2"], dtype=np.float64) / math.pi
    return float(spec.viscosity_coeff)


def solve_conservation_fv_batch(spec: EquationSpec, params: dict,
                                ic_grid: np.ndarray,
                                times: np.ndarray) -> tuple[np.ndarray, dict]:
    """Batched solve; ``ic_grid`` is [128] or [B, 128], parameter values may be
    scalars or length-B arrays. Returns (values [..., T_s, 128], meta)."""
    ic_grid = np.asarray(ic_grid, dtype=np.float64)
    batched = ic_grid.ndim == 2
    times = np.asarray(times, dtype=np.float64)
    frame_dt = times[1] - times[0]
    if not np.allclose(np.diff(times), frame_dt):
        raise ValueError("finite-volume solver expects uniform frame times")

    f, fp = FLUX_FUNCS[spec.flux_form]
    qsym = "q1" if spec.viscosity_coeff is None else "k"
    q1 = np.asarray(params[qsym], dtype=np.float64)
    nu = _viscosity(spec, params)
    if batched:
        if np.ndim(q1) == 1:
            q1 = q1[:, None]
        if np.ndim(nu) == 1:
            nu = nu[:, None]

    dx = spec.domain_length / N_GRID
    nu_max = float(np.max(nu))
    dt_diff = math.inf if nu_max == 0.0 else dx * dx / (2.0 * nu_max)

    def rate(u):
        flux = q1 * f(u)
        speed = np.abs(q1 * fp(u))
        fl = np.roll(flux, -1, axis=-1)
        ul = np.roll(u, -1, axis=-1)
        alpha = np.maximum(speed, np.roll(speed, -1, axis=-1))
        fhat = 0.5 * (flux + fl) - 0.5 * alpha * (ul - u)     # interface j+1/2
        div = (fhat - np.roll(fhat, 1, axis=-1)) / dx
        visc = nu * (ul - 2.0 * u + np.roll(u, 1, axis=-1)) / (dx * dx)
        return -div + visc

    u = ic_grid.copy()
    n_frames = times.shape[0]
    out = np.empty(ic_grid.shape[:-1] + (n_frames, N_GRID))
    out[..., 0, :] = ic_grid
    max_substeps = MIN_SUBSTEPS
    for frame in range(1, n_frames):
        speed_max = float(np.max(np.abs(q1 * fp(u))))
        dt_adv = math.inf if speed_max == 0.0 else dx / speed_max
        dt_stab = CFL * min(dt_adv, dt_diff)
        if not math.isfinite(dt_stab):
            substeps = MIN_SUBSTEPS
        else:
            if dt_stab < 1e-12:
                raise CFLViolation(f"family {spec.index}: step underflow (dt={dt_stab:.3e})")
            substeps = max(int(math.ceil(frame_dt / dt_stab)), MIN_SUBSTEPS)
        max_substeps = max(max_substeps, substeps)
        dt = frame_dt / substeps
        for _ in range(substeps):
            u1 = u + dt * rate(u)
            u = 0.5 * (u + u1 + dt * rate(u1))
        if not np.all(np.isfinite(u)):
            raise NonFinite(f"finite-volume solve of family {spec.index} blew up")
        out[..., frame, :] = u

    meta = {"method": "LLF-SSPRK2", "cfl": CFL, "dx": dx,
            "max_substeps_per_frame": max_substeps}
    return out, meta


def solve_conservation_fv(spec: EquationSpec, params: ParameterSet,
                          ic_grid: np.ndarray,
                          times: np.ndarray) -> TrajectoryRecord:
    if spec.cls is not EqClass.CONSERVATION:
        raise ValueError(f"family {spec.index} is not a conservation-law family")
    values, meta = solve_conservation_fv_batch(spec, params.as_dict(),
                                               np.asarray(ic_grid),
                                               np.asarray(times))
    ic = InitialCondition(kind=spec.ic_family, values=np.asarray(ic_grid),
                          descriptor_params=())
    return TrajectoryRecord(family_index=spec.index, params=params, ic=ic,
                            times=np.asarray(times, dtype=np.float64),
                            values=values, solver_meta=meta)
