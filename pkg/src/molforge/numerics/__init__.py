"""Ground-truth solvers: adaptive RK for ODEs, pseudo-spectral method of
lines for periodic PDEs, and a conservative finite-volume scheme for
conservation laws."""

from ..catalog import EqClass, EquationSpec, InitialCondition, ParameterSet
from .fv import solve_conservation_fv, solve_conservation_fv_batch
from .ode import integrate_ode, integrate_ode_fixed_rk4
from .records import TrajectoryRecord
from .spectral import (solve_pde_spectral, solve_pde_spectral_batch,
                       spectral_derivative)


def solve(spec: EquationSpec, params: ParameterSet, ic: InitialCondition,
          times) -> TrajectoryRecord:
    """Dispatch to the class-appropriate solver."""
    if spec.is_ode:
        return integrate_ode(spec, params, ic, times)
    if spec.cls is EqClass.PDE:
        rec = solve_pde_spectral(spec, params, ic.values, times)
    else:
        rec = solve_conservation_fv(spec, params, ic.values, times)
    rec.ic = ic
    return rec


__all__ = [
    "TrajectoryRecord", "integrate_ode", "integrate_ode_fixed_rk4",
    "solve_pde_spectral", "solve_pde_spectral_batch", "spectral_derivative",
    "solve_conservation_fv", "solve_conservation_fv_batch", "solve",
]
