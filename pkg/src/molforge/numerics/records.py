"""Solved-trajectory container shared by all solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..catalog import InitialCondition, ParameterSet


@dataclass
class TrajectoryRecord:
    family_index: int
    params: ParameterSet
    ic: InitialCondition
    times: np.ndarray          # [T_s], uniform, starts at 0
    values: np.ndarray         # [T_s, state_dim] (ODE) or [T_s, 128] (PDE)
    solver_meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trajectory contains non-finite values")
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must increase strictly from 0")
