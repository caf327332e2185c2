"""The solution triple at one instant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import RadialGrid


@dataclass(frozen=True, eq=False)
class State:
    grid: RadialGrid
    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("u", "v", "w"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.N,):
                raise ValueError(f"{name} must have {self.grid.N} cell values")
            object.__setattr__(self, name, arr)

    def is_valid(self, nonneg_tol=1e-13) -> bool:
        fields = (self.u, self.v, self.w)
        return all(np.all(np.isfinite(f)) and f.min() >= -nonneg_tol for f in fields)

    def replace(self, **kw) -> "State":
        data = {"grid": self.grid, "t": self.t, "u": self.u, "v": self.v, "w": self.w}
        data.update(kw)
        return State(**data)
