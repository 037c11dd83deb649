"""Flow problems: velocity, reaction, data, and the domain they live on.

All coefficient callables are vectorised over points: positions come in as
arrays of shape (n, dim).  ``a(x, t)`` returns (n, dim); ``c``, ``u0`` and
``u_D`` return (n,).  The time argument is a scalar during assembly, but
``a``, ``c`` and ``u_D`` must also broadcast against an (n,) per-point time
array: exit refinement integrates each particle over its own substep, and
boundary data is evaluated at per-particle entry times.  Callables must also
evaluate in a small collar outside the domain (trial steps can leave it).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = ["Interval", "Box", "FlowProblem", "FlowValidation"]


@dataclass(frozen=True)
class Interval:
    """The 1D domain (lo, hi)."""

    lo: float
    hi: float

    dim = 1

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("empty interval")

    @property
    def diameter(self) -> float:
        return self.hi - self.lo

    def outside_distance(self, x: np.ndarray) -> np.ndarray:
        """Signed violation: > 0 outside, < 0 strictly inside, 0 on the wall."""
        x = np.asarray(x, dtype=float).reshape(-1, 1)
        return np.maximum(self.lo - x[:, 0], x[:, 0] - self.hi)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return self.outside_distance(x) <= tol

    def on_boundary(self, x: np.ndarray, tol: float) -> np.ndarray:
        return np.abs(self.outside_distance(x)) <= tol

    def snap_to_boundary(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 1).copy()
        x[:, 0] = np.clip(x[:, 0], self.lo, self.hi)
        mid = 0.5 * (self.lo + self.hi)
        x[:, 0] = np.where(x[:, 0] <= mid, self.lo, self.hi)
        return x

    def outward_normal(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 1)
        mid = 0.5 * (self.lo + self.hi)
        return np.where(x <= mid, -1.0, 1.0).reshape(-1, 1)

    def boundary_samples(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        pts = np.array([[self.lo], [self.hi]])
        nrm = np.array([[-1.0], [1.0]])
        return pts, nrm

    def interior_grid(self, n: int) -> np.ndarray:
        return np.linspace(self.lo, self.hi, n + 2)[1:-1].reshape(-1, 1)


@dataclass(frozen=True)
class Box:
    """The 2D axis-aligned domain (lo[0], hi[0]) x (lo[1], hi[1])."""

    lo: tuple[float, float]
    hi: tuple[float, float]

    dim = 2

    def __post_init__(self):
        if not (self.hi[0] > self.lo[0] and self.hi[1] > self.lo[1]):
            raise ValueError("empty box")

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.hi[0] - self.lo[0], self.hi[1] - self.lo[1]))

    def _lo(self) -> np.ndarray:
        return np.array(self.lo)

    def _hi(self) -> np.ndarray:
        return np.array(self.hi)

    def outside_distance(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        v = np.maximum(self._lo()[None, :] - x, x - self._hi()[None, :])
        return v.max(axis=1)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return self.outside_distance(x) <= tol

    def on_boundary(self, x: np.ndarray, tol: float) -> np.ndarray:
        return np.abs(self.outside_distance(x)) <= tol

    def snap_to_boundary(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 2).copy()
        lo, hi = self._lo(), self._hi()
        clipped = np.clip(x, lo[None, :], hi[None, :])
        # push the coordinate closest to (or past) a wall exactly onto it
        v = np.maximum(lo[None, :] - x, x - hi[None, :])
        d = np.argmax(v, axis=1)
        rows = np.arange(len(x))
        wall_lo = np.abs(clipped[rows, d] - lo[d]) <= np.abs(clipped[rows, d] - hi[d])
        clipped[rows, d] = np.where(wall_lo, lo[d], hi[d])
        return clipped

    def outward_normal(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        lo, hi = self._lo(), self._hi()
        v = np.maximum(lo[None, :] - x, x - hi[None, :])
        d = np.argmax(v, axis=1)
        rows = np.arange(len(x))
        sign = np.where(np.abs(x[rows, d] - lo[d]) <= np.abs(x[rows, d] - hi[d]), -1.0, 1.0)
        out = np.zeros_like(x)
        out[rows, d] = sign
        return out

    def boundary_samples(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self._lo(), self._hi()
        s = np.linspace(0.0, 1.0, n + 2)[1:-1]
        pts = []
        nrm = []
        for x, nx in ((lo[0], -1.0), (hi[0], 1.0)):
            pts.append(np.stack([np.full_like(s, x), lo[1] + s * (hi[1] - lo[1])], axis=1))
            nrm.append(np.tile([nx, 0.0], (len(s), 1)))
        for y, ny in ((lo[1], -1.0), (hi[1], 1.0)):
            pts.append(np.stack([lo[0] + s * (hi[0] - lo[0]), np.full_like(s, y)], axis=1))
            nrm.append(np.tile([0.0, ny], (len(s), 1)))
        return np.concatenate(pts), np.concatenate(nrm)

    def interior_grid(self, n: int) -> np.ndarray:
        lo, hi = self._lo(), self._hi()
        xs = np.linspace(lo[0], hi[0], n + 2)[1:-1]
        ys = np.linspace(lo[1], hi[1], n + 2)[1:-1]
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)


@dataclass(eq=False)
class FlowValidation:
    lipschitz_estimate: float
    div_consistency_max: float
    div_is_fd: bool
    n_points: int


@dataclass(eq=False)
class FlowProblem:
    """Velocity field a(x,t), reaction c(x,t), initial and inflow data.

    ``div_a`` may be omitted; a central finite-difference fallback over ``a``
    is then used and flagged via ``div_is_fd``.  ``grad_a`` is optional and
    used only for validation.  ``exact``, when present, is a closed-form
    solution used for cross-checks; the solver itself never requires it.
    """

    name: str
    domain: Interval | Box
    a: Callable[[np.ndarray, float], np.ndarray]
    c: Callable[[np.ndarray, float], np.ndarray]
    u0: Callable[[np.ndarray], np.ndarray]
    u_D: Callable[[np.ndarray, np.ndarray | float], np.ndarray]
    div_a: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    grad_a: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    exact: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def div_is_fd(self) -> bool:
        return self.div_a is None

    def div(self, x: np.ndarray, t: float) -> np.ndarray:
        if self.div_a is not None:
            return np.asarray(self.div_a(x, t), dtype=float).reshape(len(np.atleast_2d(x)))
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        h = 1e-6 * self.domain.diameter
        out = np.zeros(len(x))
        for d in range(self.dim):
            step = np.zeros(self.dim)
            step[d] = h
            out += (self.a(x + step, t)[:, d] - self.a(x - step, t)[:, d]) / (2.0 * h)
        return out

    def validate(self, t_samples: Sequence[float] = (0.0, 1.0), n_points: int = 200,
                 seed: int = 0) -> FlowValidation:
        """Sampled diagnostics: velocity Lipschitz estimate, div consistency."""
        rng = np.random.default_rng(seed)
        dim = self.dim
        if dim == 1:
            lo, hi = self.domain.lo, self.domain.hi
            pts = rng.uniform(lo, hi, size=(n_points, 1))
        else:
            lo, hi = self.domain._lo(), self.domain._hi()
            pts = rng.uniform(lo, hi, size=(n_points, 2))
        delta = 1e-3 * self.domain.diameter
        direc = rng.normal(size=(n_points, dim))
        direc /= np.linalg.norm(direc, axis=1, keepdims=True)
        lip = 0.0
        div_err = 0.0
        for t in t_samples:
            a0 = self.a(pts, t)
            a1 = self.a(pts + delta * direc, t)
            lip = max(lip, float(np.max(np.linalg.norm(a1 - a0, axis=1)) / delta))
            if self.grad_a is not None and self.div_a is not None:
                g = np.asarray(self.grad_a(pts, t), dtype=float).reshape(n_points, dim, dim)
                trace = np.einsum("ndd->n", g)
                div_err = max(div_err, float(np.max(np.abs(trace - self.div(pts, t)))))
        return FlowValidation(
            lipschitz_estimate=lip,
            div_consistency_max=div_err,
            div_is_fd=self.div_is_fd,
            n_points=n_points,
        )
