"""Explicit time stepping for the semi-discrete DG system."""

from __future__ import annotations

import bisect
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import Basis, DGField, l2_project, make_quadrature, _element_maps
from .flow import FlowProblem
from .mesh import Mesh
from .operator import SemiDiscreteRHS

__all__ = ["EvolveConfig", "InstabilityError", "cfl_dt", "step", "evolve"]

SCHEMES = ("ssprk3", "rk4")


class InstabilityError(RuntimeError):
    """The solution became non-finite during time stepping."""

    def __init__(self, t: float, dt: float, message: str | None = None):
        if message is None:
            message = (f"non-finite solution coefficients after step at t={t:.6g} "
                       f"with dt={dt:.6g}")
        super().__init__(message)
        self.t = t
        self.dt = dt


@dataclass
class EvolveConfig:
    t_end: float
    cfl: float = 0.2
    scheme: str = "rk4"
    sample_times: Optional[Sequence[float]] = None
    sample_every: Optional[int] = None
    fixed_dt: Optional[float] = None
    deterministic: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must be in (0, 1], got {self.cfl}")
        if self.t_end < 0.0:
            raise ValueError("t_end must be non-negative")
        if self.sample_times is not None:
            st = [float(s) for s in self.sample_times]
            if any(s1 <= s0 for s0, s1 in zip(st, st[1:])):
                raise ValueError("sample_times must be strictly increasing")
            if st and (st[0] < 0.0 or st[-1] > self.t_end):
                raise ValueError("sample_times must lie in [0, t_end]")
            self.sample_times = st
        if self.sample_every is not None and self.sample_every < 1:
            raise ValueError("sample_every must be a positive step count")
        if self.fixed_dt is not None and self.fixed_dt <= 0.0:
            raise ValueError("fixed_dt must be positive")
        if os.environ.get("DG_DETERMINISTIC") == "1":
            self.deterministic = True


def cfl_dt(mesh: Mesh, flow: FlowProblem, p: int, cfl: float, t: float,
           t_end: float) -> float:
    """dt = cfl * min_K h_K / (max_K|a| * (2p+1)); remaining time if a is ~ 0.

    The per-element velocity magnitude is sampled at low-order quadrature
    points plus the element vertices at time t; vertices matter because the
    max of a monotone field sits on the element boundary.
    """
    quad = make_quadrature(mesh.dim, 2)
    corners = np.concatenate([np.zeros((1, mesh.dim)), np.eye(mesh.dim)])
    ref = np.concatenate([quad.points, corners])
    origin, jac, _ = _element_maps(mesh)
    x = origin[:, None, :] + np.einsum("eij,qj->eqi", jac, ref)
    a = np.asarray(flow.a(x.reshape(-1, mesh.dim), t), dtype=float)
    amax = np.linalg.norm(a, axis=1).reshape(mesh.n_elements, len(ref)).max(axis=1)
    scale = float(np.max(amax))
    if scale * mesh.h_max < 1e-14 * max(1.0, mesh.h_max):
        return max(t_end - t, 0.0)
    # elements where a vanishes locally impose no restriction
    ratio = np.where(amax > 1e-14 * scale, mesh.h / np.maximum(amax, 1e-300), np.inf)
    return cfl * float(ratio.min()) / (2 * p + 1)


def step(op: SemiDiscreteRHS, u: DGField, t: float, dt: float,
         scheme: str = "rk4") -> DGField:
    """One explicit step from t to t + dt; raises InstabilityError on blow-up."""
    if scheme == "ssprk3":
        k1 = op.rhs(u, t)
        u1 = replace(u, coeffs=u.coeffs + dt * k1.coeffs)
        k2 = op.rhs(u1, t + dt)
        u2 = replace(u, coeffs=0.75 * u.coeffs + 0.25 * (u1.coeffs + dt * k2.coeffs))
        k3 = op.rhs(u2, t + 0.5 * dt)
        new = (u.coeffs + 2.0 * (u2.coeffs + dt * k3.coeffs)) / 3.0
    elif scheme == "rk4":
        k1 = op.rhs(u, t).coeffs
        k2 = op.rhs(replace(u, coeffs=u.coeffs + 0.5 * dt * k1), t + 0.5 * dt).coeffs
        k3 = op.rhs(replace(u, coeffs=u.coeffs + 0.5 * dt * k2), t + 0.5 * dt).coeffs
        k4 = op.rhs(replace(u, coeffs=u.coeffs + dt * k3), t + dt).coeffs
        new = u.coeffs + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if not np.all(np.isfinite(new)):
        raise InstabilityError(t, dt)
    return replace(u, coeffs=new, time=t + dt)


def evolve(flow: FlowProblem, mesh: Mesh, basis: Basis, config: EvolveConfig,
           observer: Optional[Callable[[float, DGField], None]] = None,
           op: Optional[SemiDiscreteRHS] = None) -> DGField:
    """March the projected initial state to t_end.

    The observer is invoked at t = 0, at every requested sample time (reached
    bit-exactly by shortening the step), every ``sample_every``-th step when
    that is set, and at t_end.
    """
    if op is None:
        op = SemiDiscreteRHS(mesh, basis, flow)
    u = l2_project(lambda x, t: flow.u0(x), 0.0, mesh, basis)

    boundaries = sorted(set(config.sample_times or []) | {config.t_end})
    sample_set = set(config.sample_times or [])

    last_observed = None

    def observe(t: float, fld: DGField) -> None:
        nonlocal last_observed
        if observer is not None and t != last_observed:
            observer(t, fld)
            last_observed = t

    observe(0.0, u)
    t = 0.0
    steps = 0
    while t < config.t_end:
        if config.fixed_dt is not None:
            dt = config.fixed_dt
        else:
            dt = cfl_dt(mesh, flow, basis.degree, config.cfl, t, config.t_end)
        i = bisect.bisect_right(boundaries, t)
        next_b = boundaries[i] if i < len(boundaries) else config.t_end
        landed = dt >= next_b - t
        if landed:
            dt = next_b - t
        u = step(op, u, t, dt, config.scheme)
        t = next_b if landed else t + dt
        u.time = t
        steps += 1
        if landed and (next_b in sample_set or next_b == config.t_end):
            observe(t, u)
        elif config.sample_every is not None and steps % config.sample_every == 0:
            observe(t, u)
    observe(config.t_end, u)
    return u
