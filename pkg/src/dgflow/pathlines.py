"""Particle paths of the velocity field and the scaling field built on them.

A particle at (x, t) is traced by integrating dS/dtau = a(S, tau).  Tracing
backward until the path leaves the domain (or reaches tau = 0) yields the
origin (x0, t0); the elapsed time mu1 = t - t0 is how long the particle has
been inside.  The scaled field mu = lam * mu1 grows along every path at the
constant rate lam, which is what makes it useful as an exponential weight.

Integration uses an embedded Dormand-Prince 4(5) pair with a shared adaptive
step per batch of particles launched at a common time.  Exits are located by
bisection over the last accepted step (re-integrated with single fourth-order
substeps) down to a boundary tolerance of 1e-12 * diameter, then snapped onto
the boundary.  Coefficient callables are evaluated at trial points in a small
collar outside the domain, and during bisection the time argument is an array
aligned with the points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .flow import FlowProblem, Interval

__all__ = [
    "PathlineOrigin", "TraceBatch", "SamplingSpec", "MuField",
    "ResidenceReport", "MarginReport", "LipschitzReport",
    "trace_backward", "trace_backward_batch", "trace_forward",
    "trace_forward_batch", "mu1", "residence_time", "build_mu",
    "ellipticity_margin", "lipschitz_estimates", "exact_solution",
    "CharacteristicSolution", "ZeroMu", "LinearTimeMu",
]

# Dormand-Prince 4(5) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = (
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4

_STATUS_OK = "ok"
_STATUS_MAX_STEPS = "max_steps"
_STATUS_LEFT = "left_domain_tolerance"


@dataclass
class PathlineOrigin:
    """Where the particle observed at (x, t) entered: the initial slice or the
    inlet, plus the elapsed inside-time mu1 = t - t0."""

    x0: np.ndarray
    t0: float
    kind: str                       # "initial" (t0 = 0) or "inlet" (x0 on boundary)
    trace_status: str = _STATUS_OK  # ok | max_steps | left_domain_tolerance
    mu1: float = 0.0
    c_integral: Optional[float] = None
    path_t: Optional[np.ndarray] = None
    path_x: Optional[np.ndarray] = None


@dataclass
class TraceBatch:
    """Endpoints of a batch of traces launched at one common time."""

    x_end: np.ndarray              # (n, dim), snapped to the boundary where exited
    t_end: np.ndarray              # (n,)
    exited: np.ndarray             # (n,) bool
    status: np.ndarray             # (n,) str
    c_integral: Optional[np.ndarray] = None   # (n,), signed along increasing time
    n_steps: int = 0

    def __len__(self) -> int:
        return len(self.t_end)


@dataclass
class SamplingSpec:
    """Grids and budgets for the sampled diagnostics.

    n_space points per space axis, n_time points in time over [0, t_max];
    tol is the trace tolerance; n_pairs and pair_scale control the random
    difference quotients of the Lipschitz estimates.
    """

    n_space: int = 64
    n_time: int = 64
    t_max: float = 10.0
    tol: float = 1e-8
    seed: int = 0
    n_pairs: int = 200
    pair_scale: float = 1e-3

    def __post_init__(self):
        if self.n_space < 2 or self.n_time < 2:
            raise ValueError("need at least 2 sample points per axis")
        if self.t_max <= 0.0:
            raise ValueError("t_max must be positive")
        if not 0.0 < self.pair_scale < 0.5:
            raise ValueError("pair_scale must be a small positive fraction")


def _rhs(flow: FlowProblem, y: np.ndarray, t, with_c: bool) -> np.ndarray:
    """Right-hand side of the trace ODE; t may be scalar or per-row array."""
    dim = flow.dim
    x = y[:, :dim]
    a = np.asarray(flow.a(x, t), dtype=float).reshape(len(x), dim)
    if not with_c:
        return a
    c = np.asarray(flow.c(x, t), dtype=float).reshape(len(x))
    return np.concatenate([a, c[:, None]], axis=1)


def _rk4_sub(flow: FlowProblem, y0: np.ndarray, t0, h, with_c: bool) -> np.ndarray:
    """One fourth-order substep with per-row step sizes h."""
    h = np.asarray(h, dtype=float)
    hc = h[:, None] if h.ndim else h
    k1 = _rhs(flow, y0, t0, with_c)
    k2 = _rhs(flow, y0 + 0.5 * hc * k1, t0 + 0.5 * h, with_c)
    k3 = _rhs(flow, y0 + 0.5 * hc * k2, t0 + 0.5 * h, with_c)
    k4 = _rhs(flow, y0 + hc * k3, t0 + h, with_c)
    return y0 + (hc / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _bisect_exit(flow: FlowProblem, y0: np.ndarray, t0: np.ndarray, h: np.ndarray,
                 with_c: bool, btol: float):
    """Locate the boundary crossing inside accepted steps (t0, t0 + h).

    y0 rows are the pre-step states (inside), the full step lands outside.
    Returns the last inside state, its time, and a flag for rows where the
    crossing could not be pinned within the boundary tolerance.
    """
    domain = flow.domain
    dim = flow.dim
    lo = np.zeros(len(h))
    hi = np.ones(len(h))
    y_lo = y0.copy()
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        ym = _rk4_sub(flow, y0, t0, mid * h, with_c)
        outside = domain.outside_distance(ym[:, :dim]) > btol
        hi = np.where(outside, mid, hi)
        lo = np.where(outside, lo, mid)
        y_lo = np.where(outside[:, None], y_lo, ym)
    t_exit = t0 + lo * h
    bad = ~np.isfinite(y_lo).all(axis=1)
    return y_lo, t_exit, bad


def _domain_clamp(domain, x: np.ndarray) -> np.ndarray:
    if isinstance(domain, Interval):
        lo, hi = np.array([domain.lo]), np.array([domain.hi])
    else:
        lo, hi = np.array(domain.lo), np.array(domain.hi)
    return np.clip(x, lo[None, :], hi[None, :])


def _trace(flow: FlowProblem, xs: np.ndarray, t_start: float, t_target: float,
           tol: float, with_c: bool, adaptive: bool, max_steps: int,
           record: Optional[list] = None) -> TraceBatch:
    """Integrate all particles from the shared time t_start toward t_target.

    Particles leaving the domain stop at their (bisected, snapped) exit; the
    rest stop at t_target.  The batch shares one adaptive step, controlled by
    the max norm of the embedded error over still-active particles with the
    acceptance rule err <= tol * |step|.
    """
    domain = flow.domain
    dim = flow.dim
    diam = domain.diameter
    btol = 1e-12 * diam
    collar = 1e-9 * diam
    n = len(xs)
    d = dim + 1 if with_c else dim

    od0 = domain.outside_distance(xs)
    if np.any(od0 > collar):
        worst = float(od0.max())
        raise ValueError(f"trace start lies outside the domain by {worst:.3e}")

    y = np.zeros((n, d))
    y[:, :dim] = np.where(od0[:, None] > 0, _domain_clamp(domain, xs), xs)
    x_end = y[:, :dim].copy()
    t_end = np.full(n, t_start)
    exited = np.zeros(n, dtype=bool)
    status = np.full(n, _STATUS_OK, dtype="<U24")
    c_int = np.zeros(n) if with_c else None
    active = np.ones(n, dtype=bool)

    span = t_target - t_start
    direction = float(np.sign(span))
    if record is not None:
        record.append((t_start, y[:, :dim].copy()))

    # particles starting on the boundary and moving outward exit at once
    if direction != 0.0:
        onb = od0 >= -btol
        if np.any(onb):
            v = direction * np.asarray(flow.a(y[onb, :dim], t_start),
                                       dtype=float).reshape(-1, dim)
            nrm = domain.outward_normal(y[onb, :dim])
            going_out = np.einsum("ij,ij->i", v, nrm) > 0.0
            idx = np.flatnonzero(onb)[going_out]
            if len(idx):
                x_end[idx] = domain.snap_to_boundary(y[idx, :dim])
                exited[idx] = True
                active[idx] = False

    if direction == 0.0 or not active.any():
        return TraceBatch(x_end, t_end, exited, status, c_int, 0)

    # deferred exit events: (global index, pre-step state, pre-step time, step)
    pend_idx: list[np.ndarray] = []
    pend_y: list[np.ndarray] = []
    pend_t: list[np.ndarray] = []
    pend_h: list[np.ndarray] = []

    tau = t_start
    dt_max = min(1.0, abs(span))
    dt_min = 1e-12 * max(1.0, abs(span))
    speed = np.linalg.norm(_rhs(flow, y[active], tau, False), axis=1).max()
    if adaptive:
        h_abs = min(dt_max, abs(span), 0.1 * diam / max(speed, 1e-12))
    else:
        h_abs = min(max(tol, 1e-14) ** 0.25 * diam, abs(span))
    h_abs = max(h_abs, dt_min)

    steps = 0
    while active.any() and steps < max_steps:
        steps += 1
        left = (t_target - tau) * direction
        landing = h_abs >= left
        h = direction * (left if landing else h_abs)
        idx = np.flatnonzero(active)
        ya = y[idx]

        k = np.empty((7, len(idx), d))
        k[0] = _rhs(flow, ya, tau, with_c)
        for s, row in enumerate(_DP_A, start=1):
            incr = np.tensordot(row, k[:s], axes=(0, 0))
            k[s] = _rhs(flow, ya + h * incr, tau + _DP_C[s] * h, with_c)
        y5 = ya + h * np.tensordot(_DP_B5, k, axes=(0, 0))
        err = abs(h) * float(np.abs(np.tensordot(_DP_E, k, axes=(0, 0))).max())

        if adaptive:
            if err > tol * abs(h) and abs(h) > dt_min:
                h_abs = abs(h) * min(1.0, max(0.2, 0.9 * (tol * abs(h) / err) ** 0.2))
                continue
            grow = 5.0 if err == 0.0 else 0.9 * (tol * abs(h) / err) ** 0.2
            h_abs = min(dt_max, abs(h) * min(5.0, max(0.2, grow)))
            h_abs = max(h_abs, dt_min)

        tau_new = t_target if landing else tau + h
        bad = ~np.isfinite(y5).all(axis=1)
        if bad.any():
            b = idx[bad]
            status[b] = _STATUS_LEFT
            x_end[b] = y[b, :dim]
            t_end[b] = tau
            active[b] = False
        leaving = ~bad & (domain.outside_distance(y5[:, :dim]) > btol)
        if leaving.any():
            lv = idx[leaving]
            pend_idx.append(lv)
            pend_y.append(y[lv].copy())
            pend_t.append(np.full(len(lv), tau))
            pend_h.append(np.full(len(lv), h))
            active[lv] = False
        keep = ~bad & ~leaving
        y[idx[keep]] = y5[keep]
        tau = tau_new
        if record is not None and keep.any():
            record.append((tau, y[idx[keep], :dim].copy()))
        if tau == t_target:
            rest = np.flatnonzero(active)
            x_end[rest] = y[rest, :dim]
            t_end[rest] = tau
            active[rest] = False

    stuck = np.flatnonzero(active)
    if len(stuck):
        status[stuck] = _STATUS_MAX_STEPS
        x_end[stuck] = y[stuck, :dim]
        t_end[stuck] = tau

    if pend_idx:
        gi = np.concatenate(pend_idx)
        y_lo, t_exit, bad = _bisect_exit(flow, np.concatenate(pend_y),
                                         np.concatenate(pend_t),
                                         np.concatenate(pend_h), with_c, btol)
        x_end[gi] = domain.snap_to_boundary(y_lo[:, :dim])
        t_end[gi] = t_exit
        exited[gi] = True
        status[gi] = np.where(bad, _STATUS_LEFT, status[gi])
        if with_c:
            y[gi] = y_lo
        if record is not None:
            for g in np.argsort(t_exit * direction):
                record.append((float(t_exit[g]), x_end[gi[g]][None, :].copy()))

    x_end = np.where(domain.outside_distance(x_end)[:, None] > 0,
                     _domain_clamp(domain, x_end), x_end)
    if with_c:
        c_int = y[:, dim].copy()
    return TraceBatch(x_end, t_end, exited, status, c_int, steps)


def trace_backward_batch(flow: FlowProblem, xs: np.ndarray, t: float,
                         tol: float = 1e-8, with_c: bool = False,
                         adaptive: bool = True,
                         max_steps: int = 100_000) -> TraceBatch:
    """Trace every row of xs backward from the common time t to its origin."""
    xs = np.asarray(xs, dtype=float).reshape(-1, flow.dim)
    return _trace(flow, xs, float(t), 0.0, tol, with_c, adaptive, max_steps)


def trace_forward_batch(flow: FlowProblem, xs: np.ndarray, t: float, t_end: float,
                        tol: float = 1e-8, with_c: bool = False,
                        adaptive: bool = True,
                        max_steps: int = 100_000) -> TraceBatch:
    """Trace forward from time t until exit or t_end, whichever comes first."""
    xs = np.asarray(xs, dtype=float).reshape(-1, flow.dim)
    if t_end < t:
        raise ValueError("t_end must be >= t for a forward trace")
    return _trace(flow, xs, float(t), float(t_end), tol, with_c, adaptive, max_steps)


def _origin_kinds(batch: TraceBatch) -> np.ndarray:
    kinds = np.where(batch.exited, "inlet", "initial")
    # an exit located at (numerically) time zero is an initial-slice origin
    return np.where(batch.exited & (batch.t_end <= 1e-13), "initial", kinds)


def trace_backward(flow: FlowProblem, x: np.ndarray, t: float, tol: float = 1e-8,
                   with_c: bool = False, record_path: bool = False,
                   adaptive: bool = True,
                   max_steps: int = 100_000) -> PathlineOrigin:
    """Origin of the particle observed at (x, t); see the module docstring."""
    x = np.asarray(x, dtype=float).reshape(1, flow.dim)
    rec: Optional[list] = [] if record_path else None
    batch = _trace(flow, x, float(t), 0.0, tol, with_c, adaptive, max_steps, rec)
    kind = str(_origin_kinds(batch)[0])
    origin = PathlineOrigin(
        x0=batch.x_end[0].copy(),
        t0=float(batch.t_end[0]),
        kind=kind,
        trace_status=str(batch.status[0]),
        mu1=float(t - batch.t_end[0]),
        c_integral=None if batch.c_integral is None else -float(batch.c_integral[0]),
    )
    if record_path and rec:
        origin.path_t = np.array([r[0] for r in rec])
        origin.path_x = np.concatenate([r[1] for r in rec], axis=0)
    return origin


def trace_forward(flow: FlowProblem, x: np.ndarray, t: float, t_end: float,
                  tol: float = 1e-8) -> tuple[np.ndarray, float, bool, str]:
    """Forward endpoint (x, t, exited, status) of a single particle."""
    batch = trace_forward_batch(flow, x, t, t_end, tol)
    return batch.x_end[0].copy(), float(batch.t_end[0]), bool(batch.exited[0]), \
        str(batch.status[0])


def mu1(flow: FlowProblem, x: np.ndarray, t: float, tol: float = 1e-8):
    """Time the particle at (x, t) has spent inside the domain.

    x may be a single point (returns a float) or an (n, dim) stack sharing
    the time t (returns an (n,) array traced as one batch).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    batch = trace_backward_batch(flow, x.reshape(-1, flow.dim), t, tol)
    out = float(t) - batch.t_end
    return float(out[0]) if single else out


@dataclass
class ResidenceReport:
    """Longest observed inside-time over seeded forward and backward traces."""

    t_hat: float
    possibly_unbounded: bool
    t_max: float
    n_forward: int
    n_backward: int
    argmax_kind: str = ""
    argmax_x: Optional[np.ndarray] = None
    argmax_t: float = 0.0


def residence_time(flow: FlowProblem, domain, t_max: float, n_samples: int = 24,
                   tol: float = 1e-8) -> ResidenceReport:
    """Estimate the longest time any particle spends inside the domain.

    Forward traces are seeded on the inflow part of the boundary at times in
    [0, t_max/2] and on the whole closure at time 0; backward traces sweep an
    interior space-time grid.  Any forward trace still inside at t_max sets
    the possibly_unbounded flag (it may just be slow, hence "possibly").
    """
    if not math.isfinite(t_max) or t_max <= 0:
        raise ValueError("t_max must be finite and positive")
    best = 0.0
    best_kind, best_x, best_t = "", None, 0.0
    unbounded = False
    n_fwd = 0
    n_bwd = 0

    bpts, bnrm = domain.boundary_samples(max(4, n_samples))
    seed_times = np.linspace(0.0, t_max / 2.0, max(3, n_samples // 4))
    for t0 in seed_times:
        an = np.einsum("ij,ij->i",
                       np.asarray(flow.a(bpts, float(t0)), dtype=float), bnrm)
        inflow = an < 0.0
        if not inflow.any():
            continue
        fb = trace_forward_batch(flow, bpts[inflow], float(t0), t_max, tol)
        n_fwd += len(fb)
        res = fb.t_end - t0
        unbounded |= bool(np.any(~fb.exited & (fb.status == _STATUS_OK)))
        j = int(np.argmax(res))
        if res[j] > best:
            best = float(res[j])
            best_kind, best_x, best_t = "inlet-seed", bpts[inflow][j].copy(), float(t0)

    slice_pts = np.concatenate([domain.interior_grid(n_samples), bpts])
    fb = trace_forward_batch(flow, slice_pts, 0.0, t_max, tol)
    n_fwd += len(fb)
    unbounded |= bool(np.any(~fb.exited & (fb.status == _STATUS_OK)))
    j = int(np.argmax(fb.t_end))
    if fb.t_end[j] > best:
        best = float(fb.t_end[j])
        best_kind, best_x, best_t = "initial-slice", slice_pts[j].copy(), 0.0

    interior = domain.interior_grid(n_samples)
    for tq in np.linspace(0.0, t_max, max(3, n_samples // 4))[1:]:
        m = mu1(flow, interior, float(tq), tol)
        n_bwd += len(interior)
        j = int(np.argmax(m))
        if m[j] > best:
            best = float(m[j])
            best_kind, best_x, best_t = "backward", interior[j].copy(), float(tq)

    return ResidenceReport(t_hat=best, possibly_unbounded=unbounded, t_max=t_max,
                           n_forward=n_fwd, n_backward=n_bwd,
                           argmax_kind=best_kind, argmax_x=best_x, argmax_t=best_t)


@dataclass
class MuField:
    """The scaled inside-time field mu(x, t) = lam * mu1(x, t).

    lam is the magnitude of the most negative sampled value of c - div(a)/2
    (zero when none is negative) plus the target rate gamma0, so that mu
    climbs along particle paths fast enough to dominate the reaction deficit.
    The sampling grid and the residence estimate are recorded alongside.
    """

    flow: FlowProblem
    gamma0: float
    lam: float
    sampled_min: float
    grid_space: np.ndarray
    grid_time: np.ndarray
    residence: ResidenceReport
    tol: float = 1e-8
    mu_max_sampled: float = 0.0

    @property
    def t_hat(self) -> float:
        return self.residence.t_hat

    def mu1(self, x: np.ndarray, t: float, tol: Optional[float] = None):
        return mu1(self.flow, x, t, self.tol if tol is None else tol)

    def mu(self, x: np.ndarray, t: float, tol: Optional[float] = None):
        return self.lam * self.mu1(x, t, tol)


class ZeroMu:
    """The trivial weight mu = 0 (no scaling)."""

    lam = 0.0

    def mu(self, x: np.ndarray, t: float, tol: Optional[float] = None):
        x = np.asarray(x, dtype=float)
        return 0.0 if x.ndim <= 1 else np.zeros(len(x))


class LinearTimeMu:
    """The purely time-dependent weight mu = rate * t."""

    def __init__(self, rate: float):
        self.lam = float(rate)

    def mu(self, x: np.ndarray, t: float, tol: Optional[float] = None):
        x = np.asarray(x, dtype=float)
        v = self.lam * float(t)
        return v if x.ndim <= 1 else np.full(len(x), v)


def build_mu(flow: FlowProblem, gamma0: float,
             spec: Optional[SamplingSpec] = None) -> MuField:
    """Construct the scaled inside-time field for the flow.

    The infimum of c - div(a)/2 is replaced by a minimum over the recorded
    space-time grid; the residence estimate may carry a possibly_unbounded
    flag, in which case the field is still usable but its sampled maximum is
    only a lower bound on the true supremum.
    """
    if gamma0 <= 0.0:
        raise ValueError("gamma0 must be positive")
    spec = spec or SamplingSpec()
    domain = flow.domain
    grid_space = domain.interior_grid(spec.n_space)
    grid_time = np.linspace(0.0, spec.t_max, spec.n_time)
    smin = math.inf
    for t in grid_time:
        vals = np.asarray(flow.c(grid_space, float(t)), dtype=float) \
            - 0.5 * flow.div(grid_space, float(t))
        smin = min(smin, float(vals.min()))
    lam = abs(min(0.0, smin)) + gamma0
    residence = residence_time(flow, domain, spec.t_max,
                               n_samples=min(spec.n_space, 32), tol=spec.tol)
    fld = MuField(flow=flow, gamma0=gamma0, lam=lam, sampled_min=smin,
                  grid_space=grid_space, grid_time=grid_time,
                  residence=residence, tol=spec.tol)
    coarse = domain.interior_grid(min(12, spec.n_space))
    mx = 0.0
    for t in np.linspace(0.0, spec.t_max, min(8, spec.n_time)):
        mx = max(mx, float(np.max(fld.mu(coarse, float(t)))))
    fld.mu_max_sampled = mx
    return fld


@dataclass
class MarginReport:
    """Sampled minimum of d(mu)/dt + a.grad(mu) + c - div(a)/2."""

    margin: float
    arg_x: np.ndarray
    arg_t: float
    n_samples: int
    n_excluded: int
    excluded: np.ndarray          # (k, dim+1) rows of (x..., t)
    fd_dx: float
    fd_dt: float


def ellipticity_margin(mu, flow: FlowProblem,
                       spec: Optional[SamplingSpec] = None) -> MarginReport:
    """Check that the weight grows fast enough along the flow.

    mu is any object with .mu(x, t) (and .lam); derivatives are taken by
    central differences (space step 1e-5 * diameter, time step 1e-5) on a
    grid strictly inside the space-time cylinder.  Samples whose difference
    quotients blow up beyond 10 * lam * velocity-scale indicate a genuine
    discontinuity of mu (a tangential-inlet pathology) and are excluded and
    reported rather than folded into the minimum.
    """
    spec = spec or SamplingSpec()
    domain = flow.domain
    dim = flow.dim
    diam = domain.diameter
    dx = 1e-5 * diam
    dt = 1e-5
    tol_fd = min(spec.tol, 1e-10)
    lam = float(getattr(mu, "lam", 0.0))

    if isinstance(domain, Interval):
        lo = np.array([domain.lo])
        hi = np.array([domain.hi])
    else:
        lo = np.array(domain.lo)
        hi = np.array(domain.hi)
    pad = 2.0 * dx
    axes = [np.linspace(lo[d] + pad, hi[d] - pad, spec.n_space) for d in range(dim)]
    if dim == 1:
        xs = axes[0][:, None]
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        xs = np.stack([gx.ravel(), gy.ravel()], axis=1)
    t_lo = max(2.0 * dt, 1e-4 * spec.t_max)
    times = np.linspace(t_lo, spec.t_max, spec.n_time)

    best = math.inf
    arg_x = xs[0].copy()
    arg_t = float(times[0])
    excluded_rows = []
    n_samples = 0
    a_scale = 0.0

    for t in times:
        t = float(t)
        a_here = np.asarray(flow.a(xs, t), dtype=float).reshape(len(xs), dim)
        a_scale = max(a_scale, float(np.abs(a_here).max()))
        stencil = [xs]
        for d in range(dim):
            step = np.zeros(dim)
            step[d] = dx
            stencil.extend([xs + step, xs - step])
        vals = np.asarray(mu.mu(np.concatenate(stencil), t, tol=tol_fd))
        parts = vals.reshape(1 + 2 * dim, len(xs))
        mu_tp = np.asarray(mu.mu(xs, t + dt, tol=tol_fd))
        mu_tm = np.asarray(mu.mu(xs, t - dt, tol=tol_fd))

        fd_t = (mu_tp - mu_tm) / (2.0 * dt)
        adv = np.zeros(len(xs))
        fd_x_max = np.zeros(len(xs))
        for d in range(dim):
            fd_d = (parts[1 + 2 * d] - parts[2 + 2 * d]) / (2.0 * dx)
            adv += a_here[:, d] * fd_d
            fd_x_max = np.maximum(fd_x_max, np.abs(fd_d))

        react = np.asarray(flow.c(xs, t), dtype=float) - 0.5 * flow.div(xs, t)
        expr = fd_t + adv + react

        thr = 10.0 * lam * max(1.0, a_scale)
        blown = (np.abs(fd_t) > thr) | (fd_x_max * max(1.0, a_scale) > thr)
        n_samples += int((~blown).sum())
        for j in np.flatnonzero(blown):
            excluded_rows.append(np.append(xs[j], t))
        ok = np.flatnonzero(~blown)
        if len(ok):
            j = ok[int(np.argmin(expr[ok]))]
            if expr[j] < best:
                best = float(expr[j])
                arg_x = xs[j].copy()
                arg_t = t

    excluded = np.array(excluded_rows) if excluded_rows else np.zeros((0, dim + 1))
    return MarginReport(margin=best, arg_x=arg_x, arg_t=arg_t, n_samples=n_samples,
                        n_excluded=len(excluded), excluded=excluded,
                        fd_dx=dx, fd_dt=dt)


@dataclass
class LipschitzReport:
    """Sampled difference-quotient bounds for the weight field."""

    l_space: float
    l_time: float
    n_pairs: int
    a_min_inlet: float
    tangential_inlet: bool
    mu_max: float


def lipschitz_estimates(mu, spec: Optional[SamplingSpec] = None,
                        flow: Optional[FlowProblem] = None) -> LipschitzReport:
    """Largest observed |mu(x,t) - mu(y,t)| / |x - y| and its time analogue.

    Pairs are drawn at random nearby points (offset pair_scale * diameter) at
    shared times.  The inflow-steepness diagnostic min(-a.n) over the sampled
    inlet is reported too: when it is near zero the inlet is tangential
    somewhere and the space estimate is unreliable (tangential_inlet flag).
    """
    spec = spec or SamplingSpec()
    if flow is None:
        flow = mu.flow
    domain = flow.domain
    dim = flow.dim
    diam = domain.diameter
    rng = np.random.default_rng(spec.seed)
    k_times = min(spec.n_time, 12)
    per_t = max(4, spec.n_pairs // k_times)
    step = spec.pair_scale * diam
    dt_pair = spec.pair_scale * spec.t_max

    if isinstance(domain, Interval):
        lo = np.array([domain.lo])
        hi = np.array([domain.hi])
    else:
        lo = np.array(domain.lo)
        hi = np.array(domain.hi)

    l_space = 0.0
    l_time = 0.0
    mu_max = 0.0
    n_pairs = 0
    for t in rng.uniform(0.05 * spec.t_max, spec.t_max, size=k_times):
        t = float(t)
        base = lo + (hi - lo) * rng.uniform(0.0, 1.0, size=(per_t, dim))
        direction = rng.normal(size=(per_t, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        partner = base + step * direction
        flip = domain.outside_distance(partner) > 0
        partner[flip] = base[flip] - step * direction[flip]
        partner = np.clip(partner, lo[None, :], hi[None, :])
        sep = np.linalg.norm(partner - base, axis=1)
        vals = np.asarray(mu.mu(np.concatenate([base, partner]), t))
        va, vb = vals[:per_t], vals[per_t:]
        good = sep > 1e-14 * diam
        if good.any():
            l_space = max(l_space, float((np.abs(va - vb)[good] / sep[good]).max()))
        t2 = min(t + dt_pair, spec.t_max)
        if t2 > t:
            vals2 = np.asarray(mu.mu(base, t2))
            l_time = max(l_time, float(np.abs(vals2 - va).max() / (t2 - t)))
        mu_max = max(mu_max, float(vals.max()))
        n_pairs += per_t

    bpts, bnrm = domain.boundary_samples(32)
    a_min = math.inf
    a_scale = 0.0
    for t in np.linspace(0.0, spec.t_max, 8):
        an = np.einsum("ij,ij->i",
                       np.asarray(flow.a(bpts, float(t)), dtype=float), bnrm)
        a_scale = max(a_scale, float(np.abs(an).max()))
        inflow = an < 0.0
        if inflow.any():
            a_min = min(a_min, float((-an[inflow]).min()))
    tangential = a_min < 1e-6 * max(1.0, a_scale)
    return LipschitzReport(l_space=l_space, l_time=l_time, n_pairs=n_pairs,
                           a_min_inlet=a_min, tangential_inlet=tangential,
                           mu_max=mu_max)


def exact_solution(flow: FlowProblem, x: np.ndarray, t: float, tol: float = 1e-8):
    """Solution value at (x, t) by tracing back to the data it came from.

    Initial-slice origins use u0(x0), inlet origins use u_D(x0, t0); either is
    damped by exp(-integral of c along the path), accumulated during the same
    adaptive trace.  x may be one point (returns float) or an (n, dim) stack.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    xs = x.reshape(-1, flow.dim)
    batch = trace_backward_batch(flow, xs, t, tol, with_c=True)
    n_bad = int(np.sum(batch.status != _STATUS_OK))
    if n_bad:
        raise RuntimeError(f"{n_bad} of {len(batch)} traces did not finish cleanly "
                           f"(statuses: {sorted(set(batch.status))})")
    kinds = _origin_kinds(batch)
    out = np.zeros(len(batch))
    ini = kinds == "initial"
    if ini.any():
        out[ini] = np.asarray(flow.u0(batch.x_end[ini]), dtype=float).reshape(-1)
    inl = ~ini
    if inl.any():
        out[inl] = np.asarray(flow.u_D(batch.x_end[inl], batch.t_end[inl]),
                              dtype=float).reshape(-1)
    # c_integral is oriented along decreasing time; flip to along-path damping
    out *= np.exp(batch.c_integral)
    return float(out[0]) if single else out


class CharacteristicSolution:
    """Evaluator form of exact_solution, for error quadrature.

    smooth = True declares the interior jumps of this function negligible,
    which the face-norm error split relies on.
    """

    smooth = True

    def __init__(self, flow: FlowProblem, tol: float = 1e-8):
        self.flow = flow
        self.tol = tol

    def __call__(self, x: np.ndarray, t: float):
        return exact_solution(self.flow, x, t, self.tol)
