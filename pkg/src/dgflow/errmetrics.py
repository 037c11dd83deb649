"""Error norms for DG fields: volume L2, inflow-weighted face norms, and
their accumulation in time, plus observed convergence orders.

The face norms weight traces by sqrt|a.n|, so jumps only count where the
velocity actually crosses the face.  Interior jumps of a smooth reference
solution vanish, which lets the error jump be computed from the discrete
field alone; the reference evaluator must declare this by carrying a
``smooth = True`` attribute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from ._geometry import face_tables, volume_tables
from .basis import DGField
from .flow import FlowProblem

__all__ = ["ErrorSeries", "FaceNorms", "l2_error", "face_norms", "accumulate",
           "eoc", "eoc_with_flags", "smooth_evaluator", "NOISE_FLOOR"]

NOISE_FLOOR = 1e-13


def smooth_evaluator(fn: Callable) -> Callable:
    """Mark an evaluator as jump-free so face_norms may use it."""
    fn.smooth = True
    return fn


def l2_error(u_h: DGField, exact: Union[DGField, Callable, None], t: float,
             exactness: Optional[int] = None) -> float:
    """Volume L2 norm of u_h - exact at time t.

    exact is a vectorised evaluator (x, t) -> values, another DGField on the
    same mesh and basis, or None (giving the plain norm of u_h).  Quadrature
    defaults to exactness 2p + 4, two degrees above assembly, so that the
    measured error is not an artifact of the assembly rule.
    """
    basis = u_h.basis
    if exactness is None:
        exactness = 2 * basis.degree + 4
    if isinstance(exact, DGField):
        if exact.mesh is not u_h.mesh or exact.basis.degree != basis.degree:
            raise ValueError("DGField reference must share mesh and basis")
        return (u_h - exact).norm_l2()
    vol = volume_tables(u_h.mesh, basis, exactness)
    vals = np.einsum("em,qm->eq", u_h.coeffs, vol.phi)
    if exact is not None:
        pts = vol.x.reshape(-1, u_h.mesh.dim)
        ref = np.asarray(exact(pts, t), dtype=float).reshape(vals.shape)
        vals = vals - ref
    err_sq = np.einsum("q,e,eq->", vol.quad.weights, vol.det, vals ** 2)
    return math.sqrt(max(err_sq, 0.0))


@dataclass
class FaceNorms:
    jump_sq: float
    boundary_sq: float


def face_norms(u_h: DGField, flow: FlowProblem, t: float,
               exact: Optional[Callable] = None,
               exactness: Optional[int] = None) -> FaceNorms:
    """Velocity-weighted squared face norms of the error at time t.

    jump_sq sums |a.n| [u_h]^2 over interior faces (each crossing counted
    once); boundary_sq sums |a.n| e^2 over the whole boundary with
    e = exact - u_h, or e = u_h when exact is absent (the pure size of the
    trace, used by stability studies).  A supplied exact evaluator must be
    declared smooth, since the interior error jump is taken to be -[u_h].
    """
    if exact is not None and not getattr(exact, "smooth", False):
        raise ValueError("face_norms needs exact.smooth = True; wrap the "
                         "evaluator with smooth_evaluator")
    basis = u_h.basis
    if exactness is None:
        exactness = 2 * basis.degree + 4
    fac = face_tables(u_h.mesh, basis, exactness)
    an = np.einsum("fqd,fd->fq", np.asarray(
        flow.a(fac.x.reshape(-1, u_h.mesh.dim), t), dtype=float
    ).reshape(fac.x.shape), fac.normal)
    wmeas = fac.w[None, :] * fac.measure[:, None]
    u_l = np.einsum("fqm,fm->fq", fac.phi_left, u_h.coeffs[fac.left])
    interior = fac.interior

    jump_sq = 0.0
    if interior.any():
        u_r = np.einsum("fqm,fm->fq", fac.phi_right[interior],
                        u_h.coeffs[fac.right[interior]])
        jump = u_l[interior] - u_r
        jump_sq = float(np.sum(wmeas[interior] * np.abs(an[interior]) * jump ** 2))

    boundary_sq = 0.0
    bnd = ~interior
    if bnd.any():
        e = u_l[bnd]
        if exact is not None:
            pts = fac.x[bnd].reshape(-1, u_h.mesh.dim)
            ref = np.asarray(exact(pts, t), dtype=float).reshape(e.shape)
            e = ref - e
        boundary_sq = float(np.sum(wmeas[bnd] * np.abs(an[bnd]) * e ** 2))
    return FaceNorms(jump_sq=jump_sq, boundary_sq=boundary_sq)


@dataclass
class ErrorSeries:
    """Time samples of the error norms and their running accumulations.

    linf_l2 is the running max of l2_error; l2_l2_sq and face_integral_sq
    are trapezoidal time integrals of l2_error^2 and jump_sq + boundary_sq.
    """

    times: list = field(default_factory=list)
    l2_errors: list = field(default_factory=list)
    jump_sqs: list = field(default_factory=list)
    boundary_sqs: list = field(default_factory=list)
    solution_l2s: list = field(default_factory=list)
    linf_l2: float = 0.0
    l2_l2_sq: float = 0.0
    face_integral_sq: float = 0.0

    def add(self, t: float, l2_err: float, jump_sq: float = 0.0,
            boundary_sq: float = 0.0, solution_l2: float = 0.0) -> None:
        for v in (l2_err, jump_sq, boundary_sq, solution_l2):
            if not math.isfinite(v):
                raise ValueError(f"non-finite error sample at t={t}")
        if self.times:
            if t <= self.times[-1]:
                raise ValueError(f"non-monotone sample time {t} after {self.times[-1]}")
            dt = t - self.times[-1]
            self.l2_l2_sq += 0.5 * dt * (self.l2_errors[-1] ** 2 + l2_err ** 2)
            self.face_integral_sq += 0.5 * dt * (
                self.jump_sqs[-1] + self.boundary_sqs[-1] + jump_sq + boundary_sq)
        self.times.append(t)
        self.l2_errors.append(l2_err)
        self.jump_sqs.append(jump_sq)
        self.boundary_sqs.append(boundary_sq)
        self.solution_l2s.append(solution_l2)
        self.linf_l2 = max(self.linf_l2, l2_err)

    @property
    def l2_l2(self) -> float:
        return math.sqrt(max(self.l2_l2_sq, 0.0))

    @property
    def face_integral(self) -> float:
        return math.sqrt(max(self.face_integral_sq, 0.0))


def accumulate(series: ErrorSeries, t: float, l2_err: float, jump_sq: float = 0.0,
               boundary_sq: float = 0.0, solution_l2: float = 0.0) -> ErrorSeries:
    """Record one sample in the series (in place; returned for chaining)."""
    series.add(t, l2_err, jump_sq, boundary_sq, solution_l2)
    return series


def eoc_with_flags(errors) -> tuple[list, list]:
    """Observed orders between consecutive (h, error) entries.

    Both errors at the rounding floor give order 0.0 with the flag set; an
    exact zero against a nonzero partner gives the +inf sentinel.
    """
    hs = [float(h) for h, _ in errors]
    es = [float(e) for _, e in errors]
    if len(hs) < 2:
        raise ValueError("need at least two (h, error) entries")
    if any(h1 >= h0 for h0, h1 in zip(hs, hs[1:])):
        raise ValueError("mesh sizes must be strictly decreasing")
    orders = []
    flags = []
    for (h0, e0), (h1, e1) in zip(zip(hs, es), zip(hs[1:], es[1:])):
        if e0 < NOISE_FLOOR and e1 < NOISE_FLOOR:
            orders.append(0.0)
            flags.append(True)
        elif e0 == 0.0 or e1 == 0.0:
            orders.append(math.inf)
            flags.append(False)
        else:
            orders.append(math.log(e0 / e1) / math.log(h0 / h1))
            flags.append(False)
    return orders, flags


def eoc(errors) -> list:
    """Orders only; see eoc_with_flags."""
    return eoc_with_flags(errors)[0]
