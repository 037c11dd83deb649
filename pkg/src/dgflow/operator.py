"""Upwind DG spatial operator for du/dt + a.grad(u) + c u = 0.

The weak form splits into an element advection term, upwind face coupling on
the inflow part of each element boundary, a reaction term, and an inflow
boundary source:

    b(u, v) = sum_K int_K (a.grad u) v
            - sum_K int_{inflow(K) \\ boundary} (a.n) (u - u_nb) v
            - sum_K int_{inflow(K) ^ boundary} (a.n) u v
    r(u, v) = int (c u) v
    l(v)    = - sum_K int_{inflow(K) ^ boundary} (a.n) u_D v

where inflow(K) is the part of the element boundary with a.n < 0 (n outward
from K, ties count as outflow) and u_nb is the neighbour trace.  The
semi-discrete system is (du/dt, v) = l(v) - b(u, v) - r(u, v); with the
orthonormal modal basis the mass inverse is a division by |det J_K|.

Inflow/outflow is decided per quadrature point, so velocity fields whose
normal component changes sign along a single face are handled without any
special casing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._geometry import face_tables, volume_tables
from .basis import Basis, DGField
from .flow import FlowProblem
from .mesh import Mesh

__all__ = ["SemiDiscreteRHS", "EnergyRate"]


@dataclass(eq=False)
class EnergyRate:
    """Parts of b(u,u) + r(u,u) split by mechanism.

    volume   = int (c - div(a)/2) u^2
    jumps    = 1/2 sum_K ||u - u_nb||^2 in the |a.n|-weighted face norm
               over interior inflow points
    boundary = 1/2 ||u||^2 in the |a.n|-weighted norm over the whole
               domain boundary
    """

    volume: float
    jumps: float
    boundary: float

    @property
    def total(self) -> float:
        return self.volume + self.jumps + self.boundary


class SemiDiscreteRHS:
    """Assembled-once geometry plus per-call evaluation of the weak form."""

    def __init__(self, mesh: Mesh, basis: Basis, flow: FlowProblem,
                 volume_exactness: int | None = None,
                 face_exactness: int | None = None):
        if mesh.dim != basis.dim:
            raise ValueError("mesh and basis dimensions differ")
        if flow.domain.dim != mesh.dim:
            raise ValueError("flow domain and mesh dimensions differ")
        p = basis.degree
        self.mesh = mesh
        self.basis = basis
        self.flow = flow
        self.vol = volume_tables(mesh, basis, volume_exactness or 2 * p + 2)
        self.fac = face_tables(mesh, basis, face_exactness or 2 * p + 2)

    # -- small helpers ---------------------------------------------------

    def _check(self, u: DGField) -> None:
        if u.mesh is not self.mesh:
            raise ValueError("field was built on a different mesh")
        if u.basis is not self.basis:
            if (u.basis.dim, u.basis.degree) != (self.basis.dim, self.basis.degree):
                raise ValueError("field basis does not match operator basis")

    def _a_volume(self, t: float) -> np.ndarray:
        ne, nq, dim = self.vol.x.shape
        return np.asarray(self.flow.a(self.vol.x.reshape(-1, dim), t),
                          dtype=float).reshape(ne, nq, dim)

    def _a_face_normal(self, t: float) -> np.ndarray:
        nf, nqf, dim = self.fac.x.shape
        a = np.asarray(self.flow.a(self.fac.x.reshape(-1, dim), t),
                       dtype=float).reshape(nf, nqf, dim)
        return np.einsum("fqd,fd->fq", a, self.fac.normal)

    def _traces(self, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u_l = np.einsum("fm,fqm->fq", coeffs[self.fac.left], self.fac.phi_left)
        u_r = np.einsum("fm,fqm->fq", coeffs[np.maximum(self.fac.right, 0)],
                        self.fac.phi_right)
        u_r[~self.fac.interior] = 0.0
        return u_l, u_r

    def _grad_u(self, coeffs: np.ndarray) -> np.ndarray:
        gref = np.einsum("em,qmd->eqd", coeffs, self.vol.dphi)
        return np.einsum("eij,eqj->eqi", self.vol.jinv_t, gref)

    # -- weak-form pieces (scalars, used by diagnostics and tests) --------

    def apply_advection(self, u: DGField, v: DGField, t: float) -> float:
        """b(u, v) at time t."""
        self._check(u)
        self._check(v)
        cu, cv = u.coeffs, v.coeffs
        adv = np.einsum("eqd,eqd->eq", self._a_volume(t), self._grad_u(cu))
        v_vol = np.einsum("em,qm->eq", cv, self.vol.phi)
        total = float(np.einsum("q,e,eq,eq->", self.vol.quad.weights, self.vol.det,
                                adv, v_vol))
        an = self._a_face_normal(t)
        u_l, u_r = self._traces(cu)
        v_l, v_r = self._traces(cv)
        wmeas = self.fac.w[None, :] * self.fac.measure[:, None]
        interior = self.fac.interior[:, None]
        neg = an < 0.0
        pos = an > 0.0
        # owner-side inflow points of interior faces
        term = np.where(neg & interior, -an * (u_l - u_r) * v_l, 0.0)
        # neighbour-side inflow points (a.n_neighbour = -a.n < 0 where a.n > 0)
        term += np.where(pos & interior, an * (u_r - u_l) * v_r, 0.0)
        # inflow part of the domain boundary
        term += np.where(neg & ~interior, -an * u_l * v_l, 0.0)
        return total + float(np.sum(wmeas * term))

    def apply_reaction(self, u: DGField, v: DGField, t: float) -> float:
        """r(u, v) = int c u v at time t."""
        self._check(u)
        self._check(v)
        ne, nq, dim = self.vol.x.shape
        c = np.asarray(self.flow.c(self.vol.x.reshape(-1, dim), t),
                       dtype=float).reshape(ne, nq)
        u_vol = np.einsum("em,qm->eq", u.coeffs, self.vol.phi)
        v_vol = np.einsum("em,qm->eq", v.coeffs, self.vol.phi)
        return float(np.einsum("q,e,eq,eq,eq->", self.vol.quad.weights, self.vol.det,
                               c, u_vol, v_vol))

    def apply_boundary_source(self, v: DGField, t: float) -> float:
        """l(v): inflow data u_D tested against v."""
        self._check(v)
        an = self._a_face_normal(t)
        v_l, _ = self._traces(v.coeffs)
        nf, nqf, dim = self.fac.x.shape
        u_d = np.asarray(self.flow.u_D(self.fac.x.reshape(-1, dim), t),
                         dtype=float).reshape(nf, nqf)
        wmeas = self.fac.w[None, :] * self.fac.measure[:, None]
        mask = (an < 0.0) & ~self.fac.interior[:, None]
        return float(np.sum(wmeas * np.where(mask, -an * u_d * v_l, 0.0)))

    # -- time derivative ----------------------------------------------------

    def rhs(self, u: DGField, t: float) -> DGField:
        """du/dt as a DGField: mass-inverse of l(v) - b(u, v) - r(u, v)."""
        self._check(u)
        coeffs = u.coeffs
        w, det = self.vol.quad.weights, self.vol.det

        adv = np.einsum("eqd,eqd->eq", self._a_volume(t), self._grad_u(coeffs))
        ne, nq, dim = self.vol.x.shape
        c = np.asarray(self.flow.c(self.vol.x.reshape(-1, dim), t),
                       dtype=float).reshape(ne, nq)
        u_vol = np.einsum("em,qm->eq", coeffs, self.vol.phi)
        out = -np.einsum("q,e,eq,qm->em", w, det, adv + c * u_vol, self.vol.phi)

        an = self._a_face_normal(t)
        u_l, u_r = self._traces(coeffs)
        wmeas = self.fac.w[None, :] * self.fac.measure[:, None]
        interior = self.fac.interior[:, None]
        neg = an < 0.0
        pos = an > 0.0

        # contributions of -b(u, v) + l(v), per side, to be added to out
        add_l = np.where(neg & interior, an * (u_l - u_r), 0.0)
        add_r = np.where(pos & interior, -an * (u_r - u_l), 0.0)
        if np.any(~self.fac.interior):
            nf, nqf, _ = self.fac.x.shape
            u_d = np.asarray(self.flow.u_D(self.fac.x.reshape(-1, dim), t),
                             dtype=float).reshape(nf, nqf)
            # l(v) and the boundary part of -b(u, v) combine into a penalty
            # +|a.n| (u_D - u) v on the inflow boundary
            add_l = add_l + np.where(neg & ~interior, -an * (u_d - u_l), 0.0)

        contrib_l = np.einsum("fq,fqm->fm", wmeas * add_l, self.fac.phi_left)
        contrib_r = np.einsum("fq,fqm->fm", wmeas * add_r, self.fac.phi_right)
        np.add.at(out, self.fac.left, contrib_l)
        ri = self.fac.interior
        np.add.at(out, self.fac.right[ri], contrib_r[ri])

        out /= det[:, None]
        return replace(u, coeffs=out, time=float(t))

    # -- energy diagnostics ---------------------------------------------------

    def energy_rate(self, u: DGField, t: float) -> EnergyRate:
        """Independent quadrature of the three parts of b(u,u) + r(u,u)."""
        self._check(u)
        coeffs = u.coeffs
        ne, nq, dim = self.vol.x.shape
        c = np.asarray(self.flow.c(self.vol.x.reshape(-1, dim), t),
                       dtype=float).reshape(ne, nq)
        dv = np.asarray(self.flow.div(self.vol.x.reshape(-1, dim), t),
                        dtype=float).reshape(ne, nq)
        u_vol = np.einsum("em,qm->eq", coeffs, self.vol.phi)
        volume = float(np.einsum("q,e,eq,eq->", self.vol.quad.weights, self.vol.det,
                                 c - 0.5 * dv, u_vol**2))
        an = self._a_face_normal(t)
        u_l, u_r = self._traces(coeffs)
        wmeas = self.fac.w[None, :] * self.fac.measure[:, None]
        interior = self.fac.interior[:, None]
        jumps = 0.5 * float(np.sum(wmeas * np.where(interior, np.abs(an) * (u_l - u_r)**2,
                                                    0.0)))
        boundary = 0.5 * float(np.sum(wmeas * np.where(~interior, np.abs(an) * u_l**2,
                                                       0.0)))
        return EnergyRate(volume=volume, jumps=jumps, boundary=boundary)
