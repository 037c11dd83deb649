"""Shared builders for the test suite: random fields, toy flows, identity checks.

The structural identity checks (Green identity, telescoping, projection
roundtrip, energy decomposition) live here so the per-module tests and the
acceptance gate exercise the same code paths with the same seeded inputs.
"""

from __future__ import annotations

import numpy as np

from dgflow import (
    Box,
    DGField,
    FlowProblem,
    Interval,
    SemiDiscreteRHS,
    l2_project,
    make_basis,
)
from dgflow._geometry import face_tables, volume_tables


def random_field(mesh, basis, rng, scale=1.0) -> DGField:
    coeffs = scale * rng.standard_normal((mesh.n_elements, basis.n_modes))
    return DGField(mesh=mesh, basis=basis, coeffs=coeffs, time=0.0)


# -- toy flows with affine velocity, so quadrature of degree 2p+2 is exact ----

def affine_flow_1d() -> FlowProblem:
    # a = x+1, div a = 1, c = 0.4 - x: every weak-form integrand stays
    # polynomial, which is what makes the 1e-10 identity tolerances honest.
    return FlowProblem(
        name="affine1d",
        domain=Interval(0.0, 1.0),
        a=lambda x, t: (np.atleast_2d(x)[:, :1] + 1.0),
        c=lambda x, t: 0.4 - np.atleast_2d(x)[:, 0],
        u0=lambda x: np.sin(np.pi * np.atleast_2d(x)[:, 0]),
        u_D=lambda x, t: np.zeros(len(np.atleast_2d(x))),
        div_a=lambda x, t: np.ones(len(np.atleast_2d(x))),
    )


def affine_flow_2d() -> FlowProblem:
    def a(x, t):
        x = np.atleast_2d(x)
        return np.stack([x[:, 0] + 2.0 * x[:, 1] + 1.0, 1.0 - 0.5 * x[:, 1]], axis=1)

    return FlowProblem(
        name="affine2d",
        domain=Box((0.0, 0.0), (1.0, 1.0)),
        a=a,
        c=lambda x, t: np.atleast_2d(x)[:, 0] - np.atleast_2d(x)[:, 1] + 0.3,
        u0=lambda x: np.zeros(len(np.atleast_2d(x))),
        u_D=lambda x, t: np.zeros(len(np.atleast_2d(x))),
        div_a=lambda x, t: np.full(len(np.atleast_2d(x)), 0.5),
    )


# -- structural identity gaps -------------------------------------------------

def green_identity_gap(mesh, basis, flow, t, n_fields, seed) -> float:
    """max over random fields of |sum_K int a.grad(u) u - (-1/2 int div(a) u^2
    + 1/2 sum_K int_dK (a.n) u^2)|, each side by its own quadrature."""
    p = basis.degree
    vol_lhs = volume_tables(mesh, basis, 2 * p + 2)
    vol_rhs = volume_tables(mesh, basis, 2 * p + 4)
    fac = face_tables(mesh, basis, 2 * p + 2)

    ne, nq, dim = vol_lhs.x.shape
    a_lhs = np.asarray(flow.a(vol_lhs.x.reshape(-1, dim), t)).reshape(ne, nq, dim)
    div_rhs = np.asarray(flow.div(vol_rhs.x.reshape(-1, dim), t)).reshape(ne, -1)
    nf, nqf, _ = fac.x.shape
    an = np.einsum("fqd,fd->fq",
                   np.asarray(flow.a(fac.x.reshape(-1, dim), t)).reshape(nf, nqf, dim),
                   fac.normal)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_fields):
        u = random_field(mesh, basis, rng)
        gref = np.einsum("em,qmd->eqd", u.coeffs, vol_lhs.dphi)
        gphys = np.einsum("eij,eqj->eqi", vol_lhs.jinv_t, gref)
        uval = np.einsum("qm,em->eq", vol_lhs.phi, u.coeffs)
        lhs = np.einsum("e,q,eqd,eqd,eq->", vol_lhs.det, vol_lhs.quad.weights,
                        a_lhs, gphys, uval)

        u_rhs = np.einsum("qm,em->eq", vol_rhs.phi, u.coeffs)
        vol_term = -0.5 * np.einsum("e,q,eq,eq->", vol_rhs.det,
                                    vol_rhs.quad.weights, div_rhs, u_rhs**2)
        u_l = np.einsum("fqm,fm->fq", fac.phi_left, u.coeffs[fac.left])
        u_r = np.einsum("fqm,fm->fq", fac.phi_right,
                        u.coeffs[np.maximum(fac.right, 0)])
        face_term = np.einsum("f,q,fq,fq->", fac.measure, fac.w, an, u_l**2)
        # interior faces seen from the neighbour: normal flips sign
        face_term -= np.einsum("f,q,fq,fq->", fac.measure[fac.interior], fac.w,
                               an[fac.interior], u_r[fac.interior] ** 2)
        worst = max(worst, abs(lhs - (vol_term + 0.5 * face_term)))
    return worst


def telescoping_gap(mesh, basis, flow, t, n_fields, seed) -> tuple[float, float]:
    """Outflow-side and upwind-trace inflow-side interior face sums must cancel.

    Returns (max |outflow + inflow|, min |outflow|); the second value shows the
    cancellation is between O(1) quantities rather than between zeros.
    """
    p = basis.degree
    fac = face_tables(mesh, basis, 2 * p + 2)
    nf, nqf, dim = fac.x.shape
    an = np.einsum("fqd,fd->fq",
                   np.asarray(flow.a(fac.x.reshape(-1, dim), t)).reshape(nf, nqf, dim),
                   fac.normal)
    wmeas = fac.measure[:, None] * fac.w[None, :]
    interior = fac.interior

    rng = np.random.default_rng(seed)
    worst, smallest = 0.0, np.inf
    for _ in range(n_fields):
        u = random_field(mesh, basis, rng)
        u_l = np.einsum("fqm,fm->fq", fac.phi_left, u.coeffs[fac.left])
        u_r = np.einsum("fqm,fm->fq", fac.phi_right,
                        u.coeffs[np.maximum(fac.right, 0)])
        outflow = inflow = 0.0
        for side in ("owner", "neighbour"):
            s = an if side == "owner" else -an
            mine, theirs = (u_l, u_r) if side == "owner" else (u_r, u_l)
            out_mask = interior[:, None] & (s > 0.0)
            in_mask = interior[:, None] & (s < 0.0)
            outflow += float(np.sum(wmeas * s * mine**2, where=out_mask))
            inflow += float(np.sum(wmeas * s * theirs**2, where=in_mask))
        worst = max(worst, abs(outflow + inflow))
        smallest = min(smallest, abs(outflow))
    return worst, smallest


def projection_roundtrip_gap(mesh, basis, n_fields, seed) -> float:
    """Evaluate a member of the DG space, project the values back, compare."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_fields):
        u = random_field(mesh, basis, rng)
        v = l2_project(u, 0.0, mesh, basis)
        worst = max(worst, float(np.max(np.abs(v.coeffs - u.coeffs))))
    return worst


def energy_decomposition_gap(op: SemiDiscreteRHS, t, n_fields, seed) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_fields):
        u = random_field(op.mesh, op.basis, rng)
        rate = op.energy_rate(u, t)
        direct = op.apply_advection(u, u, t) + op.apply_reaction(u, u, t)
        worst = max(worst, abs(rate.total - direct))
    return worst


def locate_points(mesh, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force owning element and reference coords for each point."""
    from dgflow.basis import _element_maps

    x = np.atleast_2d(np.asarray(x, dtype=float))
    origin, jac, _ = _element_maps(mesh)
    jinv = np.linalg.inv(jac)
    refs = np.einsum("eij,pej->pei", jinv, x[:, None, :] - origin[None, :, :])
    tol = 1e-12
    inside = np.all(refs >= -tol, axis=2)
    if mesh.dim == 1:
        inside &= refs[:, :, 0] <= 1.0 + tol
    else:
        inside &= refs.sum(axis=2) <= 1.0 + tol
    elem = np.argmax(inside, axis=1)
    if not inside[np.arange(len(x)), elem].all():
        raise ValueError("point outside mesh")
    return elem, refs[np.arange(len(x)), elem]


def field_as_function(field: DGField):
    """Wrap a DGField as f(x, t) over physical points, via point location."""

    def fn(x, t):
        elem, ref = locate_points(field.mesh, x)
        phi = field.basis.eval(ref)
        return np.einsum("pm,pm->p", phi, field.coeffs[elem])

    return fn


def smooth_random_function(dim: int, rng):
    """Low-order random trig polynomial, smooth and O(1) on the unit domain."""
    k = np.arange(1, 4)
    amp_s = rng.normal(size=3)
    amp_c = rng.normal(size=3)
    if dim == 1:
        def fn(x, t):
            x = np.atleast_2d(x)[:, 0]
            return (np.sin(np.pi * k[None, :] * x[:, None]) @ amp_s
                    + np.cos(np.pi * k[None, :] * x[:, None]) @ amp_c)
    else:
        amp2 = rng.normal(size=(3, 3))

        def fn(x, t):
            x = np.atleast_2d(x)
            sx = np.sin(np.pi * k[None, :] * x[:, 0:1])
            sy = np.sin(np.pi * k[None, :] * x[:, 1:2])
            return np.einsum("pi,ij,pj->p", sx, amp2, sy) + amp_s[0] * np.cos(
                np.pi * x[:, 0])
    return fn
