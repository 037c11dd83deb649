"""Precomputed element and face tables shared by assembly and error norms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import Basis, QuadratureRule, _element_maps, make_quadrature
from .mesh import Mesh


@dataclass(eq=False)
class VolumeTables:
    quad: QuadratureRule
    origin: np.ndarray        # (ne, dim)
    jac: np.ndarray           # (ne, dim, dim)
    det: np.ndarray           # (ne,)
    jinv_t: np.ndarray        # (ne, dim, dim)
    x: np.ndarray             # (ne, nq, dim) physical quadrature points
    phi: np.ndarray           # (nq, m) basis values
    dphi: np.ndarray          # (nq, m, dim) reference gradients


def volume_tables(mesh: Mesh, basis: Basis, exactness: int) -> VolumeTables:
    quad = make_quadrature(mesh.dim, exactness)
    origin, jac, det = _element_maps(mesh)
    jinv_t = np.transpose(np.linalg.inv(jac), (0, 2, 1))
    x = origin[:, None, :] + np.einsum("eij,qj->eqi", jac, quad.points)
    return VolumeTables(
        quad=quad, origin=origin, jac=jac, det=det, jinv_t=jinv_t, x=x,
        phi=basis.eval(quad.points), dphi=basis.eval_grad(quad.points),
    )


@dataclass(eq=False)
class FaceTables:
    left: np.ndarray          # (nf,) owner element ids
    right: np.ndarray         # (nf,) neighbour ids, -1 on the boundary
    interior: np.ndarray      # (nf,) bool
    normal: np.ndarray        # (nf, dim) outward from the owner
    measure: np.ndarray       # (nf,)
    x: np.ndarray             # (nf, nqf, dim) physical quadrature points
    w: np.ndarray             # (nqf,) reference weights summing to 1
    phi_left: np.ndarray      # (nf, nqf, m) owner traces of all modes
    phi_right: np.ndarray     # (nf, nqf, m) neighbour traces (0 on boundary)
    btags: list


def face_tables(mesh: Mesh, basis: Basis, exactness: int) -> FaceTables:
    faces = mesh.faces
    nf = len(faces)
    dim = mesh.dim
    if dim == 1:
        sq = np.zeros((1,))
        wq = np.ones((1,))
    else:
        g, gw = np.polynomial.legendre.leggauss(max(1, exactness // 2 + 1))
        sq = 0.5 * (g + 1.0)
        wq = 0.5 * gw
    nqf = len(sq)
    origin, jac, _ = _element_maps(mesh)
    jinv = np.linalg.inv(jac)

    left = np.array([f.left for f in faces], dtype=np.int64)
    right = np.array([f.right for f in faces], dtype=np.int64)
    normal = np.array([f.normal for f in faces])
    measure = np.array([f.measure for f in faces])

    x = np.empty((nf, nqf, dim))
    for i, f in enumerate(faces):
        if dim == 1:
            x[i, 0] = f.centroid
        else:
            pa = mesh.vertices[f.vertices[0]]
            pb = mesh.vertices[f.vertices[1]]
            x[i] = pa[None, :] + sq[:, None] * (pb - pa)[None, :]

    def side_refs(elem_ids: np.ndarray, mask: np.ndarray) -> np.ndarray:
        refs = np.zeros((nf, nqf, dim))
        ids = elem_ids[mask]
        dx = x[mask] - origin[ids][:, None, :]
        refs[mask] = np.einsum("fij,fqj->fqi", jinv[ids], dx)
        return refs

    all_mask = np.ones(nf, dtype=bool)
    int_mask = right >= 0
    ref_l = side_refs(left, all_mask)
    ref_r = side_refs(np.maximum(right, 0), int_mask)

    m = basis.n_modes
    phi_l = basis.eval(ref_l.reshape(-1, dim)).reshape(nf, nqf, m)
    phi_r = np.zeros((nf, nqf, m))
    if int_mask.any():
        phi_r[int_mask] = basis.eval(ref_r[int_mask].reshape(-1, dim)).reshape(-1, nqf, m)
    return FaceTables(
        left=left, right=right, interior=int_mask, normal=normal, measure=measure,
        x=x, w=wq, phi_left=phi_l, phi_right=phi_r,
        btags=[f.btag for f in faces],
    )
