"""Simplicial meshes on intervals and axis-aligned boxes.

A mesh is built once and then treated as read-only: vertices, simplex
connectivity, derived face geometry (normals, measures, adjacency) and
per-element size metrics are all computed up front.  Every face stores the
outward unit normal of its owning ("left") element; the neighbour sees the
same face with that normal negated.  In 1D a face is a single vertex with
unit measure, so surface integrals degenerate to endpoint evaluations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Face",
    "Mesh",
    "MeshError",
    "MeshFormatError",
    "InflowSignChangeWarning",
    "build_interval_mesh",
    "build_triangle_mesh",
    "load_mesh",
    "save_mesh",
    "classify_inflow_boundary",
]

_UNIT_TOL = 1e-12


class MeshError(ValueError):
    """A mesh violates a structural invariant."""


class MeshFormatError(MeshError):
    """A mesh file could not be parsed or indexes a missing entity."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class InflowSignChangeWarning(UserWarning):
    """A boundary face switched between inflow and outflow across sample times."""


@dataclass(eq=False)
class Face:
    """One mesh face: a vertex in 1D, an edge in 2D.

    ``left`` is the owning element; ``right`` is the neighbour element id or
    -1 on the boundary.  ``normal`` points out of the owning element and has
    unit length; ``measure`` is 1.0 in 1D and the edge length in 2D.
    """

    index: int
    vertices: tuple[int, ...]
    left: int
    right: int
    normal: np.ndarray
    measure: float
    centroid: np.ndarray
    btag: str | None = None

    @property
    def is_boundary(self) -> bool:
        return self.right < 0


class Mesh:
    """Conforming simplicial mesh of dimension 1 or 2."""

    def __init__(self, dim: int, vertices: np.ndarray, elements: np.ndarray):
        if dim not in (1, 2):
            raise MeshError(f"unsupported dimension {dim}")
        vertices = np.asarray(vertices, dtype=float).reshape(-1, dim)
        elements = np.asarray(elements, dtype=np.int64).reshape(-1, dim + 1)
        if len(vertices) == 0 or len(elements) == 0:
            raise MeshError("mesh needs at least one vertex and one element")
        if elements.min() < 0 or elements.max() >= len(vertices):
            raise MeshError("element references a vertex that does not exist")
        self.dim = dim
        self.vertices = vertices
        self.elements = elements
        self.volumes = self._element_volumes()
        if np.any(self.volumes <= 0.0):
            bad = int(np.argmin(self.volumes))
            raise MeshError(
                f"element {bad} has non-positive volume {self.volumes[bad]:.3e}"
                " (vertex order must be ascending in 1D, counter-clockwise in 2D)"
            )
        self.faces: list[Face] = self._build_faces()
        self.h = self._element_diameters()
        self.rho = self._element_inradii()
        self.validate()

    # -- derived geometry -------------------------------------------------

    def _element_volumes(self) -> np.ndarray:
        v = self.vertices[self.elements]
        if self.dim == 1:
            return v[:, 1, 0] - v[:, 0, 0]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def _element_diameters(self) -> np.ndarray:
        v = self.vertices[self.elements]
        if self.dim == 1:
            return self.volumes.copy()
        # diameter of a triangle is its longest edge
        d01 = np.linalg.norm(v[:, 1] - v[:, 0], axis=1)
        d12 = np.linalg.norm(v[:, 2] - v[:, 1], axis=1)
        d20 = np.linalg.norm(v[:, 0] - v[:, 2], axis=1)
        return np.max(np.stack([d01, d12, d20]), axis=0)

    def _element_inradii(self) -> np.ndarray:
        if self.dim == 1:
            return 0.5 * self.h
        v = self.vertices[self.elements]
        d01 = np.linalg.norm(v[:, 1] - v[:, 0], axis=1)
        d12 = np.linalg.norm(v[:, 2] - v[:, 1], axis=1)
        d20 = np.linalg.norm(v[:, 0] - v[:, 2], axis=1)
        return 2.0 * self.volumes / (d01 + d12 + d20)

    def _build_faces(self) -> list[Face]:
        faces: list[Face] = []
        if self.dim == 1:
            # owner of an interior vertex-face is the element on its lower-x side
            right_of: dict[int, int] = {}
            left_of: dict[int, int] = {}
            for e, (a, b) in enumerate(self.elements):
                if int(a) in right_of:
                    raise MeshError(f"vertex {a} starts two elements")
                if int(b) in left_of:
                    raise MeshError(f"vertex {b} ends two elements")
                right_of[int(a)] = e
                left_of[int(b)] = e
            idx = 0
            order = np.argsort(self.vertices[:, 0], kind="stable")
            for vtx in order:
                vtx = int(vtx)
                lower = left_of.get(vtx)
                upper = right_of.get(vtx)
                if lower is None and upper is None:
                    raise MeshError(f"vertex {vtx} belongs to no element")
                x = self.vertices[vtx].copy()
                if lower is not None:
                    faces.append(Face(idx, (vtx,), lower, -1 if upper is None else upper,
                                      np.array([1.0]), 1.0, x))
                else:
                    faces.append(Face(idx, (vtx,), upper, -1, np.array([-1.0]), 1.0, x))
                idx += 1
            return faces

        # 2D: collect directed edges in each triangle's CCW order
        claimed: dict[tuple[int, int], tuple[int, int, int]] = {}
        for e, tri in enumerate(self.elements):
            for k in range(3):
                vi, vj = int(tri[k]), int(tri[(k + 1) % 3])
                key = (vi, vj) if vi < vj else (vj, vi)
                if key in claimed:
                    prev = claimed[key]
                    if prev[2] >= 0:
                        raise MeshError(f"edge {key} is shared by more than two elements")
                    claimed[key] = (prev[0], prev[1], e)
                else:
                    claimed[key] = (vi, vj, -1)
        # second pass: owner is the element that supplied the directed pair
        owner_of: dict[tuple[int, int], int] = {}
        for e, tri in enumerate(self.elements):
            for k in range(3):
                vi, vj = int(tri[k]), int(tri[(k + 1) % 3])
                owner_of.setdefault((vi, vj), e)
        idx = 0
        for key in sorted(claimed):
            vi, vj, other = claimed[key]
            owner = owner_of[(vi, vj)]
            neighbour = other if other != owner else owner_of.get((vj, vi), -1)
            if neighbour == owner:
                neighbour = -1
            pa, pb = self.vertices[vi], self.vertices[vj]
            edge = pb - pa
            length = float(np.linalg.norm(edge))
            if length <= 0.0:
                raise MeshError(f"degenerate edge {key}")
            # interior lies left of a CCW-directed edge, so outward is the right
            normal = np.array([edge[1], -edge[0]]) / length
            faces.append(Face(idx, (vi, vj), owner, neighbour, normal, length,
                              0.5 * (pa + pb)))
            idx += 1
        return faces

    # -- queries -----------------------------------------------------------

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def h_max(self) -> float:
        return float(self.h.max())

    @property
    def shape_ratio(self) -> float:
        """max over elements of diameter / inradius (shape regularity)."""
        return float((self.h / self.rho).max())

    def boundary_faces(self) -> list[Face]:
        return [f for f in self.faces if f.is_boundary]

    def interior_faces(self) -> list[Face]:
        return [f for f in self.faces if not f.is_boundary]

    def element_vertices(self, e: int) -> np.ndarray:
        return self.vertices[self.elements[e]]

    def validate(self) -> None:
        """Check structural invariants; raises MeshError on violation."""
        for f in self.faces:
            if abs(np.linalg.norm(f.normal) - 1.0) > _UNIT_TOL:
                raise MeshError(f"face {f.index} normal is not unit length")
            if f.left < 0 or f.left >= self.n_elements:
                raise MeshError(f"face {f.index} has invalid owner {f.left}")
            if f.right >= self.n_elements:
                raise MeshError(f"face {f.index} has invalid neighbour {f.right}")
        if np.any(self.volumes <= 0.0):
            raise MeshError("non-positive element volume")
        # every element boundary closes: sum of measure-weighted outward normals is 0
        acc = np.zeros((self.n_elements, self.dim))
        for f in self.faces:
            acc[f.left] += f.measure * f.normal
            if f.right >= 0:
                acc[f.right] -= f.measure * f.normal
        worst = float(np.abs(acc).max())
        if worst > 1e-10 * max(1.0, float(np.abs(self.vertices).max())):
            raise MeshError(f"element surface does not close (residual {worst:.3e})")

    def save(self, path: str) -> None:
        save_mesh(self, path)


# -- structured builders ----------------------------------------------------

def build_interval_mesh(x_lo: float, x_hi: float, n: int, grading: float = 1.0) -> Mesh:
    """Mesh (x_lo, x_hi) with n cells; grading r scales successive widths by r."""
    if n < 1:
        raise MeshError("need at least one cell")
    if x_hi <= x_lo:
        raise MeshError("empty interval")
    if grading <= 0.0:
        raise MeshError("grading ratio must be positive")
    if grading == 1.0:
        nodes = np.linspace(x_lo, x_hi, n + 1)
    else:
        r = grading
        widths = (x_hi - x_lo) * r ** np.arange(n) * (r - 1.0) / (r**n - 1.0)
        nodes = x_lo + np.concatenate([[0.0], np.cumsum(widths)])
        nodes[-1] = x_hi
    elements = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    mesh = Mesh(1, nodes.reshape(-1, 1), elements)
    _tag_box_boundary(mesh, x_lo, x_hi)
    return mesh


def build_triangle_mesh(x_lo: float, y_lo: float, x_hi: float, y_hi: float,
                        nx: int, ny: int, pattern: str = "diagonal") -> Mesh:
    """Triangulate the box (x_lo,x_hi) x (y_lo,y_hi) on an nx-by-ny grid.

    pattern "diagonal" splits each cell into 2 triangles along one diagonal;
    "crisscross" adds the cell centre and makes 4 triangles per cell.
    """
    if nx < 1 or ny < 1:
        raise MeshError("need at least one cell per direction")
    if x_hi <= x_lo or y_hi <= y_lo:
        raise MeshError("empty box")
    if pattern not in ("diagonal", "crisscross"):
        raise MeshError(f"unknown pattern {pattern!r}")
    xs = np.linspace(x_lo, x_hi, nx + 1)
    ys = np.linspace(y_lo, y_hi, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([gx.ravel(), gy.ravel()], axis=1)

    def vid(i: int, j: int) -> int:
        return i * (ny + 1) + j

    tris: list[tuple[int, int, int]] = []
    if pattern == "diagonal":
        for i in range(nx):
            for j in range(ny):
                v00, v10 = vid(i, j), vid(i + 1, j)
                v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))
    else:
        centres = []
        base = len(verts)
        k = 0
        for i in range(nx):
            for j in range(ny):
                centres.append([0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])])
                vc = base + k
                k += 1
                v00, v10 = vid(i, j), vid(i + 1, j)
                v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
                tris.append((v00, v10, vc))
                tris.append((v10, v11, vc))
                tris.append((v11, v01, vc))
                tris.append((v01, v00, vc))
        verts = np.concatenate([verts, np.array(centres)], axis=0)
    mesh = Mesh(2, verts, np.array(tris, dtype=np.int64))
    _tag_box_boundary(mesh, x_lo, x_hi, y_lo, y_hi)
    return mesh


def _tag_box_boundary(mesh: Mesh, x_lo: float, x_hi: float,
                      y_lo: float | None = None, y_hi: float | None = None) -> None:
    tol = 1e-12 * max(abs(x_hi - x_lo), 1.0)
    for f in mesh.faces:
        if not f.is_boundary:
            continue
        c = f.centroid
        if abs(c[0] - x_lo) <= tol:
            f.btag = "left"
        elif abs(c[0] - x_hi) <= tol:
            f.btag = "right"
        elif y_lo is not None and abs(c[1] - y_lo) <= tol:
            f.btag = "bottom"
        elif y_hi is not None and abs(c[1] - y_hi) <= tol:
            f.btag = "top"
        else:
            f.btag = "boundary"


# -- plain-text file format --------------------------------------------------
#
#   dim n_vertices n_elements
#   <n_vertices lines of coordinates>
#   <n_elements lines of 0-based vertex indices>
#
# Coordinates round-trip exactly at 17 significant digits.

def save_mesh(mesh: Mesh, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"{mesh.dim} {mesh.n_vertices} {mesh.n_elements}\n")
        for v in mesh.vertices:
            fh.write(" ".join(f"{x:.17g}" for x in v) + "\n")
        for el in mesh.elements:
            fh.write(" ".join(str(int(i)) for i in el) + "\n")


def load_mesh(path: str) -> Mesh:
    with open(path) as fh:
        raw = fh.readlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw)]
    lines = [(no, ln) for no, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise MeshFormatError(path, 1, "empty mesh file")
    no, header = lines[0]
    parts = header.split()
    if len(parts) != 3:
        raise MeshFormatError(path, no, "header must be 'dim n_vertices n_elements'")
    try:
        dim, nv, ne = (int(p) for p in parts)
    except ValueError:
        raise MeshFormatError(path, no, f"non-integer header field in {header!r}") from None
    if dim not in (1, 2):
        raise MeshFormatError(path, no, f"unsupported dimension {dim}")
    if len(lines) - 1 != nv + ne:
        raise MeshFormatError(path, no, f"expected {nv + ne} data lines, found {len(lines) - 1}")
    verts = np.empty((nv, dim))
    for k in range(nv):
        no, ln = lines[1 + k]
        fields = ln.split()
        if len(fields) != dim:
            raise MeshFormatError(path, no, f"expected {dim} coordinates, found {len(fields)}")
        try:
            verts[k] = [float(f) for f in fields]
        except ValueError:
            raise MeshFormatError(path, no, f"bad coordinate in {ln!r}") from None
    elems = np.empty((ne, dim + 1), dtype=np.int64)
    for k in range(ne):
        no, ln = lines[1 + nv + k]
        fields = ln.split()
        if len(fields) != dim + 1:
            raise MeshFormatError(path, no, f"expected {dim + 1} vertex indices, found {len(fields)}")
        try:
            elems[k] = [int(f) for f in fields]
        except ValueError:
            raise MeshFormatError(path, no, f"bad vertex index in {ln!r}") from None
        if elems[k].min() < 0 or elems[k].max() >= nv:
            raise MeshFormatError(path, no, f"vertex index out of range in {ln!r}")
    try:
        mesh = Mesh(dim, verts, elems)
    except MeshError as err:
        raise MeshFormatError(path, lines[0][0], str(err)) from None
    for f in mesh.faces:
        if f.is_boundary:
            f.btag = "boundary"
    return mesh


# -- inflow classification ----------------------------------------------------

def classify_inflow_boundary(mesh: Mesh, flow, t_samples: Sequence[float],
                             n_points: int = 4) -> set[int]:
    """Boundary faces with a.n < 0 at every quadrature point, for all t_samples.

    The velocity is probed at Gauss points of each boundary face.  A face
    whose classification differs between sample times triggers an
    InflowSignChangeWarning (the discretisation assumes a fixed inflow
    boundary); the face is included only if it is inflow at all times.
    """
    t_samples = list(t_samples)
    if not t_samples:
        raise ValueError("need at least one sample time")
    if mesh.dim == 1:
        pts_ref = np.array([0.5])
    else:
        x, _ = np.polynomial.legendre.leggauss(max(1, n_points))
        pts_ref = 0.5 * (x + 1.0)
    inflow: set[int] = set()
    flagged: list[int] = []
    for f in mesh.faces:
        if not f.is_boundary:
            continue
        if mesh.dim == 1:
            pts = f.centroid.reshape(1, 1)
        else:
            pa = mesh.vertices[f.vertices[0]]
            pb = mesh.vertices[f.vertices[1]]
            pts = pa[None, :] + pts_ref[:, None] * (pb - pa)[None, :]
        all_in: list[bool] = []
        any_in: list[bool] = []
        for t in t_samples:
            an = flow.a(pts, t) @ f.normal
            all_in.append(bool(np.all(an < 0.0)))
            any_in.append(bool(np.any(an < 0.0)))
        if len(set(all_in)) > 1 or len(set(any_in)) > 1:
            flagged.append(f.index)
        if all(all_in):
            inflow.add(f.index)
    if flagged:
        warnings.warn(
            f"boundary faces {flagged} change between inflow and outflow over "
            f"t_samples={t_samples}; the scheme assumes a fixed inflow boundary",
            InflowSignChangeWarning,
            stacklevel=2,
        )
    return inflow
