"""Modal bases and quadrature on reference simplices, plus DG grid functions.

The reference elements are the unit interval [0,1] and the unit triangle
with vertices (0,0), (1,0), (0,1).  Basis functions are orthonormal with
respect to the reference measure, obtained by Gram-Schmidt on monomials.
The orthogonalisation runs in exact rational arithmetic (monomial moments
over a simplex are rationals via the factorial formula), so the only
floating-point error left is in the final normalisation; orthonormality
holds to machine precision.

Because the basis is orthonormal on the reference element, the mass matrix
of an affine element K is |det J_K| times the identity: L2 projection and
mass inversion are divisions, never linear solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .mesh import Mesh

__all__ = [
    "Basis",
    "QuadratureRule",
    "DGField",
    "make_basis",
    "make_quadrature",
    "reference_measure",
    "n_modes",
    "l2_project",
    "evaluate",
    "save_field",
    "load_field",
]

MAX_DEGREE = 4
_MAX_EXACTNESS = 40


def reference_measure(dim: int) -> float:
    if dim == 1:
        return 1.0
    if dim == 2:
        return 0.5
    raise ValueError(f"unsupported dimension {dim}")


def n_modes(dim: int, p: int) -> int:
    return p + 1 if dim == 1 else (p + 1) * (p + 2) // 2


def _monomial_exponents(dim: int, p: int) -> np.ndarray:
    exps: list[tuple[int, ...]] = []
    if dim == 1:
        exps = [(k,) for k in range(p + 1)]
    else:
        for deg in range(p + 1):
            for i in range(deg, -1, -1):
                exps.append((i, deg - i))
    return np.array(exps, dtype=np.int64)


def _monomial_moment(dim: int, exp: tuple[int, ...]) -> Fraction:
    # integral of x^a (y^b) over the reference simplex
    if dim == 1:
        return Fraction(1, exp[0] + 1)
    a, b = exp
    return Fraction(math.factorial(a) * math.factorial(b), math.factorial(a + b + 2))


@dataclass(eq=False)
class Basis:
    """Orthonormal modal basis of total degree <= degree on the reference simplex.

    ``coeffs[i]`` holds the monomial coefficients of mode i over ``exponents``;
    mode 0 is the constant 1/sqrt(reference measure).
    """

    dim: int
    degree: int
    exponents: np.ndarray
    coeffs: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.coeffs)

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Values of all modes at reference points; shape (npts, n_modes)."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        mono = np.prod(pts[:, None, :] ** self.exponents[None, :, :], axis=2)
        return mono @ self.coeffs.T

    def eval_grad(self, points: np.ndarray) -> np.ndarray:
        """Reference gradients of all modes; shape (npts, n_modes, dim)."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        npts = len(pts)
        nm = len(self.exponents)
        out = np.empty((npts, self.n_modes, self.dim))
        for d in range(self.dim):
            shift = self.exponents.copy()
            shift[:, d] = np.maximum(shift[:, d] - 1, 0)
            dm = np.prod(pts[:, None, :] ** shift[None, :, :], axis=2)
            dm *= self.exponents[None, :, d]
            out[:, :, d] = dm @ self.coeffs.T
        return out


def make_basis(dim: int, p: int) -> Basis:
    if dim not in (1, 2):
        raise ValueError(f"unsupported dimension {dim}")
    if not 0 <= p <= MAX_DEGREE:
        raise ValueError(f"degree must be in [0, {MAX_DEGREE}], got {p}")
    exps = _monomial_exponents(dim, p)
    n = len(exps)
    gram = [[_monomial_moment(dim, tuple(exps[i] + exps[j])) for j in range(n)]
            for i in range(n)]

    def inner(u: list[Fraction], v: list[Fraction]) -> Fraction:
        s = Fraction(0)
        for i, ui in enumerate(u):
            if ui == 0:
                continue
            for j, vj in enumerate(v):
                if vj != 0:
                    s += ui * vj * gram[i][j]
        return s

    basis_rows: list[list[Fraction]] = []
    norms: list[Fraction] = []
    for i in range(n):
        v = [Fraction(0)] * n
        v[i] = Fraction(1)
        for j in range(i):
            c = inner(v, basis_rows[j]) / norms[j]
            if c != 0:
                v = [vk - c * gk for vk, gk in zip(v, basis_rows[j])]
        basis_rows.append(v)
        norms.append(inner(v, v))
    coeffs = np.array(
        [[float(c) / math.sqrt(float(nrm)) for c in row]
         for row, nrm in zip(basis_rows, norms)]
    )
    return Basis(dim=dim, degree=p, exponents=exps, coeffs=coeffs)


# -- quadrature ---------------------------------------------------------------

@dataclass(eq=False)
class QuadratureRule:
    """Points and weights on the reference simplex; exact to degree ``exactness``."""

    dim: int
    exactness: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.weights)


def _gauss_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _orbit_c(w: float) -> list[tuple[float, float, float, float]]:
    return [(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, w)]


def _orbit_s3(a: float, w: float) -> list[tuple[float, float, float, float]]:
    b = 1.0 - 2.0 * a
    return [(a, a, b, w), (a, b, a, w), (b, a, a, w)]


def _orbit_s6(a: float, b: float, w: float) -> list[tuple[float, float, float, float]]:
    c = 1.0 - a - b
    return [(a, b, c, w), (a, c, b, w), (b, a, c, w),
            (b, c, a, w), (c, a, b, w), (c, b, a, w)]


def _triangle_tables() -> dict[int, list[tuple[float, float, float, float]]]:
    s15 = math.sqrt(15.0)
    return {
        1: _orbit_c(1.0),
        2: _orbit_s3(1.0 / 6.0, 1.0 / 3.0),
        # vertices + edge midpoints + centroid, all weights positive
        3: _orbit_c(27.0 / 60.0) + _orbit_s3(0.0, 3.0 / 60.0) + _orbit_s3(0.5, 8.0 / 60.0),
        4: _orbit_s3(0.445948490915965, 0.223381589678011)
           + _orbit_s3(0.091576213509771, 0.109951743655322),
        5: _orbit_c(9.0 / 40.0)
           + _orbit_s3((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0)
           + _orbit_s3((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0),
        6: _orbit_s3(0.249286745170910, 0.116786275726379)
           + _orbit_s3(0.063089014491502, 0.050844906370207)
           + _orbit_s6(0.053145049844816, 0.310352451033785, 0.082851075618374),
    }


_TRIANGLE_TABLES = _triangle_tables()


def make_quadrature(dim: int, exactness: int) -> QuadratureRule:
    """A positive-weight rule on the reference simplex, exact to the given degree.

    1D: Gauss-Legendre.  2D: tabulated symmetric rules up to degree 6, then a
    Duffy-collapsed Gauss-Legendre tensor rule (weights stay positive).
    """
    if exactness < 0:
        raise ValueError("exactness must be non-negative")
    if exactness > _MAX_EXACTNESS:
        raise ValueError(f"exactness {exactness} beyond supported limit {_MAX_EXACTNESS}")
    e = max(exactness, 1)
    if dim == 1:
        x, w = _gauss_01(e // 2 + 1)
        return QuadratureRule(1, exactness, x.reshape(-1, 1), w)
    if dim != 2:
        raise ValueError(f"unsupported dimension {dim}")
    if e in _TRIANGLE_TABLES:
        items = _TRIANGLE_TABLES[e]
        # barycentric (b1,b2,b3) on vertices (0,0),(1,0),(0,1) -> (x,y) = (b2,b3)
        pts = np.array([(b2, b3) for _, b2, b3, _ in items])
        wts = np.array([w for _, _, _, w in items]) * 0.5
        return QuadratureRule(2, exactness, pts, wts)
    # collapsed tensor rule: x=u, y=v*(1-u), jacobian (1-u)
    nu = (e + 3) // 2
    nv = (e + 2) // 2
    u, wu = _gauss_01(nu)
    v, wv = _gauss_01(nv)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = np.stack([uu.ravel(), (vv * (1.0 - uu)).ravel()], axis=1)
    wts = (wu[:, None] * wv[None, :] * (1.0 - u)[:, None]).ravel()
    return QuadratureRule(2, exactness, pts, wts)


# -- DG grid functions ---------------------------------------------------------

@dataclass(eq=False)
class DGField:
    """Piecewise polynomial with per-element modal coefficients.

    ``coeffs`` has shape (n_elements, n_modes); row e holds the reference-basis
    coefficients of the restriction to element e.  ``time`` records the time
    the field represents.
    """

    mesh: Mesh
    basis: Basis
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.mesh.n_elements, self.basis.n_modes):
            raise ValueError(
                f"coefficient block shape {self.coeffs.shape} does not match "
                f"({self.mesh.n_elements}, {self.basis.n_modes})"
            )
        if self.mesh.dim != self.basis.dim:
            raise ValueError("mesh and basis dimensions differ")

    def copy(self) -> "DGField":
        return replace(self, coeffs=self.coeffs.copy())

    def __sub__(self, other: "DGField") -> "DGField":
        if other.mesh is not self.mesh or other.basis is not self.basis:
            raise ValueError("fields live on different meshes or bases")
        return replace(self, coeffs=self.coeffs - other.coeffs)

    def norm_l2(self) -> float:
        """Exact L2 norm (the basis is orthonormal per element)."""
        return float(np.sqrt(np.sum(self.mesh.volumes / reference_measure(self.mesh.dim)
                                    * np.sum(self.coeffs**2, axis=1))))


def evaluate(field: DGField, element: int, ref_points: np.ndarray) -> np.ndarray:
    """Field values on one element at reference coordinates."""
    if not 0 <= element < field.mesh.n_elements:
        raise IndexError(f"element {element} out of range")
    return field.basis.eval(ref_points) @ field.coeffs[element]


def _element_maps(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Affine maps x = A + J r for all elements: returns (A, J, det J)."""
    v = mesh.vertices[mesh.elements]
    origin = v[:, 0, :]
    if mesh.dim == 1:
        jac = (v[:, 1, :] - v[:, 0, :]).reshape(-1, 1, 1)
    else:
        jac = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
    det = np.linalg.det(jac)
    return origin, jac, det


def l2_project(f, t: float, mesh: Mesh, basis: Basis,
               exactness: int | None = None) -> DGField:
    """Block-diagonal L2 projection of f(x, t) onto the DG space.

    f is either a callable taking (points (n,dim), t) or a DGField on the
    same mesh (in which case the projection reproduces it exactly).
    """
    if isinstance(f, DGField):
        if f.mesh is not mesh and (f.mesh.dim != mesh.dim
                                   or f.mesh.n_elements != mesh.n_elements
                                   or not np.array_equal(f.mesh.vertices, mesh.vertices)):
            raise ValueError("field projection requires the same mesh")
        src = f
        fn = None
    else:
        src = None
        fn = f
    if exactness is None:
        exactness = 2 * basis.degree + 2
    quad = make_quadrature(mesh.dim, exactness)
    phi = basis.eval(quad.points)                       # (nq, m)
    if src is not None:
        vals = src.coeffs @ phi.T                       # (ne, nq)
    else:
        origin, jac, _ = _element_maps(mesh)
        xq = origin[:, None, :] + np.einsum("eij,qj->eqi", jac, quad.points)
        vals = np.asarray(fn(xq.reshape(-1, mesh.dim), t), dtype=float)
        vals = vals.reshape(mesh.n_elements, quad.n_points)
    # reference weights only: |det J| cancels against the mass inverse
    coeffs = np.einsum("q,eq,qm->em", quad.weights, vals, phi)
    return DGField(mesh=mesh, basis=basis, coeffs=coeffs, time=float(t))


# -- plain-text serialisation ---------------------------------------------------
#
#   dgfield p=<p> dim=<d> n_elems=<n>
#   <n lines of modal coefficients, 17 significant digits>

def save_field(field: DGField, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"dgfield p={field.basis.degree} dim={field.basis.dim} "
                 f"n_elems={field.mesh.n_elements}\n")
        for row in field.coeffs:
            fh.write(" ".join(f"{c:.17g}" for c in row) + "\n")


def load_field(path: str, mesh: Mesh, time: float = 0.0) -> DGField:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("dgfield"):
        raise ValueError(f"{path}: not a dgfield file")
    header = dict(part.split("=") for part in lines[0].split()[1:])
    p = int(header["p"])
    dim = int(header["dim"])
    ne = int(header["n_elems"])
    if dim != mesh.dim:
        raise ValueError(f"{path}: field dimension {dim} does not match mesh {mesh.dim}")
    if ne != mesh.n_elements:
        raise ValueError(f"{path}: field has {ne} elements, mesh has {mesh.n_elements}")
    basis = make_basis(dim, p)
    coeffs = np.array([[float(c) for c in ln.split()] for ln in lines[1:]])
    if coeffs.shape != (ne, basis.n_modes):
        raise ValueError(f"{path}: coefficient block shape {coeffs.shape} is wrong")
    return DGField(mesh=mesh, basis=basis, coeffs=coeffs, time=time)
