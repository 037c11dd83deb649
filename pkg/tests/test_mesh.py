"""Mesh construction, face topology, serialisation, inflow classification."""

from __future__ import annotations

import numpy as np
import pytest

from dgflow import (
    InflowSignChangeWarning,
    Interval,
    FlowProblem,
    MeshError,
    MeshFormatError,
    build_interval_mesh,
    build_triangle_mesh,
    classify_inflow_boundary,
    load_mesh,
    save_mesh,
)

from helpers import affine_flow_2d


def test_interval_mesh_counts_and_measures():
    mesh = build_interval_mesh(0.0, 1.0, 8)
    assert mesh.n_elements == 8
    assert mesh.n_vertices == 9
    assert mesh.h_max == pytest.approx(0.125)
    # 1D inradius convention is h/2, so the uniform shape ratio is 2
    assert mesh.shape_ratio == pytest.approx(2.0)
    widths = mesh.vertices[mesh.elements[:, 1], 0] - mesh.vertices[mesh.elements[:, 0], 0]
    assert np.sum(widths) == pytest.approx(1.0)
    mesh.validate()


def test_graded_interval_mesh_widths_form_geometric_sequence():
    r = 1.3
    mesh = build_interval_mesh(0.0, 1.0, 6, grading=r)
    widths = np.sort(mesh.vertices[mesh.elements[:, 1], 0]
                     - mesh.vertices[mesh.elements[:, 0], 0])
    ratios = widths[1:] / widths[:-1]
    assert np.allclose(ratios, r, atol=1e-10)
    assert np.sum(widths) == pytest.approx(1.0)


def test_interval_mesh_rejects_bad_inputs():
    with pytest.raises(MeshError):
        build_interval_mesh(0.0, 1.0, 0)
    with pytest.raises(MeshError):
        build_interval_mesh(1.0, 0.0, 4)
    with pytest.raises(MeshError):
        build_interval_mesh(0.0, 1.0, 4, grading=-2.0)


@pytest.mark.parametrize("pattern,per_cell", [("diagonal", 2), ("crisscross", 4)])
def test_triangle_mesh_area_and_counts(pattern, per_cell):
    mesh = build_triangle_mesh(0.0, 0.0, 1.0, 1.0, 3, 4, pattern=pattern)
    assert mesh.n_elements == 3 * 4 * per_cell
    v = mesh.vertices[mesh.elements]
    areas = 0.5 * np.abs(
        (v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
        - (v[:, 2, 0] - v[:, 0, 0]) * (v[:, 1, 1] - v[:, 0, 1]))
    assert np.sum(areas) == pytest.approx(1.0)
    assert np.all(areas > 0)
    mesh.validate()


def test_boundary_face_count_crisscross():
    nx, ny = 3, 5
    mesh = build_triangle_mesh(0.0, 0.0, 1.0, 1.0, nx, ny, pattern="crisscross")
    assert len(mesh.boundary_faces()) == 2 * (nx + ny)
    for f in mesh.boundary_faces():
        assert f.btag in ("left", "right", "bottom", "top")


def test_closed_element_boundary_constant_flux_is_zero():
    # sum over faces of K of (v.n)|face| vanishes for constant v
    mesh = build_triangle_mesh(0.0, 0.0, 2.0, 1.0, 3, 3, pattern="crisscross")
    v = np.array([0.7, -1.3])
    flux = np.zeros(mesh.n_elements)
    for f in mesh.faces:
        s = float(v @ f.normal) * f.measure
        flux[f.left] += s
        if f.right >= 0:
            flux[f.right] -= s
    assert np.max(np.abs(flux)) < 1e-12


def test_interior_normals_point_from_owner_to_neighbour():
    mesh = build_triangle_mesh(0.0, 0.0, 1.0, 1.0, 2, 2, pattern="diagonal")
    cent = mesh.vertices[mesh.elements].mean(axis=1)
    for f in mesh.interior_faces():
        d = cent[f.right] - cent[f.left]
        assert f.normal @ d > 0.0
    for f in mesh.boundary_faces():
        d = f.centroid - cent[f.left]
        assert f.normal @ d > 0.0
        assert np.linalg.norm(f.normal) == pytest.approx(1.0, abs=1e-12)


def test_refinement_halves_h_and_keeps_shape_ratio():
    for pattern in ("diagonal", "crisscross"):
        prev = build_triangle_mesh(0.0, 0.0, 1.0, 1.0, 2, 2, pattern=pattern)
        for n in (4, 8):
            cur = build_triangle_mesh(0.0, 0.0, 1.0, 1.0, n, n, pattern=pattern)
            assert cur.h_max == pytest.approx(prev.h_max / 2.0, abs=1e-12)
            assert cur.shape_ratio == pytest.approx(prev.shape_ratio, abs=1e-12)
            prev = cur


def test_mesh_roundtrip(tmp_path):
    for mesh in (build_interval_mesh(0.0, 2.0, 5, grading=1.2),
                 build_triangle_mesh(0.0, 0.0, 1.0, 1.0, 2, 3, pattern="crisscross")):
        path = tmp_path / "mesh.txt"
        save_mesh(mesh, str(path))
        back = load_mesh(str(path))
        assert back.dim == mesh.dim
        assert np.array_equal(back.vertices, mesh.vertices)
        assert np.array_equal(back.elements, mesh.elements)
        assert len(back.faces) == len(mesh.faces)


def test_load_rejects_dangling_vertex_index(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 4 3\n0\n0.25\n0.5\n1\n0 1\n1 2\n2 99\n")
    with pytest.raises(MeshFormatError) as err:
        load_mesh(str(path))
    assert "99" in str(err.value) or "vertex" in str(err.value)


def test_load_rejects_malformed_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("totally not a mesh\n")
    with pytest.raises(MeshFormatError):
        load_mesh(str(path))


def test_two_triangle_square_shares_one_interior_face(tmp_path):
    path = tmp_path / "square.txt"
    path.write_text(
        "2 4 2\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n")
    mesh = load_mesh(str(path))
    interior = mesh.interior_faces()
    assert len(interior) == 1
    assert len(mesh.boundary_faces()) == 4
    f = interior[0]
    # the shared diagonal: normal is unit, orthogonal to the edge
    edge = mesh.vertices[f.vertices[1]] - mesh.vertices[f.vertices[0]]
    assert abs(f.normal @ edge) < 1e-12


def _const_flow(a_fn):
    return FlowProblem(
        name="t", domain=Interval(0.0, 1.0), a=a_fn,
        c=lambda x, t: np.zeros(len(np.atleast_2d(x))),
        u0=lambda x: np.zeros(len(np.atleast_2d(x))),
        u_D=lambda x, t: np.zeros(len(np.atleast_2d(x))),
    )


def test_inflow_classification_1d():
    mesh = build_interval_mesh(0.0, 1.0, 4)
    for a_fn in (lambda x, t: np.ones((len(np.atleast_2d(x)), 1)),
                 lambda x, t: np.atleast_2d(x) + 1.0):
        ids = classify_inflow_boundary(mesh, _const_flow(a_fn), [0.0, 1.0])
        faces = [mesh.faces[i] for i in ids]
        assert len(faces) == 1
        assert faces[0].centroid[0] == pytest.approx(0.0)


def test_inflow_classification_2d_left_edge():
    mesh = build_triangle_mesh(0.0, 0.0, 1.0, 1.0, 2, 2, pattern="diagonal")
    flow = affine_flow_2d()
    flow = FlowProblem(
        name="t", domain=flow.domain,
        a=lambda x, t: np.tile([1.0, 0.0], (len(np.atleast_2d(x)), 1)),
        c=flow.c, u0=flow.u0, u_D=flow.u_D)
    ids = classify_inflow_boundary(mesh, flow, [0.0])
    faces = [mesh.faces[i] for i in ids]
    assert len(faces) == 2
    assert all(f.btag == "left" for f in faces)


def test_inflow_sign_change_warns():
    mesh = build_interval_mesh(0.0, 1.0, 4)
    flow = _const_flow(lambda x, t: np.full((len(np.atleast_2d(x)), 1), np.cos(t)))
    with pytest.warns(InflowSignChangeWarning):
        classify_inflow_boundary(mesh, flow, [0.0, np.pi])
