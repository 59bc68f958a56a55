import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from ltsmlmc.fem import (
    AssemblyError,
    ConvergenceError,
    QoIVector,
    assemble,
    cfl_dt,
    dump_operator,
    extract_line_qoi,
    load_triplets,
    max_eigenvalue,
    normalize,
    point_interpolation_matrix,
    project_initial,
    restrict_to_grid,
    trapezoid_weights,
)
from ltsmlmc.mesh import ChannelGeometry, TriMesh, apply_channel_transform, build_channel_mesh, build_graded_lshape
from ltsmlmc.mesh import GradedMeshParams, build_refined_interval, transform_vertices


@pytest.fixture(scope="module")
def mesh1d():
    return build_refined_interval((0.0, 6.0), 1 / 16, (5 - 1 / 16, 5), 2.0**-8)


@pytest.fixture(scope="module")
def lshape():
    return build_graded_lshape(GradedMeshParams(6, 2.0))


def test_uniform_1d_matrices():
    m = build_refined_interval((0.0, 1.0), 0.25)
    op = assemble(m, 1.0)
    h = 0.25
    K = op.stiffness.toarray()
    expected = (np.diag([1, 2, 2, 2, 1]) - np.eye(5, k=1) - np.eye(5, k=-1)) / h
    assert np.allclose(K, expected)
    assert np.allclose(op.mass_diag, [h / 2, h, h, h, h / 2])


def test_operator_properties_1d(mesh1d):
    op = assemble(mesh1d, lambda x: 1 + 0.1 * np.sin(x))
    A = op.normalized
    assert abs(A - A.T).max() == 0.0
    # constants lie in the kernel of the Neumann stiffness
    assert np.abs(op.stiffness @ np.ones(op.n)).max() < 1e-9
    assert np.abs(A @ op.sqrt_mass).max() < 1e-8
    assert op.mass_diag.sum() == pytest.approx(6.0)
    assert op.n_fine + op.n_coarse == op.n
    assert 16 < op.n_fine < 40


def test_operator_properties_2d(lshape):
    op = assemble(lshape, 2.0)
    assert abs(op.normalized - op.normalized.T).max() == 0.0
    assert np.abs(op.stiffness @ np.ones(op.n)).max() < 1e-9
    assert op.mass_diag.sum() == pytest.approx(0.75)
    lam = np.linalg.eigvalsh(op.normalized.toarray())
    assert lam.min() > -1e-10


def test_split_parts_recombine(mesh1d):
    op = assemble(mesh1d)
    assert abs(op.coarse_part + op.fine_part - op.normalized).max() < 1e-12


def test_speed_scales_stiffness(lshape):
    a = assemble(lshape, 1.0)
    b = assemble(lshape, 3.0)
    assert abs(b.stiffness - 3.0 * a.stiffness).max() < 1e-10
    assert np.array_equal(a.mass_diag, b.mass_diag)


def test_bad_speed_rejected(mesh1d):
    with pytest.raises(AssemblyError):
        assemble(mesh1d, -1.0)
    with pytest.raises(AssemblyError):
        assemble(mesh1d, np.nan)
    with pytest.raises(AssemblyError):
        normalize(np.zeros(3), sp.eye(3))


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.6, 1.6))
def test_jacobian_weighting_matches_moved_vertices(a, b, c):
    # for an affine map, pulling back to the reference mesh is exact
    mesh = build_graded_lshape(GradedMeshParams(3, 1.5))
    J = np.array([[c, a], [b, 1.0 + 0.2 * a]])
    if np.linalg.det(J) <= 0.1:
        return
    moved = mesh.with_vertices(mesh.vertices @ J.T)
    direct = assemble(moved, 1.0)
    pulled = assemble(mesh, 1.0, jacobians=np.broadcast_to(J, (mesh.n_elements, 2, 2)))
    assert abs(direct.stiffness - pulled.stiffness).max() < 1e-10
    assert np.allclose(direct.mass_diag, pulled.mass_diag, rtol=1e-12)


def test_channel_transform_two_ways_agree_where_affine():
    # inside the channel the width map is affine, so both routes give the same elements
    mesh = build_channel_mesh(1 / 15, 4e-3)
    c = mesh.barycenters()
    keep = (np.abs(c[:, 0]) < 0.045) & (np.abs(c[:, 1]) < 0.002)
    used, tris = np.unique(mesh.triangles[keep], return_inverse=True)
    sub = TriMesh(mesh.vertices[used], tris.reshape(-1, 3), mesh.fine_flags[keep])
    g = ChannelGeometry(0.0065)
    moved = assemble(sub.with_vertices(g.map_points(sub.vertices)), 1.0)
    pulled = assemble(sub, 1.0, jacobians=apply_channel_transform(sub, g))
    assert abs(moved.stiffness - pulled.stiffness).max() < 1e-9 * abs(moved.stiffness).max()
    assert np.allclose(moved.mass_diag, pulled.mass_diag, rtol=1e-12, atol=1e-18)


def test_jacobians_rejected_in_1d(mesh1d):
    with pytest.raises(AssemblyError):
        assemble(mesh1d, 1.0, jacobians=np.ones((mesh1d.n_elements, 2, 2)))


def test_max_eigenvalue_against_dense(mesh1d, lshape):
    for mesh in (mesh1d, lshape):
        A = assemble(mesh, 1.3).normalized
        exact = np.linalg.eigvalsh(A.toarray()).max()
        assert max_eigenvalue(A, tol=1e-10) == pytest.approx(exact, rel=1e-6)


def test_max_eigenvalue_reports_stagnation():
    A = np.diag([1.0, -1.0])
    with pytest.raises(ConvergenceError):
        max_eigenvalue(np.array([[0.0, 1.0], [1.0, 0.0]]) @ A, maxiter=50)


def test_cfl_step(mesh1d):
    A = assemble(mesh1d).normalized
    lam = max_eigenvalue(A)
    assert cfl_dt(A, 1.0, lam) == pytest.approx(2 / np.sqrt(lam))
    assert cfl_dt(A, 0.9) == pytest.approx(0.9 * 2 / np.sqrt(lam), rel=1e-5)
    with pytest.raises(ValueError):
        cfl_dt(A, 1.5)


def test_nodal_projection_is_nodal_interpolation(mesh1d):
    op = assemble(mesh1d)
    z0, v0 = project_initial(mesh1d, op, np.sin, np.cos)
    assert np.allclose(op.to_nodal(z0), np.sin(mesh1d.vertices))
    assert np.allclose(op.to_nodal(v0), np.cos(mesh1d.vertices))
    zero = project_initial(mesh1d, op, np.sin)[1]
    assert not zero.any()


def test_gauss_projection_reproduces_linears_inside():
    m = build_refined_interval((0.0, 2.0), 0.125)
    op = assemble(m)
    z0, _ = project_initial(m, op, lambda x: 3 * x - 1, quadrature="gauss")
    u = op.to_nodal(z0)
    assert np.allclose(u[1:-1], 3 * m.vertices[1:-1] - 1)
    with pytest.raises(ValueError):
        project_initial(m, op, np.sin, quadrature="simpson")


def test_gauss_projection_2d_preserves_mass(lshape):
    op = assemble(lshape)
    z0, _ = project_initial(lshape, op, lambda p: 1 + p[..., 0] * 0, quadrature="gauss")
    assert op.to_nodal(z0) @ op.mass_diag == pytest.approx(0.75)


def test_trapezoid_norm():
    w = trapezoid_weights((0.0, 6.0, 769))
    assert w.sum() == pytest.approx(6.0)
    q = QoIVector(np.ones(769), (0.0, 6.0, 769))
    assert q.norm() == pytest.approx(np.sqrt(6.0))
    with pytest.raises(ValueError):
        q - QoIVector(np.ones(10), (0.0, 1.0, 10))


def test_restrict_to_grid(mesh1d):
    q = restrict_to_grid(mesh1d, 2 * mesh1d.vertices, (0.0, 6.0, 13))
    assert np.allclose(q.values, 2 * np.linspace(0, 6, 13))
    with pytest.raises(ValueError):
        restrict_to_grid(mesh1d, mesh1d.vertices, (0.0, 7.0, 5))


@given(st.lists(st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 0.5)), min_size=1, max_size=8))
def test_point_interpolation_exact_for_linears(points):
    mesh = build_graded_lshape(GradedMeshParams(4, 2.0))
    P = point_interpolation_matrix(mesh, np.array(points))
    f = 0.3 + 2 * mesh.vertices[:, 0] - mesh.vertices[:, 1]
    pts = np.array(points)
    assert np.allclose(P @ f, 0.3 + 2 * pts[:, 0] - pts[:, 1])
    assert np.allclose(P.sum(axis=1), 1)


def test_point_outside_mesh_rejected(lshape):
    with pytest.raises(ValueError):
        point_interpolation_matrix(lshape, np.array([[0.9, 0.9]]))


def test_line_trace_on_channel():
    mesh = build_channel_mesh(1 / 15, 4e-3)
    grid = (-0.5, 0.5, 33)
    q = extract_line_qoi(mesh, mesh.vertices[:, 1] ** 1, x=-0.4, grid=grid)
    assert np.allclose(q.values, np.linspace(-0.5, 0.5, 33))


def test_operator_dump_round_trip(tmp_path, mesh1d):
    op = assemble(mesh1d, 1.7)
    dump_operator(op, tmp_path / "A.txt")
    B = load_triplets(tmp_path / "A.txt")
    assert abs(B - op.normalized).max() == 0.0


def test_tiny_mesh_operator():
    v = np.array([[0, 0], [1, 0], [0, 1]], dtype=float)
    op = assemble(TriMesh(v, np.array([[0, 1, 2]]), np.ones(1, bool)))
    assert np.allclose(op.mass_diag, 1 / 6)
    assert op.n_fine == 3
