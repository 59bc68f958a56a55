"""P1 finite elements with mass lumping, operator normalization and output sampling."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class AssemblyError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscreteOperator:
    """Lumped mass, stiffness, normalized operator A = M^-1/2 K M^-1/2 and fine selector."""

    mass_diag: np.ndarray
    stiffness: sp.csr_matrix
    normalized: sp.csr_matrix
    selector_diag: np.ndarray

    @property
    def n(self) -> int:
        return len(self.mass_diag)

    @property
    def n_fine(self) -> int:
        return int(self.selector_diag.sum())

    @property
    def n_coarse(self) -> int:
        return self.n - self.n_fine

    @cached_property
    def sqrt_mass(self) -> np.ndarray:
        return np.sqrt(self.mass_diag)

    def to_nodal(self, z):
        """Nodal P1 coefficients u = M^-1/2 z."""
        return z / self.sqrt_mass

    def from_nodal(self, u):
        return self.sqrt_mass * u

    @cached_property
    def coarse_part(self) -> sp.csr_matrix:
        """A (I - P)."""
        return sp.csr_matrix(self.normalized @ sp.diags(1.0 - self.selector_diag))

    @cached_property
    def fine_part(self) -> sp.csr_matrix:
        """A P."""
        return sp.csr_matrix(self.normalized @ sp.diags(self.selector_diag))


def _element_values(speed2, points):
    vals = speed2(points) if callable(speed2) else speed2
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (len(points),))
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise AssemblyError("squared wave speed must be positive at every quadrature point")
    return vals


def _stiffness_1d(mesh, c2):
    h = mesh.sizes
    n = mesh.n_vertices
    k = c2 / h
    i = np.arange(n - 1)
    rows = np.concatenate([i, i + 1, i, i + 1])
    cols = np.concatenate([i, i + 1, i + 1, i])
    vals = np.concatenate([k, k, -k, -k])
    K = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    m = np.zeros(n)
    np.add.at(m, i, h / 2)
    np.add.at(m, i + 1, h / 2)
    return K, m


def barycentric_gradients(vertices, triangles):
    """Gradients of the three hat functions on each triangle, shape (n, 3, 2), and areas."""
    p = vertices[triangles]
    B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edges
    Binv = np.linalg.inv(B)
    D = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = np.einsum("ij,njk->nik", D, Binv)
    area = 0.5 * np.abs(np.linalg.det(B))
    return grads, area


def _stiffness_2d(mesh, c2, jacobians=None):
    grads, area = barycentric_gradients(mesh.vertices, mesh.triangles)
    weight = area * c2
    mass_w = area.copy()
    if jacobians is not None:
        detJ = np.linalg.det(jacobians)
        if np.any(detJ <= 0):
            raise AssemblyError("non-positive Jacobian determinant")
        grads = np.einsum("nik,nkj->nij", grads, np.linalg.inv(jacobians))
        weight = weight * detJ
        mass_w = mass_w * detJ
    Ke = weight[:, None, None] * np.einsum("nik,njk->nij", grads, grads)
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    m = np.zeros(n)
    for j in range(3):
        np.add.at(m, t[:, j], mass_w / 3.0)
    return K, m


def normalize(mass_diag, K):
    """A = M^-1/2 K M^-1/2 for a diagonal M and a symmetric K.

    Entries are scaled by s_i s_j with s = M^-1/2, so A is exactly symmetric
    whenever K is.
    """
    mass_diag = np.asarray(mass_diag, dtype=float)
    if np.any(mass_diag <= 0):
        raise AssemblyError("lumped mass must be positive")
    K = sp.csr_matrix(K, copy=True)
    K.sum_duplicates()
    s = 1.0 / np.sqrt(mass_diag)
    rows = np.repeat(np.arange(K.shape[0]), np.diff(K.indptr))
    K.data = K.data * (s[rows] * s[K.indices])
    return K


def fine_selector(mesh) -> np.ndarray:
    sel = np.zeros(mesh.n_vertices)
    sel[np.unique(mesh.elements[mesh.fine_flags])] = 1.0
    return sel


def assemble(mesh, speed2=1.0, jacobians=None) -> DiscreteOperator:
    """Assemble lumped P1 operators.

    ``speed2`` is a callable of the quadrature points (midpoints in 1D,
    barycenters in 2D), a per-element array or a constant.
    """
    if mesh.dim == 1:
        if jacobians is not None:
            raise AssemblyError("Jacobian weighting is only available in 2D")
        K, m = _stiffness_1d(mesh, _element_values(speed2, mesh.midpoints))
    else:
        K, m = _stiffness_2d(mesh, _element_values(speed2, mesh.barycenters()), jacobians)
    K.sum_duplicates()
    return DiscreteOperator(m, K, normalize(m, K), fine_selector(mesh))


def max_eigenvalue(A, tol=1e-6, maxiter=20000) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration."""
    A = sp.csr_matrix(A) if sp.issparse(A) else np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    x = np.random.default_rng(12345).standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(maxiter):
        y = A @ x
        new = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    raise ConvergenceError(f"power iteration did not converge in {maxiter} iterations")


def cfl_dt(A, safety=0.9, lam=None) -> float:
    """Largest stable leapfrog step 2/sqrt(lambda_max), scaled by ``safety``."""
    if not 0 < safety <= 1:
        raise ValueError("safety must lie in (0, 1]")
    lam = max_eigenvalue(A) if lam is None else lam
    return safety * 2.0 / np.sqrt(lam)


_GAUSS3 = (np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)]), np.array([5.0, 8.0, 5.0]) / 9.0)


def project_initial(mesh, op: DiscreteOperator, u0, v0=None, quadrature="nodal"):
    """Lumped L2 projection of the initial data, returned as (z0, M^1/2 v0).

    With ``quadrature="nodal"`` the load vector uses the same nodal rule as the
    lumped mass, so the coefficients are the nodal values. ``"gauss"`` integrates
    (u0, phi_i) accurately instead (3-point Gauss in 1D, edge midpoints in 2D).
    """

    def coeffs(f):
        if f is None:
            return np.zeros(mesh.n_vertices)
        if quadrature == "nodal":
            return np.broadcast_to(np.asarray(f(mesh.vertices), dtype=float), (mesh.n_vertices,)).copy()
        if quadrature != "gauss":
            raise ValueError(f"unknown quadrature {quadrature!r}")
        load = np.zeros(mesh.n_vertices)
        if mesh.dim == 1:
            a, h = mesh.vertices[:-1], mesh.sizes
            xg, wg = _GAUSS3
            for x, w in zip(xg, wg):
                t = 0.5 * (x + 1.0)
                fv = f(a + t * h) * w * h / 2
                np.add.at(load, np.arange(mesh.n_elements), fv * (1 - t))
                np.add.at(load, np.arange(1, mesh.n_vertices), fv * t)
        else:
            t = mesh.triangles
            p = mesh.vertices[t]
            area = mesh.areas()
            for a_, b_ in ((0, 1), (1, 2), (2, 0)):
                fv = f(0.5 * (p[:, a_] + p[:, b_])) * area / 3.0
                np.add.at(load, t[:, a_], 0.5 * fv)
                np.add.at(load, t[:, b_], 0.5 * fv)
        return load / op.mass_diag

    return op.from_nodal(coeffs(u0)), op.from_nodal(coeffs(v0))


@dataclass(frozen=True)
class QoIVector:
    """Samples of a field on a fixed uniform grid, with a trapezoid L2 norm."""

    values: np.ndarray
    grid: tuple[float, float, int]

    @property
    def points(self) -> np.ndarray:
        return np.linspace(*self.grid)

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.grid)

    def norm_sq(self) -> float:
        return float(self.weights @ (self.values**2))

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def __sub__(self, other: QoIVector) -> QoIVector:
        if self.grid != other.grid:
            raise ValueError("QoI grids differ")
        return QoIVector(self.values - other.values, self.grid)


def trapezoid_weights(grid) -> np.ndarray:
    a, b, n = grid
    w = np.full(n, (b - a) / (n - 1))
    w[[0, -1]] *= 0.5
    return w


def restrict_to_grid(mesh, u, grid) -> QoIVector:
    """P1 interpolation of nodal values ``u`` on a 1D mesh at a uniform grid."""
    a, b, n = grid
    lo, hi = mesh.domain
    tol = 1e-12 * max(1.0, abs(hi))
    if a < lo - tol or b > hi + tol:
        raise ValueError(f"output grid [{a}, {b}] leaves the mesh [{lo}, {hi}]")
    return QoIVector(np.interp(np.linspace(a, b, n), mesh.vertices, u), (float(a), float(b), int(n)))


def point_interpolation_matrix(mesh, points, tol=1e-10) -> sp.csr_matrix:
    """Sparse matrix mapping nodal values to P1 values at ``points`` on a triangle mesh."""
    points = np.asarray(points, dtype=float)
    p = mesh.vertices[mesh.triangles]
    lo, hi = p.min(axis=1), p.max(axis=1)
    B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    Binv = np.linalg.inv(B)
    rows, cols, vals = [], [], []
    for k, x in enumerate(points):
        cand = np.nonzero(np.all((lo - tol <= x) & (x <= hi + tol), axis=1))[0]
        for e in cand:
            xi = Binv[e] @ (x - p[e, 0])
            lam = np.array([1.0 - xi.sum(), xi[0], xi[1]])
            if lam.min() >= -tol:
                lam = np.clip(lam, 0.0, None)
                rows += [k] * 3
                cols += list(mesh.triangles[e])
                vals += list(lam / lam.sum())
                break
        else:
            raise ValueError(f"point {tuple(x)} lies outside the mesh")
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(points), mesh.n_vertices))


def line_grid(x=-0.4, y_range=(-0.5, 0.5), n=512):
    return (float(y_range[0]), float(y_range[1]), int(n))


def extract_line_qoi(mesh, u, x=-0.4, grid=None, matrix=None) -> QoIVector:
    """Trace of the P1 field ``u`` along the vertical line through ``x``."""
    grid = line_grid(x) if grid is None else grid
    if matrix is None:
        y = np.linspace(*grid)
        matrix = point_interpolation_matrix(mesh, np.column_stack([np.full_like(y, x), y]))
    return QoIVector(matrix @ u, grid)


def dump_operator(op: DiscreteOperator, path, which="normalized") -> None:
    """Write one operator matrix as ``i j value`` lines after an ``n nnz`` header."""
    A = sp.coo_matrix(getattr(op, which))
    with open(path, "w") as fh:
        fh.write(f"# {which}\n{A.shape[0]} {A.nnz}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")


def load_triplets(path) -> sp.csr_matrix:
    rows = [ln.split() for ln in open(path) if ln.strip() and not ln.startswith("#")]
    n, _ = map(int, rows[0])
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, 3)
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, n))
