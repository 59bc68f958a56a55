"""Deterministic convergence study with a known standing-wave solution."""

from __future__ import annotations

import math

import numpy as np

from .cost import fit_slope
from .fem import assemble, max_eigenvalue, project_initial
from .integrators import chebyshev_constants, run
from .mesh import build_refined_interval, coarse_to_fine_ratio

_GAUSS3 = (np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)]), np.array([5.0, 8.0, 5.0]) / 9.0)


def standing_wave(x, t, length=6.0):
    """cos(pi x / L) cos(pi t / L): a Neumann eigenmode with unit speed."""
    k = math.pi / length
    return np.cos(k * np.asarray(x)) * math.cos(k * t)


def l2_error(mesh, u_nodal, exact):
    """L2 norm of (P1 interpolant of u_nodal) - exact, by 3-point Gauss per element."""
    a, h = mesh.vertices[:-1], mesh.sizes
    ua, ub = u_nodal[:-1], u_nodal[1:]
    err = 0.0
    for xg, wg in zip(*_GAUSS3):
        t = 0.5 * (xg + 1.0)
        diff = (1 - t) * ua + t * ub - exact(a + t * h)
        err += float(np.sum(wg * h / 2 * diff**2))
    return math.sqrt(err)


def standing_wave_errors(
    n_meshes=5, H0=0.25, ratio=4, fine_region=(4.0, 5.0), T=6.0, safety=0.9, nu=0.01, integrators=("lf", "lts")
):
    """Errors at time T on meshes with H = H0 2^-l and h_f = H / ratio inside ``fine_region``.

    Returns a list of dicts with H, h_f, n, and one error column per integrator.
    """
    rows = []
    for ell in range(n_meshes):
        H = H0 / 2**ell
        mesh = build_refined_interval((0.0, 6.0), H, fine_region, H / ratio)
        op = assemble(mesh, 1.0)
        A, sel = op.normalized, op.selector_diag
        z0, v0 = project_initial(mesh, op, lambda x: standing_wave(x, 0.0))
        lam = max_eigenvalue(A)
        row = {"H": H, "h_f": H / ratio, "n": mesh.n_vertices}
        for kind in integrators:
            if kind == "lf":
                state = run("lf", A, z0, v0, T, safety * 2 / math.sqrt(lam))
            else:
                D = (1.0 - sel)[:, None]
                lam_c = max_eigenvalue(A.multiply(D).multiply(D.T).tocsr())
                dt = safety * 2 / math.sqrt(lam_c)
                p = coarse_to_fine_ratio(H, H / ratio)
                consts = chebyshev_constants(p, nu)
                while dt**2 * lam > safety**2 * 2 * consts.delta * consts.omega:
                    consts = chebyshev_constants(consts.p + 1, nu)
                state = run("lts", A, z0, v0, T, dt, selector=sel, consts=consts)
            row[f"err_{kind}"] = l2_error(mesh, op.to_nodal(state.z_curr), lambda x: standing_wave(x, T))
        rows.append(row)
    return rows


def fitted_orders(rows, integrators=("lf", "lts")) -> dict:
    H = [r["H"] for r in rows]
    return {kind: fit_slope(H, [r[f"err_{kind}"] for r in rows]) for kind in integrators}
