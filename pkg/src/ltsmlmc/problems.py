"""The three random wave problems, each as a factory of per-level solvers.

A problem object is cheap to pickle: meshes, step sizes and interpolation
matrices are built lazily in whichever process first needs them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import rng
from .cost import single_solve_cost_lf, single_solve_cost_lts
from .fem import assemble, extract_line_qoi, max_eigenvalue, point_interpolation_matrix, project_initial, restrict_to_grid
from .integrators import LtsOperator, OpCounts, chebyshev_constants, run
from .mesh import (
    BBAR,
    TOTAL_AREA,
    ChannelGeometry,
    build_channel_mesh,
    build_hierarchy,
    coarse_to_fine_ratio,
    transform_vertices,
)


@dataclass
class LevelSetup:
    level: int
    mesh: object
    H: float
    dt_lf: float
    dt_lts: float
    p: int
    consts: object
    extra: dict = field(default_factory=dict)


def stable_substeps(p_min, dt, lam_max, consts_for, safety):
    """Smallest p >= p_min whose stabilized substeps are stable for lambda_max."""
    p = max(1, p_min)
    while True:
        c = consts_for(p)
        if dt**2 * lam_max <= safety**2 * 2 * c.delta * c.omega:
            return p, c
        p += 1


def _coarse_lambda(A, sel):
    D = sp.diags(1.0 - sel)
    return max_eigenvalue(D @ A @ D)


@dataclass
class WaveProblem:
    """Common parts: level cache, step-size selection and model costs."""

    T: float
    H0: float
    h_f: float
    nu: float = 0.01
    safety: float = 0.9
    max_L: int = 8
    grid: tuple = (0.0, 6.0, 769)
    name = "base"
    dim = 1

    def __post_init__(self):
        self._levels = {}
        if not 0 <= self.nu <= 1:
            raise ValueError("nu must lie in [0, 1]")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_levels"] = {}
        return state

    # hooks for subclasses
    def build_mesh(self, ell):
        raise NotImplementedError

    def reference_operator(self, setup_mesh):
        """Operator with the largest admissible wave speed or thinnest geometry."""
        raise NotImplementedError

    @property
    def fine_fraction(self) -> float:
        raise NotImplementedError

    def H(self, ell) -> float:
        return self.H0 / 2**ell

    @property
    def p0(self) -> int:
        return coarse_to_fine_ratio(self.H0, self.h_f)

    def nominal_p(self, ell) -> int:
        return max(1, coarse_to_fine_ratio(self.H(ell), self.h_f))

    def level(self, ell) -> LevelSetup:
        if ell not in self._levels:
            if ell < 0 or ell > self.max_L:
                raise ValueError(f"level {ell} outside 0..{self.max_L}")
            mesh = self.build_mesh(ell)
            op = self.reference_operator(mesh)
            A, sel = op.normalized, op.selector_diag
            lam = max_eigenvalue(A)
            dt_lf = self.safety * 2.0 / math.sqrt(lam)
            if sel.any() and not sel.all():
                dt_lts = self.safety * 2.0 / math.sqrt(_coarse_lambda(A, sel))
            else:
                dt_lts = dt_lf
            p, consts = stable_substeps(
                self.nominal_p(ell), dt_lts, lam, lambda q: chebyshev_constants(q, self.nu), self.safety
            )
            self._levels[ell] = LevelSetup(ell, mesh, self.H(ell), dt_lf, dt_lts, p, consts)
        return self._levels[ell]

    def single_cost(self, ell, integrator) -> float:
        f = single_solve_cost_lf if integrator == "lf" else single_solve_cost_lts
        return f(self.T, self.H(ell), self.nominal_p(ell), self.fine_fraction, self.dim)

    def model_cost(self, ell, integrator) -> float:
        """Modelled work of one level-ell difference sample (both solves of the pair)."""
        c = self.single_cost(ell, integrator)
        return c + self.single_cost(ell - 1, integrator) if ell > 0 else c

    def integrate(self, setup: LevelSetup, op, z0, v0, integrator):
        if integrator == "lf":
            state = run("lf", op.normalized, z0, v0, self.T, setup.dt_lf)
        elif integrator == "lts":
            lts_op = LtsOperator.from_matrix(op.normalized, op.selector_diag)
            state = run(
                "lts", op.normalized, z0, v0, self.T, setup.dt_lts,
                selector=op.selector_diag, consts=setup.consts, lts_op=lts_op,
            )
        else:
            raise ValueError(f"unknown integrator {integrator!r}")
        return op.to_nodal(state.z_curr), state.counts

    def describe(self) -> dict:
        return {
            "problem": self.name,
            "T": self.T,
            "H0": self.H0,
            "h_f": self.h_f,
            "nu": self.nu,
            "safety": self.safety,
            "max_L": self.max_L,
            "qoi_grid": f"{self.grid[0]!r}:{self.grid[1]!r}:{self.grid[2]}",
            "fine_fraction": self.fine_fraction,
        }


@dataclass
class Smooth1D(WaveProblem):
    """Random smooth speed on (0, 6), Gaussian pulse at x = 3."""

    T: float = 11.0
    H0: float = 1 / 16
    h_f: float = 2.0**-8
    domain = (0.0, 6.0)
    fine_right = 5.0
    name = "smooth1d"

    @property
    def fine_region(self):
        return (self.fine_right - self.H0, self.fine_right)

    @property
    def fine_fraction(self) -> float:
        return self.H0 / (self.domain[1] - self.domain[0])

    def build_mesh(self, ell):
        return build_hierarchy(self.domain, self.H0, self.fine_region, self.h_f, ell)[ell]

    def worst_speed2(self):
        return rng.speed_squared_bound(rng.FieldKind.KL)

    def reference_operator(self, mesh):
        return assemble(mesh, self.worst_speed2())

    @staticmethod
    def u0(x):
        return np.exp(-((x - 3.0) ** 2) / 0.09)

    def sample_field(self, stream):
        return rng.sample_kl(stream)

    def speed2(self, field_sample, mesh):
        return rng.eval_speed_squared(field_sample, mesh.midpoints)

    def solve(self, ell, field_sample, integrator):
        setup = self.level(ell)
        mesh = setup.mesh
        op = assemble(mesh, self.speed2(field_sample, mesh))
        z0, v0 = project_initial(mesh, op, self.u0)
        u, counts = self.integrate(setup, op, z0, v0, integrator)
        return restrict_to_grid(mesh, u, self.grid).values, counts


@dataclass
class Jump1D(Smooth1D):
    """Speed 1 left of a random jump position and 2 right of it."""

    T: float = 6.0
    H0: float = 1 / 16
    h_f: float = 2.0**-9
    fine_right = 4.0
    name = "jump1d"

    def worst_speed2(self):
        return rng.speed_squared_bound(rng.FieldKind.JUMP)

    def sample_field(self, stream):
        return rng.sample_jump(stream, self.H0)


def bump(points, center=(0.5, 0.0), R=0.2):
    """Smooth compactly supported pulse exp(1 - R^2/(R^2 - |x - x0|^2))."""
    d2 = np.sum((np.asarray(points) - np.asarray(center)) ** 2, axis=-1)
    out = np.zeros_like(d2)
    inside = d2 < R**2
    out[inside] = np.exp(1.0 - R**2 / (R**2 - d2[inside]))
    return out


@dataclass
class Channel2D(WaveProblem):
    """Two rectangles joined by a channel of random width; QoI on the line x = -0.4."""

    T: float = 1.0
    H0: float = 1 / 60
    h_f: float = 7.6e-4
    grid: tuple = (-0.5, 0.5, 512)
    max_L: int = 4
    qoi_x: float = -0.4
    name = "channel2d"
    dim = 2

    @property
    def fine_fraction(self) -> float:
        # channel area relative to the reference domain
        return 0.1 * BBAR / TOTAL_AREA

    def build_mesh(self, ell):
        return build_channel_mesh(self.H(ell), self.h_f)

    def reference_operator(self, mesh):
        thin = transform_vertices(mesh, ChannelGeometry(rng.WIDTH_RANGE[0]))
        return assemble(thin, 1.0)

    def level(self, ell):
        setup = super().level(ell)
        if "interp" not in setup.extra:
            y = np.linspace(*self.grid)
            pts = np.column_stack([np.full_like(y, self.qoi_x), y])
            setup.extra["interp"] = point_interpolation_matrix(setup.mesh, pts)
        return setup

    def sample_field(self, stream):
        return rng.sample_width(stream)

    def solve(self, ell, field_sample, integrator):
        setup = self.level(ell)
        mesh = transform_vertices(setup.mesh, ChannelGeometry(field_sample.width_b))
        op = assemble(mesh, 1.0)
        z0, v0 = project_initial(mesh, op, bump)
        u, counts = self.integrate(setup, op, z0, v0, integrator)
        q = extract_line_qoi(mesh, u, self.qoi_x, self.grid, matrix=setup.extra["interp"])
        return q.values, counts


PROBLEMS = {"smooth1d": Smooth1D, "jump1d": Jump1D, "channel2d": Channel2D}


def make_problem(name, **overrides) -> WaveProblem:
    try:
        cls = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown experiment {name!r}") from None
    return cls(**overrides)


__all__ = ["Channel2D", "Jump1D", "LevelSetup", "OpCounts", "PROBLEMS", "Smooth1D", "WaveProblem", "bump", "make_problem"]
