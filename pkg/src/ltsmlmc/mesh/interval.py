"""Locally refined 1D meshes and nested hierarchies."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

_TOL = 1e-9


@dataclass(frozen=True)
class Mesh1D:
    vertices: np.ndarray
    fine_flags: np.ndarray
    H: float
    h_f: float | None = None
    fine_region: tuple[float, float] | None = None

    dim = 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.vertices)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.vertices) - 1

    @property
    def elements(self) -> np.ndarray:
        idx = np.arange(self.n_elements)
        return np.column_stack([idx, idx + 1])

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[:-1] + self.vertices[1:])

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.vertices[0]), float(self.vertices[-1])

    @property
    def h_min(self) -> float:
        return float(self.sizes.min())

    def fine_volume_fraction(self) -> float:
        """Relative length of the refined region (r in the cost model)."""
        if self.fine_region is None:
            return 0.0
        a, b = self.domain
        c, d = self.fine_region
        return (d - c) / (b - a)


def _assemble_vertices(domain, fine_region, n_left, n_fine, n_right):
    a, b = domain
    if fine_region is None:
        return np.linspace(a, b, n_left + 1), np.zeros(n_left, dtype=bool)
    c, d = fine_region
    parts = []
    if n_left:
        parts.append(np.linspace(a, c, n_left + 1)[:-1])
    parts.append(np.linspace(c, d, n_fine + 1))
    if n_right:
        parts.append(np.linspace(d, b, n_right + 1)[1:])
    verts = np.concatenate(parts)
    flags = np.zeros(len(verts) - 1, dtype=bool)
    lo = max(n_left - 1, 0)
    hi = min(n_left + n_fine + 1, len(flags))
    flags[lo:hi] = True
    return verts, flags


def _check_region(domain, fine_region):
    a, b = domain
    if not b > a:
        raise ValueError("empty domain")
    if fine_region is None:
        return
    c, d = fine_region
    if not (a - _TOL <= c < d <= b + _TOL):
        raise ValueError(f"fine region {fine_region} is not inside domain {domain}")


def build_refined_interval(domain, H, fine_region=None, h_f=None) -> Mesh1D:
    """Mesh of ``domain`` with size ~H outside ``fine_region`` and exactly uniform h_f inside.

    Coarse sizes are snapped so the pieces on either side are partitioned exactly.
    One element on each side of the refined region is flagged together with it.
    """
    _check_region(domain, fine_region)
    a, b = domain
    if fine_region is None:
        n = max(1, round((b - a) / H))
        verts, flags = _assemble_vertices(domain, None, n, 0, 0)
        return Mesh1D(verts, flags, float(H))
    if h_f is None or h_f <= 0:
        raise ValueError("a fine region needs a positive h_f")
    if h_f > H * (1 + _TOL):
        raise ValueError("h_f must not exceed H")
    c, d = fine_region
    n_left = 0 if c - a < _TOL else max(1, round((c - a) / H))
    n_right = 0 if b - d < _TOL else max(1, round((b - d) / H))
    n_fine = max(1, round((d - c) / h_f))
    verts, flags = _assemble_vertices(domain, fine_region, n_left, n_fine, n_right)
    return Mesh1D(verts, flags, float(H), float(h_f), (float(c), float(d)))


@dataclass(frozen=True)
class MeshHierarchy:
    levels: list
    H0: float
    h_f: float | None
    p: list

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, level):
        return self.levels[level]

    @property
    def L(self) -> int:
        return len(self.levels) - 1


def coarse_to_fine_ratio(H: float, h_f: float | None) -> int:
    if h_f is None:
        return 1
    return max(1, math.ceil(H / h_f - _TOL))


def build_hierarchy(domain, H0, fine_region, h_f, L) -> MeshHierarchy:
    """Nested meshes with the coarse part halved per level and the fine part kept at h_f.

    Once H_l drops below h_f the refined region is bisected along with the rest
    so every level stays nested; a warning is emitted for such levels.
    """
    if L < 0:
        raise ValueError("L must be non-negative")
    _check_region(domain, fine_region)
    a, b = domain
    if fine_region is None:
        n0 = max(1, round((b - a) / H0))
        levels = []
        for ell in range(L + 1):
            verts, flags = _assemble_vertices(domain, None, n0 * 2**ell, 0, 0)
            levels.append(Mesh1D(verts, flags, H0 / 2**ell))
        return MeshHierarchy(levels, float(H0), None, [1] * (L + 1))

    base = build_refined_interval(domain, H0, fine_region, h_f)
    c, d = fine_region
    n_left0 = 0 if c - a < _TOL else max(1, round((c - a) / H0))
    n_right0 = 0 if b - d < _TOL else max(1, round((b - d) / H0))
    n_fine0 = max(1, round((d - c) / h_f))
    levels = [base]
    ratios = [coarse_to_fine_ratio(H0, h_f)]
    for ell in range(1, L + 1):
        H = H0 / 2**ell
        halvings = 0
        if H < h_f * (1 - _TOL):
            halvings = math.ceil(math.log2(h_f / H) - _TOL)
            warnings.warn(
                f"level {ell}: H={H:g} is below h_f={h_f:g}; refining the fine region uniformly",
                stacklevel=2,
            )
        verts, flags = _assemble_vertices(
            domain, fine_region, n_left0 * 2**ell, n_fine0 * 2**halvings, n_right0 * 2**ell
        )
        levels.append(Mesh1D(verts, flags, H, float(h_f), (float(c), float(d))))
        ratios.append(coarse_to_fine_ratio(H, h_f))
    return MeshHierarchy(levels, float(H0), float(h_f), ratios)
