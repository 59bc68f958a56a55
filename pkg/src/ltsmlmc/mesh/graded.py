"""Meshes of the L-shaped domain graded towards the reentrant corner."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trimesh import NodePool, TriMesh, orient_ccw

CORNER = (0.5, 0.5)
# outer boundary points seen from the corner, in angular order
_RIM = [(1.0, 0.5), (1.0, 0.0), (0.5, 0.0), (0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 1.0)]


@dataclass(frozen=True)
class GradedMeshParams:
    m: int
    s: float = 2.0
    d: int = 2

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("need at least two layers (m >= 2)")
        if self.s < 1:
            raise ValueError("grading exponent s must be >= 1")
        if self.d < 1:
            raise ValueError("dimension must be positive")


def layer_widths(m: int, s: float) -> np.ndarray:
    """Width h_k of layer k = 1..m for a unit-to-corner distance of 1/2."""
    k = np.arange(1, m + 1, dtype=float)
    return (k**s - (k - 1) ** s) / (2.0 * m**s)


def graded_layer_table(params: GradedMeshParams) -> list[dict]:
    """Per-layer width and element counts of a graded simplex in any dimension.

    Layer k of one macro simplex holds k^d - (k-1)^d elements, so the inner
    k layers hold k^d.
    """
    h = layer_widths(params.m, params.s)
    rows = []
    for k in range(1, params.m + 1):
        n = k**params.d - (k - 1) ** params.d
        rows.append({"layer": k, "width": float(h[k - 1]), "elements": n, "cumulative": k**params.d})
    return rows


def build_graded_lshape(params: GradedMeshParams) -> TriMesh:
    """Triangulate (0,1)^2 minus [0.5,1]^2 with layers clustering at (0.5, 0.5).

    The domain is split into six macro triangles sharing the corner. In each,
    row k sits at relative distance (k/m)^s from the corner and carries k+1
    equispaced nodes, giving 2k-1 triangles in layer k and 6 m^2 overall.
    """
    if params.d != 2:
        raise ValueError("only the 2D mesh can be built; use graded_layer_table for other d")
    m, s = params.m, params.s
    c = np.array(CORNER)
    pool = NodePool()
    tris = []
    layer_of = []
    for a, b in zip(_RIM[:-1], _RIM[1:]):
        a = np.array(a) - c
        b = np.array(b) - c
        rows = [[pool.add(*c)]]
        for k in range(1, m + 1):
            t = (k / m) ** s
            rows.append([pool.add(*(c + t * (a + (b - a) * j / k))) for j in range(k + 1)])
        for k in range(1, m + 1):
            inner, outer = rows[k - 1], rows[k]
            for j in range(k):
                tris.append((outer[j], outer[j + 1], inner[j]))
                layer_of.append(k)
                if j < k - 1:
                    tris.append((outer[j + 1], inner[j + 1], inner[j]))
                    layer_of.append(k)
    verts = pool.array()
    layer = np.array(layer_of)
    mesh = TriMesh(
        verts,
        orient_ccw(verts, tris),
        layer == 1,
        {"m": m, "s": s, "layer": layer},
    )
    return mesh.validate()
