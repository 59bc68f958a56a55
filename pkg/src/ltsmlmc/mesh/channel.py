"""Two rectangles joined by a narrow channel, and the random width transform.

Reference domain: rectangles [-1, -0.05] x [-0.5, 0.5] and [0.05, 1] x [-0.5, 0.5]
joined by the channel [-0.05, 0.05] x [-bbar/2, bbar/2].

The triangulation is built from three kinds of blocks:

* a structured grid inside the channel (cells of size ~h_f),
* nested rectangular shells around each channel mouth whose node spacing
  doubles from shell to shell, triangulated by zipping the node rows of
  consecutive shells together,
* a uniform far-field grid of size ~H covering the rest of each rectangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trimesh import MeshError, NodePool, TriMesh, orient_ccw

BBAR = 0.004
HALF_CHANNEL_LENGTH = 0.05
RECT_WIDTH = 0.95
HALF_HEIGHT = 0.5
BLEND_INNER = 0.05
BLEND_OUTER = 0.1
TOTAL_AREA = 2 * RECT_WIDTH * 2 * HALF_HEIGHT + 2 * HALF_CHANNEL_LENGTH * BBAR


def _zip(outer: list[int], inner: list[int], pts: NodePool) -> list[tuple[int, int, int]]:
    """Triangulate the strip between two node rows on parallel lines.

    Both rows run in the same direction; the first and last rungs
    (outer[0]-inner[0], outer[-1]-inner[-1]) are edges of the strip.
    """

    def params(row):
        if len(row) == 1:
            return np.zeros(1)
        xy = np.array([pts.coords[i] for i in row])
        s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(xy, axis=0), axis=1))])
        return s / s[-1]

    to, ti = params(outer), params(inner)
    i = j = 0
    tris = []
    while i < len(outer) - 1 or j < len(inner) - 1:
        advance_outer = j == len(inner) - 1 or (i < len(outer) - 1 and to[i + 1] <= ti[j + 1])
        if advance_outer:
            tris.append((outer[i], outer[i + 1], inner[j]))
            i += 1
        else:
            tris.append((outer[i], inner[j + 1], inner[j]))
            j += 1
    return tris


def _row(pool: NodePool, p0, p1, n) -> list[int]:
    return [pool.add(p0[0] + (p1[0] - p0[0]) * t / n, p0[1] + (p1[1] - p0[1]) * t / n) for t in range(n + 1)]


def _half(pool: NodePool, sign: float, H: float, mouth_y: np.ndarray):
    """Triangles and fine flags for the rectangle on side ``sign`` (+1 right, -1 left)."""
    x0 = HALF_CHANNEL_LENGTH

    def P(u, y):
        return (sign * (x0 + u), y)

    nxg = max(1, round(RECT_WIDTH / H))
    nyg = 2 * max(1, round(HALF_HEIGHT / H))
    hx = RECT_WIDTH / nxg
    hy = 2 * HALF_HEIGHT / nyg

    s0 = mouth_y[1] - mouth_y[0]
    a, c, s = [0.0], [float(mouth_y[-1])], [s0]
    while 2 * s[-1] <= min(hx, hy) * (1 + 1e-12):
        sk = 2 * s[-1]
        a.append(a[-1] + sk)
        c.append(c[-1] + sk)
        s.append(sk)
    ia = math.ceil((a[-1] + 0.5 * hx) / hx - 1e-9)
    jc = math.ceil((c[-1] + 0.5 * hy) / hy - 1e-9)
    a.append(ia * hx)
    c.append(jc * hy)
    s.append(min(hx, hy))
    if a[-1] >= RECT_WIDTH - 1e-12 or c[-1] >= HALF_HEIGHT - 1e-12:
        raise MeshError("transition shells do not fit inside the rectangle; reduce H")

    def box_rows(k):
        """Bottom, right and top node rows of box k, each running away from/along the wall."""
        if k == 0:
            bottom = [pool.add(*P(0.0, mouth_y[0]))]
            right = [pool.add(*P(0.0, y)) for y in mouth_y]
            top = [pool.add(*P(0.0, mouth_y[-1]))]
            return bottom, right, top
        if k == len(a) - 1:
            nb, nr = ia, 2 * jc
        else:
            nb = max(1, round(a[k] / s[k]))
            nr = max(1, round(2 * c[k] / s[k]))
        bottom = _row(pool, P(0.0, -c[k]), P(a[k], -c[k]), nb)
        right = _row(pool, P(a[k], -c[k]), P(a[k], c[k]), nr)
        top = _row(pool, P(a[k], c[k]), P(0.0, c[k]), nb)
        return bottom, right, top

    tris: list[tuple[int, int, int]] = []
    prev = box_rows(0)
    for k in range(1, len(a)):
        cur = box_rows(k)
        tris += _zip(cur[0], prev[0], pool)
        tris += _zip(cur[1], prev[1], pool)
        # top rows run from the corner towards the wall on both boxes
        tris += _zip(cur[2], prev[2], pool)
        prev = cur
    n_fine = len(tris)

    for i in range(nxg):
        for j in range(nyg):
            u0, u1 = i * hx, (i + 1) * hx
            y0, y1 = -HALF_HEIGHT + j * hy, -HALF_HEIGHT + (j + 1) * hy
            if u1 <= a[-1] + 1e-12 and y0 >= -c[-1] - 1e-12 and y1 <= c[-1] + 1e-12:
                continue
            v00 = pool.add(*P(u0, y0))
            v10 = pool.add(*P(u1, y0))
            v01 = pool.add(*P(u0, y1))
            v11 = pool.add(*P(u1, y1))
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    flags = np.zeros(len(tris), dtype=bool)
    flags[:n_fine] = True
    return tris, flags, {"shell_sizes": s, "box_half_heights": c, "box_widths": a}


def build_channel_mesh(H: float, h_f: float, bbar: float = BBAR) -> TriMesh:
    """Triangulate the reference domain with size ~H away from the channel and ~h_f inside it."""
    if h_f <= 0 or H < h_f:
        raise ValueError("need 0 < h_f <= H")
    ny = max(2, math.ceil(bbar / h_f - 1e-9))
    ny += ny % 2  # keep y = 0 on a grid line
    nx = max(2, math.ceil(2 * HALF_CHANNEL_LENGTH / h_f - 1e-9))
    mouth_y = np.linspace(-bbar / 2, bbar / 2, ny + 1)

    pool = NodePool()
    tris: list[tuple[int, int, int]] = []
    xs = np.linspace(-HALF_CHANNEL_LENGTH, HALF_CHANNEL_LENGTH, nx + 1)
    for i in range(nx):
        for j in range(ny):
            v00 = pool.add(xs[i], mouth_y[j])
            v10 = pool.add(xs[i + 1], mouth_y[j])
            v01 = pool.add(xs[i], mouth_y[j + 1])
            v11 = pool.add(xs[i + 1], mouth_y[j + 1])
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    flags = [np.ones(len(tris), dtype=bool)]
    meta = {"H": float(H), "h_f": float(h_f), "bbar": float(bbar), "channel_cells": (nx, ny)}
    for sign in (1.0, -1.0):
        t, f, info = _half(pool, sign, H, mouth_y)
        tris += t
        flags.append(f)
        meta.setdefault("shells", info)
    verts = pool.array()
    mesh = TriMesh(verts, orient_ccw(verts, tris), np.concatenate(flags), meta)
    return mesh.validate()


@dataclass(frozen=True)
class ChannelGeometry:
    b: float
    bbar: float = BBAR

    def blend(self, x):
        """C^1 cutoff: 1 on |x| <= 0.05, 0 on |x| >= 0.1, cosine in between."""
        ax = np.abs(np.asarray(x, dtype=float))
        t = np.clip((ax - BLEND_INNER) / (BLEND_OUTER - BLEND_INNER), 0.0, 1.0)
        return 0.5 * (1.0 + np.cos(np.pi * t))

    def blend_derivative(self, x):
        xa = np.asarray(x, dtype=float)
        ax = np.abs(xa)
        inside = (ax > BLEND_INNER) & (ax < BLEND_OUTER)
        w = BLEND_OUTER - BLEND_INNER
        t = (ax - BLEND_INNER) / w
        return np.where(inside, -0.5 * np.pi / w * np.sin(np.pi * t) * np.sign(xa), 0.0)

    def _slopes(self, y):
        ya = np.abs(np.asarray(y, dtype=float))
        d = self.b - self.bbar
        inner = d / self.bbar
        outer = -d / (2 * HALF_HEIGHT - self.bbar)
        return np.where(ya <= self.bbar / 2, inner, outer)

    def shift(self, y):
        """Piecewise linear psi: 0 at y = 0, +-0.5 and +-(b - bbar)/2 at y = +-bbar/2."""
        ya = np.asarray(y, dtype=float)
        half = (self.b - self.bbar) / 2
        ay = np.abs(ya)
        val = np.where(
            ay <= self.bbar / 2,
            half * ay / (self.bbar / 2),
            half * (HALF_HEIGHT - ay) / (HALF_HEIGHT - self.bbar / 2),
        )
        return np.sign(ya) * val

    def shift_derivative(self, y):
        return self._slopes(y)

    def map_points(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = pts.copy()
        out[..., 1] = pts[..., 1] + self.blend(pts[..., 0]) * self.shift(pts[..., 1])
        return out

    def jacobian(self, x, y):
        """Jacobian of (x, y) -> (x, y + phi(x) psi(y)); shape (..., 2, 2)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        J = np.zeros(np.broadcast(x, y).shape + (2, 2))
        J[..., 0, 0] = 1.0
        J[..., 1, 0] = self.blend_derivative(x) * self.shift(y)
        J[..., 1, 1] = 1.0 + self.blend(x) * self.shift_derivative(y)
        return J


def transform_vertices(mesh: TriMesh, geom: ChannelGeometry) -> TriMesh:
    """Move the mesh vertices onto the domain with channel width ``geom.b``."""
    moved = mesh.with_vertices(geom.map_points(mesh.vertices))
    if np.any(moved.signed_areas() <= 0):
        raise MeshError(f"channel width b={geom.b} inverts triangles")
    return moved


def apply_channel_transform(mesh: TriMesh, geom: ChannelGeometry) -> np.ndarray:
    """Per-triangle Jacobians of the width transform at the triangle barycenters."""
    c = mesh.barycenters()
    J = geom.jacobian(c[:, 0], c[:, 1])
    det = np.linalg.det(J)
    if np.any(det <= 0):
        raise MeshError(f"channel width b={geom.b} gives a non-positive Jacobian")
    return J
