from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class TriMesh:
    """Conforming P1 triangulation; triangles are stored counter-clockwise."""

    vertices: np.ndarray
    triangles: np.ndarray
    fine_flags: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    dim = 2

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def elements(self) -> np.ndarray:
        return self.triangles

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas())

    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        lens = [np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)]
        return np.max(lens, axis=0)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges and the number of triangles sharing each."""
        t = self.triangles
        all_edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        all_edges.sort(axis=1)
        uniq, counts = np.unique(all_edges, axis=0, return_counts=True)
        return uniq, counts

    def boundary_edges(self) -> np.ndarray:
        e, c = self.edges()
        return e[c == 1]

    def euler_characteristic(self) -> int:
        e, _ = self.edges()
        return self.n_vertices - len(e) + self.n_elements

    def boundary_loops(self) -> int:
        """Number of closed loops formed by the boundary edges."""
        b = self.boundary_edges()
        adj: dict[int, list[int]] = {}
        for i, j in b:
            adj.setdefault(int(i), []).append(int(j))
            adj.setdefault(int(j), []).append(int(i))
        seen: set[int] = set()
        loops = 0
        for start in adj:
            if start in seen:
                continue
            loops += 1
            stack = [start]
            while stack:
                v = stack.pop()
                if v in seen:
                    continue
                seen.add(v)
                stack.extend(adj[v])
        return loops

    def validate(self, simply_connected: bool = True):
        """Raise MeshError on inverted triangles, non-manifold edges or hanging nodes."""
        if np.any(self.signed_areas() <= 0):
            raise MeshError("mesh has non-positive triangle areas")
        _, counts = self.edges()
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two triangles")
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise MeshError("mesh has unreferenced vertices")
        if simply_connected:
            if self.boundary_loops() != 1:
                raise MeshError("boundary is not a single loop (hanging node or hole)")
            if self.euler_characteristic() != 1:
                raise MeshError("Euler characteristic differs from that of a disk")
        return self

    def with_vertices(self, vertices) -> TriMesh:
        return TriMesh(np.asarray(vertices, dtype=float), self.triangles, self.fine_flags, dict(self.meta))

    def fine_area_fraction(self) -> float:
        a = self.areas()
        return float(a[self.fine_flags].sum() / a.sum())


class NodePool:
    """Deduplicating vertex store keyed by rounded coordinates."""

    def __init__(self, scale: float = 1e10):
        self._scale = scale
        self._index: dict[tuple[int, int], int] = {}
        self.coords: list[tuple[float, float]] = []

    def add(self, x: float, y: float) -> int:
        key = (round(x * self._scale), round(y * self._scale))
        idx = self._index.get(key)
        if idx is None:
            idx = len(self.coords)
            self._index[key] = idx
            self.coords.append((float(x), float(y)))
        return idx

    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)


def orient_ccw(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    tris = np.array(triangles, dtype=np.int64)
    p = vertices[tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    neg = (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) < 0
    tris[neg, 1], tris[neg, 2] = tris[neg, 2].copy(), tris[neg, 1].copy()
    return tris
