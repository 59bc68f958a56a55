"""Plain-text mesh dumps.

Format (whitespace separated, ``#`` starts a comment)::

    mesh <dim>
    H <value>              # 1D only; optional h_f and fine_region lines follow
    vertices <n>
    <x> [<y>]              # n lines
    elements <m>
    <i> <j> [<k>] <flag>   # m lines, flag is 0 or 1

Coordinates are written with ``repr`` so a dump/load round trip is exact.
"""

from __future__ import annotations

import numpy as np

from .interval import Mesh1D
from .trimesh import TriMesh


def dump_mesh(mesh, path) -> None:
    lines = [f"mesh {mesh.dim}"]
    if mesh.dim == 1:
        lines.append(f"H {mesh.H!r}")
        if mesh.h_f is not None:
            lines.append(f"h_f {mesh.h_f!r}")
        if mesh.fine_region is not None:
            lines.append(f"fine_region {mesh.fine_region[0]!r} {mesh.fine_region[1]!r}")
        coords = mesh.vertices.reshape(-1, 1)
    else:
        coords = mesh.vertices
    lines.append(f"vertices {len(coords)}")
    lines += [" ".join(repr(float(v)) for v in row) for row in coords]
    lines.append(f"elements {mesh.n_elements}")
    for elem, flag in zip(mesh.elements, mesh.fine_flags):
        lines.append(" ".join(str(int(i)) for i in elem) + f" {int(flag)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path):
    with open(path) as fh:
        rows = [ln.split("#", 1)[0].split() for ln in fh]
    rows = [r for r in rows if r]
    it = iter(rows)
    head = next(it)
    if head[0] != "mesh":
        raise ValueError(f"{path}: not a mesh file")
    dim = int(head[1])
    header = {}
    for row in it:
        if row[0] == "vertices":
            n = int(row[1])
            break
        header[row[0]] = [float(v) for v in row[1:]]
    verts = np.array([[float(v) for v in next(it)] for _ in range(n)])
    row = next(it)
    if row[0] != "elements":
        raise ValueError(f"{path}: expected an element block")
    data = np.array([[int(v) for v in next(it)] for _ in range(int(row[1]))], dtype=np.int64)
    elems, flags = data[:, :-1], data[:, -1].astype(bool)
    if dim == 1:
        fr = header.get("fine_region")
        return Mesh1D(
            verts[:, 0],
            flags,
            header["H"][0],
            header["h_f"][0] if "h_f" in header else None,
            tuple(fr) if fr else None,
        )
    return TriMesh(verts, elems, flags)
