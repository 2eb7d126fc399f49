"""Structured triangulation of the reference rectangle (0,2) x (0,3).

The rectangle is split into four subdomains by the lines x=1 and y=1.5::

    +-----+-----+ y=3
    |  2  |  3  |
    +-----+-----+ y=1.5
    |  0  |  1  |
    +-----+-----+ y=0
   x=0   x=1   x=2
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

WIDTH = 2.0
HEIGHT = 3.0
X_SPLIT = 1.0
Y_SPLIT = 1.5

INLET, OUTLET, WALL = "inlet", "outlet", "wall"


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counter-clockwise
    subdomains: np.ndarray  # (nt,) in 0..3
    edges: np.ndarray  # (ne, 2) vertex pairs, sorted
    tri_edges: np.ndarray  # (nt, 3) edge opposite to local vertex k
    boundary_edges: np.ndarray  # indices into edges
    boundary_tags: tuple  # tag per boundary edge
    refinement: int

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_nodes(self) -> int:
        """P2 node count: vertices followed by edge midpoints."""
        return len(self.vertices) + len(self.edges)

    @property
    def nodes(self) -> np.ndarray:
        mid = 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])
        return np.vstack([self.vertices, mid])

    @property
    def p2_cells(self) -> np.ndarray:
        """(nt, 6) P2 node indices: 3 vertices, then midpoints of edges 12, 20, 01."""
        return np.hstack([self.triangles, self.n_vertices + self.tri_edges])

    def tagged_edges(self, tag: str) -> np.ndarray:
        sel = [e for e, t in zip(self.boundary_edges, self.boundary_tags) if t == tag]
        return self.edges[np.array(sel, dtype=int)].reshape(-1, 2)

    def boundary_nodes(self, *tags: str) -> np.ndarray:
        """P2 nodes (vertices and midpoints) lying on edges with the given tags."""
        out = []
        for e, t in zip(self.boundary_edges, self.boundary_tags):
            if t in tags:
                out.extend([*self.edges[e], self.n_vertices + e])
        return np.unique(np.array(out, dtype=int))

    def hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.triangles).tobytes())
        return h.hexdigest()[:16]


def build_mesh(refinement: int = 1) -> Mesh:
    """4r x 6r cells, each cut into two triangles along alternating diagonals."""
    if int(refinement) != refinement or refinement < 1:
        raise ValueError(f"refinement must be a positive integer, got {refinement}")
    nx, ny = 4 * refinement, 6 * refinement
    xs = np.linspace(0.0, WIDTH, nx + 1)
    ys = np.linspace(0.0, HEIGHT, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris, subs = [], []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
            cx, cy = 0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])
            r = int(cx > X_SPLIT) + 2 * int(cy > Y_SPLIT)
            subs += [r, r]
    triangles = np.array(tris, dtype=int)
    subdomains = np.array(subs, dtype=int)

    # local edge k is opposite local vertex k
    local = np.stack(
        [triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1
    )
    flat = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(
        flat, axis=0, return_inverse=True, return_counts=True
    )
    tri_edges = inverse.reshape(-1, 3)
    boundary = np.flatnonzero(counts == 1)
    tags = []
    for e in boundary:
        p, q = vertices[edges[e]]
        if np.isclose(p[0], 0.0) and np.isclose(q[0], 0.0):
            tags.append(INLET)
        elif np.isclose(p[0], WIDTH) and np.isclose(q[0], WIDTH):
            tags.append(OUTLET)
        else:
            tags.append(WALL)
    return Mesh(
        vertices, triangles, subdomains, edges, tri_edges, boundary, tuple(tags),
        int(refinement),
    )
