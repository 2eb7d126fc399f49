"""Vectorized P2/P1 element kernels on triangles.

All kernels take the (nt, 3, 2) vertex coordinates of the triangles they
integrate over, so the same code assembles on the reference rectangle and
on a mapped physical domain.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import sparse

from ..quadrature import gauss_jacobi, gauss_legendre


@lru_cache(maxsize=None)
def triangle_rule(n: int = 4):
    """Collapsed (Duffy) Gauss rule on the unit triangle, exact to degree 2n-1."""
    ga = gauss_legendre(n)
    gb = gauss_jacobi(n, 1.0, 0.0)
    a, b = np.meshgrid(ga.nodes, gb.nodes, indexing="ij")
    wa, wb = np.meshgrid(ga.weights, gb.weights, indexing="ij")
    xi = (1.0 + a) * (1.0 - b) / 4.0
    eta = (1.0 + b) / 2.0
    pts = np.column_stack([xi.ravel(), eta.ravel()])
    w = (wa * wb).ravel() / 8.0
    return pts, w


def p2_basis(pts: np.ndarray):
    """Values (nq, 6) and reference gradients (nq, 6, 2) of the P2 basis.

    Local order: vertices 0, 1, 2, then midpoints of edges 12, 20, 01.
    """
    x, y = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    val = np.column_stack(
        [
            l0 * (2 * l0 - 1),
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            4 * l1 * l2,
            4 * l2 * l0,
            4 * l0 * l1,
        ]
    )
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    lam = np.column_stack([l0, l1, l2])
    grad = np.empty((len(x), 6, 2))
    for k in range(3):
        grad[:, k, :] = (4 * lam[:, k])[:, None] * dl[k] - dl[k]
    for k, (i, j) in enumerate([(1, 2), (2, 0), (0, 1)]):
        grad[:, 3 + k, :] = 4 * (lam[:, i, None] * dl[j] + lam[:, j, None] * dl[i])
    return val, grad


def p1_basis(pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    return np.column_stack([1.0 - x - y, x, y])


class ElementData:
    """Quadrature-point geometry for a batch of triangles.

    Attributes
    ----------
    phi : (nq, 6) P2 values
    psi : (nq, 3) P1 values
    dphi : (nt, nq, 6, 2) physical P2 gradients
    wdet : (nt, nq) quadrature weight times |det J|
    xq : (nt, nq, 2) physical quadrature points
    """

    def __init__(self, coords: np.ndarray, order: int = 4):
        pts, w = triangle_rule(order)
        self.phi, dref = p2_basis(pts)
        self.psi = p1_basis(pts)
        p0 = coords[:, 0, :]
        jac = np.stack([coords[:, 1] - p0, coords[:, 2] - p0], axis=2)  # (nt,2,2)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv_t = np.empty_like(jac)  # J^{-T}
        inv_t[:, 0, 0] = jac[:, 1, 1] / det
        inv_t[:, 0, 1] = -jac[:, 1, 0] / det
        inv_t[:, 1, 0] = -jac[:, 0, 1] / det
        inv_t[:, 1, 1] = jac[:, 0, 0] / det
        self.dphi = np.einsum("eab,qib->eqia", inv_t, dref)
        self.wdet = np.abs(det)[:, None] * w[None, :]
        self.xq = p0[:, None, :] + np.einsum("eab,qb->eqa", jac, pts)


class Assembler:
    """Sparse assembly of Taylor-Hood blocks on a fixed P2/P1 numbering.

    Velocity dofs are component-blocked: component m of node i is
    ``m * n_nodes + i``.  Pressure dofs are the mesh vertices.
    """

    def __init__(self, cells: np.ndarray, n_nodes: int, n_vertices: int):
        self.cells = cells  # (nt, 6)
        self.n_nodes = n_nodes
        self.n_vertices = n_vertices
        self.n_u = 2 * n_nodes
        self.n_p = n_vertices
        self._rows66 = np.repeat(cells[:, :, None], 6, axis=2)
        self._cols66 = np.repeat(cells[:, None, :], 6, axis=1)
        pcells = cells[:, :3]
        self._rows36 = np.repeat(pcells[:, :, None], 6, axis=2)
        self._cols36 = np.repeat(cells[:, None, :], 3, axis=1)
        self._rows33 = np.repeat(pcells[:, :, None], 3, axis=2)
        self._cols33 = np.repeat(pcells[:, None, :], 3, axis=1)

    def _scalar(self, local, elems, shape, rows, cols, roff=0, coff=0):
        return sparse.csr_matrix(
            (
                local[elems].ravel(),
                (rows[elems].ravel() + roff, cols[elems].ravel() + coff),
            ),
            shape=shape,
        )

    def vector_block(self, local66: np.ndarray, elems, comps=((0, 0), (1, 1))):
        """Embed a scalar P2 element matrix into the velocity space."""
        n = self.n_nodes
        out = None
        for m, k in comps:
            blk = self._scalar(
                local66, elems, (self.n_u, self.n_u), self._rows66, self._cols66,
                m * n, k * n,
            )
            out = blk if out is None else out + blk
        return out

    def pressure_velocity(self, local36: np.ndarray, elems, comp: int):
        return self._scalar(
            local36, elems, (self.n_p, self.n_u), self._rows36, self._cols36,
            0, comp * self.n_nodes,
        )

    def pressure_mass(self, local33: np.ndarray, elems):
        return self._scalar(
            local33, elems, (self.n_p, self.n_p), self._rows33, self._cols33
        )

    def velocity_load(self, local6: np.ndarray, elems, comp: int) -> np.ndarray:
        out = np.zeros(self.n_u)
        np.add.at(out, self.cells[elems].ravel() + comp * self.n_nodes, local6[elems].ravel())
        return out


def stiffness_local(ed: ElementData, direction: int) -> np.ndarray:
    """(nt, 6, 6): integral of d_dir phi_j * d_dir phi_i."""
    g = ed.dphi[..., direction]
    return np.einsum("eq,eqi,eqj->eij", ed.wdet, g, g)


def divergence_local(ed: ElementData, direction: int) -> np.ndarray:
    """(nt, 3, 6): -integral of psi_k * d_dir phi_i."""
    return -np.einsum("eq,qk,eqi->eki", ed.wdet, ed.psi, ed.dphi[..., direction])


def pressure_mass_local(ed: ElementData) -> np.ndarray:
    return np.einsum("eq,qk,ql->ekl", ed.wdet, ed.psi, ed.psi)


def load_local(ed: ElementData, values: np.ndarray) -> np.ndarray:
    """(nt, 6): integral of f * phi_i for f sampled at quadrature points (nt, nq)."""
    return np.einsum("eq,eq,qi->ei", ed.wdet, values, ed.phi)


def field_at_quadrature(ed: ElementData, cells: np.ndarray, nodal: np.ndarray):
    """Value (nt, nq) and gradient (nt, nq, 2) of a scalar P2 field."""
    loc = nodal[cells]  # (nt, 6)
    val = loc @ ed.phi.T
    grad = np.einsum("ei,eqia->eqa", loc, ed.dphi)
    return val, grad


def advection_local(ed: ElementData, w_dir: np.ndarray, direction: int) -> np.ndarray:
    """(nt, 6, 6): integral of w_dir * d_dir phi_j * phi_i (u -> w.grad u)."""
    return np.einsum("eq,eq,eqj,qi->eij", ed.wdet, w_dir, ed.dphi[..., direction], ed.phi)


def reaction_local(ed: ElementData, dw_dir: np.ndarray) -> np.ndarray:
    """(nt, 6, 6): integral of phi_j * g * phi_i with g a sampled coefficient."""
    return np.einsum("eq,eq,qj,qi->eij", ed.wdet, dw_dir, ed.phi, ed.phi)
