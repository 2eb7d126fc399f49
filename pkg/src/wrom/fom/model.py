"""Affine-decomposed Taylor-Hood discretization on the reference domain.

Each subdomain r is the image of a reference rectangle under the diagonal
scaling ``x = s_r * x_hat + shift`` with ``s_r = (sx, sy)``: sx is the
column width (L1 or L2, reference width 1) and sy the row height over the
reference height 1.5.  Pulling the forms back gives, per subdomain and
per coordinate direction d, one parameter-independent block and one
closed-form coefficient:

    a:  nu * sy/sx (d = x),   nu * sx/sy (d = y)
    b:  sy (d = x),           sx (d = y)
    c:  sy (d = x),           sx (d = y)

The inlet lifting is the reference field (-y_hat (y_hat - 3), 0); v_max
only enters through the coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from ..errors import InvalidArgument
from . import elements as el
from .mesh import HEIGHT, INLET, WALL, X_SPLIT, Y_SPLIT, Mesh

N_SUBDOMAINS = 4
REFERENCE_PARAMETER = np.array([1.0, 1.5, 1.0, 1.5, 1.0])
STOKES, NAVIER_STOKES = "stokes", "navier-stokes"


def subdomain_scales(y) -> np.ndarray:
    """(4, 2) array of (sx, sy) per subdomain."""
    L1, h1, L2, h2 = (float(v) for v in y[:4])
    sx = (L1 / X_SPLIT, L2 / X_SPLIT)
    sy = (h1 / Y_SPLIT, h2 / Y_SPLIT)
    return np.array([[sx[r % 2], sy[r // 2]] for r in range(N_SUBDOMAINS)])


@dataclass(frozen=True)
class AffineGeometry:
    """Per-subdomain affine maps from the physical domain to the reference one.

    ``x_hat = G_r x + g_r`` with diagonal ``G_r``.
    """

    y: np.ndarray

    @cached_property
    def scales(self) -> np.ndarray:
        return subdomain_scales(self.y)

    def G(self, r: int) -> np.ndarray:
        return np.diag(1.0 / self.scales[r])

    def g(self, r: int) -> np.ndarray:
        L1, h1 = float(self.y[0]), float(self.y[1])
        col, row = r % 2, r // 2
        shift_phys = np.array([L1 * col, h1 * row])
        shift_ref = np.array([X_SPLIT * col, Y_SPLIT * row])
        return shift_ref - self.G(r) @ shift_phys

    def to_physical(self, pts: np.ndarray) -> np.ndarray:
        """Map reference points to the physical domain (interfaces map consistently)."""
        L1, h1, L2, h2 = (float(v) for v in self.y[:4])
        xh, yh = pts[..., 0], pts[..., 1]
        x = np.where(xh <= X_SPLIT, xh * L1, L1 + (xh - X_SPLIT) * L2)
        yy = np.where(
            yh <= Y_SPLIT, yh * h1 / Y_SPLIT, h1 + (yh - Y_SPLIT) * h2 / Y_SPLIT
        )
        return np.stack([x, yy], axis=-1)


def theta_a(y, nu: float = 1.0) -> np.ndarray:
    s = subdomain_scales(y)
    return nu * np.column_stack([s[:, 1] / s[:, 0], s[:, 0] / s[:, 1]]).ravel()


def theta_b(y) -> np.ndarray:
    s = subdomain_scales(y)
    return np.column_stack([s[:, 1], s[:, 0]]).ravel()


theta_c = theta_b


def lifting_profile(pts: np.ndarray) -> np.ndarray:
    """Reference inlet lifting (-y_hat (y_hat - 3), 0) evaluated at points."""
    out = np.zeros_like(pts, dtype=float)
    out[..., 0] = -pts[..., 1] * (pts[..., 1] - HEIGHT)
    return out


def lifting(mesh: Mesh) -> np.ndarray:
    """Nodal interpolant of the reference lifting in the velocity space."""
    vals = lifting_profile(mesh.nodes)
    return np.concatenate([vals[:, 0], vals[:, 1]])


@dataclass
class AffineModel:
    """Parameter-independent blocks of the pulled-back Stokes/Navier-Stokes forms.

    Blocks are indexed by ``q = 2 * r + d`` (subdomain r, direction d) and
    live on the full, unconstrained Taylor-Hood spaces; ``free`` lists the
    velocity dofs not fixed by inlet/wall conditions.
    """

    mesh: Mesh
    kind: str
    A: list
    B: list
    Xu: sparse.csr_matrix
    Xp: sparse.csr_matrix
    ug: np.ndarray
    dirichlet: np.ndarray
    free: np.ndarray
    nu: float = 1.0
    body_force: tuple = (0.0, 0.0)
    assembler: el.Assembler = field(repr=False, default=None)
    elements: el.ElementData = field(repr=False, default=None)
    Fs: list = field(default_factory=list)

    @property
    def n_terms(self) -> int:
        return len(self.A)

    @property
    def n_u(self) -> int:
        return self.Xu.shape[0]

    @property
    def n_p(self) -> int:
        return self.Xp.shape[0]

    @cached_property
    def F0(self) -> list:
        return [-(A @ self.ug) for A in self.A]

    @cached_property
    def G(self) -> list:
        return [-(B @ self.ug) for B in self.B]

    @cached_property
    def hash(self) -> str:
        return self.mesh.hash()

    # coefficients -----------------------------------------------------
    def theta_a(self, y) -> np.ndarray:
        return theta_a(y, self.nu)

    def theta_b(self, y) -> np.ndarray:
        return theta_b(y)

    def theta_c(self, y) -> np.ndarray:
        return theta_c(y)

    def theta_f(self, y) -> np.ndarray:
        return float(y[4]) * self.theta_a(y)

    def theta_g(self, y) -> np.ndarray:
        return float(y[4]) * self.theta_b(y)

    def theta_s(self, y) -> np.ndarray:
        s = subdomain_scales(y)
        area = s[:, 0] * s[:, 1]
        return np.column_stack([area * self.body_force[0], area * self.body_force[1]]).ravel()

    # assembled operators -------------------------------------------------
    def assemble_A(self, y):
        return _combine(self.theta_a(y), self.A)

    def assemble_B(self, y):
        return _combine(self.theta_b(y), self.B)

    def assemble_F(self, y) -> np.ndarray:
        F = sum(t * f for t, f in zip(self.theta_f(y), self.F0))
        if self.Fs:
            F = F + sum(t * f for t, f in zip(self.theta_s(y), self.Fs))
        return F

    def assemble_G(self, y) -> np.ndarray:
        return sum(t * g for t, g in zip(self.theta_g(y), self.G))

    # trilinear form ----------------------------------------------------
    def _elem_theta(self, theta) -> np.ndarray:
        """(nt, 2) per-element coefficients for the two directions."""
        return np.asarray(theta).reshape(N_SUBDOMAINS, 2)[self.mesh.subdomains]

    def _advection_locals(self, w: np.ndarray):
        n = self.mesh.n_nodes
        cells = self.mesh.p2_cells
        ed = self.elements
        out = []
        for d in range(2):
            wd, _ = el.field_at_quadrature(ed, cells, w[d * n:(d + 1) * n])
            out.append(el.advection_local(ed, wd, d))
        return out

    def convection_terms(self, w: np.ndarray) -> list:
        """Blocks N_q(w) with N_q(w) u = c_q(w, u, .), one per affine term."""
        locs = self._advection_locals(w)
        sub = self.mesh.subdomains
        return [
            self.assembler.vector_block(locs[q % 2], np.flatnonzero(sub == q // 2))
            for q in range(self.n_terms)
        ]

    def convection(self, w: np.ndarray, y) -> sparse.csr_matrix:
        """sum_q theta_c,q N_q(w): the matrix of u -> c(w, u, .; y)."""
        et = self._elem_theta(self.theta_c(y))
        locs = self._advection_locals(w)
        local = locs[0] * et[:, 0, None, None] + locs[1] * et[:, 1, None, None]
        return self.assembler.vector_block(local, slice(None))

    def convection_derivative(self, w: np.ndarray, y) -> sparse.csr_matrix:
        """Matrix of delta -> c(delta, w, .; y)."""
        et = self._elem_theta(self.theta_c(y))
        n = self.mesh.n_nodes
        cells = self.mesh.p2_cells
        ed = self.elements
        out = None
        for m in range(2):
            _, gm = el.field_at_quadrature(ed, cells, w[m * n:(m + 1) * n])
            for d in range(2):
                local = el.reaction_local(ed, gm[..., d] * et[:, d, None])
                blk = self.assembler.vector_block(local, slice(None), comps=((m, d),))
                out = blk if out is None else out + blk
        return out

    # norms ------------------------------------------------------------
    def seminorm(self, v: np.ndarray, which: str = "velocity") -> float:
        return seminorm(self, v, which)


def _combine(theta, blocks):
    out = theta[0] * blocks[0]
    for t, blk in zip(theta[1:], blocks[1:]):
        out = out + t * blk
    return out.tocsr()


def _coords(mesh: Mesh, pts=None) -> np.ndarray:
    verts = mesh.vertices if pts is None else pts
    return verts[mesh.triangles]


def assemble_affine(mesh: Mesh, kind: str = STOKES, nu: float = 1.0,
                    body_force=(0.0, 0.0)) -> AffineModel:
    """Assemble every affine block of the pulled-back forms on ``mesh``."""
    if kind not in (STOKES, NAVIER_STOKES):
        raise InvalidArgument(f"unknown equation kind {kind!r}")
    cells = mesh.p2_cells
    asm = el.Assembler(cells, mesh.n_nodes, mesh.n_vertices)
    ed = el.ElementData(_coords(mesh))
    K = [el.stiffness_local(ed, d) for d in range(2)]
    D = [el.divergence_local(ed, d) for d in range(2)]
    ones = np.ones_like(ed.wdet)
    load = el.load_local(ed, ones)
    A, B, Fs = [], [], []
    for r in range(N_SUBDOMAINS):
        elems = np.flatnonzero(mesh.subdomains == r)
        for d in range(2):
            A.append(asm.vector_block(K[d], elems))
            B.append(asm.pressure_velocity(D[d], elems, d))
            if any(body_force):
                Fs.append(asm.velocity_load(load, elems, d))
    Xu = (asm.vector_block(K[0], slice(None)) + asm.vector_block(K[1], slice(None))).tocsr()
    Xp = asm.pressure_mass(el.pressure_mass_local(ed), slice(None)).tocsr()
    fixed = mesh.boundary_nodes(INLET, WALL)
    dirichlet = np.concatenate([fixed, fixed + mesh.n_nodes])
    free = np.setdiff1d(np.arange(2 * mesh.n_nodes), dirichlet)
    return AffineModel(
        mesh, kind, A, B, Xu, Xp, lifting(mesh), dirichlet, free, nu,
        tuple(body_force), asm, ed, Fs,
    )


@dataclass
class DirectOperators:
    """Operators assembled on the mapped physical mesh, without any pull-back."""

    A: sparse.csr_matrix
    B: sparse.csr_matrix
    F: np.ndarray
    G: np.ndarray
    elements: el.ElementData
    assembler: el.Assembler

    def convection(self, mesh: Mesh, w: np.ndarray) -> sparse.csr_matrix:
        n = mesh.n_nodes
        local = 0.0
        for d in range(2):
            wd, _ = el.field_at_quadrature(self.elements, mesh.p2_cells, w[d * n:(d + 1) * n])
            local = local + el.advection_local(self.elements, wd, d)
        return self.assembler.vector_block(local, slice(None))


def assemble_direct(mesh: Mesh, y, nu: float = 1.0) -> DirectOperators:
    """Assemble a, b, F, G directly on the physical domain D(y)."""
    geo = AffineGeometry(np.asarray(y, dtype=float))
    asm = el.Assembler(mesh.p2_cells, mesh.n_nodes, mesh.n_vertices)
    ed = el.ElementData(_coords(mesh, geo.to_physical(mesh.vertices)))
    A = nu * (
        asm.vector_block(el.stiffness_local(ed, 0), slice(None))
        + asm.vector_block(el.stiffness_local(ed, 1), slice(None))
    )
    B = asm.pressure_velocity(el.divergence_local(ed, 0), slice(None), 0) + \
        asm.pressure_velocity(el.divergence_local(ed, 1), slice(None), 1)
    ug = float(y[4]) * lifting(mesh)
    return DirectOperators(A.tocsr(), B.tocsr(), -(A @ ug), -(B @ ug), ed, asm)


def seminorm(model: AffineModel, v: np.ndarray, which: str = "velocity") -> float:
    """sqrt(v^T X v) with X the velocity H1-seminorm or pressure L2 Gram matrix."""
    if which == "velocity":
        X = model.Xu
    elif which == "pressure":
        X = model.Xp
    else:
        raise InvalidArgument(f"unknown norm {which!r}")
    v = np.asarray(v, dtype=float)
    if v.shape[0] != X.shape[0]:
        raise InvalidArgument(
            f"field of length {v.shape[0]} does not match {which} space of size {X.shape[0]}"
        )
    return float(np.sqrt(max(v @ (X @ v), 0.0)))
