"""Reduced bases: X-orthonormalization and supremizer enrichment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from ..errors import InvalidArgument, NumericalFailure
from ..fom.model import AffineModel

DEPENDENCE_TOL = 1e-10


def gram_schmidt(V: np.ndarray, X, against: np.ndarray | None = None,
                 tol: float = DEPENDENCE_TOL) -> np.ndarray:
    """Modified Gram-Schmidt in the X inner product, with one reorthogonalization.

    Columns whose norm after orthogonalization drops below ``tol`` times
    their initial norm are treated as dependent and dropped.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    basis = [] if against is None else [against[:, i] for i in range(against.shape[1])]
    n_prior = len(basis)
    for j in range(V.shape[1]):
        v = V[:, j].copy()
        pre = np.sqrt(max(v @ (X @ v), 0.0))
        if pre == 0.0:
            continue
        for _ in range(2):
            for b in basis:
                v -= (b @ (X @ v)) * b
        post = np.sqrt(max(v @ (X @ v), 0.0))
        if post < tol * pre:
            continue
        basis.append(v / post)
    new = basis[n_prior:]
    if not new:
        return np.zeros((V.shape[0], 0))
    return np.column_stack(new)


class SupremizerSolver:
    """Solves X_u s = B(y)^T q on the constrained velocity space."""

    def __init__(self, model: AffineModel, y):
        self.model = model
        self.B = model.assemble_B(y)
        f = model.free
        try:
            self._lu = splu(model.Xu[f][:, f].tocsc())
        except RuntimeError as exc:
            raise NumericalFailure("velocity inner-product matrix is singular") from exc

    def __call__(self, q: np.ndarray) -> np.ndarray:
        f = self.model.free
        s = np.zeros(self.model.n_u)
        s[f] = self._lu.solve((self.B.T @ q)[f])
        return s


def supremizer_enrich(pressure_modes: np.ndarray, model: AffineModel, y_ref,
                      velocity_basis: np.ndarray | None = None) -> np.ndarray:
    """Supremizers of the pressure modes, X_u-orthonormalized against ``velocity_basis``."""
    P = np.asarray(pressure_modes, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[1] == 0:
        raise InvalidArgument("supremizer enrichment needs at least one pressure mode")
    solve = SupremizerSolver(model, y_ref)
    S = np.column_stack([solve(P[:, i]) for i in range(P.shape[1])])
    return gram_schmidt(S, model.Xu, against=velocity_basis)


@dataclass
class ReducedBasis:
    """Hierarchical velocity/pressure bases.

    Level n spans the first n velocity modes, the supremizers of the first
    n pressure modes and the first n pressure modes; ``velocity_levels[n]``
    and ``pressure_levels[n]`` give the matching column counts.  Velocity
    columns are stored interleaved (mode, supremizer, mode, ...) so every
    truncation is itself X_u-orthonormal.
    """

    velocity: np.ndarray
    pressure: np.ndarray
    velocity_levels: list = field(default_factory=lambda: [0])
    pressure_levels: list = field(default_factory=lambda: [0])
    eigenvalues_u: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eigenvalues_p: np.ndarray = field(default_factory=lambda: np.zeros(0))
    history: list = field(default_factory=list)
    supremizers: bool = True

    @property
    def size(self) -> int:
        return len(self.velocity_levels) - 1

    def columns(self, n: int | None = None) -> tuple[int, int]:
        n = self.size if n is None else n
        if not 0 <= n <= self.size:
            raise InvalidArgument(f"basis level {n} outside 0..{self.size}")
        return self.velocity_levels[n], self.pressure_levels[n]

    def truncate(self, n: int | None = None):
        nv, np_ = self.columns(n)
        return self.velocity[:, :nv], self.pressure[:, :np_]


class BasisBuilder:
    """Grows a :class:`ReducedBasis` one level at a time."""

    def __init__(self, model: AffineModel, y_ref, supremizers: bool = True):
        self.model = model
        self.supremizers = supremizers
        self._sup = SupremizerSolver(model, y_ref) if supremizers else None
        self.basis = ReducedBasis(np.zeros((model.n_u, 0)), np.zeros((model.n_p, 0)),
                                  supremizers=supremizers)

    def add_level(self, u: np.ndarray | None, p: np.ndarray | None) -> ReducedBasis:
        b = self.basis
        V, P = b.velocity, b.pressure
        if u is not None:
            V = np.hstack([V, gram_schmidt(u, self.model.Xu, against=V)])
        if p is not None:
            new_p = gram_schmidt(p, self.model.Xp, against=P)
            P = np.hstack([P, new_p])
            if self.supremizers and new_p.shape[1]:
                s = self._sup(new_p[:, 0])
                V = np.hstack([V, gram_schmidt(s, self.model.Xu, against=V)])
        b.velocity, b.pressure = V, P
        b.velocity_levels.append(V.shape[1])
        b.pressure_levels.append(P.shape[1])
        return b


def build_basis(model: AffineModel, velocity_modes: np.ndarray, pressure_modes: np.ndarray,
                y_ref, supremizers: bool = True, eigenvalues_u=None, eigenvalues_p=None,
                n_levels: int | None = None) -> ReducedBasis:
    """Interleave POD modes and supremizers into a hierarchical basis."""
    n = max(velocity_modes.shape[1], pressure_modes.shape[1])
    if n_levels is not None:
        n = min(n, n_levels)
    builder = BasisBuilder(model, y_ref, supremizers)
    for k in range(n):
        u = velocity_modes[:, k] if k < velocity_modes.shape[1] else None
        p = pressure_modes[:, k] if k < pressure_modes.shape[1] else None
        builder.add_level(u, p)
    b = builder.basis
    if eigenvalues_u is not None:
        b.eigenvalues_u = np.asarray(eigenvalues_u)
    if eigenvalues_p is not None:
        b.eigenvalues_p = np.asarray(eigenvalues_p)
    return b
