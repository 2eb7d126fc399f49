"""Weighted error estimators and the weighted greedy basis construction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh, splu

from ..errors import InvalidArgument, InvalidState, NumericalFailure
from ..fom.model import STOKES, AffineModel, REFERENCE_PARAMETER
from ..fom.solvers import TruthSolution, solve_navier_stokes, solve_stokes
from ..probability import ParameterBox, WeightedSampleSet
from .basis import BasisBuilder, ReducedBasis
from .reduced import ReducedModel, ReducedSolution, online_solve, project

log = logging.getLogger(__name__)

EXACT, RESIDUAL = "exact", "residual"
WEIGHT_NONE, WEIGHT_SQRT, WEIGHT_DENSITY = "none", "sqrt", "density"
CLAMP = 1e-9


class TruthCache:
    """Memoized truth solves keyed by the parameter tuple."""

    def __init__(self, model: AffineModel, kind: str | None = None):
        self.model = model
        self.kind = kind or model.kind
        self._store: dict[tuple, TruthSolution] = {}

    def __call__(self, y) -> TruthSolution:
        key = tuple(float(v) for v in y)
        if key not in self._store:
            solver = solve_stokes if self.kind == STOKES else solve_navier_stokes
            self._store[key] = solver(self.model, np.asarray(key))
        return self._store[key]

    def put(self, sol: TruthSolution) -> None:
        self._store[tuple(float(v) for v in sol.y)] = sol

    def __len__(self) -> int:
        return len(self._store)


# stability constants ------------------------------------------------------

def _constrained_norm(model: AffineModel):
    f = model.free
    return sparse.block_diag([model.Xu[f][:, f], model.Xp]).tocsc()


def saddle_inf_sup(model: AffineModel, y) -> float:
    """Inf-sup constant of the Stokes operator [[A, B^T], [B, 0]] in the X norm.

    Smallest |lambda| of K v = lambda X v, found by shift-invert at zero.
    """
    f = model.free
    A, B = model.assemble_A(y), model.assemble_B(y)
    K = sparse.bmat([[A[f][:, f], B[:, f].T], [B[:, f], None]], format="csc")
    X = _constrained_norm(model)
    vals = eigsh(K, k=1, M=X, sigma=0.0, which="LM", return_eigenvectors=False)
    return float(np.abs(vals).min())


def inf_sup_lower_bound(model: AffineModel, box: ParameterBox, safety: float = 1.0) -> float:
    """min of the inf-sup constant over the reference parameter and the box corners.

    Only the geometric coordinates matter (the Stokes operator does not
    depend on v_max).
    """
    probes = [REFERENCE_PARAMETER.copy()]
    lo, hi = box.lo, box.hi
    for corner in np.ndindex(*(2,) * 4):
        y = REFERENCE_PARAMETER.copy()
        for j, c in enumerate(corner):
            y[j] = hi[j] if c else lo[j]
        probes.append(y)
    return safety * min(saddle_inf_sup(model, y) for y in probes)


# residual dual norm ------------------------------------------------------

class ResidualGram:
    """Riesz representers of the affine Stokes residual terms and their Gram matrix.

    Residual columns, in order: lifting loads F0_q, lifting divergence G_q,
    then per basis column A_q v, B_q^T p and B_q v.  Representers are cached
    per column, so extending the basis only solves for the new columns.
    """

    def __init__(self, model: AffineModel):
        self.model = model
        self._lu = splu(_constrained_norm(model))
        self._X = _constrained_norm(model)
        nf = len(model.free)
        self._nf = nf
        Q = model.n_terms
        self._rhs = [self._lift_u(v) for v in model.F0] + [self._lift_p(g) for g in model.G]
        self._riesz_rhs = [self._riesz(r) for r in self._rhs]
        self._au: list[list[np.ndarray]] = [[] for _ in range(Q)]  # [q][col]
        self._bu: list[list[np.ndarray]] = [[] for _ in range(Q)]
        self._btp: list[list[np.ndarray]] = [[] for _ in range(Q)]
        self._nv = 0
        self._np = 0

    def _lift_u(self, v):
        return np.concatenate([v[self.model.free], np.zeros(self.model.n_p)])

    def _lift_p(self, g):
        return np.concatenate([np.zeros(self._nf), g])

    def _riesz(self, r):
        return self._lu.solve(r)

    def extend(self, basis: ReducedBasis) -> None:
        m = self.model
        V, P = basis.velocity, basis.pressure
        for j in range(self._nv, V.shape[1]):
            for q in range(m.n_terms):
                self._au[q].append(self._riesz(self._lift_u(m.A[q] @ V[:, j])))
                self._bu[q].append(self._riesz(self._lift_p(m.B[q] @ V[:, j])))
        for j in range(self._np, P.shape[1]):
            for q in range(m.n_terms):
                self._btp[q].append(self._riesz(self._lift_u(m.B[q].T @ P[:, j])))
        self._nv, self._np = V.shape[1], P.shape[1]


class OfflineGram:
    """Precomputed Gram matrix for O(Q^2 N^2) online evaluation of the dual norm."""

    def __init__(self, rg: ResidualGram, basis: ReducedBasis):
        rg.extend(basis)
        Q = rg.model.n_terms
        nv, np_ = basis.velocity.shape[1], basis.pressure.shape[1]
        cols = list(rg._riesz_rhs)
        for q in range(Q):
            cols += rg._au[q][:nv] + rg._bu[q][:nv] + rg._btp[q][:np_]
        R = np.column_stack(cols)
        self.gram = R.T @ (rg._X @ R)
        self.Q, self.nv, self.np = Q, nv, np_

    def _index(self, nv, np_):
        Q, NV, NP = self.Q, self.nv, self.np
        idx = list(range(2 * Q))
        off = 2 * Q
        blocks = []
        for q in range(Q):
            au = off + np.arange(nv)
            bu = off + NV + np.arange(nv)
            btp = off + 2 * NV + np.arange(np_)
            blocks.append((au, bu, btp))
            off += 2 * NV + NP
        return idx, blocks

    def dual_norm(self, y, u, p, ta, tb) -> float:
        vm = float(y[4])
        nv, np_ = len(u), len(p)
        idx, blocks = self._index(nv, np_)
        coef = [vm * t for t in ta] + [vm * t for t in tb]
        for q, (au, bu, btp) in enumerate(blocks):
            idx += list(au) + list(bu) + list(btp)
            coef += list(-ta[q] * u) + list(-tb[q] * u) + list(-tb[q] * p)
        idx = np.asarray(idx)
        c = np.asarray(coef)
        g = self.gram[np.ix_(idx, idx)]
        return float(np.sqrt(max(c @ g @ c, 0.0)))


# estimator -----------------------------------------------------------------

@dataclass
class Estimator:
    """Weighted error estimator w(y) * Delta_N(y).

    ``mode`` is ``"exact"`` (true combined error via a truth solve) or
    ``"residual"`` (dual residual norm over ``beta_lb``, Stokes only).
    ``weight`` is ``"none"``, ``"sqrt"`` (sqrt of the density) or
    ``"density"``; densities are evaluated 1e-9 inside the box.
    """

    model: AffineModel
    mode: str = EXACT
    weight: str = WEIGHT_NONE
    box: ParameterBox | None = None
    kind: str | None = None
    beta_lb: float | None = None
    density_scale: float = 1.0
    truth: TruthCache | None = None
    gram: OfflineGram | None = None

    def __post_init__(self):
        self.kind = self.kind or self.model.kind
        if self.mode not in (EXACT, RESIDUAL):
            raise InvalidArgument(f"unknown estimator mode {self.mode!r}")
        if self.weight not in (WEIGHT_NONE, WEIGHT_SQRT, WEIGHT_DENSITY):
            raise InvalidArgument(f"unknown weight mode {self.weight!r}")
        if self.weight != WEIGHT_NONE and self.box is None:
            raise InvalidArgument("density weighting needs a parameter box")
        if self.mode == RESIDUAL:
            if self.kind != STOKES:
                raise InvalidArgument("residual estimator is only available for Stokes")
            if self.beta_lb is not None and not self.beta_lb > 0.0:
                raise InvalidArgument(f"inf-sup lower bound must be positive, got {self.beta_lb}")
        if self.truth is None:
            self.truth = TruthCache(self.model, self.kind)

    def w(self, y) -> float:
        if self.weight == WEIGHT_NONE:
            return 1.0
        rho = self.density_scale * self.box.density(self.box.clamp(y, CLAMP))
        return float(np.sqrt(rho)) if self.weight == WEIGHT_SQRT else float(rho)

    def prepare(self, rm: ReducedModel) -> None:
        """Build the residual Gram blocks for the current basis (residual mode)."""
        if self.mode != RESIDUAL:
            return
        if self.beta_lb is None:
            self.beta_lb = inf_sup_lower_bound(self.model, self.box or ParameterBox())
        if not hasattr(self, "_rg"):
            self._rg = ResidualGram(self.model)
        self.gram = OfflineGram(self._rg, rm.basis)


def exact_error(model: AffineModel, truth: TruthSolution, sol: ReducedSolution,
                rm: ReducedModel) -> float:
    """sqrt(|u - u_N|^2_{X_u} + |p - p_N|^2_{X_p})."""
    V, P = rm.basis.truncate(sol.n)
    eu = truth.homogeneous - V @ sol.u
    ep = truth.pressure - P @ sol.p
    return float(np.sqrt(max(eu @ (model.Xu @ eu) + ep @ (model.Xp @ ep), 0.0)))


def estimate(est: Estimator, sol: ReducedSolution, y, rm: ReducedModel) -> float:
    """Weighted estimator value at ``y`` for a reduced solution computed there."""
    y = np.asarray(y, dtype=float)
    if est.mode == EXACT:
        delta = exact_error(est.model, est.truth(y), sol, rm)
    else:
        if est.gram is None:
            raise InvalidState("residual estimator used before its Gram blocks were built")
        delta = est.gram.dual_norm(y, sol.u, sol.p, rm.theta_a(y), rm.theta_b(y)) / est.beta_lb
    return est.w(y) * delta


# greedy ------------------------------------------------------------------------

def weighted_greedy(training: WeightedSampleSet, estimator: Estimator, tol: float,
                    N_max: int, y_ref=REFERENCE_PARAMETER, supremizers: bool = True,
                    init: str = "estimator", seed: int | None = None) -> ReducedBasis:
    """Greedy selection of truth snapshots maximizing the weighted estimator.

    ``init="estimator"`` starts from the argmax of the estimator of the zero
    reduced solution; ``init="random"`` draws the first point with
    probability proportional to w(y) using ``seed``.
    """
    pts = np.asarray(training.points, dtype=float)
    if len(pts) == 0:
        raise InvalidArgument("empty training set")
    if N_max < 1:
        raise InvalidArgument(f"N_max must be >= 1, got {N_max}")
    model = estimator.model
    builder = BasisBuilder(model, y_ref, supremizers)
    kind = estimator.kind
    selected: list[int] = []
    history: list[dict] = []

    def sweep(rm: ReducedModel, n: int) -> np.ndarray:
        estimator.prepare(rm)
        vals = np.empty(len(pts))
        for i, y in enumerate(pts):
            try:
                sol = online_solve(rm, y, n, kind)
                vals[i] = estimate(estimator, sol, y, rm)
            except NumericalFailure as exc:
                raise NumericalFailure(
                    f"estimator evaluation failed at y={list(y)}", y=list(y)
                ) from exc
        return vals

    rm = project(model, builder.basis, kind)
    values = sweep(rm, 0)
    if init == "random":
        wts = np.array([estimator.w(y) for y in pts])
        prob = wts / wts.sum() if wts.sum() > 0 else None
        first = int(np.random.default_rng(seed).choice(len(pts), p=prob))
    else:
        first = int(np.argmax(values))
    max_vals = [float(values.max())]
    selected.append(first)
    history.append({"index": first, "y": pts[first].tolist(), "estimator": float(values[first]),
                    "max_estimator": float(values.max()), "init": init})
    _add(builder, estimator.truth(pts[first]))

    while builder.basis.size < N_max:
        rm = project(model, builder.basis, kind)
        values = sweep(rm, builder.basis.size)
        values[selected] = -np.inf
        cand = int(np.argmax(values))
        best = float(values[cand])
        max_vals.append(best)
        if not np.isfinite(best) or best <= tol:
            history.append({"stopped": True, "max_estimator": best if np.isfinite(best) else None})
            break
        selected.append(cand)
        history.append({"index": cand, "y": pts[cand].tolist(), "estimator": best,
                        "max_estimator": best})
        _add(builder, estimator.truth(pts[cand]))
    basis = builder.basis
    basis.history = history
    return basis


def _add(builder: BasisBuilder, truth: TruthSolution) -> None:
    builder.add_level(truth.homogeneous, truth.pressure)
