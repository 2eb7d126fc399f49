"""Truth solves: sparse direct Stokes and Newton Navier-Stokes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ..errors import NumericalFailure
from .model import AffineModel

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50


@dataclass
class TruthSolution:
    velocity: np.ndarray  # full field, lifting included
    pressure: np.ndarray
    y: np.ndarray
    homogeneous: np.ndarray  # velocity - v_max * lifting
    diagnostics: dict = field(default_factory=dict)


def _saddle(model: AffineModel, A, B):
    f = model.free
    Aff = A[f][:, f]
    Bf = B[:, f]
    return sparse.bmat([[Aff, Bf.T], [Bf, None]], format="csc")


def _factorize(K, y):
    try:
        lu = splu(K)
    except RuntimeError as exc:
        raise NumericalFailure(f"singular saddle-point system at y={list(y)}", y=list(y)) from exc
    return lu


def _solve(lu, rhs, y):
    sol = lu.solve(rhs)
    if not np.all(np.isfinite(sol)):
        raise NumericalFailure(f"non-finite solution at y={list(y)}", y=list(y))
    return sol


def _unpack(model: AffineModel, sol, y, diagnostics) -> TruthSolution:
    nf = len(model.free)
    u0 = np.zeros(model.n_u)
    u0[model.free] = sol[:nf]
    vm = float(y[4])
    return TruthSolution(u0 + vm * model.ug, sol[nf:].copy(), np.array(y, dtype=float), u0,
                         diagnostics)


def solve_stokes(model: AffineModel, y, body_force_vector=None) -> TruthSolution:
    """Solve the Stokes saddle-point system at parameter ``y``.

    ``body_force_vector`` is an optional extra velocity load (full space),
    for forcing terms that are not part of the affine expansion.
    """
    y = np.asarray(y, dtype=float)
    A, B = model.assemble_A(y), model.assemble_B(y)
    F = model.assemble_F(y)
    if body_force_vector is not None:
        F = F + body_force_vector
    G = model.assemble_G(y)
    lu = _factorize(_saddle(model, A, B), y)
    sol = _solve(lu, np.concatenate([F[model.free], G]), y)
    return _unpack(model, sol, y, {"solver": "stokes"})


def _ns_residual(model, A, B, F, G, y, u0, p):
    w = u0 + float(y[4]) * model.ug
    N = model.convection(w, y)
    ru = A @ u0 + B.T @ p + N @ w - F
    rp = B @ u0 - G
    return np.concatenate([ru[model.free], rp]), w, N


def solve_navier_stokes(model: AffineModel, y, tol: float = NEWTON_TOL,
                        max_iter: int = NEWTON_MAX_ITER, initial: TruthSolution | None = None,
                        continuation: bool = True) -> TruthSolution:
    """Newton iteration on the full nonlinear residual, warm-started from Stokes.

    The iteration count reported is the number of residual checks, so an
    initial guess that already satisfies the tolerance counts as one
    iteration.  On divergence the solve is retried once with continuation
    in v_max (halving steps) when ``continuation`` is set.
    """
    y = np.asarray(y, dtype=float)
    try:
        return _newton(model, y, tol, max_iter, initial)
    except NumericalFailure:
        if not continuation or y[4] == 0.0:
            raise
        log.info("Newton failed at y=%s, retrying with v_max continuation", list(y))
        guess = None
        for frac in (0.5, 0.75, 1.0):
            y_step = y.copy()
            y_step[4] = frac * y[4]
            guess = _newton(model, y_step, tol, max_iter, guess)
        guess.diagnostics["continuation"] = True
        return guess


def _newton(model, y, tol, max_iter, initial):
    A, B = model.assemble_A(y), model.assemble_B(y)
    F, G = model.assemble_F(y), model.assemble_G(y)
    if initial is None:
        start = solve_stokes(model, y)
        u0, p = start.homogeneous.copy(), start.pressure.copy()
    else:
        vm_ratio = y[4] / initial.y[4] if initial.y[4] != 0 else 0.0
        u0, p = vm_ratio * initial.homogeneous, vm_ratio * initial.pressure
    ref, _, _ = _ns_residual(model, A, B, F, G, y, np.zeros(model.n_u), np.zeros(model.n_p))
    ref_norm = np.linalg.norm(ref)
    f = model.free
    history = []
    for it in range(1, max_iter + 1):
        r, w, N = _ns_residual(model, A, B, F, G, y, u0, p)
        rn = float(np.linalg.norm(r))
        history.append(rn)
        if not np.isfinite(rn):
            break
        if rn <= tol * ref_norm or rn == 0.0:
            sol = TruthSolution(u0 + y[4] * model.ug, p, y, u0,
                                {"solver": "newton", "iterations": it, "residuals": history})
            return sol
        J = A + N + model.convection_derivative(w, y)
        K = sparse.bmat([[J[f][:, f], B[:, f].T], [B[:, f], None]], format="csc")
        step = _solve(_factorize(K, y), -r, y)
        u0 = u0.copy()
        u0[f] += step[: len(f)]
        p = p + step[len(f):]
    raise NumericalFailure(
        f"Newton did not converge at y={list(y)}",
        y=list(y), last_residual=history[-1] if history else None, residuals=history,
    )
