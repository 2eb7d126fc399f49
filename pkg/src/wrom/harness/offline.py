"""Offline stage: training sets, truth snapshots and reduced-model construction."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..errors import InvalidArgument, NumericalFailure
from ..fom import build_mesh
from ..fom.model import NAVIER_STOKES, REFERENCE_PARAMETER, AffineModel, assemble_affine
from ..fom.solvers import TruthSolution, solve_navier_stokes, solve_stokes
from ..probability import (
    WeightedSampleSet,
    jacobi_families,
    quadrature_training_set,
    sample,
)
from ..quadrature import smolyak_grid, tensor_grid
from ..rom import (
    Estimator,
    ReducedModel,
    build_basis,
    project,
    save_reduced_model,
    weighted_greedy,
    weighted_pod,
)
from .config import GREEDY_METHODS, StudyConfig, format_config

log = logging.getLogger(__name__)

THREADS_ENV = "WROM_THREADS"
MAX_SMOLYAK_EXTRA_LEVELS = 12


def thread_count() -> int:
    """Worker count for truth solves; ``WROM_THREADS`` overrides the CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise InvalidArgument(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
        if n < 1:
            raise InvalidArgument(f"{THREADS_ENV} must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


@lru_cache(maxsize=8)
def get_model(refinement: int, kind: str, nu: float = 1.0) -> AffineModel:
    """Assembled affine model, cached per (refinement, equation, viscosity)."""
    return assemble_affine(build_mesh(refinement), kind, nu)


def truth_solve(model: AffineModel, y, kind: str) -> TruthSolution:
    if kind == NAVIER_STOKES:
        return solve_navier_stokes(model, y)
    return solve_stokes(model, y)


def solve_all(model: AffineModel, points, kind: str, threads: int | None = None,
              abort: bool = True):
    """Truth-solve every parameter with a bounded thread pool.

    With ``abort`` a failure anywhere raises :class:`NumericalFailure` listing
    every failing parameter; otherwise failed entries come back as ``None``.
    """
    points = np.asarray(points, dtype=float)
    threads = threads or thread_count()

    def one(y):
        try:
            return truth_solve(model, y, kind)
        except NumericalFailure as exc:
            log.warning("truth solve failed at y=%s: %s", list(y), exc)
            return None

    if threads == 1 or len(points) <= 1:
        results = [one(y) for y in points]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, points))
    failed = [points[i].tolist() for i, r in enumerate(results) if r is None]
    if failed and abort:
        raise NumericalFailure(f"{len(failed)} truth solve(s) failed", parameters=failed)
    return results


def _smolyak_level(d: int, M: int, families):
    """Smallest level whose grid reaches M points (level d is the 1-point grid)."""
    for k in range(d, d + MAX_SMOLYAK_EXTRA_LEVELS + 1):
        grid = smolyak_grid(d, k, families)
        if len(grid) >= M:
            return grid
    return grid


def training_set(cfg: StudyConfig) -> WeightedSampleSet:
    """Training parameters and weights for the configured method.

    The standard baselines draw from the uniform law on the same uniform
    stream as the weighted Monte-Carlo set, so the two are paired draw by draw
    and coincide when every Beta shape is (1, 1).
    """
    box = cfg.box
    m = cfg.method
    if m in ("StandardPOD", "StandardGreedy"):
        return sample(box, cfg.train_seed, cfg.M, law="uniform")
    if m in ("WeightedPOD-MC", "WeightedGreedy"):
        return sample(box, cfg.train_seed, cfg.M, law="beta")
    fams = jacobi_families(box)
    if m == "WeightedPOD-Tensor":
        n = cfg.tensor_order or max(1, int(round(cfg.M ** (1.0 / box.dim))))
        return quadrature_training_set(box, tensor_grid([f.rule(n) for f in fams]))
    if cfg.smolyak_level is not None:
        grid = smolyak_grid(box.dim, cfg.smolyak_level, fams)
    else:
        grid = _smolyak_level(box.dim, cfg.M, fams)
    return quadrature_training_set(box, grid)


@dataclass
class OfflineResult:
    reduced: ReducedModel
    training: WeightedSampleSet
    manifest: dict
    truths: list = field(default_factory=list)
    path: Path | None = None


def run_offline(cfg: StudyConfig, out_dir=None, threads: int | None = None) -> OfflineResult:
    """Build (and optionally persist under ``out_dir``) the reduced model for ``cfg``."""
    t0 = time.perf_counter()
    kind = cfg.equation
    model = get_model(cfg.refinement, kind, cfg.nu)
    train = training_set(cfg)
    timings = {"training_set": time.perf_counter() - t0}
    n_levels = min(cfg.n_max, len(train)) if cfg.n_max > 0 else len(train)

    if cfg.method in GREEDY_METHODS:
        t = time.perf_counter()
        weight = "none" if cfg.method == "StandardGreedy" else cfg.greedy_weight
        est = Estimator(model, mode=cfg.estimator_mode, weight=weight, box=cfg.box, kind=kind)
        basis = weighted_greedy(train, est, cfg.greedy_tol, n_levels, REFERENCE_PARAMETER,
                                cfg.supremizers)
        truths = [est.truth(h["y"]) for h in basis.history if "index" in h]
        timings["greedy"] = time.perf_counter() - t
        n_truth = len(est.truth)
    else:
        t = time.perf_counter()
        truths = solve_all(model, train.points, kind, threads)
        timings["truth_solves"] = time.perf_counter() - t
        t = time.perf_counter()
        U = np.column_stack([s.homogeneous for s in truths])
        P = np.column_stack([s.pressure for s in truths])
        N = None if cfg.pod_tol is not None else n_levels
        Zu, lu = weighted_pod(U, train.weights, model.Xu, N=N, tol=cfg.pod_tol)
        Zp, lp = weighted_pod(P, train.weights, model.Xp, N=N, tol=cfg.pod_tol)
        basis = build_basis(model, Zu, Zp, REFERENCE_PARAMETER, cfg.supremizers, lu, lp,
                            n_levels)
        timings["pod"] = time.perf_counter() - t
        n_truth = len(truths)

    t = time.perf_counter()
    rm = project(model, basis, kind)
    timings["projection"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t0

    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "method": cfg.method,
        "strategy": train.strategy,
        "training_law": train.meta.get("law"),
        "training_cardinality": len(train),
        "training_level": train.meta.get("level"),
        "training_weight_sum": float(np.sum(train.weights)),
        "truth_solves": n_truth,
        "train_seed": cfg.train_seed,
        "test_seed": cfg.test_seed,
        "mesh_hash": model.hash,
        "refinement": cfg.refinement,
        "n_u": model.n_u,
        "n_p": model.n_p,
        "basis_size": basis.size,
        "training_points": np.asarray(train.points).tolist(),
        "training_weights": np.asarray(train.weights).tolist(),
        "wall_times": timings,
    }
    rm.meta.update({"config_hash": cfg.hash(), "refinement": cfg.refinement,
                    "training_cardinality": len(train), "method": cfg.method})
    result = OfflineResult(rm, train, manifest, truths)
    if out_dir is not None:
        out = Path(out_dir)
        save_reduced_model(rm, out, extra={"offline": manifest})
        (out / "config.ini").write_text(format_config(cfg))
        result.path = out
    log.info("offline %s: %d training points, basis size %d, %.1fs", cfg.method, len(train),
             basis.size, timings["total"])
    return result


__all__ = [
    "OfflineResult", "THREADS_ENV", "get_model", "run_offline", "solve_all",
    "thread_count", "training_set", "truth_solve",
]
