"""Projected affine operators and the online reduced solvers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidArgument, NumericalFailure
from ..fom import model as fom_model
from ..fom.io import read_array, read_vector, write_array
from ..fom.model import NAVIER_STOKES, STOKES, AffineModel
from ..fom.solvers import TruthSolution
from .basis import ReducedBasis

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50


@dataclass
class ReducedSolution:
    u: np.ndarray
    p: np.ndarray
    y: np.ndarray
    n: int
    iterations: int = 0


@dataclass
class ReducedModel:
    """Galerkin projection of an :class:`AffineModel` onto a :class:`ReducedBasis`.

    Block arrays are stacked along the first axis by affine term q.
    Trilinear blocks ``T[q, i, j, k] = c_q(zeta_j, zeta_k, zeta_i)`` are only
    present for Navier-Stokes models.
    """

    basis: ReducedBasis
    kind: str
    nu: float
    ug: np.ndarray
    A: np.ndarray  # (Q, nv, nv)
    B: np.ndarray  # (Q, np, nv)
    F: np.ndarray  # (Q, nv)  lifting-driven load, theta = v_max theta_a
    G: np.ndarray  # (Q, np)
    T: np.ndarray | None = None  # (Q, nv, nv, nv)
    L1: np.ndarray | None = None  # (Q, nv, nv)  c_q(u_g, zeta_k, zeta_i)
    L2: np.ndarray | None = None  # (Q, nv, nv)  c_q(zeta_j, u_g, zeta_i)
    Lg: np.ndarray | None = None  # (Q, nv)      c_q(u_g, u_g, zeta_i)
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.basis.size

    def theta_a(self, y):
        return fom_model.theta_a(y, self.nu)

    def theta_b(self, y):
        return fom_model.theta_b(y)

    def theta_c(self, y):
        return fom_model.theta_c(y)


def project(model: AffineModel, basis: ReducedBasis, kind: str | None = None) -> ReducedModel:
    """Project every affine block onto the basis (offline stage)."""
    kind = kind or model.kind
    V, P = basis.velocity, basis.pressure
    A = np.stack([V.T @ (Aq @ V) for Aq in model.A])
    B = np.stack([P.T @ (Bq @ V) for Bq in model.B])
    F = np.stack([V.T @ f for f in model.F0])
    G = np.stack([P.T @ g for g in model.G])
    rm = ReducedModel(basis, kind, model.nu, model.ug.copy(), A, B, F, G,
                      meta={"mesh_hash": model.hash, "n_u": model.n_u, "n_p": model.n_p})
    if kind == NAVIER_STOKES:
        Q, nv = len(model.A), V.shape[1]
        T = np.empty((Q, nv, nv, nv))
        L2 = np.empty((Q, nv, nv))
        for j in range(nv):
            for q, Nq in enumerate(model.convection_terms(V[:, j])):
                NV = Nq @ V
                T[q, :, j, :] = V.T @ NV
                L2[q, :, j] = V.T @ (Nq @ model.ug)
        Ng = model.convection_terms(model.ug)
        rm.T = T
        rm.L2 = L2
        rm.L1 = np.stack([V.T @ (Nq @ V) for Nq in Ng])
        rm.Lg = np.stack([V.T @ (Nq @ model.ug) for Nq in Ng])
    return rm


def _blocks(rm: ReducedModel, y, n: int):
    nv, np_ = rm.basis.columns(n)
    ta, tb = rm.theta_a(y), rm.theta_b(y)
    vm = float(y[4])
    A = np.tensordot(ta, rm.A[:, :nv, :nv], axes=1)
    B = np.tensordot(tb, rm.B[:, :np_, :nv], axes=1)
    F = vm * (ta @ rm.F[:, :nv])
    G = vm * (tb @ rm.G[:, :np_])
    return nv, np_, A, B, F, G


def online_solve(rm: ReducedModel, y, n: int | None = None, kind: str | None = None,
                 tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER) -> ReducedSolution:
    """Solve the n-level reduced Stokes or Navier-Stokes system at ``y``.

    Only reduced arrays are touched, so the cost is independent of the
    full-order dimension.
    """
    y = np.asarray(y, dtype=float)
    n = rm.size if n is None else n
    kind = kind or rm.kind
    nv, np_, A, B, F, G = _blocks(rm, y, n)
    if nv + np_ == 0:
        return ReducedSolution(np.zeros(0), np.zeros(0), y, n)
    K = np.block([[A, B.T], [B, np.zeros((np_, np_))]])
    rhs = np.concatenate([F, G])
    x = _dense_solve(K, rhs, y, n)
    if kind == STOKES:
        return ReducedSolution(x[:nv], x[nv:], y, n)
    if rm.T is None:
        raise InvalidArgument("reduced model was projected without trilinear blocks")

    vm = float(y[4])
    tc = rm.theta_c(y)
    T = np.tensordot(tc, rm.T[:, :nv, :nv, :nv], axes=1)
    Lin = vm * np.tensordot(tc, rm.L1[:, :nv, :nv] + rm.L2[:, :nv, :nv], axes=1)
    Lg = vm * vm * (tc @ rm.Lg[:, :nv])

    def residual(u, p):
        ru = A @ u + B.T @ p + np.einsum("ijk,j,k->i", T, u, u) + Lin @ u + Lg - F
        return np.concatenate([ru, B @ u - G])

    ref = np.linalg.norm(residual(np.zeros(nv), np.zeros(np_)))
    u, p = x[:nv], x[nv:]
    for it in range(1, max_iter + 1):
        r = residual(u, p)
        rn = np.linalg.norm(r)
        if rn <= tol * ref or rn == 0.0:
            return ReducedSolution(u, p, y, n, it)
        if not np.isfinite(rn):
            break
        J = A + np.einsum("ijk,k->ij", T, u) + np.einsum("ijk,j->ik", T, u) + Lin
        K = np.block([[J, B.T], [B, np.zeros((np_, np_))]])
        step = _dense_solve(K, -r, y, n)
        u, p = u + step[:nv], p + step[nv:]
    raise NumericalFailure(f"reduced Newton did not converge at y={list(y)}, N={n}",
                           y=list(y), n=n)


def _dense_solve(K, rhs, y, n):
    try:
        x = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"singular reduced system at y={list(y)}, N={n}",
                               y=list(y), n=n) from exc
    if not np.all(np.isfinite(x)):
        raise NumericalFailure(f"non-finite reduced solution at y={list(y)}, N={n}",
                               y=list(y), n=n)
    return x


def reconstruct(sol: ReducedSolution, rm: ReducedModel):
    """Full-order fields (velocity with lifting, pressure) from reduced coefficients."""
    nv, np_ = rm.basis.columns(sol.n)
    if len(sol.u) != nv or len(sol.p) != np_:
        raise InvalidArgument(
            f"coefficient lengths ({len(sol.u)}, {len(sol.p)}) do not match level {sol.n} "
            f"({nv}, {np_})"
        )
    V, P = rm.basis.truncate(sol.n)
    return V @ sol.u + float(sol.y[4]) * rm.ug, P @ sol.p


def project_truth(truth: TruthSolution, rm: ReducedModel, model: AffineModel,
                  n: int | None = None) -> ReducedSolution:
    """Coefficients of the X-orthogonal projection of a truth solution."""
    n = rm.size if n is None else n
    V, P = rm.basis.truncate(n)
    return ReducedSolution(V.T @ (model.Xu @ truth.homogeneous),
                           P.T @ (model.Xp @ truth.pressure), truth.y, n)


# persistence ------------------------------------------------------------

_BLOCKS_3D = ("A", "B")


def save_reduced_model(rm: ReducedModel, directory, extra: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    b = rm.basis
    write_array(directory / "velocity_basis.bin", b.velocity)
    write_array(directory / "pressure_basis.bin", b.pressure)
    write_array(directory / "lifting.bin", rm.ug)
    write_array(directory / "eigenvalues_u.bin", b.eigenvalues_u)
    write_array(directory / "eigenvalues_p.bin", b.eigenvalues_p)
    Q = rm.A.shape[0]
    for name in ("A", "B", "F", "G", "L1", "L2", "Lg"):
        arr = getattr(rm, name)
        if arr is None:
            continue
        for q in range(Q):
            write_array(directory / f"{name}_{q}.bin", arr[q])
    if rm.T is not None:
        nv = rm.T.shape[1]
        for q in range(Q):
            write_array(directory / f"T_{q}.bin", rm.T[q].reshape(nv, nv * nv))
    manifest = {
        "format": "wrom-reduced-model",
        "version": 1,
        "kind": rm.kind,
        "nu": rm.nu,
        "n_terms": Q,
        "theta": {
            "a": "nu*sy/sx, nu*sx/sy per subdomain",
            "b": "sy, sx per subdomain",
            "c": "sy, sx per subdomain",
            "f": "v_max*theta_a",
            "g": "v_max*theta_b",
        },
        "velocity_levels": b.velocity_levels,
        "pressure_levels": b.pressure_levels,
        "supremizers": b.supremizers,
        "basis_size": b.size,
        "eigenvalues_u": [float(v) for v in b.eigenvalues_u],
        "eigenvalues_p": [float(v) for v in b.eigenvalues_p],
        "history": b.history,
        "meta": rm.meta,
    }
    if extra:
        manifest.update(extra)
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default))
    return directory


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")


def load_reduced_model(directory) -> ReducedModel:
    directory = Path(directory)
    man = json.loads((directory / "manifest.json").read_text())
    Q = man["n_terms"]
    basis = ReducedBasis(
        read_array(directory / "velocity_basis.bin"),
        read_array(directory / "pressure_basis.bin"),
        list(man["velocity_levels"]),
        list(man["pressure_levels"]),
        read_vector(directory / "eigenvalues_u.bin"),
        read_vector(directory / "eigenvalues_p.bin"),
        list(man["history"]),
        bool(man["supremizers"]),
    )

    def stack(name, vector=False):
        files = [directory / f"{name}_{q}.bin" for q in range(Q)]
        if not files[0].exists():
            return None
        return np.stack([read_vector(f) if vector else read_array(f) for f in files])

    rm = ReducedModel(
        basis, man["kind"], man["nu"], read_vector(directory / "lifting.bin"),
        stack("A"), stack("B"), stack("F", True), stack("G", True),
        meta=man.get("meta", {}),
    )
    if (directory / "T_0.bin").exists():
        nv = basis.velocity.shape[1]
        rm.T = np.stack([read_array(directory / f"T_{q}.bin").reshape(nv, nv, nv)
                         for q in range(Q)])
        rm.L1, rm.L2, rm.Lg = stack("L1"), stack("L2"), stack("Lg", True)
    return rm
