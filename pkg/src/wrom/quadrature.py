"""Univariate Gauss rules and their tensor-product / Smolyak compositions.

Univariate rules are computed with the Golub-Welsch algorithm: the Jacobi
matrix of the three-term recurrence is diagonalized by an implicit-shift QL
iteration that only tracks the first component of every eigenvector, which
is all the weights need.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import InvalidArgument, NumericalFailure

__all__ = [
    "UnivariateRule",
    "RuleFamily",
    "Grid",
    "gauss_legendre",
    "gauss_jacobi",
    "jacobi_mass",
    "tensor_grid",
    "smolyak_terms",
    "smolyak_grid",
    "integrate",
    "dump_grid_csv",
]

MERGE_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class UnivariateRule:
    """Nodes and positive weights of an ``order``-point Gauss rule."""

    nodes: np.ndarray
    weights: np.ndarray
    family: str = "legendre"
    a_exp: float = 0.0
    b_exp: float = 0.0
    interval: tuple = (-1.0, 1.0)

    @property
    def order(self) -> int:
        return len(self.nodes)

    def __call__(self, f: Callable[[float], float]) -> float:
        return float(sum(w * f(x) for x, w in zip(self.nodes, self.weights)))


def jacobi_mass(a_exp: float, b_exp: float) -> float:
    """Integral of ``(1-x)^a (1+x)^b`` over [-1, 1]."""
    return math.exp(
        (a_exp + b_exp + 1.0) * math.log(2.0)
        + math.lgamma(a_exp + 1.0)
        + math.lgamma(b_exp + 1.0)
        - math.lgamma(a_exp + b_exp + 2.0)
    )


def _jacobi_recurrence(n: int, a: float, b: float):
    """Diagonal and squared off-diagonal of the monic Jacobi recurrence."""
    diag = np.empty(n)
    off2 = np.empty(max(n - 1, 0))
    ab = a + b
    diag[0] = (b - a) / (ab + 2.0)
    for k in range(1, n):
        s = 2.0 * k + ab
        diag[k] = (b * b - a * a) / (s * (s + 2.0))
    if n > 1:
        # k = 1 written in cancelled form so a + b = -1 stays finite
        off2[0] = 4.0 * (1.0 + a) * (1.0 + b) / ((ab + 2.0) ** 2 * (ab + 3.0))
    for k in range(2, n):
        s = 2.0 * k + ab
        off2[k - 1] = (
            4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))
        )
    return diag, off2


def _tridiagonal_ql(diag: np.ndarray, off: np.ndarray, max_sweeps: int = 60):
    """Eigenvalues and first eigenvector components of a symmetric tridiagonal.

    Implicit-shift QL (tqli); the rotations are applied to a single row,
    the first row of the eigenvector matrix.
    """
    n = len(diag)
    d = np.array(diag, dtype=float)
    e = np.zeros(n)
    e[: n - 1] = off
    z = np.zeros(n)
    z[0] = 1.0
    eps = np.finfo(float).eps
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > max_sweeps:
                raise NumericalFailure("QL iteration did not converge", index=l)
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            deflated = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                f = z[i + 1]
                z[i + 1] = s * z[i] + c * f
                z[i] = c * z[i] - s * f
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, z


@lru_cache(maxsize=None)
def _gauss_jacobi_cached(n: int, a_exp: float, b_exp: float):
    diag, off2 = _jacobi_recurrence(n, a_exp, b_exp)
    nodes, first = _tridiagonal_ql(diag, np.sqrt(off2))
    order = np.argsort(nodes)
    weights = jacobi_mass(a_exp, b_exp) * first[order] ** 2
    return nodes[order], weights


def gauss_jacobi(n: int, a_exp: float, b_exp: float) -> UnivariateRule:
    """n-point Gauss rule for the weight ``(1-x)^a_exp (1+x)^b_exp`` on [-1, 1]."""
    if int(n) != n or n < 1:
        raise InvalidArgument(f"rule order must be a positive integer, got {n}")
    if a_exp <= -1.0 or b_exp <= -1.0:
        raise InvalidArgument(
            f"Jacobi exponents must exceed -1, got ({a_exp}, {b_exp})"
        )
    nodes, weights = _gauss_jacobi_cached(int(n), float(a_exp), float(b_exp))
    family = "legendre" if a_exp == 0.0 and b_exp == 0.0 else "jacobi"
    return UnivariateRule(
        _frozen(nodes), _frozen(weights), family, float(a_exp), float(b_exp)
    )


def gauss_legendre(n: int) -> UnivariateRule:
    """n-point Gauss-Legendre rule on [-1, 1]."""
    return gauss_jacobi(n, 0.0, 0.0)


@dataclass(frozen=True)
class RuleFamily:
    """A sequence of Gauss-Jacobi rules indexed by node count."""

    a_exp: float = 0.0
    b_exp: float = 0.0

    def rule(self, n: int) -> UnivariateRule:
        return gauss_jacobi(n, self.a_exp, self.b_exp)

    @property
    def mass(self) -> float:
        return jacobi_mass(self.a_exp, self.b_exp)


LEGENDRE = RuleFamily()


@dataclass(frozen=True)
class Grid:
    """Quadrature nodes in R^d with (possibly signed) weights.

    ``provenance`` is one of ``"tensor"``, ``"smolyak"`` or ``"montecarlo"``;
    ``order`` is the tensor order, the Smolyak level or the sample count.
    """

    points: np.ndarray
    weights: np.ndarray
    provenance: str
    order: int
    families: tuple = field(default=())

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.weights)


def _as_families(family, d: int) -> tuple:
    if isinstance(family, RuleFamily):
        return (family,) * d
    families = tuple(family)
    if len(families) != d:
        raise InvalidArgument(f"expected {d} rule families, got {len(families)}")
    return families


def _tensor_arrays(rules: Sequence[UnivariateRule]):
    nodes = np.meshgrid(*[r.nodes for r in rules], indexing="ij")
    weights = np.meshgrid(*[r.weights for r in rules], indexing="ij")
    points = np.stack([x.ravel() for x in nodes], axis=1)
    w = np.prod(np.stack([x.ravel() for x in weights], axis=1), axis=1)
    return points, w


def tensor_grid(rules: Sequence[UnivariateRule]) -> Grid:
    """Full tensor product of the given univariate rules."""
    rules = list(rules)
    if not rules:
        raise InvalidArgument("tensor_grid needs at least one univariate rule")
    points, weights = _tensor_arrays(rules)
    families = tuple(RuleFamily(r.a_exp, r.b_exp) for r in rules)
    return Grid(
        _frozen(points),
        _frozen(weights),
        "tensor",
        max(r.order for r in rules),
        families,
    )


def smolyak_terms(d: int, k: int) -> list[tuple[int, tuple[int, ...]]]:
    """Signed tensor-rule coefficients of the level-k Smolyak operator.

    Every admissible multi-index alpha (alpha >= 1, |alpha|_1 <= k) is
    expanded over gamma in {0,1}^d into (-1)^|gamma| U_{alpha - gamma};
    terms with equal node counts are collected and zero sums dropped.
    """
    if d < 1:
        raise InvalidArgument(f"dimension must be >= 1, got {d}")
    if k < d:
        raise InvalidArgument(f"Smolyak level k={k} is below the dimension d={d}")
    coeffs: dict[tuple[int, ...], int] = {}
    for alpha in itertools.product(range(1, k - d + 2), repeat=d):
        if sum(alpha) > k:
            continue
        for gamma in itertools.product((0, 1), repeat=d):
            orders = tuple(a - g for a, g in zip(alpha, gamma))
            if min(orders) < 1:
                continue
            coeffs[orders] = coeffs.get(orders, 0) + (-1) ** sum(gamma)
    return [(c, orders) for orders, c in sorted(coeffs.items()) if c != 0]


def _merge(points: np.ndarray, weights: np.ndarray, tol: float = MERGE_TOL):
    tree = cKDTree(points)
    pairs = tree.query_pairs(tol, p=np.inf, output_type="ndarray")
    n = len(points)
    graph = coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
    )
    ncomp, labels = connected_components(graph, directed=False)
    # representative = first occurrence, keeps output order deterministic
    first = np.full(ncomp, n)
    np.minimum.at(first, labels, np.arange(n))
    order = np.argsort(first)
    remap = np.empty(ncomp, dtype=int)
    remap[order] = np.arange(ncomp)
    merged_w = np.zeros(ncomp)
    np.add.at(merged_w, remap[labels], weights)
    return points[first[order]], merged_w


def smolyak_grid(d: int, k: int, family=LEGENDRE) -> Grid:
    """Level-k Smolyak sparse grid in d dimensions with coincident nodes merged.

    ``family`` is a :class:`RuleFamily` or one per dimension.
    """
    families = _as_families(family, d)
    pts, wts = [], []
    for coef, orders in smolyak_terms(d, k):
        p, w = _tensor_arrays([fam.rule(n) for fam, n in zip(families, orders)])
        pts.append(p)
        wts.append(coef * w)
    points, weights = _merge(np.concatenate(pts), np.concatenate(wts))
    return Grid(_frozen(points), _frozen(weights), "smolyak", k, families)


def integrate(grid: Grid, f: Callable[[np.ndarray], float]) -> float:
    """Quadrature sum ``sum_i w_i f(y_i)``."""
    if len(grid) == 0:
        raise InvalidArgument("cannot integrate over an empty grid")
    values = np.array([f(y) for y in grid.points], dtype=float)
    return float(grid.weights @ values)


def dump_grid_csv(grid: Grid, path) -> None:
    """Write ``w, y1, ..., yd`` rows, one per node."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w"] + [f"y{j + 1}" for j in range(grid.dim)])
        for w, y in zip(grid.weights, grid.points):
            writer.writerow([repr(float(w))] + [repr(float(v)) for v in y])
