"""Beta-distributed parameter model and weighted training sets.

Every parameter dimension is an independent Beta law rescaled from [0, 1]
to its range ``(lo, hi)``.  Training sets come either from Monte-Carlo
sampling (inverse CDF of a seeded uniform stream) or from Gauss-Jacobi
quadrature grids whose weight function is the Beta density itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import betainc, log_expit, expit

from .errors import InvalidArgument, NumericalFailure
from .quadrature import Grid, RuleFamily

__all__ = [
    "BetaParams",
    "ParameterBox",
    "WeightedSampleSet",
    "DEFAULT_RANGES",
    "STUDY_SHAPES",
    "beta_pdf",
    "beta_cdf",
    "beta_inverse_cdf",
    "sample",
    "quadrature_training_set",
]

DEFAULT_RANGES = ((0.2, 1.9), (0.2, 2.0), (0.2, 1.9), (0.2, 2.0), (0.2, 20.0))
STUDY_SHAPES = ((0.03, 0.03), (10.0, 10.0), (20.0, 1.0), (75.0, 75.0))
PARAMETER_NAMES = ("L1", "h1", "L2", "h2", "v_max")

STRATEGIES = ("montecarlo", "tensor", "smolyak")


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta_: float

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.beta_ > 0.0):
            raise InvalidArgument(
                f"Beta shapes must be positive, got ({self.alpha}, {self.beta_})"
            )

    @property
    def log_beta(self) -> float:
        return (
            math.lgamma(self.alpha)
            + math.lgamma(self.beta_)
            - math.lgamma(self.alpha + self.beta_)
        )

    @property
    def jacobi_family(self) -> RuleFamily:
        # (1-t)^(beta-1) (1+t)^(alpha-1) on [-1,1] is the Beta density under x=(1+t)/2
        return RuleFamily(self.beta_ - 1.0, self.alpha - 1.0)

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta_)


def beta_pdf(x: float, p: BetaParams) -> float:
    """Beta density on [0, 1].

    Endpoints evaluate to the limit when it is finite; an unbounded limit
    (shape < 1 at that end) raises instead of returning infinity.
    """
    if not 0.0 <= x <= 1.0:
        raise InvalidArgument(f"Beta density argument outside [0, 1]: {x}")
    a, b = p.alpha, p.beta_
    for at_end, shape in ((x == 0.0, a), (x == 1.0, b)):
        if at_end:
            if shape < 1.0:
                raise InvalidArgument(
                    f"Beta({a}, {b}) density is unbounded at x={x}"
                )
            if shape > 1.0:
                return 0.0
    log_val = -p.log_beta
    if a != 1.0:
        log_val += (a - 1.0) * math.log(x)
    if b != 1.0:
        log_val += (b - 1.0) * math.log1p(-x)
    return math.exp(log_val)


def beta_cdf(x, p: BetaParams):
    """Regularized incomplete beta function I_x(alpha, beta)."""
    return betainc(p.alpha, p.beta_, x)


def _cdf_logodds(s: np.ndarray, p: BetaParams) -> np.ndarray:
    # upper half evaluated through the complement so 1 - x keeps its digits
    x = expit(s)
    upper = s > 0.0
    out = betainc(p.alpha, p.beta_, x)
    out[upper] = 1.0 - betainc(p.beta_, p.alpha, expit(-s[upper]))
    return out


def _dcdf_dlogodds(s: np.ndarray, p: BetaParams) -> np.ndarray:
    # d/ds I_x = pdf(x) x (1 - x) with x = expit(s)
    return np.exp(p.alpha * log_expit(s) + p.beta_ * log_expit(-s) - p.log_beta)


def beta_inverse_cdf(u, p: BetaParams, max_iter: int = 200):
    """Quantile function of Beta(alpha, beta).

    Newton iteration on the log-odds ``s = log(x / (1 - x))``, safeguarded by
    a shrinking bisection bracket.  Working in log-odds keeps quantiles of
    strongly U-shaped laws (x ~ 1e-50) reachable in a handful of steps.
    Accepts scalars or arrays.
    """
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(~((u_arr > 0.0) & (u_arr < 1.0))):
        raise InvalidArgument("quantile level must lie in the open interval (0, 1)")
    lo = np.full(u_arr.shape, -745.0)
    hi = np.full(u_arr.shape, 745.0)
    s = np.full(u_arr.shape, math.log(p.mean / (1.0 - p.mean)))
    active = np.ones(u_arr.shape, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        si = s[idx]
        resid = _cdf_logodds(si, p) - u_arr[idx]
        below = resid < 0.0
        lo[idx[below]] = si[below]
        hi[idx[~below]] = si[~below]
        done = np.abs(resid) <= 1e-14 * np.maximum(u_arr[idx], 1e-300) + 1e-15
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            step = resid / _dcdf_dlogodds(si, p)
            s_new = si - step
        bad = ~np.isfinite(s_new) | (s_new <= lo[idx]) | (s_new >= hi[idx])
        s_new[bad] = 0.5 * (lo[idx[bad]] + hi[idx[bad]])
        stalled = np.abs(s_new - si) <= 4.0 * np.finfo(float).eps * (1.0 + np.abs(si))
        s[idx] = np.where(done, si, s_new)
        active[idx[done | stalled]] = False
    else:
        if np.any(active):
            i = int(np.flatnonzero(active)[0])
            raise NumericalFailure(
                "Beta quantile iteration did not converge",
                u=float(u_arr[i]),
                shapes=(p.alpha, p.beta_),
                bracket=(float(lo[i]), float(hi[i])),
                iterations=max_iter,
            )
    x = expit(s)
    return float(x[0]) if np.ndim(u) == 0 else x.reshape(np.shape(u))


@dataclass(frozen=True)
class ParameterBox:
    """Admissible parameter box with an independent rescaled Beta law per axis."""

    ranges: tuple = DEFAULT_RANGES
    shapes: tuple = ((1.0, 1.0),) * 5

    def __post_init__(self):
        if len(self.ranges) != len(self.shapes):
            raise InvalidArgument("ranges and shapes must have the same length")
        for lo, hi in self.ranges:
            if not lo < hi:
                raise InvalidArgument(f"empty parameter range ({lo}, {hi})")
        object.__setattr__(
            self, "shapes", tuple(tuple(map(float, s)) for s in self.shapes)
        )
        object.__setattr__(
            self, "ranges", tuple(tuple(map(float, r)) for r in self.ranges)
        )
        self.laws  # validates the shapes

    @classmethod
    def with_shape(cls, alpha: float, beta: float, ranges=DEFAULT_RANGES):
        return cls(tuple(ranges), ((alpha, beta),) * len(ranges))

    @property
    def dim(self) -> int:
        return len(self.ranges)

    @property
    def lo(self) -> np.ndarray:
        return np.array([r[0] for r in self.ranges])

    @property
    def hi(self) -> np.ndarray:
        return np.array([r[1] for r in self.ranges])

    @property
    def laws(self) -> tuple[BetaParams, ...]:
        return tuple(BetaParams(a, b) for a, b in self.shapes)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def from_unit(self, x) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * np.asarray(x, dtype=float)

    def to_unit(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.lo) / (self.hi - self.lo)

    def clamp(self, y, margin: float = 1e-9) -> np.ndarray:
        return np.clip(np.asarray(y, dtype=float), self.lo + margin, self.hi - margin)

    def contains(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all((y >= self.lo) & (y <= self.hi)))

    def density(self, y) -> float:
        """Joint density rho(y) on the physical box."""
        x = self.to_unit(y)
        val = 1.0
        for xj, law, (lo, hi) in zip(x, self.laws, self.ranges):
            val *= beta_pdf(float(xj), law) / (hi - lo)
        return val


@dataclass(frozen=True)
class WeightedSampleSet:
    points: np.ndarray
    weights: np.ndarray
    strategy: str
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.weights)

    def __iter__(self):
        return iter(zip(self.points, self.weights))


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample(box: ParameterBox, rng, M: int, law: str = "beta") -> WeightedSampleSet:
    """M i.i.d. parameter draws with Monte-Carlo weights 1/M.

    The draws are inverse-CDF transforms of one uniform stream.  With
    ``law="uniform"`` the same stream is mapped linearly instead, so a
    uniform-law set and a Beta-law set built from the same seed are paired
    draw by draw.
    """
    if M < 1:
        raise InvalidArgument(f"sample size must be >= 1, got {M}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    u = _rng(rng).random((M, box.dim))
    u = np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    if law == "beta":
        x = np.column_stack(
            [beta_inverse_cdf(u[:, j], p) for j, p in enumerate(box.laws)]
        )
    elif law == "uniform":
        x = u
    else:
        raise InvalidArgument(f"unknown sampling law {law!r}")
    points = np.clip(box.from_unit(x), box.lo, box.hi)
    return WeightedSampleSet(
        points, np.full(M, 1.0 / M), "montecarlo", seed, {"law": law}
    )


def quadrature_training_set(box: ParameterBox, grid: Grid) -> WeightedSampleSet:
    """Map a Gauss-Jacobi grid on [-1,1]^d to a probability-weighted set on the box."""
    if grid.dim != box.dim:
        raise InvalidArgument(f"grid dimension {grid.dim} != box dimension {box.dim}")
    if len(grid.families) != box.dim:
        raise InvalidArgument("grid carries no per-dimension rule family")
    scale = 1.0
    for fam, law in zip(grid.families, box.laws):
        expected = law.jacobi_family
        if not (
            math.isclose(fam.a_exp, expected.a_exp, abs_tol=1e-14)
            and math.isclose(fam.b_exp, expected.b_exp, abs_tol=1e-14)
        ):
            raise InvalidArgument(
                f"grid exponents ({fam.a_exp}, {fam.b_exp}) do not match "
                f"Beta({law.alpha}, {law.beta_}); expected "
                f"({expected.a_exp}, {expected.b_exp})"
            )
        scale *= math.exp(
            -law.log_beta - (law.alpha + law.beta_ - 1.0) * math.log(2.0)
        )
    points = box.from_unit(0.5 * (1.0 + grid.points))
    strategy = "tensor" if grid.provenance == "tensor" else "smolyak"
    return WeightedSampleSet(
        points, grid.weights * scale, strategy, None, {"level": grid.order}
    )


def jacobi_families(box: ParameterBox) -> tuple[RuleFamily, ...]:
    return tuple(law.jacobi_family for law in box.laws)


def spawn_seeds(seed: int, n: int) -> list[int]:
    """Independent child seeds for worker streams."""
    return [
        int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)
    ]


def parameter_names() -> Sequence[str]:
    return PARAMETER_NAMES
