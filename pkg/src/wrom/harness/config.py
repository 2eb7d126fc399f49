"""Study configuration files.

A configuration is a plain ``key = value`` file with sections::

    [study]
    equation = stokes            ; stokes | navier-stokes
    method = WeightedPOD-MC
    M = 240                      ; training-set target size
    n_max = 20                   ; N sweep is 0..n_max
    test_size = 100
    train_seed = 1
    test_seed = 2
    refinement = 4

    [distribution]               ; shape shared by every parameter
    alpha = 75
    beta = 75

    [v_max]                      ; optional per-parameter override
    lo = 0.2
    hi = 20.0
    alpha = 10
    beta = 10

Per-parameter sections are named after the parameters ``L1, h1, L2, h2,
v_max`` and may set any of ``lo, hi, alpha, beta``.  Optional study keys:
``nu``, ``supremizers``, ``greedy_tol``, ``greedy_weight`` (sqrt |
density), ``estimator`` (residual | exact), ``tensor_order``,
``smolyak_level``, ``pod_tol``.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..errors import InvalidArgument
from ..fom.model import NAVIER_STOKES, STOKES
from ..probability import DEFAULT_RANGES, PARAMETER_NAMES, ParameterBox

METHODS = (
    "StandardPOD",
    "WeightedPOD-MC",
    "WeightedPOD-Tensor",
    "WeightedPOD-Smolyak",
    "StandardGreedy",
    "WeightedGreedy",
)
POD_METHODS = METHODS[:4]
GREEDY_METHODS = METHODS[4:]
_EQUATIONS = {
    "stokes": STOKES,
    "navier-stokes": NAVIER_STOKES,
    "navierstokes": NAVIER_STOKES,
    "ns": NAVIER_STOKES,
}
_STUDY_KEYS = {
    "equation", "method", "m", "n_max", "test_size", "train_seed", "test_seed",
    "refinement", "nu", "supremizers", "greedy_tol", "greedy_weight", "estimator",
    "tensor_order", "smolyak_level", "pod_tol",
}


@dataclass(frozen=True)
class StudyConfig:
    """Everything needed to rerun one offline training plus error study."""

    equation: str = STOKES
    method: str = "WeightedPOD-MC"
    ranges: tuple = DEFAULT_RANGES
    shapes: tuple = ((75.0, 75.0),) * 5
    M: int = 240
    n_max: int = 20
    test_size: int = 100
    train_seed: int = 1
    test_seed: int = 2
    refinement: int = 4
    nu: float = 1.0
    supremizers: bool = True
    greedy_tol: float = 0.0
    greedy_weight: str = "sqrt"
    estimator: str | None = None
    tensor_order: int | None = None
    smolyak_level: int | None = None
    pod_tol: float | None = None
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        eq = _EQUATIONS.get(str(self.equation).lower())
        if eq is None:
            raise InvalidArgument(f"unknown equation {self.equation!r}")
        object.__setattr__(self, "equation", eq)
        if self.method not in METHODS:
            raise InvalidArgument(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.M < 1:
            raise InvalidArgument(f"M must be >= 1, got {self.M}")
        if self.n_max < 0 or self.test_size < 1 or self.refinement < 1:
            raise InvalidArgument("n_max >= 0, test_size >= 1 and refinement >= 1 are required")
        if self.train_seed == self.test_seed:
            raise InvalidArgument("test seed must differ from the training seed")
        if self.greedy_weight not in ("sqrt", "density"):
            raise InvalidArgument(f"greedy_weight must be sqrt or density, got {self.greedy_weight!r}")
        if self.estimator not in (None, "residual", "exact"):
            raise InvalidArgument(f"estimator must be residual or exact, got {self.estimator!r}")
        if self.estimator == "residual" and self.equation != STOKES:
            raise InvalidArgument("the residual estimator is only available for Stokes")
        # validates ranges/shapes
        ParameterBox(tuple(self.ranges), tuple(self.shapes))

    @property
    def box(self) -> ParameterBox:
        return ParameterBox(tuple(self.ranges), tuple(self.shapes))

    @property
    def estimator_mode(self) -> str:
        if self.estimator is not None:
            return self.estimator
        return "residual" if self.equation == STOKES else "exact"

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        d["ranges"] = [list(r) for r in self.ranges]
        d["shapes"] = [list(s) for s in self.shapes]
        return d

    def hash(self) -> str:
        """Short digest of the semantic content (independent of file layout)."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def with_(self, **changes) -> "StudyConfig":
        return replace(self, **changes)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise InvalidArgument(f"not a boolean: {text!r}")


def _optional(conv):
    def f(text):
        return None if text.strip().lower() in ("", "none", "auto") else conv(text)
    return f


_CONVERT = {
    "equation": str, "method": str, "m": int, "n_max": int, "test_size": int,
    "train_seed": int, "test_seed": int, "refinement": int, "nu": float,
    "supremizers": _bool, "greedy_tol": float, "greedy_weight": str,
    "estimator": _optional(str), "tensor_order": _optional(int),
    "smolyak_level": _optional(int), "pod_tol": _optional(float),
}


def parse_config(text: str, source: str | None = None) -> StudyConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise InvalidArgument(f"malformed configuration: {exc}") from exc

    kwargs = {}
    if cp.has_section("study"):
        for key, raw in cp.items("study"):
            k = key.lower()
            if k not in _STUDY_KEYS:
                raise InvalidArgument(f"unknown study key {key!r}")
            try:
                kwargs["M" if k == "m" else k] = _CONVERT[k](raw)
            except ValueError as exc:
                raise InvalidArgument(f"bad value for {key}: {raw!r}") from exc

    ranges = [list(r) for r in DEFAULT_RANGES]
    shapes = [[75.0, 75.0] for _ in PARAMETER_NAMES]
    if cp.has_section("distribution"):
        sec = cp["distribution"]
        for s in shapes:
            s[0] = float(sec.get("alpha", s[0]))
            s[1] = float(sec.get("beta", s[1]))
    for j, name in enumerate(PARAMETER_NAMES):
        if not cp.has_section(name):
            continue
        sec = cp[name]
        unknown = set(k.lower() for k in sec) - {"lo", "hi", "alpha", "beta"}
        if unknown:
            raise InvalidArgument(f"unknown keys {sorted(unknown)} in [{name}]")
        ranges[j] = [float(sec.get("lo", ranges[j][0])), float(sec.get("hi", ranges[j][1]))]
        shapes[j] = [float(sec.get("alpha", shapes[j][0])), float(sec.get("beta", shapes[j][1]))]
    extra = set(cp.sections()) - {"study", "distribution", *PARAMETER_NAMES}
    if extra:
        raise InvalidArgument(f"unknown sections {sorted(extra)}")
    return StudyConfig(ranges=tuple(map(tuple, ranges)), shapes=tuple(map(tuple, shapes)),
                       source=source, **kwargs)


def load_config(path) -> StudyConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidArgument(f"cannot read configuration {path}: {exc}") from exc
    return parse_config(text, str(path))


def format_config(cfg: StudyConfig) -> str:
    """Render a configuration back to the file format (round-trips through parse_config)."""
    lines = ["[study]"]
    d = cfg.to_dict()
    for key in ("equation", "method", "M", "n_max", "test_size", "train_seed", "test_seed",
                "refinement", "nu", "supremizers", "greedy_tol", "greedy_weight",
                "estimator", "tensor_order", "smolyak_level", "pod_tol"):
        v = d[key]
        lines.append(f"{key} = {'auto' if v is None else repr(v) if isinstance(v, float) else v}")
    for name, (lo, hi), (a, b) in zip(PARAMETER_NAMES, cfg.ranges, cfg.shapes):
        lines += ["", f"[{name}]", f"lo = {lo!r}", f"hi = {hi!r}", f"alpha = {a!r}", f"beta = {b!r}"]
    return "\n".join(lines) + "\n"
