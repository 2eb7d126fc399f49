"""Online error studies, error tables and their CSV/SVG renderings.

For a test set y_1..y_K drawn from the configured law, each row N reports

* absolute error     mean_i |u(y_i) - u_N(y_i)|
* absolute maximum   max_i  |u(y_i) - u_N(y_i)|
* relative error     mean_i |u(y_i) - u_N(y_i)| / |u(y_i)|
* relative maximum   max_i  |u(y_i) - u_N(y_i)| / |u(y_i)|

with |.| the velocity H^1 seminorm on the reference domain.  The relative
error formula is sometimes written with the sum over samples only in the
numerator; it is read here as the mean of per-sample ratios, and the
ratio-of-means variant sum_i |u - u_N| / sum_i |u| is emitted as an extra
column for comparison.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..errors import InvalidArgument, NumericalFailure
from ..fom.model import AffineModel, seminorm
from ..probability import sample
from ..rom import ReducedModel, online_solve, reconstruct
from .config import StudyConfig
from .offline import get_model, solve_all

log = logging.getLogger(__name__)

COLUMNS = ("N", "absolute", "absolute_max", "relative", "relative_max",
           "relative_ratio_of_means", "failures")
CURVES = ("absolute", "absolute_max", "relative", "relative_max")


@dataclass
class ErrorTable:
    """Error statistics indexed by basis size N."""

    N: np.ndarray
    absolute: np.ndarray
    absolute_max: np.ndarray
    relative: np.ndarray
    relative_max: np.ndarray
    relative_ratio_of_means: np.ndarray
    failures: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.N = np.asarray(self.N, dtype=int)
        for name in COLUMNS[1:-1]:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.failures = np.asarray(self.failures, dtype=int)
        lengths = {len(getattr(self, c)) for c in COLUMNS}
        if len(lengths) != 1:
            raise InvalidArgument(f"error table columns have different lengths {sorted(lengths)}")

    def __len__(self) -> int:
        return len(self.N)

    def row(self, n: int) -> dict:
        idx = np.flatnonzero(self.N == n)
        if len(idx) == 0:
            raise InvalidArgument(f"no row for N={n}")
        return {c: getattr(self, c)[idx[0]].item() for c in COLUMNS}

    def check(self) -> None:
        """Raise if a row violates mean <= max or has negative entries."""
        for c in COLUMNS[1:-1]:
            v = getattr(self, c)
            if np.any(v[np.isfinite(v)] < 0.0):
                raise InvalidArgument(f"negative entry in column {c}")
        ok = np.isnan(self.absolute) | (self.absolute <= self.absolute_max)
        ok &= np.isnan(self.relative) | (self.relative <= self.relative_max)
        if not np.all(ok):
            raise InvalidArgument("mean error exceeds maximum error in some row")


def error_statistics(errors: np.ndarray, norms: np.ndarray) -> tuple:
    """(absolute, absolute_max, relative, relative_max, ratio_of_means) over finite samples."""
    ok = np.isfinite(errors)
    if not np.any(ok):
        return (math.nan,) * 5
    e, n = errors[ok], norms[ok]
    rel = e / n
    return (float(e.mean()), float(e.max()), float(rel.mean()), float(rel.max()),
            float(e.sum() / n.sum()))


def draw_test_set(cfg: StudyConfig):
    """The configured random test set (always drawn from the Beta law)."""
    return sample(cfg.box, cfg.test_seed, cfg.test_size, law="beta")


def run_error_study(rm: ReducedModel, cfg: StudyConfig, model: AffineModel | None = None,
                    test_points=None, test_truths=None, n_values=None,
                    threads: int | None = None) -> ErrorTable:
    """Online error sweep of ``rm`` over the test set of ``cfg``.

    Truth solutions may be passed in (``test_truths``) to share them between
    paired studies.  A failed truth solve removes that sample from every row;
    a failed online solve removes it from that row only; both are counted in
    the ``failures`` column and listed in the metadata.
    """
    t0 = time.perf_counter()
    kind = cfg.equation
    model = model or get_model(cfg.refinement, kind, cfg.nu)
    if rm.meta.get("mesh_hash") not in (None, model.hash):
        raise InvalidArgument("reduced model was built on a different mesh than the study")
    if test_points is None:
        test_points = draw_test_set(cfg).points
    test_points = np.asarray(test_points, dtype=float)
    if test_truths is None:
        test_truths = solve_all(model, test_points, kind, threads, abort=False)
    if len(test_truths) != len(test_points):
        raise InvalidArgument("one truth solution per test parameter is required")
    t_truth = time.perf_counter() - t0

    if n_values is None:
        n_values = range(0, min(cfg.n_max, rm.size) + 1)
    n_values = [int(n) for n in n_values]
    if n_values and max(n_values) > rm.size:
        raise InvalidArgument(f"N sweep up to {max(n_values)} exceeds basis size {rm.size}")

    norms = np.array([seminorm(model, t.velocity) if t is not None else math.nan
                      for t in test_truths])
    truth_failed = [i for i, t in enumerate(test_truths) if t is None]
    rows, failures, flagged = [], [], []
    t1 = time.perf_counter()
    for n in n_values:
        errs = np.full(len(test_points), math.nan)
        bad = len(truth_failed)
        for i, (y, truth) in enumerate(zip(test_points, test_truths)):
            if truth is None:
                continue
            try:
                sol = online_solve(rm, y, n, kind)
            except NumericalFailure as exc:
                bad += 1
                flagged.append({"N": n, "y": y.tolist(), "error": str(exc)})
                continue
            u, _ = reconstruct(sol, rm)
            errs[i] = seminorm(model, u - truth.velocity)
        rows.append(error_statistics(errs, norms))
        failures.append(bad)
    t_online = time.perf_counter() - t1

    cols = np.array(rows, dtype=float).reshape(len(n_values), 5)
    table = ErrorTable(np.array(n_values), *cols.T, np.array(failures))
    table.meta = {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "method": cfg.method,
        "equation": kind,
        "mesh_hash": model.hash,
        "refinement": cfg.refinement,
        "test_seed": cfg.test_seed,
        "train_seed": cfg.train_seed,
        "test_size": len(test_points),
        "basis_size": rm.size,
        "training_cardinality": rm.meta.get("training_cardinality"),
        "truth_failures": [test_points[i].tolist() for i in truth_failed],
        "online_failures": flagged,
        "wall_times": {"test_truth_solves": t_truth, "online_sweep": t_online},
    }
    table.check()
    return table


# emission -------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(table: ErrorTable, path) -> Path:
    """Header row plus one row per N; floats in shortest round-trip form."""
    if len(table) == 0:
        raise InvalidArgument("cannot emit an empty error table")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for i in range(len(table)):
            w.writerow([_fmt(getattr(table, c)[i]) for c in COLUMNS])
    return path


def read_csv(path) -> ErrorTable:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise InvalidArgument(f"{path}: not an error-table CSV")
    data = list(zip(*rows[1:])) if len(rows) > 1 else [()] * len(COLUMNS)
    cols = {c: [int(v) if c in ("N", "failures") else float(v) for v in col]
            for c, col in zip(COLUMNS, data)}
    return ErrorTable(**cols)


def write_metadata(table: ErrorTable, path) -> Path:
    """JSON sidecar with the config echo, seeds, cardinalities and wall times."""
    path = Path(path)
    path.write_text(json.dumps(table.meta, indent=2, sort_keys=True, default=json_default))
    return path


def json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f")


def svg_plot(series: dict, title: str, caption: str = "", width: int = 640,
             height: int = 420) -> str:
    """Log-y line plot of ``{label: (x, y)}`` as an SVG document.

    Non-positive or non-finite values are left out of the polylines.
    """
    left, right, top, bottom = 70, 170, 40, 70
    pw, ph = width - left - right, height - top - bottom
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    pos = ys[np.isfinite(ys) & (ys > 0)]
    if len(xs) == 0:
        raise InvalidArgument("nothing to plot")
    x0, x1 = float(xs.min()), float(xs.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if len(pos):
        l0, l1 = math.floor(math.log10(pos.min())), math.ceil(math.log10(pos.max()))
    else:
        l0, l1 = -1, 0
    if l1 == l0:
        l1 = l0 + 1

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(v):
        return top + (l1 - math.log10(v)) / (l1 - l0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{left + pw / 2:.1f}" y="20" text-anchor="middle" font-size="13">'
           f'{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    step = max(1, (l1 - l0 + 7) // 8)
    for e in range(l0, l1 + 1, step):
        y = py(10.0 ** e)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" '
                   f'stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
    xticks = np.unique(np.round(np.linspace(x0, x1, min(11, int(x1 - x0) + 1))))
    for xt in xticks:
        x = px(xt)
        out.append(f'<text x="{x:.2f}" y="{top + ph + 16}" text-anchor="middle">{int(xt)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{top + ph + 34}" text-anchor="middle">'
               f'N (basis size)</text>')
    for k, (label, (x, y)) in enumerate(series.items()):
        x, y = np.asarray(x, float), np.asarray(y, float)
        keep = np.isfinite(y) & (y > 0)
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(a):.3f},{py(b):.3f}" for a, b in zip(x[keep], y[keep]))
        out.append(f'<polyline data-label="{escape(label)}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 + 16 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly}">{escape(label)}</text>')
    if caption:
        out.append(f'<text x="{left}" y="{height - 12}" font-size="10">{escape(caption)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _caption(meta: dict) -> str:
    cfg = meta.get("config", {})
    if not meta:
        return ""
    shapes = cfg.get("shapes") or [["?", "?"]]
    a, b = shapes[0]
    return (f"{meta.get('equation', '')}, {meta.get('method', '')}, Beta({a},{b}), "
            f"M={meta.get('training_cardinality')}, test={meta.get('test_size')}, "
            f"refinement={meta.get('refinement')}, config {meta.get('config_hash', '')}")


def write_svg(table: ErrorTable, path) -> Path:
    if len(table) == 0:
        raise InvalidArgument("cannot emit an empty error table")
    series = {c.replace("_", " "): (table.N, getattr(table, c)) for c in CURVES}
    path = Path(path)
    path.write_text(svg_plot(series, "velocity H1-seminorm error", _caption(table.meta)))
    return path


def emit(table: ErrorTable, fmt: str, path) -> Path:
    """Write ``table`` as ``csv`` or ``svg``."""
    if fmt == "csv":
        return write_csv(table, path)
    if fmt == "svg":
        return write_svg(table, path)
    raise InvalidArgument(f"unknown output format {fmt!r}")
