"""Command-line entry point.

::

    wrom offline CONFIG [--runs DIR]
    wrom study CONFIG --model MODEL_DIR [--runs DIR]
    wrom grid-dump CONFIG [--output FILE]
    wrom compare CONFIG_A CONFIG_B [--runs DIR]

Every invocation writes into a fresh run directory ``<runs>/<timestamp>-<config
hash>`` (``compare`` uses the hash of both configurations).  The number of
threads used for truth solves is taken from ``WROM_THREADS`` when set.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from ..errors import InvalidArgument, NumericalFailure
from ..rom import load_reduced_model
from .config import load_config
from .offline import get_model, run_offline, solve_all, training_set
from .study import (
    COLUMNS,
    json_default,
    draw_test_set,
    run_error_study,
    svg_plot,
    write_csv,
    write_metadata,
    write_svg,
)

log = logging.getLogger("wrom")

def run_directory(root, tag: str) -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    path = Path(root) / f"{stamp}-{tag}"
    path.mkdir(parents=True, exist_ok=False)
    return path

def _offline(args) -> int:
    cfg = load_config(args.config)
    run = run_directory(args.runs, cfg.hash())
    res = run_offline(cfg, run / "model")
    print(f"model: {res.path}  (training points {len(res.training)}, basis size "
          f"{res.reduced.size})")
    return 0

def _study(args) -> int:
    cfg = load_config(args.config)
    rm = load_reduced_model(args.model)
    man = json.loads((Path(args.model) / "manifest.json").read_text())
    built_with = man.get("meta", {}).get("config_hash")
    if built_with and built_with != cfg.hash():
        log.warning("model was built from config %s, studying with %s", built_with, cfg.hash())
    run = run_directory(args.runs, cfg.hash())
    table = run_error_study(rm, cfg)
    table.meta["model_dir"] = str(Path(args.model).resolve())
    write_csv(table, run / "errors.csv")
    write_svg(table, run / "errors.svg")
    write_metadata(table, run / "errors.json")
    _print_table(table)
    print(f"results: {run}")
    return 0

def _grid_dump(args) -> int:
    cfg = load_config(args.config)
    train = training_set(cfg)
    out = Path(args.output) if args.output else run_directory(args.runs, cfg.hash()) / "grid.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["w"] + [f"y{j + 1}" for j in range(train.points.shape[1])])
        for wt, y in zip(train.weights, train.points):
            w.writerow([repr(float(wt))] + [repr(float(v)) for v in y])
    print(f"{len(train)} {train.strategy} points written to {out}")
    return 0

def _compare(args) -> int:
    cfg_a, cfg_b = load_config(args.config_a), load_config(args.config_b)
    if (cfg_a.equation, cfg_a.refinement, cfg_a.nu) != (cfg_b.equation, cfg_b.refinement, cfg_b.nu):
        raise InvalidArgument("compared configurations must share equation, mesh and viscosity")
    tag = hashlib.sha256((cfg_a.hash() + cfg_b.hash()).encode()).hexdigest()[:12]
    run = run_directory(args.runs, tag)
    model = get_model(cfg_a.refinement, cfg_a.equation, cfg_a.nu)
    # paired comparison: one test set (from A) and one set of truth solves
    pts = draw_test_set(cfg_a).points
    truths = solve_all(model, pts, cfg_a.equation, abort=False)
    tables = []
    for name, cfg in (("A", cfg_a), ("B", cfg_b)):
        res = run_offline(cfg, run / f"model_{name}")
        t = run_error_study(res.reduced, cfg, model, pts, truths)
        t.meta["test_set_from"] = "A"
        write_csv(t, run / f"errors_{name}.csv")
        write_metadata(t, run / f"errors_{name}.json")
        tables.append(t)
    a, b = tables
    common = sorted(set(a.N) & set(b.N))
    with open(run / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N"] + [f"{c}_{s}" for c in COLUMNS[1:-1] for s in ("A", "B")])
        for n in common:
            ra, rb = a.row(n), b.row(n)
            w.writerow([n] + [repr(r[c]) for c in COLUMNS[1:-1] for r in (ra, rb)])
    series = {}
    for label, t, cfg in (("A", a, cfg_a), ("B", b, cfg_b)):
        series[f"{label} {cfg.method} abs"] = (t.N, t.absolute)
        series[f"{label} {cfg.method} rel"] = (t.N, t.relative)
    (run / "comparison.svg").write_text(
        svg_plot(series, "paired comparison", f"configs {cfg_a.hash()} vs {cfg_b.hash()}"))
    (run / "comparison.json").write_text(json.dumps(
        {"A": cfg_a.to_dict(), "B": cfg_b.to_dict(), "test_seed": cfg_a.test_seed},
        indent=2, sort_keys=True, default=json_default))
    print(f"{'N':>3} {'absolute A':>12} {'absolute B':>12}  lower")
    for n in common:
        ea, eb = a.row(n)["absolute"], b.row(n)["absolute"]
        lower = "A" if ea < eb else "B" if eb < ea else "="
        print(f"{n:>3} {ea:12.4e} {eb:12.4e}  {lower}")
    print(f"results: {run}")
    return 0

def _print_table(table) -> None:
    print(f"{'N':>3} {'absolute':>12} {'abs max':>12} {'relative':>12} {'rel max':>12}")
    for i in range(len(table)):
        print(f"{table.N[i]:>3} {table.absolute[i]:12.4e} {table.absolute_max[i]:12.4e} "
              f"{table.relative[i]:12.4e} {table.relative_max[i]:12.4e}")

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wrom", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--runs", default="runs", help="root directory for run outputs")
        return sp

    sp = add("offline", _offline, "build and persist a reduced model")
    sp.add_argument("config")
    sp = add("study", _study, "error study of a persisted reduced model")
    sp.add_argument("config")
    sp.add_argument("--model", required=True, help="directory written by 'offline'")
    sp = add("grid-dump", _grid_dump, "write the training set as w,y1..y5 CSV")
    sp.add_argument("config")
    sp.add_argument("--output", help="CSV path (default: inside a new run directory)")
    sp = add("compare", _compare, "paired offline+study comparison of two configurations")
    sp.add_argument("config_a")
    sp.add_argument("config_b")
    return p

def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidArgument, NumericalFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        details = getattr(exc, "details", None)
        if details:
            print(json.dumps(details, default=json_default), file=sys.stderr)
        return 2

if __name__ == "__main__":
    sys.exit(main())
