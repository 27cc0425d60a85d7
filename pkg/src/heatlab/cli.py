"""Command-line driver: ``heatlab <subcommand> [--config PATH] [--seed U64] [--out DIR] ...``.

Exit codes: 0 all asserted tolerances pass, 2 usage or config error,
3 numeric failure, 4 resource exhaustion.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import inspect
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import experiments as ex
from .baseline import MissingBaseline, dump_json, freeze_baseline, load_baseline
from .fd_domains import HorizonExhausted
from .rng import DEFAULT_SEED

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4
SUBCOMMANDS = ("lp-verify", "besov-suite", "maxreg", "halfspace", "decay", "exterior", "absorb",
               "nonlinear", "threshold", "accept-all")

THRESHOLD_DEFAULTS = {"nonlinearity": "zero", "transport": "burgers", "nu": 1.0, "T": 100.0, "shape": "sine",
                      "N": 32, "M": 64, "a0": 16.0, "budget": 24, "rel_width": 0.05, "dt": 0.05}


class ConfigError(ValueError):
    pass


def _sections() -> dict:
    """Config section name -> parameter defaults of the matching experiment."""
    out = {}
    for f in ex.CRITERIA.values():
        params = inspect.signature(f.__wrapped__).parameters
        out[f.__name__] = {k: p.default for k, p in params.items() if k not in ("res", "seed", "baseline")}
    out["threshold"] = dict(THRESHOLD_DEFAULTS)
    out["run"] = {"seed": DEFAULT_SEED, "jobs": 1}
    return out


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and line.split("=", 1)[0].split(":", 1)[0].strip().lower() == key.lower():
            return i
    return None


def _coerce(value: str, default):
    if isinstance(default, bool):
        low = value.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError("expected a boolean")
        return low in ("true", "1", "yes")
    if isinstance(default, int):
        return int(value, 0)
    if isinstance(default, float):
        return float(value)
    return value


def load_config(path) -> dict:
    """Parse a flat key = value file with section headers into typed overrides."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    known = _sections()
    out = {}
    for sec in parser.sections():
        if sec not in known:
            raise ConfigError(f"{path}: unknown section [{sec}] (known: {', '.join(sorted(known))})")
        for key, raw in parser.items(sec):
            line = _line_of(text, sec, key)
            where = f"{path}:{line}" if line else str(path)
            if key not in known[sec]:
                raise ConfigError(f"{where}: [{sec}] unknown field {key!r} (known: {', '.join(sorted(known[sec]))})")
            try:
                out.setdefault(sec, {})[key] = _coerce(raw.strip(), known[sec][key])
            except ValueError as exc:
                kind = type(known[sec][key]).__name__
                raise ConfigError(f"{where}: [{sec}] {key} = {raw!r}: expected {kind} ({exc})") from None
    return out


def config_hash(config: dict, seed: int) -> str:
    blob = json.dumps({"config": config, "seed": seed}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def run_criteria(numbers, config: dict, seed: int, baseline) -> list:
    out = []
    for n in numbers:
        f = ex.CRITERIA[n]
        out.append(f(seed=seed, baseline=baseline, **config.get(f.__name__, {})))
    return out


def _group(args):
    numbers, config, seed, baseline = args
    return run_criteria(numbers, config, seed, baseline)


def _result_json(r: ex.CriterionResult) -> dict:
    return {"number": r.number, "title": r.title, "subcommand": r.subcommand, "passed": r.passed,
            "wall_time": r.wall, "notes": r.notes,
            "claims": [{"label": c.label, "value": None if math.isnan(c.value) else c.value,
                        "tol": c.tol, "passed": c.passed} for c in r.claims]}


def emit(results, out: Path, manifest: dict):
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        d = out / f"criterion_{r.number:02d}"
        d.mkdir(exist_ok=True)
        for name, (header, rows) in r.tables.items():
            write_csv(d / f"{name}.csv", header, rows)
    # wall time stays in summary.json so CSV bodies replay byte for byte
    rows = [(r.number, r.title, c.label, c.value, c.tol, c.passed) for r in results for c in r.claims
            if c.label != ex.WALL_LABEL]
    write_csv(out / "summary.csv", ("criterion", "title", "claim", "value", "tol", "passed"), rows)
    dump_json({"results": [_result_json(r) for r in results]}, out / "summary.json")
    dump_json(manifest, out / "manifest.json")


def print_table(results, stream=None):
    stream = stream or sys.stdout
    for r in results:
        for line in r.lines():
            print(line, file=stream)
        for note in r.notes:
            print(f"     note: {note}", file=stream)
    print(f"{'#':>3}  {'criterion':<42} {'result':<6} {'wall[s]':>8}", file=stream)
    for r in results:
        print(f"{r.number:>3}  {r.title:<42} {'pass' if r.passed else 'FAIL':<6} {r.wall:>8.2f}", file=stream)


def _shape(name: str, N: int):
    from .spectral import Field, Grid

    g = Grid(1, N, 2 * math.pi)
    if name == "sine":
        return Field.from_function(g, np.sin)
    if name == "cosine":
        return Field.from_function(g, np.cos)
    if name == "constant":
        return Field(g, np.ones(g.shape))
    raise ConfigError(f"[threshold] shape = {name!r}: expected sine, cosine or constant")


def run_threshold(config: dict, seed: int, jobs: int, out: Path, manifest: dict) -> int:
    from .nonlinear import NonlinearSpec, Transport, threshold_search
    from .nonlinearities import Nonlinearity

    p = dict(THRESHOLD_DEFAULTS, **config.get("threshold", {}))
    families = {"zero": Nonlinearity.zero, "square": Nonlinearity.square, "flame": Nonlinearity.flame,
                "power": Nonlinearity.power}
    transports = {"zero": Transport.zero, "burgers": Transport.burgers}
    if p["nonlinearity"] not in families:
        raise ConfigError(f"[threshold] nonlinearity = {p['nonlinearity']!r}: expected one of {sorted(families)}")
    if p["transport"] not in transports:
        raise ConfigError(f"[threshold] transport = {p['transport']!r}: expected one of {sorted(transports)}")
    spec = NonlinearSpec(families[p["nonlinearity"]](), transports[p["transport"]](), nu=p["nu"])
    r = threshold_search(spec, _shape(p["shape"], p["N"]), T=p["T"], budget=p["budget"], a0=p["a0"],
                         rel_width=p["rel_width"], seed=seed, M=p["M"], dt=p["dt"], jobs=jobs)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "threshold_probes.csv", ("amplitude", "success"), r.probes)
    summary = {"lo": r.lo, "hi": r.hi, "width": r.width, "linear_envelope": r.linear_envelope, "note": r.note,
               "params": p}
    dump_json(summary, out / "threshold.json")
    dump_json(manifest, out / "manifest.json")
    print(f"threshold bracket [{r.lo:.6g}, {r.hi:.6g}] width {100 * r.width:.2f}% {r.note}")
    if r.note.startswith("budget exhausted"):
        return EXIT_RESOURCE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heatlab", description="Heat-flow estimate harness")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="key = value file with [section] headers")
    ap.add_argument("--seed", type=lambda s: int(s, 0), help="64-bit master seed")
    ap.add_argument("--out", type=Path, default=Path("heatlab_out"), help="report directory")
    ap.add_argument("--jobs", type=int, help="worker processes")
    ap.add_argument("--baseline", type=Path, help="frozen envelope file (default: packaged)")
    ap.add_argument("--freeze", type=Path, metavar="PATH",
                    help="write measured envelopes to PATH instead of comparing")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else {}
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = config.get("run", {})
    seed = args.seed if args.seed is not None else run.get("seed", DEFAULT_SEED)
    if not 0 <= seed < 2**64:
        print("config error: seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    jobs = args.jobs or run.get("jobs", 1)
    manifest = {"subcommand": args.subcommand, "config_hash": config_hash(config, seed), "seed": seed,
                "versions": {"heatlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                             "python": platform.python_version()}}
    t0 = time.perf_counter()
    try:
        if args.subcommand == "threshold":
            return run_threshold(config, seed, jobs, args.out, manifest)
        baseline = None
        if args.freeze is None:
            try:
                baseline = load_baseline(args.baseline)
            except MissingBaseline as exc:
                print(f"baseline error: {exc}", file=sys.stderr)
                return EXIT_NUMERIC
        subs = [s for s in ex.SUBCOMMANDS if ex.SUBCOMMANDS[s]] if args.subcommand == "accept-all" \
            else [args.subcommand]
        groups = [ex.SUBCOMMANDS[s] for s in subs]
        if jobs > 1 and len(groups) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                parts = list(pool.map(_group, [(g, config, seed, baseline) for g in groups]))
        else:
            parts = [run_criteria(g, config, seed, baseline) for g in groups]
        results = sorted((r for part in parts for r in part), key=lambda r: r.number)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MemoryError, HorizonExhausted) as exc:
        print(f"resource exhausted: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    manifest["wall_time"] = time.perf_counter() - t0
    emit(results, args.out, manifest)
    print_table(results)
    if args.freeze is not None:
        measured = {k: v for r in results for k, v in r.measured.items()}
        freeze_baseline(measured, args.freeze)
        print(f"froze {', '.join(sorted(measured)) or 'nothing'} into {args.freeze}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
