"""Command-line front end: ``repphase synth | estimate | separate | bench``.

Settings are resolved as command-line flags, then a ``--config`` file, then
built-in defaults.  The config file holds one ``key = value`` pair per line
(``#`` starts a comment); keys are the long flag names with dashes or
underscores, e.g. ``sigma = 0.5`` or ``num-partials = 6``.  The default output
directory is ``$REPPHASE_OUT_DIR`` when set, else ``./repphase-out``.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from repphase.estimation import cost_trace_csv
from repphase.items import (
    ModelItem,
    list_items,
    load_item,
    write_mixture,
    write_model_item,
)
from repphase.metrics import onset_estimation_error
from repphase.model import save_params
from repphase.pipeline import estimate_sources, separate
from repphase.stft import DEFAULT_HOP, DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW_LENGTH, \
    InvalidInputError, StftConfig, write_wav
from repphase.synth import make_dataset_mixture, make_model_built

logger = logging.getLogger("repphase")

OUT_DIR_ENV = "REPPHASE_OUT_DIR"
DEFAULT_SIGMAS = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0)
DEFAULT_METHODS = ("strict", "relaxed", "wiener")

DEFAULTS = {
    "dataset": "A",
    "count": 30,
    "seed": 0,
    "sample_rate": DEFAULT_SAMPLE_RATE,
    "window_length": DEFAULT_WINDOW_LENGTH,
    "hop": DEFAULT_HOP,
    "num_partials": 4,
    "num_bins": 64,
    "num_onsets": 3,
    "num_sources": 2,
    "method": None,
    "sigma": 0.2,
    "iterations": 100,
    "onsets": "truth",
    "sigmas": ",".join(str(s) for s in DEFAULT_SIGMAS),
    "methods": ",".join(DEFAULT_METHODS),
    "jobs": 1,
}

INT_KEYS = {"count", "seed", "window_length", "hop", "num_partials", "num_bins",
            "num_onsets", "num_sources", "iterations", "jobs", "sources"}
FLOAT_KEYS = {"sample_rate", "sigma"}


def read_config(path) -> dict:
    """Parse a ``key = value`` config file into a dict with typed values."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS and key != "out":
            raise InvalidInputError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def _coerce(key, value):
    if key in INT_KEYS:
        return int(value)
    if key in FLOAT_KEYS:
        return float(value)
    return value


def resolve_settings(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file, then from the defaults."""
    from_file = read_config(args.config) if getattr(args, "config", None) else {}
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, from_file.get(key, default))
    if getattr(args, "out", None) is None:
        args.out = from_file.get("out") or os.environ.get(OUT_DIR_ENV) or "repphase-out"
    return args


def _float_list(text) -> list[float]:
    values = [float(v) for v in str(text).split(",") if v.strip()]
    if not values or any(v < 0 for v in values):
        raise InvalidInputError(f"invalid sigma list {text!r}")
    return values


def _method_list(text) -> list[str]:
    methods = [m.strip() for m in str(text).split(",") if m.strip()]
    bad = [m for m in methods if m not in DEFAULT_METHODS]
    if not methods or bad:
        raise InvalidInputError(f"invalid method list {text!r}")
    return methods


def _expand_items(paths) -> list[Path]:
    out = []
    for p in map(Path, paths):
        out.extend(list_items(p) if p.is_dir() else [p])
    if not out:
        raise InvalidInputError("no input items found")
    return out


def _write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())


# ---- synth ------------------------------------------------------------------

def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for i in range(args.count):
        seed = args.seed + i
        stem = f"{args.dataset}_{i:03d}"
        if args.dataset == "model":
            onset, truth, Y_k = make_model_built(args.num_sources, args.num_bins, args.num_onsets, seed)
            write_model_item(out / f"{stem}.npz", onset, truth, Y_k)
        else:
            config = StftConfig(window_length=args.window_length, hop=args.hop,
                                sample_rate=args.sample_rate)
            mix = make_dataset_mixture(args.dataset, seed, config, num_partials=args.num_partials)
            write_mixture(mix, out, stem)
        written += 1
    print(f"wrote {written} {args.dataset} items to {out}")
    return 0


# ---- estimate ---------------------------------------------------------------

def _problem(item, onsets):
    if isinstance(item, ModelItem):
        if onsets != "truth":
            raise InvalidInputError(f"{item.path}: model-built items only support --onsets truth")
        return item.onset_problem()
    return item.with_onsets(onsets).onset_problem()


def cmd_estimate(args) -> int:
    if args.method == "strict" and args.sigma_given:
        logger.warning("--sigma is ignored by the strict method")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in _expand_items(args.items):
        prob = _problem(load_item(path), args.onsets)
        Y_hat_k, result = estimate_sources(prob.onset, prob.A, args.method, args.sigma,
                                           args.iterations, prob.real_signal)
        Y_wiener, _ = estimate_sources(prob.onset, prob.A, "wiener")
        stem = out / f"{prob.name}.{args.method}"
        save_params(f"{stem}.params", result.params)
        Path(f"{stem}.cost.csv").write_text(cost_trace_csv(result.costs))
        sigma = args.sigma if args.method == "relaxed" else ""
        _write_csv(f"{stem}.error.csv",
                   ["item", "method", "sigma", "onset_error", "wiener_error"],
                   [[prob.name, args.method, sigma,
                     onset_estimation_error(prob.Y_k, Y_hat_k),
                     onset_estimation_error(prob.Y_k, Y_wiener)]])
        print(f"{prob.name}: final cost {result.costs[-1]:.6g}")
    return 0


# ---- separate ---------------------------------------------------------------

def cmd_separate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in _expand_items(args.items):
        item = load_item(path)
        if isinstance(item, ModelItem):
            raise InvalidInputError(f"{path}: separation needs a mixture item, not model-built data")
        if args.sources is not None and args.sources != item.num_sources:
            raise InvalidInputError(
                f"{path}: {args.sources} sources requested but the truth has {item.num_sources}")
        item = item.with_onsets(args.onsets)
        signals, scores = separate(item.truth, args.method, args.sigma, args.iterations)
        rate = int(item.truth.config.sample_rate)
        for k, s in enumerate(signals):
            write_wav(out / f"{item.name}.{args.method}.src{k}.wav", s, rate)
        _write_csv(out / f"{item.name}.{args.method}.scores.csv",
                   ["dataset", "method", "source", "sdr", "sir", "sar"],
                   [[item.dataset, args.method, k, sdr, sir, sar]
                    for k, sdr, sir, sar in scores.rows()])
        sdr, sir, sar = scores.mean
        print(f"{item.name}: SDR {sdr:.2f} SIR {sir:.2f} SAR {sar:.2f} dB")
    return 0


# ---- bench ------------------------------------------------------------------

def bench_item(path, methods, sigmas, iterations, onsets="truth") -> dict:
    """Onset errors of one item, keyed by ``(method, sigma)``; sigma is None for strict/wiener."""
    prob = _problem(load_item(path), onsets)
    errors = {}
    for method in methods:
        for sigma in (sigmas if method == "relaxed" else [None]):
            Y_hat_k, _ = estimate_sources(prob.onset, prob.A, method,
                                          0.0 if sigma is None else sigma,
                                          iterations, prob.real_signal)
            errors[(method, sigma)] = onset_estimation_error(prob.Y_k, Y_hat_k)
    return errors


def bench_rows(per_item: list[dict], methods, sigmas) -> list[list]:
    """One row per method and sigma; sigma-free methods repeat their value on every sigma."""
    rows = []
    n = len(per_item)
    for method in methods:
        for sigma in sigmas:
            key = (method, sigma if method == "relaxed" else None)
            mean = float(np.mean([e[key] for e in per_item]))
            rows.append([method, sigma, mean, n])
    return rows


def cmd_bench(args) -> int:
    paths = list_items(args.directory)
    if not paths:
        raise InvalidInputError(f"{args.directory} contains no items")
    sigmas = _float_list(args.sigmas)
    methods = _method_list(args.methods)
    jobs = max(1, int(args.jobs))
    work = [(p, methods, sigmas, args.iterations, args.onsets) for p in paths]
    if jobs == 1:
        per_item = [bench_item(*w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_item = list(pool.map(bench_item, *zip(*work)))
    out = Path(args.out)
    target = out if out.suffix == ".csv" else out / "bench.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(target, ["method", "sigma", "mean_onset_error", "num_items"],
               bench_rows(per_item, methods, sigmas))
    print(f"wrote {target}")
    return 0


# ---- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repphase",
                                     description="Onset phase estimation from phase repetitions.")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--out", help=f"output location (default ${OUT_DIR_ENV} or ./repphase-out)")

    def estimation_flags(p):
        p.add_argument("--sigma", type=float)
        p.add_argument("--iters", dest="iterations", type=int)
        p.add_argument("--onsets", help="'truth' (sidecar), 'auto' (detection) or a frame-list file")

    p = sub.add_parser("synth", help="generate synthetic items")
    common(p)
    p.add_argument("--dataset", choices=["A", "B", "C", "model"])
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--num-partials", type=int)
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--window-length", type=int)
    p.add_argument("--hop", type=int)
    p.add_argument("--num-bins", type=int, help="model-built items: number of bins F")
    p.add_argument("--num-onsets", type=int, help="model-built items: number of onsets M")
    p.add_argument("--num-sources", type=int, help="model-built items: number of sources K")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="estimate onset phases with oracle magnitudes")
    common(p)
    p.add_argument("items", nargs="+", help="item files (.wav with sidecar, .npz) or directories")
    p.add_argument("--method", choices=["strict", "relaxed"], required=True)
    estimation_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("separate", help="separate mixtures and score them")
    common(p)
    p.add_argument("items", nargs="+", help="mixture .wav files (with sidecar) or directories")
    p.add_argument("--method", choices=["repu", "wiener"], required=True)
    p.add_argument("--sources", type=int, help="expected number of sources")
    estimation_flags(p)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("bench", help="mean onset estimation error over a directory of items")
    common(p)
    p.add_argument("directory")
    p.add_argument("--sigmas", help="comma-separated relaxed weights")
    p.add_argument("--methods", help="comma-separated subset of strict,relaxed,wiener")
    p.add_argument("--iters", dest="iterations", type=int)
    p.add_argument("--onsets")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s: %(message)s")
    args.sigma_given = getattr(args, "sigma", None) is not None
    try:
        resolve_settings(args)
        if args.command == "estimate" and args.method == "strict" and not args.sigma_given \
                and args.config and "sigma" in read_config(args.config):
            args.sigma_given = True
        return args.func(args)
    except (InvalidInputError, OSError, KeyError, ValueError) as exc:
        print(f"repphase {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
