"""Command-line interface: ``drivestyle {gen,train,classify,eval}``.

Exit codes: 0 success, 1 data or I/O error, 2 usage error.

Every option can also come from a JSON file passed with ``--config``; the
file may hold top-level keys or per-subcommand sections (``{"eval": {...}}``).
A flag on the command line wins over the file, which wins over the default.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .bayes import FEATURES, CLASSES, ModelFormatError, classify_run, load_model, save_model, train
from .datagen import default_archetypes, generate_corpus, load_archetypes
from .evaluation import (
    cross_validate,
    format_table,
    render_report,
    trace_rows,
    write_trace_csv,
)
from .fuzzy import FuzzyStyleRecognizer, classify_run_fuzzy, load_fis_config
from .levels import ThresholdTable
from .telemetry import CorpusFormatError, Label, load_corpus, save_corpus

log = logging.getLogger("drivestyle")

DEFAULTS = {
    "gen": {"archetypes": None, "rows": None, "runs_per": 1, "length": None,
            "ar1": 0.0, "seed": 0, "output": None},
    "train": {"input": None, "output": None, "bandwidth": "auto", "thresholds": None},
    "classify": {"input": None, "output": None, "model": None, "method": "proposed",
                 "fis_config": None, "allow_custom_rules": False},
    "eval": {"input": None, "output": None, "folds": 9, "train_folds": 5, "seed": 0,
             "rotate": False, "bandwidth": "auto", "thresholds": None, "fis_config": None,
             "allow_custom_rules": False, "traces": True},
}


class UsageError(Exception):
    pass


def parse_bandwidth(text):
    """``auto`` | ``4.0`` | ``speed=4.0,throttle=0.05`` (missing features use auto)."""
    if isinstance(text, (int, float)):
        return float(text)
    if isinstance(text, dict):
        return text
    text = str(text).strip()
    if text.lower() in ("auto", "silverman"):
        return "silverman"
    if "=" not in text:
        try:
            value = float(text)
        except ValueError:
            raise UsageError(f"invalid bandwidth {text!r}") from None
        if not value > 0:
            raise UsageError("bandwidth must be positive")
        return value
    spec = {f: "silverman" for f in FEATURES}
    for part in text.split(","):
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in FEATURES:
            raise UsageError(f"unknown bandwidth feature {key!r}")
        val = val.strip()
        if val.lower() in ("auto", "silverman"):
            spec[key] = "silverman"
            continue
        try:
            spec[key] = float(val)
        except ValueError:
            raise UsageError(f"invalid bandwidth value {val!r} for {key}") from None
        if not spec[key] > 0:
            raise UsageError(f"bandwidth for {key} must be positive")
    return spec


def _parse_rows(text):
    if text is None:
        return None
    if isinstance(text, list):
        return [int(r) for r in text]
    rows = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            rows.extend(range(int(lo), int(hi) + 1))
        elif part:
            rows.append(int(part))
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drivestyle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: available CPUs)")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress the summary")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--archetypes", help="archetype JSON (default: built-in 18-driver bank)")
    p.add_argument("--rows", help="1-based archetype rows to use, e.g. 1,10 or 1-9")
    p.add_argument("--runs-per", type=int, help="runs per archetype (default 1)")
    p.add_argument("--length", type=int, help="samples per run (default from archetype, 5000)")
    p.add_argument("--ar1", type=float, help="AR(1) coefficient of the latent process (default 0)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("-o", "--output", help="corpus CSV to write")

    p = sub.add_parser("train", parents=[common], help="train the KDE classifier")
    p.add_argument("-i", "--input", help="labeled corpus CSV")
    p.add_argument("-o", "--output", help="model JSON to write")
    p.add_argument("--bandwidth", help="auto | VALUE | speed=V,throttle=V (default auto)")
    p.add_argument("--thresholds", help="threshold table JSON")

    p = sub.add_parser("classify", parents=[common], help="per-sample style levels")
    p.add_argument("-i", "--input", help="corpus CSV (labels optional)")
    p.add_argument("-o", "--output", help="trace CSV to write")
    p.add_argument("-m", "--model", help="model JSON (proposed method)")
    p.add_argument("--method", choices=["proposed", "fuzzy"], help="default proposed")
    p.add_argument("--fis-config", help="fuzzy system JSON")
    p.add_argument("--allow-custom-rules", action="store_true", default=None)

    p = sub.add_parser("eval", parents=[common], help="cross-validated CRR comparison")
    p.add_argument("-i", "--input", help="labeled corpus CSV")
    p.add_argument("-o", "--output", help="report directory")
    p.add_argument("--folds", type=int, help="number of folds (default 9)")
    p.add_argument("--train-folds", type=int, help="folds used for training (default 5)")
    p.add_argument("--seed", type=int, help="fold shuffling seed (default 0)")
    p.add_argument("--rotate", action="store_true", default=None,
                   help="rotate the training block over all folds")
    p.add_argument("--bandwidth", help="auto | VALUE | speed=V,throttle=V (default auto)")
    p.add_argument("--thresholds", help="threshold table JSON")
    p.add_argument("--fis-config", help="fuzzy system JSON")
    p.add_argument("--allow-custom-rules", action="store_true", default=None)
    p.add_argument("--no-traces", dest="traces", action="store_false", default=None,
                   help="skip per-sample trace CSVs")
    return parser


def effective_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                blob = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(blob, dict):
            raise UsageError("config file must hold a JSON object")
        section = blob.get(command, {})
        for key, value in list(blob.items()) + list(section.items()):
            key = key.replace("-", "_")
            if key in cfg:
                cfg[key] = value
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg["threads"] = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if cfg["threads"] < 1:
        raise UsageError("--threads must be positive")
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    for key in keys:
        if cfg.get(key) in (None, ""):
            raise UsageError(f"missing required option --{key.replace('_', '-')}")


def _say(cfg, *lines):
    if not cfg.get("quiet"):
        for line in lines:
            print(line)


def _header(command: str, cfg: dict) -> str:
    shown = {k: v for k, v in cfg.items() if k != "quiet"}
    return f"# drivestyle {__version__} {command} " + json.dumps(shown, sort_keys=True)


def _load_thresholds(path):
    if path is None:
        return None
    with open(path, encoding="utf-8") as fh:
        return ThresholdTable.from_dict(json.load(fh))


def cmd_gen(cfg: dict) -> None:
    _require(cfg, "output")
    specs = load_archetypes(cfg["archetypes"]) if cfg["archetypes"] else default_archetypes()
    rows = _parse_rows(cfg["rows"])
    if rows is not None:
        bad = [r for r in rows if not 1 <= r <= len(specs)]
        if bad:
            raise UsageError(f"rows {bad} outside 1..{len(specs)}")
        specs = [specs[r - 1] for r in rows]
    overrides = {}
    if cfg["length"] is not None:
        overrides["run_length"] = int(cfg["length"])
    if cfg["ar1"]:
        overrides["ar1"] = float(cfg["ar1"])
    if overrides:
        specs = [replace(s, **overrides) for s in specs]
    if int(cfg["runs_per"]) < 1:
        raise UsageError("--runs-per must be positive")
    runs = generate_corpus(specs, int(cfg["runs_per"]), int(cfg["seed"]))
    save_corpus(runs, cfg["output"], metadata={"tool_version": __version__, "seed": cfg["seed"]})

    lines = [f"wrote {cfg['output']}: {len(runs)} runs, {sum(len(r) for r in runs)} samples"]
    for label in (Label.AGGRESSIVE, Label.NORMAL):
        sel = [r for r in runs if r.label is label]
        if not sel:
            continue
        v = np.concatenate([r.speed for r in sel])
        a = np.concatenate([r.throttle for r in sel])
        lines.append(
            f"  {label.value:<10} runs={len(sel):<3} speed mean={v.mean():.3f} var={v.var():.3f}"
            f"  throttle mean={a.mean():.3f} var={a.var():.3f}"
        )
    _say(cfg, *lines)


def cmd_train(cfg: dict) -> None:
    _require(cfg, "input", "output")
    bandwidth = parse_bandwidth(cfg["bandwidth"])
    thresholds = _load_thresholds(cfg["thresholds"])
    runs = load_corpus(cfg["input"])
    model = train(runs, bandwidth=bandwidth, thresholds=thresholds)
    save_model(model, cfg["output"], metadata={"seed": None, "corpus": os.path.basename(cfg["input"])})
    lines = [f"wrote {cfg['output']}"]
    for c in CLASSES:
        for f in FEATURES:
            k = model.kdes_[c][f]
            lines.append(f"  {c.value:<10} {f:<8} N={k.n_points_:<7} bandwidth={k.bandwidth_:.6g}")
    _say(cfg, *lines)


def cmd_classify(cfg: dict) -> None:
    _require(cfg, "input", "output")
    method = cfg["method"]
    if method not in ("proposed", "fuzzy"):
        raise UsageError(f"unknown method {method!r}")
    if method == "proposed":
        _require(cfg, "model")
        model = load_model(cfg["model"])
        run_decisions = lambda run: classify_run(model, run)  # noqa: E731
    else:
        fis_cfg = (load_fis_config(cfg["fis_config"], bool(cfg["allow_custom_rules"]))
                   if cfg["fis_config"] else None)
        fis = FuzzyStyleRecognizer(config=fis_cfg, allow_custom_rules=bool(cfg["allow_custom_rules"])).fit()
        run_decisions = lambda run: classify_run_fuzzy(fis, run)  # noqa: E731

    runs = load_corpus(cfg["input"])
    summaries = []

    def rows():
        for run in runs:
            decisions = run_decisions(run)
            n_agg = sum(d.binary_class is Label.AGGRESSIVE for d in decisions)
            summaries.append((run, n_agg, len(decisions)))
            yield from trace_rows(run.run_id, run.t, decisions)

    n = write_trace_csv(cfg["output"], rows(),
                        {"tool_version": __version__, "seed": None, "method": method})
    lines = [f"wrote {cfg['output']}: {n} samples ({method})"]
    for run, n_agg, total in summaries:
        majority = "aggressive" if n_agg * 2 > total else "normal"
        line = f"  {run.run_id:<12} {run.label.value:<10} aggressive={n_agg / total:.3f} majority={majority}"
        lines.append(line)
    _say(cfg, *lines)


def cmd_eval(cfg: dict) -> None:
    _require(cfg, "input", "output")
    bandwidth = parse_bandwidth(cfg["bandwidth"])
    thresholds = _load_thresholds(cfg["thresholds"])
    fis_cfg = (load_fis_config(cfg["fis_config"], bool(cfg["allow_custom_rules"]))
               if cfg["fis_config"] else None)
    folds, train_folds = int(cfg["folds"]), int(cfg["train_folds"])
    if folds < 2 or not 0 < train_folds < folds:
        raise UsageError(f"need folds >= 2 and 0 < train-folds < folds (got {folds}, {train_folds})")
    runs = load_corpus(cfg["input"])
    proposed, fuzzy = cross_validate(
        runs, folds=folds, train_folds=train_folds, seed=int(cfg["seed"]),
        rotate=bool(cfg["rotate"]), bandwidth=bandwidth, thresholds=thresholds,
        fis_config=fis_cfg, threads=int(cfg["threads"]), keep_traces=bool(cfg["traces"]),
    )
    paths = render_report([proposed, fuzzy], cfg["output"], traces=bool(cfg["traces"]))
    _say(cfg, format_table([proposed, fuzzy]).rstrip("\n"),
         *(f"wrote {p}" for p in paths.values()))


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "classify": cmd_classify, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = effective_config(args.command, args)
        cfg["quiet"] = args.quiet
        _say(cfg, _header(args.command, cfg))
        COMMANDS[args.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"drivestyle {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (CorpusFormatError, ModelFormatError, ValueError, OSError) as exc:
        print(f"drivestyle {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
