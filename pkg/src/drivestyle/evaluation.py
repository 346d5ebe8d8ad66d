"""Correct-recognition rates and the run-level cross-validation harness."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .bayes import classify_run, train
from .fuzzy import FuzzyStyleRecognizer, classify_run_fuzzy
from .levels import LEVEL_ORDER, Level
from .telemetry import DriverRun, Label, require_labeled

PROPOSED = "proposed"
FUZZY = "fuzzy"


def _true_label(label) -> Label:
    label = Label.parse(label)
    if label is Label.UNLABELED:
        raise ValueError("CRR needs an aggressive or normal ground-truth label")
    return label


def compute_crr(decisions, true_label) -> float:
    """Fraction of decisions whose binary class equals ``true_label``.

    ``decisions`` may hold any objects with a ``binary_class`` attribute
    (0+ counts as aggressive, 0- as normal).
    """
    label = _true_label(true_label)
    decisions = list(decisions)
    if not decisions:
        raise ValueError("no decisions to score")
    hits = sum(1 for d in decisions if d.binary_class is label)
    return hits / len(decisions)


def level_counts(decisions) -> dict[str, int]:
    """Occurrences of each level, keyed by level string in scale order."""
    counts = {lvl.value: 0 for lvl in LEVEL_ORDER}
    for d in decisions:
        counts[d.level.value] += 1
    return counts


def crr_from_counts(counts: Mapping, true_label) -> float:
    """CRR from a level histogram keyed by :class:`Level` or its string value."""
    label = _true_label(true_label)
    total = hits = 0
    for key, n in counts.items():
        lvl = Level(key.value if isinstance(key, Level) else str(key))
        total += int(n)
        if lvl.binary_class is label:
            hits += int(n)
    if total == 0:
        raise ValueError("empty level histogram")
    return hits / total


@dataclass
class RunResult:
    run_id: str
    label: Label
    level_counts: dict
    crr: float
    split: int = 0
    trace: dict | None = field(default=None, repr=False, compare=False)

    @property
    def n_samples(self) -> int:
        return sum(self.level_counts.values())

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "label": self.label.value,
            "split": self.split,
            "level_counts": dict(self.level_counts),
            "crr": self.crr,
        }


@dataclass
class CrrReport:
    method: str
    runs: list[RunResult]
    metadata: dict = field(default_factory=dict)

    def _mean(self, label: Label) -> float | None:
        vals = [r.crr for r in self.runs if r.label is label]
        return float(np.mean(vals)) if vals else None

    @property
    def crr_a(self) -> list[float]:
        return [r.crr for r in self.runs if r.label is Label.AGGRESSIVE]

    @property
    def crr_n(self) -> list[float]:
        return [r.crr for r in self.runs if r.label is Label.NORMAL]

    @property
    def average_crr_a(self) -> float | None:
        return self._mean(Label.AGGRESSIVE)

    @property
    def average_crr_n(self) -> float | None:
        return self._mean(Label.NORMAL)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "runs": [r.to_dict() for r in self.runs],
            "average_crr_a": self.average_crr_a,
            "average_crr_n": self.average_crr_n,
        }

    @classmethod
    def from_dict(cls, blob: dict, metadata: dict | None = None) -> "CrrReport":
        runs = [
            RunResult(
                run_id=r["run_id"],
                label=Label.parse(r["label"]),
                level_counts={lvl.value: int(r["level_counts"][lvl.value]) for lvl in LEVEL_ORDER},
                crr=float(r["crr"]),
                split=int(r.get("split", 0)),
            )
            for r in blob["runs"]
        ]
        return cls(method=blob["method"], runs=runs, metadata=dict(metadata or {}))


def stratified_folds(runs: Sequence[DriverRun], n_folds: int, seed) -> list[list[int]]:
    """Partition run indices into ``n_folds`` folds, stratified by label.

    Each label's runs are shuffled with ``seed`` and dealt round-robin, the
    normal runs continuing where the aggressive ones stopped, so fold sizes
    differ by at most one.
    """
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if len(runs) < n_folds:
        raise ValueError(f"{len(runs)} runs cannot fill {n_folds} folds")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    pos = 0
    for label in (Label.AGGRESSIVE, Label.NORMAL):
        idx = [i for i, r in enumerate(runs) if r.label is label]
        for i in rng.permutation(len(idx)):
            folds[pos % n_folds].append(idx[i])
            pos += 1
    return [sorted(f) for f in folds]


def split_plan(n_folds: int, train_folds: int, rotate: bool) -> list[tuple[list[int], list[int]]]:
    """(training folds, validation folds) per split; one split unless rotating."""
    if not 0 < train_folds < n_folds:
        raise ValueError(f"train_folds must lie in [1, {n_folds - 1}], got {train_folds}")
    plan = []
    for r in range(n_folds if rotate else 1):
        tr = sorted((r + j) % n_folds for j in range(train_folds))
        va = [f for f in range(n_folds) if f not in tr]
        plan.append((tr, va))
    return plan


def _result(run: DriverRun, decisions, split: int, method: str, keep_trace: bool) -> RunResult:
    trace = None
    if keep_trace:
        trace = {"t": run.t, "levels": [d.level for d in decisions]}
        if method == PROPOSED:
            trace["d_agg"] = np.array([d.d_agg for d in decisions])
            trace["d_norm"] = np.array([d.d_norm for d in decisions])
    return RunResult(run.run_id, run.label, level_counts(decisions),
                     compute_crr(decisions, run.label), split, trace)


def cross_validate(corpus: Sequence[DriverRun], folds: int = 9, train_folds: int = 5,
                   seed=0, rotate: bool = False, bandwidth="silverman", thresholds=None,
                   fis_config=None, threads: int | None = None,
                   keep_traces: bool = True) -> tuple[CrrReport, CrrReport]:
    """Run-level cross-validation of the KDE classifier against the fuzzy baseline.

    Runs are dealt into ``folds`` stratified folds; the classifier is
    trained on ``train_folds`` of them and both methods are scored on the
    remaining folds. With ``rotate`` every cyclic block of training folds
    is used once.

    Returns:
        ``(proposed_report, fuzzy_report)``.
    """
    corpus = list(corpus)
    require_labeled(corpus, "cross-validation")
    ids = [r.run_id for r in corpus]
    if len(set(ids)) != len(ids):
        raise ValueError("run ids must be unique for cross-validation")
    fold_idx = stratified_folds(corpus, folds, seed)
    plan = split_plan(folds, train_folds, rotate)
    fis = FuzzyStyleRecognizer(config=fis_config).fit()
    workers = threads or os.cpu_count() or 1

    proposed, fuzzy = [], []
    for split, (tr, va) in enumerate(plan):
        train_runs = [corpus[i] for f in tr for i in fold_idx[f]]
        valid_runs = [corpus[i] for f in va for i in fold_idx[f]]
        for part, runs in (("training", train_runs), ("validation", valid_runs)):
            if {r.label for r in runs} != {Label.AGGRESSIVE, Label.NORMAL}:
                raise ValueError(
                    f"corpus too small for {folds} folds: split {split} {part} set "
                    "lacks a class"
                )
        model = train(train_runs, bandwidth=bandwidth, thresholds=thresholds)

        def score(run, split=split, model=model):
            return (_result(run, classify_run(model, run), split, PROPOSED, keep_traces),
                    _result(run, classify_run_fuzzy(fis, run), split, FUZZY, keep_traces))

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(score, valid_runs))
        else:
            results = [score(r) for r in valid_runs]
        for p, f in results:
            proposed.append(p)
            fuzzy.append(f)

    meta = {
        "tool_version": __version__,
        "seed": seed,
        "folds": folds,
        "train_folds": train_folds,
        "rotate": rotate,
        "bandwidth": bandwidth,
        "fold_assignment": [[corpus[i].run_id for i in f] for f in fold_idx],
    }
    return CrrReport(PROPOSED, proposed, dict(meta)), CrrReport(FUZZY, fuzzy, dict(meta))


def _fmt(x) -> str:
    return "-" if x is None else f"{x:.3f}"


def _delta(a, b):
    return None if a is None or b is None else a - b


def format_table(reports: Sequence[CrrReport]) -> str:
    """Aligned text: per-method level histograms, then CRRs side by side."""
    lines = []
    levels = [lvl.value for lvl in LEVEL_ORDER]
    for rep in reports:
        lines.append(f"Level counts: {rep.method}")
        header = ["run_id", "label", "split"] + levels + ["CRR"]
        rows = [[r.run_id, r.label.value, str(r.split)]
                + [str(r.level_counts[k]) for k in levels] + [_fmt(r.crr)] for r in rep.runs]
        lines.extend(_align([header] + rows))
        lines.append("")

    methods = [rep.method for rep in reports]
    lines.append("CRR comparison")
    header = ["run_id", "label", "split"] + methods
    if len(reports) == 2:
        header.append(f"{methods[0]}-{methods[1]}")
    rows = []
    for i, r in enumerate(reports[0].runs):
        vals = [rep.runs[i].crr for rep in reports]
        row = [r.run_id, r.label.value, str(r.split)] + [_fmt(v) for v in vals]
        if len(reports) == 2:
            row.append(f"{vals[0] - vals[1]:+.3f}")
        rows.append(row)
    for name, attr in (("Average CRR_a", "average_crr_a"), ("Average CRR_n", "average_crr_n")):
        vals = [getattr(rep, attr) for rep in reports]
        row = [name, "", ""] + [_fmt(v) for v in vals]
        if len(reports) == 2:
            d = _delta(*vals)
            row.append("-" if d is None else f"{d:+.3f}")
        rows.append(row)
    lines.extend(_align([header] + rows))
    return "\n".join(lines) + "\n"


def _align(rows: list[list[str]]) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return ["  ".join(c.rjust(w) if j > 0 else c.ljust(w) for j, (c, w) in enumerate(zip(r, widths))).rstrip()
            for r in rows]


TRACE_HEADER = ("run_id", "t", "level", "binary_class", "d_agg", "d_norm")


def write_trace_csv(path, rows, metadata: dict | None = None) -> int:
    """Write ``(run_id, t, level, d_agg, d_norm)`` rows as trace CSV.

    ``d_agg``/``d_norm`` may be ``None`` (fuzzy baseline). Returns the row count.
    """
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if metadata:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in metadata.items()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for run_id, t, lvl, d_agg, d_norm in rows:
            w.writerow((
                run_id, f"{t:.6f}", lvl.value, lvl.binary_class.value,
                "" if d_agg is None else f"{d_agg:.9f}",
                "" if d_norm is None else f"{d_norm:.9f}",
            ))
            n += 1
    return n


def trace_rows(run_id: str, t, decisions):
    for ti, d in zip(t, decisions):
        yield run_id, float(ti), d.level, getattr(d, "d_agg", None), getattr(d, "d_norm", None)


def write_trace(report: CrrReport, path, metadata: dict | None = None) -> int:
    """Write per-sample levels of every evaluated run; returns the row count."""
    def rows():
        for r in report.runs:
            if r.trace is None:
                raise ValueError(f"run {r.run_id!r} was evaluated without a trace")
            tr = r.trace
            d_agg, d_norm = tr.get("d_agg"), tr.get("d_norm")
            for k, (t, lvl) in enumerate(zip(tr["t"], tr["levels"])):
                yield (r.run_id, float(t), lvl,
                       None if d_agg is None else float(d_agg[k]),
                       None if d_norm is None else float(d_norm[k]))

    return write_trace_csv(path, rows(), metadata)


def render_report(reports: Sequence[CrrReport], out_dir, traces: bool = True) -> dict:
    """Write ``report.json``, ``report.txt`` and per-method trace CSVs into ``out_dir``.

    Returns:
        Mapping of artifact name to written path.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to render")
    os.makedirs(out_dir, exist_ok=True)
    meta = dict(reports[0].metadata)
    meta.setdefault("tool_version", __version__)
    blob = {"metadata": meta, "reports": [r.to_dict() for r in reports]}
    if len(reports) == 2:
        a, b = reports
        blob["deltas"] = {
            "methods": [a.method, b.method],
            "average_crr_a": _delta(a.average_crr_a, b.average_crr_a),
            "average_crr_n": _delta(a.average_crr_n, b.average_crr_n),
        }
    paths = {"json": os.path.join(out_dir, "report.json"),
             "text": os.path.join(out_dir, "report.txt")}
    with open(paths["json"], "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=2)
        fh.write("\n")
    with open(paths["text"], "w", encoding="utf-8") as fh:
        fh.write(f"# tool_version={meta['tool_version']} seed={meta.get('seed')}\n")
        fh.write(format_table(reports))
    if traces:
        trace_meta = {"tool_version": meta["tool_version"], "seed": meta.get("seed")}
        for rep in reports:
            p = os.path.join(out_dir, f"trace_{rep.method}.csv")
            write_trace(rep, p, {**trace_meta, "method": rep.method})
            paths[f"trace_{rep.method}"] = p
    return paths


def read_report(path) -> list[CrrReport]:
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    try:
        meta = blob.get("metadata", {})
        return [CrrReport.from_dict(r, meta) for r in blob["reports"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed report ({exc})") from None
