"""Telemetry data model and the corpus CSV format.

A corpus file holds one row per sample::

    run_id,label,t,speed,throttle
    r1,aggressive,0.000000,56.120000,0.610000

Rows of one run are contiguous and time-ordered. Lines starting with ``#``
carry metadata (tool version, seed) and are skipped by the reader.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

CORPUS_HEADER = ("run_id", "label", "t", "speed", "throttle")
CORPUS_FORMAT_VERSION = 1
DECIMALS = 6
NOMINAL_SAMPLE_RATE_HZ = 50.0


class Label(str, enum.Enum):
    AGGRESSIVE = "aggressive"
    NORMAL = "normal"
    UNLABELED = "unlabeled"

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, Label):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown label {value!r}; expected one of "
                f"{', '.join(m.value for m in cls)}"
            ) from None


class CorpusFormatError(ValueError):
    """Raised when a corpus file is malformed or violates sample invariants."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _check_sample(t: float, speed: float, throttle: float) -> None:
    for name, value in (("t", t), ("speed", speed), ("throttle", throttle)):
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")
    if t < 0:
        raise ValueError(f"timestamp must be non-negative, got {t}")
    if speed < 0:
        raise ValueError(f"speed must be >= 0, got {speed}")
    if not 0.0 <= throttle <= 1.0:
        raise ValueError(f"throttle must lie in [0, 1], got {throttle}")


@dataclass(frozen=True)
class TelemetrySample:
    """One observation ``(t, v, alpha)``: seconds, km/h, throttle fraction."""

    t: float
    speed: float
    throttle: float

    def __post_init__(self):
        _check_sample(self.t, self.speed, self.throttle)


@dataclass(frozen=True)
class DriverRun:
    """An ordered sequence of samples from one drive.

    Samples are stored column-wise as read-only float arrays; use
    :meth:`samples` for the per-sample view.
    """

    run_id: str
    label: Label
    t: np.ndarray
    speed: np.ndarray
    throttle: np.ndarray
    sample_rate_hz: float = NOMINAL_SAMPLE_RATE_HZ

    def __post_init__(self):
        object.__setattr__(self, "label", Label.parse(self.label))
        arrays = []
        for name in ("t", "speed", "throttle"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            arrays.append(arr)
        t, speed, throttle = arrays
        if not (len(t) == len(speed) == len(throttle)):
            raise ValueError("t, speed and throttle must have equal length")
        if not (self.sample_rate_hz > 0):
            raise ValueError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(t) & np.isfinite(speed) & np.isfinite(throttle)):
            raise ValueError(f"run {self.run_id!r}: non-finite values")
        if np.any(t < 0):
            raise ValueError(f"run {self.run_id!r}: negative timestamp")
        if np.any(speed < 0):
            raise ValueError(f"run {self.run_id!r}: negative speed")
        if np.any((throttle < 0) | (throttle > 1)):
            raise ValueError(f"run {self.run_id!r}: throttle outside [0, 1]")
        if np.any(np.diff(t) <= 0):
            raise ValueError(f"run {self.run_id!r}: timestamps must strictly increase")

    @classmethod
    def from_samples(cls, run_id, label, samples: Iterable[TelemetrySample],
                     sample_rate_hz: float = NOMINAL_SAMPLE_RATE_HZ) -> "DriverRun":
        samples = list(samples)
        return cls(
            run_id=run_id,
            label=label,
            t=[s.t for s in samples],
            speed=[s.speed for s in samples],
            throttle=[s.throttle for s in samples],
            sample_rate_hz=sample_rate_hz,
        )

    def __len__(self) -> int:
        return len(self.t)

    def samples(self) -> list[TelemetrySample]:
        return [
            TelemetrySample(float(t), float(v), float(a))
            for t, v, a in zip(self.t, self.speed, self.throttle)
        ]

    def __eq__(self, other):
        if not isinstance(other, DriverRun):
            return NotImplemented
        return (
            self.run_id == other.run_id
            and self.label == other.label
            and self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.speed, other.speed)
            and np.array_equal(self.throttle, other.throttle)
        )

    __hash__ = None


def extract_features(run: DriverRun) -> np.ndarray:
    """Project a run onto its feature vectors.

    Returns:
        Array of shape ``(n_samples, 2)`` with columns ``(speed, throttle)``,
        in sample order.
    """
    if len(run) == 0:
        raise ValueError(f"run {run.run_id!r} is empty")
    return np.column_stack([run.speed, run.throttle])


def require_labeled(runs: Sequence[DriverRun], purpose: str = "training") -> None:
    """Reject empty or unlabeled runs and corpora missing either class."""
    for run in runs:
        if len(run) == 0:
            raise ValueError(f"run {run.run_id!r} is empty")
        if run.label is Label.UNLABELED:
            raise ValueError(f"run {run.run_id!r} is unlabeled; {purpose} needs labels")
    present = {run.label for run in runs}
    missing = {Label.AGGRESSIVE, Label.NORMAL} - present
    if missing:
        names = ", ".join(sorted(m.value for m in missing))
        raise ValueError(f"{purpose} needs both classes; missing: {names}")


def _fmt(value: float) -> str:
    return f"{value:.{DECIMALS}f}"


def save_corpus(runs: Sequence[DriverRun], path, metadata: dict | None = None) -> None:
    """Write runs to ``path`` in corpus CSV format.

    Values are written with 6 decimals. When ``metadata`` is given it is
    written, together with the format version, as a leading ``#`` line.
    """
    rows = []
    for run in runs:
        t_txt = [_fmt(x) for x in run.t]
        # rounding must not collapse distinct timestamps
        rounded = np.array([float(x) for x in t_txt])
        if np.any(np.diff(rounded) <= 0):
            raise ValueError(
                f"run {run.run_id!r}: timestamps not distinct at {DECIMALS} decimals"
            )
        for t, v, a in zip(t_txt, run.speed, run.throttle):
            rows.append((run.run_id, run.label.value, t, _fmt(v), _fmt(a)))

    with open(path, "w", newline="", encoding="utf-8") as fh:
        if metadata is not None:
            meta = {"format": "drivestyle-corpus", "format_version": CORPUS_FORMAT_VERSION}
            meta.update(metadata)
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CORPUS_HEADER)
        writer.writerows(rows)


def read_corpus_metadata(path) -> dict:
    """Return the ``key=value`` pairs of the leading comment lines."""
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            for token in line[1:].split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    meta[key] = value
    return meta


def load_corpus(path) -> list[DriverRun]:
    """Read a corpus CSV into runs, in file order.

    Raises:
        CorpusFormatError: on a malformed row, an invariant violation, a
            non-contiguous run, or an unsupported format version.
        FileNotFoundError: if ``path`` does not exist.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    meta = read_corpus_metadata(path)
    version = meta.get("format_version")
    if version is not None and version != str(CORPUS_FORMAT_VERSION):
        raise CorpusFormatError(
            f"unsupported corpus format_version {version} "
            f"(this reader handles {CORPUS_FORMAT_VERSION})"
        )

    runs: list[DriverRun] = []
    seen: set[str] = set()
    current = None  # (run_id, label, t, v, a, first_line)

    def flush():
        run_id, label, t, v, a, first = current
        try:
            runs.append(DriverRun(run_id, label, t, v, a))
        except ValueError as exc:
            raise CorpusFormatError(str(exc), first) from None

    with open(path, newline="", encoding="utf-8") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#") or not line.strip():
                continue
            fields = next(csv.reader([line]))
            if not header_seen:
                if tuple(f.strip() for f in fields) != CORPUS_HEADER:
                    raise CorpusFormatError(
                        f"expected header {','.join(CORPUS_HEADER)}", lineno
                    )
                header_seen = True
                continue
            if len(fields) != len(CORPUS_HEADER):
                raise CorpusFormatError(
                    f"expected {len(CORPUS_HEADER)} fields, got {len(fields)}", lineno
                )
            run_id, label_txt, t_txt, v_txt, a_txt = (f.strip() for f in fields)
            if not run_id:
                raise CorpusFormatError("empty run_id", lineno)
            try:
                label = Label.parse(label_txt)
                t, v, a = float(t_txt), float(v_txt), float(a_txt)
                _check_sample(t, v, a)
            except ValueError as exc:
                raise CorpusFormatError(str(exc), lineno) from None

            if current is None or current[0] != run_id:
                if run_id in seen:
                    raise CorpusFormatError(f"rows of run {run_id!r} are not contiguous", lineno)
                if current is not None:
                    flush()
                seen.add(run_id)
                current = (run_id, label, [], [], [], lineno)
            elif current[1] is not label:
                raise CorpusFormatError(f"run {run_id!r} changes label", lineno)
            elif t <= current[2][-1]:
                raise CorpusFormatError(
                    f"timestamp {t} does not increase within run {run_id!r}", lineno
                )
            current[2].append(t)
            current[3].append(v)
            current[4].append(a)
        if not header_seen:
            raise CorpusFormatError("missing header")
    if current is not None:
        flush()
    return runs
