"""Seven-grade style scale and the margin-to-level threshold table."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .telemetry import Label


class Level(str, enum.Enum):
    """Signed style grade. The neutral grade keeps the sign of its margin."""

    NEG3 = "-3"
    NEG2 = "-2"
    NEG1 = "-1"
    ZERO_NEG = "0-"
    ZERO_POS = "0+"
    POS1 = "1"
    POS2 = "2"
    POS3 = "3"

    @property
    def score(self) -> int:
        return int(self.value.rstrip("+-"))

    @property
    def is_aggressive(self) -> bool:
        return self in _AGGRESSIVE_LEVELS

    @property
    def binary_class(self) -> Label:
        return Label.AGGRESSIVE if self.is_aggressive else Label.NORMAL

    @classmethod
    def from_score(cls, score: int, positive: bool = False) -> "Level":
        """Map an integer grade to a level; ``positive`` picks 0+ over 0-."""
        if score == 0:
            return cls.ZERO_POS if positive else cls.ZERO_NEG
        if not -3 <= score <= 3:
            raise ValueError(f"level score must lie in [-3, 3], got {score}")
        return cls(str(int(score)))


_AGGRESSIVE_LEVELS = frozenset({Level.ZERO_POS, Level.POS1, Level.POS2, Level.POS3})

#: Report/trace ordering of levels.
LEVEL_ORDER: tuple[Level, ...] = tuple(Level)


@dataclass(frozen=True)
class Bin:
    """Half-open margin interval ``(lower, upper]`` mapped to a level."""

    lower: float
    upper: float
    level: Level


def _check_bins(bins: Sequence[Bin], name: str, sign: int) -> None:
    if not bins:
        raise ValueError(f"{name} bins are empty")
    ordered = sorted(bins, key=lambda b: b.lower)
    if ordered[0].lower != 0.0:
        raise ValueError(f"{name} bins must start at 0")
    if not math.isinf(ordered[-1].upper):
        raise ValueError(f"{name} bins must extend to infinity")
    for prev, nxt in zip(ordered, ordered[1:]):
        if prev.upper != nxt.lower:
            raise ValueError(f"{name} bins leave a gap or overlap at {prev.upper}")
    for b in ordered:
        if not b.lower < b.upper:
            raise ValueError(f"{name} bin ({b.lower}, {b.upper}] is empty")
        if sign > 0 and not b.level.is_aggressive:
            raise ValueError(f"{name} bins must map to aggressive levels")
        if sign < 0 and b.level.is_aggressive:
            raise ValueError(f"{name} bins must map to normal levels")
    mags = [abs(b.level.score) for b in ordered]
    if mags != sorted(mags):
        raise ValueError(f"{name} level magnitudes must not decrease with the margin")


@dataclass(frozen=True)
class ThresholdTable:
    """Maps the distance margin ``d_agg - d_norm`` to a :class:`Level`.

    A positive margin is looked up in ``aggressive_bins``, a non-positive
    one (by magnitude) in ``normal_bins``. Bins are lower-open and
    upper-closed, except that the lowest normal bin also contains 0, so a
    margin of exactly 0 maps to 0-.
    """

    aggressive_bins: tuple[Bin, ...]
    normal_bins: tuple[Bin, ...]

    def __post_init__(self):
        object.__setattr__(self, "aggressive_bins",
                           tuple(sorted(self.aggressive_bins, key=lambda b: b.lower)))
        object.__setattr__(self, "normal_bins",
                           tuple(sorted(self.normal_bins, key=lambda b: b.lower)))
        _check_bins(self.aggressive_bins, "aggressive", +1)
        _check_bins(self.normal_bins, "normal", -1)

    @classmethod
    def default(cls) -> "ThresholdTable":
        inf = math.inf
        return cls(
            aggressive_bins=(
                Bin(0.0, 0.02, Level.ZERO_POS),
                Bin(0.02, 0.2, Level.POS1),
                Bin(0.2, 0.5, Level.POS2),
                Bin(0.5, inf, Level.POS3),
            ),
            normal_bins=(
                Bin(0.0, 0.02, Level.ZERO_NEG),
                Bin(0.02, 0.1, Level.NEG1),
                Bin(0.1, 0.5, Level.NEG2),
                Bin(0.5, inf, Level.NEG3),
            ),
        )

    def level(self, margin: float) -> Level:
        if math.isnan(margin):
            raise ValueError("margin is NaN")
        bins = self.aggressive_bins if margin > 0 else self.normal_bins
        mag = abs(margin)
        for b in bins:
            if mag <= b.upper:
                return b.level
        return bins[-1].level

    def levels(self, margins) -> list[Level]:
        """Vectorised :meth:`level` over an array of margins."""
        margins = np.asarray(margins, dtype=float).reshape(-1)
        if np.any(np.isnan(margins)):
            raise ValueError("margin is NaN")
        out = np.empty(margins.size, dtype=object)
        for mask, bins in ((margins > 0, self.aggressive_bins),
                           (~(margins > 0), self.normal_bins)):
            uppers = np.array([b.upper for b in bins])
            idx = np.searchsorted(uppers, np.abs(margins[mask]), side="left")
            idx = np.minimum(idx, len(bins) - 1)
            out[mask] = np.array([b.level for b in bins], dtype=object)[idx]
        return out.tolist()

    def to_dict(self) -> dict:
        def enc(bins):
            return [
                [b.lower, None if math.isinf(b.upper) else b.upper, b.level.value]
                for b in bins
            ]

        return {"aggressive": enc(self.aggressive_bins), "normal": enc(self.normal_bins)}

    @classmethod
    def from_dict(cls, blob: dict) -> "ThresholdTable":
        def dec(rows):
            return tuple(
                Bin(float(lo), math.inf if hi is None else float(hi), Level(str(lvl)))
                for lo, hi, lvl in rows
            )

        try:
            return cls(dec(blob["aggressive"]), dec(blob["normal"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"invalid threshold table: {exc}") from None
