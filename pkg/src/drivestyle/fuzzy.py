"""Mamdani fuzzy inference baseline on ``(speed, throttle)``.

Two inputs with terms L/M/H, one output on ``[-3, 3]`` with terms
LN/N/M/A/HA, nine min-AND rules, max aggregation and centroid
defuzzification over a uniform grid.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features
from .levels import Level
from .telemetry import DriverRun, extract_features

log = logging.getLogger(__name__)

INPUT_TERMS = ("L", "M", "H")
OUTPUT_TERMS = ("LN", "N", "M", "A", "HA")

#: (speed term, throttle term) -> output term, one entry per rule, all weight 1.
RULE_TABLE = (
    ("L", "L", "LN"),
    ("L", "M", "M"),
    ("L", "H", "HA"),
    ("M", "L", "N"),
    ("M", "M", "M"),
    ("M", "H", "A"),
    ("H", "L", "HA"),
    ("H", "M", "A"),
    ("H", "H", "HA"),
)


@dataclass(frozen=True)
class MembershipFunction:
    """Triangular ``(a, b, c)`` or trapezoidal ``(a, b, c, d)`` membership.

    Coincident breakpoints give shoulders: ``(0, 0, 45)`` is 1 at 0 and
    falls to 0 at 45.
    """

    shape: str
    breakpoints: tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bp)
        expected = {"triangular": 3, "trapezoidal": 4}.get(self.shape)
        if expected is None:
            raise ValueError(f"unknown membership shape {self.shape!r}")
        if len(bp) != expected:
            raise ValueError(f"{self.shape} membership needs {expected} breakpoints")
        if any(b1 > b2 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError(f"breakpoints must be non-decreasing: {bp}")

    @property
    def corners(self) -> tuple[float, float, float, float]:
        bp = self.breakpoints
        return (bp[0], bp[1], bp[1], bp[2]) if len(bp) == 3 else bp

    @property
    def core(self) -> float:
        """Midpoint of the plateau where membership is 1."""
        _, b, c, _ = self.corners
        return 0.5 * (b + c)

    def __call__(self, x):
        a, b, c, d = self.corners
        x = np.asarray(x, dtype=float)
        mu = np.zeros_like(x)
        mu[(x >= b) & (x <= c)] = 1.0
        if b > a:
            rise = (x > a) & (x < b)
            mu[rise] = (x[rise] - a) / (b - a)
        if d > c:
            fall = (x > c) & (x < d)
            mu[fall] = (d - x[fall]) / (d - c)
        return mu

    def to_dict(self) -> dict:
        return {"shape": self.shape, "breakpoints": list(self.breakpoints)}


def _tri(*bp) -> MembershipFunction:
    return MembershipFunction("triangular", bp)


@dataclass(frozen=True)
class FuzzyVariable:
    universe: tuple[float, float]
    terms: dict

    def __post_init__(self):
        lo, hi = (float(u) for u in self.universe)
        if not lo < hi:
            raise ValueError(f"empty universe {self.universe}")
        object.__setattr__(self, "universe", (lo, hi))

    def clamp(self, x: np.ndarray, name: str) -> np.ndarray:
        lo, hi = self.universe
        outside = (x < lo) | (x > hi)
        if np.any(outside):
            log.info("%d %s value(s) outside [%g, %g] clamped", int(outside.sum()), name, lo, hi)
        return np.clip(x, lo, hi)


@dataclass(frozen=True)
class FuzzyRule:
    speed_term: str
    throttle_term: str
    output_term: str
    weight: float = 1.0


@dataclass(frozen=True)
class FisConfig:
    """Universes, term memberships and rules of the inference system."""

    speed: FuzzyVariable
    throttle: FuzzyVariable
    output: FuzzyVariable
    rules: tuple[FuzzyRule, ...] = field(
        default_factory=lambda: tuple(FuzzyRule(*r) for r in RULE_TABLE)
    )
    resolution: int = 1001

    @classmethod
    def default(cls) -> "FisConfig":
        return cls(
            speed=FuzzyVariable((0.0, 120.0), {
                "L": _tri(0, 0, 45), "M": _tri(25, 50, 75), "H": _tri(55, 120, 120),
            }),
            throttle=FuzzyVariable((0.0, 1.0), {
                "L": _tri(0, 0, 0.4), "M": _tri(0.2, 0.5, 0.8), "H": _tri(0.6, 1, 1),
            }),
            output=FuzzyVariable((-3.0, 3.0), {
                "LN": _tri(-3, -3, -1.5), "N": _tri(-3, -1.5, 0), "M": _tri(-1.5, 0, 1.5),
                "A": _tri(0, 1.5, 3), "HA": _tri(1.5, 3, 3),
            }),
        )

    def validate(self, allow_custom_rules: bool = False) -> None:
        for name, var, terms in (("speed", self.speed, INPUT_TERMS),
                                 ("throttle", self.throttle, INPUT_TERMS),
                                 ("output", self.output, OUTPUT_TERMS)):
            if set(var.terms) != set(terms):
                raise ValueError(f"{name} terms must be {terms}, got {tuple(var.terms)}")
        if self.resolution < 3:
            raise ValueError("resolution must be at least 3")
        for r in self.rules:
            if r.speed_term not in INPUT_TERMS or r.throttle_term not in INPUT_TERMS:
                raise ValueError(f"rule {r} uses an unknown input term")
            if r.output_term not in OUTPUT_TERMS:
                raise ValueError(f"rule {r} uses an unknown output term")
            if not 0 < r.weight <= 1:
                raise ValueError(f"rule weight must lie in (0, 1], got {r.weight}")
        if not allow_custom_rules:
            table = tuple((r.speed_term, r.throttle_term, r.output_term, r.weight)
                          for r in self.rules)
            if table != tuple(r + (1.0,) for r in RULE_TABLE):
                raise ValueError(
                    "rules differ from the standard nine-rule table; "
                    "pass allow_custom_rules=True to use them"
                )

    def to_dict(self) -> dict:
        def var(v):
            return {"universe": list(v.universe),
                    "terms": {k: m.to_dict() for k, m in v.terms.items()}}

        return {
            "speed": var(self.speed),
            "throttle": var(self.throttle),
            "output": var(self.output),
            "rules": [[r.speed_term, r.throttle_term, r.output_term, r.weight] for r in self.rules],
            "resolution": self.resolution,
        }

    @classmethod
    def from_dict(cls, blob: dict) -> "FisConfig":
        def var(v):
            return FuzzyVariable(
                tuple(v["universe"]),
                {k: MembershipFunction(m["shape"], tuple(m["breakpoints"]))
                 for k, m in v["terms"].items()},
            )

        default = cls.default()
        try:
            kwargs = {}
            for name in ("speed", "throttle", "output"):
                kwargs[name] = var(blob[name]) if name in blob else getattr(default, name)
            if "rules" in blob:
                kwargs["rules"] = tuple(FuzzyRule(*r) for r in blob["rules"])
            kwargs["resolution"] = int(blob.get("resolution", default.resolution))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"invalid FIS config: {exc}") from None
        return cls(**kwargs)


def load_fis_config(path, allow_custom_rules: bool = False) -> FisConfig:
    with open(path, encoding="utf-8") as fh:
        cfg = FisConfig.from_dict(json.load(fh))
    cfg.validate(allow_custom_rules)
    return cfg


def save_fis_config(config: FisConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2)
        fh.write("\n")


class FuzzyStyleRecognizer(ClassifierMixin, BaseEstimator):
    """Mamdani inference system exposed as a classifier.

    ``fit`` only validates the configuration; the system has no trainable
    parameters.
    """

    def __init__(self, config=None, allow_custom_rules=False):
        self.config = config
        self.allow_custom_rules = allow_custom_rules

    def fit(self, X=None, y=None):
        cfg = self.config if self.config is not None else FisConfig.default()
        cfg.validate(self.allow_custom_rules)
        self.config_ = cfg
        self.grid_ = np.linspace(*cfg.output.universe, cfg.resolution)
        self.output_mu_ = np.stack([cfg.output.terms[r.output_term](self.grid_) for r in cfg.rules])
        self.classes_ = np.array(["aggressive", "normal"])
        self.n_features_in_ = 2
        return self

    def infer(self, X) -> np.ndarray:
        """Crisp output in ``[-3, 3]`` for each ``(speed, throttle)`` row."""
        check_is_fitted(self, "config_")
        X = check_features(X)
        cfg = self.config_
        speed = cfg.speed.clamp(X[:, 0], "speed")
        throttle = cfg.throttle.clamp(X[:, 1], "throttle")
        mu_s = {t: cfg.speed.terms[t](speed) for t in INPUT_TERMS}
        mu_t = {t: cfg.throttle.terms[t](throttle) for t in INPUT_TERMS}
        firing = np.column_stack([
            r.weight * np.minimum(mu_s[r.speed_term], mu_t[r.throttle_term])
            for r in cfg.rules
        ])

        out = np.empty(len(X))
        step = max(1, (1 << 20) // (len(cfg.rules) * self.grid_.size))
        for start in range(0, len(X), step):
            f = firing[start:start + step]
            agg = np.minimum(f[:, :, None], self.output_mu_[None, :, :]).max(axis=1)
            mass = agg.sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                out[start:start + step] = (agg @ self.grid_) / mass
            dead = mass == 0
            if np.any(dead):
                log.warning("no rule fired for %d sample(s); output set to 0", int(dead.sum()))
                out[start:start + step][dead] = 0.0
        return out

    def predict_level(self, X) -> list[Level]:
        return [fuzzy_level(c) for c in self.infer(X)]

    def predict(self, X) -> np.ndarray:
        return np.array([lvl.binary_class.value for lvl in self.predict_level(X)])


_DEFAULT = None


def _default_recognizer() -> FuzzyStyleRecognizer:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = FuzzyStyleRecognizer().fit()
    return _DEFAULT


def fuzzy_infer(speed: float, throttle: float, recognizer: FuzzyStyleRecognizer | None = None) -> float:
    """Crisp style value for one sample."""
    rec = recognizer if recognizer is not None else _default_recognizer()
    return float(rec.infer([[speed, throttle]])[0])


def fuzzy_level(crisp: float) -> Level:
    """Round a crisp value to the nearest grade, ties away from zero.

    Grade 0 becomes 0+ for a positive crisp value and 0- otherwise.
    """
    crisp = float(np.clip(crisp, -3.0, 3.0))
    score = int(np.sign(crisp) * np.floor(abs(crisp) + 0.5))
    return Level.from_score(score, positive=crisp > 0)


@dataclass(frozen=True)
class FuzzyDecision:
    crisp: float
    level: Level

    @property
    def binary_class(self):
        return self.level.binary_class


def classify_run_fuzzy(recognizer: FuzzyStyleRecognizer, run: DriverRun) -> list[FuzzyDecision]:
    crisp = recognizer.infer(extract_features(run))
    return [FuzzyDecision(float(c), fuzzy_level(c)) for c in crisp]
