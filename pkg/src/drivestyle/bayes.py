"""KDE likelihoods, per-feature Bayes posteriors and distance-based style levels.

Each feature (speed, throttle) gets its own class-conditional density, so no
covariance between the features is modelled. For an input ``x`` the
per-feature posteriors of a class form a point in the unit square; its
distance from the origin is the class score, and the difference of the two
class scores is mapped to a signed level by a :class:`ThresholdTable`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import __version__
from ._validation import check_features, check_labels
from .kde import GaussianKDE
from .levels import Level, ThresholdTable
from .telemetry import DriverRun, Label, extract_features, require_labeled

FEATURES = ("speed", "throttle")
CLASSES = (Label.AGGRESSIVE, Label.NORMAL)

#: 1e-3 of the nominal feature range (speed 0-120 km/h, throttle 0-1).
DEFAULT_BANDWIDTH_FLOOR = {"speed": 0.12, "throttle": 0.001}

MODEL_FORMAT = "drivestyle-model"
MODEL_VERSION = 1

# Below this evidence the direct sums have lost precision; use log space.
_TINY_EVIDENCE = 1e-290


@dataclass(frozen=True)
class StyleDecision:
    """Per-sample output of the distance classifier."""

    d_agg: float
    d_norm: float
    level: Level

    def __post_init__(self):
        if not (self.d_agg >= 0 and self.d_norm >= 0):
            raise ValueError("distances must be non-negative")

    @property
    def margin(self) -> float:
        return self.d_agg - self.d_norm

    @property
    def binary_class(self) -> Label:
        return self.level.binary_class


class ModelFormatError(ValueError):
    """Raised for unreadable, truncated or incompatible model files."""


def _parse_bandwidth(spec, feature: str):
    if isinstance(spec, dict):
        try:
            spec = spec[feature]
        except KeyError:
            raise ValueError(f"bandwidth spec has no entry for {feature!r}") from None
    if isinstance(spec, str):
        if spec.lower() not in ("auto", "silverman"):
            raise ValueError(f"unknown bandwidth spec {spec!r}")
        return "silverman"
    return spec


class KdeStyleClassifier(ClassifierMixin, BaseEstimator):
    """Two-class driving-style classifier on ``(speed, throttle)`` samples.

    Parameters
    ----------
    bandwidth : "silverman", float or dict, default="silverman"
        Kernel width for every feature, or a mapping ``{"speed": ...,
        "throttle": ...}`` whose values are floats or ``"silverman"``.
    bandwidth_floor : dict or None, default=None
        Per-feature lower bound for automatic bandwidths. ``None`` uses
        :data:`DEFAULT_BANDWIDTH_FLOOR`.
    thresholds : ThresholdTable or None, default=None
        Margin-to-level mapping; ``None`` uses :meth:`ThresholdTable.default`.

    Attributes
    ----------
    classes_ : ndarray of str, ``["aggressive", "normal"]``
    kdes_ : dict
        ``kdes_[label][feature]`` is a fitted :class:`~drivestyle.kde.GaussianKDE`.
    priors_ : ndarray of shape (2,)
        Class priors, uniform over the two classes.
    thresholds_ : ThresholdTable
    """

    def __init__(self, bandwidth="silverman", bandwidth_floor=None, thresholds=None):
        self.bandwidth = bandwidth
        self.bandwidth_floor = bandwidth_floor
        self.thresholds = thresholds

    def fit(self, X, y):
        X = check_features(X)
        y = check_labels(y, len(X))
        missing = [c.value for c in CLASSES if not np.any(y == c.value)]
        if missing:
            raise ValueError(f"training data lacks class(es): {', '.join(missing)}")

        floors = dict(DEFAULT_BANDWIDTH_FLOOR)
        if self.bandwidth_floor is not None:
            floors.update(self.bandwidth_floor)

        self.kdes_ = {}
        for label in CLASSES:
            rows = X[y == label.value]
            self.kdes_[label] = {
                feat: GaussianKDE(
                    bandwidth=_parse_bandwidth(self.bandwidth, feat),
                    bandwidth_floor=floors[feat],
                ).fit(rows[:, j])
                for j, feat in enumerate(FEATURES)
            }
        self.classes_ = np.array([c.value for c in CLASSES])
        self.priors_ = np.full(len(CLASSES), 1.0 / len(CLASSES))
        self.thresholds_ = self.thresholds if self.thresholds is not None else ThresholdTable.default()
        self.n_features_in_ = len(FEATURES)
        return self

    def likelihoods(self, x, feature: str) -> np.ndarray:
        """Class-conditional densities ``p(x | C)`` of one feature, shape (n, 2)."""
        check_is_fitted(self, "kdes_")
        _check_feature_name(feature)
        x = np.asarray(x, dtype=float).reshape(-1)
        return np.column_stack([self.kdes_[c][feature].density(x) for c in CLASSES])

    def posterior(self, x, feature: str) -> np.ndarray:
        """Per-feature posteriors ``P(C | x)`` for both classes, shape (n, 2).

        Columns follow ``classes_`` (aggressive, normal).
        """
        check_is_fitted(self, "kdes_")
        _check_feature_name(feature)
        x = np.asarray(x, dtype=float).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise ValueError(f"{feature} value must be finite")
        joint = self.likelihoods(x, feature) * self.priors_
        evidence = joint.sum(axis=1)
        out = np.empty_like(joint)
        ok = evidence > _TINY_EVIDENCE
        out[ok] = joint[ok] / evidence[ok, None]
        if not np.all(ok):
            far = x[~ok]
            logs = np.column_stack([
                self.kdes_[c][feature].log_density(far) + math.log(p)
                for c, p in zip(CLASSES, self.priors_)
            ])
            out[~ok, 0] = expit(logs[:, 0] - logs[:, 1])
            out[~ok, 1] = expit(logs[:, 1] - logs[:, 0])
        return out

    def feature_posteriors(self, X) -> np.ndarray:
        """Posteriors for every sample, class and feature, shape (n, 2 classes, 2 features)."""
        X = check_features(X)
        return np.stack(
            [self.posterior(X[:, j], feat) for j, feat in enumerate(FEATURES)], axis=2
        )

    def distances(self, X) -> np.ndarray:
        """Distance of each class's posterior point from the origin, shape (n, 2)."""
        post = self.feature_posteriors(X)
        return np.sqrt(np.sum(post * post, axis=2))

    def decision_function(self, X) -> np.ndarray:
        """Margin ``d_agg - d_norm``; positive leans aggressive."""
        d = self.distances(X)
        return d[:, 0] - d[:, 1]

    def predict_level(self, X) -> list[Level]:
        check_is_fitted(self, "kdes_")
        return self.thresholds_.levels(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return np.array([lvl.binary_class.value for lvl in self.predict_level(X)])

    def decide(self, X) -> list[StyleDecision]:
        check_is_fitted(self, "kdes_")
        d = self.distances(X)
        levels = self.thresholds_.levels(d[:, 0] - d[:, 1])
        return [
            StyleDecision(float(da), float(dn), lvl)
            for da, dn, lvl in zip(d[:, 0], d[:, 1], levels)
        ]


def _check_feature_name(feature: str) -> None:
    if feature not in FEATURES:
        raise ValueError(f"unknown feature {feature!r}; expected one of {FEATURES}")


def train(runs: Sequence[DriverRun], bandwidth="silverman", thresholds=None,
          bandwidth_floor=None) -> KdeStyleClassifier:
    """Fit a classifier on the pooled samples of labeled runs."""
    runs = list(runs)
    require_labeled(runs, "training")
    X = np.concatenate([extract_features(r) for r in runs])
    y = np.concatenate([np.full(len(r), r.label.value) for r in runs])
    return KdeStyleClassifier(
        bandwidth=bandwidth, bandwidth_floor=bandwidth_floor, thresholds=thresholds
    ).fit(X, y)


def posterior(model: KdeStyleClassifier, feature: str, x: float) -> tuple[float, float]:
    """``(P(aggressive | x), P(normal | x))`` for a single feature value."""
    if not math.isfinite(x):
        raise ValueError(f"{feature} value must be finite")
    p = model.posterior([x], feature)[0]
    return float(p[0]), float(p[1])


def euclidean_distances(model: KdeStyleClassifier, x) -> tuple[float, float]:
    """``(d_agg, d_norm)`` for one ``(speed, throttle)`` pair."""
    d = model.distances(np.asarray(x, dtype=float).reshape(1, 2))[0]
    return float(d[0]), float(d[1])


def decide(model: KdeStyleClassifier, x) -> StyleDecision:
    return model.decide(np.asarray(x, dtype=float).reshape(1, 2))[0]


def classify_run(model: KdeStyleClassifier, run: DriverRun) -> list[StyleDecision]:
    """One decision per sample of ``run``, in sample order."""
    return model.decide(extract_features(run))


def model_to_dict(model: KdeStyleClassifier, metadata: dict | None = None) -> dict:
    check_is_fitted(model, "kdes_")
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "tool_version": __version__,
        "metadata": dict(metadata or {}),
        "params": {
            "bandwidth": model.bandwidth,
            "bandwidth_floor": model.bandwidth_floor,
        },
        "priors": {c.value: float(p) for c, p in zip(CLASSES, model.priors_)},
        "thresholds": model.thresholds_.to_dict(),
        "kde": {
            c.value: {f: model.kdes_[c][f].to_dict() for f in FEATURES} for c in CLASSES
        },
    }


def model_from_dict(blob: dict) -> KdeStyleClassifier:
    if not isinstance(blob, dict) or blob.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a drivestyle model file")
    if blob.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"model version {blob.get('version')!r} is not supported "
            f"(expected {MODEL_VERSION})"
        )
    try:
        params = blob["params"]
        thresholds = ThresholdTable.from_dict(blob["thresholds"])
        model = KdeStyleClassifier(
            bandwidth=params["bandwidth"],
            bandwidth_floor=params["bandwidth_floor"],
            thresholds=thresholds,
        )
        model.kdes_ = {
            c: {f: GaussianKDE.from_dict(blob["kde"][c.value][f]) for f in FEATURES}
            for c in CLASSES
        }
        priors = np.array([float(blob["priors"][c.value]) for c in CLASSES])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from None
    if np.any(priors <= 0) or abs(priors.sum() - 1.0) > 1e-12:
        raise ModelFormatError("priors must be positive and sum to 1")
    model.classes_ = np.array([c.value for c in CLASSES])
    model.priors_ = priors
    model.thresholds_ = thresholds
    model.n_features_in_ = len(FEATURES)
    return model


def save_model(model: KdeStyleClassifier, path, metadata: dict | None = None) -> None:
    """Write a fitted model as versioned JSON.

    Raises:
        sklearn.exceptions.NotFittedError: if ``model`` was never fitted.
    """
    blob = model_to_dict(model, metadata)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, allow_nan=False)
        fh.write("\n")


def load_model(path) -> KdeStyleClassifier:
    try:
        with open(path, encoding="utf-8") as fh:
            blob = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return model_from_dict(blob)
