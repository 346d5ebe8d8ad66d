"""Driving-style recognition from vehicle speed and throttle telemetry."""

__version__ = "0.1.0"

from .bayes import (  # noqa: E402
    KdeStyleClassifier,
    StyleDecision,
    classify_run,
    decide,
    euclidean_distances,
    load_model,
    posterior,
    save_model,
    train,
)
from .kde import GaussianKDE, density_at, silverman_bandwidth  # noqa: E402
from .levels import Level, ThresholdTable  # noqa: E402
from .telemetry import (  # noqa: E402
    DriverRun,
    Label,
    TelemetrySample,
    extract_features,
    load_corpus,
    save_corpus,
)

__all__ = [
    "DriverRun",
    "GaussianKDE",
    "KdeStyleClassifier",
    "Label",
    "Level",
    "StyleDecision",
    "TelemetrySample",
    "ThresholdTable",
    "classify_run",
    "decide",
    "density_at",
    "euclidean_distances",
    "extract_features",
    "load_corpus",
    "load_model",
    "posterior",
    "save_corpus",
    "save_model",
    "silverman_bandwidth",
    "train",
]
