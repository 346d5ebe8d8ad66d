"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .telemetry import Label


def check_features(X, n_features: int = 2) -> np.ndarray:
    """Validate a ``(n_samples, 2)`` matrix of ``(speed, throttle)`` rows."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != n_features:
        raise ValueError(
            f"expected {n_features} feature columns (speed, throttle), got {X.shape[1]}"
        )
    return X


def check_labels(y, n_samples: int) -> np.ndarray:
    """Normalise class labels to ``"aggressive"``/``"normal"`` strings."""
    y = np.asarray(y, dtype=object).reshape(-1)
    if y.size != n_samples:
        raise ValueError(f"got {y.size} labels for {n_samples} samples")
    out = np.array([Label.parse(v).value for v in y], dtype=object)
    if np.any(out == Label.UNLABELED.value):
        raise ValueError("labels must be aggressive or normal")
    return out
