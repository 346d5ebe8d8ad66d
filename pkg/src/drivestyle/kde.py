"""One-dimensional Gaussian kernel density estimation by direct summation."""

from __future__ import annotations

import math
import numbers

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

# Feature dimension of each density; the joint (speed, throttle) density is
# never formed, each feature gets its own 1-D estimator.
DIM = 1

# Elements per evaluation block (query points x stored points).
_BLOCK = 1 << 21


def silverman_bandwidth(values) -> float:
    """Rule-of-thumb bandwidth ``1.06 * std * n ** (-1/5)``.

    ``std`` is the sample standard deviation (``ddof=1``). Returns 0.0 for a
    single value or a constant sample.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    n = values.size
    if n < 2:
        return 0.0
    sigma = float(np.std(values, ddof=1))
    return 1.06 * sigma * n ** (-1.0 / 5.0)


def _as_points(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 2 and values.shape[1] == 1:
        values = values[:, 0]
    if values.ndim != 1:
        raise ValueError(f"expected a 1-D sample, got shape {values.shape}")
    if values.size == 0:
        raise ValueError("cannot fit a density to an empty sample")
    if not np.all(np.isfinite(values)):
        raise ValueError("sample contains non-finite values")
    return values


def _as_queries(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = arr.reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("density evaluation point must be finite")
    return arr, scalar


class GaussianKDE(BaseEstimator):
    """Gaussian kernel density estimate of a single feature.

    Parameters
    ----------
    bandwidth : "silverman" or float, default="silverman"
        Kernel width in feature units, or the name of the automatic rule.
    bandwidth_floor : float or None, default=None
        Lower bound applied to an automatically chosen bandwidth. Needed
        for constant samples, where the rule yields zero; without a floor
        such samples are rejected.

    Attributes
    ----------
    points_ : ndarray of shape (n_points,)
    bandwidth_ : float
    n_points_ : int
    """

    def __init__(self, bandwidth="silverman", bandwidth_floor=None):
        self.bandwidth = bandwidth
        self.bandwidth_floor = bandwidth_floor

    def _resolve_bandwidth(self, points: np.ndarray) -> float:
        bw = self.bandwidth
        if isinstance(bw, str):
            if bw.lower() not in ("silverman", "auto"):
                raise ValueError(f"unknown bandwidth rule {bw!r}")
            lam = silverman_bandwidth(points)
            floor = self.bandwidth_floor
            if floor is not None:
                if not floor > 0:
                    raise ValueError("bandwidth_floor must be positive")
                lam = max(lam, float(floor))
            if not lam > 0:
                raise ValueError(
                    "automatic bandwidth is zero for a constant sample; "
                    "set bandwidth_floor or an explicit bandwidth"
                )
            return lam
        if not isinstance(bw, numbers.Real) or not math.isfinite(bw) or bw <= 0:
            raise ValueError(f"bandwidth must be a positive number, got {bw!r}")
        return float(bw)

    def fit(self, X, y=None):
        points = _as_points(X)
        self.bandwidth_ = self._resolve_bandwidth(points)
        points = points.copy()
        points.setflags(write=False)
        self.points_ = points
        self.n_points_ = points.size
        return self

    @property
    def _norm(self) -> float:
        return self.n_points_ * (2.0 * self.bandwidth_**2 * math.pi) ** (DIM / 2.0)

    def _kernel_sums(self, q: np.ndarray) -> np.ndarray:
        pts, lam = self.points_, self.bandwidth_
        out = np.empty(q.size)
        step = max(1, _BLOCK // pts.size)
        for start in range(0, q.size, step):
            d = q[start:start + step, None] - pts[None, :]
            np.divide(d, lam, out=d)
            np.multiply(d, d, out=d)
            np.multiply(d, -0.5, out=d)
            np.exp(d, out=d)
            out[start:start + step] = d.sum(axis=1)
        return out

    def density(self, x):
        """Evaluate the density at ``x`` (scalar or array) in 1/feature-units."""
        check_is_fitted(self, "points_")
        q, scalar = _as_queries(x)
        dens = self._kernel_sums(q) / self._norm
        return float(dens[0]) if scalar else dens

    def log_density(self, x):
        """Natural log of :meth:`density`, finite even where the density underflows."""
        check_is_fitted(self, "points_")
        q, scalar = _as_queries(x)
        pts, lam = self.points_, self.bandwidth_
        out = np.empty(q.size)
        step = max(1, _BLOCK // pts.size)
        for start in range(0, q.size, step):
            d = (q[start:start + step, None] - pts[None, :]) / lam
            out[start:start + step] = logsumexp(-0.5 * d * d, axis=1)
        out -= math.log(self._norm)
        return float(out[0]) if scalar else out

    def score_samples(self, X):
        """Log-density per sample, mirroring :class:`sklearn.neighbors.KernelDensity`."""
        return self.log_density(np.asarray(X, dtype=float).reshape(-1))

    def to_dict(self) -> dict:
        check_is_fitted(self, "points_")
        return {"points": self.points_.tolist(), "bandwidth": self.bandwidth_}

    @classmethod
    def from_dict(cls, blob: dict) -> "GaussianKDE":
        try:
            points, bandwidth = blob["points"], blob["bandwidth"]
        except (KeyError, TypeError):
            raise ValueError("KDE blob needs 'points' and 'bandwidth'") from None
        return cls(bandwidth=float(bandwidth)).fit(points)


def fit(values, bandwidth="silverman", bandwidth_floor=None) -> GaussianKDE:
    """Fit a :class:`GaussianKDE` to ``values``."""
    return GaussianKDE(bandwidth=bandwidth, bandwidth_floor=bandwidth_floor).fit(values)


def density_at(model: GaussianKDE, x0):
    """Density of a fitted model at ``x0``."""
    return model.density(x0)
