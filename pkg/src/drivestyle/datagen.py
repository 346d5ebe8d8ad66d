"""Synthetic labeled runs calibrated to per-driver speed/throttle statistics.

Speed is drawn from a Gaussian truncated below at 0 and throttle from a
Gaussian truncated to [0, 1]. The target variance is used as the parent
Gaussian's variance; the parent's location is solved so the *truncated*
mean equals the target mean. Samples are i.i.d. by default, or follow a
stationary AR(1) latent process mapped through the truncated quantile
function, which keeps the marginal distribution unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr
from scipy.stats import truncnorm

from .telemetry import NOMINAL_SAMPLE_RATE_HZ, DriverRun, Label

DEFAULT_RUN_LENGTH = 5000


@dataclass(frozen=True)
class ArchetypeSpec:
    """Target statistics of one synthetic driver."""

    label: Label
    speed_mean: float
    speed_var: float
    throttle_mean: float
    throttle_var: float
    run_length: int = DEFAULT_RUN_LENGTH
    seed: int = 0
    name: str = ""
    ar1: float = 0.0
    sample_rate_hz: float = NOMINAL_SAMPLE_RATE_HZ

    def __post_init__(self):
        object.__setattr__(self, "label", Label.parse(self.label))
        if self.label is Label.UNLABELED:
            raise ValueError("archetype label must be aggressive or normal")
        if not self.speed_mean > 0:
            raise ValueError("speed_mean must be positive")
        if not 0 < self.throttle_mean < 1:
            raise ValueError("throttle_mean must lie in (0, 1)")
        if not (self.speed_var > 0 and self.throttle_var > 0):
            raise ValueError("variances must be positive")
        if not (isinstance(self.run_length, (int, np.integer)) and self.run_length > 0):
            raise ValueError(f"run_length must be a positive integer, got {self.run_length!r}")
        if not -1 < self.ar1 < 1:
            raise ValueError("ar1 coefficient must lie in (-1, 1)")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["label"] = self.label.value
        return d


# Per-run (mean, variance) of speed [km/h] and throttle, nine runs per driver.
_AGGRESSIVE_ROWS = (
    (56.849, 317.551, 0.566, 0.131),
    (61.334, 256.959, 0.610, 0.133),
    (61.928, 250.443, 0.645, 0.136),
    (61.336, 273.581, 0.625, 0.127),
    (64.451, 307.289, 0.599, 0.146),
    (64.241, 301.918, 0.688, 0.120),
    (63.146, 296.334, 0.612, 0.142),
    (61.932, 263.429, 0.649, 0.142),
    (64.147, 287.705, 0.608, 0.126),
)
_NORMAL_ROWS = (
    (52.492, 152.317, 0.285, 0.099),
    (48.530, 173.298, 0.259, 0.063),
    (52.925, 129.773, 0.235, 0.071),
    (50.565, 137.977, 0.238, 0.059),
    (50.666, 106.973, 0.195, 0.056),
    (50.531, 117.186, 0.213, 0.064),
    (49.487, 154.639, 0.284, 0.057),
    (46.344, 115.193, 0.156, 0.030),
    (48.247, 95.392, 0.153, 0.037),
)


def default_archetypes(run_length: int = DEFAULT_RUN_LENGTH) -> list[ArchetypeSpec]:
    """The 18 reference drivers: nine aggressive rows, then nine normal rows."""
    specs = []
    for label, rows, tag in ((Label.AGGRESSIVE, _AGGRESSIVE_ROWS, "agg"),
                             (Label.NORMAL, _NORMAL_ROWS, "norm")):
        for i, (sm, sv, tm, tv) in enumerate(rows, start=1):
            specs.append(ArchetypeSpec(label, sm, sv, tm, tv, run_length=run_length,
                                       name=f"{tag}{i:02d}"))
    return specs


@lru_cache(maxsize=256)
def parent_location(mean: float, var: float, lower: float, upper: float) -> float:
    """Location of the parent Gaussian whose truncation to ``[lower, upper]`` has mean ``mean``.

    The parent's standard deviation is ``sqrt(var)``.
    """
    if not lower < mean < upper:
        raise ValueError(f"mean {mean} is not inside ({lower}, {upper})")
    sd = math.sqrt(var)

    def gap(loc):
        a, b = (lower - loc) / sd, (upper - loc) / sd
        return truncnorm.mean(a, b, loc=loc, scale=sd) - mean

    lo, hi = mean - 10 * sd, mean + 10 * sd
    if gap(lo) * gap(hi) > 0:
        raise ValueError(f"cannot reach truncated mean {mean} with variance {var}")
    return brentq(gap, lo, hi, xtol=1e-12)


def _latent(rng: np.random.Generator, n: int, rho: float) -> np.ndarray:
    eps = rng.standard_normal(n)
    if rho == 0.0:
        return eps
    z = np.empty(n)
    z[0] = eps[0]
    scale = math.sqrt(1.0 - rho * rho)
    for i in range(1, n):
        z[i] = rho * z[i - 1] + scale * eps[i]
    return z


def _truncated(z: np.ndarray, mean: float, var: float, lower: float, upper: float) -> np.ndarray:
    loc = parent_location(mean, var, lower, upper)
    sd = math.sqrt(var)
    a, b = (lower - loc) / sd, (upper - loc) / sd
    u = np.clip(ndtr(z), np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    x = truncnorm.ppf(u, a, b, loc=loc, scale=sd)
    return np.clip(x, lower, upper)  # ppf round-off only


def generate_run(spec: ArchetypeSpec, run_id: str | None = None) -> DriverRun:
    """Draw one run of ``spec.run_length`` samples, deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    n = spec.run_length
    speed = _truncated(_latent(rng, n, spec.ar1), spec.speed_mean, spec.speed_var, 0.0, math.inf)
    throttle = _truncated(_latent(rng, n, spec.ar1), spec.throttle_mean, spec.throttle_var, 0.0, 1.0)
    t = np.arange(n) / spec.sample_rate_hz
    return DriverRun(
        run_id=run_id or spec.name or f"{spec.label.value}-{spec.seed}",
        label=spec.label,
        t=t,
        speed=speed,
        throttle=throttle,
        sample_rate_hz=spec.sample_rate_hz,
    )


def generate_corpus(archetypes: Sequence[ArchetypeSpec], runs_per_archetype: int = 1,
                    master_seed: int = 0) -> list[DriverRun]:
    """Generate ``runs_per_archetype`` runs for every archetype.

    Per-run seeds are spawned from ``master_seed``; each spec's own seed is
    ignored.
    """
    if not archetypes:
        raise ValueError("no archetypes given")
    if not (isinstance(runs_per_archetype, (int, np.integer)) and runs_per_archetype > 0):
        raise ValueError(f"runs_per_archetype must be a positive integer, got {runs_per_archetype!r}")
    children = np.random.SeedSequence(master_seed).spawn(len(archetypes) * runs_per_archetype)
    runs = []
    k = 0
    for i, spec in enumerate(archetypes):
        base = spec.name or f"a{i:02d}"
        for j in range(runs_per_archetype):
            seed = int(children[k].generate_state(1, dtype=np.uint64)[0])
            k += 1
            run_id = base if runs_per_archetype == 1 else f"{base}-r{j + 1}"
            runs.append(generate_run(replace(spec, seed=seed), run_id=run_id))
    return runs


def load_archetypes(path) -> list[ArchetypeSpec]:
    """Read a JSON list of archetype objects (or ``{"archetypes": [...]}``)."""
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    if isinstance(blob, dict):
        blob = blob.get("archetypes")
    if not isinstance(blob, list):
        raise ValueError(f"{path}: expected a list of archetypes")
    specs = []
    for i, entry in enumerate(blob):
        try:
            specs.append(ArchetypeSpec(**entry))
        except TypeError as exc:
            raise ValueError(f"{path}: archetype {i}: {exc}") from None
    return specs


def save_archetypes(specs: Sequence[ArchetypeSpec], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"archetypes": [s.to_dict() for s in specs]}, fh, indent=2)
        fh.write("\n")
