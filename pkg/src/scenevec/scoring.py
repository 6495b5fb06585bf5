"""Pairwise discrepancy scores, temporal weights, and frequency normalization.

Discrepancy scores map the planar distance between two objects in a frame
to [0, 1], where 0 means "same spot" and 1 means "far apart".  Temporal
weights come from an unnormalized Gaussian density over timestamp offsets.
Frequency normalization rescales per-timestamp occurrence counts so that a
label's busiest timestamp scores 1 and absence scores nearly 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

MAX_PLANAR_DIST = math.sqrt(2.0)  # corner-to-corner on the unit square

DEFAULT_D_THETA = 0.3
DEFAULT_SIGMA_D = 0.25
DEFAULT_SIGMA_T = 1.0
DEFAULT_EPSILON = 0.01

# Below this width the inverse temporal weight (1 - gamma) flattens out and
# stops discriminating between nearby and distant timestamps.
NARROW_SIGMA_T = 0.4


def spatial_distance(a, b) -> float:
    """Euclidean distance between two object centers in normalized coordinates."""
    return math.hypot(a.cx - b.cx, a.cy - b.cy)


def score_threshold(d: float, d_theta: float = DEFAULT_D_THETA) -> float:
    """0 when the distance falls under d_theta, else 1."""
    if d_theta <= 0:
        raise ValueError(f"d_theta must be positive, got {d_theta}")
    return 0.0 if d < d_theta else 1.0


def score_minmax(d: float) -> float:
    """Distance scaled by the maximum possible on the unit square."""
    if d < 0 or d > MAX_PLANAR_DIST + 1e-12:
        raise ValueError(f"distance {d} outside [0, sqrt(2)]")
    return min(d, MAX_PLANAR_DIST) / MAX_PLANAR_DIST


def score_gaussian(d: float, sigma_d: float = DEFAULT_SIGMA_D) -> float:
    """1 - exp(-d^2 / (2 sigma_d^2)): 0 at d=0, saturating toward 1."""
    if sigma_d <= 0:
        raise ValueError(f"sigma_d must be positive, got {sigma_d}")
    return 1.0 - math.exp(-(d * d) / (2.0 * sigma_d * sigma_d))


@dataclass(frozen=True)
class DiscrepancyScorer:
    """Configured map from planar distance to a [0, 1] discrepancy.

    method is one of "threshold", "minmax", "gaussian".
    """

    method: str = "gaussian"
    d_theta: float = DEFAULT_D_THETA
    sigma_d: float = DEFAULT_SIGMA_D

    def __post_init__(self):
        if self.method not in ("threshold", "minmax", "gaussian"):
            raise ValueError(f"unknown discrepancy method {self.method!r}")
        if self.d_theta <= 0:
            raise ValueError(f"d_theta must be positive, got {self.d_theta}")
        if self.sigma_d <= 0:
            raise ValueError(f"sigma_d must be positive, got {self.sigma_d}")

    def score(self, d: float) -> float:
        if self.method == "threshold":
            return score_threshold(d, self.d_theta)
        if self.method == "minmax":
            return score_minmax(d)
        return score_gaussian(d, self.sigma_d)

    def pair(self, a, b) -> float:
        """Discrepancy of two instances by their overlaid frame coordinates."""
        return self.score(spatial_distance(a, b))


def temporal_weight(t_r: int, t_c: int, sigma: float = DEFAULT_SIGMA_T) -> float:
    """Gaussian density of the timestamp offset t_c - t_r.

    The raw density is used, not a peak-normalized value, so the weight at
    offset 0 is 1/sqrt(2 pi sigma^2) rather than 1.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    off = float(t_c) - float(t_r)
    return math.exp(-(off * off) / (2.0 * sigma * sigma)) / math.sqrt(2.0 * math.pi * sigma * sigma)


@dataclass(frozen=True)
class DiffusionKernel:
    """Temporal Gaussian weighting over timestamp offsets."""

    sigma_t: float = DEFAULT_SIGMA_T

    def __post_init__(self):
        if self.sigma_t <= 0:
            raise ValueError(f"sigma_t must be positive, got {self.sigma_t}")
        if self.sigma_t < NARROW_SIGMA_T:
            warnings.warn(
                f"sigma_t={self.sigma_t} is narrow; inverse weights (1 - gamma) "
                "barely discriminate between timestamp offsets",
                stacklevel=2,
            )

    def weight(self, t_r: int, t_c: int) -> float:
        return temporal_weight(t_r, t_c, self.sigma_t)

    def matrix(self, n_timestamps: int) -> np.ndarray:
        """(T, T) array of weight(row, col)."""
        t = np.arange(n_timestamps, dtype=np.float64)
        off = t[None, :] - t[:, None]
        var = self.sigma_t * self.sigma_t
        return np.exp(-(off * off) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)

    def inverse_factor(self, t_r: int, t_c: int) -> float:
        """1 - gamma, the damping applied to cross-timestamp discrepancies."""
        return 1.0 - self.weight(t_r, t_c)


class FrequencyNormalizer:
    """Per-timestamp frequency of each label rescaled to (0, 1].

    Counts pass through the saturating transform 1 - exp(-f^2 / (2 sigma_f^2)),
    then each label is divided by its own maximum over timestamps (both sides
    padded by epsilon).  The busiest timestamp of a label maps to exactly 1;
    a timestamp where the label never occurs maps to roughly epsilon.
    """

    def __init__(self, freq: np.ndarray, sigma_f: float | None = None,
                 epsilon: float = DEFAULT_EPSILON):
        freq = np.asarray(freq, dtype=np.float64)
        if freq.ndim != 2:
            raise ValueError("freq must be a (labels, timestamps) table")
        if np.any(freq < 0):
            raise ValueError("frequencies cannot be negative")
        if sigma_f is None:
            peak = float(freq.max()) if freq.size else 0.0
            sigma_f = peak / 2.0
        if sigma_f <= 0:
            raise ValueError(f"sigma_f must be positive, got {sigma_f}")
        if epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.sigma_f = float(sigma_f)
        self.epsilon = float(epsilon)
        squashed = 1.0 - np.exp(-(freq * freq) / (2.0 * sigma_f * sigma_f))
        peaks = squashed.max(axis=1)
        self._dead = peaks <= 0.0
        self.table = (squashed + epsilon) / (peaks[:, None] + epsilon)

    def normalized(self, label: int, t: int) -> float:
        if self._dead[label]:
            raise ValueError(f"label {label} never occurs in any timestamp")
        return float(self.table[label, t])


def phi_avg(n_r: float, n_c: float) -> float:
    """Mean of the two normalized frequencies."""
    return 0.5 * (n_r + n_c)


def phi_min(n_r: float, n_c: float) -> float:
    """Smaller of the two normalized frequencies."""
    return min(n_r, n_c)


def omega_ln(phi: float) -> float:
    """Log frequency weight ln(1.5 / phi), doubled when phi <= 0.5."""
    if phi <= 0:
        raise ValueError(f"phi must be positive, got {phi}")
    w = math.log(1.5 / phi)
    return w if phi > 0.5 else 2.0 * w
