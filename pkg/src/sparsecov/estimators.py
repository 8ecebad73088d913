"""Sample covariance and entrywise thresholding estimators.

The threshold is tau = multiplier * gamma * sqrt(log(p) / n), where gamma is
a tail constant for the entrywise noise max_{i != j} |sigma*_ij - sigma_ij|.
gamma is not known in closed form here, so ``calibrate_gamma`` estimates it
by simulation under the identity covariance; the calibrated value is meant
to be cached per (p, n) in experiment configs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .matrix import InvalidParameterError, SymMatrix, max_offdiag_abs_diff
from .rng import derive_seed, generator


class ThresholdValidityWarning(UserWarning):
    """The computed threshold exceeds its validity cap."""


@dataclass(frozen=True)
class ThresholdConfig:
    """Parameters defining the threshold tau = multiplier * gamma * sqrt(log p / n).

    multiplier must exceed 1 (it controls the polynomial failure probability
    of the thresholding estimators); delta caps the thresholds for which the
    tail bound behind gamma is valid.  Entries of a correlation-like matrix
    are at most 1, hence the default cap.
    """

    multiplier: float
    gamma: float
    n: int
    p: int
    delta: float = 1.0

    def __post_init__(self) -> None:
        if self.multiplier <= 1.0:
            raise InvalidParameterError("multiplier must exceed 1")
        if self.gamma <= 0.0:
            raise InvalidParameterError("gamma must be positive")
        if self.delta <= 0.0:
            raise InvalidParameterError("delta must be positive")
        if self.n < 1:
            raise InvalidParameterError("n must be at least 1")
        if self.p < 2:
            raise InvalidParameterError("p must be at least 2")

    @property
    def tau(self) -> float:
        return self.multiplier * self.gamma * math.sqrt(math.log(self.p) / self.n)

    @property
    def tau_within_cap(self) -> bool:
        return self.tau <= self.delta


def threshold_value(cfg: ThresholdConfig) -> float:
    """tau for the config; warns (does not raise) when tau exceeds its cap."""
    tau = cfg.tau
    if tau > cfg.delta:
        warnings.warn(
            f"threshold {tau:.6g} exceeds validity cap {cfg.delta:.6g}",
            ThresholdValidityWarning,
            stacklevel=2,
        )
    return tau


def sample_covariance(data: np.ndarray, center: bool = False) -> SymMatrix:
    """Empirical covariance of the rows of data.

    Default is the zero-mean convention (1/n) sum_t x_t x_t', matching the
    centered Gaussian model.  With center=True the rows are mean-subtracted
    and the divisor becomes n - 1, for data whose mean is unknown.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidParameterError(f"data must be 2-d, got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise InvalidParameterError("need at least 2 observations")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("data entries must be finite")
    if center:
        x = x - np.mean(x, axis=0, keepdims=True)
        s = (x.T @ x) / (n - 1)
    else:
        s = (x.T @ x) / n
    # BLAS output can be asymmetric in the last ulp; mirror the upper triangle.
    s = np.triu(s) + np.triu(s, 1).T
    return SymMatrix(s)


def soft_threshold(sigma_star: SymMatrix, tau: float) -> SymMatrix:
    """Shrink every off-diagonal entry by tau toward zero; set the diagonal to 1.

    Off-diagonal rule: sign(x) * max(|x| - tau, 0).  Entries at or below tau
    in magnitude become exact zeros.
    """
    if tau <= 0.0:
        raise InvalidParameterError("tau must be positive")
    a = sigma_star.array
    out = np.sign(a) * np.maximum(np.abs(a) - tau, 0.0)
    np.fill_diagonal(out, 1.0)
    return SymMatrix(out)


def hard_threshold(sigma_star: SymMatrix, tau: float) -> SymMatrix:
    """Keep off-diagonal entries strictly above tau in magnitude; diagonal set to 1.

    At |x| == tau the entry is zeroed, agreeing with the soft rule at the
    boundary.
    """
    if tau <= 0.0:
        raise InvalidParameterError("tau must be positive")
    a = sigma_star.array
    out = np.where(np.abs(a) > tau, a, 0.0)
    np.fill_diagonal(out, 1.0)
    return SymMatrix(out)


def max_entrywise_deviation(sigma_star: SymMatrix, sigma: SymMatrix) -> float:
    """max_{i != j} |sigma*_ij - sigma_ij| (diagonal excluded)."""
    return max_offdiag_abs_diff(sigma_star, sigma)


def calibrate_gamma(
    p: int,
    n: int,
    trials: int = 500,
    quantile: float = 0.99,
    seed: int = 0,
) -> float:
    """Estimate the entrywise-noise tail constant gamma by simulation.

    Draws `trials` datasets of n i.i.d. N(0, I_p) rows, records
    max_{i != j} |sigma*_ij| * sqrt(n / log p) for each, and returns the
    requested quantile of the recorded values.  Deterministic given seed.
    """
    if trials < 100:
        raise InvalidParameterError("need at least 100 calibration trials")
    if not 0.0 < quantile < 1.0:
        raise InvalidParameterError("quantile must lie in (0, 1)")
    if p < 2 or n < 2:
        raise InvalidParameterError("need p >= 2 and n >= 2")
    scale = math.sqrt(n / math.log(p))
    iu = np.triu_indices(p, k=1)
    stats = np.empty(trials)
    for t in range(trials):
        x = generator(derive_seed(seed, t)).standard_normal((n, p))
        s = (x.T @ x) / n
        stats[t] = np.max(np.abs(s[iu])) * scale
    return float(np.quantile(stats, quantile))
