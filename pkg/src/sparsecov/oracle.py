"""Closed-form right-hand sides of the thresholding oracle inequalities,
minimax rate functions, and the feasibility conditions that gate them.

The l0 oracle bound exploits entrywise separability: the reference matrix S
ranges over all p x p matrices, so its diagonal matches the target exactly
and each off-diagonal pair independently chooses between keeping the entry
(costing the per-entry penalty twice, once per orientation) and dropping it
(costing its squared value twice).  The lq bound is evaluated by scanning
all truncation levels of the target's sorted off-diagonal entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matrix import InvalidParameterError, SymMatrix, _upper_offdiag

# Per-entry penalty multiplier in the l0 oracle bound: penalty =
# ((1 + sqrt 2) / 2)^2 * tau^2 for threshold tau.
PENALTY_MULTIPLIER = ((1.0 + math.sqrt(2.0)) / 2.0) ** 2


def penalty_from_threshold(tau: float) -> float:
    """Per-entry penalty implied by a threshold: PENALTY_MULTIPLIER * tau^2."""
    if tau <= 0.0:
        raise InvalidParameterError("tau must be positive")
    return PENALTY_MULTIPLIER * tau * tau


@dataclass(frozen=True)
class OracleBoundL0:
    """Value of min_S { |S - Sigma|_F^2 + penalty * (off-diagonal support of S) }.

    best_support_size counts both orientations of each kept pair, matching
    the convention that off-diagonal support always comes in symmetric pairs.
    """

    value: float
    best_support_size: int
    penalty: float


def oracle_l0(sigma: SymMatrix, penalty: float) -> OracleBoundL0:
    """Exact minimum of the approximation-error / support-size trade-off.

    Each off-diagonal pair (i, j), i < j, contributes
    min(2 sigma_ij^2, 2 penalty); the diagonal contributes nothing.
    """
    if penalty <= 0.0:
        raise InvalidParameterError("penalty must be positive")
    u = _upper_offdiag(sigma.array)
    sq = u * u
    value = 2.0 * float(np.sum(np.minimum(sq, penalty)))
    support = 2 * int(np.count_nonzero(sq > penalty))
    return OracleBoundL0(value=value, best_support_size=support, penalty=penalty)


def oracle_lq(sigma: SymMatrix, q: float, rate: float, cprime: float = 1.0) -> float:
    """Approximation / lq-mass trade-off, minimized over truncations of sigma.

    Sorts the p(p-1) off-diagonal entries by magnitude and, for every
    truncation level k, evaluates

        2 * (sum of squares beyond the k largest) + cprime * (lq mass kept) * rate,

    returning the minimum.  ``rate`` is the (log p / n)^(1 - q/2) factor and
    ``cprime`` the constant in front of it (see cprime_constant for the
    default analytic choice).
    """
    if not 0.0 < q < 2.0:
        raise InvalidParameterError("q must lie in (0, 2)")
    if rate <= 0.0 or cprime <= 0.0:
        raise InvalidParameterError("rate and cprime must be positive")
    u = np.abs(_upper_offdiag(sigma.array))
    # Doubled, descending: both orientations of each pair.
    vals = np.sort(np.repeat(u, 2))[::-1]
    sq = vals * vals
    powq = vals**q
    # tail[k] = sum of squares beyond the k largest, mass[k] = lq mass kept.
    tail = np.concatenate(([np.sum(sq)], np.sum(sq) - np.cumsum(sq)))
    mass = np.concatenate(([0.0], np.cumsum(powq)))
    candidates = 2.0 * tail + cprime * mass * rate
    return float(np.min(candidates))


def cprime_constant(q: float, multiplier: float, gamma: float) -> float:
    """Constant realized by optimizing the truncation trade-off over real k.

    Minimizing  mass^(2/q) k^(1 - 2/q) / (2/q - 1) + penalty * k  over real
    k > 0, with penalty = PENALTY_MULTIPLIER * (multiplier * gamma)^2
    * log(p)/n, gives (2 / (2 - q)) * mass * penalty^(1 - q/2), i.e. this
    constant times mass * (log p / n)^(1 - q/2).
    """
    if not 0.0 < q < 2.0:
        raise InvalidParameterError("q must lie in (0, 2)")
    base = math.sqrt(PENALTY_MULTIPLIER) * multiplier * gamma
    return (2.0 / (2.0 - q)) * base ** (2.0 - q)


def lq_truncation_scan(sigma: SymMatrix, q: float, penalty: float) -> tuple[float, int]:
    """Exact integer minimum of  |sigma|_q^2 k^(1-2/q) / (2/q - 1) + penalty k.

    This is the sparse-approximation trade-off behind the lq bound with the
    reference matrix equal to sigma itself; returned alongside the analytic
    real-k optimum (lq_truncation_analytic) so the looseness of the latter
    is visible.
    """
    if not 0.0 < q < 2.0:
        raise InvalidParameterError("q must lie in (0, 2)")
    if penalty <= 0.0:
        raise InvalidParameterError("penalty must be positive")
    p = sigma.dim
    mass = float(np.sum(np.abs(_upper_offdiag(sigma.array)) ** q)) * 2.0
    if mass == 0.0:
        return 0.0, 0
    norm_sq = mass ** (2.0 / q)
    ks = np.arange(1, p * (p - 1) + 1, dtype=np.float64)
    values = norm_sq * ks ** (1.0 - 2.0 / q) / (2.0 / q - 1.0) + penalty * ks
    best = int(np.argmin(values))
    return float(values[best]), best + 1


def lq_truncation_analytic(sigma: SymMatrix, q: float, penalty: float) -> float:
    """Real-k optimum (2/(2-q)) * |sigma|_q^q * penalty^(1 - q/2)."""
    if not 0.0 < q < 2.0:
        raise InvalidParameterError("q must lie in (0, 2)")
    if penalty <= 0.0:
        raise InvalidParameterError("penalty must be positive")
    mass = float(np.sum(np.abs(_upper_offdiag(sigma.array)) ** q)) * 2.0
    return (2.0 / (2.0 - q)) * mass * penalty ** (1.0 - q / 2.0)


# ---------------------------------------------------------------------------
# Minimax rate functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateParams:
    """Arguments of the minimax rate functions.

    radius is the sparsity-class budget; c0 is the free positive constant
    inside the logarithm, defaulting to e/4 (the constant the packing
    construction realizes).
    """

    n: int
    p: int
    radius: float
    q: float
    c0: float = math.e / 4.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidParameterError("n must be at least 1")
        if self.p < 2:
            raise InvalidParameterError("p must be at least 2")
        if self.radius <= 0.0:
            raise InvalidParameterError("radius must be positive")
        if not 0.0 <= self.q <= 2.0:
            raise InvalidParameterError("q must lie in [0, 2]")
        if self.c0 <= 0.0:
            raise InvalidParameterError("c0 must be positive")


def minimax_rate_frobenius(params: RateParams) -> float:
    """Frobenius-risk rate over the globally sparse class:

    radius^(1/2) * ((1/n) log(1 + c0 p^2 / (radius n^(q/2))))^(1/2 - q/4).
    """
    n, p, r, q = params.n, params.p, params.radius, params.q
    if q == 0.0:
        inner = math.log(1.0 + params.c0 * p * p / r)
        return math.sqrt(r) * math.sqrt(inner / n)
    inner = math.log(1.0 + params.c0 * p * p / (r * n ** (q / 2.0)))
    return math.sqrt(r) * (inner / n) ** (0.5 - q / 4.0)


def minimax_rate_l1(params: RateParams) -> float:
    """Operator-l1-risk rate over the column-sparse class:

    radius * ((1/n) log(1 + c0 p / (radius n^(q/2))))^((1-q)/2);
    only defined for q in [0, 1].  At q = 1 the exponent is zero and the
    rate equals radius for every n: no consistency is possible there.
    """
    n, p, r, q = params.n, params.p, params.radius, params.q
    if q > 1.0:
        raise InvalidParameterError("the l1 rate is defined for q in [0, 1]")
    if q == 0.0:
        inner = math.log(1.0 + params.c0 * p / r)
        return r * math.sqrt(inner / n)
    inner = math.log(1.0 + params.c0 * p / (r * n ** (q / 2.0)))
    return r * (inner / n) ** ((1.0 - q) / 2.0)


@dataclass(frozen=True)
class RateConditions:
    """Outcome of the three feasibility conditions gating the rate bounds.

    Frobenius-risk statements need frobenius_budget_ok and support_floor_ok;
    operator-l1 statements need l1_budget_ok and support_floor_ok.
    """

    frobenius_budget_ok: bool
    l1_budget_ok: bool
    support_floor_ok: bool


def rate_feasibility(params: RateParams, c_max: float) -> RateConditions:
    """Evaluate the three conditions

        radius * ((log p)/n)^(1 - q/2)   <= c_max,
        radius * ((log p)/n)^((1-q)/2)   <= c_max,
        radius^(-1) * ((log p)/n)^(q/2)  <= c_max.

    Boundary equality counts as satisfied.
    """
    if c_max <= 0.0:
        raise InvalidParameterError("c_max must be positive")
    n, p, r, q = params.n, params.p, params.radius, params.q
    x = math.log(p) / n
    first = r * x ** (1.0 - q / 2.0) <= c_max
    second = r * x ** ((1.0 - q) / 2.0) <= c_max
    third = (1.0 / r) * (1.0 if q == 0.0 else x ** (q / 2.0)) <= c_max
    return RateConditions(
        frobenius_budget_ok=bool(first),
        l1_budget_ok=bool(second),
        support_floor_ok=bool(third),
    )
