"""Certified packing families of near-identity covariance matrices.

A family is a set of matrices I + (a/2) B where each B is a symmetric
binary support pattern with exactly k over-diagonal ones, drawn either from
a band around the diagonal (variant "banded", separated in Frobenius norm)
or from the first row/column (variant "first_row", separated in the
operator-l1 norm).  Members are pairwise well separated while each stays
close to the identity in Kullback-Leibler divergence, which is what a
minimax lower bound needs.

Existence results guarantee exponentially many separated patterns but give
no algorithm, so the builder uses greedy random packing and certifies the
result exhaustively: achieved cardinality is reported, never assumed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import gaussian
from .matrix import (
    InvalidParameterError,
    SparsityClass,
    SymMatrix,
    class_membership,
    is_diagonally_dominant,
)
from .oracle import RateParams, RateConditions, minimax_rate_frobenius, minimax_rate_l1, rate_feasibility
from .rng import derive_seed, generator

# Condition (ii) of the two-point reduction: n * KL must not exceed this
# fraction of log-cardinality.  Configurable for sensitivity analysis.
KL_BUDGET_FRACTION = 2.0**-4


class InfeasiblePackingError(InvalidParameterError):
    """The requested packing family cannot be constructed."""


def _band_slots(p: int, k: int) -> np.ndarray:
    """Over-diagonal positions (i, j) with j - i <= floor(sqrt(k)), row-major."""
    w = math.isqrt(k)
    slots = [(i, j) for i in range(p - 1) for j in range(i + 1, min(i + w + 1, p))]
    return np.array(slots, dtype=np.int64)


def _first_row_slots(p: int) -> np.ndarray:
    return np.array([(0, j) for j in range(1, p)], dtype=np.int64)


@dataclass(frozen=True)
class PackingConfig:
    """Shape of one packing family.

    k is the number of over-diagonal ones per support; base_amplitude scales
    the entry magnitude a = base_amplitude * sqrt(log(1 + ...) / n), and is
    halved automatically at build time until all members are diagonally
    dominant.
    """

    p: int
    k: int
    n: int
    variant: str  # "banded" | "first_row"
    base_amplitude: float = 0.1

    def __post_init__(self) -> None:
        if self.variant not in ("banded", "first_row"):
            raise InvalidParameterError(f"unknown variant {self.variant!r}")
        if self.p < 2:
            raise InvalidParameterError("p must be at least 2")
        if self.k < 1:
            raise InvalidParameterError("k must be at least 1")
        if self.n < 1:
            raise InvalidParameterError("n must be at least 1")
        if self.base_amplitude <= 0.0:
            raise InvalidParameterError("base_amplitude must be positive")
        if self.variant == "banded":
            if len(_band_slots(self.p, self.k)) < self.k:
                raise InfeasiblePackingError(
                    f"band of width {math.isqrt(self.k)} at p={self.p} has fewer than k={self.k} slots"
                )
        else:
            if self.k > self.p - 1:
                raise InfeasiblePackingError(f"first row holds at most p-1={self.p - 1} entries")

    def check_regime(self) -> None:
        """Reject shapes outside the regime the separation argument covers."""
        if self.variant == "banded" and self.k > self.p * self.p / 16.0:
            raise InfeasiblePackingError(
                f"banded construction requires k <= p^2/16 (k={self.k}, p={self.p})"
            )
        if self.variant == "first_row" and self.k > (self.p - 1) / 2.0:
            raise InfeasiblePackingError(
                f"first-row construction requires k <= (p-1)/2 (k={self.k}, p={self.p})"
            )


def amplitude(config: PackingConfig) -> float:
    """Entry magnitude before the factor-of-two split with the identity.

    banded:    base * sqrt(log(1 + e p / (4 sqrt(k))) / n)
    first_row: base * sqrt(log(1 + e (p - 1) / k) / n)
    """
    if config.variant == "banded":
        inner = math.log(1.0 + math.e * config.p / (4.0 * math.sqrt(config.k)))
    else:
        inner = math.log(1.0 + math.e * (config.p - 1) / config.k)
    return config.base_amplitude * math.sqrt(inner / config.n)


def _support_matrix(p: int, slots: np.ndarray, chosen: np.ndarray) -> SymMatrix:
    b = np.zeros((p, p))
    for idx in chosen:
        i, j = slots[idx]
        b[i, j] = 1.0
        b[j, i] = 1.0
    return SymMatrix(b)


def sample_binary_member(config: PackingConfig, seed: int) -> SymMatrix:
    """Uniform draw of one binary support pattern for the variant."""
    slots = _band_slots(config.p, config.k) if config.variant == "banded" else _first_row_slots(config.p)
    if len(slots) < config.k:
        raise InfeasiblePackingError("not enough slots for k ones")
    rng = generator(seed)
    chosen = rng.choice(len(slots), size=config.k, replace=False)
    return _support_matrix(config.p, slots, np.sort(chosen))


@dataclass(frozen=True)
class CertificateReport:
    """Numerical certificate for one family.

    min_pairwise_sq_distance is a squared Frobenius distance for the banded
    variant and a squared operator-l1 distance for the first-row variant,
    minimized over all member pairs and over member-vs-identity.  Margins
    are nonnegative exactly when the corresponding requirement holds:
    separation_margin = min distance - psi, and kl_budget_margin =
    KL_BUDGET_FRACTION * log(cardinality) - max n * KL.
    """

    min_pairwise_sq_distance: float
    log_cardinality: float
    max_kl_times_n: float
    separation_margin: float
    kl_budget_margin: float


@dataclass(frozen=True)
class PackingFamily:
    config: PackingConfig
    seed: int
    amplitude: float
    members: tuple[SymMatrix, ...]
    binary_supports: tuple[SymMatrix, ...]
    support_sets: tuple[frozenset, ...]
    below_target: bool
    certificate: CertificateReport | None = field(default=None, compare=False)

    @property
    def cardinality(self) -> int:
        return len(self.members)


def _separation_threshold(k: int) -> float:
    return (k + 1) / 4.0


def build_packing(
    config: PackingConfig,
    target_card: int,
    max_attempts: int | None = None,
    seed: int = 0,
) -> PackingFamily:
    """Greedy maximal packing of support patterns, wrapped as I + (a/2) B.

    A candidate is accepted iff it clears the separation threshold against
    every accepted member: squared Frobenius distance between supports
    (2 x Hamming) at least (k+1)/4 for the banded variant, first-column l1
    distance (Hamming) at least (k+1)/4 for the first-row variant.  Stops at
    target_card accepted members or max_attempts candidates, whichever comes
    first; a short family is returned with below_target set rather than an
    error.  The amplitude is halved until every member is diagonally
    dominant, hence positive definite.
    """
    config.check_regime()
    if target_card < 1:
        raise InvalidParameterError("target_card must be at least 1")
    if max_attempts is None:
        max_attempts = 50 * target_card
    slots = _band_slots(config.p, config.k) if config.variant == "banded" else _first_row_slots(config.p)
    threshold = _separation_threshold(config.k)
    rng = generator(derive_seed(seed, config.p, config.k))
    accepted: list[frozenset] = []
    for _ in range(max_attempts):
        chosen = frozenset(int(c) for c in rng.choice(len(slots), size=config.k, replace=False))
        ok = True
        for other in accepted:
            ham = len(chosen.symmetric_difference(other))
            dist = 2 * ham if config.variant == "banded" else ham
            if dist < threshold:
                ok = False
                break
        if ok:
            accepted.append(chosen)
            if len(accepted) >= target_card:
                break

    supports = tuple(
        _support_matrix(config.p, slots, np.sort(np.fromiter(s, dtype=np.int64)))
        for s in accepted
    )
    a = amplitude(config)
    # Dominance: (a/2) * max row count < 1.  Halve until it holds.
    max_row = max(int(np.max(np.sum(b.array, axis=1))) for b in supports)
    shrink = 0
    while a / 2.0 * max_row >= 1.0:
        a /= 2.0
        shrink += 1
        if shrink > 200:
            raise InfeasiblePackingError("could not reach diagonal dominance")
    members = tuple(SymMatrix(np.eye(config.p) + (a / 2.0) * b.array) for b in supports)
    for m in members:
        if not is_diagonally_dominant(m):
            raise InfeasiblePackingError("member failed diagonal dominance")
    return PackingFamily(
        config=config,
        seed=seed,
        amplitude=a,
        members=members,
        binary_supports=supports,
        support_sets=tuple(accepted),
        below_target=len(accepted) < target_card,
    )


def _pairwise_min_sq_distance(family: PackingFamily) -> float:
    """Exact minimum separation, member pairs and member-vs-identity.

    Computed in exact integer arithmetic on the supports, then scaled by the
    amplitude: Frobenius^2 distances for the banded variant, squared
    operator-l1 distances for the first-row variant.
    """
    cfg = family.config
    half = family.amplitude / 2.0
    sets = family.support_sets
    k = cfg.k
    if cfg.variant == "banded":
        min_int = 2 * k  # vs identity: 2k differing entries
        for i in range(len(sets)):
            for j in range(i + 1, len(sets)):
                min_int = min(min_int, 2 * len(sets[i].symmetric_difference(sets[j])))
        return half * half * min_int
    # first_row: operator-l1 distance = half * Hamming between first-row
    # supports for distinct members (every other column differs by at most
    # one entry), and half * k against the identity.
    min_int = k * k
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            ham = len(sets[i].symmetric_difference(sets[j]))
            min_int = min(min_int, ham * ham)
    return half * half * min_int


def certify(family: PackingFamily, n: int, psi: float) -> CertificateReport:
    """Exhaustive certificate: separation against psi and the KL budget at n."""
    if family.cardinality < 1:
        raise InvalidParameterError("family is empty")
    if psi < 0.0:
        raise InvalidParameterError("psi must be nonnegative")
    min_sq = _pairwise_min_sq_distance(family)
    max_kl = max(gaussian.kl_exact(m) for m in family.members)
    log_card = math.log(family.cardinality)
    return CertificateReport(
        min_pairwise_sq_distance=min_sq,
        log_cardinality=log_card,
        max_kl_times_n=n * max_kl,
        separation_margin=math.sqrt(min_sq) - psi,
        kl_budget_margin=KL_BUDGET_FRACTION * log_card - n * max_kl,
    )


def guaranteed_separation(config: PackingConfig, a: float) -> float:
    """Separation every built family satisfies by the acceptance rule:
    (a/2) sqrt((k+1)/4) for banded, (a/2)(k+1)/4 for first_row."""
    half = a / 2.0
    thr = _separation_threshold(config.k)
    return half * math.sqrt(thr) if config.variant == "banded" else half * thr


def certificate_json(family: PackingFamily, n: int, psi: float) -> str:
    """Serialize a certificate with its config echo; schema documented in README."""
    cert = certify(family, n, psi)
    payload = {
        "config": {
            "p": family.config.p,
            "k": family.config.k,
            "n": family.config.n,
            "variant": family.config.variant,
            "base_amplitude": family.config.base_amplitude,
        },
        "seed": family.seed,
        "amplitude": family.amplitude,
        "cardinality": family.cardinality,
        "below_target": family.below_target,
        "psi": psi,
        "kl_budget_fraction": KL_BUDGET_FRACTION,
        "certificate": {
            "min_pairwise_sq_distance": cert.min_pairwise_sq_distance,
            "log_cardinality": cert.log_cardinality,
            "max_kl_times_n": cert.max_kl_times_n,
            "separation_margin": cert.separation_margin,
            "kl_budget_margin": cert.kl_budget_margin,
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Lower-bound report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LowerBoundReport:
    feasible: bool
    reason: str
    variant: str
    n: int
    p: int
    radius: float
    q: float
    k: int | None = None
    amplitude: float | None = None
    cardinality: int | None = None
    certificate: CertificateReport | None = None
    in_class: bool | None = None
    empirical_rate: float | None = None
    reference_rate: float | None = None
    rate_ratio: float | None = None
    conditions: RateConditions | None = None


def _mass_rule_holds(variant: str, k: int, a: float, q: float, radius: float) -> bool:
    mass = 2.0 * k * a**q if variant == "banded" else k * a**q
    return mass <= radius


def lower_bound_report(
    p: int,
    variant: str,
    n: int,
    radius: float,
    q: float,
    seed: int = 0,
    base_amplitude: float = 0.1,
    c_max: float = 1.0,
    c3: float = 1.0,
    target_card: int = 64,
    max_attempts: int | None = None,
) -> LowerBoundReport:
    """Resolve the sparsity level, build and certify a family, and compare
    its achieved separation with the minimax rate function.

    For q = 0 the level k is fixed by the class budget (radius/2 globally,
    radius per column).  For q > 0, k and the amplitude depend on each
    other; the scan walks k downward from min(c3 * radius * n^(q/2), the
    structural cap) and accepts the largest k whose entry mass fits the
    budget.  Returns a structured infeasibility report instead of raising
    when no k works or the feasibility conditions fail.
    """
    if variant not in ("banded", "first_row"):
        raise InvalidParameterError(f"unknown variant {variant!r}")
    if variant == "first_row" and q > 1.0:
        raise InvalidParameterError("first-row families require q in [0, 1]")
    params = RateParams(n=n, p=p, radius=radius, q=q)
    conditions = rate_feasibility(params, c_max)
    budget_ok = conditions.frobenius_budget_ok if variant == "banded" else conditions.l1_budget_ok
    base = dict(variant=variant, n=n, p=p, radius=radius, q=q, conditions=conditions)
    if not (budget_ok and conditions.support_floor_ok):
        return LowerBoundReport(feasible=False, reason="feasibility conditions violated", **base)

    structural_cap = p * p // 16 if variant == "banded" else (p - 1) // 2
    if q == 0.0:
        k = int(radius) // 2 if variant == "banded" else int(radius)
        if k < 1:
            return LowerBoundReport(feasible=False, reason="budget gives no support (k < 1)", **base)
        candidates = [k]
    else:
        cap = min(structural_cap, int(c3 * radius * n ** (q / 2.0)))
        candidates = range(cap, 0, -1)

    chosen: PackingConfig | None = None
    for k in candidates:
        try:
            cfg = PackingConfig(p=p, k=k, n=n, variant=variant, base_amplitude=base_amplitude)
            cfg.check_regime()
        except InvalidParameterError:
            continue
        a = amplitude(cfg)
        if q == 0.0 or _mass_rule_holds(variant, k, a, q, radius):
            chosen = cfg
            break
    if chosen is None:
        return LowerBoundReport(feasible=False, reason="no feasible sparsity level k", **base)

    family = build_packing(chosen, target_card=target_card, max_attempts=max_attempts, seed=seed)
    psi = guaranteed_separation(chosen, family.amplitude)
    cert = certify(family, n, psi)
    cls = SparsityClass(
        variant="global" if variant == "banded" else "column",
        q=q,
        radius=radius,
    )
    in_class = all(class_membership(m, cls) for m in family.members)
    empirical = math.sqrt(cert.min_pairwise_sq_distance)
    reference = minimax_rate_frobenius(params) if variant == "banded" else minimax_rate_l1(params)
    return LowerBoundReport(
        feasible=True,
        reason="",
        k=chosen.k,
        amplitude=family.amplitude,
        cardinality=family.cardinality,
        certificate=cert,
        in_class=in_class,
        empirical_rate=empirical,
        reference_rate=reference,
        rate_ratio=empirical / reference,
        **base,
    )
