"""Random covariance models for the Monte Carlo harness.

All generators return unit-diagonal, diagonally dominant (hence positive
definite) matrices.  The class-targeting kinds (exact_sparse, banded,
first_row_spike) are verified against their sparsity class before being
returned; approx_sparse deliberately lies in no sparsity class (every
off-diagonal entry is nonzero) and exercises the oracle inequalities'
approximation terms instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matrix import InvalidParameterError, SparsityClass, SymMatrix, class_membership
from .rng import generator

KINDS = ("exact_sparse", "approx_sparse", "banded", "first_row_spike")


class GenerationError(RuntimeError):
    """A model could not be generated within the attempt budget."""


@dataclass(frozen=True)
class ModelGenerator:
    """Recipe for drawing a covariance model.

    magnitude_low/high bound the off-diagonal magnitudes before budget and
    dominance rescaling; dominance_margin caps the off-diagonal row mass
    (the diagonal is 1).  support_pairs overrides the number of symmetric
    off-diagonal pairs; by default it is derived from the sparsity budget.
    decay and row_mass apply to the approx_sparse kind only.
    """

    kind: str
    decay: float = 2.0
    magnitude_low: float = 0.25
    magnitude_high: float = 0.6
    dominance_margin: float = 0.95
    support_pairs: int | None = None
    row_mass: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown generator kind {self.kind!r}")
        if not 0.0 < self.magnitude_low <= self.magnitude_high:
            raise InvalidParameterError("need 0 < magnitude_low <= magnitude_high")
        if not 0.0 < self.dominance_margin < 1.0:
            raise InvalidParameterError("dominance_margin must lie in (0, 1)")
        if self.kind == "approx_sparse":
            if self.decay <= 0.0:
                raise InvalidParameterError("decay must be positive")
            if not 0.0 < self.row_mass < 1.0:
                raise InvalidParameterError("row_mass must lie in (0, 1)")
        if self.support_pairs is not None and self.support_pairs < 0:
            raise InvalidParameterError("support_pairs must be nonnegative")


def _geometry_cap(p: int, kind: str) -> int:
    """Most pairs the placement scheme can host: exact_sparse uses disjoint
    rows (use banded for denser supports), first_row_spike fills one row."""
    return p - 1 if kind in ("first_row_spike", "banded") else p // 2


def _default_pairs(p: int, cls: SparsityClass, kind: str) -> int:
    cap = _geometry_cap(p, kind)
    if cls.q == 0.0:
        if cls.variant == "global":
            return min(cap, int(cls.radius) // 2)
        # column variants: disjoint and banded placements keep every column
        # within budget; a first-row spike puts all k entries in one column
        return min(cap, int(cls.radius)) if kind == "first_row_spike" else min(cap, p // 2)
    return min(cap, max(1, round(cls.radius)))


def _positions(p: int, k: int, kind: str, cls: SparsityClass, rng: np.random.Generator):
    """Choose k over-diagonal positions for the requested structure."""
    if kind == "first_row_spike":
        cols = rng.choice(np.arange(1, p), size=k, replace=False)
        return [(0, int(j)) for j in np.sort(cols)]
    if kind == "banded":
        w = max(1, math.isqrt(max(1, k)))
        slots = [(i, j) for i in range(p - 1) for j in range(i + 1, min(i + w + 1, p))]
    else:  # exact_sparse: disjoint rows/columns maximize feasible magnitudes
        perm = rng.permutation(p)
        slots = [(int(min(perm[2 * t], perm[2 * t + 1])), int(max(perm[2 * t], perm[2 * t + 1]))) for t in range(p // 2)]
    if len(slots) < k:
        raise GenerationError(f"only {len(slots)} slots for {k} pairs")
    if kind == "banded":
        idx = rng.choice(len(slots), size=k, replace=False)
        chosen = [slots[i] for i in np.sort(idx)]
        if cls.variant == "column" and cls.q == 0.0:
            # respect the per-column support budget
            counts = np.zeros(p, dtype=np.int64)
            kept = []
            for (i, j) in chosen:
                if counts[i] < cls.radius and counts[j] < cls.radius:
                    kept.append((i, j))
                    counts[i] += 1
                    counts[j] += 1
            if len(kept) < k:
                raise GenerationError("per-column budget too tight for banded support")
            chosen = kept
        return chosen
    return slots[:k]


def generate_model(p: int, cls: SparsityClass, gen: ModelGenerator, seed: int) -> SymMatrix:
    """Draw one covariance model of dimension p for the sparsity class.

    Magnitudes are rescaled (never inflated) until the lq budget and the
    diagonal-dominance margin both hold; failing that after 50 halvings is a
    GenerationError.
    """
    if p < 2:
        raise InvalidParameterError("p must be at least 2")
    cls.validate_for_dim(p)
    rng = generator(seed)

    if gen.kind == "approx_sparse":
        idx = np.arange(p)
        dist = np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
        with np.errstate(divide="ignore"):
            a = np.where(dist > 0, dist ** (-gen.decay), 0.0)
        worst_row = float(np.max(np.sum(a, axis=1)))
        a *= gen.row_mass / worst_row
        np.fill_diagonal(a, 1.0)
        return SymMatrix(a)

    k = gen.support_pairs if gen.support_pairs is not None else _default_pairs(p, cls, gen.kind)
    if k == 0:
        return SymMatrix.identity(p)
    positions = _positions(p, k, gen.kind, cls, rng)
    mags = rng.uniform(gen.magnitude_low, gen.magnitude_high, size=len(positions))
    signs = rng.choice([-1.0, 1.0], size=len(positions))
    values = mags * signs

    # lq budget rescale (q > 0; the q = 0 budget is the pair count itself)
    if cls.q > 0.0:
        if cls.variant == "global":
            mass = 2.0 * float(np.sum(np.abs(values) ** cls.q))
        else:
            col_mass = np.zeros(p)
            for (i, j), v in zip(positions, values):
                col_mass[i] += abs(v) ** cls.q
                col_mass[j] += abs(v) ** cls.q
            mass = float(np.max(col_mass))
        if mass > cls.radius:
            values *= (0.999 * cls.radius / mass) ** (1.0 / cls.q)

    for _ in range(50):
        a = np.eye(p)
        for (i, j), v in zip(positions, values):
            a[i, j] = v
            a[j, i] = v
        row_off = np.sum(np.abs(a), axis=1) - 1.0
        if float(np.max(row_off)) <= gen.dominance_margin:
            m = SymMatrix(a)
            if class_membership(m, cls, tol=1e-9):
                return m
        values = values / 2.0
    raise GenerationError(
        f"could not satisfy class and dominance constraints (kind={gen.kind}, p={p})"
    )
