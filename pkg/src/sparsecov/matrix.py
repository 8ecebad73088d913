"""Dense symmetric matrices: norms, sparsity predicates, and factorizations.

Everything downstream (estimators, divergences, packing families) works on
``SymMatrix`` values, which are immutable and exactly symmetric by
construction.  Eigenvalues come from a cyclic Jacobi sweep (JIT-compiled when
numba is importable, plain Python otherwise), which is deterministic and
accurate for the desk-scale dimensions (p up to a few hundred) this library
targets.  Positive-definiteness checks and the Cholesky factor are delegated
to LAPACK via numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        return wrap


class InvalidParameterError(ValueError):
    """An argument violates a documented precondition."""


class DimensionMismatchError(ValueError):
    """Operands have incompatible dimensions."""


class NotPositiveDefiniteError(ValueError):
    """A positive-definite matrix was required."""


class MatrixFormatError(ValueError):
    """A matrix text file is malformed (shape, symmetry, or parse error)."""


# Asymmetry above this (relative to the largest entry) is rejected as user
# error rather than silently mirrored away.
_SYMMETRY_RTOL = 1e-10


class SymMatrix:
    """Immutable symmetric p x p matrix of finite floats.

    The constructor validates near-symmetry, then mirrors the upper triangle
    onto the lower one so that ``m[i, j] == m[j, i]`` holds exactly.
    """

    __slots__ = ("_a",)

    def __init__(self, entries) -> None:
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 1:
            raise InvalidParameterError("matrix dimension must be at least 1")
        if not np.all(np.isfinite(a)):
            raise InvalidParameterError("matrix entries must be finite")
        scale = float(np.max(np.abs(a))) if a.size else 0.0
        if float(np.max(np.abs(a - a.T))) > _SYMMETRY_RTOL * (1.0 + scale):
            raise InvalidParameterError("matrix is not symmetric")
        upper = np.triu(a)
        a = upper + np.triu(a, 1).T
        a.setflags(write=False)
        self._a = a

    @classmethod
    def identity(cls, p: int) -> "SymMatrix":
        return cls(np.eye(p))

    @classmethod
    def diagonal(cls, values) -> "SymMatrix":
        return cls(np.diag(np.asarray(values, dtype=np.float64)))

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the underlying p x p array."""
        return self._a

    def __repr__(self) -> str:
        return f"SymMatrix(dim={self.dim})"


@dataclass(frozen=True)
class SparsityClass:
    """Descriptor of a sparsity class of unit-diagonal covariance matrices.

    variant "global" bounds the lq mass of all off-diagonal entries by
    ``radius``; variant "column" bounds the lq mass of every column
    (diagonal entry excluded).  For q = 0 the budget counts nonzero entries
    and ``radius`` must be an integer (an even one for the global variant,
    since off-diagonal support always comes in symmetric pairs).
    """

    variant: str  # "global" | "column"
    q: float
    radius: float

    def __post_init__(self) -> None:
        if self.variant not in ("global", "column"):
            raise InvalidParameterError(f"unknown variant {self.variant!r}")
        qmax = 2.0 if self.variant == "global" else 1.0
        if not 0.0 <= self.q <= qmax:
            raise InvalidParameterError(
                f"q={self.q} outside [0, {qmax}] for variant {self.variant!r}"
            )
        if self.radius < 0:
            raise InvalidParameterError("radius must be nonnegative")
        if self.q == 0.0:
            r = self.radius
            if r != int(r):
                raise InvalidParameterError("radius must be an integer when q = 0")
            if self.variant == "global" and int(r) % 2 != 0:
                raise InvalidParameterError("global q=0 radius must be even (symmetric pairs)")

    def validate_for_dim(self, p: int) -> None:
        """Check the dimension-dependent caps on the q = 0 budget."""
        if self.q == 0.0:
            cap = p * (p - 1) if self.variant == "global" else p - 1
            if self.radius > cap:
                raise InvalidParameterError(
                    f"q=0 radius {self.radius} exceeds cap {cap} at p={p}"
                )


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def _upper_offdiag(a: np.ndarray) -> np.ndarray:
    """Strictly-upper-triangle entries as a flat vector (row-major)."""
    iu = np.triu_indices(a.shape[0], k=1)
    return a[iu]


def frobenius_sq(m: SymMatrix) -> float:
    """Squared Frobenius norm, accumulated as diag + 2 * upper triangle.

    The 2 * upper-triangle accumulation makes exact ties with other
    pair-summed quantities (e.g. the l0 oracle bound) resolve exactly.
    """
    a = m.array
    d = np.diagonal(a)
    u = _upper_offdiag(a)
    return float(np.sum(d * d) + 2.0 * np.sum(u * u))


def frobenius_norm(m: SymMatrix) -> float:
    """Square root of the sum of squared entries."""
    return math.sqrt(frobenius_sq(m))


def offdiag_lq_norm(m: SymMatrix, q: float) -> float:
    """lq norm of the off-diagonal entries, (sum_{i != j} |m_ij|^q)^(1/q)."""
    if q <= 0:
        raise InvalidParameterError("q must be positive")
    return offdiag_lq_mass(m, q) ** (1.0 / q)


def offdiag_lq_mass(m: SymMatrix, q: float) -> float:
    """Off-diagonal lq mass sum_{i != j} |m_ij|^q (both orientations)."""
    if q <= 0:
        raise InvalidParameterError("q must be positive")
    u = np.abs(_upper_offdiag(m.array))
    return float(2.0 * np.sum(u**q))

def offdiag_l0(m: SymMatrix, tol: float = 1e-12) -> int:
    """Number of off-diagonal entries with |m_ij| strictly above tol.

    Both (i, j) and (j, i) count, so the result is always even.  Entries
    written as exact zeros by the thresholding estimators never count.
    """
    if tol < 0:
        raise InvalidParameterError("tol must be nonnegative")
    u = _upper_offdiag(m.array)
    return int(2 * np.count_nonzero(np.abs(u) > tol))


def op_l1_norm(m: SymMatrix) -> float:
    """l1 -> l1 operator norm: the maximum absolute column sum."""
    a = m.array
    if a.shape[0] == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(a), axis=0)))


def spectral_norm(m: SymMatrix) -> float:
    """l2 -> l2 operator norm: the largest absolute eigenvalue."""
    lams = eigenvalues(m)
    return float(np.max(np.abs(lams)))


# ---------------------------------------------------------------------------
# Eigenvalues via cyclic Jacobi
# ---------------------------------------------------------------------------

# Sweep until the off-diagonal Frobenius mass falls below this fraction of
# the full Frobenius norm.
_JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 60


@njit(cache=True)
def _jacobi_cyclic(a: np.ndarray, tol: float, max_sweeps: int):  # pragma: no cover
    p = a.shape[0]
    v = np.eye(p)
    norm2 = 0.0
    for i in range(p):
        for j in range(p):
            norm2 += a[i, j] * a[i, j]
    if norm2 == 0.0:
        return np.zeros(p), v, 0
    thresh2 = tol * tol * norm2
    sweeps = 0
    for _ in range(max_sweeps):
        off2 = 0.0
        for i in range(p - 1):
            for j in range(i + 1, p):
                off2 += 2.0 * a[i, j] * a[i, j]
        if off2 <= thresh2:
            break
        sweeps += 1
        for i in range(p - 1):
            for j in range(i + 1, p):
                aij = a[i, j]
                if aij == 0.0:
                    continue
                # Stable rotation: tan(2 theta) = 2 a_ij / (a_jj - a_ii)
                theta = (a[j, j] - a[i, i]) / (2.0 * aij)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                aii = a[i, i]
                ajj = a[j, j]
                a[i, i] = aii - t * aij
                a[j, j] = ajj + t * aij
                a[i, j] = 0.0
                a[j, i] = 0.0
                for k in range(p):
                    if k != i and k != j:
                        aki = a[k, i]
                        akj = a[k, j]
                        a[k, i] = c * aki - s * akj
                        a[i, k] = a[k, i]
                        a[k, j] = s * aki + c * akj
                        a[j, k] = a[k, j]
                for k in range(p):
                    vki = v[k, i]
                    vkj = v[k, j]
                    v[k, i] = c * vki - s * vkj
                    v[k, j] = s * vki + c * vkj
    lams = np.empty(p)
    for i in range(p):
        lams[i] = a[i, i]
    order = np.argsort(lams)
    return lams[order], v[:, order], sweeps


def eigendecomposition(m: SymMatrix) -> tuple[np.ndarray, np.ndarray]:
    """All eigenvalues (ascending) and matching orthonormal eigenvectors."""
    a = m.array.copy()
    lams, vecs, _ = _jacobi_cyclic(a, _JACOBI_TOL, _JACOBI_MAX_SWEEPS)
    return lams, vecs


def eigenvalues(m: SymMatrix) -> np.ndarray:
    """All p eigenvalues in ascending order."""
    return eigendecomposition(m)[0]


# ---------------------------------------------------------------------------
# Definiteness and factorization
# ---------------------------------------------------------------------------


def cholesky(m: SymMatrix) -> np.ndarray:
    """Lower-triangular L with L L^T = m; raises if m is not positive definite."""
    try:
        return np.linalg.cholesky(m.array)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("Cholesky factorization failed") from exc


def is_positive_definite(m: SymMatrix, tol: float = 0.0) -> bool:
    """True iff Cholesky succeeds with every pivot strictly above tol."""
    try:
        factor = np.linalg.cholesky(m.array)
    except np.linalg.LinAlgError:
        return False
    if tol <= 0.0:
        return True
    return bool(np.all(np.diagonal(factor) > tol))


def is_diagonally_dominant(m: SymMatrix) -> bool:
    """True iff every diagonal entry strictly exceeds its row's off-diagonal l1 mass."""
    a = m.array
    offsums = np.sum(np.abs(a), axis=1) - np.abs(np.diagonal(a))
    return bool(np.all(np.diagonal(a) > offsums))


def class_membership(m: SymMatrix, cls: SparsityClass, tol: float = 1e-12) -> bool:
    """Whether m lies in the sparsity class: positive definite, unit diagonal
    (within tol), and the variant's lq budget holds."""
    cls.validate_for_dim(m.dim)
    if not is_positive_definite(m):
        return False
    a = m.array
    if float(np.max(np.abs(np.diagonal(a) - 1.0))) > tol:
        return False
    if cls.variant == "global":
        if cls.q == 0.0:
            return offdiag_l0(m, tol) <= cls.radius
        return offdiag_lq_mass(m, cls.q) <= cls.radius
    # column variant: every column with its diagonal entry zeroed
    offdiag = np.abs(a - np.diag(np.diagonal(a)))
    if cls.q == 0.0:
        col_counts = np.count_nonzero(offdiag > tol, axis=0)
        return bool(np.max(col_counts) <= cls.radius) if m.dim > 0 else True
    col_mass = np.sum(offdiag**cls.q, axis=0)
    return bool(np.max(col_mass) <= cls.radius)


def max_offdiag_abs_diff(x: SymMatrix, y: SymMatrix) -> float:
    """max_{i != j} |x_ij - y_ij|; the diagonal is excluded."""
    if x.dim != y.dim:
        raise DimensionMismatchError(f"dimension mismatch: {x.dim} vs {y.dim}")
    if x.dim == 1:
        return 0.0
    d = np.abs(x.array - y.array)
    return float(np.max(_upper_offdiag(d)))


# ---------------------------------------------------------------------------
# Text fixture format
# ---------------------------------------------------------------------------

# First line: p.  Then p lines of p whitespace-separated decimals.  The
# reader rejects asymmetry above 1e-12.


def write_matrix_text(m: SymMatrix) -> str:
    lines = [str(m.dim)]
    for row in m.array:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    return "\n".join(lines) + "\n"


def read_matrix_text(text: str) -> SymMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MatrixFormatError("empty matrix file")
    try:
        p = int(lines[0].strip())
    except ValueError as exc:
        raise MatrixFormatError(f"bad dimension line {lines[0]!r}") from exc
    if p < 1:
        raise MatrixFormatError(f"dimension must be positive, got {p}")
    if len(lines) != p + 1:
        raise MatrixFormatError(f"expected {p} rows, found {len(lines) - 1}")
    rows = []
    for ln in lines[1:]:
        try:
            row = [float(tok) for tok in ln.split()]
        except ValueError as exc:
            raise MatrixFormatError(f"bad row {ln!r}") from exc
        if len(row) != p:
            raise MatrixFormatError(f"row has {len(row)} entries, expected {p}")
        rows.append(row)
    a = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise MatrixFormatError("non-finite entry in matrix file")
    if float(np.max(np.abs(a - a.T))) > 1e-12:
        raise MatrixFormatError("matrix file is not symmetric to 1e-12")
    return SymMatrix(a)
