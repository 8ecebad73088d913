"""Zero-mean multivariate Gaussian sampling and Kullback-Leibler divergences.

For positive definite sigma, the divergence of N(0, sigma) from N(0, I) has
the closed form

    KL = (1/2) (tr(sigma) - p - log det(sigma))
       = (1/2) sum_j (lam_j - 1 - log lam_j),

with lam_j the eigenvalues of sigma.  For a perturbation sigma = I + eps * D
the same quantity is (1/2) sum_j (eps mu_j - log(1 + eps mu_j)) in terms of
the eigenvalues mu_j of D; both code paths are exposed and must agree.

The divergence of a perturbed model from the identity is sandwiched between
explicit quadratic bounds in the Frobenius norm of the perturbation:

    (1 - log 2) eps^2 / 2 * |D|_F^2  <=  KL  <=  g(-eps) eps^2 / 2 * |D|_F^2

where g(x) = (x - log(1 + x)) / x^2, valid for 0 < eps < 1 when the lower
bound's operand has spectral norm at most 1 and the upper bound's satisfies
I + D >= 0.
"""

from __future__ import annotations

import math

import numpy as np

from .matrix import (
    InvalidParameterError,
    NotPositiveDefiniteError,
    SymMatrix,
    cholesky,
    eigendecomposition,
    eigenvalues,
    frobenius_sq,
)
from .rng import generator


class GaussianModel:
    """N(0, sigma) with the Cholesky factor cached for sampling."""

    __slots__ = ("sigma", "chol")

    def __init__(self, sigma: SymMatrix) -> None:
        self.sigma = sigma
        self.chol = cholesky(sigma)  # raises NotPositiveDefiniteError

    def sample(self, n: int, seed: int) -> np.ndarray:
        """n i.i.d. rows of N(0, sigma); bit-identical for equal seeds."""
        if n < 1:
            raise InvalidParameterError("n must be at least 1")
        z = generator(seed).standard_normal((n, self.sigma.dim))
        return z @ self.chol.T

    def __repr__(self) -> str:
        return f"GaussianModel(p={self.sigma.dim})"


def sample(model: GaussianModel, n: int, seed: int) -> np.ndarray:
    return model.sample(n, seed)


def kl_exact(sigma: SymMatrix) -> float:
    """KL(N(0, sigma) || N(0, I)) via the eigenvalues of sigma.

    Nonnegative, and zero exactly when sigma is the identity.
    """
    lams = eigenvalues(sigma)
    if np.any(lams <= 0.0):
        raise NotPositiveDefiniteError("covariance must be positive definite")
    return float(0.5 * np.sum(lams - 1.0 - np.log(lams)))


def kl_from_perturbation(delta: SymMatrix, eps: float) -> float:
    """KL(N(0, I + eps*delta) || N(0, I)) from the eigenvalues of delta.

    Alternate code path to kl_exact(I + eps*delta); the two must agree to
    1e-9 and tests enforce that.
    """
    mus = eps * eigenvalues(delta)
    if np.any(mus <= -1.0):
        raise NotPositiveDefiniteError("I + eps*delta must be positive definite")
    return float(0.5 * np.sum(mus - np.log1p(mus)))


def kl_exact_pair(sigma1: SymMatrix, sigma0: SymMatrix) -> float:
    """KL(N(0, sigma1) || N(0, sigma0)) by whitening with sigma0^(-1/2)."""
    if sigma1.dim != sigma0.dim:
        raise InvalidParameterError("covariances must have equal dimension")
    lams, vecs = eigendecomposition(sigma0)
    if np.any(lams <= 0.0):
        raise NotPositiveDefiniteError("reference covariance must be positive definite")
    inv_half = vecs @ np.diag(1.0 / np.sqrt(lams)) @ vecs.T
    whitened = inv_half @ sigma1.array @ inv_half.T
    whitened = 0.5 * (whitened + whitened.T)
    return kl_exact(SymMatrix(whitened))


def kl_curvature(eps: float) -> float:
    """(eps - log(1 + eps)) / eps^2, the quadratic divergence coefficient.

    Monotone decreasing on (-1, inf), with limit 1/2 at 0.  Below |eps| =
    1e-6 the direct formula loses all precision to cancellation, so a
    truncated series is used there.
    """
    if eps <= -1.0:
        raise InvalidParameterError("eps must exceed -1")
    if eps == 0.0:
        return 0.5
    if abs(eps) < 1e-6:
        return 0.5 - eps / 3.0 + eps * eps / 4.0
    return (eps - math.log1p(eps)) / (eps * eps)


def kl_upper_bound(delta: SymMatrix, eps: float) -> float:
    """Quadratic upper bound g(-eps) * eps^2 * |delta|_F^2 / 2.

    Requires 0 < eps < 1 and I + delta positive semidefinite (so every
    eigenvalue of delta is at least -1, where the curvature factor peaks).
    """
    if not 0.0 < eps < 1.0:
        raise InvalidParameterError("eps must lie in (0, 1)")
    min_eig = float(np.min(eigenvalues(delta)))
    if min_eig < -1.0 - 1e-10:
        raise InvalidParameterError("I + delta must be positive semidefinite")
    return kl_curvature(-eps) * eps * eps * frobenius_sq(delta) / 2.0


def kl_lower_bound(delta: SymMatrix, eps: float) -> float:
    """Quadratic lower bound (1 - log 2) * eps^2 * |delta|_F^2 / 2.

    Requires 0 < eps < 1 and spectral norm of delta at most 1.
    """
    if not 0.0 < eps < 1.0:
        raise InvalidParameterError("eps must lie in (0, 1)")
    lams = eigenvalues(delta)
    if float(np.max(np.abs(lams))) > 1.0 + 1e-12:
        raise InvalidParameterError("delta must have spectral norm at most 1")
    return (1.0 - math.log(2.0)) * eps * eps * frobenius_sq(delta) / 2.0


def mc_kl_estimate(sigma: SymMatrix, n_samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of KL(N(0, sigma) || N(0, I)) and its standard error.

    Averages the log-likelihood ratio over n_samples draws from N(0, sigma):
    per draw, (|x|^2 - x' sigma^{-1} x - log det sigma) / 2.
    """
    model = GaussianModel(sigma)
    x = model.sample(n_samples, seed)
    lams = eigenvalues(sigma)
    if np.any(lams <= 0.0):
        raise NotPositiveDefiniteError("covariance must be positive definite")
    logdet = float(np.sum(np.log(lams)))
    # x' sigma^{-1} x via the cached Cholesky factor: solve L y = x row-wise.
    y = np.linalg.solve(model.chol, x.T)
    quad_inv = np.sum(y * y, axis=0)
    quad_id = np.sum(x * x, axis=1)
    ratios = 0.5 * (quad_id - quad_inv - logdet)
    mean = float(np.mean(ratios))
    stderr = float(np.std(ratios, ddof=1) / math.sqrt(n_samples))
    return mean, stderr
