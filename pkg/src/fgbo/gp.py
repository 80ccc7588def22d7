"""Posterior inference over latent factor functions from noisy sum observations.

Observing only y_i = f(x_i) + eps with f = sum_I f_I, each factor posterior is

    mean_I(x)  = k_I(x)' (K + sn2 I)^-1 y
    var_I(x)   = k_I(x, x) - k_I(x)' (K + sn2 I)^-1 k_I(x)

where k_I(x) is the cross-covariance of factor I between x and the observed
inputs and K is the Gram matrix of the full additive kernel.  The sum of the
factor means equals the additive GP's posterior mean of f, which the engine
relies on; no analogous identity holds for variances.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import ContractViolationError, NumericalFailureError
from .kernels import AdditiveKernel, cross_additive, cross_factor, gram

# negative posterior variances beyond this are treated as bugs, not roundoff
VARIANCE_CLAMP = 1e-9

JITTER_SCALE = 1e-10
MAX_JITTER_ESCALATIONS = 6


@dataclass(frozen=True)
class ObservationSet:
    """Query inputs, noisy outputs, and the shared noise variance."""

    X: np.ndarray  # (t, d)
    y: np.ndarray  # (t,)
    noise_variance: float

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.size == 0:
            X = X.reshape(0, X.shape[1] if X.ndim == 2 and X.shape[1] else 0)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if len(X) != len(y):
            raise ContractViolationError(
                f"|X| = {len(X)} must equal |y| = {len(y)}"
            )
        if self.noise_variance <= 0:
            raise ContractViolationError("noise variance must be > 0")

    def __len__(self) -> int:
        return len(self.y)


def dense_cholesky_with_jitter(A: np.ndarray):
    """Lower Cholesky factor of a symmetric matrix, with escalating jitter.

    Starts at JITTER_SCALE * trace/n and multiplies by 10 up to
    MAX_JITTER_ESCALATIONS times; raises NumericalFailureError carrying the
    last jitter attempted if all fail.  Returns (L, jitter).
    """
    n = A.shape[0]
    scale = np.trace(A) / n
    base = JITTER_SCALE * (scale if scale > 0 else 1.0)
    jitter = 0.0
    for attempt in range(MAX_JITTER_ESCALATIONS + 1):
        try:
            L = np.linalg.cholesky(A + jitter * np.eye(n))
            return L, jitter
        except np.linalg.LinAlgError:
            jitter = base if attempt == 0 else jitter * 10.0
    raise NumericalFailureError(
        f"Cholesky failed after jitter escalation up to {jitter:.3e}",
        jitter=jitter,
    )


def chol_with_jitter(A: np.ndarray):
    """Like dense_cholesky_with_jitter but in scipy cho_solve form."""
    L, jitter = dense_cholesky_with_jitter(A)
    return (L, True), jitter


class FactorPosterior:
    """Cached solve state for all per-factor posteriors of one kernel + data.

    Immutable after construction; safe for concurrent readers.  With no
    observations every factor posterior is its prior.
    """

    def __init__(self, kernel: AdditiveKernel, observations: ObservationSet):
        self.kernel = kernel
        self.observations = observations
        t = len(observations)
        if t == 0:
            self._cho = None
            self.weights = np.zeros(0)
        else:
            K = gram(kernel, observations.X)
            C = K + observations.noise_variance * np.eye(t)
            self._cho, self.jitter = chol_with_jitter(C)
            self.weights = cho_solve(self._cho, observations.y)

    @property
    def num_observations(self) -> int:
        return len(self.observations)

    def _check_factor_index(self, factor_index: int):
        if not 0 <= factor_index < self.kernel.num_factors:
            raise ContractViolationError(
                f"factor index {factor_index} out of range "
                f"[0, {self.kernel.num_factors})"
            )

    def factor_mean_var_batch(self, factor_index: int, U: np.ndarray):
        """Posterior mean and variance of one factor at sub-inputs U (m, |I|).

        Variances in [-VARIANCE_CLAMP, 0) clamp to 0; anything lower raises.
        """
        self._check_factor_index(factor_index)
        f = self.kernel.factors[factor_index]
        U = np.atleast_2d(np.asarray(U, dtype=float))
        prior = np.full(U.shape[0], f.signal_variance)
        if self._cho is None:
            return np.zeros(U.shape[0]), prior
        Kxg = cross_factor(f, U, f.restrict(self.observations.X))  # (m, t)
        mean = Kxg @ self.weights
        V = solve_triangular(self._cho[0], Kxg.T, lower=True)  # L^-1 Kxg'
        var = prior - np.einsum("tm,tm->m", V, V)
        low = var.min(initial=0.0)
        if low < -VARIANCE_CLAMP:
            raise NumericalFailureError(
                f"factor posterior variance {low:.3e} below -{VARIANCE_CLAMP:.0e}"
            )
        return mean, np.maximum(var, 0.0)

    def factor_mean_var(self, factor_index: int, x):
        """Posterior (mean, variance) of factor `factor_index` at full input x."""
        self._check_factor_index(factor_index)
        f = self.kernel.factors[factor_index]
        u = f.restrict(np.asarray(x, dtype=float).reshape(1, -1))
        mean, var = self.factor_mean_var_batch(factor_index, u)
        return float(mean[0]), float(var[0])

    def objective_mean_var_batch(self, X: np.ndarray):
        """Posterior of f itself under the full additive kernel, at X (m, d)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        prior = np.full(X.shape[0], self.kernel.prior_variance(X))
        if self._cho is None:
            return np.zeros(X.shape[0]), prior
        Kxg = cross_additive(self.kernel, X, self.observations.X)
        mean = Kxg @ self.weights
        V = solve_triangular(self._cho[0], Kxg.T, lower=True)
        var = prior - np.einsum("tm,tm->m", V, V)
        low = var.min(initial=0.0)
        if low < -VARIANCE_CLAMP:
            raise NumericalFailureError(
                f"objective posterior variance {low:.3e} below -{VARIANCE_CLAMP:.0e}"
            )
        return mean, np.maximum(var, 0.0)

    def objective_mean_var(self, x):
        mean, var = self.objective_mean_var_batch(np.asarray(x, dtype=float).reshape(1, -1))
        return float(mean[0]), float(var[0])

    def factor_only_variance(self, factor_index: int, x) -> float:
        """Hypothetical posterior variance of a factor were ITS OWN noisy
        outputs observed (Gram of the factor kernel alone).  Diagnostic
        helper for probing how the sum-observation variance compares; not
        used by the optimizer."""
        self._check_factor_index(factor_index)
        f = self.kernel.factors[factor_index]
        u = f.restrict(np.asarray(x, dtype=float).reshape(1, -1))
        if self.num_observations == 0:
            return float(f.signal_variance)
        G = f.restrict(self.observations.X)
        Kff = cross_factor(f, G, G)
        C = Kff + self.observations.noise_variance * np.eye(len(G))
        cf, _ = chol_with_jitter(C)
        kx = cross_factor(f, u, G).ravel()
        var = f.signal_variance - kx @ cho_solve(cf, kx)
        return float(max(var, 0.0))


def fit(kernel: AdditiveKernel, observations: ObservationSet) -> FactorPosterior:
    """Factorize (K + sn2 I) once so all factor posteriors share the solve."""
    return FactorPosterior(kernel, observations)


def log_marginal_likelihood(kernel: AdditiveKernel, observations: ObservationSet) -> float:
    """GP evidence  -y'(K+sn2 I)^-1 y / 2 - log det(...)/2 - t log(2 pi)/2."""
    t = len(observations)
    if t == 0:
        raise ContractViolationError("evidence needs at least one observation")
    K = gram(kernel, observations.X)
    C = K + observations.noise_variance * np.eye(t)
    (L, _), _ = chol_with_jitter(C)
    alpha = cho_solve((L, True), observations.y)
    return float(
        -0.5 * observations.y @ alpha
        - np.log(np.diag(L)).sum()
        - 0.5 * t * math.log(2.0 * math.pi)
    )
