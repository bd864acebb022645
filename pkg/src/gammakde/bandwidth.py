"""Bayesian adaptive bandwidths under inverse gamma priors.

For each observation ``X_i`` the bandwidth vector ``h_i`` gets independent
``IG(alpha, beta_k)`` priors and the leave-one-out estimate at ``X_i`` acts
as the likelihood. After a Stirling step the posterior is a mixture over
``j != i`` of products of inverse gamma laws, so the posterior mean under
quadratic loss is available in closed form.

Coordinates are split per observation into a boundary set (``X_ik`` below
``policy.epsilon``) and an interior set. Each term ``j`` carries

* boundary coordinate ``k``:
  ``log A = lgamma(lam+alpha+1) + lam*log X_jk + alpha*log beta_k
  - lgamma(lam+1) - (lam+alpha+1)*log(X_jk+beta_k)``,
  posterior factor ``IG(lam+alpha+1, X_jk+beta_k)``;
* interior coordinate ``k``, with
  ``C = X_ik*log(X_ik/X_jk) + X_jk - X_ik + beta_k``:
  ``log B = lgamma(alpha+1/2) + alpha*log beta_k - log(2 pi)/2
  - (alpha+1/2)*log C + s``, posterior factor ``IG(alpha+1/2, C)``,
  where ``s = log X_ik / 2 - log X_jk`` for the modified kernel and
  ``s = -log X_ik / 2`` for the standard one.

All sums over ``j`` are taken with one max-shift per observation.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigurationError, DegenerateTermError, DomainError, UsageError
from .estimators import UNIFORM, BandwidthSet, _log_inverse_start, as_sample
from .kernels import KernelKind, KernelSelector, log_univariate_kernel
from .numerics import (integrate_positive_halfline, log_inverse_gamma_pdf,
                       log_sum_exp)

__all__ = [
    "BoundaryPolicy",
    "PosteriorTerm",
    "PriorConfig",
    "bayes_adaptive_bandwidths",
    "bayes_bandwidth_oracle",
    "log_term_coefficients",
    "mixture_weights",
    "posterior_log_density",
]

log = logging.getLogger(__name__)

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_ROW_BLOCK = 2 ** 22


@dataclass(frozen=True)
class PriorConfig:
    """Inverse gamma prior: shared shape ``alpha``, per-coordinate scales ``betas``."""

    alpha: float
    betas: tuple

    def __post_init__(self):
        alpha = float(self.alpha)
        betas = tuple(float(b) for b in np.atleast_1d(self.betas))
        if not np.isfinite(alpha) or alpha <= 0.5:
            raise ConfigurationError(
                f"alpha = {alpha} <= 1/2: posterior mean bandwidth undefined")
        if not betas or any(not (b > 0 and np.isfinite(b)) for b in betas):
            raise ConfigurationError("prior scales beta must be finite and > 0")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "betas", betas)

    @classmethod
    def default(cls, n, d, exponent=0.4, beta=1.0):
        """``alpha = n**exponent`` and a common ``beta``."""
        return cls(float(n) ** exponent, (beta,) * d)

    def betas_for(self, d):
        if len(self.betas) == 1:
            return np.full(d, self.betas[0])
        if len(self.betas) != d:
            raise UsageError(f"prior has {len(self.betas)} scales for d = {d}")
        return np.asarray(self.betas)


@dataclass(frozen=True)
class BoundaryPolicy:
    """Boundary threshold ``epsilon`` on observations and the constant ``lam``."""

    epsilon: float = 2e-8
    lam: float = 0.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ConfigurationError("epsilon must be >= 0")
        if not self.lam >= 0:
            raise ConfigurationError("lambda must be >= 0")

    def boundary_mask(self, X):
        """True where a coordinate belongs to the boundary set."""
        return (X < self.epsilon) | (X <= 0)


@dataclass(frozen=True)
class PosteriorTerm:
    """One mixture component of the posterior for observation ``i``."""

    j: int
    log_coeff: float
    shapes: np.ndarray
    scales: np.ndarray


def _divergence(xi, xj):
    """``xi*log(xi/xj) + xj - xi`` (>= 0), accurate when ``xj`` is near ``xi``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = xj / xi - 1.0
        out = xi * (t - np.log1p(t))
    out = np.where(xj == 0, np.inf, out)
    return np.maximum(out, 0.0)


def _resolve(sample, start, prior, policy, selector):
    X = as_sample(sample)
    n, d = X.shape
    start = UNIFORM if start is None else start
    prior = PriorConfig.default(n, d) if prior is None else prior
    policy = BoundaryPolicy() if policy is None else policy
    selector = KernelSelector.modified(d) if selector is None else KernelSelector.parse(selector)
    if selector.d != d:
        raise UsageError(f"selector has {selector.d} coordinates but the sample has {d}")
    return X, start, prior, policy, selector


def _coefficients(X, rows, start, prior, policy, selector):
    """Log mixture coefficients and per-coordinate IG parameters.

    Returns ``(logw, shapes, scales)`` with shapes ``(m, n)``, ``(m, n, d)``,
    ``(m, n, d)`` for the observations ``rows``. Excluded terms (``j == i``
    and degenerate interior terms) have ``logw = -inf``.
    """
    n, d = X.shape
    alpha, lam = prior.alpha, policy.lam
    betas = prior.betas_for(d)
    Xi = X[rows]
    m = len(rows)
    logw = np.zeros((m, n))
    shapes = np.empty((m, n, d))
    scales = np.empty((m, n, d))
    bnd = policy.boundary_mask(Xi)
    lg_bnd = special.gammaln(lam + alpha + 1.0) - special.gammaln(lam + 1.0)
    lg_int = special.gammaln(alpha + 0.5) - _HALF_LOG_2PI
    for k, kind in enumerate(selector.kinds):
        xi = Xi[:, k, None]
        xj = X[None, :, k]
        beta = betas[k]
        b = bnd[:, k, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            log_a = (lg_bnd + special.xlogy(lam, xj) + alpha * np.log(beta)
                     - (lam + alpha + 1.0) * np.log(xj + beta))
            c = _divergence(xi, xj) + beta
            log_b = lg_int + alpha * np.log(beta) - (alpha + 0.5) * np.log(c)
            if kind is KernelKind.MODIFIED:
                log_b = log_b + 0.5 * np.log(xi) - np.log(xj)
            else:
                log_b = log_b - 0.5 * np.log(xi)
        log_b = np.where(np.isfinite(c), log_b, -np.inf)
        logw += np.where(b, log_a, log_b)
        shapes[:, :, k] = np.where(b, lam + alpha + 1.0, alpha + 0.5)
        scales[:, :, k] = np.where(b, xj + beta, c)
    if not start.is_uniform:
        # raises SingularWeightError where the start vanishes
        lp = -_log_inverse_start(start, X)
        logw += lp[rows][:, None] - lp[None, :]
    logw = np.where(np.isnan(logw), -np.inf, logw)
    logw[np.arange(m), rows] = -np.inf
    return logw, shapes, scales


def log_term_coefficients(sample, start, prior, policy, i, j, selector=None):
    """Posterior mixture term ``j`` for observation ``i``.

    ``selector`` defaults to the all-modified kernel.

    Raises
    ------
    DegenerateTermError
        If ``X_jk = 0`` in an interior coordinate.
    """
    X, start, prior, policy, selector = _resolve(sample, start, prior, policy, selector)
    n = X.shape[0]
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise UsageError("need distinct indices 0 <= i, j < n")
    logw, shapes, scales = _coefficients(X, np.array([i]), start, prior, policy, selector)
    if logw[0, j] == -np.inf:
        raise DegenerateTermError(f"term j = {j} is degenerate for i = {i} "
                                  "(zero observation in an interior coordinate)")
    assert np.all(scales[0, j] > 0)
    return PosteriorTerm(j, float(logw[0, j]), shapes[0, j].copy(), scales[0, j].copy())


def _row_weights(X, i, start, prior, policy, selector):
    logw, shapes, scales = _coefficients(X, np.array([i]), start, prior, policy, selector)
    logw = logw[0]
    total = log_sum_exp(logw)
    if total == -np.inf:
        raise DegenerateTermError(f"every posterior term is degenerate for i = {i}")
    return logw - total, shapes[0], scales[0]


def mixture_weights(sample, i, start=None, prior=None, policy=None, selector=None):
    """Normalized posterior mixture weights over ``j`` (zero at ``j = i``)."""
    X, start, prior, policy, selector = _resolve(sample, start, prior, policy, selector)
    if X.shape[0] < 2:
        raise UsageError("the posterior needs n >= 2")
    lw, _, _ = _row_weights(X, i, start, prior, policy, selector)
    return np.exp(lw)


def posterior_log_density(sample, start, prior, policy, i, h_i, selector=None):
    """Log posterior density of the bandwidth vector ``h_i`` of observation ``i``."""
    X, start, prior, policy, selector = _resolve(sample, start, prior, policy, selector)
    n, d = X.shape
    if n < 2:
        raise UsageError("the posterior needs n >= 2")
    h = np.broadcast_to(np.asarray(h_i, dtype=float), (d,))
    if np.any(~(h > 0)):
        raise DomainError("bandwidths must be > 0")
    lw, shapes, scales = _row_weights(X, i, start, prior, policy, selector)
    keep = lw > -np.inf
    lig = log_inverse_gamma_pdf(h[None, :], shapes[keep], scales[keep]).sum(axis=1)
    return float(log_sum_exp(lw[keep] + lig))


def bayes_adaptive_bandwidths(sample, start=None, prior=None, policy=None, selector=None):
    """Posterior mean bandwidth vector for every observation.

    Parameters
    ----------
    sample : array_like, shape (n, d)
    start : ParametricStart, optional
        Defaults to the uniform (nonparametric) start.
    prior : PriorConfig, optional
        Defaults to ``alpha = n**0.4`` and ``beta = 1``.
    policy : BoundaryPolicy, optional
    selector : KernelSelector or str, optional
        Kernel per coordinate; defaults to all modified.

    Returns
    -------
    BandwidthSet
        Adaptive ``(n, d)`` bandwidths. ``meta["dropped_terms"]`` counts the
        degenerate terms that were skipped.
    """
    X, start, prior, policy, selector = _resolve(sample, start, prior, policy, selector)
    n, d = X.shape
    if n < 2:
        raise UsageError("Bayesian bandwidth selection needs n >= 2")
    alpha, lam = prior.alpha, policy.lam
    H = np.empty((n, d))
    dropped = 0
    step = max(1, _ROW_BLOCK // (n * d))
    for lo in range(0, n, step):
        rows = np.arange(lo, min(n, lo + step))
        logw, shapes, scales = _coefficients(X, rows, start, prior, policy, selector)
        dropped += int(np.sum(logw == -np.inf)) - len(rows)
        total = log_sum_exp(logw, axis=1, keepdims=True)
        if np.any(total == -np.inf):
            bad = rows[int(np.flatnonzero(total[:, 0] == -np.inf)[0])]
            raise DegenerateTermError(f"every posterior term is degenerate for i = {bad}")
        w = np.exp(logw - total)
        bnd = policy.boundary_mask(X[rows])[:, None, :]
        means = np.where(bnd, scales / (lam + alpha), scales / (alpha - 0.5))
        means = np.where(w[:, :, None] > 0, means, 0.0)
        H[rows] = np.einsum("ij,ijk->ik", w, means)
    if dropped:
        log.warning("dropped %d degenerate posterior terms", dropped)
    return BandwidthSet.from_matrix(H, dropped_terms=dropped, alpha=alpha,
                                    betas=list(prior.betas_for(d)),
                                    selector=str(selector))


def _log_integral(logf, rel_tol):
    """``log`` of the integral over (0, inf) of ``exp(logf)``, found around its peak."""
    grid = np.logspace(-10, 6, 801)
    vals = logf(grid)
    top = int(np.argmax(vals))
    peak = vals[top]
    if peak == -np.inf:
        return -np.inf
    scale = grid[top]
    value = integrate_positive_halfline(lambda h: np.exp(logf(h) - peak),
                                        rel_tol, scale=scale)
    return peak + np.log(value)


def bayes_bandwidth_oracle(sample, start=None, prior=None, i=0, selector=None,
                           policy=None, rel_tol=1e-9):
    """Posterior mean bandwidth of observation ``i`` by direct quadrature.

    Integrates the exact leave-one-out likelihood (exact gamma functions,
    no Stirling step) against the prior. The product kernel and product
    prior make every term separable across coordinates, so only
    one-dimensional integrals are needed. The modified kernel's boundary
    region is ``[0, policy.epsilon)``, matching the closed form's
    boundary split.
    """
    X, start, prior, policy, selector = _resolve(sample, start, prior, policy, selector)
    n, d = X.shape
    if n < 2:
        raise UsageError("the oracle needs n >= 2")
    betas = prior.betas_for(d)
    alpha = prior.alpha
    others = [j for j in range(n) if j != i]
    log_c = np.zeros(len(others))
    if not start.is_uniform:
        lp = -_log_inverse_start(start, X)
        log_c = lp[i] - lp[others]
    log_i0 = np.empty((len(others), d))
    log_i1 = np.empty((len(others), d))
    for k, kind in enumerate(selector.kinds):
        for t, j in enumerate(others):
            def logf(h, k=k, kind=kind, j=j):
                h = np.asarray(h, dtype=float)
                return (log_univariate_kernel(kind, X[i, k], h, X[j, k], policy.epsilon)
                        + log_inverse_gamma_pdf(h, alpha, betas[k]))
            log_i0[t, k] = _log_integral(logf, rel_tol)
            log_i1[t, k] = _log_integral(lambda h, f=logf: f(h) + np.log(h), rel_tol)
    log_z_terms = log_c + log_i0.sum(axis=1)
    keep = np.isfinite(log_z_terms)
    if not np.any(keep):
        raise DegenerateTermError(f"leave-one-out likelihood vanishes for i = {i}")
    log_z_terms, log_i0, log_i1 = log_z_terms[keep], log_i0[keep], log_i1[keep]
    log_z = log_sum_exp(log_z_terms)
    out = np.empty(d)
    for m in range(d):
        out[m] = np.exp(log_sum_exp(log_z_terms - log_i0[:, m] + log_i1[:, m]) - log_z)
    return out
