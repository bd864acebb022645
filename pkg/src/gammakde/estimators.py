"""Nonparametric and semiparametric gamma kernel density estimators.

The semiparametric estimator multiplies a parametric start ``p`` by a kernel
smoothing of the weight function ``f / p``::

    f_hat(x) = p(x) * (1/n) * sum_i K(x, h_i; X_i) / p(X_i)

With the uniform start (``p == 1``) this is the plain kernel estimator, and
that case never touches the start at all.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, FitError, SingularWeightError, UsageError
from .kernels import KernelSelector, log_univariate_kernel

__all__ = [
    "BandwidthSet",
    "FittedDensity",
    "ParametricStart",
    "as_sample",
    "density_estimate",
    "density_on_grid",
    "fit_parametric_start",
    "kernel_density",
    "leave_one_out_density",
    "weight_estimate",
]

# cap on the (points x observations) block evaluated at once
_BLOCK = 2 ** 21


def as_sample(values):
    """Validate observations and return them as an ``(n, d)`` float array."""
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise UsageError("a sample is an n x d matrix with n, d >= 1")
    if not np.all(np.isfinite(arr)):
        raise DomainError("sample contains non-finite values")
    if np.any(arr < 0):
        row, col = np.argwhere(arr < 0)[0]
        raise DomainError(f"negative observation at row {row}, column {col}")
    arr.setflags(write=False)
    return arr


def _as_points(x, d):
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != d:
        raise UsageError(f"evaluation points must have {d} coordinates")
    if np.any(~(pts >= 0)):
        raise DomainError("evaluation points must lie in [0, inf)^d")
    return pts, single


@dataclass(frozen=True)
class BandwidthSet:
    """Either one fixed bandwidth vector or one vector per observation."""

    values: np.ndarray
    adaptive: bool
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v = v.reshape(1, -1) if not self.adaptive else np.atleast_2d(v)
        if v.ndim != 2 or v.size == 0:
            raise UsageError("bandwidths must be a vector or an n x d matrix")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise DomainError("bandwidths must be finite and > 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def fixed(cls, h):
        return cls(np.atleast_1d(h), adaptive=False)

    @classmethod
    def from_matrix(cls, h, **meta):
        return cls(np.asarray(h), adaptive=True, meta=dict(meta))

    @property
    def d(self):
        return self.values.shape[1]

    def rows(self, n):
        """Bandwidth matrix broadcast to ``n`` observations."""
        if self.adaptive:
            if self.values.shape[0] != n:
                raise UsageError(f"adaptive bandwidths have {self.values.shape[0]} "
                                 f"rows but the sample has {n}")
            return self.values
        return np.broadcast_to(self.values, (n, self.d))


_FAMILIES = ("uniform", "exponential", "gamma")


@dataclass(frozen=True)
class ParametricStart:
    """Product parametric start density.

    ``theta`` is empty for ``uniform``, ``d`` rates for ``exponential`` and
    ``d`` (shape, scale) pairs flattened for ``gamma``.
    """

    family: str = "uniform"
    theta: tuple = ()

    def __post_init__(self):
        family = str(self.family).lower()
        aliases = {"productexponential": "exponential", "productgamma": "gamma"}
        family = aliases.get(family, family)
        if family not in _FAMILIES:
            raise UsageError(f"unknown parametric start {self.family!r}")
        theta = tuple(float(t) for t in self.theta)
        if family == "uniform" and theta:
            raise UsageError("the uniform start has no parameters")
        if family == "gamma" and len(theta) % 2:
            raise UsageError("gamma start parameters come in shape/scale pairs")
        if any(not (t > 0 and np.isfinite(t)) for t in theta):
            raise DomainError("start parameters must be finite and > 0")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "theta", theta)

    @property
    def is_uniform(self):
        return self.family == "uniform"

    def _d(self):
        if self.family == "exponential":
            return len(self.theta)
        if self.family == "gamma":
            return len(self.theta) // 2
        return None

    def margin_log_pdf(self, k, values):
        """Log density of margin ``k`` at the given coordinate values."""
        values = np.asarray(values, dtype=float)
        if self.family == "uniform":
            return np.zeros_like(values)
        if self.family == "exponential":
            rate = self.theta[k]
            return np.log(rate) - rate * values
        shape, scale = self.theta[2 * k], self.theta[2 * k + 1]
        with np.errstate(divide="ignore"):
            return (special.xlogy(shape - 1.0, values) - values / scale
                    - special.gammaln(shape) - shape * np.log(scale))

    def log_pdf(self, points):
        """Log start density at each row of ``points``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = self._d()
        if d is not None and pts.shape[1] != d:
            raise UsageError(f"start has {d} margins but points have {pts.shape[1]}")
        return sum(self.margin_log_pdf(k, pts[:, k]) for k in range(pts.shape[1]))

    def pdf(self, points):
        return np.exp(self.log_pdf(points))

    def to_dict(self):
        return {"family": self.family, "theta": list(self.theta)}


UNIFORM = ParametricStart()


def fit_parametric_start(sample, family):
    """Fit a product start to ``sample`` by per-margin method of moments."""
    if isinstance(family, ParametricStart):
        return family
    family = ParametricStart(family).family
    X = as_sample(sample)
    if family == "uniform":
        return UNIFORM
    n, d = X.shape
    if n < 2:
        raise FitError("fitting a parametric start needs n >= 2")
    means = X.mean(axis=0)
    if np.any(means <= 0):
        k = int(np.argmin(means))
        raise FitError(f"margin {k} has zero mean")
    if family == "exponential":
        return ParametricStart("exponential", tuple(1.0 / means))
    variances = X.var(axis=0, ddof=1)
    theta = []
    for k in range(d):
        if not variances[k] > 0:
            raise FitError(f"margin {k} has zero sample variance")
        theta += [means[k] ** 2 / variances[k], variances[k] / means[k]]
    return ParametricStart("gamma", tuple(theta))


def _log_kernel_block(selector, pts, X, H, boundary):
    """``(m, n)`` matrix of log product kernels at targets ``pts``."""
    total = 0.0
    for k, kind in enumerate(selector.kinds):
        total = total + log_univariate_kernel(
            kind, pts[:, k, None], H[None, :, k], X[None, :, k], boundary)
    return total


def _weighted_kernel_mean(sample, selector, bandwidths, x, boundary, log_row_weights):
    X = as_sample(sample)
    selector = KernelSelector.parse(selector)
    n, d = X.shape
    if selector.d != d:
        raise UsageError(f"selector has {selector.d} coordinates but the sample has {d}")
    H = bandwidths.rows(n)
    pts, single = _as_points(x, d)
    out = np.empty(pts.shape[0])
    step = max(1, _BLOCK // n)
    for lo in range(0, pts.shape[0], step):
        lk = _log_kernel_block(selector, pts[lo:lo + step], X, H, boundary)
        if log_row_weights is not None:
            lk = lk + log_row_weights[None, :]
        out[lo:lo + step] = np.exp(lk).mean(axis=1)
    return float(out[0]) if single else out


def kernel_density(sample, selector, bandwidths, x, boundary=None):
    """Plain multiple gamma kernel estimator at ``x`` (a point or rows of points)."""
    return _weighted_kernel_mean(sample, selector, bandwidths, x, boundary, None)


def _log_inverse_start(start, X):
    lp = start.log_pdf(X)
    if np.any(~np.isfinite(lp)) or np.any(lp == -np.inf):
        i = int(np.flatnonzero(~np.isfinite(lp))[0])
        raise SingularWeightError(f"parametric start is zero or singular at observation {i}")
    return -lp


def weight_estimate(sample, selector, bandwidths, start, x, boundary=None):
    """Kernel smoothing of the weight function ``f / p`` at ``x``."""
    start = UNIFORM if start is None else start
    if start.is_uniform:
        return kernel_density(sample, selector, bandwidths, x, boundary)
    X = as_sample(sample)
    return _weighted_kernel_mean(X, selector, bandwidths, x, boundary,
                                 _log_inverse_start(start, X))


def density_estimate(sample, selector, bandwidths, start, x, boundary=None):
    """Semiparametric density estimate ``p(x) * w_hat(x)``.

    A ``None`` or uniform start gives the nonparametric estimator through the
    same code path as :func:`kernel_density`.
    """
    start = UNIFORM if start is None else start
    if start.is_uniform:
        return kernel_density(sample, selector, bandwidths, x, boundary)
    w = weight_estimate(sample, selector, bandwidths, start, x, boundary)
    pts, single = _as_points(x, as_sample(sample).shape[1])
    p = start.pdf(pts)
    return float(p[0] * w) if single else p * w


def leave_one_out_density(sample, selector, h_i, start, i, boundary=None):
    """Estimate at observation ``i`` from the other ``n - 1`` observations, bandwidth ``h_i``."""
    X = as_sample(sample)
    n, d = X.shape
    if n < 2:
        raise UsageError("leave-one-out needs n >= 2")
    if not 0 <= i < n:
        raise UsageError(f"index {i} out of range for n = {n}")
    start = UNIFORM if start is None else start
    rest = np.delete(X, i, axis=0)
    bw = BandwidthSet.fixed(np.broadcast_to(np.asarray(h_i, dtype=float), (d,)))
    return density_estimate(rest, selector, bw, start, X[i], boundary)


def density_on_grid(sample, selector, bandwidths, axes, start=None, boundary=None):
    """Estimate on the tensor grid ``axes[0] x axes[1] x ...``.

    The product kernel factorizes over coordinates, so the estimate is a sum
    of outer products of per-axis kernel matrices; the work is
    ``O(n * sum(len(a) for a in axes))`` kernel evaluations instead of
    ``O(n * prod(len(a)))``.
    """
    X = as_sample(sample)
    selector = KernelSelector.parse(selector)
    n, d = X.shape
    if selector.d != d or len(axes) != d:
        raise UsageError("selector, sample and grid dimensions differ")
    start = UNIFORM if start is None else start
    H = bandwidths.rows(n)
    if not start.is_uniform:
        _log_inverse_start(start, X)
    mats = []
    for k, kind in enumerate(selector.kinds):
        ax = np.asarray(axes[k], dtype=float)
        if np.any(~(ax >= 0)):
            raise DomainError("grid must lie in [0, inf)^d")
        lk = log_univariate_kernel(kind, ax[:, None], H[None, :, k], X[None, :, k], boundary)
        if not start.is_uniform:
            lk = lk + start.margin_log_pdf(k, ax)[:, None] - start.margin_log_pdf(k, X[:, k])[None, :]
        mats.append(np.exp(lk))
    if d == 1:
        return mats[0].mean(axis=1)
    if d == 2:
        return mats[0] @ mats[1].T / n
    letters = "abcdefghijklmnopqrstuvwxyz"[:d]
    expr = ",".join(f"{c}z" for c in letters) + "->" + letters
    return np.einsum(expr, *mats, optimize=True) / n


@dataclass(frozen=True)
class FittedDensity:
    """A density estimate bound to its sample, bandwidths and start.

    Callable on rows of points; :meth:`on_grid` uses the factorized tensor
    grid path.
    """

    sample: np.ndarray
    selector: KernelSelector
    bandwidths: BandwidthSet
    start: ParametricStart = UNIFORM
    boundary: float = None

    def __call__(self, points):
        return density_estimate(self.sample, self.selector, self.bandwidths,
                                self.start, points, self.boundary)

    def on_grid(self, axes):
        return density_on_grid(self.sample, self.selector, self.bandwidths,
                               axes, self.start, self.boundary)
