"""Integrated squared error, replication harness, held-out log-likelihood
and leading-order bias/variance diagnostics.

ISE is integrated over a box ``[0, upper]`` that holds almost all of the
true density's mass: a trapezoid tensor grid for ``d <= 2`` and scrambled
Sobol points for ``d >= 3``.

Replication ``r`` of a harness run draws its data from
``SeedSequence(seed, spawn_key=(r,))``, so results depend only on the
master seed and the replication index, never on execution order.
"""

import csv
import io
import json
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, stats

from .bandwidth import BoundaryPolicy, PriorConfig, bayes_adaptive_bandwidths
from .errors import ConfigurationError, DomainError, UsageError
from .estimators import UNIFORM, FittedDensity, as_sample, fit_parametric_start
from .kernels import KernelKind, KernelSelector

__all__ = [
    "IntegrationDomain",
    "IseReport",
    "LoglikReport",
    "NumericWarning",
    "asymptotic_bias",
    "asymptotic_variance",
    "holdout_loglik",
    "ise",
    "method_label",
    "replicate_ise",
    "selection_cpu_time",
]

_DEFAULT_RESOLUTION = {1: 2048, 2: 512}
_DEFAULT_QMC_POINTS = 2 ** 16
# per-margin tail left outside the box; d margins lose at most d times this
_DEFAULT_TAIL = 1e-7
_MIN_MASS = 1.0 - 1e-6


class NumericWarning(UserWarning):
    """A diagnostic is evaluated where its assumptions are doubtful."""


def method_label(selector):
    """``standard``, ``modified`` or ``combined``."""
    return KernelSelector.parse(selector).family


@dataclass(frozen=True)
class IntegrationDomain:
    """Truncation box ``[0, upper]`` and integration resolution.

    ``resolution`` is the number of grid points per axis for ``d <= 2`` and
    the number of quasi-random points for ``d >= 3``. The first grid node
    sits at ``origin * upper`` rather than 0 so that a kernel estimate with
    a vanishing boundary region is sampled by its right limit at the origin;
    the omitted sliver carries no measurable mass.
    """

    upper: tuple
    resolution: int = None
    origin: float = 1e-6
    qmc_seed: int = 0

    def __post_init__(self):
        upper = tuple(float(u) for u in np.atleast_1d(self.upper))
        if not upper or any(not (u > 0 and np.isfinite(u)) for u in upper):
            raise ConfigurationError("truncation bounds must be finite and > 0")
        object.__setattr__(self, "upper", upper)
        d = len(upper)
        res = self.resolution
        if res is None:
            res = _DEFAULT_RESOLUTION.get(d, _DEFAULT_QMC_POINTS)
        if int(res) < 2:
            raise ConfigurationError("resolution must be >= 2")
        object.__setattr__(self, "resolution", int(res))
        if not 0 <= self.origin < 1:
            raise ConfigurationError("origin offset must lie in [0, 1)")

    @property
    def d(self):
        return len(self.upper)

    @classmethod
    def for_scenario(cls, scenario, tail=_DEFAULT_TAIL, resolution=None):
        """Box bounded by each margin's ``1 - tail`` quantile."""
        dom = cls(tuple(scenario.quantile(1.0 - tail)), resolution)
        dom.check_mass(scenario)
        return dom

    def check_mass(self, scenario, min_mass=_MIN_MASS):
        mass = scenario.box_mass(self.upper)
        if mass < min_mass:
            raise ConfigurationError(
                f"truncation box holds mass {mass:.10f} < {min_mass}")
        return mass

    def axes(self):
        return [np.linspace(self.origin * u, u, self.resolution) for u in self.upper]


def _grid_values(func, axes):
    if hasattr(func, "on_grid"):
        return np.asarray(func.on_grid(axes), dtype=float)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    return np.asarray(func(pts), dtype=float).reshape(mesh[0].shape)


def ise(estimate, truth, domain, d=None):
    """Integrated squared error of ``estimate`` against ``truth`` over ``domain``.

    Both are callables taking an ``(m, d)`` array of points; objects with an
    ``on_grid(axes)`` method are evaluated on the tensor grid directly.
    When ``truth`` is a scenario, the domain's mass is checked against it.
    """
    d = domain.d if d is None else int(d)
    if d != domain.d:
        raise UsageError(f"domain has {domain.d} dimensions, expected {d}")
    if hasattr(truth, "box_mass"):
        domain.check_mass(truth)
    if d <= 2:
        axes = domain.axes()
        sq = (_grid_values(estimate, axes) - _grid_values(truth, axes)) ** 2
        for ax in reversed(axes):
            sq = integrate.trapezoid(sq, ax, axis=-1)
        return float(max(sq, 0.0))
    m = int(np.log2(domain.resolution))
    sobol = stats.qmc.Sobol(d, scramble=True, seed=domain.qmc_seed)
    u = sobol.random_base2(m) if 2 ** m == domain.resolution else sobol.random(domain.resolution)
    upper = np.asarray(domain.upper)
    pts = u * upper
    diff = np.asarray(estimate(pts), dtype=float) - np.asarray(truth(pts), dtype=float)
    return float(np.prod(upper) * np.mean(diff ** 2))


def _summary(values):
    values = np.asarray(values, dtype=float)
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return float(np.mean(values)), sd


def _write_csv(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


@dataclass(frozen=True)
class IseReport:
    """ISE over replications; ``sd_ise`` uses ``ddof=1`` and is 0 when ``N = 1``."""

    scenario: str
    n: int
    selector: str
    N: int
    mean_ise: float
    sd_ise: float
    values: tuple
    seed: int
    meta: dict = field(default_factory=dict, compare=False)

    CSV_HEADER = ("scenario", "n", "method", "mean_x1e3", "sd_x1e3")

    @property
    def method(self):
        return method_label(self.selector)

    @property
    def se_ise(self):
        return self.sd_ise / np.sqrt(self.N)

    def csv_row(self):
        return (self.scenario, self.n, self.method,
                f"{1e3 * self.mean_ise:.6f}", f"{1e3 * self.sd_ise:.6f}")

    def to_dict(self):
        doc = asdict(self)
        doc["values"] = list(self.values)
        doc["method"] = self.method
        return doc

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @staticmethod
    def to_csv(reports):
        return _write_csv([r.csv_row() for r in reports], IseReport.CSV_HEADER)


@dataclass(frozen=True)
class LoglikReport:
    """Held-out log-likelihood over replications."""

    dataset: str
    m: int
    selector: str
    replications: int
    mean_loglik: float
    sd_loglik: float
    values: tuple
    split: str
    seed: int
    meta: dict = field(default_factory=dict, compare=False)

    CSV_HEADER = ("m_n", "method", "mean", "sd")

    @property
    def method(self):
        return method_label(self.selector)

    @property
    def se_loglik(self):
        return self.sd_loglik / np.sqrt(self.replications)

    def csv_row(self):
        return (self.m, self.method, f"{self.mean_loglik:.6f}", f"{self.sd_loglik:.6f}")

    def to_dict(self):
        doc = asdict(self)
        doc["values"] = list(self.values)
        doc["method"] = self.method
        return doc

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @staticmethod
    def to_csv(reports):
        return _write_csv([r.csv_row() for r in reports], LoglikReport.CSV_HEADER)


def _run_indexed(task, count, workers):
    if workers is None or workers <= 1:
        return [task(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(task, range(count)))


def replicate_ise(scenario, n, selector, prior=None, policy=None, N=100, seed=0,
                  domain=None, prior_exponent=0.4, workers=None):
    """Mean and sd of ISE over ``N`` replications of Bayesian adaptive smoothing.

    Each replication samples ``n`` points, selects bandwidths with the
    uniform start and scores the nonparametric estimate. The modified
    kernel's boundary region is ``[0, policy.epsilon)``, the same split the
    bandwidth selector uses.

    Parameters
    ----------
    scenario : ScenarioSpec
    n : int
    selector : KernelSelector or str
    prior : PriorConfig, optional
        Defaults to ``alpha = n**prior_exponent``, ``beta = 1``.
    policy : BoundaryPolicy, optional
    N : int
        Replications, >= 1.
    seed : int
    domain : IntegrationDomain, optional
        Defaults to :meth:`IntegrationDomain.for_scenario`.
    workers : int, optional
        Threads for running replications; results are identical for any value.
    """
    N, n = int(N), int(n)
    if N < 1:
        raise UsageError("need at least one replication")
    if n < 2:
        raise UsageError("need n >= 2")
    selector = KernelSelector.parse(selector)
    if selector.d != scenario.d:
        raise UsageError(f"selector has {selector.d} coordinates, scenario has {scenario.d}")
    prior = PriorConfig.default(n, scenario.d, prior_exponent) if prior is None else prior
    policy = BoundaryPolicy() if policy is None else policy
    domain = IntegrationDomain.for_scenario(scenario) if domain is None else domain
    domain.check_mass(scenario)

    def one(r):
        X = scenario.sample(n, np.random.SeedSequence(seed, spawn_key=(r,)))
        bw = bayes_adaptive_bandwidths(X, UNIFORM, prior, policy, selector)
        fit = FittedDensity(as_sample(X), selector, bw, UNIFORM, policy.epsilon)
        return ise(fit, scenario, domain)

    values = _run_indexed(one, N, workers)
    mean, sd = _summary(values)
    return IseReport(scenario.name or "custom", n, str(selector), N, mean, sd,
                     tuple(values), int(seed),
                     {"alpha": prior.alpha, "betas": list(prior.betas),
                      "epsilon": policy.epsilon, "lambda": policy.lam,
                      "upper": list(domain.upper), "resolution": domain.resolution})


def holdout_loglik(sample, m, selector, prior=None, policy=None, start=None,
                   replications=100, seed=0, floor=-700.0, evaluate_on="holdout",
                   prior_exponent=0.4, dataset="data", workers=None):
    """Summed log density of held-out points, over random splits.

    Each replication draws ``m`` indices without replacement. With
    ``evaluate_on="holdout"`` the estimator is fit on the other ``n - m``
    points and scored on the ``m`` drawn ones; ``"remainder"`` swaps the
    roles. Log densities below ``floor`` are raised to it.

    ``start`` is a :class:`ParametricStart` or a family name; a family name
    is fitted on each training set. The default prior uses the training
    size in ``alpha = n_train**prior_exponent``.
    """
    X = as_sample(sample)
    n, d = X.shape
    m = int(m)
    if not 2 <= m < n:
        raise UsageError(f"held-out size must satisfy 2 <= m < n = {n}, got {m}")
    if evaluate_on not in ("holdout", "remainder"):
        raise UsageError("evaluate_on is 'holdout' or 'remainder'")
    if int(replications) < 1:
        raise UsageError("need at least one replication")
    selector = KernelSelector.parse(selector)
    if selector.d != d:
        raise UsageError(f"selector has {selector.d} coordinates, data has {d}")
    policy = BoundaryPolicy() if policy is None else policy
    n_train = n - m if evaluate_on == "holdout" else m
    prior = PriorConfig.default(n_train, d, prior_exponent) if prior is None else prior

    def one(r):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
        drawn = np.zeros(n, dtype=bool)
        drawn[rng.choice(n, size=m, replace=False)] = True
        train, test = (X[~drawn], X[drawn]) if evaluate_on == "holdout" else (X[drawn], X[~drawn])
        p = UNIFORM if start is None else fit_parametric_start(train, start)
        bw = bayes_adaptive_bandwidths(train, p, prior, policy, selector)
        dens = FittedDensity(as_sample(train), selector, bw, p, policy.epsilon)(test)
        with np.errstate(divide="ignore"):
            logs = np.log(np.maximum(dens, 0.0))
        return float(np.sum(np.maximum(logs, floor)))

    values = _run_indexed(one, int(replications), workers)
    mean, sd = _summary(values)
    split = (f"fit on n-m={n - m}, score {m} held-out" if evaluate_on == "holdout"
             else f"fit on m={m}, score remaining {n - m}")
    return LoglikReport(dataset, m, str(selector), int(replications), mean, sd,
                        tuple(values), split, int(seed),
                        {"alpha": prior.alpha, "betas": list(prior.betas),
                         "epsilon": policy.epsilon, "floor": floor})


def _point(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise UsageError("x must be a single d-vector")
    return x


def _call(f, x):
    return float(np.asarray(f(x[None, :]), dtype=float).ravel()[0])


def asymptotic_bias(x, truth, start, selector, h):
    """Leading-order bias of the estimator at ``x`` for fixed bandwidths ``h``.

    With ``w = truth / start`` this is ``p(x)`` times
    ``sum_std [h_r w_r + (x_r h_r + 2 h_r**2) w_rr / 2] + sum_mod x_s h_s w_ss / 2``,
    the sums running over standard and modified coordinates. Derivatives
    are central differences with step ``h_r / 2``; when that step would
    leave the support a one-sided difference is used and a
    :class:`NumericWarning` is issued.

    Raises
    ------
    DomainError
        If a modified coordinate lies in its boundary region ``x < 2h``.
    """
    x = _point(x)
    d = x.size
    selector = KernelSelector.parse(selector)
    h = np.broadcast_to(np.asarray(h, dtype=float), (d,))
    if selector.d != d:
        raise UsageError("selector and x dimensions differ")
    if np.any(x < 0) or np.any(~(h > 0)):
        raise DomainError("need x >= 0 and h > 0")
    start = UNIFORM if start is None else start
    mod = np.array([k is KernelKind.MODIFIED for k in selector.kinds])
    if np.any(mod & (x < 2.0 * h)):
        raise DomainError("modified coordinates must satisfy x >= 2h for the interior formula")

    def w(pt):
        return _call(truth, pt) / float(np.exp(start.log_pdf(pt[None, :]))[0])

    w0 = w(x)
    total = 0.0
    for r in range(d):
        step = 0.5 * h[r]
        e = np.zeros(d)
        e[r] = step
        if x[r] - step < 0:
            warnings.warn(f"coordinate {r} is within one step of the origin; "
                          "using one-sided differences", NumericWarning, stacklevel=2)
            f1, f2 = w(x + e), w(x + 2 * e)
            d1 = (-3 * w0 + 4 * f1 - f2) / (2 * step)
            d2 = (w0 - 2 * f1 + f2) / step ** 2
        else:
            fp, fm = w(x + e), w(x - e)
            d1 = (fp - fm) / (2 * step)
            d2 = (fp - 2 * w0 + fm) / step ** 2
        if mod[r]:
            total += 0.5 * x[r] * h[r] * d2
        else:
            total += h[r] * d1 + 0.5 * (x[r] * h[r] + 2 * h[r] ** 2) * d2
    return float(np.exp(start.log_pdf(x[None, :]))[0]) * total


def asymptotic_variance(x, truth, start, selector, h, n):
    """Leading-order variance ``f(x) p(x)**-2 / n * prod_j (2 sqrt(pi))**-1 (h_j x_j)**-1/2``.

    This is the interior form, valid when every ``x_j >= 2 h_j``; a
    :class:`NumericWarning` is issued otherwise.
    """
    x = _point(x)
    d = x.size
    h = np.broadcast_to(np.asarray(h, dtype=float), (d,))
    if KernelSelector.parse(selector).d != d:
        raise UsageError("selector and x dimensions differ")
    if np.any(~(x > 0)):
        raise DomainError("the interior variance formula needs every x_j > 0")
    if np.any(~(h > 0)) or int(n) < 1:
        raise DomainError("need h > 0 and n >= 1")
    if np.any(x < 2.0 * h):
        warnings.warn("x lies in a boundary region; interior variance formula applied",
                      NumericWarning, stacklevel=2)
    start = UNIFORM if start is None else start
    f = _call(truth, x)
    lp = float(start.log_pdf(x[None, :])[0])
    factor = np.prod(1.0 / (2.0 * np.sqrt(np.pi) * np.sqrt(h * x)))
    return float(f * np.exp(-2.0 * lp) * factor / int(n))


def selection_cpu_time(sample, selector, repeats=3, prior=None, policy=None):
    """Median process CPU seconds of one Bayesian bandwidth selection."""
    X = as_sample(sample)
    times = []
    for _ in range(int(repeats)):
        t0 = time.process_time()
        bayes_adaptive_bandwidths(X, UNIFORM, prior, policy, selector)
        times.append(time.process_time() - t0)
    return float(np.median(times))
