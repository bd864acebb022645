import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gammakde.errors import DomainError, UsageError
from gammakde.kernels import (KernelKind, KernelSelector, kernel_moments, kernel_shape,
                              log_multivariate_kernel, log_univariate_kernel, rho)
from gammakde.numerics import integrate_positive_halfline

S, M = KernelKind.STANDARD, KernelKind.MODIFIED


def test_selector_parsing():
    sel = KernelSelector.parse("S M")
    assert sel.kinds == (S, M) and sel.d == 2 and sel.family == "combined"
    assert KernelSelector.parse("mm").family == "modified"
    assert KernelSelector.standard(3).family == "standard"
    assert str(KernelSelector.parse("S,M;M")) == "SMM"
    assert KernelSelector.parse("SMM").n_modified == 2
    with pytest.raises(UsageError):
        KernelSelector.parse("SX")
    with pytest.raises(UsageError):
        KernelSelector.parse("")


@pytest.mark.parametrize("x, h, expected", [(0.0, 1.0, 1.0), (2.0, 1.0, 2.0), (3.0, 1.0, 3.0),
                                            (1.0, 1.0, 1.25)])
def test_rho_examples(x, h, expected):
    assert rho(x, h) == pytest.approx(expected, abs=1e-15)


def test_rho_domain():
    with pytest.raises(DomainError):
        rho(-1.0, 1.0)
    with pytest.raises(DomainError):
        rho(1.0, 0.0)


def test_rho_fixed_boundary():
    # a vanishing boundary region puts every positive x on the interior branch
    assert rho(0.5, 1.0, boundary=2e-8) == 0.5
    assert rho(0.0, 1.0, boundary=2e-8) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1e-6, max_value=1e3))
def test_rho_and_moments_continuous_at_2h(h):
    x = 2.0 * h
    inside = 1.0 + (x / (2.0 * h)) ** 2
    assert abs(inside - x / h) <= 1e-12 * (x / h)
    m = kernel_moments(M, x, h)
    below = kernel_moments(M, np.nextafter(x, 0), h)
    assert abs(m.mean_offset) <= 1e-12 * h and abs(below.mean_offset) <= 1e-12 * h
    assert abs(m.variance - 2 * h * h) <= 1e-12 * h * h
    assert abs(below.variance - 2 * h * h) <= 1e-12 * h * h


def test_univariate_kernel_examples():
    h, u = 0.7, 1.3
    assert log_univariate_kernel(S, 0.0, h, u) == pytest.approx(-u / h - math.log(h), abs=1e-14)
    assert log_univariate_kernel(S, 1.0, 1.0, 1.0) == pytest.approx(-1.0, abs=1e-14)
    assert log_univariate_kernel(M, 3.0, 1.0, 2.0) == pytest.approx(math.log(2 * math.exp(-2)), abs=1e-13)


def test_multivariate_kernel_examples():
    x, h, u = np.array([1.0, 3.0]), np.array([1.0, 1.0]), np.array([1.0, 2.0])
    got = log_multivariate_kernel("SM", x, h, u)
    assert got == pytest.approx(-1.0 + math.log(2 * math.exp(-2)), abs=1e-13)
    assert log_multivariate_kernel("M", [3.0], [1.0], [2.0]) == log_univariate_kernel(M, 3.0, 1.0, 2.0)
    hh = np.array([0.5, 2.0])
    expo = log_multivariate_kernel("SS", [0.0, 0.0], hh, u)
    assert expo == pytest.approx(np.sum(-u / hh - np.log(hh)), abs=1e-13)
    with pytest.raises(UsageError):
        log_multivariate_kernel("SM", [1.0], [1.0, 1.0], [1.0, 1.0])


def test_moment_examples():
    m = kernel_moments(S, 2.0, 0.5)
    assert (m.mean_offset, m.variance) == (0.5, 1.25)
    m = kernel_moments(M, 3.0, 1.0)
    assert (m.mean_offset, m.variance) == (0.0, 3.0)
    m = kernel_moments(M, 0.5, 1.0)
    assert m.mean_offset == pytest.approx((0.25 + 4 * 0.5) / 4)
    assert m.variance == pytest.approx((0.25 + 4) / 4)


def test_shape_difference_on_interior_branch():
    for x, h in [(3.0, 1.0), (10.0, 0.1), (2.0, 1.0)]:
        assert kernel_shape(S, x, h) - kernel_shape(M, x, h) == pytest.approx(1.0, abs=1e-12)


def test_kernel_normalization_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        kind = S if rng.random() < 0.5 else M
        x = float(rng.uniform(0, 10))
        h = float(np.exp(rng.uniform(np.log(0.01), np.log(2))))
        shape = kernel_shape(kind, x, h)
        mass = integrate_positive_halfline(
            lambda u: np.exp(log_univariate_kernel(kind, x, h, u)), 1e-8, scale=shape * h)
        assert abs(mass - 1.0) < 1e-6, (kind, x, h)


def test_kernel_moments_monte_carlo():
    rng = np.random.default_rng(11)
    for _ in range(20):
        kind = S if rng.random() < 0.5 else M
        h = float(rng.uniform(0.05, 1.0))
        x = float(rng.uniform(0, 6 * h))
        shape = kernel_shape(kind, x, h)
        draws = rng.gamma(shape, h, 100_000)
        mom = kernel_moments(kind, x, h)
        se = math.sqrt(mom.variance / draws.size)
        assert abs(draws.mean() - (x + mom.mean_offset)) < 4 * se
        assert abs(draws.var() / mom.variance - 1) < 0.10
