import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from gammakde.errors import DomainError, UsageError
from gammakde.scenarios import (BUILTIN_NAMES, Exponential, Gamma, MarginMixture,
                                ScenarioSpec, Weibull, builtin)


def test_builtin_examples():
    assert builtin("A").pdf(0.0) == pytest.approx(2.0)
    assert builtin("A").pdf(1.0) == pytest.approx(2 * math.exp(-2), rel=1e-14)
    assert builtin("C").pdf(2.0) == pytest.approx(1.5 * math.exp(-1), rel=1e-14)
    assert builtin("E").pdf([1.0, 1.0]) == pytest.approx((2 * math.exp(-2)) ** 2, rel=1e-14)
    for y in (0.0, 0.5, 3.0):
        assert builtin("H").pdf([0.0, y]) == 0.0
    assert sum(builtin("B").margins[0].weights) == pytest.approx(1.0, abs=1e-15)


def test_builtin_structure():
    assert [builtin(n).d for n in BUILTIN_NAMES] == [1, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3, 5]
    assert builtin("C").margins[0].components[0] == Weibull(3.0, 2.0)
    assert builtin("H").margins[0].components[0] == Weibull(2.0, math.sqrt(2.0))
    assert builtin("K").margins[2].components[0] == Weibull(2.0, 2.0)
    assert builtin("M").margins[4].weights == (0.5, 0.5)
    assert builtin("I").combined_selector == "SM"
    with pytest.raises(UsageError):
        builtin("J")


def test_rayleigh_form():
    x = np.linspace(0, 5, 11)
    np.testing.assert_allclose(builtin("H").margins[0].pdf(x), x * np.exp(-x ** 2 / 2), atol=1e-15)
    np.testing.assert_allclose(builtin("K").margins[0].pdf(x), x / 2 * np.exp(-(x / 2) ** 2), atol=1e-15)


def test_pdf_domain():
    with pytest.raises(DomainError):
        builtin("E").pdf([1.0, -0.1])
    with pytest.raises(UsageError):
        builtin("E").pdf([1.0, 1.0, 1.0])


def test_component_validation():
    with pytest.raises(DomainError):
        Gamma(0.0, 1.0)
    with pytest.raises(DomainError):
        MarginMixture((0.5, 0.6), (Exponential(1.0), Exponential(2.0)))
    with pytest.raises(UsageError):
        MarginMixture((1.0,), ())


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_margin_normalization(name):
    for m in builtin(name).margins:
        mass = integrate.quad(m.pdf, 0, np.inf, limit=200)[0]
        assert abs(mass - 1.0) < 1e-6


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_margin_cdf_matches_integral(name):
    m = builtin(name).margins[-1]
    q = m.quantile(0.5)
    assert integrate.quad(m.pdf, 0, q, limit=200)[0] == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_ks_sampling(name):
    spec = builtin(name)
    X = spec.sample(10_000, 2024)
    assert X.shape == (10_000, spec.d) and np.all(X >= 0)
    # two-sided KS critical value at level 0.001
    crit = stats.kstwo.ppf(0.999, 10_000)
    for k, m in enumerate(spec.margins):
        # CDF by quadrature of the pdf, independent of the closed forms
        grid = np.sort(X[:, k])
        knots = np.concatenate([[0.0], grid])
        pieces = [integrate.quad(m.pdf, a, b)[0] for a, b in zip(knots[::50][:-1], knots[::50][1:])]
        cdf_at = np.concatenate([[0.0], np.cumsum(pieces)])
        F = np.interp(grid, knots[::50], cdf_at)
        # interpolation between coarse knots stays far below the critical value
        ecdf_hi = np.arange(1, grid.size + 1) / grid.size
        ecdf_lo = np.arange(grid.size) / grid.size
        ks = max(np.max(ecdf_hi - F), np.max(F - ecdf_lo))
        assert ks < crit, (name, k, ks, crit)


def test_sampling_means():
    a = builtin("A").sample(100_000, 3)[:, 0]
    assert abs(a.mean() - 0.5) < 4 * 0.5 / math.sqrt(a.size)
    c = builtin("C").sample(100_000, 3)[:, 0]
    mean = 2 * special.gamma(4 / 3)
    sd = 2 * math.sqrt(special.gamma(5 / 3) - special.gamma(4 / 3) ** 2)
    assert abs(c.mean() - mean) < 4 * sd / math.sqrt(c.size)


def test_seed_determinism_and_margin_independence():
    a = builtin("K").sample(50, 7)
    b = builtin("K").sample(50, 7)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, builtin("K").sample(50, 8))
    # adding margins leaves the existing ones' streams untouched
    m = builtin("K").margins[0]
    two = ScenarioSpec((m, m)).sample(50, 7)
    np.testing.assert_array_equal(two, a[:, :2])


def test_seed_sequence_input():
    ss = np.random.SeedSequence(3, spawn_key=(4,))
    a = builtin("E").sample(10, ss)
    b = builtin("E").sample(10, np.random.SeedSequence(3, spawn_key=(4,)))
    assert np.array_equal(a, b)


def test_pdf_nonnegative_everywhere_tested():
    rng = np.random.default_rng(0)
    for name in BUILTIN_NAMES:
        spec = builtin(name)
        pts = rng.uniform(0, 30, (500, spec.d))
        assert np.all(spec.pdf(pts) >= 0)


def test_on_grid_matches_pointwise():
    spec = builtin("F")
    axes = [np.linspace(0, 20, 7), np.linspace(0, 25, 5)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([g.ravel() for g in mesh])
    np.testing.assert_allclose(spec.on_grid(axes).ravel(), spec.pdf(pts), rtol=1e-13)


def test_json_roundtrip():
    for name in BUILTIN_NAMES:
        spec = builtin(name)
        back = ScenarioSpec.from_json(spec.to_json())
        assert back == spec
    custom = {"name": "mine", "margins": [
        {"weights": [0.25, 0.75], "components": [
            {"family": "gamma", "shape": 2, "scale": 1},
            {"family": "weibull", "shape": 1.5, "scale": 3}]},
        {"weights": [1.0], "components": [{"family": "exponential", "rate": 0.5}]}]}
    spec = ScenarioSpec.from_dict(custom)
    assert spec.d == 2 and spec.name == "mine"
    with pytest.raises(UsageError):
        ScenarioSpec.from_dict({"margins": [{"weights": [1.0],
                                             "components": [{"family": "beta", "a": 1}]}]})
    with pytest.raises(UsageError):
        ScenarioSpec.from_json("{not json")


def test_box_mass_and_quantile():
    spec = builtin("I")
    q = spec.quantile(1 - 1e-7)
    assert spec.box_mass(q) == pytest.approx((1 - 1e-7) ** 2, rel=1e-12)
