"""Simulation densities on the nonnegative orthant.

Every density here is a product of univariate margins, each margin a finite
mixture of gamma, Weibull or exponential components. The builtin scenarios
``A`` to ``M`` cover convex, unimodal and multimodal shapes in one, two,
three and five dimensions.

Sampling is seeded per margin: margin ``k`` of a sample drawn from
``SeedSequence(seed)`` uses the child stream with spawn key ``(..., k)``,
so adding a margin never changes the draws of the others.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import DomainError, UsageError

__all__ = [
    "BUILTIN_NAMES",
    "Exponential",
    "Gamma",
    "MarginMixture",
    "ScenarioSpec",
    "Weibull",
    "builtin",
    "default_combined_selector",
    "margin_seed_sequences",
]


def _positive(name, value):
    value = float(value)
    if not (value > 0 and np.isfinite(value)):
        raise DomainError(f"{name} must be finite and > 0, got {value}")
    return value


def _support(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0)):
        raise DomainError("densities are defined on [0, inf)")
    return x


@dataclass(frozen=True)
class Gamma:
    """Gamma law with ``shape`` and ``scale``."""

    shape: float
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    def log_pdf(self, x):
        x = _support(x)
        with np.errstate(divide="ignore"):
            return (special.xlogy(self.shape - 1.0, x) - x / self.scale
                    - special.gammaln(self.shape) - self.shape * np.log(self.scale))

    def cdf(self, x):
        return special.gammainc(self.shape, _support(x) / self.scale)

    def sample(self, rng, size):
        return rng.gamma(self.shape, self.scale, size)

    @property
    def mean(self):
        return self.shape * self.scale

    def to_dict(self):
        return {"family": "gamma", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Weibull:
    """Weibull law ``k/s (x/s)^(k-1) exp(-(x/s)^k)`` with shape ``k`` and scale ``s``."""

    shape: float
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    def log_pdf(self, x):
        z = _support(x) / self.scale
        with np.errstate(divide="ignore"):
            return (np.log(self.shape / self.scale)
                    + special.xlogy(self.shape - 1.0, z) - z ** self.shape)

    def cdf(self, x):
        return -np.expm1(-(_support(x) / self.scale) ** self.shape)

    def sample(self, rng, size):
        # inverse CDF on 1 - U, which lies in (0, 1]
        u = 1.0 - rng.random(size)
        return self.scale * (-np.log(u)) ** (1.0 / self.shape)

    @property
    def mean(self):
        return self.scale * special.gamma(1.0 + 1.0 / self.shape)

    def to_dict(self):
        return {"family": "weibull", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Exponential:
    """Exponential law with ``rate``."""

    rate: float

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def log_pdf(self, x):
        return np.log(self.rate) - self.rate * _support(x)

    def cdf(self, x):
        return -np.expm1(-self.rate * _support(x))

    def sample(self, rng, size):
        return -np.log(1.0 - rng.random(size)) / self.rate

    @property
    def mean(self):
        return 1.0 / self.rate

    def to_dict(self):
        return {"family": "exponential", "rate": self.rate}


_COMPONENTS = {"gamma": Gamma, "weibull": Weibull, "exponential": Exponential}


def _component_from_dict(doc):
    doc = dict(doc)
    family = str(doc.pop("family", "")).lower()
    if family not in _COMPONENTS:
        raise UsageError(f"unknown component family {family!r}")
    try:
        return _COMPONENTS[family](**doc)
    except TypeError as exc:
        raise UsageError(f"bad parameters for {family}: {exc}") from None


@dataclass(frozen=True)
class MarginMixture:
    """Finite mixture of univariate components."""

    weights: tuple
    components: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in np.atleast_1d(self.weights))
        comps = tuple(self.components)
        if not comps or len(w) != len(comps):
            raise UsageError("a mixture needs matching, nonempty weights and components")
        if any(not v > 0 for v in w):
            raise DomainError("mixture weights must be > 0")
        if abs(sum(w) - 1.0) > 1e-12:
            raise DomainError(f"mixture weights sum to {sum(w)!r}, not 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @classmethod
    def single(cls, component):
        return cls((1.0,), (component,))

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        parts = np.stack([np.log(w) + c.log_pdf(x)
                          for w, c in zip(self.weights, self.components)])
        top = np.max(parts, axis=0)
        safe = np.where(np.isfinite(top), top, 0.0)
        with np.errstate(divide="ignore"):
            return safe + np.log(np.sum(np.exp(parts - safe), axis=0))

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def cdf(self, x):
        return sum(w * c.cdf(x) for w, c in zip(self.weights, self.components))

    @property
    def mean(self):
        return sum(w * c.mean for w, c in zip(self.weights, self.components))

    def quantile(self, q):
        """Inverse CDF by bracketing and Brent's method."""
        if not 0 < q < 1:
            raise DomainError("quantile level must lie in (0, 1)")
        hi = max(1.0, 2.0 * self.mean)
        while self.cdf(hi) < q:
            hi *= 2.0
        return float(optimize.brentq(lambda t: self.cdf(t) - q, 0.0, hi,
                                     xtol=1e-14, rtol=1e-12))

    def sample(self, rng, size):
        labels = rng.choice(len(self.weights), size=size, p=np.asarray(self.weights))
        out = np.empty(size)
        for c, comp in enumerate(self.components):
            hit = labels == c
            out[hit] = comp.sample(rng, int(hit.sum()))
        return out

    def to_dict(self):
        return {"weights": list(self.weights),
                "components": [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, doc):
        return cls(tuple(doc["weights"]),
                   tuple(_component_from_dict(c) for c in doc["components"]))


def margin_seed_sequences(seed, d):
    """Per-margin seed sequences derived from an integer or a ``SeedSequence``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (k,))
            for k in range(d)]


@dataclass(frozen=True)
class ScenarioSpec:
    """Product density over ``margins``; ``combined`` is its preferred combined selector."""

    margins: tuple
    name: str = None
    combined: str = None

    def __post_init__(self):
        margins = tuple(self.margins)
        if not margins:
            raise UsageError("a scenario needs at least one margin")
        object.__setattr__(self, "margins", margins)
        if self.combined is not None and len(self.combined) != len(margins):
            raise UsageError("combined selector length must equal d")

    @property
    def d(self):
        return len(self.margins)

    def _points(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim <= 1 and (self.d > 1 or pts.ndim == 0)
        pts = pts.reshape(1, -1) if single else pts.reshape(-1, self.d)
        if pts.shape[1] != self.d:
            raise UsageError(f"points must have {self.d} coordinates")
        return _support(pts), single

    def log_pdf(self, x):
        pts, single = self._points(x)
        out = sum(m.log_pdf(pts[:, k]) for k, m in enumerate(self.margins))
        return float(out[0]) if single else out

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    __call__ = pdf

    def on_grid(self, axes):
        """Density on the tensor grid ``axes[0] x axes[1] x ...``."""
        if len(axes) != self.d:
            raise UsageError(f"need {self.d} grid axes")
        out = np.ones(())
        for m, ax in zip(self.margins, axes):
            out = np.multiply.outer(out, m.pdf(np.asarray(ax, dtype=float)))
        return out

    def box_mass(self, upper):
        """Probability of the box ``[0, upper]``."""
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (self.d,))
        return float(np.prod([m.cdf(u) for m, u in zip(self.margins, upper)]))

    def quantile(self, q):
        """Per-margin ``q`` quantiles."""
        return np.array([m.quantile(q) for m in self.margins])

    @property
    def mean(self):
        return np.array([m.mean for m in self.margins])

    def sample(self, n, seed=0):
        """``n`` draws as an ``(n, d)`` array; deterministic in ``seed``."""
        n = int(n)
        if n < 1:
            raise UsageError("sample size must be >= 1")
        seqs = margin_seed_sequences(seed, self.d)
        cols = [m.sample(np.random.default_rng(s), n) for m, s in zip(self.margins, seqs)]
        return np.column_stack(cols)

    def to_dict(self):
        doc = {"margins": [m.to_dict() for m in self.margins]}
        if self.name is not None:
            doc["name"] = self.name
        if self.combined is not None:
            doc["combined"] = self.combined
        return doc

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc):
        if "margins" not in doc:
            raise UsageError("scenario document needs a 'margins' list")
        return cls(tuple(MarginMixture.from_dict(m) for m in doc["margins"]),
                   doc.get("name"), doc.get("combined"))

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"scenario file is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    @property
    def combined_selector(self):
        return self.combined or default_combined_selector(self.d)


def default_combined_selector(d):
    """Standard kernel on the first coordinate, modified on the rest."""
    if d == 1:
        return "M"
    return "S" + "M" * (d - 1)


def _mix(weights, comps):
    return MarginMixture(tuple(weights), tuple(comps))


def _one(comp):
    return MarginMixture.single(comp)


def _builtins():
    a = _one(Exponential(2.0))
    c = _one(Weibull(3.0, 2.0))
    third = 1.0 / 3.0
    g = _mix((0.5, 0.5), (Gamma(2.5, 1.0), Gamma(10.0, 1.0)))
    h = _one(Weibull(2.0, np.sqrt(2.0)))
    k = _one(Weibull(2.0, 2.0))
    ell = _one(Gamma(3.0, 2.0))
    m = _mix((0.5, 0.5), (Gamma(2.0, 2.0), Gamma(8.0, 2.0)))
    return {
        "A": ScenarioSpec((a,), "A"),
        "B": ScenarioSpec((_mix((0.3, 0.4, 0.3),
                                (Gamma(2.0, 1 / 3), Gamma(8.0, 1 / 3), Gamma(11.0, 1 / 3))),), "B"),
        "C": ScenarioSpec((c,), "C"),
        "D": ScenarioSpec((_mix((third, third, 1.0 - 2 * third),
                                (Gamma(2.0, 0.4), Gamma(8.0, 0.4), Gamma(25.0, 0.4))),), "D"),
        "E": ScenarioSpec((a, a), "E"),
        "F": ScenarioSpec((_mix((2 / 11, 9 / 11), (Gamma(7.0, 0.5), Gamma(20.0, 0.5))),
                           _mix((2 / 7, 5 / 7), (Gamma(9.0, 0.5), Gamma(25.0, 0.5)))), "F"),
        "G": ScenarioSpec((g, g), "G"),
        "H": ScenarioSpec((h, h), "H"),
        "I": ScenarioSpec((a, c), "I", "SM"),
        "K": ScenarioSpec((k, k, k), "K", "SMM"),
        "L": ScenarioSpec((ell, ell, ell), "L", "SMM"),
        "M": ScenarioSpec((m,) * 5, "M", "SSSMM"),
    }


BUILTIN_NAMES = tuple("ABCDEFGHIKLM")


def builtin(name):
    """Builtin scenario ``A`` ... ``M`` (there is no ``J``)."""
    key = str(name).strip().upper()
    table = _builtins()
    if key not in table:
        raise UsageError(f"unknown scenario {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    return table[key]
