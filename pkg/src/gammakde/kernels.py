"""Standard, modified and combined gamma kernels on the nonnegative orthant.

A univariate gamma kernel at target ``x`` with bandwidth ``h`` is a gamma
density in the observation ``u`` with scale ``h``:

* standard: shape ``1 + x/h``
* modified: shape ``rho(x; h)``, equal to ``1 + (x/2h)**2`` inside the
  boundary region and ``x/h`` beyond it

The multivariate kernel is the product over coordinates, each coordinate
choosing its own variant through a :class:`KernelSelector`.

Every function accepts an optional ``boundary`` width. ``None`` selects the
textbook region ``[0, 2h)``; a number selects the fixed region
``[0, boundary)``, which is how a vanishing boundary region is implemented.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError
from .numerics import log_gamma_pdf

__all__ = [
    "KernelKind",
    "KernelMoments",
    "KernelSelector",
    "kernel_moments",
    "kernel_shape",
    "log_multivariate_kernel",
    "log_univariate_kernel",
    "rho",
]


class KernelKind(enum.Enum):
    STANDARD = "S"
    MODIFIED = "M"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper()
        for kind in cls:
            if key in (kind.value, kind.name):
                return kind
        raise UsageError(f"unknown kernel kind {value!r}; use 'S' or 'M'")


@dataclass(frozen=True)
class KernelSelector:
    """Per-coordinate choice of standard or modified gamma kernel.

    ``KernelSelector.parse("SM")`` (spaces ignored) puts a standard kernel
    on the first coordinate and a modified one on the second.
    """

    kinds: tuple

    def __post_init__(self):
        kinds = tuple(KernelKind.parse(k) for k in self.kinds)
        if not kinds:
            raise UsageError("a kernel selector needs at least one coordinate")
        object.__setattr__(self, "kinds", kinds)

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        letters = [c for c in str(text) if not c.isspace() and c not in ",;"]
        return cls(tuple(letters))

    @classmethod
    def standard(cls, d):
        return cls((KernelKind.STANDARD,) * d)

    @classmethod
    def modified(cls, d):
        return cls((KernelKind.MODIFIED,) * d)

    @property
    def d(self):
        return len(self.kinds)

    @property
    def n_modified(self):
        return sum(k is KernelKind.MODIFIED for k in self.kinds)

    @property
    def family(self):
        """``"standard"``, ``"modified"`` or ``"combined"``."""
        if self.n_modified == 0:
            return "standard"
        if self.n_modified == self.d:
            return "modified"
        return "combined"

    def __str__(self):
        return "".join(k.value for k in self.kinds)


@dataclass(frozen=True)
class KernelMoments:
    """Kernel mean minus target (``mean_offset``) and kernel variance."""

    mean_offset: float
    variance: float


def _check_xh(x, h):
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(~(x >= 0)):
        raise DomainError("target x must be >= 0")
    if np.any(~(h > 0)) or np.any(~np.isfinite(h)):
        raise DomainError("bandwidth h must be finite and > 0")
    return x, h


def _boundary_width(h, boundary):
    if boundary is None:
        return 2.0 * h
    if boundary < 0:
        raise DomainError("boundary width must be >= 0")
    return boundary


def rho(x, h, boundary=None):
    """Shape parameter of the modified gamma kernel."""
    x, h = _check_xh(x, h)
    inside = x < _boundary_width(h, boundary)
    out = np.where(inside, 1.0 + (x / (2.0 * h)) ** 2, x / h)
    return float(out) if out.ndim == 0 else out


def kernel_shape(kind, x, h, boundary=None):
    """Gamma shape parameter of the univariate kernel at target ``x``."""
    kind = KernelKind.parse(kind)
    if kind is KernelKind.STANDARD:
        x, h = _check_xh(x, h)
        out = 1.0 + x / h
        return float(out) if out.ndim == 0 else out
    return rho(x, h, boundary)


def log_univariate_kernel(kind, x, h, u, boundary=None):
    """Log of the univariate gamma kernel at target ``x`` evaluated at ``u``.

    Broadcasts over ``x``, ``h`` and ``u``.
    """
    shape = kernel_shape(kind, x, h, boundary)
    return log_gamma_pdf(u, shape, h)


def log_multivariate_kernel(selector, x, h, u, boundary=None):
    """Log of the product kernel; the last axis of ``x``, ``h``, ``u`` is the coordinate."""
    selector = KernelSelector.parse(selector)
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    u = np.asarray(u, dtype=float)
    d = selector.d
    if x.shape[-1:] != (d,) or h.shape[-1:] != (d,) or u.shape[-1:] != (d,):
        raise UsageError(f"x, h and u must all have last dimension {d}")
    total = 0.0
    for k, kind in enumerate(selector.kinds):
        total = total + log_univariate_kernel(kind, x[..., k], h[..., k],
                                              u[..., k], boundary)
    return total


def kernel_moments(kind, x, h):
    """Mean offset and variance of the univariate kernel's gamma law.

    Uses the textbook ``[0, 2h)`` boundary region for the modified kernel.
    """
    kind = KernelKind.parse(kind)
    x, h = _check_xh(x, h)
    x, h = float(x), float(h)
    if kind is KernelKind.STANDARD:
        return KernelMoments(h, h * (x + h))
    if x >= 2.0 * h:
        return KernelMoments(0.0, x * h)
    return KernelMoments((x * x + 4.0 * h * (h - x)) / (4.0 * h),
                         (x * x + 4.0 * h * h) / 4.0)
