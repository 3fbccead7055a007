"""Univariate normal distribution primitives shared by every engine.

Tail quantities go through erfc so the upper tail never suffers the
catastrophic cancellation of a naive ``1 - cdf``.  All functions accept
scalars or numpy arrays and are pure, hence safe under any concurrency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = ["NormalParams", "pdf", "cdf", "ccdf", "inv_ccdf"]

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class NormalParams:
    """Mean/variance pair describing one hop's delay (or a multi-hop aggregate)."""

    mean: float
    var: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and math.isfinite(self.var)):
            raise ValueError("NormalParams requires finite mean and var")
        if self.var <= 0.0:
            raise ValueError(f"var must be > 0, got {self.var!r}")

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    def scaled(self, k: float) -> "NormalParams":
        """Parameters of the sum of ``k`` independent copies: (k*mean, k*var)."""
        return NormalParams(k * self.mean, k * self.var)


def _match(x, out):
    # return a python float for scalar input, ndarray otherwise
    if np.ndim(x) == 0:
        return float(out)
    return np.asarray(out)


def pdf(x, p: NormalParams):
    """Normal density at ``x``."""
    z = (np.asarray(x, dtype=float) - p.mean) / p.sd
    return _match(x, np.exp(-0.5 * z * z) / (p.sd * _SQRT2PI))


def cdf(x, p: NormalParams):
    """P[X <= x].  Evaluated through erfc for left-tail accuracy."""
    z = (np.asarray(x, dtype=float) - p.mean) / p.sd
    return _match(x, 0.5 * special.erfc(-z / _SQRT2))


def ccdf(x, p: NormalParams):
    """P[X > x], the upper-tail probability, without cancellation."""
    z = (np.asarray(x, dtype=float) - p.mean) / p.sd
    return _match(x, 0.5 * special.erfc(z / _SQRT2))


def inv_ccdf(p, params: NormalParams):
    """The x with ccdf(x, params) == p, for p strictly inside (0, 1).

    A rational-approximation seed (ndtri) is polished with one Newton step
    against :func:`ccdf`, which pins the round-trip error in p below 1e-9.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError("p must lie strictly inside (0, 1)")
    z = -special.ndtri(arr)
    x = params.mean + params.sd * z
    dens = np.asarray(pdf(x, params))
    safe = np.where(dens > 0.0, dens, 1.0)
    x = x + np.where(dens > 0.0, (np.asarray(ccdf(x, params)) - arr) / safe, 0.0)
    return _match(p, x)
