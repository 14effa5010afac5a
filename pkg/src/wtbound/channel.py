"""Per-slot service laws of a single wireless link.

The bound kernels only need ``ln V(s) = ln E[exp(-s c)]`` where ``c`` is the
capacity of one slot in bits; the simulator needs i.i.d. capacity draws.

For Rayleigh block fading with mean SNR ``g`` and ``m`` channel uses per
slot, ``c = m log2(1 + g Y)`` with ``Y ~ Exp(1)``, so with ``a = s m / ln 2``

    V(s) = int_0^inf (1 + g y)^(-a) exp(-y) dy
         = exp(1/g) g^(-a) Gamma(1 - a, 1/g)

where ``Gamma(., .)`` is the *upper* incomplete gamma function.  The integral
is evaluated by quadrature; the closed form is kept as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from numpy.polynomial.laguerre import laggauss
from scipy import integrate, special

__all__ = [
    "QuadratureError",
    "RayleighChannel",
    "ConstantChannel",
    "ChannelModel",
    "ln_V",
    "sample_capacity",
    "rayleigh_mellin",
    "rayleigh_mellin_closed_form",
]

LN2 = math.log(2.0)

# Node counts tried in turn; numpy's Laguerre weights underflow past ~180.
_LAGUERRE_NODES = (16, 32, 64, 128)
_QUAD_RTOL = 1e-10


class QuadratureError(ArithmeticError):
    """Raised when no quadrature route reaches the requested accuracy."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@lru_cache(maxsize=None)
def _laguerre(n):
    x, w = laggauss(n)
    keep = w > 0
    return x[keep], w[keep]


def _laguerre_y(a, g, n):
    # Integrand in the original variable: (1 + g y)^-a against exp(-y).
    x, w = _laguerre(n)
    return float(np.dot(w, np.exp(-a * np.log1p(g * x))))


def _laguerre_z(a, g, n):
    # Substitute z = a ln(1 + g y): exp(-z) weight, smooth remainder.
    x, w = _laguerre(n)
    t = x / a
    h = np.exp(t - np.expm1(np.minimum(t, 700.0)) / g)
    return float(np.dot(w, h)) / (g * a)


def _quad_log_form(a, g):
    # With t = ln(1 + g y) the integrand is log-concave in t.
    def f(t):
        return math.exp((1.0 - a) * t - math.expm1(min(t, 700.0)) / g) / g

    # Past t_max the double-exponential factor is below exp(-700) of its peak.
    t_peak = max(0.0, math.log(g * (1.0 - a))) if a < 1.0 else 0.0
    t_max = max(t_peak, 0.0) + math.log1p(g * 800.0)
    val, err = integrate.quad(f, 0.0, t_max, epsabs=0.0, epsrel=1e-13, limit=400,
                              points=[t_peak] if 0.0 < t_peak < t_max else None)
    return val, err


def rayleigh_mellin(a: float, g: float) -> tuple[float, dict]:
    """``int_0^inf (1 + g y)^-a e^-y dy`` with diagnostics.

    Gauss-Laguerre with node doubling is tried first, in whichever variable
    suits the regime; adaptive quadrature on the log-concave form is the
    fallback when successive Laguerre estimates disagree.
    """
    if a <= 0:
        raise ValueError("exponent a must be > 0")
    rule = _laguerre_z if a >= 1.0 else _laguerre_y
    history = []
    prev = None
    for n in _LAGUERRE_NODES:
        cur = rule(a, g, n)
        history.append((n, cur))
        if prev is not None and cur > 0 and abs(cur - prev) <= _QUAD_RTOL * abs(cur):
            return cur, {"method": rule.__name__.lstrip("_"), "nodes": n}
        prev = cur
    val, err = _quad_log_form(a, g)
    if not (val > 0 and math.isfinite(val)) or err > 1e-9 * val:
        raise QuadratureError(
            f"quadrature did not converge for a={a}, g={g}",
            laguerre=history, quad=(val, err),
        )
    return val, {"method": "quad_log", "abserr": err, "laguerre": history}


def rayleigh_mellin_closed_form(a: float, g: float) -> float:
    """``exp(1/g) g^-a Gamma_upper(1 - a, 1/g)`` in extended precision."""
    import mpmath

    with mpmath.workdps(30):
        g_ = mpmath.mpf(g)
        val = mpmath.e ** (1 / g_) * g_ ** (-mpmath.mpf(a)) * mpmath.gammainc(1 - mpmath.mpf(a), 1 / g_)
        return float(val)


@dataclass(frozen=True)
class RayleighChannel:
    avg_snr: float
    symbols_per_slot: float

    def __post_init__(self):
        if not self.avg_snr > 0:
            raise ValueError("avg_snr must be > 0 (linear scale)")
        if not self.symbols_per_slot > 0:
            raise ValueError("symbols_per_slot must be > 0")

    @classmethod
    def from_db(cls, snr_db: float, bandwidth_hz: float = 20e3, slot_s: float = 1e-3) -> "RayleighChannel":
        return cls(10.0 ** (snr_db / 10.0), bandwidth_hz * slot_s)

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.avg_snr)

    @property
    def s_max(self) -> float:
        return 100.0 / self.symbols_per_slot

    def exponent(self, s: float) -> float:
        """Power ``a`` such that ``exp(-s c) = (1 + g Y)^-a``."""
        return s * self.symbols_per_slot / LN2

    def ln_V(self, s: float) -> float:
        return _ln_V_cached(self, float(s))

    def mean_capacity(self) -> float:
        """``E[c] = m E[log2(1 + g Y)] = m exp(1/g) E1(1/g) / ln 2``."""
        g = self.avg_snr
        # exp(x) E1(x) evaluated without overflow for tiny x.
        return self.symbols_per_slot * float(special.exp1(1.0 / g) * math.exp(1.0 / g)) / LN2

    def capacity_from_gain(self, y):
        return self.symbols_per_slot * np.log2(1.0 + self.avg_snr * np.asarray(y, dtype=float))

    def sample(self, rng: np.random.Generator, size=None):
        return self.capacity_from_gain(rng.standard_exponential(size))

    def with_snr_db(self, snr_db: float) -> "RayleighChannel":
        return RayleighChannel(10.0 ** (snr_db / 10.0), self.symbols_per_slot)


@dataclass(frozen=True)
class ConstantChannel:
    """Deterministic service of ``rate`` bits per slot."""

    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be >= 0")

    @property
    def s_max(self) -> float:
        return 10.0

    def ln_V(self, s: float) -> float:
        if s <= 0:
            raise ValueError(f"s must be > 0, got {s}")
        return -s * self.rate

    def mean_capacity(self) -> float:
        return self.rate

    def capacity_from_gain(self, y):
        return np.full(np.shape(y), self.rate, dtype=float)

    def sample(self, rng: np.random.Generator, size=None):
        if size is None:
            return self.rate
        return np.full(size, self.rate, dtype=float)


ChannelModel = Union[RayleighChannel, ConstantChannel]


@lru_cache(maxsize=1 << 16)
def _ln_V_cached(ch: RayleighChannel, s: float) -> float:
    if not s > 0:
        raise ValueError(f"s must be > 0, got {s}")
    val, _ = rayleigh_mellin(ch.exponent(s), ch.avg_snr)
    return math.log(val)


def ln_V(ch: ChannelModel, s: float) -> float:
    return ch.ln_V(s)


def sample_capacity(ch: ChannelModel, rng: np.random.Generator) -> float:
    return float(ch.sample(rng))
