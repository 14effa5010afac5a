"""Deterministic finite-horizon arrival sequences.

All amounts are in bits.  Slot ``i`` carries ``increments[i]`` and the
cumulative process over ``[u, t)`` is ``sum(increments[u:t])``; slots outside
the horizon contribute nothing.

The bound kernels work in the exponential ("SNR") domain where a quantity of
``b`` bits becomes ``exp(b)``.  Log-domain values are therefore plain bit
counts, and a Mellin transform of order ``1 + s`` of a deterministic arrival
ratio is ``exp(s * bits)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Envelope",
    "ArrivalProcess",
    "CompositeArrival",
    "burst",
    "train",
    "cumulative",
    "log_snr_ratio",
    "composite_cumulative",
    "custom",
]

# Absolute slack for the envelope check; increments are float bit counts.
_ENVELOPE_SLACK = 1e-9


@dataclass(frozen=True)
class Envelope:
    """(sigma, rho) traffic envelope: ``A(t) - A(u) <= rho (t - u) + sigma``."""

    sigma: float
    rho: float

    def __post_init__(self):
        if self.sigma < 0 or self.rho < 0:
            raise ValueError(f"envelope parameters must be >= 0, got {self}")

    def bits(self, length: int) -> float:
        return self.sigma + self.rho * length


@dataclass(frozen=True)
class ArrivalProcess:
    increments: tuple[float, ...]
    envelope: Optional[Envelope] = None
    _cum: np.ndarray = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        inc = tuple(float(a) for a in self.increments)
        if any(a < 0 or not np.isfinite(a) for a in inc):
            raise ValueError("arrival increments must be finite and >= 0")
        object.__setattr__(self, "increments", inc)
        cum = np.concatenate(([0.0], np.cumsum(inc, dtype=float)))
        cum.flags.writeable = False
        object.__setattr__(self, "_cum", cum)
        if self.envelope is not None:
            self._check_envelope(self.envelope)

    def _check_envelope(self, env: Envelope) -> None:
        # Only windows starting and ending inside [0, T] can be tight.
        cum = self._cum
        T = len(self.increments)
        lengths = np.arange(T + 1)[None, :] - np.arange(T + 1)[:, None]
        excess = (cum[None, :] - cum[:, None]) - (env.rho * lengths + env.sigma)
        mask = lengths >= 0
        if T and np.max(excess[mask]) > _ENVELOPE_SLACK:
            raise ValueError(f"arrivals violate declared envelope {env}")

    @property
    def horizon(self) -> int:
        """Number of slots T carrying (possibly zero) arrivals."""
        return len(self.increments)

    @property
    def total(self) -> float:
        return float(self._cum[-1])

    def cumulative(self, u: int, t: int) -> float:
        if u > t:
            raise ValueError(f"cumulative requires u <= t, got u={u}, t={t}")
        if u < 0:
            raise ValueError(f"slot index must be >= 0, got u={u}")
        T = self.horizon
        return float(self._cum[min(t, T)] - self._cum[min(u, T)])

    def cumulative_from_start(self, t: int) -> float:
        return float(self._cum[min(max(t, 0), self.horizon)])

    def padded(self, length: int) -> np.ndarray:
        """Increments as a float array of exactly ``length`` slots."""
        out = np.zeros(length)
        k = min(length, self.horizon)
        out[:k] = self.increments[:k]
        return out


def burst(size: float, envelope: Optional[Envelope] = None) -> ArrivalProcess:
    """Single-slot message of ``size`` bits (T = 1)."""
    return ArrivalProcess((size,), envelope if envelope is not None else Envelope(size, 0.0))


def train(rate: float, slots: int, envelope: Optional[Envelope] = None) -> ArrivalProcess:
    """``slots`` consecutive slots carrying ``rate`` bits each."""
    if slots < 1:
        raise ValueError("a packet train needs at least one slot")
    return ArrivalProcess((rate,) * slots, envelope if envelope is not None else Envelope(0.0, rate))


def cumulative(proc: ArrivalProcess, u: int, t: int) -> float:
    return proc.cumulative(u, t)


def log_snr_ratio(proc: ArrivalProcess, u: int, t: int) -> float:
    """Log of the SNR-domain ratio ``A(t) / A(u)``.

    With the bit-valued exponent convention this equals the bit count over
    ``[u, t)``, so ``(A(t)/A(u))**s == exp(s * log_snr_ratio(...))``.
    """
    return proc.cumulative(u, t)


@dataclass(frozen=True)
class CompositeArrival:
    """Overhead traffic on ``[-d, 0)`` followed by the message on ``[0, T)``.

    Used when the backlog vector is only known as of ``d`` slots before the
    message starts.  The cumulative value stops growing once the message ends.
    """

    overhead: ArrivalProcess
    message: ArrivalProcess
    d: int

    def __post_init__(self):
        if self.d < 0:
            raise ValueError("information delay d must be >= 0")
        if self.overhead.horizon > self.d:
            raise ValueError(
                f"overhead covers {self.overhead.horizon} slots but d={self.d}"
            )

    @classmethod
    def constant_overhead(cls, message: ArrivalProcess, d: int, rate: float) -> "CompositeArrival":
        return cls(ArrivalProcess((rate,) * d), message, d)

    @cached_property
    def flat(self) -> ArrivalProcess:
        return self.flatten()

    def flatten(self) -> ArrivalProcess:
        """Equivalent plain process in the frame that starts at ``-d``."""
        over = self.overhead.padded(self.d)
        inc = tuple(over) + self.message.increments
        env = None
        if self.d == 0:
            env = self.message.envelope
        return ArrivalProcess(inc, env)

    def cumulative(self, u: int, t: int) -> float:
        if u < -self.d:
            raise ValueError(f"u={u} precedes the system start -d={-self.d}")
        if u > t:
            raise ValueError(f"cumulative requires u <= t, got u={u}, t={t}")
        return self.flat.cumulative(u + self.d, t + self.d)


def composite_cumulative(c: CompositeArrival, u: int, t: int) -> float:
    return c.cumulative(u, t)


def custom(increments: Sequence[float], sigma: Optional[float] = None,
           rho: Optional[float] = None) -> ArrivalProcess:
    env = None
    if sigma is not None or rho is not None:
        env = Envelope(sigma or 0.0, rho or 0.0)
    return ArrivalProcess(tuple(increments), env)
