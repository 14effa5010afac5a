"""One-dimensional minimization over the Mellin parameter and inverse solvers.

Every bound kernel is ``ln`` of a sum of log-convex terms, so the log value
is convex in ``s`` and a bracket scan followed by golden-section refinement
finds the global minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

__all__ = [
    "OptimizationError",
    "UnreachableTarget",
    "OptimizerConfig",
    "Minimum",
    "golden_section",
    "minimize_convex",
    "delay_for_epsilon",
    "snr_for_epsilon",
]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class OptimizationError(ArithmeticError):
    pass


class UnreachableTarget(ValueError):
    """The requested violation probability is not met before the search cap."""


@dataclass(frozen=True)
class OptimizerConfig:
    s_lo: float = 1e-6
    s_hi: Optional[float] = None
    rel_tol: float = 1e-8
    coarse_grid: int = 64
    # Upper limit for geometric expansion of s_hi when the scan keeps falling.
    s_cap: Optional[float] = None
    expand_factor: float = 4.0

    def __post_init__(self):
        if not self.s_lo > 0:
            raise ValueError("s_lo must be > 0")
        if self.s_hi is not None and not self.s_lo < self.s_hi:
            raise ValueError("need s_lo < s_hi")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.coarse_grid < 3:
            raise ValueError("coarse_grid needs at least 3 points")


class Minimum(NamedTuple):
    s: float
    value: float
    evaluations: int
    boundary: Optional[str]  # None, "lower" or "upper"


def _finite_or_inf(v):
    v = float(v)
    return v if math.isfinite(v) or v == -math.inf else math.inf


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float):
    """Golden-section search for the minimum of a unimodal ``f`` on [a, b].

    Returns ``(x, f(x), evaluations)``; stops once the bracket is narrower
    than ``tol``.
    """
    h = b - a
    c = a + (1 - INV_PHI) * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    n = 2
    while h > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + (1 - INV_PHI) * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = f(d)
        n += 1
    return (c, fc, n) if fc <= fd else (d, fd, n)


def minimize_convex(f: Callable[[float], float], cfg: OptimizerConfig = OptimizerConfig()) -> Minimum:
    """Minimize a convex log-value ``f`` over ``s`` in ``[cfg.s_lo, cfg.s_hi]``.

    Non-finite values are treated as ``+inf`` (outside the feasible region).
    If the coarse scan is still decreasing at ``s_hi`` the range is widened
    geometrically up to ``cfg.s_cap``; a minimum pinned to either end is
    reported through ``boundary``.
    """
    s_hi = cfg.s_hi if cfg.s_hi is not None else 10.0
    s_cap = max(cfg.s_cap if cfg.s_cap is not None else s_hi, s_hi)

    def g(u):
        return _finite_or_inf(f(math.exp(u)))

    us = list(np.linspace(math.log(cfg.s_lo), math.log(s_hi), cfg.coarse_grid))
    vals = [g(u) for u in us]
    evals = len(vals)
    step = us[1] - us[0]

    # Keep widening while the scan is still falling at its top end.
    while vals[-1] < vals[-2] and us[-1] < math.log(s_cap) - 1e-12:
        nxt = min(us[-1] + max(step, math.log(cfg.expand_factor)), math.log(s_cap))
        us.append(nxt)
        vals.append(g(nxt))
        evals += 1

    arr = np.asarray(vals)
    if np.all(np.isinf(arr) & (arr > 0)):
        raise OptimizationError("objective is infinite on the whole search range")
    i = int(np.argmin(arr))
    best_u, best_v = us[i], vals[i]
    if best_v == -math.inf:
        return Minimum(math.exp(best_u), best_v, evals, "upper" if i == len(us) - 1 else None)

    lo = us[max(i - 1, 0)]
    hi = us[min(i + 1, len(us) - 1)]
    boundary = None
    if i == 0:
        boundary = "lower"
    elif i == len(us) - 1:
        boundary = "upper"
    if hi > lo:
        u, v, n = golden_section(g, lo, hi, cfg.rel_tol)
        evals += n
        if v < best_v:
            best_u, best_v = u, v
    if boundary == "lower" and best_u > us[0] + 2 * cfg.rel_tol:
        boundary = None
    if boundary == "upper" and best_u < us[-1] - 2 * cfg.rel_tol:
        boundary = None
    return Minimum(math.exp(best_u), best_v, evals, boundary)


def delay_for_epsilon(sc, family: str, eps: float, w_cap: int = 10_000, cfg=None) -> int:
    """Smallest integer target delay ``w`` whose bound is at most ``eps``."""
    from .bounds import bound

    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")

    def ok(w):
        return bound(replace(sc, target_delay=w), family, cfg).probability <= eps

    if ok(0):
        return 0
    lo, hi = 0, 1
    while not ok(hi):
        lo = hi
        if hi >= w_cap:
            raise UnreachableTarget(f"deadline unbounded at cap w={w_cap} for eps={eps}")
        hi = min(2 * hi, w_cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def snr_for_epsilon(sc_template, family: str, eps: float, w: int,
                    snr_floor_db: float = -20.0, snr_cap_db: float = 60.0,
                    tol_db: float = 0.01, cfg=None) -> float:
    """Minimal linear mean SNR (same on every hop) meeting ``eps`` at delay ``w``.

    Bisection on the dB scale; the returned SNR meets the target and any SNR
    more than ``tol_db`` below it does not.  Returns the floor when even the
    floor meets ``eps``.
    """
    from .bounds import bound

    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    ch = sc_template.channel
    if not hasattr(ch, "with_snr_db"):
        raise TypeError("SNR inversion needs a fading channel model")

    def prob(db):
        sc = replace(sc_template, channel=ch.with_snr_db(db), target_delay=w)
        return bound(sc, family, cfg).probability

    if prob(snr_floor_db) <= eps:
        return 10.0 ** (snr_floor_db / 10.0)
    if prob(snr_cap_db) > eps:
        raise UnreachableTarget(f"eps={eps} not reached below the SNR cap of {snr_cap_db} dB")
    lo, hi = snr_floor_db, snr_cap_db
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if prob(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return 10.0 ** (hi / 10.0)
