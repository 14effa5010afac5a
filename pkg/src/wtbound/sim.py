"""Slot-level Monte Carlo of the N-hop fluid tandem with initial backlog.

Each slot every hop draws an i.i.d. capacity and forwards
``min(queue, capacity)`` bits.  Two hand-off conventions are available:

``cut_through`` (default)
    bits leaving hop n in slot i can be served by hop n+1 in the same slot;
    this is the recursion ``A_{n+1}(t) = D_n(t) + x_{n+1}`` the bounds are
    derived for.
``store_and_forward``
    bits leaving hop n in slot i reach hop n+1 at slot i+1.

Trials are grouped in fixed-size blocks.  Block ``k`` draws from its own
stream ``SeedSequence(seed, spawn_key=(k,))``, so results do not depend on
the number of worker threads.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from . import _core
from .bounds import Scenario

__all__ = [
    "TIMINGS",
    "HORIZON_EXCEEDED",
    "SimConfig",
    "SimEstimate",
    "TrialRecord",
    "wilson_interval",
    "block_rng",
    "run_trial",
    "virtual_delay",
    "estimate_violation",
    "estimate_backlog_violation",
]

TIMINGS = ("cut_through", "store_and_forward")
HORIZON_EXCEEDED = math.inf
_Z95 = NormalDist().inv_cdf(0.975)


def _done(dep, target):
    # Fluid sums are exact up to rounding of the partial transfers.
    return dep >= target - 1e-9 * max(1.0, target)


@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario
    trials: int
    seed: int = 0
    t_eval: Optional[int] = None
    max_horizon: Optional[int] = None
    timing: str = "cut_through"
    delay_mode: str = "at_t"  # or "max": worst virtual delay over t in [1, t_eval]
    block_size: int = 8192
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.timing not in TIMINGS:
            raise ValueError(f"timing must be one of {TIMINGS}")
        if self.delay_mode not in ("at_t", "max"):
            raise ValueError("delay_mode must be 'at_t' or 'max'")
        if self.block_size < 1 or self.workers < 1:
            raise ValueError("block_size and workers must be >= 1")
        if self.max_horizon is not None and self.max_horizon < self.t:
            raise ValueError("max_horizon must be >= t_eval")

    @property
    def t(self) -> int:
        return self.scenario.eval_time if self.t_eval is None else self.t_eval

    def horizon_cap(self, w_max: int) -> int:
        if self.max_horizon is not None:
            return self.max_horizon
        return 64 * (w_max + self.scenario.message.horizon)


@dataclass(frozen=True)
class SimEstimate:
    grid: np.ndarray
    p_hat: np.ndarray
    trials: int
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    variable: str = "w"

    @property
    def ci_halfwidth(self) -> np.ndarray:
        return 0.5 * (self.ci_hi - self.ci_lo)

    @property
    def se(self) -> np.ndarray:
        """Binomial standard error of ``p_hat``."""
        return np.sqrt(self.p_hat * (1.0 - self.p_hat) / self.trials)


def wilson_interval(hits, n, z=_Z95):
    """Wilson score interval for ``hits`` successes out of ``n``."""
    hits = np.asarray(hits, dtype=float)
    p = hits / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return np.clip(centre - half, 0.0, 1.0), np.clip(centre + half, 0.0, 1.0)


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


# ---------------------------------------------------------------------------
# single trial, with per-class FIFO bookkeeping


@dataclass
class TrialRecord:
    """Per-slot trace of one trial.

    ``departures[i]`` is the end-to-end departure count by slot ``i``.
    ``through_out[i, n]`` / ``own_cross_out[i, n]`` count message bits and
    hop ``n``'s own initial backlog that have left hop ``n`` by slot ``i``.
    """

    departures: np.ndarray
    queues: np.ndarray
    through_out: np.ndarray
    own_cross_out: np.ndarray
    capacities: np.ndarray
    arrivals: np.ndarray
    backlog: np.ndarray
    timing: str = "cut_through"
    meta: dict = field(default_factory=dict)


def _serve(q: deque, cap: float):
    """Pop up to ``cap`` bits from the head of a FIFO of [origin, bits]."""
    sent = []
    left = cap
    while q and left > 0:
        origin, amt = q[0]
        take = amt if amt <= left else left
        if take >= amt:
            q.popleft()
        else:
            q[0][1] = amt - take
        left -= take
        sent.append((origin, take))
    return sent


def _push(q: deque, parts):
    for origin, amt in parts:
        if amt <= 0:
            continue
        if q and q[-1][0] == origin:
            q[-1][1] += amt
        else:
            q.append([origin, amt])


def run_trial(scenario: Scenario, rng: Optional[np.random.Generator] = None, horizon: Optional[int] = None,
              capacities: Optional[np.ndarray] = None, timing: str = "cut_through") -> TrialRecord:
    """Simulate one trial slot by slot with explicit FCFS class tracking.

    Delayed-information scenarios are simulated from the moment the backlog
    was observed (see :meth:`Scenario.shifted`).
    """
    if timing not in TIMINGS:
        raise ValueError(f"timing must be one of {TIMINGS}")
    sc = scenario.shifted()
    N = sc.hops
    if capacities is None:
        if horizon is None:
            horizon = sc.tau + 1
        if rng is None:
            raise ValueError("need an rng stream or explicit capacities")
        capacities = np.asarray(sc.channel.sample(rng, (horizon, N)), dtype=float)
    capacities = np.asarray(capacities, dtype=float).reshape(-1, N)
    H = capacities.shape[0]
    a = sc.arrivals.padded(H)
    x = np.asarray(sc.backlog)

    queues = [deque() for _ in range(N)]
    for n in range(N):
        _push(queues[n], [(n, x[n])])
    in_flight = [[] for _ in range(N)]
    dep = np.zeros(H + 1)
    qlen = np.zeros((H + 1, N))
    thr = np.zeros((H + 1, N))
    own = np.zeros((H + 1, N))
    qlen[0] = x
    for i in range(H):
        if timing == "store_and_forward":
            for n in range(1, N):
                _push(queues[n], in_flight[n])
                in_flight[n] = []
        _push(queues[0], [("through", a[i])])
        thr[i + 1], own[i + 1] = thr[i], own[i]
        out = 0.0
        for n in range(N):
            sent = _serve(queues[n], capacities[i, n])
            for origin, amt in sent:
                if origin == "through":
                    thr[i + 1, n] += amt
                elif origin == n:
                    own[i + 1, n] += amt
            if n + 1 < N:
                if timing == "store_and_forward":
                    in_flight[n + 1] = sent
                else:
                    _push(queues[n + 1], sent)
            else:
                out = sum(amt for _, amt in sent)
        dep[i + 1] = dep[i] + out
        qlen[i + 1] = [sum(amt for _, amt in q) for q in queues]
    return TrialRecord(dep, qlen, thr, own, capacities, a, x, timing,
                       {"shift": scenario.info_delay})


def virtual_delay(record: TrialRecord, scenario: Scenario, t: int) -> float:
    """Smallest ``w`` with ``A(t) + sum(x) <= D(t + w)``.

    ``t`` is in the scenario's own clock; returns ``HORIZON_EXCEEDED`` if the
    recorded trace ends first.
    """
    sc = scenario.shifted()
    t = t + scenario.info_delay
    if t < 0:
        raise ValueError("t must be >= 0")
    target = sc.arrivals.cumulative_from_start(t) + float(np.sum(sc.backlog))
    dep = record.departures
    for k in range(t, len(dep)):
        if _done(dep[k], target):
            return k - t
    return HORIZON_EXCEEDED


# ---------------------------------------------------------------------------
# vectorized estimation


def _block_sizes(trials, block_size):
    full, rest = divmod(trials, block_size)
    return [block_size] * full + ([rest] if rest else [])


def _simulate_blocks(cfg: SimConfig, H: int, reduce):
    """Run every block through the fast core and combine ``reduce`` outputs."""
    sc = cfg.scenario.shifted()
    N = sc.hops
    a = sc.arrivals.padded(H)
    x = np.asarray(sc.backlog, dtype=float)
    sf = cfg.timing == "store_and_forward"
    sizes = _block_sizes(cfg.trials, cfg.block_size)

    def one(k):
        rng = block_rng(cfg.seed, k)
        cap = np.ascontiguousarray(sc.channel.sample(rng, (sizes[k], H, N)), dtype=float)
        out = np.empty((sizes[k], H + 1))
        _core.propagate(cap, a, x, sf, out)
        return reduce(out)

    if cfg.workers == 1 or len(sizes) == 1:
        parts = [one(k) for k in range(len(sizes))]
    else:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    return np.sum(parts, axis=0)


def estimate_violation(cfg: SimConfig, w_grid: Sequence[int]) -> SimEstimate:
    """Empirical ``P(W(t_eval) > w)`` for each ``w`` in ``w_grid``."""
    w_grid = np.asarray(w_grid, dtype=int)
    if w_grid.size == 0 or np.any(w_grid < 0):
        raise ValueError("w_grid must be non-empty and non-negative")
    sc = cfg.scenario.shifted()
    d = cfg.scenario.info_delay
    t_end = cfg.t + d
    ts = np.arange(d + 1, t_end + 1) if cfg.delay_mode == "max" else np.array([t_end])
    if ts.size == 0:
        ts = np.array([t_end])
    w_max = int(w_grid.max())
    H = min(t_end + w_max, cfg.horizon_cap(w_max) + d)
    x_total = float(np.sum(sc.backlog))
    targets = np.array([sc.arrivals.cumulative_from_start(int(t)) for t in ts]) + x_total

    def reduce(dep):
        hits = np.zeros(w_grid.size)
        for j, w in enumerate(w_grid):
            late = np.zeros(dep.shape[0], dtype=bool)
            for t, target in zip(ts, targets):
                k = t + w
                if k > H:
                    late[:] = True  # beyond the horizon counts as a violation
                    break
                late |= ~_done(dep[:, k], target)
            hits[j] = np.count_nonzero(late)
        return hits

    hits = _simulate_blocks(cfg, max(H, 1), reduce)
    lo, hi = wilson_interval(hits, cfg.trials)
    return SimEstimate(w_grid, hits / cfg.trials, cfg.trials, lo, hi, "w")


def estimate_backlog_violation(cfg: SimConfig, x_grid: Sequence[float], at: Optional[int] = None) -> SimEstimate:
    """Empirical ``P(B(m) > x)`` with ``m = at`` (default ``t_eval + w``)."""
    x_grid = np.asarray(x_grid, dtype=float)
    sc = cfg.scenario.shifted()
    d = cfg.scenario.info_delay
    m = (cfg.t + cfg.scenario.target_delay if at is None else at) + d
    if m < 0:
        raise ValueError("measurement slot must be >= 0")
    x_total = float(np.sum(sc.backlog))
    offered = sc.arrivals.cumulative_from_start(m) + x_total

    def reduce(dep):
        backlog = offered - dep[:, m]
        return np.array([np.count_nonzero(backlog > x + 1e-9 * max(1.0, offered)) for x in x_grid])

    hits = _simulate_blocks(cfg, max(m, 1), reduce)
    lo, hi = wilson_interval(hits, cfg.trials)
    return SimEstimate(x_grid, hits / cfg.trials, cfg.trials, lo, hi, "x")
