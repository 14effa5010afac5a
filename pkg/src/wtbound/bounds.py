"""Delay and backlog violation bounds for an N-hop tandem of fading links.

Every kernel returns the natural log of the bound expression at a fixed
Mellin parameter ``s`` and is assembled as a log-sum-exp over per-term logs,
so binomials and ``exp(s * bits)`` factors never overflow.  ``bound`` then
minimizes over ``s``.

Families:

``stationary``   steady-state bound for (sigma, rho) arrivals, initial backlog
                 treated as burst cross-traffic of size ``max(x)``.
``sotat``        transient kernel built from the stationary dynamic-server
                 machinery; valid for ``s < 1``.
``wtb``          wireless transient bound using exact arrivals and the
                 per-node backlog vector.
``wtb_delayed``  ``wtb`` when the backlog vector is ``d`` slots old; the
                 system is restarted at ``-d`` with overhead traffic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy.special import gammaln, logsumexp

from .arrivals import ArrivalProcess, CompositeArrival, Envelope
from .channel import ChannelModel
from .optimize import Minimum, OptimizationError, OptimizerConfig, minimize_convex

__all__ = [
    "FAMILIES",
    "Scenario",
    "BoundResult",
    "kernel_wtb",
    "kernel_wtb_single",
    "kernel_wtb_sigma_rho",
    "kernel_sotat",
    "kernel_sotat_sigma_rho",
    "kernel_stationary",
    "kernel_wtb_delayed",
    "kernel_backlog",
    "bound_stationary",
    "bound_backlog",
    "bound",
    "kernel_for",
]

FAMILIES = ("stationary", "sotat", "wtb", "wtb_delayed")

# SOTAT's service Mellin bound only holds for s < 1.
SOTAT_S_LIMIT = 1.0 - 1e-9


@dataclass(frozen=True)
class Scenario:
    """Everything the bounds need about one message and one route.

    ``backlog[n]`` is the queue at hop ``n + 1`` when the backlog was last
    observed: at the message start, or ``d`` slots earlier when ``arrivals``
    is a :class:`CompositeArrival`.
    """

    channel: ChannelModel
    backlog: tuple[float, ...]
    arrivals: Union[ArrivalProcess, CompositeArrival]
    eval_time: int
    target_delay: int = 0

    def __post_init__(self):
        b = tuple(float(x) for x in self.backlog)
        if not b:
            raise ValueError("need at least one hop")
        if any(x < 0 or not math.isfinite(x) for x in b):
            raise ValueError("backlog entries must be finite and >= 0")
        object.__setattr__(self, "backlog", b)
        if self.eval_time < 0 or self.target_delay < 0:
            raise ValueError("eval_time and target_delay must be >= 0")

    @property
    def hops(self) -> int:
        return len(self.backlog)

    @property
    def tau(self) -> int:
        return self.eval_time + self.target_delay

    @property
    def x_max(self) -> float:
        return max(self.backlog)

    @property
    def info_delay(self) -> int:
        return self.arrivals.d if isinstance(self.arrivals, CompositeArrival) else 0

    @property
    def message(self) -> ArrivalProcess:
        a = self.arrivals
        return a.message if isinstance(a, CompositeArrival) else a

    @property
    def envelope(self) -> Optional[Envelope]:
        return self.message.envelope

    def shifted(self) -> "Scenario":
        """Equivalent scenario whose clock starts when the backlog was observed."""
        d = self.info_delay
        if d == 0 and isinstance(self.arrivals, ArrivalProcess):
            return self
        return replace(self, arrivals=self.arrivals.flatten(), eval_time=self.eval_time + d)


@dataclass(frozen=True)
class BoundResult:
    probability: float
    s_opt: float
    raw_log_value: float
    evaluations: int
    family: str = ""
    diagnostics: dict = field(default_factory=dict, compare=False)


def _ln_binom(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def _require_s(s):
    if not s > 0:
        raise ValueError(f"s must be > 0, got {s}")


def _cum_table(proc: ArrivalProcess, upto: int) -> np.ndarray:
    return np.array([proc.cumulative_from_start(u) for u in range(upto + 1)])


def _ln_phi(lnv, s, cum, backlog, t, tau):
    """ln of the N-hop transient bound with ``A(u) = cum[u]``."""
    if tau < 1:
        raise ValueError("tau = t + w must be >= 1")
    N = len(backlog)
    a_t = cum[t]
    parts = []
    if t >= 2:
        u = np.arange(1, t)
        parts.append(_ln_binom(N + tau - 2, tau - 1) + s * (a_t - cum[1:t]) + (tau - u) * lnv)
    prefix = np.cumsum(backlog)
    i = np.arange(N)
    parts.append(_ln_binom(i + tau - 1, tau - 1) + s * (a_t + prefix[N - 1 - i]) + tau * lnv)
    return float(logsumexp(np.concatenate(parts)))


def _plain(sc: Scenario, what: str) -> ArrivalProcess:
    if sc.info_delay != 0:
        raise ValueError(f"{what} needs current backlog information (d = 0); use wtb_delayed")
    return sc.message


def kernel_wtb(sc: Scenario, s: float) -> float:
    _require_s(s)
    proc = _plain(sc, "kernel_wtb")
    t = sc.eval_time
    lnv = sc.channel.ln_V(s)
    return _ln_phi(lnv, s, _cum_table(proc, t), np.asarray(sc.backlog), t, sc.tau)


def kernel_wtb_single(sc: Scenario, s: float) -> float:
    """Single-hop transient bound, written out term by term."""
    _require_s(s)
    if sc.hops != 1:
        raise ValueError("kernel_wtb_single is for a single hop")
    proc = _plain(sc, "kernel_wtb_single")
    t, tau = sc.eval_time, sc.tau
    lnv = sc.channel.ln_V(s)
    a_t = proc.cumulative(0, t)
    terms = [s * a_t + s * sc.backlog[0] + tau * lnv]
    for u in range(1, t):
        terms.append(s * proc.cumulative(u, t) + (tau - u) * lnv)
    return float(logsumexp(terms))


def _ln_geometric(lnv0, k_lo, k_hi):
    """ln sum_{k=k_lo}^{k_hi} exp(-k * lnv0); -inf for an empty range."""
    n = k_hi - k_lo + 1
    if n <= 0:
        return -math.inf
    L = -lnv0  # ratio exp(L)
    if abs(L) < 1e-14:
        return k_lo * L + math.log(n)
    if L < 0:
        # sum = e^{k_lo L} (1 - e^{nL}) / (1 - e^{L})
        return k_lo * L + math.log(-math.expm1(n * L)) - math.log(-math.expm1(L))
    # largest term first: e^{k_hi L} (1 - e^{-nL}) / (1 - e^{-L})
    return k_hi * L + math.log(-math.expm1(-n * L)) - math.log(-math.expm1(-L))


def _require_envelope(sc: Scenario) -> Envelope:
    env = sc.envelope
    if env is None:
        raise ValueError("this bound needs arrivals with a declared (sigma, rho) envelope")
    return env


def kernel_wtb_sigma_rho(sc: Scenario, s: float) -> float:
    """Transient bound with arrivals replaced by their (sigma, rho) envelope.

    ``A(t)`` becomes ``sigma + rho t`` and each ratio ``A(t)/A(u)`` becomes
    ``sigma + rho (t - u)``, so the arrival sum collapses to a geometric
    series in ``V0 = exp(s rho) V(s)`` over ``u = 1 .. t-1``.
    """
    _require_s(s)
    env = _require_envelope(sc)
    _plain(sc, "kernel_wtb_sigma_rho")
    N, t, tau = sc.hops, sc.eval_time, sc.tau
    if tau < 1:
        raise ValueError("tau = t + w must be >= 1")
    lnv = sc.channel.ln_V(s)
    lnv0 = s * env.rho + lnv
    env_t = s * (env.sigma + env.rho * t)
    prefix = np.cumsum(sc.backlog)
    terms = [_ln_binom(i + tau - 1, tau - 1) + env_t + s * prefix[N - 1 - i] for i in range(N)]
    geo = _ln_geometric(lnv0, 1, t - 1)
    if geo > -math.inf:
        terms.append(_ln_binom(N + tau - 2, tau - 1) + env_t + geo)
    return tau * lnv + float(logsumexp(terms))


def kernel_sotat(sc: Scenario, s: float) -> float:
    _require_s(s)
    if s >= 1.0:
        raise ValueError(f"SOTAT kernel requires s < 1, got {s}")
    proc = _plain(sc, "kernel_sotat")
    N, t, tau = sc.hops, sc.eval_time, sc.tau
    lnv = sc.channel.ln_V(s)
    cum = _cum_table(proc, t)
    u = np.arange(0, t + 1)
    k = tau - u
    terms = s * (cum[t] - cum[u]) + _ln_binom(N - 1 + k, k) + k * lnv
    return s * N * sc.x_max + float(logsumexp(terms))


def kernel_sotat_sigma_rho(sc: Scenario, s: float) -> float:
    """Single-hop SOTAT closed form for (sigma, rho) arrivals.

    ``exp(s (x1 - rho w)) V0^w [exp(s sigma) (V0 - V0^{t+1}) / (1 - V0) + 1]``
    """
    _require_s(s)
    env = _require_envelope(sc)
    if sc.hops != 1:
        raise ValueError("closed form is for a single hop")
    t, w = sc.eval_time, sc.target_delay
    lnv0 = s * env.rho + sc.channel.ln_V(s)
    # (V0 - V0^{t+1}) / (1 - V0) = sum_{k=1}^{t} V0^k
    geo = _ln_geometric(-lnv0, 1, t)
    inner = np.logaddexp(s * env.sigma + geo, 0.0) if geo > -math.inf else 0.0
    return s * (sc.backlog[0] - env.rho * w) + w * lnv0 + float(inner)


def kernel_stationary(sc: Scenario, s: float) -> float:
    """Steady-state bound; ``+inf`` where ``V0(s) >= 1`` (no stability)."""
    _require_s(s)
    env = _require_envelope(sc)
    N, w = sc.hops, sc.target_delay
    lnv0 = s * env.rho + sc.channel.ln_V(s)
    if lnv0 >= 0:
        return math.inf
    head = s * (-env.rho * w + env.sigma + N * sc.x_max) - N * math.log(-math.expm1(lnv0))
    return head + min(0.0, w * lnv0 + (N - 1) * math.log(w + 1))


def kernel_wtb_delayed(sc: Scenario, s: float) -> float:
    """Transient bound from a backlog vector observed ``d`` slots early.

    Time restarts at ``-d``: arrivals become overhead followed by the message,
    and both ``t`` and ``tau`` move ``d`` slots later.
    """
    _require_s(s)
    d = sc.info_delay
    proc = sc.arrivals.flat if isinstance(sc.arrivals, CompositeArrival) else sc.arrivals
    t, tau = sc.eval_time + d, sc.tau + d
    lnv = sc.channel.ln_V(s)
    return _ln_phi(lnv, s, _cum_table(proc, t), np.asarray(sc.backlog), t, tau)


def kernel_backlog(sc: Scenario, s: float, threshold_x: float) -> float:
    """ln of ``exp(-s x) Phi(s)`` for ``P(B(t + w) > x)``.

    Backlog is measured at ``m = t + w``.  Arrivals after the message ends do
    not change ``A``, so the arrival index is ``min(m, T)`` and the service
    runs until ``m``.
    """
    _require_s(s)
    sh = sc.shifted()
    proc = sh.arrivals
    m = sh.tau
    t_a = min(m, proc.horizon)
    lnv = sc.channel.ln_V(s)
    return -s * threshold_x + _ln_phi(lnv, s, _cum_table(proc, t_a), np.asarray(sc.backlog), t_a, m)


_KERNELS = {
    "stationary": kernel_stationary,
    "sotat": kernel_sotat,
    "wtb": kernel_wtb,
    "wtb_delayed": kernel_wtb_delayed,
}


def kernel_for(family: str):
    try:
        return _KERNELS[family]
    except KeyError:
        raise ValueError(f"unknown bound family {family!r}; choose from {FAMILIES}") from None


def _default_config(sc: Scenario, family: str, cfg: Optional[OptimizerConfig]) -> OptimizerConfig:
    cfg = cfg or OptimizerConfig()
    s_max = sc.channel.s_max
    if family == "sotat":
        hi = min(cfg.s_hi or SOTAT_S_LIMIT, SOTAT_S_LIMIT)
        return replace(cfg, s_hi=hi, s_cap=hi)
    if family == "stationary":
        hi = cfg.s_hi or s_max
        return replace(cfg, s_hi=hi, s_cap=cfg.s_cap or hi)
    hi = cfg.s_hi or s_max
    return replace(cfg, s_hi=hi, s_cap=cfg.s_cap or hi * 1e3)


def _result(m: Minimum, family: str, **diag) -> BoundResult:
    if m.boundary:
        diag["boundary"] = m.boundary
    prob = 1.0 if m.value >= 0 else math.exp(m.value)
    return BoundResult(prob, m.s, m.value, m.evaluations, family, diag)


def _safe(kernel, sc, *args):
    def f(s):
        try:
            return kernel(sc, s, *args)
        except ArithmeticError:
            return math.inf
    return f


def bound_stationary(sc: Scenario, cfg: Optional[OptimizerConfig] = None) -> BoundResult:
    _require_envelope(sc)
    cfg = _default_config(sc, "stationary", cfg)
    try:
        m = minimize_convex(_safe(kernel_stationary, sc), cfg)
    except OptimizationError:
        return BoundResult(1.0, float("nan"), math.inf, cfg.coarse_grid, "stationary",
                           {"reason": "no stable s: V0(s) >= 1 on the whole range"})
    return _result(m, "stationary")


def bound_backlog(sc: Scenario, threshold_x: float, cfg: Optional[OptimizerConfig] = None) -> BoundResult:
    if threshold_x < 0:
        raise ValueError("threshold_x must be >= 0")
    cfg = _default_config(sc, "wtb", cfg)
    m = minimize_convex(_safe(kernel_backlog, sc, threshold_x), cfg)
    return _result(m, "backlog", threshold_x=threshold_x)


def bound(sc: Scenario, family: str, cfg: Optional[OptimizerConfig] = None) -> BoundResult:
    """Minimize the chosen family's kernel over ``s``; probability clipped to 1."""
    kernel = kernel_for(family)
    if family == "stationary":
        return bound_stationary(sc, cfg)
    if family in ("wtb", "sotat"):
        _plain(sc, family)
    cfg = _default_config(sc, family, cfg)
    m = minimize_convex(_safe(kernel, sc), cfg)
    return _result(m, family)
