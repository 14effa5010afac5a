"""Scenario files: TOML documents describing one route, one message and a sweep.

A file has five sections::

    [channel]   model = "rayleigh" | "constant", snr_db, bandwidth_khz, slot_ms, rate
    [network]   hops, backlog_bits (list, or one number repeated on every hop)
    [arrivals]  kind = "burst" | "train" | "custom", size, T, sigma, rho, increments
    [eval]      t, w, d, snr_db, x, overhead_rate, families, eps, w_cap,
                snr_floor_db, snr_cap_db, snr_tol_db, delay_mode
    [sim]       trials, seed, horizon, timing, workers, block_size

Sweep keys in ``[eval]`` (``w``, ``d``, ``snr_db``, ``x``) take a number, a
list, or an inclusive range table ``{start, stop, step}``.  The aliases
``w_grid``, ``d_grid``, ``snr_grid_db`` and ``x_grid`` are accepted.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .arrivals import ArrivalProcess, CompositeArrival, Envelope, burst, custom, train
from .bounds import FAMILIES, Scenario
from .channel import ConstantChannel, RayleighChannel
from .sim import TIMINGS, SimConfig

__all__ = [
    "ConfigError",
    "ScenarioFile",
    "SweepPoint",
    "load",
    "loads",
    "apply_override",
    "RECIPE_DIR",
    "recipe_path",
    "list_recipes",
]

RECIPE_DIR = Path(__file__).with_name("recipes")

_SCHEMA: dict[str, set[str]] = {
    "channel": {"model", "snr_db", "bandwidth_khz", "slot_ms", "rate"},
    "network": {"hops", "backlog_bits"},
    "arrivals": {"kind", "size", "T", "sigma", "rho", "increments"},
    "eval": {"t", "w", "w_grid", "d", "d_grid", "snr_db", "snr_grid_db", "x", "x_grid",
             "overhead_rate", "families", "eps", "w_cap", "snr_floor_db", "snr_cap_db",
             "snr_tol_db", "delay_mode"},
    "sim": {"trials", "seed", "horizon", "timing", "workers", "block_size"},
}
_REQUIRED = ("channel", "network", "arrivals")
_ALIASES = {"w_grid": "w", "d_grid": "d", "snr_grid_db": "snr_db", "x_grid": "x"}
# Sweep axes in the order they appear as CSV columns.
AXES = ("snr_db", "d", "w", "x")


class ConfigError(ValueError):
    """Invalid scenario file; the message names the section and, if known, the line."""


def _line_of(text: str, section: Optional[str], key: Optional[str]) -> Optional[int]:
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return n
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*=", s):
            return n
    return None


def _fail(text: str, section: str, key: Optional[str], msg: str):
    line = _line_of(text, section, key) if text else None
    where = f"[{section}]" + (f" {key}" if key else "")
    if line is not None:
        where = f"line {line}: {where}"
    raise ConfigError(f"{where}: {msg}")


def _expand(value, text, section, key) -> list:
    """Number, list or ``{start, stop, step}`` range table -> list of values."""
    if isinstance(value, dict):
        extra = set(value) - {"start", "stop", "step"}
        if extra or "start" not in value or "stop" not in value:
            _fail(text, section, key, "range tables need start and stop (and optional step)")
        start, stop, step = value["start"], value["stop"], value.get("step", 1)
        if step <= 0:
            _fail(text, section, key, "range step must be > 0")
        n = int(round((stop - start) / step))
        vals = [start + k * step for k in range(n + 1) if start + k * step <= stop + 1e-9 * abs(step)]
        if all(isinstance(v, int) for v in (start, stop, step)):
            vals = [int(v) for v in vals]
        return vals
    if isinstance(value, list):
        if not value:
            _fail(text, section, key, "empty list")
        return list(value)
    return [value]


@dataclass(frozen=True)
class SweepPoint:
    snr_db: Optional[float]
    d: int
    w: int
    x: Optional[float]

    def key(self, axes) -> tuple:
        return tuple(getattr(self, a) for a in axes)


@dataclass
class ScenarioFile:
    """Parsed and validated scenario document."""

    data: dict
    source: str = "<string>"
    text: str = field(default="", repr=False)

    def __post_init__(self):
        self._validate()

    # -- validation -------------------------------------------------------
    def _validate(self):
        d, text = self.data, self.text
        for sec in d:
            if sec not in _SCHEMA:
                _fail(text, sec, None, f"unknown section; expected one of {sorted(_SCHEMA)}")
            if not isinstance(d[sec], dict):
                raise ConfigError(f"[{sec}] must be a table")
            for k in d[sec]:
                if k not in _SCHEMA[sec]:
                    _fail(text, sec, k, f"unknown key; allowed: {sorted(_SCHEMA[sec])}")
        for sec in _REQUIRED:
            if sec not in d:
                raise ConfigError(f"missing [{sec}] section")
        ev = d.get("eval", {})
        for alias, canon in _ALIASES.items():
            if alias in ev and canon in ev:
                _fail(text, "eval", alias, f"give either {alias} or {canon}, not both")
        # Build everything once so errors surface at load time.
        self.channel(self.axis("snr_db")[0])
        self.backlog()
        self.message()
        for fam in self.families():
            if fam not in FAMILIES:
                _fail(text, "eval", "families", f"unknown family {fam!r}; choose from {FAMILIES}")
        for w in self.axis("w"):
            if not isinstance(w, int) or w < 0:
                _fail(text, "eval", "w", "delay targets must be integers >= 0")
        for dd in self.axis("d"):
            if not isinstance(dd, int) or dd < 0:
                _fail(text, "eval", "d", "information delays must be integers >= 0")
        if self.t < 0:
            _fail(text, "eval", "t", "t must be >= 0")
        if "sim" in d:
            self.sim_config(self.scenario(self.points()[0]))

    def _get(self, sec, key, default=None):
        return self.data.get(sec, {}).get(key, default)

    def _num(self, sec, key, default=None, positive=False):
        v = self._get(sec, key, default)
        if v is None:
            _fail(self.text, sec, key, "required")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            _fail(self.text, sec, key, f"expected a number, got {v!r}")
        if positive and not v > 0:
            _fail(self.text, sec, key, "must be > 0")
        return v

    # -- model objects ----------------------------------------------------
    def channel(self, snr_db: Optional[float] = None):
        model = self._get("channel", "model", "rayleigh")
        if model == "rayleigh":
            snr = self._num("channel", "snr_db") if snr_db is None else snr_db
            bw = self._num("channel", "bandwidth_khz", 20.0, positive=True)
            slot = self._num("channel", "slot_ms", 1.0, positive=True)
            return RayleighChannel.from_db(float(snr), bw * 1e3, slot * 1e-3)
        if model == "constant":
            rate = self._num("channel", "rate")
            if rate < 0:
                _fail(self.text, "channel", "rate", "must be >= 0")
            return ConstantChannel(float(rate))
        _fail(self.text, "channel", "model", f"unknown model {model!r}; use 'rayleigh' or 'constant'")

    def backlog(self) -> tuple:
        raw = self._get("network", "backlog_bits", 0.0)
        hops = self._get("network", "hops")
        if isinstance(raw, list):
            if hops is not None and hops != len(raw):
                _fail(self.text, "network", "backlog_bits", f"has {len(raw)} entries but hops = {hops}")
            vals = raw
        else:
            if hops is None:
                _fail(self.text, "network", "hops", "required when backlog_bits is a single number")
            vals = [raw] * int(hops)
        if not vals:
            _fail(self.text, "network", "backlog_bits", "need at least one hop")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0 for v in vals):
            _fail(self.text, "network", "backlog_bits", "entries must be numbers >= 0")
        return tuple(float(v) for v in vals)

    def message(self) -> ArrivalProcess:
        kind = self._get("arrivals", "kind")
        sigma = self._get("arrivals", "sigma")
        rho = self._get("arrivals", "rho")
        try:
            if kind == "burst":
                size = self._num("arrivals", "size", sigma)
                env = Envelope(sigma if sigma is not None else size, rho or 0.0)
                return burst(size, env)
            if kind == "train":
                T = self._get("arrivals", "T")
                if not isinstance(T, int) or T < 1:
                    _fail(self.text, "arrivals", "T", "train length must be an integer >= 1")
                rate = self._num("arrivals", "rho")
                return train(rate, T, Envelope(sigma or 0.0, rate))
            if kind == "custom":
                inc = self._get("arrivals", "increments")
                if not isinstance(inc, list) or not inc:
                    _fail(self.text, "arrivals", "increments", "custom arrivals need a non-empty list")
                return custom(inc, sigma, rho)
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            _fail(self.text, "arrivals", None, str(e))
        _fail(self.text, "arrivals", "kind", f"unknown kind {kind!r}; use burst, train or custom")

    @property
    def t(self) -> int:
        t = self._get("eval", "t")
        return self.message().horizon if t is None else t

    def axis(self, name: str) -> list:
        ev = self.data.get("eval", {})
        alias = next(a for a, c in _ALIASES.items() if c == name)
        key = alias if alias in ev else name
        if key in ev:
            return _expand(ev[key], self.text, "eval", key)
        if name == "snr_db":
            return [self._get("channel", "snr_db")]
        if name in ("w", "d"):
            return [0]
        return [None]

    def swept_axes(self) -> tuple:
        ev = self.data.get("eval", {})
        out = []
        for a in AXES:
            alias = next(k for k, c in _ALIASES.items() if c == a)
            v = ev.get(a, ev.get(alias))
            if isinstance(v, (list, dict)) or a == "w" or (a == "x" and v is not None):
                out.append(a)
        return tuple(out)

    def points(self) -> list[SweepPoint]:
        grids = [self.axis(a) for a in AXES]
        return [SweepPoint(*p) for p in itertools.product(*grids)]

    def families(self) -> list[str]:
        fams = self._get("eval", "families")
        if fams is None:
            if any(d > 0 for d in self.axis("d")):
                return ["wtb_delayed"]
            return ["stationary", "sotat", "wtb"]
        if isinstance(fams, str):
            fams = list(FAMILIES) if fams == "all" else [fams]
        return list(fams)

    @property
    def overhead_rate(self) -> float:
        default = self.message().envelope.rho if self.message().envelope else 0.0
        return float(self._num("eval", "overhead_rate", default))

    def scenario(self, p: SweepPoint) -> Scenario:
        msg = self.message()
        arr = msg if p.d == 0 else CompositeArrival.constant_overhead(msg, p.d, self.overhead_rate)
        return Scenario(self.channel(p.snr_db), self.backlog(), arr, self.t, p.w)

    def sim_config(self, sc: Scenario, **over) -> SimConfig:
        g = lambda k, dflt=None: over.get(k) if over.get(k) is not None else self._get("sim", k, dflt)
        trials = g("trials", 10_000)
        if not isinstance(trials, int) or trials < 1:
            raise ConfigError(f"[sim] trials: must be an integer >= 1, got {trials!r}")
        timing = g("timing", "cut_through")
        if timing not in TIMINGS:
            _fail(self.text, "sim", "timing", f"must be one of {TIMINGS}")
        mode = over.get("delay_mode") or self._get("eval", "delay_mode", "at_t")
        try:
            return SimConfig(sc, trials, seed=int(g("seed", 0)), t_eval=over.get("t_eval"),
                             max_horizon=g("horizon"), timing=timing, delay_mode=mode,
                             block_size=int(g("block_size", 8192)), workers=int(g("workers", 1)))
        except ValueError as e:
            raise ConfigError(f"[sim] {e}") from None

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _parse_value(raw: str):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_override(data: dict, spec: str) -> dict:
    """Apply ``section.key=value`` or ``key=value`` (key unique across sections)."""
    if "=" not in spec:
        raise ConfigError(f"override {spec!r} is not of the form key=value")
    path, raw = spec.split("=", 1)
    path = path.strip()
    value = _parse_value(raw.strip())
    if "." in path:
        sec, key = path.split(".", 1)
        if sec not in _SCHEMA or key not in _SCHEMA[sec]:
            raise ConfigError(f"override {path!r} does not name a known key")
    else:
        owners = [s for s, keys in _SCHEMA.items() if path in keys]
        present = [s for s in owners if path in data.get(s, {})]
        if len(present) == 1:
            owners = present
        elif len(owners) > 1:
            raise ConfigError(f"override key {path!r} is ambiguous; use one of "
                              + ", ".join(f"{s}.{path}" for s in owners))
        if not owners:
            raise ConfigError(f"override key {path!r} is not a known key")
        sec, key = owners[0], path
    out = {s: dict(v) for s, v in data.items()}
    out.setdefault(sec, {})[key] = value
    # An override of the base key replaces any alias given in the file.
    for alias, canon in _ALIASES.items():
        if sec == "eval" and key == canon:
            out["eval"].pop(alias, None)
        if sec == "eval" and key == alias:
            out["eval"].pop(canon, None)
    return out


def loads(text: str, overrides=(), source: str = "<string>") -> ScenarioFile:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{source}: {e}") from None
    for o in overrides:
        data = apply_override(data, o)
    try:
        return ScenarioFile(data, source, text)
    except ConfigError as e:
        raise ConfigError(f"{source}: {e}") from None


def recipe_path(name: str) -> Path:
    p = RECIPE_DIR / (name if name.endswith(".toml") else f"{name}.toml")
    if not p.exists():
        raise ConfigError(f"no bundled recipe named {name!r}; available: {', '.join(list_recipes())}")
    return p


def list_recipes() -> list[str]:
    return sorted(p.stem for p in RECIPE_DIR.glob("*.toml"))


def load(path, overrides=()) -> ScenarioFile:
    p = Path(path)
    if not p.exists() and not p.suffix:
        p = recipe_path(str(path))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    return loads(text, overrides, str(p))
