"""JSON run configuration.

Schema (``format_version`` 1)::

    {
      "format_version": 1,
      "chain":    {"mu": 1.0, "chi": 1.0, "L": 10000},
      "bath":     {"statistics": "fermionic", "s": 1.0, "gamma0": 0.01},
      "schedule": {"kind": "linear", "T_i": 0.0, "T_f": 5.0, "tau": 1024.0,
                   "relax_duration": 0.0, "pre_quench": {"mu": 2.0, "chi": 1.0}},
      "sweep":    {"taus": [128, 256], "mus": []},
      "sampling": {"per_decade": 60, "t_min": 0.1, "t_max": null},
      "tolerances": {"quad_tol": 1e-12, "ode_tol": 1e-10, "delta": 1e-6,
                     "delta_mode": "absolute"},
      "outputs":  {"dir": ".", "prefix": "kq"}
    }

Only ``chain``, ``bath`` and ``schedule`` are required. ``T_i`` may be the
string ``"inf"``, which maps to ``T_CAP``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .bath import BOSONIC, FERMIONIC, T_CAP, BathSpec
from .chain import ChainParams
from .schedules import KINDS, QuenchSchedule, SweepSpec

FORMAT_VERSION = 1

DEFAULTS = {
    "format_version": FORMAT_VERSION,
    "sweep": {"taus": [], "mus": []},
    "sampling": {"per_decade": 60, "t_min": 0.1, "t_max": None},
    "tolerances": {"quad_tol": 1e-12, "ode_tol": 1e-10, "delta": 1e-6, "delta_mode": "absolute"},
    "outputs": {"dir": ".", "prefix": "kq"},
}

_SECTIONS = {
    "format_version": None,
    "chain": {"mu", "chi", "L"},
    "bath": {"statistics", "s", "gamma0"},
    "schedule": {"kind", "T_i", "T_f", "tau", "relax_duration", "pre_quench"},
    "sweep": {"taus", "mus"},
    "sampling": {"per_decade", "t_min", "t_max"},
    "tolerances": {"quad_tol", "ode_tol", "delta", "delta_mode"},
    "outputs": {"dir", "prefix"},
}


class ConfigError(ValueError):
    pass


@dataclass
class Sampling:
    per_decade: int = 60
    t_min: float = 0.1
    t_max: Optional[float] = None


@dataclass
class Tolerances:
    quad_tol: float = 1e-12
    ode_tol: float = 1e-10
    delta: float = 1e-6
    delta_mode: str = "absolute"


@dataclass
class RunConfig:
    chain: ChainParams
    bath: BathSpec
    schedule: QuenchSchedule
    sweep: SweepSpec
    sampling: Sampling = field(default_factory=Sampling)
    tolerances: Tolerances = field(default_factory=Tolerances)
    out_dir: str = "."
    prefix: str = "kq"
    raw: dict = field(default_factory=dict, repr=False)


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``override`` wins."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _num(section: dict, key: str, where: str, required=True, default=None, allow_inf=False):
    if key not in section or section[key] is None:
        if required:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    value = section[key]
    if allow_inf and isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return T_CAP
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}.{key}: must be finite")
    return value


def _check_keys(data: dict) -> None:
    for key, value in data.items():
        if key not in _SECTIONS:
            raise ConfigError(f"{key}: unknown field")
        allowed = _SECTIONS[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected an object")
        for sub in value:
            if sub not in allowed:
                raise ConfigError(f"{key}.{sub}: unknown field")


def parse_config(data: dict) -> RunConfig:
    """Validate a config dict (defaults are filled in) and build the run objects."""
    _check_keys(data)
    full = merge(DEFAULTS, data)
    if full["format_version"] != FORMAT_VERSION:
        raise ConfigError(f"format_version: unsupported value {full['format_version']!r}")
    for name in ("chain", "bath", "schedule"):
        if name not in full:
            raise ConfigError(f"{name}: missing section")

    c = full["chain"]
    L = c.get("L")
    if isinstance(L, bool) or not isinstance(L, int):
        raise ConfigError(f"chain.L: expected an integer, got {L!r}")
    try:
        chain = ChainParams(_num(c, "mu", "chain"), _num(c, "chi", "chain"), L)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"chain: {exc}") from None

    b = full["bath"]
    stats = b.get("statistics", "fermionic")
    zeta = {"fermionic": FERMIONIC, "bosonic": BOSONIC}.get(stats)
    if zeta is None:
        raise ConfigError(f"bath.statistics: expected 'fermionic' or 'bosonic', got {stats!r}")
    try:
        bath = BathSpec(zeta, _num(b, "s", "bath"), _num(b, "gamma0", "bath"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bath: {exc}") from None

    s = full["schedule"]
    kind = s.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"schedule.kind: expected one of {list(KINDS)}, got {kind!r}")
    pre = s.get("pre_quench")
    pre_chain = None
    if pre is not None:
        if not isinstance(pre, dict):
            raise ConfigError("schedule.pre_quench: expected an object with mu and chi")
        try:
            pre_chain = ChainParams(_num(pre, "mu", "schedule.pre_quench"),
                                    _num(pre, "chi", "schedule.pre_quench", required=False, default=chain.chi),
                                    chain.L)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"schedule.pre_quench: {exc}") from None
    try:
        schedule = QuenchSchedule(
            kind,
            _num(s, "T_i", "schedule", allow_inf=True),
            _num(s, "T_f", "schedule"),
            _num(s, "tau", "schedule", required=False),
            _num(s, "relax_duration", "schedule", required=False, default=0.0),
            pre_chain,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"schedule: {exc}") from None

    sw = full["sweep"]
    for key in ("taus", "mus"):
        if not isinstance(sw.get(key, []), list):
            raise ConfigError(f"sweep.{key}: expected a list")
    if sw["taus"] and kind == "sudden":
        raise ConfigError("sweep.taus: tau sweeps need a ramp schedule")
    try:
        sweep = SweepSpec(schedule, sw["taus"], (), sw["mus"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"sweep: {exc}") from None
    for mu in sweep.mus:
        if not math.isfinite(mu):
            raise ConfigError("sweep.mus: values must be finite")

    sm = full["sampling"]
    pd = sm.get("per_decade")
    if isinstance(pd, bool) or not isinstance(pd, int) or pd < 1:
        raise ConfigError(f"sampling.per_decade: expected a positive integer, got {pd!r}")
    sampling = Sampling(pd, _num(sm, "t_min", "sampling"), _num(sm, "t_max", "sampling", required=False))
    if sampling.t_min <= 0:
        raise ConfigError("sampling.t_min: must be > 0")
    if sampling.t_max is not None and sampling.t_max <= sampling.t_min:
        raise ConfigError("sampling.t_max: must exceed t_min")

    tl = full["tolerances"]
    tol = Tolerances(_num(tl, "quad_tol", "tolerances"), _num(tl, "ode_tol", "tolerances"),
                     _num(tl, "delta", "tolerances"), tl.get("delta_mode", "absolute"))
    for name in ("quad_tol", "ode_tol", "delta"):
        if not getattr(tol, name) > 0:
            raise ConfigError(f"tolerances.{name}: must be > 0")
    if tol.delta_mode not in ("absolute", "relative"):
        raise ConfigError("tolerances.delta_mode: expected 'absolute' or 'relative'")

    out = full["outputs"]
    for key in ("dir", "prefix"):
        if not isinstance(out.get(key), str) or not out[key]:
            raise ConfigError(f"outputs.{key}: expected a non-empty string")
    return RunConfig(chain, bath, schedule, sweep, sampling, tol, out["dir"], out["prefix"], raw=full)
