"""Scenario configuration files.

INI-style, one section per concern; every key is optional and defaults to
the case-study values.  Example::

    [reactor]
    n = 2
    k = 0.001
    L = 1
    v = 0.01

    [constraint]
    tau = 100
    c_mean = 1
    c_min = 0.5
    c_max = 1.5
    v_mean = 0.01      ; omit all three v_* keys for a single-input scenario
    v_min = 0.005
    v_max = 0.015

    [control]
    kind = piecewise   ; steady | sinusoid | piecewise | bang | bang_pair
    breakpoints = 0, 50
    values = 1.5, 0.5

    [run]
    type = evaluate    ; evaluate | case_study | sweep_single | sweep_pair | trial | pde_check

Errors are raised as :class:`ConfigError` naming the file line and the
``section.key`` at fault.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .model import ReactorParams
from .signal import PeriodicSignal, PiecewiseConstant, Sinusoid, Steady
from .strategy import InfeasibleSpecError, IsoperimetricSpec, make_bang_pair, make_bang_single

RUN_TYPES = ("evaluate", "case_study", "sweep_single", "sweep_pair", "trial", "pde_check")

DEFAULTS = {
    "reactor": {"n": "2", "k": "0.001", "L": "1", "v": "0.01"},
    "constraint": {"tau": "100", "c_mean": "1", "c_min": "0.5", "c_max": "1.5",
                   "v_mean": "0.01", "v_min": "0.005", "v_max": "0.015"},
    "control": {"kind": "piecewise", "breakpoints": "0, 50", "values": "1.5, 0.5",
                "value": "", "mean": "", "amplitude": "", "phase": "0", "switchings": "1"},
    "flow": {"kind": "none", "breakpoints": "", "values": "", "value": "",
             "mean": "", "amplitude": "", "phase": "0"},
    "run": {"type": "evaluate", "seed": "20240117", "threads": "1"},
    "sweep": {"alpha_points": "50", "beta_points": "20", "alphas": "", "betas": ""},
    "trial": {"samples": "200", "pieces": "8", "two_input": "false"},
    "pde": {"nx": "512", "cfl": "1.0", "periods": "3", "resolutions": "64, 128, 256, 512"},
    "tolerances": {"route_rtol": "1e-8", "closed_form_rtol": "1e-10", "pde_cost_rtol": "5e-3",
                   "order_band": "0.2", "optimality_slack": "1e-12", "quoted_pct_abs": "0.01"},
    "output": {"dir": ".", "prefix": ""},
}


class ConfigError(ValueError):
    def __init__(self, message: str, where: str = "", line: Optional[int] = None):
        self.where = where
        self.line = line
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if where:
            loc.append(where)
        super().__init__(f"{': '.join([', '.join(loc), message]) if loc else message}")


@dataclass
class ScenarioConfig:
    path: Optional[Path]
    params: ReactorParams
    spec: IsoperimetricSpec
    control: Optional[PeriodicSignal]
    flow: Optional[PeriodicSignal]
    run_type: str
    seed: int
    threads: int
    sweep: dict
    trial: dict
    pde: dict
    tolerances: dict
    out_dir: Path
    prefix: str
    raw: dict = field(default_factory=dict, repr=False)


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` to the 1-based line it appears on."""
    lines, section = {}, None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            lines[(section, None)] = i
            continue
        for sep in ("=", ":"):
            if sep in s:
                lines[(section, s.split(sep, 1)[0].strip())] = i
                break
    return lines


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, lines: dict):
        self.parser = parser
        self.lines = lines

    def raw(self, section: str, key: str) -> str:
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        return DEFAULTS[section][key]

    def error(self, section, key, msg) -> ConfigError:
        return ConfigError(msg, f"{section}.{key}", self.lines.get((section, key)))

    def number(self, section, key, optional=False) -> Optional[float]:
        text = self.raw(section, key)
        if text == "":
            if optional:
                return None
            raise self.error(section, key, "value required")
        try:
            val = float(text)
        except ValueError:
            raise self.error(section, key, f"not a number: {text!r}") from None
        if not math.isfinite(val):
            raise self.error(section, key, f"not finite: {text!r}")
        return val

    def integer(self, section, key) -> int:
        text = self.raw(section, key)
        try:
            return int(text)
        except ValueError:
            raise self.error(section, key, f"not an integer: {text!r}") from None

    def numbers(self, section, key) -> list:
        text = self.raw(section, key)
        if not text:
            return []
        try:
            return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
        except ValueError:
            raise self.error(section, key, f"not a comma-separated list of numbers: {text!r}") from None

    def boolean(self, section, key) -> bool:
        text = self.raw(section, key).lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise self.error(section, key, f"not a boolean: {text!r}")


def _signal(r: _Reader, section: str, tau: float, default_mean: Optional[float]) -> Optional[PeriodicSignal]:
    kind = r.raw(section, "kind").lower()
    try:
        if kind == "none":
            return None
        if kind == "steady":
            value = r.number(section, "value", optional=True)
            value = default_mean if value is None else value
            if value is None:
                raise r.error(section, "value", "value required")
            return Steady(tau, value)
        if kind == "sinusoid":
            m = r.number(section, "mean", optional=True)
            m = default_mean if m is None else m
            amp = r.number(section, "amplitude")
            return Sinusoid(tau, m, amp, r.number(section, "phase"))
        if kind == "piecewise":
            bps = r.numbers(section, "breakpoints")
            vals = r.numbers(section, "values")
            return PiecewiseConstant(tau, tuple(bps), tuple(vals))
    except ConfigError:
        raise
    except ValueError as exc:
        raise r.error(section, "kind", str(exc)) from None
    raise r.error(section, "kind", f"unknown signal kind {kind!r}")


def signal_to_config(signal: PeriodicSignal) -> dict:
    """Inverse of the ``[control]``/``[flow]`` parsing for a single signal."""
    fmt = lambda x: repr(float(x))
    if isinstance(signal, Steady):
        return {"kind": "steady", "value": fmt(signal.value)}
    if isinstance(signal, Sinusoid):
        return {"kind": "sinusoid", "mean": fmt(signal.mean), "amplitude": fmt(signal.amplitude),
                "phase": fmt(signal.phase)}
    return {"kind": "piecewise",
            "breakpoints": ", ".join(fmt(b) for b in signal.breakpoints),
            "values": ", ".join(fmt(v) for v in signal.values)}


def signal_from_config(mapping: dict, period: float) -> Optional[PeriodicSignal]:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    parser["flow"] = {k: str(v) for k, v in mapping.items()}
    return _signal(_Reader(parser, {}), "flow", period, None)


def parse_config(text: str, path: Optional[Path] = None) -> ScenarioConfig:
    """Parse and validate a scenario.

    Raises ``ConfigError`` for malformed input and
    ``strategy.InfeasibleSpecError`` when the constraints cannot be met.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path or "<config>"))
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], line=line) from None
    lines = _key_lines(text)
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]", section, lines.get((section, None)))
        for key in parser.options(section):
            if key not in DEFAULTS[section]:
                raise ConfigError("unknown key", f"{section}.{key}", lines.get((section, key)))
    r = _Reader(parser, lines)

    try:
        params = ReactorParams(*(r.number("reactor", k) for k in ("n", "k", "L", "v")))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "reactor", lines.get(("reactor", None))) from None

    c = {k: r.number("constraint", k, optional=k.startswith("v_")) for k in DEFAULTS["constraint"]}
    try:
        spec = IsoperimetricSpec(c["tau"], c["c_mean"], c["c_min"], c["c_max"],
                                 c["v_mean"], c["v_min"], c["v_max"])
    except ValueError as exc:
        if isinstance(exc, InfeasibleSpecError):
            raise
        raise ConfigError(str(exc), "constraint", lines.get(("constraint", None))) from None

    kind = r.raw("control", "kind").lower()
    flow = _signal(r, "flow", spec.tau, spec.v_mean)
    if kind == "bang":
        control = make_bang_single(spec, switchings=r.integer("control", "switchings"))
    elif kind == "bang_pair":
        if flow is not None:
            raise r.error("flow", "kind", "bang_pair builds its own flow; set flow.kind = none")
        pair = make_bang_pair(spec, params.L, switchings=r.integer("control", "switchings"))
        control, flow = pair.c, pair.v
    else:
        control = _signal(r, "control", spec.tau, spec.c_mean)

    run_type = r.raw("run", "type").lower()
    if run_type not in RUN_TYPES:
        raise r.error("run", "type", f"must be one of {', '.join(RUN_TYPES)}")
    threads = r.integer("run", "threads")
    if threads < 1:
        raise r.error("run", "threads", "must be >= 1")

    sweep = {
        "alpha_points": r.integer("sweep", "alpha_points"),
        "beta_points": r.integer("sweep", "beta_points"),
        "alphas": r.numbers("sweep", "alphas"),
        "betas": r.numbers("sweep", "betas"),
    }
    for key in ("alphas", "betas"):
        if any(not 0 < a < 1 for a in sweep[key]):
            raise r.error("sweep", key, "amplitudes must lie strictly inside (0, 1)")
    trial = {
        "samples": r.integer("trial", "samples"),
        "pieces": r.integer("trial", "pieces"),
        "two_input": r.boolean("trial", "two_input"),
    }
    if trial["pieces"] < 1 or trial["samples"] < 1:
        raise r.error("trial", "samples", "samples and pieces must be >= 1")
    pde = {
        "nx": r.integer("pde", "nx"),
        "cfl": r.number("pde", "cfl"),
        "periods": r.integer("pde", "periods"),
        "resolutions": [int(x) for x in r.numbers("pde", "resolutions")],
    }
    if pde["nx"] < 16:
        raise r.error("pde", "nx", "must be >= 16")
    if not 0 < pde["cfl"] <= 1:
        raise r.error("pde", "cfl", "CFL number must lie in (0, 1]")
    tolerances = {k: r.number("tolerances", k) for k in DEFAULTS["tolerances"]}

    prefix = r.raw("output", "prefix") or (path.stem if path else run_type)
    return ScenarioConfig(
        path=path,
        params=params,
        spec=spec,
        control=control,
        flow=flow,
        run_type=run_type,
        seed=r.integer("run", "seed"),
        threads=threads,
        sweep=sweep,
        trial=trial,
        pde=pde,
        tolerances=tolerances,
        out_dir=Path(r.raw("output", "dir")),
        prefix=prefix,
        raw={s: dict(parser[s]) for s in parser.sections()},
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, path)
