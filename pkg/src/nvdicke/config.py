"""Run configuration: strict YAML parsing, presets and echo.

A config is a nested mapping. Merge order is preset, then file, then flags.
Unknown keys and invalid values raise ``ParameterError`` naming the key.
"""
from dataclasses import dataclass, field, fields, replace
from importlib import resources
import math
import os

import yaml

from .dynamics import PropagatorConfig
from .experiments import SCENARIOS, SWEEPS
from .model import ParameterError, PhysicalParams, PulseSchedule

OUTPUT_ENV = "NVDICKE_OUTPUT_DIR"

# config name -> PhysicalParams field
PARAM_KEYS = {
    "nu": "nu",
    "lambda": "lambda_base",
    "coupling_error": "coupling_error",
    "quality_factor": "quality_factor",
    "temperature": "temperature",
    "n_spins": "n_spins",
}
SCHEDULE_KEYS = ("kind", "duration", "delta_constant", "delta_start", "delta_end")
INTEGRATOR_KEYS = tuple(f.name for f in fields(PropagatorConfig) if f.name != "store_states")
SWEEP_PARAMETERS = {"heating": "quality_factor", "coupling": "coupling_error"}
TOP_KEYS = ("scenario", "params", "schedule", "integrator", "output_dir", "sweep", "workers", "plot")


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "d31"
    params: PhysicalParams = field(default_factory=PhysicalParams)
    schedule: PulseSchedule = None
    integrator: PropagatorConfig = field(default_factory=PropagatorConfig)
    output_dir: str = None
    sweep_values: tuple = None
    workers: int = 1
    plot: bool = True

    @property
    def is_sweep(self):
        return self.scenario in SWEEPS

    def resolved_output_dir(self):
        return self.output_dir or os.environ.get(OUTPUT_ENV) or os.path.join("runs", self.scenario)


def _mapping(value, key):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ParameterError(key, "must be a mapping")
    return value


def _reject_unknown(mapping, allowed, prefix=""):
    for key in mapping:
        if key not in allowed:
            raise ParameterError(f"{prefix}{key}", "unknown key")


def _number(value, key, integer=False):
    if isinstance(value, bool) or value is None:
        raise ParameterError(key, "must be a number")
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            raise ParameterError(key, f"not a number: {value!r}") from None
    if integer:
        if float(value) != int(value):
            raise ParameterError(key, "must be an integer")
        return int(value)
    if not isinstance(value, (int, float)):
        raise ParameterError(key, "must be a number")
    return float(value)


def merge(base, override):
    """Recursive dict merge; ``override`` wins and ``None`` values are skipped."""
    out = dict(base)
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, dict):
            prev = out.get(key)
            out[key] = merge(prev if isinstance(prev, dict) else {}, value)
        else:
            out[key] = value
    return out


def parse_config(raw):
    """Validate a nested mapping into a ``RunConfig``."""
    raw = _mapping(raw, "config")
    _reject_unknown(raw, TOP_KEYS)

    scenario = raw.get("scenario", "d31")
    if scenario not in SCENARIOS and scenario not in SWEEPS:
        raise ParameterError("scenario", f"unknown scenario {scenario!r}")

    p = _mapping(raw.get("params"), "params")
    _reject_unknown(p, PARAM_KEYS, "params.")
    kwargs = {
        PARAM_KEYS[k]: _number(v, k, integer=(k == "n_spins")) for k, v in p.items()
    }
    params = PhysicalParams(**kwargs)

    schedule = None
    s = _mapping(raw.get("schedule"), "schedule")
    if s:
        _reject_unknown(s, SCHEDULE_KEYS, "schedule.")
        s_kw = {k: (v if k == "kind" else _number(v, f"schedule.{k}")) for k, v in s.items()}
        if "duration" not in s_kw:
            raise ParameterError("schedule.duration", "is required")
        try:
            schedule = PulseSchedule(**{"kind": "square", **s_kw}).check_drive(params.nu)
        except ParameterError as err:
            key = err.key if err.key == "schedule" else f"schedule.{err.key}"
            raise ParameterError(key, str(err).split(": ", 1)[-1]) from None

    i = _mapping(raw.get("integrator"), "integrator")
    _reject_unknown(i, INTEGRATOR_KEYS, "integrator.")
    i_kw = {}
    for k, v in i.items():
        is_int = isinstance(getattr(PropagatorConfig, k), int)
        i_kw[k] = _number(v, f"integrator.{k}", integer=is_int)
    try:
        integrator = PropagatorConfig(**i_kw)
    except ValueError as err:
        key = str(err).split(" ", 1)[0]
        raise ParameterError(f"integrator.{key}", str(err)) from None

    sweep_values = None
    sw = _mapping(raw.get("sweep"), "sweep")
    if sw:
        _reject_unknown(sw, ("parameter", "values"), "sweep.")
        if scenario not in SWEEPS:
            raise ParameterError("sweep", f"scenario {scenario!r} is not a sweep")
        expected = SWEEP_PARAMETERS[scenario]
        if sw.get("parameter", expected) != expected:
            raise ParameterError("sweep.parameter", f"{scenario} sweeps {expected}")
        values = sw.get("values")
        if not isinstance(values, (list, tuple)) or not values:
            raise ParameterError("sweep.values", "must be a non-empty list")
        sweep_values = tuple(_number(v, "sweep.values") for v in values)
        steps = [b - a for a, b in zip(sweep_values, sweep_values[1:])]
        if not (all(d > 0 for d in steps) or all(d < 0 for d in steps)):
            raise ParameterError("sweep.values", "must be strictly monotone")
        for v in sweep_values:
            if math.isnan(v) or (expected == "quality_factor" and v <= 0):
                raise ParameterError("sweep.values", f"invalid {expected} {v}")
            # every point must also satisfy the parameter invariants
            try:
                params.with_(**{expected: v})
            except ParameterError as err:
                raise ParameterError("sweep.values", str(err)) from None

    output_dir = raw.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ParameterError("output_dir", "must be a string")
    workers = _number(raw.get("workers", 1), "workers", integer=True)
    if workers < 1:
        raise ParameterError("workers", "must be >= 1")
    plot = raw.get("plot", True)
    if not isinstance(plot, bool):
        raise ParameterError("plot", "must be true or false")

    return RunConfig(scenario, params, schedule, integrator, output_dir, sweep_values, workers, plot)


def load_yaml(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as err:
        raise ParameterError("config", f"cannot parse {path}: {err}") from None
    except OSError as err:
        raise ParameterError("config", f"cannot read {path}: {err.strerror}") from None
    return _mapping(data, "config")


def preset(name):
    """Raw mapping of a shipped preset (``presets/<name>.yaml``)."""
    res = resources.files(__package__) / "presets" / f"{name}.yaml"
    if not res.is_file():
        raise ParameterError("preset", f"unknown preset {name!r}")
    return _mapping(yaml.safe_load(res.read_text()), "preset")


def to_mapping(cfg):
    """Plain nested mapping that ``parse_config`` maps back to ``cfg``."""
    params = {k: getattr(cfg.params, attr) for k, attr in PARAM_KEYS.items()}
    out = {"scenario": cfg.scenario, "params": params}
    if cfg.schedule is not None:
        out["schedule"] = {k: getattr(cfg.schedule, k) for k in SCHEDULE_KEYS}
    out["integrator"] = {k: getattr(cfg.integrator, k) for k in INTEGRATOR_KEYS}
    if cfg.output_dir is not None:
        out["output_dir"] = cfg.output_dir
    if cfg.sweep_values is not None:
        out["sweep"] = {"parameter": SWEEP_PARAMETERS[cfg.scenario], "values": list(cfg.sweep_values)}
    out["workers"] = cfg.workers
    out["plot"] = cfg.plot
    return out


def dump_config(cfg):
    """YAML text of ``cfg``; floats are written with round-trip precision."""
    return yaml.safe_dump(to_mapping(cfg), sort_keys=False)


def with_output_dir(cfg, path):
    return replace(cfg, output_dir=path)
