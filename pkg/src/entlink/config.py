"""Experiment configuration file handling.

Configs are a human-readable YAML tree.  Physical quantities may be written
either as plain SI numbers or as strings with a unit suffix ("6.9us",
"16.1kHz", "606nm"), which guards against magnitude slips.  Serialization
emits plain SI floats, so a round trip through a file is field-exact.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, fields
from pathlib import Path

import yaml

from .analyzer import AnalyzerParams, TransmitOrStore, TwoCombAfc
from .engine import Experiment, ExperimentConfig
from .events import ConfigError
from .memory import FilterParams, MemoryParams
from .source import SourceParams

_UNIT_SCALE = {
    "s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12,
    "hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9,
    "m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9,
}
_QUANTITY_RE = re.compile(r"^\s*([-+]?[0-9.eE+-]+)\s*([a-zA-Zµ]*)\s*$")


def parse_quantity(value) -> float:
    """Parse a number or a unit-suffixed string into an SI float."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"cannot parse quantity from {value!r}")
    match = _QUANTITY_RE.match(value)
    if not match:
        raise ConfigError(f"malformed quantity {value!r}")
    number, unit = match.groups()
    try:
        magnitude = float(number)
    except ValueError as exc:
        raise ConfigError(f"malformed number in {value!r}") from exc
    if not unit:
        return magnitude
    key = unit.replace("µ", "u").lower()
    if key not in _UNIT_SCALE:
        raise ConfigError(f"unknown unit {unit!r} in {value!r}")
    return magnitude * _UNIT_SCALE[key]


_SECTION_TYPES = {
    "source": SourceParams,
    "memory": MemoryParams,
    "filter": FilterParams,
}

_INT_FIELDS = {"n_freq_modes", "n_trials", "seed", "n_noise_trials_per_herald"}


def _build_section(cls, data: dict):
    kwargs = {}
    valid = {f.name for f in fields(cls)}
    for key, value in data.items():
        if key not in valid:
            raise ConfigError(f"{cls.__name__}: unknown field {key!r}")
        kwargs[key] = int(value) if key in _INT_FIELDS else parse_quantity(value)
    return cls(**kwargs)


def _build_analyzer(data: dict) -> AnalyzerParams:
    data = dict(data)
    kind = data.pop("signal_analyzer", "two-comb")
    sa_args = {k: parse_quantity(v) for k, v in data.pop("signal_analyzer_args", {}).items()}
    if kind == "two-comb":
        signal_analyzer = TwoCombAfc(**sa_args)
    elif kind == "transmit-or-store":
        signal_analyzer = TransmitOrStore(**sa_args)
    else:
        raise ConfigError(f"unknown signal_analyzer {kind!r}")
    kwargs = {k: parse_quantity(v) for k, v in data.items()}
    return AnalyzerParams(signal_analyzer=signal_analyzer, **kwargs)


def config_from_dict(tree: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from a parsed YAML tree."""
    if not isinstance(tree, dict):
        raise ConfigError("config root must be a mapping")
    tree = dict(tree)
    kwargs = {}
    try:
        experiment = Experiment(tree.pop("experiment"))
    except KeyError:
        raise ConfigError("config missing required field 'experiment'")
    except ValueError:
        raise ConfigError(f"unknown experiment {tree.get('experiment')!r}")
    kwargs["experiment"] = experiment

    for section, cls in _SECTION_TYPES.items():
        if section in tree:
            kwargs[section] = _build_section(cls, tree.pop(section) or {})
    if "analyzer" in tree:
        analyzer = tree.pop("analyzer")
        if analyzer is not None:
            kwargs["analyzer"] = _build_analyzer(analyzer)

    list_fields = {"t_s_list", "phase_list"}
    int_list_fields = {"sweep_trials", "sweep_fringe_trials"}
    scalar_fields = {
        "n_trials", "seed", "detector_efficiency_signal", "detector_efficiency_idler",
        "t_s", "signal_background_per_window", "n_noise_trials_per_herald",
    }
    for key, value in tree.items():
        if key in list_fields:
            kwargs[key] = tuple(parse_quantity(v) for v in value)
        elif key in int_list_fields:
            kwargs[key] = tuple(int(v) for v in value)
        elif key in scalar_fields:
            kwargs[key] = int(value) if key in _INT_FIELDS else parse_quantity(value)
        else:
            raise ConfigError(f"unknown config field {key!r}")
    return ExperimentConfig(**kwargs)


def _analyzer_to_dict(analyzer: AnalyzerParams) -> dict:
    sa = analyzer.signal_analyzer
    if isinstance(sa, TwoCombAfc):
        kind, sa_args = "two-comb", {"t_short": sa.t_short, "t_long": sa.t_long}
    else:
        kind, sa_args = "transmit-or-store", {"t_store": sa.t_store, "p_transmit": sa.p_transmit}
    return {
        "tau_mz": analyzer.tau_mz,
        "phase_idler": analyzer.phase_idler,
        "phase_signal": analyzer.phase_signal,
        "analyzer_visibility": analyzer.analyzer_visibility,
        "signal_analyzer": kind,
        "signal_analyzer_args": sa_args,
    }


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-SI dictionary form of a configuration."""
    tree = {
        "experiment": config.experiment.value,
        "source": asdict(config.source),
        "memory": asdict(config.memory),
        "filter": asdict(config.filter),
        "n_trials": config.n_trials,
        "seed": config.seed,
        "detector_efficiency_signal": config.detector_efficiency_signal,
        "detector_efficiency_idler": config.detector_efficiency_idler,
        "t_s": config.t_s,
        "signal_background_per_window": config.signal_background_per_window,
        "n_noise_trials_per_herald": config.n_noise_trials_per_herald,
    }
    if config.analyzer is not None:
        tree["analyzer"] = _analyzer_to_dict(config.analyzer)
    if config.t_s_list:
        tree["t_s_list"] = list(config.t_s_list)
    if config.phase_list:
        tree["phase_list"] = list(config.phase_list)
    if config.sweep_trials:
        tree["sweep_trials"] = list(config.sweep_trials)
    if config.sweep_fringe_trials:
        tree["sweep_fringe_trials"] = list(config.sweep_fringe_trials)
    return tree


def config_to_canonical_json(config: ExperimentConfig) -> str:
    """Canonical single-line JSON used for digests and log manifests."""
    return json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))


def write_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(config), sort_keys=True))


def read_config(path: str | Path) -> ExperimentConfig:
    try:
        tree = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file does not parse: {exc}") from exc
    return config_from_dict(tree)


def validate_for_run(config: ExperimentConfig) -> None:
    """Strict pre-run validation used by the command-line front end."""
    if config.n_trials <= 0:
        raise ConfigError("n_trials must be > 0")
    if config.experiment is Experiment.TS_SWEEP and not config.t_s_list:
        raise ConfigError("ts-sweep requires a non-empty t_s_list")
    if config.experiment in (Experiment.AFC_FRINGE, Experiment.SPIN_WAVE_FRINGE):
        if not config.phase_list:
            raise ConfigError("fringe scans require a non-empty phase_list")
