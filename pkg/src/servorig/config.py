"""Pipeline configuration: defaults, presets, file loading and validation.

The config file is INI-style with a single ``[servorig]`` section of flat
``key = value`` pairs; keys are the field names of ``PipelineConfig``.
Command-line ``--set key=value`` pairs override file values.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, fields

from servorig.dynamics import AirfoilSpec
from servorig.errors import ConfigurationError
from servorig.testbed import WearModel

SECTION = "servorig"


@dataclass
class PipelineConfig:
    # paths
    fdr_path: str = "fdr.csv"
    positions_path: str = "positions.txt"
    stats_path: str = "fdr_stats.json"
    schedule_path: str = "schedule.txt"
    log_path: str = "campaign_log.csv"
    report_path: str = "report.json"
    report_dir: str = "report"
    # recorder parsing
    units_column: str = "fine_units"
    time_column: str = ""
    delimiter: str = ","
    # schedule
    schedule_length: int = 119
    min_multiplicity: int = 1
    # airfoil and spring
    width_m: float = 0.428
    height_m: float = 0.048
    area_m2: float = 0.021
    v_min_mps: float = 40 * 0.44704
    v_max_mps: float = 50 * 0.44704
    v_avg_mps: float = 45 * 0.44704
    theta_max_deg: float = 40.0
    rho_kg_m3: float = 1.27
    arm_length_m: float = 0.02
    # wear
    wear_alpha: float = 1e-6
    wear_beta: float = 0.0
    wear_noise_sd_deg: float = 0.25
    # campaign
    total_cycles: int = 393_313
    step_period_ms: float = 232.0
    ppr: int = 1024
    # analysis
    period_cycles: int = 130_000
    n_periods: int = 3
    sample_size: int = 5000
    alpha: float = 0.05
    # seeds
    schedule_seed: int = 1
    campaign_seed: int = 2
    sampling_seed: int = 3

    def airfoil(self):
        return AirfoilSpec(self.width_m, self.height_m, self.area_m2, self.v_min_mps,
                           self.v_max_mps, self.v_avg_mps, self.theta_max_deg, self.rho_kg_m3)

    def wear(self):
        return WearModel(self.wear_alpha, self.wear_beta, self.wear_noise_sd_deg,
                         self.campaign_seed)

    def problems(self):
        """All validation failures, not just the first."""
        out = []
        positive = ("schedule_length", "total_cycles", "step_period_ms", "ppr",
                    "period_cycles", "n_periods", "sample_size", "arm_length_m")
        for name in positive:
            if getattr(self, name) <= 0:
                out.append(f"{name} must be positive (got {getattr(self, name)})")
        if self.min_multiplicity < 0:
            out.append("min_multiplicity must be >= 0")
        if self.sample_size > self.period_cycles:
            out.append(f"sample_size {self.sample_size} exceeds period_cycles {self.period_cycles}")
        if self.total_cycles < self.n_periods * self.period_cycles:
            out.append(f"total_cycles {self.total_cycles} < n_periods x period_cycles "
                       f"({self.n_periods * self.period_cycles})")
        if not 0 <= self.wear_beta <= 1:
            out.append("wear_beta must lie in [0, 1]")
        if self.wear_noise_sd_deg < 0:
            out.append("wear_noise_sd_deg must be >= 0")
        if not 0 < self.alpha < 1:
            out.append("alpha must lie in (0, 1)")
        if len(self.delimiter) != 1:
            out.append("delimiter must be a single character")
        try:
            self.airfoil()
        except Exception as exc:
            out.append(f"airfoil: {exc}")
        return out

    def validate(self):
        problems = self.problems()
        if problems:
            raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(problems))
        return self


PRESETS = {
    "paper": {},
    "paper-mini": {"total_cycles": 39_300, "period_cycles": 13_100, "sample_size": 500},
    "pristine": {"wear_alpha": 0.0, "wear_noise_sd_deg": 0.0},
}

_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key, raw):
    if key not in _FIELD_TYPES:
        raise ConfigurationError(f"unknown config key {key!r}")
    typ = _FIELD_TYPES[key]
    try:
        if typ == "int":
            return int(str(raw).replace("_", ""))
        if typ == "float":
            return float(raw)
        return str(raw)
    except ValueError:
        raise ConfigurationError(f"config key {key!r}: cannot parse {raw!r} as {typ}") from None


def apply_overrides(cfg, overrides):
    errors = []
    values = {}
    for key, raw in overrides.items():
        try:
            values[key] = _coerce(key, raw)
        except ConfigurationError as exc:
            errors.append(str(exc))
    if errors:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(errors))
    return dataclasses.replace(cfg, **values)


def read_config_text(text):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config file: {exc}") from None
    if not parser.has_section(SECTION):
        raise ConfigurationError(f"config file needs a [{SECTION}] section")
    return dict(parser.items(SECTION))


def load_config(path=None, preset=None, overrides=None):
    cfg = PipelineConfig()
    if preset:
        if preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = dataclasses.replace(cfg, **PRESETS[preset])
    if path:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file {path}: {exc.strerror}") from None
        cfg = apply_overrides(cfg, read_config_text(text))
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def dump_config(cfg):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser[SECTION] = {f.name: repr(getattr(cfg, f.name)) if f.type == "float"
                       else str(getattr(cfg, f.name)) for f in fields(cfg)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
