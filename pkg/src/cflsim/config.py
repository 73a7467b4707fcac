"""Experiment configuration: a YAML key-value tree, schema-validated.

Every knob has a documented default; the resolved tree (all defaults
materialized) is echoed to each run directory as config-resolved.json so
outputs carry their full provenance. Radio parameters are validated
against the simulation ranges (client distance 20-100 m, CPU 1-9 GHz,
transmit power -10..20 dBm, 20 cycles/sample, 1e-8 W noise, 10 MHz band)
unless the `unsafe` flag is set.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .orchestrator import RunParams, SchemeConfig, scheme_from_name
from .synthdata import Population, generate_population, make_unbalanced

_RANGES = {
    "distance_range": (20.0, 100.0),
    "cpu_hz_range": (1e9, 9e9),
    "tx_power_dbm_range": (-10.0, 20.0),
}
_FIXED = {
    "cycles_per_sample": 20.0,
    "noise_power_w": 1e-8,
    "total_bandwidth_hz": 1e7,
}


@dataclass
class PopulationSection:
    n_clients: int = 40
    n_edges: int = 2
    n_dists: int = 4
    n_features: int = 20
    n_classes: int = 10
    samples_range: list = field(default_factory=lambda: [60, 120])
    center_scale: float = 3.0
    noise_sigma: float = 0.5
    imbalance_factor: float = 1.0
    seed: int = 1


@dataclass
class TrainingSection:
    arch: str = "logreg"
    n_hidden: int = 32
    epochs: int = 10
    batch: int = 32
    lr: float = 0.01


@dataclass
class RadioSection:
    total_bandwidth_hz: float = 1e7
    noise_power_w: float = 1e-8
    backhaul_rate_bps: float = 1e7
    backhaul_power_w: float = 1.0
    cycles_per_sample: float = 20.0
    capacitance: float = 2e-28
    distance_range: list = field(default_factory=lambda: [20.0, 100.0])
    cpu_hz_range: list = field(default_factory=lambda: [1e9, 9e9])
    tx_power_dbm_range: list = field(default_factory=lambda: [-10.0, 20.0])
    fading: bool = False


@dataclass
class ClusteringSection:
    eps1: float | None = None
    eps2: float | None = None
    eps1_ratio: float = 0.4
    eps2_ratio: float = 1.6
    theta_cloud: float = 0.9
    cloud_recluster: bool = True


@dataclass
class SchedulingSection:
    p_avail: float = 1.0
    baseline_budget_frac: float | None = None
    deadline_policy: str = "adaptive"
    deadline_value: float | None = None
    deadline_percentile: float = 95.0


@dataclass
class RunSection:
    rounds: int = 100
    r_agg: int = 5
    t_budget: float | None = None
    seed: int = 1


@dataclass
class ExperimentConfig:
    population: PopulationSection = field(default_factory=PopulationSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    radio: RadioSection = field(default_factory=RadioSection)
    clustering: ClusteringSection = field(default_factory=ClusteringSection)
    scheduling: SchedulingSection = field(default_factory=SchedulingSection)
    run: RunSection = field(default_factory=RunSection)
    unsafe: bool = False

    def validate(self) -> None:
        p, t, r = self.population, self.training, self.radio
        if p.n_edges < 1:
            raise ConfigError("population.n_edges", "must be >= 1")
        if p.n_clients < p.n_edges:
            raise ConfigError("population.n_clients", "must be >= n_edges")
        if p.n_dists < 1:
            raise ConfigError("population.n_dists", "must be >= 1")
        if p.imbalance_factor < 1:
            raise ConfigError("population.imbalance_factor", "must be >= 1")
        lo, hi = p.samples_range
        if lo < 1 or hi < lo:
            raise ConfigError("population.samples_range", "invalid range")
        if t.arch not in ("logreg", "mlp"):
            raise ConfigError("training.arch", f"unknown architecture {t.arch!r}")
        if t.epochs < 1:
            raise ConfigError("training.epochs", "must be >= 1")
        if t.batch < 1:
            raise ConfigError("training.batch", "must be >= 1")
        if t.lr <= 0:
            raise ConfigError("training.lr", "must be positive")
        if not self.unsafe:
            if t.batch > lo:
                raise ConfigError(
                    "training.batch",
                    f"exceeds the smallest client dataset ({lo}); "
                    "set unsafe to override")
            for name, (vmin, vmax) in _RANGES.items():
                got = getattr(r, name)
                if got[0] < vmin or got[1] > vmax or got[0] > got[1]:
                    raise ConfigError(
                        f"radio.{name}",
                        f"{got} outside the simulated range [{vmin}, {vmax}]; "
                        "set unsafe to override")
            for name, expect in _FIXED.items():
                if getattr(r, name) != expect:
                    raise ConfigError(
                        f"radio.{name}",
                        f"differs from the simulated value {expect}; "
                        "set unsafe to override")
        for name in ("backhaul_rate_bps", "backhaul_power_w", "capacitance",
                     "noise_power_w", "total_bandwidth_hz"):
            if getattr(r, name) <= 0:
                raise ConfigError(f"radio.{name}", "must be positive")
        if self.run.rounds < 0:
            raise ConfigError("run.rounds", "must be non-negative")
        if self.run.r_agg < 1:
            raise ConfigError("run.r_agg", "must be >= 1")
        if self.run.t_budget is not None and self.run.t_budget < 0:
            raise ConfigError("run.t_budget", "must be non-negative")
        # these raise ConfigError themselves on bad values
        self.run_params().validate()
        self.scheme("fg-round").validate()

    def run_params(self) -> RunParams:
        t, r, c, s = self.training, self.radio, self.clustering, self.scheduling
        return RunParams(
            arch_kind=t.arch, n_hidden=t.n_hidden, epochs=t.epochs,
            batch=t.batch, lr=t.lr, eps1=c.eps1, eps2=c.eps2,
            eps1_ratio=c.eps1_ratio, eps2_ratio=c.eps2_ratio,
            total_bandwidth_hz=r.total_bandwidth_hz,
            noise_power_w=r.noise_power_w,
            backhaul_rate_bps=r.backhaul_rate_bps,
            backhaul_power_w=r.backhaul_power_w, fading=r.fading,
            p_avail=s.p_avail, baseline_budget_frac=s.baseline_budget_frac,
            theta_cloud=c.theta_cloud, cloud_recluster=c.cloud_recluster)

    def scheme(self, name: str, r_agg: int | None = None) -> SchemeConfig:
        s = self.scheduling
        return scheme_from_name(
            name, r_agg=self.run.r_agg if r_agg is None else r_agg,
            t_budget=self.run.t_budget, deadline_policy=s.deadline_policy,
            deadline_value=s.deadline_value,
            deadline_percentile=s.deadline_percentile)

    def build_population(self) -> Population:
        p = self.population
        pop = generate_population(
            seed=p.seed, n_clients=p.n_clients, n_edges=p.n_edges,
            n_dists=p.n_dists, n_features=p.n_features, n_classes=p.n_classes,
            samples_range=tuple(p.samples_range), center_scale=p.center_scale,
            noise_sigma=p.noise_sigma,
            distance_range=list(self.radio.distance_range),
            cpu_hz_range=list(self.radio.cpu_hz_range),
            tx_power_dbm_range=list(self.radio.tx_power_dbm_range),
            cycles_per_sample=self.radio.cycles_per_sample,
            capacitance=self.radio.capacitance)
        if p.imbalance_factor > 1:
            pop = make_unbalanced(pop, p.imbalance_factor)
        return pop

    def resolved(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "population": PopulationSection,
    "training": TrainingSection,
    "radio": RadioSection,
    "clustering": ClusteringSection,
    "scheduling": SchedulingSection,
    "run": RunSection,
}


def _coerce(key: str, value, template):
    """Make YAML 1.1 scalars line up with the field's type (pyyaml reads
    unsigned-exponent floats like 1.0e7 as strings)."""
    if isinstance(value, str) and isinstance(template, (int, float, type(None))):
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(key, f"expected a number, got {value!r}")
    if isinstance(value, list):
        return [_coerce(key, v, (template or [0.0])[0]) for v in value]
    if isinstance(template, bool) or isinstance(value, bool):
        return value
    if isinstance(template, int) and isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a mapping")
    cfg = ExperimentConfig()
    for key, value in doc.items():
        if key == "unsafe":
            cfg.unsafe = bool(value)
            continue
        if key not in _SECTIONS:
            raise ConfigError(key, "unknown configuration section")
        section = getattr(cfg, key)
        if not isinstance(value, dict):
            raise ConfigError(key, "section must be a mapping")
        for sub, sub_value in value.items():
            if not hasattr(section, sub):
                raise ConfigError(f"{key}.{sub}", "unknown configuration key")
            setattr(section, sub,
                    _coerce(f"{key}.{sub}", sub_value, getattr(section, sub)))
    cfg.validate()
    return cfg


def load_config(path: Path | str) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"no such file: {path}")
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return config_from_dict(doc or {})
