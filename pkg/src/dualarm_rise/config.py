"""Scenario configuration: schema, validation, loading and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controllers import ControllerGains, GainCertificate
from .kinematics import ArmGeometry
from .plant import AttitudeSource, DisturbanceProfile, PlantParams
from .trajectories import DeliveryConfig, JointSchedule

SCHEMA_VERSION = 1
SCENARIOS = ("figure-eight", "spiral", "delivery", "hover")
CONTROLLERS = ("dnn-rise", "baseline")


class ConfigError(ValueError):
    pass


@dataclass
class DnnConfig:
    layer_widths: tuple[int, ...] = (3, 4, 4, 4, 3)
    gamma: float | tuple[float, ...] = 2e6
    frobenius_bound: float = 100.0
    init_range: float = 0.1
    activation: str = "sigmoid"
    adapt: bool = True


@dataclass
class NoiseConfig:
    sigma_p: float = 0.0
    sigma_v: float = 0.0


@dataclass
class SimConfig:
    scenario: str = "figure-eight"
    controller: str = "dnn-rise"
    dt: float = 0.001
    duration: float = 40.0
    seed: int = 0
    plant: PlantParams = field(default_factory=PlantParams)
    arm: ArmGeometry = field(default_factory=ArmGeometry)
    gains: ControllerGains = field(default_factory=ControllerGains)
    dnn: DnnConfig = field(default_factory=DnnConfig)
    sign_mode: str = "sgn"
    sign_eps: float = 0.01
    disturbances: list[DisturbanceProfile] = field(default_factory=list)
    attitude: AttitudeSource = field(default_factory=AttitudeSource)
    joints: JointSchedule = field(default_factory=JointSchedule)
    delivery: DeliveryConfig = field(default_factory=DeliveryConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    initial_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    metrics_warmup: float = 10.0
    divergence_bound: float = 100.0
    control_decimation: int = 1
    u_max: float | None = None
    certificate: GainCertificate = field(default_factory=GainCertificate)
    output_dir: str = "out"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"unknown controller {self.controller!r}")
        if not 0 < self.dt <= 0.01:
            raise ConfigError(f"dt must lie in (0, 0.01], got {self.dt}")
        if not self.duration >= 1.0:
            raise ConfigError(f"duration must be at least 1 s, got {self.duration}")
        if self.sign_mode not in ("sgn", "tanh") or self.sign_eps <= 0:
            raise ConfigError("sign_mode must be 'sgn' or 'tanh' with positive sign_eps")
        if self.control_decimation < 1:
            raise ConfigError("control_decimation must be >= 1")
        if self.divergence_bound <= 0 or self.metrics_warmup < 0:
            raise ConfigError("divergence_bound must be positive and metrics_warmup non-negative")
        if self.noise.sigma_p < 0 or self.noise.sigma_v < 0:
            raise ConfigError("noise sigmas must be non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "scenario": self.scenario,
            "controller": self.controller,
            "dt": self.dt,
            "duration": self.duration,
            "seed": self.seed,
            "plant": dataclasses.asdict(self.plant),
            "arm": self.arm.to_dict(),
            "gains": self.gains.to_dict(),
            "dnn": dataclasses.asdict(self.dnn),
            "sign_mode": self.sign_mode,
            "sign_eps": self.sign_eps,
            "disturbances": [d.to_dict() for d in self.disturbances],
            "attitude": self.attitude.to_dict(),
            "joints": self.joints.to_dict(),
            "delivery": dataclasses.asdict(self.delivery),
            "noise": dataclasses.asdict(self.noise),
            "initial_offset": list(self.initial_offset),
            "metrics_warmup": self.metrics_warmup,
            "divergence_bound": self.divergence_bound,
            "control_decimation": self.control_decimation,
            "u_max": self.u_max,
            "certificate": dataclasses.asdict(self.certificate),
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "plant" in d:
                d["plant"] = PlantParams(**_tuples(d["plant"]))
            if "arm" in d:
                d["arm"] = ArmGeometry.from_dict(d["arm"])
            if "gains" in d:
                d["gains"] = ControllerGains.from_dict(d["gains"])
            if "dnn" in d:
                d["dnn"] = DnnConfig(**_tuples(d["dnn"]))
            if "disturbances" in d:
                d["disturbances"] = [DisturbanceProfile.from_dict(x) for x in d["disturbances"]]
            if "attitude" in d:
                d["attitude"] = AttitudeSource.from_dict(d["attitude"])
            if "joints" in d:
                d["joints"] = JointSchedule.from_dict(d["joints"])
            if "delivery" in d:
                d["delivery"] = DeliveryConfig(**_tuples(d["delivery"]))
            if "noise" in d:
                d["noise"] = NoiseConfig(**d["noise"])
            if "certificate" in d:
                d["certificate"] = GainCertificate(**d["certificate"])
            if "initial_offset" in d:
                d["initial_offset"] = tuple(d["initial_offset"])
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _tuples(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def load_config(path) -> SimConfig:
    """Read a JSON or YAML config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        if path.suffix in (".yaml", ".yml"):
            import yaml
            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
    except Exception as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return SimConfig.from_dict(data)


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def canonical_json(config: SimConfig) -> str:
    return json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"), default=_default)


def config_hash(config: SimConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def scenario_preset(name: str, **overrides) -> SimConfig:
    """Configs mirroring the three experiments plus a benign hover check."""
    if name in ("figure-eight", "spiral"):
        cfg = SimConfig(scenario=name, duration=60.0,
                        disturbances=[DisturbanceProfile("sinusoid", amplitude=(1.0, 1.0, 1.0), frequency=0.1)])
    elif name == "delivery":
        cfg = SimConfig(scenario="delivery", duration=20.0,
                        joints=JointSchedule(mode="delivery"),
                        disturbances=[DisturbanceProfile("payload-event", event_times=(3.0, 15.0))])
    elif name == "hover":
        cfg = SimConfig(scenario="hover", duration=10.0, joints=JointSchedule.frozen(),
                        attitude=AttitudeSource(mode="zero"))
    else:
        raise ConfigError(f"unknown scenario {name!r}")
    return cfg.replace(**overrides) if overrides else cfg
