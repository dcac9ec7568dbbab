"""JSON run configuration.

Each top-level section maps onto one dataclass and uses its exact field
names; unknown sections or fields are rejected.  Example::

    {
      "deployment": {"area_width_km": 5.5, "area_height_km": 4.6},
      "sim": {"lambdas": [0.1, 1.0], "seed": 7},
      "link": {"l_a_db": 3.0},
      "codebook": {"rows": 5, "cols": 5, "n_partitions": 9}
    }
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import typing
from dataclasses import dataclass, field

from .antenna import UraGeometry
from .channel import MultipathConfig
from .codebook import SamplingGrid, SteeringGrid, gain_loss_eps
from .ephemeris import GroundStation
from .linkbudget import LinkParams
from .scenario import ChannelModels, Deployment, SimConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CodebookSpec:
    rows: int = 5
    cols: int = 5
    spacing_wavelengths: float = 0.5
    n_partitions: int = 9
    aux_partitions: int | None = None
    loss_db: float = 2.5
    eps: float | None = None
    el_start_deg: float = 0.0
    el_stop_deg: float = -90.0
    el_step_deg: float = 15.0
    az_start_deg: float = -60.0
    az_stop_deg: float = 60.0
    az_step_deg: float = 15.0
    sample_el_step_deg: float = 2.0
    sample_az_step_deg: float = 5.0
    tensor_path: str | None = None

    def geometry(self) -> UraGeometry:
        return UraGeometry(self.rows, self.cols, self.spacing_wavelengths)

    def epsilon(self) -> float:
        return self.eps if self.eps is not None else gain_loss_eps(self.rows * self.cols, self.loss_db)

    def steering(self) -> SteeringGrid:
        return SteeringGrid(self.el_start_deg, self.el_stop_deg, self.el_step_deg,
                            self.az_start_deg, self.az_stop_deg, self.az_step_deg)

    def sampling(self) -> SamplingGrid:
        return SamplingGrid(self.sample_el_step_deg, self.sample_az_step_deg)


@dataclass(frozen=True)
class RunConfig:
    deployment: Deployment = Deployment.desk()
    sim: SimConfig = SimConfig()
    link: LinkParams = LinkParams(l_a_db=3.0)
    terrestrial_channel: MultipathConfig = ChannelModels().terrestrial
    satellite_channel: MultipathConfig = ChannelModels().satellite
    station: GroundStation = GroundStation()
    codebook: CodebookSpec = CodebookSpec()
    tle_path: str | None = None
    base_dir: str = field(default=".", compare=False)

    def channels(self) -> ChannelModels:
        return ChannelModels(self.terrestrial_channel, self.satellite_channel)

    def resolve(self, path: str | None) -> str | None:
        if path is None or os.path.isabs(path):
            return path
        return os.path.join(self.base_dir, path)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "base_dir":
                continue
            v = getattr(self, f.name)
            out[f.name] = dataclasses.asdict(v) if dataclasses.is_dataclass(v) else v
        return out


def _coerce(value, hint):
    origin = typing.get_origin(hint)
    if origin is tuple and isinstance(value, list):
        return tuple(value)
    if hint is float and isinstance(value, (int, str)) and not isinstance(value, bool):
        return float(value) if not isinstance(value, str) else _float_word(value)
    return value


def _float_word(text: str) -> float:
    words = {"inf": math.inf, "+inf": math.inf, "-inf": -math.inf}
    if text.lower() in words:
        return words[text.lower()]
    raise ConfigError(f"expected a number, got {text!r}")


def _check_fields(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {where!r} must be an object")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown field(s) in {where!r}: {', '.join(unknown)}")


def build_dataclass(cls, data: dict, where: str):
    _check_fields(cls, data, where)
    hints = typing.get_type_hints(cls)
    kwargs = {k: _coerce(v, hints.get(k)) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where!r}: {exc}") from exc


_SECTIONS = {
    "deployment": Deployment,
    "sim": SimConfig,
    "link": LinkParams,
    "terrestrial_channel": MultipathConfig,
    "satellite_channel": MultipathConfig,
    "station": GroundStation,
    "codebook": CodebookSpec,
}


def config_from_dict(data: dict, base_dir: str = ".") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(data) - set(_SECTIONS) - {"tle_path"})
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    defaults = RunConfig()
    kwargs = {"base_dir": base_dir, "tle_path": data.get("tle_path")}
    for name, cls in _SECTIONS.items():
        if name in data:
            _check_fields(cls, data[name], name)
            base = dataclasses.asdict(getattr(defaults, name))
            base.update(data[name])
            kwargs[name] = build_dataclass(cls, base, name)
    return RunConfig(**kwargs)


def load_config(path: str) -> RunConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data, os.path.dirname(os.path.abspath(path)))
