"""INI run configuration with sections ``[detector]``, ``[shower]``,
``[aging]``, ``[train]`` and ``[metrics]``.

Keys mirror the dataclass fields they fill. Missing keys keep their
defaults; unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ConfigError
from .showersim import DetectorGeometry, ShowerModel
from .wgan import TrainConfig


@dataclass(frozen=True)
class SimSettings:
    n_events: int = 5000
    beam_energy: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.n_events < 1:
            raise ValueError(f"n_events must be >= 1, got {self.n_events}")
        if not self.beam_energy > 0:
            raise ValueError(f"beam_energy must be positive, got {self.beam_energy}")


@dataclass(frozen=True)
class AgingSettings:
    k: float = 0.3
    a_min: float = 0.5
    shared_showers: bool = False

    def __post_init__(self):
        if not 0 <= self.k < 1:
            raise ValueError(f"k must lie in [0, 1), got {self.k}")
        if not 0 < self.a_min <= 1:
            raise ValueError(f"a_min must lie in (0, 1], got {self.a_min}")


@dataclass(frozen=True)
class MetricsSettings:
    n_bins: int = 60

    def __post_init__(self):
        if self.n_bins < 1:
            raise ValueError(f"n_bins must be >= 1, got {self.n_bins}")


@dataclass
class RunConfig:
    detector: DetectorGeometry = field(default_factory=DetectorGeometry)
    shower: ShowerModel = field(default_factory=ShowerModel)
    sim: SimSettings = field(default_factory=SimSettings)
    aging: AgingSettings = field(default_factory=AgingSettings)
    train: TrainConfig = field(default_factory=TrainConfig)
    metrics: MetricsSettings = field(default_factory=MetricsSettings)

    def with_seed(self, seed: int) -> RunConfig:
        return replace(self, sim=replace(self.sim, seed=seed), train=replace(self.train, seed=seed))

    def echo(self) -> dict:
        """Fully resolved configuration as plain data."""
        shower = {**asdict(self.shower), **asdict(self.sim)}
        train = asdict(self.train)
        train["critic_hidden"] = list(train["critic_hidden"])
        return {"detector": asdict(self.detector), "shower": shower,
                "aging": asdict(self.aging), "train": train,
                "metrics": asdict(self.metrics)}


# section name -> the dataclasses whose fields it may set
_SECTIONS = {
    "detector": ("detector",),
    "shower": ("shower", "sim"),
    "aging": ("aging",),
    "train": ("train",),
    "metrics": ("metrics",),
}


def _coerce(name, raw: str, default):
    raw = raw.strip()
    try:
        if name == "scale":
            return "auto" if raw.lower() == "auto" else float(raw)
        if isinstance(default, bool):
            return {"true": True, "yes": True, "1": True,
                    "false": False, "no": False, "0": False}[raw.lower()]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.replace("[", "").replace("]", "").split(",") if v.strip())
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"cannot parse {name} = {raw!r}") from exc
    return raw


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        updates = {attr: {} for attr in _SECTIONS[section]}
        for key, raw in parser.items(section):
            for attr in _SECTIONS[section]:
                current = getattr(cfg, attr)
                names = {f.name for f in fields(current)}
                if key in names:
                    updates[attr][key] = _coerce(key, raw, getattr(current, key))
                    break
            else:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
        for attr, values in updates.items():
            if values:
                try:
                    setattr(cfg, attr, replace(getattr(cfg, attr), **values))
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {exc}") from exc
    return cfg


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def dump_config(cfg: RunConfig) -> str:
    """Render a config back to INI text."""
    lines = []
    for section, values in cfg.echo().items():
        lines.append(f"[{section}]")
        for k, v in values.items():
            if isinstance(v, list):
                v = ", ".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)
