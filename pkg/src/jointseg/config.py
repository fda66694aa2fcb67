"""Training configuration and its flat ``key = value`` file format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .augment import IntensityRanges, SpatialAugConfig
from .errors import ConfigError
from .model.unet import NetConfig


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 300
    seed: int = 0
    net: NetConfig = field(default_factory=NetConfig)
    spatial: SpatialAugConfig = field(default_factory=SpatialAugConfig)
    intensity: IntensityRanges = field(default_factory=IntensityRanges)
    randconv_prob: float = 1.0
    learning_rate: float = 5e-5
    ema_decay: float = 0.999
    target_spacing: float = 1.5
    train_crop: int = 128
    infer_crop: int = 192
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not 0.0 <= self.randconv_prob <= 1.0:
            raise ConfigError("randconv_prob must lie in [0, 1]")
        if self.learning_rate <= 0 or not 0.0 <= self.ema_decay < 1.0:
            raise ConfigError("learning_rate must be > 0 and ema_decay in [0, 1)")
        if self.target_spacing <= 0 or self.train_crop < 1 or self.infer_crop < 1:
            raise ConfigError("spacing and crop sizes must be positive")
        if self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be >= 0")


# flat key -> (section, attribute); pairs of keys fill a (lo, hi) tuple
_NET = {f.name: ("net", f.name) for f in dataclasses.fields(NetConfig)}
_SPATIAL = {
    "max_translation": ("spatial", "max_translation"),
    "max_rotation": ("spatial", "max_rotation"),
    "scale_min": ("spatial", "scale_range", 0),
    "scale_max": ("spatial", "scale_range", 1),
    "elastic_grid_nodes": ("spatial", "elastic_grid_nodes"),
    "max_elastic": ("spatial", "max_elastic"),
}
_INTENSITY = {
    "intensity_shift": ("intensity", "shift"),
    "ct_scale_min": ("intensity", "ct_scale", 0),
    "ct_scale_max": ("intensity", "ct_scale", 1),
    "mr_scale_min": ("intensity", "mr_scale", 0),
    "mr_scale_max": ("intensity", "mr_scale", 1),
    "label_shift": ("intensity", "label_shift"),
    "label_scale_min": ("intensity", "label_scale", 0),
    "label_scale_max": ("intensity", "label_scale", 1),
}
_TOP = {
    f.name: (None, f.name)
    for f in dataclasses.fields(TrainConfig)
    if f.name not in ("net", "spatial", "intensity")
}
KEYS = {**_TOP, **_NET, **_SPATIAL, **_INTENSITY}
_INT_KEYS = {"iterations", "seed", "levels", "filters", "classes", "train_crop", "infer_crop",
             "checkpoint_every", "elastic_grid_nodes"}


def _convert(key, text):
    try:
        if key in _INT_KEYS:
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {text!r}") from None


def to_flat(cfg: TrainConfig) -> dict[str, object]:
    flat = {}
    for key, (section, attr, *idx) in KEYS.items():
        obj = cfg if section is None else getattr(cfg, section)
        value = getattr(obj, attr)
        flat[key] = value[idx[0]] if idx else value
    return flat


def from_flat(values: dict[str, object], base: TrainConfig | None = None) -> TrainConfig:
    """Build a config from flat keys, starting from ``base`` (defaults if omitted)."""
    flat = to_flat(base or TrainConfig())
    for key, value in values.items():
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        flat[key] = _convert(key, value) if isinstance(value, str) else value

    sections = {"net": {}, "spatial": {}, "intensity": {}}
    top = {}
    for key, (section, attr, *idx) in KEYS.items():
        target = top if section is None else sections[section]
        if idx:
            pair = list(target.get(attr, (None, None)))
            pair[idx[0]] = flat[key]
            target[attr] = tuple(pair)
        else:
            target[attr] = flat[key]
    return TrainConfig(
        net=NetConfig(**sections["net"]),
        spatial=SpatialAugConfig(**sections["spatial"]),
        intensity=IntensityRanges(**sections["intensity"]),
        **top,
    )


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        values[key.strip()] = value.strip()
    return values


def load_config(path_or_name, overrides: dict | None = None) -> TrainConfig:
    """Load a config file; ``desk``/``paper`` (or ``desk.cfg``) name the shipped ones
    when no such file exists on disk."""
    path = Path(path_or_name)
    if path.is_file():
        text = path.read_text()
    else:
        name = path.name if path.suffix == ".cfg" else f"{path.name}.cfg"
        try:
            text = resources.files("jointseg.configs").joinpath(name).read_text()
        except FileNotFoundError:
            raise ConfigError(f"config {path_or_name!r} not found") from None
    values = parse_config_text(text)
    values.update(overrides or {})
    return from_flat(values)


def format_config(cfg: TrainConfig) -> str:
    return "".join(f"{k} = {v!r}\n" for k, v in to_flat(cfg).items())
