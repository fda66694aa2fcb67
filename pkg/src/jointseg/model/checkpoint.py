"""Checkpoint files: a text header followed by raw little-endian float32 tensors.

Header lines are ``key = value``. Network configuration keys come first,
then free-form metadata, then one ``tensor = <name> <d0> <d1> ...`` line per
payload tensor in payload order, closed by ``EndHeader``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ..errors import ConfigError, FormatError
from .optim import AdamState
from .unet import ModelParams, NetConfig, param_shapes

MAGIC = "JointSegCheckpoint = 1"
_F32 = np.dtype("<f4")
_GROUPS = ("param", "ema", "adam_m", "adam_v")


@dataclass
class Checkpoint:
    params: ModelParams
    adam: AdamState
    meta: dict[str, str] = field(default_factory=dict)


def save_checkpoint(path, params: ModelParams, adam: AdamState | None = None, meta=None) -> None:
    adam = adam or AdamState.zeros_like(params)
    if not adam.m:
        adam = AdamState.zeros_like(params)
    lines = [MAGIC]
    for f in fields(NetConfig):
        lines.append(f"{f.name} = {getattr(params.config, f.name)!r}")
    lines.append(f"adam_step = {adam.step}")
    for k, v in (meta or {}).items():
        if "\n" in str(v) or "=" in str(k):
            raise ValueError(f"invalid metadata entry {k!r}")
        lines.append(f"meta.{k} = {v}")
    blobs = []
    sources = {"param": params.weights, "ema": params.ema, "adam_m": adam.m, "adam_v": adam.v}
    for group in _GROUPS:
        for name, arr in sources[group].items():
            lines.append(f"tensor = {group}/{name} " + " ".join(str(d) for d in arr.shape))
            blobs.append(np.ascontiguousarray(arr, dtype=_F32).tobytes())
    lines.append("EndHeader")
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))
        for b in blobs:
            f.write(b)


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    marker = b"\nEndHeader\n"
    end = raw.find(marker)
    if not raw.startswith(MAGIC.encode()) or end < 0:
        raise FormatError("JointSegCheckpoint", f"{path} is not a checkpoint file")
    header = raw[:end].decode("ascii").splitlines()[1:]
    payload = memoryview(raw)[end + len(marker):]

    cfg_kwargs, meta, tensors, step = {}, {}, [], 0
    cfg_names = {f.name for f in fields(NetConfig)}
    for line in header:
        key, _, value = (s.strip() for s in line.partition("="))
        if key in cfg_names:
            cfg_kwargs[key] = _parse_value(value)
        elif key == "adam_step":
            step = int(value)
        elif key.startswith("meta."):
            meta[key[5:]] = value
        elif key == "tensor":
            name, *dims = value.split()
            tensors.append((name, tuple(int(d) for d in dims)))
        else:
            raise FormatError(key, "unknown checkpoint header key")
    missing = cfg_names - cfg_kwargs.keys()
    if missing:
        raise FormatError(sorted(missing)[0])
    cfg = NetConfig(**cfg_kwargs)

    groups = {g: {} for g in _GROUPS}
    offset = 0
    for full, shape in tensors:
        group, name = full.split("/", 1)
        n = int(np.prod(shape)) * _F32.itemsize
        if offset + n > len(payload):
            raise FormatError("tensor", f"payload truncated at {full}")
        groups[group][name] = np.frombuffer(payload[offset:offset + n], dtype=_F32).reshape(shape).astype(np.float32)
        offset += n
    if offset != len(payload):
        raise FormatError("tensor", "trailing bytes after last tensor")

    expected = param_shapes(cfg)
    for group in _GROUPS:
        got = {k: v.shape for k, v in groups[group].items()}
        if got != expected:
            raise ConfigError(f"checkpoint {path}: {group} tensors do not match the network configuration")
    params = ModelParams(cfg, groups["param"], groups["ema"])
    return Checkpoint(params, AdamState(groups["adam_m"], groups["adam_v"], step), meta)
