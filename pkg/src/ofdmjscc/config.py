"""Flat key=value experiment configuration with named sections.

The on-disk format is deliberately minimal: ``[section]`` headers and one
``key = value`` pair per line, no nesting, no comments. Parsing a canonical
file and re-serializing it reproduces the bytes exactly, which keeps config
provenance diffable.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

__all__ = ["ExperimentConfig", "parse_config", "serialize_config",
           "load_config", "save_config", "validate_paths"]


@dataclass
class ExperimentConfig:
    # [ofdm]
    n_fft: int = 64
    n_cp: int = 16
    n_pilot: int = 1
    n_data: int = 6
    pilot_seed: int = 4053
    # [channel]
    paths: int = 8
    decay: float = 4.0
    snr_db: float = 15.0
    # [model]
    mode: str = "ofdm-ce-eq-subnets"
    channels: int = 12
    downsamples: int = 2
    base_width: int = 16
    subnet_width: int = 16
    lambda_c: float = 0.5
    lambda_g: float = 0.0
    clip_ratio: float | None = None
    # [train]
    epochs: int = 12
    batch_size: int = 32
    learning_rate: float = 5e-4
    seed: int = 1
    # [data]
    dataset: str = "synthetic:seed=3,count=1024,size=32"
    val_dataset: str = "synthetic:seed=11,count=128,size=32"
    output_dir: str = "runs/out"
    eval_repeats: int = 5


_SCHEMA: dict[str, tuple[str, ...]] = {
    "ofdm": ("n_fft", "n_cp", "n_pilot", "n_data", "pilot_seed"),
    "channel": ("paths", "decay", "snr_db"),
    "model": ("mode", "channels", "downsamples", "base_width", "subnet_width",
              "lambda_c", "lambda_g", "clip_ratio"),
    "train": ("epochs", "batch_size", "learning_rate", "seed"),
    "data": ("dataset", "val_dataset", "output_dir", "eval_repeats"),
}

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _format_value(name: str, value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(name: str, raw: str):
    ftype = _FIELD_TYPES[name]
    if ftype in ("float | None",):
        if raw == "none":
            return None
        return float(raw)
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return raw


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_format_value(key, getattr(cfg, key))}")
        lines.append("")
    return "\n".join(lines)


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            if section not in _SCHEMA:
                raise ValueError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if section is None:
            raise ValueError(f"line {lineno}: key '{key}' outside any section")
        if key not in _SCHEMA[section]:
            raise ValueError(f"line {lineno}: unknown key '{key}' in [{section}]")
        setattr(cfg, key, _parse_value(key, raw))
    return cfg


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def save_config(cfg: ExperimentConfig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_config(cfg))


def validate_paths(cfg: ExperimentConfig) -> None:
    """Referenced dataset paths must exist (synthetic specs are exempt)."""
    for name in ("dataset", "val_dataset"):
        value = getattr(cfg, name)
        if not value.startswith("synthetic:") and not Path(value).exists():
            raise FileNotFoundError(f"{name} path does not exist: {value}")
