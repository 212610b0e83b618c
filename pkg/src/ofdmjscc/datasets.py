"""Dataset ingestion: seeded synthetic patches, PNG directories, and raw
RGB directories. Images come back as float arrays in [0, 1], shaped
[count, channels, height, width], in a deterministic order.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

__all__ = ["synthetic_patches", "load_png_dir", "load_raw_rgb_dir",
           "load_dataset", "parse_synthetic_spec"]

_WAVES = 4


def synthetic_patches(seed: int, count: int, size: int,
                      channels: int = 3) -> np.ndarray:
    """Smooth random fields: per-channel sums of seeded 2D sinusoids."""
    if count < 1 or size < 1:
        raise ValueError(f"bad synthetic spec: count={count}, size={size}")
    grid = np.arange(size) / size
    yy, xx = np.meshgrid(grid, grid, indexing="ij")
    out = np.empty((count, channels, size, size))
    for idx in range(count):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), idx]))
        for c in range(channels):
            field = np.zeros((size, size))
            for _ in range(_WAVES):
                freq = rng.uniform(0.5, 3.0)
                theta = rng.uniform(0.0, 2.0 * np.pi)
                phase = rng.uniform(0.0, 2.0 * np.pi)
                amp = rng.uniform(0.3, 1.0)
                field += amp * np.sin(
                    2.0 * np.pi * freq * (np.cos(theta) * xx + np.sin(theta) * yy)
                    + phase)
            lo, hi = field.min(), field.max()
            out[idx, c] = (field - lo) / (hi - lo) if hi > lo else 0.5
    return out


def _image_to_array(img: Image.Image, path: Path) -> np.ndarray:
    if img.mode == "L":
        arr = np.asarray(img, dtype=np.float64)[None]
    elif img.mode == "RGB":
        arr = np.asarray(img, dtype=np.float64).transpose(2, 0, 1)
    else:
        raise ValueError(f"{path}: unsupported image mode '{img.mode}' "
                         f"(expected 8-bit gray or RGB)")
    return arr / 255.0


def load_png_dir(path) -> np.ndarray:
    path = Path(path)
    files = sorted(path.glob("*.png"))
    if not files:
        raise FileNotFoundError(f"no .png files in {path}")
    images = []
    for file in files:
        try:
            with Image.open(file) as img:
                img.load()
                arr = _image_to_array(img, file)
        except (OSError, SyntaxError) as exc:
            raise ValueError(f"malformed image {file}: {exc}") from exc
        images.append(arr)
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise ValueError(f"{path}: images have mixed shapes {sorted(shapes)}")
    return np.stack(images)


def load_raw_rgb_dir(path, size: int) -> np.ndarray:
    """Raw interleaved 8-bit RGB files (*.rgb), size x size pixels each."""
    path = Path(path)
    files = sorted(path.glob("*.rgb"))
    if not files:
        raise FileNotFoundError(f"no .rgb files in {path}")
    expected = size * size * 3
    images = []
    for file in files:
        raw = file.read_bytes()
        if len(raw) != expected:
            raise ValueError(
                f"{file}: expected {expected} bytes for {size}x{size} RGB, "
                f"got {len(raw)}")
        arr = np.frombuffer(raw, dtype=np.uint8).reshape(size, size, 3)
        images.append(arr.transpose(2, 0, 1) / 255.0)
    return np.stack(images)


def parse_synthetic_spec(spec: str) -> dict:
    """``synthetic:seed=7,count=10,size=32`` -> keyword dict."""
    body = spec.split(":", 1)[1] if ":" in spec else ""
    kwargs = {}
    for part in filter(None, body.split(",")):
        key, _, value = part.partition("=")
        if key not in ("seed", "count", "size", "channels"):
            raise ValueError(f"bad synthetic spec field '{key}' in {spec!r}")
        kwargs[key] = int(value)
    for required in ("seed", "count", "size"):
        if required not in kwargs:
            raise ValueError(f"synthetic spec {spec!r} missing '{required}'")
    return kwargs


def load_dataset(spec: str, image_size: int | None = None) -> np.ndarray:
    """Load by spec string: synthetic:..., or a directory of .png / .rgb."""
    if spec.startswith("synthetic:"):
        return synthetic_patches(**parse_synthetic_spec(spec))
    path = Path(spec)
    if not path.is_dir():
        raise FileNotFoundError(f"dataset path is not a directory: {spec}")
    if any(path.glob("*.png")):
        return load_png_dir(path)
    if any(path.glob("*.rgb")):
        if image_size is None:
            raise ValueError(f"{spec}: raw RGB directory needs image_size")
        return load_raw_rgb_dir(path, image_size)
    raise FileNotFoundError(f"no .png or .rgb files in {spec}")
