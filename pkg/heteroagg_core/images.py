#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Image files: 16 bit PGM, raw float dumps and sidecar metadata.
"""
import hashlib
import json
import numpy as np

from typing import Optional, Tuple

from .constants import PGM_MAXVAL
from .models import ImageMetadata, ModelParams, RenderConfig
from .render import ImageGrid
from .streams import RandomStream


class ImageFormatError(ValueError):
    pass


def config_hash(cfg: RenderConfig) -> str:
    """
    Returns the SHA-256 of the canonical JSON of the render configuration.
    """
    canonical = json.dumps(cfg.dump(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def encode_pgm(values: np.ndarray, v_max: float) -> bytes:
    """
    Maps [0, v_max] affinely onto [0, 65535] and encodes a binary PGM with
    big endian samples.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ImageFormatError(f"Expected a 2D image, got shape {values.shape}.")
    if not v_max > 0:
        raise ImageFormatError(f"v_max must be positive, got {v_max}.")

    samples = np.clip(np.rint(values / v_max * PGM_MAXVAL), 0, PGM_MAXVAL)
    height, width = values.shape
    header = f"P5\n{width} {height}\n{PGM_MAXVAL}\n".encode("ascii")
    return header + samples.astype(">u2").tobytes()


def decode_pgm(data: bytes) -> Tuple[np.ndarray, int]:
    """
    Decodes a binary PGM, returns the samples and maxval.
    """
    tokens = []
    position = 0
    while len(tokens) < 4:
        while position < len(data) and data[position:position + 1].isspace():
            position += 1
        if data[position:position + 1] == b"#":
            position = data.find(b"\n", position)
            if position < 0:
                raise ImageFormatError("Truncated PGM header.")
            continue

        end = position
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        if end == position:
            raise ImageFormatError("Truncated PGM header.")

        tokens.append(data[position:end])
        position = end

    if tokens[0] != b"P5":
        raise ImageFormatError(f"Unsupported PGM magic {tokens[0]!r}.")

    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as err:
        raise ImageFormatError(f"Invalid PGM header: {err}")

    dtype = ">u2" if maxval > 255 else "u1"
    body = data[position + 1:]
    expected = width * height * np.dtype(dtype).itemsize
    if len(body) < expected:
        raise ImageFormatError(
            f"PGM body holds {len(body)} bytes, expected {expected}.")

    samples = np.frombuffer(body[:expected], dtype=dtype).reshape(height, width)
    return samples.astype(np.uint16), maxval


def write_pgm(path, values: np.ndarray, v_max: float) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(values, v_max))


def read_pgm(path) -> Tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def write_raw(path, values: np.ndarray) -> None:
    """
    Dumps values row major as little endian 32 bit floats.
    """
    np.asarray(values, dtype="<f4").tofile(path)


def read_raw(path, width: int, height: int) -> np.ndarray:
    return np.fromfile(path, dtype="<f4").reshape(height, width)


def image_v_max(values: np.ndarray) -> float:
    v_max = float(np.max(values)) if np.size(values) else 0.0
    return v_max if v_max > 0 else 1.0


def image_metadata(
    grid: ImageGrid,
    cfg: RenderConfig,
    rng: Optional[RandomStream] = None,
    theta: Optional[ModelParams] = None,
    v_max: Optional[float] = None
) -> ImageMetadata:
    return ImageMetadata(
        width=grid.width,
        height=grid.height,
        pixel_size=grid.pixel_size,
        v_max=v_max if v_max is not None else image_v_max(grid.values),
        config_hash=config_hash(cfg),
        seed=rng.seed if rng is not None else None,
        spawn_key=list(rng.spawn_key) if rng is not None else [],
        theta=theta,
        origin=[float(v) for v in grid.origin],
        variants=list(grid.variants))


def write_image(
    path,
    grid: ImageGrid,
    cfg: RenderConfig,
    rng: Optional[RandomStream] = None,
    theta: Optional[ModelParams] = None,
    raw_path=None
) -> ImageMetadata:
    """
    Writes the image as PGM (and optionally raw floats) and returns its
    sidecar record.
    """
    metadata = image_metadata(grid, cfg, rng, theta)
    write_pgm(path, grid.values, metadata.v_max)
    if raw_path is not None:
        write_raw(raw_path, grid.values)
        metadata.raw_path = str(raw_path)

    return metadata


def write_metadata(path, metadata: ImageMetadata) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metadata.dump(), fh, sort_keys=True, indent=2)


def read_metadata(path) -> ImageMetadata:
    with open(path, "r", encoding="utf-8") as fh:
        return ImageMetadata.load(json.load(fh))
