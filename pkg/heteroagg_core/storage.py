#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Storage interface
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import numpy as np

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Iterator, List, Optional, Tuple
from marshmallow import ValidationError

from .geometry import Aggregate, GeometryParseError, dump_geometry, parse_geometry
from .constants import PGM_MAXVAL
from .images import ImageFormatError, decode_pgm, encode_pgm, image_metadata
from .logging import Loggable
from .models import ImageMetadata, ManifestEntry, ModelParams, RenderConfig
from .render import ImageGrid
from .streams import RandomStream


class DatasetStorageError(RuntimeError):
    pass


def safe_json_serialize(obj: dict) -> bytes:
    """
    Safe serialize JSON with sorted keys
    """
    def default(o): return f"<<non-serializable: {type(o).__qualname__}>>"

    return json.dumps(
        obj,
        ensure_ascii=False,
        indent=2,
        sort_keys=True,
        default=default
    ).encode('utf-8')


def content_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class DatasetStorage(ABC, Loggable):
    """
    Base class for all dataset storage.

    Geometry and image files are content addressed; entries, manifest and
    failure log are keyed by name.
    """

    GEOMETRY_PREFIX = "geometry/"
    GEOMETRY_FORMAT = GEOMETRY_PREFIX + "{shard}/{digest}.xyz"

    IMAGES_PREFIX = "images/"
    IMAGE_FORMAT = IMAGES_PREFIX + "{shard}/{digest}.pgm"
    RAW_IMAGE_FORMAT = IMAGES_PREFIX + "{shard}/{digest}.f32"

    INPUTS_PREFIX = "inputs/"
    INPUT_FORMAT = INPUTS_PREFIX + "{entry_id}.f32"
    AUGMENTED_INPUT_FORMAT = INPUTS_PREFIX + "{entry_id}_{index:02d}.f32"

    ENTRIES_PREFIX = "entries/"
    ENTRY_FORMAT = ENTRIES_PREFIX + "{entry_id}.json"

    MANIFEST_KEY = "manifest.csv"
    FAILURES_KEY = "failures.csv"
    RUN_CONFIG_KEY = "run_config.json"

    def __init__(self):
        super().__init__()

    """
    Key-value methods
    """

    @abstractmethod
    def put_bytes(self, key: str, data: bytes) -> None:
        """
        Stores data under key, replacing it atomically.
        """
        pass

    @abstractmethod
    def get_bytes(self, key: str) -> bytes:
        """
        Returns the data stored under key.
        """
        pass

    @abstractmethod
    def exists(self, key: str) -> bool:
        pass

    @abstractmethod
    def list_keys(self, prefix: str) -> List[str]:
        """
        Returns all keys starting with prefix, sorted.
        """
        pass

    @abstractmethod
    def path(self, key: str) -> str:
        """
        Returns the location of key as shown in manifests.
        """
        pass

    def put_text(self, key: str, text: str) -> None:
        self.put_bytes(key, text.encode("utf-8"))

    def get_text(self, key: str) -> str:
        return self.get_bytes(key).decode("utf-8")

    def _store_addressed(self, key_format: str, data: bytes) -> str:
        digest = content_digest(data)
        key = key_format.format(shard=digest[:2], digest=digest)
        if not self.exists(key):
            self.put_bytes(key, data)

        return key

    """
    Geometry methods
    """

    def store_geometry(self, aggregate: Aggregate) -> str:
        """
        Stores the aggregate's text form, returns its key.
        """
        return self._store_addressed(
            self.GEOMETRY_FORMAT, dump_geometry(aggregate).encode("utf-8"))

    def get_geometry(self, key: str) -> Aggregate:
        try:
            return parse_geometry(self.get_text(key))
        except GeometryParseError as err:
            raise DatasetStorageError(f"Failed to parse geometry {key}: {err}")

    """
    Image methods
    """

    def store_image(
        self,
        grid: ImageGrid,
        cfg: RenderConfig,
        rng: Optional[RandomStream] = None,
        theta: Optional[ModelParams] = None
    ) -> Tuple[str, ImageMetadata]:
        """
        Stores the image as 16 bit PGM, and as raw floats if the render
        configuration asks for it. Returns the PGM key and the sidecar
        record.
        """
        metadata = image_metadata(grid, cfg, rng, theta)
        key = self._store_addressed(
            self.IMAGE_FORMAT, encode_pgm(grid.values, metadata.v_max))

        if cfg.write_raw:
            raw_key = self._store_addressed(
                self.RAW_IMAGE_FORMAT,
                np.asarray(grid.values, dtype="<f4").tobytes())
            metadata.raw_path = raw_key

        return key, metadata

    def get_image(self, entry: ManifestEntry) -> ImageGrid:
        """
        Loads an entry's PGM image in detector fraction units.
        """
        metadata = entry.image or self.get_entry(entry.id).image
        if metadata is None:
            raise DatasetStorageError(f"Entry {entry.id} has no image record.")

        try:
            pixels, _ = decode_pgm(self.get_bytes(entry.image_path))
        except ImageFormatError as err:
            raise DatasetStorageError(
                f"Failed to decode image {entry.image_path}: {err}")

        return ImageGrid(
            metadata.width, metadata.height, metadata.pixel_size,
            metadata.origin or [0.0, 0.0],
            pixels.astype(float) * (metadata.v_max / PGM_MAXVAL))

    def store_input(
        self,
        entry_id: str,
        values: np.ndarray,
        index: Optional[int] = None
    ) -> str:
        """
        Stores a network input as raw little endian floats. Augmented
        copies carry an index.
        """
        if index is None:
            key = self.INPUT_FORMAT.format(entry_id=entry_id)
        else:
            key = self.AUGMENTED_INPUT_FORMAT.format(entry_id=entry_id, index=index)

        self.put_bytes(key, np.asarray(values, dtype="<f4").tobytes())
        return key

    """
    Entry methods
    """

    @property
    def entry_ids(self) -> List[str]:
        """
        Returns the ids of all stored entries.
        """
        return [
            os.path.splitext(os.path.basename(key))[0]
            for key in self.list_keys(self.ENTRIES_PREFIX)]

    def has_entry(self, entry_id: str) -> bool:
        return self.exists(self.ENTRY_FORMAT.format(entry_id=entry_id))

    def store_entry(self, entry: ManifestEntry) -> None:
        self.put_bytes(
            self.ENTRY_FORMAT.format(entry_id=entry.id),
            safe_json_serialize(entry.dump()))

    def get_entry(self, entry_id: str) -> ManifestEntry:
        key = self.ENTRY_FORMAT.format(entry_id=entry_id)
        try:
            body = json.loads(self.get_text(key))
            return ManifestEntry.load(body)
        except (ValueError, ValidationError) as err:
            raise DatasetStorageError(
                f"Failed to deserialize entry {entry_id}: {err}")

    def entries(self) -> Iterator[ManifestEntry]:
        """
        Generator for all stored entries.
        """
        for entry_id in self.entry_ids:
            try:
                yield self.get_entry(entry_id)
            except DatasetStorageError as err:
                self.logger.error(err)
                continue

    """
    Run records
    """

    def store_run_config(self, config: dict) -> None:
        self.put_bytes(self.RUN_CONFIG_KEY, safe_json_serialize(config))

    def get_run_config(self) -> dict:
        return json.loads(self.get_text(self.RUN_CONFIG_KEY))


class LocalDatasetStorage(DatasetStorage):
    """
    Storage implementation for a local directory.
    """

    def __init__(self, root) -> None:
        super().__init__()
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def __repr__(self) -> str:
        return f"LocalDatasetStorage({str(self.root)!r})"

    def _file(self, key: str) -> Path:
        return self.root / key

    def put_bytes(self, key: str, data: bytes) -> None:
        target = self._file(key)
        target.parent.mkdir(parents=True, exist_ok=True)

        fd, tmp_name = tempfile.mkstemp(
            dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp_name, target)
        except OSError as err:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise DatasetStorageError(f"Failed to write {key}: {err}")

    def get_bytes(self, key: str) -> bytes:
        try:
            return self._file(key).read_bytes()
        except OSError as err:
            raise DatasetStorageError(f"Failed to read {key}: {err}")

    def exists(self, key: str) -> bool:
        return self._file(key).is_file()

    def list_keys(self, prefix: str) -> List[str]:
        base = self._file(prefix)
        if not base.is_dir():
            return []

        return sorted(
            p.relative_to(self.root).as_posix() for p in base.rglob("*")
            if p.is_file() and not p.name.startswith("."))

    def path(self, key: str) -> str:
        return key
