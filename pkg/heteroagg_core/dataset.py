#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Dataset sweeps, manifests, train/eval splits and batches.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import numpy as np

from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Dict, Iterator, List, Optional, Tuple

from .aggregation import AggregateGenerator, AggregationError
from .constants import (
    Label,
    Split,
    DEFAULT_MAX_SHIFT_PX,
    DEFAULT_MIN_PER_CONFIG,
    DEFAULT_QUANTIZE_LEVELS,
    DEFAULT_TRAIN_FRACTION
)
from .descriptors import batch_average_cluster_size, descriptor_report
from .geometry import Aggregate
from .intensity import IntensityModel
from .logging import Loggable
from .models import (
    DESCRIPTOR_COLUMNS,
    DescriptorReport,
    GrowthConfig,
    ManifestEntry,
    ModelParams,
    RadiusDistribution,
    RenderConfig,
    SweepSpec,
    format_float
)
from .preprocessing import augment, invert_nonbackground, preprocess
from .render import FieldOfViewOverflow, StemRenderer
from .storage import DatasetStorage, DatasetStorageError
from .streams import RandomStream

_logger = logging.getLogger(__name__)

# Spawn keys of the master stream.
DF_CHOICE_STREAM = 0
ENTRY_SEED_STREAM = 1

MANIFEST_COLUMNS = [
    "id",
    "theta_df",
    "theta_rho",
    "theta_0",
    "theta_1",
    "seed",
    "n_particles",
    "geometry_path",
    "image_path",
    "split",
] + [c for c in DESCRIPTOR_COLUMNS if c != "n_particles"]

FAILURE_COLUMNS = [
    "id",
    "theta_df",
    "theta_rho",
    "theta_0",
    "theta_1",
    "seed",
    "error",
    "message",
]

"""
Exceptions
"""


class SplitInfeasible(ValueError):
    pass


class InsufficientEntries(ValueError):
    pass


"""
Manifest
"""


@dataclass
class Manifest:
    """
    Index of the (aggregate, image, theta) triplets of a dataset.
    """
    entries: List[ManifestEntry] = field(default_factory=list)
    min_per_config: int = DEFAULT_MIN_PER_CONFIG

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def by_config(self) -> Dict[Tuple, List[ManifestEntry]]:
        """
        Groups entries by theta, in order of first appearance.
        """
        groups = OrderedDict()
        for entry in self.entries:
            groups.setdefault(entry.theta.key, []).append(entry)

        return groups

    def in_split(self, split: Split) -> Manifest:
        split = Split(split)
        return Manifest(
            [e for e in self.entries if e.split == split], self.min_per_config)

    @staticmethod
    def csv_row(entry: ManifestEntry) -> List[str]:
        theta = entry.theta
        descriptors = dict(zip(DESCRIPTOR_COLUMNS, entry.descriptors.csv_row()))
        row = [
            entry.id,
            format_float(theta.theta_df),
            format_float(theta.theta_rho),
            str(theta.theta_0),
            str(theta.theta_1),
            str(entry.seed),
            descriptors["n_particles"],
            entry.geometry_path,
            entry.image_path,
            entry.split.value if entry.split is not None else "",
        ]
        return row + [descriptors[c] for c in MANIFEST_COLUMNS[len(row):]]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for entry in self.entries:
            writer.writerow(self.csv_row(entry))

        return buffer.getvalue()

    @classmethod
    def from_csv(
        cls,
        text: str,
        min_per_config: int = DEFAULT_MIN_PER_CONFIG
    ) -> Manifest:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != MANIFEST_COLUMNS:
            raise DatasetStorageError(
                f"Unexpected manifest columns {reader.fieldnames}.")

        entries = []
        for row in reader:
            split = row["split"].strip()
            entries.append(ManifestEntry(
                id=row["id"],
                theta=ModelParams(
                    theta_df=float(row["theta_df"]),
                    theta_rho=float(row["theta_rho"]),
                    theta_0=int(row["theta_0"]),
                    theta_1=int(row["theta_1"])),
                seed=int(row["seed"]),
                geometry_path=row["geometry_path"],
                image_path=row["image_path"],
                descriptors=DescriptorReport.from_csv_row(row),
                split=Split(split) if split else None))

        return cls(entries, min_per_config)

    def store(self, storage: DatasetStorage) -> None:
        storage.put_text(storage.MANIFEST_KEY, self.to_csv())

    @classmethod
    def load(
        cls,
        storage: DatasetStorage,
        min_per_config: int = DEFAULT_MIN_PER_CONFIG
    ) -> Manifest:
        return cls.from_csv(
            storage.get_text(storage.MANIFEST_KEY), min_per_config)


@dataclass
class Batch:
    """
    Entries generated from one identical theta.
    """
    theta: ModelParams
    members: List[ManifestEntry]

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class BatchEstimate:
    """
    Batch means of per-aggregate descriptors next to the preset theta.
    """
    theta: ModelParams
    mixing_ratio: float
    fractal_dim: Optional[float]
    avg_cluster_size_label0: Optional[float]
    avg_cluster_size_label1: Optional[float]
    z_hetero: float
    z_total: float


"""
Sweep
"""


def sweep_configs(spec: SweepSpec, rng: RandomStream) -> List[ModelParams]:
    """
    Returns the theta configurations of the sweep: for every
    (rho, c0, c1) triple, df_choices_per_triple distinct fractal dimensions
    drawn from the triple's own child stream.
    """
    spec.check()
    stream = rng.child(DF_CHOICE_STREAM)
    df_values = sorted(set(spec.df_values))

    configs = []
    triples = product(spec.rho_values, spec.c0_values, spec.c1_values)
    for index, (rho, c0, c1) in enumerate(triples):
        chosen = stream.child(index).choice(
            df_values, size=spec.df_choices_per_triple, replace=False)
        for theta_df in chosen:
            configs.append(ModelParams(float(theta_df), rho, c0, c1))

    return configs


@dataclass
class EntryTask:
    index: int
    id: str
    theta: ModelParams
    seed: int


@dataclass
class EntryResult:
    task: EntryTask
    entry: Optional[ManifestEntry] = None
    error: Optional[str] = None
    message: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.entry is None

    def failure_row(self) -> List[str]:
        theta = self.task.theta
        return [
            self.task.id,
            format_float(theta.theta_df),
            format_float(theta.theta_rho),
            str(theta.theta_0),
            str(theta.theta_1),
            str(self.task.seed),
            self.error or "",
            self.message or ""]


def entry_id(index: int) -> str:
    return f"{index:06d}"


def entry_tasks(spec: SweepSpec, master_seed: int) -> List[EntryTask]:
    """
    Enumerates the entries of a sweep with their seeds.
    """
    master = RandomStream(master_seed)
    seeds = master.child(ENTRY_SEED_STREAM)

    tasks = []
    for theta in sweep_configs(spec, master):
        for _ in range(spec.aggregates_per_config):
            index = len(tasks)
            tasks.append(EntryTask(
                index=index,
                id=entry_id(index),
                theta=theta,
                seed=seeds.derive_seed(index)))

    return tasks


def fov_retry_counts(
    results: List[EntryResult],
    fov_retries: int
) -> Dict[Tuple, Tuple[int, int]]:
    """
    Counts, per configuration, the attempts that overflowed the field of
    view and all attempts. Entries that failed otherwise are not counted.
    """
    counts = OrderedDict()
    for result in results:
        if not result.failed:
            overflows, attempts = result.entry.attempt, result.entry.attempt + 1
        elif result.error == FieldOfViewOverflow.__name__:
            overflows = attempts = fov_retries + 1
        else:
            continue

        total = counts.get(result.task.theta.key, (0, 0))
        counts[result.task.theta.key] = (total[0] + overflows, total[1] + attempts)

    return counts


@dataclass
class EntryProducer:
    """
    Generates, renders, describes and stores single entries.
    """
    generator: AggregateGenerator
    renderer: StemRenderer
    storage: DatasetStorage
    fov_retries: int = 0

    def produce(self, task: EntryTask) -> ManifestEntry:
        """
        Raises FieldOfViewOverflow if no attempt fits the field of view.
        """
        for attempt in range(self.fov_retries + 1):
            rng = RandomStream(task.seed).child(attempt)
            aggregate = self.generator.generate(task.theta, rng)
            try:
                image = self.renderer.render(aggregate, rng)
            except FieldOfViewOverflow as err:
                _logger.debug(f"Entry {task.id} attempt {attempt}: {err}")
                continue

            return self._store(task, attempt, rng, aggregate, image)

        raise FieldOfViewOverflow(
            f"Entry {task.id} exceeded the field of view in "
            f"{self.fov_retries + 1} attempts.")

    def _store(self, task, attempt, rng, aggregate, image) -> ManifestEntry:
        geometry_key = self.storage.store_geometry(aggregate)
        image_key, metadata = self.storage.store_image(
            image, self.renderer.config, rng, task.theta)

        entry = ManifestEntry(
            id=task.id,
            theta=task.theta,
            seed=task.seed,
            geometry_path=self.storage.path(geometry_key),
            image_path=self.storage.path(image_key),
            descriptors=descriptor_report(aggregate),
            attempt=attempt,
            image=metadata)
        self.storage.store_entry(entry)
        return entry

    def __call__(self, task: EntryTask) -> EntryResult:
        try:
            return EntryResult(task, entry=self.produce(task))
        except (AggregationError, FieldOfViewOverflow) as err:
            return EntryResult(
                task, error=err.__class__.__name__, message=str(err))


class DatasetFactory(Loggable):
    """
    Runs parameter sweeps into a dataset storage.
    """

    def __init__(
        self,
        storage: DatasetStorage,
        growth: GrowthConfig = None,
        render: RenderConfig = None,
        radius: RadiusDistribution = None,
        model: IntensityModel = None
    ) -> None:
        super().__init__()
        self.storage = storage
        self.generator = AggregateGenerator(radius, growth)
        self.renderer = StemRenderer(render, model)

    def run_sweep(
        self,
        spec: SweepSpec,
        master_seed: int,
        jobs: int = 1
    ) -> Manifest:
        """
        Produces every entry of the sweep not yet in storage, then writes
        the manifest and failure log. Entries are independent of scheduling
        since each one derives its stream from the master seed and its id.
        """
        tasks = entry_tasks(spec, master_seed)
        producer = EntryProducer(
            self.generator, self.renderer, self.storage, spec.fov_retries)

        results: Dict[int, EntryResult] = {}
        pending = []
        for task in tasks:
            if self.storage.has_entry(task.id):
                results[task.index] = EntryResult(
                    task, entry=self.storage.get_entry(task.id))
            else:
                pending.append(task)

        if len(pending) < len(tasks):
            self.logger.info(
                f"Resuming sweep: {len(tasks) - len(pending)} of "
                f"{len(tasks)} entries already stored.")

        for result in self._execute(producer, pending, jobs):
            results[result.task.index] = result
            if result.failed:
                self.logger.warning(
                    f"Entry {result.task.id} for {result.task.theta} "
                    f"failed: {result.error}: {result.message}")
            else:
                self.logger.info(
                    f"Stored entry {result.task.id} "
                    f"({len(results)}/{len(tasks)}).")

        ordered = [results[task.index] for task in tasks]
        manifest = Manifest([r.entry for r in ordered if not r.failed])
        manifest.store(self.storage)
        self._store_failures([r for r in ordered if r.failed])
        self._log_retry_rates(ordered, spec.fov_retries)

        return manifest

    def _execute(self, producer: EntryProducer, tasks, jobs: int):
        if jobs <= 1 or len(tasks) <= 1:
            for task in tasks:
                yield producer(task)
            return

        with ProcessPoolExecutor(max_workers=jobs) as executor:
            yield from executor.map(producer, tasks)

    def _store_failures(self, failures: List[EntryResult]) -> None:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(FAILURE_COLUMNS)
        for failure in failures:
            writer.writerow(failure.failure_row())

        self.storage.put_text(self.storage.FAILURES_KEY, buffer.getvalue())

    def _log_retry_rates(self, results: List[EntryResult], fov_retries: int) -> None:
        counts = fov_retry_counts(results, fov_retries)
        for key, (overflows, attempts) in counts.items():
            self.logger.info(
                f"Config {ModelParams(*key)}: field of view retry rate "
                f"{overflows / attempts:.2f} ({overflows} of {attempts} attempts).")

        overflows = sum(c[0] for c in counts.values())
        attempts = sum(c[1] for c in counts.values())
        if attempts:
            self.logger.info(
                f"Sweep field of view retry rate {overflows / attempts:.2f} "
                f"over {len(counts)} configs.")


def run_sweep(
    spec: SweepSpec,
    storage: DatasetStorage,
    master_seed: int,
    growth: GrowthConfig = None,
    render: RenderConfig = None,
    radius: RadiusDistribution = None,
    jobs: int = 1
) -> Manifest:
    factory = DatasetFactory(storage, growth, render, radius)
    return factory.run_sweep(spec, master_seed, jobs)


"""
Split and batches
"""


def split_train_eval(
    m: Manifest,
    rng: RandomStream,
    fraction: float = DEFAULT_TRAIN_FRACTION,
    exclude_infeasible: bool = False
) -> Manifest:
    """
    Splits every configuration into train and eval entries, round(fraction
    * n) of them train. Both sides must hold at least m.min_per_config
    entries; otherwise the configuration is dropped with a warning if
    exclude_infeasible, else SplitInfeasible is raised.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"Train fraction must lie in (0, 1), got {fraction}.")

    splits = {}
    for key, entries in m.by_config().items():
        n_train = int(round(fraction * len(entries)))
        n_eval = len(entries) - n_train
        if min(n_train, n_eval) < m.min_per_config:
            message = (
                f"Configuration {entries[0].theta} with {len(entries)} "
                f"entries splits into {n_train} train and {n_eval} eval, "
                f"below {m.min_per_config}.")
            if not exclude_infeasible:
                raise SplitInfeasible(message)

            _logger.warning(f"Excluding configuration: {message}")
            continue

        order = rng.permutation(len(entries))
        for rank, position in enumerate(order):
            splits[entries[position].id] = (
                Split.TRAIN if rank < n_train else Split.EVAL)

    return Manifest(
        [replace(e, split=splits[e.id]) for e in m.entries if e.id in splits],
        m.min_per_config)


def assemble_batches(
    m: Manifest,
    split: Split,
    nu: int,
    rng: RandomStream
) -> List[Batch]:
    """
    Draws floor(n / nu) batches of nu entries per configuration of the
    split, without replacement.
    """
    if nu < 1:
        raise ValueError(f"Batch size must be positive, got {nu}.")

    batches = []
    for entries in m.in_split(split).by_config().values():
        if len(entries) < nu:
            raise InsufficientEntries(
                f"Configuration {entries[0].theta} has {len(entries)} "
                f"{Split(split).value} entries, fewer than nu={nu}.")

        order = rng.permutation(len(entries))
        for start in range(0, len(entries) - nu + 1, nu):
            members = [entries[i] for i in order[start:start + nu]]
            batches.append(Batch(entries[0].theta, members))

    return batches


def _mean_or_none(values) -> Optional[float]:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def batch_descriptor_means(batch: Batch) -> BatchEstimate:
    """
    Averages the per-aggregate descriptors of the batch members.
    """
    reports = [e.descriptors for e in batch.members]
    return BatchEstimate(
        theta=batch.theta,
        mixing_ratio=float(np.mean([r.mixing_ratio for r in reports])),
        fractal_dim=_mean_or_none(r.fractal_dim for r in reports),
        avg_cluster_size_label0=_mean_or_none(
            r.avg_cluster_size_label0 for r in reports),
        avg_cluster_size_label1=_mean_or_none(
            r.avg_cluster_size_label1 for r in reports),
        z_hetero=float(np.mean([r.z_hetero for r in reports])),
        z_total=float(np.mean([r.z_total for r in reports])))


def load_batch(batch: Batch, storage: DatasetStorage) -> List[Aggregate]:
    return [storage.get_geometry(e.geometry_path) for e in batch.members]


def batch_cluster_size(
    batch: Batch,
    storage: DatasetStorage,
    label: Label,
    pooled: bool = False
) -> Optional[float]:
    return batch_average_cluster_size(
        load_batch(batch, storage), label, pooled)


"""
Integrity
"""


def check_manifest(
    m: Manifest,
    storage: DatasetStorage,
    rng: Optional[RandomStream] = None,
    spot_checks: int = 0,
    tolerance: float = 1e-9
) -> List[str]:
    """
    Returns the integrity problems of the manifest: duplicate ids, missing
    files and, for spot_checks random entries, descriptors that differ from
    a recomputation on the stored geometry.
    """
    problems = []
    seen = set()
    for entry in m.entries:
        if entry.id in seen:
            problems.append(f"Duplicate id {entry.id}.")
        seen.add(entry.id)

        for path in (entry.geometry_path, entry.image_path):
            if not storage.exists(path):
                problems.append(f"Entry {entry.id}: missing {path}.")

    if spot_checks and m.entries:
        rng = rng or RandomStream(0)
        count = min(spot_checks, len(m.entries))
        for i in rng.choice(len(m.entries), size=count, replace=False):
            entry = m.entries[int(i)]
            stored = dict(zip(DESCRIPTOR_COLUMNS, entry.descriptors.csv_row()))
            recomputed = dict(zip(
                DESCRIPTOR_COLUMNS,
                descriptor_report(
                    storage.get_geometry(entry.geometry_path)).csv_row()))
            for column in DESCRIPTOR_COLUMNS:
                if not _close(stored[column], recomputed[column], tolerance):
                    problems.append(
                        f"Entry {entry.id}: {column} is {stored[column]}, "
                        f"recomputed {recomputed[column]}.")

    return problems


def _close(a: str, b: str, tolerance: float) -> bool:
    if a == b:
        return True
    try:
        return math.isclose(float(a), float(b), rel_tol=tolerance)
    except ValueError:
        return False


"""
Network inputs
"""


def export_network_inputs(
    m: Manifest,
    storage: DatasetStorage,
    rng: RandomStream,
    levels: int = DEFAULT_QUANTIZE_LEVELS,
    augmentations: int = 0,
    max_shift_px: int = DEFAULT_MAX_SHIFT_PX,
    invert: bool = False
) -> List[str]:
    """
    Writes the preprocessed image of every entry, and augmentations
    randomly rotated, flipped and shifted copies of each train entry.
    Returns the stored keys. Copy i of the k-th entry draws from
    rng.child(k).child(i).
    """
    if augmentations < 0:
        raise ValueError(f"Negative augmentation count {augmentations}.")

    keys = []
    for k, entry in enumerate(m):
        image = storage.get_image(entry)
        values = invert_nonbackground(image) if invert else image.values
        inputs = preprocess(values, levels)
        keys.append(storage.store_input(entry.id, inputs))

        if entry.split != Split.TRAIN:
            continue

        background = float(inputs.min())
        for i in range(augmentations):
            augmented = augment(
                inputs, rng.child(k).child(i), max_shift_px, background)
            keys.append(storage.store_input(entry.id, augmented, index=i))

    _logger.info(f"Stored {len(keys)} network inputs for {len(m)} entries.")
    return keys
