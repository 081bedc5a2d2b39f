#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Command line interface.

Subcommands: generate, render, dataset, metrics, baseline, plotdata.
Exit codes: 0 success, 2 configuration error, 3 generation or render
failure, 4 I/O or parse error.
"""
import argparse
import csv
import io
import json
import logging
import sys
import numpy as np

from pathlib import Path
from typing import List, Optional, Sequence
from marshmallow import ValidationError

from .aggregation import AggregateGenerator, AggregationError
from .config import ConfigError, RunConfig, load_config
from .constants import (
    Split,
    REFERENCE_BASELINE_MAE,
    REFERENCE_COMPARISON_MAE
)
from .dataset import (
    InsufficientEntries,
    Manifest,
    SplitInfeasible,
    assemble_batches,
    batch_descriptor_means,
    export_network_inputs,
    run_sweep,
    split_train_eval
)
from .geometry import GeometryError, read_geometry, write_geometry
from .descriptors import descriptor_report
from .images import (
    ImageFormatError,
    image_metadata,
    write_metadata,
    write_pgm,
    write_raw
)
from .intensity import IntensityModelError
from .logging import configure_logging
from .metrics import (
    ComparisonReport,
    MetricsError,
    PairedSeries,
    batch_size_curve,
    calibrate_thresholds,
    compare_descriptor_distributions,
    load_baseline_samples,
    mae,
    mae_by_size
)
from .models import DESCRIPTOR_COLUMNS, ModelParams, format_float
from .render import FieldOfViewOverflow, StemRenderer
from .storage import DatasetStorageError, LocalDatasetStorage
from .streams import RandomStream

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GENERATION = 3
EXIT_IO = 4

EXIT_CODES = [
    ((ConfigError, ValidationError, SplitInfeasible, InsufficientEntries,
      MetricsError), EXIT_CONFIG),
    ((AggregationError, FieldOfViewOverflow), EXIT_GENERATION),
    ((OSError, GeometryError, ImageFormatError, IntensityModelError,
      DatasetStorageError), EXIT_IO),
]

RUN_CONFIG_FILE = "run_config.json"
PAIR_DELIMITER = ";"

# Spawn key of the split stream below the master seed.
SPLIT_STREAM = 2
BATCH_STREAM = 3
AUGMENT_STREAM = 4

DENSITY_BINS = 20


"""
Helpers
"""


def exit_code(err: Exception) -> Optional[int]:
    for classes, code in EXIT_CODES:
        if isinstance(err, classes):
            return code

    return None


def report_error(err: Exception, code: int, entry: str = None) -> None:
    """
    Writes one machine readable error record to stderr.
    """
    record = {
        "error": err.__class__.__name__,
        "message": str(err),
        "exit_code": code,
    }
    if entry is not None:
        record["entry"] = entry

    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")


def _output_dir(config: RunConfig) -> Path:
    out = Path(config.run.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _write_text(path, buffer.getvalue())


def _snapshot(config: RunConfig, out: Path) -> None:
    _write_text(out / RUN_CONFIG_FILE, config.to_json())


def _dataset_storage(path: str) -> LocalDatasetStorage:
    return LocalDatasetStorage(path)


"""
Commands
"""


def cmd_generate(args, config: RunConfig) -> int:
    """
    Generates count aggregates for one theta and writes their geometry and
    descriptors.
    """
    theta = ModelParams.from_string(args.theta)
    out = _output_dir(config)
    _snapshot(config, out)

    generator = AggregateGenerator(config.radius, config.growth)
    master = RandomStream(config.run.seed)

    rows = []
    for k in range(config.run.count):
        aggregate = generator.generate(theta, master.child(k))
        name = f"aggregate_{k:04d}.xyz"
        write_geometry(out / name, aggregate)
        rows.append([name] + descriptor_report(aggregate).csv_row())
        _logger.info(f"Wrote {name}: {aggregate}")

    _write_csv(out / "descriptors.csv", ["file"] + DESCRIPTOR_COLUMNS, rows)
    return EXIT_OK


def cmd_render(args, config: RunConfig) -> int:
    """
    Renders geometry files to PGM images with sidecar records. A render
    failure is reported per file and does not stop the remaining files.
    """
    out = _output_dir(config)
    _snapshot(config, out)

    renderer = StemRenderer(config.render)
    master = RandomStream(config.run.seed)

    status = EXIT_OK
    for k, path in enumerate(args.geometry):
        path = Path(path)
        aggregate = read_geometry(path)
        rng = master.child(k)
        try:
            image = renderer.render(aggregate, rng)
        except FieldOfViewOverflow as err:
            report_error(err, EXIT_GENERATION, entry=str(path))
            status = EXIT_GENERATION
            continue

        theta = aggregate.provenance.theta if aggregate.provenance else None
        metadata = image_metadata(image, config.render, rng, theta)
        write_pgm(out / f"{path.stem}.pgm", image.values, metadata.v_max)
        if config.render.write_raw:
            raw_path = out / f"{path.stem}.f32"
            write_raw(raw_path, image.values)
            metadata.raw_path = str(raw_path)
        write_metadata(out / f"{path.stem}.json", metadata)
        _logger.info(f"Rendered {path} to {path.stem}.pgm")

    return status


def cmd_dataset(args, config: RunConfig) -> int:
    """
    Runs the sweep into the output directory, splits it and writes the
    manifest. Entries already stored are skipped. With --inputs or --augment
    the preprocessed network inputs are written under inputs/.
    """
    if args.augment is not None and args.augment < 0:
        raise ConfigError(f"--augment must be non-negative, got {args.augment}.")

    storage = _dataset_storage(config.run.out or ".")
    storage.store_run_config(config.dump())

    manifest = run_sweep(
        config.sweep, storage, config.run.seed,
        growth=config.growth, render=config.render, radius=config.radius,
        jobs=config.run.jobs)
    manifest.min_per_config = config.split.min_per_config

    manifest = split_train_eval(
        manifest, RandomStream(config.run.seed).child(SPLIT_STREAM),
        fraction=config.split.fraction,
        exclude_infeasible=config.split.exclude_infeasible)
    manifest.store(storage)

    if args.inputs or args.augment:
        export_network_inputs(
            manifest, storage, RandomStream(config.run.seed).child(AUGMENT_STREAM),
            levels=config.render.quantize_levels,
            augmentations=args.augment or 0,
            max_shift_px=config.run.max_shift_px,
            invert=args.invert)

    _logger.info(f"Dataset with {len(manifest)} entries in {storage}")
    return EXIT_OK


def _parse_pairs(text: str) -> List[tuple]:
    pairs = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue

        parts = line.split(PAIR_DELIMITER)
        if len(parts) != 2:
            raise ConfigError(
                f"Expected 'theta{PAIR_DELIMITER}theta_hat', got '{line}'.")
        pairs.append(tuple(ModelParams.from_string(p) for p in parts))

    return pairs


def cmd_metrics(args, config: RunConfig) -> int:
    """
    Compares descriptor distributions for theta pairs from a pairs file, or
    every configuration of a dataset against itself.
    """
    if args.pairs:
        pairs = _parse_pairs(Path(args.pairs).read_text(encoding="utf-8"))
    else:
        manifest = Manifest.load(_dataset_storage(args.dataset))
        pairs = [
            (entries[0].theta, entries[0].theta)
            for entries in manifest.by_config().values()]

    out = _output_dir(config)
    _snapshot(config, out)

    report = compare_descriptor_distributions(
        pairs, config.run.per_config_samples, RandomStream(config.run.seed),
        growth=config.growth, radius=config.radius, jobs=config.run.jobs)

    _write_text(out / "comparison.csv", report.to_csv())
    _write_text(out / "histograms.csv", report.histograms_csv())
    _write_text(
        out / "comparison.json",
        json.dumps(report.dump(), sort_keys=True, indent=2))

    for d in report.descriptors:
        _logger.info(
            f"{d.descriptor}: MAE {d.mae} (reference "
            f"{REFERENCE_COMPARISON_MAE.get(d.descriptor)}), R^2 {d.r_squared}")

    return EXIT_OK


def cmd_baseline(args, config: RunConfig) -> int:
    """
    Calibrates the threshold baseline on the train split and evaluates it
    on the eval split.
    """
    storage = _dataset_storage(args.dataset)
    manifest = Manifest.load(storage, config.split.min_per_config)
    train, evaluation = manifest.in_split(Split.TRAIN), manifest.in_split(Split.EVAL)
    if not len(train) or not len(evaluation):
        raise SplitInfeasible(
            f"Dataset {args.dataset} has {len(train)} train and "
            f"{len(evaluation)} eval entries; the baseline needs both.")

    out = _output_dir(config)
    _snapshot(config, out)

    area = config.radius.mean_projected_area
    calibration = calibrate_thresholds(
        load_baseline_samples(train, storage),
        config.run.grid_resolution, area, area)

    samples = load_baseline_samples(evaluation, storage)
    estimates = [calibration.estimate(s.image) for s in samples]
    truths = [s.mixing_ratio for s in samples]
    series = PairedSeries(truths, estimates)

    sizes = [e.n_particles for e in evaluation]
    edges = np.linspace(min(sizes), max(sizes) + 1, 7)
    by_size = mae_by_size(series, sizes, edges)

    nus = sorted({1, 2, 4, config.split.nu})
    curve = batch_size_curve(
        estimates, truths, [e.theta.key for e in evaluation], nus,
        RandomStream(config.run.seed).child(BATCH_STREAM))

    result = {
        "calibration": calibration.dump(),
        "eval_mae": mae(series),
        "eval_entries": len(series),
        "reference_mae": REFERENCE_BASELINE_MAE,
        "batch_size_curve": {str(k): v for k, v in curve.items()},
    }
    _write_text(
        out / "baseline.json", json.dumps(result, sort_keys=True, indent=2))
    _write_csv(
        out / "baseline_by_size.csv",
        ["size_left", "size_right", "count", "mae"],
        [[format_float(left), format_float(right), count, format_float(err)]
         for left, right, count, err in by_size])

    _logger.info(
        f"Thresholds ({calibration.t_bg:.4g}, {calibration.t_mat:.4g}), "
        f"eval MAE {result['eval_mae']:.4f} (reference {REFERENCE_BASELINE_MAE})")
    return EXIT_OK


def _density_rows(presets, values, bins: int):
    presets = np.asarray(presets, dtype=float)
    values = np.asarray(values, dtype=float)
    counts, preset_edges, value_edges = np.histogram2d(
        presets, values, bins=[np.unique(presets).size or 1, bins])

    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            yield [
                format_float(preset_edges[i]), format_float(preset_edges[i + 1]),
                format_float(value_edges[j]), format_float(value_edges[j + 1]),
                int(counts[i, j])]


def cmd_plotdata(args, config: RunConfig) -> int:
    """
    Writes plot ready CSVs: parameter densities of a dataset, batch
    estimates, or the histograms of a comparison report.
    """
    out = _output_dir(config)
    source = Path(args.source)
    header = ["preset_left", "preset_right", "value_left", "value_right", "count"]

    if source.suffix == ".json":
        report = ComparisonReport.load(
            json.loads(source.read_text(encoding="utf-8")))
        _write_text(out / "histograms.csv", report.histograms_csv())
        return EXIT_OK

    manifest = Manifest.load(_dataset_storage(str(source)))
    with_df = [e for e in manifest if e.descriptors.fractal_dim is not None]
    _write_csv(
        out / "density_fractal_dim.csv", header,
        _density_rows(
            [e.theta.theta_df for e in with_df],
            [e.descriptors.fractal_dim_volume or e.descriptors.fractal_dim
             for e in with_df],
            DENSITY_BINS))
    _write_csv(
        out / "density_mixing_ratio.csv", header,
        _density_rows(
            [e.theta.theta_rho for e in manifest],
            [e.descriptors.mixing_ratio for e in manifest],
            DENSITY_BINS))

    split = manifest.in_split(Split.EVAL)
    if len(split):
        batches = assemble_batches(
            split, Split.EVAL, config.split.nu,
            RandomStream(config.run.seed).child(BATCH_STREAM))
        _write_csv(
            out / "batch_estimates.csv",
            ["theta_df", "theta_rho", "theta_0", "theta_1",
             "mean_fractal_dim", "mean_mixing_ratio"],
            [[format_float(b.theta.theta_df), format_float(b.theta.theta_rho),
              b.theta.theta_0, b.theta.theta_1,
              format_float(b.fractal_dim), format_float(b.mixing_ratio)]
             for b in map(batch_descriptor_means, batches)])

    return EXIT_OK


"""
Parser
"""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", help="INI config file (default: $HETEROAGG_CONFIG)")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64 bit)")
    common.add_argument("--jobs", type=int, help="number of worker processes")
    common.add_argument("--out", help="output directory")
    common.add_argument(
        "-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="heteroagg",
        description="Hetero-aggregate generation, rendering and evaluation.")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser(
        "generate", parents=[common], help="generate aggregates")
    generate.add_argument(
        "--theta", required=True, help="model parameters df,rho,c0,c1")
    generate.add_argument("--count", type=int, help="number of aggregates")
    generate.set_defaults(handler=cmd_generate)

    render = commands.add_parser(
        "render", parents=[common], help="render geometry files")
    render.add_argument("geometry", nargs="+", help="geometry files")
    render.set_defaults(handler=cmd_render)

    dataset = commands.add_parser(
        "dataset", parents=[common], help="run a dataset sweep into --out")
    dataset.add_argument("--nu", type=int, help="batch size")
    dataset.add_argument(
        "--inputs", action="store_true", help="write preprocessed network inputs")
    dataset.add_argument(
        "--augment", type=int, metavar="N",
        help="write N augmented inputs per train entry (implies --inputs)")
    dataset.add_argument(
        "--invert", action="store_true",
        help="invert non-background intensities before preprocessing")
    dataset.set_defaults(handler=cmd_dataset)

    metrics = commands.add_parser(
        "metrics", parents=[common], help="compare descriptor distributions")
    source = metrics.add_mutually_exclusive_group(required=True)
    source.add_argument("--dataset", help="dataset directory (self-comparison)")
    source.add_argument(
        "--pairs", help="file of 'df,rho,c0,c1;df,rho,c0,c1' lines")
    metrics.set_defaults(handler=cmd_metrics)

    baseline = commands.add_parser(
        "baseline", parents=[common], help="threshold baseline on a dataset")
    baseline.add_argument("dataset", help="dataset directory")
    baseline.add_argument("--nu", type=int, help="largest batch size")
    baseline.set_defaults(handler=cmd_baseline)

    plotdata = commands.add_parser(
        "plotdata", parents=[common], help="write plot data CSVs")
    plotdata.add_argument(
        "source", help="dataset directory or comparison.json")
    plotdata.add_argument("--nu", type=int, help="batch size")
    plotdata.set_defaults(handler=cmd_plotdata)

    return parser


def _overrides(args) -> dict:
    return {
        "run": {
            "seed": args.seed,
            "jobs": args.jobs,
            "out": args.out,
            "count": getattr(args, "count", None),
        },
        "split": {"nu": getattr(args, "nu", None)},
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = load_config(args.config, _overrides(args))
        return args.handler(args, config)
    except Exception as err:
        code = exit_code(err)
        if code is None:
            raise

        report_error(err, code)
        return code


if __name__ == "__main__":
    sys.exit(main())
