"""Command line front end.

Subcommands follow the analysis flow: ``synth`` -> ``features`` ->
``cluster`` -> ``indexes`` / ``plotdata``, plus the three sweeps. Every
successful run ends by writing ``manifest.json`` into its output directory.

Exit status: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import timedelta
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .errors import LoadFlexError
from .experiments import (
    plot_rows,
    sweep_attribute_count,
    sweep_attribute_quality,
    sweep_clusters,
    write_sweep,
)
from .features import (
    DEFAULT_ATTRIBUTES,
    build_matrix,
    household_records,
    normalize,
    read_matrix,
    read_records,
    write_matrix,
    write_records,
)
from .ingest import (
    DEFAULT_MIN_COMPLETENESS,
    DayCalendar,
    build_day_slices,
    filter_window,
    read_holidays,
    read_readings,
    write_readings,
)
from .kmeans import KMeansConfig, from_assignments, kmeans, read_assignments, write_assignments, write_metadata
from .synth import default_spec, generate, ground_truth_labels, jitter_pair_spec, write_ground_truth
from .validity import POLICIES, SUPPRESS, index_report

logger = logging.getLogger("loadflex")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return value


def _attrs(text: str) -> tuple[str, ...]:
    names = tuple(n.strip() for n in text.split(",") if n.strip())
    if not names:
        raise argparse.ArgumentTypeError("attribute list is empty")
    return names


def _add_common(p: argparse.ArgumentParser, *, needs_input: bool = True) -> None:
    if needs_input:
        p.add_argument("--input", required=True, type=Path)
    p.add_argument("--output-dir", type=Path, default=Path("."))
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_kmeans(p: argparse.ArgumentParser) -> None:
    p.add_argument("--restarts", type=_positive, default=KMeansConfig.restarts)
    p.add_argument("--max-iterations", type=_positive, default=KMeansConfig.max_iterations)
    p.add_argument("--min-cluster-size", type=int, default=0)


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--display-2dp", action="store_true", help="round table cells to 2 decimals")
    p.add_argument("--dbi-policy", choices=POLICIES, default=SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="loadflex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic reading corpus")
    _add_common(p, needs_input=False)
    p.add_argument("--corpus", choices=("default", "jitter-pair"), default="default")
    p.add_argument("--households", type=_positive, default=None)
    p.add_argument("--days", type=_positive, default=None)

    p = sub.add_parser("features", help="readings -> household records")
    _add_common(p)
    p.add_argument("--min-completeness", type=_fraction, default=DEFAULT_MIN_COMPLETENESS)
    p.add_argument("--holidays", type=Path)
    p.add_argument("--local-offset", type=float, default=None, help="hours east of UTC for local time")
    p.add_argument("--slots", action="store_true", help="also write per-slot averages")

    p = sub.add_parser("cluster", help="household records -> clustering")
    _add_common(p)
    _add_kmeans(p)
    p.add_argument("--k", type=_positive, default=4)
    p.add_argument("--attrs", type=_attrs, default=DEFAULT_ATTRIBUTES)
    p.add_argument("--no-normalize", action="store_true")

    p = sub.add_parser("indexes", help="matrix + clustering -> validity indexes")
    _add_common(p)
    p.add_argument("--clustering", required=True, type=Path, help="assignments csv from 'cluster'")
    p.add_argument("--dbi-policy", choices=POLICIES, default=SUPPRESS)

    p = sub.add_parser("sweep-k", help="indexes for K = k-min..k-max")
    _add_common(p)
    _add_kmeans(p)
    _add_output(p)
    p.add_argument("--attrs", type=_attrs, default=DEFAULT_ATTRIBUTES)
    p.add_argument("--k-min", type=_positive, default=2)
    p.add_argument("--k-max", type=_positive, default=20)

    for name, text in (("sweep-attrs", "indexes for 2..7 attributes"), ("sweep-quality", "indexes as real attributes become random")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        _add_kmeans(p)
        _add_output(p)

    p = sub.add_parser("plotdata", help="x y [z] cluster columns for scatter plots")
    _add_common(p)
    p.add_argument("--clustering", required=True, type=Path)
    p.add_argument("--attrs", type=_attrs, default=("total_usage", "flex_max"))
    return parser


def _config(args) -> KMeansConfig:
    return KMeansConfig(
        restarts=args.restarts,
        max_iterations=args.max_iterations,
        seed=args.seed,
        min_cluster_size=args.min_cluster_size,
    )


def _load_matrix(path: Path, attrs: Sequence[str], normalized: bool = True):
    with open(path, encoding="utf-8") as fh:
        records = read_records(fh)
    if not records:
        raise LoadFlexError(f"{path}: no household records")
    m = build_matrix(records, attrs)
    return normalize(m) if normalized else m


def _write(path: Path, text: str, outputs: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    outputs.append(path)


def cmd_synth(args, outputs):
    maker = jitter_pair_spec if args.corpus == "jitter-pair" else default_spec
    kwargs = {"seed": args.seed}
    if args.days:
        kwargs["days"] = args.days
    if args.households:
        if args.corpus == "jitter-pair":
            kwargs["per_archetype"] = max(1, args.households // 2)
        else:
            kwargs["households"] = args.households
    spec = maker(**kwargs)
    readings = generate(spec)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    path = args.output_dir / "readings.csv"
    with open(path, "w", encoding="utf-8") as fh:
        write_readings(readings, fh)
    outputs.append(path)
    path = args.output_dir / "ground_truth.csv"
    with open(path, "w", encoding="utf-8") as fh:
        write_ground_truth(ground_truth_labels(spec), fh)
    outputs.append(path)
    logger.info("wrote %d readings for %d households", len(readings), spec.households)
    return None


def cmd_features(args, outputs):
    holidays = read_holidays(args.holidays) if args.holidays else frozenset()
    offset = None if args.local_offset is None else timedelta(hours=args.local_offset)
    readings = read_readings(args.input)
    window = filter_window(readings, offset)
    slices, report = build_day_slices(window, DayCalendar(holidays=holidays), args.min_completeness, offset)
    records, skipped = household_records(slices)
    if not records:
        raise LoadFlexError("no household has two or more qualifying days")
    args.output_dir.mkdir(parents=True, exist_ok=True)
    path = args.output_dir / "households.csv"
    with open(path, "w", encoding="utf-8") as fh:
        write_records(records, fh, include_slots=args.slots)
    outputs.append(path)
    summary = report.as_dict()
    summary.update(input_readings=len(readings), households=len(records), skipped_households=skipped)
    _write(args.output_dir / "features_report.json", json.dumps(summary, indent=2, sort_keys=True) + "\n", outputs)
    return None


def cmd_cluster(args, outputs):
    matrix = _load_matrix(args.input, args.attrs, not args.no_normalize)
    config = _config(args)
    c = kmeans(matrix, args.k, config)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    path = args.output_dir / "assignments.csv"
    with open(path, "w", encoding="utf-8") as fh:
        write_assignments(c, matrix.ids, fh)
    outputs.append(path)
    path = args.output_dir / "matrix.csv"
    with open(path, "w", encoding="utf-8") as fh:
        write_matrix(matrix, fh)
    outputs.append(path)
    path = args.output_dir / "clustering.json"
    with open(path, "w", encoding="utf-8") as fh:
        write_metadata(c, config, fh, attributes=list(matrix.attribute_names))
    outputs.append(path)
    return config


def _matrix_and_clustering(args):
    with open(args.input, encoding="utf-8") as fh:
        matrix = read_matrix(fh)
    with open(args.clustering, encoding="utf-8") as fh:
        ids, labels = read_assignments(fh)
    if tuple(ids) != matrix.ids:
        raise LoadFlexError("clustering household ids do not match the matrix rows")
    return matrix, from_assignments(matrix, labels)


def cmd_indexes(args, outputs):
    matrix, c = _matrix_and_clustering(args)
    report = index_report(c, matrix, args.dbi_policy)
    _write(args.output_dir / "indexes.json", report.to_json() + "\n", outputs)
    return None


def cmd_plotdata(args, outputs):
    matrix, c = _matrix_and_clustering(args)
    name = "plot_" + "_".join(args.attrs) + ".dat"
    _write(args.output_dir / name, plot_rows(matrix, c, args.attrs), outputs)
    return None


def _sweep(args, outputs, result):
    outputs.extend(write_sweep(result, args.output_dir, args.format, args.display_2dp))


def cmd_sweep_k(args, outputs):
    matrix = _load_matrix(args.input, args.attrs)
    config = _config(args)
    if args.k_max > matrix.m:
        raise UsageError(f"--k-max {args.k_max} exceeds the {matrix.m} households")
    if args.k_min < 2 or args.k_min > args.k_max:
        raise UsageError("need 2 <= --k-min <= --k-max")
    _sweep(args, outputs, sweep_clusters(matrix, args.k_min, args.k_max, config, args.dbi_policy))
    return config


def cmd_sweep_attrs(args, outputs):
    matrix = _load_matrix(args.input, DEFAULT_ATTRIBUTES)
    config = _config(args)
    _sweep(args, outputs, sweep_attribute_count(matrix, args.seed, config, args.dbi_policy))
    return config


def cmd_sweep_quality(args, outputs):
    matrix = _load_matrix(args.input, DEFAULT_ATTRIBUTES)
    config = _config(args)
    _sweep(args, outputs, sweep_attribute_quality(matrix, args.seed, config, args.dbi_policy))
    return config


COMMANDS = {
    "synth": cmd_synth,
    "features": cmd_features,
    "cluster": cmd_cluster,
    "indexes": cmd_indexes,
    "plotdata": cmd_plotdata,
    "sweep-k": cmd_sweep_k,
    "sweep-attrs": cmd_sweep_attrs,
    "sweep-quality": cmd_sweep_quality,
}


def write_manifest(args, outputs: list, config: Optional[KMeansConfig]) -> Path:
    inputs = [str(p) for p in (getattr(args, "input", None), getattr(args, "clustering", None), getattr(args, "holidays", None)) if p]
    manifest = {
        "command": args.command,
        "inputs": inputs,
        "seed": args.seed,
        "config": None if config is None else config.to_dict(),
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
    }
    path = args.output_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    outputs: list[Path] = []
    try:
        config = COMMANDS[args.command](args, outputs)
        write_manifest(args, outputs, config)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"loadflex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LoadFlexError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
