"""Index sweeps over cluster count, attribute count and attribute quality.

Every row of a sweep clusters with the same :class:`KMeansConfig`, so the
shared base configuration (three real attributes, K = 4) produces the same
report in all three sweeps. Random columns come from
:func:`features.random_column` keyed on (seed, column number), which keeps
the attribute-count rows nested: row H + 1 adds one column to row H.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .features import (
    DEFAULT_ATTRIBUTES,
    FeatureMatrix,
    augment_random,
    normalize,
    substitute_random,
)
from .kmeans import Clustering, KMeansConfig, kmeans
from .validity import INDEX_NAMES, SUPPRESS, IndexReport, adjust_for_attribute_count, index_report

CLUSTERS = "clusters"
ATTRIBUTE_COUNT = "attribute_count"
ATTRIBUTE_QUALITY = "attribute_quality"
KINDS = (CLUSTERS, ATTRIBUTE_COUNT, ATTRIBUTE_QUALITY)

FIXED_K = 4
ATTRIBUTE_COUNTS = range(2, 8)
REPLACE_COUNTS = range(0, 4)
TWO_ATTRIBUTES = ("total_usage", "flex_max")


@dataclass(frozen=True)
class SweepRow:
    variable: int
    report: IndexReport
    adjusted: Optional[IndexReport] = None

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "report": self.report.to_dict(),
            "adjusted": None if self.adjusted is None else self.adjusted.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRow":
        adj = d.get("adjusted")
        return cls(int(d["variable"]), IndexReport.from_dict(d["report"]), None if adj is None else IndexReport.from_dict(adj))


@dataclass(frozen=True)
class SweepResult:
    kind: str
    rows: tuple[SweepRow, ...]
    seed: int
    config: KMeansConfig

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sweep kind {self.kind!r}")
        object.__setattr__(self, "rows", tuple(sorted(self.rows, key=lambda r: r.variable)))
        variables = [r.variable for r in self.rows]
        if len(set(variables)) != len(variables):
            raise ValueError("one row per variable value")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "config": self.config.to_dict(),
            "rows": [r.to_dict() for r in self.rows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepResult":
        return cls(
            kind=d["kind"],
            rows=tuple(SweepRow.from_dict(r) for r in d["rows"]),
            seed=int(d["seed"]),
            config=KMeansConfig(**d["config"]),
        )

    def column(self, index: str, adjusted: bool = False) -> list[Optional[float]]:
        return [getattr(r.adjusted if adjusted else r.report, index) for r in self.rows]


def _cluster_and_score(matrix: FeatureMatrix, k: int, config: KMeansConfig, policy: str):
    c = kmeans(matrix, k, config)
    return c, index_report(c, matrix, policy)


def _ensure_normalized(matrix: FeatureMatrix) -> FeatureMatrix:
    return matrix if matrix.normalization is not None else normalize(matrix)


def sweep_clusters(
    matrix: FeatureMatrix,
    k_min: int = 2,
    k_max: int = 20,
    config: KMeansConfig = KMeansConfig(),
    policy: str = SUPPRESS,
) -> SweepResult:
    if not 2 <= k_min <= k_max <= matrix.m:
        raise ValueError(f"need 2 <= k_min <= k_max <= {matrix.m}, got {k_min}..{k_max}")
    rows = [SweepRow(k, _cluster_and_score(matrix, k, config, policy)[1]) for k in range(k_min, k_max + 1)]
    return SweepResult(CLUSTERS, tuple(rows), config.seed, config)


def _real_attributes(matrix: FeatureMatrix) -> FeatureMatrix:
    missing = [n for n in DEFAULT_ATTRIBUTES if n not in matrix.attribute_names]
    if missing:
        raise ValueError(f"matrix lacks the real attributes {missing}")
    return _ensure_normalized(matrix.select(DEFAULT_ATTRIBUTES))


def attribute_count_matrix(real: FeatureMatrix, h: int, seed: int) -> FeatureMatrix:
    """Matrix for one attribute-count row: 2 real, 3 real, or 3 real plus h - 3 random."""
    if h == 2:
        return real.select(TWO_ATTRIBUTES)
    if h < 2:
        raise ValueError("attribute count must be >= 2")
    return augment_random(real, h - 3, seed)


def sweep_attribute_count(
    matrix: FeatureMatrix, seed: int, config: KMeansConfig = KMeansConfig(), policy: str = SUPPRESS
) -> SweepResult:
    real = _real_attributes(matrix)
    rows = []
    for h in ATTRIBUTE_COUNTS:
        report = _cluster_and_score(attribute_count_matrix(real, h, seed), FIXED_K, config, policy)[1]
        rows.append(SweepRow(h, report, adjust_for_attribute_count(report)))
    return SweepResult(ATTRIBUTE_COUNT, tuple(rows), seed, config)


def sweep_attribute_quality(
    matrix: FeatureMatrix, seed: int, config: KMeansConfig = KMeansConfig(), policy: str = SUPPRESS
) -> SweepResult:
    real = _real_attributes(matrix)
    rows = []
    for n in REPLACE_COUNTS:
        report = _cluster_and_score(substitute_random(real, n, seed), FIXED_K, config, policy)[1]
        rows.append(SweepRow(n, report))
    return SweepResult(ATTRIBUTE_QUALITY, tuple(rows), seed, config)


# output

def _cell(x: Optional[float], two_dp: bool) -> str:
    if x is None:
        return ""
    return f"{x:.2f}" if two_dp else repr(float(x))


def emit_table(result: SweepResult, fmt: str = "csv", display_2dp: bool = False, adjusted: bool = False) -> str:
    """Render ``variable,mia,cdi,smi,dbi,ball`` as csv text or the full result as json.

    Undefined indexes become empty csv cells. ``adjusted`` selects the
    attribute-count-adjusted reports (csv only; json always carries both).
    """
    if fmt == "json":
        return json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("variable",) + INDEX_NAMES)
    for row in result.rows:
        rep = row.adjusted if adjusted else row.report
        if rep is None:
            raise ValueError(f"row {row.variable} has no adjusted report")
        w.writerow([row.variable] + [_cell(getattr(rep, n), display_2dp) for n in INDEX_NAMES])
    return buf.getvalue()


def read_json(text: str) -> SweepResult:
    return SweepResult.from_dict(json.loads(text))


def sweep_filename(result: SweepResult, ext: str, suffix: str = "") -> str:
    return f"sweep_{result.kind}{suffix}_{result.seed}.{ext}"


def write_sweep(result: SweepResult, out_dir, fmt: str = "csv", display_2dp: bool = False) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / sweep_filename(result, fmt)]
    paths[0].write_text(emit_table(result, fmt, display_2dp))
    if fmt == "csv" and all(r.adjusted is not None for r in result.rows):
        adj = out_dir / sweep_filename(result, fmt, "_adjusted")
        adj.write_text(emit_table(result, fmt, display_2dp, adjusted=True))
        paths.append(adj)
    return paths


def plot_rows(matrix: FeatureMatrix, clustering: Clustering, attrs: Sequence[str]) -> str:
    """Whitespace-separated ``x y [z] cluster`` columns for a scatter plot."""
    if len(attrs) not in (2, 3):
        raise ValueError("plot data needs 2 or 3 attributes")
    sub = matrix.select(attrs)
    lines = ["# " + " ".join(list(attrs) + ["cluster"])]
    for values, label in zip(sub.rows, clustering.assignments):
        lines.append(" ".join(repr(float(v)) for v in values) + f" {int(label)}")
    return "\n".join(lines) + "\n"
