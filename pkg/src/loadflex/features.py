"""Per-day statistics, household flexibility records and feature matrices."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import BadCount, EmptySlice, InsufficientDays, UnknownAttribute
from .ingest import N_SLOTS, SLOT_SECONDS, EveningSlice, group_by_household

SLOT_MINUTES = SLOT_SECONDS // 60
DEFAULT_ATTRIBUTES = ("total_usage", "flex_max", "flex_min")
# substitute_random replaces real attributes in this order
SUBSTITUTION_ORDER = ("flex_min", "flex_max", "total_usage")
SLOT_NAMES = tuple(f"slot_{SLOT_MINUTES * i:03d}" for i in range(N_SLOTS))
RECORD_HEADER = ("household_id", "total_usage", "flex_max", "flex_min", "day_count")


@dataclass(frozen=True)
class DailyStats:
    date: date
    peak_minute: int
    trough_minute: int
    energy: float  # kWh over the window


@dataclass(frozen=True)
class HouseholdRecord:
    household_id: str
    total_usage: float
    flex_max: float
    flex_min: float
    day_count: int
    slot_averages: Optional[tuple[Optional[float], ...]] = None
    extra_attributes: tuple[tuple[str, float], ...] = ()

    def attribute(self, name: str) -> float:
        if name in ("total_usage", "flex_max", "flex_min"):
            return getattr(self, name)
        if name in SLOT_NAMES and self.slot_averages is not None:
            value = self.slot_averages[SLOT_NAMES.index(name)]
            if value is None:
                raise UnknownAttribute(f"{self.household_id}: slot {name} has no readings")
            return value
        for key, value in self.extra_attributes:
            if key == name:
                return value
        raise UnknownAttribute(f"{self.household_id}: no attribute {name!r}")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """M rows by H named attributes.

    ``normalization`` holds the per-attribute (min, max) used by
    :func:`normalize`; ``degenerate`` names attributes that were constant
    when normalized.
    """

    attribute_names: tuple[str, ...]
    rows: np.ndarray
    ids: Optional[tuple[str, ...]] = None
    normalization: Optional[tuple[tuple[float, float], ...]] = None
    degenerate: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float, copy=True)
        if rows.ndim == 1:
            rows = rows.reshape(-1, 1) if len(self.attribute_names) == 1 else rows.reshape(1, -1)
        if rows.ndim != 2 or rows.shape[1] != len(self.attribute_names):
            raise ValueError(f"rows shape {rows.shape} does not match {len(self.attribute_names)} attributes")
        if not np.all(np.isfinite(rows)):
            raise ValueError("feature matrix contains non-finite values")
        if len(set(self.attribute_names)) != len(self.attribute_names):
            raise ValueError("duplicate attribute names")
        if self.ids is not None and len(self.ids) != rows.shape[0]:
            raise ValueError("ids length does not match row count")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "attribute_names", tuple(self.attribute_names))
        if self.ids is not None:
            object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def h(self) -> int:
        return self.rows.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self._index(name)]

    def _index(self, name: str) -> int:
        try:
            return self.attribute_names.index(name)
        except ValueError:
            raise UnknownAttribute(f"no attribute {name!r}; have {list(self.attribute_names)}") from None

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        idx = [self._index(n) for n in names]
        norm = None if self.normalization is None else tuple(self.normalization[i] for i in idx)
        return FeatureMatrix(
            tuple(names), self.rows[:, idx], self.ids, norm, frozenset(self.degenerate & set(names))
        )

    def drop(self, names: Iterable[str]) -> "FeatureMatrix":
        names = set(names)
        return self.select([n for n in self.attribute_names if n not in names])

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.attribute_names == other.attribute_names
            and self.ids == other.ids
            and self.normalization == other.normalization
            and self.degenerate == other.degenerate
            and np.array_equal(self.rows, other.rows)
        )


def daily_stats(s: EveningSlice) -> DailyStats:
    """Peak and trough minute (after 16:00) and window energy for one day.

    Ties go to the earliest slot. Energy is rescaled by 48/filled so that a
    partially observed day estimates a full window.
    """
    filled = [(i, v) for i, v in enumerate(s.slots) if v is not None]
    if not filled:
        raise EmptySlice(f"{s.household_id} {s.date}: no readings")
    peak_i, peak_v = filled[0]
    trough_i, trough_v = filled[0]
    total = 0.0
    for i, v in filled:
        total += v
        if v > peak_v:
            peak_i, peak_v = i, v
        if v < trough_v:
            trough_i, trough_v = i, v
    energy = total * (SLOT_MINUTES / 60) / 1000 * (N_SLOTS / len(filled))
    return DailyStats(s.date, SLOT_MINUTES * peak_i, SLOT_MINUTES * trough_i, energy)


def flexibility(values: Sequence[float]) -> float:
    """Sample standard deviation (n - 1 divisor) of minute offsets."""
    values = list(values)
    n = len(values)
    if n < 2:
        raise InsufficientDays(f"flexibility needs at least 2 days, got {n}")
    mean = math.fsum(values) / n
    return math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))


def representative_record(slices: Sequence[EveningSlice]) -> HouseholdRecord:
    if len(slices) < 2:
        hid = slices[0].household_id if slices else "?"
        raise InsufficientDays(f"{hid}: {len(slices)} qualifying day(s), need 2")
    hids = {s.household_id for s in slices}
    if len(hids) != 1:
        raise ValueError(f"slices span several households: {sorted(hids)}")
    stats = [daily_stats(s) for s in slices]
    sums = [0.0] * N_SLOTS
    counts = [0] * N_SLOTS
    for s in slices:
        for i, v in enumerate(s.slots):
            if v is not None:
                sums[i] += v
                counts[i] += 1
    slot_avg = tuple(sums[i] / counts[i] if counts[i] else None for i in range(N_SLOTS))
    return HouseholdRecord(
        household_id=slices[0].household_id,
        total_usage=math.fsum(d.energy for d in stats) / len(stats),
        flex_max=flexibility([d.peak_minute for d in stats]),
        flex_min=flexibility([d.trough_minute for d in stats]),
        day_count=len(stats),
        slot_averages=slot_avg,
    )


def household_records(slices: Sequence[EveningSlice]) -> tuple[list[HouseholdRecord], list[str]]:
    """Records for every household with at least two days; also returns the skipped ids."""
    records, skipped = [], []
    for hid, group in group_by_household(slices).items():
        if len(group) < 2:
            skipped.append(hid)
            continue
        records.append(representative_record(group))
    return records, skipped


def build_matrix(
    records: Sequence[HouseholdRecord], attribute_selection: Sequence[str] = DEFAULT_ATTRIBUTES
) -> FeatureMatrix:
    names = tuple(attribute_selection)
    if not names:
        raise UnknownAttribute("empty attribute selection")
    rows = [[rec.attribute(n) for n in names] for rec in records]
    arr = np.array(rows, dtype=float).reshape(len(records), len(names))
    return FeatureMatrix(names, arr, tuple(r.household_id for r in records))


def normalize(matrix: FeatureMatrix) -> FeatureMatrix:
    """Min-max scale each attribute to [0, 1]; constant attributes map to 0 and are flagged."""
    if matrix.m < 1:
        raise ValueError("cannot normalize an empty matrix")
    lo = matrix.rows.min(axis=0)
    hi = matrix.rows.max(axis=0)
    span = hi - lo
    degenerate = span == 0
    safe = np.where(degenerate, 1.0, span)
    out = (matrix.rows - lo) / safe
    out[:, degenerate] = 0.0
    # float rounding can leave values a hair outside the unit interval
    np.clip(out, 0.0, 1.0, out=out)
    flagged = frozenset(n for n, d in zip(matrix.attribute_names, degenerate) if d)
    params = tuple((float(a), float(b)) for a, b in zip(lo, hi))
    return FeatureMatrix(matrix.attribute_names, out, matrix.ids, params, flagged)


def random_column(m: int, seed: int, index: int) -> np.ndarray:
    """Column ``index`` (1-based) of the seeded uniform [0, 1) stream."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    return rng.random(m)


def augment_random(matrix: FeatureMatrix, count: int, seed: int) -> FeatureMatrix:
    """Append ``count`` uniform columns named rand_1 ... rand_count."""
    if count < 0:
        raise BadCount(f"count must be non-negative, got {count}")
    if count == 0:
        return matrix
    names = tuple(f"rand_{j}" for j in range(1, count + 1))
    clash = set(names) & set(matrix.attribute_names)
    if clash:
        raise ValueError(f"matrix already has columns {sorted(clash)}")
    cols = np.column_stack([random_column(matrix.m, seed, j) for j in range(1, count + 1)])
    norm = None
    if matrix.normalization is not None:
        norm = matrix.normalization + ((0.0, 1.0),) * count
    return FeatureMatrix(
        matrix.attribute_names + names,
        np.hstack([matrix.rows, cols]),
        matrix.ids,
        norm,
        matrix.degenerate,
    )


def substitute_random(matrix: FeatureMatrix, replace_count: int, seed: int) -> FeatureMatrix:
    """Swap the last ``replace_count`` real attributes for uniform columns.

    Replacement follows :data:`SUBSTITUTION_ORDER` for the standard
    attributes, then any remaining columns from the right. The j-th
    replacement takes the name and values of ``rand_j`` from
    :func:`augment_random` with the same seed, so H is unchanged.
    """
    if not 0 <= replace_count <= matrix.h:
        raise BadCount(f"replace_count must lie in 0..{matrix.h}, got {replace_count}")
    if replace_count == 0:
        return matrix
    order = [n for n in SUBSTITUTION_ORDER if n in matrix.attribute_names]
    order += [n for n in reversed(matrix.attribute_names) if n not in order]
    rows = matrix.rows.copy()
    names = list(matrix.attribute_names)
    norm = list(matrix.normalization) if matrix.normalization is not None else None
    for j, victim in enumerate(order[:replace_count], start=1):
        i = names.index(victim)
        rows[:, i] = random_column(matrix.m, seed, j)
        names[i] = f"rand_{j}"
        if norm is not None:
            norm[i] = (0.0, 1.0)
    degenerate = frozenset(n for n in matrix.degenerate if n in names)
    return FeatureMatrix(tuple(names), rows, matrix.ids, None if norm is None else tuple(norm), degenerate)


# persistence

def _fmt(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def write_records(records: Sequence[HouseholdRecord], fh, include_slots: bool = False) -> None:
    extras: list[str] = []
    for r in records:
        for k, _ in r.extra_attributes:
            if k not in extras:
                extras.append(k)
    header = list(RECORD_HEADER) + (list(SLOT_NAMES) if include_slots else []) + extras
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for r in records:
        row = [r.household_id, _fmt(r.total_usage), _fmt(r.flex_max), _fmt(r.flex_min), str(r.day_count)]
        if include_slots:
            slots = r.slot_averages or (None,) * N_SLOTS
            row += [_fmt(v) for v in slots]
        ex = dict(r.extra_attributes)
        row += [_fmt(ex.get(k)) for k in extras]
        w.writerow(row)


def read_records(fh) -> list[HouseholdRecord]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        return []
    header = [h.strip() for h in header]
    if tuple(header[:5]) != RECORD_HEADER:
        raise ValueError(f"unexpected household record header: {header[:5]}")
    slot_cols = [i for i, h in enumerate(header) if h in SLOT_NAMES]
    extra_cols = [i for i in range(5, len(header)) if i not in slot_cols]
    out = []
    for row in reader:
        if not row:
            continue
        slots = None
        if slot_cols:
            got = {header[i]: (float(row[i]) if row[i] else None) for i in slot_cols}
            slots = tuple(got.get(n) for n in SLOT_NAMES)
        extras = tuple((header[i], float(row[i])) for i in extra_cols if row[i] != "")
        out.append(
            HouseholdRecord(
                household_id=row[0],
                total_usage=float(row[1]),
                flex_max=float(row[2]),
                flex_min=float(row[3]),
                day_count=int(row[4]),
                slot_averages=slots,
                extra_attributes=extras,
            )
        )
    return out


def write_matrix(matrix: FeatureMatrix, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("household_id",) + matrix.attribute_names)
    ids = matrix.ids if matrix.ids is not None else tuple(str(i) for i in range(matrix.m))
    for hid, row in zip(ids, matrix.rows):
        w.writerow([hid] + [repr(float(x)) for x in row])


def read_matrix(fh) -> FeatureMatrix:
    reader = csv.reader(fh)
    header = next(reader)
    if not header or header[0].strip() != "household_id":
        raise ValueError("matrix file must start with a household_id column")
    names = tuple(h.strip() for h in header[1:])
    ids, rows = [], []
    for row in reader:
        if not row:
            continue
        ids.append(row[0])
        rows.append([float(x) for x in row[1:]])
    arr = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return FeatureMatrix(names, arr, tuple(ids))


def with_extras(record: HouseholdRecord, **extras: float) -> HouseholdRecord:
    return replace(record, extra_attributes=record.extra_attributes + tuple(extras.items()))
