"""Reading, windowing and day-slicing of 5-minute meter data.

Input is line-oriented ``household_id,timestamp,watts`` text with ISO-8601
timestamps carrying an explicit offset. Everything here is a pure function
of its inputs; the readings of separate households never interact, so the
input may be partitioned by household and processed independently.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from typing import Iterable, Iterator, Optional, Sequence, TextIO

from .errors import MalformedLine, NegativePower

logger = logging.getLogger(__name__)

WINDOW_START = time(16, 0)
WINDOW_END = time(20, 0)
SLOT_SECONDS = 300
N_SLOTS = 48
SNAP_TOLERANCE = 150  # seconds, half a slot
DEFAULT_MIN_COMPLETENESS = 0.8

_STAMP_CACHE_SIZE = 200_000

HEADER = ("household_id", "timestamp", "watts")
WEEKDAY_NAMES = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")


@dataclass(frozen=True, slots=True)
class MeterReading:
    household_id: str
    timestamp: datetime
    power: float


@dataclass(frozen=True)
class EveningSlice:
    """One household-day: 48 slots at 16:00, 16:05, ..., 19:55 local time."""

    household_id: str
    date: date
    slots: tuple[Optional[float], ...]

    def __post_init__(self):
        if len(self.slots) != N_SLOTS:
            raise ValueError(f"expected {N_SLOTS} slots, got {len(self.slots)}")

    @property
    def filled(self) -> int:
        return sum(v is not None for v in self.slots)

    @property
    def completeness(self) -> float:
        return self.filled / N_SLOTS


@dataclass(frozen=True)
class DayCalendar:
    weekend_days: frozenset[str] = frozenset({"Saturday", "Sunday"})
    holidays: frozenset[date] = frozenset()

    def __post_init__(self):
        unknown = set(self.weekend_days) - set(WEEKDAY_NAMES)
        if unknown:
            raise ValueError(f"unknown weekday names: {sorted(unknown)}")
        for d in self.holidays:
            if not isinstance(d, date):
                raise TypeError(f"holiday {d!r} is not a date")


@dataclass
class SliceReport:
    """Bookkeeping from :func:`build_day_slices`."""

    readings: int = 0
    outside_window: int = 0
    off_grid: int = 0
    duplicate_slots: int = 0
    non_working_days: int = 0
    dropped_incomplete: list[tuple[str, date, float]] = field(default_factory=list)
    kept: int = 0

    def as_dict(self) -> dict:
        return {
            "readings": self.readings,
            "outside_window": self.outside_window,
            "off_grid": self.off_grid,
            "duplicate_slots": self.duplicate_slots,
            "non_working_days": self.non_working_days,
            "dropped_incomplete": len(self.dropped_incomplete),
            "kept": self.kept,
        }


def _parse_timestamp(text: str) -> datetime:
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None or ts.utcoffset() is None:
        raise ValueError("timestamp has no UTC offset")
    return ts


def iter_readings(stream: Iterable[str], errors: Optional[list] = None) -> Iterator[MeterReading]:
    """Lazily parse reading lines. See :func:`parse_readings`."""
    # Meter logs repeat the same timestamps across households.
    stamp_cache: dict[str, datetime] = {}
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if line_no == 1 and tuple(p.lower() for p in parts) == HEADER:
            continue
        try:
            if len(parts) != 3:
                raise MalformedLine(line_no, line, f"expected 3 fields, got {len(parts)}")
            hid, ts_text, watt_text = parts
            if not hid:
                raise MalformedLine(line_no, line, "empty household id")
            ts = stamp_cache.get(ts_text)
            if ts is None:
                try:
                    ts = _parse_timestamp(ts_text)
                except ValueError as exc:
                    raise MalformedLine(line_no, line, f"bad timestamp ({exc})") from None
                if len(stamp_cache) >= _STAMP_CACHE_SIZE:
                    stamp_cache.clear()
                stamp_cache[ts_text] = ts
            try:
                power = float(watt_text)
            except ValueError:
                raise MalformedLine(line_no, line, "bad power value") from None
            if power != power or power in (float("inf"), float("-inf")):
                raise MalformedLine(line_no, line, "non-finite power value")
            if power < 0:
                raise NegativePower(line_no, line, "negative power")
        except MalformedLine as exc:
            if errors is None:
                raise
            errors.append(exc)
            continue
        yield MeterReading(hid, ts, power)


def parse_readings(stream: Iterable[str], errors: Optional[list] = None) -> list[MeterReading]:
    """Parse ``household_id,timestamp,watts`` lines into readings.

    A header line identical to ``household_id,timestamp,watts`` is skipped
    and blank lines are ignored. By default the first malformed line raises
    :class:`MalformedLine` (or :class:`NegativePower`). When an ``errors``
    list is supplied, bad lines are appended to it instead and skipped.
    """
    return list(iter_readings(stream, errors))


def read_readings(path, errors: Optional[list] = None) -> list[MeterReading]:
    with open(path, encoding="utf-8") as fh:
        return parse_readings(fh, errors)


def format_reading(r: MeterReading) -> str:
    return f"{r.household_id},{r.timestamp.isoformat()},{r.power!r}"


def write_readings(readings: Iterable[MeterReading], fh: TextIO) -> None:
    fh.write(",".join(HEADER) + "\n")
    stamps: dict[datetime, str] = {}
    lines = []
    for r in readings:
        ts = stamps.get(r.timestamp)
        if ts is None:
            if len(stamps) >= _STAMP_CACHE_SIZE:
                stamps.clear()
            ts = stamps[r.timestamp] = r.timestamp.isoformat()
        lines.append(f"{r.household_id},{ts},{r.power!r}\n")
        if len(lines) >= 100_000:
            fh.writelines(lines)
            lines.clear()
    fh.writelines(lines)


def read_holidays(path) -> frozenset[date]:
    """One ISO date per line; blank lines and ``#`` comments ignored."""
    out = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                out.add(date.fromisoformat(line))
            except ValueError:
                raise MalformedLine(line_no, line, "bad holiday date") from None
    return frozenset(out)


def is_working_day(day: date, calendar: DayCalendar = DayCalendar()) -> bool:
    return WEEKDAY_NAMES[day.weekday()] not in calendar.weekend_days and day not in calendar.holidays


def _local(ts: datetime, local_offset: Optional[timedelta]) -> datetime:
    # With no configured offset the reading's own wall-clock time is used.
    if local_offset is None:
        return ts
    return ts.astimezone(timezone(local_offset))


def in_window(ts: datetime, local_offset: Optional[timedelta] = None) -> bool:
    t = _local(ts, local_offset).time()
    return WINDOW_START <= t < WINDOW_END


def filter_window(
    readings: Iterable[MeterReading], local_offset: Optional[timedelta] = None
) -> list[MeterReading]:
    """Keep readings whose local time lies in [16:00, 20:00)."""
    return [r for r in readings if in_window(r.timestamp, local_offset)]


def build_day_slices(
    readings: Iterable[MeterReading],
    calendar: DayCalendar = DayCalendar(),
    min_completeness: float = DEFAULT_MIN_COMPLETENESS,
    local_offset: Optional[timedelta] = None,
) -> tuple[list[EveningSlice], SliceReport]:
    """Group window readings into per-household working-day slices.

    Each reading snaps to the nearest slot if it lies within 150 s of it;
    anything else is counted as off-grid. When two readings land in the same
    slot the later one in input order wins. Returns the slices sorted by
    (household_id, date) together with a :class:`SliceReport`.
    """
    if not 0.0 <= min_completeness <= 1.0:
        raise ValueError("min_completeness must lie in [0, 1]")
    report = SliceReport()
    days: dict[tuple[str, date], list] = defaultdict(lambda: [None] * N_SLOTS)
    skipped_days: set[tuple[str, date]] = set()
    for r in readings:
        report.readings += 1
        lt = _local(r.timestamp, local_offset)
        secs = (lt.hour - 16) * 3600 + lt.minute * 60 + lt.second + lt.microsecond / 1e6
        if not 0 <= secs < N_SLOTS * SLOT_SECONDS:
            report.outside_window += 1
            continue
        slot = int((secs + SNAP_TOLERANCE) // SLOT_SECONDS)
        if not 0 <= slot < N_SLOTS or abs(secs - slot * SLOT_SECONDS) > SNAP_TOLERANCE:
            report.off_grid += 1
            continue
        day = lt.date()
        key = (r.household_id, day)
        if not is_working_day(day, calendar):
            skipped_days.add(key)
            continue
        values = days[key]
        if values[slot] is not None:
            report.duplicate_slots += 1
        values[slot] = r.power
    report.non_working_days = len(skipped_days)
    if report.duplicate_slots:
        logger.warning("%d readings overwrote an earlier reading in the same slot", report.duplicate_slots)

    slices = []
    for (hid, day) in sorted(days):
        s = EveningSlice(hid, day, tuple(days[(hid, day)]))
        if s.completeness < min_completeness:
            report.dropped_incomplete.append((hid, day, s.completeness))
            continue
        slices.append(s)
    report.kept = len(slices)
    return slices, report


def slot_times() -> list[time]:
    base = datetime.combine(date(2000, 1, 1), WINDOW_START)
    return [(base + timedelta(seconds=SLOT_SECONDS * i)).time() for i in range(N_SLOTS)]


def group_by_household(slices: Sequence[EveningSlice]) -> dict[str, list[EveningSlice]]:
    out: dict[str, list[EveningSlice]] = {}
    for s in slices:
        out.setdefault(s.household_id, []).append(s)
    return out
