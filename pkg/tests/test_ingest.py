import io
import random
from datetime import date, datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadflex.errors import MalformedLine, NegativePower
from loadflex.ingest import (
    DayCalendar,
    MeterReading,
    build_day_slices,
    filter_window,
    is_working_day,
    parse_readings,
    read_holidays,
    write_readings,
)

UTC = timezone.utc


def at(day: date, hh: int, mm: int, ss: int = 0, tz=UTC) -> datetime:
    return datetime(day.year, day.month, day.day, hh, mm, ss, tzinfo=tz)


def full_day(hid="H1", day=date(2011, 3, 7), watts=100.0):
    return [MeterReading(hid, at(day, 16, 0) + timedelta(minutes=5 * i), watts) for i in range(48)]


class TestParse:
    def test_single_line(self):
        out = parse_readings(["H042,2011-03-07T16:05:00+00:00,523"])
        assert out == [MeterReading("H042", datetime(2011, 3, 7, 16, 5, tzinfo=UTC), 523.0)]

    def test_negative_power(self):
        with pytest.raises(NegativePower) as exc:
            parse_readings(["H042,2011-03-07T16:05:00+00:00,-5"])
        assert exc.value.line_no == 1

    def test_empty_stream(self):
        assert parse_readings([]) == []

    def test_header_skipped(self):
        out = parse_readings(io.StringIO("household_id,timestamp,watts\nH1,2011-03-07T16:00:00Z,1\n"))
        assert len(out) == 1
        assert out[0].timestamp.utcoffset() == timedelta(0)

    @pytest.mark.parametrize(
        "line",
        [
            "H1,2011-03-07T16:05:00+00:00",
            "H1,2011-03-07T16:05:00+00:00,5,6",
            "H1,not-a-time,5",
            "H1,2011-03-07T16:05:00,5",  # no offset
            "H1,2011-03-07T16:05:00+00:00,abc",
            "H1,2011-03-07T16:05:00+00:00,nan",
            ",2011-03-07T16:05:00+00:00,5",
        ],
    )
    def test_malformed(self, line):
        with pytest.raises(MalformedLine):
            parse_readings(["H1,2011-03-07T16:00:00+00:00,1", line])

    def test_collects_errors_with_line_numbers(self):
        errors = []
        text = ["H1,2011-03-07T16:00:00+00:00,1", "garbage", "H1,2011-03-07T16:05:00+00:00,-1", "H1,2011-03-07T16:10:00+00:00,2"]
        out = parse_readings(text, errors)
        assert [r.power for r in out] == [1.0, 2.0]
        assert [e.line_no for e in errors] == [2, 3]
        assert isinstance(errors[1], NegativePower)

    def test_round_trip(self):
        readings = full_day() + full_day("H2", watts=12.5)
        buf = io.StringIO()
        write_readings(readings, buf)
        buf.seek(0)
        assert parse_readings(buf) == readings


class TestCalendar:
    def test_weekend(self):
        assert not is_working_day(date(2011, 3, 12))

    def test_weekday(self):
        assert is_working_day(date(2011, 3, 7))

    def test_holiday(self):
        cal = DayCalendar(holidays=frozenset({date(2011, 12, 26)}))
        assert not is_working_day(date(2011, 12, 26), cal)
        assert is_working_day(date(2011, 12, 26))

    def test_bad_weekday_name(self):
        with pytest.raises(ValueError):
            DayCalendar(weekend_days=frozenset({"Caturday"}))

    def test_read_holidays(self, tmp_path):
        p = tmp_path / "hol.txt"
        p.write_text("2011-12-26\n\n# boxing day above\n2011-12-27\n")
        assert read_holidays(p) == {date(2011, 12, 26), date(2011, 12, 27)}


class TestWindow:
    day = date(2011, 3, 7)

    @pytest.mark.parametrize(
        "hms,kept",
        [((15, 59, 59), False), ((16, 0, 0), True), ((19, 59, 59), True), ((20, 0, 0), False)],
    )
    def test_bounds(self, hms, kept):
        r = MeterReading("H", at(self.day, *hms), 1.0)
        assert (filter_window([r]) == [r]) is kept

    def test_local_offset(self):
        # 15:30 UTC is 16:30 at UTC+1
        r = MeterReading("H", at(self.day, 15, 30), 1.0)
        assert filter_window([r]) == []
        assert filter_window([r], timedelta(hours=1)) == [r]

    def test_own_offset_is_wall_clock(self):
        tz = timezone(timedelta(hours=-5))
        r = MeterReading("H", at(self.day, 16, 30, tz=tz), 1.0)
        assert filter_window([r]) == [r]

    @given(st.lists(st.integers(0, 24 * 3600 - 1), max_size=40))
    def test_idempotent(self, secs):
        base = at(self.day, 0, 0)
        rs = [MeterReading("H", base + timedelta(seconds=s), 1.0) for s in secs]
        once = filter_window(rs)
        assert filter_window(once) == once


class TestSlices:
    def test_full_day(self):
        slices, report = build_day_slices(full_day())
        assert len(slices) == 1
        assert slices[0].completeness == 1.0
        assert report.kept == 1

    def test_incomplete_dropped(self):
        slices, report = build_day_slices(full_day()[::2], min_completeness=0.8)
        assert slices == []
        assert report.dropped_incomplete == [("H1", date(2011, 3, 7), 0.5)]

    def test_duplicate_last_wins(self):
        rs = full_day()
        rs.append(MeterReading("H1", at(date(2011, 3, 7), 16, 1), 999.0))
        slices, report = build_day_slices(rs)
        assert report.duplicate_slots == 1
        assert slices[0].slots[0] == 999.0

    def test_snapping(self):
        day = date(2011, 3, 7)
        rs = [
            MeterReading("H1", at(day, 16, 2, 29), 1.0),  # 149 s -> slot 0
            MeterReading("H1", at(day, 16, 2, 31), 2.0),  # 151 s -> slot 1
            MeterReading("H1", at(day, 19, 57, 31), 3.0),  # nearest slot would be 20:00
        ]
        slices, report = build_day_slices(rs, min_completeness=0.0)
        assert slices[0].slots[:2] == (1.0, 2.0)
        assert report.off_grid == 1

    def test_non_working_day_dropped(self):
        slices, report = build_day_slices(full_day(day=date(2011, 3, 12)))
        assert slices == []
        assert report.non_working_days == 1

    def test_unfiltered_readings_ignored(self):
        rs = full_day() + [MeterReading("H1", at(date(2011, 3, 7), 15, 59), 5.0)]
        slices, report = build_day_slices(rs)
        assert report.outside_window == 1
        assert slices[0].slots[0] == 100.0

    def test_sorted_by_household_then_date(self):
        rs = full_day("H2", date(2011, 3, 8)) + full_day("H1", date(2011, 3, 8)) + full_day("H2", date(2011, 3, 7))
        slices, _ = build_day_slices(rs)
        assert [(s.household_id, s.date.day) for s in slices] == [("H1", 8), ("H2", 7), ("H2", 8)]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_properties(self, seed):
        rnd = random.Random(seed)
        day0 = date(2011, 3, 7)
        rs = []
        for hid in ("A", "B", "C"):
            for d in range(rnd.randint(1, 9)):
                for i in rnd.sample(range(48), rnd.randint(0, 48)):
                    ts = at(day0 + timedelta(days=d), 16, 0) + timedelta(seconds=300 * i + rnd.randint(-100, 100))
                    if 16 <= ts.hour < 20:
                        rs.append(MeterReading(hid, ts, float(rnd.randint(0, 3000))))
        rnd.shuffle(rs)
        cal = DayCalendar()
        slices, _ = build_day_slices(rs, cal, 0.3)
        assert all(is_working_day(s.date, cal) for s in slices)
        assert sum(s.filled for s in slices) <= len(rs)
        assert build_day_slices(rs, cal, 0.3)[0] == slices
        # partition by household, process separately, merge
        parts = []
        for hid in ("A", "B", "C"):
            parts += build_day_slices([r for r in rs if r.household_id == hid], cal, 0.3)[0]
        assert sorted(parts, key=lambda s: (s.household_id, s.date)) == slices
