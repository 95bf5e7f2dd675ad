import io
from dataclasses import replace
from datetime import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadflex import features, ingest
from loadflex.synth import (
    Archetype,
    SynthSpec,
    default_spec,
    generate,
    ground_truth_labels,
    household_ids,
    jitter_pair_spec,
    read_ground_truth,
    write_ground_truth,
)

FLAT = Archetype("flat", 200.0, 1000.0, 120.0, 0.0, 0.0)


def records_for(spec):
    slices, _ = ingest.build_day_slices(generate(spec))
    return features.household_records(slices)[0]


class TestValidation:
    def test_empty_archetypes(self):
        with pytest.raises(ValueError):
            SynthSpec((), days=10)

    def test_zero_count(self):
        with pytest.raises(ValueError):
            SynthSpec(((FLAT, 0),), days=10)

    def test_one_day(self):
        with pytest.raises(ValueError):
            SynthSpec(((FLAT, 1),), days=1)

    @pytest.mark.parametrize("field,value", [("base_load", -1.0), ("peak_time_mean", 236.0), ("peak_time_jitter", -2.0)])
    def test_archetype_bounds(self, field, value):
        with pytest.raises(ValueError):
            replace(FLAT, **{field: value})


class TestGenerate:
    def test_zero_jitter_gives_zero_flex(self):
        recs = records_for(SynthSpec(((FLAT, 3),), days=8, seed=2))
        assert [r.flex_max for r in recs] == [0.0, 0.0, 0.0]
        assert [r.flex_min for r in recs] == [0.0, 0.0, 0.0]

    def test_constant_energy_without_jitter(self):
        slices, _ = ingest.build_day_slices(generate(SynthSpec(((FLAT, 2),), days=6, seed=5)))
        for hid in ("H001", "H002"):
            energies = {features.daily_stats(s).energy for s in slices if s.household_id == hid}
            assert len(energies) == 1

    def test_deterministic(self):
        spec = default_spec(seed=11, households=8, days=5)
        assert generate(spec) == generate(spec)
        assert generate(spec) != generate(replace(spec, seed=12))

    def test_shape_and_window(self):
        spec = default_spec(seed=1, households=6, days=12)
        rs = generate(spec)
        assert len(rs) == 6 * 12 * 48
        cal = ingest.DayCalendar()
        for r in rs:
            assert time(16) <= r.timestamp.time() < time(20)
            assert ingest.is_working_day(r.timestamp.date(), cal)
            assert r.power >= 0

    def test_every_slice_complete(self):
        slices, report = ingest.build_day_slices(generate(default_spec(seed=4, households=5, days=7)))
        assert len(slices) == 35 and report.dropped_incomplete == []
        assert all(s.completeness == 1.0 for s in slices)

    def test_households_independent_of_others(self):
        # a household's stream depends on (seed, index) and its archetype only
        a = SynthSpec(((FLAT, 2),), days=4, seed=9)
        b = SynthSpec(((FLAT, 5),), days=4, seed=9)
        first = [r for r in generate(a) if r.household_id == "H001"]
        assert first == [r for r in generate(b) if r.household_id == "H001"]

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_readings_round_trip_through_text(self, seed):
        rs = generate(SynthSpec(((FLAT, 1), (replace(FLAT, name="j", peak_time_jitter=30.0), 1)), days=2, seed=seed))
        buf = io.StringIO()
        ingest.write_readings(rs, buf)
        buf.seek(0)
        assert ingest.parse_readings(buf) == rs


class TestLabels:
    def test_pair_counts(self):
        labels = ground_truth_labels(jitter_pair_spec(seed=0))
        assert len(labels) == 90
        assert sorted(labels.values()).count("steady") == 45
        assert sorted(labels.values()).count("variable") == 45

    def test_independent_of_days(self):
        a = ground_truth_labels(jitter_pair_spec(seed=3, days=10))
        b = ground_truth_labels(jitter_pair_spec(seed=3, days=100))
        assert a == b

    def test_ids(self):
        assert household_ids(default_spec(households=180))[:2] == ["H001", "H002"]
        assert household_ids(default_spec(households=180))[-1] == "H180"

    def test_default_split(self):
        labels = ground_truth_labels(default_spec())
        assert sorted(np.unique(list(labels.values()), return_counts=True)[1].tolist()) == [45, 45, 45, 45]

    def test_round_trip(self):
        labels = ground_truth_labels(default_spec(seed=2, households=12, days=3))
        buf = io.StringIO()
        write_ground_truth(labels, buf)
        assert buf.getvalue().startswith("household_id,archetype\n")
        buf.seek(0)
        assert read_ground_truth(buf) == labels


@pytest.mark.slow
def test_flex_max_grows_with_jitter():
    medians = []
    for jitter in (0.0, 15.0, 30.0, 60.0):
        arch = replace(FLAT, name=f"j{jitter:g}", peak_time_jitter=jitter)
        values = [records_for(SynthSpec(((arch, 5),), days=40, seed=s)) for s in range(20)]
        medians.append(float(np.median([r.flex_max for recs in values for r in recs])))
    assert medians[0] == 0.0
    assert all(b >= a for a, b in zip(medians, medians[1:]))
    assert medians[-1] > medians[1]
