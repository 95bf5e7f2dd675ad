import json

import numpy as np
import pytest

from loadflex.experiments import (
    ATTRIBUTE_COUNT,
    ATTRIBUTE_QUALITY,
    CLUSTERS,
    SweepResult,
    SweepRow,
    attribute_count_matrix,
    emit_table,
    plot_rows,
    read_json,
    sweep_attribute_count,
    sweep_attribute_quality,
    sweep_clusters,
    sweep_filename,
    write_sweep,
)
from loadflex.features import FeatureMatrix
from loadflex.kmeans import KMeansConfig, from_assignments, kmeans
from loadflex.validity import INDEX_NAMES, IndexReport, index_report

CFG = KMeansConfig(restarts=5, seed=1)


@pytest.fixture(scope="module")
def count_sweep(small_corpus):
    return sweep_attribute_count(small_corpus.matrix, seed=7, config=CFG)


@pytest.fixture(scope="module")
def quality_sweep(small_corpus):
    return sweep_attribute_quality(small_corpus.matrix, seed=7, config=CFG)


class TestClusters:
    def test_single_row(self, small_corpus):
        r = sweep_clusters(small_corpus.matrix, 4, 4, CFG)
        assert [row.variable for row in r.rows] == [4]
        assert r.kind == CLUSTERS

    def test_full_range(self, small_corpus):
        r = sweep_clusters(small_corpus.matrix, 2, 20, CFG)
        assert [row.variable for row in r.rows] == list(range(2, 21))
        text = emit_table(r, display_2dp=True)
        assert len(text.splitlines()) == 20

    def test_bad_range(self, small_corpus):
        with pytest.raises(ValueError):
            sweep_clusters(small_corpus.matrix, 1, 3, CFG)
        with pytest.raises(ValueError):
            sweep_clusters(small_corpus.matrix, 5, 4, CFG)


class TestAttributeCount:
    def test_rows(self, count_sweep):
        assert [r.variable for r in count_sweep.rows] == [2, 3, 4, 5, 6, 7]
        assert [r.report.h for r in count_sweep.rows] == [2, 3, 4, 5, 6, 7]

    def test_adjusted_is_exact_division(self, count_sweep):
        for row in count_sweep.rows:
            for name in INDEX_NAMES:
                raw, adj = getattr(row.report, name), getattr(row.adjusted, name)
                assert adj == (None if raw is None else raw / row.variable)

    def test_deterministic(self, small_corpus, count_sweep):
        again = sweep_attribute_count(small_corpus.matrix, seed=7, config=CFG)
        assert again == count_sweep
        assert emit_table(again, "json") == emit_table(count_sweep, "json")

    def test_row_matrices(self, small_corpus):
        real = small_corpus.matrix
        assert attribute_count_matrix(real, 2, 0).attribute_names == ("total_usage", "flex_max")
        assert attribute_count_matrix(real, 3, 0) == real
        assert attribute_count_matrix(real, 7, 0).attribute_names[-1] == "rand_4"

    def test_row_three_is_base(self, small_corpus, count_sweep):
        base = index_report(kmeans(small_corpus.matrix, 4, CFG), small_corpus.matrix)
        assert count_sweep.rows[1].report == base


class TestAttributeQuality:
    def test_rows(self, quality_sweep):
        assert [r.variable for r in quality_sweep.rows] == [0, 1, 2, 3]
        assert {r.report.h for r in quality_sweep.rows} == {3}
        assert all(r.adjusted is None for r in quality_sweep.rows)

    def test_row_zero_is_base(self, quality_sweep, count_sweep):
        assert quality_sweep.rows[0].report == count_sweep.rows[1].report

    def test_normalizes_raw_input(self, small_corpus):
        raw = FeatureMatrix(small_corpus.matrix.attribute_names, small_corpus.matrix.rows * 40 + 3)
        a = sweep_attribute_quality(raw, seed=2, config=CFG)
        b = sweep_attribute_quality(small_corpus.matrix, seed=2, config=CFG)
        for ra, rb in zip(a.rows, b.rows):
            assert ra.report.mia == pytest.approx(rb.report.mia, rel=1e-9)


def test_ball_is_mia_squared(count_sweep, quality_sweep):
    for result in (count_sweep, quality_sweep):
        for row in result.rows:
            assert row.report.ball == pytest.approx(row.report.mia**2, abs=1e-9)


def report(mia, dbi=None, h=3):
    return IndexReport(mia=mia, cdi=0.5, smi=0.1, dbi=dbi, ball=mia * mia, k=4, h=h)


class TestEmit:
    def test_rows_sorted_and_unique(self):
        r = SweepResult(CLUSTERS, (SweepRow(3, report(0.2)), SweepRow(2, report(0.3))), 1, CFG)
        assert [row.variable for row in r.rows] == [2, 3]
        with pytest.raises(ValueError):
            SweepResult(CLUSTERS, (SweepRow(2, report(0.2)), SweepRow(2, report(0.3))), 1, CFG)

    def test_empty_dbi_cell(self):
        r = SweepResult(CLUSTERS, (SweepRow(2, report(0.25)),), 1, CFG)
        lines = emit_table(r).splitlines()
        assert lines[0] == "variable,mia,cdi,smi,dbi,ball"
        assert lines[1] == "2,0.25,0.5,0.1,,0.0625"

    def test_two_dp(self):
        r = SweepResult(CLUSTERS, (SweepRow(2, report(0.256, dbi=1.0)),), 1, CFG)
        assert emit_table(r, display_2dp=True).splitlines()[1] == "2,0.26,0.50,0.10,1.00,0.07"

    def test_json_round_trip(self, count_sweep):
        text = emit_table(count_sweep, "json")
        assert read_json(text) == count_sweep
        r = SweepResult(CLUSTERS, (SweepRow(2, report(0.25)),), 1, CFG)
        assert json.loads(emit_table(r, "json"))["rows"][0]["report"]["dbi"] is None

    def test_bad_format(self, count_sweep):
        with pytest.raises(ValueError):
            emit_table(count_sweep, "xml")

    def test_files(self, tmp_path, count_sweep, quality_sweep):
        assert sweep_filename(count_sweep, "csv") == "sweep_attribute_count_7.csv"
        paths = write_sweep(count_sweep, tmp_path)
        assert [p.name for p in paths] == ["sweep_attribute_count_7.csv", "sweep_attribute_count_adjusted_7.csv"]
        assert [p.name for p in write_sweep(quality_sweep, tmp_path)] == ["sweep_attribute_quality_7.csv"]
        assert count_sweep.kind == ATTRIBUTE_COUNT and quality_sweep.kind == ATTRIBUTE_QUALITY


def test_plot_rows():
    m = FeatureMatrix(("a", "b", "c"), np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 0.25]]))
    text = plot_rows(m, from_assignments(m, [1, 0]), ["a", "c"])
    assert text.splitlines() == ["# a c cluster", "0.0 0.5 1", "1.0 0.25 0"]
    with pytest.raises(ValueError):
        plot_rows(m, from_assignments(m, [1, 0]), ["a"])
