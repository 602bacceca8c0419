from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxsel.scores import HIGHER_IS_CLOSER, LOWER_IS_CLOSER, ScoreTable
from proxsel.selection import (
    DiversityConfig,
    diversity,
    mixture_composition,
    read_manifest,
    score_histogram,
    selection_shift_report,
    top_k_select,
    write_manifest,
)


def _table(ids, values, direction=HIGHER_IS_CLOSER, datasets=None, scorer="learned_estimator"):
    ids = list(ids)
    return ScoreTable(
        scorer=scorer,
        direction=direction,
        ids=np.asarray(ids, dtype=np.uint64),
        datasets=datasets or ["d"] * len(ids),
        values=np.asarray(values, dtype=np.float64),
    )


class TestTopKSelect:
    def test_higher_is_closer(self):
        manifest = top_k_select(_table([1, 2, 3], [0.9, 0.1, 0.5]), k=2)
        assert [(e.rank, e.id) for e in manifest.entries] == [(1, 1), (2, 3)]

    def test_tie_prefers_smaller_id(self):
        manifest = top_k_select(_table([1, 2], [0.5, 0.5]), k=1)
        assert manifest.entries[0].id == 1

    def test_lower_is_closer(self):
        manifest = top_k_select(_table([1, 2], [7.5, 0.0], direction=LOWER_IS_CLOSER), k=1)
        assert manifest.entries[0].id == 2

    def test_k_zero(self):
        manifest = top_k_select(_table([1, 2], [0.1, 0.2]), k=0)
        assert manifest.entries == []
        assert manifest.k_requested == 0

    def test_k_exceeding_pool_returns_all(self):
        manifest = top_k_select(_table([1, 2, 3], [0.3, 0.2, 0.1]), k=10)
        assert len(manifest) == 3
        assert manifest.k_requested == 10
        assert manifest.pool_size == 3

    def test_negative_k(self):
        with pytest.raises(ValueError):
            top_k_select(_table([1], [0.5]), k=-1)

    def test_ranks_are_contiguous(self):
        rng = np.random.default_rng(0)
        table = _table(range(100), rng.uniform(0, 1, 100))
        manifest = top_k_select(table, 17)
        assert [e.rank for e in manifest.entries] == list(range(1, 18))

    @pytest.mark.parametrize("direction", [HIGHER_IS_CLOSER, LOWER_IS_CLOSER])
    def test_matches_full_sort_oracle(self, direction):
        rng = np.random.default_rng(7)
        n = 500
        values = np.round(rng.uniform(0, 1, n), 2)  # rounding forces ties
        ids = rng.permutation(n)
        table = _table(ids, values, direction=direction)
        for k in (0, 1, 5, 50, n, n + 10):
            manifest = top_k_select(table, k)
            reverse = direction == HIGHER_IS_CLOSER
            oracle = sorted(
                zip(values.tolist(), ids.tolist()),
                key=lambda p: (-p[0] if reverse else p[0], p[1]),
            )[: min(k, n)]
            assert [e.id for e in manifest.entries] == [int(i) for _, i in oracle]

    def test_nesting(self):
        rng = np.random.default_rng(3)
        table = _table(range(200), rng.uniform(0, 1, 200))
        previous: set[int] = set()
        for k in range(0, 60, 7):
            ids = set(top_k_select(table, k).ids())
            assert previous <= ids
            previous = ids

    @given(st.integers(0, 30))
    @settings(max_examples=30, deadline=None)
    def test_invariant_under_monotone_transform(self, k):
        rng = np.random.default_rng(k)
        values = rng.uniform(0.01, 0.99, 30)
        table = _table(range(30), values)
        transformed = _table(range(30), np.log(values / (1 - values)))
        assert top_k_select(table, k).ids() == top_k_select(transformed, k).ids()

    def test_manifest_bytes_deterministic(self, tmp_path):
        rng = np.random.default_rng(5)
        table = _table(range(50), rng.uniform(0, 1, 50))
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_manifest(top_k_select(table, 10, config={"seed": 1}), a)
        write_manifest(top_k_select(table, 10, config={"seed": 1}), b)
        assert a.read_bytes() == b.read_bytes()

    def test_manifest_round_trip(self, tmp_path):
        table = _table([4, 5, 6], [0.1, 0.9, 0.6], datasets=["x", "y", "z"])
        manifest = top_k_select(table, 2, config={"k": 2, "seed": 0})
        path = tmp_path / "m.jsonl"
        write_manifest(manifest, path)
        loaded = read_manifest(path)
        assert loaded.entries == manifest.entries
        assert loaded.k_requested == 2
        assert loaded.config == {"k": 2, "seed": 0}


class TestMixtureComposition:
    def test_four_entry_split(self):
        table = _table([1, 2, 3, 4], [0.4, 0.3, 0.2, 0.1], datasets=["a", "a", "b", "c"])
        report = mixture_composition(top_k_select(table, 4))
        assert report.total == 4
        assert report.rows[0] == {"dataset": "a", "count": 2, "percentage": 50.0}
        assert {r["dataset"]: r["percentage"] for r in report.rows} == {
            "a": 50.0,
            "b": 25.0,
            "c": 25.0,
        }

    def test_single_dataset(self):
        table = _table([1, 2], [0.2, 0.1], datasets=["only", "only"])
        report = mixture_composition(top_k_select(table, 2))
        assert report.rows == [{"dataset": "only", "count": 2, "percentage": 100.0}]

    def test_empty_manifest(self):
        report = mixture_composition(top_k_select(_table([], []), 0))
        assert report.total == 0
        assert report.rows == []

    def test_percentages_sum_to_hundred(self):
        rng = np.random.default_rng(11)
        datasets = [f"ds{int(i)}" for i in rng.integers(0, 7, 321)]
        table = _table(range(321), rng.uniform(0, 1, 321), datasets=datasets)
        report = mixture_composition(top_k_select(table, 321))
        assert math.isclose(sum(r["percentage"] for r in report.rows), 100.0, abs_tol=1e-6)
        assert sum(r["count"] for r in report.rows) == 321


class TestScoreHistogram:
    def test_two_bins(self):
        hist = score_histogram(_table([1, 2, 3, 4], [0.1, 0.1, 0.9, 0.9]), bins=2)
        assert hist["counts"] == [2, 2]
        assert hist["bin_edges"] == [0.0, 0.5, 1.0]

    def test_counts_sum_to_table_size(self):
        rng = np.random.default_rng(0)
        table = _table(range(500), rng.uniform(0, 1, 500))
        hist = score_histogram(table, bins=50)
        assert sum(hist["counts"]) == 500

    def test_grouped_series_sum_to_dataset_sizes(self):
        table = _table(
            [1, 2, 3, 4, 5],
            [0.1, 0.2, 0.3, 0.8, 0.9],
            datasets=["a", "a", "b", "b", "b"],
        )
        hist = score_histogram(table, bins=4, group_by_dataset=True)
        assert sum(hist["series"]["a"]) == 2
        assert sum(hist["series"]["b"]) == 3

    def test_non_learned_uses_observed_range(self):
        table = _table([1, 2, 3], [5.0, 10.0, 15.0], direction=LOWER_IS_CLOSER, scorer="avg_distance")
        hist = score_histogram(table, bins=2)
        assert hist["bin_edges"][0] == 5.0
        assert hist["bin_edges"][-1] == 15.0
        assert sum(hist["counts"]) == 3

    def test_degenerate_range(self):
        table = _table([1, 2], [3.0, 3.0], scorer="avg_distance", direction=LOWER_IS_CLOSER)
        hist = score_histogram(table, bins=3)
        assert sum(hist["counts"]) == 2


class TestDiversity:
    def test_identical_points_exactly_one(self):
        assert diversity(np.zeros((7, 3))) == 1.0

    def test_two_points_closed_form(self):
        got = diversity(np.array([[0.0, 0.0], [1.0, 0.0]]), DiversityConfig(t=2.0))
        assert got == pytest.approx(math.e**2, abs=1e-9)

    def test_lower_bound(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            X = rng.normal(0, rng.uniform(0.01, 3), (int(rng.integers(2, 60)), 3))
            assert diversity(X) >= 1.0

    def test_scale_monotonicity(self):
        rng = np.random.default_rng(4)
        for trial in range(20):
            X = rng.normal(0, 1, (int(rng.integers(2, 40)), int(rng.integers(1, 6))))
            c = float(rng.uniform(1.01, 4.0))
            assert diversity(X * c) >= diversity(X)

    def test_monte_carlo_close_to_exact(self):
        rng = np.random.default_rng(9)
        X = rng.normal(0, 0.4, (300, 3))
        exact = diversity(X, DiversityConfig(exact_threshold=4096))
        sampled = diversity(X, DiversityConfig(exact_threshold=10, pair_samples=400_000, seed=0))
        assert sampled == pytest.approx(exact, rel=0.05)

    def test_monte_carlo_deterministic(self):
        rng = np.random.default_rng(2)
        X = rng.normal(0, 1, (50, 2))
        cfg = DiversityConfig(exact_threshold=10, pair_samples=1000, seed=5)
        assert diversity(X, cfg) == diversity(X, cfg)

    def test_needs_two_points(self):
        with pytest.raises(ValueError, match="at least 2"):
            diversity(np.zeros((1, 3)))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DiversityConfig(t=0.0)
        with pytest.raises(ValueError):
            DiversityConfig(pair_samples=0)


class TestSelectionShiftReport:
    def test_top_half_mean_dominates(self):
        rng = np.random.default_rng(6)
        table = _table(range(100), rng.uniform(0, 1, 100))
        manifest = top_k_select(table, 50)
        report = selection_shift_report(table, manifest)
        assert report["selected"]["mean"] >= report["pool"]["mean"]
        assert report["shift_ok"]

    def test_k_equal_n_identical_stats(self):
        rng = np.random.default_rng(8)
        table = _table(range(40), rng.uniform(0, 1, 40))
        report = selection_shift_report(table, top_k_select(table, 40))
        assert report["selected"]["mean"] == report["pool"]["mean"]
        assert report["selected"]["median"] == report["pool"]["median"]

    def test_missing_manifest_id(self):
        table = _table([1, 2, 3], [0.1, 0.2, 0.3])
        manifest = top_k_select(_table([99], [0.5]), 1)
        with pytest.raises(ValueError, match="missing"):
            selection_shift_report(table, manifest)

    def test_histograms_present(self):
        rng = np.random.default_rng(10)
        table = _table(range(60), rng.uniform(0, 1, 60))
        report = selection_shift_report(table, top_k_select(table, 10), bins=20)
        assert sum(report["pool_histogram"]["counts"]) == 60
        assert sum(report["selected_histogram"]["counts"]) == 10
