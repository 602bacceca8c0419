from __future__ import annotations

import numpy as np
import pytest

from proxsel.scores import HIGHER_IS_CLOSER, ScoreTable
from proxsel.selection import top_k_select
from proxsel.store import open_store
from proxsel.synth import (
    ComponentSpec,
    MixtureSpec,
    analytic_posterior,
    gen_mixture,
    multimodal_benchmark,
    read_truth,
    recovery_eval,
    standard_benchmark,
    truth_path,
    write_mixture,
)


def _two_component_spec(dim=2, seed=0):
    return MixtureSpec(
        dim=dim,
        seed=seed,
        components=(
            ComponentSpec(mean=(0.0,) * dim, std=1.0, count=100, dataset="a", aligned=True),
            ComponentSpec(mean=(5.0,) * dim, std=1.0, count=100, dataset="b"),
        ),
    )


def _gauss_1d(mean, seed=0, count=100):
    return MixtureSpec(
        dim=1,
        seed=seed,
        components=(ComponentSpec(mean=(mean,), std=1.0, count=count, dataset="g"),),
    )


class TestGenMixture:
    def test_counts_and_dim(self, tmp_path):
        path = tmp_path / "mix.fst"
        assert write_mixture(_two_component_spec(), path) == {"count": 200, "dim": 2}
        store = open_store(path)
        assert store.datasets[:100] == ["a"] * 100
        assert store.datasets[100:] == ["b"] * 100

    def test_truth_sidecar(self, tmp_path):
        path = tmp_path / "mix.fst"
        write_mixture(_two_component_spec(), path)
        truth = read_truth(truth_path(path))
        assert sum(truth.values()) == 100
        assert len(truth) == 200

    def test_zero_std_rejected(self):
        with pytest.raises(ValueError, match="std"):
            MixtureSpec(
                dim=1,
                seed=0,
                components=(ComponentSpec(mean=(0.0,), std=0.0, count=1, dataset="x"),),
            )

    def test_zero_count_rejected(self):
        with pytest.raises(ValueError, match="count"):
            MixtureSpec(
                dim=1,
                seed=0,
                components=(ComponentSpec(mean=(0.0,), std=1.0, count=0, dataset="x"),),
            )

    def test_mean_length_must_match_dim(self):
        with pytest.raises(ValueError, match="mean"):
            MixtureSpec(
                dim=3,
                seed=0,
                components=(ComponentSpec(mean=(0.0,), std=1.0, count=1, dataset="x"),),
            )

    def test_bit_identical_across_runs(self, tmp_path):
        a, b = tmp_path / "a.fst", tmp_path / "b.fst"
        write_mixture(_two_component_spec(seed=7), a)
        write_mixture(_two_component_spec(seed=7), b)
        assert a.read_bytes() == b.read_bytes()
        assert truth_path(a).read_bytes() == truth_path(b).read_bytes()

    def test_sequential_ids(self):
        records, truth = gen_mixture(_two_component_spec())
        assert [r.id for r in records] == list(range(200))
        assert [t["id"] for t in truth] == list(range(200))

    def test_spec_json_round_trip(self):
        spec = _two_component_spec(seed=11)
        assert MixtureSpec.from_json_dict(spec.to_json_dict()) == spec


class TestAnalyticPosterior:
    def test_symmetric_midpoint(self):
        target = _gauss_1d(1.0)
        pool = _gauss_1d(-1.0)
        assert analytic_posterior([0.0], target, pool) == pytest.approx(0.5, abs=1e-12)

    def test_dominance_near_target_mean(self):
        target = _gauss_1d(0.0)
        pool = _gauss_1d(10.0)
        assert analytic_posterior([0.0], target, pool) > 0.999

    def test_matches_logistic_closed_form_on_grid(self):
        # For equal-variance unit Gaussians at +-1 the posterior is exactly
        # sigmoid(2x); verified symbolically and numerically to 1e-12.
        target = _gauss_1d(1.0)
        pool = _gauss_1d(-1.0)
        for x in np.linspace(-5.0, 5.0, 101):
            expected = 1.0 / (1.0 + np.exp(-2.0 * x))
            assert analytic_posterior([x], target, pool) == pytest.approx(expected, abs=1e-12)

    def test_swapped_roles_sum_to_one(self):
        a = _gauss_1d(0.5, seed=2)
        b = _gauss_1d(-0.5, seed=3)
        for x in (-2.0, 0.0, 1.5):
            total = analytic_posterior([x], a, b) + analytic_posterior([x], b, a)
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            analytic_posterior([0.0], _two_component_spec(seed=1), _gauss_1d(2.0))

    def test_open_interval(self):
        # +-15 keeps the true posterior representable away from {0, 1};
        # beyond |2x| ~ 36 the correctly rounded double saturates.
        target = _gauss_1d(1.0)
        pool = _gauss_1d(-1.0)
        for x in (-15.0, 15.0):
            value = analytic_posterior([x], target, pool)
            assert 0.0 < value < 1.0


class TestRecoveryEval:
    def _manifest(self, ids):
        table = ScoreTable(
            scorer="learned_estimator",
            direction=HIGHER_IS_CLOSER,
            ids=np.asarray(ids, dtype=np.uint64),
            datasets=["d"] * len(ids),
            values=np.linspace(1.0, 0.5, len(ids)),
        )
        return top_k_select(table, len(ids))

    def test_exact_planted_set(self):
        truth = {i: i < 5 for i in range(10)}
        report = recovery_eval(self._manifest([0, 1, 2, 3, 4]), truth)
        assert report.precision_at_k == 1.0
        assert report.recall_at_k == 1.0

    def test_disjoint_from_planted(self):
        truth = {i: i < 5 for i in range(10)}
        report = recovery_eval(self._manifest([5, 6, 7]), truth)
        assert report.precision_at_k == 0.0

    def test_precision_recall_identity(self):
        truth = {i: i % 3 == 0 for i in range(30)}
        manifest = self._manifest(list(range(8)))
        report = recovery_eval(manifest, truth)
        assert report.precision_at_k * report.k == pytest.approx(
            report.recall_at_k * report.planted_count
        )

    def test_unknown_id(self):
        with pytest.raises(ValueError, match="not present"):
            recovery_eval(self._manifest([99]), {0: True})


class TestBenchmarks:
    def test_standard_shapes(self):
        target, pool = standard_benchmark()
        assert target.dim == pool.dim == 32
        assert sum(c.count for c in pool.components) == 20_000
        assert sum(c.count for c in pool.components if c.aligned) == 2_000
        assert sum(c.count for c in target.components) == 2_000
        for c in pool.components:
            if not c.aligned:
                assert np.linalg.norm(c.mean) == pytest.approx(8.0, abs=1e-12)
                assert c.std == 1.0
            else:
                assert np.linalg.norm(c.mean) == pytest.approx(1.0, abs=1e-12)
                assert c.std == 0.5

    def test_multimodal_has_four_planted_submodes(self):
        _, pool = multimodal_benchmark()
        planted = [c for c in pool.components if c.aligned]
        assert len(planted) == 4
        assert sum(c.count for c in planted) == 2_000
        means = {c.mean for c in planted}
        assert len(means) == 4
