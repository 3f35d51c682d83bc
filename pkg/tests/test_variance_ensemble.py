# Anomalycounter
# Copyright (C) 2025 Die Anomalycounter-Entwickler
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

import json
import unittest
from dataclasses import replace

import numpy as np
import pytest

from core.boosted_embedding import DEFAULT_SPECS, EmbeddingSpec, anomaly_distances, fit_boosted
from core.bootstrap_plan import CredibilityWeights, draw_plan
from core.exceptions import ConfigError, DegenerateInputError, PipelineError
from core.gmm_scoring import EmConfig, fit_em, votes
from core.variance_ensemble import (
    EnsembleVerdict,
    FittedEnsemble,
    ModelVarianceReport,
    PipelineConfig,
    ProbMatrix,
    SamplingConfig,
    ensemble_decide,
    ensemble_weights,
    estimate_model_variance,
    fit_ensemble,
    oob_summary,
    run_pipeline,
    sample_probs,
    val_stats,
)


def _weights(W) -> CredibilityWeights:
    return CredibilityWeights(W=np.asarray(W, dtype=float), coverage_fallback_rows=frozenset())


class TestOobSummary:
    def test_single_row_example(self):
        summary = oob_summary(ProbMatrix(P=[[0.4, 0.2, 0.6]], model_id=0), _weights([[0.5, 0.5]]))
        assert summary.z[0] == pytest.approx(0.4)
        assert summary.r[0] == pytest.approx(0.0, abs=1e-15)

    def test_perfect_agreement_has_zero_margin(self):
        P = np.repeat(np.array([[0.1], [0.7], [0.9]]), 4, axis=1)
        summary = oob_summary(ProbMatrix(P=P, model_id=0), _weights(np.full((3, 3), 1 / 3)))
        np.testing.assert_allclose(summary.r, 0.0, atol=1e-15)

    def test_matches_row_dot_products(self):
        rng = np.random.default_rng(3)
        P = rng.uniform(size=(30, 6))
        W = rng.uniform(size=(30, 5))
        W /= W.sum(axis=1, keepdims=True)
        summary = oob_summary(ProbMatrix(P=P, model_id=1), _weights(W))
        for i in range(30):
            z = sum(P[i, j + 1] * W[i, j] for j in range(5))
            assert summary.z[i] == pytest.approx(z, abs=1e-12)
            assert summary.r[i] == pytest.approx(abs(z - P[i, 0]), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ConfigError, match="Dimensionen"):
            oob_summary(ProbMatrix(P=np.zeros((4, 3)), model_id=0), _weights(np.full((4, 3), 1 / 3)))

    def test_probabilities_must_be_in_unit_interval(self):
        with pytest.raises(ConfigError):
            ProbMatrix(P=[[0.2, 1.5]], model_id=0)


class TestValStats:
    def test_symmetric_example(self):
        mu, sigma = val_stats(0.6, [0.1, 0.1])
        assert mu == 0.6
        assert sigma == pytest.approx(0.1)

    def test_zero_margins(self):
        assert val_stats(0.3, np.zeros(5)) == (0.3, 0.0)

    def test_matches_materialised_set(self):
        rng = np.random.default_rng(8)
        r = rng.uniform(0.0, 0.4, size=37)
        z = 0.42
        q = np.concatenate([z + r, z - r])
        mu, sigma = val_stats(z, r)
        assert mu == pytest.approx(q.mean(), abs=1e-12)
        assert sigma == pytest.approx(q.std(), abs=1e-12)

    def test_empty_margins(self):
        with pytest.raises(DegenerateInputError):
            val_stats(0.5, [])


class TestSampling:
    def test_no_spread_returns_mean(self):
        samples = sample_probs(0.37, 0.0, SamplingConfig(L=50, epsilon=0.0))
        assert np.all(samples == 0.37)

    def test_symmetric_around_threshold(self):
        samples = sample_probs(0.5, 0.2, SamplingConfig(L=10_000, seed=4), key=(0, 0))
        assert abs(np.mean(samples > 0.5) - 0.5) < 4 * 0.005

    def test_moments(self):
        samples = sample_probs(0.7, 0.15, SamplingConfig(L=100_000, epsilon=0.05, seed=1))
        assert samples.mean() == pytest.approx(0.7, rel=0.01)
        assert samples.std() == pytest.approx(0.2, rel=0.01)

    def test_streams_are_keyed(self):
        config = SamplingConfig(L=20, seed=5)
        np.testing.assert_array_equal(sample_probs(0.5, 0.1, config, (1, 2)), sample_probs(0.5, 0.1, config, (1, 2)))
        assert not np.array_equal(sample_probs(0.5, 0.1, config, (1, 2)), sample_probs(0.5, 0.1, config, (2, 1)))

    def test_negative_sigma(self):
        with pytest.raises(ConfigError):
            sample_probs(0.5, -0.1, SamplingConfig())


class TestModelVariance:
    def test_stable_model(self):
        assert estimate_model_variance([np.full(10, 0.9), np.full(10, 0.8)]) == 0.0

    def test_maximal_instability(self):
        half = np.array([0.2, 0.8] * 5)
        assert estimate_model_variance([half, half, half]) == 0.25

    def test_mixed(self):
        samples = [np.full(4, 0.9), np.array([0.2, 0.8, 0.2, 0.8]), np.full(4, 0.1)]
        assert estimate_model_variance(samples) == pytest.approx(1 / 12)

    def test_threshold_is_strict(self):
        assert estimate_model_variance([np.full(6, 0.5)]) == 0.0

    def test_empty(self):
        with pytest.raises(DegenerateInputError):
            estimate_model_variance([])


class TestEnsembleWeights(unittest.TestCase):
    def test_examples(self):
        cases = [
            ((0.0, 0.25), (1.0, 0.0)),
            ((0.125, 0.125), (0.5, 0.5)),
            ((0.1,), (1.0,)),
        ]
        for mu, expected in cases:
            with self.subTest(mu=mu):
                np.testing.assert_allclose(ensemble_weights(mu), expected)

    def test_simplex(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            w = ensemble_weights(rng.uniform(0.0, 0.25, size=6))
            self.assertTrue(np.all(w >= 0.0))
            self.assertAlmostEqual(float(w.sum()), 1.0, places=12)

    def test_higher_variance_never_gains_weight(self):
        mu = np.array([0.05, 0.1, 0.2])
        before = ensemble_weights(mu)[1]
        for bumped in (0.11, 0.15, 0.2, 0.249):
            mu_up = mu.copy()
            mu_up[1] = bumped
            self.assertLessEqual(ensemble_weights(mu_up)[1], before)

    def test_all_models_maximally_unstable(self):
        with self.assertRaises(DegenerateInputError):
            ensemble_weights([0.25, 0.25])

    def test_out_of_range(self):
        with self.assertRaises(ConfigError):
            ensemble_weights([0.3])


class TestEnsembleDecide:
    def test_examples(self):
        verdict = ensemble_decide([1, 0], [0.6, 0.4])
        assert verdict.combined_score == pytest.approx(0.6)
        assert verdict.decision == 1
        assert ensemble_decide([0, 0, 0], [0.2, 0.3, 0.5]).decision == 0
        assert ensemble_decide([1, 1], [0.5, 0.5]).combined_score == pytest.approx(1.0)

    def test_exactly_half_is_not_an_anomaly(self):
        assert ensemble_decide([1, 0], [0.5, 0.5]).decision == 0

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            ensemble_decide([1, 0, 1], [0.5, 0.5])

    def test_inconsistent_verdict_rejected(self):
        with pytest.raises(ConfigError):
            EnsembleVerdict(votes=(1,), combined_score=1.0, decision=0)


class TestConfigs:
    def test_pipeline_config_excludes_workers_from_dict(self):
        config = PipelineConfig(workers=3)
        assert "workers" not in config.to_dict()
        assert config.effective_workers == 3

    @pytest.mark.parametrize("kwargs", [{"alpha": 0.5}, {"B": 0}, {"boost_eps": 0.0}, {"workers": 0}])
    def test_invalid_pipeline_config(self, kwargs):
        with pytest.raises(ConfigError):
            PipelineConfig(**kwargs)

    def test_report_bounds(self):
        with pytest.raises(ConfigError):
            ModelVarianceReport(mu_sigma=[0.3], weights=[1.0], per_val_mean=[[0.5]], per_val_sigma=[[0.1]])


class TestFitEnsemble:
    def test_report_post_conditions(self, fitted_ensemble, small_split):
        _, val = small_split
        report = fitted_ensemble.report
        assert fitted_ensemble.M == 3
        assert fitted_ensemble.B == 4
        assert all(len(row) == 5 for row in fitted_ensemble.models)
        assert np.all((report.mu_sigma >= 0.0) & (report.mu_sigma <= 0.25))
        assert np.all(report.weights >= 0.0)
        assert report.weights.sum() == pytest.approx(1.0)
        assert report.per_val_mean.shape == (3, len(val))
        assert np.all(report.per_val_sigma >= 0.0)

    def test_verdicts_follow_weights(self, fitted_ensemble, small_split):
        _, val = small_split
        verdicts = fitted_ensemble.score(val)
        assert len(verdicts) == len(val)
        for verdict in verdicts[:25]:
            assert verdict.combined_score == pytest.approx(float(np.dot(verdict.votes, fitted_ensemble.report.weights)))
            assert verdict.decision == int(verdict.combined_score > 0.5)
            assert -1e-12 <= verdict.weighted_probability <= 1.0 + 1e-12

    def test_worker_count_does_not_change_result(self, small_split, small_pipeline, small_sampling):
        train, val = small_split
        specs = DEFAULT_SPECS[:2]
        serial = fit_ensemble(train, val, specs, replace(small_pipeline, workers=1), EmConfig(), small_sampling)
        parallel = fit_ensemble(train, val, specs, replace(small_pipeline, workers=4), EmConfig(), small_sampling)
        np.testing.assert_array_equal(serial.report.mu_sigma, parallel.report.mu_sigma)
        np.testing.assert_array_equal(serial.report.weights, parallel.report.weights)
        assert serial.to_dict() == parallel.to_dict()

    def test_single_model_verdict_equals_vote(self, small_split, small_pipeline, small_sampling):
        train, val = small_split
        report, verdicts = run_pipeline(train, val, DEFAULT_SPECS[:1], small_pipeline, EmConfig(), small_sampling)
        assert report.weights.tolist() == [1.0]
        assert all(v.decision == v.votes[0] for v in verdicts)

    def test_single_bootstrap_reduces_to_plain_pipeline(self, small_split, small_sampling):
        train, val = small_split
        spec = EmbeddingSpec(("hour_of_day", "day_of_week"))
        pipeline = PipelineConfig(alpha=0.9, B=1, seed=21, workers=1)
        _, verdicts = run_pipeline(train, val, [spec], pipeline, EmConfig(), small_sampling)

        in_bag = draw_plan(len(train), 1, 0.9, 21).in_bag(1)
        model = fit_boosted(train.take(in_bag), spec, pipeline.boost_eps)
        gmm = fit_em(anomaly_distances(model, train), EmConfig())
        expected = votes(gmm, anomaly_distances(model, val))
        assert [v.decision for v in verdicts] == expected.tolist()

    def test_mixture_sees_all_training_distances(self, fitted_ensemble, small_split):
        train, _ = small_split
        for j in (1, fitted_ensemble.B):
            model = fitted_ensemble.models[0][j]
            assert fitted_ensemble.gmms[0][j] == fit_em(anomaly_distances(model, train), EmConfig(seed=11))

    def test_serialised_ensemble_scores_identically(self, fitted_ensemble, small_split):
        _, val = small_split
        restored = FittedEnsemble.from_dict(json.loads(json.dumps(fitted_ensemble.to_dict())))
        original = fitted_ensemble.score_arrays(val)
        for a, b in zip(original, restored.score_arrays(val)):
            np.testing.assert_array_equal(a, b)

    def test_validation_must_follow_training(self, small_split):
        train, val = small_split
        with pytest.raises(ConfigError, match="zeitlich nach"):
            fit_ensemble(val, train, DEFAULT_SPECS[:1], PipelineConfig(B=1))

    def test_empty_validation(self, small_split):
        train, _ = small_split
        with pytest.raises(DegenerateInputError):
            fit_ensemble(train, train.slice(0, 0), DEFAULT_SPECS[:1], PipelineConfig(B=1))

    def test_cell_failure_names_origin(self, series_factory):
        series = series_factory(np.full(60, 4.0))
        with pytest.raises(PipelineError) as excinfo:
            fit_ensemble(series.slice(0, 50), series.slice(50, 60), DEFAULT_SPECS[:1], PipelineConfig(B=2, workers=1))
        assert excinfo.value.model_index == 0
        assert excinfo.value.bootstrap_index == 0
        assert "[Modell 0, Bootstrap 0]" in str(excinfo.value)
