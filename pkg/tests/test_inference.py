import math
import unittest

import numpy as np
from scipy.integrate import trapezoid

from core.errors import DegeneratePosteriorError, RecordMismatchError
from core.fock import product_state
from core.hamiltonians import detuning_for_regime
from core.inference import (
    LikelihoodTracker,
    ThetaSubstitution,
    average_mse,
    average_series,
    estimate_and_mse,
    log_likelihood,
    log_likelihood_series,
    make_grid,
    normalize_log_posterior,
    posterior,
    prior_density,
)
from core.integrators import StepControl
from models.params import SystemParams
from models.records import ClickEvent, ClickRecord
from models.results import MseMode, ParameterGrid, PriorSpec
from models.space import FockSpace, State

CONTROL = StepControl(step=0.01, tolerance=1e-9)
SPACE = FockSpace(2, 2)
DT_BIN = 0.01


def _one_photon() -> State:
    return product_state(State.pure(np.array([0.0, 1.0])), State.pure(np.array([1.0, 0.0])))


def _vacuum() -> State:
    return product_state(State.pure(np.array([1.0, 0.0])), State.pure(np.array([1.0, 0.0])))


def _decay_params(kappa_d: float = 1.0) -> SystemParams:
    # uncoupled, undriven cavity: a single photon decays at kappa_d
    return SystemParams(delta=0.0, omega_m=1.0, g=0.0, kappa_d=kappa_d)


def _expected_log_likelihood(kappa_d: float, click: float) -> float:
    return -kappa_d * (click - DT_BIN) + math.log(kappa_d * DT_BIN)


class TestPrior(unittest.TestCase):
    def _normalisation(self, spec: PriorSpec) -> float:
        xs = np.linspace(spec.theta_min, spec.theta_max, 40001)
        return float(trapezoid(prior_density(xs, spec), xs))

    def test_normalised_for_sharp_flat_and_peaked_shapes(self):
        for alpha in (-1000.0, -5.0, 0.0, 5.0, 50.0):
            with self.subTest(alpha=alpha):
                self.assertAlmostEqual(self._normalisation(PriorSpec(2.0, 10.0, alpha)), 1.0, places=4)

    def test_zero_at_support_edges_and_outside(self):
        spec = PriorSpec(2.0, 10.0, -1000.0)
        self.assertEqual(prior_density(2.0, spec), 0.0)
        self.assertAlmostEqual(prior_density(10.0, spec), 0.0, places=12)
        self.assertEqual(prior_density(1.0, spec), 0.0)
        self.assertEqual(prior_density(11.0, spec), 0.0)

    def test_sharp_prior_is_nearly_flat_inside(self):
        spec = PriorSpec(2.0, 10.0, -1000.0)
        values = prior_density(np.array([4.0, 6.0, 8.0]), spec)
        np.testing.assert_allclose(values, values[0], rtol=1e-9)
        self.assertAlmostEqual(float(values[0]), 1.0 / spec.width, delta=0.05 / spec.width)

    def test_spec_rejects_empty_support(self):
        with self.assertRaises(ValueError):
            PriorSpec(3.0, 3.0)


class TestGrid(unittest.TestCase):
    def test_make_grid_carries_normalised_prior(self):
        spec = PriorSpec(0.0, 4.0, -1000.0)
        grid = make_grid("kappa_d", spec, nodes=41)
        self.assertEqual(len(grid.nodes), 41)
        self.assertTrue(np.isneginf(grid.log_prior[0]))
        self.assertTrue(np.isneginf(grid.log_prior[-1]))
        self.assertAlmostEqual(grid.normalization(), 1.0, places=9)
        self.assertAlmostEqual(grid.mean(), 2.0, places=6)

    def test_all_minus_infinity_is_degenerate(self):
        nodes = np.linspace(0.0, 1.0, 5)
        with self.assertRaises(DegeneratePosteriorError):
            normalize_log_posterior(nodes, np.full(5, -np.inf))

    def test_normalisation_survives_huge_log_values(self):
        nodes = np.linspace(0.0, 1.0, 11)
        logs = -1e4 + np.zeros(11)
        post = normalize_log_posterior(nodes, logs)
        self.assertAlmostEqual(float(trapezoid(np.exp(post), nodes)), 1.0, places=12)


# ----------------------------------------------------------------------------
# Likelihood
# ----------------------------------------------------------------------------

class TestLikelihood(unittest.TestCase):
    def setUp(self):
        self.record = ClickRecord(events=[ClickEvent(1.0)], t_end=5.0)

    def test_single_photon_decay_matches_closed_form(self):
        for kappa_d in (0.5, 1.0, 2.0):
            with self.subTest(kappa_d=kappa_d):
                value = log_likelihood(
                    self.record, kappa_d, _decay_params(), SPACE, dt_bin=DT_BIN,
                    substitution=ThetaSubstitution("kappa_d"), initial=_one_photon(), step_control=CONTROL,
                )
                self.assertAlmostEqual(value, _expected_log_likelihood(kappa_d, 1.0), places=6)

    def test_series_before_and_after_the_click(self):
        series = log_likelihood_series(
            self.record, _decay_params(1.5), SPACE, [0.0, 0.5, 1.0, 3.0, 5.0], _one_photon(), DT_BIN, CONTROL
        )
        self.assertAlmostEqual(series[0], 0.0, places=12)
        self.assertAlmostEqual(series[1], -0.75, places=6)
        # vacuum after the click: no further no-click decay
        expected = _expected_log_likelihood(1.5, 1.0)
        np.testing.assert_allclose(series[2:], expected, atol=1e-6)

    def test_splitting_the_window_changes_nothing(self):
        params = _decay_params(0.8).with_updates(omega_drive=0.3)
        whole = log_likelihood_series(self.record, params, SPACE, [5.0], _one_photon(), DT_BIN, CONTROL)
        split = log_likelihood_series(self.record, params, SPACE, [0.3, 0.6, 0.9, 2.5, 5.0], _one_photon(), DT_BIN, CONTROL)
        self.assertAlmostEqual(float(whole[-1]), float(split[-1]), places=7)

    def test_cache_agrees_with_integration(self):
        direct = log_likelihood_series(self.record, _decay_params(), SPACE, [5.0], _one_photon(), DT_BIN, CONTROL)
        cached = log_likelihood_series(
            self.record, _decay_params(), SPACE, [5.0], _one_photon(), DT_BIN, CONTROL, use_cache=True, cache_step=0.1
        )
        self.assertAlmostEqual(float(direct[-1]), float(cached[-1]), places=6)

    def test_click_from_vacuum_is_impossible(self):
        value = log_likelihood(self.record, 1.0, _decay_params(), SPACE, dt_bin=DT_BIN,
                               substitution=ThetaSubstitution("kappa_d"), initial=_vacuum(), step_control=CONTROL)
        self.assertTrue(np.isneginf(value))

    def test_checkpointed_tracker_equals_one_shot_likelihood(self):
        params = SystemParams(delta=0.2, omega_m=1.0, g=0.3, omega_drive=0.4, kappa_d=1.0, kappa_l=0.2)
        record = ClickRecord(events=[ClickEvent(0.7), ClickEvent(1.9), ClickEvent(3.2)], t_end=4.0)
        tracker = LikelihoodTracker(record, params, SPACE, _vacuum(), DT_BIN, CONTROL)
        partial = [tracker.advance_to(t) for t in (0.5, 0.7, 1.0, 2.5, 3.2, 4.0)]
        one_shot = log_likelihood(
            record, 0.3, params, SPACE, dt_bin=DT_BIN,
            substitution=ThetaSubstitution("g"), initial=_vacuum(), step_control=CONTROL,
        )
        self.assertAlmostEqual(partial[-1], one_shot, places=7)
        self.assertTrue(all(np.diff(partial) != 0.0))

    def test_tracker_cannot_rewind(self):
        tracker = LikelihoodTracker(self.record, _decay_params(), SPACE, _one_photon(), DT_BIN, CONTROL)
        tracker.advance_to(2.0)
        with self.assertRaises(ValueError):
            tracker.advance_to(1.0)

    def test_tracker_copy_is_independent(self):
        tracker = LikelihoodTracker(self.record, _decay_params(), SPACE, _one_photon(), DT_BIN, CONTROL)
        tracker.advance_to(0.5)
        dup = tracker.copy()
        dup.advance_to(3.0)
        self.assertAlmostEqual(tracker.t, 0.5)
        self.assertAlmostEqual(tracker.log_likelihood, -0.5, places=6)

    def test_non_positive_bin_rejected(self):
        with self.assertRaises(ValueError):
            LikelihoodTracker(self.record, _decay_params(), SPACE, _one_photon(), dt_bin=0.0)


class TestThetaSubstitution(unittest.TestCase):
    def test_unknown_parameter_rejected(self):
        with self.assertRaises(ValueError):
            ThetaSubstitution("omega_drive")
        with self.assertRaises(ValueError):
            ThetaSubstitution("chi")

    def test_detuning_held_fixed_by_default(self):
        template = SystemParams(delta=-2.0, omega_m=4.0, g=4.0)
        params = ThetaSubstitution("g").apply(template, 5.0)
        self.assertEqual(params.g, 5.0)
        self.assertEqual(params.delta, -2.0)

    def test_coupled_regime_detuning_follows_theta(self):
        template = SystemParams(delta=-2.0, omega_m=4.0, g=4.0)
        params = ThetaSubstitution("g", couple_detuning_regime=2).apply(template, 5.0)
        self.assertAlmostEqual(params.delta, detuning_for_regime(2, 5.0, 4.0))
        self.assertAlmostEqual(params.delta, -12.5)


# ----------------------------------------------------------------------------
# Posterior
# ----------------------------------------------------------------------------

class TestPosterior(unittest.TestCase):
    def setUp(self):
        self.record = ClickRecord(events=[ClickEvent(1.0)], t_end=5.0)
        self.spec = PriorSpec(0.0, 4.0, -1000.0)
        self.grid = make_grid("kappa_d", self.spec, nodes=21)

    def _posteriors(self, times):
        return posterior(
            self.record, self.grid, self.spec, times, _decay_params(), SPACE,
            initial=_one_photon(), dt_bin=DT_BIN, step_control=CONTROL,
        )

    def test_matches_closed_form_posterior(self):
        final = self._posteriors([5.0])[-1]
        nodes = self.grid.nodes
        expected_ll = np.full(len(nodes), -np.inf)
        live = np.isfinite(self.grid.log_prior)
        expected_ll[live] = [_expected_log_likelihood(k, 1.0) for k in nodes[live]]
        expected = normalize_log_posterior(nodes, self.grid.log_prior + expected_ll)
        np.testing.assert_allclose(final.log_posterior[live], expected[live], atol=1e-5)
        self.assertAlmostEqual(final.normalization(), 1.0, places=9)

    def test_nodes_without_prior_support_stay_at_zero_weight(self):
        final = self._posteriors([5.0])[-1]
        self.assertTrue(np.isneginf(final.log_likelihood[0]))
        self.assertEqual(final.weights[0], 0.0)
        self.assertEqual(final.weights[-1], 0.0)

    def test_checkpoints_are_sorted_and_timestamped(self):
        out = self._posteriors([5.0, 0.5])
        self.assertEqual([p.time for p in out], [0.5, 5.0])
        # before the click the posterior pulls towards small kappa_d
        self.assertLess(out[0].mean(), 2.0)

    def test_grid_must_cover_prior(self):
        narrow = make_grid("kappa_d", PriorSpec(1.0, 3.0), nodes=11)
        with self.assertRaises(ValueError):
            posterior(self.record, narrow, self.spec, [5.0], _decay_params(), SPACE, initial=_one_photon())


    def test_grid_prior_must_match_spec(self):
        other = make_grid("kappa_d", PriorSpec(0.0, 4.0, 0.0), nodes=21)
        with self.assertRaises(ValueError):
            posterior(self.record, other, self.spec, [5.0], _decay_params(), SPACE, initial=_one_photon())


class TestErrors(unittest.TestCase):
    def _grid(self, mean: float, t: float) -> ParameterGrid:
        nodes = np.linspace(-10.0, 20.0, 601)
        logs = -0.5 * (nodes - mean) ** 2
        return ParameterGrid("g", nodes, np.zeros_like(nodes), logs, normalize_log_posterior(nodes, logs), t)

    def test_squared_error_against_truth(self):
        series = estimate_and_mse([self._grid(5.0, 0.0), self._grid(4.5, 1.0)], truth=4.0)
        self.assertEqual(series.mode, MseMode.SQUARED_ERROR)
        np.testing.assert_allclose(series.times, [0.0, 1.0])
        np.testing.assert_allclose(series.estimate, [5.0, 4.5], atol=1e-6)
        np.testing.assert_allclose(series.mse, [1.0, 0.25], atol=1e-5)

    def test_posterior_variance_without_truth(self):
        series = estimate_and_mse([self._grid(5.0, 0.0)])
        self.assertEqual(series.mode, MseMode.POSTERIOR_VARIANCE)
        self.assertAlmostEqual(float(series.mse[0]), 1.0, places=5)

    def test_average_series_keeps_members(self):
        a = estimate_and_mse([self._grid(5.0, 0.0)], truth=4.0)
        b = estimate_and_mse([self._grid(3.0, 0.0)], truth=4.0)
        avg = average_series([a, b])
        self.assertAlmostEqual(float(avg.mse[0]), 1.0, places=5)
        self.assertEqual(len(avg.members), 2)
        self.assertAlmostEqual(float(avg.dispersion()[0]), 0.0, places=5)

    def test_average_mse_needs_two_records(self):
        record = ClickRecord(events=[], t_end=1.0)
        grid = make_grid("kappa_d", PriorSpec(0.0, 4.0))
        with self.assertRaises(ValueError):
            average_mse([record], grid, PriorSpec(0.0, 4.0), 1.0, [1.0], _decay_params(), SPACE)

    def test_average_mse_rejects_mixed_parameters(self):
        a = ClickRecord(events=[], t_end=1.0, params_fingerprint="aaaa")
        b = ClickRecord(events=[], t_end=1.0, params_fingerprint="bbbb")
        grid = make_grid("kappa_d", PriorSpec(0.0, 4.0))
        with self.assertRaises(RecordMismatchError):
            average_mse([a, b], grid, PriorSpec(0.0, 4.0), 1.0, [1.0], _decay_params(), SPACE)


if __name__ == "__main__":
    unittest.main()
