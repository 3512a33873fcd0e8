import math
import unittest

import numpy as np
from scipy.stats import unitary_group

from core.errors import RecordMismatchError, UndefinedCorrelationError
from core.fock import coherent_state, initial_state, product_state
from core.integrators import StepControl
from core.statistics import (
    band_mean,
    consecutive_pairs,
    g2,
    g2_grid,
    g2_row,
    negativity,
    negativity_raw,
    negativity_series,
    sampled_g2,
    zeta_difference,
    zeta_histogram,
)
from core.trajectory import sample_ensemble
from models.params import SystemParams
from models.records import ClickEvent, ClickRecord
from models.space import FockSpace, State, random_density


def _record(times, t_end=10.0, fingerprint="p", stream=0) -> ClickRecord:
    return ClickRecord(events=[ClickEvent(t) for t in times], t_end=t_end, params_fingerprint=fingerprint, stream=stream)


class TestZeta(unittest.TestCase):
    def test_consecutive_pairs(self):
        pairs = consecutive_pairs(_record([1.0, 2.5, 4.0]))
        np.testing.assert_allclose(pairs, [[1.0, 2.5], [2.5, 4.0]])
        self.assertEqual(consecutive_pairs(_record([3.0])).shape, (0, 2))

    def test_filled_bins_sum_to_one(self):
        records = [_record([0.5, 1.5, 6.0, 6.2]), _record([2.0, 9.0], stream=1)]
        zmap = zeta_histogram(records, t1_bins=5, t2_bins=5)
        self.assertEqual(zmap.pair_count, 4)
        self.assertAlmostEqual(float(np.nansum(zmap.values)), 1.0)
        self.assertTrue(np.isnan(zmap.values).any())

    def test_relative_axis_uses_waiting_time(self):
        zmap = zeta_histogram([_record([1.0, 1.5, 4.0])], t1_bins=[0, 2, 5], t2_bins=[0, 1, 3], relative=True, dt_max=3.0)
        # (1.0, dt 0.5) and (1.5, dt 2.5) both start in the first t1 bin
        self.assertAlmostEqual(zmap.values[0, 0], 0.5)
        self.assertAlmostEqual(zmap.values[0, 1], 0.5)
        self.assertTrue(np.isnan(zmap.values[1]).all())

    def test_mixed_parameters_rejected(self):
        with self.assertRaises(RecordMismatchError):
            zeta_histogram([_record([1.0, 2.0], fingerprint="a"), _record([1.0, 2.0], fingerprint="b")])

    def test_bad_edges_rejected(self):
        with self.assertRaises(ValueError):
            zeta_histogram([_record([1.0, 2.0])], t1_bins=[0.0, 2.0, 1.0])

    def test_difference_and_band_mean(self):
        edges = dict(t1_bins=[0, 10], t2_bins=[0, 2, 10], relative=True, dt_max=10.0)
        short = zeta_histogram([_record([1.0, 2.0, 3.0])], **edges)
        long = zeta_histogram([_record([1.0, 6.0])], **edges)
        diff = zeta_difference(short, long)
        np.testing.assert_allclose(diff.values, [[1.0, -1.0]])
        self.assertAlmostEqual(band_mean(diff, 0.0, 2.0), 1.0)
        self.assertAlmostEqual(band_mean(diff, 2.0, 10.0), -1.0)
        self.assertTrue(math.isnan(band_mean(diff, 20.0, 30.0)))


# ----------------------------------------------------------------------
# g2
# ----------------------------------------------------------------------

class TestG2(unittest.TestCase):
    def test_driven_linear_cavity_is_coherent(self):
        space = FockSpace(8, 2)
        params = SystemParams(delta=0.2, omega_m=1.0, g=0.0, omega_drive=0.4, kappa_d=1.0)
        grid = g2_grid([2.0, 6.0], [0.0, 0.5, 2.0], params, space, initial_state(space))
        np.testing.assert_allclose(grid.values, 1.0, atol=1e-3)
        self.assertEqual(len(grid.to_rows()), 6)

    def test_vacuum_has_no_correlation(self):
        space = FockSpace(3, 2)
        params = SystemParams(delta=0.0, omega_m=1.0, g=0.0, omega_drive=0.4)
        self.assertTrue(np.isnan(g2_row(0.0, [0.0, 1.0], params, space, initial_state(space))).all())
        with self.assertRaises(UndefinedCorrelationError):
            g2(0.0, 0.5, params, space, initial_state(space))

    def test_time_order_required(self):
        space = FockSpace(3, 2)
        params = SystemParams(delta=0.0, omega_m=1.0, g=0.0, omega_drive=0.4)
        with self.assertRaises(ValueError):
            g2(2.0, 1.0, params, space, initial_state(space))

    def test_trace_formula_agrees_with_sampled_coincidences(self):
        space = FockSpace(5, 2)
        params = SystemParams(delta=0.0, omega_m=1.0, g=0.0, omega_drive=0.3, kappa_d=1.0)
        start = initial_state(space)
        control = StepControl(step=0.02, tolerance=1e-6)
        results = sample_ensemble(params, space, start, 6.0, 400, master_seed=21, step_control=control)
        sampled, stderr = sampled_g2([r.record for r in results], 3.0, 4.5, 1.0)
        exact = g2(3.5, 5.0, params, space, start, control)
        self.assertLess(abs(sampled - exact), 4.0 * stderr + 0.05)

    def test_sampled_g2_of_identical_counts(self):
        records = [_record([0.2, 0.4, 5.5], stream=i) for i in range(4)]
        value, stderr = sampled_g2(records, 0.0, 5.0, 1.0)
        self.assertAlmostEqual(value, 1.0)
        self.assertAlmostEqual(stderr, 0.0)
        with self.assertRaises(UndefinedCorrelationError):
            sampled_g2(records, 7.0, 8.0, 1.0)


# ----------------------------------------------------------------------
# Negativity
# ----------------------------------------------------------------------

class TestNegativity(unittest.TestCase):
    def setUp(self):
        self.space = FockSpace(2, 2)

    def test_product_state_has_zero_negativity(self):
        space = FockSpace(3, 4)
        state = product_state(coherent_state(0.3, 3), coherent_state(0.5, 4))
        self.assertGreater(negativity_raw(state, space), -1e-12)
        self.assertAlmostEqual(negativity(state, space), 0.0, places=10)

    def test_bell_state(self):
        bell = State.pure(np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0))
        self.assertAlmostEqual(negativity(bell, self.space), 0.5)

    def test_separable_mixture(self):
        rho = 0.5 * np.diag([1.0, 0.0, 0.0, 1.0]).astype(complex)
        self.assertAlmostEqual(negativity(State.mixed(rho), self.space), 0.0)

    def test_unchanged_by_local_unitaries(self):
        space = FockSpace(3, 4)
        rng = np.random.default_rng(11)
        state = State.mixed(random_density(12, rng, rank=2))
        local = np.kron(unitary_group.rvs(3, random_state=rng), unitary_group.rvs(4, random_state=rng))
        rotated = State.mixed(local @ state.data @ local.conj().T)
        self.assertAlmostEqual(negativity_raw(rotated, space), negativity_raw(state, space), places=10)

    def test_series_marks_clicks(self):
        space = FockSpace(3, 4)
        params = SystemParams(delta=0.0, omega_m=1.0, g=0.8, omega_drive=0.5, kappa_d=1.0)
        record = _record([1.0, 2.0], t_end=3.0, fingerprint=params.fingerprint())
        record.dim_cavity, record.dim_mech = 3, 4
        series = negativity_series(record, params, space, initial_state(space), [0.0, 1.5, 3.0],
                                   step_control=StepControl(step=0.01, tolerance=1e-7))
        self.assertEqual(series.click_times, (1.0, 2.0))
        self.assertEqual(len(series.before_click), 2)
        self.assertEqual(len(series.after_click), 2)
        self.assertAlmostEqual(series.negativity[0], 0.0)
        self.assertTrue(np.all(series.negativity >= 0.0))


if __name__ == "__main__":
    unittest.main()
