import math
import unittest

import numpy as np
from scipy.linalg import expm

from core.closed import (
    analytic_purity,
    apply_cavity_jump_pure,
    closed_entropy_series,
    evolve_closed,
    linear_entropy,
    rescaled_rates,
)
from core.errors import ConvergenceError, InvalidStateError, ZeroNormError
from core.fock import coherent_state, product_state
from core.hamiltonians import hamiltonian_rf
from models.params import SystemParams
from models.space import FockSpace, State


class TestClosedEvolution(unittest.TestCase):
    def setUp(self):
        self.space = FockSpace(5, 40)
        self.start = product_state(coherent_state(0.6, 5), coherent_state(0.5, 40))

    def test_matches_matrix_exponential(self):
        params = SystemParams(delta=-0.3, omega_m=1.0, g=0.3)
        k, r = rescaled_rates(params, no_click=False)
        t = 1.7
        exact = expm(-1j * hamiltonian_rf(params, self.space).matrix * t) @ self.start.data
        closed = evolve_closed(self.start, t, k, r, self.space).data
        self.assertAlmostEqual(abs(np.vdot(exact, closed)), 1.0, places=7)
        np.testing.assert_allclose(closed, exact, atol=1e-6)

    def test_returns_to_initial_state_after_one_period(self):
        # k = 1, r = 0 leaves no residual Kerr or detuning phase at t' = 2 pi
        out = evolve_closed(self.start, 2 * math.pi, 1.0, 0j, self.space)
        self.assertAlmostEqual(abs(np.vdot(self.start.data, out.data)), 1.0, places=8)

    def test_disentangles_after_one_period(self):
        out = evolve_closed(self.start, 2 * math.pi, 0.7, 0.2 + 0j, self.space)
        self.assertLess(linear_entropy(out, self.space), 1e-10)

    def test_uncoupled_modes_stay_unentangled(self):
        for t in (0.5, 1.0, 3.0):
            out = evolve_closed(self.start, t, 0.0, 0.4 + 0j, self.space)
            self.assertLess(linear_entropy(out, self.space), 1e-10)

    def test_no_click_probability_of_damped_coherent_state(self):
        space = FockSpace(12, 4)
        start = product_state(coherent_state(0.6, 12), coherent_state(0.0, 4))
        params = SystemParams(delta=0.0, omega_m=1.0, g=0.0, kappa_d=0.3)
        k, r_tilde = rescaled_rates(params, no_click=True)
        t = 2.0
        out = evolve_closed(start, t, k, r_tilde, space)
        self.assertFalse(out.normalized)
        expected = math.exp(-0.36 * (1.0 - math.exp(-0.3 * t)))
        self.assertAlmostEqual(out.trace(), expected, places=8)

    def test_requires_pure_state(self):
        with self.assertRaises(InvalidStateError):
            evolve_closed(self.start.to_density(), 1.0, 0.5, 0j, self.space)


# ----------------------------------------------------------------------
# Jumps and the analytic purity
# ----------------------------------------------------------------------

class TestJumpsAndPurity(unittest.TestCase):
    def setUp(self):
        self.space = FockSpace(4, 20)

    def test_jump_lowers_fock_state(self):
        one = np.zeros(4)
        one[1] = 1.0
        mech = coherent_state(0.3, 20)
        out = apply_cavity_jump_pure(product_state(State.pure(one), mech), self.space)
        expected = product_state(coherent_state(0.0, 4), mech)
        np.testing.assert_allclose(out.data, expected.data, atol=1e-12)

    def test_coherent_state_survives_jump(self):
        space = FockSpace(20, 3)
        start = product_state(coherent_state(0.5, 20), coherent_state(0.0, 3))
        out = apply_cavity_jump_pure(start, space)
        self.assertAlmostEqual(abs(np.vdot(start.data, out.data)), 1.0, places=8)

    def test_jump_from_vacuum_fails(self):
        with self.assertRaises(ZeroNormError):
            apply_cavity_jump_pure(product_state(coherent_state(0.0, 4), coherent_state(0.2, 20)), self.space)

    def test_linear_entropy_bounds(self):
        self.assertLess(linear_entropy(product_state(coherent_state(0.5, 4), coherent_state(0.5, 20)), self.space), 1e-10)
        bell = np.zeros(self.space.dim)
        bell[self.space.index(0, 0)] = bell[self.space.index(1, 1)] = 1 / math.sqrt(2)
        self.assertAlmostEqual(linear_entropy(State.pure(bell), self.space), 0.5)

    def test_analytic_purity_matches_evolution(self):
        space = FockSpace(10, 40)
        alpha, beta, k = 0.8, 0.5, 0.3
        start = product_state(coherent_state(alpha, 10), coherent_state(beta, 40))
        for t in (0.4, 1.5, 3.0, 2 * math.pi):
            purity = analytic_purity(alpha, beta, k, 0j, t)
            numeric = 1.0 - linear_entropy(evolve_closed(start, t, k, 0j, space), space)
            self.assertAlmostEqual(purity, numeric, places=7)

    def test_analytic_purity_with_no_click_rate(self):
        space = FockSpace(10, 40)
        start = product_state(coherent_state(0.8, 10), coherent_state(0.5, 40))
        r_tilde = -0.1j
        purity = analytic_purity(0.8, 0.5, 0.3, r_tilde, 2.0)
        numeric = 1.0 - linear_entropy(evolve_closed(start, 2.0, 0.3, r_tilde, space), space)
        self.assertAlmostEqual(purity, numeric, places=7)

    def test_analytic_purity_on_random_draws(self):
        rng = np.random.default_rng(2024)
        space = FockSpace(10, 40)
        for _ in range(20):
            alpha = 0.8 * rng.random() * np.exp(2j * math.pi * rng.random())
            beta = 0.5 * rng.random() * np.exp(2j * math.pi * rng.random())
            k = 0.3 * rng.random()
            r_tilde = complex(rng.uniform(-1.0, 1.0), -0.1 * rng.random())
            t = 2 * math.pi * rng.random()
            start = product_state(coherent_state(alpha, 10), coherent_state(beta, 40))
            numeric = 1.0 - linear_entropy(evolve_closed(start, t, k, r_tilde, space), space)
            self.assertAlmostEqual(analytic_purity(alpha, beta, k, r_tilde, t), numeric, places=6)

    def test_analytic_purity_reports_short_series(self):
        with self.assertRaises(ConvergenceError):
            analytic_purity(3.0, 0.0, 0.5, 0j, 1.0, series_cutoff=5)


class TestEntropySeries(unittest.TestCase):
    def test_jump_restarts_from_post_jump_state(self):
        space = FockSpace(6, 30)
        params = SystemParams(delta=0.0, omega_m=1.0, g=0.5, kappa_d=0.04)
        k, r = rescaled_rates(params, no_click=True)
        times = np.linspace(0.0, 6.0, 13)
        plain = closed_entropy_series(0.7, 0.3, k, r, times, space)
        jumped = closed_entropy_series(0.7, 0.3, k, r, times, space, jump_times=[2.0])
        before = times < 2.0
        np.testing.assert_allclose(plain.entropy[before], jumped.entropy[before], atol=1e-12)
        np.testing.assert_allclose(plain.norm[before], jumped.norm[before], atol=1e-12)
        self.assertEqual(jumped.jump_times, (2.0,))
        self.assertTrue(np.all(np.diff(plain.norm) <= 1e-12))
        self.assertTrue(np.all(jumped.entropy >= -1e-12))

    def test_jump_from_coherent_product_disentangles_at_next_period(self):
        # a U(t) factorises into cavity and mechanical parts on coherent products
        space = FockSpace(12, 60)
        times = np.array([3.0, 2 * math.pi])
        plain = closed_entropy_series(0.7, 0.3, 0.5, 0j, times, space)
        jumped = closed_entropy_series(0.7, 0.3, 0.5, 0j, times, space, jump_times=[1.0])
        self.assertGreater(abs(jumped.entropy[0] - plain.entropy[0]), 1e-6)
        self.assertLess(jumped.entropy[1], 1e-8)


if __name__ == "__main__":
    unittest.main()
