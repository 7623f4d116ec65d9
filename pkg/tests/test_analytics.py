"""Closed-form predictions against limits, symmetry, and the simulator."""

import math

import numpy as np
import pytest

from fepsim.analytics import (
    HbtInitialMoments,
    bell_probability,
    comb_displacement_fit,
    g2_closed_form,
    g2_phase_scan,
    hbt_vacuum_g2_trajectory,
)
from fepsim.errors import SimulationError
from fepsim.operators import PhotonMode, coherent_state, displacement, fock_state
from fepsim.tensor_core import PureState


class TestG2ClosedForm:
    def test_zero_electrons_recovers_input_statistics(self):
        m = HbtInitialMoments.from_coherent(0.8, 1.1)
        assert abs(g2_closed_form(m, 0, 0.3) - 1.0) < 1e-12

    def test_empty_cavities_give_shot_noise_ladder(self):
        # with both cavities empty the value after N electrons is (2N - 1)/N
        m = HbtInitialMoments(0.0, 0.0, 0.0)
        for n in (1, 2, 3, 10, 50, 5000):
            expected = (2.0 * n - 1.0) / n
            assert abs(g2_closed_form(m, n, 0.4) - expected) < 1e-12

    def test_empty_cavity_limit_is_two(self):
        m = HbtInitialMoments(0.0, 0.0, 0.0)
        assert abs(g2_closed_form(m, 5000, 0.4) - 2.0) < 1e-3

    def test_empty_cavities_coupling_independent(self):
        m = HbtInitialMoments(0.0, 0.0, 0.0)
        assert abs(g2_closed_form(m, 7, 0.1) - g2_closed_form(m, 7, 0.9)) < 1e-12

    def test_undefined_at_zero_electrons_with_vacuum(self):
        m = HbtInitialMoments(0.0, 0.0, 0.0)
        with pytest.raises(SimulationError):
            g2_closed_form(m, 0, 0.4)

    def test_bright_coherent_limit_is_one(self):
        m = HbtInitialMoments.from_coherent(40.0, 40.0)
        assert abs(g2_closed_form(m, 3, 0.2) - 1.0) < 1e-2

    def test_negative_electron_count_rejected(self):
        with pytest.raises(ValueError):
            g2_closed_form(HbtInitialMoments(1.0, 1.0, 1.0), -1, 0.1)


class TestPhaseScan:
    def test_zero_coupling_flat_at_one(self):
        _, vals, _, vmin = g2_phase_scan(1.0, 1.0, 1, 0.0)
        np.testing.assert_allclose(vals, np.ones_like(vals), atol=1e-12)
        assert abs(vmin - 1.0) < 1e-12

    def test_minimum_at_pi_for_real_amplitudes(self):
        phases, vals, phase_min, vmin = g2_phase_scan(
            1.0, 1.0, 1, 0.4, phases=np.linspace(0.0, 2 * math.pi, 257))
        assert abs(phase_min - math.pi) < (phases[1] - phases[0]) + 1e-12
        assert vmin < 1.0

    def test_antibunching_below_shot_noise(self):
        _, _, _, vmin = g2_phase_scan(1.0, 1.0, 1, 0.4)
        # destructive interference of the exchange path suppresses
        # coincidences below the uncorrelated level
        assert vmin < 1.0
        g2_max = g2_phase_scan(1.0, 1.0, 1, 0.4)[1].max()
        assert g2_max > 1.0

    def test_matches_direct_formula(self):
        ph = 1.234
        m = HbtInitialMoments(1.0, 1.0, 1.0,
                              a1_mean=1.0, a2_mean=np.exp(1j * ph))
        _, vals, _, _ = g2_phase_scan(1.0, 1.0, 2, 0.3,
                                      phases=np.array([ph]))
        assert abs(vals[0] - g2_closed_form(m, 2, 0.3)) < 1e-12


class TestBellProbability:
    def test_zero_coupling(self):
        assert bell_probability(0.0) == (0.0, 0.0)

    def test_weak_coupling_matches_quadratic(self):
        approx, exact = bell_probability(0.1)
        assert abs(approx - 0.02) < 1e-15
        assert abs(exact - approx) / approx < 0.03

    def test_moderate_coupling_poissonian_value(self):
        # from two empty cavities the heralding probability is the k = 1
        # Poisson weight at mean 2 g^2
        g = 0.7
        _, exact = bell_probability(g)
        mean = 2.0 * g * g
        assert abs(exact - mean * math.exp(-mean)) < 1e-6

    def test_maximum_near_one_over_e(self):
        _, exact = bell_probability(1.0 / math.sqrt(2.0))
        assert abs(exact - math.exp(-1.0)) < 1e-6


class TestDisplacementFit:
    def test_recovers_exact_displacement(self):
        mode = PhotonMode(24)
        beta = 0.25 * np.exp(0.7j)
        vec = displacement(mode, beta).mat @ fock_state(mode, 0).vec
        rho = PureState(mode.layout, vec / np.linalg.norm(vec)).density_matrix()
        f, b = comb_displacement_fit(rho, mode, fock_state(mode, 0), 0.1)
        assert f > 0.9999
        assert abs(b - beta) < 0.02

    def test_identity_when_nothing_happened(self):
        mode = PhotonMode(12)
        rho = coherent_state(mode, 0.5).density_matrix()
        f, b = comb_displacement_fit(rho, mode, coherent_state(mode, 0.5), 0.1)
        assert f > 0.99999
        assert abs(b) < 0.02


class TestHbtTrajectory:
    def test_matches_shot_noise_ladder(self):
        g2s = hbt_vacuum_g2_trajectory(0.4, 5)
        expected = [(2.0 * n - 1.0) / n for n in range(1, 6)]
        np.testing.assert_allclose(g2s, expected, atol=1e-4)

    def test_first_pass_is_coherent(self):
        g2s = hbt_vacuum_g2_trajectory(0.3, 1)
        assert abs(g2s[0] - 1.0) < 1e-4
