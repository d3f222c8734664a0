#!/usr/bin/env python3
"""
Test Suite for the Metrics Module

SINR reductions, scale invariance, rate composition, the half-duplex
baseline and the constraint flags.

Author: MA-FD Optimizer
Version: 1.0
"""

import math
import unittest

import numpy as np

from channel import ChannelSet, ScenarioConfig, initial_position_set
from metrics import (RATE_COLUMNS, InvalidStateError, OptState, half_duplex_rate,
                     rate_from_sinrs, sinr_dl, sinr_ul, sum_rate)

# Unit noise power (1 W) and 1 W budgets keep the hand expansions readable.
UNIT = dict(noise_psd_dbm_hz=30.0, power_bs_max_dbm=30.0, power_ul_max_dbm=30.0)


def unit_config(**overrides) -> ScenarioConfig:
    values = dict(UNIT, num_tx_antennas=2, num_rx_antennas=2, num_elements=2)
    values.update(overrides)
    return ScenarioConfig().with_overrides(**values)


def cn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_channels(rng, config: ScenarioConfig) -> ChannelSet:
    m_t, m_r, n = config.num_tx_antennas, config.num_rx_antennas, config.num_elements
    return ChannelSet(H=cn(rng, n, m_t), G=cn(rng, m_r, n), h_d=cn(rng, m_t), h_u=cn(rng, m_r),
                      h_ris_dl=cn(rng, n), g=cn(rng, n), F_si=cn(rng, m_r, m_t),
                      inter_user=complex(cn(rng, 1)[0]))


def random_state(rng, config: ScenarioConfig, p: float = 0.5) -> OptState:
    omega = cn(rng, config.num_tx_antennas)
    omega *= 0.9 * math.sqrt(config.power_bs_max_w) / np.linalg.norm(omega)
    return OptState(omega=omega, v=cn(rng, config.num_rx_antennas), p=p,
                    theta=rng.uniform(0.0, 2.0 * np.pi, config.num_elements),
                    T_t=initial_position_set(config, config.num_tx_antennas),
                    T_r=initial_position_set(config, config.num_rx_antennas),
                    R=initial_position_set(config, config.num_elements))


class TestSinr(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(2)
        self.config = unit_config()
        self.ch = random_channels(self.rng, self.config)
        self.state = random_state(self.rng, self.config)

    def test_interference_free_downlink(self):
        n = self.config.num_elements
        ch = ChannelSet(H=np.zeros_like(self.ch.H), G=self.ch.G, h_d=self.ch.h_d, h_u=self.ch.h_u,
                        h_ris_dl=np.zeros(n, dtype=complex), g=np.zeros(n, dtype=complex),
                        F_si=self.ch.F_si, inter_user=self.ch.inter_user)
        state = self.state.evolve(p=0.0)
        s = self.ch.h_d @ state.omega
        self.assertAlmostEqual(sinr_dl(ch, state, self.config), abs(s) ** 2, delta=1e-12)

    def test_zero_beamformer(self):
        state = self.state.evolve(omega=np.zeros(2, dtype=complex))
        self.assertEqual(sinr_dl(self.ch, state, self.config), 0.0)

    def test_downlink_hand_expansion(self):
        st = self.state
        s = sum(self.ch.h_d[t] * st.omega[t] for t in range(2))
        c = self.ch.inter_user
        for n in range(2):
            shift = np.exp(1j * st.theta[n])
            s += self.ch.h_ris_dl[n] * shift * sum(self.ch.H[n, t] * st.omega[t] for t in range(2))
            c += self.ch.h_ris_dl[n] * shift * self.ch.g[n]
        expected = abs(s) ** 2 / (st.p * abs(c) ** 2 + 1.0)
        self.assertAlmostEqual(sinr_dl(self.ch, st, self.config) / expected, 1.0, delta=1e-12)

    def test_matched_filter_without_si(self):
        config = unit_config(eta=0.0)
        a = self.ch.h_u + self.ch.G @ (np.exp(1j * self.state.theta) * self.ch.g)
        state = self.state.evolve(v=a)
        expected = state.p * float(np.vdot(a, a).real)
        self.assertAlmostEqual(sinr_ul(self.ch, state, config) / expected, 1.0, delta=1e-12)

    def test_zero_uplink_power(self):
        self.assertEqual(sinr_ul(self.ch, self.state.evolve(p=0.0), self.config), 0.0)

    def test_combiner_scale_invariance(self):
        base = sinr_ul(self.ch, self.state, self.config)
        for scale in (1e-3, 2.5 - 1j, 1e4j):
            scaled = sinr_ul(self.ch, self.state.evolve(v=scale * self.state.v), self.config)
            self.assertLess(abs(scaled - base) / base, 1e-12)

    def test_zero_combiner_rejected(self):
        with self.assertRaises(InvalidStateError):
            sinr_ul(self.ch, self.state.evolve(v=np.zeros(2, dtype=complex)), self.config)

    def test_interference_removal_never_hurts(self):
        for _ in range(50):
            ch = random_channels(self.rng, self.config)
            st = random_state(self.rng, self.config)
            self.assertGreaterEqual(sinr_ul(ch, st, unit_config(eta=0.0)), sinr_ul(ch, st, self.config))
            self.assertGreaterEqual(sinr_dl(ch, st.evolve(p=0.0), self.config), sinr_dl(ch, st, self.config))


class TestRates(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(9)
        self.config = unit_config(eta=0.3)

    def test_exact_logs(self):
        self.assertEqual(rate_from_sinrs(0.0, 0.0), 0.0)
        self.assertEqual(rate_from_sinrs(1.0, 3.0), 3.0)

    def test_sum_rate_recomposition(self):
        for _ in range(20):
            ch = random_channels(self.rng, self.config)
            st = random_state(self.rng, self.config)
            report = sum_rate(ch, st, self.config)
            expected = (math.log2(1.0 + sinr_dl(ch, st, self.config))
                        + math.log2(1.0 + sinr_ul(ch, st, self.config)))
            self.assertAlmostEqual(report.rate_sum, expected, delta=1e-12)
            self.assertAlmostEqual(report.rate_sum, report.rate_dl + report.rate_ul, delta=1e-12)

    def test_half_duplex_ignores_si(self):
        ch = random_channels(self.rng, self.config)
        st = random_state(self.rng, self.config)
        low = half_duplex_rate(ch, st, unit_config(eta=1e-8))
        high = half_duplex_rate(ch, st, unit_config(eta=1.0))
        self.assertAlmostEqual(low.rate_ul, high.rate_ul, delta=1e-12)

    def test_half_duplex_is_half_of_interference_free_sum(self):
        for _ in range(20):
            ch = random_channels(self.rng, self.config)
            st = random_state(self.rng, self.config)
            free = sum_rate(ch, st.evolve(p=0.0), self.config).rate_dl + \
                sum_rate(ch, st, unit_config(eta=0.0)).rate_ul
            hd = half_duplex_rate(ch, st, self.config)
            self.assertAlmostEqual(hd.rate_sum, 0.5 * free, delta=1e-12)
            self.assertLessEqual(hd.rate_sum, free)

    def test_report_row_columns(self):
        ch = random_channels(self.rng, self.config)
        row = sum_rate(ch, random_state(self.rng, self.config), self.config).to_row()
        self.assertEqual(list(row), RATE_COLUMNS)


class TestConstraintFlags(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(4)
        self.config = unit_config(rate_threshold_dl_bps_hz=0.0, rate_threshold_ul_bps_hz=0.0)
        self.ch = random_channels(self.rng, self.config)
        self.state = random_state(self.rng, self.config)

    def test_feasible_state(self):
        report = sum_rate(self.ch, self.state, self.config)
        self.assertTrue(report.feasible)

    def test_each_flag(self):
        cases = {
            "power_bs_ok": self.state.evolve(omega=3.0 * self.state.omega),
            "power_ul_ok": self.state.evolve(p=2.0),
            "phases_ok": self.state.evolve(theta=np.array([0.1, 7.0])),
            "positions_ok": self.state.evolve(R=self.state.R.with_coords(np.zeros((2, 2)))),
        }
        for flag, state in cases.items():
            report = sum_rate(self.ch, state, self.config)
            self.assertFalse(getattr(report, flag), flag)
            self.assertFalse(report.feasible, flag)

    def test_qos_flags_follow_thresholds(self):
        for _ in range(200):
            ch = random_channels(self.rng, self.config)
            st = random_state(self.rng, self.config, p=float(self.rng.uniform(0.0, 1.0)))
            config = unit_config(rate_threshold_dl_bps_hz=float(self.rng.uniform(0.0, 4.0)),
                                 rate_threshold_ul_bps_hz=float(self.rng.uniform(0.0, 4.0)))
            report = sum_rate(ch, st, config)
            self.assertEqual(report.qos_dl_ok, report.rate_dl >= config.rate_threshold_dl_bps_hz - 1e-9)
            self.assertEqual(report.qos_ul_ok, report.rate_ul >= config.rate_threshold_ul_bps_hz - 1e-9)

    def test_state_round_trip(self):
        restored = OptState.from_dict(self.state.to_dict())
        np.testing.assert_array_equal(restored.omega, self.state.omega)
        np.testing.assert_array_equal(restored.v, self.state.v)
        np.testing.assert_array_equal(restored.theta, self.state.theta)
        np.testing.assert_array_equal(restored.R.coords, self.state.R.coords)
        self.assertEqual(restored.p, self.state.p)


if __name__ == "__main__":
    print("🧪 Metrics Module - Test Suite")
    print("=" * 50)
    unittest.main(verbosity=2)
