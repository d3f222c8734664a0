#!/usr/bin/env python3
"""
Test Suite for the Harness Module

Sweep specifications, paired seeds, result tables, plot/CSV outputs and the
small-instance oracles.

Author: MA-FD Optimizer
Version: 1.0
"""

import json
import math
import os
import shutil
import tempfile
import unittest

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

import ao
import harness
from channel import LINKS, ConfigurationError, ScenarioConfig
from subproblems import SrocrSettings

FAST = ao.AoSettings(max_iterations=2, inner_sca_iterations=2,
                     srocr=SrocrSettings(max_iterations=5, aux_refresh=1))
CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs")


def toy_config(**overrides) -> ScenarioConfig:
    values = dict(num_tx_antennas=2, num_rx_antennas=2, num_elements=4,
                  num_paths={link: 2 for link in LINKS}, bandwidth_hz=1e8)
    values.update(overrides)
    return ScenarioConfig().with_overrides(**values)


def synthetic_table(variants=("MA-ME", "FA-ME", "MA-FE", "FA-FE")) -> harness.ResultTable:
    rows = []
    for offset, variant in enumerate(variants):
        for value in (8, 16):
            for index in range(3):
                rate_dl = 1.0 + offset + 0.1 * index + value / 16.0
                rate_ul = 0.5 + 0.05 * index
                rows.append({"variant": variant, "value": value, "seed_index": index,
                             "seed": harness.derive_seed(2024, value, index),
                             "rate_sum": rate_dl + rate_ul, "rate_dl": rate_dl, "rate_ul": rate_ul,
                             "iterations": 3, "converged": True, "qos_feasible": True, "error": ""})
    return harness.ResultTable.from_rows(rows)


class TestSweepSpec(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def write_spec(self, data) -> str:
        path = os.path.join(self.temp_dir, "sweep.json")
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f)
        return path

    def test_bundled_spec(self):
        spec = harness.load_sweep_spec(os.path.join(CONFIG_DIR, "sweep_n.json"))
        self.assertEqual(spec.parameter, "N")
        self.assertEqual(spec.values, (8, 16, 32))
        self.assertEqual(spec.realizations, 20)

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError):
            harness.load_sweep_spec(os.path.join(self.temp_dir, "missing.json"))

    def test_unknown_parameter(self):
        path = self.write_spec({"parameter": "carrier", "values": [1, 2]})
        with self.assertRaises(ConfigurationError) as ctx:
            harness.load_sweep_spec(path)
        self.assertIn("carrier", str(ctx.exception))

    def test_bad_variant(self):
        path = self.write_spec({"parameter": "eta", "values": [0.1], "variants": ["MA-MA"]})
        with self.assertRaises(ConfigurationError):
            harness.load_sweep_spec(path)

    def test_bad_duplex_value(self):
        path = self.write_spec({"parameter": "duplex", "values": ["FD", "TDD"]})
        with self.assertRaises(ConfigurationError):
            harness.load_sweep_spec(path)

    def test_seeds_are_paired(self):
        self.assertEqual(harness.derive_seed(2024, 16, 3), harness.derive_seed(2024, 16, 3))
        self.assertNotEqual(harness.derive_seed(2024, 16, 3), harness.derive_seed(2024, 16, 4))
        self.assertNotEqual(harness.derive_seed(2024, 16, 3), harness.derive_seed(2025, 16, 3))

    def test_apply_parameter(self):
        config, duplex = harness.apply_parameter(toy_config(), "N", 6.0)
        self.assertEqual(config.num_elements, 6)
        self.assertIsInstance(config.num_elements, int)
        self.assertIsNone(duplex)
        config, duplex = harness.apply_parameter(toy_config(), "duplex", "HD")
        self.assertEqual(duplex, "HD")
        self.assertEqual(config, toy_config())


class TestSweep(unittest.TestCase):

    def test_paired_realizations(self):
        spec = harness.SweepSpec(parameter="eta", values=(0.01,), variants=("FA-FE", "FA-FE-HD"),
                                 realizations=2, base_config=toy_config(), settings=FAST)
        table = harness.run_sweep(spec)
        self.assertEqual(len(table), 4)
        frame = table.frame
        self.assertTrue((frame["error"] == "").all(), list(frame["error"]))
        for index in (0, 1):
            seeds = frame[frame["seed_index"] == index]["seed"].unique()
            self.assertEqual(len(seeds), 1)
        self.assertTrue((frame["rate_sum"] >= 0.0).all())

    def test_failed_cell_becomes_error_row(self):
        row = harness.run_cell(toy_config().to_dict(), FAST.to_dict(), "XX-YY", 1, 0, 5, None)
        self.assertIn("XX-YY", row["error"])
        self.assertTrue(math.isnan(row["rate_sum"]))


class TestOutputs(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.table = synthetic_table()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_csv_round_trip(self):
        path = os.path.join(self.temp_dir, "results.csv")
        self.table.to_csv(path)
        restored = harness.ResultTable.from_csv(path)
        pd.testing.assert_frame_equal(restored.aggregate(), self.table.aggregate(), check_dtype=False)

    def test_aggregate(self):
        summary = self.table.aggregate()
        self.assertEqual(len(summary), 8)
        row = summary[(summary["variant"] == "MA-ME") & (summary["value"] == 8)].iloc[0]
        self.assertAlmostEqual(row["rate_ul_mean"], 0.55, delta=1e-12)
        self.assertEqual(row["rate_sum_count"], 3)

    def test_error_rows_are_excluded(self):
        frame = self.table.frame.copy()
        frame.loc[0, "error"] = "solver failed"
        frame.loc[0, "rate_sum"] = math.nan
        summary = harness.ResultTable(frame).aggregate()
        row = summary[(summary["variant"] == "MA-ME") & (summary["value"] == 8)].iloc[0]
        self.assertEqual(row["rate_sum_count"], 2)

    def test_emit_outputs(self):
        written = harness.emit_outputs(self.table, self.temp_dir, xlabel="N")
        self.assertEqual(len(written), 4)
        for path in written:
            self.assertTrue(os.path.getsize(path) > 0, path)
        with open(os.path.join(self.temp_dir, "sum_rate.svg"), 'r', encoding='utf-8') as f:
            self.assertIn("<svg", f.read())

    def test_one_series_per_variant(self):
        fig = harness.build_rate_figure(self.table.aggregate(), ["rate_sum"], "N")
        self.assertEqual(len(fig.axes[0].containers), 4)
        plt.close(fig)
        fig = harness.build_rate_figure(self.table.aggregate(), ["rate_dl", "rate_ul"], "N")
        self.assertEqual(len(fig.axes[0].containers), 8)
        plt.close(fig)

    def test_variant_filter(self):
        harness.emit_outputs(self.table, self.temp_dir, variants=["MA-ME"], plots=False)
        summary = pd.read_csv(os.path.join(self.temp_dir, "summary.csv"))
        self.assertEqual(set(summary["variant"]), {"MA-ME"})
        with self.assertRaises(ConfigurationError) as ctx:
            harness.emit_outputs(self.table, self.temp_dir, variants=[])
        self.assertIn("FA-FE", str(ctx.exception))

    def test_unwritable_directory(self):
        blocker = os.path.join(self.temp_dir, "blocker")
        with open(blocker, 'w', encoding='utf-8') as f:
            f.write("not a directory")
        out_dir = os.path.join(blocker, "out")
        with self.assertRaises(OSError) as ctx:
            harness.emit_outputs(self.table, out_dir)
        self.assertIn(out_dir, str(ctx.exception))

    def test_convergence_plot(self):
        trace = ao.AoTrace(records=[ao.AoIterationRecord(i, 1.0 + i, 0.5, 0.5 + i, 1.0, 1.0, True, True, True)
                                    for i in range(3)])
        path = os.path.join(self.temp_dir, "convergence.svg")
        harness.plot_convergence({"MA-ME": trace}, path)
        self.assertTrue(os.path.exists(path))


class TestOracles(unittest.TestCase):

    def setUp(self):
        self.config = toy_config(rate_threshold_dl_bps_hz=0.0, rate_threshold_ul_bps_hz=0.0)

    def test_gradient_audit(self):
        errors = harness.gradient_audit(self.config, seed=3, probes=5)
        self.assertEqual(set(errors), {"phases", "T_t", "T_r", "R"})
        for block, error in errors.items():
            self.assertLess(error, 1e-5, block)

    def test_power_bisection_matches_grid(self):
        for seed in range(5):
            result = harness.power_oracle(self.config, seed, grid_points=2001)
            self.assertEqual(result["qos_feasible"], 1.0)
            self.assertGreaterEqual(result["rate_bisection"], result["rate_grid"] - 1e-9)

    def test_combiner_matches_eigenvector(self):
        for seed in range(5):
            result = harness.combiner_oracle(self.config, seed)
            self.assertLessEqual(result["angle_rad"], 1e-6)
            self.assertAlmostEqual(result["gamma_ul"] / result["gamma_ul_reference"], 1.0, delta=1e-9)

    def test_single_element_close_to_grid(self):
        # 5x5 starts; the 40x40 grid shares none of its interior points with them
        for seed in (5, 11):
            with self.subTest(seed=seed):
                result = harness.single_element_oracle(ScenarioConfig(), seed=seed, phase_points=101,
                                                       position_points=40, coarse_points=5)
                self.assertGreater(result["grid_rate"], 0.0)
                self.assertLessEqual(result["relative_shortfall"], 0.01)


if __name__ == "__main__":
    print("🧪 Harness Module - Test Suite")
    print("=" * 50)
    unittest.main(verbosity=2)
