#!/usr/bin/env python3
"""
Test Suite for the Experiment Runner

Exit codes and output placement of the command-line front end.

Author: MA-FD Optimizer
Version: 1.0
"""

import os
import shutil
import tempfile
import unittest
from unittest import mock

import run_experiments
from test_harness import synthetic_table


class TestCommandLine(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.results = os.path.join(self.temp_dir, "results.csv")
        synthetic_table().to_csv(self.results)

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_plot_from_results(self):
        out_dir = os.path.join(self.temp_dir, "plots")
        code = run_experiments.main(["plot", self.results, "--variants", "MA-ME", "FA-FE", "-o", out_dir])
        self.assertEqual(code, 0)
        self.assertTrue(os.path.exists(os.path.join(out_dir, "sum_rate.svg")))
        self.assertTrue(os.path.exists(os.path.join(out_dir, "user_rates.svg")))

    def test_out_dir_from_environment(self):
        out_dir = os.path.join(self.temp_dir, "from_env")
        with mock.patch.dict(os.environ, {"MAFD_OUT_DIR": out_dir}):
            self.assertEqual(run_experiments.main(["plot", self.results]), 0)
        self.assertTrue(os.path.exists(os.path.join(out_dir, "summary.csv")))

    def test_configuration_errors_exit_2(self):
        self.assertEqual(run_experiments.main(["plot", os.path.join(self.temp_dir, "missing.csv")]), 2)
        self.assertEqual(run_experiments.main(["plot", self.results, "--variants", "MA-XX"]), 2)
        self.assertEqual(run_experiments.main(["run", "--variant", "MA-XX", "-o", self.temp_dir]), 2)
        self.assertEqual(run_experiments.main(["run", "--config", os.path.join(self.temp_dir, "nope.json")]), 2)

    def test_paper_profile_resolves(self):
        args = run_experiments.build_parser().parse_args(["gradcheck", "--profile", "paper"])
        config = run_experiments.resolve_config(args)
        self.assertEqual(config.num_tx_antennas, 8)
        self.assertEqual(config.num_elements, 81)

    def test_sweep_seed_sets_seed_base(self):
        spec_path = os.path.join(run_experiments.PROFILES_DIR, "sweep_n.json")
        with mock.patch("harness.run_sweep", return_value=synthetic_table()) as sweep:
            code = run_experiments.main(["sweep", spec_path, "--seed", "11", "-o", self.temp_dir])
        self.assertEqual(code, 0)
        self.assertEqual(sweep.call_args[0][0].seed_base, 11)

        with mock.patch("harness.run_sweep", return_value=synthetic_table()) as sweep:
            run_experiments.main(["sweep", spec_path, "-o", self.temp_dir])
        self.assertEqual(sweep.call_args[0][0].seed_base, 2024)

    def test_unwritable_output_exits_3(self):
        blocker = os.path.join(self.temp_dir, "blocker")
        with open(blocker, 'w', encoding='utf-8') as f:
            f.write("file")
        code = run_experiments.main(["plot", self.results, "-o", os.path.join(blocker, "out")])
        self.assertEqual(code, 3)


if __name__ == "__main__":
    print("🧪 Experiment Runner - Test Suite")
    print("=" * 50)
    unittest.main(verbosity=2)
