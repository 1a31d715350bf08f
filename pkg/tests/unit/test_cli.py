#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Unit tests for the command line helpers
"""

import json
import os
import tempfile
import unittest

import click
import numpy as np
from click.testing import CliRunner

from functions.vcrx import cli
from functions.vcrx.config import RunConfig
from functions.vcrx.errors import ConfigError, FileFormatError, TrainingAborted
from functions.vcrx.sources import FadingSource, RaMapSource


def _cfg(source, **eval_overrides):
    return RunConfig.from_dict({"seed": 11, "source": source, "eval": {"test_size": 30, **eval_overrides}})


class TestDatasetGeneration(unittest.TestCase):
    """Test cases for dataset shapes and seed streams."""

    def test_expected_dims(self):
        """Test widths per source and Eve mode."""
        self.assertEqual(cli.expected_dims(_cfg({"fading": {"dim": 4}})), (4, 4, 0))
        self.assertEqual(cli.expected_dims(_cfg({"fading": {"dim": 4, "eve_mode": "correlated"}})), (4, 4, 4))
        ramap = _cfg({"ramap": {"n_beams": 8, "n_range_bins": 32, "eve_mode": "uncorrelated"}})
        self.assertEqual(cli.expected_dims(ramap), (256, 256, 2))

    def test_split_sizes_and_determinism(self):
        """Test that train and test splits have their sizes and independent streams."""
        cfg = _cfg({"fading": {"dim": 3, "batch": 50, "eve_mode": "correlated"}})
        train = cli.generate_dataset(cfg, "train")
        test = cli.generate_dataset(cfg, "test")
        self.assertEqual(len(train), 50)
        self.assertEqual(len(test), 30)
        self.assertEqual(train.dims, (3, 3, 3))
        np.testing.assert_array_equal(train.x, cli.generate_dataset(cfg, "train").x)
        self.assertFalse(np.array_equal(train.x[:30], test.x))

    def test_simulator_source_per_kind(self):
        """Test the fresh-draw source chosen for key trials."""
        fading = cli.simulator_source(_cfg({"fading": {"dim": 4, "eve_mode": "correlated"}}))
        self.assertIsInstance(fading, FadingSource)
        self.assertEqual(fading.dims, (4, 4, 4))
        ramap = cli.simulator_source(_cfg({"ramap": {"n_beams": 8, "n_range_bins": 32}}))
        self.assertIsInstance(ramap, RaMapSource)
        self.assertEqual(ramap.dims, (256, 256, 0))

    def test_simulator_draws_exceed_test_split_without_repeats(self):
        """Test that key trials can draw more pairs than the test split holds, all distinct."""
        cfg = _cfg({"fading": {"dim": 2}})
        drawn = cli.simulator_source(cfg).sample(15 * 200, cli.batch_rng(cfg.seed, cli.STREAM_KEYS, 1))
        self.assertEqual(len(drawn), 3000)
        self.assertEqual(len(np.unique(drawn.x, axis=0)), 3000)


class TestArgumentHelpers(unittest.TestCase):
    """Test cases for option parsing and model extras."""

    def test_parse_m_list(self):
        """Test comma-separated message lengths."""
        self.assertIsNone(cli._parse_m_list(None))
        self.assertEqual(cli._parse_m_list("1, 5,9"), [1, 5, 9])
        with self.assertRaises(click.BadParameter):
            cli._parse_m_list("1,x")

    def test_scalers_from_arrays(self):
        """Test rebuilding standardizers from four or six stored arrays."""
        arrays = [np.zeros(2), np.ones(2), np.zeros(2), np.ones(2)]
        scalers = cli._scalers_from_arrays(arrays)
        self.assertIsNone(scalers.z)
        scalers = cli._scalers_from_arrays(arrays + [np.zeros(3), np.ones(3)])
        self.assertEqual(scalers.z.mean.shape, (3,))
        with self.assertRaises(FileFormatError):
            cli._scalers_from_arrays(arrays[:3])


class TestExitCodes(unittest.TestCase):
    """Test cases for mapping failures to exit codes."""

    def test_training_abort_exits_two(self):
        """Test that an aborted training run exits with code 2."""
        def body():
            raise TrainingAborted(4, "non-finite loss")
        with self.assertRaises(SystemExit) as ctx:
            cli._run(body)
        self.assertEqual(ctx.exception.code, 2)

    def test_domain_error_exits_one(self):
        """Test that other domain errors exit with code 1."""
        def body():
            raise ConfigError("unknown key", key="vpq.x")
        with self.assertRaises(SystemExit) as ctx:
            cli._run(body)
        self.assertEqual(ctx.exception.code, 1)

    def test_gen_with_bad_config(self):
        """Test gen with an unknown source key."""
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "bad.json")
            with open(path, "w", encoding="utf-8") as fh:
                json.dump({"seed": 1, "source": {"fading": {"colour": "red"}}}, fh)
            result = runner.invoke(cli.main, ["gen", "--config", path, "--out", os.path.join(tmp, "d.data")])
        self.assertEqual(result.exit_code, 1)

    def test_help_lists_commands(self):
        """Test that --help names every command."""
        result = CliRunner().invoke(cli.main, ["--help"])
        self.assertEqual(result.exit_code, 0)
        for name in ("gen", "train", "eval", "keys"):
            self.assertIn(name, result.output)

    def test_keys_help_lists_sketch_output(self):
        """Test that keys offers the sketches CSV."""
        result = CliRunner().invoke(cli.main, ["keys", "--help"])
        self.assertEqual(result.exit_code, 0)
        self.assertIn("--sketches", result.output)


if __name__ == "__main__":
    unittest.main()
