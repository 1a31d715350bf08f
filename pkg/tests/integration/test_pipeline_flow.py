#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Integration tests for the gen -> train -> eval -> keys pipeline
"""

import json
import os
import tempfile
import unittest
from unittest.mock import patch

from click.testing import CliRunner

from functions.vcrx.cli import main
from functions.vcrx.config import RunConfig
from functions.vcrx.storage import read_csv, read_dataset, read_metrics


def _tiny_config(eve_mode="absent", shared=True):
    return {
        "seed": 5,
        "source": {"fading": {"dim": 4, "batch": 256, "eve_mode": eve_mode}},
        "vpq": {"steps_max": 20, "steps_predictor_only": 5, "batch_size": 32, "encoder_hidden": [8],
                "predictor_hidden": [8], "log_every": 10, "lr": 1e-3, "shared_encoder": shared},
        "eval": {"test_size": 200, "trials": 20, "rs_m": [1, 5, 9]},
    }


class TestPipelineFlow(unittest.TestCase):
    """Runs every command on a tiny fading configuration."""

    def setUp(self):
        """Set up test fixtures."""
        self.tmp = tempfile.TemporaryDirectory()
        self.runner = CliRunner()
        os.environ.pop("VCRX_THREADS", None)

    def tearDown(self):
        """Tear down test fixtures."""
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def write_config(self, name, doc):
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
        return path

    def invoke(self, *args):
        result = self.runner.invoke(main, list(args))
        return result

    def invoke_ok(self, *args):
        result = self.invoke(*args)
        self.assertEqual(result.exit_code, 0, msg=f"{args}: {result.output} {result.exception!r}")
        return result

    def generate(self, config, tag):
        train, test = self.path(f"{tag}.train.data"), self.path(f"{tag}.test.data")
        self.invoke_ok("gen", "--config", config, "--out", train)
        self.invoke_ok("gen", "--config", config, "--out", test, "--split", "test")
        return train, test

    def test_gen_is_byte_identical_across_runs(self):
        """Test that gen is reproducible and seed-dependent."""
        config = self.write_config("run.json", _tiny_config())
        first, second = self.path("a.data"), self.path("b.data")
        self.invoke_ok("gen", "--config", config, "--out", first)
        self.invoke_ok("gen", "--config", config, "--out", second)
        with open(first, "rb") as a, open(second, "rb") as b:
            self.assertEqual(a.read(), b.read())
        data, meta = read_dataset(first)
        self.assertEqual(len(data), 256)
        self.assertEqual(data.dims, (4, 4, 0))
        self.assertEqual(meta["digest"], RunConfig.from_file(config).digest())

        self.invoke_ok("gen", "--config", config, "--seed", "6", "--out", second)
        with open(first, "rb") as a, open(second, "rb") as b:
            self.assertNotEqual(a.read(), b.read())

    def test_shared_encoder_without_eve(self):
        """Test every command with a shared encoder and no eavesdropper."""
        config = self.write_config("run.json", _tiny_config())
        train, test = self.generate(config, "noeve")
        prefix = self.path("models/noeve")
        self.invoke_ok("train", "--config", config, "--data", train, "--out", prefix)
        self.assertTrue(os.path.exists(f"{prefix}.encoder.model"))
        self.assertFalse(os.path.exists(f"{prefix}.predictor.model"))
        self.assertFalse(os.path.exists(f"{prefix}.encoder_x.model"))

        provenance, history = read_csv(f"{prefix}.history.csv")
        self.assertEqual(len(history), 20)
        self.assertEqual(provenance["seed"], "5")
        self.assertEqual(history[-1]["i_vub_bits"], "")

        metrics_path = self.path("noeve.metrics")
        self.invoke_ok("eval", "--config", config, "--data", test, "--model", f"{prefix}.encoder.model",
                       "--out", metrics_path)
        metrics = read_metrics(metrics_path)
        self.assertEqual(metrics["n_test"], "200")
        self.assertTrue(0.0 <= float(metrics["agree_rate"]) <= 1.0)
        self.assertTrue(0.0 <= float(metrics["h_w_bits"]) <= 4.0)
        self.assertIn("chi2_p_value", metrics)
        self.assertNotIn("i_vlb_bits", metrics)

        result = self.invoke("eval", "--config", config, "--data", test, "--model", f"{prefix}.encoder.model",
                             "--mi", "--out", metrics_path)
        self.assertEqual(result.exit_code, 1)

        keys_path = self.path("noeve.keys.csv")
        self.invoke_ok("keys", "--config", config, "--data", test, "--model", f"{prefix}.encoder.model",
                       "--sketches", self.path("noeve.sketches.csv"), "--out", keys_path)
        _, rows = read_csv(keys_path)
        self.assertEqual([int(r["m"]) for r in rows], [1, 5, 9])
        rates = [float(r["key_rate_bits"]) for r in rows]
        self.assertEqual(rates, sorted(rates))
        self.assertTrue(all(int(r["trials"]) == 20 for r in rows))

        _, sketches = read_csv(self.path("noeve.sketches.csv"))
        self.assertEqual(len(sketches), 3 * 20)
        self.assertEqual([int(r["trial"]) for r in sketches[:20]], list(range(20)))
        self.assertTrue(all(len(r["sketch_hex"]) == 15 for r in sketches))
        self.assertRegex(sketches[0]["sketch_hex"], r"^[0-9a-f]{15}$")

    def test_correlated_eve_with_separate_encoders(self):
        """Test every command with separate encoders and a correlated eavesdropper."""
        config = self.write_config("eve.json", _tiny_config("correlated", shared=False))
        train, test = self.generate(config, "eve")
        prefix = self.path("eve")
        self.invoke_ok("train", "--config", config, "--data", train, "--out", prefix)
        for suffix in ("encoder_x", "encoder_y", "predictor"):
            self.assertTrue(os.path.exists(f"{prefix}.{suffix}.model"), msg=suffix)
        _, history = read_csv(f"{prefix}.history.csv")
        self.assertNotEqual(history[-1]["i_vub_bits"], "")

        models = ["--model", f"{prefix}.encoder_x.model", "--model", f"{prefix}.encoder_y.model"]
        metrics_path = self.path("eve.metrics")
        self.invoke_ok("eval", "--config", config, "--data", test, *models,
                       "--predictor", f"{prefix}.predictor.model", "--mi", "--out", metrics_path)
        metrics = read_metrics(metrics_path)
        self.assertIn("i_vub_bits", metrics)
        self.assertLessEqual(float(metrics["i_vlb_bits"]), 0.0)

        keys_path = self.path("eve.keys.csv")
        self.invoke_ok("keys", "--config", config, "--data", test, *models,
                       "--predictor", f"{prefix}.predictor.model", "--rs-m", "3,7", "--trials", "10",
                       "--out", keys_path)
        _, rows = read_csv(keys_path)
        self.assertEqual(len(rows), 2)
        self.assertTrue(all(float(r["leakage_bound_bits"]) >= 0.0 for r in rows))

        plain = self.write_config("plain.json", _tiny_config())
        _, plain_test = self.generate(plain, "plain")
        result = self.invoke("keys", "--config", plain, "--data", plain_test, *models,
                             "--predictor", f"{prefix}.predictor.model", "--out", self.path("plain.keys.csv"))
        self.assertEqual(result.exit_code, 1)
        self.assertNotIsInstance(result.exception, ValueError)

    def run_pipeline(self, config, tag):
        """Run gen, train, eval and keys into a fresh directory; return the written files."""
        run_dir = self.path(tag)
        train, test = os.path.join(run_dir, "train.data"), os.path.join(run_dir, "test.data")
        self.invoke_ok("gen", "--config", config, "--out", train)
        self.invoke_ok("gen", "--config", config, "--out", test, "--split", "test")
        prefix = os.path.join(run_dir, "run")
        self.invoke_ok("train", "--config", config, "--data", train, "--out", prefix)
        models = ["--model", f"{prefix}.encoder.model", "--predictor", f"{prefix}.predictor.model"]
        self.invoke_ok("eval", "--config", config, "--data", test, *models, "--mi",
                       "--out", os.path.join(run_dir, "metrics.txt"))
        self.invoke_ok("keys", "--config", config, "--data", test, *models,
                       "--sketches", os.path.join(run_dir, "sketches.csv"),
                       "--out", os.path.join(run_dir, "keys.csv"))
        return sorted(os.listdir(run_dir))

    def test_full_pipeline_is_byte_identical_across_thread_counts(self):
        """Test that reruns with 1 and 3 threads write identical files."""
        config = self.write_config("repro.json", _tiny_config("correlated"))
        with patch.dict(os.environ, {"VCRX_THREADS": "1"}):
            first = self.run_pipeline(config, "one")
        with patch.dict(os.environ, {"VCRX_THREADS": "3"}):
            second = self.run_pipeline(config, "three")
        self.assertEqual(first, second)
        for name in ("run.history.csv", "metrics.txt", "keys.csv", "sketches.csv", "run.encoder.model",
                     "run.predictor.model", "train.data", "test.data"):
            self.assertIn(name, first)
            with open(os.path.join(self.path("one"), name), "rb") as a, \
                    open(os.path.join(self.path("three"), name), "rb") as b:
                self.assertEqual(a.read(), b.read(), msg=name)

    def test_dataset_mismatch_is_rejected(self):
        """Test training on a dataset of the wrong width."""
        narrow = self.write_config("narrow.json", _tiny_config())
        wide_doc = _tiny_config()
        wide_doc["source"]["fading"]["dim"] = 6
        wide = self.write_config("wide.json", wide_doc)
        train, _ = self.generate(narrow, "narrow")
        result = self.invoke("train", "--config", wide, "--data", train, "--out", self.path("wide"))
        self.assertEqual(result.exit_code, 1)

    def test_ramap_rows_have_map_width(self):
        """Test range-angle dataset widths."""
        doc = {
            "seed": 2,
            "source": {"ramap": {"n_beams": 4, "batch": 3, "eve_mode": "correlated"}},
            "eval": {"test_size": 2},
        }
        config = self.write_config("ramap.json", doc)
        out = self.path("ramap.data")
        self.invoke_ok("gen", "--config", config, "--out", out)
        data, meta = read_dataset(out)
        self.assertEqual(data.dims, (1024, 1024, 2))
        self.assertEqual(len(data), 3)
        self.assertEqual(meta["source"], "ramap")


if __name__ == "__main__":
    unittest.main()
