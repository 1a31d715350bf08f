#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Unit tests for observation sources
"""

import math
import unittest

import numpy as np
from scipy import stats

from functions.vcrx.sources import (
    DatasetSource,
    EveMode,
    FadingConfig,
    FadingSource,
    RaConfig,
    RaMapSource,
    RaScene,
    RaSourceConfig,
    SampleBatch,
    Standardizer,
    _range_profiles,
    batch_rng,
    beam_gain,
    dbm_to_linear,
    eve_position_obs,
    gaussian_mi_bits,
    gen_fading,
    gen_ra_maps,
    gen_ramap_batch,
    noise_floor,
    sample_scene,
    strongest_peak,
)


class TestFading(unittest.TestCase):
    """Test cases for the fading source."""

    def test_dbm_to_linear(self):
        """Test dBm conversion."""
        self.assertAlmostEqual(dbm_to_linear(0), 1.0)
        self.assertAlmostEqual(dbm_to_linear(-20), 0.01)
        self.assertAlmostEqual(dbm_to_linear(10), 10.0)
        self.assertEqual(dbm_to_linear(-math.inf), 0.0)

    def test_noiseless_links_agree(self):
        """Test that zero noise gives equal observations."""
        cfg = FadingConfig(n1_dbm=-math.inf, n2_dbm=-math.inf)
        batch = gen_fading(cfg, 100, np.random.default_rng(0))
        np.testing.assert_array_equal(batch.x, batch.y)

    def test_variance_of_x(self):
        """Test the variance of Alice's observation."""
        batch = gen_fading(FadingConfig(), 125000, np.random.default_rng(1))
        var = batch.x.var()
        se = 1.01 * math.sqrt(2.0 / batch.x.size)
        self.assertLess(abs(var - 1.01), 3 * se)

    def test_eve_modes(self):
        """Test Eve's view in each mode."""
        rng = np.random.default_rng(2)
        self.assertEqual(gen_fading(FadingConfig(), 10, rng).z.shape, (10, 0))
        corr = gen_fading(FadingConfig(eve_mode=EveMode.CORRELATED), 20000, rng)
        uncorr = gen_fading(FadingConfig(eve_mode="uncorrelated"), 20000, rng)
        self.assertGreater(np.corrcoef(corr.x[:, 0], corr.z[:, 0])[0, 1], 0.5)
        self.assertLess(abs(np.corrcoef(uncorr.x[:, 0], uncorr.z[:, 0])[0, 1]), 0.05)

    def test_same_seed_same_batch(self):
        """Test seeded reproducibility."""
        a = gen_fading(FadingConfig(eve_mode="correlated"), 16, batch_rng(42, 0))
        b = gen_fading(FadingConfig(eve_mode="correlated"), 16, batch_rng(42, 0))
        np.testing.assert_array_equal(a.z, b.z)

    def test_closed_form_mi(self):
        """Test the Gaussian mutual informations."""
        mi = gaussian_mi_bits(FadingConfig())
        self.assertAlmostEqual(mi["i_xy_bits"], 2.833, places=3)
        self.assertEqual(mi["i_xz_bits"], 0.0)

    def test_invalid_dim(self):
        """Test a nonpositive width."""
        with self.assertRaises(ValueError):
            FadingConfig(dim=0)


class TestRaMaps(unittest.TestCase):
    """Test cases for range-angle maps."""

    def setUp(self):
        """Set up test fixtures."""
        self.cfg = RaConfig()

    def test_configuration_geometry(self):
        """Test the maximum range and beam count."""
        self.assertAlmostEqual(self.cfg.max_range_m, 87.8, places=1)
        self.assertEqual(len(self.cfg.beam_angles), 64)

    def test_single_path_peak_bins(self):
        """Test the peak bin of a single path."""
        scene = RaScene(bob_range=30.0, bob_azimuth=0.0)
        alice, bob = gen_ra_maps(scene, self.cfg, np.random.default_rng(3))
        self.assertEqual(alice.shape, (256, 64))
        self.assertLessEqual(abs(strongest_peak(bob)[0] - 49), 1)
        self.assertLessEqual(abs(strongest_peak(alice)[0] - 98), 1)

    def test_random_scenes_peak_geometry(self):
        """Test that peaks follow Bob's position in random scenes."""
        rng = np.random.default_rng(4)
        angles = self.cfg.beam_angles
        for _ in range(10):
            scene = RaScene(bob_range=float(rng.uniform(5, 75)), bob_azimuth=float(rng.uniform(-45, 45)))
            alice, bob = gen_ra_maps(scene, self.cfg, rng)
            (rb, ab), (ra, aa) = strongest_peak(bob), strongest_peak(alice)
            self.assertLessEqual(abs(rb - round(self.cfg.bob_bin(scene.bob_range))), 1)
            self.assertLessEqual(abs(ra - round(self.cfg.alice_bin(scene.bob_range))), 1)
            self.assertLessEqual(abs(angles[ab] - angles[aa]), self.cfg.beam_spacing + 1e-9)

    def test_noise_only_maps_stay_near_floor(self):
        """Test maps with no target."""
        quiet = 0
        for seed in range(100):
            profile = _range_profiles([], self.cfg, 10.0, np.random.default_rng(seed))
            if profile.max() <= noise_floor(profile) * 10.0:
                quiet += 1
        self.assertGreaterEqual(quiet, 99)

    def test_scene_outside_range_rejected(self):
        """Test a scene beyond the maximum range."""
        with self.assertRaises(ValueError):
            gen_ra_maps(RaScene(bob_range=120.0, bob_azimuth=0.0), self.cfg, np.random.default_rng(0))
        with self.assertRaises(ValueError):
            gen_ra_maps(RaScene(bob_range=20.0, bob_azimuth=60.0), self.cfg, np.random.default_rng(0))

    def test_beam_gain_peaks_on_target(self):
        """Test that beam gain peaks at the steering angle."""
        angles = self.cfg.beam_angles
        gains = beam_gain(angles, angles[10], self.cfg.array_elems)
        self.assertEqual(int(np.argmax(gains)), 10)
        self.assertAlmostEqual(gains[10], 1.0, places=12)


class TestEveObservations(unittest.TestCase):
    """Test cases for Eve's position estimates."""

    def setUp(self):
        """Set up test fixtures."""
        self.scene = RaScene(bob_range=40.0, bob_azimuth=10.0)

    def test_exact_without_uncertainty(self):
        """Test zero-width uncertainty."""
        self.assertEqual(eve_position_obs(self.scene, 0, 0, np.random.default_rng(0)), (40.0, 10.0))

    def test_support_and_uniformity(self):
        """Test the support and uniformity of position errors."""
        rng = np.random.default_rng(8)
        draws = np.array([eve_position_obs(self.scene, 10.0, 15.0, rng) for _ in range(100000)])
        self.assertTrue(np.all(np.abs(draws[:, 0] - 40.0) <= 5.0))
        self.assertTrue(np.all(np.abs(draws[:, 1] - 10.0) <= 7.5))
        self.assertGreater(stats.kstest(draws[:, 0], "uniform", args=(35.0, 10.0)).pvalue, 0.01)

    def test_negative_width_rejected(self):
        """Test negative uncertainty widths."""
        with self.assertRaises(ValueError):
            eve_position_obs(self.scene, -1, 0, np.random.default_rng(0))


class TestRaBatches(unittest.TestCase):
    """Test cases for range-angle batches."""

    def setUp(self):
        """Set up test fixtures."""
        ra = RaConfig(n_sc=64, n_ifft=128, n_beams=8, n_range_bins=16)
        self.cfg = RaSourceConfig(ra=ra, eve_mode="correlated")

    def test_row_width(self):
        """Test flattened row widths."""
        batch = gen_ramap_batch(self.cfg, 3, np.random.default_rng(0))
        self.assertEqual(batch.dims, (16 * 8, 16 * 8, 2))

    def test_scene_sampler_inside_support(self):
        """Test that sampled scenes stay in range."""
        rng = np.random.default_rng(1)
        for _ in range(20):
            scene = sample_scene(self.cfg, rng)
            self.assertTrue(5.0 <= scene.bob_range <= 75.0)
            self.assertEqual(len(scene.clutter_paths), 2)

    def test_ramap_source_draws_fresh_scenes(self):
        """Test that the scene source matches direct batch generation."""
        src = RaMapSource(self.cfg)
        self.assertEqual(src.dims, (16 * 8, 16 * 8, 2))
        drawn = src.sample(2, np.random.default_rng(4))
        direct = gen_ramap_batch(self.cfg, 2, np.random.default_rng(4))
        np.testing.assert_array_equal(drawn.x, direct.x)
        np.testing.assert_array_equal(drawn.z, direct.z)
        self.assertFalse(np.array_equal(drawn.x[0], drawn.x[1]))


class TestBatchHelpers(unittest.TestCase):
    """Test cases for batches, standardizers and sources."""

    def test_sample_batch_validates_rows(self):
        """Test row-count and finiteness checks."""
        with self.assertRaises(ValueError):
            SampleBatch(np.zeros((3, 2)), np.zeros((2, 2)), None)
        with self.assertRaises(ValueError):
            SampleBatch(np.full((2, 2), np.nan), np.zeros((2, 2)), None)

    def test_standardizer(self):
        """Test zero mean and unit variance after fitting."""
        data = np.random.default_rng(0).normal(3.0, 2.0, size=(1000, 4))
        out = Standardizer.fit(data).apply(data)
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.std(axis=0), 1.0, atol=1e-12)

    def test_constant_column_kept_finite(self):
        """Test a column with zero variance."""
        out = Standardizer.fit(np.ones((5, 2))).apply(np.ones((5, 2)))
        self.assertTrue(np.all(np.isfinite(out)))

    def test_sources(self):
        """Test simulator and dataset sampling."""
        src = FadingSource(FadingConfig(dim=4, eve_mode="correlated"))
        self.assertEqual(src.dims, (4, 4, 4))
        data = src.sample(50, np.random.default_rng(0))
        drawn = DatasetSource(data).sample(8, batch_rng(1, 2))
        self.assertEqual(len(drawn), 8)


if __name__ == "__main__":
    unittest.main()
