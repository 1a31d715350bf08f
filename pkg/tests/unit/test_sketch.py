#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Unit tests for the code-offset secure sketch
"""

import unittest

import numpy as np

from functions.vcrx.reed_solomon import RsParams, inject_errors, is_failure, rs_encode, sample_codeword
from functions.vcrx.sketch import generate_keys, key_rate_bits, leakage_bound_bits, make_sketch, recover


class TestMakeSketch(unittest.TestCase):
    """Test cases for building sketches."""

    def setUp(self):
        """Set up test fixtures."""
        self.rs = RsParams.for_alphabet(16, 9)
        self.rng = np.random.default_rng(5)

    def test_offset_of_own_codeword_is_zero(self):
        """Test the offset of a codeword from itself."""
        c = sample_codeword(self.rs, self.rng)
        self.assertEqual(make_sketch(c, c, self.rs).offset, (0,) * 15)

    def test_zero_codeword_offset_is_w(self):
        """Test that the zero codeword leaves W unchanged."""
        w = self.rng.integers(0, 16, size=15).tolist()
        self.assertEqual(list(make_sketch(w, [0] * 15, self.rs).offset), w)

    def test_rejects_non_codeword(self):
        """Test a word that fails the syndrome check."""
        c = sample_codeword(self.rs, self.rng)
        c[0] ^= 1
        with self.assertRaises(ValueError):
            make_sketch([0] * 15, c, self.rs)

    def test_rejects_wrong_length(self):
        """Test inputs whose length is not n."""
        with self.assertRaises(ValueError):
            make_sketch([0] * 14, [0] * 15, self.rs)

    def test_hex_rendering(self):
        """Test the hex form of a sketch."""
        s = make_sketch([0xA] + [0] * 14, [0] * 15, self.rs)
        self.assertEqual(s.to_hex(), "a" + "0" * 14)


class TestRecover(unittest.TestCase):
    """Test cases for Bob's recovery."""

    def setUp(self):
        """Set up test fixtures."""
        self.rs = RsParams.for_alphabet(16, 9)
        self.rng = np.random.default_rng(9)

    def test_identical_observations(self):
        """Test that identical symbols give identical keys."""
        for _ in range(20):
            w = self.rng.integers(0, 16, size=15).tolist()
            msg = self.rng.integers(0, 16, size=9).tolist()
            s = make_sketch(w, rs_encode(msg, self.rs), self.rs)
            self.assertEqual(recover(w, s), msg)

    def test_t_symbol_disagreements(self):
        """Test recovery with t disagreeing symbols."""
        for _ in range(200):
            w = self.rng.integers(0, 16, size=15).tolist()
            v = inject_errors(w, self.rs.t, 16, self.rng)
            keys, _ = generate_keys(w, v, self.rs, self.rng)
            self.assertTrue(keys.agree)
            self.assertFalse(keys.failed)

    def test_full_disagreement_is_flagged(self):
        """Test that heavy disagreement is a mismatch."""
        for _ in range(50):
            w = self.rng.integers(0, 16, size=15).tolist()
            v = inject_errors(w, 15, 16, self.rng)
            keys, _ = generate_keys(w, v, self.rs, self.rng)
            self.assertFalse(keys.agree)
            if keys.failed:
                self.assertTrue(is_failure(keys.l_bob))


class TestRates(unittest.TestCase):
    """Test cases for key rate and leakage."""

    def test_key_rate(self):
        """Test the key rate formula."""
        self.assertAlmostEqual(key_rate_bits(RsParams.for_alphabet(16, 15)), 4.0)
        self.assertAlmostEqual(key_rate_bits(RsParams.for_alphabet(16, 5)), 4 * 5 / 15)
        self.assertAlmostEqual(key_rate_bits(RsParams.for_alphabet(16, 1)), 0.2667, places=4)

    def test_leakage_bound(self):
        """Test the leakage bound formula."""
        self.assertEqual(leakage_bound_bits(4.0, 0.0, 16, 15), 0.0)
        self.assertAlmostEqual(leakage_bound_bits(3.958, 0.003, 16, 15), 0.675, places=9)
        self.assertEqual(leakage_bound_bits(0.0, 0.0, 16, 1), 4.0)

    def test_negative_mi_clamped(self):
        """Test that negative MI estimates count as zero."""
        self.assertEqual(leakage_bound_bits(4.0, -0.02, 16, 15), 0.0)

    def test_entropy_out_of_range(self):
        """Test entropies outside [0, log2 q]."""
        with self.assertRaises(ValueError):
            leakage_bound_bits(4.5, 0.0, 16, 15)
        with self.assertRaises(ValueError):
            leakage_bound_bits(-0.1, 0.0, 16, 15)


if __name__ == "__main__":
    unittest.main()
