#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Unit tests for GF(2^k) arithmetic
"""

import unittest

from functions.vcrx.galois_field import (
    PRIMITIVE_POLYS,
    Field,
    field_for_order,
    get_field,
    gf_div,
    gf_inv,
    gf_mul,
    gf_mul_noLUT,
    gf_poly_div,
    gf_poly_eval,
    gf_poly_mul,
    gf_pow,
)


class TestField(unittest.TestCase):
    """Table construction and validation."""

    def test_tables_are_inverse(self):
        """Test that log and antilog tables invert each other."""
        for k in PRIMITIVE_POLYS:
            f = get_field(k)
            for a in range(1, f.q):
                self.assertEqual(f.antilog[f.log[a]], a)

    def test_antilog_period(self):
        """Test that the generator's powers repeat with period q - 1."""
        f = get_field(5)
        for i in range(f.q - 1):
            self.assertEqual(f.alpha_pow(i), f.alpha_pow(i + f.q - 1))
        self.assertEqual(f.antilog[f.q - 1], 1)

    def test_rejects_reducible_polynomial(self):
        """Test a reducible modulus."""
        # x^4 + x^3 (divisible by x)
        with self.assertRaises(ValueError):
            Field(k=4, primitive_poly=0b11000)

    def test_rejects_non_primitive_polynomial(self):
        """Test an irreducible but non-primitive modulus."""
        # x^4 + x^3 + x^2 + x + 1 is irreducible but alpha has order 5
        with self.assertRaises(ValueError):
            Field(k=4, primitive_poly=0b11111)

    def test_unsupported_width(self):
        """Test widths outside 4..7."""
        with self.assertRaises(ValueError):
            get_field(3)
        with self.assertRaises(ValueError):
            field_for_order(24)

    def test_field_for_order(self):
        """Test lookup by alphabet size."""
        self.assertEqual(field_for_order(64).k, 6)


class TestElementArithmetic(unittest.TestCase):
    """Test cases for element arithmetic."""

    def setUp(self):
        """Set up test fixtures."""
        self.f = get_field(4)

    def test_known_product(self):
        """Test a hand-computed product."""
        self.assertEqual(gf_mul(0x8, 0x2, self.f), 0x3)

    def test_identity_and_zero(self):
        """Test multiplication by one and zero."""
        for a in range(self.f.q):
            self.assertEqual(gf_mul(a, 1, self.f), a)
            self.assertEqual(gf_mul(0, a, self.f), 0)

    def test_tables_match_shift_and_reduce(self):
        """Test table products against the table-free multiplier."""
        for k in (4, 5):
            f = get_field(k)
            for a in range(f.q):
                for b in range(f.q):
                    self.assertEqual(gf_mul(a, b, f), gf_mul_noLUT(a, b, f))

    def test_inverse(self):
        """Test inverses and the zero inverse error."""
        self.assertEqual(gf_inv(1, self.f), 1)
        with self.assertRaises(ZeroDivisionError):
            gf_inv(0, self.f)
        for k in PRIMITIVE_POLYS:
            f = get_field(k)
            for a in range(1, f.q):
                self.assertEqual(gf_mul(a, gf_inv(a, f), f), 1)

    def test_division_and_power(self):
        """Test division and exponentiation."""
        for a in range(1, self.f.q):
            self.assertEqual(gf_div(a, a, self.f), 1)
            self.assertEqual(gf_pow(a, self.f.q - 1, self.f), 1)
        with self.assertRaises(ZeroDivisionError):
            gf_div(3, 0, self.f)


class TestPolynomials(unittest.TestCase):
    """Test cases for polynomial helpers."""

    def setUp(self):
        """Set up test fixtures."""
        self.f = get_field(4)

    def test_divmod_reconstructs_dividend(self):
        """Test that quotient times divisor plus remainder gives the dividend."""
        dividend = [3, 7, 0, 12, 5, 9]
        divisor = [1, 4, 6]
        quotient, remainder = gf_poly_div(dividend, divisor, self.f)
        product = gf_poly_mul(quotient, divisor, self.f)
        padded = [0] * (len(product) - len(remainder)) + remainder
        rebuilt = [a ^ b for a, b in zip(product, padded)]
        self.assertEqual(rebuilt, dividend)

    def test_eval_at_root(self):
        """Test evaluation at a known root."""
        # (x - 2)(x - 5) vanishes at 2 and 5
        poly = gf_poly_mul([1, 2], [1, 5], self.f)
        self.assertEqual(gf_poly_eval(poly, 2, self.f), 0)
        self.assertEqual(gf_poly_eval(poly, 5, self.f), 0)
        self.assertNotEqual(gf_poly_eval(poly, 3, self.f), 0)


if __name__ == "__main__":
    unittest.main()
