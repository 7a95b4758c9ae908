import unittest

import numpy as np

from physics.errors import InsufficientCounts
from simulation.histograms import CoincidenceHistogram
from utils.stats import (bin_averaged_sinc_squared, compare_histograms, fit_sinc_squared, flatness_test,
                         max_poisson_deviation)


class TestStats(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(42)

    def test_flatness(self):
        flat = self.rng.poisson(200, size=100)
        self.assertGreater(flatness_test(flat), 1e-3)
        ramp = np.linspace(100, 300, 100).round()
        self.assertLess(flatness_test(ramp), 1e-6)

    def test_flatness_needs_counts(self):
        with self.assertRaises(InsufficientCounts):
            flatness_test(np.ones(50))
        with self.assertRaises(InsufficientCounts):
            flatness_test([100])

    def test_compare_histograms(self):
        shape = np.exp(-np.linspace(-3, 3, 41) ** 2) * 500
        first = self.rng.poisson(shape)
        second = self.rng.poisson(shape)
        self.assertGreater(compare_histograms(first, second), 1e-3)
        self.assertLess(compare_histograms(first, self.rng.poisson(np.full(41, 250.))), 1e-6)
        self.assertEqual(1.0, compare_histograms([0, 5, 0], [0, 7, 0]))

    def test_max_poisson_deviation(self):
        self.assertEqual(0., max_poisson_deviation([4, 9], [4, 9]))
        self.assertAlmostEqual(max_poisson_deviation([10, 9], [4, 9]), 3.)
        # expected counts below one use unit variance
        self.assertAlmostEqual(max_poisson_deviation([2], [0.]), 2.)

    def test_bin_averaged_sinc_squared(self):
        centers = np.array([0., 1e-3])
        narrow = bin_averaged_sinc_squared(centers, 1e-9, a=0.4e-3, wavelength=702e-9, z2=1.)
        self.assertAlmostEqual(narrow[0], 1., places=12)
        wide = bin_averaged_sinc_squared(centers, 1e-3, a=0.4e-3, wavelength=702e-9, z2=1.)
        self.assertLess(wide[0], 1.)

    def test_fit_recovers_width(self):
        x = np.linspace(-5e-3, 5e-3, 201)
        expected = 400 * bin_averaged_sinc_squared(x, x[1] - x[0], a=0.4e-3, wavelength=702e-9, z2=1.)
        counts = self.rng.poisson(expected)
        a, amplitude = fit_sinc_squared(x, counts, wavelength=702e-9, z2=1., a_guess=0.3e-3)
        self.assertAlmostEqual(a / 0.4e-3, 1., delta=0.03)
        self.assertAlmostEqual(amplitude / 400, 1., delta=0.05)


class TestHistogram(unittest.TestCase):

    def setUp(self):
        self.centers = np.array([-1., 0., 1.])
        self.histogram = CoincidenceHistogram(bin_centers=self.centers, coincidences=[1, 4, 0],
                                              singles_d1=[5, 5, 5], singles_d2=[2, 8, 3], trials=20)

    def test_validation(self):
        with self.assertRaises(ValueError):
            CoincidenceHistogram(bin_centers=self.centers, coincidences=[1, 2], singles_d1=[5, 5, 5],
                                 singles_d2=[5, 5, 5], trials=1)
        with self.assertRaises(ValueError):
            CoincidenceHistogram(bin_centers=self.centers, coincidences=[0, 0, 0], singles_d1=[5, -1, 5],
                                 singles_d2=[5, 5, 5], trials=1)
        with self.assertRaises(ValueError):
            CoincidenceHistogram(bin_centers=self.centers, coincidences=[0, 6, 0], singles_d1=[5, 5, 5],
                                 singles_d2=[5, 5, 5], trials=1)

    def test_totals_within_trials(self):
        with self.assertRaises(ValueError):
            CoincidenceHistogram(bin_centers=self.centers, coincidences=[3, 3, 3], singles_d1=[5, 5, 5],
                                 singles_d2=[3, 3, 3], trials=8)
        with self.assertRaises(ValueError):
            CoincidenceHistogram(bin_centers=self.centers, coincidences=[0, 0, 0], singles_d1=[9, 9, 9],
                                 singles_d2=[0, 0, 0], trials=8)
        # D1 clicks repeat in every bin, so only the per-bin count is bounded
        CoincidenceHistogram(bin_centers=self.centers, coincidences=[0, 0, 0], singles_d1=[8, 8, 8],
                             singles_d2=[0, 0, 0], trials=8)

    def test_counts_are_read_only(self):
        with self.assertRaises(ValueError):
            self.histogram.coincidences[0] = 3

    def test_merge(self):
        total = CoincidenceHistogram.empty(self.centers).merge(self.histogram).merge(self.histogram)
        self.assertEqual(40, total.trials)
        np.testing.assert_array_equal([2, 8, 0], total.coincidences)
        np.testing.assert_array_equal([4, 16, 6], total.singles_d2)
        other = CoincidenceHistogram.empty(np.array([0., 1., 2.]))
        with self.assertRaises(ValueError):
            self.histogram.merge(other)

    def test_image(self):
        np.testing.assert_allclose([0.25, 1., 0.], self.histogram.image)
        np.testing.assert_array_equal(np.zeros(3), CoincidenceHistogram.empty(self.centers).image)

    def test_to_frame(self):
        frame = self.histogram.to_frame()
        self.assertEqual(['bin_center', 'coincidences', 'singles_d1', 'singles_d2'], list(frame.columns))
        self.assertEqual(3, len(frame))
        self.assertEqual(8, frame['singles_d2'][1])
