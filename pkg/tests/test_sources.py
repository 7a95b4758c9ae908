import unittest

import numpy as np

from physics.errors import ConfigInvalid
from simulation.sources import SourceModel, sample_pair, sample_pairs


class TestPairSource(unittest.TestCase):

    def setUp(self):
        self.src = SourceModel(pump_omega=5.37e15, sigma_q=1e5, seed=3, pump_waist=2e-3)

    def test_batch_conserves_momentum(self):
        batch = sample_pairs(self.src, self.src.rng(), 10_000)
        np.testing.assert_allclose(batch.signal_k + batch.idler_k, batch.pump_k, rtol=1e-15, atol=1e-8)
        self.assertEqual(10_000, len(batch))
        self.assertAlmostEqual((batch.omega_s + batch.omega_i) / batch.omega_p, 1.0, places=14)

    def test_signal_on_shell(self):
        batch = sample_pairs(self.src, self.src.rng(), 1000)
        k_s = self.src.omega_s / self.src.c
        np.testing.assert_allclose(np.linalg.norm(batch.signal_k, axis=1), k_s, rtol=1e-12)

    def test_transverse_anticorrelation(self):
        src = SourceModel(pump_omega=5.37e15, sigma_q=1e5, seed=3)
        batch = sample_pairs(src, src.rng(), 1000)
        np.testing.assert_array_equal(batch.y0, 0.)
        np.testing.assert_allclose(batch.signal_k[:, 0], -batch.idler_k[:, 0])

    def test_spread(self):
        src = SourceModel(pump_omega=5.37e15, sigma_q=1e5, seed=11)
        batch = sample_pairs(src, src.rng(), 100_000)
        self.assertAlmostEqual(np.std(batch.signal_k[:, 0]) / 1e5, 1.0, delta=0.02)

    def test_seeding(self):
        first = sample_pairs(self.src, self.src.rng(0), 100)
        again = sample_pairs(self.src, self.src.rng(0), 100)
        other = sample_pairs(self.src, self.src.rng(1), 100)
        np.testing.assert_array_equal(first.signal_k, again.signal_k)
        self.assertFalse(np.array_equal(first.signal_k, other.signal_k))

    def test_single_pair_view(self):
        signal, idler = sample_pair(self.src, self.src.rng())
        self.assertEqual(self.src.helicity, signal.helicity)
        self.assertEqual(-self.src.helicity, idler.helicity)
        self.assertAlmostEqual((signal.omega + idler.omega) / self.src.pump_omega, 1.0, places=14)

    def test_subset(self):
        batch = sample_pairs(self.src, self.src.rng(), 10)
        part = batch.subset(np.array([2, 5]))
        self.assertEqual(2, len(part))
        np.testing.assert_array_equal(part.idler_k[1], batch.idler_k[5])

    def test_needs_spread(self):
        src = SourceModel(pump_omega=5.37e15, sigma_q=None, seed=1)
        with self.assertRaises(ConfigInvalid):
            sample_pairs(src, src.rng(), 10)

    def test_validation(self):
        with self.assertRaises(ValueError):
            SourceModel(pump_omega=1., sigma_q=-1., seed=1)
        with self.assertRaises(ValueError):
            SourceModel(pump_omega=1., sigma_q=1., seed=1, signal_fraction=1.)
        with self.assertRaises(ValueError):
            SourceModel(pump_omega=0., sigma_q=1., seed=1)
