import unittest

import numpy as np

from physics.errors import CollimatedOutput, DegenerateConjugate, DegenerateTriangle, NoExitAngle, RayBlocked
from physics.geometry import (DetectorPlane, Mask, OpticalLayout, QuantumMirror, Ray, RayBundle, ThinLens,
                              conjugate_triangle, locate_image, magnification, mirror_radius, paraxial_sqm_law,
                              relative_area_residual, snell_exit_angles, sqm_image_distance, thin_lens_image,
                              thin_lens_magnification, trace_bundle, trace_ray, verify_area_identity)


class TestConjugationLaws(unittest.TestCase):

    def test_thin_lens(self):
        self.assertAlmostEqual(thin_lens_image(0.15, 0.1), 0.3)
        self.assertAlmostEqual(thin_lens_magnification(0.15, 0.3), -2.0)
        # inside the focal length the image is virtual
        self.assertLess(thin_lens_image(0.05, 0.1), 0)
        with self.assertRaises(CollimatedOutput):
            thin_lens_image(0.1, 0.1)

    def test_planar_mirror_degenerate(self):
        image = sqm_image_distance(0.3, 1., 1., np.inf)
        self.assertAlmostEqual(image.distance, -0.3)
        self.assertTrue(image.virtual)
        self.assertAlmostEqual(magnification(0.3, image.distance, 1., 1.), 1.0)

    def test_spherical_mirror_nondegenerate(self):
        # w_s = 2 w_i, R = 1, Z_s = 2: (2/3)/2 + (1/3)/Z_i = 1
        image = sqm_image_distance(2.0, 2., 1., 1.0)
        self.assertAlmostEqual(image.distance, 0.5)
        self.assertFalse(image.virtual)
        self.assertAlmostEqual(magnification(2.0, 0.5, 2., 1.), -0.5)

    def test_radial_law_holds(self):
        for Z_s, R, w_s, w_i in ((0.7, 0.5, 1., 1.), (3.0, -2.0, 1.3, 0.7), (1.2, 0.8, 0.4, 1.6)):
            Z_i = sqm_image_distance(Z_s, w_s, w_i, R).distance
            self.assertAlmostEqual(w_s / Z_s + w_i / Z_i, (w_s + w_i) / R)

    def test_image_at_infinity(self):
        # degenerate: 1/Z_s = 2/R at Z_s = R / 2
        with self.assertRaises(DegenerateConjugate):
            sqm_image_distance(0.25, 1., 1., 0.5)

    def test_exit_angles(self):
        self.assertAlmostEqual(snell_exit_angles(1., 1., 0.2), 0.2)
        self.assertAlmostEqual(2 * np.sin(0.3), np.sin(snell_exit_angles(2., 1., 0.3)))
        with self.assertRaises(NoExitAngle):
            snell_exit_angles(3., 1., 0.5)

    def test_oblique_incidence_lengthens_focus(self):
        axial = sqm_image_distance(1.0, 1., 1., 0.5)
        oblique = sqm_image_distance(1.0, 1., 1., 0.5, beta_ps=0.2)
        self.assertAlmostEqual(oblique.cos_beta, np.cos(0.2))
        self.assertGreater(oblique.distance, axial.distance)

    def test_paraxial_form(self):
        lambda_p = 351e-9
        lambda_s = lambda_i = 702e-9
        R = mirror_radius(0.6, 0.1)
        self.assertAlmostEqual(R, 0.5)
        Z_i = sqm_image_distance(1.0, 1., 1., R).distance
        self.assertAlmostEqual(paraxial_sqm_law(1.0, Z_i, lambda_s, lambda_i, lambda_p, 0.6, 0.1), 0., places=9)
        with self.assertRaises(ValueError):
            mirror_radius(0.3, 0.3)


class TestAreaIdentity(unittest.TestCase):

    def test_identity_with_centre_on_image_line(self):
        P, A, C = (0., 0.), (1., 2.), (2., 0.)
        # C on the line P P'
        self.assertAlmostEqual(verify_area_identity(P, A, (4., 0.), C), 0.)

    def test_residual_off_line(self):
        residual = verify_area_identity((0., 0.), (1., 2.), (4., 1.), (2., 0.))
        self.assertNotAlmostEqual(residual, 0.)

    def test_collinear_points(self):
        self.assertEqual(0.0, verify_area_identity((0., 0.), (1., 0.), (2., 0.), (3., 0.)))

    def test_collapsed_triangle(self):
        with self.assertRaises(DegenerateTriangle):
            verify_area_identity((0., 0.), (1., 0.), (2., 0.), (1., 1.))

    def test_collapsed_side_triangle(self):
        # P, A and C collinear: PAC has no area although PAP' does
        with self.assertRaises(DegenerateTriangle):
            verify_area_identity((0., 0.), (1., 1.), (2., 0.), (2., 2.))
        with self.assertRaises(DegenerateTriangle):
            verify_area_identity((0., 0.), (1., 1.), (2., 0.), (3., -1.))

    def test_random_conjugate_constructions(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            R = rng.uniform(0.2, 2.0)
            Z_s = R * rng.uniform(1.2, 5.0)
            phi = rng.uniform(1e-3, 0.05)
            P, A, P_prime, C = conjugate_triangle(Z_s, 1., 1., R, phi=phi)
            self.assertLess(relative_area_residual(P, A, P_prime, C), 1e-9)
            scale = rng.choice([rng.uniform(0.5, 0.9), rng.uniform(1.1, 1.5)])
            P, A, P_prime, C = conjugate_triangle(Z_s, 1., 1., R, phi=phi, image_scale=scale)
            self.assertGreater(relative_area_residual(P, A, P_prime, C), 1e-3)

    def test_conjugate_triangle_degenerate(self):
        # equal frequencies: P, C and P' are aligned, the identity closes
        P, A, P_prime, C = conjugate_triangle(1.0, 1., 1., 0.5, phi=0.05)
        self.assertLess(relative_area_residual(P, A, P_prime, C), 1e-9)

    def test_conjugate_triangle_off_image(self):
        P, A, P_prime, C = conjugate_triangle(1.0, 1., 1., 0.5, phi=0.05, image_scale=1.5)
        self.assertGreater(relative_area_residual(P, A, P_prime, C), 1e-6)


class TestRayTracing(unittest.TestCase):

    def test_lens_images_point(self):
        layout = OpticalLayout((ThinLens(position=0.15, focal_length=0.1),))
        bundle = RayBundle.from_slopes(z=0., y=np.full(5, 1e-3), slope=np.linspace(-0.01, 0.01, 5), omega=1.)
        trace_bundle(bundle, layout)
        bundle.propagate_to(0.45)
        np.testing.assert_allclose(bundle.y, -2e-3, atol=1e-15)

    def test_mask_blocks(self):
        mask = Mask(position=0.1, pitch=1e-3, transmission=(1., 0., 0.5))
        bundle = RayBundle.from_slopes(z=0., y=np.array([-1e-3, 0., 1e-3]), slope=0., omega=1.)
        trace_bundle(bundle, OpticalLayout((mask,)))
        np.testing.assert_array_equal([True, False, True], bundle.alive)
        np.testing.assert_allclose([1., 0., 0.5], bundle.weight)
        with self.assertRaises(RayBlocked):
            trace_ray(Ray(origin=(0., 0.), direction=(1., 0.), omega=1.), OpticalLayout((mask,)))

    def test_slits(self):
        double = Mask.slits(position=0., a=0.2e-3, d_sep=0.6e-3)
        self.assertEqual((1., 0., 0., 1.), double.transmission)
        self.assertEqual((1.,), Mask.slits(position=0., a=0.2e-3).transmission)
        with self.assertRaises(ValueError):
            Mask.slits(position=0., a=0.2e-3, d_sep=0.5e-3)

    def test_planar_mirror_continues_unfolded_ray(self):
        # degenerate planar mirror: the converted ray keeps the unfolded slope
        mirror = QuantumMirror(position=0.2, pump_omega=2.)
        ray = trace_ray(Ray(origin=(0., 1e-3), direction=(1., 0.01), omega=1.), OpticalLayout((mirror,)), c=1.)
        self.assertAlmostEqual(ray.slope, 0.01)
        self.assertAlmostEqual(ray.origin[1], 1e-3 + 0.2 * 0.01)

    def test_locate_image_matches_law(self):
        for Z_s, R, w_s, w_i in ((2.0, 1.0, 2., 1.), (1.0, 0.5, 1., 1.)):
            expected = sqm_image_distance(Z_s, w_s, w_i, R).distance
            found = locate_image(Z_s, 1e-3, R, w_s, w_i, max_angle=1e-4)
            self.assertLess(abs(found.distance - expected) / expected, 1e-3)
            self.assertLess(abs(found.magnification - magnification(Z_s, expected, w_s, w_i)), 1e-3)

    def test_locate_image_random_mirrors(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            w_s, w_i = rng.uniform(0.5, 2.0, 2)
            R = rng.uniform(0.3, 2.0)
            # keeps the image real and finite
            Z_s = R * w_s / (w_s + w_i) * rng.uniform(1.5, 6.0)
            expected = sqm_image_distance(Z_s, w_s, w_i, R).distance
            M = magnification(Z_s, expected, w_s, w_i)
            found = locate_image(Z_s, 1e-3, R, w_s, w_i, max_angle=1e-4)
            self.assertLess(abs(found.distance - expected) / expected, 5e-3)
            self.assertLess(abs(found.magnification - M) / abs(M), 1e-2)

    def test_degenerate_mirror_law(self):
        rng = np.random.default_rng(6)
        for _ in range(500):
            R = rng.uniform(0.3, 2.0)
            Z_s = R * rng.uniform(0.75, 3.0)
            Z_i = sqm_image_distance(Z_s, 1., 1., R).distance
            self.assertLess(abs(1 / Z_s + 1 / Z_i - 2 / R) * R, 1e-9)

    def test_detector_bins(self):
        detector = DetectorPlane(position=1., pitch=0.1, bins=5)
        np.testing.assert_allclose(detector.bin_centers, [-0.2, -0.1, 0., 0.1, 0.2], atol=1e-15)
        np.testing.assert_array_equal([0, 2, 4, -1, -1], detector.bin_index([-0.24, 0.01, 0.24, 0.26, -0.3]))

    def test_layout_arms(self):
        lens = ThinLens(position=0.15, focal_length=0.1)
        mask = Mask(position=0., pitch=1e-3, transmission=(1.,))
        mirror = QuantumMirror(position=0.25, pump_omega=2.)
        detector = DetectorPlane(position=0.45, pitch=1e-5)
        layout = OpticalLayout((mask, lens, mirror, detector))
        folded = layout.folded_arm()
        self.assertIsInstance(folded.elements[0], ThinLens)
        self.assertAlmostEqual(folded.elements[0].position, 0.1)
        self.assertAlmostEqual(folded.elements[1].position, 0.25)
        self.assertAlmostEqual(layout.idler_arm().elements[0].position, 0.2)
        with self.assertRaises(ValueError):
            OpticalLayout((lens, mask))
