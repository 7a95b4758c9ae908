import importlib
import json
import re
import tempfile
import unittest
from pathlib import Path

import qmirror
from experiments.runner import EXPLANATIONS, explain, run_experiment
from physics.errors import ValidationError
from utils.config_manager import KINDS, load_config

TESTS = Path(__file__).parent
CONFIGS = TESTS.parent / 'config'


class TestRunner(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.out = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def run_config(self, path, write=False, **overrides):
        cfg = load_config(path, overrides={'output_directory': str(self.out), **overrides})
        return run_experiment(cfg, write=write)

    def test_phasematch(self):
        report = self.run_config(CONFIGS / 'phasematch.yaml', write=True)
        self.assertTrue(report.passed, report.checks)
        self.assertEqual(41, len(report.tables['phasematch']))
        self.assertEqual('summary.json', Path(report.manifest[-1]).name)
        summary = json.loads((self.out / 'summary.json').read_text())
        self.assertEqual(['phasematch.csv'], summary['files'])
        self.assertTrue(summary['passed'])

    def test_twm(self):
        sweep = {'g_abs': [0., 400., 3], 'delta_k': [0., 800., 2], 'L': [0., 5e-3, 2]}
        report = self.run_config(CONFIGS / 'twm.yaml', sweep=sweep)
        self.assertTrue(report.passed, report.checks)
        self.assertEqual(12, len(report.tables['twm']))

    def test_mirror(self):
        report = self.run_config(CONFIGS / 'mirror.yaml')
        self.assertTrue(report.passed, report.checks)
        self.assertIn('area_identity', report.checks)
        self.assertAlmostEqual(report.derived['radius'], 0.5)

    def test_diffract(self):
        report = self.run_config(CONFIGS / 'diffract.yaml')
        self.assertTrue(report.passed, report.checks)
        self.assertAlmostEqual(report.derived['visibility'], 0.8, delta=0.05)
        self.assertEqual(11, len(report.tables['visibility']))

    def test_ghost_image(self):
        report = self.run_config(TESTS / 'test_config.yaml')
        for name in ('singles_d1_flat', 'singles_flat', 'closure', 'unfolding', 'coincidence_structure',
                     'peak_separation'):
            self.assertTrue(report.checks[name], name)
        self.assertTrue(report.passed, report.checks)
        self.assertGreater(report.statistics['singles_d2_flatness_p'], 0.01)
        self.assertAlmostEqual(report.derived['magnification'], -2.)
        self.assertEqual(201, len(report.tables['histogram']))

    def test_ghost_diffract(self):
        report = self.run_config(CONFIGS / 'ghost_diffract.yaml')
        for name in ('singles_d1_flat', 'singles_flat', 'closure', 'fitted_width', 'pattern_deviation'):
            self.assertTrue(report.checks[name], name)
        self.assertTrue(report.passed, report.checks)
        self.assertAlmostEqual(report.derived['fitted_a'] / 0.4e-3, 1., delta=0.02)
        self.assertLess(report.statistics['max_poisson_deviation'], 4)
        self.assertIn('pattern', report.tables)

    def test_direct_qm(self):
        report = self.run_config(CONFIGS / 'direct_qm.yaml')
        self.assertTrue(report.passed, report.checks)
        self.assertAlmostEqual(report.derived['predicted_Z_i'], 0.5)
        self.assertLess(report.derived['rays_gated'], report.derived['rays_ungated'])

    def test_selected_checks(self):
        report = self.run_config(CONFIGS / 'twm.yaml', checks=['ode_agreement'], sweep={'g_abs': [100., 100., 1]})
        self.assertEqual(['ode_agreement'], list(report.checks))
        with self.assertRaises(ValidationError) as context:
            self.run_config(CONFIGS / 'twm.yaml', checks=['ode'], sweep={'g_abs': [100., 100., 1]})
        self.assertEqual('ode_agreement', context.exception.suggestion)
        self.assertIn('[twm,', str(context.exception))

    def test_explain(self):
        for kind in KINDS:
            self.assertTrue(explain(kind).startswith(f'{kind}:'))
            self.assertIn('see ', explain(kind))

    def test_explanations_point_at_code(self):
        packages = {'kinematics': 'physics', 'wavemix': 'physics', 'geometry': 'physics', 'diffraction': 'physics',
                    'coincidence': 'simulation'}
        for kind, entries in EXPLANATIONS.items():
            for _, reference in entries:
                for name in re.findall(r'(\w+)\.(\w+)', reference):
                    module = importlib.import_module(f'{packages[name[0]]}.{name[0]}')
                    self.assertTrue(callable(getattr(module, name[1])), f'{kind}: {reference}')


class TestCommandLine(unittest.TestCase):

    def test_exit_codes(self):
        self.assertEqual(0, qmirror.main(['--explain', 'mirror']))
        with tempfile.TemporaryDirectory() as directory:
            self.assertEqual(0, qmirror.main(['mirror', '--config', str(CONFIGS / 'mirror.yaml'), '--out', directory]))
            self.assertTrue((Path(directory) / 'summary.json').exists())
            self.assertEqual(2, qmirror.main(['twm', '--config', str(CONFIGS / 'mirror.yaml'), '--out', directory]))
            self.assertEqual(2, qmirror.main(['twm', '--config', str(Path(directory) / 'missing.yaml')]))
            # too few oracle sources: the Fraunhofer check fails
            coarse = Path(directory) / 'coarse.yaml'
            coarse.write_text('kind: diffract\nsource: {pump_wavelength: 351.0e-9}\n'
                              'slit: {a: 0.4e-3, z2: 1.0, scan: [-5.0e-3, 5.0e-3, 201], n_sources: 3}\n')
            self.assertEqual(1, qmirror.main(['diffract', '--config', str(coarse), '--out', directory]))
