import tempfile
import unittest
from pathlib import Path

import numpy as np

from utils.decorators import ignore_exception, time_it
from utils.display import gen_plot
from utils.logging_utils import SummaryManager


class TestSummaries(unittest.TestCase):

    def test_summary_files(self):
        with tempfile.TemporaryDirectory() as directory:
            summary = SummaryManager(log_dir=directory, kind='ghost-image')
            summary.display_derived({'coincidences': 10, 'closure_residual': 1e-16, 'note': 'text', 'ok': True})
            summary.display_counts(np.array([-1., 0., 1.]), np.array([0, 3, 1]), tag='histogram/coincidences')
            summary.display_counts(np.array([0.]), np.array([0]), tag='empty')
            summary.display_curves(np.linspace(0, 1, 5), {'intensity': np.ones(5)}, tag='pattern')
            summary.display_scan_point('focus/sharpness', 0.3, step=0)
            for writer in summary.writers.values():
                writer.flush()
            self.assertTrue(list(Path(directory).glob('events.out.tfevents*')))

    def test_scan_points_are_thinned(self):
        with tempfile.TemporaryDirectory() as directory:
            summary = SummaryManager(log_dir=directory, kind='ghost-image', max_plot_frequency=5)
            logged = [summary.display_scan_point('focus/sharpness', float(i), step=i) for i in range(10)]
            self.assertEqual([0, 5], [step for step in logged if step is not None])
            forced = summary.display_scan_point('focus/sharpness', 1., plot_all=True, step=3)
            self.assertEqual(3, forced)

    def test_scan_points_without_step_advance(self):
        with tempfile.TemporaryDirectory() as directory:
            summary = SummaryManager(log_dir=directory, kind='ghost-image', max_plot_frequency=3)
            logged = [summary.display_scan_point('focus/sharpness', 0.1) for _ in range(7)]
            self.assertEqual([0, 3, 6], [step for step in logged if step is not None])
            self.assertEqual(7, summary.global_step)

    def test_plot_buffer(self):
        buf = gen_plot([0, 1], {'a': [0, 1], 'b': [1, 0]}, title='t', log_y=False)
        self.assertEqual(b'\x89PNG', buf.getvalue()[:4])


class TestDecorators(unittest.TestCase):

    def test_ignore_exception(self):
        @ignore_exception
        def broken():
            raise RuntimeError('summary failed')

        self.assertIsNone(broken())

    def test_time_it(self):
        result, duration = time_it(lambda x: x * 2)(4)
        self.assertEqual(8, result)
        self.assertGreaterEqual(duration, 0.)
