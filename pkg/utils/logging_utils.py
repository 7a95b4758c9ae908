import functools
from pathlib import Path

import numpy as np
import tensorflow as tf

from utils.display import gen_plot
from utils.decorators import ignore_exception


def control_frequency(f):
    """ Runs a summary method only on every plot_frequency-th step. Calls without `step` count global_step up. """
    @functools.wraps(f)
    def apply_func(self, *args, **kwargs):
        if kwargs.get('step') is None:
            kwargs['step'] = self.global_step
            self.global_step += 1
        if kwargs['step'] % self.plot_frequency == 0 or kwargs.get('plot_all', False):
            return f(self, *args, **kwargs)
        return None

    return apply_func


class SummaryManager:
    """ Writes tensorboard logs for an experiment run.

        :arg log_dir: base directory where the logs of a run are created
        :arg kind: experiment kind, used as the top-level tag
        :arg max_plot_frequency: every how many scan points to plot
    """

    def __init__(self,
                 log_dir: str,
                 kind: str,
                 max_plot_frequency=1,
                 default_writer='log_dir'):
        self.log_dir = Path(log_dir)
        self.kind = kind
        self.plot_frequency = max_plot_frequency
        self.default_writer = default_writer
        self.global_step = 0
        self.writers = {}
        self.add_writer(tag=default_writer, path=self.log_dir, default=True)

    def add_writer(self, path, tag=None, default=False):
        """ Adds a writer to self.writers if the writer does not exist already.
            To avoid spamming writers on disk.

            :returns the writer on path with tag tag or path
        """
        if not tag:
            tag = path
        if tag not in self.writers.keys():
            self.writers[tag] = tf.summary.create_file_writer(str(path))
        if default:
            self.default_writer = tag
        return self.writers[tag]

    def add_scalar(self, tag, scalar_value, step=None):
        if step is None:
            step = self.global_step
        with self.writers[self.default_writer].as_default():
            tf.summary.scalar(name=tag, data=scalar_value, step=step)

    def add_image(self, tag, image, step=None):
        if step is None:
            step = self.global_step
        with self.writers[self.default_writer].as_default():
            tf.summary.image(name=tag, data=image, step=step, max_outputs=4)

    def add_histogram(self, tag, values, buckets=None, step=None):
        if step is None:
            step = self.global_step
        with self.writers[self.default_writer].as_default():
            tf.summary.histogram(name=tag, data=values, step=step, buckets=buckets)

    @ignore_exception
    def display_derived(self, derived: dict, step=None):
        scalars = {k: float(v) for k, v in derived.items()
                   if isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool)}
        for name, value in scalars.items():
            self.add_scalar(tag=f'{self.kind}/{name}', scalar_value=value, step=step)

    @ignore_exception
    def display_counts(self, bin_centers, counts, tag='', step=None):
        """ Binned counts as a tensorboard histogram (one sample per count at its bin centre). """
        values = np.repeat(np.asarray(bin_centers, dtype=float), np.asarray(counts, dtype=np.int64))
        if len(values) == 0:
            return
        self.add_histogram(tag=f'{self.kind}/{tag}', values=values, buckets=len(bin_centers), step=step)

    @ignore_exception
    def display_curves(self, x, curves: dict, tag='', xlabel='', step=None):
        buf = gen_plot(x, curves, title=tag, xlabel=xlabel)
        image = tf.image.decode_png(buf.getvalue(), channels=4)
        image = tf.expand_dims(image, 0)
        self.add_image(tag=f'{self.kind}/{tag}', image=image, step=step)

    @control_frequency
    @ignore_exception
    def display_scan_point(self, tag, scalar_value, plot_all=False, step=None):
        self.add_scalar(tag=f'{self.kind}/{tag}', scalar_value=scalar_value, step=step)
        return step
