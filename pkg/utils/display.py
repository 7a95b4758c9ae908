import io

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt


def buffer_image(figure):
    buf = io.BytesIO()
    figure.savefig(buf, format='png')
    buf.seek(0)
    plt.close('all')
    return buf


def gen_plot(x, curves: dict, figsize=None, title='', xlabel='', log_y=False):
    """Plot one or more named curves over x and save to a PNG buffer."""
    f = plt.figure(figsize=figsize)
    for label, y in curves.items():
        plt.plot(x, y, label=label)
    plt.title(title)
    plt.xlabel(xlabel)
    if log_y:
        plt.yscale('log')
    if len(curves) > 1:
        plt.legend()
    buf = buffer_image(f)
    return buf
