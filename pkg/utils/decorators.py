import functools
import sys
import traceback
from time import perf_counter


def ignore_exception(f):
    """ Summaries and other side outputs must never abort a run: report and return None. """

    @functools.wraps(f)
    def apply_func(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except Exception:
            print(f'Caught exception in {f.__qualname__}:', file=sys.stderr)
            traceback.print_exc()
            return None

    return apply_func


def time_it(f):
    """ Returns (result, seconds); the duration is for the console only. """

    @functools.wraps(f)
    def apply_func(*args, **kwargs):
        t_start = perf_counter()
        result = f(*args, **kwargs)
        dur = round(perf_counter() - t_start, ndigits=2)
        return result, dur

    return apply_func
