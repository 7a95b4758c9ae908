import argparse

from utils.config_manager import KINDS, FORMATS

VERSION = '0.1.0'


def basic_run_parser():
    parser = argparse.ArgumentParser(prog='qmirror',
                                     description='Quantum-mirror SPDC laws and coincidence Monte Carlo.')
    parser.add_argument('kind', nargs='?', choices=KINDS, help='experiment kind to run.')
    parser.add_argument('--config', dest='config', type=str, help='experiment YAML file.')
    parser.add_argument('--seed', dest='seed', type=int, default=None,
                        help='overrides the seed of the config.')
    parser.add_argument('--trials', dest='trials', type=int, default=None,
                        help='overrides monte_carlo.trials of the config.')
    parser.add_argument('--out', dest='out', type=str, default=None,
                        help='overrides the output directory of the config.')
    parser.add_argument('--format', dest='format', choices=FORMATS, default=None,
                        help='overrides the output format of the config.')
    parser.add_argument('--explain', dest='explain', choices=KINDS, default=None,
                        help='prints the laws an experiment kind exercises and exits.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {VERSION}')
    return parser


def overrides_from_args(args) -> dict:
    """ CLI values that replace config entries; unset flags are left out. """
    overrides = {'kind': args.kind, 'seed': args.seed, 'output_directory': args.out, 'output_format': args.format}
    if args.trials is not None:
        overrides['monte_carlo'] = {'trials': args.trials}
    return {k: v for k, v in overrides.items() if v is not None}
