import sys

from experiments.runner import explain, run_experiment
from physics.errors import QMirrorError
from utils.config_manager import load_config
from utils.decorators import time_it
from utils.scripts_utils import basic_run_parser, overrides_from_args


def main(argv=None) -> int:
    parser = basic_run_parser()
    args = parser.parse_args(argv)
    if args.explain:
        print(explain(args.explain))
        return 0
    if args.kind is None or args.config is None:
        parser.error('an experiment kind and --config are required')
    try:
        cfg = load_config(args.config, overrides=overrides_from_args(args))
        cfg.print_config()
        report, duration = time_it(run_experiment)(cfg)
    except QMirrorError as e:
        print(f'ERROR: {e}', file=sys.stderr)
        return 2
    print(f'\nRESULTS {cfg.kind}')
    for name, value in {**report.derived, **report.statistics}.items():
        print(f'- {name} : {value}')
    for name, ok in report.checks.items():
        print(f"- check {name} : {'pass' if ok else 'FAIL'}")
    print(f'\nwrote {len(report.manifest)} files to {cfg.output_directory} in {duration}s')
    return 0 if report.passed else 1


if __name__ == '__main__':
    sys.exit(main())
