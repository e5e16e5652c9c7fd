import argparse
import logging
import sys

from config import load_config
from routes import register_routes
from routes.experiment import EXIT_IO


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help='experiment file (INI sections)')
    common.add_argument('--out', default=None, help='output directory')
    common.add_argument('--seed', type=int, default=None)
    common.add_argument('--resolution', type=int, default=None, help='number of Fourier modes')
    common.add_argument('--format', choices=['csv', 'svg', 'table'], default='csv')
    common.add_argument('--verbose', action='store_true')

    parser = argparse.ArgumentParser(description='Fourier-Lebesgue laboratory for the modified KdV equation')
    subparsers = parser.add_subparsers(dest='command', required=True)
    register_routes(subparsers, [common])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)

    # Load lab defaults
    defaults = load_config()
    level = logging.DEBUG if args.verbose else getattr(logging, defaults.get('log_level', 'INFO'))
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    # Read the experiment file
    text = None
    if args.config is not None:
        try:
            with open(args.config, 'r') as f:
                text = f.read()
        except OSError as error:
            logging.getLogger(__name__).error("%s", error)
            return EXIT_IO

    return args.func(args, defaults, text)


# Run the lab when this script is executed directly
if __name__ == '__main__':
    sys.exit(main())
