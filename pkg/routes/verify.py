import logging

from models.probes import EstimateKind
from routes.experiment import EXIT_OK, EXIT_PRECONDITION, execute, exit_code_for, load_experiment

logger = logging.getLogger(__name__)

DEFAULT_TEXT = "[experiment]\nkind = probe\nseed = 0\n\n[probe]\n"


def register(subparsers, parents):
    parser = subparsers.add_parser('verify', parents=parents, help='probe one estimate on a random family')
    parser.add_argument('kind', choices=[kind.value for kind in EstimateKind])
    parser.add_argument('--set', dest='assignments', action='append', default=[], metavar='KEY=VALUE',
                        help='[probe] parameter, e.g. --set r=3/2 --set b=0.55')
    parser.set_defaults(func=verify)


def _assignments(pairs):
    values = {}
    for pair in pairs:
        key, sep, value = pair.partition('=')
        if not sep or not key.strip():
            raise ValueError(f"expected KEY=VALUE, got {pair!r}")
        values[key.strip()] = value.strip()
    return values


def verify(args, defaults, text=None):
    """
    Run the probe of one estimate kind and write its report
    """
    # Extract arguments
    try:
        values = _assignments(args.assignments)
    except ValueError as error:
        logger.error("%s", error)
        return EXIT_PRECONDITION
    values['estimate'] = args.kind

    # Check for bad input
    try:
        config = load_experiment(text or DEFAULT_TEXT, defaults, seed=args.seed,
                                 resolution=args.resolution, overrides={'probe': values})
    except Exception as error:
        logger.error("%s", error)
        return exit_code_for(error)

    # Run the probe and emit the report
    try:
        path = execute(config, args.format, args.out)
    except Exception as error:
        logger.error("%s", error)
        return exit_code_for(error)

    print(path)
    return EXIT_OK
