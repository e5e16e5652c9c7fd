import logging

from routes.experiment import EXIT_OK, EXIT_PRECONDITION, execute, exit_code_for, load_experiment

logger = logging.getLogger(__name__)


def register(subparsers, parents):
    parser = subparsers.add_parser('solve', parents=parents, help='Picard solve on [0, delta]')
    parser.set_defaults(func=solve)


def solve(args, defaults, text=None):
    """
    Solve the cut-off integral equation by Picard iteration and report the snapshots
    """
    # Check for bad input
    if text is None:
        logger.error("solve needs --config")
        return EXIT_PRECONDITION
    try:
        config = load_experiment(text, defaults, seed=args.seed, resolution=args.resolution,
                                 overrides={'experiment': {'kind': 'solve'}})
    except Exception as error:
        logger.error("%s", error)
        return exit_code_for(error)

    # Run the solver and emit the report
    try:
        path = execute(config, args.format, args.out)
    except Exception as error:
        logger.error("%s", error)
        return exit_code_for(error)

    print(path)
    return EXIT_OK
