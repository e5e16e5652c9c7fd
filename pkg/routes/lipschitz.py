import logging

from routes.experiment import EXIT_OK, EXIT_PRECONDITION, execute, exit_code_for, load_experiment

logger = logging.getLogger(__name__)


def register(subparsers, parents):
    parser = subparsers.add_parser('lipschitz', parents=parents, help='difference quotients of the data-to-solution map')
    parser.add_argument('--epsilons', default=None, help='comma separated perturbation sizes')
    parser.set_defaults(func=lipschitz)


def lipschitz(args, defaults, text=None):
    """
    Tabulate sup_t ||u(t) - v(t)|| / ||u0 - v0|| for perturbations of decreasing size
    """
    # Extract arguments
    overrides = {'experiment': {'kind': 'lipschitz'}}
    if args.epsilons:
        overrides['lipschitz'] = {'epsilons': args.epsilons}

    # Check for bad input
    if text is None:
        logger.error("lipschitz needs --config")
        return EXIT_PRECONDITION
    try:
        config = load_experiment(text, defaults, seed=args.seed, resolution=args.resolution, overrides=overrides)
    except Exception as error:
        logger.error("%s", error)
        return exit_code_for(error)

    # Run the paired solves and emit the report
    try:
        path = execute(config, args.format, args.out)
    except Exception as error:
        logger.error("%s", error)
        return exit_code_for(error)

    print(path)
    return EXIT_OK
