import logging

from routes.experiment import EXIT_OK, EXIT_PRECONDITION, execute, exit_code_for, load_experiment

logger = logging.getLogger(__name__)


def register(subparsers, parents):
    parser = subparsers.add_parser('sweep', parents=parents, help='scaling sweep over dilations')
    parser.add_argument('--lambdas', default=None, help='comma separated dilations, e.g. 1,2,4,8')
    parser.set_defaults(func=sweep)


def sweep(args, defaults, text=None):
    """
    Recompute a probe's ratios on dilated data and report the per-dilation maxima
    """
    # Extract arguments
    overrides = {'experiment': {'kind': 'sweep'}}
    if args.lambdas:
        overrides['probe'] = {'dilations': args.lambdas}

    # Check for bad input
    if text is None:
        logger.error("sweep needs --config")
        return EXIT_PRECONDITION
    try:
        config = load_experiment(text, defaults, seed=args.seed, resolution=args.resolution, overrides=overrides)
    except Exception as error:
        logger.error("%s", error)
        return exit_code_for(error)

    # Run the sweep and emit the report
    try:
        path = execute(config, args.format, args.out)
    except Exception as error:
        logger.error("%s", error)
        return exit_code_for(error)

    print(path)
    return EXIT_OK
