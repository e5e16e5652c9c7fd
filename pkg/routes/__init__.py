from routes import lipschitz, report, solve, sweep, verify


def register_routes(subparsers, parents=()):
    # Register one subcommand per experiment class
    for route in (verify, sweep, solve, lipschitz, report):
        route.register(subparsers, list(parents))
