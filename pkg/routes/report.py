import logging
import os

from models.db import RecordStore
from models.helper_functions import delete_old_runs
from models.report import emit_report
from routes.experiment import EXIT_OK, EXIT_PRECONDITION, exit_code_for

logger = logging.getLogger(__name__)


def register(subparsers, parents):
    parser = subparsers.add_parser('report', parents=parents, help='emit reports from a stored record file')
    parser.add_argument('records', help='records.jsonl of a run')
    parser.add_argument('--prune-hours', type=float, default=None,
                        help='first delete runs under --out older than this many hours')
    parser.set_defaults(func=report)


def report(args, defaults, text=None):
    """
    Re-emit the reports of every record stored in a record file
    """
    # Extract arguments
    out_dir = args.out or os.path.dirname(os.path.abspath(args.records))

    # Check for bad input
    if not os.path.isfile(args.records):
        logger.error("no record file at %s", args.records)
        return exit_code_for(FileNotFoundError(args.records))

    # Prune old runs
    if args.prune_hours is not None:
        delete_old_runs(args.out or defaults.get('output_dir', 'runs'), args.prune_hours)

    # Read the records and emit one report per record
    try:
        records = RecordStore(args.records).read()
        if not records:
            logger.error("%s holds no records", args.records)
            return EXIT_PRECONDITION
        for record in records:
            print(emit_report(record, args.format, out_dir))
    except Exception as error:
        logger.error("%s", error)
        return exit_code_for(error)

    return EXIT_OK
