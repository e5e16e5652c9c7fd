import logging
import os
from time import time

logger = logging.getLogger(__name__)


# Run directory named after the experiment kind and config hash
def create_run_id(kind, config_hash):
    return f"{kind}-{config_hash[:10]}"


# Create the output directory of a run and the record file inside it
def prepare_output_dir(base, run_id):
    run_dir = os.path.join(base, run_id)
    os.makedirs(run_dir, exist_ok=True)
    if not os.access(run_dir, os.W_OK):
        raise PermissionError(f"output directory {run_dir} is not writable")
    return run_dir


def record_path(run_dir):
    return os.path.join(run_dir, 'records.jsonl')


# Delete run directories older than max_age_hours
def delete_old_runs(directory, max_age_hours=24.0):
    # Get the current time
    now = time()
    age_threshold = max_age_hours * 60 * 60
    deleted = []

    if not os.path.isdir(directory):
        return deleted

    # Loop through all run directories
    for name in sorted(os.listdir(directory)):
        run_dir = os.path.join(directory, name)
        records = record_path(run_dir)

        # Only directories holding a record file are runs
        if not os.path.isfile(records):
            continue

        # Check if the last write is older than the threshold
        if now - os.path.getmtime(records) > age_threshold:
            for filename in os.listdir(run_dir):
                os.remove(os.path.join(run_dir, filename))
            os.rmdir(run_dir)
            deleted.append(name)
            logger.info("Deleted %s because it was older than %g hours.", name, max_age_hours)
    return deleted
