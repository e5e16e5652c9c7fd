import configparser
import io
import logging

import numpy as np

from config import config_hash, parse_config, serialize_config
from models.db import RecordStore, RunRecord, make_row
from models.errors import ConfigError, NumericalError, PreconditionError, ResolutionError
from models.helper_functions import create_run_id, prepare_output_dir, record_path
from models.norms import fl_norm
from models.probes import run_probe, scaling_sweep
from models.report import emit_report
from models.solver import lipschitz_probe, persistence_ratio, picard_solve, reference_integrate
from models.spectral import to_physical

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_PRECONDITION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
RESOLUTION_LIMIT = 0.01
SNAPSHOTS = 8


def exit_code_for(error):
    """Translate a failure into the CLI exit code."""
    if isinstance(error, PreconditionError):
        return EXIT_PRECONDITION
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(error, OSError):
        return EXIT_IO
    raise error


def compose_text(text, overrides):
    """Experiment file text with `overrides` ({section: {key: text}}) written over it."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as error:
        raise ConfigError(f"malformed experiment file: {error}")
    for section, values in overrides.items():
        if not parser.has_section(section):
            parser.add_section(section)
        for key, value in values.items():
            parser.set(section, key, str(value))
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def load_experiment(text, defaults, seed=None, output_dir=None, resolution=None, overrides=None):
    if overrides:
        text = compose_text(text, overrides)
    config = parse_config(text, defaults)
    if seed is not None or output_dir is not None or resolution is not None:
        # re-parse so the overridden values are validated like file values
        config = parse_config(serialize_config(config.override(seed, output_dir, resolution)), defaults)
    return config


def _probe_summary(report):
    summary = {
        "max_ratio": report.max_ratio,
        "median_ratio": report.median_ratio,
        "spread": report.spread,
        "slope": report.slope,
        "slope_residual": report.slope_residual,
        "predicted_slope": report.predicted_slope,
        "regions": report.regions,
    }
    summary.update(report.diagnostics)
    return summary


def _add_probe_rows(record, report):
    config = report.config
    for row in report.rows:
        record.add_row(make_row(
            report.kind.value, config.r, config.s, config.b, config.b_prime,
            row.lam, row.sample_id, row.lhs, row.rhs, row.ratio, delta=row.delta,
        ))


def _run_probe_ladder(config):
    ladder = config.resolution_ladder or [None]
    reports = []
    for n_modes in ladder:
        reports.append(run_probe(config.probe_config(n_modes)))
        logger.info("resolution %s: max ratio %.6e", n_modes, reports[-1].max_ratio)
    change = None
    if len(reports) >= 2:
        coarse, fine = reports[-2].max_ratio, reports[-1].max_ratio
        change = abs(fine - coarse) / max(abs(fine), 1e-300)
        if change > RESOLUTION_LIMIT:
            raise ResolutionError(
                f"max ratio moved by {change:.2%} between {ladder[-2]} and {ladder[-1]} modes; refine further"
            )
    return reports[-1], change


def _probe(config, record):
    report, change = _run_probe_ladder(config)
    _add_probe_rows(record, report)
    summary = _probe_summary(report)
    summary["ladder_change"] = change
    record.add_summary(summary)


def _sweep(config, record):
    probe = config.probe_config(config.resolution_ladder[-1] if config.resolution_ladder else None)
    sweep = scaling_sweep(probe, probe.dilations)
    _add_probe_rows(record, sweep.report)
    summary = _probe_summary(sweep.report)
    summary.update({"per_lambda": sweep.per_lambda, "sweep_slope": sweep.slope})
    record.add_summary(summary)


def _l2_distance(u, v):
    difference = to_physical(u).coeffs - to_physical(v).coeffs
    return float(np.sqrt(u.grid.dx * np.sum(np.abs(difference) ** 2)))


def _solve(config, record):
    picard = config.picard_config()
    u0 = config.initial_datum()
    result = picard_solve(u0, picard)
    norm = (picard.r, picard.s)
    initial = fl_norm(u0, norm)
    window = list(result.window)
    picks = sorted(set(np.linspace(0, len(window) - 1, SNAPSHOTS + 1).round().astype(int).tolist()))
    for sample_id, index in enumerate(picks):
        j = window[index]
        lhs = fl_norm(result.extension.time_slice(j), norm)
        record.add_row(make_row(
            "SOLVE", picard.r, picard.s, picard.b, picard.b_prime, None, sample_id,
            lhs, initial, lhs / initial if initial else 0.0, time=float(result.extension.grid.times[j]),
        ))

    summary = {
        "converged": result.converged,
        "residual": result.residual,
        "distances": result.distances,
        "factors": result.factors,
        "max_factor": max(result.factors) if result.factors else 0.0,
        "persistence_ratio": persistence_ratio(result, picard.params),
        **result.diagnostics,
    }
    reference_dt = config.module.get("reference_dt")
    if reference_dt is not None:
        trajectory = reference_integrate(u0, picard.delta, float(reference_dt))
        summary["reference_difference"] = _l2_distance(result.final(), trajectory.final())
    record.add_summary(summary)


def _lipschitz(config, record):
    picard = config.picard_config()
    u0 = config.initial_datum()
    section = config.module
    horizon = section.get("horizon")
    rows = lipschitz_probe(
        u0, [float(eps) for eps in section["epsilons"]], picard, seed=config.seed,
        horizon=None if horizon is None else float(horizon), workers=config.workers,
    )
    for sample_id, row in enumerate(rows):
        record.add_row(make_row(
            "LIPSCHITZ", picard.r, picard.s, picard.b, picard.b_prime, None, sample_id,
            row.quotient, None if row.quotient is None else 1.0, row.quotient,
            epsilon=row.epsilon, status=row.status,
        ))
    quotients = [row.quotient for row in rows if row.quotient is not None]
    record.add_summary({
        "max_ratio": max(quotients) if quotients else None,
        "spread": max(quotients) / min(quotients) if quotients and min(quotients) > 0 else None,
        "diverged": sum(1 for row in rows if row.quotient is None),
    })


_RUNNERS = {"probe": _probe, "sweep": _sweep, "solve": _solve, "lipschitz": _lipschitz}


def record_kind(config):
    if config.kind in ("probe", "sweep"):
        return config.sections["probe"]["estimate"]
    return config.kind.upper()


def run_experiment(config, store=None):
    """Run a validated experiment into a RunRecord, streaming it to `store` when given."""
    record = RunRecord(record_kind(config), config_hash(config), serialize_config(config))
    runner = _RUNNERS[config.kind]
    if store is None:
        runner(config, record)
        return record
    with store.recording(record):
        runner(config, record)
    return record


def execute(config, fmt, out_dir=None):
    """Run the experiment into its output directory and emit the report; returns the report path."""
    base = out_dir or config.output_dir or "runs"
    run_dir = prepare_output_dir(base, create_run_id(config.kind, config_hash(config)))
    store = RecordStore(record_path(run_dir))
    record = run_experiment(config, store)
    return emit_report(record, fmt, run_dir)
