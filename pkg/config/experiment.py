"""
Experiment files: INI sections of `key = value` lines.

Numbers are kept exact (int or Fraction, `inf` for an infinite exponent) until
a module config is built from them, so hypothesis checks never see rounding.
"""
import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from models.errors import ConfigError, MissingSectionError, PreconditionError, UnknownKeyError
from models.families import FamilySpec
from models.norms import default_exponents
from models.probes import EstimateKind, FlowWindow, ProbeConfig, ProbeGrid, violations
from models.solver import PicardConfig
from models.spectral import PERIODIC, Grid1D, SpectralField

KINDS = ("probe", "sweep", "solve", "lipschitz")
MODULE_SECTION = {"probe": "probe", "sweep": "probe", "solve": "solve", "lipschitz": "lipschitz"}

NUMBER, NUMBERS, INT, INTS, BOOL, TEXT = "number", "numbers", "int", "ints", "bool", "text"

_SOLVE_KEYS = {
    "delta": NUMBER, "r": NUMBER, "s": NUMBER, "b": NUMBER, "b_prime": NUMBER,
    "amplitude": NUMBER, "width": NUMBER, "max_iterations": INT, "tolerance": NUMBER,
    "n_times_per_unit": INT, "nonlinear": BOOL, "constant": NUMBER, "provenance": TEXT,
    "reference_dt": NUMBER, "snapshots": INT,
}

SCHEMA = {
    "experiment": {"kind": TEXT, "seed": INT, "output_dir": TEXT, "resolution_ladder": INTS, "workers": INT},
    "probe": {
        "estimate": TEXT, "r": NUMBER, "s": NUMBER, "b": NUMBER, "b_prime": NUMBER, "b_tilde": NUMBER,
        "beta": NUMBER, "sigma": NUMBER, "p": NUMBER, "q": NUMBER, "embed": NUMBERS,
        "count": INT, "bumps": INT, "band": NUMBER, "profile": TEXT,
        "dilations": NUMBERS, "deltas": NUMBERS, "check_resolution": BOOL,
    },
    "solve": _SOLVE_KEYS,
    "lipschitz": {**_SOLVE_KEYS, "epsilons": NUMBERS, "horizon": NUMBER},
    "grid": {"half_length": NUMBER, "n_modes": INT, "t_half": NUMBER, "n_times": INT},
}


def parse_number(text):
    text = text.strip()
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"{text!r} is not a number")
    return int(value) if value.denominator == 1 else value


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
        raise ValueError(f"{text!r} is not a boolean")
    return configparser.ConfigParser.BOOLEAN_STATES[lowered]


def _parse_value(kind, text):
    if kind == NUMBER:
        return parse_number(text)
    if kind == INT:
        value = parse_number(text)
        if not isinstance(value, int):
            raise ValueError(f"{text!r} is not an integer")
        return value
    if kind == NUMBERS:
        return [parse_number(item) for item in text.split(",") if item.strip()]
    if kind == INTS:
        return [_parse_value(INT, item) for item in text.split(",") if item.strip()]
    if kind == BOOL:
        return _parse_bool(text)
    return text.strip()


def _render(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(_render(item) for item in value)
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return str(value)


@dataclass
class ExperimentConfig:
    """A validated experiment: its kind, reproducibility settings and the exact parsed sections."""

    kind: str
    seed: int
    output_dir: str = None
    resolution_ladder: list = field(default_factory=list)
    workers: int = 1
    sections: dict = field(default_factory=dict)
    defaults: dict = field(default_factory=dict)

    @property
    def module(self):
        return self.sections[MODULE_SECTION[self.kind]]

    def override(self, seed=None, output_dir=None, resolution=None):
        """Apply command-line overrides; the sections are updated so the hash follows."""
        sections = {name: dict(values) for name, values in self.sections.items()}
        if seed is not None:
            sections["experiment"]["seed"] = seed
        if output_dir is not None:
            sections["experiment"]["output_dir"] = output_dir
        if resolution is not None:
            sections["experiment"]["resolution_ladder"] = [resolution]
            sections.setdefault("grid", {})["n_modes"] = resolution
        experiment = sections["experiment"]
        return replace(
            self,
            seed=experiment["seed"],
            output_dir=experiment.get("output_dir", self.output_dir),
            resolution_ladder=list(experiment.get("resolution_ladder", self.resolution_ladder)),
            sections=sections,
        )

    # builders for the module configs

    def _grid_values(self, base):
        values = dict(self.defaults.get(base, {}))
        values.update({key: float(value) if key in ("half_length", "t_half") else value
                       for key, value in self.sections.get("grid", {}).items()})
        return values

    def probe_grid(self, n_modes=None):
        values = self._grid_values("probe_grid")
        if n_modes is not None:
            values["n_modes"] = n_modes
        return ProbeGrid(**{key: values[key] for key in ("half_length", "n_modes", "t_half", "n_times") if key in values})

    def probe_config(self, n_modes=None):
        section = self.sections["probe"]
        kind = EstimateKind(section["estimate"])
        flow = self.defaults.get("flow_window", {})
        b_prime = section.get("b_prime")
        r = Fraction(section.get("r", 2))
        if b_prime is None and kind == EstimateKind.TRILINEAR_T2:
            b_prime = 1 / (2 * r) - Fraction(5, 8) - Fraction(1, 20)
        family = FamilySpec(
            count=section.get("count", 10),
            bumps=section.get("bumps", 2),
            band=float(section.get("band", Fraction(1, 2))),
            profile=section.get("profile", "gaussian"),
            seed=self.seed,
        )
        return ProbeConfig(
            kind=kind,
            r=r,
            s=section.get("s", 0),
            b=section.get("b", 0),
            b_prime=b_prime,
            b_tilde=section.get("b_tilde"),
            beta=section.get("beta"),
            sigma=section.get("sigma"),
            p=float(section["p"]) if "p" in section else None,
            q=float(section["q"]) if "q" in section else None,
            embed=tuple(section["embed"]) if "embed" in section else None,
            family=family,
            dilations=tuple(float(v) for v in section.get("dilations", [1])),
            deltas=tuple(float(v) for v in section.get("deltas", [])),
            grid=self.probe_grid(n_modes),
            flow=FlowWindow(**flow),
            check_resolution=section.get("check_resolution", False),
            workers=self.workers,
        )

    def solver_grid(self, n_modes=None):
        values = self._grid_values("solver_grid")
        return Grid1D(float(values["half_length"]), n_modes or values["n_modes"], PERIODIC)

    def picard_config(self):
        section = self.module
        picard = self.defaults.get("picard", {})
        r = Fraction(section.get("r", 2))
        b, b_prime = default_exponents(r) if "b" not in section and "b_prime" not in section else (
            section.get("b"), section.get("b_prime"))
        constant = section.get("constant")
        return PicardConfig(
            delta=float(section.get("delta", Fraction(1, 2))),
            r=r,
            s=section.get("s", Fraction(1, 4)),
            b=b,
            b_prime=b_prime,
            max_iterations=section.get("max_iterations", picard.get("max_iterations", 30)),
            tolerance=float(section.get("tolerance", picard.get("tolerance", 1e-10))),
            n_times_per_unit=section.get("n_times_per_unit", picard.get("n_times_per_unit", 1000)),
            nonlinear=section.get("nonlinear", True),
            constant=None if constant is None else float(constant),
            provenance=section.get("provenance", ""),
        )

    def initial_datum(self, n_modes=None):
        """u0(x) = amplitude * exp(-(x / width)^2) on the solver grid."""
        section = self.module
        grid = self.solver_grid(n_modes)
        amplitude = float(section.get("amplitude", Fraction(1, 10)))
        width = float(section.get("width", 1))
        return SpectralField.from_physical(grid, amplitude * np.exp(-(grid.x / width) ** 2), real_flag=True)


def _read_sections(text):
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as error:
        raise ConfigError(f"malformed experiment file: {error}")
    return {name: dict(parser[name]) for name in parser.sections()}


def _typed_sections(raw):
    sections, unknown, invalid = {}, [], []
    for name, entries in raw.items():
        if name not in SCHEMA:
            unknown.append(f"unknown section [{name}]")
            continue
        sections[name] = {}
        for key, text in entries.items():
            kind = SCHEMA[name].get(key)
            if kind is None:
                unknown.append(f"unknown key '{key}' in [{name}]")
                continue
            try:
                sections[name][key] = _parse_value(kind, text)
            except ValueError as error:
                invalid.append(f"[{name}] {key}: {error}")
    return sections, unknown, invalid


def _module_violations(config):
    found = []
    try:
        if config.kind in ("probe", "sweep"):
            section = config.sections["probe"]
            if "estimate" not in section:
                return ["[probe] estimate is required"]
            try:
                EstimateKind(section["estimate"])
            except ValueError:
                return [f"[probe] unknown estimate '{section['estimate']}'"]
            probe = config.probe_config()
            found += [f"{probe.kind.value}: {message}" for message in violations(probe)]
        else:
            found += config.picard_config().violations()
            if config.kind == "lipschitz":
                epsilons = config.module.get("epsilons", [])
                if not epsilons:
                    found.append("[lipschitz] epsilons must list at least one value")
                if any(eps == 0 for eps in epsilons):
                    found.append("[lipschitz] epsilon = 0 leaves the difference quotient undefined")
            config.solver_grid()
    except PreconditionError as error:
        found.append(str(error))
    except (KeyError, TypeError, ValueError, OverflowError) as error:
        found.append(f"incomplete [{MODULE_SECTION[config.kind]}] section: {error}")
    return found


def parse_config(text, defaults=None):
    """Parse and validate an experiment file; every violation is reported in one error."""
    raw = _read_sections(text)
    if not raw:
        raise MissingSectionError("no sections found: an experiment file needs an [experiment] section")
    sections, unknown, invalid = _typed_sections(raw)
    if unknown:
        raise UnknownKeyError(unknown + invalid)
    if "experiment" not in sections:
        raise MissingSectionError("missing [experiment] section")

    experiment = sections["experiment"]
    kind = experiment.get("kind")
    missing = []
    if kind not in KINDS:
        invalid.append(f"[experiment] kind must be one of {', '.join(KINDS)}, got {kind!r}")
    elif MODULE_SECTION[kind] not in sections:
        missing.append(f"missing [{MODULE_SECTION[kind]}] section for a {kind} experiment")
    if "seed" not in experiment:
        invalid.append("[experiment] seed is required")
    if missing:
        raise MissingSectionError(missing + invalid)
    if invalid:
        raise ConfigError(invalid)

    defaults = defaults or {}
    config = ExperimentConfig(
        kind=kind,
        seed=experiment["seed"],
        output_dir=experiment.get("output_dir", defaults.get("output_dir")),
        resolution_ladder=list(experiment.get("resolution_ladder", defaults.get("resolution_ladder", []))),
        workers=experiment.get("workers", defaults.get("workers", 1)),
        sections=sections,
        defaults=defaults,
    )
    found = _module_violations(config)
    if found:
        raise ConfigError(found)
    return config


def serialize_config(config):
    """Experiment file text whose parse gives back the same sections."""
    lines = []
    for name in sorted(config.sections):
        lines.append(f"[{name}]")
        for key in sorted(config.sections[name]):
            lines.append(f"{key} = {_render(config.sections[name][key])}")
        lines.append("")
    return "\n".join(lines)


def _canonical(value):
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {key: _canonical(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_canonical(item) for item in value]
    return value


def canonical_json(config):
    return json.dumps(_canonical(config.sections), sort_keys=True, separators=(",", ":"))


def config_hash(config):
    """SHA-256 of the canonical JSON of the parsed sections."""
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()
