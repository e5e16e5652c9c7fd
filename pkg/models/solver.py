"""
Picard iteration for u_t + u_xxx = (u^3)_x on the cut-off integral equation,
with an independent integrating-factor RK4 integrator as a cross-check.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from multiprocessing import Pool

import numpy as np
import sympy

from .errors import (
    DivergenceError, InstabilityError, ParameterError, PreconditionError, RealityError, ResolutionError,
    ResolutionWarning,
)
from .families import Cutoff, FamilySpec, make_family
from .norms import NormParams, as_fraction, fl_norm, scale_exponent, xrsb_norm
from .spectral import (
    FREQUENCY, PERIODIC, PHYSICAL, SpaceTimeField, SpaceTimeGrid, SpectralField, airy_flow,
    duhamel_integral, reflect, to_frequency, to_mixed, to_physical,
)

logger = logging.getLogger(__name__)

ALPHA = 3
DIVERGENCE_STEPS = 3
BLOW_UP_FACTOR = 1e3
STABILITY_LIMIT = 2.8


@dataclass(frozen=True)
class PicardConfig:
    delta: float
    r: Fraction = Fraction(2)
    s: Fraction = Fraction(1, 4)
    b: Fraction = Fraction(11, 20)
    b_prime: Fraction = Fraction(-2, 5)
    cutoff: Cutoff = Cutoff()
    max_iterations: int = 30
    tolerance: float = 1e-10
    n_times_per_unit: int = 1000
    nonlinear: bool = True
    constant: float = None
    provenance: str = ""
    alias_tolerance: float = 1e-8

    def __post_init__(self):
        for name in ("r", "s", "b", "b_prime"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))

    @property
    def params(self):
        return NormParams(self.r, self.s, self.b)

    def violations(self):
        found = []
        r, s, b, b_prime = self.r, self.s, self.b, self.b_prime
        if not 0 < self.delta <= 1:
            found.append(f"delta = {self.delta} must lie in (0, 1]")
        if not Fraction(4, 3) < r <= 2:
            found.append(f"r = {r} must lie in (4/3, 2] (2 ≥ r > 4/3)")
        elif not s >= scale_exponent(r):
            found.append(f"s = {s} must be at least s(r) = {scale_exponent(r)}")
        if not b > 1 / r:
            found.append(f"b = {b} must exceed 1/r = {1 / r}")
        if not b - 1 < b_prime <= 0:
            found.append(f"b' = {b_prime} must lie in (b - 1, 0]")
        if not 1 - b + b_prime > 0:
            found.append(f"1 - b + b' = {1 - b + b_prime} must be positive")
        if self.max_iterations < 1:
            found.append("max_iterations must be at least 1")
        return found


@dataclass
class SolveResult:
    extension: SpaceTimeField
    delta: float
    distances: list = field(default_factory=list)
    factors: list = field(default_factory=list)
    residual: float = 0.0
    converged: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def window(self):
        """Indices of the time nodes in [0, delta]."""
        grid = self.extension.grid
        return range(grid.index_of(0.0), grid.index_of(self.delta) + 1)

    @property
    def times(self):
        return self.extension.grid.times[list(self.window)]

    def at(self, t):
        return self.extension.time_slice(self.extension.grid.index_of(t))

    def final(self):
        return self.at(self.delta)


def _dealias_mask(grid):
    return np.abs(grid.modes) < grid.n_modes / 3.0


def smallness_delta(u0_norm, constant, params, b_prime, alpha=ALPHA):
    """Largest delta <= 1 with delta^(1 - b + b') <= 1 / (4 c R^(alpha - 1)), R = 2 c ||u0||."""
    exponent = float(1 - params.b + as_fraction(b_prime))
    if exponent <= 0:
        raise ParameterError(f"1 - b + b' = {exponent} must be positive")
    radius = 2.0 * constant * u0_norm
    if radius == 0:
        return 1.0
    bound = 1.0 / (4.0 * constant * radius ** (alpha - 1))
    return min(1.0, bound ** (1.0 / exponent))


class PicardIteration:
    """u_{n+1} = psi U(t) u0 + psi_delta U *_R d_x(u_n^3) on the window [-2 delta, 2 delta)."""

    def __init__(self, u0, config):
        self.logger = logging.getLogger(__class__.__name__)
        found = config.violations()
        if found:
            raise PreconditionError("; ".join(found))
        if u0.layout != FREQUENCY:
            u0 = to_frequency(u0)
        _require_real(u0)
        self.u0 = u0
        self.config = config
        self.grid = self._time_grid(u0.grid, config)
        self.mask = _dealias_mask(u0.grid)
        self._check_smallness()

    @staticmethod
    def _time_grid(space, config):
        n_times = max(16, int(math.ceil(4 * config.delta * config.n_times_per_unit)))
        n_times += -n_times % 4
        return SpaceTimeGrid.centered(space, 2.0 * config.delta, n_times)

    def _check_smallness(self):
        config = self.config
        if config.constant is None:
            return
        norm = fl_norm(self.u0, (config.r, config.s))
        allowed = smallness_delta(norm, config.constant, config.params, config.b_prime)
        if config.delta > allowed * (1 + 1e-12):
            raise PreconditionError(
                f"delta = {config.delta} violates delta^(1-b+b') <= 1/(4cR^2) with c = {config.constant} "
                f"({config.provenance or 'unrecorded'}); the largest admissible delta is {allowed:.4g}"
            )

    def nonlinearity(self, u):
        """d_x(u^3), cubed in physical space with 2/3-rule dealiasing before and after."""
        space = self.grid.space
        filtered = u.with_coeffs(u.coeffs * self.mask[:, None])
        values = to_physical(filtered).coeffs.real
        cubed = to_mixed(SpaceTimeField(self.grid, values ** 3, PHYSICAL)).coeffs
        return u.with_coeffs(1j * space.xi[:, None] * cubed * self.mask[:, None])

    def aliasing_tail(self, u):
        magnitude = np.abs(u.coeffs)
        peak = float(np.max(magnitude))
        if peak == 0:
            return 0.0
        return float(np.max(magnitude[~self.mask])) / peak

    def apply(self, u, linear, psi_delta):
        """Lambda applied to the extension u."""
        if not self.config.nonlinear:
            return linear
        retarded = duhamel_integral(self.nonlinearity(u))
        return linear + retarded.with_coeffs(retarded.coeffs * psi_delta[None, :])

    def run(self):
        config, grid = self.config, self.grid
        params = config.params
        free = airy_flow(self.u0, grid)
        linear = free.with_coeffs(free.coeffs * config.cutoff(grid.times)[None, :])
        psi_delta = config.cutoff.dilated(config.delta)(grid.times)

        result = SolveResult(linear, config.delta)
        current, rising = linear, 0
        for iteration in range(1, config.max_iterations + 1):
            tail = self.aliasing_tail(current)
            if tail > config.alias_tolerance:
                raise ResolutionError(
                    f"aliasing check failed: {tail:.2e} of the peak sits in the dealiased band; refine the grid"
                )
            following = self.apply(current, linear, psi_delta)
            distance = xrsb_norm(following - current, params)
            if not np.isfinite(distance):
                raise DivergenceError(f"iterate overflowed at step {iteration} with delta = {config.delta}; try a smaller delta")
            if result.distances:
                previous = result.distances[-1]
                factor = distance / previous if previous > 0 else 0.0
                result.factors.append(factor)
                rising = rising + 1 if factor >= 1 else 0
            result.distances.append(distance)
            current = following
            self.logger.debug("iteration %d: distance %.3e", iteration, distance)
            if distance < config.tolerance:
                result.converged = True
                break
            if rising >= DIVERGENCE_STEPS:
                raise DivergenceError(
                    f"no contraction for {DIVERGENCE_STEPS} consecutive steps at delta = {config.delta}; try a smaller delta"
                )

        result.extension = current
        result.residual = xrsb_norm(current - self.apply(current, linear, psi_delta), params)
        result.diagnostics = {
            "iterations": len(result.distances),
            "extension_norm": xrsb_norm(current, params),
            "n_times": grid.n_times,
            "dt": grid.dt,
            "constant": config.constant,
            "provenance": config.provenance,
        }
        if not result.converged:
            message = f"Picard iteration stopped after {config.max_iterations} steps at distance {result.distances[-1]:.3e}"
            self.logger.warning(message)
            warnings.warn(message, ResolutionWarning, stacklevel=3)
        self.logger.info("picard solve: %d iterations, residual %.3e", len(result.distances), result.residual)
        return result


def picard_solve(u0, config):
    return PicardIteration(u0, config).run()


def _require_real(u):
    scale = max(float(np.max(np.abs(u.coeffs))), 1e-300)
    residue = float(np.max(np.abs(u.coeffs - np.conj(reflect(u.coeffs)))))
    if residue > 1e-10 * scale:
        raise RealityError(f"initial datum is not real (Hermitian residue {residue:.2e})")


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def final(self):
        return self.states[-1]


class IntegratingFactorRK4:
    """
    Fourth-order integrating-factor Runge-Kutta for v_t = i xi^3 v + i xi (u^3)^.
    The linear part is integrated exactly.
    """

    def __init__(self, grid, dt, nonlinear=True):
        self.logger = logging.getLogger(__class__.__name__)
        if grid.representation != PERIODIC:
            raise ParameterError("the reference integrator needs a periodic-fft grid")
        self.grid = grid
        self.dt = dt
        self.nonlinear = nonlinear
        self.half_step = np.exp(0.5j * dt * grid.xi ** 3)
        self.mask = _dealias_mask(grid)

    def rhs(self, v):
        if not self.nonlinear:
            return np.zeros_like(v)
        values = to_physical(SpectralField(self.grid, v * self.mask)).coeffs.real
        cubed = to_frequency(SpectralField(self.grid, values ** 3, layout=PHYSICAL)).coeffs
        return 1j * self.grid.xi * cubed * self.mask

    def step(self, v):
        E, dt = self.half_step, self.dt
        E2 = E * E
        a = dt * self.rhs(v)
        b = dt * self.rhs(E * (v + a / 2))
        c = dt * self.rhs(E * v + b / 2)
        d = dt * self.rhs(E2 * v + E * c)
        return E2 * v + (E2 * a + 2 * E * (b + c) + d) / 6

    def check_stability(self, u_max):
        number = self.dt * self.grid.xi_max * 3.0 * u_max ** 2
        if number >= STABILITY_LIMIT:
            raise InstabilityError(
                f"dt = {self.dt} too large: dt * xi_max * 3 max|u|^2 = {number:.3f} >= {STABILITY_LIMIT}"
            )


def reference_integrate(u0, t_end, dt, snapshots=1, nonlinear=True):
    """Integrate from 0 to t_end; the trajectory holds u(0) and `snapshots` evenly spaced later states."""
    if u0.layout != FREQUENCY:
        u0 = to_frequency(u0)
    _require_real(u0)
    if t_end <= 0 or dt <= 0:
        raise ParameterError(f"t_end and dt must be positive, got {t_end}, {dt}")
    steps = max(1, int(round(t_end / dt)))
    snapshots = max(1, min(snapshots, steps))
    stepper = IntegratingFactorRK4(u0.grid, t_end / steps, nonlinear)
    initial_max = float(np.max(np.abs(to_physical(u0).coeffs)))
    stepper.check_stability(initial_max)

    record_at = {int(round(k * steps / snapshots)) for k in range(1, snapshots + 1)}
    trajectory = Trajectory([0.0], [u0])
    v = np.array(u0.coeffs)
    for n in range(1, steps + 1):
        v = stepper.step(v)
        if n in record_at or n == steps:
            state = SpectralField(u0.grid, v)
            current_max = float(np.max(np.abs(to_physical(state).coeffs)))
            if not np.isfinite(current_max) or current_max > BLOW_UP_FACTOR * max(initial_max, 1e-300):
                raise InstabilityError(f"L-infinity norm grew from {initial_max:.3e} to {current_max:.3e} by t = {n * stepper.dt:.4g}")
            stepper.check_stability(current_max)
            trajectory.times.append(n * stepper.dt)
            trajectory.states.append(SpectralField(u0.grid, 0.5 * (v + np.conj(reflect(v))), real_flag=True))
    stepper.logger.info("reference integration: %d steps of %.3e", steps, stepper.dt)
    trajectory.diagnostics = {"steps": steps, "dt": stepper.dt}
    return trajectory


def conserved_quantities(u):
    """(mass, L^2, Hamiltonian) = (int u, int u^2, int u_x^2/2 + u^4/4) by periodic quadrature."""
    frequency = u if u.layout == FREQUENCY else to_frequency(u)
    values = to_physical(SpectralField(frequency.grid, frequency.coeffs)).coeffs
    scale = max(float(np.max(np.abs(values))), 1.0)
    if float(np.max(np.abs(values.imag))) > 1e-10 * scale:
        raise RealityError("conserved quantities need a real field")
    derivative = to_physical(SpectralField(frequency.grid, 1j * frequency.grid.xi * frequency.coeffs)).coeffs.real
    values = values.real
    dx = frequency.grid.dx
    mass = dx * float(np.sum(values))
    l2 = dx * float(np.sum(values ** 2))
    hamiltonian = dx * float(np.sum(derivative ** 2 / 2 + values ** 4 / 4))
    return mass, l2, hamiltonian


@lru_cache(maxsize=None)
def _kink_symbols():
    x, t, a, c = sympy.symbols("x t a c", real=True)
    b = sympy.symbols("b", positive=True)
    u = a * sympy.tanh(b * (x + c * t))
    residual = sympy.diff(u, t) + sympy.diff(u, x, 3) - sympy.diff(u ** 3, x)
    return (x, t, a, b, c), residual


def kink_coefficients():
    """
    Amplitude and speed for which a tanh(b (x + c t)) solves the equation,
    found by matching powers of tanh: a^2 = 2 b^2 and c = 2 b^2 (velocity -2 b^2).
    """
    (x, t, a, b, c), residual = _kink_symbols()
    y = sympy.symbols("y")
    polynomial = sympy.expand(residual.subs(sympy.tanh(b * (x + c * t)), y))
    coefficients = sympy.Poly(polynomial, y).coeffs()
    solutions = sympy.solve(coefficients, [a, c], dict=True)
    solution = next(s for s in solutions if s.get(a, 0) != 0 and (s[a] / b).is_positive)
    return {"a_squared": sympy.simplify(solution[a] ** 2), "velocity": sympy.simplify(-solution[c])}


@lru_cache(maxsize=None)
def _kink_residual_function():
    (x, t, a, b, c), residual = _kink_symbols()
    profile = residual.subs({a: sympy.sqrt(2) * b, c: 2 * b ** 2})
    return sympy.lambdify((b, x, t), profile, "numpy")


def kink_profile(b, x, t):
    return np.sqrt(2.0) * b * np.tanh(b * (np.asarray(x) + 2 * b ** 2 * t))


def kink_residual(b, x, t):
    """Pointwise u_t + u_xxx - (u^3)_x of sqrt(2) b tanh(b (x + 2 b^2 t)), from analytic derivatives."""
    values = _kink_residual_function()(b, np.asarray(x, dtype=float), t)
    return np.broadcast_to(np.asarray(values, dtype=float), np.shape(x))


def persistence_ratio(result, params):
    """sup_{0 <= t <= delta} ||u(t)||_{H^r_s} over the extension's X^r_{s,b} norm."""
    extension_norm = xrsb_norm(result.extension, params)
    sup = max(fl_norm(result.extension.time_slice(j), (params.r, params.s)) for j in result.window)
    return sup / extension_norm if extension_norm > 0 else 0.0


@dataclass
class LipschitzRow:
    epsilon: float
    quotient: float = None
    status: str = "ok"


def _direction(grid, seed):
    spec = FamilySpec(count=1, bumps=2, band=0.25, seed=seed)
    member = make_family(grid, spec)[0]
    return member.realize(grid, spec.band)


def _solve_job(arguments):
    u0, config = arguments
    try:
        return picard_solve(u0, config)
    except DivergenceError as error:
        return error


def lipschitz_probe(u0, epsilons, config, seed=0, horizon=None, workers=1):
    """
    sup_{0 <= t <= horizon} ||u(t) - v(t)||_{H^r_s} / ||u0 - v0||_{H^r_s} for v0 = u0 + eps w,
    with w a fixed random band-limited direction of unit norm.
    """
    if any(eps == 0 for eps in epsilons):
        raise PreconditionError("epsilon = 0 leaves the difference quotient undefined")
    horizon = config.delta if horizon is None else horizon
    if not 0 < horizon <= config.delta:
        raise ParameterError(f"horizon {horizon} must lie in (0, delta]")
    norm = (config.r, config.s)
    direction = _direction(u0.grid, seed)
    direction = direction * (1.0 / fl_norm(direction, norm))
    data = [u0] + [u0 + direction * eps for eps in epsilons]
    jobs = [(datum, config) for datum in data]
    if workers > 1:
        with Pool(workers) as pool:
            results = pool.map(_solve_job, jobs)
    else:
        results = [_solve_job(job) for job in jobs]
    base = results[0]
    if isinstance(base, Exception):
        raise base

    rows = []
    for eps, datum, solved in zip(epsilons, data[1:], results[1:]):
        if isinstance(solved, Exception):
            rows.append(LipschitzRow(eps, None, f"diverged: {solved}"))
            continue
        grid = base.extension.grid
        last = grid.index_of(0.0) + int(round(horizon / grid.dt))
        sup = max(
            fl_norm(base.extension.time_slice(j) - solved.extension.time_slice(j), norm)
            for j in range(grid.index_of(0.0), last + 1)
        )
        rows.append(LipschitzRow(eps, sup / fl_norm(u0 - datum, norm)))
    return rows


def trajectory_rows(trajectory, label="TRAJECTORY"):
    """Snapshots as record rows: lhs = ||u(t)||_{L^2}, rhs = ||u(0)||_{L^2}, plus the invariants."""
    rows = []
    initial = fl_norm(trajectory.states[0], (2, 0))
    for index, (time, state) in enumerate(zip(trajectory.times, trajectory.states)):
        mass, l2, hamiltonian = conserved_quantities(state)
        lhs = fl_norm(state, (2, 0))
        rows.append({
            "kind": label, "r": 2, "s": 0, "b": None, "b_prime": None, "lambda": None,
            "sample_id": index, "lhs": lhs, "rhs": initial, "ratio": lhs / initial if initial else 0.0,
            "time": time, "mass": mass, "l2": l2, "hamiltonian": hamiltonian,
        })
    return rows
