from fractions import Fraction

import numpy as np
import pytest
import sympy

from conftest import gaussian_datum
from models.errors import DivergenceError, InstabilityError, ParameterError, PreconditionError, RealityError
from models.norms import NormParams, cutoff_norm, fl_norm
from models.solver import (
    IntegratingFactorRK4, PicardConfig, PicardIteration, conserved_quantities, kink_coefficients, kink_profile,
    kink_residual, lipschitz_probe, persistence_ratio, picard_solve, reference_integrate, smallness_delta,
    trajectory_rows,
)
from models.spectral import (
    MIXED, PERIODIC, Grid1D, MultiplierSpec, SpaceTimeField, SpectralField, apply_multiplier, to_physical,
)


def test_zero_datum_is_a_fixed_point(solver_grid):
    result = picard_solve(SpectralField.zeros(solver_grid), PicardConfig(delta=0.25, n_times_per_unit=200))
    assert result.converged
    assert result.distances == [0.0]
    assert np.all(result.final().coeffs == 0)


def test_linear_iteration_is_the_free_flow(solver_grid):
    u0 = gaussian_datum(solver_grid, 0.5)
    config = PicardConfig(delta=0.25, nonlinear=False, n_times_per_unit=200)
    result = picard_solve(u0, config)
    assert result.converged
    assert result.residual < 1e-10
    expected = apply_multiplier(u0, MultiplierSpec.airy(0.25))
    assert np.allclose(result.final().coeffs, expected.coeffs, atol=1e-12)
    grid = result.extension.grid
    ratio = persistence_ratio(result, config.params)
    assert ratio == pytest.approx(1.0 / cutoff_norm(config.cutoff, grid, config.b, config.r), rel=1e-6)


def test_window_covers_zero_to_delta(solver_grid):
    result = picard_solve(gaussian_datum(solver_grid, 0.1), PicardConfig(delta=0.25, n_times_per_unit=200))
    assert result.times[0] == pytest.approx(0.0, abs=1e-12)
    assert result.times[-1] == pytest.approx(0.25)
    assert result.diagnostics["iterations"] == len(result.distances)


@pytest.mark.slow
def test_picard_agrees_with_the_reference_integrator(solver_grid):
    u0 = gaussian_datum(solver_grid, 0.1)
    result = picard_solve(u0, PicardConfig(delta=0.5))
    assert result.converged
    assert result.residual < 1e-9
    assert all(factor <= 0.5 for factor in result.factors)
    reference = reference_integrate(u0, 0.5, 1e-3)
    assert fl_norm(result.final() - reference.final(), (2, 0)) < 1e-6


@pytest.mark.slow
def test_contraction_factor_under_the_smallness_relation(solver_grid):
    rng = np.random.default_rng(17)
    constant = 2.0
    params = NormParams(2, Fraction(1, 4), Fraction(11, 20))
    for _ in range(10):
        width, centre = rng.uniform(1.0, 2.0), rng.uniform(-3.0, 3.0)
        profile = np.exp(-((solver_grid.x - centre) / width) ** 2)
        unit = SpectralField.from_physical(solver_grid, profile, real_flag=True)
        scale = rng.uniform(0.05, 0.09) / fl_norm(unit, (2, Fraction(1, 4)))
        u0 = SpectralField.from_physical(solver_grid, scale * profile, real_flag=True)
        delta = min(0.5, smallness_delta(fl_norm(u0, (2, Fraction(1, 4))), constant, params, Fraction(-2, 5)))
        config = PicardConfig(delta=delta, constant=constant, provenance="unit constant, safety 2",
                              n_times_per_unit=200)
        result = picard_solve(u0, config)
        assert result.converged
        assert result.factors
        assert max(result.factors) <= 0.5


def test_large_data_diverges(solver_grid):
    config = PicardConfig(delta=1.0, n_times_per_unit=100)
    with pytest.raises(DivergenceError, match="smaller delta"):
        picard_solve(gaussian_datum(solver_grid, 50.0), config)


@pytest.mark.parametrize("kwargs, message", [
    ({"delta": 1.5}, "delta"),
    ({"delta": 0.5, "r": Fraction(6, 5)}, "2 ≥ r > 4/3"),
    ({"delta": 0.5, "b": Fraction(1, 2)}, "1/r"),
    ({"delta": 0.5, "b_prime": Fraction(-1, 2)}, "1 - b"),
])
def test_preconditions(solver_grid, kwargs, message):
    with pytest.raises(PreconditionError, match=message):
        picard_solve(gaussian_datum(solver_grid, 0.1), PicardConfig(**kwargs))


def test_smallness_condition(solver_grid):
    config = PicardConfig(delta=0.5, constant=10.0, provenance="rough bound")
    with pytest.raises(PreconditionError, match="rough bound"):
        picard_solve(gaussian_datum(solver_grid, 1.0), config)


def test_smallness_delta():
    params = NormParams(2, Fraction(1, 4), Fraction(11, 20))
    assert smallness_delta(0.0, 1.0, params, Fraction(-2, 5)) == 1.0
    assert smallness_delta(1.0, 1.0, params, Fraction(-2, 5)) == pytest.approx((1 / 16) ** 20, rel=1e-9, abs=0)
    with pytest.raises(ParameterError):
        smallness_delta(1.0, 1.0, params, Fraction(-1, 2))


def test_complex_datum_is_rejected(solver_grid):
    u0 = SpectralField(solver_grid, np.exp(-(solver_grid.xi - 1) ** 2))
    with pytest.raises(RealityError):
        picard_solve(u0, PicardConfig(delta=0.25, n_times_per_unit=200))


def test_linear_reference_is_exact(solver_grid):
    u0 = gaussian_datum(solver_grid, 1.0, 2.0)
    trajectory = reference_integrate(u0, 0.5, 0.01, nonlinear=False)
    expected = apply_multiplier(u0, MultiplierSpec.airy(0.5))
    assert np.allclose(trajectory.final().coeffs, expected.coeffs, atol=1e-10)


def test_reference_needs_a_periodic_grid(wide_grid):
    with pytest.raises(ParameterError):
        reference_integrate(gaussian_datum(wide_grid), 0.1, 0.01)


def test_reference_rejects_unstable_steps(solver_grid):
    with pytest.raises(InstabilityError):
        reference_integrate(gaussian_datum(solver_grid, 3.0), 1.0, 0.1)


def test_fourth_order_in_time():
    # xi_max = 4 keeps dt * xi^3 small on every populated mode, so the ladder sits in the asymptotic regime
    grid = Grid1D(8 * np.pi, 64, PERIODIC)
    u0 = gaussian_datum(grid, 0.8, 4.0)
    exact = reference_integrate(u0, 1.0, 0.000625).final()
    errors = [fl_norm(reference_integrate(u0, 1.0, dt).final() - exact, (2, 0)) for dt in (0.01, 0.005, 0.0025)]
    assert errors[-1] > 1e-13
    for coarse, fine in zip(errors, errors[1:]):
        assert 10 <= coarse / fine <= 22


def test_invariants_are_conserved():
    grid = Grid1D(30.0, 256, PERIODIC)
    trajectory = reference_integrate(gaussian_datum(grid, 0.5), 1.0, 1e-3, snapshots=4)
    mass, l2, hamiltonian = conserved_quantities(trajectory.states[0])
    for state in trajectory.states[1:]:
        drift = conserved_quantities(state)
        assert drift[0] == pytest.approx(mass, rel=1e-10)
        assert drift[1] == pytest.approx(l2, rel=1e-8)
        assert drift[2] == pytest.approx(hamiltonian, rel=1e-6)


def test_conserved_quantities_of_a_constant(solver_grid):
    c = 0.3
    u = SpectralField.from_physical(solver_grid, np.full(solver_grid.n_modes, c), real_flag=True)
    mass, l2, hamiltonian = conserved_quantities(u)
    length = 2 * solver_grid.half_length
    assert mass == pytest.approx(length * c)
    assert l2 == pytest.approx(length * c ** 2)
    assert hamiltonian == pytest.approx(length * c ** 4 / 4)
    with pytest.raises(RealityError):
        conserved_quantities(SpectralField(solver_grid, np.ones(solver_grid.n_modes), layout="physical") * 1j)


def test_kink_solves_the_equation():
    x = np.linspace(-6.0, 6.0, 241)
    for b in (0.5, 0.7, 1.3):
        assert np.max(np.abs(kink_residual(b, x, 0.3))) < 1e-10
    assert kink_profile(0.5, 0.0, 0.0) == 0.0


def test_kink_coefficients():
    b = sympy.symbols("b", positive=True)
    coefficients = kink_coefficients()
    assert sympy.simplify(coefficients["a_squared"] - 2 * b ** 2) == 0
    assert sympy.simplify(coefficients["velocity"] + 2 * b ** 2) == 0


def test_lipschitz_needs_nonzero_epsilon(solver_grid):
    with pytest.raises(PreconditionError):
        lipschitz_probe(gaussian_datum(solver_grid, 0.1), [0.0], PicardConfig(delta=0.25))


def test_linear_lipschitz_quotient_is_one(solver_grid):
    config = PicardConfig(delta=0.25, nonlinear=False, n_times_per_unit=200)
    rows = lipschitz_probe(gaussian_datum(solver_grid, 0.1), [1e-2, 1e-4], config, seed=2)
    for row in rows:
        assert row.status == "ok"
        assert row.quotient == pytest.approx(1.0, rel=1e-10)


@pytest.mark.slow
def test_nonlinear_lipschitz_quotient_is_stable(solver_grid):
    config = PicardConfig(delta=0.25, n_times_per_unit=400)
    rows = lipschitz_probe(gaussian_datum(solver_grid, 0.1), [1e-1, 1e-2, 1e-3, 1e-4], config, seed=1)
    quotients = [row.quotient for row in rows]
    assert max(quotients) < 2 * min(quotients)


def test_trajectory_rows(solver_grid):
    trajectory = reference_integrate(gaussian_datum(solver_grid, 0.2), 0.1, 0.01, snapshots=2)
    rows = trajectory_rows(trajectory)
    assert [row["sample_id"] for row in rows] == [0, 1, 2]
    assert [row["time"] for row in rows] == pytest.approx([0.0, 0.05, 0.1])
    for row in rows:
        assert row["kind"] == "TRAJECTORY"
        assert row["ratio"] == pytest.approx(1.0, rel=1e-8)


def cubic_flux(grid, amplitude, width):
    """d_x(u^3) = 3 u^2 u_x for u = amplitude * exp(-(x / width)^2)."""
    u = amplitude * np.exp(-(grid.x / width) ** 2)
    return 3 * u ** 2 * (-2 * grid.x / width ** 2) * u


def test_picard_nonlinearity_matches_the_cubic_flux(solver_grid):
    u0 = gaussian_datum(solver_grid, 0.5, 2.0)
    iteration = PicardIteration(u0, PicardConfig(delta=0.25, n_times_per_unit=200))
    grid = iteration.grid
    constant = SpaceTimeField(grid, np.repeat(u0.coeffs[:, None], grid.n_times, axis=1), MIXED)
    values = to_physical(iteration.nonlinearity(constant)).coeffs
    expected = cubic_flux(solver_grid, 0.5, 2.0)
    assert np.allclose(values, expected[:, None], atol=1e-10)


def test_reference_right_hand_side_matches_the_cubic_flux(solver_grid):
    u0 = gaussian_datum(solver_grid, 0.5, 2.0)
    rhs = IntegratingFactorRK4(solver_grid, 0.01).rhs(np.array(u0.coeffs))
    values = to_physical(SpectralField(solver_grid, rhs)).coeffs
    assert np.allclose(values, cubic_flux(solver_grid, 0.5, 2.0), atol=1e-10)
