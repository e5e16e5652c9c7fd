import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from models.errors import PreconditionError
from models.families import FamilySpec, make_family
from models.probes import (
    OUTLIER_FACTOR, EstimateKind, FlowWindow, ProbeConfig, ProbeGrid, classify_region, classify_regions, flow_sides,
    run_probe, scaling_sweep, trilinear_regions, violations,
)
from models.spectral import (
    PHYSICAL, Grid1D, SpaceTimeField, SpaceTimeGrid, SpectralField, airy_flow, bracket, to_mixed, to_physical,
)


@pytest.mark.parametrize("triple, region", [
    ((1.0, 1.0, 1.0), "A"),
    ((10.0, 1.0, 1.0), "C"),
    ((10.0, 8.0, 1.0), "B"),
    ((0.5, 0.2, 0.9), "A"),
    ((-12.0, 3.0, 0.5), "B"),
])
def test_classify_region(triple, region):
    assert classify_region(*triple) == region


def test_regions_ignore_order_and_sign(rng):
    xi = rng.normal(scale=5.0, size=(3, 500))
    codes = classify_regions(*xi)
    assert set(np.unique(codes)) <= {0, 1, 2}
    assert np.array_equal(codes, classify_regions(-xi[2], xi[0], -xi[1]))


def test_region_parts_add_up_to_the_product():
    space = Grid1D(4 * np.pi, 32)
    grid = SpaceTimeGrid.centered(space, 0.5, 8)
    u = airy_flow(SpectralField(space, np.exp(-4 * space.xi ** 2)), grid)
    parts = trilinear_regions(u, u, u)
    total = sum(part.coeffs for part in parts.values())
    cube = to_physical(u).coeffs ** 3
    expected = to_mixed(SpaceTimeField(grid, cube, PHYSICAL)).coeffs
    assert np.allclose(total, expected, atol=1e-8)


def test_linf_l1_is_never_exceeded():
    config = ProbeConfig(EstimateKind.LINF_L1, family=FamilySpec(count=3, seed=1))
    report = run_probe(config)
    assert len(report.rows) == 3
    assert report.max_ratio <= 1.0 + 1e-9
    assert report.max_ratio > 0


def test_homogeneous_estimate_is_an_equality():
    config = ProbeConfig(EstimateKind.HOMOG_5, r=2, s=Fraction(1, 4), b=Fraction(11, 20), family=FamilySpec(count=2))
    report = run_probe(config)
    for ratio in report.ratios:
        assert ratio == pytest.approx(1.0, abs=1e-6)


def test_bilinear_smoothing_constant():
    report = run_probe(ProbeConfig(EstimateKind.BILINEAR_L3, family=FamilySpec(count=5, seed=9)))
    assert report.max_ratio <= math.sqrt(2.0 / 3.0) * (1 + 1e-12)
    assert report.diagnostics["degenerate_points"] > 0


def test_probe_is_deterministic():
    config = ProbeConfig(EstimateKind.BILINEAR_L3, family=FamilySpec(count=3, seed=4))
    assert run_probe(config).ratios == run_probe(config).ratios


def test_trilinear_rejects_r_below_the_range():
    config = ProbeConfig(EstimateKind.TRILINEAR_T2, r=Fraction(6, 5), s=Fraction(1, 2), b=Fraction(9, 10),
                         b_prime=Fraction(-1, 2))
    with pytest.raises(PreconditionError, match="2 ≥ r > 4/3"):
        run_probe(config)


@pytest.mark.parametrize("kwargs, broken", [
    ({"kind": EstimateKind.COR3_GENERAL, "p": math.inf, "q": 2}, 0),
    ({"kind": EstimateKind.COR3_GENERAL, "p": 2, "q": 2}, 2),
    ({"kind": EstimateKind.LEMMA4, "q": 4}, 1),
    ({"kind": EstimateKind.LEMMA4, "q": 6}, 0),
    ({"kind": EstimateKind.EMBED_52, "r": 2, "b": Fraction(1, 2)}, 1),
    ({"kind": EstimateKind.COR_K10, "r": 2}, 1),
    ({"kind": EstimateKind.L8_XSB, "b": Fraction(11, 20)}, 0),
])
def test_violations(kwargs, broken):
    assert len(violations(ProbeConfig(**kwargs))) == broken


def test_scaling_sweep_reports_every_dilation():
    config = ProbeConfig(EstimateKind.BILINEAR_L3, family=FamilySpec(count=3, seed=6))
    summary = scaling_sweep(config, (1.0, 1.5))
    assert [entry["lambda"] for entry in summary.per_lambda] == [1.0, 1.5]
    for entry in summary.per_lambda:
        assert entry["min"] <= entry["median"] <= entry["max"]
    # the smoothing estimate is scale invariant
    assert summary.spread == pytest.approx(1.0, rel=1e-2)


@pytest.mark.slow
@pytest.mark.parametrize("r, b, b_prime", [
    (Fraction(2), Fraction(11, 20), Fraction(-2, 5)),
    (Fraction(3, 2), Fraction(7, 10), Fraction(-1, 4)),
])
def test_lemma2_decay_in_delta(r, b, b_prime):
    config = ProbeConfig(
        EstimateKind.LEMMA2_DELTA, r=r, s=Fraction(1, 4), b=b, b_prime=b_prime,
        family=FamilySpec(count=2, seed=3), deltas=tuple(2.0 ** -k for k in range(6)),
        grid=ProbeGrid(20.0, 128, 4.0, 2048),
    )
    report = run_probe(config)
    assert report.predicted_slope == pytest.approx(float(1 + b_prime - b))
    assert report.slope >= report.predicted_slope - 0.1
    assert set(report.diagnostics["delta_max_ratio"]) == set(config.deltas)


SMALL_TRILINEAR_GRID = ProbeGrid(10.0, 80, 4.0, 32)

VALID_CONFIGS = {
    EstimateKind.L8_STRICHARTZ: {},
    EstimateKind.LEMMA4: {"q": 6},
    EstimateKind.FS_AIRY: {"r": Fraction(3, 2)},
    EstimateKind.COR3_GENERAL: {"p": 6, "q": 4},
    EstimateKind.XNORM_30: {"p": math.inf, "q": 2, "b": Fraction(3, 5)},
    EstimateKind.XNORM_31: {"p": math.inf, "q": 2, "b": Fraction(3, 5)},
    EstimateKind.BILINEAR_L3: {},
    EstimateKind.COR_K1: {"s": Fraction(1, 4), "b": Fraction(3, 5), "b_tilde": Fraction(2, 5)},
    EstimateKind.COR_K2: {"s": Fraction(1, 4), "b": Fraction(3, 5), "b_tilde": Fraction(2, 5)},
    EstimateKind.COR_K10: {"sigma": Fraction(1, 4), "beta": Fraction(3, 5), "b_prime": Fraction(-2, 5)},
    EstimateKind.LEMMA2_DELTA: {
        "s": Fraction(1, 4), "b": Fraction(11, 20), "b_prime": Fraction(-2, 5), "deltas": (1.0, 0.5),
    },
    EstimateKind.HOMOG_5: {"s": Fraction(1, 4), "b": Fraction(11, 20)},
    EstimateKind.EMBED_4: {"b": Fraction(3, 10), "embed": (2, Fraction(1, 4), Fraction(1, 2))},
    EstimateKind.EMBED_52: {"b": Fraction(3, 5)},
    EstimateKind.TRILINEAR_T2: {
        "s": Fraction(1, 4), "b": Fraction(3, 5), "b_prime": Fraction(-2, 5), "grid": SMALL_TRILINEAR_GRID,
    },
    EstimateKind.LINF_L1: {},
    EstimateKind.L4_XSB: {"b": Fraction(2, 5)},
    EstimateKind.L8_XSB: {"b": Fraction(3, 5)},
}


def valid_config(kind, family=None, **overrides):
    kwargs = dict(VALID_CONFIGS[kind])
    family = family or FamilySpec(count=2, seed=11)
    if kind == EstimateKind.TRILINEAR_T2:
        family = replace(family, width_range=(0.125, 0.125))
    kwargs.update(overrides)
    return ProbeConfig(kind, family=family, **kwargs)


def sup_in_time_constant(grid, r, b):
    """(2 pi)^(-1/2) ||<tau>^(-b)||_{l^r(dtau)}: the price of a sup in t against X^r_{0,b}."""
    taus = grid.space_time(1.0).taus
    dtau = grid.space_time(1.0).dtau
    return float(np.sum(dtau * bracket(taus) ** (-float(b) * r)) ** (1.0 / r) / math.sqrt(2 * math.pi))


def test_every_kind_has_a_valid_configuration():
    assert set(VALID_CONFIGS) == set(EstimateKind)
    for kind in EstimateKind:
        assert violations(valid_config(kind)) == []


@pytest.mark.parametrize("kind", list(EstimateKind), ids=lambda kind: kind.value)
def test_every_kind_returns_finite_ratios(kind):
    config = valid_config(kind)
    report = run_probe(config)
    per_sample = max(1, len(config.deltas))
    assert len(report.rows) == config.family.count * per_sample
    ratios = np.array(report.ratios)
    assert np.all(np.isfinite(ratios))
    assert np.all(ratios > 0)
    assert report.median_ratio <= report.max_ratio


def test_l2_strichartz_endpoint_is_plancherel():
    report = run_probe(valid_config(EstimateKind.COR3_GENERAL, p=math.inf, q=2))
    for ratio in report.ratios:
        assert ratio == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("kind", [EstimateKind.XNORM_30, EstimateKind.XNORM_31, EstimateKind.EMBED_52])
def test_sup_in_time_estimates_respect_their_constant(kind):
    config = valid_config(kind, family=FamilySpec(count=4, seed=2))
    cap = sup_in_time_constant(config.grid, 2, Fraction(3, 5))
    report = run_probe(config)
    assert report.max_ratio <= cap * (1 + 1e-9)


def test_embedding_at_equal_r_is_a_contraction():
    report = run_probe(valid_config(EstimateKind.EMBED_4, family=FamilySpec(count=4, seed=2)))
    assert report.max_ratio <= 1.0 + 1e-12


def test_trilinear_regions_bound_the_whole():
    report = run_probe(valid_config(EstimateKind.TRILINEAR_T2, family=FamilySpec(count=1, seed=5)))
    assert set(report.regions) == {"A", "B", "C"}
    for summary in report.regions.values():
        assert summary["max"] >= 0
    # the three parts add up to the product, so the whole is at most the sum of the parts
    assert report.max_ratio <= sum(summary["max"] for summary in report.regions.values()) * (1 + 1e-9)
    assert report.diagnostics["mu"] == pytest.approx(1 / 4 - 1 / 6)
    assert report.diagnostics["sigma"] == pytest.approx(1 / 8 + 3 / 16)


def test_homogeneous_identity_over_random_parameters():
    rng = np.random.default_rng(55)
    for combo in range(20):
        r = Fraction(int(rng.integers(11, 21)), 10)
        s = Fraction(int(rng.integers(0, 9)), 8)
        b = Fraction(int(rng.integers(-8, 9)), 8)
        family = FamilySpec(count=1, seed=int(rng.integers(0, 10 ** 6)))
        report = run_probe(ProbeConfig(EstimateKind.HOMOG_5, r=r, s=s, b=b, family=family))
        assert report.ratios[0] == pytest.approx(1.0, abs=1e-6), (combo, r, s, b)


def test_flow_window_scales_with_the_dilation():
    space = Grid1D(80.0, 1024)
    datum = FamilySpec(count=1, band=0.25, seed=3)
    config = valid_config(EstimateKind.L8_STRICHARTZ, family=datum, flow=FlowWindow(max_time=8.0))
    member = make_family(space, datum, 4.0).members[0]
    sides = {lam: flow_sides(config, member.dilate(lam).realize(space, 0.25), lam) for lam in (1.0, 2.0)}
    assert sides[2.0][2]["t_half"] == pytest.approx(sides[1.0][2]["t_half"] / 8.0)
    assert not sides[1.0][2]["truncated"] or sides[1.0][2]["t_half"] == pytest.approx(8.0)
    # L^8_xt against L^2_x is invariant under the dilation
    assert sides[2.0][0] / sides[2.0][1] == pytest.approx(sides[1.0][0] / sides[1.0][1], rel=1e-2)


def test_sweep_grid_holds_every_dilation():
    grid = ProbeGrid(20.0, 128).for_dilations((0.25, 1.0, 4.0))
    assert grid.half_length == pytest.approx(80.0)
    assert grid.n_modes == 2048
    assert grid.space().xi_max == pytest.approx(4 * ProbeGrid(20.0, 128).space().xi_max)
    assert ProbeGrid(20.0, 128).for_dilations((1.0,)) == ProbeGrid(20.0, 128)


@pytest.mark.slow
def test_strichartz_sweep_is_scale_invariant():
    config = valid_config(
        EstimateKind.L8_STRICHARTZ, family=FamilySpec(count=2, band=0.25, seed=3),
        grid=ProbeGrid(80.0, 256), flow=FlowWindow(max_time=8.0),
    )
    summary = scaling_sweep(config, (0.25, 1.0, 4.0))
    assert [entry["lambda"] for entry in summary.per_lambda] == [0.25, 1.0, 4.0]
    assert summary.spread < 1.05


DILATIONS = tuple(2.0 ** (k / 12) for k in range(7))


@pytest.mark.slow
@pytest.mark.parametrize("kind", [kind for kind in EstimateKind if kind != EstimateKind.LEMMA2_DELTA],
                         ids=lambda kind: kind.value)
def test_uniform_constants_over_the_acceptance_family(kind):
    overrides = {"workers": 4}
    if kind == EstimateKind.TRILINEAR_T2:
        overrides["grid"] = ProbeGrid(10.0, 80, 4.0, 16)
    report = scaling_sweep(valid_config(kind, family=FamilySpec(count=100, seed=21), **overrides), DILATIONS).report
    assert len(report.rows) == 100 * len(DILATIONS)
    assert report.max_ratio < OUTLIER_FACTOR * report.median_ratio


@pytest.mark.slow
@pytest.mark.parametrize("r, s", [(Fraction(2), Fraction(1, 4)), (Fraction(3, 2), Fraction(1, 6))])
def test_trilinear_acceptance_parameters(r, s):
    config = ProbeConfig(
        EstimateKind.TRILINEAR_T2, r=r, s=s, b=1 / r + Fraction(1, 20),
        b_prime=1 / (2 * r) - Fraction(5, 8) - Fraction(1, 20),
        family=FamilySpec(count=100, width_range=(0.125, 0.125), seed=8), grid=ProbeGrid(10.0, 80, 4.0, 16), workers=4,
    )
    assert violations(config) == []
    report = scaling_sweep(config, DILATIONS).report
    assert len(report.rows) == 100 * len(DILATIONS)
    assert report.max_ratio < OUTLIER_FACTOR * report.median_ratio
    for summary in report.regions.values():
        assert np.isfinite(summary["max"])


@pytest.mark.slow
@pytest.mark.parametrize("r, s", [(Fraction(2), Fraction(0)), (Fraction(3, 2), Fraction(1, 4))])
def test_sup_in_time_embedding_over_a_hundred_fields(r, s):
    b = 1 / r + Fraction(1, 20)
    config = ProbeConfig(EstimateKind.EMBED_52, r=r, s=s, b=b, family=FamilySpec(count=100, seed=31))
    report = run_probe(config)
    assert report.max_ratio <= sup_in_time_constant(config.grid, float(r), b) * (1 + 1e-9)


@pytest.mark.slow
def test_embedding_across_r_over_a_hundred_fields():
    r1, s1 = Fraction(3, 2), Fraction(1, 2)
    b1 = 1 / r1 + Fraction(1, 20)
    config = ProbeConfig(EstimateKind.EMBED_4, r=2, s=0, b=0, embed=(r1, s1, b1), family=FamilySpec(count=100, seed=32))
    assert violations(config) == []
    # Hoelder with 1/p = 1/r1 - 1/r0 on the ratio of the two weights
    p = 1.0 / float(1 / r1 - Fraction(1, 2))
    space_time = config.grid.space_time(1.0)
    xi = space_time.space.xi
    cap = float(np.sum(space_time.space.dxi * bracket(xi) ** (-float(s1) * p)) ** (1 / p))
    cap *= float(np.sum(space_time.dtau * bracket(space_time.taus) ** (-float(b1) * p)) ** (1 / p))
    report = run_probe(config)
    assert report.max_ratio <= cap * (1 + 1e-9)
