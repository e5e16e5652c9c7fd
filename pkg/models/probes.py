"""
Empirical probes of the linear, bilinear and trilinear estimates.

A probe draws a seeded family of band-limited data, evaluates both sides of one
inequality for every member (and every dilation of it), and reports the ratios.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from multiprocessing import Pool

import numpy as np

from .bilinear import i_minus, i_plus, lemma3_terms
from .errors import NumericalError, PreconditionError, ResolutionError, ResolutionWarning
from .families import Cutoff, FamilySpec, make_family, make_space_time_family
from .norms import (
    R_RANGE_HYPOTHESIS, MixedNormParams, NormParams, as_fraction, cutoff_norm, fl_norm, mixed_norm,
    scale_exponent, xrsb_norm,
)
from .spectral import (
    MIXED, PHYSICAL, Grid1D, MultiplierSpec, SpaceTimeField, SpaceTimeGrid, airy_flow, apply_multiplier,
    duhamel_integral, to_mixed, to_physical,
)

logger = logging.getLogger(__name__)


class EstimateKind(str, Enum):
    L8_STRICHARTZ = "L8_STRICHARTZ"
    LEMMA4 = "LEMMA4"
    FS_AIRY = "FS_AIRY"
    COR3_GENERAL = "COR3_GENERAL"
    XNORM_30 = "XNORM_30"
    XNORM_31 = "XNORM_31"
    BILINEAR_L3 = "BILINEAR_L3"
    COR_K1 = "COR_K1"
    COR_K2 = "COR_K2"
    COR_K10 = "COR_K10"
    LEMMA2_DELTA = "LEMMA2_DELTA"
    HOMOG_5 = "HOMOG_5"
    EMBED_4 = "EMBED_4"
    EMBED_52 = "EMBED_52"
    TRILINEAR_T2 = "TRILINEAR_T2"
    LINF_L1 = "LINF_L1"
    L4_XSB = "L4_XSB"
    L8_XSB = "L8_XSB"


FLOW_KINDS = {
    EstimateKind.L8_STRICHARTZ, EstimateKind.LEMMA4, EstimateKind.FS_AIRY,
    EstimateKind.COR3_GENERAL, EstimateKind.LINF_L1,
}
# number of independent data per sample
ARITY = {
    EstimateKind.BILINEAR_L3: 2, EstimateKind.COR_K1: 2, EstimateKind.COR_K2: 2,
    EstimateKind.COR_K10: 2, EstimateKind.TRILINEAR_T2: 3,
}
# kinds whose time axis is rescaled by lam^3 under a dilation
TIME_SCALED = {
    EstimateKind.XNORM_30, EstimateKind.XNORM_31, EstimateKind.COR_K1, EstimateKind.COR_K2,
    EstimateKind.COR_K10, EstimateKind.EMBED_4, EstimateKind.EMBED_52, EstimateKind.TRILINEAR_T2,
    EstimateKind.L4_XSB, EstimateKind.L8_XSB,
}
OUTLIER_FACTOR = 10.0


@dataclass(frozen=True)
class ProbeGrid:
    half_length: float = 20.0
    n_modes: int = 128
    t_half: float = 8.0
    n_times: int = 512

    def space(self):
        return Grid1D(self.half_length, self.n_modes)

    def space_time(self, lam=1.0):
        return SpaceTimeGrid.centered(self.space(), self.t_half / lam ** 3, self.n_times)

    def refined(self):
        return replace(self, n_modes=2 * self.n_modes)

    def for_dilations(self, lambdas):
        """
        The grid on which every dilation in lambdas meets the box and resolution that
        lam = 1 meets on this one: the box grows by 1/lam_min, the top frequency by lam_max.
        """
        low, high = min(min(lambdas), 1.0), max(max(lambdas), 1.0)
        n_modes = 2 * int(math.ceil(self.n_modes * high / low / 2))
        return replace(self, half_length=self.half_length / low, n_modes=n_modes)


@dataclass(frozen=True)
class FlowWindow:
    """Doubling schedule of the flow time window, in the time units of undilated data."""

    tail_tolerance: float = 1e-4
    max_time: float = 64.0
    initial_time: float = 1.0
    wrap_tolerance: float = 1e-6


@dataclass(frozen=True)
class ProbeConfig:
    kind: EstimateKind
    r: Fraction = Fraction(2)
    s: Fraction = Fraction(0)
    b: Fraction = Fraction(0)
    b_prime: Fraction = None
    b_tilde: Fraction = None
    beta: Fraction = None
    sigma: Fraction = None
    p: float = None
    q: float = None
    embed: tuple = None
    family: FamilySpec = FamilySpec()
    dilations: tuple = (1.0,)
    deltas: tuple = ()
    grid: ProbeGrid = ProbeGrid()
    flow: FlowWindow = FlowWindow()
    check_resolution: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", EstimateKind(self.kind))
        for name in ("r", "s", "b", "b_prime", "b_tilde", "beta", "sigma"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, as_fraction(value))

    @property
    def params(self):
        return NormParams(self.r, self.s, self.b)


@dataclass
class SampleRow:
    sample_id: int
    lam: float
    lhs: float
    rhs: float
    ratio: float
    delta: float = None


@dataclass
class EstimateReport:
    kind: EstimateKind
    config: ProbeConfig
    rows: list = field(default_factory=list)
    max_ratio: float = 0.0
    median_ratio: float = 0.0
    spread: float = 1.0
    slope: float = None
    slope_residual: float = None
    predicted_slope: float = None
    regions: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def ratios(self):
        return [row.ratio for row in self.rows]


# Validity predicates


def _lebesgue_r(p, q):
    """r with 1/r = 2/p + 1/q (p, q may be infinite)."""
    inv = (0 if math.isinf(p) else 2 / as_fraction(p)) + (0 if math.isinf(q) else 1 / as_fraction(q))
    return None if inv == 0 else 1 / inv


def _strichartz_violations(config):
    found = []
    p, q = config.p, config.q
    if p is None or q is None:
        return ["p and q are required"]
    inv_p = 0 if math.isinf(p) else 1 / as_fraction(p)
    inv_q = 0 if math.isinf(q) else 1 / as_fraction(q)
    case_i = 0 <= inv_p <= Fraction(1, 4) and 0 <= inv_q < Fraction(1, 4)
    case_ii = Fraction(1, 4) <= inv_q <= inv_q + inv_p < Fraction(1, 2)
    case_iii = math.isinf(p) and q == 2
    if not (case_i or case_ii or case_iii):
        found.append(
            f"(p, q) = ({p}, {q}) must satisfy 1/p <= 1/4 and 1/q < 1/4, "
            "or 1/4 <= 1/q <= 1/q + 1/p < 1/2, or (p, q) = (inf, 2)"
        )
    r = _lebesgue_r(p, q)
    if r is None or not 1 < r <= 2:
        found.append(f"1/r = 2/p + 1/q must give r in (1, 2], got r = {r}")
    return found


def _r_range(config):
    if not Fraction(4, 3) < config.r <= 2:
        return [f"r = {config.r} must lie in (4/3, 2] ({R_RANGE_HYPOTHESIS})"]
    return []


def _smoothing_violations(config):
    found = []
    s, b, b_tilde = config.s, config.b, config.b_tilde
    if not b > Fraction(1, 2) >= s >= 0:
        found.append(f"need b > 1/2 >= s >= 0, got b = {b}, s = {s}")
    if b_tilde is None or not b_tilde > Fraction(1, 6) + 2 * s / 3:
        found.append(f"b~ = {b_tilde} must exceed 1/6 + 2s/3 = {Fraction(1, 6) + 2 * s / 3}")
    return found


def violations(config):
    """Hypotheses of the probed estimate that the configuration breaks."""
    kind, r, s, b = config.kind, config.r, config.s, config.b
    found = []
    if kind == EstimateKind.LEMMA4:
        if config.q is None or not 4 < config.q < math.inf:
            found.append(f"q = {config.q} must lie in (4, inf)")
    elif kind == EstimateKind.FS_AIRY:
        found += _r_range(config)
    elif kind == EstimateKind.COR3_GENERAL:
        found += _strichartz_violations(config)
    elif kind in (EstimateKind.XNORM_30, EstimateKind.XNORM_31):
        found += _strichartz_violations(config)
        target = _lebesgue_r(config.p, config.q) if not found else None
        if target is not None and not b > 1 / target:
            found.append(f"b = {b} must exceed 1/r = {1 / target}")
    elif kind in (EstimateKind.COR_K1, EstimateKind.COR_K2):
        found += _smoothing_violations(config)
    elif kind == EstimateKind.COR_K10:
        sigma, beta, b_prime = config.sigma, config.beta, config.b_prime
        inv_r_prime = 1 - 1 / r
        if sigma is None or beta is None or b_prime is None:
            found.append("sigma, beta and b' are required")
        else:
            if not 0 <= sigma <= inv_r_prime < beta:
                found.append(f"need 0 <= sigma <= 1/r' < beta, got sigma = {sigma}, 1/r' = {inv_r_prime}, beta = {beta}")
            if not b_prime < -(inv_r_prime + 2 * sigma) / 3:
                found.append(f"b' = {b_prime} must be below -(1/r' + 2 sigma)/3 = {-(inv_r_prime + 2 * sigma) / 3}")
    elif kind == EstimateKind.LEMMA2_DELTA:
        b_prime = config.b_prime
        if b_prime is None:
            found.append("b' is required")
        elif not (b_prime + 1 >= b >= 0 >= b_prime > -(1 - 1 / r)):
            found.append(f"need b' + 1 >= b >= 0 >= b' > -1/r', got b = {b}, b' = {b_prime}, 1/r' = {1 - 1 / r}")
        if not config.deltas or any(not 0 < d <= 1 for d in config.deltas):
            found.append(f"deltas must be a nonempty list in (0, 1], got {config.deltas}")
    elif kind == EstimateKind.EMBED_4:
        if config.embed is None:
            found.append("the stronger norm (r1, s1, b1) is required")
        else:
            r1, s1, b1 = (as_fraction(v) for v in config.embed)
            if not r1 <= r:
                found.append(f"r1 = {r1} must not exceed r0 = {r}")
            if not s1 - 1 / r1 > s - 1 / r:
                found.append(f"need s1 - 1/r1 > s0 - 1/r0, got {s1 - 1 / r1} <= {s - 1 / r}")
            if not b1 - 1 / r1 > b - 1 / r:
                found.append(f"need b1 - 1/r1 > b0 - 1/r0, got {b1 - 1 / r1} <= {b - 1 / r}")
    elif kind == EstimateKind.EMBED_52:
        if not b > 1 / r:
            found.append(f"b = {b} must exceed 1/r = {1 / r}")
    elif kind == EstimateKind.TRILINEAR_T2:
        found += _r_range(config)
        if not found and not s >= scale_exponent(r):
            found.append(f"s = {s} must be at least s(r) = {scale_exponent(r)}")
        if config.b_prime is None or not config.b_prime < 1 / (2 * r) - Fraction(5, 8):
            found.append(f"b' = {config.b_prime} must be below 1/(2r) - 5/8 = {1 / (2 * r) - Fraction(5, 8)}")
        if not b > 1 / r:
            found.append(f"b = {b} must exceed 1/r = {1 / r}")
    elif kind == EstimateKind.L4_XSB:
        if not b > Fraction(1, 3):
            found.append(f"b = {b} must exceed 1/3")
    elif kind == EstimateKind.L8_XSB:
        if not b > Fraction(1, 2):
            found.append(f"b = {b} must exceed 1/2")
    return found


def require_valid(config):
    found = violations(config)
    if found:
        raise PreconditionError(f"{config.kind.value}: " + "; ".join(found))


# Regions of the trilinear frequency domain

REGIONS = ("A", "B", "C")
COMPARABLE = 4.0


def classify_regions(xi1, xi2, xi3):
    """
    Region codes 0 (A), 1 (B), 2 (C) of frequency triples.

    A: all comparable (max <= 4 min) or all |xi_i| <= 1. C: not A and |xi_max| > 4 |xi_med|.
    B: everything else, so the three regions partition every triple.
    """
    stacked = np.sort(np.abs(np.stack(np.broadcast_arrays(xi1, xi2, xi3))), axis=0)
    small, med, big = stacked
    region_a = (big <= COMPARABLE * small) | (big <= 1.0)
    region_c = ~region_a & (big > COMPARABLE * med)
    return np.where(region_a, 0, np.where(region_c, 2, 1))


def classify_region(xi1, xi2, xi3):
    return REGIONS[int(classify_regions(xi1, xi2, xi3))]


def trilinear_regions(u1, u2, u3):
    """
    Transform of u1 u2 u3 split by the region of (xi1, xi2, xi3), slice by slice in
    the mixed layout. The three parts add up to the full (truncated) product.
    """
    grid = u1.grid
    space = grid.space
    n, half = space.n_modes, space.n_modes // 2
    modes = space.modes
    m1, m2, m3 = np.meshgrid(modes, modes, modes, indexing="ij")
    total = m1 + m2 + m3
    valid = (total >= -half) & (total < half)
    out = (total + half)[valid]
    codes = classify_regions(m1 * space.dxi, m2 * space.dxi, m3 * space.dxi)[valid]
    scale = (space.dxi / np.sqrt(2.0 * np.pi)) ** 2
    parts = {name: np.zeros(grid.shape, dtype=complex) for name in REGIONS}
    for j in range(grid.n_times):
        values = (u1.coeffs[:, j][:, None, None] * u2.coeffs[:, j][None, :, None] * u3.coeffs[:, j][None, None, :])[valid]
        for code, name in enumerate(REGIONS):
            mask = codes == code
            real = np.bincount(out[mask], weights=values[mask].real, minlength=n)
            imag = np.bincount(out[mask], weights=values[mask].imag, minlength=n)
            parts[name][:, j] = scale * (real + 1j * imag)
    return {name: SpaceTimeField(grid, coeffs, MIXED) for name, coeffs in parts.items()}


# Flow norms over adaptive time windows


def _data_reach(u):
    magnitude = np.abs(u.coeffs)
    populated = u.grid.xi[magnitude > 1e-12 * max(float(np.max(magnitude)), 1e-300)]
    return float(np.max(np.abs(populated))) if populated.size else 0.0


def _wrap_mass(flow):
    values = np.abs(to_physical(flow).coeffs) ** 2
    edge = np.abs(flow.grid.space.x) > 0.9 * flow.grid.space.half_length
    totals = np.sum(values, axis=0)
    totals[totals == 0] = 1.0
    return float(np.max(np.sum(values[edge], axis=0) / totals))


def flow_norm(u, params, window=FlowWindow(), lam=1.0):
    """
    Mixed norm of the free flow U(t)u over [-T, T], T doubled until the last
    doubling adds less than the tail tolerance or the window hits max_time or
    wraps around the periodic box.

    Data dilated by lam evolve lam^3 times faster, so the whole schedule is
    measured in units of lam^-3 and a dilated datum sees the same windows as
    the undilated one.
    """
    unit = lam ** -3.0
    initial_time, max_time = window.initial_time * unit, window.max_time * unit
    reach = max(_data_reach(u), lam)
    dt = min(np.pi / (4.0 * reach ** 3), initial_time / 8.0)
    t_half, previous, diagnostics = initial_time, None, {}
    p = params.p
    while True:
        n_times = max(8, 2 * int(math.ceil(t_half / dt)))
        grid = SpaceTimeGrid.centered(u.grid, t_half, n_times)
        flow = airy_flow(u, grid)
        value = mixed_norm(flow, params)
        wrap = _wrap_mass(flow)
        diagnostics = {"t_half": t_half, "wrap_mass": wrap, "truncated": False}
        if value == 0:
            break
        if wrap > window.wrap_tolerance:
            diagnostics["truncated"] = True
            break
        if previous is not None:
            if math.isinf(p):
                tail = (value - previous) / value
            else:
                tail = 1.0 - (previous / value) ** p
            if tail < window.tail_tolerance:
                break
        if 2 * t_half > max_time:
            diagnostics["truncated"] = True
            break
        previous, t_half = value, 2 * t_half
    return value, diagnostics


# Per-kind evaluators. Each returns (lhs, rhs) pairs for realized data.


def _ratio(lhs, rhs):
    if rhs == 0:
        if lhs == 0:
            return 0.0
        raise NumericalError(f"right-hand side vanished with left-hand side {lhs:.3e}")
    return lhs / rhs


def _l2_xt(field):
    """L^2_xt norm of a mixed-layout field (Plancherel in x)."""
    return float(np.sqrt(field.grid.space.dxi * field.grid.dt * np.sum(np.abs(field.coeffs) ** 2)))


def _flow_sides(config):
    kind = config.kind
    if kind == EstimateKind.L8_STRICHARTZ:
        return MixedNormParams(8, 8), lambda u: fl_norm(u, (2, 0))
    if kind == EstimateKind.LINF_L1:
        return MixedNormParams(math.inf, math.inf), lambda u: float(u.grid.dxi * np.sum(np.abs(u.coeffs))) / np.sqrt(2 * np.pi)
    if kind == EstimateKind.LEMMA4:
        r = 1 / (Fraction(1, 2) + 1 / as_fraction(config.q))
        return MixedNormParams(4, float(config.q), 0.25, True), lambda u: fl_norm(u, (r, 0))
    if kind == EstimateKind.FS_AIRY:
        p = 3 * float(config.r)
        return MixedNormParams(p, p, 1.0 / p, True), lambda u: fl_norm(u, (config.r, 0))
    r = _lebesgue_r(config.p, config.q)
    sigma = 0.0 if math.isinf(config.p) else 1.0 / config.p
    return MixedNormParams(config.p, config.q, sigma, True), lambda u: fl_norm(u, (r, 0))


def flow_sides(config, u, lam=1.0):
    mixed, rhs_of = _flow_sides(config)
    lhs, diagnostics = flow_norm(u, mixed, config.flow, lam)
    return lhs, rhs_of(u), diagnostics


def bilinear_l3_sides(u1, u2):
    terms = lemma3_terms(u1, u2)
    lhs = math.sqrt(max(terms.value, 0.0))
    rhs = fl_norm(u1, (2, 0)) * fl_norm(u2, (2, 0))
    return lhs, rhs, {"degenerate_points": terms.degenerate_points, "cross_modulus": terms.cross_modulus}


def homog5_sides(u0, cutoff, grid, params):
    """Both sides of ||psi U u0||_X = ||psi||_{H^r_b} ||u0||_{H^r_s}."""
    flow = airy_flow(u0, grid)
    weighted = flow.with_coeffs(flow.coeffs * cutoff(grid.times)[None, :])
    lhs = xrsb_norm(weighted, params)
    rhs = cutoff_norm(cutoff, grid, params.b, params.r) * fl_norm(u0, (params.r, params.s))
    return lhs, rhs


def lemma2_sides(F, cutoff, delta, params, b_prime):
    """||psi_delta U *_R F||_{X_{s,b}} against ||F||_{X_{s,b'}}."""
    retarded = duhamel_integral(F)
    psi = cutoff.dilated(delta)(F.grid.times)
    lhs = xrsb_norm(retarded.with_coeffs(retarded.coeffs * psi[None, :]), params)
    rhs = xrsb_norm(F, params.with_b(b_prime))
    return lhs, rhs


def trilinear_sides(u1, u2, u3, params, b_prime):
    """
    ||d_x(u1 u2 u3)||_{X_{s,b'}} against prod ||u_i||_{X_{s,b}}, plus the
    left-hand side restricted to each frequency region.
    """
    lhs_params = params.with_b(b_prime)
    product = to_physical(u1).coeffs * to_physical(u2).coeffs * to_physical(u3).coeffs
    cubic = to_mixed(SpaceTimeField(u1.grid, product, PHYSICAL))
    derivative = 1j * u1.grid.space.xi[:, None]
    lhs = xrsb_norm(cubic.with_coeffs(cubic.coeffs * derivative), lhs_params)
    rhs = xrsb_norm(u1, params) * xrsb_norm(u2, params) * xrsb_norm(u3, params)
    regions = {
        name: xrsb_norm(part.with_coeffs(part.coeffs * derivative), lhs_params)
        for name, part in trilinear_regions(u1, u2, u3).items()
    }
    return lhs, rhs, regions


def _space_time_sides(config, fields):
    kind, params = config.kind, config.params
    if kind == EstimateKind.XNORM_30:
        (F,) = fields
        r = _lebesgue_r(config.p, config.q)
        sigma = 0.0 if math.isinf(config.p) else 1.0 / config.p
        lhs = mixed_norm(F, MixedNormParams(config.p, config.q, sigma, homogeneous=False))
        return lhs, xrsb_norm(F, NormParams(r, 0, config.b))
    if kind == EstimateKind.XNORM_31:
        (F,) = fields
        r = _lebesgue_r(config.p, config.q)
        p_dual = 1.0 if math.isinf(config.p) else config.p / (config.p - 1)
        q_dual = 1.0 if math.isinf(config.q) else config.q / (config.q - 1)
        sigma = 0.0 if math.isinf(config.p) else 1.0 / config.p
        lhs = xrsb_norm(F, NormParams(r, 0, config.b).conjugate())
        return lhs, mixed_norm(F, MixedNormParams(p_dual, q_dual, -sigma, homogeneous=False))
    if kind in (EstimateKind.L4_XSB, EstimateKind.L8_XSB):
        (F,) = fields
        p = 4 if kind == EstimateKind.L4_XSB else 8
        return mixed_norm(F, MixedNormParams(p, p)), xrsb_norm(F, NormParams(2, 0, config.b))
    if kind == EstimateKind.EMBED_4:
        (F,) = fields
        return xrsb_norm(F, params), xrsb_norm(F, NormParams(*config.embed))
    if kind == EstimateKind.EMBED_52:
        (F,) = fields
        lhs = max(fl_norm(F.time_slice(j), (config.r, config.s)) for j in range(F.grid.n_times))
        return lhs, xrsb_norm(F, params)
    if kind == EstimateKind.COR_K1:
        u, v = fields
        smoothed = apply_multiplier(i_minus(u, v, config.s), MultiplierSpec.riesz(config.s))
        return _l2_xt(smoothed), xrsb_norm(u, NormParams(2, 0, config.b)) * xrsb_norm(v, NormParams(2, 0, config.b_tilde))
    if kind == EstimateKind.COR_K2:
        w, u = fields
        lifted = apply_multiplier(w, MultiplierSpec.riesz(config.s))
        lhs = xrsb_norm(i_plus(lifted, u, config.s), NormParams(2, 0, -config.b_tilde))
        return lhs, _l2_xt(w) * xrsb_norm(u, NormParams(2, 0, config.b))
    if kind == EstimateKind.COR_K10:
        w, u = fields
        lifted = apply_multiplier(w, MultiplierSpec.riesz(config.sigma))
        lhs = xrsb_norm(i_plus(lifted, u, config.sigma), NormParams(config.r, 0, config.b_prime))
        return lhs, _l2_xt(w) * xrsb_norm(u, NormParams(2, 0, config.beta))
    raise PreconditionError(f"{kind.value} is not a single-window space-time probe")


# Sample evaluation


def _probe_cutoff(config, sample_id):
    rng = np.random.default_rng([config.family.seed, sample_id, 5])
    plateau = float(rng.uniform(0.5, 1.2))
    support = float(rng.uniform(plateau + 0.3, 1.95))
    return Cutoff(plateau, support)


def _family_for(config, grid):
    kind = config.kind
    arity = ARITY.get(kind, 1)
    spec = replace(config.family, count=config.family.count * arity)
    if kind == EstimateKind.TRILINEAR_T2:
        spec = replace(spec, band=min(spec.band, 1.0 / 3.0))
    max_dilation = max(config.dilations)
    if kind in FLOW_KINDS or kind in (EstimateKind.BILINEAR_L3, EstimateKind.HOMOG_5):
        return make_family(grid.space(), spec, max_dilation)
    return make_space_time_family(grid.space_time(1.0), spec, max_dilation)


def evaluate_sample(config, members, lam, grid, sample_id=0):
    """Rows (and side information) for one sample of the family at dilation lam."""
    kind = config.kind
    band = min(config.family.band, 1.0 / 3.0) if kind == EstimateKind.TRILINEAR_T2 else config.family.band
    dilated = [member.dilate(lam) for member in members]
    extra = {}
    if kind in FLOW_KINDS:
        u = dilated[0].realize(grid.space(), band)
        lhs, rhs, extra = flow_sides(config, u, lam)
        return [SampleRow(sample_id, lam, lhs, rhs, _ratio(lhs, rhs))], extra
    if kind == EstimateKind.BILINEAR_L3:
        u1, u2 = (m.realize(grid.space(), band) for m in dilated)
        lhs, rhs, extra = bilinear_l3_sides(u1, u2)
        return [SampleRow(sample_id, lam, lhs, rhs, _ratio(lhs, rhs))], extra
    if kind == EstimateKind.HOMOG_5:
        u0 = dilated[0].realize(grid.space(), band)
        lhs, rhs = homog5_sides(u0, _probe_cutoff(config, sample_id), grid.space_time(1.0), config.params)
        return [SampleRow(sample_id, lam, lhs, rhs, _ratio(lhs, rhs))], extra
    st_grid = grid.space_time(lam if kind in TIME_SCALED else 1.0)
    fields = [m.realize(st_grid, band) for m in dilated]
    if kind == EstimateKind.LEMMA2_DELTA:
        cutoff = Cutoff()
        rows = []
        for delta in config.deltas:
            lhs, rhs = lemma2_sides(fields[0], cutoff, delta, config.params, config.b_prime)
            rows.append(SampleRow(sample_id, lam, lhs, rhs, _ratio(lhs, rhs), delta))
        return rows, extra
    if kind == EstimateKind.TRILINEAR_T2:
        lhs, rhs, regions = trilinear_sides(*fields, config.params, config.b_prime)
        extra = {"regions": {name: _ratio(value, rhs) for name, value in regions.items()}}
        return [SampleRow(sample_id, lam, lhs, rhs, _ratio(lhs, rhs))], extra
    lhs, rhs = _space_time_sides(config, fields)
    return [SampleRow(sample_id, lam, lhs, rhs, _ratio(lhs, rhs))], extra


def _job(arguments):
    config, members, lam, sample_id = arguments
    return evaluate_sample(config, members, lam, config.grid, sample_id)


def _check_resolution(config, members, lam):
    coarse, _ = evaluate_sample(config, members, lam, config.grid)
    fine, _ = evaluate_sample(config, members, lam, config.grid.refined())
    changes = []
    for a, b in zip(coarse, fine):
        for x, y in ((a.lhs, b.lhs), (a.rhs, b.rhs)):
            scale = max(abs(x), abs(y))
            changes.append(abs(x - y) / scale if scale > 0 else 0.0)
    worst = max(changes) if changes else 0.0
    if worst >= 0.01:
        raise ResolutionError(
            f"{config.kind.value}: doubling n_modes changes a norm by {100 * worst:.2f}% (limit 1%)"
        )
    return worst


def _fit_slope(deltas, values):
    x, y = np.log(np.asarray(deltas, dtype=float)), np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), residual


def run_probe(config):
    """Evaluate the configured estimate on every family member and dilation."""
    require_valid(config)
    kind = config.kind
    family = _family_for(config, config.grid)
    arity = ARITY.get(kind, 1)
    samples = [family.members[i * arity:(i + 1) * arity] for i in range(config.family.count)]
    report = EstimateReport(kind, config)

    if config.check_resolution:
        report.diagnostics["resolution_change"] = _check_resolution(config, samples[0], config.dilations[0])

    jobs = [(config, members, lam, sample_id) for lam in config.dilations for sample_id, members in enumerate(samples)]
    logger.info("probe %s: %d samples x %d dilations", kind.value, len(samples), len(config.dilations))
    if config.workers > 1:
        with Pool(config.workers) as pool:
            results = pool.map(_job, jobs)
    else:
        results = [_job(job) for job in jobs]

    extras = []
    for rows, extra in results:
        report.rows.extend(rows)
        extras.append(extra)
    _summarize(report, extras)
    return report


def _summarize(report, extras):
    config, kind = report.config, report.kind
    ratios = np.array(report.ratios, dtype=float)
    if not np.all(np.isfinite(ratios)) or np.any(ratios < 0):
        raise NumericalError(f"{kind.value}: non-finite or negative ratio encountered")
    report.max_ratio = float(np.max(ratios)) if ratios.size else 0.0
    report.median_ratio = float(np.median(ratios)) if ratios.size else 0.0
    per_lambda = [max(row.ratio for row in report.rows if row.lam == lam) for lam in config.dilations]
    positive = [value for value in per_lambda if value > 0]
    report.spread = max(positive) / min(positive) if positive else 1.0
    report.diagnostics["warnings"] = []

    if report.median_ratio > 0 and report.max_ratio > OUTLIER_FACTOR * report.median_ratio:
        _warn(report, f"{kind.value}: max ratio {report.max_ratio:.3e} exceeds {OUTLIER_FACTOR:g}x the median")

    if kind in FLOW_KINDS:
        truncated = sum(1 for extra in extras if extra.get("truncated"))
        report.diagnostics["truncated_windows"] = truncated
        report.diagnostics["max_wrap_mass"] = max(extra.get("wrap_mass", 0.0) for extra in extras)
        if truncated:
            _warn(report, f"{kind.value}: {truncated} flow windows were truncated before the tail tolerance")
    if kind == EstimateKind.BILINEAR_L3:
        report.diagnostics["degenerate_points"] = extras[0].get("degenerate_points", 0)
    if kind == EstimateKind.LEMMA2_DELTA:
        deltas = sorted(set(config.deltas))
        worst = [max(row.ratio for row in report.rows if row.delta == d) for d in deltas]
        report.predicted_slope = float(1 + config.b_prime - config.b)
        if len(deltas) >= 2 and all(value > 0 for value in worst):
            report.slope, report.slope_residual = _fit_slope(deltas, worst)
        report.diagnostics["delta_max_ratio"] = dict(zip(deltas, worst))
    if kind == EstimateKind.TRILINEAR_T2:
        for name in REGIONS:
            values = [extra["regions"][name] for extra in extras]
            report.regions[name] = {"max": max(values), "median": float(np.median(values))}
        report.diagnostics["mu"] = float(Fraction(1, 4) - 1 / (3 * config.r))
        report.diagnostics["sigma"] = float(config.s / 2 + Fraction(3, 16))


def _warn(report, message):
    logger.warning(message)
    warnings.warn(message, ResolutionWarning, stacklevel=3)
    report.diagnostics["warnings"].append(message)


@dataclass
class SweepSummary:
    kind: EstimateKind
    report: EstimateReport
    per_lambda: list
    spread: float
    slope: float = None


def scaling_sweep(config, lambdas):
    """
    Recompute the ratios on dilated data u -> lam^(1/2) u(lam x) for each lam, on
    the configured grid widened to hold the whole range of lam.
    """
    lambdas = tuple(lambdas)
    report = run_probe(replace(config, dilations=lambdas, grid=config.grid.for_dilations(lambdas)))
    per_lambda = []
    for lam in lambdas:
        ratios = [row.ratio for row in report.rows if row.lam == lam]
        per_lambda.append({
            "lambda": lam, "max": max(ratios), "min": min(ratios), "median": float(np.median(ratios)),
        })
    maxima = [entry["max"] for entry in per_lambda]
    slope = None
    if len(lambdas) >= 2 and all(value > 0 for value in maxima):
        slope, _ = _fit_slope(lambdas, maxima)
    return SweepSummary(config.kind, report, per_lambda, report.spread, slope)
