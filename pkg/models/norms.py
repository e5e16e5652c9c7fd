"""
Fourier-Lebesgue and restriction norms.

Frequency integrals are sums over uniform cells of width dxi, the cells the
transforms use, so Plancherel holds exactly at r = 2.
"""
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import LayoutError, ParameterError
from .spectral import (
    FREQUENCY, MIXED, PHYSICAL, MultiplierSpec, SpaceTimeField, SpectralField,
    apply_multiplier, bracket, interaction_picture, time_spectrum, to_frequency, to_mixed, to_physical,
)

R_RANGE_HYPOTHESIS = "2 ≥ r > 4/3"


def as_fraction(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(value).limit_denominator(10 ** 9) if isinstance(value, float) else Fraction(value)


def weighted_lp(values, weights, p):
    """(sum w |v|^p)^(1/p); p = inf is the max over samples."""
    magnitude = np.abs(values)
    if math.isinf(p):
        return float(np.max(magnitude)) if magnitude.size else 0.0
    return float(np.sum(weights * magnitude ** p) ** (1.0 / p))


@dataclass(frozen=True)
class NormParams:
    """
    Exponents (r, s, b) of the Fourier-Lebesgue scale.

    The norm integrates |.|^(r') with r' = r/(r-1). The dual space
    X^{r'}_{-s,-b} is the same triple with dual=True, which integrates |.|^r.
    """

    r: Fraction
    s: Fraction = Fraction(0)
    b: Fraction = Fraction(0)
    dual: bool = False

    def __post_init__(self):
        r = as_fraction(self.r)
        if r <= 1:
            raise ParameterError(f"r must exceed 1, got {r}")
        if r > 2:
            raise ParameterError(f"r must lie in (1, 2], got {r}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", as_fraction(self.s))
        object.__setattr__(self, "b", as_fraction(self.b))

    @property
    def r_prime(self):
        return self.r / (self.r - 1)

    @property
    def exponent(self):
        return float(self.r if self.dual else self.r_prime)

    def conjugate(self):
        return NormParams(self.r, -self.s, -self.b, not self.dual)

    def with_b(self, b):
        return NormParams(self.r, self.s, b, self.dual)

    def with_s(self, s):
        return NormParams(self.r, s, self.b, self.dual)


@dataclass(frozen=True)
class MixedNormParams:
    p: float
    q: float
    sigma: float = 0.0
    homogeneous: bool = True

    def __post_init__(self):
        if not (self.p >= 1 and self.q >= 1):
            raise ParameterError(f"mixed norm exponents must be >= 1, got p={self.p}, q={self.q}")


def _as_params(params):
    if isinstance(params, NormParams):
        return params
    return NormParams(*params)


def fl_norm(u, params):
    """||<xi>^s u_hat||_{L^{r'}_xi}."""
    params = _as_params(params)
    if not isinstance(u, SpectralField) or u.layout != FREQUENCY:
        raise LayoutError("fl_norm expects a frequency-layout SpectralField")
    grid = u.grid
    weighted = bracket(grid.xi) ** float(params.s) * u.coeffs
    return weighted_lp(weighted, grid.weights, params.exponent)


def _time_frequency(field):
    if field.layout == FREQUENCY:
        return field.coeffs
    if field.layout == MIXED:
        return time_spectrum(field.coeffs, field.grid)
    return to_frequency(field).coeffs


def hrsb_norm(G, params):
    """||<xi>^s <tau>^b G_hat||_{L^{r'}_{xi tau}}, no dispersion relation in the weight."""
    params = _as_params(params)
    grid = G.grid
    weight = np.outer(bracket(grid.space.xi) ** float(params.s), bracket(grid.taus) ** float(params.b))
    cell = grid.space.dxi * grid.dtau
    return weighted_lp(weight * _time_frequency(G), cell, params.exponent)


def xrsb_norm(F, params):
    """
    ||<xi>^s <tau - xi^3>^b F_hat||_{L^{r'}_{xi tau}}.

    Frequency-layout input is summed literally. Mixed or physical input goes
    through the interaction picture: the norm of U(-t)F(t) in H^r_{s,b}, which
    is exact under time translation of the phase.
    """
    params = _as_params(params)
    if not isinstance(F, SpaceTimeField):
        raise LayoutError("xrsb_norm expects a SpaceTimeField")
    grid = F.grid
    if F.layout == FREQUENCY:
        xi = grid.space.xi
        weight = bracket(xi) ** float(params.s)
        weight = weight[:, None] * bracket(grid.taus[None, :] - xi[:, None] ** 3) ** float(params.b)
        return weighted_lp(weight * F.coeffs, grid.space.dxi * grid.dtau, params.exponent)
    mixed = F if F.layout == MIXED else to_mixed(F)
    return hrsb_norm(interaction_picture(mixed), params)


def mixed_norm(F, params):
    """(int ||D^sigma u(t)||_{L^q_x}^p dt)^(1/p), with D = I (homogeneous) or J."""
    if F.layout == FREQUENCY:
        raise LayoutError("mixed_norm expects a physical or mixed layout field")
    if params.sigma != 0:
        mixed = F if F.layout == MIXED else to_mixed(F)
        if params.homogeneous:
            multiplier = MultiplierSpec.riesz(params.sigma)
        else:
            multiplier = MultiplierSpec.bessel(params.sigma)
        values = to_physical(apply_multiplier(mixed, multiplier)).coeffs
    else:
        values = F.coeffs if F.layout == PHYSICAL else to_physical(F).coeffs
    grid = F.grid
    space_norms = _lp_columns(values, grid.space.dx, params.q)
    return weighted_lp(space_norms, grid.dt, params.p)


def _lp_columns(values, weight, q):
    magnitude = np.abs(values)
    if math.isinf(q):
        return np.max(magnitude, axis=0)
    return np.sum(weight * magnitude ** q, axis=0) ** (1.0 / q)


def lp_norm(values, weight, p):
    """L^p norm of physical samples with a uniform cell weight."""
    return weighted_lp(np.ravel(values), weight, p)


def cutoff_norm(cutoff, grid, b, r):
    """||cutoff||_{H^r_b} of a function of t sampled on the time nodes of `grid`."""
    params = NormParams(r)
    samples = cutoff(grid.times) if callable(cutoff) else np.asarray(cutoff)
    spectrum = time_spectrum(samples, grid)
    return weighted_lp(bracket(grid.taus) ** float(b) * spectrum, grid.dtau, params.exponent)


def scale_exponent(r):
    """s(r) = 1/2 - 1/(2r), defined on the range of the trilinear estimate."""
    r = as_fraction(r)
    if not (Fraction(4, 3) < r <= 2):
        raise ParameterError(f"r must lie in (4/3, 2], got {r} ({R_RANGE_HYPOTHESIS})")
    return Fraction(1, 2) - 1 / (2 * r)


def sobolev_equivalent(r, s):
    """L^2-Sobolev index with the same scaling as H^r_s."""
    r, s = as_fraction(r), as_fraction(s)
    return s - 1 / r + Fraction(1, 2)


@dataclass(frozen=True)
class ParameterWindow:
    r: Fraction
    b_prime_lo: Fraction
    b_prime_hi: Fraction
    b_lo: Fraction

    def b_hi(self, b_prime):
        return as_fraction(b_prime) + 1

    def violations(self, b, b_prime):
        b, b_prime = as_fraction(b), as_fraction(b_prime)
        found = []
        if not (self.b_prime_lo < b_prime < self.b_prime_hi):
            found.append(f"b' = {b_prime} must lie in ({self.b_prime_lo}, {self.b_prime_hi})")
        if not (self.b_lo < b < b_prime + 1):
            found.append(f"b = {b} must lie in ({self.b_lo}, b' + 1)")
        return found

    def contains(self, b, b_prime):
        return not self.violations(b, b_prime)


def parameter_window(r):
    """Exponents b' in (-1/r', 1/(2r) - 5/8), b in (1/r, b' + 1) for which the iteration closes."""
    r = as_fraction(r)
    scale_exponent(r)
    r_prime = r / (r - 1)
    return ParameterWindow(r, -1 / r_prime, 1 / (2 * r) - Fraction(5, 8), 1 / r)


def default_exponents(r):
    """An interior point (b, b') of the parameter window."""
    window = parameter_window(r)
    b_prime = (window.b_prime_lo + window.b_prime_hi) / 2
    b = (window.b_lo + b_prime + 1) / 2
    return b, b_prime


def contraction_violations(params, b_prime):
    """Hypotheses of the contraction argument: b > 1/r, b' in (b - 1, 0]."""
    b, b_prime, r = params.b, as_fraction(b_prime), params.r
    found = []
    if not b > 1 / r:
        found.append(f"b = {b} must exceed 1/r = {1 / r}")
    if not (b - 1 < b_prime <= 0):
        found.append(f"b' = {b_prime} must lie in (b - 1, 0] = ({b - 1}, 0]")
    return found

