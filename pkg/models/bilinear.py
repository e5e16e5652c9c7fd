"""
Weighted bilinear convolutions and the resonance computation behind the
bilinear Airy smoothing estimate.

Convolutions carry the (2 pi)^(-1/2) of the unitary transform, so that with
weight exponent 0 they give the transform of the pointwise product.
"""
import logging
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy

from .errors import (
    DegenerateResonanceError, LayoutError, ParameterError, ResolutionError, ResolutionWarning, ShapeError,
)
from .spectral import (
    FREQUENCY, MIXED, PHYSICAL, Grid1D, SpaceTimeField, SpectralField, reflect, to_frequency, to_physical,
)

logger = logging.getLogger(__name__)

_SQRT_2PI = np.sqrt(2.0 * np.pi)

LEMMA3_CONSTANT = Fraction(1, 3)


class _ConvolutionKernel:
    """Index gather and weights of the truncated linear convolution on one grid."""

    def __init__(self, grid, weight):
        n, half = grid.n_modes, grid.n_modes // 2
        out_index = np.arange(n)[:, None]
        first = np.broadcast_to(np.arange(n)[None, :], (n, n))
        second = out_index - first + half
        self.valid = (second >= 0) & (second < n)
        self.first = first
        self.second = np.clip(second, 0, n - 1)
        xi = grid.xi
        self.weights = np.where(self.valid, weight(xi[self.first], xi[self.second], xi[out_index]), 0.0)
        self.scale = grid.dxi / _SQRT_2PI

    def __call__(self, f, g):
        terms = self.weights * f[self.first] * g[self.second]
        return self.scale * np.sum(terms, axis=1)


def _minus_weight(s):
    return lambda xi1, xi2, xi: np.abs(xi1 - xi2) ** s


def _plus_weight(s):
    return lambda xi1, xi2, xi: np.abs(xi + xi2) ** s


def _check_pair(f, g, s):
    if s < 0:
        raise ParameterError(f"bilinear weight exponent must be nonnegative, got {s}")
    if type(f) is not type(g):
        raise ShapeError("cannot pair a SpectralField with a SpaceTimeField")
    if f.grid != g.grid:
        raise ShapeError("bilinear operands live on different grids")


def _bilinear(f, g, s, weight):
    _check_pair(f, g, s)
    if isinstance(f, SpectralField):
        if f.layout != FREQUENCY or g.layout != FREQUENCY:
            raise LayoutError("bilinear operators act on frequency-layout fields")
        kernel = _ConvolutionKernel(f.grid, weight(float(s)))
        return SpectralField(f.grid, kernel(f.coeffs, g.coeffs))
    if f.layout != MIXED or g.layout != MIXED:
        raise LayoutError("space-time bilinear operators act slice by slice in the mixed layout")
    kernel = _ConvolutionKernel(f.grid.space, weight(float(s)))
    columns = [kernel(f.coeffs[:, j], g.coeffs[:, j]) for j in range(f.grid.n_times)]
    return SpaceTimeField(f.grid, np.stack(columns, axis=1), MIXED)


def i_minus(f, g, s):
    """I_-^s(f, g): convolution weighted by |xi1 - xi2|^s."""
    return _bilinear(f, g, s, _minus_weight)


def i_plus(f, g, s):
    """I_+^s(f, g): convolution weighted by |xi + xi2|^s."""
    return _bilinear(f, g, s, _plus_weight)


def conjugate_field(u):
    if isinstance(u, SpectralField):
        return u.conj()
    return u.with_coeffs(np.conj(reflect(u.coeffs, axis=0)))


def m_operator(u, v, s):
    """M^s_u v = I_-^s(u, v)."""
    return i_minus(u, v, s)


def n_operator(u, w, s):
    """N^s_u w = I_+^s(w, conj u), the formal adjoint of M^s_u."""
    return i_plus(w, conjugate_field(u), s)


def inner_product(f, g):
    """L^2 pairing computed on frequency samples (mixed layout integrates over t too)."""
    if f.grid != g.grid:
        raise ShapeError("pairing fields on different grids")
    if isinstance(f, SpectralField):
        return complex(f.grid.dxi * np.sum(f.coeffs * np.conj(g.coeffs)))
    return complex(f.grid.space.dxi * f.grid.dt * np.sum(f.coeffs * np.conj(g.coeffs)))


@dataclass(frozen=True)
class ResonanceData:
    xi: Fraction
    xi1: Fraction
    zeros: tuple
    weights: tuple


def _exact(value):
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    return value


def resonance_data(xi, xi1):
    """
    Zeros of g(x) = 3 xi (x^2 + xi (xi1 - x) - xi1^2) and the delta-measure
    weights |g'| there. Rational input stays rational.
    """
    xi, xi1 = _exact(xi), _exact(xi1)
    if xi == 0:
        raise DegenerateResonanceError("xi = 0: the resonance function vanishes identically")
    if 2 * xi1 == xi:
        raise DegenerateResonanceError(f"2 xi1 = xi = {xi}: the two zeros collide")
    zeros = (xi1, xi - xi1)
    weights = tuple(abs(3 * xi * (2 * x - xi)) for x in zeros)
    return ResonanceData(xi, xi1, zeros, weights)


def resonance_function(xi, xi1, x):
    return 3 * xi * (x * x + xi * (xi1 - x) - xi1 * xi1)


def resonance_difference(xi, xi1, eta1):
    """
    Both sides of xi1^3 + xi2^3 - eta1^3 - eta2^3 = 3 xi (xi1^2 - eta1^2 + xi (eta1 - xi1))
    with xi2 = xi - xi1 and eta2 = xi - eta1.
    """
    xi, xi1, eta1 = _exact(xi), _exact(xi1), _exact(eta1)
    xi2, eta2 = xi - xi1, xi - eta1
    cubic = xi1 ** 3 + xi2 ** 3 - eta1 ** 3 - eta2 ** 3
    factored = 3 * xi * (xi1 ** 2 - eta1 ** 2 + xi * (eta1 - xi1))
    return cubic, factored


@lru_cache(maxsize=None)
def resonance_polynomial():
    """Symbols (x, xi, xi1) and the sympy expression of g together with dg/dx."""
    x, xi, xi1 = sympy.symbols("x xi xi1")
    g = resonance_function(xi, xi1, x)
    return (x, xi, xi1), g, sympy.diff(g, x)


@dataclass(frozen=True)
class Lemma3Terms:
    diagonal: float
    cross: complex
    cross_modulus: float
    value: float
    bound: float
    degenerate_points: int


def _require_quadrature_pair(u1, u2):
    if u1.grid != u2.grid:
        raise ShapeError("the two data live on different grids")
    if u1.layout != FREQUENCY or u2.layout != FREQUENCY:
        raise LayoutError("expected frequency-layout data")


def lemma3_terms(u1, u2):
    """
    The collapsed resonant sum, term by term:
    diagonal = c sum |u1(xi1)|^2 |u2(xi2)|^2, cross = c sum u1(xi1) conj u1(xi2) u2(xi2) conj u2(xi1),
    with c = 1/3 and the double sum over all grid pairs (xi1, xi2).
    """
    _require_quadrature_pair(u1, u2)
    grid = u1.grid
    a, b = u1.coeffs, u2.coeffs
    cell = grid.dxi ** 2
    c = float(LEMMA3_CONSTANT)
    diagonal = c * cell * float(np.sum(np.abs(a) ** 2)) * float(np.sum(np.abs(b) ** 2))
    pairing = np.outer(a * np.conj(b), b * np.conj(a))
    cross = complex(c * cell * np.sum(pairing))
    norms = float(np.sum(np.abs(a) ** 2) * np.sum(np.abs(b) ** 2)) * cell
    # pairs with xi1 + xi2 = 0 or xi1 = xi2 carry a double zero of the resonance function
    modes = grid.modes
    degenerate = int(np.count_nonzero((modes[:, None] + modes[None, :] == 0) | (modes[:, None] == modes[None, :])))
    return Lemma3Terms(
        diagonal=diagonal,
        cross=cross,
        cross_modulus=abs(cross),
        value=diagonal + cross.real,
        bound=2.0 * c * norms,
        degenerate_points=degenerate,
    )


def lemma3_closed_form(u1, u2):
    """Exact value of ||I^(1/2) I_-^(1/2)(U u1, U u2)||^2 in L^2_xt after the delta collapse."""
    return lemma3_terms(u1, u2).value


QUADRATURE_REFINEMENTS = 3
_ALIAS_THRESHOLD = 1e-10
_ALIAS_MARGIN = 0.75


def _refined(u):
    """The same datum sampled at half the frequency spacing, by zero padding in x."""
    grid = u.grid
    values = to_physical(SpectralField(grid, u.coeffs)).coeffs
    scale = max(float(np.max(np.abs(values))), 1e-300)
    edge = max(abs(values[0]), abs(values[-1]))
    if edge > _ALIAS_THRESHOLD * scale:
        raise ResolutionError(
            f"datum is {edge / scale:.1e} of its peak at |x| = {grid.half_length:.3g}; zero padding would cut it"
        )
    fine = Grid1D(2.0 * grid.half_length, 2 * grid.n_modes, grid.representation)
    padded = np.zeros(fine.n_modes, dtype=complex)
    start = grid.n_modes // 2
    padded[start:start + grid.n_modes] = values
    return SpectralField(fine, to_frequency(SpectralField(fine, padded, layout=PHYSICAL)).coeffs)


def _window_integral(amplitudes, frequencies, window):
    """int_{-T}^{T} |sum_j a_j exp(-i w_j t)|^2 dt, exact pair by pair."""
    differences = frequencies[:, None] - frequencies[None, :]
    kernel = 2.0 * window * np.sinc(differences * (window / np.pi))
    return float(np.real(np.vdot(amplitudes, kernel @ amplitudes)))


def _quadrature_rows(u1, u2, tail_tolerance, prune):
    grid = u1.grid
    n, half, dxi = grid.n_modes, grid.n_modes // 2, grid.dxi
    xi = grid.xi
    a, b = u1.coeffs, u2.coeffs
    peak = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-300)

    rows = np.zeros(n)
    unsettled = []
    for k in range(n):
        if k == half:
            continue
        first = np.arange(n)
        second = k - first + half
        valid = (second >= 0) & (second < n)
        first, second = first[valid], second[valid]
        xi1, xi2 = xi[first], xi[second]
        amplitudes = np.abs(xi1 - xi2) ** 0.5 * a[first] * b[second] * dxi / _SQRT_2PI
        magnitude = np.abs(amplitudes)
        keep = magnitude > prune * peak ** 2
        if not np.any(keep):
            continue
        amplitudes, magnitude, xi1, xi2 = amplitudes[keep], magnitude[keep], xi1[keep], xi2[keep]
        frequencies = 3.0 * xi[k] * xi1 * xi2

        # the xi1 sum tracks the integral while the phase rate 3 |xi| |xi1 - xi2| t stays below 2 pi / dxi
        carried = magnitude > _ALIAS_THRESHOLD * np.max(magnitude)
        spread = max(float(np.max(np.abs(xi1 - xi2)[carried])), dxi)
        window = _ALIAS_MARGIN * 2.0 * np.pi / (3.0 * abs(xi[k]) * dxi * spread)

        total = _window_integral(amplitudes, frequencies, window)
        inner = _window_integral(amplitudes, frequencies, 0.5 * window)
        rows[k] = abs(xi[k]) * total
        if abs(total - inner) > tail_tolerance * abs(total):
            unsettled.append(k)

    rows[half] = (4.0 * (rows[half + 1] + rows[half - 1]) - (rows[half + 2] + rows[half - 2])) / 6.0
    floor = 1e-8 * float(np.max(np.abs(rows)))
    unsettled = [k for k in unsettled if abs(rows[k]) > floor]
    return float(dxi * np.sum(rows)), len(unsettled)


def lemma3_quadrature(u1, u2, tail_tolerance=1e-4, prune=1e-14, refinements=QUADRATURE_REFINEMENTS):
    """
    Brute-force (xi1, xi, t) quadrature of ||I^(1/2) I_-^(1/2)(U u1, U u2)||^2 in L^2_xt.

    Each output frequency integrates the time window [-T, T] exactly, with T held
    where the sum over xi1 still resolves the phase 3 xi xi1 xi2 t. A row has
    settled when the outer half of its window adds less than tail_tolerance; while
    any row has not, the frequency spacing is halved by zero padding the data in x.
    The xi = 0 row has weight |xi| = 0 against a non-decaying integrand and is
    filled by symmetric extrapolation of its smooth neighbours.
    """
    _require_quadrature_pair(u1, u2)
    for level in range(refinements + 1):
        value, unsettled = _quadrature_rows(u1, u2, tail_tolerance, prune)
        if not unsettled:
            return value
        if level < refinements:
            logger.debug("lemma3 quadrature: %d rows unsettled at %d modes, halving dxi", unsettled, u1.grid.n_modes)
            u1, u2 = _refined(u1), _refined(u2)
    message = f"lemma3 quadrature: {unsettled} rows still unsettled after {refinements} refinements"
    logger.warning(message)
    warnings.warn(message, ResolutionWarning, stacklevel=2)
    return value
