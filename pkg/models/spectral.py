import logging
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DomainError, LayoutError, ParameterError, RealityError, ResolutionWarning, ShapeError

logger = logging.getLogger(__name__)

QUADRATURE = "quadrature"
PERIODIC = "periodic-fft"

PHYSICAL = "physical"
FREQUENCY = "frequency"
MIXED = "mixed"

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def bracket(values):
    """Japanese bracket <v> = (1 + v^2)^(1/2)."""
    return np.sqrt(1.0 + np.square(values))


def reflect(coeffs, axis=0):
    """Samples at -k along `axis`; the Nyquist mode -N/2 is its own partner."""
    return np.roll(np.flip(coeffs, axis=axis), 1, axis=axis)


@dataclass(frozen=True)
class Grid1D:
    half_length: float
    n_modes: int
    representation: str = QUADRATURE

    def __post_init__(self):
        if not self.half_length > 0:
            raise ParameterError(f"half_length must be positive, got {self.half_length}")
        if self.n_modes < 8 or self.n_modes % 2:
            raise ParameterError(f"n_modes must be even and >= 8, got {self.n_modes}")
        if self.representation not in (QUADRATURE, PERIODIC):
            raise ParameterError(f"unknown representation {self.representation!r}")

    @property
    def dxi(self):
        return np.pi / self.half_length

    @property
    def dx(self):
        return 2.0 * self.half_length / self.n_modes

    @cached_property
    def modes(self):
        return np.arange(-self.n_modes // 2, self.n_modes // 2)

    @cached_property
    def xi(self):
        return self.modes * self.dxi

    @cached_property
    def x(self):
        return -self.half_length + np.arange(self.n_modes) * self.dx

    @cached_property
    def weights(self):
        # one uniform dxi cell per mode
        return np.full(self.n_modes, self.dxi)

    @property
    def xi_max(self):
        return self.n_modes // 2 * self.dxi

    @property
    def zero_index(self):
        return self.n_modes // 2

    def index_of_mode(self, k):
        return int(k) + self.n_modes // 2

    def with_representation(self, representation):
        return Grid1D(self.half_length, self.n_modes, representation)


@dataclass(frozen=True)
class SpaceTimeGrid:
    space: Grid1D
    n_times: int
    t_lo: float
    t_hi: float

    def __post_init__(self):
        if not self.t_hi > self.t_lo:
            raise ParameterError(f"time window [{self.t_lo}, {self.t_hi}] is empty")
        if self.n_times < 8 or self.n_times % 2:
            raise ParameterError(f"n_times must be even and >= 8, got {self.n_times}")

    @classmethod
    def centered(cls, space, t_half, n_times):
        return cls(space, n_times, -t_half, t_half)

    @property
    def shape(self):
        return (self.space.n_modes, self.n_times)

    @property
    def dt(self):
        return (self.t_hi - self.t_lo) / self.n_times

    @property
    def dtau(self):
        return 2.0 * np.pi / (self.t_hi - self.t_lo)

    @cached_property
    def times(self):
        return self.t_lo + np.arange(self.n_times) * self.dt

    @cached_property
    def taus(self):
        return np.arange(-self.n_times // 2, self.n_times // 2) * self.dtau

    def index_of(self, t):
        """Index of time node t; raises if t is not a node."""
        j = int(round((t - self.t_lo) / self.dt))
        if j < 0 or j >= self.n_times or abs(self.times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise ParameterError(f"t = {t} is not a node of the time grid")
        return j


def _check_array(coeffs, shape):
    array = np.array(coeffs, dtype=complex)
    if array.shape != shape:
        raise ShapeError(f"expected coefficient array of shape {shape}, got {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid1D
    coeffs: np.ndarray
    real_flag: bool = False
    layout: str = FREQUENCY

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _check_array(self.coeffs, (self.grid.n_modes,)))
        if self.layout not in (PHYSICAL, FREQUENCY):
            raise LayoutError(f"a 1-D field is physical or frequency, not {self.layout!r}")
        if self.real_flag:
            self._check_real()

    def _check_real(self):
        scale = max(np.max(np.abs(self.coeffs)), 1e-300)
        if self.layout == PHYSICAL:
            residue = np.max(np.abs(self.coeffs.imag))
        else:
            residue = np.max(np.abs(self.coeffs - np.conj(reflect(self.coeffs))))
        if residue > 1e-12 * scale:
            raise RealityError(f"field flagged real has a non-real residue {residue:.3e}")

    @classmethod
    def from_function(cls, grid, profile, real_flag=False):
        """Sample the frequency profile at the grid frequencies."""
        return cls(grid, profile(grid.xi), real_flag=real_flag)

    @classmethod
    def from_physical(cls, grid, values, real_flag=False):
        return to_frequency(cls(grid, values, real_flag=real_flag, layout=PHYSICAL))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n_modes), real_flag=True)

    def with_coeffs(self, coeffs, real_flag=None):
        return SpectralField(self.grid, coeffs, self.real_flag if real_flag is None else real_flag, self.layout)

    def conj(self):
        """Complex conjugate of the represented function."""
        if self.layout == PHYSICAL:
            return self.with_coeffs(np.conj(self.coeffs))
        return self.with_coeffs(np.conj(reflect(self.coeffs)))

    def __add__(self, other):
        _require_same_grid(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs, self.real_flag and other.real_flag)

    def __sub__(self, other):
        _require_same_grid(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs, self.real_flag and other.real_flag)

    def __mul__(self, scalar):
        real = self.real_flag and np.isreal(scalar)
        return self.with_coeffs(self.coeffs * scalar, real)

    __rmul__ = __mul__

    def physical_values(self):
        return self.coeffs if self.layout == PHYSICAL else to_physical(self).coeffs


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Samples on the product grid; axis 0 is space (x or xi), axis 1 is time (t or tau)."""

    grid: SpaceTimeGrid
    coeffs: np.ndarray
    layout: str = MIXED

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _check_array(self.coeffs, self.grid.shape))
        if self.layout not in (PHYSICAL, FREQUENCY, MIXED):
            raise LayoutError(f"unknown layout {self.layout!r}")

    @classmethod
    def from_slices(cls, grid, slices):
        """Stack per-time SpectralFields (frequency layout) into a mixed field."""
        return cls(grid, np.stack([s.coeffs for s in slices], axis=1), MIXED)

    def with_coeffs(self, coeffs, layout=None):
        return SpaceTimeField(self.grid, coeffs, self.layout if layout is None else layout)

    def time_slice(self, j):
        if self.layout != MIXED:
            raise LayoutError("time slices are taken from the mixed (xi, t) layout")
        return SpectralField(self.grid.space, self.coeffs[:, j])

    def __add__(self, other):
        _require_same_grid(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        _require_same_grid(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__


def _require_same_grid(a, b):
    if a.grid != b.grid:
        raise ShapeError("fields live on different grids")
    if a.layout != b.layout:
        raise LayoutError(f"cannot combine {a.layout} and {b.layout} layouts")


# Unitary transform on a uniform periodic grid:
#   hat(f)(w_m) = d/sqrt(2 pi) * sum_j exp(-i (o + j d) w_m) f_j,  w_m = m * 2 pi / (n d)

def _forward(values, axis, spacing, origin, freqs):
    n = values.shape[axis]
    shape = [1] * values.ndim
    shape[axis] = n
    phase = np.exp(-1j * origin * freqs).reshape(shape)
    spectrum = np.fft.fftshift(np.fft.fft(values, axis=axis), axes=axis)
    return spacing / _SQRT_2PI * phase * spectrum


def _inverse(values, axis, spacing, origin, freqs):
    n = values.shape[axis]
    shape = [1] * values.ndim
    shape[axis] = n
    phase = np.exp(1j * origin * freqs).reshape(shape)
    dual = 2.0 * np.pi / (n * spacing)
    return dual * n / _SQRT_2PI * np.fft.ifft(np.fft.ifftshift(values * phase, axes=axis), axis=axis)


def _space_forward(values, grid):
    return _forward(values, 0, grid.dx, -grid.half_length, grid.xi)


def _space_inverse(values, grid):
    return _inverse(values, 0, grid.dx, -grid.half_length, grid.xi)


def _time_forward(values, grid):
    return _forward(values, 1, grid.dt, grid.t_lo, grid.taus)


def _time_inverse(values, grid):
    return _inverse(values, 1, grid.dt, grid.t_lo, grid.taus)


def to_frequency(field):
    """Physical (or mixed) samples to frequency samples."""
    if isinstance(field, SpectralField):
        if field.layout != PHYSICAL:
            raise LayoutError("to_frequency expects a physical-layout field")
        return SpectralField(field.grid, _space_forward(field.coeffs, field.grid), field.real_flag, FREQUENCY)
    if field.layout == PHYSICAL:
        coeffs = _time_forward(_space_forward(field.coeffs, field.grid.space), field.grid)
    elif field.layout == MIXED:
        coeffs = _time_forward(field.coeffs, field.grid)
    else:
        raise LayoutError("to_frequency expects a physical or mixed layout field")
    return field.with_coeffs(coeffs, FREQUENCY)


def to_physical(field):
    """Frequency (or mixed) samples to physical samples."""
    if isinstance(field, SpectralField):
        if field.layout != FREQUENCY:
            raise LayoutError("to_physical expects a frequency-layout field")
        values = _space_inverse(field.coeffs, field.grid)
        if field.real_flag:
            values = values.real
        return SpectralField(field.grid, values, field.real_flag, PHYSICAL)
    if field.layout == FREQUENCY:
        coeffs = _space_inverse(_time_inverse(field.coeffs, field.grid), field.grid.space)
    elif field.layout == MIXED:
        coeffs = _space_inverse(field.coeffs, field.grid.space)
    else:
        raise LayoutError("to_physical expects a frequency or mixed layout field")
    return field.with_coeffs(coeffs, PHYSICAL)


def to_mixed(field):
    """(x, t) or (xi, tau) samples to the (xi, t) layout."""
    if field.layout == PHYSICAL:
        return field.with_coeffs(_space_forward(field.coeffs, field.grid.space), MIXED)
    if field.layout == FREQUENCY:
        return field.with_coeffs(_time_inverse(field.coeffs, field.grid), MIXED)
    raise LayoutError("field is already in the mixed layout")


BESSEL = "bessel"
RIESZ = "riesz"
AIRY = "airy"
LAMBDA = "lambda"


@dataclass(frozen=True)
class MultiplierSpec:
    """
    Fourier multiplier: bessel(s) = <xi>^s, riesz(s) = |xi|^s, airy(t) = exp(i t xi^3),
    lambda(b) = <tau - xi^3>^b.

    zero_mode only matters for riesz with a negative order: None means the zero
    mode must be absent from the field, "drop" zeroes it.
    """

    kind: str
    parameter: float
    zero_mode: str = None

    def __post_init__(self):
        if self.kind not in (BESSEL, RIESZ, AIRY, LAMBDA):
            raise ParameterError(f"unknown multiplier kind {self.kind!r}")
        if self.zero_mode not in (None, "drop"):
            raise ParameterError(f"unknown zero-mode policy {self.zero_mode!r}")

    @classmethod
    def bessel(cls, s):
        return cls(BESSEL, float(s))

    @classmethod
    def riesz(cls, s, zero_mode=None):
        return cls(RIESZ, float(s), zero_mode)

    @classmethod
    def airy(cls, t):
        return cls(AIRY, float(t))

    @classmethod
    def lam(cls, b):
        return cls(LAMBDA, float(b))

    def space_symbol(self, xi):
        if self.kind == BESSEL:
            return bracket(xi) ** self.parameter
        if self.kind == AIRY:
            return np.exp(1j * self.parameter * xi ** 3)
        if self.kind == RIESZ:
            s = self.parameter
            if s == 0:
                return np.ones_like(xi)
            symbol = np.zeros_like(xi, dtype=float)
            nonzero = xi != 0
            symbol[nonzero] = np.abs(xi[nonzero]) ** s
            return symbol
        raise ParameterError("lambda(b) is a space-time multiplier")


def _check_zero_mode(coeffs, spec, space_grid):
    if spec.kind != RIESZ or spec.parameter >= 0 or spec.zero_mode == "drop":
        return
    zero_row = coeffs[space_grid.zero_index]
    if np.any(zero_row != 0):
        raise DomainError(f"riesz({spec.parameter}) is singular at xi = 0 and the zero mode is populated")


def apply_multiplier(field, spec):
    """Pointwise multiplication of the coefficients by the symbol of `spec`."""
    if field.layout == PHYSICAL:
        raise LayoutError("multipliers act on frequency or mixed layout fields")
    if isinstance(field, SpectralField):
        if spec.kind == LAMBDA:
            raise LayoutError("lambda(b) needs a space-time field")
        _check_zero_mode(field.coeffs, spec, field.grid)
        symbol = spec.space_symbol(field.grid.xi)
        # the Nyquist mode has no partner, airy keeps reality only when it is empty
        real = field.real_flag and (spec.kind != AIRY or field.coeffs[0] == 0)
        return SpectralField(field.grid, field.coeffs * symbol, real, field.layout)

    space = field.grid.space
    if spec.kind != LAMBDA:
        _check_zero_mode(field.coeffs, spec, space)
        return field.with_coeffs(field.coeffs * spec.space_symbol(space.xi)[:, None])

    if field.layout == FREQUENCY:
        weight = bracket(field.grid.taus[None, :] - space.xi[:, None] ** 3) ** spec.parameter
        return field.with_coeffs(field.coeffs * weight)
    # mixed layout: U(t) <tau>^b U(-t), exact under time translation of the phase
    lifted = _time_forward(interaction_picture(field).coeffs, field.grid)
    lifted = lifted * bracket(field.grid.taus)[None, :] ** spec.parameter
    back = field.with_coeffs(_time_inverse(lifted, field.grid), MIXED)
    return interaction_picture(back, inverse=True)


def airy_flow(u, grid):
    """Free Airy evolution exp(i t xi^3) u_hat on the time nodes of `grid` (mixed layout)."""
    if u.layout != FREQUENCY:
        u = to_frequency(u)
    if u.grid != grid.space:
        raise ShapeError("initial datum and space-time grid disagree")
    phase = np.exp(1j * np.outer(grid.space.xi ** 3, grid.times))
    return SpaceTimeField(grid, u.coeffs[:, None] * phase, MIXED)


def interaction_picture(field, inverse=False):
    """U(-t)F(t) slice by slice (or U(t)F(t) with inverse=True)."""
    if field.layout != MIXED:
        raise LayoutError("the interaction picture is taken in the mixed layout")
    sign = 1.0 if inverse else -1.0
    phase = np.exp(sign * 1j * np.outer(field.grid.space.xi ** 3, field.grid.times))
    return field.with_coeffs(field.coeffs * phase)


def duhamel_error_estimate(F):
    """
    Bound on the composite trapezoid error of the retarded integral,
    (|t|_max / 12) * max |second difference| of the interaction-picture integrand,
    relative to the size of the integral.
    """
    integrand = interaction_picture(F).coeffs
    if F.grid.n_times < 3:
        return 0.0
    second = integrand[:, 2:] - 2.0 * integrand[:, 1:-1] + integrand[:, :-2]
    span = max(abs(F.grid.t_lo), abs(F.grid.t_hi))
    bound = span / 12.0 * np.max(np.abs(second)) if second.size else 0.0
    scale = span * np.max(np.abs(integrand))
    return float(bound / scale) if scale > 0 else 0.0


def duhamel_integral(F, tolerance=None):
    """
    Retarded integral v(t) = int_0^t U(t - t') F(t') dt' on the time nodes of F.

    Composite trapezoid in t' on the interaction-picture integrand U(-t')F(t');
    t = 0 must be a node, negative times integrate backwards. v(0) = 0 exactly.
    """
    if F.layout != MIXED:
        raise LayoutError("duhamel_integral expects a mixed (xi, t) layout field")
    grid = F.grid
    origin = grid.index_of(0.0)
    integrand = interaction_picture(F).coeffs

    accumulated = np.zeros_like(integrand)
    accumulated[:, origin:] = cumulative_trapezoid(integrand[:, origin:], dx=grid.dt, axis=1, initial=0)
    if origin > 0:
        backwards = cumulative_trapezoid(integrand[:, origin::-1], dx=grid.dt, axis=1, initial=0)
        accumulated[:, :origin + 1] = -backwards[:, ::-1]
    accumulated[:, origin] = 0.0

    if tolerance is not None:
        estimate = duhamel_error_estimate(F)
        if estimate > tolerance:
            message = f"time step {grid.dt:.3e} too coarse: trapezoid error estimate {estimate:.2e} > {tolerance:.2e}"
            logger.warning(message)
            warnings.warn(message, ResolutionWarning, stacklevel=2)

    return interaction_picture(F.with_coeffs(accumulated), inverse=True)


def time_spectrum(values, grid):
    """Unitary transform in t of samples on the time nodes of `grid` (last axis)."""
    values = np.asarray(values, dtype=complex)
    return _forward(values, values.ndim - 1, grid.dt, grid.t_lo, grid.taus)
