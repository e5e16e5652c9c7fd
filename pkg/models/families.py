"""
Random band-limited test data and the smooth time cutoff.

Members are kept as analytic frequency profiles and only sampled when realized
on a grid, so the same member can be evaluated on a refined grid or dilated.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, RangeError
from .spectral import FREQUENCY, MIXED, SpaceTimeField, SpectralField

GAUSSIAN = "gaussian"
BUMP = "bump"


def _smooth_step(y):
    """C-infinity step: 0 for y <= 0, 1 for y >= 1."""
    y = np.asarray(y, dtype=float)
    left = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    right = np.where(y < 1, np.exp(-1.0 / np.where(y < 1, 1.0 - y, 1.0)), 0.0)
    return left / (left + right)


@dataclass(frozen=True)
class Cutoff:
    """psi(t) = 1 on [-plateau, plateau], 0 for |t| >= support, smooth in between."""

    plateau: float = 1.0
    support: float = 1.9

    def __post_init__(self):
        if not 0 < self.plateau < self.support < 2:
            raise ParameterError(
                f"cutoff needs 0 < plateau < support < 2, got ({self.plateau}, {self.support})"
            )

    def __call__(self, t):
        y = (np.abs(np.asarray(t, dtype=float)) - self.plateau) / (self.support - self.plateau)
        return 1.0 - _smooth_step(y)

    def dilated(self, delta):
        """psi_delta(t) = psi(t / delta)."""
        if not 0 < delta <= 1:
            raise ParameterError(f"delta must lie in (0, 1], got {delta}")
        return lambda t: self(np.asarray(t, dtype=float) / delta)


@dataclass(frozen=True)
class FamilySpec:
    count: int = 10
    bumps: int = 2
    band: float = 0.5
    width_range: tuple = (0.08, 0.125)
    profile: str = GAUSSIAN
    real: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.count < 1 or self.bumps < 1:
            raise ParameterError("a family needs at least one member with one bump")
        if not 0 < self.band <= 0.5:
            raise ParameterError(f"band must lie in (0, 1/2] of the grid, got {self.band}")
        if not 0 < self.width_range[0] <= self.width_range[1] <= 0.125:
            raise ParameterError(f"bump widths must lie in (0, 1/8] of the radius, got {self.width_range}")
        if self.profile not in (GAUSSIAN, BUMP):
            raise ParameterError(f"unknown family profile {self.profile!r}")


def _bump(y):
    inside = np.abs(y) < 1
    safe = np.where(inside, y, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe ** 2)), 0.0)


@dataclass(frozen=True)
class Member:
    """Sum of bumps in frequency: sum_j amp_j exp(i phase_j) g((xi - c_j) / w_j)."""

    centers: tuple
    widths: tuple
    phases: tuple
    amplitudes: tuple
    profile: str = GAUSSIAN
    real: bool = True
    scale: float = 1.0

    @property
    def reach(self):
        """Frequency radius outside which the profile is negligible."""
        return self.scale * max(abs(c) + 5.0 * w for c, w in zip(self.centers, self.widths))

    @property
    def spatial_extent(self):
        return 4.5 / (self.scale * min(self.widths))

    def _one_sided(self, xi):
        total = np.zeros_like(xi, dtype=complex)
        for c, w, phase, amp in zip(self.centers, self.widths, self.phases, self.amplitudes):
            y = (xi - c) / w
            shape = np.exp(-0.5 * y ** 2) if self.profile == GAUSSIAN else _bump(y / 5.0)
            total += amp * np.exp(1j * phase) * shape
        return total

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float) / self.scale
        values = self._one_sided(xi)
        if self.real:
            values = values + np.conj(self._one_sided(-xi))
        return values / np.sqrt(self.scale)

    def dilate(self, lam):
        """u(x) -> lam^(1/2) u(lam x), i.e. u_hat(xi) -> lam^(-1/2) u_hat(xi / lam)."""
        if lam <= 0:
            raise ParameterError(f"dilation must be positive, got {lam}")
        return Member(self.centers, self.widths, self.phases, self.amplitudes, self.profile, self.real, self.scale * lam)

    def check_fits(self, grid, band=0.5):
        if self.reach > band * grid.xi_max + 1e-12:
            raise RangeError(
                f"dilated data reaches |xi| = {self.reach:.3g} beyond the resolvable band {band * grid.xi_max:.3g}"
            )
        if self.spatial_extent > grid.half_length:
            raise RangeError(
                f"dilated data spreads over |x| ~ {self.spatial_extent:.3g} beyond the half length {grid.half_length}"
            )

    def realize(self, grid, band=0.5):
        self.check_fits(grid, band)
        coeffs = np.array(self(grid.xi))
        coeffs[np.abs(grid.xi) > band * grid.xi_max] = 0.0
        coeffs[grid.zero_index] = 0.0
        return SpectralField(grid, coeffs, real_flag=self.real)


@dataclass(frozen=True)
class SpaceTimeMember:
    """A(xi) exp(i t xi^3) b(t) with b(t) = exp(i omega t) exp(-t^2 / (2 T0^2)): data near the dispersion surface."""

    space: Member
    omega: float
    duration: float
    dispersive: bool = True

    def dilate(self, lam):
        return SpaceTimeMember(self.space.dilate(lam), self.omega * lam ** 3, self.duration / lam ** 3, self.dispersive)

    def envelope(self, times):
        return np.exp(1j * self.omega * times) * np.exp(-0.5 * (times / self.duration) ** 2)

    def check_fits(self, grid, band=0.5):
        self.space.check_fits(grid.space, band)
        if 6.0 * self.duration > min(-grid.t_lo, grid.t_hi):
            raise RangeError(f"time profile of duration {self.duration:.3g} does not decay inside the window")

    def realize(self, grid, band=0.5):
        self.check_fits(grid, band)
        amplitude = self.space.realize(grid.space, band).coeffs
        coeffs = amplitude[:, None] * self.envelope(grid.times)[None, :]
        if self.dispersive:
            coeffs = coeffs * np.exp(1j * np.outer(grid.space.xi ** 3, grid.times))
        return SpaceTimeField(grid, coeffs, MIXED)


@dataclass
class Family:
    spec: FamilySpec
    members: list = field(default_factory=list)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, index):
        return self.members[index]


def _draw_member(rng, spec, radius):
    widths, centers = [], []
    for _ in range(spec.bumps):
        w = radius * rng.uniform(*spec.width_range)
        lo, hi = 3.0 * w, radius - 5.0 * w
        if hi <= lo:
            hi = lo
        c = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
        widths.append(float(w))
        centers.append(float(c))
    phases = tuple(float(p) for p in rng.uniform(0, 2 * np.pi, spec.bumps))
    amplitudes = tuple(float(a) for a in rng.uniform(0.5, 1.5, spec.bumps))
    return Member(tuple(centers), tuple(widths), phases, amplitudes, spec.profile, spec.real)


def make_family(grid, spec, max_dilation=1.0):
    """Seeded family whose members stay inside the band for every dilation up to max_dilation."""
    rng = np.random.default_rng(spec.seed)
    radius = spec.band * grid.xi_max / max(1.0, max_dilation)
    return Family(spec, [_draw_member(rng, spec, radius) for _ in range(spec.count)])


def make_space_time_family(grid, spec, max_dilation=1.0, dispersive=True):
    rng = np.random.default_rng(spec.seed)
    radius = spec.band * grid.space.xi_max / max(1.0, max_dilation)
    window = min(-grid.t_lo, grid.t_hi)
    members = []
    for _ in range(spec.count):
        space = _draw_member(rng, spec, radius)
        duration = window / 6.0 * rng.uniform(0.3, 0.9)
        omega = rng.uniform(-1.0, 1.0) / duration
        members.append(SpaceTimeMember(space, float(omega), float(duration), dispersive))
    return Family(spec, members)


def gaussian_field(grid, center=0.0, width=1.0, real=False):
    """u_hat(xi) = exp(-((xi - center) / width)^2) sampled on the grid."""
    coeffs = np.exp(-((grid.xi - center) / width) ** 2)
    return SpectralField(grid, coeffs, real_flag=real and center == 0.0, layout=FREQUENCY)
