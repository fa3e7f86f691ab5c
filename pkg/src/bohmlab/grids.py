"""Uniform periodic grids and two-component (spinor) wave functions.

Units are dimensionless with hbar = m = 1 throughout.  A grid covers
[x_min, x_max) with n equispaced points x_j = x_min + j*dx; x_max is
identified with x_min, so fields live on a circle.  Wave functions are
stored as two complex component arrays; spinless states simply carry a
zero second component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid1D",
    "SpinorField",
    "Configuration",
    "make_grid",
    "gaussian_packet",
    "plane_wave",
    "inner_product",
    "density",
]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [x_min, x_max).

    Parameters
    ----------
    n : int
        Number of points, a power of two >= 16 (the kinetic step uses an FFT).
    x_min, x_max : float
        Domain bounds, x_min < x_max.
    """

    n: int
    x_min: float
    x_max: float

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise ValueError(f"grid size must be an integer, got {self.n!r}")
        if not _is_power_of_two(int(self.n)) or self.n < 16:
            raise ValueError(f"grid size must be a power of two >= 16, got {self.n}")
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ValueError(
                f"grid bounds must satisfy x_min < x_max, got [{self.x_min}, {self.x_max}]"
            )

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def xs(self) -> np.ndarray:
        """Grid points x_j = x_min + j*dx, j = 0..n-1."""
        return self.x_min + self.dx * np.arange(self.n)

    def wavenumbers(self) -> np.ndarray:
        """FFT-ordered wavenumbers 2*pi*fftfreq(n, dx)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def contains(self, q) -> np.ndarray | bool:
        return (self.x_min <= np.asarray(q)) & (np.asarray(q) < self.x_max)


def make_grid(n: int, x_min: float, x_max: float) -> Grid1D:
    """Build a validated uniform periodic grid."""
    return Grid1D(n=n, x_min=float(x_min), x_max=float(x_max))


def _locked(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpinorField:
    """Two-component complex wave function sampled on a grid.

    Value semantics: component arrays are copied on construction and made
    read-only, so instances are safe to share across workers.  The norm is
    the discrete L2 norm, ||psi||^2 = sum_j (|comp1_j|^2 + |comp2_j|^2) dx.
    """

    grid: Grid1D
    comp1: np.ndarray
    comp2: np.ndarray

    def __post_init__(self) -> None:
        c1 = np.array(self.comp1, dtype=np.complex128, copy=True).reshape(-1)
        c2 = np.array(self.comp2, dtype=np.complex128, copy=True).reshape(-1)
        if c1.shape != (self.grid.n,) or c2.shape != (self.grid.n,):
            raise ValueError(
                f"component arrays must have length {self.grid.n}, "
                f"got {c1.shape[0]} and {c2.shape[0]}"
            )
        object.__setattr__(self, "comp1", _locked(c1))
        object.__setattr__(self, "comp2", _locked(c2))

    def norm_sq(self) -> float:
        return float(np.sum(density(self)) * self.grid.dx)

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def normalize(self) -> "SpinorField":
        """Return the unit-norm rescaling of this field."""
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero field")
        return SpinorField(self.grid, self.comp1 / nrm, self.comp2 / nrm)

    def conjugate(self) -> "SpinorField":
        return SpinorField(self.grid, np.conj(self.comp1), np.conj(self.comp2))


@dataclass(frozen=True)
class Configuration:
    """Actual position of the single particle (same units as the grid)."""

    q: float

    def validate_on(self, grid: Grid1D) -> "Configuration":
        if not (grid.x_min <= self.q < grid.x_max):
            raise ValueError(
                f"position {self.q} outside grid domain [{grid.x_min}, {grid.x_max})"
            )
        return self


def density(psi: SpinorField) -> np.ndarray:
    """Position density |comp1|^2 + |comp2|^2 on the grid points."""
    c1, c2 = psi.comp1, psi.comp2
    return c1.real**2 + c1.imag**2 + c2.real**2 + c2.imag**2


def inner_product(phi: SpinorField, psi: SpinorField) -> complex:
    """Discrete inner product <phi, psi> = sum_j phi_j^dagger psi_j dx.

    Conjugate-linear in the first argument.
    """
    if phi.grid != psi.grid:
        raise ValueError("inner product requires fields on the same grid")
    acc = np.sum(np.conj(phi.comp1) * psi.comp1 + np.conj(phi.comp2) * psi.comp2)
    return complex(acc * phi.grid.dx)


def gaussian_packet(
    grid: Grid1D,
    center: float,
    sigma: float,
    k: float,
    a: complex = 1.0,
    b: complex = 0.0,
) -> SpinorField:
    """Normalized Gaussian wave packet with uniform spinor (a, b).

    Each component is proportional to exp(-(x-center)^2 / (4 sigma^2)) *
    exp(i k x), weighted by the spinor amplitude, and the whole field is
    normalized.  The packet must sit well inside the domain (center +- 5
    sigma within bounds) so periodic images are negligible.
    """
    if not sigma > 0:
        raise ValueError(f"packet width must be positive, got {sigma}")
    a = complex(a)
    b = complex(b)
    if a == 0 and b == 0:
        raise ValueError("spinor amplitudes (a, b) must not both vanish")
    if center - 5 * sigma <= grid.x_min or center + 5 * sigma >= grid.x_max:
        raise ValueError(
            f"packet at {center} with width {sigma} is not well inside "
            f"[{grid.x_min}, {grid.x_max}] (need center +- 5 sigma within bounds)"
        )
    x = grid.xs()
    envelope = np.exp(-((x - center) ** 2) / (4.0 * sigma**2)) * np.exp(1j * k * x)
    return SpinorField(grid, a * envelope, b * envelope).normalize()


def plane_wave(grid: Grid1D, mode: int, a: complex = 1.0, b: complex = 0.0) -> SpinorField:
    """Normalized plane wave exp(i k x) with k = 2*pi*mode/L, uniform spinor."""
    a = complex(a)
    b = complex(b)
    if a == 0 and b == 0:
        raise ValueError("spinor amplitudes (a, b) must not both vanish")
    k = 2.0 * np.pi * mode / grid.length
    wave = np.exp(1j * k * grid.xs())
    amp = 1.0 / np.sqrt(grid.length * (abs(a) ** 2 + abs(b) ** 2))
    return SpinorField(grid, a * amp * wave, b * amp * wave)
