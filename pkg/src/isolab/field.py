"""Periodic grid, fields, and spectral calculus on the unit circle.

Fields live on a uniform N-point grid over [0, 1). All integrals are
uniform Riemann sums, which are spectrally accurate for smooth periodic
integrands; derivatives act mode-by-mode in Fourier space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GridMismatchError(ValueError):
    """Two fields on different grids were combined."""


class NonFiniteFieldError(ValueError):
    """A field sample is NaN or infinite."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid x_j = j/n_points over one period."""

    n_points: int

    def __post_init__(self):
        if self.n_points < 16 or self.n_points % 2 != 0:
            raise ValueError(
                f"n_points must be even and >= 16, got {self.n_points}"
            )

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_points) / self.n_points

    @property
    def modes(self) -> np.ndarray:
        """Integer Fourier mode numbers in FFT order."""
        n = self.n_points
        return np.fft.fftfreq(n, d=1.0 / n)


@dataclass(frozen=True)
class PeriodicField:
    """Complex samples of a period-one function on a Grid."""

    grid: Grid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.samples, dtype=complex)
        if arr.shape != (self.grid.n_points,):
            raise ValueError(
                f"expected {self.grid.n_points} samples, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr.view(float))):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise NonFiniteFieldError(f"non-finite sample at index {bad}")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    # -- arithmetic (same-grid elementwise and scalar) ------------------

    def _check(self, other: "PeriodicField"):
        if other.grid.n_points != self.grid.n_points:
            raise GridMismatchError(
                f"grids differ: {self.grid.n_points} vs {other.grid.n_points}"
            )

    def __add__(self, other):
        self._check(other)
        return PeriodicField(self.grid, self.samples + other.samples)

    def __sub__(self, other):
        self._check(other)
        return PeriodicField(self.grid, self.samples - other.samples)

    def __mul__(self, c):
        if isinstance(c, PeriodicField):
            self._check(c)
            return PeriodicField(self.grid, self.samples * c.samples)
        return PeriodicField(self.grid, self.samples * c)

    __rmul__ = __mul__

    def __neg__(self):
        return PeriodicField(self.grid, -self.samples)

    def conj(self) -> "PeriodicField":
        return PeriodicField(self.grid, np.conj(self.samples))


def make_field(grid: Grid, generator) -> PeriodicField:
    """Sample generator(x_j) on the grid; rejects non-finite output."""
    vals = np.array([complex(generator(xj)) for xj in grid.x])
    if not np.all(np.isfinite(vals.view(float))):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NonFiniteFieldError(
            f"generator produced non-finite value at sample {bad} "
            f"(x={bad / grid.n_points})"
        )
    return PeriodicField(grid, vals)


def fourier_coefficients(u: PeriodicField) -> np.ndarray:
    """Coefficients c_k with u(x) = sum_k c_k exp(2 pi i k x), FFT order."""
    return np.fft.fft(u.samples) / u.grid.n_points


def field_from_coefficients(grid: Grid, coeffs: np.ndarray) -> PeriodicField:
    return PeriodicField(grid, np.fft.ifft(coeffs * grid.n_points))


def spectral_derivative(u: PeriodicField, order: int = 1) -> PeriodicField:
    """j-th derivative via multiplication by (2 pi i k)^j in Fourier space.

    The unmatched Nyquist mode is zeroed for odd orders (it has no
    conjugate partner on an even grid).
    """
    if order < 0:
        raise ValueError("derivative order must be nonnegative")
    if order == 0:
        return u
    n = u.grid.n_points
    k = u.grid.modes
    mult = (2j * np.pi * k) ** order
    if order % 2 == 1:
        mult[n // 2] = 0.0
    return field_from_coefficients(u.grid, fourier_coefficients(u) * mult)


def mean_zero_part(u: PeriodicField) -> PeriodicField:
    return PeriodicField(u.grid, u.samples - np.mean(u.samples))


def periodic_antiderivative(u: PeriodicField) -> np.ndarray:
    """Samples of F(x) = integral of u from 0 to x.

    The mean mode contributes mean(u)*x; the oscillatory modes divide by
    2 pi i k. Spectrally accurate for smooth periodic u (F itself is not
    periodic unless mean(u) = 0, so plain samples are returned).
    """
    n = u.grid.n_points
    c = fourier_coefficients(u)
    k = u.grid.modes
    osc = np.zeros_like(c)
    nz = k != 0
    osc[nz] = c[nz] / (2j * np.pi * k[nz])
    wave = np.fft.ifft(osc * n)
    return c[0] * u.grid.x + (wave - wave[0])


# -- pairings and norms -------------------------------------------------

#: imaginary residue above this (relative) is a bug in a real-valued pairing
_IMAG_TOL = 1e-12


def real_pairing(u: PeriodicField, v: PeriodicField) -> float:
    """<u, v> = integral(u conj(v) + v conj(u)) dx; real by construction."""
    u._check(v)
    z = np.mean(u.samples * np.conj(v.samples) + v.samples * np.conj(u.samples))
    scale = max(1.0, abs(z))
    if abs(z.imag) > _IMAG_TOL * scale:
        raise ArithmeticError(
            f"real pairing has imaginary residue {z.imag:.3e}"
        )
    return float(z.real)


def norm(u: PeriodicField, which: str = "l2", order=None) -> float:
    """Norm of a field: 'l2', 'sup', 'sobolev' (order=n), or 'lp' (order=p)."""
    if which == "l2":
        return float(np.sqrt(np.mean(np.abs(u.samples) ** 2)))
    if which == "sup":
        return float(np.max(np.abs(u.samples)))
    if which == "sobolev":
        n = int(order)
        if n < 0:
            raise ValueError("sobolev order must be >= 0")
        total = 0.0
        for j in range(n + 1):
            total += norm(spectral_derivative(u, j), "l2") ** 2
        return float(np.sqrt(total))
    if which == "lp":
        p = float(order)
        if p < 1:
            raise ValueError(f"Lp norm needs p >= 1, got {p}")
        if math.isinf(p):
            return norm(u, "sup")
        return float(np.mean(np.abs(u.samples) ** p) ** (1.0 / p))
    raise ValueError(f"unknown norm kind {which!r}")


def l2_norm(u: PeriodicField) -> float:
    return norm(u, "l2")


def sup_norm(u: PeriodicField) -> float:
    return norm(u, "sup")


# -- interpolation inequalities -----------------------------------------


@dataclass(frozen=True)
class InterpolationBound:
    """Both sides of |D^j u|_p <= const * ||D^k u||^a * ||u||^(1-a).

    For the sup-norm (p=inf, j=0, k=1) and L6 (p=6, j=0, k=1) special
    cases the constant is sqrt(2) and 2^(1/3) respectively, and a
    constant-safe variant that tolerates a nonzero mean is reported
    alongside (safe_lhs, safe_rhs): |u|_inf^2 <= ||u||^2 + 2||u|| ||u_x||.
    """

    j: int
    k: int
    p: float
    exponent: float
    constant: float
    lhs: float
    rhs: float
    special: str | None = None
    safe_lhs: float | None = None
    safe_rhs: float | None = None

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12) + 1e-300


def interpolation_report(u: PeriodicField, j: int, k: int, p: float) -> InterpolationBound:
    """Evaluate the derivative interpolation inequality for the field u.

    The strict form fails for nonzero constants, so callers that assert
    lhs <= rhs should pass mean-zero fields (see safe_lhs/safe_rhs).
    """
    p = float(p)
    if not ((1 <= j < k) or (j == 0 and k == 1)):
        raise ValueError(f"need 1 <= j < k (or the j=0, k=1 endpoint cases), got j={j}, k={k}")
    if p < 2:
        raise ValueError(f"need p >= 2, got {p}")
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    a = (j + 0.5 - inv_p) / k
    if not (0 < a <= 1):
        raise ValueError(f"interpolation exponent a={a:.4g} outside (0, 1]")
    constant = math.sqrt(2.0) if math.isinf(p) else 2.0 ** ((p - 2.0) / (2.0 * p))

    dju = spectral_derivative(u, j)
    dku = spectral_derivative(u, k)
    lhs = norm(dju, "sup") if math.isinf(p) else norm(dju, "lp", p)
    rhs = constant * norm(dku, "l2") ** a * norm(u, "l2") ** (1 - a)

    special = None
    safe_lhs = safe_rhs = None
    if j == 0 and k == 1:
        if math.isinf(p):
            special = "sup"
            ux = spectral_derivative(u, 1)
            safe_lhs = norm(u, "sup") ** 2
            safe_rhs = norm(u, "l2") ** 2 + 2 * norm(u, "l2") * norm(ux, "l2")
        elif p == 6:
            special = "l6"
    return InterpolationBound(
        j=j, k=k, p=p, exponent=a, constant=constant, lhs=lhs, rhs=rhs,
        special=special, safe_lhs=safe_lhs, safe_rhs=safe_rhs,
    )
