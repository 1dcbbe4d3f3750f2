"""Independent reference computations used to validate the main modules:
a dense Fourier-Galerkin eigensolver for the 2x2 spectral problem, a
central-difference directional derivative, and closed-form constant
potential formulas. These deliberately differ in kind from the
transfer-matrix route so that agreement is evidence, not tautology.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import PeriodicField, fourier_coefficients

#: dense eigensolves are capped at this matrix dimension
MAX_DENSE_DIM = 1024


@dataclass(frozen=True)
class GalerkinResult:
    values: np.ndarray
    reliable: np.ndarray  # False within 3 modes of the truncation edge

    def reliable_values(self) -> np.ndarray:
        return self.values[self.reliable]


def galerkin_eigs(u: PeriodicField, kind: str, n_modes: int, window) -> GalerkinResult:
    """Eigenvalues in the window from a dense mode-space discretization.

    The eigenfunction components are expanded in exp(2 pi i k x)
    (periodic) or exp(i pi (2k+1) x) (antiperiodic), k = -K..K. In both
    bases the operator couples components through the Fourier
    coefficients of u at integer offsets, giving a Hermitian block
    matrix whose spectrum is real.
    """
    if kind not in ("periodic", "antiperiodic"):
        raise ValueError(f"kind must be periodic/antiperiodic, got {kind!r}")
    k = int(n_modes)
    modes = np.arange(-k, k + 1)
    dim = 2 * modes.size
    if dim > MAX_DENSE_DIM:
        raise ValueError(f"dense eigensolve dimension {dim} exceeds {MAX_DENSE_DIM}")
    if kind == "periodic":
        mu = 2.0 * np.pi * modes
    else:
        mu = np.pi * (2.0 * modes + 1.0)

    coeffs = fourier_coefficients(u)
    n = u.grid.n_points

    def u_hat(m: int) -> complex:
        if abs(m) > n // 2:
            return 0.0 + 0.0j
        return complex(coeffs[m % n])

    size = modes.size
    conv = np.empty((size, size), dtype=complex)
    for r in range(size):
        for c in range(size):
            conv[r, c] = u_hat(int(modes[r] - modes[c]))

    h = np.zeros((dim, dim), dtype=complex)
    h[:size, :size] = np.diag(-mu)
    h[size:, size:] = np.diag(mu)
    h[:size, size:] = -1j * conv
    h[size:, :size] = 1j * conv.conj().T

    vals = np.linalg.eigvalsh(h)
    lam_min, lam_max = float(window[0]), float(window[1])
    sel = vals[(vals >= lam_min) & (vals <= lam_max)]
    # spacing between consecutive basis frequencies is 2 pi on each branch
    edge = float(np.max(np.abs(mu))) - 3.0 * 2.0 * np.pi
    reliable = np.abs(sel) <= edge
    return GalerkinResult(values=np.sort(sel), reliable=reliable)


def combined_galerkin_eigs(u: PeriodicField, n_modes: int, window) -> np.ndarray:
    """Reliable periodic plus antiperiodic eigenvalues, sorted."""
    per = galerkin_eigs(u, "periodic", n_modes, window)
    anti = galerkin_eigs(u, "antiperiodic", n_modes, window)
    if not (np.all(per.reliable) and np.all(anti.reliable)):
        raise ValueError("window reaches within 3 modes of the truncation edge")
    return np.sort(np.concatenate([per.values, anti.values]))


def fd_directional(functional, u: PeriodicField, v: PeriodicField, eps: float) -> float:
    """Central difference (F(u + eps v) - F(u - eps v)) / (2 eps)."""
    if not (1e-7 <= eps <= 1e-2):
        raise ValueError(f"eps must lie in [1e-7, 1e-2], got {eps}")
    fp = functional(u + eps * v)
    fm = functional(u + (-eps) * v)
    if not (math.isfinite(fp) and math.isfinite(fm)):
        raise ArithmeticError("functional returned a non-finite value")
    return (fp - fm) / (2.0 * eps)


def const_potential_discriminant(c: float, lam: float) -> float:
    """Closed-form discriminant for the constant potential u = c (real)."""
    q = lam * lam - c * c
    if q >= 0.0:
        return 2.0 * math.cos(math.sqrt(q))
    return 2.0 * math.cosh(math.sqrt(-q))


def const_potential_spectrum(c: float, window) -> list:
    """Exact (lambda, kind, classification) list for u = |c| constant.

    Simple points sit at +-|c|; for n >= 1 the points
    +-sqrt(c^2 + n^2 pi^2) are double, periodic for even n and
    antiperiodic for odd n. With c = 0 every lattice point n pi is double.
    """
    lam_min, lam_max = float(window[0]), float(window[1])
    out = []
    c = abs(float(c))
    if c > 0.0:
        for lam in (-c, c):
            if lam_min <= lam <= lam_max:
                out.append((lam, "periodic", "simple"))
    else:
        if lam_min <= 0.0 <= lam_max:
            out.append((0.0, "periodic", "double"))
    n = 1
    while True:
        lam = math.sqrt(c * c + (n * math.pi) ** 2)
        if lam > max(abs(lam_min), abs(lam_max)):
            break
        kind = "periodic" if n % 2 == 0 else "antiperiodic"
        for s in (-lam, lam):
            if lam_min <= s <= lam_max:
                out.append((s, kind, "double"))
        n += 1
    out.sort(key=lambda t: t[0])
    return out
