"""The 2x2 self-adjoint spectral problem attached to the cubic
Schrödinger flow: one-period transfer matrices, the Floquet function
Delta(lambda) = trace, location and classification of the periodic and
antiperiodic spectrum on the real axis, eigenfunctions, gradient fields,
and deviation sequences between two spectra.

First-order form integrated here (lambda real, u the potential):

    f1' = u f2 - i lambda f1
    f2' = conj(u) f1 + i lambda f2

The coefficient matrix is trace-free and conjugation-symmetric, so the
transfer matrix has det = 1 and entries m22 = conj(m11), m21 = conj(m12)
to roundoff, making the trace real by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import kernels
from .field import (
    Grid,
    PeriodicField,
    fourier_coefficients,
    periodic_antiderivative,
    real_pairing,
    spectral_derivative,
    sup_norm,
)

PERIODIC = "periodic"
ANTIPERIODIC = "antiperiodic"
SIMPLE = "simple"
DOUBLE = "double"
AMBIGUOUS = "ambiguous"

#: scan grid spacing for bracketing the discriminant
SCAN_STEP = 0.1
#: |disc slope| above this (times 1+|lambda|) classifies a root as simple
SLOPE_THRESHOLD = 1e-7
#: central-difference step for Delta' is this times (1+|lambda|)
SLOPE_STEP = 1e-6
#: flat extrema overshooting +-2 by more than this (times 1+|lambda|)
#: are re-bracketed as an ordinary root pair
WIDE_OVERSHOOT = 1e-8
#: gaps narrower than this collapse to a double point (well below the
#: 1e-6 agreement tolerance against the dense oracle)
MIN_RESOLVED_SPLIT = 5e-7
#: smallest |Delta''| trusted when converting overshoot to split width
CURVATURE_FLOOR = 0.1

_MAX_PERIOD_STEPS = 1 << 22
_GAUSS_C1 = 0.5 - math.sqrt(3.0) / 6.0
_GAUSS_C2 = 0.5 + math.sqrt(3.0) / 6.0


class ResolutionError(RuntimeError):
    """Step budget cannot resolve the requested spectral parameter."""


class PreconditionError(ValueError):
    """An operation's entry condition is violated."""


class DoublePointError(ValueError):
    """Eigenfunction extraction needs a simple point."""


class TrackingError(RuntimeError):
    """A root moved out of its guard interval while tracking."""


# -- propagation ---------------------------------------------------------


def _pad_coefficients(c: np.ndarray, size: int) -> np.ndarray:
    """Zero-pad FFT-ordered coefficients, splitting the Nyquist mode."""
    n = c.shape[0]
    if size == n:
        return c.copy()
    half = n // 2
    out = np.zeros(size, dtype=complex)
    out[:half] = c[:half]
    if half > 1:
        out[-(half - 1):] = c[-(half - 1):]
    out[half] += 0.5 * c[half]
    out[size - half] += 0.5 * c[half]
    return out


class _Propagator:
    """Gauss-point potential samples for a fixed step count, reused
    across all spectral-parameter queries on the same field."""

    def __init__(self, u: PeriodicField, oversample: int):
        n = u.grid.n_points
        steps = n * oversample
        self.steps = steps
        self.oversample = oversample
        self.h = 1.0 / steps
        coeffs = _pad_coefficients(fourier_coefficients(u), steps)
        k = np.fft.fftfreq(steps, d=1.0 / steps)
        phase1 = np.exp(2j * np.pi * k * (_GAUSS_C1 * self.h))
        phase2 = np.exp(2j * np.pi * k * (_GAUSS_C2 * self.h))
        self.u1 = np.ascontiguousarray(np.fft.ifft(coeffs * phase1) * steps)
        self.u2 = np.ascontiguousarray(np.fft.ifft(coeffs * phase2) * steps)

    def monodromy(self, lams) -> np.ndarray:
        lams = np.atleast_1d(np.asarray(lams, dtype=float))
        return kernels.propagate_monodromy(self.u1, self.u2, self.h, lams)

    def solution(self, lam: float, f0) -> np.ndarray:
        f0 = np.asarray(f0, dtype=complex)
        return kernels.propagate_solution(
            self.u1, self.u2, self.h, float(lam), f0, self.oversample
        )


_PROP_CACHE: dict = {}
_PROP_CACHE_MAX = 64


def _propagator(u: PeriodicField, lam_cap: float, boost: int = 1) -> _Propagator:
    # phase per step capped at (1+|lambda|) h <= 1/32 so the fourth-order
    # step error stays near 1e-10 across the scan window; eigenfunction
    # recording passes boost > 1 because spectral differentiation of the
    # samples amplifies per-step error by the grid bandwidth
    n = u.grid.n_points
    need = 32.0 * boost * (1.0 + abs(lam_cap))
    oversample = max(boost, int(math.ceil(need / n)))
    if n * oversample > _MAX_PERIOD_STEPS:
        raise ResolutionError(
            f"|lambda| = {abs(lam_cap):.3g} needs {n * oversample} steps "
            f"per period (budget {_MAX_PERIOD_STEPS})"
        )
    key = (u.samples.tobytes(), n, oversample, kernels.BACKEND)
    prop = _PROP_CACHE.get(key)
    if prop is None:
        prop = _Propagator(u, oversample)
        if len(_PROP_CACHE) >= _PROP_CACHE_MAX:
            _PROP_CACHE.pop(next(iter(_PROP_CACHE)))
        _PROP_CACHE[key] = prop
    return prop


# -- transfer matrix and discriminant ------------------------------------


@dataclass(frozen=True)
class TransferMatrix:
    """Fundamental solution over one period at a real spectral parameter."""

    m11: complex
    m12: complex
    m21: complex
    m22: complex
    lam: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    @property
    def det(self) -> complex:
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def trace(self) -> complex:
        return self.m11 + self.m22


def transfer_matrix(u: PeriodicField, lam: float) -> TransferMatrix:
    if not math.isfinite(lam):
        raise PreconditionError("spectral parameter must be finite")
    m = _propagator(u, lam).monodromy([lam])[0]
    return TransferMatrix(m[0, 0], m[0, 1], m[1, 0], m[1, 1], float(lam))


def discriminant(u: PeriodicField, lam: float) -> float:
    """Delta(lambda) = Re trace of the one-period transfer matrix."""
    t = transfer_matrix(u, lam)
    tr = t.trace
    if abs(tr.imag) > 1e-9 * max(1.0, abs(tr)):
        raise ArithmeticError(f"discriminant trace has imaginary part {tr.imag:.3e}")
    return float(tr.real)


def _disc_batch(prop: _Propagator, lams: np.ndarray) -> np.ndarray:
    return 2.0 * prop.monodromy(lams)[:, 0, 0].real


# -- spectrum location ----------------------------------------------------


@dataclass(frozen=True)
class SpectralPoint:
    lam: float
    kind: str
    classification: str
    disc_slope: float
    index: int = 0

    @property
    def multiplicity(self) -> int:
        return 2 if self.classification == DOUBLE else 1

    @property
    def floquet_multiplier(self) -> int:
        return 1 if self.kind == PERIODIC else -1


@dataclass(frozen=True)
class Spectrum:
    points: tuple
    window: tuple

    @property
    def has_ambiguous(self) -> bool:
        return any(p.classification == AMBIGUOUS for p in self.points)

    def simple_points(self):
        return [p for p in self.points if p.classification == SIMPLE]

    def by_index(self, index: int) -> SpectralPoint:
        for p in self.points:
            if p.index == index:
                return p
        raise KeyError(f"no spectral point with index {index}")

    def expanded_values(self) -> np.ndarray:
        """Eigenvalues with multiplicity (doubles twice), ascending.

        Ambiguous points are counted twice as well; callers that care
        must check has_ambiguous and mark results inconclusive.
        """
        vals = []
        for p in self.points:
            vals.extend([p.lam] * (2 if p.classification != SIMPLE else 1))
        return np.array(sorted(vals))

    def values_by_point(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])


def _golden_extremum(disc, lo, hi, maximize, iters=30):
    """Golden-section extremum of the batched discriminant.

    lo, hi, maximize are arrays (one entry per candidate); disc maps a
    lambda array to discriminant values. All candidates iterate in
    lockstep so every refinement is one batched propagation.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    sgn = np.where(maximize, -1.0, 1.0)
    a = lo.copy()
    b = hi.copy()
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = sgn * disc(c)
    fd = sgn * disc(d)
    for _ in range(iters):
        take_left = fc < fd
        b = np.where(take_left, d, b)
        a = np.where(take_left, a, c)
        c_new = b - invphi * (b - a)
        d_new = a + invphi * (b - a)
        need_c = take_left
        # reuse the surviving interior sample, evaluate only the new one
        fd = np.where(take_left, fc, fd)
        merged = np.where(need_c, c_new, d_new)
        fm = sgn * disc(merged)
        fc = np.where(need_c, fm, fd)
        fd = np.where(need_c, fd, fm)
        c, d = c_new, d_new
    mid = 0.5 * (a + b)
    return _extremum_newton(disc, mid, lo, hi)


def _extremum_newton(disc, x0, lo, hi, iters=12):
    """Polish critical points of Delta by Newton on its difference
    quotient; comparison search alone cannot localize a quadratic
    extremum below sqrt(machine eps)."""
    x = x0.copy()
    for _ in range(iters):
        dd = SLOPE_STEP * (1.0 + np.abs(x))
        n = x.shape[0]
        vals = disc(np.concatenate([x + dd, x - dd, x]))
        d1 = (vals[:n] - vals[n:2 * n]) / (2.0 * dd)
        d2 = (vals[:n] + vals[n:2 * n] - 2.0 * vals[2 * n:]) / (dd * dd)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(d2 != 0.0, d1 / d2, 0.0)
        x_new = np.clip(x - step, lo, hi)
        if np.all(np.abs(x_new - x) < 1e-13 * (1.0 + np.abs(x))):
            x = x_new
            break
        x = x_new
    return x


def _newton_polish(disc, lo, hi, g_lo, g_hi, target):
    """Safeguarded Newton on Delta - target for a batch of brackets."""
    x = 0.5 * (lo + hi)
    lo = lo.copy()
    hi = hi.copy()
    g_lo = g_lo.copy()
    done = np.zeros(x.shape, dtype=bool)
    for _ in range(80):
        delta = SLOPE_STEP * (1.0 + np.abs(x))
        stacked = np.concatenate([x, x + delta, x - delta])
        vals = disc(stacked)
        n = x.shape[0]
        gx = vals[:n] - target
        slope = (vals[n:2 * n] - vals[2 * n:]) / (2.0 * delta)
        # shrink bracket by the sign of gx
        same_side = (gx > 0) == (g_lo > 0)
        lo = np.where(~done & same_side, x, lo)
        g_lo = np.where(~done & same_side, gx, g_lo)
        hi = np.where(~done & ~same_side, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(slope != 0.0, gx / slope, np.inf)
        cand = x - step
        inside = (cand > lo) & (cand < hi)
        x_new = np.where(inside, cand, 0.5 * (lo + hi))
        moved = np.abs(x_new - x)
        newly = moved < 1e-13 * (1.0 + np.abs(x))
        # freeze at the evaluated point once the residual is flat; moving
        # to the safeguard midpoint after convergence would undo the root
        flat = np.abs(gx) < 1e-13
        x = np.where(done | flat, x, x_new)
        done = done | newly | flat
        if np.all(done):
            break
    return x


def _split_estimate(prop: _Propagator, star: float, rho: float):
    """Gap width at a flat extremum of the discriminant.

    Near a closed or nearly closed gap the one-period matrix is
    rho*exp(E) with E = [[i a, b], [conj(b), -i a]] small; the gap
    endpoints solve |a(lambda)| = |b|, so the width is 2|b| / |da/dlam|.
    This is linear in the gap width, unlike the discriminant overshoot,
    so splits far below the scan resolution are still measurable.
    """
    delta = 1e-3 * (1.0 + abs(star))
    ms = prop.monodromy(np.array([star - delta, star, star + delta]))
    e_mid = rho * ms[1] - np.eye(2)
    b = e_mid[0, 1]
    a_lo = (rho * ms[0])[0, 0].imag
    a_hi = (rho * ms[2])[0, 0].imag
    c1 = (a_hi - a_lo) / (2.0 * delta)
    # discriminant curvature from the same three evaluations
    d_lo = 2.0 * ms[0][0, 0].real
    d_mid = 2.0 * ms[1][0, 0].real
    d_hi = 2.0 * ms[2][0, 0].real
    curvature = abs(d_lo + d_hi - 2.0 * d_mid) / (delta * delta)
    if abs(c1) < 1e-3:
        return None, curvature, c1
    return 2.0 * abs(b) / abs(c1), curvature, c1


def _classify_flat(prop: _Propagator, star: float, kind: str, rho: float,
                   slope_mid: float, found: list) -> None:
    """Decide double / resolved pair / ambiguous at a flat critical point."""
    split, curvature, c1 = _split_estimate(prop, star, rho)
    if split is None:
        found.append((star, kind, AMBIGUOUS, slope_mid))
        return
    resolve_at = max(
        MIN_RESOLVED_SPLIT,
        2.0 * SLOPE_THRESHOLD * (1.0 + abs(star)) / max(curvature, CURVATURE_FLOOR),
    )
    if split <= resolve_at:
        found.append((star, kind, DOUBLE, slope_mid))
        return
    lo, hi = _gap_endpoints(prop, star, rho, split, c1)
    pair_slope = 0.5 * max(curvature, CURVATURE_FLOOR) * split
    found.append((lo, kind, SIMPLE, -rho * pair_slope))
    found.append((hi, kind, SIMPLE, rho * pair_slope))


def _gap_endpoints(prop: _Propagator, star: float, rho: float, split: float, c1: float):
    """Polish the two band edges around a narrow gap.

    An eigenvalue sits exactly where the Floquet multipliers coalesce at
    rho, i.e. where Im((rho M)_11) = -+ |(rho M)_12|. Both sides of that
    equation are entries of the one-period matrix, so the roots are
    located to full integrator accuracy with no small-gap model error.
    """

    def psi(lams, sign):
        ms = prop.monodromy(np.asarray(lams, dtype=float))
        return (rho * ms[:, 0, 0]).imag - sign * np.abs(ms[:, 0, 1])

    # Im((rho M)_11) is locally c1*(lambda - center): the +|beta| branch
    # roots on the side where it is positive
    half_signed = 0.5 * split * (1.0 if c1 > 0 else -1.0)
    roots = []
    for s in (1.0, -1.0):
        start = star + s * half_signed
        y = start
        for _ in range(30):
            dd = max(1e-7 * (1.0 + abs(y)), 1e-3 * split)
            vals = psi(np.array([y, y + dd, y - dd]), s)
            deriv = (vals[1] - vals[2]) / (2.0 * dd)
            if deriv == 0.0:
                y = start
                break
            step = vals[0] / deriv
            y -= step
            if abs(y - star) > 4.0 * split + 1e-6 * (1.0 + abs(star)):
                y = start  # fall back to the model estimate
                break
            if abs(step) < 1e-14 * (1.0 + abs(y)):
                break
        roots.append(y)
    return min(roots), max(roots)


def locate_spectrum(u: PeriodicField, window, scan_step: float = SCAN_STEP) -> Spectrum:
    """Scan, bracket, and polish all periodic/antiperiodic eigenvalues.

    Three detection paths cover the window: sign changes of Delta -+ 2
    (safeguarded Newton), grid nodes landing on a root directly, and
    flat extrema of Delta touching +-2. Extrema are polished on Delta'
    and then resolved by the matrix gap estimator: wide gaps are
    re-bracketed as two ordinary roots, narrow but resolved gaps emit a
    simple pair at the estimated endpoints, unresolvably narrow gaps
    collapse to a double point, and a breakdown of the local model is
    flagged ambiguous rather than silently dropped.
    """
    lam_min, lam_max = float(window[0]), float(window[1])
    if not (math.isfinite(lam_min) and math.isfinite(lam_max) and lam_min < lam_max):
        raise PreconditionError(f"bad window {window}")
    prop = _propagator(u, max(abs(lam_min), abs(lam_max)))

    n_cells = max(2, int(math.ceil((lam_max - lam_min) / scan_step)))
    grid = np.linspace(lam_min, lam_max, n_cells + 1)
    disc_grid = _disc_batch(prop, grid)
    for end in (0, -1):
        if min(abs(disc_grid[end] - 2.0), abs(disc_grid[end] + 2.0)) < 1e-9:
            raise PreconditionError(
                f"window endpoint {grid[end]:.6g} sits on a discriminant root"
            )

    def disc(lams):
        return _disc_batch(prop, lams)

    found = []  # (lam, kind, classification, slope)
    for target, kind in ((2.0, PERIODIC), (-2.0, ANTIPERIODIC)):
        g = disc_grid - target
        rho = 1.0 if target > 0 else -1.0

        brackets = []
        on_node = np.abs(g) < 1e-11 * (1.0 + np.abs(grid))
        sign_change = np.flatnonzero((g[:-1] * g[1:] < 0.0) & ~on_node[:-1] & ~on_node[1:])
        for i in sign_change:
            brackets.append((grid[i], grid[i + 1], g[i], g[i + 1]))

        # grid nodes sitting on a root: polish in place without a bracket
        for i in np.flatnonzero(on_node):
            x = grid[i]
            for _ in range(8):
                dd = SLOPE_STEP * (1.0 + abs(x))
                vals = disc(np.array([x, x + dd, x - dd]))
                slope = (vals[1] - vals[2]) / (2.0 * dd)
                if slope == 0.0:
                    break
                step = (vals[0] - target) / slope
                if abs(step) > scan_step:
                    break
                x -= step
                if abs(step) < 1e-13 * (1.0 + abs(x)):
                    break
            dd = SLOPE_STEP * (1.0 + abs(x))
            vals = disc(np.array([x + dd, x - dd]))
            slope = float((vals[0] - vals[1]) / (2.0 * dd))
            thr = SLOPE_THRESHOLD * (1.0 + abs(x))
            if abs(slope) > thr:
                found.append((float(x), kind, SIMPLE, slope))
            else:
                # a grid node can land on a flat critical point too
                _classify_flat(prop, float(x), kind, rho, slope, found)

        # flat extrema: local maxima of Delta for +2, minima for -2
        interior = np.arange(1, len(grid) - 1)
        if target > 0:
            is_ext = (disc_grid[interior] >= disc_grid[interior - 1]) & (
                disc_grid[interior] >= disc_grid[interior + 1]
            )
        else:
            is_ext = (disc_grid[interior] <= disc_grid[interior - 1]) & (
                disc_grid[interior] <= disc_grid[interior + 1]
            )
        cand = interior[is_ext & (np.abs(g[interior]) < 0.5) & ~on_node[interior]]
        if cand.size:
            lo = grid[cand - 1]
            hi = grid[cand + 1]
            stars = _golden_extremum(disc, lo, hi, np.full(cand.shape, target > 0))
            v_stars = disc(stars) - target
            for j, star in enumerate(stars):
                star = float(star)
                v = float(v_stars[j])
                if v * rho > WIDE_OVERSHOOT * (1.0 + abs(star)):
                    # wide overshoot: two well-separated roots; bracket
                    # each side against the grid neighbors
                    gl = disc(np.array([lo[j]]))[0] - target
                    if gl * v < 0:
                        brackets.append((lo[j], star, gl, v))
                    gr = disc(np.array([hi[j]]))[0] - target
                    if v * gr < 0:
                        brackets.append((star, hi[j], v, gr))
                    continue
                dd = SLOPE_STEP * (1.0 + abs(star))
                vals = disc(np.array([star + dd, star - dd]))
                slope_mid = float((vals[0] - vals[1]) / (2.0 * dd))
                _classify_flat(prop, star, kind, rho, slope_mid, found)

        if brackets:
            lo = np.array([b[0] for b in brackets])
            hi = np.array([b[1] for b in brackets])
            glo = np.array([b[2] for b in brackets])
            ghi = np.array([b[3] for b in brackets])
            roots = _newton_polish(disc, lo, hi, glo, ghi, target)
            dd = SLOPE_STEP * (1.0 + np.abs(roots))
            slopes = (disc(roots + dd) - disc(roots - dd)) / (2.0 * dd)
            for j, root in enumerate(roots):
                thr = SLOPE_THRESHOLD * (1.0 + abs(root))
                cls = SIMPLE if abs(slopes[j]) > thr else AMBIGUOUS
                found.append((float(root), kind, cls, float(slopes[j])))

    # deduplicate near-identical roots of the same kind, preferring the
    # classified entry over an ambiguous duplicate
    _rank = {SIMPLE: 0, DOUBLE: 1, AMBIGUOUS: 2}
    found.sort(key=lambda t: (t[0], t[1], _rank[t[2]]))
    dedup = []
    for item in found:
        if dedup and item[1] == dedup[-1][1] and abs(item[0] - dedup[-1][0]) < 1e-9 * (
            1.0 + abs(item[0])
        ):
            continue
        dedup.append(item)
    dedup.sort(key=lambda t: t[0])

    if not dedup:
        return Spectrum(points=(), window=(lam_min, lam_max))
    lams = np.array([d[0] for d in dedup])
    center = int(np.argmin(np.abs(lams)))
    points = tuple(
        SpectralPoint(lam=d[0], kind=d[1], classification=d[2],
                      disc_slope=d[3], index=i - center)
        for i, d in enumerate(dedup)
    )
    return Spectrum(points=points, window=(lam_min, lam_max))


# -- eigenfunctions -------------------------------------------------------


@dataclass(frozen=True)
class EigenPair:
    """Normalized eigenfunction at a located spectral point.

    f1 and f2 hold grid samples over one period; for antiperiodic points
    they carry the boundary multiplier -1, so the samples themselves are
    not period-one functions but their squares are. The gauge is fixed
    so that f2 = conj(f1), which also forces ||f1|| = ||f2|| = 1.
    """

    point: SpectralPoint
    f1: PeriodicField
    f2: PeriodicField
    residual: float

    def normal_field(self) -> PeriodicField:
        """Gradient field of the eigenvalue: i f1^2."""
        return PeriodicField(self.f1.grid, 1j * self.f1.samples**2)

    def tangent_field(self) -> PeriodicField:
        """Flow direction attached to the eigenvalue: -f2^2."""
        return PeriodicField(self.f2.grid, -self.f2.samples**2)


def _ode_residual(u: PeriodicField, lam: float, rho: int,
                  f1: np.ndarray, f2: np.ndarray) -> float:
    """Sup-norm residual of the first-order system on the grid.

    Antiperiodic samples are periodized by exp(i pi x) before spectral
    differentiation, then the gauge term is subtracted back out.
    """
    grid = u.grid
    x = grid.x
    if rho == 1:
        d1 = spectral_derivative(PeriodicField(grid, f1), 1).samples
        d2 = spectral_derivative(PeriodicField(grid, f2), 1).samples
    else:
        tw = np.exp(1j * np.pi * x)
        g1 = spectral_derivative(PeriodicField(grid, f1 * tw), 1).samples
        g2 = spectral_derivative(PeriodicField(grid, f2 * tw), 1).samples
        d1 = (g1 - 1j * np.pi * f1 * tw) / tw
        d2 = (g2 - 1j * np.pi * f2 * tw) / tw
    r1 = d1 - (u.samples * f2 - 1j * lam * f1)
    r2 = d2 - (np.conj(u.samples) * f1 + 1j * lam * f2)
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def _finish_pair(u, point, sol, residual_tol):
    n = u.grid.n_points
    rho = point.floquet_multiplier
    f1 = sol[:n, 0].copy()
    f2 = sol[:n, 1].copy()
    closure = float(np.max(np.abs(sol[n] - rho * sol[0])))
    scale = max(np.max(np.abs(sol[:n])), 1e-300)
    # L2-normalize the first component, then rotate into the gauge
    # where conj(f2) = f1; the scalar c below satisfies sigma f = c f.
    nrm = math.sqrt(float(np.mean(np.abs(f1) ** 2)))
    if nrm == 0.0:
        raise DoublePointError("degenerate eigenvector (f1 vanishes)")
    f1 /= nrm
    f2 /= nrm
    denom = float(np.sum(np.abs(f1) ** 2 + np.abs(f2) ** 2))
    c = 2.0 * np.sum(np.conj(f1 * f2)) / denom
    mag = abs(c)
    if mag < 0.5:
        raise ArithmeticError("conjugation symmetry defect while fixing the gauge")
    phase = np.exp(0.5j * np.angle(c))
    f1 = f1 * phase
    f2 = f2 * phase
    sym_defect = float(np.max(np.abs(np.conj(f2) - f1)))
    resid = _ode_residual(u, point.lam, rho, f1, f2)
    resid = max(resid, closure / max(scale, 1e-300))
    if resid > residual_tol or sym_defect > 1e-6:
        raise ArithmeticError(
            f"eigenfunction residual {resid:.3e} / symmetry defect "
            f"{sym_defect:.3e} above tolerance at lambda={point.lam:.6g}"
        )
    return EigenPair(
        point=point,
        f1=PeriodicField(u.grid, f1),
        f2=PeriodicField(u.grid, f2),
        residual=resid,
    )


def eigenpair(u: PeriodicField, point: SpectralPoint,
              residual_tol: float = 1e-6) -> EigenPair:
    """Eigenfunction at a simple point via the transfer-matrix eigenvector."""
    if point.classification != SIMPLE:
        raise DoublePointError(
            f"point at lambda={point.lam:.6g} is {point.classification}; "
            "the transfer-matrix eigenvector is only unique at simple points"
        )
    prop = _propagator(u, point.lam, boost=4)
    m = prop.monodromy([point.lam])[0]
    rho = point.floquet_multiplier
    r1 = np.array([m[0, 0] - rho, m[0, 1]])
    r2 = np.array([m[1, 0], m[1, 1] - rho])
    row = r1 if np.linalg.norm(r1) >= np.linalg.norm(r2) else r2
    w = np.array([-row[1], row[0]])
    w /= np.linalg.norm(w)
    # rotate into the conjugation gauge and project onto the symmetric
    # part: the propagation preserves the symmetry exactly, so any
    # asymmetry of the (ill-conditioned near narrow gaps) eigenvector
    # would survive into f otherwise
    c = 2.0 * np.conj(w[0] * w[1])
    if abs(c) > 0:
        w = w * np.exp(0.5j * np.angle(c))
    w_sym = 0.5 * np.array([w[0] + np.conj(w[1]), w[1] + np.conj(w[0])])
    if np.linalg.norm(w_sym) > 0.5:
        w = w_sym / np.linalg.norm(w_sym)
    sol = prop.solution(point.lam, w)
    return _finish_pair(u, point, sol, residual_tol)


def symmetric_double_pair(u: PeriodicField, point: SpectralPoint,
                          residual_tol: float = 1e-6) -> EigenPair:
    """Representative eigenfunction at a double point.

    The monodromy is +-identity there, so every initial vector works;
    the conjugation-symmetric convention f(0) = (1, 1)/sqrt(2) is the
    continuation of the flat-potential family and keeps f2 = conj(f1)
    along the whole propagation.
    """
    if point.classification != DOUBLE:
        raise ValueError("symmetric_double_pair expects a double point")
    prop = _propagator(u, point.lam, boost=4)
    w = np.array([1.0, 1.0]) / math.sqrt(2.0)
    sol = prop.solution(point.lam, w)
    return _finish_pair(u, point, sol, residual_tol)


def family_pair(u: PeriodicField, point: SpectralPoint,
                residual_tol: float = 1e-6) -> EigenPair:
    """Eigenpair for basis work: simple points exactly, doubles by the
    symmetric convention."""
    if point.classification == SIMPLE:
        return eigenpair(u, point, residual_tol)
    if point.classification == DOUBLE:
        return symmetric_double_pair(u, point, residual_tol)
    raise PreconditionError(f"ambiguous point at lambda={point.lam:.6g}")


def flat_reference_square(grid: Grid, lam0: float) -> PeriodicField:
    """Squared first component of the flat-potential eigenfunction,
    exp(-2 i lam0 x); periodic on the grid when lam0 is a multiple of pi."""
    return PeriodicField(grid, np.exp(-2j * lam0 * grid.x))


def lambda_gradient(pair: EigenPair):
    """Gradient and flow fields (i f1^2, -f2^2) of a located eigenvalue."""
    return pair.normal_field(), pair.tangent_field()


def gradient_pairing_prediction(pair: EigenPair, v: PeriodicField) -> float:
    """Directional derivative of the eigenvalue predicted by its gradient.

    The real pairing is twice the real L2 inner product, so the
    derivative equals half the pairing of i f1^2 with the direction.
    """
    return 0.5 * real_pairing(pair.normal_field(), v)


# -- root tracking and finite differences ---------------------------------


def track_root(u: PeriodicField, lam0: float, kind: str, guard: float) -> float:
    """Polish the discriminant root of the given kind nearest lam0.

    Raises TrackingError if the polished root leaves [lam0 - guard,
    lam0 + guard]; index swaps must abort rather than corrupt derivatives.
    """
    target = 2.0 if kind == PERIODIC else -2.0
    prop = _propagator(u, abs(lam0) + abs(guard) + 1.0)

    def disc(lams):
        return _disc_batch(prop, lams)

    x = float(lam0)
    for _ in range(60):
        dd = SLOPE_STEP * (1.0 + abs(x))
        vals = disc(np.array([x, x + dd, x - dd]))
        g = vals[0] - target
        slope = (vals[1] - vals[2]) / (2.0 * dd)
        if slope == 0.0:
            raise TrackingError(f"flat discriminant while tracking near {lam0:.6g}")
        step = g / slope
        x -= step
        if abs(x - lam0) > guard:
            raise TrackingError(
                f"root escaped guard interval ({lam0:.6g} +- {guard:.3g})"
            )
        if abs(step) < 1e-13 * (1.0 + abs(x)):
            break
    return x


def local_gap_guard(spectrum: Spectrum, point: SpectralPoint) -> float:
    """Half the distance to the nearest other located eigenvalue."""
    others = [p.lam for p in spectrum.points if p is not point]
    if not others:
        return 1.0
    gap = min(abs(point.lam - o) for o in others)
    return 0.5 * gap if gap > 0 else 1e-6


def eigenvalue_directional_derivative(
    u: PeriodicField,
    point: SpectralPoint,
    v: PeriodicField,
    eps: float,
    guard: float,
) -> float:
    """Central-difference derivative of the tracked eigenvalue along v."""
    lam_p = track_root(u + eps * v, point.lam, point.kind, guard)
    lam_m = track_root(u + (-eps) * v, point.lam, point.kind, guard)
    return (lam_p - lam_m) / (2.0 * eps)


# -- product identities ----------------------------------------------------


def product_identity_check(pair: EigenPair, u: PeriodicField):
    """Pointwise residuals of the squared-eigenfunction identities.

    Checked in derivative form (unambiguous) plus the integral form with
    the quadrature constant f1 f2(0) carried explicitly; the report also
    includes the literal integral form without the constant for
    comparison, and the sup bound on |f1^2| with its Gronwall constant.
    """
    from .report import ExperimentReport, INFO

    grid = u.grid
    lam = pair.point.lam
    rho = pair.point.floquet_multiplier
    f1 = pair.f1.samples
    f2 = pair.f2.samples
    us = u.samples

    sq1 = PeriodicField(grid, f1 * f1)
    sq2 = PeriodicField(grid, f2 * f2)
    cross = PeriodicField(grid, f1 * f2)
    d_sq1 = spectral_derivative(sq1, 1).samples
    d_sq2 = spectral_derivative(sq2, 1).samples
    d_cross = spectral_derivative(cross, 1).samples

    rep = ExperimentReport(
        name="product_identities",
        columns=["residual_sup", "scale"],
        metadata={
            "lambda": "%.17g" % lam,
            "kind": pair.point.kind,
            "grid_n": grid.n_points,
        },
    )

    def row(label, resid, scale, tol):
        rep.add(label, {"residual_sup": resid, "scale": scale}, tol, resid <= tol)

    scale1 = float(np.max(np.abs(sq1.samples)))
    r1 = 0.5 * d_sq1 - (us * f1 * f2 - 1j * lam * f1 * f1)
    row("half_dx_f1sq", float(np.max(np.abs(r1))), scale1, 1e-6)
    r2 = 0.5 * d_sq2 - (np.conj(us) * f1 * f2 + 1j * lam * f2 * f2)
    row("half_dx_f2sq", float(np.max(np.abs(r2))), scale1, 1e-6)
    rhs_cross = us * f2 * f2 + np.conj(us) * f1 * f1
    r3 = d_cross - rhs_cross
    row("dx_f1f2", float(np.max(np.abs(r3))), scale1, 1e-6)

    # spectral antiderivative of (u f2^2 + conj(u) f1^2) from 0 to x_j
    cume = periodic_antiderivative(PeriodicField(grid, rhs_cross))
    f1f2_0 = f1[0] * f2[0]
    recon = f1f2_0 + cume
    quad_err = float(np.max(np.abs(recon - f1 * f2)))
    rep.add("f1f2_reconstruction", {"residual_sup": quad_err, "scale": scale1},
            float("inf"), INFO)

    eq7_with_const = -0.5 * d_sq1 + us * recon - 1j * lam * f1 * f1
    row("integral_form_with_constant", float(np.max(np.abs(eq7_with_const))),
        scale1, 2e-6)
    eq7_literal = -0.5 * d_sq1 + us * cume - 1j * lam * f1 * f1
    rep.add("integral_form_dropped_constant",
            {"residual_sup": float(np.max(np.abs(eq7_literal))), "scale": scale1},
            float("inf"), INFO)

    # |f1^2| <= 2 exp(2 |u|_inf), the Gronwall constant for this system
    c_bound = 2.0 * math.exp(2.0 * sup_norm(u))
    row("f1sq_sup_bound", scale1, c_bound, c_bound)
    rep.metadata["floquet_multiplier"] = str(rho)
    return rep


# -- deviation sequences ---------------------------------------------------


@dataclass(frozen=True)
class SpectralDeviation:
    """Per-index eigenvalue deviations between two spectra.

    Pairing: both spectra are expanded with multiplicity, sorted, and
    aligned at their entries nearest zero; entry k of one then pairs
    with entry k of the other (order statistics), which realizes the
    gap-midpoint convention for split double points.
    """

    indices: np.ndarray
    values: np.ndarray

    def partial_sums(self):
        """Sums of squared deviations over |index| <= m, for ascending m."""
        ms = np.unique(np.abs(self.indices))
        sums = np.array([
            float(np.sum(self.values[np.abs(self.indices) <= m] ** 2)) for m in ms
        ])
        return ms, sums

    def sum_squares(self) -> float:
        return float(np.sum(self.values**2))


def spectral_deviation(spec_u: Spectrum, spec_0: Spectrum) -> SpectralDeviation:
    if tuple(spec_u.window) != tuple(spec_0.window):
        raise PreconditionError(
            f"windows differ: {spec_u.window} vs {spec_0.window}"
        )
    a = spec_u.expanded_values()
    b = spec_0.expanded_values()
    if a.size == 0 or b.size == 0:
        return SpectralDeviation(np.array([], dtype=int), np.array([]))
    ia = int(np.argmin(np.abs(a)))
    ib = int(np.argmin(np.abs(b)))
    lo = -min(ia, ib)
    hi = min(a.size - ia, b.size - ib)  # exclusive
    idx = np.arange(lo, hi)
    vals = a[idx + ia] - b[idx + ib]
    return SpectralDeviation(indices=idx, values=vals)
