"""Time evolution: cubic Schrödinger flow, closed-form commuting flows,
and a generic RK4 integrator for Hamiltonian vector fields i*grad(F).

The Schrödinger step is Strang splitting: a half step of the pointwise
nonlinear phase, an exact linear step in Fourier space, and another half
step of the phase. Both substeps preserve the L2 norm to roundoff.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .field import PeriodicField, fourier_coefficients, field_from_coefficients, l2_norm

MAX_STEPS = 10**9

FOCUSING = +1
DEFOCUSING = -1


class FlowBlowupError(RuntimeError):
    """State became non-finite during time stepping."""

    def __init__(self, step: int):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


@dataclass(frozen=True)
class FlowSpec:
    """What to integrate and for how long.

    kind 'nls' uses `sign` (+1 focusing, -1 defocusing), 'hierarchy'
    uses `m` in {1, 2} (phase and translation flows, exact), 'generic'
    integrates u_t = i*gradient(u) with RK4.
    """

    kind: str
    t_final: float
    dt: float = 1e-3
    sign: int = DEFOCUSING
    m: int = 1
    gradient: Optional[Callable[[PeriodicField], PeriodicField]] = None

    def __post_init__(self):
        if self.kind not in ("nls", "hierarchy", "generic"):
            raise ValueError(f"unknown flow kind {self.kind!r}")
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if abs(self.t_final) / self.dt > MAX_STEPS:
            raise ValueError("step count exceeds budget")
        if self.kind == "nls" and self.sign not in (FOCUSING, DEFOCUSING):
            raise ValueError("sign must be +1 (focusing) or -1 (defocusing)")
        if self.kind == "hierarchy" and self.m not in (1, 2):
            raise ValueError("closed-form hierarchy flows exist for m in {1, 2}")
        if self.kind == "generic" and self.gradient is None:
            raise ValueError("generic flow needs a gradient callback")

    @staticmethod
    def nls(t_final, dt=1e-3, sign=DEFOCUSING) -> "FlowSpec":
        return FlowSpec(kind="nls", t_final=t_final, dt=dt, sign=sign)

    @staticmethod
    def hierarchy(m, t_final) -> "FlowSpec":
        return FlowSpec(kind="hierarchy", t_final=t_final, dt=max(abs(t_final), 1.0), m=m)

    @staticmethod
    def generic(gradient, t_final, dt=1e-3) -> "FlowSpec":
        return FlowSpec(kind="generic", t_final=t_final, dt=dt, gradient=gradient)


def _time_steps(t_final: float, dt: float):
    """Signed full steps plus one shorter fractional step."""
    if t_final == 0.0:
        return []
    sgn = 1.0 if t_final > 0 else -1.0
    total = abs(t_final)
    n_full = int(total / dt + 1e-12)
    rem = total - n_full * dt
    steps = [sgn * dt] * n_full
    if rem > 1e-12 * max(1.0, total):
        steps.append(sgn * rem)
    return steps


def _spectral_tail(u: PeriodicField) -> float:
    c = np.abs(fourier_coefficients(u))
    n = u.grid.n_points
    k = np.abs(u.grid.modes)
    top = c[k >= n // 2 - 1]
    peak = float(np.max(c))
    return float(np.max(top) / peak) if peak > 0 else 0.0


def evolve_nls(u0: PeriodicField, spec: FlowSpec) -> PeriodicField:
    """Integrate i u_t + u_xx + sign*|u|^2 u = 0 by Strang splitting."""
    if spec.kind != "nls":
        raise ValueError("spec.kind must be 'nls'")
    if _spectral_tail(u0) > 1e-10:
        raise ValueError("initial state is not resolved on this grid (spectral tail)")
    k = u0.grid.modes
    ksq = (2.0 * np.pi * k) ** 2
    u = u0.samples.copy()
    for idx, h in enumerate(_time_steps(spec.t_final, spec.dt)):
        u = u * np.exp(1j * spec.sign * np.abs(u) ** 2 * (0.5 * h))
        u = np.fft.ifft(np.fft.fft(u) * np.exp(-1j * ksq * h))
        u = u * np.exp(1j * spec.sign * np.abs(u) ** 2 * (0.5 * h))
        if not np.all(np.isfinite(u.view(float))):
            raise FlowBlowupError(idx)
    return PeriodicField(u0.grid, u)


def hierarchy_flow(u0: PeriodicField, m: int, t: float) -> PeriodicField:
    """Exact flows of the first two conserved functionals.

    m=1 is the global phase flow u -> exp(it) u; m=2 is rightward
    translation u(x) -> u(x - t), applied as a Fourier phase shift.
    """
    if m == 1:
        return PeriodicField(u0.grid, np.exp(1j * t) * u0.samples)
    if m == 2:
        shift = np.exp(-2j * np.pi * u0.grid.modes * t)
        return field_from_coefficients(u0.grid, fourier_coefficients(u0) * shift)
    raise ValueError("closed-form hierarchy flows exist for m in {1, 2}")


def gradient_flow(u0: PeriodicField, gradient, spec: FlowSpec) -> PeriodicField:
    """Classical RK4 on u_t = i*gradient(u)."""
    grid = u0.grid

    def rhs(arr):
        g = gradient(PeriodicField(grid, arr))
        return 1j * g.samples

    u = u0.samples.copy()
    for idx, h in enumerate(_time_steps(spec.t_final, spec.dt)):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * h * k1)
        k3 = rhs(u + 0.5 * h * k2)
        k4 = rhs(u + h * k3)
        u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(u.view(float))):
            raise FlowBlowupError(idx)
    return PeriodicField(grid, u)


def evolve(u0: PeriodicField, spec: FlowSpec) -> PeriodicField:
    """Dispatch on spec.kind."""
    if spec.kind == "nls":
        return evolve_nls(u0, spec)
    if spec.kind == "hierarchy":
        return hierarchy_flow(u0, spec.m, spec.t_final)
    return gradient_flow(u0, spec.gradient, spec)


def commutation_defect(u0: PeriodicField, spec_a: FlowSpec, spec_b: FlowSpec) -> float:
    """L2 distance between the two orders of composing the flows."""
    ab = evolve(evolve(u0, spec_b), spec_a)
    ba = evolve(evolve(u0, spec_a), spec_b)
    return l2_norm(ab - ba)
