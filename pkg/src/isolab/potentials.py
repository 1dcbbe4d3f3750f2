"""Named test potentials used across the suite and the CLI."""
from __future__ import annotations

import numpy as np

from .field import Grid, PeriodicField


def zero(grid: Grid) -> PeriodicField:
    return PeriodicField(grid, np.zeros(grid.n_points, dtype=complex))


def constant(grid: Grid, c: complex = 1.0) -> PeriodicField:
    return PeriodicField(grid, np.full(grid.n_points, complex(c)))


def from_modes(grid: Grid, modes: dict) -> PeriodicField:
    """Field sum_k c_k exp(2 pi i k x) from a {k: c_k} mapping."""
    x = grid.x
    s = np.zeros(grid.n_points, dtype=complex)
    for k in sorted(modes):
        if abs(int(k)) >= grid.n_points // 2:
            raise ValueError(f"mode {k} not representable on an n={grid.n_points} grid")
        s = s + complex(modes[k]) * np.exp(2j * np.pi * int(k) * x)
    return PeriodicField(grid, s)


def wave(grid: Grid) -> PeriodicField:
    """Constant-plus-wave test potential 1 + 0.5 exp(2 pi i x)."""
    return from_modes(grid, {0: 1.0, 1: 0.5})


def wave2(grid: Grid) -> PeriodicField:
    """Second generic potential with a fully simple spectrum."""
    return from_modes(grid, {0: 0.75, 1: 0.3, -1: -0.15j})


PRESETS = {
    "zero": zero,
    "wave": wave,
    "wave2": wave2,
}


def by_name(grid: Grid, name: str) -> PeriodicField:
    """Resolve a preset name, 'const:<c>', or 'modes:k=c,k=c' spec."""
    name = name.strip()
    if name in PRESETS:
        return PRESETS[name](grid)
    if name.startswith("const:"):
        return constant(grid, complex(name[len("const:"):]))
    if name.startswith("modes:"):
        body = name[len("modes:"):]
        modes = {}
        for part in body.split(","):
            part = part.strip()
            if not part:
                continue
            k_str, _, c_str = part.partition("=")
            if not _:
                raise ValueError(f"mode entry {part!r} is not k=coefficient")
            modes[int(k_str)] = complex(c_str)
        return from_modes(grid, modes)
    raise ValueError(f"unknown potential {name!r}")
