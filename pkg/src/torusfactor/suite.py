"""Frozen regression inputs: five fixed smooth displacement shapes at
three amplitudes each, plus annulus-supported variants and the canonical
probe direction.  Everything here is deterministic and closed-form so
run-to-run comparisons are bitwise."""

import numpy as np

from .diffeo import TorusDiffeo, make_diffeo
from .fragmentation import smoothstep
from .grid import DisplacementField, GridSpec

__all__ = [
    "SUITE_AMPLITUDES",
    "suite_shapes",
    "regression_suite",
    "annulus_suite",
    "probe_direction",
]

SUITE_AMPLITUDES = (1e-4, 5e-4, 2e-3)

TWO_PI = 2.0 * np.pi


def _shape1(x):
    return np.stack([np.sin(TWO_PI * x[1]), np.sin(TWO_PI * x[0])])


def _shape2(x):
    return np.stack(
        [
            np.cos(TWO_PI * x[0]) * np.sin(TWO_PI * x[1]),
            np.sin(TWO_PI * (x[0] + x[1])),
        ]
    )


def _shape3(x):
    return np.stack(
        [
            np.sin(TWO_PI * x[0] + 1.0) + 0.5 * np.cos(TWO_PI * x[1]),
            np.cos(TWO_PI * x[0] - 0.5) * np.cos(TWO_PI * x[1]),
        ]
    )


def _shape4(x):
    return np.stack(
        [
            np.sin(2 * TWO_PI * x[1]) + 0.3 * np.sin(TWO_PI * x[0]),
            np.cos(2 * TWO_PI * x[0] + 0.7),
        ]
    )


def _shape5(x):
    return np.stack(
        [
            np.sin(TWO_PI * (x[0] - x[1]) + 0.2) * np.cos(TWO_PI * x[1]),
            np.sin(TWO_PI * x[1] + 0.9) + 0.4 * np.sin(2 * TWO_PI * (x[0] + x[1])),
        ]
    )


_SHAPES = (_shape1, _shape2, _shape3, _shape4, _shape5)


def suite_shapes():
    return tuple(fn.__name__.strip("_") for fn in _SHAPES)


def _normalized(grid, fn, amplitude):
    u = fn(grid.nodes())
    peak = float(np.sqrt(np.max(u[0] ** 2 + u[1] ** 2)))
    return DisplacementField(grid, u * (amplitude / peak))


def regression_suite(N=256, amplitudes=SUITE_AMPLITUDES, interp=None):
    """(name, TorusDiffeo) pairs for the 5 x 3 frozen T^2 inputs."""
    grid = GridSpec(2, N)
    out = []
    for fn in _SHAPES:
        for amp in amplitudes:
            name = f"{fn.__name__.strip('_')}-{amp:.0e}"
            field = _normalized(grid, fn, amp)
            d = make_diffeo(field, interp) if interp else make_diffeo(field)
            out.append((name, d))
    return out


def _annulus_bump(b):
    return smoothstep((b - 0.25) / 0.12) * (1.0 - smoothstep((b - 0.63) / 0.12))


def annulus_suite(N=256, amplitudes=SUITE_AMPLITUDES, interp=None):
    """Annulus-supported variants: the same shapes cut off to a band in
    the base coordinate, for the foliation-stage checks."""
    grid = GridSpec(2, N)
    out = []
    for fn in _SHAPES:
        for amp in amplitudes:
            name = f"annulus-{fn.__name__.strip('_')}-{amp:.0e}"
            x = grid.nodes()
            u = fn(x) * _annulus_bump(x[0])[None]
            peak = float(np.sqrt(np.max(u[0] ** 2 + u[1] ** 2)))
            field = DisplacementField(grid, u * (amp / max(peak, 1e-300)))
            d = make_diffeo(field, interp) if interp else make_diffeo(field)
            out.append((name, d))
    return out


def probe_direction(N=256):
    """Canonical smooth unit-size probe direction for the Lipschitz test."""
    grid = GridSpec(2, N)
    x = grid.nodes()
    u = np.stack(
        [
            np.sin(TWO_PI * x[1] + 0.3),
            np.cos(TWO_PI * x[0]) * np.sin(TWO_PI * x[1]),
        ]
    )
    peak = float(np.sqrt(np.max(u[0] ** 2 + u[1] ** 2)))
    return DisplacementField(grid, u / peak)
