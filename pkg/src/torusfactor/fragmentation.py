"""Covering T^2 by two annulus charts and splitting a near-identity
diffeomorphism into factors compactly supported in each chart.

The two charts remove one vertical circle each (the cuts x1 = 0 and
x1 = 1/2); the partition of unity lives on the first coordinate, with
polynomial smoothstep ramps of order 7 so all grid-resolved derivatives
vanish at the support edges.  The split is the scaled-field construction:
with X the displacement of f and X1 = lambda1 X, the factors are
f1 = (id + X1) and f2 = f1^{-1} o f, supported in the respective ramps
by construction (and enforced bitwise).
"""

from dataclasses import dataclass

import numpy as np

from .diffeo import TorusDiffeo, compose, identity, invert, DEFAULT_INTERP
from .errors import FragmentationError, InputError
from .grid import DisplacementField, GridSpec

__all__ = [
    "AnnulusCover",
    "PartitionOfUnity",
    "smoothstep",
    "fragment",
    "chart_transport",
    "chart_transport_inverse",
]

SMOOTHSTEP_ORDER = 7


def smoothstep(x):
    """Order-7 polynomial step: 0 for x <= 0, 1 for x >= 1, C^3 joins."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x**4 * (35.0 - x * (84.0 - x * (70.0 - 20.0 * x)))


@dataclass(frozen=True)
class AnnulusCover:
    """Two annulus charts U_i = (cut_i, cut_i + 1) x T^1 in the first
    coordinate; both are products of an interval with the circle."""

    cuts: tuple = (0.0, 0.5)

    @property
    def k(self):
        return len(self.cuts)

    def covers_grid(self, grid):
        """Every node must lie in the open interior of some chart."""
        x = grid.axis_points()
        ok = np.zeros(grid.N, dtype=bool)
        for cut in self.cuts:
            ok |= np.abs((x - cut) % 1.0) > 1e-12
        # a node is only excluded from chart i on the cut circle itself,
        # so coverage fails only if two cuts coincide on the grid
        covered = np.ones(grid.N, dtype=bool)
        for j, xx in enumerate(x):
            covered[j] = any(abs((xx - cut) % 1.0) > 1e-12 for cut in self.cuts)
        return bool(np.all(covered))


@dataclass(frozen=True)
class PartitionOfUnity:
    """lambda_1 + lambda_2 = 1 on the first coordinate, supports strictly
    inside the matching charts."""

    ramp_up: tuple = (0.2, 0.3)
    ramp_down: tuple = (0.7, 0.8)

    def lambda1(self, x):
        x = np.asarray(x, dtype=float) % 1.0
        a, b = self.ramp_up
        c, d = self.ramp_down
        up = smoothstep((x - a) / (b - a))
        down = smoothstep((x - c) / (d - c))
        return up * (1.0 - down)

    def lambda2(self, x):
        return 1.0 - self.lambda1(x)

    def support1(self):
        return (self.ramp_up[0], self.ramp_down[1])

    def support2(self):
        return (self.ramp_down[0], self.ramp_up[1] + 1.0)

    def validate_on_grid(self, grid, cover):
        x = grid.axis_points()
        l1 = self.lambda1(x)
        l2 = self.lambda2(x)
        if np.max(np.abs(l1 + l2 - 1.0)) > 1e-14:
            raise FragmentationError("partition does not sum to one on the grid")
        if np.any((l1 < 0) | (l1 > 1)):
            raise FragmentationError("lambda_1 leaves [0, 1]")
        lo1, hi1 = self.support1()
        cut1 = cover.cuts[0]
        cut2 = cover.cuts[1]
        if not (cut1 < lo1 and hi1 < cut1 + 1.0):
            raise FragmentationError("supp lambda_1 is not inside chart 1")
        lo2, hi2 = self.support2()
        if not (cut2 < lo2 and hi2 < cut2 + 1.0):
            raise FragmentationError("supp lambda_2 is not inside chart 2")
        return l1, l2


def _columns_of_support(weights):
    return np.nonzero(weights > 0.0)[0]


def fragment(f, cover=None, pou=None, chart_c1=0.5):
    """Split f into (f1, f2) with supp f_i inside chart i and f1 o f2 = f.

    Both partial fields must stay inside the fragmentation chart (their
    C^1 size below ``chart_c1``); violations are rejected with the
    offending index rather than silently mis-split.
    """
    cover = cover or AnnulusCover()
    pou = pou or PartitionOfUnity()
    grid = f.grid
    if grid.n != 2:
        raise InputError("fragmentation operates on T^2 diffeomorphisms")
    l1, _ = pou.validate_on_grid(grid, cover)
    if not cover.covers_grid(grid):
        raise FragmentationError("cover does not cover the grid")

    X = f.u
    X1 = l1[None, :, None] * X

    # chart-size check for every partial field (X1 and X2 = X itself)
    for i, part in ((1, X1), (2, X)):
        d = TorusDiffeo(DisplacementField(grid, part), f.interp, _validated=False)
        if d.c1_norm() >= chart_c1:
            raise FragmentationError(
                f"partial field {i} is outside the fragmentation chart "
                f"(c1 = {d.c1_norm():.4g} >= {chart_c1}); shrink the input or "
                f"move its support away from the partition ramps"
            )

    if f.is_identity():
        e = identity(grid, f.interp)
        return e, e

    if np.array_equal(X1, X):
        # supp f sits where lambda_1 == 1: the first factor carries all of f
        return f, identity(grid, f.interp)
    if not np.any(X1):
        return identity(grid, f.interp), f

    f1 = TorusDiffeo(DisplacementField(grid, X1), f.interp, _validated=False)
    f2 = compose(invert(f1), f)
    # supp f2 is contained in supp lambda_2 = {lambda_1 < 1}; enforce bitwise
    u2 = np.array(f2.u)
    u2[:, l1 >= 1.0, :] = 0.0
    f2 = TorusDiffeo(DisplacementField(grid, u2), f.interp, c1_upper=f2.c1_upper, _validated=True)
    return f1, f2


def _chart_roll(grid, cut):
    shift = cut * grid.N
    k = int(round(shift))
    if abs(shift - k) > 1e-12:
        raise FragmentationError("chart cut must sit on the grid for exact transport")
    return k


def chart_transport(f_i, cover, chart_index):
    """Conjugate by the affine chart map so the factor lands on the
    standard annulus (base coordinate starting at the chart's cut).

    On the grid this is an exact circular shift; the round trip is the
    identity at the nodes.  Support leaking across the cut is an error.
    """
    grid = f_i.grid
    cut = cover.cuts[chart_index - 1]
    k = _chart_roll(grid, cut)
    u = np.roll(f_i.u, -k, axis=1)
    if np.any(u[:, 0, :] != 0.0):
        raise FragmentationError(
            f"factor support touches the cut of chart {chart_index}"
        )
    return TorusDiffeo(
        DisplacementField(grid, u), f_i.interp, c1_upper=f_i.c1_upper, _validated=True
    )


def chart_transport_inverse(g, cover, chart_index):
    grid = g.grid
    cut = cover.cuts[chart_index - 1]
    k = _chart_roll(grid, cut)
    u = np.roll(g.u, k, axis=1)
    return TorusDiffeo(
        DisplacementField(grid, u), g.interp, c1_upper=g.c1_upper, _validated=True
    )
