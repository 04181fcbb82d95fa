"""Spanning foliations of the annulus and the decomposition of a
compactly supported annulus diffeomorphism into three leaf-preserving
factors.

The annulus R x T^1 is realized as the 2-torus band: axis 0 is the base
coordinate y (maps are compactly supported away from y = 0), axis 1 is
the fiber coordinate t.  Three foliations are obtained by shearing the
vertical fibration with shape functions

    h_1 = 0,   h_2(t) = c cos(2 pi t),   h_3(t) = c sin(2 pi t),

whose critical sets are disjoint, so the leaf directions (h_i'(t), 1)
span every tangent plane.  Travelling along a leaf is closed-form in the
t-parametrization, which makes the chained leaf-step chart `alpha` and
its partial stages exact (no interpolation).
"""

from dataclasses import dataclass

import numpy as np

from .diffeo import (
    TorusDiffeo,
    compose,
    invert,
    identity,
    DEFAULT_INTERP,
)
from .errors import ChartViolationError, InputError, InversionError
from .grid import DisplacementField, GridSpec, wrap_half

__all__ = [
    "FoliationSpec",
    "SplittingCoefficients",
    "split",
    "leaf_step",
    "alpha",
    "recover_X",
    "foliation_factors",
    "leaf_preservation_error",
    "shear_diffeo",
    "conjugate_to_horizontal",
    "conjugate_from_horizontal",
    "support_columns",
    "mask_outside_columns",
]

DEFAULT_AMPLITUDE = 0.04
STEP_BOUND = 0.25


@dataclass(frozen=True)
class FoliationSpec:
    """One of the three spanning foliations; ``index`` in {1, 2, 3}."""

    index: int
    amplitude: float = DEFAULT_AMPLITUDE

    def __post_init__(self):
        if self.index not in (1, 2, 3):
            raise InputError("foliation index must be 1, 2 or 3")
        if self.amplitude <= 0:
            raise InputError("foliation amplitude must be positive")

    def shape(self, t):
        t = np.asarray(t, dtype=float)
        if self.index == 1:
            return np.zeros_like(t)
        if self.index == 2:
            return self.amplitude * np.cos(2 * np.pi * t)
        return self.amplitude * np.sin(2 * np.pi * t)

    def shape_deriv(self, t):
        t = np.asarray(t, dtype=float)
        if self.index == 1:
            return np.zeros_like(t)
        if self.index == 2:
            return -2 * np.pi * self.amplitude * np.sin(2 * np.pi * t)
        return 2 * np.pi * self.amplitude * np.cos(2 * np.pi * t)

    def to_json_dict(self):
        return {"i": self.index, "c": self.amplitude}


def _specs(amplitude):
    return tuple(FoliationSpec(i, amplitude) for i in (1, 2, 3))


def spanning_gap(amplitude, samples=4096):
    """min over t of max(|h2'|, |h3'|); positive iff the critical sets of
    the two sheared shapes are disjoint."""
    t = np.arange(samples) / samples
    s2, s3 = _specs(amplitude)[1:]
    return float(np.min(np.maximum(np.abs(s2.shape_deriv(t)), np.abs(s3.shape_deriv(t)))))


@dataclass(frozen=True)
class SplittingCoefficients:
    """Coefficients expressing a tangent vector (a, b) at fiber coordinate
    t as c1 (0,1) + c2 (h2', 1) + c3 (h3', 1)."""

    c1: np.ndarray
    c2: np.ndarray
    c3: np.ndarray

    def as_array(self):
        return np.stack([np.asarray(self.c1), np.asarray(self.c2), np.asarray(self.c3)])


def split(v, t, amplitude=DEFAULT_AMPLITUDE):
    """Minimal-norm splitting of tangent vectors over the three leaf
    directions; the denominator h2'^2 + h3'^2 = (2 pi c)^2 never vanishes."""
    v = np.asarray(v, dtype=float)
    t = np.asarray(t, dtype=float)
    a, b = v[0], v[1]
    _, s2, s3 = _specs(amplitude)
    d2 = s2.shape_deriv(t)
    d3 = s3.shape_deriv(t)
    denom = d2 * d2 + d3 * d3
    c2 = a * d2 / denom
    c3 = a * d3 / denom
    c1 = b - c2 - c3
    return SplittingCoefficients(c1=c1, c2=c2, c3=c3)


def leaf_step(index, point, xi, amplitude=DEFAULT_AMPLITUDE):
    """Travel along the leaf of foliation ``index`` through ``point`` by
    fiber increment ``xi``: (y, t) -> (y + h_i(t+xi) - h_i(t), t + xi)."""
    xi = np.asarray(xi, dtype=float)
    if np.any(np.abs(xi) >= 0.5):
        raise ChartViolationError("leaf step increment must satisfy |xi| < 1/2")
    point = np.asarray(point, dtype=float)
    spec = FoliationSpec(index, amplitude)
    y, t = point[0], point[1]
    # a zero increment moves nothing, bitwise (vectorized transcendentals
    # may differ in the last ulp between the two evaluations)
    dy = np.where(xi == 0.0, 0.0, spec.shape(t + xi) - spec.shape(t))
    return np.stack([y + dy, t + xi])


def alpha(point, v, amplitude=DEFAULT_AMPLITUDE, upto=1):
    """Chained leaf-step chart: split v at the base point, then step along
    foliations 3, 2, 1 carrying the remaining coefficients unchanged
    (flat parallel transport).  ``upto=i`` stops after the stage of
    foliation i, giving the partial charts used by the factorization.

    The fiber output is exactly t + v_t when upto == 1, because the
    coefficients sum to the fiber component.
    """
    point = np.asarray(point, dtype=float)
    v = np.asarray(v, dtype=float)
    coeffs = split(v, point[1], amplitude)
    steps = {3: coeffs.c3, 2: coeffs.c2, 1: coeffs.c1}
    for bound in (abs(np.asarray(coeffs.c2)).max(initial=0.0),
                  abs(np.asarray(coeffs.c3)).max(initial=0.0)):
        if bound >= STEP_BOUND:
            raise ChartViolationError(
                f"tangent vector outside the leaf-chart trust radius "
                f"(step {bound:.3g} >= {STEP_BOUND})"
            )
    out = point.astype(float, copy=True)
    for i in (3, 2, 1):
        if i < upto:
            break
        out = leaf_step(i, out, steps[i], amplitude)
    return out


def recover_X(f, amplitude=DEFAULT_AMPLITUDE, tol=1e-12, max_iter=40):
    """Invert the chart: the vector field X with alpha(x, X(x)) = f(x).

    The fiber equation is linear (coefficients sum to the fiber
    displacement); the base equation is solved by a damped scalar Newton
    per node.  Returns a DisplacementField holding X.
    """
    grid = f.grid
    if grid.n != 2:
        raise InputError("the annulus factorization needs a 2-dimensional grid")
    nodes = grid.nodes()
    y, t = nodes[0], nodes[1]
    uf = f.u
    b = wrap_half(uf[1])  # fiber component of X, exact
    dy = wrap_half(uf[0])
    _, s2, s3 = _specs(amplitude)
    d2 = s2.shape_deriv(t)
    d3 = s3.shape_deriv(t)
    denom = d2 * d2 + d3 * d3
    beta2 = d2 / denom
    beta3 = d3 / denom

    def g_val(a):
        t3 = t + a * beta3
        t2 = t3 + a * beta2
        return s3.shape(t3) - s3.shape(t) + s2.shape(t2) - s2.shape(t3)

    def g_deriv(a):
        t3 = t + a * beta3
        t2 = t3 + a * beta2
        return (
            beta3 * s3.shape_deriv(t3)
            + (beta3 + beta2) * s2.shape_deriv(t2)
            - beta3 * s2.shape_deriv(t3)
        )

    a = dy.copy()
    r = g_val(a) - dy
    for _ in range(max_iter):
        worst = float(np.abs(r).max())
        if worst <= tol:
            break
        step = r / g_deriv(a)
        a_new = a - step
        r_new = g_val(a_new) - dy
        bad = np.abs(r_new) > np.abs(r)
        if np.any(bad):
            a_half = a - 0.5 * step
            a_new = np.where(bad, a_half, a_new)
            r_new = g_val(a_new) - dy
        a, r = a_new, r_new
    else:
        raise InversionError(
            f"leaf-chart inversion did not reach {tol:.1e} "
            f"(worst node residual {worst:.3e})",
            worst,
        )
    X = np.stack([a, b])
    return DisplacementField(grid, X)


def _alpha_image_field(grid, X, amplitude, upto):
    """Displacement field of x -> alpha(x, X(x), upto)."""
    nodes = grid.nodes()
    out = alpha(nodes, X.u, amplitude, upto=upto)
    return DisplacementField(grid, wrap_half(out - nodes))


def support_columns(u, axis=1):
    """Index range [lo, hi] of base columns carrying any displacement."""
    mask = np.any(u != 0.0, axis=(0, axis + 1))
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        return None
    return int(idx[0]), int(idx[-1])


def mask_outside_columns(field, lo, hi):
    """Zero the displacement outside base columns [lo, hi]."""
    u = np.array(field.u)
    u[:, :lo, :] = 0.0
    u[:, hi + 1 :, :] = 0.0
    return DisplacementField(field.grid, u)


def foliation_factors(f, amplitude=DEFAULT_AMPLITUDE, interp=None, newton_tol=1e-12):
    """Decompose f = g1 o g2 o g3 with g_i preserving foliation i.

    The partial charts give maps f_{X,i}; successive quotients
    f_{X,i} o f_{X,i+1}^{-1} move points along single leaves only, hence
    are leaf-preserving.  All factors inherit the exact support of f in
    the base direction (enforced bitwise).
    """
    interp = interp or f.interp
    grid = f.grid
    sup = support_columns(f.u)
    if sup is None:
        e = identity(grid, interp)
        return e, e, e
    lo, hi = sup
    if lo == 0 or hi == grid.N - 1:
        raise InputError(
            "annulus input must be compactly supported away from the cut "
            "(base column 0 carries displacement)"
        )
    X = recover_X(f, amplitude, tol=newton_tol)
    f3 = TorusDiffeo(_alpha_image_field(grid, X, amplitude, 3), interp, _validated=False)
    f2 = TorusDiffeo(_alpha_image_field(grid, X, amplitude, 2), interp, _validated=False)
    g3 = f3
    g2 = compose(f2, invert(f3))
    g1 = compose(f, invert(f2))
    g2 = TorusDiffeo(mask_outside_columns(g2.field, lo, hi), interp, c1_upper=g2.c1_upper, _validated=True)
    g1 = TorusDiffeo(mask_outside_columns(g1.field, lo, hi), interp, c1_upper=g1.c1_upper, _validated=True)
    return g1, g2, g3


def shear_diffeo(grid, spec, inverse=False, interp=DEFAULT_INTERP):
    """The shear (y, t) -> (y +- h_i(t), t) as an exact grid diffeo."""
    t = grid.nodes()[1]
    shape = spec.shape(t)
    if inverse:
        shape = -shape
    u = np.stack([shape, np.zeros_like(shape)])
    return TorusDiffeo(DisplacementField(grid, u), interp, _validated=False)


def conjugate_to_horizontal(g, spec, interp=None):
    """phi_i^{-1} o g o phi_i: maps a foliation-i-preserving diffeo to a
    fiber-preserving one."""
    interp = interp or g.interp
    grid = g.grid
    fwd = shear_diffeo(grid, spec, inverse=False, interp=interp)
    bwd = shear_diffeo(grid, spec, inverse=True, interp=interp)
    return compose(bwd, compose(g, fwd))


def conjugate_from_horizontal(g, spec, interp=None):
    interp = interp or g.interp
    grid = g.grid
    fwd = shear_diffeo(grid, spec, inverse=False, interp=interp)
    bwd = shear_diffeo(grid, spec, inverse=True, interp=interp)
    return compose(fwd, compose(g, bwd))


def leaf_preservation_error(g, spec):
    """sup over nodes of the base-coordinate motion of phi_i^{-1} g phi_i."""
    conj = conjugate_to_horizontal(g, spec)
    return float(np.max(np.abs(wrap_half(conj.u[0]))))
