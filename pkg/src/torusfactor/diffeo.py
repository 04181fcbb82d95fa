"""Diffeomorphism algebra on T^n: construction, composition, inversion,
commutators and norms.

A diffeomorphism is stored as the displacement field of f(x) = x + u(x).
Validity has two tiers:

* a *valid* diffeomorphism has det(I + Du) > 0 everywhere (orientation
  preserving local diffeomorphism of degree one, hence bijective);
* a *chart* element additionally satisfies sup ||Du|| < 1, the
  near-identity regime in which Newton inversion is a contraction and
  the whole constructive pipeline operates.

Group arithmetic is closed under validity but not under the chart bound;
compositions that leave the chart are reported through ChartWarning and
through the ``in_chart`` flag rather than rejected, because products of
chart elements legitimately live outside it.
"""

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ChartViolationError, ChartWarning, InversionError
from .grid import DisplacementField, GridSpec, wrap_half
from .interp import (
    PeriodicSpline1D,
    PeriodicSpline2D,
    SpectralEval1D,
    SpectralEval2D,
)

__all__ = [
    "InterpSpec",
    "TorusDiffeo",
    "make_diffeo",
    "identity",
    "translation",
    "compose",
    "invert",
    "commutator",
    "c0_distance",
    "c1_norm",
    "jacobian_grid",
]

NEWTON_TOL = 1e-13
NEWTON_MAX_ITER = 60


@dataclass(frozen=True)
class InterpSpec:
    """Interpolation policy: kind is 'spline' or 'spectral'; refine gives
    per-axis trigonometric oversampling factors for the spline grid."""

    kind: str = "spline"
    refine: tuple = (1, 1)

    def __post_init__(self):
        if self.kind not in ("spline", "spectral"):
            raise ValueError(f"unknown interpolation kind {self.kind!r}")


DEFAULT_INTERP = InterpSpec()


class TorusDiffeo:
    """An orientation-preserving diffeomorphism of T^n held as a
    displacement field plus interpolation metadata.

    Instances are immutable values; the evaluation spline and the exact
    C^1 data are cached lazily.  ``c1_upper`` is a cheap a-priori bound
    propagated through group operations, while ``c1_norm()`` computes the
    exact sup of the Jacobian operator norm by spectral differentiation.
    """

    def __init__(self, field, interp=DEFAULT_INTERP, c1_upper=None, _validated=False):
        self.field = field
        self.interp = interp
        self._c1_upper = c1_upper
        self._cache = {}
        if not _validated and c1_upper is None:
            # unknown provenance: compute the exact data right away
            self._validate_strict()

    # -- construction helpers -------------------------------------------------

    @property
    def grid(self):
        return self.field.grid

    @property
    def u(self):
        return self.field.u

    def is_identity(self):
        return self.field.is_zero()

    def _validate_strict(self):
        if not np.all(np.isfinite(self.u)):
            raise ChartViolationError("displacement field contains non-finite values")
        c1 = self.c1_norm()
        if self.det_min() <= 0.0:
            raise ChartViolationError(
                "Jacobian determinant is not positive everywhere: "
                f"min det(I+Du) = {self.det_min():.3e}"
            )
        self._c1_upper = c1

    @property
    def c1_upper(self):
        if self._c1_upper is None:
            self._c1_upper = self.c1_norm()
        return self._c1_upper

    @property
    def in_chart(self):
        return self.c1_upper < 1.0

    # -- cached analysis -------------------------------------------------------

    def jacobian(self):
        """Du at the nodes, shape (n, n) + grid.shape, by spectral
        differentiation (Nyquist zeroed)."""
        if "jac" not in self._cache:
            self._cache["jac"] = jacobian_grid(self.field)
        return self._cache["jac"]

    def c1_norm(self):
        if "c1" not in self._cache:
            jac = self.jacobian()
            if self.grid.n == 1:
                val = float(np.max(np.abs(jac[0, 0])))
            else:
                a, b = jac[0, 0], jac[0, 1]
                c, d = jac[1, 0], jac[1, 1]
                s = 0.5 * (a * a + b * b + c * c + d * d)
                t = np.sqrt(
                    (0.5 * (a * a + b * b - c * c - d * d)) ** 2 + (a * c + b * d) ** 2
                )
                val = float(np.sqrt(np.max(s + t)))
            self._cache["c1"] = val
        return self._cache["c1"]

    def det_min(self):
        if "det" not in self._cache:
            jac = self.jacobian()
            if self.grid.n == 1:
                det = 1.0 + jac[0, 0]
            else:
                det = (1.0 + jac[0, 0]) * (1.0 + jac[1, 1]) - jac[0, 1] * jac[1, 0]
            self._cache["det"] = float(np.min(det))
        return self._cache["det"]

    # -- evaluation ------------------------------------------------------------

    def _interpolator(self):
        if "spl" not in self._cache:
            if self.grid.n == 1:
                refine = self.interp.refine[0]
                if self.interp.kind == "spline":
                    self._cache["spl"] = PeriodicSpline1D(self.u[0], refine=refine)
                else:
                    self._cache["spl"] = SpectralEval1D(self.u[0])
            else:
                if self.interp.kind == "spline":
                    self._cache["spl"] = PeriodicSpline2D(self.u, refine=self.interp.refine)
                else:
                    self._cache["spl"] = SpectralEval2D(self.u)
        return self._cache["spl"]

    def eval_displacement(self, points):
        """Interpolated displacement at arbitrary points (n, ...)."""
        points = np.asarray(points, dtype=float)
        if self.grid.n == 1:
            return self._interpolator().eval(points[0])[None]
        return self._interpolator().eval(points)

    def eval_displacement_jacobian(self, points):
        points = np.asarray(points, dtype=float)
        if self.grid.n == 1:
            val, der = self._interpolator().eval_with_derivative(points[0])
            return val[None], der[None, None]
        return self._interpolator().eval_with_jacobian(points)

    def __call__(self, points):
        """Image points f(x) reduced to [0, 1)."""
        points = np.asarray(points, dtype=float)
        return (points + self.eval_displacement(points)) % 1.0

    def with_interp(self, interp):
        return TorusDiffeo(self.field, interp, c1_upper=self._c1_upper, _validated=True)

    def __repr__(self):
        return (
            f"TorusDiffeo(n={self.grid.n}, N={self.grid.N}, "
            f"c1<={self.c1_upper:.3g}, interp={self.interp.kind})"
        )


def jacobian_grid(dfield):
    """Spectral Jacobian of a displacement field at the nodes."""
    grid = dfield.grid
    axes = tuple(range(1, grid.n + 1))
    spec = np.fft.fftn(dfield.u, axes=axes)
    k = grid.deriv_freqs()
    jac = np.empty((grid.n, grid.n) + grid.shape)
    for j in range(grid.n):
        shape = [1] * (grid.n + 1)
        shape[j + 1] = grid.N
        mul = (2j * np.pi * k).reshape(shape)
        jac[:, j] = np.fft.ifftn(spec * mul, axes=axes).real
    return jac


def make_diffeo(field, interp=DEFAULT_INTERP):
    """Validate a displacement field as a chart element.

    Rejects fields with sup ||Du|| >= 1 or a non-positive Jacobian
    determinant anywhere on the grid; those lie outside the near-identity
    chart this constructor guards.
    """
    if not np.all(np.isfinite(field.u)):
        raise ChartViolationError("displacement field contains non-finite values")
    d = TorusDiffeo(field, interp, c1_upper=None, _validated=True)
    c1 = d.c1_norm()
    if c1 >= 1.0:
        raise ChartViolationError(
            f"field outside the near-identity chart: sup|Du| = {c1:.6g} >= 1"
        )
    if d.det_min() <= 0.0:
        raise ChartViolationError(
            f"orientation not preserved: min det(I+Du) = {d.det_min():.6g} <= 0"
        )
    d._c1_upper = c1
    return d


def identity(grid, interp=DEFAULT_INTERP):
    return TorusDiffeo(DisplacementField.zero(grid), interp, c1_upper=0.0, _validated=True)


def translation(grid, vec, interp=DEFAULT_INTERP):
    """The rigid rotation x -> x + vec."""
    fld = DisplacementField.constant(grid, wrap_half(np.atleast_1d(vec)))
    return TorusDiffeo(fld, interp, c1_upper=0.0, _validated=True)


def _result_interp(f, g):
    return f.interp if f.interp != DEFAULT_INTERP else g.interp


def compose(f, g):
    """h = f o g sampled at the nodes, f evaluated by interpolation.

    The displacement of h is reduced to the representative of smallest
    absolute value.  A result leaving the chart is reported via
    ChartWarning, not silently accepted.
    """
    if f.grid != g.grid:
        raise ChartViolationError("cannot compose diffeomorphisms on different grids")
    if f.is_identity():
        return g
    if g.is_identity():
        return f
    pts = g.grid.nodes() + g.u
    vals = f.eval_displacement(pts)
    u = wrap_half(g.u + vals)
    c1_upper = (1.0 + f.c1_upper) * (1.0 + g.c1_upper) - 1.0
    out = TorusDiffeo(
        DisplacementField(g.grid, u), _result_interp(f, g), c1_upper=c1_upper, _validated=True
    )
    if c1_upper >= 1.0 and f.in_chart and g.in_chart:
        warnings.warn(
            "composition may have left the near-identity chart (c1 bound >= 1)",
            ChartWarning,
            stacklevel=2,
        )
    return out


def invert(f, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Inverse diffeomorphism by damped Newton at every grid node.

    Solves x + u(x) = y from the starting guess x0 = y; non-convergence
    signals that f is outside the invertible regime for this grid.
    """
    if f.is_identity():
        return f
    grid = f.grid
    y = grid.nodes().reshape(grid.n, -1)
    x = y.copy()
    val, jac = f.eval_displacement_jacobian(x)
    r = wrap_half(x + val - y)
    rn = np.abs(r).max(axis=0)
    prev = None
    chord = False  # freeze the Jacobian once safely inside the basin
    for _ in range(max_iter):
        worst = float(rn.max())
        if worst <= tol:
            break
        if grid.n == 1:
            delta = r / (1.0 + jac[0, 0])
        else:
            a = 1.0 + jac[0, 0]
            b = jac[0, 1]
            c = jac[1, 0]
            d = 1.0 + jac[1, 1]
            det = a * d - b * c
            delta = np.stack([(d * r[0] - b * r[1]) / det, (-c * r[0] + a * r[1]) / det])
        x_new = x - delta
        chord = chord or worst < 1e-5
        if chord:
            val = f.eval_displacement(x_new)
        else:
            val, jac = f.eval_displacement_jacobian(x_new)
        r_new = wrap_half(x_new + val - y)
        rn_new = np.abs(r_new).max(axis=0)
        bad = rn_new > rn
        if np.any(bad):
            # halve the step where the full step made things worse
            x_new = np.where(bad, x - 0.5 * delta, x_new)
            if chord:
                val = f.eval_displacement(x_new)
            else:
                val, jac = f.eval_displacement_jacobian(x_new)
            r_new = wrap_half(x_new + val - y)
            rn_new = np.abs(r_new).max(axis=0)
        x, r, rn = x_new, r_new, rn_new
        if prev is not None and worst > 4.0 * prev and worst > 1e-6:
            raise InversionError(
                f"Newton inversion diverging (residual {worst:.3e})", worst
            )
        prev = worst
    else:
        raise InversionError(
            f"Newton inversion did not reach {tol:.1e} in {max_iter} iterations "
            f"(worst residual {worst:.3e})",
            worst,
        )
    u_inv = wrap_half(x - y).reshape(grid.field_shape)
    if f.c1_upper < 1.0:
        c1_upper = f.c1_upper / (1.0 - f.c1_upper)
        out = TorusDiffeo(
            DisplacementField(grid, u_inv), f.interp, c1_upper=c1_upper, _validated=True
        )
    else:
        out = TorusDiffeo(DisplacementField(grid, u_inv), f.interp, c1_upper=None, _validated=True)
        out._c1_upper = out.c1_norm()
    return out


def commutator(g, h):
    """The bracket [g, h] = g o h o g^-1 o h^-1, computed as
    (g o h) o (h o g)^-1 to spend one inversion instead of two."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ChartWarning)
        gh = compose(g, h)
        hg = compose(h, g)
        out = compose(gh, invert(hg))
    if not out.in_chart and g.in_chart and h.in_chart:
        warnings.warn(
            "commutator left the near-identity chart (c1 bound >= 1)",
            ChartWarning,
            stacklevel=2,
        )
    return out


def c0_distance(f, g):
    """Max over nodes of the toroidal distance |f(x) - g(x)|."""
    if f.grid != g.grid:
        raise ChartViolationError("c0_distance requires a common grid")
    diff = wrap_half(f.u - g.u)
    if f.grid.n == 1:
        return float(np.max(np.abs(diff)))
    return float(np.sqrt(np.max(diff[0] ** 2 + diff[1] ** 2)))


def c1_norm(f):
    """Exact sup of the node-wise operator norm of Du."""
    return f.c1_norm()
