import numpy as np
import pytest

from torusfactor.diffeo import (
    InterpSpec,
    c0_distance,
    c1_norm,
    commutator,
    compose,
    identity,
    invert,
    make_diffeo,
    translation,
)
from torusfactor.errors import ChartViolationError
from torusfactor.grid import DisplacementField, GridSpec, wrap_half

TWO_PI = 2 * np.pi


def sine_field(grid, eps, freq=1):
    if grid.n == 1:
        return DisplacementField.from_callable(
            grid, lambda x: eps * np.sin(freq * TWO_PI * x)
        )
    return DisplacementField.from_callable(
        grid,
        lambda x: np.stack(
            [eps * np.sin(freq * TWO_PI * x[0]), np.zeros_like(x[0])]
        ),
    )


# -- make_diffeo -------------------------------------------------------------


def test_make_diffeo_identity():
    g = GridSpec(2, 32)
    d = make_diffeo(DisplacementField.zero(g))
    assert d.c1_norm() == 0.0
    assert d.is_identity()


def test_make_diffeo_c1_bound_matches_analytic():
    # u = eps sin(2 pi x1) in the first coordinate has sup|Du| = 2 pi eps
    g = GridSpec(2, 64)
    eps = 1e-3
    d = make_diffeo(sine_field(g, eps))
    assert d.c1_norm() == pytest.approx(TWO_PI * eps, abs=1e-10)


def test_make_diffeo_rejects_steep_field():
    # slope -1.5 at the origin violates sup|Du| < 1
    g = GridSpec(1, 64)
    f = DisplacementField.from_callable(
        g, lambda x: -(1.5 / TWO_PI) * np.sin(TWO_PI * x)
    )
    with pytest.raises(ChartViolationError):
        make_diffeo(f)


def test_make_diffeo_rejects_non_finite():
    g = GridSpec(1, 16)
    u = np.zeros((1, 16))
    u[0, 3] = np.nan
    with pytest.raises(ChartViolationError):
        make_diffeo(DisplacementField(g, u))


# -- compose -----------------------------------------------------------------


def test_translations_add():
    g = GridSpec(2, 32)
    f = translation(g, (0.4, 0.0))
    h = translation(g, (0.35, 0.2))
    fh = compose(f, h)
    want = translation(g, (0.75, 0.2))
    assert c0_distance(fh, want) < 1e-14


def test_compose_identity_left_is_exact():
    g = GridSpec(1, 64)
    h = make_diffeo(sine_field(g, 0.01))
    out = compose(identity(g), h)
    assert np.array_equal(out.u, h.u)


def test_compose_then_invert_is_identity():
    g = GridSpec(1, 128)
    f = make_diffeo(sine_field(g, 1e-3))
    assert c0_distance(compose(f, invert(f)), identity(g)) < 1e-9


def test_group_associativity_within_tolerance(rng):
    g = GridSpec(2, 64)
    x = g.nodes()

    def mk(a, b, p):
        u = np.stack(
            [a * np.sin(TWO_PI * x[1] + p), b * np.cos(TWO_PI * x[0] - p)]
        )
        return make_diffeo(DisplacementField(g, u))

    f, h, k = mk(2e-3, 1e-3, 0.0), mk(1e-3, 3e-3, 0.7), mk(2.5e-3, 2e-3, 1.9)
    left = compose(compose(f, h), k)
    right = compose(f, compose(h, k))
    # the gap is pure interpolation error, O(|u| (2 pi)^4 / N^4)
    assert c0_distance(left, right) < 3e-3 * TWO_PI**4 * 64.0**-4


# -- invert ------------------------------------------------------------------


def test_invert_translation():
    g = GridSpec(1, 32)
    f = translation(g, [0.1])
    fi = invert(f)
    assert c0_distance(fi, translation(g, [-0.1])) < 1e-14


def test_invert_identity():
    g = GridSpec(2, 32)
    assert invert(identity(g)).is_identity()


@pytest.mark.parametrize("N", [64, 128])
def test_invert_right_inverse_residual(N):
    g = GridSpec(1, N)
    f = make_diffeo(sine_field(g, 0.01))
    assert c0_distance(compose(f, invert(f)), identity(g)) < 1e-9


def test_resolution_law_left_inverse():
    # the interpolation error of the sampled inverse decays at fourth
    # order under grid doubling (the right-inverse order is node-exact
    # because Newton inverts the spline itself)
    errs = []
    for N in (32, 64, 128, 256):
        g = GridSpec(1, N)
        f = make_diffeo(sine_field(g, 0.05))
        errs.append(c0_distance(compose(invert(f), f), identity(g)))
        assert c0_distance(compose(f, invert(f)), identity(g)) < 1e-12
    for a, b in zip(errs, errs[1:]):
        assert b < a / 8.0
    # overall fourth-order bound err <= C N^-4 with a modest constant
    assert errs[-1] < 50.0 * 0.05 * 256.0**-4


# -- commutator ---------------------------------------------------------------


def test_commutator_with_identity():
    g = GridSpec(1, 64)
    h = make_diffeo(sine_field(g, 0.01))
    assert c0_distance(commutator(h, identity(g)), identity(g)) < 1e-13


def test_commutator_of_translations_is_identity():
    g = GridSpec(2, 32)
    a = translation(g, (0.3, 0.1))
    b = translation(g, (0.05, 0.45))
    assert c0_distance(commutator(a, b), identity(g)) < 1e-13


def test_commutator_first_order_twisted_difference():
    # [R_gamma, id + v] = id + (v o R_-gamma - v) + O(|v|^2)
    g = GridSpec(1, 256)
    gamma = 0.618033988749895
    eps = 1e-3
    h = make_diffeo(sine_field(g, eps))
    bracket = commutator(translation(g, [gamma]), h)
    x = g.nodes()[0]
    predicted = eps * np.sin(TWO_PI * (x - gamma)) - eps * np.sin(TWO_PI * x)
    resid = np.max(np.abs(wrap_half(bracket.u[0] - predicted)))
    assert resid < 2e-5  # second-order in eps


def test_bracket_inverse_law():
    g = GridSpec(1, 128)
    a = make_diffeo(sine_field(g, 5e-3))
    b = make_diffeo(sine_field(g, 4e-3, freq=2))
    prod = compose(commutator(a, b), commutator(b, a))
    assert c0_distance(prod, identity(g)) < 1e-11


# -- norms -------------------------------------------------------------------


def test_c0_distance_reflexive_and_translation():
    g = GridSpec(2, 32)
    f = translation(g, (0.25, 0.0))
    assert c0_distance(f, f) == 0.0
    assert c0_distance(identity(g), f) == pytest.approx(0.25)


def test_c0_distance_wraps_around():
    g = GridSpec(1, 32)
    assert c0_distance(identity(g), translation(g, [0.9])) == pytest.approx(0.1)


def test_c1_norm_exact_for_sine():
    g = GridSpec(1, 128)
    eps = 2e-3
    assert c1_norm(make_diffeo(sine_field(g, eps))) == pytest.approx(
        TWO_PI * eps, abs=1e-10
    )


def test_spectral_interp_matches_spline_for_smooth_fields():
    # the gap between the two engines is exactly the spline error,
    # O(|u''''| / N^4); trigonometric evaluation is exact here
    g = GridSpec(1, 64)
    f_spl = make_diffeo(sine_field(g, 0.01), InterpSpec("spline", (1, 1)))
    f_spec = make_diffeo(sine_field(g, 0.01), InterpSpec("spectral", (1, 1)))
    pts = np.linspace(0, 1, 101)[None, :]
    a = f_spl.eval_displacement(pts)
    b = f_spec.eval_displacement(pts)
    x = pts[0]
    exact = 0.01 * np.sin(TWO_PI * x)
    assert np.max(np.abs(b[0] - exact)) < 1e-13
    assert np.max(np.abs(a - b)) < 0.01 * TWO_PI**4 * (5 / 384) / 64**4 * 2
