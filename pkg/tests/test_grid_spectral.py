import numpy as np
import pytest

from torusfactor.errors import InputError
from torusfactor.grid import (
    DisplacementField,
    GridSpec,
    from_spectral,
    resample_dropped_mass,
    to_spectral,
    wrap_half,
)

TWO_PI = 2 * np.pi


def test_gridspec_validation():
    GridSpec(1, 16)
    GridSpec(2, 256)
    with pytest.raises(InputError):
        GridSpec(3, 64)
    with pytest.raises(InputError):
        GridSpec(1, 48)  # not a power of two
    with pytest.raises(InputError):
        GridSpec(2, 8)  # too small


def test_wrap_half_picks_smallest_representative():
    assert wrap_half(0.7) == pytest.approx(-0.3)
    assert wrap_half(-0.7) == pytest.approx(0.3)
    assert wrap_half(0.2) == 0.2
    assert wrap_half(3.25) == pytest.approx(0.25)


def test_constant_field_single_zero_mode():
    g = GridSpec(1, 32)
    f = DisplacementField.constant(g, [0.125])
    sf = to_spectral(f)
    assert sf.mode(0) == pytest.approx([0.125])
    coef = sf.coef.copy()
    coef[:, 0] = 0
    assert np.max(np.abs(coef)) < 1e-15


def test_sine_mode_coefficients():
    # sin(2 pi x) has coefficients -i/2 at k=+1 and +i/2 at k=-1
    g = GridSpec(1, 64)
    f = DisplacementField.from_callable(g, lambda x: np.sin(TWO_PI * x))
    sf = to_spectral(f)
    assert sf.mode(1)[0] == pytest.approx(-0.5j, abs=1e-14)
    assert sf.mode(-1)[0] == pytest.approx(0.5j, abs=1e-14)


def test_sine_mode_2d():
    g = GridSpec(2, 32)
    f = DisplacementField.from_callable(
        g, lambda x: np.stack([np.sin(TWO_PI * x[0]), np.zeros_like(x[0])])
    )
    sf = to_spectral(f)
    assert sf.mode((1, 0))[0] == pytest.approx(-0.5j, abs=1e-14)
    assert sf.mode((-1, 0))[0] == pytest.approx(0.5j, abs=1e-14)
    assert abs(sf.mode((1, 0))[1]) < 1e-15


@pytest.mark.parametrize("n,N", [(1, 64), (2, 32)])
def test_round_trip_random_field(rng, n, N):
    g = GridSpec(n, N)
    u = rng.randn(*g.field_shape)
    f = DisplacementField(g, u)
    back = from_spectral(to_spectral(f))
    assert np.max(np.abs(back.u - f.u)) < 1e-12


def test_hermitian_symmetry_enforced(rng):
    g = GridSpec(1, 32)
    f = DisplacementField(g, rng.randn(1, 32))
    sf = to_spectral(f)
    assert sf.hermitian_defect() < 1e-15


def test_spectral_resample_preserves_low_modes():
    g = GridSpec(1, 64)
    f = DisplacementField.from_callable(
        g, lambda x: np.sin(TWO_PI * x) + 0.3 * np.cos(3 * TWO_PI * x)
    )
    up = from_spectral(to_spectral(f), GridSpec(1, 128))
    down = from_spectral(to_spectral(up), g)
    assert np.max(np.abs(down.u - f.u)) < 1e-13


def test_resample_reports_dropped_mass():
    g = GridSpec(1, 64)
    f = DisplacementField.from_callable(g, lambda x: np.sin(20 * TWO_PI * x))
    sf = to_spectral(f)
    assert resample_dropped_mass(sf, GridSpec(1, 32)) == pytest.approx(0.5, abs=1e-12)
    assert resample_dropped_mass(sf, GridSpec(1, 128)) == 0.0


def test_field_immutability():
    g = GridSpec(1, 16)
    f = DisplacementField.zero(g)
    with pytest.raises(ValueError):
        f.u[0, 0] = 1.0
