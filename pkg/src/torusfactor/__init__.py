"""torusfactor: factor near-identity torus diffeomorphisms into explicit
ordered products of commutators, and certify the reconstruction."""

from .grid import (
    GridSpec,
    DisplacementField,
    SpectralField,
    to_spectral,
    from_spectral,
    wrap_half,
)
from .diffeo import (
    InterpSpec,
    TorusDiffeo,
    make_diffeo,
    identity,
    translation,
    compose,
    invert,
    commutator,
    c0_distance,
    c1_norm,
)

__version__ = "0.1.0"
