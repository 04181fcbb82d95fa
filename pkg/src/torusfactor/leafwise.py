"""Leafwise reduction on the annulus: fiber-preserving diffeomorphisms
as families of circle diffeomorphisms, solved leaf by leaf and
reassembled into two genuinely compactly supported commutator pairs.

A fiber-preserving map F(b, t) = (b, F_b(t)) is `curried` into its leaf
maps (one circle diffeomorphism per base grid row).  Each leaf is solved
independently in the rotation-bracket normal form F_b = R_{lam(b)} o
[R_gamma, h_b].  Reassembly then uses the exact conjugation identity

    R_lam o [R_gamma, h] = [R_gamma, R_lam h R_lam^{-1}] o R_lam

so the family splits into bracket one, [tapered rotation, conjugated h
family], and bracket two, the rotation profile R_{lam(b)} written as a
single fiberwise Moebius commutator.  The rotation factor is not
compactly supported on its own; it is cut off by a smooth taper equal to
one on the family support, which changes nothing on any leaf where the
h family acts.  The Moebius pair is glued to the identity across the
same margin by contracting its hyperbolic base along its one-parameter
subgroup, so every emitted factor is identically zero outside the
declared enlarged support.
"""

from dataclasses import dataclass

import numpy as np

from .diffeo import TorusDiffeo, DEFAULT_INTERP
from .errors import InputError, LeafwiseError
from .fragmentation import smoothstep
from .grid import DisplacementField, GridSpec, wrap_half
from .herman import LeafBatchResult, herman_solve_batch
from .mobius import boundary_displacement, contraction_path, rotation_pairs_batch

__all__ = [
    "LeafFamily",
    "TaperProfile",
    "curry",
    "uncurry",
    "leafwise_herman",
    "taper_rotation_gamma",
    "rotation_family_commutator",
    "decompose_leafwise",
    "LeafwiseDecomposition",
]

DEFAULT_LEAF_TOL = 1e-8
DEFAULT_MARGIN = 0.09
DEFAULT_VARIATION = 50.0
DEFAULT_S_FACTOR = 4.0
DEFAULT_S_MIN = 0.02
EDGE_GAP_COLS = 2


@dataclass(frozen=True)
class LeafFamily:
    """Per-row circle diffeomorphisms over the base grid b_j = j / M.

    ``V[j]`` is the displacement of the leaf map at b_j; rows outside
    ``support`` (inclusive index range) are exactly zero.
    """

    grid: GridSpec
    V: np.ndarray
    support: tuple | None

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        if V.shape != (self.grid.N, self.grid.N):
            raise InputError("leaf family must hold one row per base grid point")
        object.__setattr__(self, "V", V)

    @property
    def n_leaves(self):
        return self.grid.N

    def base_points(self):
        return self.grid.axis_points()

    def row_variation(self):
        """Largest c0 distance between adjacent leaf maps (cyclic)."""
        d = np.abs(wrap_half(np.diff(self.V, axis=0, append=self.V[:1])))
        return float(d.max()) if d.size else 0.0


def _row_support(V):
    rows = np.nonzero(np.any(V != 0.0, axis=1))[0]
    if rows.size == 0:
        return None
    return int(rows[0]), int(rows[-1])


def curry(F, leaf_tol=DEFAULT_LEAF_TOL):
    """Leaf maps of a fiber-preserving diffeomorphism on the annulus.

    The base coordinate must move by at most ``leaf_tol`` at every node;
    the residual base motion is discarded by the projection.
    """
    if F.grid.n != 2:
        raise InputError("curry expects a diffeomorphism of the annulus band")
    base_motion = float(np.max(np.abs(wrap_half(F.u[0]))))
    if base_motion > leaf_tol:
        raise LeafwiseError(
            f"not leaf-preserving: base coordinate moves by {base_motion:.3e} "
            f"> {leaf_tol:.1e}"
        )
    V = wrap_half(np.array(F.u[1]))
    return LeafFamily(grid=F.grid, V=V, support=_row_support(V))


def uncurry(family, interp=DEFAULT_INTERP, variation_bound=DEFAULT_VARIATION):
    """Assemble the leaf maps into a fiber-preserving diffeomorphism;
    the base coordinate is untouched exactly."""
    limit = variation_bound / family.n_leaves
    if family.row_variation() > limit:
        raise LeafwiseError(
            f"adjacent leaf maps differ by {family.row_variation():.3e} "
            f"> {limit:.3e}; family too rough to sample at this resolution"
        )
    u = np.stack([np.zeros_like(family.V), family.V])
    return TorusDiffeo(
        DisplacementField(family.grid, u), interp, c1_upper=None, _validated=False
    )


@dataclass(frozen=True)
class TaperProfile:
    """Smooth cutoff on the base interval: one on the family support,
    order-7 polynomial ramps across the margins, exactly zero outside the
    enlarged support.  ``edge_gap`` is the number of base columns that
    must stay clear between the enlarged support and the annulus cut
    (callers that conjugate the factors afterwards need extra room)."""

    n: int
    support: tuple
    margin_cols: int
    edge_gap: int = EDGE_GAP_COLS

    def __post_init__(self):
        lo, hi = self.support
        if lo - self.margin_cols < self.edge_gap or hi + self.margin_cols > self.n - 1 - self.edge_gap:
            raise LeafwiseError(
                "enlarged support leaves no gap to the annulus boundary; "
                "shrink the margin or the input support"
            )

    @property
    def enlarged(self):
        return (self.support[0] - self.margin_cols, self.support[1] + self.margin_cols)

    def values(self):
        """chi sampled on the base grid."""
        lo, hi = self.support
        m = self.margin_cols
        j = np.arange(self.n, dtype=float)
        chi = np.zeros(self.n)
        chi[lo : hi + 1] = 1.0
        left = slice(lo - m, lo)
        chi[left] = smoothstep((j[left] - (lo - m)) / m)
        right = slice(hi + 1, hi + 1 + m)
        chi[right] = smoothstep(((hi + m) - j[right]) / m)
        return chi

    def ramp(self):
        """Path position along the margins: 1 on support, 0 outside."""
        return self.values()


def taper_rotation_gamma(gamma, profile, grid, interp=DEFAULT_INTERP):
    """The tapered rotation (b, t) -> (b, t + gamma chi(b)).

    On every leaf where the solved family acts, chi is one and the map
    is the full rotation, so brackets against the family agree with the
    untapered ones; off the support the bracket partner is the identity
    and the taper only ensures compact support of this factor.
    """
    chi = profile.values()
    u = np.zeros((2, grid.N, grid.N))
    u[1] = (gamma * chi)[:, None]
    return TorusDiffeo(DisplacementField(grid, u), interp, c1_upper=None, _validated=False)


def leafwise_herman(family, gamma_cert, tol=1e-10, max_iter=30, trust_c1=0.2):
    """Independent rotation-bracket solve on every sampled leaf.

    Outside the family support the result is exactly (0, id): those rows
    are never touched by the iteration.  Any leaf failure aborts with the
    leaf index and residual history attached.
    """
    result = herman_solve_batch(
        family.V, gamma_cert, tol=tol, max_iter=max_iter, trust_c1=trust_c1
    )
    h_family = LeafFamily(grid=family.grid, V=result.V, support=_row_support(result.V))
    return result.lam, h_family, result


def _conjugate_family_by_rotation(h_family, lam):
    """R_lam h R_lam^{-1} per leaf: the displacement is shifted by lam.

    Exact spectral phase shift; identity rows stay identity bitwise.
    """
    V = np.array(h_family.V)
    live = np.any(V != 0.0, axis=1) & (lam != 0.0)
    if np.any(live):
        n = V.shape[1]
        k = np.fft.fftfreq(n, d=1.0 / n)  # integer frequencies
        phase = np.exp(-2j * np.pi * np.outer(lam[live], k))
        spec = np.fft.fft(V[live], axis=1)
        V[live] = np.fft.ifft(spec * phase, axis=1).real
    return LeafFamily(grid=h_family.grid, V=V, support=_row_support(V))


def rotation_family_commutator(
    lam,
    profile,
    grid,
    s_factor=DEFAULT_S_FACTOR,
    s_min=DEFAULT_S_MIN,
    interp=DEFAULT_INTERP,
):
    """One commutator pair (G, H) on the annulus with [G_b, H_b] equal to
    the rotation by lam(b) on every leaf, both factors compactly
    supported in the enlarged support.

    Inside the support the pair is the fiberwise Moebius construction
    with a hyperbolic base sized to the profile; across the margins both
    factors follow the common contraction path of the base to the
    identity, so their bracket stays the identity there.
    """
    lam = np.asarray(lam, dtype=float)
    lam_max = float(np.abs(lam).max(initial=0.0))
    if lam_max == 0.0:
        e = TorusDiffeo(
            DisplacementField.zero(grid), interp, c1_upper=0.0, _validated=True
        )
        return e, e, {"s0": 0.0, "lam_max": 0.0}
    s0 = max(float(np.arccosh(1.0 + s_factor * np.pi * lam_max)), s_min)
    lo, hi = profile.support
    sup_rows = slice(lo, hi + 1)
    A, B, base = rotation_pairs_batch(lam[sup_rows], s0)

    tau = grid.axis_points()
    UG = np.zeros((grid.N, grid.N))
    UH = np.zeros((grid.N, grid.N))
    UG[sup_rows] = boundary_displacement(A[:, None], tau[None, :])
    UH[sup_rows] = boundary_displacement(B[:, None], tau[None, :])

    ramp = profile.ramp()
    margin_rows = np.nonzero((ramp > 0.0) & (ramp < 1.0))[0]
    if margin_rows.size:
        mats = contraction_path(base, ramp[margin_rows])
        disp = boundary_displacement(mats[:, None], tau[None, :])
        UG[margin_rows] = disp
        UH[margin_rows] = disp

    fam_g = LeafFamily(grid=grid, V=UG, support=_row_support(UG))
    fam_h = LeafFamily(grid=grid, V=UH, support=_row_support(UH))
    G = uncurry(fam_g, interp)
    H = uncurry(fam_h, interp)
    return G, H, {"s0": s0, "lam_max": lam_max}


@dataclass
class LeafwiseDecomposition:
    """Two commutator pairs whose bracket product reconstructs the input,
    plus per-leaf solver diagnostics."""

    pairs: list
    lam: np.ndarray
    profile: TaperProfile
    s0: float
    leaf_iterations: np.ndarray
    leaf_residuals: np.ndarray
    history: list


def decompose_leafwise(
    F,
    gamma_cert,
    leaf_tol=1e-10,
    curry_tol=DEFAULT_LEAF_TOL,
    margin=DEFAULT_MARGIN,
    s_factor=DEFAULT_S_FACTOR,
    s_min=DEFAULT_S_MIN,
    trust_c1=0.2,
    max_iter=30,
    interp=None,
    edge_gap=EDGE_GAP_COLS,
):
    """Split a fiber-preserving annulus diffeomorphism into two compactly
    supported commutator pairs.

    Pair one brackets the tapered rotation against the conjugated h
    family; pair two realizes the leftover rotation profile as a
    fiberwise Moebius commutator.  The product of the two brackets (in
    that order) reconstructs F up to the leaf solver tolerance and
    interpolation error.
    """
    interp = interp or F.interp
    grid = F.grid
    family = curry(F, leaf_tol=curry_tol)
    if family.support is None:
        e = TorusDiffeo(DisplacementField.zero(grid), interp, c1_upper=0.0, _validated=True)
        return LeafwiseDecomposition(
            pairs=[(e, e), (e, e)],
            lam=np.zeros(grid.N),
            profile=None,
            s0=0.0,
            leaf_iterations=np.zeros(grid.N, dtype=int),
            leaf_residuals=np.zeros(grid.N),
            history=[],
        )
    gamma = float(gamma_cert.gamma_array()[0])
    lam, h_family, diag = leafwise_herman(
        family, gamma_cert, tol=leaf_tol, max_iter=max_iter, trust_c1=trust_c1
    )
    margin_cols = max(4, int(round(margin * grid.N)))
    profile = TaperProfile(
        n=grid.N, support=family.support, margin_cols=margin_cols, edge_gap=edge_gap
    )
    h_conj = _conjugate_family_by_rotation(h_family, lam)
    g_taper = taper_rotation_gamma(gamma, profile, grid, interp)
    h_big = uncurry(h_conj, interp)
    G, H, mob_info = rotation_family_commutator(
        lam, profile, grid, s_factor=s_factor, s_min=s_min, interp=interp
    )
    return LeafwiseDecomposition(
        pairs=[(g_taper, h_big), (G, H)],
        lam=lam,
        profile=profile,
        s0=mob_info["s0"],
        leaf_iterations=diag.iterations,
        leaf_residuals=diag.residuals,
        history=diag.history,
    )
