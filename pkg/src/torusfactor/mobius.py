"""Writing a circle rotation as a single commutator of Moebius
transformations.

Determinant-one real 2x2 matrices act on the upper half-plane; the
boundary circle is parametrized by tau in R/Z through the Cayley
correspondence z = -cot(pi tau), under which the stabilizer of the
half-plane point i acts by rigid rotations.  The constructed pair
(A, B) consists of a fixed hyperbolic element and a rotated conjugate
of it, tuned so that the commutator [A, B] is elliptic with prescribed
rotation number theta, then conjugated so the elliptic fixed point sits
at the disk center and the boundary action is exactly the rotation.

The normalization is continuous through theta = 0: the elliptic fixed
point of [A, B(phi)] has a removable limit as phi -> 0 (the fixed point
of the first phi-derivative of the commutator), so the emitted family
theta -> (A(theta), B(theta)) stays Lipschitz at 0 with A(0) = B(0).
"""

from dataclasses import dataclass

import numpy as np

from .diffeo import TorusDiffeo, make_diffeo, identity, DEFAULT_INTERP
from .errors import ChartViolationError, InputError, SolverDivergenceError
from .grid import DisplacementField, GridSpec, wrap_half

__all__ = [
    "MobiusPair",
    "mobius_rotation_commutator",
    "mobius_to_circle_diffeo",
    "boundary_displacement",
    "fricke_trace",
    "hyperbolic_element",
    "contraction_path",
]

DEFAULT_S0 = 1.0
DEFAULT_THETA_MAX = 0.1

_I2 = np.eye(2)


# ---------------------------------------------------------------------------
# elementary SL(2, R) helpers
# ---------------------------------------------------------------------------


def _expm_traceless(X):
    """exp of a traceless real 2x2 matrix, closed form."""
    X = np.asarray(X, dtype=float)
    d = -np.linalg.det(X)  # = -det = a^2 + bc for [[a,b],[c,-a]]
    if d > 0:
        r = np.sqrt(d)
        return np.cosh(r) * _I2 + (np.sinh(r) / r) * X
    if d < 0:
        r = np.sqrt(-d)
        return np.cos(r) * _I2 + (np.sin(r) / r) * X
    return _I2 + X


def hyperbolic_element(s):
    """Hyperbolic with translation length s, axis through the disk center."""
    return np.diag([np.exp(0.5 * s), np.exp(-0.5 * s)])


def _rotation_element(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def _commutator(a, b):
    return a @ b @ np.linalg.inv(a) @ np.linalg.inv(b)


def fricke_trace(a, b):
    """tr[A,B] from traces only: trA^2 + trB^2 + tr(AB)^2
    - trA trB tr(AB) - 2."""
    ta = np.trace(a)
    tb = np.trace(b)
    tab = np.trace(a @ b)
    return ta * ta + tb * tb + tab * tab - ta * tb * tab - 2.0


def boundary_displacement(mats, tau):
    """Circle displacement of the boundary action, vectorized.

    ``mats`` is (..., 2, 2); ``tau`` is broadcast against the leading
    shape.  Works in homogeneous coordinates, so boundary poles need no
    special-casing.
    """
    mats = np.asarray(mats, dtype=float)
    tau = np.asarray(tau, dtype=float)
    z1 = -np.cos(np.pi * tau)
    z2 = np.sin(np.pi * tau)
    w1 = mats[..., 0, 0] * z1 + mats[..., 0, 1] * z2
    w2 = mats[..., 1, 0] * z1 + mats[..., 1, 1] * z2
    w = (w1 - 1j * w2) / (w1 + 1j * w2)
    tau_out = np.angle(w) / (2.0 * np.pi)
    return wrap_half(tau_out - tau)


def _elliptic_fixed_point(traceless):
    """Upper half-plane fixed point of an elliptic traceless matrix."""
    a = traceless[0, 0]
    b = traceless[0, 1]
    c = traceless[1, 0]
    disc = -(a * a + b * c)
    if disc <= 0 or c == 0.0:
        raise SolverDivergenceError(
            "commutator is not elliptic; rotation target out of range", []
        )
    root = np.sqrt(disc)
    x = a / c
    y = root / abs(c)
    return x, y


def _centering_map(x, y):
    """det-1 affine map sending i to x + iy (smooth in the fixed point)."""
    sy = np.sqrt(y)
    return np.array([[sy, x / sy], [0.0, 1.0 / sy]])


def _signed_rotation(mat):
    """Signed rotation number (turns) of an elliptic element after moving
    its fixed point to the disk center."""
    tr = np.trace(mat)
    traceless = mat - 0.5 * tr * _I2
    x, y = _elliptic_fixed_point(traceless)
    m = _centering_map(x, y)
    r = np.linalg.inv(m) @ mat @ m
    t = np.arctan2(r[1, 0], r[0, 0])
    return -t / np.pi, (x, y)


@dataclass(frozen=True)
class MobiusPair:
    """Determinant-one pair whose bracket is the rotation by ``theta``
    turns with fixed point at the disk center; A == B exactly at theta 0."""

    A: np.ndarray
    B: np.ndarray
    theta: float

    def commutator_matrix(self):
        return _commutator(self.A, self.B)


def _reach(s0):
    """Largest |theta| attainable with hyperbolic base length s0."""
    m = 2.0 - (np.cosh(s0) - 1.0) ** 2
    if m <= -2.0:
        return 0.5
    return float(np.arccos(0.5 * m) / np.pi)


def mobius_rotation_commutator(theta, s0=DEFAULT_S0, theta_max=DEFAULT_THETA_MAX):
    """Construct (A, B) with [A, B] = rotation by ``theta`` turns.

    A is the fixed hyperbolic of translation length s0; B is a rotated
    conjugate of A with the rotation angle found by a one-dimensional
    Newton solve on the commutator's rotation number; both are then
    conjugated so the bracket's fixed point is the disk center.
    """
    theta = float(theta)
    if abs(theta) > theta_max:
        raise InputError(f"|theta| = {abs(theta):.4g} exceeds theta_max = {theta_max}")
    reach = _reach(s0)
    if abs(theta) >= 0.98 * reach:
        raise InputError(
            f"theta = {theta:.4g} is out of range for base length s0 = {s0} "
            f"(reachable |theta| < {reach:.4g}); increase s0"
        )
    a = hyperbolic_element(s0)

    # derivative of the commutator at phi = 0; its elliptic fixed point is
    # the phi -> 0 limit of the bracket's fixed point
    e = np.array([[0.0, -1.0], [1.0, 0.0]])
    ia = np.linalg.inv(a)
    ad = a @ e @ ia
    ad2 = a @ ad @ ia
    w1 = -(e - 2.0 * ad + ad2)

    if theta == 0.0:
        x, y = _elliptic_fixed_point(w1 - 0.5 * np.trace(w1) * _I2)
        m = _centering_map(x, y)
        minv = np.linalg.inv(m)
        a_c = minv @ a @ m
        return MobiusPair(A=a_c, B=a_c, theta=0.0)

    def rot_of(phi):
        b = _rotation_element(phi) @ a @ _rotation_element(-phi)
        comm = _commutator(a, b)
        rot, _ = _signed_rotation(comm)
        return rot, b, comm

    # linear model rot ~ slope * phi; calibrate the sign numerically
    slope_mag = (np.cosh(s0) - 1.0) / np.pi
    rp, _, _ = rot_of(0.05)
    slope = slope_mag if rp > 0 else -slope_mag
    phi = float(np.clip(theta / slope, -0.25 * np.pi, 0.25 * np.pi))
    rot, b, comm = rot_of(phi)
    for _ in range(80):
        if abs(rot - theta) <= 5e-14:
            break
        d = 1e-7 * max(abs(phi), 1e-3)
        rot_p, _, _ = rot_of(phi + d)
        deriv = (rot_p - rot) / d
        if deriv == 0.0:
            raise SolverDivergenceError("rotation solve stalled (zero derivative)", [])
        phi = phi - (rot - theta) / deriv
        rot, b, comm = rot_of(phi)
    else:
        raise SolverDivergenceError(
            f"rotation solve did not converge (last rot = {rot:.3e})", []
        )
    _, (x, y) = _signed_rotation(comm)
    m = _centering_map(x, y)
    minv = np.linalg.inv(m)
    return MobiusPair(A=minv @ a @ m, B=minv @ b @ m, theta=theta)


def mobius_to_circle_diffeo(mat, grid, interp=DEFAULT_INTERP):
    """Sample the boundary action of a projective matrix as a circle
    diffeomorphism.  The identity matrix maps to the identity exactly;
    elements too far from rotations fail the chart bound and are
    rejected."""
    mat = np.asarray(mat, dtype=float)
    det = float(np.linalg.det(mat))
    if abs(det - 1.0) > 1e-9:
        raise InputError(f"matrix determinant {det:.6g} is not 1")
    if grid.n != 1:
        raise InputError("boundary actions are circle diffeomorphisms (n = 1)")
    if np.array_equal(mat, _I2) or np.array_equal(mat, -_I2):
        return identity(grid, interp)
    tau = grid.axis_points()
    u = boundary_displacement(mat, tau)
    try:
        return make_diffeo(DisplacementField(grid, u[None]), interp)
    except ChartViolationError as exc:
        raise ChartViolationError(
            f"boundary action is too far from a rotation for this chart: {exc}"
        ) from exc


def _first_variation(a):
    """d/dphi of [A, R_phi A R_-phi] at phi = 0; an elliptic matrix whose
    fixed point is the phi -> 0 limit of the bracket's fixed point."""
    e = np.array([[0.0, -1.0], [1.0, 0.0]])
    ia = np.linalg.inv(a)
    ad = a @ e @ ia
    ad2 = a @ ad @ ia
    return -(e - 2.0 * ad + ad2)


def _mat_inv2(m):
    """Batched inverse of (..., 2, 2) determinant-one matrices."""
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return out / det[..., None, None]


def _signed_rotation_batch(mats):
    """Vectorized signed rotation numbers and fixed points of elliptic
    (..., 2, 2) matrices."""
    tr = np.trace(mats, axis1=-2, axis2=-1)
    traceless = mats - 0.5 * tr[..., None, None] * _I2
    a = traceless[..., 0, 0]
    b = traceless[..., 0, 1]
    c = traceless[..., 1, 0]
    disc = -(a * a + b * c)
    if np.any(disc <= 0) or np.any(c == 0.0):
        raise SolverDivergenceError("non-elliptic bracket in batched solve", [])
    x = a / c
    y = np.sqrt(disc) / np.abs(c)
    sy = np.sqrt(y)
    m = np.zeros(mats.shape)
    m[..., 0, 0] = sy
    m[..., 0, 1] = x / sy
    m[..., 1, 1] = 1.0 / sy
    r = _mat_inv2(m) @ mats @ m
    rot = -np.arctan2(r[..., 1, 0], r[..., 0, 0]) / np.pi
    return rot, x, y, m


THETA_FLOOR = 1e-10


def rotation_pairs_batch(thetas, s0, tol=5e-14, max_iter=60):
    """Vectorized pair construction for a whole profile of rotation
    numbers sharing one hyperbolic base length.

    Rows with |theta| <= THETA_FLOOR are snapped to the theta = 0 pair
    (A0, A0): below the floor the bracket's traceless part drowns in
    rounding noise, and the reconstruction penalty of the snap is at most
    the floor itself.  Returns (A, B, A0) with A, B of shape (R, 2, 2).
    """
    thetas = np.asarray(thetas, dtype=float)
    rows = thetas.shape[0]
    reach = _reach(s0)
    if np.any(np.abs(thetas) >= 0.98 * reach):
        raise InputError(
            f"profile rotation {np.abs(thetas).max():.4g} out of range for "
            f"s0 = {s0:.4g} (reach {reach:.4g}); increase s0"
        )
    a = hyperbolic_element(s0)
    w1 = _first_variation(a)
    _, x1, y1, m1 = _signed_rotation_batch(w1[None])
    m1 = m1[0]
    m1_inv = _mat_inv2(m1)
    a0 = m1_inv @ a @ m1

    live = np.abs(thetas) > THETA_FLOOR
    A = np.broadcast_to(a0, (rows, 2, 2)).copy()
    B = A.copy()
    if not np.any(live):
        return A, B, a0

    th = thetas[live]
    slope_mag = (np.cosh(s0) - 1.0) / np.pi
    probe = 0.05
    rp, _, _, _ = _signed_rotation_batch(
        (_commutator(a, _rotation_element(probe) @ a @ _rotation_element(-probe)))[None]
    )
    slope = slope_mag if rp[0] > 0 else -slope_mag

    def comm_of(phi):
        c, s = np.cos(phi), np.sin(phi)
        rot_m = np.zeros((phi.shape[0], 2, 2))
        rot_m[:, 0, 0] = c
        rot_m[:, 0, 1] = -s
        rot_m[:, 1, 0] = s
        rot_m[:, 1, 1] = c
        b = rot_m @ a @ _mat_inv2(rot_m)
        return a[None] @ b @ np.linalg.inv(a)[None] @ _mat_inv2(b), b

    phi = np.clip(th / slope, -0.25 * np.pi, 0.25 * np.pi)
    comm, b = comm_of(phi)
    rot, _, _, _ = _signed_rotation_batch(comm)
    for _ in range(max_iter):
        err = rot - th
        if np.all(np.abs(err) <= tol):
            break
        d = 1e-7 * np.maximum(np.abs(phi), 1e-3)
        comm_p, _ = comm_of(phi + d)
        rot_p, _, _, _ = _signed_rotation_batch(comm_p)
        deriv = (rot_p - rot) / d
        if np.any(deriv == 0.0):
            raise SolverDivergenceError("batched rotation solve stalled", [])
        phi = phi - err / deriv
        comm, b = comm_of(phi)
        rot, _, _, _ = _signed_rotation_batch(comm)
    else:
        raise SolverDivergenceError(
            f"batched rotation solve did not converge "
            f"(worst error {np.abs(rot - th).max():.2e})",
            [],
        )
    _, x, y, m = _signed_rotation_batch(comm)
    minv = _mat_inv2(m)
    A[live] = minv @ a[None] @ m
    B[live] = minv @ b @ m
    return A, B, a0


def contraction_path(base, t):
    """One-parameter subgroup through a hyperbolic ``base`` evaluated at
    exp(t * log(base)); t = 0 gives the identity matrix exactly.

    ``t`` may be an array; returns (..., 2, 2).
    """
    base = np.asarray(base, dtype=float)
    tr = float(np.trace(base))
    if tr <= 2.0:
        raise InputError("contraction path requires a hyperbolic base (trace > 2)")
    half_len = np.arccosh(0.5 * tr)
    lmat = (base - 0.5 * tr * _I2) * (half_len / np.sinh(half_len))
    t = np.asarray(t, dtype=float)
    r = half_len * t
    return (
        np.cosh(r)[..., None, None] * _I2
        + (np.sinh(r) / half_len)[..., None, None] * lmat
    )
