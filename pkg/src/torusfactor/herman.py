"""Nonlinear solver for the rotation-bracket normal form on T^n.

The map under study is  H(lambda, h) = R_lambda o [R_gamma, h]  for a
fixed certified rotation gamma.  Near the identity its linearization at
(0, id) is the twisted difference  u = dlambda + dv o R_{-gamma} - dv,
so each Newton step peels the error off on the left and inverts that
linear model in Fourier space:

    e_m = f o H(lambda_m, h_m)^{-1} = id + u_m
    solve  u_m = dlambda + dv o R_{-gamma} - dv
    lambda_{m+1} = lambda_m + dlambda,   h_{m+1} = (id + dv) o h_m

The accepted solution always re-certifies itself: the reported residual
is recomputed by composing R_lambda o [R_gamma, h] from scratch.
"""

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .cohomology import DiophantineVector, solve_cohomological
from .diffeo import (
    TorusDiffeo,
    ChartWarning,
    c0_distance,
    commutator,
    compose,
    identity,
    invert,
    translation,
)
from .errors import ChartViolationError, SolverDivergenceError
from .grid import DisplacementField, GridSpec, from_spectral, to_spectral, wrap_half
from .interp import PeriodicSpline1D

__all__ = [
    "HermanSolution",
    "herman_map",
    "herman_solve",
    "LeafBatchResult",
    "herman_solve_batch",
]

DEFAULT_TRUST_C1 = 0.05

# Spectral floor for Newton steps: error modes below this are rounding
# noise and must not be fed to the small-divisor division, which would
# amplify them by |k|^tau / C and stall the iteration near the floor.
STEP_SPECTRUM_FLOOR = 1e-14
LEAF_REFINE = 2

# Newton-step mode cutoff for the batched leaf solver.  The divisor
# amplification grows like k^tau, so on fine grids the highest modes turn
# rounding dust into a residual floor above tolerance; trust-region leaf
# maps are analytic with no signal up there.  Out-of-band content is
# still measured by the recomputed residual, so a genuinely rough input
# fails loudly instead of being silently smoothed.
#
# The rowwise splines are built on a refined grid: the evaluation error
# of the unrefined spline is itself large enough to hit the resonant
# divisors once amplified.
STEP_MODE_CUTOFF = 64

# Tikhonov mollifier for the Newton step: modes whose divisor modulus is
# well below this scale take damped steps (factor |d|^2/(|d|^2 + mu^2)).
# The quasi-Newton loop re-injects resonant modes with a gain
# proportional to their amplification, so undamped steps can turn a
# near-resonance (gamma close to a rational p/q with q inside the band)
# into exponential growth.  Damping trades that for slow linear
# convergence at those modes; genuine resonant signal that cannot
# converge within the iteration budget still fails the residual check.
STEP_MOLLIFIER = 0.05


def _mollified_inverse(divisor, mu):
    """1/divisor damped to conj(d)/(|d|^2 + mu^2) near resonances."""
    return np.conj(divisor) / (np.abs(divisor) ** 2 + mu * mu)


@dataclass
class HermanSolution:
    """Solution record; ``residual`` is recomputed from scratch by
    composing the normal form, never trusted from the iteration."""

    lam: np.ndarray
    h: TorusDiffeo
    residual: float
    iterations: int
    history: list

    def to_json_dict(self):
        return {
            "lambda": [float(v) for v in np.atleast_1d(self.lam)],
            "residual": self.residual,
            "iterations": self.iterations,
            "history": [float(r) for r in self.history],
        }


def herman_map(lam, h, gamma):
    """R_lambda o [R_gamma, h], composed exactly per definition."""
    grid = h.grid
    gvec = gamma.gamma_array() if isinstance(gamma, DiophantineVector) else np.atleast_1d(gamma)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ChartWarning)
        bracket = commutator(translation(grid, gvec), h)
        return compose(translation(grid, np.atleast_1d(lam)), bracket)


def _mollify_solution(X, gamma_cert, mu):
    """Damp the modes of a cohomological solution whose divisors sit near
    a resonance; a no-op when mu is falsy."""
    if not mu:
        return X
    grid = X.grid
    gamma = gamma_cert.gamma_array()
    k = grid.freqs().astype(float)
    if grid.n == 1:
        dot = k * gamma[0]
    else:
        dot = np.add.outer(k * gamma[0], k * gamma[1])
    divisor = np.exp(-2j * np.pi * dot) - 1.0
    damp = np.abs(divisor) ** 2 / (np.abs(divisor) ** 2 + mu * mu)
    if grid.n == 1:
        damp[0] = 1.0
    else:
        damp[0, 0] = 1.0
    return type(X)(grid, X.coef * damp[None])


def herman_solve(
    f,
    gamma_cert,
    tol=1e-9,
    max_iter=30,
    trust_c1=DEFAULT_TRUST_C1,
    mollifier=STEP_MOLLIFIER,
):
    """Solve H(lambda, h) = f by the quasi-Newton iteration above.

    Raises SolverDivergenceError (carrying the residual history) when the
    residual grows twice in a row or an intermediate h leaves the chart;
    raises ChartViolationError when f is outside the trust region.
    """
    grid = f.grid
    if f.c1_norm() > trust_c1:
        raise ChartViolationError(
            f"input outside the solver trust region: c1 = {f.c1_norm():.4g} > {trust_c1}"
        )
    lam = np.zeros(grid.n)
    h = identity(grid, f.interp)
    history = []
    best = (np.inf, None, None)
    increases = 0
    for it in range(max_iter + 1):
        current = herman_map(lam, h, gamma_cert)
        resid = c0_distance(current, f)
        history.append(resid)
        if resid < best[0]:
            best = (resid, lam, h)
        if resid <= tol:
            return HermanSolution(lam, h, resid, it, history)
        if resid > 1.5 * best[0]:
            increases += 1
            if increases >= 2:
                raise SolverDivergenceError(
                    f"residual increased twice in a row at iteration {it} "
                    f"(best {best[0]:.3e} > tol {tol:.1e})",
                    history,
                )
        else:
            increases = 0
        if it == max_iter:
            break
        err = compose(f, invert(current))
        spec = to_spectral(err.field)
        coef = np.where(np.abs(spec.coef) < STEP_SPECTRUM_FLOOR, 0.0, spec.coef)
        sol = solve_cohomological(type(spec)(spec.grid, coef), gamma_cert)
        lam = wrap_half(lam + sol.lam)
        dv = from_spectral(_mollify_solution(sol.X, gamma_cert, mollifier), grid)
        try:
            step = TorusDiffeo(dv, f.interp, c1_upper=None, _validated=False)
            h = compose(step, h)
        except ChartViolationError as exc:
            raise SolverDivergenceError(
                f"Newton step left the chart at iteration {it}: {exc}", history
            ) from exc
        if not h.in_chart:
            raise SolverDivergenceError(
                f"intermediate h left the chart at iteration {it}", history
            )
    raise SolverDivergenceError(
        f"no convergence to {tol:.1e} within {max_iter} iterations "
        f"(best residual {best[0]:.3e})",
        history,
    )


# ---------------------------------------------------------------------------
# batched circle solver: one independent 1-dimensional solve per row
# ---------------------------------------------------------------------------


@dataclass
class LeafBatchResult:
    lam: np.ndarray          # (R,) mean rotation per row
    V: np.ndarray            # (R, N) displacement of h per row
    residuals: np.ndarray    # (R,) final recomputed residual per row
    iterations: np.ndarray   # (R,) iterations spent per row
    history: list            # list of (row_max_residual) per iteration


def _wrap(x):
    return x - np.round(x)


def _invert_rows(V, tol=1e-13, max_iter=60):
    """Rowwise Newton inversion of t -> t + V[r](t) on [0,1)."""
    rows, n = V.shape
    base = np.arange(n) / n
    y = np.broadcast_to(base, (rows, n))
    x = y.copy()
    spl = PeriodicSpline1D(V, refine=LEAF_REFINE)
    val, der = spl.eval_with_derivative(x)
    r = _wrap(x + val - y)
    for _ in range(max_iter):
        worst = float(np.abs(r).max()) if r.size else 0.0
        if worst <= tol:
            break
        delta = r / (1.0 + der)
        x_new = x - delta
        val, der = spl.eval_with_derivative(x_new)
        r_new = _wrap(x_new + val - y)
        bad = np.abs(r_new) > np.abs(r)
        if np.any(bad):
            x_new = np.where(bad, x - 0.5 * delta, x_new)
            val, der = spl.eval_with_derivative(x_new)
            r_new = _wrap(x_new + val - y)
        x, r = x_new, r_new
    else:
        raise SolverDivergenceError(
            f"rowwise inversion stalled at residual {worst:.3e}", [worst]
        )
    return _wrap(x - y)


def _rows_compose_disp(U, W):
    """Displacement of (id + U) o (id + W): W + U(t + W) rowwise."""
    spl = PeriodicSpline1D(U, refine=LEAF_REFINE)
    base = np.arange(U.shape[1]) / U.shape[1]
    return _wrap(W + spl.eval(base[None, :] + W))


def _rows_c1(V):
    n = V.shape[1]
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0
    dv = np.fft.ifft(np.fft.fft(V, axis=1) * (2j * np.pi * k), axis=1).real
    return np.abs(dv).max(axis=1)


def herman_solve_batch(
    F,
    gamma_cert,
    tol=1e-10,
    max_iter=30,
    trust_c1=0.2,
    mode_cutoff=STEP_MODE_CUTOFF,
    mollifier=STEP_MOLLIFIER,
):
    """Independent circle solves for a stack of rows F (R, N).

    Rows that are exactly zero stay exactly (0, id).  All rows share the
    same gamma; iteration order over rows is irrelevant (each row only
    ever reads its own data), matching the leafwise concurrency contract.
    """
    F = np.asarray(F, dtype=float)
    rows, n = F.shape
    gamma = float(gamma_cert.gamma_array()[0])
    k = np.fft.fftfreq(n, d=1.0 / n).astype(float)
    divisor = np.exp(-2j * np.pi * k * gamma) - 1.0
    kinf = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    floor = gamma_cert.C_emp / np.maximum(kinf, 1.0) ** gamma_cert.tau
    active_k = kinf > 0
    if mode_cutoff is not None:
        active_k = active_k & (kinf <= mode_cutoff)
    if np.any(active_k & (np.abs(divisor) < 0.5 * floor)):
        raise SolverDivergenceError(
            "certified divisor floor breached on this grid; re-certify gamma", []
        )
    c1_rows = _rows_c1(F)
    if float(c1_rows.max(initial=0.0)) > trust_c1:
        raise ChartViolationError(
            f"leaf outside trust region: worst c1 = {c1_rows.max():.4g} > {trust_c1}"
        )

    lam = np.zeros(rows)
    V = np.zeros_like(F)
    best = np.abs(_wrap(F)).max(axis=1)  # residual of (0, id)
    best_lam = lam.copy()
    best_V = V.copy()
    iterations = np.zeros(rows, dtype=int)
    history = [float(best.max(initial=0.0))]
    rises = np.zeros(rows, dtype=int)
    frozen = np.zeros(rows, dtype=bool)
    base = np.arange(n) / n
    inv_div = _mollified_inverse(divisor, mollifier) if mollifier else None

    active = (best > tol) & ~frozen
    for it in range(max_iter):
        if not np.any(active):
            break
        idx = np.nonzero(active)[0]
        Va = V[idx]
        Fa = F[idx]
        lama = lam[idx]
        # H = R_lam o [R_gamma, h] rowwise; doubles as the from-scratch
        # residual of the current iterate
        Vinv = _invert_rows(Va)
        splV = PeriodicSpline1D(Va, refine=LEAF_REFINE)
        C = _wrap(Vinv + splV.eval(base[None, :] + Vinv - gamma))
        H = _wrap(C + lama[:, None])
        res = np.abs(_wrap(H - Fa)).max(axis=1)
        improved = res < best[idx]
        take = idx[improved]
        best[take] = res[improved]
        best_lam[take] = lama[improved]
        best_V[take] = Va[improved]
        grew = res > 1.5 * best[idx]
        rises[idx] = np.where(grew, rises[idx] + 1, 0)
        bad = rises[idx] >= 2
        if np.any(bad):
            over = bad & (best[idx] > tol)
            if np.any(over):
                row = int(idx[np.argmax(over)])
                raise SolverDivergenceError(
                    f"leaf {row} diverged (residual rose twice in a row; "
                    f"best {float(best[row]):.3e} > tol {tol:.1e})",
                    history,
                    leaf_index=row,
                )
            frozen[idx[bad]] = True
        history.append(float(best[idx].max(initial=0.0)))
        active = (best > tol) & ~frozen
        still = active[idx]
        if not np.any(still):
            continue
        sub = np.nonzero(still)[0]
        # e = f o H^{-1} on the rows still iterating
        Hs = H[sub]
        Hinv = _invert_rows(Hs)
        splF = PeriodicSpline1D(Fa[sub], refine=LEAF_REFINE)
        E = _wrap(Hinv + splF.eval(base[None, :] + Hinv))
        Ehat = np.fft.fft(E, axis=1) / n
        Ehat[np.abs(Ehat) < STEP_SPECTRUM_FLOOR] = 0.0
        dlam = Ehat[:, 0].real
        if inv_div is None:
            dVhat = np.zeros_like(Ehat)
            np.divide(Ehat, divisor[None, :], out=dVhat, where=active_k[None, :])
        else:
            dVhat = Ehat * np.where(active_k, inv_div, 0.0)[None, :]
        dV = np.fft.ifft(dVhat * n, axis=1).real
        rows_upd = idx[sub]
        lam[rows_upd] = _wrap(lama[sub] + dlam)
        V[rows_upd] = _rows_compose_disp(dV, Va[sub])
        iterations[rows_upd] += 1
        if float(_rows_c1(V[rows_upd]).max(initial=0.0)) >= 1.0:
            row = int(rows_upd[np.argmax(_rows_c1(V[rows_upd]))])
            raise SolverDivergenceError(
                f"leaf {row}: intermediate h left the chart", history, leaf_index=row
            )
    if np.any(active):
        # rows still above tol after the loop: measure the last iterate too
        idx = np.nonzero(active)[0]
        res = _leaf_residuals(F[idx], lam[idx], V[idx], gamma)
        improved = res < best[idx]
        take = idx[improved]
        best[take] = res[improved]
        best_lam[take] = lam[take]
        best_V[take] = V[take]
    if np.any(best > tol):
        row = int(np.argmax(best))
        raise SolverDivergenceError(
            f"leaf {row} did not reach tol {tol:.1e} "
            f"(residual {float(best[row]):.3e} after {max_iter} iterations)",
            history,
            leaf_index=row,
        )
    return LeafBatchResult(
        lam=best_lam, V=best_V, residuals=best, iterations=iterations, history=history
    )


def _leaf_residuals(F, lam, V, gamma):
    """c0 residual of R_lam o [R_gamma, h] against f, rowwise, from scratch."""
    if F.size == 0:
        return np.zeros(0)
    n = F.shape[1]
    base = np.arange(n) / n
    Vinv = _invert_rows(V)
    splV = PeriodicSpline1D(V, refine=LEAF_REFINE)
    C = _wrap(Vinv + splV.eval(base[None, :] + Vinv - gamma))
    H = _wrap(C + lam[:, None])
    return np.abs(_wrap(H - F)).max(axis=1)
