"""JSON interchange: displacement fields travel as spectral mode lists so
they are resolution independent; grids are sampled on load.

Field schema:
    { "n": int, "N": int,
      "modes": [ { "k": [int, ...], "re": [float, ...], "im": [float, ...] } ] }

Factor files hold an array of commutator pairs with provenance; run
reports and Diophantine certificates are plain JSON objects.
"""

import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .grid import (
    DisplacementField,
    GridSpec,
    SpectralField,
    _conj_flip,
    from_spectral,
    resample_dropped_mass,
    to_spectral,
)

__all__ = [
    "field_to_dict",
    "field_from_dict",
    "save_field",
    "load_field",
    "save_factors",
    "load_factors",
    "save_json",
    "load_json",
]


def _mode_entries(sfield, tol=0.0):
    """Mode list, one entry per Hermitian-conjugate pair (the canonical
    representative only; loaders reconstitute the mirror)."""
    grid = sfield.grid
    freqs = grid.freqs()
    n = grid.N
    coef = sfield.coef
    entries = []
    if grid.n == 1:
        order = np.argsort(np.abs(freqs), kind="stable")
        for idx in order:
            k = int(freqs[idx])
            if (-k) % n < idx and k != 0:
                continue  # mirror of an earlier entry
            vec = coef[:, idx]
            if np.max(np.abs(vec)) <= tol:
                continue
            entries.append(
                {
                    "k": [k],
                    "re": [float(v.real) for v in vec],
                    "im": [float(v.imag) for v in vec],
                }
            )
    else:
        kk = np.abs(freqs)
        kinf = np.maximum.outer(kk, kk)
        flat = np.argsort(kinf.reshape(-1), kind="stable")
        for lin in flat:
            i, j = np.unravel_index(lin, kinf.shape)
            mi, mj = (-i) % n, (-j) % n
            if (mi, mj) < (int(i), int(j)):
                continue  # mirror of an earlier entry
            vec = coef[:, i, j]
            if np.max(np.abs(vec)) <= tol:
                continue
            entries.append(
                {
                    "k": [int(freqs[i]), int(freqs[j])],
                    "re": [float(v.real) for v in vec],
                    "im": [float(v.imag) for v in vec],
                }
            )
    return entries


def field_to_dict(field, mode_tol=0.0):
    """Spectral JSON form of a displacement field."""
    sf = to_spectral(field)
    return {
        "n": field.grid.n,
        "N": field.grid.N,
        "modes": _mode_entries(sf, tol=mode_tol),
    }


def field_from_dict(data, N=None):
    """Rebuild a displacement field, resampling onto an N-point grid.

    Modes beyond the target Nyquist are dropped; the dropped spectral
    mass is returned alongside so callers can refuse lossy loads.
    """
    try:
        n = int(data["n"])
        n_src = int(data["N"])
        modes = data["modes"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed field JSON: {exc}") from exc
    src_grid = GridSpec(n, n_src)
    coef = np.zeros(src_grid.field_shape, dtype=complex)
    seen = set()
    for entry in modes:
        k = entry["k"]
        vec = np.array(entry["re"], dtype=float) + 1j * np.array(entry["im"], dtype=float)
        if len(k) != n or vec.shape != (n,):
            raise InputError(f"malformed mode entry {entry!r}")
        if any(abs(int(kj)) > n_src // 2 for kj in k):
            raise InputError(f"mode {k} exceeds the stated source Nyquist {n_src // 2}")
        idx = tuple(int(kj) % n_src for kj in k)
        mirror = tuple((-kj) % n_src for kj in idx)
        if n == 1:
            coef[:, idx[0]] = vec
            seen.add(idx)
            if mirror not in seen and mirror != idx:
                coef[:, mirror[0]] = np.conj(vec)
        else:
            coef[:, idx[0], idx[1]] = vec
            seen.add(idx)
            if mirror not in seen and mirror != idx:
                coef[:, mirror[0], mirror[1]] = np.conj(vec)
    sf = SpectralField(src_grid, 0.5 * (coef + _conj_flip(coef)))
    target = GridSpec(n, int(N)) if N else src_grid
    dropped = resample_dropped_mass(sf, target)
    return from_spectral(sf, target), dropped


def save_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_json(path):
    p = Path(path)
    if not p.exists():
        raise InputError(f"file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {p}: {exc}") from exc


def save_field(path, field, mode_tol=0.0):
    save_json(path, field_to_dict(field, mode_tol=mode_tol))


def load_field(path, N=None, max_dropped=1e-9):
    data = load_json(path)
    field, dropped = field_from_dict(data, N=N)
    if dropped > max_dropped:
        raise InputError(
            f"loading {path} onto N={N} drops spectral mass {dropped:.3e} "
            f"(> {max_dropped:.1e}); use a finer grid"
        )
    return field


def save_factors(path, clist, mode_tol=1e-14):
    """Factor file: ordered commutator pairs with provenance metadata.

    Modes below ``mode_tol`` in magnitude are dropped; the induced
    sup-norm perturbation of each factor is bounded by the summed dropped
    mass, far below the pipeline tolerance at the default."""
    payload = []
    for pair in clist.pairs:
        payload.append(
            {
                "g": field_to_dict(pair.g.field, mode_tol=mode_tol),
                "h": field_to_dict(pair.h.field, mode_tol=mode_tol),
                "chart": pair.chart,
                "foliation": pair.foliation,
                "stage": pair.stage,
                "support": list(pair.support) if pair.support else None,
            }
        )
    save_json(path, payload)


def load_factors(path, N=None):
    """Returns a list of dicts with DisplacementFields under 'g' and 'h';
    support boxes are re-applied bitwise after spectral synthesis."""
    data = load_json(path)
    if not isinstance(data, list):
        raise InputError("factor file must hold a JSON array of pairs")
    out = []
    for entry in data:
        g, _ = field_from_dict(entry["g"], N=N)
        h, _ = field_from_dict(entry["h"], N=N)
        support = entry.get("support")
        if support is not None:
            lo, hi = support
            scale = g.grid.N / entry["g"]["N"]
            lo = int(np.floor(lo * scale))
            hi = int(np.ceil(hi * scale))
            g = _mask_columns(g, lo, hi)
            h = _mask_columns(h, lo, hi)
        out.append(
            {
                "g": g,
                "h": h,
                "chart": entry.get("chart"),
                "foliation": entry.get("foliation"),
                "stage": entry.get("stage"),
                "support": support,
            }
        )
    return out


def _mask_columns(field, lo, hi):
    if field.grid.n != 2:
        return field
    u = np.array(field.u)
    cols = np.arange(field.grid.N)
    outside = (cols < lo) | (cols > hi)
    u[:, outside, :] = 0.0
    return DisplacementField(field.grid, u)
