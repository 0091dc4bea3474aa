"""Exact resonance arithmetic and the averaged bilinear interaction forms.

The acoustic group rotates each branch amplitude c_sigma(k) by
exp(-i sigma |k| tau), so a quadratic product of modes m and l feeds mode
k = m + l with the phase exp(-i (sigma_m |m| + sigma_l |l| - sigma_k |k|) s).
Time averaging kills the product at rate 1/tau unless the frequencies
cancel exactly:

    sigma_m sqrt(a) + sigma_l sqrt(b) = sigma_k sqrt(c),

with a = |m|^2, b = |l|^2, c = |k|^2 integers.  Squaring once shows a
resonant triple forces (c - a - b)^2 = 4ab, that is (m.l)^2 = |m|^2 |l|^2,
so interacting modes are collinear and the membership test needs integer
arithmetic only.  The averaged forms then reduce to lattice sums over the
resonant set; the quadrature oracle below recomputes them the slow way,
through the group and physical-space products, for cross-validation.

Both forms act on the mean-free branch content of a pair.  Slot means and
any divergence-free component of the vector slot average out and are
dropped; outputs are pure branch content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .acoustic import AcousticPair, apply_group, pair_norm
from .errors import RealizabilityError
from .spectral import (ScalarField, TorusGrid, VectorField, div_hat,
                       fft_forward, fft_inverse, grad_hat, same_grid,
                       sobolev_norm)

_TWO_PI = 2.0 * np.pi

DIV_FREE_TOL = 1e-10


# exact arithmetic ---------------------------------------------------------

def is_resonant(a: int, b: int, c: int, sm: int, sl: int, sk: int) -> bool:
    """Exact test of sm*sqrt(a) + sl*sqrt(b) == sk*sqrt(c).

    a, b, c are nonnegative integers (squared norms), the signs are +-1.
    No floating point is involved, so the answer is certain.
    """
    d = c - a - b
    if d * d != 4 * a * b:
        return False
    if sm * sl * d < 0:
        return False
    # sign of sm*sqrt(a) + sl*sqrt(b), exactly
    if sm == sl:
        s_sign = sm if a + b > 0 else 0
    elif a != b:
        s_sign = sm if a > b else -sm
    else:
        s_sign = 0
    if c == 0:
        return s_sign == 0
    return s_sign == sk


def is_resonant_array(a, b, c, sm, sl, sk) -> np.ndarray:
    """Vectorized is_resonant; operands broadcast, integer dtype required."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    sm = np.asarray(sm, dtype=np.int64)
    sl = np.asarray(sl, dtype=np.int64)
    sk = np.asarray(sk, dtype=np.int64)
    d = c - a - b
    ok = (d * d == 4 * a * b) & (sm * sl * d >= 0)
    s_sign = np.where(sm == sl,
                      np.where(a + b > 0, sm, 0),
                      np.where(a > b, sm, np.where(b > a, -sm, 0)))
    return ok & np.where(c == 0, s_sign == 0, s_sign == sk)


def resonance_float_test(a, b, c, sm, sl, sk, tol: float = 1e-9) -> np.ndarray:
    """Naive floating point membership test, for cross-checking only."""
    defect = np.abs(sm * np.sqrt(np.asarray(a, dtype=float))
                    + sl * np.sqrt(np.asarray(b, dtype=float))
                    - sk * np.sqrt(np.asarray(c, dtype=float)))
    return defect <= tol


def certify_resonance_table(max_norm_sq: int = 400, tol: float = 1e-9):
    """Compare the integer certificate with floating point for every triple
    of squared norms up to max_norm_sq and every sign assignment.

    Returns (checked, disagreements, min_gap) where min_gap is the smallest
    floating point defect over certified non-resonant triples, i.e. the
    margin by which tol separates the two populations.
    """
    vals = np.arange(max_norm_sq + 1, dtype=np.int64)
    b, c = np.meshgrid(vals, vals, indexing="ij")
    sqb = np.sqrt(b.astype(float))
    sqc = np.sqrt(c.astype(float))
    checked = 0
    disagree = 0
    min_gap = math.inf
    for a in range(max_norm_sq + 1):
        sqa = math.sqrt(a)
        d = c - a - b
        quad = d * d == 4 * a * b
        for sm in (1, -1):
            for sl in (1, -1):
                branch = quad & (sm * sl * d >= 0)
                if sm == sl:
                    s_sign = np.where(a + b > 0, sm, 0)
                else:
                    s_sign = np.where(a > b, sm, np.where(b > a, -sm, 0))
                lhs = sm * sqa + sl * sqb
                for sk in (1, -1):
                    exact = branch & np.where(c == 0, s_sign == 0, s_sign == sk)
                    defect = np.abs(lhs - sk * sqc)
                    disagree += int(np.count_nonzero(exact != (defect <= tol)))
                    checked += exact.size
                    off = defect[~exact]
                    if off.size:
                        min_gap = min(min_gap, float(off.min()))
    return checked, disagree, min_gap


# branch amplitudes --------------------------------------------------------

@dataclass
class OscillationProfile:
    """Branch amplitudes (c_plus, c_minus) of the mean-free pair content.

    c_sigma = (phi_hat + sigma alpha_hat) / 2 with alpha the longitudinal
    velocity amplitude; the group acts diagonally,
    c_sigma(tau) = exp(-i sigma |k| tau) c_sigma(0), and real pairs satisfy
    c_sigma(-k) = conj(c_{-sigma}(k)).
    """

    grid: TorusGrid
    plus: np.ndarray
    minus: np.ndarray
    time: float = 0.0

    def norm(self) -> float:
        """L2 norm of the represented (scalar, gradient) pair."""
        total = np.sum(np.abs(self.plus) ** 2 + np.abs(self.minus) ** 2)
        return float(np.sqrt(2.0 * self.grid.volume * total))

    def rotated(self, tau: float) -> "OscillationProfile":
        phase = np.exp(-1j * self.grid.wavenumber * tau)
        return OscillationProfile(self.grid, self.plus * phase,
                                  self.minus * np.conj(phase))

    def __add__(self, other: "OscillationProfile") -> "OscillationProfile":
        return OscillationProfile(self.grid, self.plus + other.plus,
                                  self.minus + other.minus)

    def __sub__(self, other: "OscillationProfile") -> "OscillationProfile":
        return OscillationProfile(self.grid, self.plus - other.plus,
                                  self.minus - other.minus)

    def scale(self, a: float) -> "OscillationProfile":
        return OscillationProfile(self.grid, a * self.plus, a * self.minus)


def branch_decompose(pair: AcousticPair):
    """Split a pair into branch amplitudes, the frozen solenoidal spectrum,
    and the scalar mean.  branch_compose inverts the split exactly."""
    grid = pair.grid
    phi_hat = fft_forward(grid, pair.phi.values)
    v_hat = fft_forward(grid, pair.vel.values)
    khat = grid.unit_wavevectors
    alpha = np.sum(khat * v_hat, axis=0)
    sol_hat = v_hat - khat * alpha[np.newaxis]
    prof = OscillationProfile(grid, 0.5 * (phi_hat + alpha),
                              0.5 * (phi_hat - alpha))
    return prof, sol_hat, pair.phi_mean


def branch_compose(prof: OscillationProfile, sol_hat=None,
                   phi_mean: complex = 0.0, real: bool = True) -> AcousticPair:
    grid = prof.grid
    phi_hat = prof.plus + prof.minus
    alpha = prof.plus - prof.minus
    v_hat = grid.unit_wavevectors * alpha[np.newaxis]
    if sol_hat is not None:
        v_hat = v_hat + sol_hat
    phi = fft_inverse(grid, phi_hat, real=real)
    vel = fft_inverse(grid, v_hat, real=real)
    return AcousticPair(ScalarField(grid, phi), VectorField(grid, vel),
                        phi_mean)


# lattice tables -----------------------------------------------------------

def _flat_modes(grid: TorusGrid):
    key = "mode_flat"
    if key not in grid._cache:
        n = grid.dimension
        ki = grid.wavevectors.reshape(n, -1)
        k2 = grid.wavenumber_sq.reshape(-1)
        band = np.nonzero(grid.dealias_mask.reshape(-1))[0]
        grid._cache[key] = (ki, k2, band)
    return grid._cache[key]


def _vec_flat_index(grid: TorusGrid, vecs: np.ndarray) -> np.ndarray:
    """Row-major flat index of integer mode vectors, shape (n, M)."""
    N = grid.resolution
    idx = vecs[0] % N
    for j in range(1, grid.dimension):
        idx = idx * N + (vecs[j] % N)
    return idx


def _b1_table(grid: TorusGrid):
    """Rows (k, l) with |l| = |k|, both in the band, m = k - l in the band.

    Stored per row: flat indices of k, l, m, the integer components of k,
    and the geometric weight (khat.lhat)."""
    key = "b1_table"
    if key in grid._cache:
        return grid._cache[key]
    ki, k2, band = _flat_modes(grid)
    by_norm: dict = {}
    for idx in band:
        by_norm.setdefault(int(k2[idx]), []).append(idx)
    B = grid.band_limit
    K, L, M, GEO = [], [], [], []
    KVEC = []
    for k_flat in band:
        c2 = int(k2[k_flat])
        if c2 == 0:
            continue
        kv = ki[:, k_flat]
        lids = np.asarray(by_norm[c2])
        lv = ki[:, lids]
        mv = kv[:, np.newaxis] - lv
        keep = np.max(np.abs(mv), axis=0) <= B
        if not np.any(keep):
            continue
        lids = lids[keep]
        lv = lv[:, keep]
        mv = mv[:, keep]
        geo = np.sum(kv[:, np.newaxis] * lv, axis=0) / float(c2)
        K.append(np.full(lids.size, k_flat, dtype=np.int64))
        L.append(lids.astype(np.int64))
        M.append(_vec_flat_index(grid, mv))
        GEO.append(geo)
        KVEC.append(np.repeat(kv[:, np.newaxis], lids.size, axis=1))
    table = {
        "k": np.concatenate(K) if K else np.empty(0, np.int64),
        "l": np.concatenate(L) if L else np.empty(0, np.int64),
        "m": np.concatenate(M) if M else np.empty(0, np.int64),
        "geo": np.concatenate(GEO) if GEO else np.empty(0, float),
        "kvec": np.concatenate(KVEC, axis=1) if KVEC else
            np.empty((grid.dimension, 0), np.int64),
    }
    grid._cache[key] = table
    return table


def _b2_table(grid: TorusGrid):
    """Resonant rows for the self-interaction form, grouped by the branch
    signs (sigma_m, sigma_l, sigma_k).

    Per row: flat indices k, m, l and the gamma-independent weight pieces
    w_geo = 0.5 sigma_k |k| sigma_m sigma_l (khat.mhat)(khat.lhat) and
    w_iso = 0.5 sigma_k |k|; the applied weight is w_geo + (gamma-1) w_iso.
    """
    key = "b2_table"
    if key in grid._cache:
        return grid._cache[key]
    ki, k2, band = _flat_modes(grid)
    B = grid.band_limit
    bv = ki[:, band]
    bnorm = k2[band]
    groups = []
    for sm in (1, -1):
        for sl in (1, -1):
            for sk in (1, -1):
                groups.append({"sm": sm, "sl": sl, "sk": sk,
                               "k": [], "m": [], "l": [],
                               "w_geo": [], "w_iso": []})
    for k_flat in band:
        c2 = int(k2[k_flat])
        if c2 == 0:
            continue
        kv = ki[:, k_flat]
        lv = kv[:, np.newaxis] - bv
        keep = (np.max(np.abs(lv), axis=0) <= B) & (bnorm > 0) \
            & (np.sum(lv * lv, axis=0) > 0)
        if not np.any(keep):
            continue
        mids = band[keep]
        mv = bv[:, keep]
        lvk = lv[:, keep]
        a2 = bnorm[keep]
        b2 = np.sum(lvk * lvk, axis=0)
        lids = _vec_flat_index(grid, lvk)
        sgn_m = np.sign(np.sum(kv[:, np.newaxis] * mv, axis=0))
        sgn_l = np.sign(np.sum(kv[:, np.newaxis] * lvk, axis=0))
        half_absk = 0.5 * math.sqrt(c2)
        for g in groups:
            res = is_resonant_array(a2, b2, c2, g["sm"], g["sl"], g["sk"])
            if not np.any(res):
                continue
            g["k"].append(np.full(int(res.sum()), k_flat, dtype=np.int64))
            g["m"].append(mids[res].astype(np.int64))
            g["l"].append(lids[res])
            geo = g["sm"] * g["sl"] * sgn_m[res] * sgn_l[res]
            g["w_geo"].append(g["sk"] * half_absk * geo)
            g["w_iso"].append(np.full(int(res.sum()), g["sk"] * half_absk))
    table = []
    for g in groups:
        if not g["k"]:
            continue
        table.append({"sm": g["sm"], "sl": g["sl"], "sk": g["sk"],
                      "k": np.concatenate(g["k"]),
                      "m": np.concatenate(g["m"]),
                      "l": np.concatenate(g["l"]),
                      "w_geo": np.concatenate(g["w_geo"]),
                      "w_iso": np.concatenate(g["w_iso"])})
    grid._cache[key] = table
    return table


def resonant_triples(grid: TorusGrid) -> np.ndarray:
    """All resonant rows of the self-interaction sum on this grid, as an
    integer array with columns (k, m, l components, then the three signs),
    sorted lexicographically by k, then m, then signs."""
    n = grid.dimension
    ki, _, _ = _flat_modes(grid)
    rows = []
    for g in _b2_table(grid):
        cols = [ki[j, g["k"]] for j in range(n)]
        cols += [ki[j, g["m"]] for j in range(n)]
        cols += [ki[j, g["l"]] for j in range(n)]
        cols += [np.full(g["k"].size, g[s], dtype=np.int64)
                 for s in ("sm", "sl", "sk")]
        rows.append(np.stack(cols, axis=1))
    if not rows:
        return np.empty((0, 3 * n + 3), dtype=np.int64)
    out = np.concatenate(rows, axis=0)
    order = np.lexsort(tuple(out[:, j] for j in range(out.shape[1] - 1, -1, -1)))
    return out[order]


def resonant_triple_columns(dimension: int) -> list:
    axes = ["x", "y"][:dimension]
    cols = [f"k_{a}" for a in axes] + [f"m_{a}" for a in axes] \
        + [f"l_{a}" for a in axes]
    return cols + ["sigma_m", "sigma_l", "sigma_k"]


# averaged forms -----------------------------------------------------------

def _check_div_free(v: VectorField):
    div = div_hat(v.grid, fft_forward(v.grid, v.values))
    defect = float(np.sqrt(v.grid.volume * np.sum(np.abs(div) ** 2)))
    if defect > DIV_FREE_TOL * (1.0 + sobolev_norm(v, 1.0)):
        raise RealizabilityError(
            f"advecting field is not divergence free (defect {defect:.3e})")


def b1_profile(v: VectorField, prof: OscillationProfile) -> OscillationProfile:
    """Averaged advection form on branch amplitudes.

    c_out_sigma(k) = i sum_{m+l=k, |l|=|k|} (k.v_m) (khat.lhat) c_sigma(l),
    diagonal in the branch sign; v must be divergence free."""
    grid = prof.grid
    _check_div_free(v)
    t = _b1_table(grid)
    v_hat = fft_forward(grid, v.values)
    v_hat = v_hat * grid.dealias_mask[np.newaxis]
    vm = v_hat.reshape(grid.dimension, -1)[:, t["m"]]
    coef = 1j * np.sum(t["kvec"] * vm, axis=0) * t["geo"]
    out_p = np.zeros(grid.shape, dtype=complex).reshape(-1)
    out_m = np.zeros_like(out_p)
    np.add.at(out_p, t["k"], coef * prof.plus.reshape(-1)[t["l"]])
    np.add.at(out_m, t["k"], coef * prof.minus.reshape(-1)[t["l"]])
    return OscillationProfile(grid, out_p.reshape(grid.shape),
                              out_m.reshape(grid.shape))


def b2_profile(p1: OscillationProfile, p2: OscillationProfile,
               gamma: float) -> OscillationProfile:
    """Averaged self-interaction form on branch amplitudes.

    c_out_sk(k) = (i/2) sk |k| sum over resonant m + l = k of
    c1_sm(m) c2_sl(l) [sm sl (khat.mhat)(khat.lhat) + (gamma - 1)],
    the sum running over ordered pairs and branch signs with
    sm |m| + sl |l| = sk |k| exactly."""
    grid = p1.grid
    shape = grid.shape
    out = {1: np.zeros(shape, dtype=complex).reshape(-1),
           -1: np.zeros(shape, dtype=complex).reshape(-1)}
    c1 = {1: p1.plus.reshape(-1), -1: p1.minus.reshape(-1)}
    c2 = {1: p2.plus.reshape(-1), -1: p2.minus.reshape(-1)}
    for g in _b2_table(grid):
        w = g["w_geo"] + (gamma - 1.0) * g["w_iso"]
        term = 1j * w * c1[g["sm"]][g["m"]] * c2[g["sl"]][g["l"]]
        np.add.at(out[g["sk"]], g["k"], term)
    return OscillationProfile(grid, out[1].reshape(shape),
                              out[-1].reshape(shape))


def b1_form(v: VectorField, pair: AcousticPair) -> AcousticPair:
    """Pair-level averaged advection form; output is pure branch content."""
    same_grid(v, pair.phi)
    prof, _, _ = branch_decompose(pair)
    real = not (pair.is_complex or v.is_complex)
    return branch_compose(b1_profile(v, prof), real=real)


def b2_form(pair1: AcousticPair, pair2: AcousticPair,
            gamma: float) -> AcousticPair:
    """Pair-level averaged self-interaction form (symmetric polarization)."""
    same_grid(pair1.phi, pair2.phi)
    prof1, _, _ = branch_decompose(pair1)
    prof2, _, _ = branch_decompose(pair2)
    real = not (pair1.is_complex or pair2.is_complex)
    half = b2_profile(prof1, prof2, gamma) + b2_profile(prof2, prof1, gamma)
    return branch_compose(half.scale(0.5), real=real)


# quadrature oracle --------------------------------------------------------

def _masked_pair(grid, f_hat, real: bool) -> AcousticPair:
    """Pair (0, F) with F restricted to the dealias band."""
    f_hat = f_hat * grid.dealias_mask[np.newaxis]
    vel = VectorField(grid, fft_inverse(grid, f_hat, real=real))
    phi = ScalarField(grid, np.zeros(grid.shape) if real
                      else np.zeros(grid.shape, dtype=complex))
    return AcousticPair(phi, vel)


def _trapezoid_mean(integrand, tau: float, points_per_unit: int):
    steps = max(2, int(round(tau * points_per_unit)))
    h = tau / steps
    acc = None
    for j in range(steps + 1):
        w = 0.5 if j in (0, steps) else 1.0
        term = integrand(j * h).scale(w * h / tau)
        acc = term if acc is None else acc + term
    return acc


def time_average_oracle_b1(v: VectorField, pair: AcousticPair, tau: float,
                           points_per_unit: int = 64) -> AcousticPair:
    """Finite-time average defining the advection form, computed through the
    group and pointwise products; converges to b1_form at rate 1/tau."""
    grid = pair.grid
    n = grid.dimension
    real = not (pair.is_complex or v.is_complex)
    vv = v.values

    def integrand(s: float) -> AcousticPair:
        w = apply_group(pair, s)
        u = w.vel.values
        f_hat = np.empty((n,) + grid.shape, dtype=complex)
        for i in range(n):
            row = fft_forward(grid, vv[i] * u + u[i] * vv)
            f_hat[i] = div_hat(grid, row)
        return apply_group(_masked_pair(grid, f_hat, real), -s)

    return _trapezoid_mean(integrand, tau, points_per_unit)


def time_average_oracle_b2(pair1: AcousticPair, pair2: AcousticPair,
                           tau: float, gamma: float,
                           points_per_unit: int = 64) -> AcousticPair:
    """Finite-time average defining the self-interaction form (symmetric
    polarization with the half tensor term and the full pressure term)."""
    grid = pair1.grid
    n = grid.dimension
    real = not (pair1.is_complex or pair2.is_complex)

    def integrand(s: float) -> AcousticPair:
        w1 = apply_group(pair1, s)
        w2 = apply_group(pair2, s)
        u1, u2 = w1.vel.values, w2.vel.values
        f_hat = np.empty((n,) + grid.shape, dtype=complex)
        for i in range(n):
            row = fft_forward(grid, 0.5 * (u1[i] * u2 + u2[i] * u1))
            f_hat[i] = div_hat(grid, row)
        prod = fft_forward(grid, w1.phi.values * w2.phi.values)
        f_hat += (gamma - 1.0) * grad_hat(grid, prod)
        return apply_group(_masked_pair(grid, f_hat, real), -s)

    return _trapezoid_mean(integrand, tau, points_per_unit)


# structural identities ----------------------------------------------------

def pair_norm_l2(pair: AcousticPair) -> float:
    return pair_norm(pair, "lebesgue", p=2.0)


def pair_inner(w1: AcousticPair, w2: AcousticPair) -> float:
    """Real L2 inner product of two pairs, scalar means included."""
    phi1 = w1.phi.values + w1.phi_mean
    phi2 = w2.phi.values + w2.phi_mean
    total = np.sum(np.real(np.conj(phi1) * phi2)
                   + np.sum(np.real(np.conj(w1.vel.values) * w2.vel.values),
                            axis=0))
    return float(total * w1.grid.cell_volume)


def orthogonality_report(v: VectorField, pair1: AcousticPair,
                         pair2: AcousticPair, gamma: float) -> dict:
    """Normalized residuals of the four energy-cancellation identities.

    All four vanish structurally: the advection form is antisymmetric as a
    quadratic form, and the self-interaction form satisfies the cyclic
    cancellation that makes the limit evolution conserve the pair norm.
    """
    b1_1 = b1_form(v, pair1)
    b1_2 = b1_form(v, pair2)
    b2_11 = b2_form(pair1, pair1, gamma)
    b2_12 = b2_form(pair1, pair2, gamma)
    n1 = pair_norm_l2(pair1)
    n2 = pair_norm_l2(pair2)

    def rel(val: float, scale: float) -> float:
        return abs(val) / max(scale, 1e-30)

    return {
        "b1_self": rel(pair_inner(b1_1, pair1),
                       pair_norm_l2(b1_1) * n1 + n1 ** 2),
        "b1_pair": rel(pair_inner(b1_1, pair2) + pair_inner(b1_2, pair1),
                       pair_norm_l2(b1_1) * n2 + pair_norm_l2(b1_2) * n1
                       + n1 * n2),
        "b2_self": rel(pair_inner(b2_11, pair1),
                       pair_norm_l2(b2_11) * n1 + n1 ** 2),
        "b2_pair": rel(pair_inner(b2_11, pair2) + 2.0 * pair_inner(b2_12, pair1),
                       pair_norm_l2(b2_11) * n2 + pair_norm_l2(b2_12) * n1
                       + n1 * n2),
    }
