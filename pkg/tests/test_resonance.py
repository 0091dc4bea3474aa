"""Tests for exact resonance detection and the averaged interaction forms."""

import itertools
import math

import numpy as np
import pytest

from lowmach.acoustic import AcousticPair, apply_group, pair_norm
from lowmach.errors import RealizabilityError
from lowmach.resonance import (
    OscillationProfile,
    b1_form,
    b1_profile,
    b2_form,
    b2_profile,
    branch_compose,
    branch_decompose,
    certify_resonance_table,
    is_resonant,
    is_resonant_array,
    orthogonality_report,
    pair_inner,
    pair_norm_l2,
    resonance_float_test,
    resonant_triples,
    time_average_oracle_b1,
)
from lowmach.spectral import (
    ScalarField,
    TorusGrid,
    VectorField,
    fft_forward,
    fft_inverse,
    grad_hat,
    gradient,
    random_band_field,
)


def random_pair(g, seed):
    rng = np.random.default_rng(seed)
    phi = random_band_field(g, rng, decay=2.0, kmax=4)
    q = random_band_field(g, rng, decay=2.5, kmax=4)
    return AcousticPair.from_fields(phi, gradient(q))


def solenoidal_v(g, seed):
    if g.dimension == 1:
        return VectorField(g, np.full((1,) + g.shape, 1.3))
    rng = np.random.default_rng(seed)
    a = random_band_field(g, rng, decay=3.0, kmax=4)
    ah = fft_forward(g, a.values)
    gr = grad_hat(g, ah)
    vals = np.stack([fft_inverse(g, -gr[1], real=True),
                     fft_inverse(g, gr[0], real=True)])
    return VectorField(g, vals)


# ---------------------------------------------------------------- detection

def test_known_resonant_triples():
    # collinear: sqrt2 + 2 sqrt2 = 3 sqrt2
    assert is_resonant(2, 8, 18, 1, 1, 1)
    assert is_resonant(8, 2, 18, 1, 1, 1)
    # difference form: 3 sqrt2 - sqrt2 = 2 sqrt2
    assert is_resonant(18, 2, 8, 1, -1, 1)
    # plain integers: 1 + 2 = 3 on equal rays
    assert is_resonant(1, 4, 9, 1, 1, 1)
    assert is_resonant(0, 4, 4, 1, 1, 1)
    assert is_resonant(0, 0, 0, 1, -1, 1)


def test_known_non_resonant_triples():
    # sqrt1 + sqrt2 is irrational and never a sqrt of an integer
    for c in range(0, 50):
        assert not is_resonant(1, 2, c, 1, 1, 1)
    # sqrt2 + sqrt2 = sqrt8, not sqrt9
    assert not is_resonant(2, 2, 9, 1, 1, 1)
    assert is_resonant(2, 2, 8, 1, 1, 1)


def test_sign_semantics():
    # -sqrt2 - 2 sqrt2 = -3 sqrt2 needs the matching output sign
    assert is_resonant(2, 8, 18, -1, -1, -1)
    assert not is_resonant(2, 8, 18, -1, -1, 1)
    # cancellation to zero frequency
    assert is_resonant(4, 4, 0, 1, -1, 1)
    assert is_resonant(4, 4, 0, 1, -1, -1)


def test_integer_test_agrees_with_float_brute_force_small_range():
    vals = np.arange(31)
    a, b, c = np.meshgrid(vals, vals, vals, indexing="ij")
    for sm, sl, sk in itertools.product((1, -1), repeat=3):
        exact = is_resonant_array(a, b, c, sm, sl, sk)
        approx = resonance_float_test(a, b, c, sm, sl, sk, tol=1e-9)
        assert np.array_equal(exact, approx)


def test_certify_small_range_has_no_disagreements():
    checked, disagreements, min_gap = certify_resonance_table(60)
    assert disagreements == 0
    assert checked == 8 * 61 ** 3
    # the two populations are separated by a clear float margin
    assert min_gap > 1e-7


def test_resonant_triples_match_brute_force_1d():
    g = TorusGrid(1, 16)
    rows = resonant_triples(g)
    got = {tuple(int(x) for x in r) for r in rows}
    want = set()
    band = g.band_limit
    for k in range(-band, band + 1):
        for m in range(-band, band + 1):
            l = k - m
            if abs(l) > band or l == 0 or m == 0 or k == 0:
                continue
            for sm, sl, sk in itertools.product((1, -1), repeat=3):
                if sm * abs(m) + sl * abs(l) == sk * abs(k):
                    want.add((k, m, l, sm, sl, sk))
    assert got == want


def test_resonant_triples_match_brute_force_2d():
    g = TorusGrid(2, 8)
    rows = resonant_triples(g)
    got = {tuple(int(x) for x in r) for r in rows}
    band = g.band_limit
    rng = range(-band, band + 1)
    want = set()
    for kx, ky in itertools.product(rng, rng):
        for mx, my in itertools.product(rng, rng):
            lx, ly = kx - mx, ky - my
            if abs(lx) > band or abs(ly) > band:
                continue
            if (mx, my) == (0, 0) or (lx, ly) == (0, 0) or (kx, ky) == (0, 0):
                continue
            a = mx * mx + my * my
            b = lx * lx + ly * ly
            c = kx * kx + ky * ky
            for sm, sl, sk in itertools.product((1, -1), repeat=3):
                if is_resonant(a, b, c, sm, sl, sk):
                    want.add((kx, ky, mx, my, lx, ly, sm, sl, sk))
    assert got == want


def test_resonances_on_square_grid_are_collinear():
    # exact resonance forces m and l on the same ray through k
    g = TorusGrid(2, 16)
    for row in resonant_triples(g):
        kx, ky, mx, my, lx, ly = (int(v) for v in row[:6])
        assert kx * my - ky * mx == 0
        assert kx * ly - ky * lx == 0


# ------------------------------------------------------------ branch algebra

def test_branch_round_trip_and_rotation():
    for g in (TorusGrid(1, 32), TorusGrid(2, 16)):
        pair = random_pair(g, 50)
        prof, sol_hat, mean = branch_decompose(pair)
        back = branch_compose(prof, sol_hat, mean)
        assert pair_norm(back - pair) < 1e-12
        # group action is diagonal on the branches
        tau = 0.61
        rot_pair = apply_group(pair, tau)
        prof_rot, _, _ = branch_decompose(rot_pair)
        k = np.sqrt(g.wavenumber_sq)
        assert np.max(np.abs(prof_rot.plus - np.exp(-1j * k * tau) * prof.plus)) < 1e-13
        assert np.max(np.abs(prof_rot.minus - np.exp(1j * k * tau) * prof.minus)) < 1e-13
        assert prof.norm() == pytest.approx(prof.rotated(tau).norm(), rel=1e-12)


def test_branch_reality_pairing():
    g = TorusGrid(1, 32)
    prof, _, _ = branch_decompose(random_pair(g, 51))
    plus_rev = prof.plus[(np.arange(32) * -1) % 32]
    assert np.max(np.abs(np.conj(plus_rev) - prof.minus)) < 1e-14


def test_b1_constant_advection_closed_form():
    # with constant v only the m = 0 column survives: plain advection i(k.v) c
    g = TorusGrid(1, 32)
    pair = random_pair(g, 60)
    v = VectorField(g, np.full((1, 32), 1.3))
    out = b1_form(v, pair)
    prof, _, _ = branch_decompose(pair)
    k = g.wavevectors[0]
    expect_plus = 1j * (k * 1.3) * prof.plus
    got, _, _ = branch_decompose(out)
    assert np.max(np.abs(got.plus - expect_plus)) < 1e-13


def test_b1_oracle_error_decays_like_one_over_tau():
    g = TorusGrid(1, 32)
    pair = random_pair(g, 60)
    v = VectorField(g, np.full((1, 32), 1.3))
    out = b1_form(v, pair)
    # single inputs carry an oscillatory prefactor, so compare across a
    # 16x span of averaging windows instead of adjacent ones
    errs = [pair_norm(out - time_average_oracle_b1(v, pair, tau, points_per_unit=16))
            for tau in (20.0, 320.0)]
    assert errs[1] < errs[0]
    assert 8.0 < errs[0] / errs[1] < 32.0


def test_b1_requires_divergence_free_velocity():
    g = TorusGrid(2, 16)
    pair = random_pair(g, 61)
    bad = gradient(random_band_field(g, np.random.default_rng(0), decay=3.0, kmax=3))
    with pytest.raises(RealizabilityError):
        b1_form(bad, pair)


def test_b2_symmetry_and_bilinearity():
    g = TorusGrid(1, 32)
    p1, p2 = random_pair(g, 70), random_pair(g, 71)
    a = b2_form(p1, p2, 2.0)
    b = b2_form(p2, p1, 2.0)
    assert pair_norm(a - b) < 1e-13
    scaled = b2_form(p1.scale(2.0), p2, 2.0)
    assert pair_norm(scaled - a.scale(2.0)) < 1e-13


def test_profile_and_pair_forms_agree():
    for g in (TorusGrid(1, 32), TorusGrid(2, 16)):
        v = solenoidal_v(g, 80)
        p1, p2 = random_pair(g, 81), random_pair(g, 82)
        prof1, _, _ = branch_decompose(p1)
        prof2, _, _ = branch_decompose(p2)
        out_pair = b1_form(v, p1)
        out_prof = b1_profile(v, prof1)
        again, _, _ = branch_decompose(out_pair)
        assert np.max(np.abs(again.plus - out_prof.plus)) < 1e-13
        out_pair2 = b2_form(p1, p2, 1.8)
        out_prof2 = b2_profile(prof1, prof2, 1.8)
        again2, _, _ = branch_decompose(out_pair2)
        assert np.max(np.abs(again2.plus - out_prof2.plus)) < 1e-13


def test_forms_produce_mean_free_real_pairs():
    g = TorusGrid(2, 16)
    v = solenoidal_v(g, 90)
    p1, p2 = random_pair(g, 91), random_pair(g, 92)
    for out in (b1_form(v, p1), b2_form(p1, p2, 2.0)):
        assert not out.is_complex
        assert abs(out.phi_mean) < 1e-13 or out.phi_mean == 0.0


def test_orthogonality_identities_random_inputs():
    for g in (TorusGrid(1, 32), TorusGrid(2, 16)):
        for seed in range(5):
            v = solenoidal_v(g, 200 + seed)
            p1 = random_pair(g, 300 + seed)
            p2 = random_pair(g, 400 + seed)
            rep = orthogonality_report(v, p1, p2, 2.0)
            assert set(rep) == {"b1_self", "b1_pair", "b2_self", "b2_pair"}
            assert max(abs(x) for x in rep.values()) < 1e-12


def test_pair_inner_matches_quadrature():
    g = TorusGrid(1, 32)
    p1, p2 = random_pair(g, 95), random_pair(g, 96)
    direct = (np.sum(p1.phi.values * p2.phi.values)
              + np.sum(p1.vel.values * p2.vel.values)) * g.cell_volume
    assert pair_inner(p1, p2) == pytest.approx(direct, abs=1e-12)
    assert pair_norm_l2(p1) == pytest.approx(math.sqrt(pair_inner(p1, p1)), rel=1e-12)


def test_profile_norm_matches_pair_norm():
    g = TorusGrid(1, 32)
    pair = random_pair(g, 97)
    prof, _, _ = branch_decompose(pair)
    assert prof.norm() == pytest.approx(pair_norm(pair, include_mean=False), rel=1e-12)
