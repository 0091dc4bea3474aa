"""Acceptance gate: ten pinned criteria, one verdict line each.

Every test prints `ACCEPTANCE nn name: PASS/FAIL (detail)` before asserting,
so the captured output carries the measured numbers alongside the verdict.
Criteria needing the two production-size sweeps share them through module
fixtures; their wall time is charged against both runtime budgets.
"""

import math
import time

import numpy as np
import pytest

from lowmach.acoustic import AcousticPair, apply_group, pair_norm
from lowmach.config import RunConfig, build_initial_spec
from lowmach.entropy import sweep
from lowmach.resonance import (
    b1_form,
    b2_form,
    certify_resonance_table,
    orthogonality_report,
    time_average_oracle_b1,
    time_average_oracle_b2,
)
from lowmach.solvers import (
    EulerState,
    build_initial_data,
    euler_step,
    limit_step,
    madelung,
    nls_dt_default,
    nls_hamiltonian,
    nls_step,
    qhd_residuals,
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


def _verdict(num, name, ok, detail):
    line = f"ACCEPTANCE {num:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    assert ok, line


def _random_pair(g, rng, decay_phi=2.0, decay_pot=2.5, kmax=None, amplitude=1.0):
    phi = random_band_field(g, rng, decay=decay_phi, kmax=kmax, amplitude=amplitude)
    q = random_band_field(g, rng, decay=decay_pot, kmax=kmax, amplitude=amplitude)
    return AcousticPair.from_fields(phi, gradient(q))


def _random_divfree(g, rng, kmax=4):
    if g.dimension == 1:
        return VectorField(g, np.full((1,) + g.shape, float(rng.uniform(-2, 2))))
    a = random_band_field(g, rng, decay=3.0, kmax=kmax, amplitude=1.0)
    gr = grad_hat(g, fft_forward(g, a.values))
    vals = np.stack([fft_inverse(g, -gr[1], real=True),
                     fft_inverse(g, gr[0], real=True)])
    vals[0] += rng.uniform(-1, 1)
    vals[1] += rng.uniform(-1, 1)
    return VectorField(g, vals)


@pytest.fixture(scope="module")
def ill_sweep():
    # defaults are the pinned configuration: gamma 2, n=1, N=256, T=0.5
    cfg = RunConfig(preset="single-mode")
    t0 = time.monotonic()
    report = sweep(cfg)
    return report, time.monotonic() - t0


@pytest.fixture(scope="module")
def shear_sweep():
    cfg = RunConfig(preset="well-prepared-shear")
    t0 = time.monotonic()
    report = sweep(cfg)
    return report, time.monotonic() - t0


def test_criterion_01_group_isometry_and_law():
    t0 = time.monotonic()
    worst_iso = 0.0
    worst_law = 0.0
    for trial in range(100):
        g = TorusGrid(1, 32) if trial < 50 else TorusGrid(2, 32)
        rng = np.random.default_rng(5000 + trial)
        pair = _random_pair(g, rng, decay_phi=2.0, decay_pot=2.0, kmax=10)
        base = pair_norm(pair)
        for tau in (0.37, 5.0, -2.2):
            rot = apply_group(pair, tau)
            for s in (0, 1, 2):
                a = pair_norm(rot, kind="sobolev", s=float(s))
                b = pair_norm(pair, kind="sobolev", s=float(s))
                worst_iso = max(worst_iso, abs(a - b) / b)
            two = apply_group(apply_group(pair, 0.37), tau)
            one = apply_group(pair, 0.37 + tau)
            worst_law = max(worst_law, pair_norm(two - one) / base)
    elapsed = time.monotonic() - t0
    ok = worst_iso <= 1e-11 and worst_law <= 1e-11 and elapsed < 10.0
    _verdict(1, "group-isometry-and-law", ok,
             f"isometry {worst_iso:.2e}, composition {worst_law:.2e}, "
             f"tol 1e-11, {elapsed:.1f}s < 10s")


def test_criterion_02_orthogonality_identities():
    t0 = time.monotonic()
    worst = 0.0
    for trial in range(50):
        g = TorusGrid(1, 32) if trial < 25 else TorusGrid(2, 16)
        rng = np.random.default_rng(7000 + trial)
        v = _random_divfree(g, rng, kmax=6)
        p1 = _random_pair(g, rng, decay_phi=2.5, decay_pot=3.0, kmax=6)
        p2 = _random_pair(g, rng, decay_phi=2.5, decay_pot=3.0, kmax=6)
        rep = orthogonality_report(v, p1, p2, 2.0)
        worst = max(worst, max(abs(x) for x in rep.values()))
    elapsed = time.monotonic() - t0
    ok = worst <= 1e-10 and elapsed < 60.0
    _verdict(2, "orthogonality-identities", ok,
             f"worst of four pairings {worst:.2e}, tol 1e-10, "
             f"{elapsed:.1f}s < 60s")


def test_criterion_03_forms_vs_quadrature_oracle():
    t0 = time.monotonic()
    errs = {("b1", 200.0): [], ("b1", 400.0): [],
            ("b2", 200.0): [], ("b2", 400.0): []}
    for idx in range(10):
        g = TorusGrid(1, 32) if idx < 5 else TorusGrid(2, 16)
        rng = np.random.default_rng(1000 + idx)
        v = _random_divfree(g, rng, kmax=4)
        p1 = _random_pair(g, rng, decay_phi=2.5, decay_pot=3.0, kmax=4,
                          amplitude=0.8)
        p2 = _random_pair(g, rng, decay_phi=2.5, decay_pot=3.0, kmax=4,
                          amplitude=0.8)
        lat1 = b1_form(v, p1)
        lat2 = b2_form(p1, p2, 2.0)
        for tau in (200.0, 400.0):
            o1 = time_average_oracle_b1(v, p1, tau, points_per_unit=16)
            o2 = time_average_oracle_b2(p1, p2, tau, 2.0, points_per_unit=16)
            errs[("b1", tau)].append(pair_norm(lat1 - o1))
            errs[("b2", tau)].append(pair_norm(lat2 - o2))
    ratios = {}
    for form in ("b1", "b2"):
        e200 = math.sqrt(float(np.mean(np.square(errs[(form, 200.0)]))))
        e400 = math.sqrt(float(np.mean(np.square(errs[(form, 400.0)]))))
        ratios[form] = e200 / e400
    elapsed = time.monotonic() - t0
    ok = all(1.6 <= r <= 2.4 for r in ratios.values()) and elapsed < 300.0
    _verdict(3, "forms-vs-quadrature", ok,
             f"pooled error ratios b1 {ratios['b1']:.3f}, b2 {ratios['b2']:.3f}"
             f" in [1.6, 2.4], {elapsed:.0f}s < 300s")


def test_criterion_04_conservation_suite():
    t0 = time.monotonic()
    details = []
    ok = True

    # NLS mass, per step, default step size
    cfg = RunConfig(dimension=1, resolution=64, eps_list=(0.2,),
                    preset="single-mode", t_final=0.1)
    w, _, _ = build_initial_data(build_initial_spec(cfg, 0.2), cfg.gamma,
                                 cfg.psi_normalization)
    dt = nls_dt_default(w.grid, 0.2, 2.0)
    cur = w
    prev_mass = cur.mass()
    mass_drift = 0.0
    for _ in range(100):
        cur = nls_step(cur, dt)
        m = cur.mass()
        mass_drift = max(mass_drift, abs(m - prev_mass) / prev_mass)
        prev_mass = m
    ok &= mass_drift <= 1e-12
    details.append(f"mass {mass_drift:.1e}/step<=1e-12")

    # NLS Hamiltonian drift is second order in dt
    h0 = nls_hamiltonian(w)

    def ham_drift(step, n):
        c = w
        for _ in range(n):
            c = nls_step(c, step)
        return abs(nls_hamiltonian(c) - h0) / abs(h0)

    ratio = ham_drift(dt, 60) / ham_drift(0.5 * dt, 120)
    ok &= 3.5 <= ratio <= 4.5
    details.append(f"hamiltonian ratio {ratio:.2f} in [3.5,4.5]")

    # Euler kinetic energy over T=1 at n=2, N=128
    g2 = TorusGrid(2, 128)
    x, y = g2.coordinates
    e = EulerState(VectorField(g2, np.stack([np.cos(x) * np.sin(y),
                                             -np.sin(x) * np.cos(y)])),
                   ScalarField(g2, np.zeros(g2.shape)))
    k0 = e.kinetic_energy()
    for _ in range(200):
        e = euler_step(e, 0.005)
    ke_drift = abs(e.kinetic_energy() - k0) / k0
    ok &= ke_drift <= 1e-8
    details.append(f"euler KE {ke_drift:.1e}<=1e-8")

    # limit-flow profile norm over T=1
    cfg1 = RunConfig(dimension=1, resolution=256, eps_list=(0.2,),
                     preset="single-mode", t_final=1.0)
    _, ee, V = build_initial_data(build_initial_spec(cfg1, 0.2), cfg1.gamma,
                                  cfg1.psi_normalization)
    n0 = V.norm()
    for _ in range(400):
        V = limit_step(V, ee, 0.0025)
        ee = euler_step(ee, 0.0025)
    norm_drift = abs(V.norm() - n0) / n0
    ok &= norm_drift <= 1e-8
    details.append(f"profile norm {norm_drift:.1e}<=1e-8")

    elapsed = time.monotonic() - t0
    ok &= elapsed < 300.0
    _verdict(4, "conservation-suite", bool(ok),
             ", ".join(details) + f", {elapsed:.0f}s < 300s")


def test_criterion_05_madelung_residuals():
    t0 = time.monotonic()
    cfg = RunConfig(dimension=1, resolution=256, gamma=2.0, eps_list=(0.5,),
                    preset="single-mode", t_final=0.2)
    w, _, _ = build_initial_data(build_initial_spec(cfg, 0.5), cfg.gamma,
                                 cfg.psi_normalization)
    dt = 2.0e-4
    keep = {400, 450, 500, 550, 600}
    states = {}
    cur = w
    for i in range(1, 601):
        cur = nls_step(cur, dt)
        if i in keep:
            states[i] = madelung(cur, time=i * dt)
    # fd_dt is the half-spacing of the centered stencil
    coarse = qhd_residuals(states[400], states[500], states[600], 100 * dt)
    fine = qhd_residuals(states[450], states[500], states[550], 50 * dt)
    r1 = coarse[0] / fine[0]
    r2 = coarse[1] / fine[1]
    elapsed = time.monotonic() - t0
    ok = 3.5 <= r1 <= 4.5 and 3.5 <= r2 <= 4.5 and elapsed < 120.0
    _verdict(5, "madelung-residuals", ok,
             f"halving ratios continuity {r1:.2f}, momentum {r2:.2f} "
             f"in [3.5,4.5], {elapsed:.0f}s < 120s")


def test_criterion_06_energy_bound(ill_sweep, shear_sweep):
    worst = -np.inf
    count = 0
    for report, _ in (ill_sweep, shear_sweep):
        for trace in report.traces:
            e0 = trace.energy[0]
            drift = float(np.max(trace.energy - e0) / max(e0, 1e-30))
            worst = max(worst, drift)
            count += trace.energy.size
    ok = worst <= 1e-6
    _verdict(6, "energy-bound", ok,
             f"max relative excess {worst:.2e} <= 1e-6 over {count} "
             "output times")


def test_criterion_07_well_prepared_limit(shear_sweep):
    report, elapsed = shear_sweep
    prof_sup = max(float(np.max(t.profile_norm)) for t in report.traces)
    finals = [float(t.strong_gap[-1]) for t in report.traces]
    decreasing = all(a > b for a, b in zip(finals, finals[1:]))
    ok = prof_sup <= 1e-10 and decreasing and elapsed < 600.0
    _verdict(7, "well-prepared-limit", ok,
             f"sup profile norm {prof_sup:.1e} <= 1e-10, final strong gap "
             + " > ".join(f"{v:.2e}" for v in finals)
             + f", sweep {elapsed:.0f}s < 600s")


def test_criterion_08_ill_prepared_sweep(ill_sweep):
    report, elapsed = ill_sweep
    sups = [float(v) for v in report.sup_H_minus_floor]
    dec_sup = all(a > b for a, b in zip(sups, sups[1:]))

    bound_ok = True
    for trace in report.traces:
        lhs = trace.strong_gap
        rhs = np.sqrt(2.0 * trace.entropy) * (1.0 + 1e-12) + 1e-15
        bound_ok &= bool(np.all(lhs <= rhs))

    shells_ok = True
    shell_info = []
    for s in range(report.weak_integral.shape[1]):
        col = report.weak_integral[:, s]
        vacuous = bool(np.all(col < 1e-12))
        dec = bool(np.all(np.diff(col) < 0))
        shells_ok &= vacuous or dec
        shell_info.append("vac" if vacuous else ("dec" if dec else "VIOL"))

    ok = dec_sup and bound_ok and shells_ok and elapsed < 1800.0
    _verdict(8, "ill-prepared-sweep", ok,
             "sup(H-floor) " + " > ".join(f"{v:.2e}" for v in sups)
             + f", gap<=sqrt(2H) {'holds' if bound_ok else 'FAILS'}"
             + ", shells [" + " ".join(shell_info) + "]"
             + f", sweep {elapsed:.0f}s < 1800s")


def test_criterion_09_gronwall_fit(ill_sweep):
    report, _ = ill_sweep
    r = {float(e): float(v) for e, v in zip(report.eps_list, report.r_fit)}
    pinned = bool(np.all(report.C_fit == 1.0))
    nonneg = bool(np.all(report.r_fit >= 0.0) and np.all(report.M_fit >= 0.0))
    ordered = r[0.05] < r[0.2]
    ok = pinned and nonneg and ordered
    _verdict(9, "gronwall-fit", ok,
             f"C pinned to 1 {'holds' if pinned else 'FAILS'}, "
             f"M,r >= 0 {'holds' if nonneg else 'FAILS'}, "
             f"r(0.05)={r[0.05]:.2e} < r(0.2)={r[0.2]:.2e}")


def test_criterion_10_resonance_exactness():
    t0 = time.monotonic()
    checked, disagreements, min_gap = certify_resonance_table(400)
    elapsed = time.monotonic() - t0
    ok = disagreements == 0 and elapsed < 60.0
    _verdict(10, "resonance-exactness", ok,
             f"{checked} sign-assigned triples, {disagreements} disagreements,"
             f" float margin {min_gap:.1e}, {elapsed:.0f}s < 60s")
