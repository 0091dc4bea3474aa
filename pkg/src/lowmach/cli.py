"""Command line front end.

Exit codes: 0 success, 1 usage, 2 invalid configuration or input file,
3 numerical failure, 4 property violation.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .acoustic import apply_group, build_U, filter_pair, pair_norm
from .config import (RunConfig, build_initial_spec, echo_config,
                     parse_config_file)
from .entropy import energy, run_pipeline, sweep
from .errors import (ConfigError, LowmachError, NumericalBlowupError,
                     PropertyViolationError, RealizabilityError, StepSizeError,
                     SweepError, TimeSyncError, UsageError, VacuumError)
from .reports import (plot_csv, write_gronwall_csv, write_report_csv,
                      write_resonant_triples_csv, write_series_csv,
                      write_trace_csv, write_weak_gaps_csv)
from .snapshots import save_field, write_sidecar
from .solvers import (build_initial_data, euler_dt_default, euler_step,
                      limit_step, madelung, nls_dt_default, nls_hamiltonian,
                      nls_step)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lowmach",
                     description="Low Mach number quantum fluid toolkit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands = {
        "run-qhd": "integrate the quantum fluid layer and trace invariants",
        "run-euler": "integrate the incompressible layer",
        "run-limit": "integrate the oscillation profile equation",
        "filter": "trace the acoustically filtered state along a run",
        "entropy": "run all three layers and trace the relative entropy",
        "sweep": "run the pipeline across the configured Mach numbers",
        "check": "run the fast property suite",
        "plot": "render figures from an emitted CSV",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        if name == "plot":
            p.add_argument("input", help="trace or report CSV to render")
        else:
            p.add_argument("--config", help="flat key=value config file")
            p.add_argument("--eps", help="comma separated Mach numbers")
            p.add_argument("--preset", help="initial data preset name")
            p.add_argument("--seed", type=int, help="preset random seed")
            p.add_argument("--workers", type=int, help="parallel sweep runs")
        p.add_argument("--out", help="output directory")
    return parser


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None):
        config = parse_config_file(args.config)
    else:
        config = RunConfig()
    updates = {}
    if getattr(args, "eps", None):
        try:
            updates["eps_list"] = tuple(
                float(p) for p in args.eps.split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"malformed --eps list {args.eps!r}") from None
    if getattr(args, "preset", None):
        updates["preset"] = args.preset
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        updates["workers"] = args.workers
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    if updates:
        config = replace(config, **updates)
    return config


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out_dir or "out")
    out.mkdir(parents=True, exist_ok=True)
    echo_config(config, out / "config.txt")
    return out


def _sidecar_meta(config: RunConfig, eps: float, t: float, dt: float) -> dict:
    return {"eps": eps, "gamma": config.gamma, "t": t, "dt": dt,
            "dimension": config.dimension, "resolution": config.resolution}


def _cmd_run_qhd(config: RunConfig) -> int:
    out = _out_dir(config)
    eps = config.eps_list[0]
    spec = build_initial_spec(config, eps)
    w, _, _ = build_initial_data(spec, config.gamma,
                                 config.psi_normalization,
                                 config.vacuum_floor)
    dt = config.dt_override or nls_dt_default(w.grid, eps, config.gamma)
    steps = max(1, round(config.t_final / dt))
    dt = config.t_final / steps
    every = max(1, steps // 200)
    rows = [[], [], [], []]
    t = 0.0
    for i in range(steps + 1):
        if i % every == 0 or i == steps:
            st = madelung(w, time=t, vacuum_floor=config.vacuum_floor)
            rows[0].append(t)
            rows[1].append(st.mass())
            rows[2].append(nls_hamiltonian(w))
            rows[3].append(energy(st))
        if i < steps:
            w = nls_step(w, dt)
            t += dt
    write_series_csv(out / "qhd_trace.csv",
                     ["t", "mass", "hamiltonian", "E"], rows)
    snap = out / "qhd_final.qhdf"
    save_field(snap, w.psi)
    write_sidecar(snap, _sidecar_meta(config, eps, t, dt))
    return 0


def _cmd_run_euler(config: RunConfig) -> int:
    out = _out_dir(config)
    eps = config.eps_list[0]
    spec = build_initial_spec(config, eps)
    _, e, _ = build_initial_data(spec, config.gamma,
                                 config.psi_normalization,
                                 config.vacuum_floor)
    dt = config.dt_override or 0.5 * euler_dt_default(e)
    steps = max(1, round(config.t_final / dt))
    dt = config.t_final / steps
    every = max(1, steps // 200)
    from .spectral import divergence, lebesgue_norm
    rows = [[], [], []]
    for i in range(steps + 1):
        if i % every == 0 or i == steps:
            rows[0].append(e.time)
            rows[1].append(e.kinetic_energy())
            rows[2].append(lebesgue_norm(divergence(e.v), 2.0))
        if i < steps:
            e = euler_step(e, dt)
    write_series_csv(out / "euler_trace.csv",
                     ["t", "kinetic_energy", "divergence_defect"], rows)
    snap = out / "euler_final.qhdf"
    save_field(snap, e.v)
    write_sidecar(snap, _sidecar_meta(config, eps, e.time, dt))
    return 0


def _cmd_run_limit(config: RunConfig) -> int:
    out = _out_dir(config)
    eps = config.eps_list[0]
    spec = build_initial_spec(config, eps)
    _, e, V = build_initial_data(spec, config.gamma,
                                 config.psi_normalization,
                                 config.vacuum_floor)
    write_resonant_triples_csv(e.grid, out / "resonant_triples.csv")
    from .solvers import limit_dt_default
    dt = config.dt_override or min(0.25 * limit_dt_default(V, e), 0.005)
    steps = max(1, round(config.t_final / dt))
    dt = config.t_final / steps
    every = max(1, steps // 200)
    rows = [[], []]
    for i in range(steps + 1):
        if i % every == 0 or i == steps:
            rows[0].append(V.time)
            rows[1].append(V.norm())
        if i < steps:
            V = limit_step(V, e, dt, config.gamma)
            e = euler_step(e, dt)
    write_series_csv(out / "limit_trace.csv", ["t", "profile_norm"], rows)
    return 0


def _cmd_filter(config: RunConfig) -> int:
    out = _out_dir(config)
    eps = config.eps_list[0]
    spec = build_initial_spec(config, eps)
    w, _, _ = build_initial_data(spec, config.gamma,
                                 config.psi_normalization,
                                 config.vacuum_floor)
    dt = config.dt_override or nls_dt_default(w.grid, eps, config.gamma)
    steps = max(1, round(config.t_final / dt))
    dt = config.t_final / steps
    every = max(1, steps // 200)
    rows = [[], [], [], []]
    t = 0.0
    base = None
    for i in range(steps + 1):
        if i % every == 0 or i == steps:
            st = madelung(w, time=t, vacuum_floor=config.vacuum_floor)
            u = build_U(st, eps)
            filtered = filter_pair(u, t, eps)
            if base is None:
                base = filtered
            rows[0].append(t)
            rows[1].append(pair_norm(u))
            rows[2].append(pair_norm(filtered))
            rows[3].append(pair_norm(filtered - base))
        if i < steps:
            w = nls_step(w, dt)
            t += dt
    write_series_csv(out / "filter_trace.csv",
                     ["t", "raw_norm", "filtered_norm", "filtered_drift"],
                     rows)
    return 0


def _cmd_entropy(config: RunConfig) -> int:
    out = _out_dir(config)
    eps = config.eps_list[0]
    spec = build_initial_spec(config, eps)
    trace = run_pipeline(spec, config.gamma, config.t_final,
                         dt=config.dt_override,
                         psi_normalization=config.psi_normalization,
                         vacuum_floor=config.vacuum_floor)
    path = out / "trace.csv"
    write_trace_csv(trace, path)
    plot_csv(path, out)
    return 0


def _eps_dir_name(eps: float) -> str:
    return f"eps_{eps:g}"


def _write_sweep_artifacts(report, out: Path) -> None:
    for trace in report.traces:
        sub = out / _eps_dir_name(trace.eps)
        sub.mkdir(parents=True, exist_ok=True)
        write_trace_csv(trace, sub / "trace.csv")
    path = out / "report.csv"
    write_report_csv(report, path)
    write_gronwall_csv(report, out / "gronwall.csv")
    write_weak_gaps_csv(report, out / "weak_gaps.csv")
    plot_csv(path, out)


def _cmd_sweep(config: RunConfig) -> int:
    out = _out_dir(config)
    try:
        report = sweep(config)
    except SweepError as ex:
        if ex.report is not None:
            _write_sweep_artifacts(ex.report, out)
        print(f"sweep aborted: {ex}", file=sys.stderr)
        if isinstance(ex.cause, PropertyViolationError):
            return 4
        return 3
    _write_sweep_artifacts(report, out)
    return 0


def _cmd_check(config: RunConfig) -> int:
    failures = 0

    def report(name, ok, detail=""):
        nonlocal failures
        status = "PASS" if ok else "FAIL"
        suffix = f": {detail}" if detail else ""
        print(f"{status} {name}{suffix}")
        if not ok:
            failures += 1

    from fractions import Fraction

    from .acoustic import AcousticPair
    from .resonance import (branch_decompose, certify_resonance_table,
                            orthogonality_report, time_average_oracle_b1,
                            b1_form)
    from .spectral import (ScalarField, TorusGrid, VectorField, gradient,
                           random_band_field)

    rng = np.random.default_rng(config.seed)
    g = TorusGrid(1, 32)

    # group isometry and composition
    worst_iso = worst_law = 0.0
    for _ in range(10):
        phi = random_band_field(g, rng, decay=2.0, kmax=8)
        vel = gradient(random_band_field(g, rng, decay=3.0, kmax=8))
        pair = AcousticPair.from_fields(phi, vel)
        n0 = pair_norm(pair, kind="sobolev", s=1.0)
        for tau in (0.37, -2.2):
            moved = apply_group(pair, tau)
            worst_iso = max(worst_iso, abs(
                pair_norm(moved, kind="sobolev", s=1.0) - n0) / n0)
        twice = apply_group(apply_group(pair, 0.37), -2.2)
        once = apply_group(pair, 0.37 - 2.2)
        worst_law = max(worst_law, pair_norm(twice - once) / n0)
    report("group-isometry", worst_iso <= 1e-11, f"{worst_iso:.2e}")
    report("group-composition", worst_law <= 1e-11, f"{worst_law:.2e}")

    # cancellation identities of the averaged forms
    worst = 0.0
    for _ in range(5):
        v = VectorField(g, np.full((1,) + g.shape,
                                   2.0 * rng.integers(-2, 3)))
        p1 = AcousticPair.from_fields(
            random_band_field(g, rng, decay=2.5, kmax=8),
            gradient(random_band_field(g, rng, decay=3.0, kmax=8)))
        p2 = AcousticPair.from_fields(
            random_band_field(g, rng, decay=2.5, kmax=8),
            gradient(random_band_field(g, rng, decay=3.0, kmax=8)))
        rep = orthogonality_report(v, p1, p2, config.gamma)
        worst = max(worst, max(abs(x) for x in rep.values()))
    report("orthogonality-identities", worst <= 1e-10, f"{worst:.2e}")

    # resonance arithmetic agreement on a reduced range
    checked, disagreements, _ = certify_resonance_table(100)
    report("resonance-detection", disagreements == 0,
           f"{checked} triples, {disagreements} disagreements")

    # averaged-form quadrature agreement
    v = VectorField(g, np.full((1,) + g.shape, 2.0))
    p = AcousticPair.from_fields(
        random_band_field(g, rng, decay=2.5, kmax=6),
        gradient(random_band_field(g, rng, decay=3.0, kmax=6)))
    lattice = b1_form(v, p)
    oracle = time_average_oracle_b1(v, p, config.tau_avg, points_per_unit=8)
    rel = pair_norm(lattice - oracle) / max(pair_norm(lattice), 1e-30)
    report("form-vs-quadrature", rel <= 0.2, f"{rel:.2e} at tau={config.tau_avg:g}")

    # conservation micro-runs
    from .spectral import lebesgue_norm
    spec = build_initial_spec(replace(config, resolution=64,
                                      preset="single-mode"),
                              config.eps_list[0])
    w, e, V = build_initial_data(spec, config.gamma,
                                 config.psi_normalization)
    dt = nls_dt_default(w.grid, config.eps_list[0], config.gamma)
    m0, h0 = w.mass(), nls_hamiltonian(w)
    drift = 0.0
    prev = m0
    for _ in range(50):
        w = nls_step(w, dt)
        m = w.mass()
        drift = max(drift, abs(m - prev) / prev)
        prev = m
    report("nls-mass", drift <= 1e-12, f"{drift:.2e} per step")
    drift_coarse = abs(nls_hamiltonian(w) - h0) / abs(h0)
    w2, _, _ = build_initial_data(spec, config.gamma,
                                  config.psi_normalization)
    for _ in range(100):
        w2 = nls_step(w2, 0.5 * dt)
    drift_fine = abs(nls_hamiltonian(w2) - h0) / abs(h0)
    ratio = drift_coarse / max(drift_fine, 1e-300)
    report("nls-hamiltonian-order", 3.0 <= ratio <= 5.5,
           f"drift ratio {ratio:.2f} under dt halving")

    g2 = TorusGrid(2, 32)
    Y = g2.coordinates[1]
    shear = np.stack([np.cos(Y), np.zeros_like(Y)])
    from .solvers import EulerState
    es = EulerState(VectorField(g2, shear),
                    ScalarField(g2, np.zeros(g2.shape)))
    for _ in range(20):
        es = euler_step(es, 0.01)
    sdrift = float(np.abs(es.v.values - shear).max())
    report("euler-shear-fixed-point", sdrift <= 1e-10, f"{sdrift:.2e}")

    # short full pipeline, all monitored inequalities live
    try:
        trace = run_pipeline(spec, config.gamma, 0.05,
                             psi_normalization=config.psi_normalization)
        sg_ok = bool(np.all(trace.strong_gap
                            <= np.sqrt(2.0 * trace.entropy) + 1e-12))
        report("pipeline-energy-and-gaps", sg_ok,
               f"sup H = {trace.sup_entropy():.3e}")
        trace2 = run_pipeline(spec, config.gamma, 0.05,
                              psi_normalization=config.psi_normalization)
        same = (np.array_equal(trace.entropy, trace2.entropy)
                and np.array_equal(trace.weak_gap, trace2.weak_gap))
        report("pipeline-determinism", same)
    except LowmachError as ex:
        report("pipeline-energy-and-gaps", False, str(ex))
    return 0 if failures == 0 else 4


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
        if args.command == "plot":
            plot_csv(args.input, args.out or "out")
            return 0
        config = _load_config(args)
        handler = {
            "run-qhd": _cmd_run_qhd,
            "run-euler": _cmd_run_euler,
            "run-limit": _cmd_run_limit,
            "filter": _cmd_filter,
            "entropy": _cmd_entropy,
            "sweep": _cmd_sweep,
            "check": _cmd_check,
        }[args.command]
        return handler(config)
    except UsageError as ex:
        print(f"usage error: {ex}", file=sys.stderr)
        return 1
    except ConfigError as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return 2
    except RealizabilityError as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return 2
    except PropertyViolationError as ex:
        print(f"property violation: {ex}", file=sys.stderr)
        return 4
    except (NumericalBlowupError, StepSizeError, VacuumError,
            TimeSyncError, LowmachError) as ex:
        print(f"numerical failure: {ex}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
