"""Command-line front end.

Subcommands mirror the library surface: ``solve-field`` for a single
nonlinear solve, ``simulate`` for one run from a config file,
``distance`` between two snapshot files, ``experiment`` for the
stability and quasineutral ladders, and ``verify all`` for the quick
self-check battery.  Machine-readable results go to stdout as JSON;
files are written only under ``--out``.  The exit code is zero iff
every asserted (constant-free) verdict passed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import VpmeError
from .field import solve_poisson_boltzmann, split_field_1d, verify_lp_bound
from .harness import (
    ExperimentConfig,
    InitialDataSpec,
    load_config,
    make_initial_data,
    run_quasineutral_cauchy,
    run_stability_experiment,
    verify_initial_energy,
)
from .records import (
    grid_density_from_file,
    read_ensemble,
    write_ensemble,
    write_grid,
    write_run_record,
)


def _cmd_solve_field(args) -> int:
    rho = grid_density_from_file(args.rho)
    fld = solve_poisson_boltzmann(rho, args.epsilon, tol=args.tol)
    stats = {
        "epsilon": args.epsilon,
        "resolution": fld.resolution,
        "d": fld.d,
        "residual_norm": fld.residual_norm,
        "newton_iterations": len(fld.newton_residuals),
        "u_sup": float(np.max(np.abs(fld.U))),
        "e_sup": float(np.max(np.sqrt(np.sum(fld.E**2, axis=0)))),
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_grid(out / "potential.vpmg", fld.U, "potentl", epsilon=args.epsilon)
        write_grid(out / "efield.vpmg", fld.E, "efield", epsilon=args.epsilon)
        stats["out"] = str(out)
    print(json.dumps(stats))
    return 0


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    epsilon = config.epsilon_ladder[0]
    params = config.sim_params(epsilon)
    f0, report = make_initial_data(config.initial_data, config.n_particles,
                                   epsilon, seed=config.seed, d=config.d,
                                   k0=config.k0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record = simulate_with_partial(f0, params, config.config_hash, out)
    write_run_record(out / "run.ndjson", record)
    write_ensemble(out / "final.vpme", record.snapshots[-1])
    print(json.dumps({
        "epsilon": epsilon, "steps": params.n_steps,
        "checkpoints": len(record.checkpoints),
        "wall_clock": record.wall_clock,
        "initial_f_sup": report.f_sup,
        "out": str(out),
    }))
    return 0


def simulate_with_partial(f0, params, config_hash, out):
    from .dynamics import simulate
    return simulate(f0, params, config_hash=config_hash, out_dir=out)


def _cmd_distance(args) -> int:
    from .ot import wasserstein
    fa = read_ensemble(args.a)
    fb = read_ensemble(args.b)
    if args.method == "exact":
        value, plan = wasserstein(fa, fb, order=args.order, method="exact")
        payload = {"value": value, "order": args.order, "method": "exact",
                   "plan_size": plan.size,
                   "marginal_error": plan.marginal_error}
    else:
        value, plan, gap = wasserstein(fa, fb, order=args.order,
                                       method="entropic")
        payload = {"value": value, "order": args.order, "method": "entropic",
                   "plan_size": plan.size, "gap": gap,
                   "marginal_error": plan.marginal_error}
    print(json.dumps(payload))
    return 0


def _cmd_experiment(args) -> int:
    config = load_config(args.config)
    if args.what != config.kind:
        raise VpmeError(
            f"config kind {config.kind!r} does not match subcommand {args.what!r}")
    if args.what == "stability":
        report = run_stability_experiment(config, out_dir=args.out)
        ok = report.trend_nonincreasing
        print(json.dumps({
            "kind": "stability",
            "sup_W1": [float(s) for s in report.sup_distances],
            "trend_nonincreasing": report.trend_nonincreasing,
        }))
    else:
        report = run_quasineutral_cauchy(config, out_dir=args.out)
        ok = report.strictly_decreasing
        print(json.dumps({
            "kind": "cauchy",
            "sup_W1": [float(s) for s in report.sup_distances],
            "strictly_decreasing": report.strictly_decreasing,
        }))
    return 0 if ok else 1


def _cmd_verify(args) -> int:
    if args.what != "all":
        raise VpmeError(f"unknown verify target {args.what!r}")
    quick = args.quick
    from .dynamics import SimParams, simulate, verify_density_bound
    from .harness import random_smooth_density
    from .measures import ParticleEnsemble
    from .ot import verify_wp_inequalities, wasserstein

    checks = []

    def check(name, passed, detail=""):
        checks.append((name, bool(passed)))
        line = f"[{'PASS' if passed else 'FAIL'}] {name}"
        if detail:
            line += f"  ({detail})"
        print(line)

    rng = np.random.default_rng(0)
    res = 64 if quick else 256
    for eps in (1.0, 0.1):
        rho = random_smooth_density(1, res, seed=3, amplitude=0.5)
        fld = solve_poisson_boltzmann(rho, eps)
        check(f"field residual eps={eps}", fld.residual_norm <= 1e-10,
              f"residual={fld.residual_norm:.2e}")
        rep = verify_lp_bound(rho, fld, np.inf)
        check(f"electron sup bound eps={eps}", rep.verdict,
              f"{rep.electron_norm:.4f} <= {rep.density_norm:.4f}")
    rho = random_smooth_density(1, 512 if not quick else 128, seed=5,
                                amplitude=0.4)
    split = split_field_1d(rho, 0.5)
    check("1d splitting residual", split.residual_hat <= 1e-8,
          f"residual={split.residual_hat:.2e}")

    n = 60 if quick else 90
    mk = lambda seed: ParticleEnsemble(
        positions=rng.uniform(-0.5, 0.5, (n, 1)),
        velocities=rng.normal(0.0, 1.0, (n, 1)),
        weights=np.full(n, 1.0 / n), epsilon=1.0, time=0.0)
    wp = verify_wp_inequalities(mk(0), mk(1), k=4.0)
    check("cross-order W1 <= sqrt(2) W2", wp.first_verdict,
          f"{wp.w1:.4f} vs {wp.first_rhs:.4f}")
    check("cross-order W2 moment bound", wp.second_verdict,
          f"{wp.w2:.4f} vs {wp.second_rhs:.4f}")

    spec = InitialDataSpec(family="equilibrium", sigma=1.0)
    n_part = 2000 if quick else 20000
    f0, rep0 = make_initial_data(spec, n_part, 0.5, seed=2, d=1)
    ereport = verify_initial_energy(f0, rep0.f_sup)
    check("initial interpolation bound", ereport.interpolation_verdict,
          f"{ereport.rho_lp:.4f} <= {ereport.interpolation_rhs:.4f}")
    check("electron energy floor", ereport.electron_floor_verdict)

    params = SimParams(epsilon=0.5, dt=0.05, t_end=0.3 if quick else 0.5,
                       grid_resolution=32, checkpoint_interval=0.1)
    rec = simulate(f0, params, store_trajectories=True)
    e0 = rec.checkpoints[0].total_energy
    drift = max(abs(c.total_energy - e0) for c in rec.checkpoints) / abs(e0)
    check("energy drift", drift <= 1e-3, f"drift={drift:.2e}")
    dens = verify_density_bound(rec)
    check("density growth bound", dens.passed,
          f"max ratio/{dens.fitted_c:.3f} <= {dens.slack:g}x")

    failed = [name for name, ok in checks if not ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vpme",
        description="Ion kinetics with massless thermalized electrons: "
                    "field solves, particle runs, transport distances.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-field", help="solve the nonlinear field equation")
    p.add_argument("--rho", required=True, help="density grid file (VPMG)")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", default=None, help="directory for U and E grids")
    p.set_defaults(func=_cmd_solve_field)

    p = sub.add_parser("simulate", help="run one simulation from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("distance", help="transport distance between snapshots")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--order", type=int, default=2, choices=(1, 2))
    p.add_argument("--method", default="exact", choices=("exact", "entropic"))
    p.set_defaults(func=_cmd_distance)

    p = sub.add_parser("experiment", help="run a ladder experiment")
    p.add_argument("what", choices=("stability", "cauchy"))
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("verify", help="run the self-check battery")
    p.add_argument("what", choices=("all",))
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (VpmeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
