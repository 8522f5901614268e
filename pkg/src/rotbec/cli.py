"""Command-line driver.

Every subcommand accepts ``--config FILE`` (JSON); explicit flags override
values from the file.  Exit codes: 0 success, 2 usage or parameter error,
3 numerical failure (artifacts are still written and flagged).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    LINEAR,
    SUB,
    SUPER,
    GridPolicy,
    RegimeSpec,
    classify_regime,
    delta_concentration_check,
    potential_perturbation_sweep,
    run_sweep,
    tf_rate_check,
)
from .errors import GridMismatchError, InvalidInputError, InvalidParameterError
from .gp_solver import GPState, Grid, MinimizeOptions, gp_energy, minimize_gp, tail_diagnostics, tf_seed
from .potentials import TrapPotential, asym_homogeneity_check
from .tf_core import critical_velocity, quartic_closed_form, radius_of_maximum, solve_tf, tf_density
from .trial_states import assemble_trial

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
PROFILE_POINTS = 1000


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required parameter(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _rotation(args) -> tuple[float, str]:
    """``(omega, regime)`` from ``--omega``, ``--omega0`` or ``--omega1/--alpha``."""
    eps = args.epsilon
    if args.omega1 is not None or args.alpha is not None:
        _require(args, "omega1", "alpha")
        return args.omega1 / eps ** (1 + args.alpha), SUPER
    if args.omega0 is not None:
        return args.omega0 / eps, classify_regime(eps, args.omega0 / eps).kind
    if args.omega is not None:
        return args.omega, classify_regime(eps, args.omega).kind
    raise UsageError("give --omega0, --omega1/--alpha or --omega")


# ---------------------------------------------------------------------------
# commands


def cmd_tf(args) -> int:
    _require(args, "s", "omega0")
    sol = solve_tf(args.s, args.omega0)
    out = _out_dir(args)
    data = sol.to_dict()
    data["omega_c"] = critical_velocity(args.s)[0]
    data["has_hole"] = sol.has_hole
    _write_json(out / "tf.json", data)
    r = np.linspace(0.0, 1.5 * sol.r_out, PROFILE_POINTS)
    _write_csv(out / "tf_profile.csv", ("r", "rho"), zip(r, tf_density(sol, r)))
    print(f"mu={_fmt(sol.mu)} r_in={_fmt(sol.r_in)} r_out={_fmt(sol.r_out)} E_TF={_fmt(sol.energy)}")
    return EXIT_OK


def cmd_critical(args) -> int:
    _require(args, "s")
    wc, rc = critical_velocity(args.s)
    print(json.dumps({"s": args.s, "omega_c": wc, "r_out_c": rc}))
    return EXIT_OK


def cmd_quartic(args) -> int:
    _require(args, "omega0")
    print(json.dumps(quartic_closed_form(args.omega0).to_dict()))
    return EXIT_OK


def _grid_for(args, tf) -> Grid:
    if args.grid_n is not None:
        return Grid(args.grid_n, args.box_factor * tf.r_out)
    return GridPolicy(box_factor=args.box_factor).grid(tf.r_out, args.epsilon)


def _options(args) -> MinimizeOptions:
    return MinimizeOptions(tol=args.tol, max_iter=args.max_iter, residual_tol=args.residual_tol)


def cmd_gp(args) -> int:
    _require(args, "s", "epsilon")
    omega, regime = _rotation(args)
    eps, s = args.epsilon, args.s
    w0 = eps * omega
    tf = solve_tf(s, w0)
    grid = _grid_for(args, tf)
    pot = TrapPotential.homogeneous(s)
    trial = None
    if w0 > 0:
        try:
            trial = assemble_trial(tf, eps, w0, grid)
        except InvalidParameterError:
            trial = None
    if args.init == "tf":
        start = tf_seed(grid, tf, eps, omega)
    elif args.init == "trial":
        start = trial.state if trial is not None else tf_seed(grid, tf, eps, omega)
    else:
        start = GPState.load_npz(args.init) if str(args.init).endswith(".npz") else GPState.load_json(args.init)
        start = GPState(start.grid, start.field, eps, omega)
    res = minimize_gp(eps, omega, pot, grid, init=start, options=_options(args))
    out = _out_dir(args)
    res.state.meta.update({"flag": res.flag, "iterations": res.iterations})
    res.state.save_npz(out / "state.npz")
    energy = res.energy.to_dict()
    energy.update(
        {
            "epsilon": eps,
            "omega": omega,
            "omega0": w0,
            "regime": regime,
            "grid_n": grid.n,
            "box_radius": grid.box_radius,
            "iterations": res.iterations,
            "converged": res.converged,
            "flag": res.flag,
            "e_tf": tf.energy,
        }
    )
    if trial is not None:
        energy["trial_total"] = gp_energy(trial.state, pot).total
    _write_json(out / "energy.json", energy)
    # density along the x axis: the two rows straddling y = 0 are mirror images
    mid = grid.n // 2
    rho = res.state.density()
    _write_csv(out / "density_slice.csv", ("x", "density"), zip(grid.coords, 0.5 * (rho[mid - 1] + rho[mid])))
    _write_json(out / "tail.json", tail_diagnostics(res.state, tf).to_dict())
    scaled = eps**2 * res.energy.total
    if regime == SUPER and args.alpha is not None:
        r_m = radius_of_maximum(s, w0)
        print(f"eps^2 R_m^-s E_GP = {_fmt(scaled * r_m ** (-s))}")
        _write_json(out / "concentration.json", delta_concentration_check(res.state, r_m, args.alpha, s))
    elif trial is not None:
        upper = eps**2 * energy["trial_total"]
        print(f"E_TF <= eps^2 E_GP <= eps^2 E_trial: {_fmt(tf.energy)} <= {_fmt(scaled)} <= {_fmt(upper)}")
    else:
        print(f"E_TF <= eps^2 E_GP: {_fmt(tf.energy)} <= {_fmt(scaled)}")
    if not res.converged:
        print(f"solver did not converge ({res.flag} after {res.iterations} iterations)", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_trial(args) -> int:
    _require(args, "s", "epsilon", "omega0")
    eps, s, w0 = args.epsilon, args.s, args.omega0
    tf = solve_tf(s, w0)
    grid = _grid_for(args, tf)
    trial = assemble_trial(tf, eps, w0, grid)
    energy = gp_energy(trial.state, TrapPotential.homogeneous(s))
    out = _out_dir(args)
    trial.state.save_npz(out / "trial_state.npz")
    report = {"energy": energy.to_dict(), "provenance": trial.provenance(), "e_tf": tf.energy, "grid_n": grid.n}
    _write_json(out / "trial.json", report)
    print(f"eps^2 E_trial - E_TF = {_fmt(eps**2 * energy.total - tf.energy)} (N_eps={trial.lattice.count}, c_eps^2={_fmt(trial.c_eps**2)})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    kind = args.kind or LINEAR
    out = _out_dir(args)
    if kind == "tf-rate":
        _require(args, "s")
        chk = tf_rate_check(args.s, args.omega0_list)
        _write_json(out / "tf_rate.json", {"s": chk.s, "omega0": list(chk.omega0), "excess": list(chk.excess), "fit": chk.fit.to_dict()})
        print(f"exponent {_fmt(chk.fit.exponent)} +- {_fmt(chk.fit.stderr)} (target {_fmt(chk.fit.target)})")
        return EXIT_OK
    eps = args.epsilons
    if not eps:
        raise UsageError("empty epsilon list")
    policy = GridPolicy(n_min=args.n_min, n_max=args.n_max, box_factor=args.box_factor)
    if kind == "potential":
        _require(args, "potential")
        pot = _load_potential(args.potential)
        report = potential_perturbation_sweep(pot, eps, args.omega0 or 1.0, policy, _options(args))
    else:
        spec = RegimeSpec(kind, args.s, tuple(eps), omega0=args.omega0, omega1=args.omega1, alpha=args.alpha)
        report = run_sweep(spec, policy, _options(args))
    (out / "sweep.csv").write_text(report.to_csv())
    (out / "sweep.json").write_text(report.to_json() + "\n")
    for name, fit in report.fits.items():
        print(f"{name}: exponent {_fmt(fit.exponent)} +- {_fmt(fit.stderr)} model={fit.model} target={fit.target}")
    if not report.fits:
        print("no rate fit (fewer than three valid rows or non-positive gaps)")
    return EXIT_OK if len(report.valid_rows()) >= 3 else EXIT_NUMERIC


def _load_potential(spec) -> TrapPotential:
    if isinstance(spec, dict):
        return TrapPotential.from_dict(spec)
    text = str(spec)
    p = Path(text)
    if not text.lstrip().startswith("{") and p.exists():
        text = p.read_text()
    return TrapPotential.from_json(text)


def cmd_check_potential(args) -> int:
    _require(args, "potential")
    pot = _load_potential(args.potential)
    rep = asym_homogeneity_check(pot)
    print(json.dumps(rep.to_dict()))
    print("holds" if rep.holds else f"fails: worst ratio {_fmt(rep.worst_ratio)} at lambda={rep.worst_lambda}, r={rep.worst_r}")
    return EXIT_OK


COMMANDS = {
    "tf": cmd_tf,
    "critical": cmd_critical,
    "quartic": cmd_quartic,
    "gp": cmd_gp,
    "trial": cmd_trial,
    "sweep": cmd_sweep,
    "check-potential": cmd_check_potential,
}


# ---------------------------------------------------------------------------
# parsing


def _float_list(text: str) -> list:
    if text is None or str(text).strip() == "":
        return []
    return [float(x) for x in str(text).replace(",", " ").split()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with parameters; flags override it")
    p.add_argument("--s", type=float)
    p.add_argument("--omega0", type=float)
    p.add_argument("--omega1", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--grid-n", type=int)
    p.add_argument("--box-factor", type=float, default=2.0)
    p.add_argument("--out", default=".")
    p.add_argument("--seed", type=int, default=0, help="recorded for provenance; all commands are deterministic")
    p.add_argument("--emit-config", help="write the effective configuration to this JSON file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotbec", description="TF and GP ground states of rotating condensates in anharmonic traps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _common(p)
        if name in ("gp", "sweep"):
            p.add_argument("--tol", type=float, default=1e-10)
            p.add_argument("--max-iter", type=int, default=20000)
            p.add_argument("--residual-tol", type=float, default=0.0, help="relative residual bound for convergence (0: energy test only)")
        if name == "gp":
            p.add_argument("--init", default="trial", help="trial, tf, or a checkpoint path")
        if name == "sweep":
            p.add_argument("--kind", choices=[SUB, LINEAR, SUPER, "tf-rate", "potential"])
            p.add_argument("--epsilons", type=_float_list)
            p.add_argument("--omega0-list", type=_float_list)
            p.add_argument("--n-min", type=int, default=128)
            p.add_argument("--n-max", type=int, default=384)
        if name in ("sweep", "check-potential"):
            p.add_argument("--potential", help="potential JSON text or file")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse twice: once to find ``--config``, then with its values as defaults."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    defaults = {}
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if dest == "command":
            continue
        if dest not in known:
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if dest in ("epsilons", "omega0_list") and not isinstance(val, list):
            val = _float_list(val)
        defaults[dest] = val
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def effective_config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("config", "emit_config") and v is not None}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.emit_config:
        cfg = effective_config(args)
        Path(args.emit_config).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidParameterError, InvalidInputError, GridMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
