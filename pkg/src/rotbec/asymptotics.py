"""Regime bookkeeping, epsilon sweeps and rate fits.

A sweep solves the discrete GP problem along a decreasing list of ``eps``
values and records the scaled energy against the regime's limiting value:

* ``sub``:    fixed ``omega``; reference is the non-rotating TF energy.
* ``linear``: ``omega = omega0/eps``; reference is ``E_TF(omega0)``.
* ``super``:  ``omega = omega1/eps^(1+alpha)``; the energy is scaled by
  ``eps^(2 + 2 alpha s/(s-2))`` and compared with
  ``(omega1^2/2s)^(s/(s-2)) (1 - s/2)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import InvalidInputError, InvalidParameterError
from .gp_solver import (
    GPState,
    Grid,
    MinimizeOptions,
    chemical_potential,
    density_l2_distance,
    gp_energy,
    minimize_gp,
    tail_diagnostics,
    tf_seed,
)
from .potentials import TrapPotential, rescaled_general_potential
from .tf_core import critical_velocity, radius_of_maximum, scaled_tf, solve_tf
from .trial_states import assemble_trial

SUB, LINEAR, SUPER = "sub", "linear", "super"
DEFAULT_EPSILONS = (0.1, 0.07, 0.05, 0.035, 0.02)
WORKERS_ENV = "ROTBEC_WORKERS"


# ---------------------------------------------------------------------------
# regimes


@dataclass(frozen=True)
class RegimeClass:
    kind: str
    omega0: float


def classify_regime(epsilon: float, omega: float, low: float = 0.1, high: float = 10.0) -> RegimeClass:
    """Classify by ``omega0 = eps * omega`` against the band ``[low, high]``."""
    if not (0 < epsilon < 1):
        raise InvalidParameterError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if omega < 0:
        raise InvalidParameterError("omega must be non-negative")
    w0 = epsilon * omega
    if w0 < low:
        return RegimeClass(SUB, w0)
    if w0 > high:
        return RegimeClass(SUPER, w0)
    return RegimeClass(LINEAR, w0)


def rotation_exponent(epsilons, omegas) -> float:
    """``p`` in ``omega ~ eps^-p`` from the log-ratio of two or more samples."""
    e = np.log(np.asarray(epsilons, dtype=float))
    w = np.log(np.asarray(omegas, dtype=float))
    if e.size < 2:
        raise InvalidInputError("need at least two (eps, omega) samples")
    return float(-np.polyfit(e, w, 1)[0])


@dataclass(frozen=True)
class RotationLaw:
    kind: str
    exponent: float  # p in omega ~ eps^-p

    @property
    def alpha(self) -> float | None:
        return self.exponent - 1 if self.kind == SUPER else None


def classify_rotation_law(epsilons, omegas, tol: float = 0.05) -> RotationLaw:
    """Regime from how ``omega`` scales along an ``eps`` sequence (``p`` vs 1)."""
    p = rotation_exponent(epsilons, omegas)
    if p > 1 + tol:
        return RotationLaw(SUPER, p)
    if p < 1 - tol:
        return RotationLaw(SUB, p)
    return RotationLaw(LINEAR, p)


def shell_exponent(alpha: float, s: float) -> float:
    """Concentration exponent ``beta`` (shell half-width is ``eps^(beta/3)``)."""
    a = alpha * (s + 2) / (s - 2)
    return min(4 * a / 3, 1 + a)


def tail_exponent(alpha: float, s: float) -> float:
    """Gaussian-decay exponent ``gamma`` of the density outside the shell."""
    return 1 - shell_exponent(alpha, s) / 3 + alpha * (s + 2) / (s - 2)


@dataclass(frozen=True)
class RegimeSpec:
    kind: str
    s: float
    epsilons: tuple
    omega0: float | None = None  # linear: omega0; sub: the fixed omega
    omega1: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in (SUB, LINEAR, SUPER):
            raise InvalidInputError(f"unknown regime {self.kind!r}")
        if not (self.s > 2):
            raise InvalidParameterError("s must exceed 2")
        eps = tuple(sorted((float(e) for e in self.epsilons), reverse=True))
        if not eps:
            raise InvalidInputError("empty epsilon list")
        if any(not (0 < e < 1) for e in eps):
            raise InvalidParameterError("every epsilon must lie in (0, 1)")
        object.__setattr__(self, "epsilons", eps)
        if self.kind == LINEAR and not (self.omega0 is not None and self.omega0 > 0):
            raise InvalidParameterError("linear regime needs omega0 > 0")
        if self.kind == SUB and not (self.omega0 is not None and self.omega0 >= 0):
            raise InvalidParameterError("sub regime needs a fixed omega >= 0 (given as omega0)")
        if self.kind == SUPER:
            if not (self.omega1 is not None and self.omega1 > 0 and self.alpha is not None and self.alpha > 0):
                raise InvalidParameterError("super regime needs omega1 > 0 and alpha > 0")

    def omega(self, eps: float) -> float:
        if self.kind == LINEAR:
            return self.omega0 / eps
        if self.kind == SUB:
            return self.omega0
        return self.omega1 / eps ** (1 + self.alpha)

    def scaled_velocity(self, eps: float) -> float:
        """``omega0(eps) = eps * omega(eps)``."""
        return eps * self.omega(eps)

    def energy_scale(self, eps: float) -> float:
        if self.kind == SUPER:
            return eps ** (2 + 2 * self.alpha * self.s / (self.s - 2))
        return eps**2

    def reference(self) -> float:
        if self.kind == LINEAR:
            return solve_tf(self.s, self.omega0).energy
        if self.kind == SUB:
            return solve_tf(self.s, 0.0).energy
        s = self.s
        return (self.omega1**2 / (2 * s)) ** (s / (s - 2)) * (1 - s / 2)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class GridPolicy:
    """``n = clip(16 ceil(2L/(ratio eps)/16), n_min, n_max)`` on a box of ``box_factor R_out``."""

    n_min: int = 128
    n_max: int = 384
    ratio: float = 0.8
    box_factor: float = 2.0

    def grid(self, r_out: float, eps: float) -> Grid:
        box = self.box_factor * r_out
        n = 16 * math.ceil(2 * box / (self.ratio * eps) / 16)
        return Grid(int(min(max(n, self.n_min), self.n_max)), box)


@dataclass
class SweepRow:
    epsilon: float
    e_tf: float
    e_gp_scaled: float
    gap: float
    l2_dist: float
    tail_max: float
    e_trial_scaled: float | None = None
    mu_scaled: float | None = None
    outside_mass4: float | None = None
    tail_max_in: float | None = None
    second_moment: float | None = None
    shell_mass: float | None = None
    grid_n: int = 0
    iterations: int = 0
    flag: str = ""
    valid: bool = True


CSV_COLUMNS = ("epsilon", "e_tf", "e_gp_scaled", "gap", "l2_dist", "tail_max")


@dataclass(frozen=True)
class RateFit:
    exponent: float
    stderr: float
    intercept: float
    model: str
    samples: int
    degenerate: bool
    target: float | None = None

    @property
    def relative_error(self) -> float | None:
        if self.target is None or self.target == 0:
            return None
        return abs(self.exponent - self.target) / abs(self.target)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["relative_error"] = self.relative_error
        return d


@dataclass
class SweepReport:
    spec: dict
    rows: list
    fits: dict = field(default_factory=dict)
    model: str = "power_log"
    states: dict = field(default_factory=dict, repr=False)

    def valid_rows(self) -> list:
        return [r for r in self.rows if r.valid]

    def column(self, name: str, valid_only: bool = True) -> np.ndarray:
        rows = self.valid_rows() if valid_only else self.rows
        return np.array([getattr(r, name) for r in rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "model": self.model,
            "rows": [asdict(r) for r in self.rows],
            "fits": {k: v.to_dict() for k, v in self.fits.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".17g")


def _super_grid(spec: RegimeSpec, eps: float, policy: GridPolicy) -> tuple:
    w0 = spec.scaled_velocity(eps)
    tf = solve_tf(spec.s, w0)
    return tf, policy.grid(tf.r_out, eps)


def _warm_start(tf, eps: float, w0: float, grid: Grid, omega: float):
    if w0 > 0:
        try:
            return assemble_trial(tf, eps, w0, grid)
        except InvalidParameterError:
            pass  # lattice spacing too wide for this support
    return None


def rescale_to_maximum(state: GPState, r_m: float) -> GPState:
    """``R_m Psi(R_m x)`` on the correspondingly shrunk grid."""
    g = Grid(state.grid.n, state.grid.box_radius / r_m)
    return GPState(g, state.field * r_m, state.epsilon, state.omega, dict(state.meta))


def delta_concentration_check(state: GPState, r_m: float | None = None, alpha: float | None = None, s: float | None = None, shell: float | None = None) -> dict:
    """Second moment of ``|Psi~|^2`` about ``|x| = 1`` and the mass in a shell around it.

    ``state`` is a rescaled state when ``r_m`` is None; otherwise it is
    rescaled first.  The shell half-width is ``eps^(beta/3)`` when ``alpha``
    and ``s`` are given, else ``shell``.
    """
    if r_m is not None:
        state = rescale_to_maximum(state, r_m)
    g = state.grid
    rho = state.density()
    dist = g.radius - 1.0
    second = float(g.cell_area * np.sum(dist * dist * rho))
    if shell is None:
        if alpha is None or s is None:
            raise InvalidInputError("give either the shell width or (alpha, s)")
        shell = state.epsilon ** (shell_exponent(alpha, s) / 3)
    inside = np.abs(dist) <= shell
    return {
        "second_moment_about_1": second,
        "mass_in_shell": float(g.cell_area * np.sum(rho[inside])),
        "shell_half_width": float(shell),
    }


def _solve_row(spec: RegimeSpec, eps: float, policy: GridPolicy, options: MinimizeOptions, potential, keep_state: bool):
    s = spec.s
    omega = spec.omega(eps)
    w0 = spec.scaled_velocity(eps)
    reference = spec.reference()
    pot = potential or TrapPotential.homogeneous(s)
    if spec.kind == SUB:
        tf_ref = solve_tf(s, 0.0)
        tf_grid = solve_tf(s, w0)
    else:
        tf_grid = solve_tf(s, w0)
        tf_ref = tf_grid
    grid = policy.grid(max(tf_grid.r_out, tf_ref.r_out), eps)
    trial = _warm_start(tf_grid, eps, w0, grid, omega) if spec.kind != SUB else None
    init = trial.state if trial is not None else tf_seed(grid, tf_grid, eps, omega)
    init = GPState(grid, init.field, eps, omega)
    res = minimize_gp(eps, omega, pot, grid, init=init, options=options)
    scale = spec.energy_scale(eps)
    e_gp = scale * res.energy.total
    tails = tail_diagnostics(res.state, tf_ref)
    row = SweepRow(
        epsilon=eps,
        e_tf=reference,
        e_gp_scaled=e_gp,
        gap=e_gp - reference,
        l2_dist=density_l2_distance(res.state, tf_ref),
        tail_max=tails.max_density_out if tails.max_density_out is not None else float("nan"),
        e_trial_scaled=None if trial is None else scale * gp_energy(trial.state, pot).total,
        mu_scaled=scale * chemical_potential(res.state, pot),
        outside_mass4=tails.outside_mass4,
        tail_max_in=tails.max_density_in,
        grid_n=grid.n,
        iterations=res.iterations,
        flag=res.flag,
        valid=res.converged,
    )
    if spec.kind == SUPER:
        conc = delta_concentration_check(res.state, radius_of_maximum(s, w0), spec.alpha, s)
        row.second_moment = conc["second_moment_about_1"]
        row.shell_mass = conc["mass_in_shell"]
    return row, (res.state if keep_state else None)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(
    spec: RegimeSpec,
    policy: GridPolicy | None = None,
    options: MinimizeOptions | None = None,
    potential=None,
    keep_states: bool = False,
    workers: int | None = None,
) -> SweepReport:
    """Solve each row of ``spec`` and fit the gap rate.

    Rows are independent; ``workers > 1`` (or the environment variable
    ``ROTBEC_WORKERS``) runs them in separate processes.
    """
    if len(spec.epsilons) < 3:
        raise InvalidInputError("a sweep needs at least three epsilon values")
    policy = policy or GridPolicy()
    options = options or MinimizeOptions()
    workers = workers or _workers()
    args = [(spec, e, policy, options, potential, keep_states) for e in spec.epsilons]
    if workers > 1 and options.callback is None:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_solve_row, *zip(*args)))
    else:
        results = [_solve_row(*a) for a in args]
    rows = [r for r, _ in results]
    states = {r.epsilon: st for r, st in results if st is not None}
    report = SweepReport(spec.to_dict(), rows, states=states)
    valid = report.valid_rows()
    if len(valid) >= 3 and all(r.gap > 0 for r in valid):
        eps = [r.epsilon for r in valid]
        gaps = [r.gap for r in valid]
        if spec.kind == LINEAR:
            report.fits["gap"] = fit_rate(eps, gaps, "power_log", target=1.0)
        elif spec.kind == SUB:
            report.fits["gap"] = fit_rate(eps, gaps, "power", target=2.0 / 3.0)
        else:
            a = spec.alpha * (spec.s + 2) / (spec.s - 2)
            report.fits["gap"] = fit_rate(eps, gaps, "power", target=min(4 * a / 3, 1 + a))
        report.model = report.fits["gap"].model
    return report


# ---------------------------------------------------------------------------
# asymptotically homogeneous traps


def potential_perturbation_sweep(
    potential: TrapPotential,
    epsilons,
    omega0: float = 1.0,
    policy: GridPolicy | None = None,
    options: MinimizeOptions | None = None,
    scaling: str = "coupling",
) -> SweepReport:
    """``eps^2 (E_V - E_hom)`` along ``epsilons`` in the linear regime.

    ``V`` is pulled back to the scaled frame with :func:`rescaled_general_potential`;
    each ``V`` run is warm-started from the homogeneous minimizer on the same grid.
    """
    if potential.is_homogeneous:
        raise InvalidInputError("the perturbation sweep needs a general potential")
    s = potential.s
    hom = TrapPotential.homogeneous(s)
    policy = policy or GridPolicy()
    options = options or MinimizeOptions()
    tf = solve_tf(s, omega0)
    rows = []
    for eps in sorted(epsilons, reverse=True):
        omega = omega0 / eps
        grid = policy.grid(tf.r_out, eps)
        trial = _warm_start(tf, eps, omega0, grid, omega)
        start = trial.state if trial is not None else tf_seed(grid, tf, eps, omega)
        base = minimize_gp(eps, omega, hom, grid, init=start, options=options)
        pert_pot = rescaled_general_potential(potential, eps, scaling)
        pert = minimize_gp(eps, omega, pert_pot, grid, init=base.state, options=options)
        diff = eps**2 * (pert.energy.total - base.energy.total)
        rows.append(
            SweepRow(
                epsilon=eps,
                e_tf=eps**2 * base.energy.total,
                e_gp_scaled=eps**2 * pert.energy.total,
                gap=diff,
                l2_dist=float(math.sqrt(grid.cell_area * np.sum((pert.state.density() - base.state.density()) ** 2))),
                tail_max=float("nan"),
                grid_n=grid.n,
                iterations=base.iterations + pert.iterations,
                flag=f"{base.flag}/{pert.flag}",
                valid=base.converged and pert.converged,
            )
        )
    spec = {"kind": "potential", "s": s, "omega0": omega0, "epsilons": list(epsilons), "potential": potential.to_dict(), "scaling": scaling}
    report = SweepReport(spec, rows, model="power")
    valid = report.valid_rows()
    if len(valid) >= 3 and all(r.gap > 0 for r in valid):
        report.fits["gap"] = fit_rate([r.epsilon for r in valid], [r.gap for r in valid], "power", target=2 * potential.kappa / (s - 2))
    return report


# ---------------------------------------------------------------------------
# rate fits


def fit_rate(epsilons, gaps, model: str = "power", target: float | None = None, monotone_tol: float = 1e-3) -> RateFit:
    """Least squares for ``gap = C eps^a`` (``"power"``) or ``C eps^a |log eps|`` (``"power_log"``).

    Non-positive or non-monotone gaps set ``degenerate`` instead of raising.
    """
    if model not in ("power", "power_log"):
        raise InvalidInputError(f"unknown rate model {model!r}")
    e = np.asarray(epsilons, dtype=float)
    g = np.asarray(gaps, dtype=float)
    if e.size != g.size or e.size < 3:
        raise InvalidInputError("need at least three (eps, gap) samples")
    order = np.argsort(e)[::-1]
    e, g = e[order], g[order]
    if np.any(g <= 0):
        return RateFit(float("nan"), float("nan"), float("nan"), model, int(e.size), True, target)
    y = np.log(g)
    if model == "power_log":
        y = y - np.log(np.abs(np.log(e)))
    fit = stats.linregress(np.log(e), y)
    steps = np.diff(g) / g[:-1]
    monotone = bool(np.all(steps < -monotone_tol) or np.all(steps > monotone_tol))
    return RateFit(float(fit.slope), float(fit.stderr), float(fit.intercept), model, int(e.size), not monotone, target)


@dataclass(frozen=True)
class TFRateCheck:
    s: float
    omega0: tuple
    excess: tuple
    fit: RateFit

    @property
    def within(self) -> float:
        return self.fit.relative_error


def tf_rate_target(s: float) -> float:
    return -4 * (s + 2) / (3 * (s - 2))


def tf_rate_check(s: float, omega0_list=None) -> TFRateCheck:
    """Decay exponent of ``E~_TF - (1 - s/2)`` along increasing ``omega0``."""
    if omega0_list is None:
        wc, _ = critical_velocity(s)
        omega0_list = np.geomspace(5 * wc, 50 * wc, 12)
    w = [float(x) for x in omega0_list]
    if any(b <= a for a, b in zip(w[:-1], w[1:])):
        raise InvalidInputError("omega0 list must be increasing")
    wc, _ = critical_velocity(s)
    if w[0] <= wc:
        raise InvalidParameterError("every omega0 must exceed the critical velocity")
    excess = [scaled_tf(s, x).energy_excess for x in w]
    # fit_rate treats its first argument as the small parameter: use 1/omega0
    fit = fit_rate([1 / x for x in w], excess, "power")
    fit = RateFit(-fit.exponent, fit.stderr, fit.intercept, fit.model, fit.samples, fit.degenerate, tf_rate_target(s))
    return TFRateCheck(float(s), tuple(w), tuple(excess), fit)
