"""Discrete GP functional in the rotating frame and its constrained minimization.

Grid
    ``n x n`` cell centres on ``[-L, L]^2`` with spacing ``h = 2L/n`` and a
    zero ghost layer outside (hard wall).  ``field[j, i]`` is the sample at
    ``(x_i, y_j)``.

Kinetic term
    The magnetic kinetic energy uses Peierls link factors for the symmetric
    gauge ``A = (omega/2)(-y, x)``:

        sum over links |U psi(next) - psi|^2,  U = exp(-i A.e h)

    which is gauge covariant, non-negative, and reduces to the usual 5-point
    Dirichlet form at ``omega = 0``.

Minimizer
    Riemannian preconditioned nonlinear CG on the unit sphere.  Along
    ``u + tau p`` (followed by normalization) the discrete energy is a
    rational function of ``tau`` whose coefficients cost one extra operator
    application, so the line search is exact rather than backtracking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft, optimize

from . import kernels
from .errors import GridMismatchError, InvalidInputError, InvalidParameterError
from .potentials import TrapPotential
from .tf_core import TFSolution, solve_tf, tf_density


@dataclass(frozen=True)
class Grid:
    n: int
    box_radius: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 16 or self.n % 2:
            raise InvalidParameterError(f"grid size must be an even integer >= 16, got {self.n!r}")
        if not (self.box_radius > 0) or not math.isfinite(self.box_radius):
            raise InvalidParameterError(f"box radius must be positive, got {self.box_radius!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "box_radius", float(self.box_radius))

    @classmethod
    def for_tf(cls, tf: TFSolution, n: int, box_factor: float = 2.0) -> "Grid":
        return cls(n, box_factor * tf.r_out)

    @property
    def spacing(self) -> float:
        return 2.0 * self.box_radius / self.n

    @property
    def cell_area(self) -> float:
        return self.spacing**2

    @cached_property
    def coords(self) -> np.ndarray:
        x = -self.box_radius + (np.arange(self.n) + 0.5) * self.spacing
        x.setflags(write=False)
        return x

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        X, Y = np.meshgrid(self.coords, self.coords, indexing="xy")
        X.setflags(write=False)
        Y.setflags(write=False)
        return X, Y

    @cached_property
    def radius(self) -> np.ndarray:
        X, Y = self.mesh
        r = np.hypot(X, Y)
        r.setflags(write=False)
        return r

    def covers(self, tf: TFSolution, factor: float = 2.0) -> bool:
        return self.box_radius >= factor * tf.r_out * (1 - 1e-12)

    def require_covers(self, tf: TFSolution, factor: float = 2.0) -> None:
        if not self.covers(tf, factor):
            raise InvalidParameterError(
                f"box radius {self.box_radius:.6g} is below {factor} * r_out = {factor * tf.r_out:.6g}"
            )


@dataclass
class GPState:
    grid: Grid
    field: np.ndarray
    epsilon: float
    omega: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.field = np.ascontiguousarray(self.field, dtype=np.complex128)
        if self.field.shape != (self.grid.n, self.grid.n):
            raise GridMismatchError(f"field shape {self.field.shape} does not match grid n={self.grid.n}")
        if not (self.epsilon > 0):
            raise InvalidParameterError(f"epsilon must be positive, got {self.epsilon!r}")
        if not math.isfinite(self.omega):
            raise InvalidParameterError("omega must be finite")

    def norm_sq(self) -> float:
        return float(self.grid.cell_area * np.sum(self.field.real**2 + self.field.imag**2))

    def normalized(self) -> "GPState":
        nrm = math.sqrt(self.norm_sq())
        if nrm == 0:
            raise InvalidInputError("cannot normalize the zero state")
        return GPState(self.grid, self.field / nrm, self.epsilon, self.omega, dict(self.meta))

    def density(self) -> np.ndarray:
        return self.field.real**2 + self.field.imag**2

    # -- checkpoints -------------------------------------------------------

    def to_dict(self) -> dict:
        inter = np.empty(2 * self.field.size)
        flat = self.field.ravel()
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        return {
            "n": self.grid.n,
            "box_radius": self.grid.box_radius,
            "epsilon": self.epsilon,
            "omega": self.omega,
            "values": inter.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GPState":
        try:
            grid = Grid(int(d["n"]), float(d["box_radius"]))
            vals = np.asarray(d["values"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed checkpoint: {exc}") from None
        if vals.size != 2 * grid.n * grid.n:
            raise GridMismatchError("checkpoint value count does not match n")
        fld = (vals[0::2] + 1j * vals[1::2]).reshape(grid.n, grid.n)
        return cls(grid, fld, float(d["epsilon"]), float(d["omega"]))

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load_json(cls, path) -> "GPState":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save_npz(self, path) -> None:
        np.savez(
            path,
            n=self.grid.n,
            box_radius=self.grid.box_radius,
            epsilon=self.epsilon,
            omega=self.omega,
            field=self.field,
        )

    @classmethod
    def load_npz(cls, path) -> "GPState":
        with np.load(path) as z:
            grid = Grid(int(z["n"]), float(z["box_radius"]))
            return cls(grid, z["field"], float(z["epsilon"]), float(z["omega"]))


@dataclass(frozen=True)
class EnergyBreakdown:
    magnetic_kinetic: float
    potential: float
    interaction: float
    centrifugal: float

    @property
    def total(self) -> float:
        return self.magnetic_kinetic + self.potential + self.interaction + self.centrifugal

    def scaled(self, factor: float) -> "EnergyBreakdown":
        return EnergyBreakdown(*(factor * v for v in (self.magnetic_kinetic, self.potential, self.interaction, self.centrifugal)))

    def to_dict(self) -> dict:
        return {
            "magnetic_kinetic": self.magnetic_kinetic,
            "potential": self.potential,
            "interaction": self.interaction,
            "centrifugal": self.centrifugal,
            "total": self.total,
        }


# ---------------------------------------------------------------------------
# operator


def potential_values(grid: Grid, potential) -> np.ndarray:
    """Trap values on the grid; ``potential`` is a TrapPotential or a radial callable."""
    vals = np.asarray(potential(grid.radius), dtype=float)
    if vals.shape != grid.radius.shape or not np.all(np.isfinite(vals)):
        raise InvalidInputError("potential must return finite values of the grid shape")
    return vals


class GPOperator:
    """Discrete GP energy and Hamiltonian for fixed ``(grid, epsilon, omega, V)``.

    Internally works with ``u = h * psi`` so that the discrete constraint is
    the Euclidean ``|u| = 1``:  ``E(u) = <u, A u> + c sum |u|^4`` with
    ``A = K/h^2 + V/eps^2 - omega^2 r^2/4`` and ``c = 1/(eps h)^2``.
    """

    def __init__(self, grid: Grid, epsilon: float, omega: float, potential):
        if not (epsilon > 0):
            raise InvalidParameterError(f"epsilon must be positive, got {epsilon!r}")
        self.grid = grid
        self.epsilon = float(epsilon)
        self.omega = float(omega)
        h = grid.spacing
        self.trap = potential_values(grid, potential)
        r2 = grid.radius**2
        self.v_trap = self.trap / self.epsilon**2
        if self.omega == 0.0:
            # no gauge field: skip the phase factors and the centrifugal term
            self.v_centrifugal = np.zeros_like(r2)
            self.ux = np.ones(grid.n, dtype=np.complex128)
            self.uy = np.ones(grid.n, dtype=np.complex128)
        else:
            self.v_centrifugal = -0.25 * self.omega**2 * r2
            x = grid.coords
            self.ux = np.exp(0.5j * self.omega * x * h)  # indexed by row (y_j)
            self.uy = np.exp(-0.5j * self.omega * x * h)  # indexed by column (x_i)
        self.v_eff = self.v_trap + self.v_centrifugal
        self.inv_h2 = 1.0 / h**2
        self.c4 = 1.0 / (self.epsilon * h) ** 2

    def check_state(self, state: GPState) -> None:
        if state.grid != self.grid:
            raise GridMismatchError(f"state grid {state.grid} differs from operator grid {self.grid}")

    def apply_linear(self, u: np.ndarray) -> np.ndarray:
        """``A u`` (kinetic plus external and centrifugal potentials)."""
        return self.inv_h2 * kernels.magnetic_laplacian(u, self.ux, self.uy) + self.v_eff * u

    def apply_hamiltonian(self, u: np.ndarray) -> np.ndarray:
        return self.apply_linear(u) + 2 * self.c4 * (u.real**2 + u.imag**2) * u

    def energy_of_u(self, u: np.ndarray, au: np.ndarray | None = None) -> float:
        if au is None:
            au = self.apply_linear(u)
        rho = u.real**2 + u.imag**2
        return float(np.vdot(u, au).real + self.c4 * np.sum(rho * rho))

    def breakdown(self, psi: np.ndarray) -> EnergyBreakdown:
        a = self.grid.cell_area
        rho = psi.real**2 + psi.imag**2
        kin = kernels.magnetic_kinetic_energy(np.ascontiguousarray(psi), self.ux, self.uy)
        return EnergyBreakdown(
            magnetic_kinetic=float(kin),
            potential=float(a * np.sum(self.v_trap * rho)),
            interaction=float(a * np.sum(rho * rho) / self.epsilon**2),
            centrifugal=float(a * np.sum(self.v_centrifugal * rho)),
        )

    def gradient(self, psi: np.ndarray) -> np.ndarray:
        """Wirtinger derivative ``dE/d conj(psi)`` of the unconstrained discrete energy.

        For a perturbation ``d``, ``E(psi + t d) = E(psi) + 2 t Re<grad, d> + O(t^2)``.
        """
        h2 = self.grid.cell_area
        rho = psi.real**2 + psi.imag**2
        return kernels.magnetic_laplacian(np.ascontiguousarray(psi), self.ux, self.uy) + h2 * (
            self.v_eff * psi + 2 * rho * psi / self.epsilon**2
        )


def _operator_for(state: GPState, potential) -> GPOperator:
    return GPOperator(state.grid, state.epsilon, state.omega, potential)


def gp_energy(state: GPState, potential, grid: Grid | None = None) -> EnergyBreakdown:
    """Discrete magnetic-form GP energy of ``state``."""
    if grid is not None and grid != state.grid:
        raise GridMismatchError(f"state grid {state.grid} differs from requested grid {grid}")
    return _operator_for(state, potential).breakdown(state.field)


def angular_momentum_energy(state: GPState, potential) -> float:
    """Energy from the ``|grad psi|^2 - omega psi* L psi`` form.

    Independent discretization: plain 5-point kinetic term and centred
    differences for ``L = -i (x d/dy - y d/dx)``.  Agrees with
    :func:`gp_energy` up to ``O(h^2)``.
    """
    g = state.grid
    psi = state.field
    ones = np.ones(g.n, dtype=np.complex128)
    kin = kernels.magnetic_kinetic_energy(np.ascontiguousarray(psi), ones, ones)
    dpx, dpy = _centred_gradient(psi, g.spacing)
    X, Y = g.mesh
    lpsi = -1j * (X * dpy - Y * dpx)
    rho = state.density()
    a = g.cell_area
    rot = float(np.vdot(psi, lpsi).real) * a
    trap = potential_values(g, potential)
    return float(kin - state.omega * rot + a * np.sum(rho * (trap + rho)) / state.epsilon**2)


def _centred_gradient(psi: np.ndarray, h: float):
    pad = np.pad(psi, 1)
    dx = (pad[1:-1, 2:] - pad[1:-1, :-2]) / (2 * h)
    dy = (pad[2:, 1:-1] - pad[:-2, 1:-1]) / (2 * h)
    return dx, dy


def angular_momentum_bound_violation(state: GPState) -> float:
    """Largest value of ``omega |psi* L psi| - |grad psi|^2 - omega^2 r^2 |psi|^2 / 4``.

    Non-positive (up to rounding) by Cauchy-Schwarz and AM-GM at every grid
    point, with centred differences for the gradient.
    """
    g = state.grid
    psi = state.field
    dx, dy = _centred_gradient(psi, g.spacing)
    X, Y = g.mesh
    lhs = abs(state.omega) * np.abs(np.conj(psi) * (-1j) * (X * dy - Y * dx))
    rhs = np.abs(dx) ** 2 + np.abs(dy) ** 2 + 0.25 * state.omega**2 * g.radius**2 * state.density()
    scale = np.maximum(rhs, 1e-300)
    return float(np.max((lhs - rhs) / scale))


# ---------------------------------------------------------------------------
# minimization


@dataclass
class MinimizeOptions:
    tol: float = 1e-10  # relative energy decrease per step
    patience: int = 3  # consecutive steps below tol
    max_iter: int = 20000
    residual_tol: float = 0.0  # also require |(H - lambda) u| / |lambda| below this (0: off)
    restart_every: int = 0  # 0: restart CG only on loss of descent
    refresh_every: int = 25  # recompute A u from scratch to limit drift
    callback: object = None

    def __post_init__(self):
        if not (self.tol > 0) or self.patience < 1 or self.max_iter < 1 or self.residual_tol < 0:
            raise InvalidParameterError("tol > 0, residual_tol >= 0, patience >= 1 and max_iter >= 1 required")


@dataclass
class MinimizeResult:
    state: GPState
    energy: EnergyBreakdown
    iterations: int
    converged: bool
    flag: str  # "converged" | "stagnated" | "max-iter"
    history: list = field(default_factory=list)
    norm_drift: float = 0.0
    max_increase: float = 0.0

    def __iter__(self):
        yield self.state
        yield self.energy
        yield self.iterations


class _Preconditioner:
    """``D^(1/2) (alpha - Laplacian)^(-1) D^(1/2)`` with ``D = alpha / (alpha + W)``.

    ``W`` is the non-negative trap plus interaction part of the Hamiltonian;
    the inverse Laplacian is applied in the DST-II basis (wall half a cell
    outside the last node), which uses fast FFT lengths for every even ``n``
    and differs from the discrete operator only by a boundary-row term.
    """

    def __init__(self, op: GPOperator):
        n = op.grid.n
        k = np.arange(1, n + 1)
        lam = (2.0 - 2.0 * np.cos(np.pi * k / n)) * op.inv_h2
        self.lap = lam[:, None] + lam[None, :]
        self.op = op

    def update(self, u: np.ndarray, alpha: float) -> None:
        w = self.op.v_trap + 2 * self.op.c4 * (u.real**2 + u.imag**2)
        self.sqrt_d = np.sqrt(alpha / (alpha + w))
        self.inv = 1.0 / (alpha + self.lap)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        z = fft.dstn(self.sqrt_d * r, type=2, norm="ortho")
        z *= self.inv
        return self.sqrt_d * fft.idstn(z, type=2, norm="ortho")


def _line_coefficients(op: GPOperator, u, p, au, ap):
    """Coefficients of the energy change along the normalized ray ``u + tau p``.

    ``p`` must satisfy ``<u, p> = 0`` so that ``|u + tau p|^2 = 1 + P tau^2``.
    """
    P = float(np.vdot(p, p).real)
    a0 = float(np.vdot(u, au).real)
    a1 = 2.0 * float(np.vdot(p, au).real)
    a2 = float(np.vdot(p, ap).real)
    al = u.real**2 + u.imag**2
    be = 2.0 * (u.real * p.real + u.imag * p.imag)
    ga = p.real**2 + p.imag**2
    q0 = float(np.sum(al * al))
    q1 = 2.0 * float(np.sum(al * be))
    q2 = float(np.sum(be * be + 2 * al * ga))
    q3 = 2.0 * float(np.sum(be * ga))
    q4 = float(np.sum(ga * ga))
    return P, a0, a1, a2, q0, q1, q2, q3, q4


def _delta_energy(tau, coef, c4):
    P, a0, a1, a2, q0, q1, q2, q3, q4 = coef
    t2 = tau * tau
    n1 = 1.0 + P * t2
    quad = (a1 * tau + (a2 - a0 * P) * t2) / n1
    quart = (q1 * tau + (q2 - 2 * P * q0) * t2 + q3 * t2 * tau + (q4 - P * P * q0) * t2 * t2) / (n1 * n1)
    return quad + c4 * quart


def _exact_line_search(coef, c4):
    """Minimize the energy change over the angle ``theta = atan(tau |p|)`` in (0, pi/2)."""
    P = coef[0]
    if P <= 0:
        return 0.0, 0.0
    sq = math.sqrt(P)
    thetas = np.concatenate([np.geomspace(1e-12, 1.0, 100), np.linspace(1.0, 0.5 * np.pi * (1 - 1e-9), 20)[1:]])
    taus = np.tan(thetas) / sq
    vals = _delta_energy(taus, coef, c4)
    k = int(np.argmin(vals))
    if vals[k] >= 0:
        return 0.0, 0.0
    lo = thetas[max(k - 1, 0)] if k > 0 else 0.0
    hi = thetas[min(k + 1, len(thetas) - 1)]
    res = optimize.minimize_scalar(
        lambda th: _delta_energy(math.tan(th) / sq, coef, c4),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-14 * max(hi, 1e-300)},
    )
    best_t, best_v = taus[k], vals[k]
    if res.fun < best_v:
        best_t, best_v = math.tan(res.x) / sq, float(res.fun)
    return float(best_t), float(best_v)


def tf_seed(grid: Grid, tf: TFSolution, epsilon: float, omega: float) -> GPState:
    """``sqrt(rho_TF)`` on the grid, normalized (no phase)."""
    amp = np.sqrt(tf_density(tf, grid.radius))
    return GPState(grid, amp.astype(np.complex128), epsilon, omega).normalized()


def minimize_gp(
    epsilon: float,
    omega: float,
    potential,
    grid: Grid,
    init: GPState | str = "tf",
    options: MinimizeOptions | None = None,
    tf: TFSolution | None = None,
) -> MinimizeResult:
    """Minimize the discrete GP energy at unit mass.

    ``init`` is a GPState on ``grid`` or ``"tf"`` (``sqrt`` of the TF density
    at ``omega0 = epsilon * omega``).  When ``tf`` is given (or built for the
    seed) the box must extend to twice its outer radius.
    """
    opts = options or MinimizeOptions()
    op = GPOperator(grid, epsilon, omega, potential)
    s = getattr(potential, "s", None)
    if isinstance(init, str):
        if init != "tf":
            raise InvalidInputError(f"unknown initial state {init!r}")
        if s is None:
            raise InvalidInputError("a TF seed needs a potential with an exponent s")
        tf = tf or solve_tf(s, abs(epsilon * omega))
        grid.require_covers(tf)
        start = tf_seed(grid, tf, epsilon, omega)
    else:
        if init.grid != grid:
            raise GridMismatchError("initial state lives on a different grid")
        if tf is not None:
            grid.require_covers(tf)
        start = init
    h = grid.spacing
    u = start.field * h
    u = u / np.linalg.norm(u)

    precond = _Preconditioner(op)
    au = op.apply_linear(u)
    rho = u.real**2 + u.imag**2
    energy = float(np.vdot(u, au).real + op.c4 * np.sum(rho * rho))
    history = [energy]
    p_prev = z_prev = r_prev_dot = None
    small = 0
    flag = "max-iter"
    drift = 0.0
    max_increase = 0.0
    it = 0
    since_restart = 0
    for it in range(1, opts.max_iter + 1):
        hu = au + 2 * op.c4 * rho * u
        lam = float(np.vdot(u, hu).real)
        r = hu - lam * u
        rel_residual = float(np.linalg.norm(r)) / max(abs(lam), 1e-300)
        alpha = max(float(np.vdot(u, au).real) - float(np.sum(op.v_eff * rho)), 1.0)
        precond.update(u, alpha)
        z = precond(r)
        z -= np.vdot(u, z) * u
        rz = float(np.vdot(r, z).real)
        if rz <= 0:
            flag = "stagnated"
            break
        restart = p_prev is None or (opts.restart_every and since_restart >= opts.restart_every)
        if restart:
            p = -z
            since_restart = 0
        else:
            beta = max(0.0, float(np.vdot(r, z - z_prev).real) / r_prev_dot)
            p = -z + beta * p_prev
            p -= np.vdot(u, p) * u
            if float(np.vdot(r, p).real) >= 0:
                p = -z
                since_restart = 0
        ap = op.apply_linear(p)
        coef = _line_coefficients(op, u, p, au, ap)
        tau, pred = _exact_line_search(coef, op.c4)
        if tau == 0.0 and not restart:
            # conjugate direction gave nothing: retry along the preconditioned gradient
            p = -z
            ap = op.apply_linear(p)
            coef = _line_coefficients(op, u, p, au, ap)
            tau, pred = _exact_line_search(coef, op.c4)
            since_restart = 0
        if tau == 0.0:
            flag = "stagnated"
            break
        nrm = math.sqrt(1.0 + coef[0] * tau * tau)
        u_new = (u + tau * p) / nrm
        # keep the norm exact; record how far the analytic normalization was off
        nn = float(np.linalg.norm(u_new))
        drift = max(drift, abs(nn * nn - 1.0))
        u_new /= nn
        if it % opts.refresh_every == 0:
            au_new = op.apply_linear(u_new)
        else:
            au_new = (au + tau * ap) / (nrm * nn)
        rho_new = u_new.real**2 + u_new.imag**2
        e_new = float(np.vdot(u_new, au_new).real + op.c4 * np.sum(rho_new * rho_new))
        if e_new > energy:
            # rounding-level increase: do not accept, restart once, then stop
            max_increase = max(max_increase, e_new - energy)
            if restart:
                flag = "stagnated"
                break
            p_prev = None
            continue
        decrease = (energy - e_new) / max(abs(e_new), 1e-300)
        u, au, rho, energy = u_new, au_new, rho_new, e_new
        history.append(energy)
        p_prev, z_prev, r_prev_dot = p, z, rz
        since_restart += 1
        if opts.callback is not None:
            opts.callback(it, energy)
        small = small + 1 if decrease < opts.tol else 0
        # the residual lags one step behind; the far tails barely move the energy
        if small >= opts.patience and (opts.residual_tol == 0 or rel_residual <= opts.residual_tol):
            flag = "converged"
            break

    state = GPState(grid, u / h, epsilon, omega)
    breakdown = op.breakdown(state.field)
    return MinimizeResult(
        state=state,
        energy=breakdown,
        iterations=it,
        converged=flag in ("converged", "stagnated"),
        flag=flag,
        history=history,
        norm_drift=drift,
        max_increase=max_increase,
    )


# ---------------------------------------------------------------------------
# diagnostics


def chemical_potential(state: GPState, potential) -> float:
    """``mu = E[psi] + eps^-2 int |psi|^4``."""
    e = gp_energy(state, potential)
    return e.total + e.interaction


def gp_residual(state: GPState, potential) -> float:
    """``|| (H - mu) psi ||_2`` with the discrete Hamiltonian."""
    op = _operator_for(state, potential)
    h = state.grid.spacing
    u = state.field * h
    hu = op.apply_hamiltonian(u)
    mu = float(np.vdot(u, hu).real)
    return float(np.linalg.norm(hu - mu * u))


def density_l2_distance(state: GPState, tf: TFSolution) -> float:
    """``|| |psi|^2 - rho_TF ||_2`` by cell-weighted quadrature."""
    g = state.grid
    diff = state.density() - tf_density(tf, g.radius)
    return float(math.sqrt(g.cell_area * np.sum(diff * diff)))


@dataclass(frozen=True)
class TailReport:
    outside_mass4: float
    max_density_out: float | None
    max_density_in: float | None

    def to_dict(self) -> dict:
        return {
            "outside_mass4": self.outside_mass4,
            "max_density_out": self.max_density_out,
            "max_density_in": self.max_density_in,
        }


def tail_diagnostics(state: GPState, tf: TFSolution) -> TailReport:
    """Mass of ``|psi|^4`` off the TF support and density maxima beyond ``eps^(1/3)`` of it."""
    g = state.grid
    r = g.radius
    rho = state.density()
    off = (r > tf.r_out) | (r < tf.r_in)
    outside = float(g.cell_area * np.sum(rho[off] ** 2))
    margin = state.epsilon ** (1.0 / 3.0)
    far_out = r >= tf.r_out + margin
    max_out = float(np.max(rho[far_out])) if np.any(far_out) else None
    max_in = None
    if tf.has_hole and tf.r_in > margin:
        far_in = r <= tf.r_in - margin
        if np.any(far_in):
            max_in = float(np.max(rho[far_in]))
    return TailReport(outside, max_out, max_in)


def trap_for(s: float) -> TrapPotential:
    return TrapPotential.homogeneous(s)
