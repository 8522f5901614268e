"""Upper-bound trial states for the GP energy.

* :func:`regularized_tf_density` smooths the TF density with the kernel
  ``exp(-r/eps) / (2 pi eps^2)``; the radial convolution is reduced to a
  double integral (angle, then distance) with the angle restricted exactly to
  the arc that meets the TF support.
* :func:`build_vortex_lattice` places unit vortices on a square lattice of
  spacing ``delta sqrt(eps)``; :func:`phase_and_cutoff` gives the product phase
  and the linear cutoff around each site.
* :func:`assemble_trial` multiplies the pieces into a normalized grid state.
* :func:`giant_vortex_trial` builds the thin-annulus state with one
  macroscopic winding used for very fast rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from . import kernels
from .errors import InvalidParameterError
from .gp_solver import EnergyBreakdown, GPState, Grid, gp_energy
from .potentials import TrapPotential
from .quadrature import gauss_legendre, map_nodes, tanh_sinh
from .tf_core import TFSolution, radius_of_maximum, tf_density

DEFAULT_ETA = 3.0
_TAIL_EFOLDS = 45.0


# ---------------------------------------------------------------------------
# regularized TF density


@dataclass(frozen=True)
class RegularizedDensity:
    tf: TFSolution
    epsilon: float
    r: np.ndarray
    values: np.ndarray
    mass: float
    spline: CubicSpline = field(repr=False, compare=False)

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = r <= self.r_max
        out[inside] = np.maximum(self.spline(r[inside]), 0.0)
        return out

    def tail_bound(self, r):
        """``exp(-(r - R_out)/eps) / (2 pi eps^2)``, valid for ``r > R_out``."""
        r = np.asarray(r, dtype=float)
        return np.exp(-(r - self.tf.r_out) / self.epsilon) / (2 * math.pi * self.epsilon**2)

    def sqrt_gradient_norm_sq(self) -> float:
        """``|| grad sqrt(rho_eps) ||_2^2`` from the tabulated profile."""
        amp = np.sqrt(np.maximum(self.values, 0.0))
        d = np.gradient(amp, self.r)
        return float(integrate.simpson(2 * math.pi * self.r * d * d, x=self.r))


def _angular_average(tf: TFSolution, r: float, q: np.ndarray, n_phi: int) -> np.ndarray:
    """``int_0^{2 pi} rho_TF(|r e_x + q e_phi|) dphi`` for each ``q``."""
    z_in, z_out = tf.r_in**2, tf.r_out**2
    out = np.zeros_like(q)
    if r == 0.0:
        return 2 * math.pi * tf_density(tf, q)
    base = r * r + q * q
    two_rq = 2 * r * q
    c_lo = np.clip((z_in - base) / two_rq, -1.0, 1.0)
    c_hi = np.clip((z_out - base) / two_rq, -1.0, 1.0)
    phi_a = np.arccos(c_hi)
    phi_b = np.arccos(c_lo)
    ok = phi_b > phi_a
    if not np.any(ok):
        return out
    x, w = gauss_legendre(n_phi)
    phi, wt = map_nodes(phi_a[ok], phi_b[ok], x, w)
    z = base[ok, None] + two_rq[ok, None] * np.cos(phi)
    t = 0.25 * tf.omega0**2
    rho = 0.5 * np.maximum(tf.mu - np.maximum(z, 0.0) ** (0.5 * tf.s) + t * z, 0.0)
    out[ok] = 2.0 * np.sum(wt * rho, axis=-1)
    return out


def _convolved_value(tf: TFSolution, epsilon: float, r: float, n_q: int, n_phi: int) -> float:
    q_max = min(r + tf.r_out, _TAIL_EFOLDS * epsilon)
    cuts = [0.0, abs(r - tf.r_out), r + tf.r_out]
    if tf.has_hole:
        cuts += [abs(r - tf.r_in), r + tf.r_in]
    cuts = sorted({c for c in cuts if c < q_max} | {q_max})
    x, w = tanh_sinh(n_q)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 0:
            continue
        q, wq = map_nodes(a, b, x, w)
        ang = _angular_average(tf, r, q, n_phi)
        total += float(np.sum(wq * q * np.exp(-q / epsilon) * ang))
    return total / (2 * math.pi * epsilon**2)


def regularized_tf_density(
    tf: TFSolution,
    epsilon: float,
    points_per_eps: int = 8,
    n_q: int = 61,
    n_phi: int = 48,
) -> RegularizedDensity:
    """Tabulate ``rho_eps = j_eps * rho_TF`` on ``[0, R_out + 45 eps]`` and spline it."""
    if not (epsilon > 0):
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon!r}")
    r_max = tf.r_out + _TAIL_EFOLDS * epsilon
    step = min(epsilon / points_per_eps, tf.r_out / 400)
    n = int(math.ceil(r_max / step))
    n += n % 2  # even number of intervals for Simpson
    r = np.linspace(0.0, r_max, n + 1)
    vals = np.array([_convolved_value(tf, epsilon, float(ri), n_q, n_phi) for ri in r])
    mass = float(integrate.simpson(2 * math.pi * r * vals, x=r))
    spline = CubicSpline(r, vals, bc_type=((1, 0.0), "not-a-knot"))
    r.setflags(write=False)
    vals.setflags(write=False)
    return RegularizedDensity(tf, float(epsilon), r, vals, mass, spline)


# ---------------------------------------------------------------------------
# vortex lattice


@dataclass(frozen=True)
class VortexLattice:
    spacing: float
    points: np.ndarray  # (N, 2)
    eta: float
    delta: float
    epsilon: float
    radius: float  # clipping radius

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    @property
    def cutoff_radius(self) -> float:
        return self.epsilon**self.eta

    def min_distance(self) -> float:
        if self.count < 2:
            return math.inf
        d, _ = cKDTree(self.points).query(self.points, k=2)
        return float(np.min(d[:, 1]))

    def cutoff_gradient_norm_sq(self) -> float:
        """``|| grad chi ||_2^2`` for the linear cutoff: ``pi`` per site."""
        return math.pi * self.count

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "eta": self.eta,
            "spacing": self.spacing,
            "N_eps": self.count,
            "radius": self.radius,
        }


def default_delta(omega0: float) -> float:
    return math.sqrt(2 * math.pi / omega0)


def build_vortex_lattice(
    omega0: float,
    epsilon: float,
    r_out: float,
    delta: float | None = None,
    eta: float = DEFAULT_ETA,
) -> VortexLattice:
    """Square lattice ``(m l, n l)`` with ``l = delta sqrt(eps)`` inside ``|x| <= 2 R_out - 2 sqrt(2) l``."""
    if not (omega0 > 0):
        raise InvalidParameterError("a vortex lattice needs omega0 > 0")
    if not (epsilon > 0):
        raise InvalidParameterError("epsilon must be positive")
    if not (eta > 2.5):
        raise InvalidParameterError(f"cutoff exponent must exceed 5/2, got {eta!r}")
    delta = default_delta(omega0) if delta is None else float(delta)
    spacing = delta * math.sqrt(epsilon)
    if spacing >= r_out:
        raise InvalidParameterError(f"lattice spacing {spacing:.4g} is not below r_out = {r_out:.4g}")
    radius = 2 * r_out - 2 * math.sqrt(2) * spacing
    m = int(math.floor(radius / spacing))
    idx = np.arange(-m, m + 1)
    I, J = np.meshgrid(idx, idx, indexing="ij")
    pts = np.stack([I.ravel() * spacing, J.ravel() * spacing], axis=1)
    keep = np.hypot(pts[:, 0], pts[:, 1]) <= radius * (1 + 1e-12)
    pts = np.ascontiguousarray(pts[keep])
    pts.setflags(write=False)
    return VortexLattice(spacing, pts, float(eta), delta, float(epsilon), radius)


def empty_lattice(epsilon: float, eta: float = DEFAULT_ETA) -> VortexLattice:
    pts = np.zeros((0, 2))
    pts.setflags(write=False)
    return VortexLattice(math.inf, pts, float(eta), math.inf, float(epsilon), 0.0)


def lattice_phase(lattice: VortexLattice, x, y) -> np.ndarray:
    """``prod_j (z - z_j)/|z - z_j|``; equals 1 at a site itself."""
    x = np.ascontiguousarray(np.ravel(x), dtype=float)
    y = np.ascontiguousarray(np.ravel(y), dtype=float)
    if lattice.count == 0:
        return np.ones(x.shape, dtype=np.complex128)
    sx = np.ascontiguousarray(lattice.points[:, 0])
    sy = np.ascontiguousarray(lattice.points[:, 1])
    return kernels.vortex_phase(x, y, sx, sy)


def phase_and_cutoff(lattice: VortexLattice, epsilon: float, point):
    """Phase ``g`` and cutoff ``chi`` at one point or an ``(m, 2)`` array of points."""
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    g = lattice_phase(lattice, pts[:, 0], pts[:, 1])
    if lattice.count == 0:
        chi = np.ones(pts.shape[0])
    else:
        dist, _ = cKDTree(lattice.points).query(pts)
        chi = np.minimum(1.0, dist / epsilon**lattice.eta)
        # the phase is undefined on a site; the cutoff vanishes there anyway
        g = np.where(dist == 0.0, 1.0 + 0j, g)
    if np.ndim(point) == 1:
        return complex(g[0]), float(chi[0])
    return g, chi


def winding_number(values) -> float:
    """Winding of a closed sampled contour (last point joins the first)."""
    v = np.asarray(values, dtype=np.complex128)
    steps = np.angle(np.roll(v, -1) / v)
    return float(np.sum(steps) / (2 * math.pi))


def circle_winding(func, center=(0.0, 0.0), radius: float = 1.0, samples: int = 4096) -> float:
    """Winding number of ``func(x, y)`` around a circle."""
    th = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    x = center[0] + radius * np.cos(th)
    y = center[1] + radius * np.sin(th)
    return winding_number(func(x, y))


def grid_winding(field, i0: int, i1: int, j0: int, j1: int) -> float:
    """Winding of a grid field around the rectangle of cells ``[i0, i1] x [j0, j1]``."""
    f = np.asarray(field)
    path = np.concatenate(
        [
            f[j0, i0:i1],
            f[j0:j1, i1],
            f[j1, i1:i0:-1],
            f[j1:j0:-1, i0],
        ]
    )
    return winding_number(path)


# ---------------------------------------------------------------------------
# assembled trial state


@dataclass
class TrialState:
    state: GPState
    c_eps: float  # continuum normalization, c_eps^2 = 1/(1 - sum rho_eps pi a^2/2)
    grid_factor: float  # extra factor that makes the sampled state exactly unit norm
    lattice: VortexLattice
    smoothing: float
    density: RegularizedDensity | None = None

    def provenance(self) -> dict:
        return {
            "delta": self.lattice.delta if self.lattice.count else None,
            "eta": self.lattice.eta,
            "N_eps": self.lattice.count,
            "c_eps": self.c_eps,
            "grid_factor": self.grid_factor,
            "smoothing": self.smoothing,
        }


def _grid_cutoff(lattice: VortexLattice, grid: Grid) -> np.ndarray:
    chi = np.ones((grid.n, grid.n))
    if lattice.count == 0:
        return chi
    a = lattice.cutoff_radius
    h = grid.spacing
    X, Y = grid.mesh
    if a >= h:
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        dist, _ = cKDTree(lattice.points).query(pts)
        return np.minimum(1.0, dist / a).reshape(grid.n, grid.n)
    # cutoff disk below grid resolution: zero the cell holding each site
    i = np.floor((lattice.points[:, 0] + grid.box_radius) / h).astype(int)
    j = np.floor((lattice.points[:, 1] + grid.box_radius) / h).astype(int)
    inside = (i >= 0) & (i < grid.n) & (j >= 0) & (j < grid.n)
    chi[j[inside], i[inside]] = 0.0
    return chi


def assemble_trial(
    tf: TFSolution,
    epsilon: float,
    omega0: float,
    grid: Grid,
    delta: float | None = None,
    eta: float = DEFAULT_ETA,
    density: RegularizedDensity | None = None,
) -> TrialState:
    """``c_eps sqrt(rho_eps) chi g`` sampled on ``grid`` and normalized."""
    grid.require_covers(tf)
    if density is None:
        density = regularized_tf_density(tf, epsilon)
    if omega0 > 0:
        lattice = build_vortex_lattice(omega0, epsilon, tf.r_out, delta=delta, eta=eta)
    else:
        lattice = empty_lattice(epsilon, eta)
    amp = np.sqrt(density(grid.radius))
    X, Y = grid.mesh
    g = lattice_phase(lattice, X, Y).reshape(grid.n, grid.n)
    chi = _grid_cutoff(lattice, grid)
    if lattice.count:
        site_r = np.hypot(lattice.points[:, 0], lattice.points[:, 1])
        removed = float(np.sum(density(site_r))) * math.pi * lattice.cutoff_radius**2 / 2
    else:
        removed = 0.0
    c_eps = 1.0 / math.sqrt(1.0 - removed)
    fld = c_eps * amp * chi * g
    norm = math.sqrt(grid.cell_area * float(np.sum(np.abs(fld) ** 2)))
    state = GPState(grid, fld / norm, epsilon, omega0 / epsilon)
    return TrialState(state, c_eps, 1.0 / norm, lattice, epsilon, density)


def trial_energy_upper_bound(
    tf: TFSolution,
    epsilon: float,
    omega0: float,
    grid: Grid,
    potential=None,
    trial: TrialState | None = None,
    **kwargs,
) -> EnergyBreakdown:
    """Discrete GP energy of the assembled trial (an upper bound on the grid minimum)."""
    if trial is None:
        trial = assemble_trial(tf, epsilon, omega0, grid, **kwargs)
    potential = potential or TrapPotential.homogeneous(tf.s)
    return gp_energy(trial.state, potential)


# ---------------------------------------------------------------------------
# giant vortex


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 0.5
    out[inside] = np.exp(-1.0 / (1.0 - 4.0 * u[inside] ** 2))
    return out


@lru_cache(maxsize=1)
def _bump_norm() -> float:
    val, _ = integrate.quad(lambda u: float(_bump(u)), -0.5, 0.5, epsabs=0.0, epsrel=1e-12)
    return math.pi * val


def mollifier(u):
    """Smooth bump supported in ``[-1/2, 1/2]`` with ``pi * int j = 1``."""
    return _bump(u) / _bump_norm()


def _sqrt_mollifier_derivative(u):
    # d/du sqrt(j) = sqrt(j) * (-4u / (1 - 4u^2)^2)
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 0.5
    ui = u[inside]
    out[inside] = np.sqrt(mollifier(ui)) * (-4.0 * ui / (1.0 - 4.0 * ui**2) ** 2)
    return out


def giant_vortex_density(x, xi: float):
    """``xi^-1 j((1 - x^2)/xi)``: unit mass in the plane, supported near ``|x| = 1``."""
    x = np.asarray(x, dtype=float)
    return mollifier((1.0 - x * x) / xi) / xi


def optimal_xi(epsilon: float, alpha: float, s: float) -> float:
    """Width balancing the gradient and trap remainders for large ``alpha``."""
    return math.sqrt(epsilon) * epsilon ** (alpha * (s + 2) / (2 * (s - 2)))


def balanced_xi(omega0: float, s: float) -> float:
    """Width balancing ``xi^2`` against ``omega0^(-2(s+2)/(s-2)) / xi``."""
    return omega0 ** (-2 * (s + 2) / (3 * (s - 2)))


@dataclass(frozen=True)
class GiantVortexParams:
    epsilon: float
    omega1: float
    alpha: float
    s: float

    @property
    def omega(self) -> float:
        return self.omega1 / self.epsilon ** (1 + self.alpha)

    @property
    def omega0(self) -> float:
        return self.omega1 / self.epsilon**self.alpha

    @property
    def r_m(self) -> float:
        return radius_of_maximum(self.s, self.omega0)

    @property
    def gauge(self) -> float:
        """``omega R_m^2 / 2``, the rescaled vector-potential strength."""
        return 0.5 * self.omega * self.r_m**2

    @property
    def winding(self) -> int:
        return int(math.floor(self.gauge))


@dataclass
class GiantVortexTrial:
    params: GiantVortexParams
    xi: float
    scaled_grid: Grid
    scaled_field: np.ndarray  # on the x grid, unit mass
    state: GPState  # same state on the physical grid
    grid_factor: float

    @property
    def winding(self) -> int:
        return self.params.winding

    def scaled_energy(self, potential=None) -> float:
        """``eps^2 R_m^-s E[Psi]``, the energy of the rescaled functional."""
        p = self.params
        potential = potential or TrapPotential.homogeneous(p.s)
        return p.epsilon**2 * p.r_m ** (-p.s) * gp_energy(self.state, potential).total


def giant_vortex_trial(xi: float, epsilon: float, omega1: float, alpha: float, s: float, grid: Grid) -> GiantVortexTrial:
    """``sqrt(rho_xi(x)) exp(i [omega R_m^2/2] theta)`` on the ``R_m``-rescaled ``grid``."""
    if not (0 < xi < 1):
        raise InvalidParameterError(f"xi must lie in (0, 1), got {xi!r}")
    if not (epsilon > 0 and omega1 > 0 and alpha > 0):
        raise InvalidParameterError("epsilon, omega1 and alpha must be positive")
    params = GiantVortexParams(float(epsilon), float(omega1), float(alpha), float(s))
    X, Y = grid.mesh
    theta = np.arctan2(Y, X)
    amp = np.sqrt(giant_vortex_density(grid.radius, xi))
    fld = amp * np.exp(1j * params.winding * theta)
    norm = math.sqrt(grid.cell_area * float(np.sum(np.abs(fld) ** 2)))
    if norm == 0:
        raise InvalidParameterError("annulus not resolved by the grid")
    fld = fld / norm
    r_m = params.r_m
    phys_grid = Grid(grid.n, grid.box_radius * r_m)
    state = GPState(phys_grid, fld / r_m, params.epsilon, params.omega)
    return GiantVortexTrial(params, float(xi), grid, fld, state, 1.0 / norm)


@dataclass(frozen=True)
class GiantVortexComponents:
    """Pieces of the rescaled energy of the giant-vortex trial (1D quadrature)."""

    density_gradient: float  # int |grad sqrt(rho_xi)|^2
    phase_kinetic: float  # int (n/x - a x)^2 rho_xi
    trap: float  # int (x^s - s x^2/2) rho_xi
    interaction: float  # R_m^-(s+2) int rho_xi^2
    kinetic_prefactor: float  # eps^2 R_m^-(s+2)

    @property
    def total(self) -> float:
        return self.kinetic_prefactor * (self.density_gradient + self.phase_kinetic) + self.trap + self.interaction


def giant_vortex_components(xi: float, epsilon: float, omega1: float, alpha: float, s: float, n: int = 200) -> GiantVortexComponents:
    if not (0 < xi < 1):
        raise InvalidParameterError(f"xi must lie in (0, 1), got {xi!r}")
    p = GiantVortexParams(float(epsilon), float(omega1), float(alpha), float(s))
    lo, hi = math.sqrt(1 - xi / 2), math.sqrt(1 + xi / 2)
    x, w = map_nodes(lo, hi, *gauss_legendre(n))
    rho = giant_vortex_density(x, xi)
    jac = 2 * math.pi * x * w
    u = (1 - x * x) / xi
    # d/dx sqrt(rho) = xi^-1/2 * sqrt(j)'(u) * (-2x/xi)
    dsqrt = xi**-0.5 * _sqrt_mollifier_derivative(u) * (-2 * x / xi)
    a = p.gauge
    k = p.r_m ** (-(s + 2))
    return GiantVortexComponents(
        density_gradient=float(np.sum(jac * dsqrt**2)),
        phase_kinetic=float(np.sum(jac * (p.winding / x - a * x) ** 2 * rho)),
        trap=float(np.sum(jac * (x**s - 0.5 * s * x * x) * rho)),
        interaction=float(k * np.sum(jac * rho * rho)),
        kinetic_prefactor=epsilon**2 * k,
    )
