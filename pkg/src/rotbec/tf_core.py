"""Thomas-Fermi ground state of the rotating functional at fixed omega0.

With ``t = omega0**2 / 4`` and ``z = r**2`` the minimizer is
``rho(r) = f(z)_+ / 2`` where ``f(z) = mu - z**(s/2) + t*z`` is strictly concave
for ``z > 0``.  All radial integrals over the support reduce to polynomial
antiderivatives in ``z``; the only unknown is ``mu``, fixed by unit mass.

For very fast rotation the unscaled parametrization loses digits (``mu`` and
the energy grow like ``R_m**s`` while the interesting structure is of relative
size ``delta**2``), so :func:`scaled_tf` solves the same problem directly in the
units of the density-maximum radius ``R_m``.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import InvalidInputError, InvalidParameterError
from .quadrature import gauss_legendre, map_nodes

_XTOL = 1e-15
_RTOL = 4 * np.finfo(float).eps


def _check_exponent(s: float) -> None:
    if not (s > 2) or not math.isfinite(s):
        raise InvalidParameterError(f"trap exponent must satisfy 2 < s < inf, got s={s!r}")


def _check_velocity(omega0: float) -> None:
    if not (omega0 >= 0) or not math.isfinite(omega0):
        raise InvalidParameterError(f"omega0 must be finite and >= 0, got {omega0!r}")


@dataclass(frozen=True)
class TFSolution:
    s: float
    omega0: float
    mu: float
    r_in: float
    r_out: float
    energy: float

    @property
    def has_hole(self) -> bool:
        return self.r_in > 0.0

    @property
    def r_m(self) -> float:
        """Radius where the density is maximal (0 without rotation)."""
        return radius_of_maximum(self.s, self.omega0)

    def density(self, r):
        return tf_density(self, r)

    def density_norm_sq(self) -> float:
        """``||rho||_2**2`` from the closed-form antiderivative (disk) or the scaled moments (annulus)."""
        if self.has_hole:
            r_m = self.r_m
            level = self.mu / r_m**self.s + 0.5 * self.s - 1.0
            m2 = _scaled_moments(level, self.s)[1]
            return 0.5 * math.pi * r_m ** (2 * self.s + 2) * m2
        t = 0.25 * self.omega0**2
        return _norm_sq(self.mu, self.s, t, 0.0, self.r_out**2)

    def energy_identity(self) -> float:
        """Energy from ``mu - ||rho||_2**2`` (second route to ``energy``)."""
        return self.mu - self.density_norm_sq()

    def energy_by_quadrature(self) -> float:
        """Energy by adaptive Gauss-Kronrod in the radial variable."""
        t = 0.25 * self.omega0**2

        def integrand(r):
            rho = float(tf_density(self, r))
            return 2 * math.pi * r * rho * (r**self.s - t * r * r + rho)

        val, _ = integrate.quad(integrand, self.r_in, self.r_out, epsabs=1e-13, epsrel=1e-13, limit=200)
        return val

    def mass_by_quadrature(self) -> float:
        val, _ = integrate.quad(
            lambda r: 2 * math.pi * r * float(tf_density(self, r)),
            self.r_in,
            self.r_out,
            epsabs=1e-13,
            epsrel=1e-13,
            limit=200,
        )
        return val

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "TFSolution":
        return cls(**{k: float(d[k]) for k in ("s", "omega0", "mu", "r_in", "r_out", "energy")})


@dataclass(frozen=True)
class ScaledTFSolution:
    """TF minimizer in units of ``R_m``.

    ``energy_excess`` is ``energy_tilde - (1 - s/2)`` computed without
    cancellation; it is the quantity whose decay rate is of interest.
    """

    s: float
    omega0: float
    x_in: float
    x_out: float
    mu_tilde: float
    energy_tilde: float
    energy_excess: float
    r_m: float
    level: float  # common value h(x_in) = h(x_out) = mu_tilde + s/2 - 1

    def half_width(self) -> float:
        return 0.5 * (self.x_out - self.x_in)

    def density(self, x):
        """Scaled density ``R_m**2 * rho(R_m * x)``."""
        x = np.asarray(x, dtype=float)
        k = self.r_m ** (self.s + 2)
        phi = self.level - h_function(x, self.s)
        return 0.5 * k * np.where((x >= self.x_in) & (x <= self.x_out), np.maximum(phi, 0.0), 0.0)


# ---------------------------------------------------------------------------
# closed forms


def critical_velocity(s: float) -> tuple[float, float]:
    """Rotation at which a hole appears, and the outer radius at that point."""
    _check_exponent(s)
    omega_c = 2.0 * (4.0 * (s + 2) / (math.pi * (s - 2))) ** ((s - 2) / (2 * (s + 2)))
    r_out_c = (0.5 * omega_c) ** (2.0 / (s - 2))
    return omega_c, r_out_c


def radius_of_maximum(s: float, omega0: float) -> float:
    _check_exponent(s)
    return (omega0**2 / (2 * s)) ** (1.0 / (s - 2))


def hole_width_asymptote(s: float, omega0: float) -> float:
    """Leading-order deviation of ``x_in``/``x_out`` from 1 for fast rotation."""
    _check_exponent(s)
    return (3.0 / (s * (s - 2))) ** (1.0 / 3.0) * (omega0**2 / (2 * s)) ** (-(s + 2) / (3 * (s - 2)))


def hole_width_leading_order(s: float, omega0: float) -> float:
    """Half-width of the scaled support from expanding the normalization condition.

    Quadratic ``h`` near 1 gives ``(2/3) s (s-2) w**3 = 1 / (pi K)`` with
    ``K = (omega0**2/(2s))**((s+2)/(s-2))``; this differs from
    :func:`hole_width_asymptote` by the factor ``(2 pi)**(-1/3)``.
    """
    _check_exponent(s)
    return (3.0 / (2 * math.pi * s * (s - 2))) ** (1.0 / 3.0) * (omega0**2 / (2 * s)) ** (-(s + 2) / (3 * (s - 2)))


def support_area(sol: TFSolution) -> float:
    return math.pi * (sol.r_out**2 - sol.r_in**2)


def nonrotating_radius(s: float) -> float:
    """Outer radius at ``omega0 = 0``: ``pi (mu R^2/2 - R^(s+2)/(s+2)) = 1`` with ``mu = R^s``."""
    _check_exponent(s)
    return (2 * (s + 2) / (math.pi * s)) ** (1.0 / (s + 2))


# antiderivatives in z = r^2; p = s/2

def _mass(mu, s, t, z_in, z_out):
    p = 0.5 * s

    def F(z):
        return mu * z - z ** (p + 1) / (p + 1) + 0.5 * t * z * z

    return 0.5 * math.pi * (F(z_out) - F(z_in))


def _norm_sq(mu, s, t, z_in, z_out):
    p = 0.5 * s

    def G(z):
        return (
            mu * mu * z
            + z ** (2 * p + 1) / (2 * p + 1)
            + t * t * z**3 / 3
            - 2 * mu * z ** (p + 1) / (p + 1)
            + mu * t * z * z
            - 2 * t * z ** (p + 2) / (p + 2)
        )

    return 0.25 * math.pi * (G(z_out) - G(z_in))


def _energy(mu, s, t, z_in, z_out):
    # rho (W + rho) = (mu^2 - W^2) / 4 on the support, W = z^p - t z
    p = 0.5 * s

    def H(z):
        return (
            mu * mu * z
            - z ** (2 * p + 1) / (2 * p + 1)
            + 2 * t * z ** (p + 2) / (p + 2)
            - t * t * z**3 / 3
        )

    return 0.25 * math.pi * (H(z_out) - H(z_in))


# ---------------------------------------------------------------------------
# general-s solver


def _f(z, mu, s, t):
    return mu - z ** (0.5 * s) + t * z


def _support(mu: float, s: float, t: float) -> tuple[float, float]:
    """Roots ``(z_in, z_out)`` of ``f``; ``z_in = 0`` when ``f(0) >= 0``."""
    z_m = (2 * t / s) ** (2.0 / (s - 2)) if t > 0 else 0.0
    f_m = _f(z_m, mu, s, t)
    if f_m <= 0.0:
        return z_m, z_m
    hi = max(2 * z_m, 1.0)
    while _f(hi, mu, s, t) > 0:
        hi *= 2
    z_out = optimize.brentq(_f, z_m, hi, args=(mu, s, t), xtol=_XTOL, rtol=_RTOL, maxiter=500)
    if mu >= 0.0:
        return 0.0, z_out
    z_in = optimize.brentq(_f, 0.0, z_m, args=(mu, s, t), xtol=1e-300, rtol=_RTOL, maxiter=500)
    return z_in, z_out


def _mass_of_mu(mu, s, t):
    z_in, z_out = _support(mu, s, t)
    return _mass(mu, s, t, z_in, z_out)


def solve_tf(s: float, omega0: float) -> TFSolution:
    """Unit-mass TF minimizer for ``V = r**s`` at scaled rotation ``omega0``.

    Below (and at) the critical velocity the support is a disk and ``mu >= 0``;
    above it ``mu < 0`` and the support is an annulus.  On the disk branch
    ``mu`` is found by Brent's method on the monotone mass function; on the
    annulus branch the same is done for the level ``c`` of the scaled problem,
    which avoids the cancellation in the unscaled antiderivatives.
    """
    _check_exponent(s)
    _check_velocity(omega0)
    t = 0.25 * omega0**2
    omega_c, _ = critical_velocity(s)

    def residual(mu):
        return _mass_of_mu(mu, s, t) - 1.0

    if omega0 > omega_c:
        # annulus: work in R_m units, where mu = R_m^s (c - s/2 + 1)
        r_m = radius_of_maximum(s, omega0)
        k = r_m ** (s + 2)
        level = _solve_level(s, k)
        _, _, md, y_in, y_out = _scaled_moments(level, s)
        scale = r_m**s
        return TFSolution(
            s=float(s),
            omega0=float(omega0),
            mu=scale * (level - (0.5 * s - 1.0)),
            r_in=r_m * (1.0 + y_in),
            r_out=r_m * (1.0 + y_out),
            energy=scale * ((1.0 - 0.5 * s) + math.pi * k * md),
        )

    if residual(0.0) >= 0.0:
        mu = 0.0  # exactly critical (up to rounding)
    else:
        hi = 1.0
        while residual(hi) < 0:
            hi *= 2
        mu = optimize.brentq(residual, 0.0, hi, xtol=_XTOL, rtol=_RTOL, maxiter=500)
    _, z_out = _support(mu, s, t)
    energy = _energy(mu, s, t, 0.0, z_out)
    return TFSolution(s=float(s), omega0=float(omega0), mu=float(mu), r_in=0.0, r_out=math.sqrt(z_out), energy=float(energy))


def tf_density(sol: TFSolution, r):
    """``rho_TF(r) = [mu - r^s + omega0^2 r^2 / 4]_+ / 2``, zero off the support."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise InvalidParameterError("radius must be non-negative")
    t = 0.25 * sol.omega0**2
    val = 0.5 * (sol.mu - r**sol.s + t * r * r)
    inside = (r >= sol.r_in) & (r <= sol.r_out)
    return np.where(inside, np.maximum(val, 0.0), 0.0)


def quartic_closed_form(omega0: float) -> TFSolution:
    """Explicit ``s = 4`` solution (cubic equations for the squared radii)."""
    _check_velocity(omega0)
    omega_c, _ = critical_velocity(4.0)
    c3 = (12.0 / math.pi) ** (1.0 / 3.0)
    if omega0 <= omega_c:
        w6 = math.pi * omega0**6
        q = 6144.0 + w6 + 64.0 * math.sqrt(3.0) * math.sqrt(3072.0 + w6)
        a = (q / math.pi) ** (1.0 / 3.0)
        b = omega0**4 * (math.pi / q) ** (1.0 / 3.0)
        mu = (0.5 * a + 0.5 * b - 0.5 * omega0**2) ** 2 / 64.0 - omega0**4 / 64.0
        r_out = 0.25 * math.sqrt(a + b + omega0**2)
        r_in = 0.0
    else:
        mu = 0.25 * c3**2 - omega0**4 / 64.0
        r_in = math.sqrt(omega0**2 / 8.0 - 0.5 * c3)
        r_out = math.sqrt(omega0**2 / 8.0 + 0.5 * c3)
    t = 0.25 * omega0**2
    energy = _energy(mu, 4.0, t, r_in**2, r_out**2)
    return TFSolution(s=4.0, omega0=float(omega0), mu=mu, r_in=r_in, r_out=r_out, energy=energy)


def dmu_dt(sol: TFSolution) -> float:
    """Analytic derivative of ``mu`` with respect to ``t = omega0**2 / 4``."""
    return -0.5 * (sol.r_out**2 + sol.r_in**2)


# ---------------------------------------------------------------------------
# scaled (R_m units) solver


@lru_cache(maxsize=64)
def _binomial_series(s: float, terms: int = 24) -> np.ndarray:
    c = np.zeros(terms + 1)
    c[0] = 1.0
    for k in range(1, terms + 1):
        c[k] = c[k - 1] * (s - k + 1) / k
    c.setflags(write=False)
    return c


def h_function(x, s: float):
    """``h(x) = x^s - (s/2) x^2 + s/2 - 1``, evaluated stably near ``x = 1``."""
    x = np.asarray(x, dtype=float)
    return _h_shift(x - 1.0, s)


def _h_shift(y, s):
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    small = np.abs(y) < 0.05
    if np.any(small):
        ys = y[small]
        coef = _binomial_series(s)
        acc = np.zeros_like(ys)
        for k in range(len(coef) - 1, 1, -1):
            acc = (acc + coef[k]) * ys
        # acc = sum_{k>=2} C(s,k) y^(k-1); multiply once more for y^k
        out[small] = acc * ys - 0.5 * s * ys * ys
    if np.any(~small):
        yl = y[~small]
        x = 1.0 + yl
        out[~small] = x**s - 0.5 * s * x * x + 0.5 * s - 1.0
    return out


def _h_shift_scalar(y: float, s: float) -> float:
    """Scalar twin of :func:`_h_shift` for the root finders."""
    if abs(y) < 0.05:
        acc = 0.0
        for c in _binomial_series(s).tolist()[:1:-1]:
            acc = (acc + c) * y
        return acc * y - 0.5 * s * y * y
    x = 1.0 + y
    return x**s - 0.5 * s * x * x + 0.5 * s - 1.0


def _scaled_support(level: float, s: float) -> tuple[float, float]:
    """Offsets ``(y_in, y_out)`` from 1 where ``h`` reaches ``level``."""

    def g(y):
        return _h_shift_scalar(y, s) - level

    hi = 1e-3
    while g(hi) < 0:
        hi *= 2
    y_out = optimize.brentq(g, 0.0, hi, xtol=1e-300, rtol=_RTOL, maxiter=500)
    if level >= 0.5 * s - 1.0:
        return -1.0, y_out
    lo = -1e-3
    while lo > -1.0 and g(lo) < 0:
        lo = max(2 * lo, -1.0)
    y_in = optimize.brentq(g, lo, 0.0, xtol=1e-300, rtol=_RTOL, maxiter=500)
    return y_in, y_out


def _h_terms(s):
    # h(x) = sum coef * x**e
    return ((1.0, s), (-0.5 * s, 2.0), (0.5 * s - 1.0, 0.0))


def _power_moment(terms, a, b):
    """``int_a^b sum coef * x**e * x dx`` for a list of ``(coef, e)``."""
    return sum(c * (b ** (e + 2) - a ** (e + 2)) / (e + 2) for c, e in terms)


def _scaled_moments(level, s, n=64):
    """Moments over the scaled support ``{h < level}``.

    Returns ``(m1, m2, m_direct, y_in, y_out)`` with ``m1 = int (c-h) x dx``,
    ``m2 = int (c-h)^2 x dx`` and ``m_direct = int (c^2 - h^2) x dx / 2``.
    Wide supports use exact antiderivatives; thin annuli, where those cancel,
    use Gauss-Legendre on the series form of ``h``.
    """
    y_in, y_out = _scaled_support(level, s)
    if y_in < -0.5:
        a, b = max(1.0 + y_in, 0.0), 1.0 + y_out
        h = _h_terms(s)
        hh = [(ci * cj, ei + ej) for ci, ei in h for cj, ej in h]
        i0 = 0.5 * (b * b - a * a)
        i1 = _power_moment(h, a, b)
        i2 = _power_moment(hh, a, b)
        m1 = level * i0 - i1
        m2 = level * level * i0 - 2 * level * i1 + i2
        md = 0.5 * (level * level * i0 - i2)
        return m1, m2, md, y_in, y_out
    nodes, weights = gauss_legendre(n)
    y, w = map_nodes(y_in, y_out, nodes, weights)
    hv = _h_shift(y, s)
    phi = np.maximum(level - hv, 0.0)
    x = 1.0 + y
    m1 = float(np.sum(w * phi * x))
    m2 = float(np.sum(w * phi * phi * x))
    md = float(np.sum(w * 0.5 * phi * (level + hv) * x))
    return m1, m2, md, y_in, y_out


def _solve_level(s: float, k: float) -> float:
    """Level ``c`` with ``pi k int (c-h)_+ x dx = 1``."""
    target = 1.0 / (math.pi * k)

    def resid(level):
        return _scaled_moments(level, s)[0] / target - 1.0

    hi = min(0.5 * s - 1.0, 1.0)
    while resid(hi) < 0:
        hi *= 2
    lo = hi
    while resid(lo) > 0:
        lo *= 0.5
    return optimize.brentq(resid, lo, hi, xtol=1e-300, rtol=_RTOL, maxiter=500)


def scaled_tf(s: float, omega0: float) -> ScaledTFSolution:
    """TF minimizer rescaled by ``R_m``; robust for arbitrarily large ``omega0``."""
    _check_exponent(s)
    _check_velocity(omega0)
    if omega0 == 0:
        raise InvalidParameterError("scaled TF problem needs omega0 > 0")
    r_m = radius_of_maximum(s, omega0)
    k = r_m ** (s + 2)
    level = _solve_level(s, k)
    _, m2, _, y_in, y_out = _scaled_moments(level, s)
    excess = level - 0.5 * math.pi * k * m2
    return ScaledTFSolution(
        s=float(s),
        omega0=float(omega0),
        x_in=max(0.0, 1.0 + y_in),
        x_out=1.0 + y_out,
        mu_tilde=level - (0.5 * s - 1.0),
        energy_tilde=(1.0 - 0.5 * s) + excess,
        energy_excess=excess,
        r_m=r_m,
        level=level,
    )


def scaled_second_moment(sol: ScaledTFSolution, n: int = 64) -> float:
    """``int (x - 1)^2 rho_tilde d^2x`` by Gauss-Legendre over the support."""
    nodes, weights = gauss_legendre(n)
    x, w = map_nodes(sol.x_in, sol.x_out, nodes, weights)
    return float(np.sum(w * 2 * math.pi * x * (x - 1.0) ** 2 * sol.density(x)))


# ---------------------------------------------------------------------------


def tf_functional_eval(r, rho, s: float, omega0: float, mass_tol: float = 1e-6) -> float:
    """TF energy of a sampled radial density by composite Simpson quadrature.

    ``r`` must be increasing and start at 0 (or where ``rho`` vanishes);
    put nodes on the kinks of ``rho`` for high accuracy.
    """
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if r.shape != rho.shape or r.ndim != 1:
        raise InvalidInputError("r and rho must be 1-d arrays of equal length")
    if np.any(rho < 0):
        raise InvalidInputError("density must be non-negative")
    jac = 2 * math.pi * r
    mass = integrate.simpson(jac * rho, x=r)
    if abs(mass - 1.0) > mass_tol:
        raise InvalidInputError(f"density mass {mass!r} deviates from 1 by more than {mass_tol}")
    t = 0.25 * omega0**2
    return float(integrate.simpson(jac * rho * (r**s + rho - t * r * r), x=r))
