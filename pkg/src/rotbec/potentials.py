"""Radial trap potentials and the length/energy rescalings of the GP functional.

A potential is a finite sum ``V(r) = sum_j a_j r**p_j`` with an asymptotic
exponent ``s``.  The homogeneous trap is the single term ``r**s``; a general
potential additionally carries the constants ``(kappa, c)`` of the bound

    |lam**-s V(lam r) - r**s| <= c lam**-kappa (1 + r**s),   lam >= 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInputError, InvalidParameterError

HOMOGENEOUS = "homogeneous"
GENERAL = "general"

# radii used to check V >= 0 at construction
_POSITIVITY_RADII = np.concatenate([[0.0], np.logspace(-3, 3, 200)])


@dataclass(frozen=True)
class TrapPotential:
    kind: str
    s: float
    terms: tuple[tuple[float, float], ...]
    kappa: float | None = None
    c: float | None = None
    function: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in (HOMOGENEOUS, GENERAL):
            raise InvalidInputError(f"unknown potential kind {self.kind!r}")
        if not (self.s > 2) or not math.isfinite(self.s):
            raise InvalidParameterError(f"asymptotic exponent must satisfy s > 2, got {self.s!r}")
        object.__setattr__(self, "terms", tuple((float(a), float(p)) for a, p in self.terms))
        if self.function is None and not self.terms:
            raise InvalidInputError("potential needs terms or a function")
        if any(p < 0 for _, p in self.terms):
            raise InvalidInputError("negative powers make V singular at r = 0")
        if self.kind == GENERAL:
            if self.kappa is None or self.c is None or not (self.kappa > 0 and self.c > 0):
                raise InvalidInputError("general potential needs kappa > 0 and c > 0")
        vals = self(_POSITIVITY_RADII)
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise InvalidInputError("potential must be finite and non-negative for r >= 0")

    @classmethod
    def homogeneous(cls, s: float) -> "TrapPotential":
        return cls(HOMOGENEOUS, float(s), ((1.0, float(s)),))

    @classmethod
    def polynomial(cls, terms, s: float, kappa: float, c: float) -> "TrapPotential":
        return cls(
            GENERAL,
            float(s),
            tuple(terms),
            None if kappa is None else float(kappa),
            None if c is None else float(c),
        )

    @property
    def is_homogeneous(self) -> bool:
        return self.kind == HOMOGENEOUS

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.function is not None:
            return np.asarray(self.function(r), dtype=float)
        out = np.zeros_like(r)
        for a, p in self.terms:
            out = out + a * (r**p if p != 0 else 1.0)
        return out

    evaluate = __call__

    def to_dict(self) -> dict:
        if self.function is not None:
            raise InvalidInputError("callable potentials have no JSON form")
        return {
            "kind": self.kind,
            "s": self.s,
            "kappa": self.kappa,
            "c": self.c,
            "terms": [list(t) for t in self.terms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrapPotential":
        try:
            kind = d["kind"]
            s = float(d["s"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed potential spec: {exc}") from None
        if kind == HOMOGENEOUS and not d.get("terms"):
            return cls.homogeneous(s)
        terms = d.get("terms")
        if not isinstance(terms, (list, tuple)) or not all(
            isinstance(t, (list, tuple)) and len(t) == 2 for t in terms
        ):
            raise InvalidInputError("terms must be a list of [coefficient, exponent] pairs")
        kappa = d.get("kappa")
        c = d.get("c")
        return cls(
            kind,
            s,
            tuple((float(a), float(p)) for a, p in terms),
            None if kappa is None else float(kappa),
            None if c is None else float(c),
        )

    @classmethod
    def from_json(cls, text: str) -> "TrapPotential":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"potential spec is not valid JSON: {exc}") from None


@dataclass(frozen=True)
class HomogeneityReport:
    holds: bool
    worst_ratio: float
    worst_lambda: float | None = None
    worst_r: float | None = None
    vacuous: bool = False

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "worst_ratio": self.worst_ratio,
            "worst_lambda": self.worst_lambda,
            "worst_r": self.worst_r,
            "vacuous": self.vacuous,
        }


def default_lambdas() -> np.ndarray:
    return 2.0 ** np.arange(11)


def default_radii() -> np.ndarray:
    return np.logspace(-3, 3, 200)


def asym_homogeneity_check(V: TrapPotential, lambdas=None, radii=None, strict: bool = False) -> HomogeneityReport:
    """Evaluate the asymptotic-homogeneity bound on a (lambda, r) sample grid.

    For a homogeneous trap the bound is vacuous: the report says so with
    ``worst_ratio = 0``, or raises when ``strict`` is set.
    """
    lam = default_lambdas() if lambdas is None else np.asarray(lambdas, dtype=float)
    r = default_radii() if radii is None else np.asarray(radii, dtype=float)
    if lam.size == 0 or r.size == 0:
        raise InvalidInputError("empty sample grid")
    if np.any(lam < 1) or np.any(~np.isfinite(lam)):
        raise InvalidInputError("all sampled lambda must be >= 1")
    if np.any(r < 0) or np.any(~np.isfinite(r)):
        raise InvalidInputError("all sampled radii must be >= 0")
    if V.is_homogeneous:
        if strict:
            raise InvalidInputError("homogeneity check is vacuous for a homogeneous trap")
        return HomogeneityReport(True, 0.0, vacuous=True)

    s = V.s
    L, R = np.meshgrid(lam, r, indexing="ij")
    deviation = np.abs(L ** (-s) * V(L * R) - R**s)
    bound = V.c * L ** (-V.kappa) * (1.0 + R**s)
    ratio = deviation / bound
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    worst = float(ratio[i, j])
    return HomogeneityReport(bool(np.all(ratio <= 1.0)), worst, float(lam[i]), float(r[j]))


# ---------------------------------------------------------------------------
# scalings


@dataclass(frozen=True)
class LengthScaling:
    """``r = k r'``, ``Psi(r) = Psi'(r')/k``, energies scale by ``energy_factor``."""

    epsilon: float
    s: float
    k: float
    energy_factor: float

    def rotation_to_original(self, omega: float) -> float:
        """Angular velocity of the unscaled functional for scaled ``omega``."""
        return self.energy_factor * omega

    def rotation_to_scaled(self, big_omega: float) -> float:
        return big_omega / self.energy_factor

    def energy_to_original(self, energy: float) -> float:
        return self.energy_factor * energy

    def state_to_original(self, values, box_radius: float):
        """Grid samples and box half-width of the unscaled ground state."""
        return np.asarray(values) / self.k, box_radius * self.k

    def state_to_scaled(self, values, box_radius: float):
        return np.asarray(values) * self.k, box_radius / self.k


def rescale_lengths(epsilon: float, s: float) -> LengthScaling:
    """Length factor ``k = eps**(-2/(s+2))`` and energy factor ``eps**(4/(s+2))``."""
    if not (0 < epsilon <= 1):
        raise InvalidParameterError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    if not (s > 2) or not math.isfinite(s):
        raise InvalidParameterError(f"s must satisfy s > 2, got {s!r}")
    k = epsilon ** (-2.0 / (s + 2))
    return LengthScaling(float(epsilon), float(s), k, epsilon ** (4.0 / (s + 2)))


def scaling_parameter(epsilon: float, s: float, scaling: str = "coupling") -> float:
    """Dilation ``lam`` used to pull a general potential back to the scaled frame.

    ``"coupling"``: ``eps**(-2/(s-2))``, the convention written next to the
    rescaled general functional.  ``"length"``: ``eps**(-2/(s+2))``, the same
    factor as :func:`rescale_lengths`.  Both are exposed because the two
    conventions disagree in the source and neither can be ruled out.
    """
    if scaling == "coupling":
        return epsilon ** (-2.0 / (s - 2))
    if scaling == "length":
        return epsilon ** (-2.0 / (s + 2))
    raise InvalidInputError(f"unknown scaling convention {scaling!r}")


def rescaled_general_potential(V: TrapPotential, epsilon: float, scaling: str = "coupling") -> Callable:
    """Return ``r -> lam**-s V(lam r)``; the identity on ``r**s`` for homogeneous traps."""
    if not (0 < epsilon <= 1):
        raise InvalidParameterError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    s = V.s
    if V.is_homogeneous:
        return lambda r: np.asarray(r, dtype=float) ** s
    lam = scaling_parameter(epsilon, s, scaling)
    if V.function is None:
        # fold lam into the coefficients: exact and cheap
        terms = [(a * lam ** (p - s), p) for a, p in V.terms]

        def rescaled(r):
            r = np.asarray(r, dtype=float)
            out = np.zeros_like(r)
            for a, p in terms:
                out = out + a * (r**p if p != 0 else 1.0)
            return out

    else:

        def rescaled(r):
            return lam ** (-s) * V(lam * np.asarray(r, dtype=float))

    rescaled.lam = lam
    return rescaled
