"""Two-path state evolution through the second interferometer loop.

The path basis is ``(|p_perp>, |p>)``; a state is stored as the pair of
complex amplitudes in that order.  Elements act as 2x2 complex operators
and the relative phase against the reference beam is taken as the complex
argument of an inner product, never through an arctan formula.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, OrthogonalityError

ORTHO_TOL = 1e-12
SQRT_HALF = math.sqrt(0.5)


def principal(angle: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def check_transmissivity(T: float) -> float:
    T = float(T)
    if not math.isfinite(T) or T < 0.0 or T > 1.0:
        raise DomainError(f"T out of range [0,1]: {T!r}")
    return T


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class PathState:
    """Amplitudes on ``|p_perp>`` (upper path) and ``|p>`` (lower path)."""

    a_perp: complex
    a_p: complex

    def __post_init__(self):
        for name in ("a_perp", "a_p"):
            z = complex(getattr(self, name))
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                raise DomainError(f"non-finite amplitude {name}={z!r}")
            object.__setattr__(self, name, z)

    @classmethod
    def p(cls) -> "PathState":
        return cls(0.0, 1.0)

    @classmethod
    def p_perp(cls) -> "PathState":
        return cls(1.0, 0.0)

    @classmethod
    def q(cls) -> "PathState":
        return cls(SQRT_HALF, SQRT_HALF)

    def as_array(self) -> np.ndarray:
        return np.array([self.a_perp, self.a_p], dtype=complex)

    @classmethod
    def from_array(cls, v) -> "PathState":
        return cls(complex(v[0]), complex(v[1]))

    def norm2(self) -> float:
        return abs(self.a_perp) ** 2 + abs(self.a_p) ** 2

    def scaled(self, factor: complex) -> "PathState":
        return PathState(factor * self.a_perp, factor * self.a_p)


# -- elements -----------------------------------------------------------------

@dataclass(frozen=True)
class SplitToQ:
    """50:50 split of ``|p>`` into ``|q>``.

    Acts as ``sqrt(2) |q><q|`` so that ``|p>`` goes to ``(|p_perp> + |p>)/sqrt(2)``.
    Applying it twice equals applying it once times ``sqrt(2)``.
    """

    def matrix(self) -> np.ndarray:
        return np.full((2, 2), SQRT_HALF, dtype=complex)


@dataclass(frozen=True)
class Attenuate:
    """Absorber of intensity transmissivity ``T`` on the ``|p>`` path."""

    T: float

    def __post_init__(self):
        object.__setattr__(self, "T", check_transmissivity(self.T))

    def matrix(self) -> np.ndarray:
        return np.diag([1.0, math.sqrt(self.T)]).astype(complex)


@dataclass(frozen=True)
class PhaseShift:
    """Phase ``chi1`` on ``|p_perp>`` and ``chi2`` on ``|p>``."""

    chi1: float
    chi2: float

    def __post_init__(self):
        object.__setattr__(self, "chi1", _check_finite("chi1", self.chi1))
        object.__setattr__(self, "chi2", _check_finite("chi2", self.chi2))

    def matrix(self) -> np.ndarray:
        return np.diag([cmath.exp(1j * self.chi1), cmath.exp(1j * self.chi2)])


@dataclass(frozen=True)
class RecombineQ:
    """Interference projector ``|q><q|`` (scaling constant fixed to 1/2)."""

    def matrix(self) -> np.ndarray:
        return np.full((2, 2), 0.5, dtype=complex)


Element = Union[SplitToQ, Attenuate, PhaseShift, RecombineQ]


def apply_element(state: PathState, e: Element) -> PathState:
    a, b = state.a_perp, state.a_p
    if isinstance(e, SplitToQ):
        s = (a + b) * SQRT_HALF
        return PathState(s, s)
    if isinstance(e, Attenuate):
        return PathState(a, math.sqrt(e.T) * b)
    if isinstance(e, PhaseShift):
        return PathState(cmath.exp(1j * e.chi1) * a, cmath.exp(1j * e.chi2) * b)
    if isinstance(e, RecombineQ):
        s = 0.5 * (a + b)
        return PathState(s, s)
    raise TypeError(f"not an interferometer element: {e!r}")


def run_elements(state: PathState, elements) -> PathState:
    for e in elements:
        state = apply_element(state, e)
    return state


def evolve_second_loop(T: float, chi1: float, chi2: float) -> PathState:
    """State behind the second-loop phase shifter for an incident ``|p>``."""
    T = check_transmissivity(T)
    chi1 = _check_finite("chi1", chi1)
    chi2 = _check_finite("chi2", chi2)
    return PathState(SQRT_HALF * cmath.exp(1j * chi1),
                     SQRT_HALF * math.sqrt(T) * cmath.exp(1j * chi2))


def pancharatnam_phase(t: PathState, r: PathState) -> float:
    """Principal value of ``arg <r|t>``."""
    overlap = r.a_perp.conjugate() * t.a_perp + r.a_p.conjugate() * t.a_p
    if abs(overlap) < ORTHO_TOL:
        raise OrthogonalityError("orthogonal states, phase undefined")
    return principal(cmath.phase(overlap))


# -- closed-form decomposition -----------------------------------------------

@dataclass(frozen=True)
class PhaseDecomposition:
    pancharatnam: float
    dynamical: float
    geometric: float
    amplitude: float

    def as_dict(self) -> dict:
        return {"pancharatnam": self.pancharatnam, "dynamical": self.dynamical,
                "geometric": self.geometric, "amplitude": self.amplitude}


def dynamical_phase(T: float, chi1: float, chi2: float) -> float:
    T = check_transmissivity(T)
    return (chi1 + T * chi2) / (1.0 + T)


def phase_decomposition(T: float, chi1: float, chi2: float) -> PhaseDecomposition:
    """Split the fringe shift into dynamical and geometric parts.

    ``geometric`` is the plain difference ``pancharatnam - dynamical``; it is
    therefore only meaningful modulo 2*pi once the shifts leave the principal
    branch.
    """
    T = check_transmissivity(T)
    chi1 = _check_finite("chi1", chi1)
    chi2 = _check_finite("chi2", chi2)
    z = cmath.exp(1j * chi1) + math.sqrt(T) * cmath.exp(1j * chi2)
    amplitude = abs(z) / 2.0
    if amplitude < ORTHO_TOL:
        raise OrthogonalityError("orthogonal states, phase undefined")
    phi = principal(cmath.phase(z))
    phi_d = (chi1 + T * chi2) / (1.0 + T)
    return PhaseDecomposition(phi, phi_d, phi - phi_d, amplitude)


def compensated_shifts(T: float, dchi: float) -> tuple[float, float]:
    """Shifts with ``chi2 - chi1 = dchi`` and vanishing dynamical phase."""
    T = check_transmissivity(T)
    dchi = _check_finite("dchi", dchi)
    return -T * dchi / (1.0 + T), dchi / (1.0 + T)


def cyclic_geometric_phase(T: float) -> float:
    T = check_transmissivity(T)
    return -2.0 * math.pi * T / (1.0 + T)
