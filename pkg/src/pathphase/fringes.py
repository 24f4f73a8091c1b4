"""Synthetic interferograms, sinusoid fits and phase sweeps.

The experimental phase model replaces the ideal second-loop sum by

    sqrt(T1) * exp(-i s1 dchi) + C * sqrt(T2) * exp(i s2 dchi)

where ``s1 + s2 = 1`` split the relative shift between the two plates and
``C`` lumps every source of lost visibility (partial beam overlap,
inhomogeneous phase and transmission).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .bloch import build_evolution_path, signed_solid_angle
from .errors import DomainError, OrthogonalityError, UnidentifiableError
from .state import (ORTHO_TOL, compensated_shifts, phase_decomposition, principal)

# reference configuration: plates of 0.5 mm and 4.1 mm, T2/T1 = 0.120, C = 0.57
REF_T1 = 1.0
REF_T2 = 0.120
REF_S1 = 0.5 / 4.6
REF_S2 = 4.1 / 4.6
REF_C = 0.57

MAX_TRACK_STEP = math.pi / 64


def _check_model(T1, T2, s1, s2, C):
    for name, T in (("T1", T1), ("T2", T2)):
        if not math.isfinite(T) or not 0.0 < T <= 1.0:
            raise DomainError(f"{name} out of range (0,1]: {T!r}")
    if not (math.isfinite(s1) and math.isfinite(s2)) or abs(s1 + s2 - 1.0) > 1e-9:
        raise DomainError("s1+s2 must equal 1")
    if not math.isfinite(C) or not 0.0 <= C <= 1.0:
        raise DomainError(f"C out of range [0,1]: {C!r}")


def _model_sum(T1, T2, s1, s2, C, dchi):
    dchi = np.asarray(dchi, dtype=float)
    return (math.sqrt(T1) * np.exp(-1j * s1 * dchi)
            + C * math.sqrt(T2) * np.exp(1j * s2 * dchi))


def damped_phase_model(T1, T2, s1, s2, C, dchi) -> tuple[float, float]:
    """Principal phase and modulus of the visibility-damped two-beam sum."""
    _check_model(T1, T2, s1, s2, C)
    z = complex(_model_sum(T1, T2, s1, s2, C, float(dchi)))
    if abs(z) < ORTHO_TOL:
        raise OrthogonalityError("orthogonal states, phase undefined")
    return principal(math.atan2(z.imag, z.real)), abs(z)


def residual_dynamical_phase(T_ratio, s1, s2, dchi) -> float:
    """Dynamical phase left over when ``T2/T1`` misses ``s1/s2``."""
    if not math.isfinite(T_ratio) or not 0.0 < T_ratio <= 1.0:
        raise DomainError(f"T_ratio out of range (0,1]: {T_ratio!r}")
    if abs(s1 + s2 - 1.0) > 1e-9:
        raise DomainError("s1+s2 must equal 1")
    chi1, chi2 = -s1 * dchi, s2 * dchi
    return (chi1 + T_ratio * chi2) / (1.0 + T_ratio)


def visibility(amplitude: float, T2: float, C: float) -> float:
    """Fringe contrast for a unit reference beam against the second-loop beam.

    The coherent part has modulus ``amplitude``; the ``(1 - C^2) T2`` share of
    the damped beam only adds to the mean intensity.
    """
    return 2.0 * amplitude / (1.0 + amplitude ** 2 + (1.0 - C * C) * T2)


# -- continuous phase tracking -------------------------------------------------

def _dense_chain(grid):
    """Grid points preceded by 0, refined so neighbours are <= MAX_TRACK_STEP apart."""
    nodes = np.concatenate([[0.0], np.asarray(grid, dtype=float)])
    pieces = [nodes[:1]]
    where = [0]
    for a, b in zip(nodes[:-1], nodes[1:]):
        k = max(1, int(math.ceil(abs(b - a) / MAX_TRACK_STEP)))
        pieces.append(a + (b - a) * np.arange(1, k + 1) / k)
        where.append(where[-1] + k)
    return np.concatenate(pieces), np.array(where[1:])


def track_phase(phase_fn, grid) -> np.ndarray:
    """Nearest-branch continuation of ``phase_fn`` along ``grid`` from ``phase_fn(0)``.

    ``phase_fn`` maps an array of dchi values to principal phases.
    """
    dense, idx = _dense_chain(grid)
    wrapped = np.asarray(phase_fn(dense), dtype=float)
    return np.unwrap(wrapped)[idx]


def unwrap_phases(dchi, phases) -> np.ndarray:
    """Nearest-branch unwrapping of measured phases, anchored at the point closest to 0."""
    dchi = np.asarray(dchi, dtype=float)
    out = np.unwrap(np.asarray(phases, dtype=float))
    k = int(np.argmin(np.abs(dchi)))
    return out - 2 * math.pi * round((out[k] - principal(out[k])) / (2 * math.pi))


def model_phase_curve(T1, T2, s1, s2, C, grid) -> np.ndarray:
    """Continuously tracked model phase along ``grid`` (zero at dchi = 0)."""
    _check_model(T1, T2, s1, s2, C)

    def fn(x):
        z = _model_sum(T1, T2, s1, s2, C, x)
        if np.any(np.abs(z) < ORTHO_TOL):
            raise OrthogonalityError("orthogonal states, phase undefined")
        return np.angle(z)

    return track_phase(fn, grid)


# -- interferograms ------------------------------------------------------------

@dataclass
class Interferogram:
    eta_values: np.ndarray
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eta_values = np.asarray(self.eta_values, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.eta_values.ndim != 1 or self.eta_values.shape != self.counts.shape:
            raise DomainError("eta_values and counts must be 1-d and equally long")
        if len(self.eta_values) < 5:
            raise DomainError("an interferogram needs at least 5 points")
        if not (np.all(np.isfinite(self.eta_values)) and np.all(np.isfinite(self.counts))):
            raise DomainError("interferogram values must be finite")
        if np.any(np.diff(self.eta_values) <= 0):
            raise DomainError("eta_values must be strictly increasing")
        if np.any(self.counts < 0):
            raise DomainError("counts must be nonnegative")


def _stream_seed(seed: int, params) -> np.random.SeedSequence:
    words = [int(seed) & 0xFFFFFFFF]
    for p in params:
        words.extend(struct.unpack("<II", struct.pack("<d", float(p))))
    return np.random.SeedSequence(words)


def synthesize_interferogram(T1, T2, s1, s2, C, dchi, mean_counts: float = 1000.0,
                             n_points: int = 32, noise: str = "none",
                             seed: int = 0) -> Interferogram:
    """Counts ``mean * (1 + V cos(eta - phase))`` on ``n_points`` settings over two periods."""
    if int(n_points) != n_points or n_points < 5:
        raise DomainError("n_points must be an integer >= 5")
    if not math.isfinite(mean_counts) or mean_counts <= 0:
        raise DomainError("mean_counts must be positive")
    if noise not in ("none", "poisson"):
        raise DomainError(f"unknown noise model {noise!r}")
    phase, amp = damped_phase_model(T1, T2, s1, s2, C, dchi)
    vis = visibility(amp, T2, C)
    eta = np.linspace(0.0, 4.0 * math.pi, int(n_points), endpoint=False)
    expected = mean_counts * (1.0 + vis * np.cos(eta - phase))
    if noise == "poisson":
        rng = np.random.default_rng(_stream_seed(seed, (T1, T2, s1, s2, C, dchi, mean_counts)))
        counts = rng.poisson(expected).astype(float)
    else:
        counts = expected
    meta = dict(T1=T1, T2=T2, s1=s1, s2=s2, C=C, dchi=dchi, mean_counts=mean_counts,
                seed=seed, noise=noise, phase=phase, visibility=vis)
    return Interferogram(eta, counts, meta)


@dataclass(frozen=True)
class FringeFit:
    offset: float
    amplitude: float
    phase: float
    phase_stderr: float
    converged: bool

    @property
    def contrast(self) -> float:
        return self.amplitude / self.offset if self.offset else float("nan")

    def as_dict(self) -> dict:
        return {"offset": self.offset, "amplitude": self.amplitude, "phase": self.phase,
                "phase_stderr": self.phase_stderr, "converged": self.converged}


def fit_fringe(data: Interferogram) -> FringeFit:
    """Weighted linear fit of ``A + P cos(eta) + Q sin(eta)``.

    Weights are Poisson inverse variances: first from the counts, then
    refined once from the fitted curve (both floored at 1).
    """
    eta, y = data.eta_values, data.counts
    X = np.column_stack([np.ones_like(eta), np.cos(eta), np.sin(eta)])
    w = 1.0 / np.maximum(y, 1.0)
    for _ in range(2):
        normal = X.T @ (w[:, None] * X)
        if np.linalg.matrix_rank(normal, tol=1e-10 * np.abs(normal).max()) < 3:
            nan = float("nan")
            return FringeFit(nan, nan, nan, nan, False)
        beta = np.linalg.solve(normal, X.T @ (w * y))
        # second pass: variances from the fitted curve instead of the noisy counts
        w = 1.0 / np.maximum(X @ beta, 1.0)
    cov = np.linalg.inv(normal)
    A, P, Q = beta
    B = math.hypot(P, Q)
    if B < 1e-12 * max(1.0, abs(A)):
        raise OrthogonalityError("phase undefined: fringe amplitude vanishes")
    grad = np.array([0.0, -Q / B ** 2, P / B ** 2])
    stderr = math.sqrt(max(float(grad @ cov @ grad), 0.0))
    return FringeFit(float(A), B, principal(math.atan2(Q, P)), stderr, True)


# -- sweeps --------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    dchi: float
    phi_ideal: float
    phi_damped: float
    phi_dynamical_residual: float
    phi_geometric: float
    omega: float
    amplitude: float

    def as_dict(self) -> dict:
        return {"dchi": self.dchi, "phi_ideal": self.phi_ideal,
                "phi_damped": self.phi_damped,
                "phi_dyn_residual": self.phi_dynamical_residual,
                "phi_geometric": self.phi_geometric, "omega": self.omega,
                "amplitude": self.amplitude}


def _geometric_shifts(T, s1, s2, dchi, compensated):
    if compensated:
        return compensated_shifts(T, dchi)
    return -s1 * dchi, s2 * dchi


def phase_sweep(T1, T2, s1, s2, C, grid, compensated: bool = True,
                segments: int = 1024) -> list[SweepRow]:
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0:
        raise DomainError("sweep grid is empty")
    _check_model(T1, T2, s1, s2, C)
    T = T2 / T1
    if T > 1.0:
        raise DomainError("T2/T1 must not exceed 1")

    ideal = model_phase_curve(T1, T2, s1, s2, 1.0, grid)
    damped = model_phase_curve(T1, T2, s1, s2, C, grid)
    amps = np.abs(_model_sum(T1, T2, s1, s2, C, grid))

    def geometric(xs):
        return [principal(phase_decomposition(T, *_geometric_shifts(T, s1, s2, x, compensated)).geometric)
                for x in xs]

    phi_g = track_phase(geometric, grid)
    rows = []
    for k, x in enumerate(grid):
        omega = signed_solid_angle(build_evolution_path(T, x, segments))
        rows.append(SweepRow(float(x), float(ideal[k]), float(damped[k]),
                             residual_dynamical_phase(T, s1, s2, x),
                             float(phi_g[k]), omega, float(amps[k])))
    return rows


def sweep_grid(dchi_from: float, dchi_to: float, steps: int) -> np.ndarray:
    """``steps`` points from ``dchi_from`` with spacing ``(dchi_to - dchi_from) / steps``."""
    return dchi_from + (dchi_to - dchi_from) * np.arange(steps) / steps


def fringe_contrast_curve(T1, T2, s1, s2, C, grid) -> list[tuple[float, float]]:
    _check_model(T1, T2, s1, s2, C)
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0:
        raise DomainError("grid is empty")
    amps = np.abs(_model_sum(T1, T2, s1, s2, C, grid))
    return [(float(x), float(a)) for x, a in zip(grid, amps)]


def measured_sweep(T1, T2, s1, s2, C, grid, mean_counts=1000.0, n_points=32,
                   noise="poisson", seed=0) -> list[tuple[float, float]]:
    """Fit a synthetic interferogram per grid point and return unwrapped ``(dchi, phase)``."""
    grid = np.asarray(list(grid), dtype=float)
    phases = []
    for x in grid:
        data = synthesize_interferogram(T1, T2, s1, s2, C, x, mean_counts, n_points,
                                        noise, seed)
        fit = fit_fringe(data)
        if not fit.converged:
            raise DomainError(f"fringe fit did not converge at dchi={x}")
        phases.append(fit.phase)
    return list(zip(grid.tolist(), unwrap_phases(grid, phases).tolist()))


# -- visibility fit ------------------------------------------------------------

def fit_visibility_C(points, T1, T2, s1, s2) -> tuple[float, float]:
    """Least-squares damping coefficient ``C`` in [0, 1] with its standard error.

    Residuals are wrapped into (-pi, pi] so the branch of each measured phase
    does not matter.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DomainError("need at least 3 (dchi, phase) points")
    _check_model(T1, T2, s1, s2, 1.0)
    x, y = pts[:, 0], pts[:, 1]

    def residuals(C):
        return np.angle(np.exp(1j * y) / _model_sum(T1, T2, s1, s2, C, x))

    def cost(C):
        return float(np.sum(residuals(C) ** 2))

    probe = np.array([np.angle(_model_sum(T1, T2, s1, s2, c, x)) for c in (0.0, 0.5, 1.0)])
    spread = np.abs(np.angle(np.exp(1j * (probe - probe[0]))))
    if spread.max() < 1e-9:
        raise UnidentifiableError("C unidentifiable: phases do not depend on C at these points")

    scan = np.linspace(0.0, 1.0, 101)
    best = scan[int(np.argmin([cost(c) for c in scan]))]
    lo, hi = max(0.0, best - 0.01), min(1.0, best + 0.01)
    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-8})
    C = float(res.x)
    # the bounded search never lands exactly on an edge
    for edge in (0.0, 1.0):
        if abs(C - edge) < 1e-5 and cost(edge) <= cost(C):
            C = edge

    n = len(pts)
    s2_hat = cost(C) / max(n - 1, 1)
    h = 1e-4
    c0 = min(max(C, h), 1.0 - h)
    curv = (cost(c0 + h) - 2 * cost(c0) + cost(c0 - h)) / h ** 2
    stderr = math.sqrt(2.0 * s2_hat / curv) if curv > 0 else float("inf")
    return C, stderr
