"""Bloch-sphere picture of the second-loop evolution.

North pole is ``|p_perp><p_perp|``, south pole ``|p><p|`` and the reference
ray ``|q><q|`` sits at ``(1, 0, 0)``.  The loop used for the area integral
starts and ends at ``q``:

1. geodesic along the ``phi = 0`` meridian from ``q`` up to the absorber
   latitude,
2. latitude arc with azimuth running from 0 to ``dchi`` (phase shifter),
3. geodesic closure back to ``q`` (projective recombination).

The enclosed solid angle is summed over a triangle fan anchored at the first
vertex using the Van Oosterom-Strackee signed excess.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GeodesicError
from .state import PathState, check_transmissivity

UNIT_TOL = 1e-9
Q_POINT = np.array([1.0, 0.0, 0.0])

GEODESIC = "geodesic"
LATITUDE = "latitude"


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        v = np.array([self.x, self.y, self.z], dtype=float)
        n = np.linalg.norm(v)
        if not np.isfinite(n) or n < 1e-12:
            raise DomainError("Bloch vector must be finite and nonzero")
        v = v / n
        object.__setattr__(self, "x", float(v[0]))
        object.__setattr__(self, "y", float(v[1]))
        object.__setattr__(self, "z", float(v[2]))

    @classmethod
    def from_array(cls, v) -> "BlochVector":
        return cls(*map(float, v))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def polar(self) -> float:
        return math.acos(max(-1.0, min(1.0, self.z)))

    @property
    def azimuth(self) -> float:
        return math.atan2(self.y, self.x)


def bloch_from_state(s: PathState) -> BlochVector:
    a, b = s.a_perp, s.a_p
    n = abs(a) ** 2 + abs(b) ** 2
    if n < 1e-12:
        raise DomainError("zero state has no Bloch vector")
    ab = a.conjugate() * b
    return BlochVector(2 * ab.real / n, 2 * ab.imag / n, (abs(a) ** 2 - abs(b) ** 2) / n)


def absorber_polar_angle(T: float) -> float:
    """Polar angle (from the north pole) reached by an absorber ``T = tan^2(theta/2)``."""
    T = check_transmissivity(T)
    return 2.0 * math.atan(math.sqrt(T))


def _latitude_point(T: float, phi) -> np.ndarray:
    # exact z for T=1 keeps equatorial paths on z == 0
    cos_t = (1.0 - T) / (1.0 + T)
    sin_t = 2.0 * math.sqrt(T) / (1.0 + T)
    phi = np.asarray(phi, dtype=float)
    return np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi),
                     np.full_like(phi, cos_t)], axis=-1)


def geodesic_points(a, b, n: int) -> np.ndarray:
    """``n + 1`` points along the minor great-circle arc from ``a`` to ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.linalg.norm(a + b) < UNIT_TOL:
        raise GeodesicError("geodesic undefined: endpoints are antipodal")
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    omega = math.atan2(np.linalg.norm(np.cross(a, b)), float(np.dot(a, b)))
    if omega < 1e-15:
        pts = np.repeat(a[None, :], n + 1, axis=0)
    else:
        s = math.sin(omega)
        pts = (np.sin((1.0 - t) * omega) * a + np.sin(t * omega) * b) / s
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts[0], pts[-1] = a, b
    return pts


@dataclass
class ArcSegment:
    kind: str
    start: BlochVector
    end: BlochVector
    points: np.ndarray = field(repr=False)
    theta: float | None = None
    dphi: float | None = None

    def __post_init__(self):
        if self.kind not in (GEODESIC, LATITUDE):
            raise DomainError(f"unknown arc kind {self.kind!r}")
        a, b = self.start.as_array(), self.end.as_array()
        if self.kind == GEODESIC and np.linalg.norm(a + b) < UNIT_TOL:
            raise GeodesicError("geodesic undefined: endpoints are antipodal")
        if self.kind == LATITUDE and abs(a[2] - b[2]) >= UNIT_TOL:
            raise DomainError("latitude arc must keep z constant")

    @classmethod
    def geodesic(cls, a, b, n: int) -> "ArcSegment":
        pts = geodesic_points(a, b, n)
        return cls(GEODESIC, BlochVector.from_array(pts[0]),
                   BlochVector.from_array(pts[-1]), pts)

    @classmethod
    def latitude(cls, T: float, phi0: float, dphi: float, n: int) -> "ArcSegment":
        pts = _latitude_point(T, phi0 + dphi * np.linspace(0.0, 1.0, n + 1))
        return cls(LATITUDE, BlochVector.from_array(pts[0]), BlochVector.from_array(pts[-1]),
                   pts, theta=absorber_polar_angle(T), dphi=dphi)


@dataclass
class SpherePath:
    segments: list
    n_per_arc: int
    closed: bool = False

    def __post_init__(self):
        if self.n_per_arc < 1:
            raise DomainError("segments per arc must be positive")
        for k in range(len(self.segments) - 1):
            gap = self.segments[k].end.as_array() - self.segments[k + 1].start.as_array()
            if np.linalg.norm(gap) >= UNIT_TOL:
                raise DomainError(f"segments {k} and {k + 1} are not connected")
        if self.closed:
            gap = self.segments[-1].end.as_array() - self.segments[0].start.as_array()
            if np.linalg.norm(gap) >= UNIT_TOL:
                raise DomainError("path flagged closed does not return to its start")

    def vertices(self) -> np.ndarray:
        """All discretization points with the shared joints counted once."""
        parts = [self.segments[0].points]
        parts += [s.points[1:] for s in self.segments[1:]]
        return np.concatenate(parts, axis=0)

    def labelled_points(self):
        """Yield ``(segment_index, kind, x, y, z)`` rows, joints repeated per segment."""
        for k, seg in enumerate(self.segments):
            for x, y, z in seg.points:
                yield k, seg.kind, float(x), float(y), float(z)


def build_evolution_path(T: float, dchi: float, N: int = 1024) -> SpherePath:
    """Closed loop ``q -> meridian -> latitude arc -> geodesic -> q``.

    ``T = 0`` gives the zero-area up-and-back meridian through the north pole.
    """
    T = check_transmissivity(T)
    if not math.isfinite(dchi):
        raise DomainError("dchi must be finite")
    if int(N) != N or N < 2:
        raise DomainError("need at least 2 segments per arc")
    N = int(N)
    corner = _latitude_point(T, 0.0)
    end = _latitude_point(T, dchi)
    if np.linalg.norm(end + Q_POINT) < UNIT_TOL:
        raise GeodesicError("geodesic undefined: closure endpoint is antipodal to q")
    up = ArcSegment.geodesic(Q_POINT, corner, N)
    arc = ArcSegment.latitude(T, 0.0, dchi, N)
    # keep the joint bit-identical with the previous arc
    arc.points[0] = up.points[-1]
    down = ArcSegment.geodesic(arc.points[-1], Q_POINT, N)
    return SpherePath([up, arc, down], N, closed=True)


def _triangle_excess(a, b, c) -> np.ndarray:
    num = np.einsum("...i,...i->...", a, np.cross(b, c))
    den = (1.0 + np.einsum("...i,...i->...", a, b) + np.einsum("...i,...i->...", b, c)
           + np.einsum("...i,...i->...", c, a))
    return 2.0 * np.arctan2(num, den)


def reduce_solid_angle(omega: float) -> float:
    """Map a solid angle into (-2*pi, 2*pi]."""
    r = math.remainder(omega, 4.0 * math.pi)
    if r <= -2.0 * math.pi:
        r += 4.0 * math.pi
    return r


def fan_solid_angle(vertices, anchor: int = 0, reduce: bool = True) -> float:
    """Signed solid angle of a closed vertex loop (last vertex repeats the first).

    Triangles ``(v0, v_i, v_{i+1})`` are summed; a vertex antipodal to the
    anchor is folded into its neighbours, which leaves the total unchanged
    modulo 4*pi.
    """
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 3 or len(v) < 2:
        raise DomainError("vertices must be an (M, 3) array")
    if np.linalg.norm(v[0] - v[-1]) >= UNIT_TOL:
        raise DomainError("solid angle needs a closed path")
    if np.any(np.abs(np.linalg.norm(v, axis=1) - 1.0) >= UNIT_TOL):
        raise DomainError("all path points must be unit vectors")
    ring = v[:-1]
    if anchor:
        ring = np.roll(ring, -anchor, axis=0)
    ring = np.concatenate([ring, ring[:1]], axis=0)
    m = len(ring)
    a = ring[0]

    edge_gap = np.linalg.norm(ring[1:] + ring[:-1], axis=1)
    bad = np.flatnonzero(edge_gap < UNIT_TOL)
    if bad.size:
        raise GeodesicError(f"antipodal consecutive vertices at index {int(bad[0])}")

    excess = _triangle_excess(a, ring[1:-1], ring[2:])  # triangle k uses ring[k+1], ring[k+2]
    anti = np.flatnonzero(np.linalg.norm(ring + a, axis=1) < UNIT_TOL)
    for k in anti:
        if k <= 1 or k >= m - 2 or (k + 1) in anti or (k - 1) in anti:
            raise GeodesicError(f"antipodal triangle corner at vertex index {int(k)}")
        excess[k - 2] = _triangle_excess(a, ring[k - 1], ring[k + 1])
        excess[k - 1] = _triangle_excess(ring[k - 1], ring[k], ring[k + 1])
    total = float(np.sum(excess))
    return reduce_solid_angle(total) if reduce else total


def signed_solid_angle(path: SpherePath, anchor: int = 0) -> float:
    if not path.closed:
        raise DomainError("solid angle needs a closed path")
    return fan_solid_angle(path.vertices(), anchor=anchor)


def geometric_phase_from_area(path: SpherePath) -> float:
    return -0.5 * signed_solid_angle(path)


def cap_solid_angle(T: float) -> float:
    """Area of the polar cap bounded by the absorber latitude."""
    T = check_transmissivity(T)
    return 2.0 * math.pi * (1.0 - (1.0 - T) / (1.0 + T))


def _arc_contains(a, b, n, x) -> np.ndarray:
    return (np.einsum("...i,...i->...", np.cross(a, x), n) >= 0) & \
           (np.einsum("...i,...i->...", np.cross(x, b), n) >= 0)


def self_intersections(vertices, tol: float = 1e-12) -> list[tuple[int, int, np.ndarray]]:
    """Crossings between non-adjacent edges of a closed vertex loop.

    Returns ``(i, j, point)`` with edge ``i`` = ``v[i] -> v[i+1]`` and ``i < j``.
    Touching at shared vertices is not reported.
    """
    v = np.asarray(vertices, dtype=float)
    a, b = v[:-1], v[1:]
    normals = np.cross(a, b)
    lens = np.linalg.norm(normals, axis=1)
    keep = lens > tol
    m = len(a)
    hits = []
    for i in np.flatnonzero(keep):
        js = np.arange(i + 2, m)
        if i == 0:
            js = js[js != m - 1]
        js = js[keep[js]]
        if js.size == 0:
            continue
        line = np.cross(normals[i], normals[js])
        ln = np.linalg.norm(line, axis=1)
        ok = ln > tol
        js, line = js[ok], line[ok] / ln[ok, None]
        for sign in (1.0, -1.0):
            x = sign * line
            on_i = _arc_contains(a[i], b[i], normals[i], x)
            on_j = _arc_contains(a[js], b[js], normals[js], x)
            for j, pt in zip(js[on_i & on_j], x[on_i & on_j]):
                if min(np.linalg.norm(pt - a[i]), np.linalg.norm(pt - b[i]),
                       np.linalg.norm(pt - a[j]), np.linalg.norm(pt - b[j])) > 1e-9:
                    hits.append((int(i), int(j), pt))
    return hits


def split_at_crossing(vertices, i: int, j: int, point) -> tuple[np.ndarray, np.ndarray]:
    """Split a closed loop at the crossing of edges ``i`` and ``j`` into two closed loops."""
    v = np.asarray(vertices, dtype=float)
    x = np.asarray(point, dtype=float)[None, :]
    outer = np.concatenate([v[: i + 1], x, v[j + 1:]], axis=0)
    inner = np.concatenate([x, v[i + 1: j + 1], x], axis=0)
    return outer, inner
