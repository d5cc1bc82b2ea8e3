"""Ellipse-arc kernel: evaluation, tangents, curvature, arc length, ray hits.

Every boundary piece of a string table is an arc of an ellipse.  An arc is
stored in its canonical frame: centre ``C``, unit major direction ``u`` and
unit minor direction ``w`` (``w`` is ``u`` turned by +90 degrees, pointing
from the centre towards the arc), so that

    P(t) = C + a cos(t) u + b sin(t) w,     t_start <= t <= t_end.

With this choice increasing ``t`` runs counterclockwise around the table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, GeometryIntegrityError

if TYPE_CHECKING:
    from .table import StringTable

# slack on the parameter range check, in radians
RANGE_TOL = 1e-9
DEFAULT_T_MIN = 1e-9


@dataclass(frozen=True)
class EllipseArc:
    """One elliptical boundary piece with foci ``focus_a``/``focus_b``."""

    arc_id: int
    foci_labels: tuple[int, int]
    focus_a: tuple[float, float]
    focus_b: tuple[float, float]
    focal_sum: float
    t_start: float
    t_end: float
    center: tuple[float, float]
    rotation: float  # angle of the major direction u in the table frame

    def __post_init__(self):
        sep = math.dist(self.focus_a, self.focus_b)
        if not self.focal_sum > sep:
            raise DomainError(f"focal sum {self.focal_sum} does not exceed focal distance {sep}")
        if not self.t_start < self.t_end or self.t_end - self.t_start >= 2 * math.pi:
            raise DomainError("arc parameter range must be increasing and less than a full turn")

    @property
    def a(self) -> float:
        return self.focal_sum / 2

    @property
    def c(self) -> float:
        return math.dist(self.focus_a, self.focus_b) / 2

    @property
    def b(self) -> float:
        return math.sqrt(self.a**2 - self.c**2)

    @property
    def u(self) -> np.ndarray:
        return np.array([math.cos(self.rotation), math.sin(self.rotation)])

    @property
    def w(self) -> np.ndarray:
        return np.array([-math.sin(self.rotation), math.cos(self.rotation)])

    @property
    def t_mid(self) -> float:
        return 0.5 * (self.t_start + self.t_end)

    @property
    def label(self) -> str:
        return "%d%d" % self.foci_labels

    def implicit(self, p) -> np.ndarray:
        """Focal-sum residual |P-Fa| + |P-Fb| - focal_sum (zero on the ellipse)."""
        p = np.asarray(p, dtype=float)
        fa = np.asarray(self.focus_a)
        fb = np.asarray(self.focus_b)
        return (np.linalg.norm(p - fa, axis=-1) + np.linalg.norm(p - fb, axis=-1)
                - self.focal_sum)


@dataclass(frozen=True)
class BoundaryPoint:
    """A point of the table boundary with its arc, parameter and arc length."""

    arc_id: int
    t: float
    point: tuple[float, float]
    s: float

    @property
    def xy(self) -> np.ndarray:
        return np.array(self.point)


def _check_range(arc: EllipseArc, t) -> None:
    t = np.asarray(t)
    if np.any(t < arc.t_start - RANGE_TOL) or np.any(t > arc.t_end + RANGE_TOL):
        raise DomainError(
            f"parameter outside arc {arc.arc_id} range [{arc.t_start}, {arc.t_end}]")


def arc_point(arc: EllipseArc, t, *, check: bool = True) -> np.ndarray:
    """Cartesian point(s) of ``arc`` at parameter(s) ``t``."""
    if check:
        _check_range(arc, t)
    t = np.asarray(t, dtype=float)
    ct = np.cos(t)[..., None]
    st = np.sin(t)[..., None]
    return np.asarray(arc.center) + arc.a * ct * arc.u + arc.b * st * arc.w


def arc_derivative(arc: EllipseArc, t) -> np.ndarray:
    """dP/dt (not normalised)."""
    t = np.asarray(t, dtype=float)
    return (-arc.a * np.sin(t))[..., None] * arc.u + (arc.b * np.cos(t))[..., None] * arc.w


def arc_tangent(arc: EllipseArc, t, *, check: bool = True) -> np.ndarray:
    """Unit tangent, oriented counterclockwise around the table."""
    if check:
        _check_range(arc, t)
    d = arc_derivative(arc, t)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def arc_curvature(arc: EllipseArc, t, *, check: bool = True):
    """Curvature a*b / (a^2 sin^2 t + b^2 cos^2 t)^(3/2); strictly positive."""
    if check:
        _check_range(arc, t)
    t = np.asarray(t, dtype=float)
    a, b = arc.a, arc.b
    return a * b / (a**2 * np.sin(t) ** 2 + b**2 * np.cos(t) ** 2) ** 1.5


def arc_speed(arc: EllipseArc, t):
    t = np.asarray(t, dtype=float)
    return np.sqrt(arc.a**2 * np.sin(t) ** 2 + arc.b**2 * np.cos(t) ** 2)


def arc_length(arc: EllipseArc, t0: float, t1: float) -> float:
    """Length of ``arc`` between parameters ``t0 <= t1`` by adaptive quadrature."""
    if t1 < t0:
        raise DomainError(f"inverted interval [{t0}, {t1}]")
    _check_range(arc, [t0, t1])
    if t1 == t0:
        return 0.0
    val, _err = integrate.quad(lambda t: float(arc_speed(arc, t)), t0, t1,
                               epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def ellipse_arclength(a: float, b: float, t0, t1):
    """Closed-form length of P(t) = (a cos t, b sin t) over [t0, t1] (vectorised).

    Uses speed^2 = a^2 (1 - m sin^2(pi/2 - t)) with m = 1 - b^2/a^2, i.e. a
    difference of Legendre incomplete integrals of the second kind.
    Requires a >= b.
    """
    m = 1.0 - (b / a) ** 2
    return a * (special.ellipeinc(np.pi / 2 - np.asarray(t0), m)
                - special.ellipeinc(np.pi / 2 - np.asarray(t1), m))


def incomplete_elliptic_e(x: float, k: float) -> float:
    """Jacobi-form incomplete elliptic integral of the second kind.

    E(x, k) = int_0^x sqrt(1 - k^2 t^2) / sqrt(1 - t^2) dt, evaluated through
    Carlson's symmetric forms R_F and R_D.
    """
    if not (0.0 <= x <= 1.0) or not (0.0 <= k <= 1.0):
        raise DomainError(f"E(x, k) needs 0 <= x <= 1 and 0 <= k <= 1, got ({x}, {k})")
    if x == 0.0:
        return 0.0
    x2 = x * x
    y = 1.0 - x2
    z = 1.0 - k * k * x2
    if k == 1.0 and x == 1.0:
        return 1.0
    rf = special.elliprf(y, z, 1.0)
    rd = special.elliprd(y, z, 1.0)
    return float(x * rf - (k * k * x2 * x / 3.0) * rd)


def boundary_s(table: "StringTable", arc_id, t):
    """Arc-length coordinate of (arc_id, t), measured ccw from the origin point O."""
    arc_id = np.asarray(arc_id)
    t = np.asarray(t, dtype=float)
    a = table.arc_a[arc_id]
    b = table.arc_b[arc_id]
    local = ellipse_arclength(a, b, table.arc_t0[arc_id], t)
    L = table.boundary_length
    s = np.mod(table.arc_s0[arc_id] + local, L)
    return np.where(s >= L, s - L, s)


def invert_arc_length(table: "StringTable", s: float) -> BoundaryPoint:
    """Boundary point at arc length ``s`` (0 <= s < L) from the origin point O."""
    L = table.boundary_length
    if not (0.0 <= s < L):
        raise DomainError(f"s={s} outside [0, {L})")
    # unwrap relative to the start of arc 0
    rel = (s + table.origin_offset) % L
    starts = table.arc_s0_unwrapped
    j = int(np.searchsorted(starts, rel, side="right") - 1)
    j = min(max(j, 0), table.n - 1)
    arc = table.arcs[j]
    target = rel - starts[j]
    target = min(max(target, 0.0), table.arc_lengths[j])

    def f(t):
        return float(ellipse_arclength(arc.a, arc.b, arc.t_start, t)) - target

    if target <= 0.0:
        t = arc.t_start
    elif target >= table.arc_lengths[j]:
        t = arc.t_end
    else:
        t = optimize.brentq(f, arc.t_start, arc.t_end, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    p = arc_point(arc, t)
    return BoundaryPoint(j, float(t), (float(p[0]), float(p[1])), float(s))


def boundary_point(table: "StringTable", arc_id: int, t: float) -> BoundaryPoint:
    arc = table.arcs[arc_id]
    p = arc_point(arc, t)
    return BoundaryPoint(int(arc_id), float(t), (float(p[0]), float(p[1])),
                         float(boundary_s(table, arc_id, t)))


def _wrap_near(t, ref):
    """Representative of angle t in [ref - pi, ref + pi)."""
    return ref + np.mod(t - ref + np.pi, 2 * np.pi) - np.pi


def intersect_many(table: "StringTable", origins, directions, t_min: float = DEFAULT_T_MIN,
                   arc_subset=None, range_tol: float = RANGE_TOL):
    """First boundary hit for a batch of rays.

    Returns ``(arc_id, t, points, lam)`` arrays; ``lam`` is the ray parameter.
    Each arc's full ellipse is intersected in closed form, roots outside the
    arc's parameter range or with ``lam <= t_min`` are dropped, and the
    smallest surviving root wins.  ``arc_subset`` restricts the candidate arcs.
    """
    P = np.atleast_2d(np.asarray(origins, dtype=float))
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    sub = np.arange(table.n) if arc_subset is None else np.asarray(arc_subset, dtype=int)
    C = table.arc_centers[sub]  # (n, 2)
    U = table.arc_major[sub]
    W = table.arc_minor[sub]
    a = table.arc_a[sub][:, None]
    b = table.arc_b[sub][:, None]
    # canonical coordinates, shape (n, N)
    rel = P[None, :, :] - C[:, None, :]
    px = np.einsum("nkj,nj->nk", rel, U) / a
    py = np.einsum("nkj,nj->nk", rel, W) / b
    dx = (D @ U.T).T / a
    dy = (D @ W.T).T / b
    A = dx * dx + dy * dy
    B = px * dx + py * dy  # half of the linear coefficient
    Cq = px * px + py * py - 1.0
    disc = B * B - A * Cq
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    # stable pair of roots
    q = -(B + np.copysign(sq, B))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / A
        r2 = np.where(q != 0.0, Cq / q, -B / A)
    best_lam = np.full(P.shape[0], np.inf)
    best_arc = np.full(P.shape[0], -1, dtype=int)
    best_t = np.zeros(P.shape[0])
    t0 = table.arc_t0[sub][:, None]
    t1 = table.arc_t1[sub][:, None]
    tm = 0.5 * (t0 + t1)
    for lam in (r1, r2):
        x = px + lam * dx
        y = py + lam * dy
        t = _wrap_near(np.arctan2(y, x), tm)
        valid = ok & (lam > t_min) & (t >= t0 - range_tol) & (t <= t1 + range_tol)
        lam_v = np.where(valid, lam, np.inf)
        j = np.argmin(lam_v, axis=0)
        cand = lam_v[j, np.arange(P.shape[0])]
        better = cand < best_lam
        best_lam = np.where(better, cand, best_lam)
        best_arc = np.where(better, sub[j], best_arc)
        best_t = np.where(better, t[j, np.arange(P.shape[0])], best_t)
    if np.any(~np.isfinite(best_lam)):
        bad = int(np.flatnonzero(~np.isfinite(best_lam))[0])
        raise GeometryIntegrityError(
            f"ray {bad} from {P[bad].tolist()} along {D[bad].tolist()} has no boundary hit")
    best_t = np.clip(best_t, table.arc_t0[best_arc], table.arc_t1[best_arc])
    points = P + best_lam[:, None] * D
    return best_arc, best_t, points, best_lam


def ray_boundary_intersection(table: "StringTable", origin, direction,
                              t_min: float = DEFAULT_T_MIN) -> BoundaryPoint:
    """First boundary point hit by the ray ``origin + lam * direction``, lam > t_min."""
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-12:
        raise DomainError("direction must be a unit vector")
    arc_id, t, pts, _lam = intersect_many(table, [origin], [direction], t_min)
    j = int(arc_id[0])
    return BoundaryPoint(j, float(t[0]), (float(pts[0, 0]), float(pts[0, 1])),
                         float(boundary_s(table, j, t[0])))
