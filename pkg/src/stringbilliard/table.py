"""String-construction billiard tables over regular n-gons.

The table for a regular n-gon ``K`` with side 2 is drawn by the gardener's
construction with the one string length that makes the boundary C^2:

    l = 2(n - 1) - 2 / cos((n - 2) pi / n).

Its boundary is ``n`` congruent elliptical arcs.  The arc wrapped around the
vertex ``F_v`` has foci ``F_{v-1}, F_{v+1}`` and runs between the apexes
``G_v`` and ``G_{v-1}`` of the isosceles triangles erected on the sides
adjacent to ``F_v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np

from .errors import DomainError, GeometryIntegrityError
from .geometry import (
    EllipseArc,
    arc_curvature,
    arc_derivative,
    arc_point,
    arc_tangent,
    ellipse_arclength,
)

FRAMES = ("generic", "hexagon")
_FRAME_ALIASES = {"generic": "generic", "hexagon": "hexagon", "hexagon-canonical": "hexagon"}

TOL_TANGENT = 1e-10
TOL_CURVATURE = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def string_length(n: int) -> float:
    """Length of the string giving a C^2 table over the regular n-gon of side 2."""
    if int(n) != n or n < 5:
        raise DomainError(f"the stellated construction needs n >= 5, got {n}")
    # correctly rounded cos(2 pi / n), so rational cosines (n = 6) stay exact
    with mpmath.workdps(40):
        c = float(mpmath.cos(2 * mpmath.pi / n))
    return 2.0 * (n - 1) + 2.0 / c


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Closed convex polygon, vertices counterclockwise.

    ``degenerate`` is set for fewer than three vertices or zero area (a point
    or a segment); ``empty`` marks an empty intersection.
    """

    vertices: np.ndarray
    degenerate: bool = False
    empty: bool = False

    @classmethod
    def from_points(cls, pts, tol: float = 1e-14) -> "ConvexPolygon":
        """Polygon from vertices already in boundary order (either orientation)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            return cls(_frozen(np.zeros((0, 2))), degenerate=True, empty=True)
        area = _signed_area(pts)
        if area < 0:
            pts = pts[::-1]
        degen = len(pts) < 3 or abs(area) <= tol
        return cls(_frozen(pts), degenerate=degen)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def area(self) -> float:
        return abs(_signed_area(self.vertices)) if len(self.vertices) >= 3 else 0.0

    @property
    def perimeter(self) -> float:
        v = self.vertices
        if len(v) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)))

    def edges(self):
        v = self.vertices
        return v, np.roll(v, -1, axis=0)

    def contains(self, p, tol: float = 0.0) -> bool:
        """True if ``p`` is inside or within ``tol`` of the polygon."""
        if self.empty:
            return False
        p = np.asarray(p, dtype=float)
        if len(self.vertices) < 3:
            return bool(_dist_to_polyline(self.vertices, p) <= tol)
        a, b = self.edges()
        e = b - a
        cross = e[:, 0] * (p[1] - a[:, 1]) - e[:, 1] * (p[0] - a[:, 0])
        return bool(np.all(cross / np.linalg.norm(e, axis=1) >= -tol))

    def boundary_samples(self, per_edge: int = 50) -> np.ndarray:
        v = self.vertices
        if len(v) == 0:
            return v
        if len(v) == 1:
            return v.copy()
        a, b = self.edges()
        s = np.linspace(0.0, 1.0, per_edge, endpoint=False)[:, None, None]
        return (a + s * (b - a)).reshape(-1, 2)

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist(), "degenerate": self.degenerate,
                "empty": self.empty}


def _signed_area(pts) -> float:
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _dist_to_polyline(v, p) -> float:
    if len(v) == 1:
        return float(np.linalg.norm(p - v[0]))
    a, b = v[0], v[1]
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance between two finite point sets."""
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


@dataclass(frozen=True, eq=False)
class StringTable:
    """The C^2 string billiard over a regular n-gon (side 2).

    ``foci[i]`` is F_{i+1} and ``apexes[i]`` is G_{i+1}; foci are labelled
    clockwise as in the construction.  ``arcs`` are ordered counterclockwise
    starting with the arc around F_3, and arc lengths ``s`` are measured
    counterclockwise from the origin point O, the midpoint of ``arcs[0]``.
    """

    n: int
    frame: str
    alpha: float
    d: float
    string_length: float
    foci: np.ndarray
    apexes: np.ndarray
    arcs: tuple[EllipseArc, ...]
    boundary_length: float
    side_length: float = 2.0
    # per-arc arrays for vectorised kernels
    arc_centers: np.ndarray = field(repr=False, default=None)
    arc_major: np.ndarray = field(repr=False, default=None)
    arc_minor: np.ndarray = field(repr=False, default=None)
    arc_a: np.ndarray = field(repr=False, default=None)
    arc_b: np.ndarray = field(repr=False, default=None)
    arc_t0: np.ndarray = field(repr=False, default=None)
    arc_t1: np.ndarray = field(repr=False, default=None)
    arc_lengths: np.ndarray = field(repr=False, default=None)
    arc_s0_unwrapped: np.ndarray = field(repr=False, default=None)
    arc_s0: np.ndarray = field(repr=False, default=None)
    origin_offset: float = 0.0

    @property
    def K(self) -> ConvexPolygon:
        """The focal polygon, counterclockwise."""
        return ConvexPolygon.from_points(self.foci[::-1])

    @property
    def origin(self) -> np.ndarray:
        arc = self.arcs[0]
        return arc_point(arc, arc.t_mid)

    @property
    def center(self) -> np.ndarray:
        return self.foci.mean(axis=0)

    @property
    def focal_sum(self) -> float:
        return 2.0 + 2.0 * self.d

    def focus(self, label: int) -> np.ndarray:
        """Focus F_label (1-based, indices taken mod n)."""
        return self.foci[(label - 1) % self.n]

    def arc_with_foci(self, i: int, j: int) -> int:
        """Index of the arc focused at F_i, F_j (order irrelevant)."""
        want = {(i - 1) % self.n + 1, (j - 1) % self.n + 1}
        for arc in self.arcs:
            if set(arc.foci_labels) == want:
                return arc.arc_id
        raise DomainError(f"no arc focused at F{i}, F{j}")

    def junction(self, j: int) -> np.ndarray:
        """Junction between arcs[j] (its end) and arcs[j + 1] (its start)."""
        arc = self.arcs[j % self.n]
        return arc_point(arc, arc.t_end)

    def sample_boundary(self, per_arc: int = 200) -> np.ndarray:
        """Boundary samples in counterclockwise order (each arc's end excluded)."""
        out = []
        for arc in self.arcs:
            t = np.linspace(arc.t_start, arc.t_end, per_arc, endpoint=False)
            out.append(arc_point(arc, t))
        return np.concatenate(out)

    def global_point(self, u):
        """Boundary point(s) at global parameter u in [0, n) (arc index + fraction)."""
        u = np.mod(np.asarray(u, dtype=float), self.n)
        j = np.minimum(np.floor(u).astype(int), self.n - 1)
        frac = u - j
        t = self.arc_t0[j] + frac * (self.arc_t1[j] - self.arc_t0[j])
        return j, t

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "frame": self.frame,
            "alpha": self.alpha,
            "d": self.d,
            "l": self.string_length,
            "foci": self.foci.tolist(),
            "apexes": self.apexes.tolist(),
            "arcs": [
                {
                    "arc_id": arc.arc_id,
                    "foci": list(arc.foci_labels),
                    "focal_sum": arc.focal_sum,
                    "t_start": arc.t_start,
                    "t_end": arc.t_end,
                    "transform": {"rotation": arc.rotation, "translation": list(arc.center)},
                    "semi_axes": [arc.a, arc.b],
                }
                for arc in self.arcs
            ],
            "boundary_length": self.boundary_length,
        }


def _canonical_param(center, u, w, a, b, p) -> float:
    q = np.asarray(p) - center
    return math.atan2(float(q @ w) / b, float(q @ u) / a)


_R3 = math.sqrt(3.0)
_HEX_FOCI = np.array([(-1.0, _R3), (1.0, _R3), (2.0, 0.0), (1.0, -_R3), (-1.0, -_R3), (-2.0, 0.0)])
_HEX_APEXES = np.array([(0.0, 2 * _R3), (3.0, _R3), (3.0, -_R3), (0.0, -2 * _R3),
                        (-3.0, -_R3), (-3.0, _R3)])


def _snap_hexagon(foci, apexes):
    # the rigid motion lands within rounding of the exact hexagon coordinates
    if not (np.allclose(foci, _HEX_FOCI, atol=1e-12) and np.allclose(apexes, _HEX_APEXES, atol=1e-12)):
        raise GeometryIntegrityError("hexagon frame does not reproduce the exact hexagon vertices")
    return _HEX_FOCI.copy(), _HEX_APEXES.copy()


def build_table(n: int, frame: str = "generic") -> StringTable:
    """Construct the C^2 string table over the regular n-gon.

    ``frame='generic'`` uses F_1 = (-1, 0), F_2 = (1, 0) with the polygon
    below the x-axis; ``frame='hexagon'`` (n = 6 only) translates the polygon
    centre to the origin so F_1 = (-1, sqrt 3), F_3 = (2, 0), ...
    """
    if frame not in _FRAME_ALIASES:
        raise DomainError(f"unknown frame {frame!r}")
    frame = _FRAME_ALIASES[frame]
    l = string_length(n)
    if frame == "hexagon" and n != 6:
        raise DomainError("the hexagon frame is only defined for n = 6")
    alpha = (n - 2) * math.pi / n
    d = (l - 2.0 * (n - 1)) / 2.0  # = -1 / cos(alpha), exact for n = 6
    apothem = 1.0 / math.tan(math.pi / n)
    circum = 1.0 / math.sin(math.pi / n)
    height = -math.tan(alpha)  # of the erected isosceles triangles
    shift = np.array([0.0, apothem]) if frame == "hexagon" else np.zeros(2)
    center = np.array([0.0, -apothem]) + shift
    idx = np.arange(n)
    phi = math.pi / 2 + math.pi / n - 2 * math.pi * idx / n
    foci = center + circum * np.column_stack([np.cos(phi), np.sin(phi)])
    psi = math.pi / 2 - 2 * math.pi * idx / n
    apexes = center + (apothem + height) * np.column_stack([np.cos(psi), np.sin(psi)])
    if frame == "generic":
        # exact values the construction pins down
        foci[0] = (-1.0, 0.0)
        foci[1] = (1.0, 0.0)
        apexes[0] = (0.0, -math.tan(alpha))
    else:
        foci, apexes = _snap_hexagon(foci, apexes)
    focal_sum = 2.0 + 2.0 * d

    def F(label):
        return foci[(label - 1) % n]

    def G(label):
        return apexes[(label - 1) % n]

    vertex_order = [((3 - 1 - j) % n) + 1 for j in range(n)]  # 3, 2, 1, n, ..., 4
    arcs = []
    for arc_id, v in enumerate(vertex_order):
        lo, hi = (v - 2) % n + 1, v % n + 1
        fa, fb = F(lo), F(hi)
        c0 = 0.5 * (fa + fb)
        w = F(v) - c0
        w = w / np.linalg.norm(w)
        u = np.array([w[1], -w[0]])
        a = focal_sum / 2
        c = np.linalg.norm(fb - fa) / 2
        b = math.sqrt(a * a - c * c)
        t0 = _canonical_param(c0, u, w, a, b, G(v))
        t1 = _canonical_param(c0, u, w, a, b, G(v - 1))
        if t1 < t0:
            t1 += 2 * math.pi
        arcs.append(EllipseArc(
            arc_id=arc_id, foci_labels=(lo, hi),
            focus_a=(float(fa[0]), float(fa[1])), focus_b=(float(fb[0]), float(fb[1])),
            focal_sum=focal_sum, t_start=t0, t_end=t1,
            center=(float(c0[0]), float(c0[1])), rotation=math.atan2(u[1], u[0]),
        ))
    arcs = tuple(arcs)
    arc_a = np.array([arc.a for arc in arcs])
    arc_b = np.array([arc.b for arc in arcs])
    arc_t0 = np.array([arc.t_start for arc in arcs])
    arc_t1 = np.array([arc.t_end for arc in arcs])
    lengths = np.asarray(ellipse_arclength(arc_a, arc_b, arc_t0, arc_t1), dtype=float)
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    L = float(lengths.sum())
    origin_offset = float(ellipse_arclength(arcs[0].a, arcs[0].b, arcs[0].t_start, arcs[0].t_mid))
    return StringTable(
        n=n, frame=frame, alpha=alpha, d=d, string_length=l,
        foci=_frozen(foci), apexes=_frozen(apexes), arcs=arcs, boundary_length=L,
        arc_centers=_frozen([arc.center for arc in arcs]),
        arc_major=_frozen([arc.u for arc in arcs]),
        arc_minor=_frozen([arc.w for arc in arcs]),
        arc_a=_frozen(arc_a), arc_b=_frozen(arc_b),
        arc_t0=_frozen(arc_t0), arc_t1=_frozen(arc_t1),
        arc_lengths=_frozen(lengths), arc_s0_unwrapped=_frozen(starts),
        arc_s0=_frozen(starts - origin_offset), origin_offset=origin_offset,
    )


@lru_cache(maxsize=None)
def hexagon_table() -> StringTable:
    """The hexagonal string table in its centred frame (shared, immutable)."""
    return build_table(6, "hexagon")


@dataclass(frozen=True)
class JunctionReport:
    index: int
    point: tuple[float, float]
    point_gap: float
    tangent_gap: float
    curvature_gap: float
    slope: tuple[float, float]
    second_derivative: tuple[float, float]
    passed: bool


@dataclass(frozen=True)
class SmoothnessReport:
    junctions: tuple[JunctionReport, ...]
    tol_tangent: float
    tol_curvature: float
    apex_slope: float | None = None
    apex_second_derivative: float | None = None
    apex_expected_second_derivative: float | None = None
    apex_passed: bool | None = None

    @property
    def passed(self) -> bool:
        return all(j.passed for j in self.junctions) and self.apex_passed is not False


def graph_derivatives(arc: EllipseArc, t: float) -> tuple[float, float]:
    """dy/dx and d^2y/dx^2 of the arc viewed locally as a graph y(x)."""
    d1 = arc_derivative(arc, t)
    # second derivative of P(t): -(P - C)
    d2 = -(arc_point(arc, t, check=False) - np.asarray(arc.center))
    xt, yt = d1
    xtt, ytt = d2
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(yt / xt), float((xt * ytt - yt * xtt) / xt**3)


def apex_second_derivative(alpha: float) -> float:
    """Closed-form y'' of the boundary at the apex G_1 in the generic frame."""
    ca = math.cos(alpha)
    return (ca - 1.0) * ca * math.sin(alpha) / (-1.0 + 2.0 * ca)


def verify_c2(table: StringTable, tol_tangent: float = TOL_TANGENT,
              tol_curvature: float = TOL_CURVATURE) -> SmoothnessReport:
    """Check point, tangent and curvature continuity at every arc junction."""
    reports = []
    n = table.n
    for j in range(n):
        left = table.arcs[j]
        right = table.arcs[(j + 1) % n]
        p_l = arc_point(left, left.t_end)
        p_r = arc_point(right, right.t_start)
        tg = float(np.linalg.norm(arc_tangent(left, left.t_end) - arc_tangent(right, right.t_start)))
        kg = abs(float(arc_curvature(left, left.t_end) - arc_curvature(right, right.t_start)))
        pg = float(np.linalg.norm(p_l - p_r))
        sl, ddl = graph_derivatives(left, left.t_end)
        sr, ddr = graph_derivatives(right, right.t_start)
        reports.append(JunctionReport(
            index=j, point=(float(p_l[0]), float(p_l[1])), point_gap=pg,
            tangent_gap=tg, curvature_gap=kg, slope=(sl, sr), second_derivative=(ddl, ddr),
            passed=pg <= 1e-12 and tg <= tol_tangent and kg <= tol_curvature))
    extra = {}
    if table.frame == "generic":
        # G_1 closes the arc around F_2 and opens the arc around F_1
        j = table.arc_with_foci(1, 3)
        rep = reports[j]
        expected = apex_second_derivative(table.alpha)
        extra = dict(
            apex_slope=rep.slope[0],
            apex_second_derivative=rep.second_derivative[0],
            apex_expected_second_derivative=expected,
            apex_passed=(max(abs(s) for s in rep.slope) <= tol_tangent
                         and max(abs(v - expected) for v in rep.second_derivative) <= tol_curvature),
        )
    return SmoothnessReport(tuple(reports), tol_tangent, tol_curvature, **extra)


def curvature_range(table: StringTable, samples_per_arc: int = 64) -> tuple[float, float]:
    """Minimum and maximum boundary curvature.

    Dense samples are combined with the analytic critical points of each arc
    (its midpoint, where kappa is smallest, and its endpoints).
    """
    if samples_per_arc < 2:
        raise DomainError("samples_per_arc must be at least 2")
    kmin, kmax = math.inf, -math.inf
    for arc in table.arcs:
        t = np.concatenate([np.linspace(arc.t_start, arc.t_end, samples_per_arc),
                            [arc.t_mid]])
        if arc.t_start <= math.pi / 2 <= arc.t_end:
            t = np.append(t, math.pi / 2)
        k = arc_curvature(arc, t)
        kmin = min(kmin, float(k.min()))
        kmax = max(kmax, float(k.max()))
    return kmin, kmax
