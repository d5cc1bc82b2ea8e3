"""Orbit taxonomy: focal / inner / outer chords, focal-orbit diagnostics and
forbidden inner regions.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Trajectory
from .errors import DomainError
from .geometry import invert_arc_length
from .table import ConvexPolygon, StringTable, hausdorff

TOL_SUPPORT = 1e-9
CONVERGENCE_TOL = 1e-6

SUPPORTING = "supporting"
INTERSECTING = "intersecting"
DISJOINT = "disjoint"

FOCAL = "focal"
INNER = "inner"
OUTER = "outer"
MIXED = "mixed-error"

_ORBIT_TAG = {SUPPORTING: FOCAL, INTERSECTING: INNER, DISJOINT: OUTER}

SQRT3 = math.sqrt(3.0)
# limiting triangle of focal orbits through F2, F6, F4 (hexagon frame)
S1 = np.array([0.0, 2 * SQRT3])
S3 = np.array([3.0, -SQRT3])
S5 = np.array([-3.0, -SQRT3])
# chords cycling F2 -> F4 -> F6 close on the mirror image S2 S4 S6
LIMIT_TRIANGLES = {"S1S5S3": np.array([S1, S5, S3]), "S2S4S6": -np.array([S1, S5, S3])}


@dataclass(frozen=True)
class SegmentClass:
    tag: str
    witness: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OrbitClass:
    tag: str
    segment_tags: tuple[str, ...]
    consistent: bool
    offending_index: int | None = None
    tol_support: float = TOL_SUPPORT

    @property
    def histogram(self) -> dict:
        return dict(Counter(self.segment_tags))

    def to_dict(self) -> dict:
        return {"tag": self.tag, "consistent": self.consistent,
                "offending_index": self.offending_index, "histogram": self.histogram,
                "tol_support": self.tol_support, "segments": len(self.segment_tags)}


def _line_distances(p, q, vertices):
    """Signed distances of ``vertices`` from the lines p->q; shape (m, V)."""
    p = np.atleast_2d(p)
    q = np.atleast_2d(q)
    e = q - p
    length = np.linalg.norm(e, axis=1)
    if np.any(length < 1e-14):
        raise DomainError("degenerate segment")
    e = e / length[:, None]
    nrm = np.stack([-e[:, 1], e[:, 0]], axis=1)
    rel = vertices[None, :, :] - p[:, None, :]
    return np.einsum("mvj,mj->mv", rel, nrm)


def _tags(dist, tol):
    lo = dist.min(axis=1)
    hi = dist.max(axis=1)
    crosses = (lo < -tol) & (hi > tol)
    touches = np.abs(dist).min(axis=1) < tol
    return np.where(crosses, INTERSECTING, np.where(touches, SUPPORTING, DISJOINT))


def _clip_line(p, e, poly: ConvexPolygon):
    """Parameter interval of the line p + s e inside ``poly`` (Cyrus-Beck)."""
    a, b = poly.edges()
    lo, hi = -math.inf, math.inf
    for v0, v1 in zip(a, b):
        edge = v1 - v0
        inward = np.array([-edge[1], edge[0]])
        den = inward @ e
        num = inward @ (p - v0)
        if abs(den) < 1e-300:
            if num < 0:
                return None
            continue
        s = -num / den
        if den > 0:
            lo = max(lo, s)
        else:
            hi = min(hi, s)
    return (lo, hi) if lo <= hi else None


def classify_segment(segment, K: ConvexPolygon, tol_support: float = TOL_SUPPORT) -> SegmentClass:
    """Classify the line through ``segment`` against the convex polygon ``K``.

    Chords of the table have both ends on the boundary, outside ``K``, so the
    chord and its line meet ``K`` in the same set.
    """
    p, q = (np.asarray(x, dtype=float) for x in segment)
    dist = _line_distances(p, q, K.vertices)[0]
    tag = str(_tags(dist[None], tol_support)[0])
    if tag == SUPPORTING:
        i = int(np.argmin(np.abs(dist)))
        return SegmentClass(tag, {"vertex_index": i, "vertex": K.vertices[i].tolist(),
                                  "distance": float(abs(dist[i]))})
    if tag == INTERSECTING:
        e = (q - p) / np.linalg.norm(q - p)
        lo, hi = _clip_line(p, e, K)
        mid = p + 0.5 * (lo + hi) * e
        return SegmentClass(tag, {"point": mid.tolist(), "depth": float(min(-dist.min(), dist.max()))})
    return SegmentClass(tag, {"clearance": float(np.abs(dist).min())})


def segment_tags(segments, K: ConvexPolygon, tol_support: float = TOL_SUPPORT) -> np.ndarray:
    segments = np.asarray(segments, dtype=float)
    dist = _line_distances(segments[:, 0], segments[:, 1], K.vertices)
    return _tags(dist, tol_support)


def classify_orbit(trajectory: Trajectory, K: ConvexPolygon | None = None,
                   tol_support: float = TOL_SUPPORT) -> OrbitClass:
    """Common class of all chords, or ``mixed-error`` naming the first odd one out."""
    if K is None:
        K = trajectory.table.K
    tags = segment_tags(trajectory.segments(), K, tol_support)
    first = tags[0]
    odd = np.flatnonzero(tags != first)
    if odd.size:
        return OrbitClass(MIXED, tuple(tags.tolist()), False, int(odd[0]), tol_support)
    return OrbitClass(_ORBIT_TAG[str(first)], tuple(tags.tolist()), True, None, tol_support)


def focal_angle_of_height(y: float) -> float:
    """Angle between incoming and outgoing chords of a focal bounce at height y
    on the arc focused at F2, F4: arccos((y^2 + 9) / (27 - y^2))."""
    if abs(y) > SQRT3 * (1 + 1e-12):
        raise DomainError(f"height {y} is off the arc (|y| <= sqrt 3)")
    return math.acos(min(1.0, (y * y + 9.0) / (27.0 - y * y)))


def measured_focal_angles(trajectory: Trajectory) -> np.ndarray:
    """Angle between the reversed incoming ray and the outgoing ray at each impact."""
    c = -np.einsum("ij,ij->i", trajectory.incoming, trajectory.outgoing)
    return np.arccos(np.clip(c, -1.0, 1.0))


def _angle(a, vertex, b) -> float:
    u = a - vertex
    v = b - vertex
    return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), float(u @ v))


def _nearest_focus(table: StringTable, p, q, tol: float, labels=None):
    labels = np.arange(1, table.n + 1) if labels is None else np.asarray(labels)
    dist = np.abs(_line_distances(p, q, table.foci[labels - 1])[0])
    i = int(np.argmin(dist))
    return (int(labels[i]), float(dist[i])) if dist[i] < tol else (None, float(dist[i]))


@dataclass(frozen=True)
class FocalConvergenceSeries:
    """Per-bounce quantities of a focal orbit.

    ``s`` is the distance from the impact to the focus the outgoing chord
    passes through, ``t = 6 - s`` the distance to the incoming focus, ``phi``
    the angle at the incoming focus between the focal side and the impact,
    and ``alpha`` the angle at the impact between the two focal rays.
    """

    s: np.ndarray
    t: np.ndarray
    phi: np.ndarray
    alpha: np.ndarray
    foci_in: np.ndarray
    foci_out: np.ndarray
    converged_at: int | None
    final_triangle_distance: float
    limit_triangle: str = "S1S5S3"

    @property
    def limits(self) -> dict:
        return {"s": float(self.s[-1]), "phi": float(self.phi[-1]),
                "alpha": float(self.alpha[-1])}

    def check_bounds(self, slack: float = 1e-12) -> dict:
        """The bounds and monotonicity the sequences obey."""
        s, phi, alpha = self.s, self.phi, self.alpha
        return {
            "s_bounds": bool(np.all((s >= 2 - slack) & (s <= 4 + slack))),
            "phi_bounds": bool(np.all((phi >= math.pi / 6 - slack) & (phi <= math.pi / 2 + slack))),
            "alpha_bounds": bool(np.all((alpha >= math.pi / 3 - slack)
                                        & (alpha <= math.acos(1 / 3) + slack))),
            "phi_nondecreasing": bool(np.all(np.diff(phi) >= -slack)),
            "s_nondecreasing": bool(np.all(np.diff(s) >= -slack)),
        }


def focal_convergence(trajectory: Trajectory, tol: float = TOL_SUPPORT,
                      converge_tol: float = CONVERGENCE_TOL) -> FocalConvergenceSeries:
    """Extract the s, phi, alpha sequences of a focal orbit on the hexagon table.

    Requires the chords to cycle through the even foci.  The cycle F2, F6, F4
    closes on S1 S5 S3 with S1 = (0, 2 sqrt 3); the reverse cycle on S2 S4 S6.
    """
    table = trajectory.table
    if table.n != 6 or table.frame != "hexagon":
        raise DomainError("focal convergence is defined on the hexagon table")
    P0 = np.vstack([trajectory.start, trajectory.points])
    D0 = np.vstack([trajectory.start_direction, trajectory.outgoing])
    # near the limit triangle each chord line also grazes an odd focus, so
    # only the even ones are candidates
    foci = []
    for k, (p, d) in enumerate(zip(P0, D0)):
        lab, dist = _nearest_focus(table, p, p + d, tol, labels=(2, 4, 6))
        if lab is None:
            raise DomainError(f"chord {k} misses F2, F4, F6 by {dist:.3e}; orbit is not focal")
        foci.append(lab)
    repeats = np.flatnonzero(np.diff(foci) == 0)
    if repeats.size:
        raise DomainError(f"chords {repeats[0]} and {repeats[0] + 1} share focus F{foci[repeats[0]]}; "
                          "orbit is not focal")
    m = len(trajectory)
    s = np.empty(m)
    phi = np.empty(m)
    alpha = np.empty(m)
    f_in = np.array(foci[:m])
    f_out = np.array(foci[1:m + 1])
    for i in range(m):
        P = trajectory.points[i]
        Fi = table.focus(f_in[i])
        Fo = table.focus(f_out[i])
        s[i] = np.linalg.norm(P - Fo)
        phi[i] = _angle(Fo, Fi, P)
        alpha[i] = _angle(Fi, P, Fo)
    t = table.focal_sum - s
    close = np.flatnonzero(np.abs(phi - math.pi / 2) < converge_tol)
    last = trajectory.points[-3:]
    name = "S1S5S3" if (f_out[0] - f_in[0]) % 6 == 4 else "S2S4S6"
    return FocalConvergenceSeries(s, t, phi, alpha, f_in, f_out,
                                  int(close[0]) if close.size else None,
                                  hausdorff(last, LIMIT_TRIANGLES[name]), name)


def chord_length_law(phi):
    """s as a function of phi for focal chords: (4 sqrt3 - 6 cos phi) / (sqrt3 - cos phi)."""
    c = np.cos(phi)
    return (4 * SQRT3 - 6 * c) / (SQRT3 - c)


# --- forbidden inner regions -------------------------------------------------

@dataclass(frozen=True)
class ForbiddenRegion:
    polygon: ConvexPolygon
    segment_count: int
    orientation: str
    areas: tuple[float, ...] = ()

    @property
    def empty(self) -> bool:
        return self.polygon.empty

    def to_dict(self) -> dict:
        d = self.polygon.to_dict()
        d.update(segment_count=self.segment_count, orientation=self.orientation,
                 area=self.polygon.area)
        return d


def clip_halfplane(poly: np.ndarray, p, e, eps: float = 0.0) -> np.ndarray:
    """Clip a ccw convex polygon to the half-plane left of the directed line p + s e."""
    if len(poly) == 0:
        return poly
    side = e[0] * (poly[:, 1] - p[1]) - e[1] * (poly[:, 0] - p[0])
    if np.all(side >= -eps):
        return poly
    if np.all(side < -eps):
        return poly[:0]
    out = []
    m = len(poly)
    for i in range(m):
        a, b = poly[i], poly[(i + 1) % m]
        sa, sb = side[i], side[(i + 1) % m]
        if sa >= -eps:
            out.append(a)
        if (sa >= -eps) != (sb >= -eps):
            r = sa / (sa - sb)
            out.append(a + r * (b - a))
    res = np.array(out).reshape(-1, 2)
    # drop repeated vertices
    if len(res) > 1:
        keep = np.linalg.norm(res - np.roll(res, 1, axis=0), axis=1) > 1e-14
        res = res[keep] if keep.any() else res[:1]
    return res


def winding_orientation(trajectory: Trajectory) -> str:
    """'ccw' if the chord directions turn counterclockwise in total, else 'cw'."""
    d = np.concatenate([[trajectory.start_direction], trajectory.outgoing])
    cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
    dot = np.einsum("ij,ij->i", d[:-1], d[1:])
    return "ccw" if np.sum(np.arctan2(cross, dot)) >= 0 else "cw"


def forbidden_region(trajectory: Trajectory, orientation: str = "auto",
                     keep_history: bool = False) -> ForbiddenRegion:
    """Intersection of the half-planes on the winding side of every chord line."""
    segs = trajectory.segments(include_start=False)
    if len(segs) < 3:
        raise DomainError("need at least three chords")
    if orientation == "auto":
        orientation = winding_orientation(trajectory)
    if orientation not in ("ccw", "cw"):
        raise DomainError(f"orientation must be auto, ccw or cw, not {orientation!r}")
    box = trajectory.table.sample_boundary(64)
    lo = box.min(axis=0) - 1.0
    hi = box.max(axis=0) + 1.0
    poly = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    areas = []
    for p, q in segs:
        e = q - p
        e = e / np.linalg.norm(e)
        if orientation == "cw":
            e = -e
        poly = clip_halfplane(poly, p, e)
        if keep_history:
            areas.append(ConvexPolygon.from_points(poly).area if len(poly) else 0.0)
        if len(poly) == 0:
            break
    polygon = ConvexPolygon.from_points(poly)
    return ForbiddenRegion(polygon, len(segs), orientation, tuple(areas))


def support_gaps(region: ConvexPolygon, segments) -> np.ndarray:
    """Per-line gap to the region: 0 when touching, > 0 when missing it, < 0
    (minus the penetration depth) when cutting through it."""
    segs = np.asarray(segments, dtype=float)
    dist = _line_distances(segs[:, 0], segs[:, 1], region.vertices)
    lo = dist.min(axis=1)
    hi = dist.max(axis=1)
    return np.where(lo >= 0, lo, np.where(hi <= 0, -hi, -np.minimum(hi, -lo)))


def is_caustic(region: ConvexPolygon, trajectory: Trajectory, tol: float = TOL_SUPPORT):
    """True iff every chord line supports ``region`` within ``tol``; also returns the gaps."""
    if region.empty:
        return False, np.array([])
    gaps = support_gaps(region, trajectory.segments())
    return bool(np.all(np.abs(gaps) <= tol)), gaps


def focal_starts(table: StringTable, label: int, count: int, rng: np.random.Generator,
                 margin: float = 1e-3) -> np.ndarray:
    """Random boundary points whose line through focus ``label`` supports K.

    Points whose line passes within ``margin`` of another vertex of K are
    skipped, so the launch is unambiguous.
    """
    F = table.focus(label)
    K = table.K.vertices
    others = np.array([i for i in range(len(K)) if np.linalg.norm(K[i] - F) > 1e-12])
    out = []
    while len(out) < count:
        s = rng.uniform(0.0, table.boundary_length, size=4 * count)
        for v in s:
            p = np.array(invert_arc_length(table, float(v)).point)
            if np.linalg.norm(p - F) < 1e-6:
                continue
            d = _line_distances(p, F, K[others])[0]
            if (np.all(d > margin) or np.all(d < -margin)):
                out.append(p)
                if len(out) == count:
                    break
    return np.array(out)
