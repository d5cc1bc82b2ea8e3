"""The billiard map: specular reflection and trajectory tracing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GrazingError
from .geometry import DEFAULT_T_MIN, BoundaryPoint, boundary_s, intersect_many, invert_arc_length
from .table import StringTable

GRAZING_TOL = 1e-12


def frame_at(table: StringTable, arc_id, t):
    """Unit ccw tangent and inward normal at boundary parameter(s)."""
    arc_id = np.asarray(arc_id)
    t = np.asarray(t, dtype=float)
    a = table.arc_a[arc_id][..., None]
    b = table.arc_b[arc_id][..., None]
    U = table.arc_major[arc_id]
    W = table.arc_minor[arc_id]
    T = -a * np.sin(t)[..., None] * U + b * np.cos(t)[..., None] * W
    T = T / np.linalg.norm(T, axis=-1, keepdims=True)
    N = np.stack([-T[..., 1], T[..., 0]], axis=-1)
    return T, N


def _reflect_many(table, arc_id, t, incoming):
    T, N = frame_at(table, arc_id, t)
    dn = np.einsum("ij,ij->i", incoming, N)
    if np.any(np.abs(dn) < GRAZING_TOL):
        bad = int(np.flatnonzero(np.abs(dn) < GRAZING_TOL)[0])
        raise GrazingError(f"ray {bad} grazes the boundary (normal component {dn[bad]:.3e})")
    out = incoming - 2.0 * dn[:, None] * N
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    theta = np.arctan2(np.einsum("ij,ij->i", out, N), np.einsum("ij,ij->i", out, T))
    return out, theta, dn


def reflect(table: StringTable, at: BoundaryPoint, incoming) -> np.ndarray:
    """Specular image of ``incoming`` at the boundary point ``at``."""
    incoming = np.asarray(incoming, dtype=float)
    _T, N = frame_at(table, at.arc_id, at.t)
    if incoming @ N > 0:
        raise DomainError("incoming direction must point out of the table at the impact")
    out, _theta, _dn = _reflect_many(table, np.array([at.arc_id]), np.array([at.t]),
                                     incoming[None, :])
    return out[0]


@dataclass(frozen=True)
class Bounce:
    """One boundary impact.  ``theta`` is measured from the ccw tangent to ``outgoing``."""

    at: BoundaryPoint
    incoming: tuple[float, float]
    outgoing: tuple[float, float]
    theta: float
    chord_length: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A traced trajectory stored column-wise, one row per impact."""

    table: StringTable
    start: np.ndarray
    start_direction: np.ndarray
    arc_id: np.ndarray
    t: np.ndarray
    points: np.ndarray
    incoming: np.ndarray
    outgoing: np.ndarray
    theta: np.ndarray
    s: np.ndarray
    chord_lengths: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def n_bounces(self) -> int:
        return len(self.t)

    def bounce(self, i: int) -> Bounce:
        p = self.points[i]
        return Bounce(
            at=BoundaryPoint(int(self.arc_id[i]), float(self.t[i]), (float(p[0]), float(p[1])),
                             float(self.s[i])),
            incoming=tuple(map(float, self.incoming[i])),
            outgoing=tuple(map(float, self.outgoing[i])),
            theta=float(self.theta[i]),
            chord_length=float(self.chord_lengths[i]),
        )

    @property
    def bounces(self) -> list[Bounce]:
        return [self.bounce(i) for i in range(len(self))]

    def segments(self, include_start: bool = True) -> np.ndarray:
        """Chord endpoints, shape (m, 2, 2): start->P1 (optional) and P_i->P_{i+1}."""
        pts = self.points
        segs = np.stack([pts[:-1], pts[1:]], axis=1)
        if include_start:
            first = np.stack([self.start, pts[0]])[None]
            segs = np.concatenate([first, segs])
        return segs

    def rows(self):
        """(index, arc_id, t, x, y, s, theta, chord_length) per bounce."""
        for i in range(len(self)):
            yield (i, int(self.arc_id[i]), float(self.t[i]), float(self.points[i, 0]),
                   float(self.points[i, 1]), float(self.s[i]), float(self.theta[i]),
                   float(self.chord_lengths[i]))


def trace_many(table: StringTable, starts, directions, n_bounces: int,
               t_min: float = DEFAULT_T_MIN, metadata: dict | None = None) -> list[Trajectory]:
    """Trace a batch of trajectories in lock-step (vectorised over the batch)."""
    if n_bounces < 1:
        raise DomainError("n_bounces must be at least 1")
    P = np.array(np.atleast_2d(starts), dtype=float)
    D = np.array(np.atleast_2d(directions), dtype=float)
    if P.shape != D.shape:
        raise DomainError("starts and directions must have matching shapes")
    norms = np.linalg.norm(D, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise DomainError("directions must be unit vectors")
    D /= norms[:, None]
    N = len(P)
    arc = np.empty((N, n_bounces), dtype=int)
    tt = np.empty((N, n_bounces))
    pts = np.empty((N, n_bounces, 2))
    inc = np.empty((N, n_bounces, 2))
    out = np.empty((N, n_bounces, 2))
    theta = np.empty((N, n_bounces))
    chords = np.empty((N, n_bounces))
    starts0, dirs0 = P.copy(), D.copy()
    for k in range(n_bounces):
        j, t, hit, lam = intersect_many(table, P, D, t_min)
        if k > 0:
            chords[:, k - 1] = lam
        o, th, _ = _reflect_many(table, j, t, D)
        arc[:, k], tt[:, k], pts[:, k], inc[:, k], out[:, k], theta[:, k] = j, t, hit, D, o, th
        P, D = hit, o
    # length of the chord leaving the final impact
    _j, _t, _hit, lam = intersect_many(table, P, D, t_min)
    chords[:, -1] = lam
    s = boundary_s(table, arc, tt)
    meta = dict(metadata or {})
    meta.setdefault("n_bounces", n_bounces)
    return [
        Trajectory(table, starts0[i], dirs0[i], arc[i], tt[i], pts[i], inc[i], out[i],
                   theta[i], s[i], chords[i], dict(meta))
        for i in range(N)
    ]


def trace(table: StringTable, start_point, direction, n_bounces: int,
          t_min: float = DEFAULT_T_MIN) -> Trajectory:
    """Trace ``n_bounces`` impacts from ``start_point`` along ``direction``."""
    return trace_many(table, [start_point], [direction], n_bounces, t_min)[0]


def trace_focal(table: StringTable, start_point, through: int, n_bounces: int,
                t_min: float = DEFAULT_T_MIN) -> Trajectory:
    """Trace a focal trajectory with every chord aimed exactly through a focus.

    The first chord runs from ``start_point`` through ``F_through``.  Each chord
    through a focus lands on one of the two arcs having that focus, and by the
    reflective property of the ellipse the reflected chord passes through the
    arc's other focus; here that chord is aimed at the focus directly.  Plain
    tracing doubles the focal miss distance roughly every bounce near the
    limiting triangle, so long focal runs need this constraint.  The specular
    defect of each constructed reflection is recorded in ``metadata``.
    """
    if n_bounces < 1:
        raise DomainError("n_bounces must be at least 1")
    P = np.asarray(start_point, dtype=float)
    label = (through - 1) % table.n + 1
    F = table.focus(label)
    D = (F - P) / np.linalg.norm(F - P)
    start, d0 = P.copy(), D.copy()
    arc = np.empty(n_bounces, dtype=int)
    tt = np.empty(n_bounces)
    pts = np.empty((n_bounces, 2))
    inc = np.empty((n_bounces, 2))
    out = np.empty((n_bounces, 2))
    theta = np.empty(n_bounces)
    chords = np.empty(n_bounces)
    foci_seq = np.empty(n_bounces, dtype=int)
    max_defect = 0.0
    for k in range(n_bounces + 1):
        candidates = [a.arc_id for a in table.arcs if label in a.foci_labels]
        j, t, hit, lam = intersect_many(table, P[None], D[None], t_min,
                                        arc_subset=candidates, range_tol=1e-7)
        if k > 0:
            chords[k - 1] = lam[0]
        if k == n_bounces:
            break
        j = int(j[0])
        fa, fb = table.arcs[j].foci_labels
        label = fb if fa == label else fa
        F = table.focus(label)
        o = F - hit[0]
        o /= np.linalg.norm(o)
        Tn, Nn = frame_at(table, j, t[0])
        specular = D - 2.0 * (D @ Nn) * Nn
        max_defect = max(max_defect, float(np.linalg.norm(specular - o)))
        arc[k], tt[k], pts[k], inc[k], out[k] = j, t[0], hit[0], D, o
        theta[k] = np.arctan2(o @ Nn, o @ Tn)
        foci_seq[k] = label
        P, D = hit[0], o
    s = boundary_s(table, arc, tt)
    meta = {"n_bounces": n_bounces, "focal": True, "first_focus": (through - 1) % table.n + 1,
            "outgoing_foci": foci_seq.tolist(), "max_specular_defect": max_defect}
    return Trajectory(table, start, d0, arc, tt, pts, inc, out, theta, s, chords, meta)


def boundary_coordinates(bounce: Bounce) -> tuple[float, float]:
    """Section coordinates (s, theta) of a bounce."""
    return bounce.at.s, bounce.theta


def launch(table: StringTable, s, theta):
    """Boundary point(s) and outgoing direction(s) for section coordinates (s, theta)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    bps = [invert_arc_length(table, float(v % table.boundary_length)) for v in s]
    arc_id = np.array([bp.arc_id for bp in bps])
    t = np.array([bp.t for bp in bps])
    T, N = frame_at(table, arc_id, t)
    pts = np.array([bp.point for bp in bps])
    dirs = np.cos(theta)[:, None] * T + np.sin(theta)[:, None] * N
    return pts, dirs


def trace_section(table: StringTable, s, theta, n_bounces: int, **kw) -> list[Trajectory]:
    """Trace trajectories leaving the boundary at section coordinates (s, theta)."""
    pts, dirs = launch(table, s, theta)
    return trace_many(table, pts, dirs, n_bounces, **kw)
