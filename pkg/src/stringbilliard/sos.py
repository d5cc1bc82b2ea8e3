"""Poincare surface-of-section datasets and the focal reference curve."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.spatial import cKDTree

from .dynamics import Trajectory
from .errors import DomainError
from .geometry import incomplete_elliptic_e

REDUCTIONS = ("full", "upper-half", "fundamental")
FOCAL_MODULUS = math.sqrt(3.0) / 3.0
FOCAL_Y_MIN = math.acos(-1.0 / 3.0) / 2.0
FOCAL_Y_MAX = math.acos(-0.5) / 2.0
# semi-major axis of the hexagon arcs; converts the curve to table arc length
FOCAL_SCALE = 3.0
THICKNESS_WINDOW = 25
THICKNESS_LIMIT = 1e-3


@dataclass(frozen=True, eq=False)
class SectionDataset:
    s: np.ndarray
    theta: np.ndarray
    traj_id: np.ndarray
    bounce: np.ndarray
    reduction: str
    boundary_length: float

    def __len__(self) -> int:
        return len(self.s)

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.s, self.theta])

    def trajectory(self, i: int) -> np.ndarray:
        m = self.traj_id == i
        return np.column_stack([self.s[m], self.theta[m]])

    @property
    def trajectory_ids(self) -> np.ndarray:
        return np.unique(self.traj_id)

    def rows(self):
        for i in range(len(self)):
            yield int(self.traj_id[i]), int(self.bounce[i]), float(self.s[i]), float(self.theta[i])


def reduce_points(s, theta, L: float, reduction: str):
    s = np.asarray(s, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if reduction not in REDUCTIONS:
        raise DomainError(f"reduction must be one of {REDUCTIONS}")
    if reduction in ("upper-half", "fundamental"):
        theta = np.minimum(theta, math.pi - theta)
    if reduction == "fundamental":
        s = np.mod(s, L / 6.0)
    return s, theta


def build_section(trajectories: list[Trajectory], reduction: str = "full") -> SectionDataset:
    """Project every bounce of every trajectory to (s, theta)."""
    if not trajectories:
        return SectionDataset(np.empty(0), np.empty(0), np.empty(0, int), np.empty(0, int),
                              reduction, float("nan"))
    table = trajectories[0].table
    if any(tr.table is not table for tr in trajectories[1:]):
        raise DomainError("trajectories come from different tables")
    L = table.boundary_length
    s = np.concatenate([tr.s for tr in trajectories])
    th = np.concatenate([tr.theta for tr in trajectories])
    ids = np.concatenate([np.full(len(tr), i) for i, tr in enumerate(trajectories)])
    idx = np.concatenate([np.arange(len(tr)) for tr in trajectories])
    s, th = reduce_points(s, th, L, reduction)
    return SectionDataset(s, th, ids, idx, reduction, L)


# --- focal reference curve ------------------------------------------------------

def focal_curve_argument(y: float) -> float:
    """sqrt((1 + 3 cos 2y)(-1 + cos 2y)) / (1 - cos 2y)."""
    c = math.cos(2 * y)
    return math.sqrt(max(0.0, (1 + 3 * c) * (-1 + c))) / (1 - c)


def focal_reference_curve(y: float, scale: float = 1.0) -> tuple[float, float]:
    """Point (scale * E(x(y), sqrt3/3), y) of the focal curve.

    With ``scale`` 1 this is the bare elliptic-integral expression; focal
    section points measured in table arc length from an arc midpoint follow
    it with ``scale = FOCAL_SCALE``.
    """
    slack = 1e-12
    if not FOCAL_Y_MIN - slack <= y <= FOCAL_Y_MAX + slack:
        raise DomainError(f"y = {y} outside [{FOCAL_Y_MIN}, {FOCAL_Y_MAX}]")
    y = min(max(y, FOCAL_Y_MIN), FOCAL_Y_MAX)
    return scale * incomplete_elliptic_e(focal_curve_argument(y), FOCAL_MODULUS), y


def focal_curve_samples(count: int = 400, scale: float = FOCAL_SCALE) -> np.ndarray:
    ys = np.linspace(FOCAL_Y_MIN, FOCAL_Y_MAX, count)
    return np.array([focal_reference_curve(y, scale) for y in ys])


def focal_curve_images(L: float, offset: float = 0.0, count: int = 200,
                       scale: float = FOCAL_SCALE, upper_only: bool = False) -> list[np.ndarray]:
    """Copies of the focal curve under the six-fold and mirror symmetries, in (s, theta)."""
    base = focal_curve_samples(count, scale)
    out = []
    for j in range(6):
        c = offset + j * L / 6
        for sign in (1.0, -1.0):
            for flip in ((False,) if upper_only else (False, True)):
                th = math.pi - base[:, 1] if flip else base[:, 1]
                s = c + sign * base[:, 0]
                s -= L * math.floor(np.mean(s) / L)  # whole piece near [0, L)
                out.append(np.column_stack([s, th]))
    return out


@dataclass(frozen=True)
class CurveMatch:
    offset: float
    max_residual: float
    n_points: int
    flagged: bool

    def to_dict(self) -> dict:
        return {"offset": self.offset, "max_residual": self.max_residual,
                "n_points": self.n_points, "flagged": self.flagged}


def _curve_residuals(s, theta, L, offset, scale):
    """Vertical distance from each point to the nearest symmetry image of the curve.

    Images: L/6 translates, mirror in s about each copy, theta -> pi - theta.
    Points whose folded theta falls outside the curve's range get the
    distance to the range instead.
    """
    sig = np.abs(np.mod(s - offset + L / 12, L / 6) - L / 12)
    th = np.minimum(theta, math.pi - theta)
    s_end = focal_reference_curve(FOCAL_Y_MAX, scale)[0]
    res = np.empty(len(sig))
    for i, (x, y) in enumerate(zip(sig, th)):
        if x >= s_end:
            res[i] = math.hypot(x - s_end, y - FOCAL_Y_MAX)
            continue
        y_pred = optimize.brentq(lambda v: focal_reference_curve(v, scale)[0] - x,
                                 FOCAL_Y_MIN, FOCAL_Y_MAX, xtol=1e-15)
        res[i] = abs(y - y_pred)
    return res


def match_focal_curve(section: SectionDataset, scale: float = FOCAL_SCALE,
                      flag_above: float = 1e-6, refine: bool = True) -> CurveMatch:
    """Best s-translation of the curve family onto the section; max residual.

    The discrete candidates are the arc midpoints and junctions (multiples of
    L/12); a bounded scalar search within +-L/12 of the best one refines it.
    """
    if len(section) == 0:
        return CurveMatch(0.0, 0.0, 0, False)
    if section.reduction == "fundamental":
        raise DomainError("match on a full or upper-half section")
    L = section.boundary_length
    s, th = section.s, section.theta
    cost = lambda off: float(np.max(_curve_residuals(s, th, L, off, scale)))
    cands = [j * L / 12 for j in range(2)]
    best = min(cands, key=cost)
    best_cost = cost(best)
    if refine and best_cost > 1e-12:
        r = optimize.minimize_scalar(cost, bounds=(best - L / 12, best + L / 12), method="bounded",
                                     options={"xatol": 1e-12})
        if r.fun < best_cost:
            best, best_cost = float(r.x), float(r.fun)
    return CurveMatch(float(best), best_cost, len(section), best_cost > flag_above)


# --- curve thickness (no area filling) ------------------------------------------------

@dataclass(frozen=True)
class ThicknessReport:
    traj_id: int
    thickness: float
    limit: float
    distinct_points: int
    periodic: bool
    extended_thickness: float | None = None
    extended_bounces: int = 0

    @property
    def passed(self) -> bool:
        return self.periodic or self.thickness < self.limit

    @property
    def passed_extended(self) -> bool:
        """Passed, or passed once re-run on a longer trajectory."""
        return self.passed or (self.extended_thickness is not None
                               and self.extended_thickness < self.limit)

    def to_dict(self) -> dict:
        return {"traj_id": self.traj_id, "thickness": self.thickness, "limit": self.limit,
                "distinct_points": self.distinct_points, "periodic": self.periodic,
                "passed": self.passed, "extended_thickness": self.extended_thickness,
                "extended_bounces": self.extended_bounces,
                "passed_extended": self.passed_extended}


def _normalised(points, L):
    pts = np.asarray(points, dtype=float)
    return np.column_stack([np.mod(pts[:, 0] / L, 1.0), pts[:, 1] / math.pi])


def _wrap(d):
    d = np.array(d, dtype=float)
    d[..., 0] = (d[..., 0] + 0.5) % 1.0 - 0.5
    return d


def return_distances(z, min_pairs: int = 20) -> np.ndarray:
    """Median distance |z_{n+j} - z_n| for shifts j = 1 .. N - min_pairs."""
    N = len(z)
    return np.array([np.median(np.hypot(*_wrap(z[j:] - z[:-j]).T))
                     for j in range(1, N - min_pairs + 1)])


def _path_order(Q) -> np.ndarray:
    """Short open path through the points: greedy from an extreme point, then 2-opt."""
    n = len(Q)
    D = np.hypot(*(Q[:, None, :] - Q[None, :, :]).transpose(2, 0, 1))
    cur = int(np.argmax(np.hypot(*(Q - Q.mean(axis=0)).T)))
    order = [cur]
    Dg = D + np.diag(np.full(n, np.inf))
    for _ in range(n - 1):
        Dg[:, cur] = np.inf
        cur = int(np.argmin(Dg[cur]))
        order.append(cur)
    order = np.array(order)
    # reversing order[i:j] swaps edges (i-1, i), (j-1, j) for (i-1, j-1), (i, j);
    # a missing neighbour at either end costs nothing
    ii, jj = np.triu_indices(n + 1, 2)
    keep = ii < n - 1
    ii, jj = ii[keep], jj[keep]
    for _ in range(10 * n):
        a, b, c = order[ii - 1], order[ii], order[jj - 1]
        d = order[np.minimum(jj, n - 1)]
        has_a, has_d = ii > 0, jj < n
        old = np.where(has_a, D[a, b], 0.0) + np.where(has_d, D[c, d], 0.0)
        new = np.where(has_a, D[a, c], 0.0) + np.where(has_d, D[b, d], 0.0)
        k = int(np.argmin(new - old))
        if new[k] - old[k] > -1e-15:
            break
        order[ii[k]:jj[k]] = order[ii[k]:jj[k]][::-1]
    return order


def _poly_residuals(P, masks, degree):
    """Max distance of the masked points of P to their own polynomial fit, per mask row.

    Each piece is parametrised by chord length rescaled to [-1/2, 1/2].
    """
    seg = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(P, axis=0).T))])
    w = masks.astype(float)
    big = np.where(masks, seg, np.inf).min(axis=1, keepdims=True)
    top = np.where(masks, seg, -np.inf).max(axis=1, keepdims=True)
    t = (seg - big) / (top - big + 1e-300) - 0.5
    V = t[..., None] ** np.arange(degree + 1)
    A = np.einsum("mni,mn,mnj->mij", V, w, V)
    rhs = np.einsum("mni,mn,nk->mik", V, w, P)
    coef = np.linalg.solve(A, rhs)
    res = np.hypot(*(P[None] - V @ coef).transpose(2, 0, 1))
    return np.where(masks, res, 0.0).max(axis=1)


def _poly_residual(P, degree):
    return float(_poly_residuals(P, np.ones((1, len(P)), bool), degree)[0])


def window_residual(P, degree: int = 3, min_segment: int = 6) -> float:
    """Distance of ordered points to the best curve with at most one corner.

    The curve is one polynomial of ``degree`` in chord length, or two such
    pieces sharing a break point.  Corners are allowed because the boundary
    is only C^2 (the curvature's derivative jumps at the arc junctions), so
    the return map is only C^1 and invariant curves can bend sharply where
    they cross the junction lines.
    """
    n = len(P)
    breaks = np.arange(min_segment, n - min_segment + 1)
    idx = np.arange(n)
    left = idx[None, :] <= breaks[:, None]
    right = idx[None, :] >= breaks[:, None]
    whole = np.ones((1, n), bool)
    r = _poly_residuals(P, np.vstack([whole, left, right]), degree)
    split = np.maximum(r[1:1 + len(breaks)], r[1 + len(breaks):])
    return float(min(r[0], split.min())) if len(breaks) else float(r[0])


def curve_thickness(points: np.ndarray, L: float, window: int = THICKNESS_WINDOW,
                    n_shifts: int = 30, degree: int = 3) -> float:
    """Largest distance of an orbit's section points to local curves through them.

    Neighbourhoods come from the dynamics: on an invariant curve the time
    shifts j with the smallest typical return distance move a point a short
    way along its own branch, so the window of z_n is z_n with its
    ``window - 1`` nearest among z_{n +- j} for the ``n_shifts`` best j.
    Windows are ordered by a short path and fitted by ``window_residual``.
    Selection and ordering use (s/L, theta/pi) with s periodic; the fit and
    the result are in raw (s, theta) units.
    """
    pts = np.asarray(points, dtype=float)
    N = len(pts)
    if N < window:
        return 0.0
    z = _normalised(pts, L)
    shifts = np.argsort(return_distances(z, min_pairs=min(20, N // 4)))[:n_shifts] + 1
    worst = 0.0
    for n in range(N):
        js = np.concatenate([n + shifts, n - shifts])
        js = js[(js >= 0) & (js < N)]
        dn = _wrap(z[js] - z[n])
        sel = np.argsort(np.hypot(*dn.T))[:window - 1]
        if len(sel) < window - 1:
            continue
        Qn = np.vstack([[0.0, 0.0], dn[sel]])
        P = (Qn * [L, math.pi])[_path_order(Qn)]
        # a single polynomial bounds the corner fit from above
        if _poly_residual(P, degree) <= worst:
            continue
        worst = max(worst, window_residual(P, degree))
    return worst


def thickness_test(section: SectionDataset, limit: float | None = None,
                   window: int = THICKNESS_WINDOW, periodic_tol: float = 1e-8,
                   retrace=None, factor: int = 10) -> list[ThicknessReport]:
    """Per-trajectory thickness against ``limit`` (default 1e-3 * L).

    Trajectories with at most half their points distinct are periodic.  When
    ``retrace`` is given, a failing trajectory is re-run through
    ``retrace(traj_id, bounces)`` (returning section points) with ``factor``
    times as many bounces and tested again.
    """
    L = section.boundary_length
    limit = THICKNESS_LIMIT * L if limit is None else limit
    out = []
    for i in section.trajectory_ids:
        pts = section.trajectory(int(i))
        q = np.round(pts / periodic_tol).astype(np.int64)
        distinct = len({tuple(r) for r in q.tolist()})
        periodic = distinct <= len(pts) // 2
        th = 0.0 if periodic else curve_thickness(pts, L, window)
        ext, nb = None, 0
        if retrace is not None and not periodic and th >= limit:
            nb = factor * len(pts)
            ext = curve_thickness(retrace(int(i), nb), L, window)
        out.append(ThicknessReport(int(i), th, limit, distinct, periodic, ext, nb))
    return out


def nearest_neighbor_gap(a: np.ndarray, b: np.ndarray, L: float) -> float:
    """Largest distance from a point of ``a`` to its nearest point of ``b``, s periodic."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    box = [L, 8.0]
    ta = np.column_stack([np.mod(a[:, 0], L), a[:, 1]])
    tb = np.column_stack([np.mod(b[:, 0], L), b[:, 1]])
    d, _ = cKDTree(tb, boxsize=box).query(ta)
    return float(d.max())
