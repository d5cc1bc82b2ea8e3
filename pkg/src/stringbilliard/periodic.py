"""Periodic orbits: symmetric star polygons, Birkhoff pairs, counting.

Orbits are searched over the lift ``u`` of the global boundary parameter
(arc index + fraction of the arc's parameter range), with u_{i+n} = u_i + 6k
for an orbit of period n winding k times.  The search solves

    g_i(u) = T_i . (e_in - e_out) = 0,

the reflection defect at each vertex (T_i the unit tangent, e the unit chord
directions).  It vanishes exactly when incidence equals reflection, and is
the perimeter gradient up to the positive factor |dP/du|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .dynamics import frame_at, trace, trace_section
from .errors import DomainError, SearchFailure
from .geometry import BoundaryPoint, boundary_s
from .table import StringTable, rotation_matrix

CLOSURE_TOL = 1e-10
DEFECT_TOL = 1e-11
KEY_QUANTUM = 1e-8


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    n: int
    k: int
    u: np.ndarray
    points: tuple[BoundaryPoint, ...]
    theta: np.ndarray
    chord_lengths: np.ndarray
    closure_residual: float
    defect: float
    stability_tag: str | None = None
    trace_value: float | None = None
    label: str = ""
    table: StringTable | None = field(default=None, repr=False)

    @property
    def xy(self) -> np.ndarray:
        return np.array([p.point for p in self.points])

    @property
    def perimeter(self) -> float:
        return float(np.sum(self.chord_lengths))

    @property
    def arc_ids(self) -> np.ndarray:
        return np.array([p.arc_id for p in self.points])

    @property
    def ts(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    def to_dict(self) -> dict:
        return {
            "n": self.n, "k": self.k, "label": self.label,
            "vertices": [{"arc_id": p.arc_id, "t": p.t, "x": p.point[0], "y": p.point[1], "s": p.s}
                         for p in self.points],
            "u": self.u.tolist(),
            "theta": self.theta.tolist(),
            "closure_residual": self.closure_residual,
            "reflection_defect": self.defect,
            "perimeter": self.perimeter,
            "stability_tag": self.stability_tag,
            "trace": self.trace_value,
        }


# --- geometry over the lift -------------------------------------------------

def points_and_tangents(table: StringTable, u):
    """Boundary points and unit ccw tangents at global parameters ``u``."""
    j, t = table.global_point(u)
    j = np.atleast_1d(j)
    t = np.atleast_1d(t)
    a = table.arc_a[j][:, None]
    b = table.arc_b[j][:, None]
    P = (table.arc_centers[j] + a * np.cos(t)[:, None] * table.arc_major[j]
         + b * np.sin(t)[:, None] * table.arc_minor[j])
    T, _N = frame_at(table, j, t)
    return P, T


def reflection_defect(table: StringTable, u) -> np.ndarray:
    """g_i = T_i . (e_in - e_out) for the closed polygon through u (cyclic)."""
    P, T = points_and_tangents(table, u)
    e_out = np.roll(P, -1, axis=0) - P
    lengths = np.linalg.norm(e_out, axis=1)
    if np.any(lengths < 1e-12):
        raise SearchFailure("coincident consecutive vertices")
    e_out = e_out / lengths[:, None]
    e_in = np.roll(e_out, 1, axis=0)
    return np.einsum("ij,ij->i", T, e_in - e_out)


def perimeter(table: StringTable, u) -> float:
    P, _ = points_and_tangents(table, u)
    return float(np.sum(np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)))


def _fd_jacobian(f, u, h=1e-7):
    n = len(u)
    J = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (f(u + e) - f(u - e)) / (2 * h)
    return J


def _monotone(table: StringTable, u) -> bool:
    steps = np.mod(np.diff(np.append(u, u[0])), table.n)
    return bool(np.all(steps > 1e-9) and np.all(steps < table.n - 1e-9))


def _winding_of_points(P: np.ndarray, center) -> int:
    ang = np.arctan2(P[:, 1] - center[1], P[:, 0] - center[0])
    d = np.diff(np.append(ang, ang[0]))
    d = (d + math.pi) % (2 * math.pi) - math.pi
    return int(round(abs(np.sum(d)) / (2 * math.pi)))


def newton_defect(table: StringTable, u0, max_iter: int = 60, tol: float = DEFECT_TOL):
    """Damped Newton on the reflection defect; returns (u, max |g|)."""
    f = lambda v: reflection_defect(table, v)
    u = np.array(u0, dtype=float)
    g = f(u)
    for _ in range(max_iter):
        err = np.max(np.abs(g))
        if err < tol * 1e-2:
            break
        J = _fd_jacobian(f, u)
        try:
            step = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -g, rcond=None)[0]
        step_max = np.max(np.abs(step))
        if step_max > 0.25:
            step *= 0.25 / step_max
        lam = 1.0
        while lam > 1e-4:
            trial = u + lam * step
            try:
                gt = f(trial)
            except SearchFailure:
                gt = None
            if gt is not None and np.max(np.abs(gt)) < err * (1 - 1e-4 * lam) + 1e-15:
                break
            lam *= 0.5
        else:
            break
        u, g = trial, gt
        if np.max(np.abs(lam * step)) < 1e-15:
            break
    return u, float(np.max(np.abs(g)))


def closure_check(table: StringTable, u, periods: int = 1) -> tuple[float, np.ndarray]:
    """Trace the orbit from its first vertex and measure the return gap.

    Returns the closure residual (max of position and direction gap) after
    ``periods`` periods and the traced impact points.
    """
    P, _ = points_and_tangents(table, u)
    n = len(P)
    d0 = P[1 % n] - P[0]
    d0 = d0 / np.linalg.norm(d0)
    # start just inside the boundary on the first chord
    tr = trace(table, P[0], d0, n * periods)
    end = tr.points[-1]
    d_end = tr.outgoing[-1]
    res = max(np.linalg.norm(end - P[0]), np.linalg.norm(d_end - d0))
    return float(res), tr


def make_orbit(table: StringTable, u, k: int | None = None, label: str = "",
               max_residual: float = CLOSURE_TOL, defect: float | None = None) -> PeriodicOrbit:
    """Package and verify a converged vertex set as a PeriodicOrbit."""
    u = np.mod(np.asarray(u, dtype=float), table.n)
    n = len(u)
    if n < 2:
        raise DomainError("an orbit needs at least two vertices")
    P, T = points_and_tangents(table, u)
    g = reflection_defect(table, u) if defect is None else None
    defect = float(np.max(np.abs(g))) if g is not None else defect
    res, tr = closure_check(table, u)
    if not res < max_residual:
        raise SearchFailure(f"closure residual {res:.3e} exceeds {max_residual:.1e}")
    winding = _winding_of_points(P, table.center)
    if k is not None and winding != k:
        raise SearchFailure(f"converged to winding {winding}, expected {k}")
    j, t = table.global_point(u)
    s = boundary_s(table, j, t)
    pts = tuple(BoundaryPoint(int(j[i]), float(t[i]), (float(P[i, 0]), float(P[i, 1])), float(s[i]))
                for i in range(n))
    chords = np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)
    e_out = (np.roll(P, -1, axis=0) - P) / chords[:, None]
    _, N = frame_at(table, j, t)
    theta = np.arctan2(np.einsum("ij,ij->i", e_out, N), np.einsum("ij,ij->i", e_out, T))
    return PeriodicOrbit(n, winding, u, pts, theta, chords, res, defect, label=label, table=table)


def _minimal_period(u, n_arcs: int, tol: float = 1e-9) -> int:
    n = len(u)
    for p in range(1, n + 1):
        if n % p == 0 and np.all(np.abs(np.mod(u[p:] - u[:-p] + 0.5 * n_arcs, n_arcs) - 0.5 * n_arcs) < tol) \
                if p < n else True:
            return p
    return n


# --- symmetric orbits ---------------------------------------------------------

def axis_points(table: StringTable) -> np.ndarray:
    """Global parameters of the 2n points where the symmetry axes meet the boundary
    (arc midpoints and junctions), in ccw order starting at the origin O."""
    return 0.5 + 0.5 * np.arange(2 * table.n)


def symmetric_orbit(table: StringTable, k: int, phase: str = "midpoint") -> PeriodicOrbit:
    """Join every k-th of the 12 axis points of the hexagon table.

    ``phase`` picks the first vertex: the origin O (an arc midpoint) or the
    junction before it.  For odd k both give the same orbit.
    """
    if table.n != 6:
        raise DomainError("symmetric orbits are defined on the hexagon table")
    if not 1 <= k <= 6:
        raise DomainError("k must be in 1..6")
    if phase not in ("midpoint", "junction"):
        raise DomainError(f"phase must be 'midpoint' or 'junction', not {phase!r}")
    period = 12 // math.gcd(12, k)
    u = (0.5 if phase == "midpoint" else 0.0) + 0.5 * k * np.arange(period)
    return make_orbit(table, u, label=f"symmetric-{k}" + ("" if phase == "midpoint" else "-j"))


# --- general search -------------------------------------------------------------

def find_periodic_orbit(table: StringTable, n: int, k: int, seed=None,
                        max_iter: int = 60, label: str = "") -> PeriodicOrbit:
    """Newton search for an n-periodic orbit winding k times.

    ``seed`` is an array of n global parameters forming a monotone lift
    (consecutive steps in (0, 6), total advance 6k); by default an equally
    spaced lift starting at the origin.
    """
    if n < 2 or not 1 <= k < n:
        raise DomainError("need n >= 2 and 1 <= k < n")
    if seed is None:
        seed = 0.5 + table.n * k / n * np.arange(n)
    seed = np.asarray(seed, dtype=float)
    if seed.shape != (n,):
        raise DomainError(f"seed must have {n} entries")
    u, err = newton_defect(table, seed, max_iter=max_iter)
    if not err < DEFECT_TOL:
        raise SearchFailure(f"Newton stalled at reflection defect {err:.3e}")
    if not _monotone(table, u):
        raise SearchFailure("converged vertices are not a monotone lift")
    p = _minimal_period(np.unwrap(u, period=table.n), table.n)
    if p < n:
        raise SearchFailure(f"converged to an orbit of period {p}, not {n}")
    return make_orbit(table, u, k=k, label=label, defect=err)


def shoot_periodic(table: StringTable, n: int, k: int, x0, max_iter: int = 40,
                   tol: float = 1e-13, label: str = "") -> PeriodicOrbit:
    """Newton on the return map F^n(s, theta) - (s, theta) in phase space.

    Better conditioned than the vertex search for long or neutral orbits,
    whose perimeter Hessian is (nearly) singular.  Least-squares steps keep
    it usable when F^n - I is singular.
    """
    L = table.boundary_length

    def gap(x):
        tr = trace_section(table, [x[0]], [x[1]], n)[0]
        return np.array([(tr.s[-1] - x[0] + L / 2) % L - L / 2, tr.theta[-1] - x[1]]), tr

    x = np.array(x0, dtype=float)
    g, tr = gap(x)
    h = 1e-7
    for _ in range(max_iter):
        if np.max(np.abs(g)) < tol:
            break
        J = np.column_stack([(gap(x + e)[0] - gap(x - e)[0]) / (2 * h)
                             for e in (np.array([h, 0.0]), np.array([0.0, h]))])
        dx = np.linalg.lstsq(J, -g, rcond=None)[0]
        big = np.max(np.abs(dx))
        if big > 0.05:
            dx *= 0.05 / big
        lam = 1.0
        while lam > 1e-3:
            gt, trt = gap(x + lam * dx)
            if np.linalg.norm(gt) < np.linalg.norm(g):
                break
            lam *= 0.5
        else:
            break
        x, g, tr = x + lam * dx, gt, trt
    j = tr.arc_id
    u = j + (tr.t - table.arc_t0[j]) / (table.arc_t1[j] - table.arc_t0[j])
    # the launch point is the n-th impact; put it first
    u = np.roll(u, 1)
    p = _minimal_period(np.unwrap(u, period=table.n), table.n)
    if p < n:
        raise SearchFailure(f"converged to an orbit of period {p}, not {n}")
    return make_orbit(table, u, k=k, label=label)


def island_orbit(table: StringTable, center: PeriodicOrbit, q: int, r_max: float,
                 n_rays: int = 8, label: str = "") -> PeriodicOrbit:
    """A period q * center.n orbit circling the island of a stable orbit q times.

    Deviations from the island center are measured in coordinates where the
    linearised return map is a rotation.  On each ray from the center the
    resonant radius is where the q-fold return has zero net turning; the
    orbit sits where, in addition, the radial displacement vanishes.  Near
    high-order resonances F^(qn) - I is almost singular, which defeats plain
    Newton; these two scalar root finds do not suffer from that.
    """
    m = center.n
    N = m * q
    L = table.boundary_length
    x_c = np.array([center.points[0].s, float(center.theta[0])])

    def ret(x, count):
        tr = trace_section(table, [x[0]], [x[1]], count)[0]
        return np.array([x_c[0] + (tr.s[-1] - x_c[0] + L / 2) % L - L / 2, tr.theta[-1]]), tr

    h = 1e-6
    J = np.column_stack([(ret(x_c + e, m)[0] - ret(x_c - e, m)[0]) / (2 * h)
                         for e in (np.array([h, 0.0]), np.array([0.0, h]))])
    c = 0.5 * np.trace(J)
    if abs(c) >= 1:
        raise SearchFailure("center orbit is not elliptic")
    e1 = np.array([1.0, 0.0])
    sn = math.sqrt(1 - c * c)
    e2 = (J @ e1 - c * e1) / sn
    Pinv = np.linalg.inv(np.column_stack([e1, e2]))

    def z_of(x):
        return Pinv @ (x - x_c)

    def turning(r, phi):
        x = x_c + r * (math.cos(phi) * e1 + math.sin(phi) * e2)
        z0 = z_of(x)
        z1 = z_of(ret(x, N)[0])
        d = math.atan2(z1[1], z1[0]) - math.atan2(z0[1], z0[0])
        return (d + math.pi) % (2 * math.pi) - math.pi, float(np.hypot(*z1) - np.hypot(*z0))

    guess = []

    def resonant_r(phi):
        f = lambda r: turning(r, phi)[0]
        if guess:
            g0 = guess[-1]
            lo, hi = max(1e-3 * r_max, g0 - 0.05 * r_max), min(r_max, g0 + 0.05 * r_max)
            flo, fhi = f(lo), f(hi)
            if flo * fhi < 0 and abs(flo) < 1 and abs(fhi) < 1:
                r = optimize.brentq(f, lo, hi, xtol=1e-15)
                guess.append(r)
                return r
        rs = np.linspace(0.05 * r_max, r_max, 40)
        vals = [f(r) for r in rs]
        for i in range(len(rs) - 1):
            if vals[i] * vals[i + 1] < 0 and abs(vals[i]) < 1 and abs(vals[i + 1]) < 1:
                r = optimize.brentq(f, rs[i], rs[i + 1], xtol=1e-15)
                guess.append(r)
                return r
        raise SearchFailure(f"no {q}-fold resonance along ray {phi:.3f}")

    def radial(phi):
        return turning(resonant_r(phi), phi)[1]

    phis = np.linspace(0.0, 2 * math.pi / q, n_rays + 1)
    vals = [radial(p) for p in phis]
    last_err = None
    for i in range(n_rays):
        if vals[i] * vals[i + 1] >= 0:
            continue
        phi = optimize.brentq(radial, phis[i], phis[i + 1], xtol=1e-12)
        r = resonant_r(phi)
        x = x_c + r * (math.cos(phi) * e1 + math.sin(phi) * e2)
        _, tr = ret(x, N)
        j = tr.arc_id
        u = np.roll(j + (tr.t - table.arc_t0[j]) / (table.arc_t1[j] - table.arc_t0[j]), 1)
        try:
            return make_orbit(table, u, k=center.k * q, label=label or f"{N}/{center.k * q}")
        except SearchFailure as exc:
            last_err = exc
    raise SearchFailure(f"no closed {N}-periodic island orbit found ({last_err})")


def seed_lift(table: StringTable, n: int, k: int, offset: float, jitter=None) -> np.ndarray:
    u = offset + table.n * k / n * np.arange(n)
    if jitter is not None:
        u = u + jitter
    return u


def search_orbits(table: StringTable, n: int, k: int, offsets, max_iter: int = 60):
    """Run Newton from equally spaced seeds at the given offsets; keep the
    distinct successes (exact point-set key, no symmetry quotient)."""
    found = {}
    failures = 0
    for off in offsets:
        try:
            orb = find_periodic_orbit(table, n, k, seed_lift(table, n, k, off), max_iter=max_iter)
        except SearchFailure:
            failures += 1
            continue
        found.setdefault(point_key(orb), orb)
    return list(found.values()), failures


def birkhoff_pair(table: StringTable, n: int, k: int, n_seeds: int = 24):
    """The perimeter maximizing orbit and a geometrically distinct second orbit.

    Raises SearchFailure when fewer than two symmetry classes are found.
    """
    if math.gcd(n, k) != 1 or not 1 <= k < n / 2:
        raise DomainError("Birkhoff pairs need gcd(n, k) = 1 and 1 <= k < n/2")
    offsets = list(0.5 * np.arange(2 * table.n) / 1.0)  # axis points
    offsets += list(np.arange(n_seeds) * table.n / (n_seeds * n) + 0.013)
    orbits, _ = search_orbits(table, n, k, offsets)
    classes = {}
    for orb in orbits:
        key = canonical_form(orb)
        if key not in classes or orb.defect < classes[key].defect:
            classes[key] = orb
    ranked = sorted(classes.values(), key=lambda o: -o.perimeter)
    if len(ranked) < 2:
        raise SearchFailure(f"found {len(ranked)} symmetry class(es) of ({n},{k}) orbits, need 2")
    best = replace(ranked[0], label=f"{n}/{k}-max")
    # second orbit: the minimax candidate, i.e. the distinct class of largest perimeter
    second = replace(ranked[1], label=f"{n}/{k}-minimax")
    return best, second


def similarity_ratio(a: PeriodicOrbit, b: PeriodicOrbit) -> float:
    return a.perimeter / b.perimeter


# --- counting and distinctness ----------------------------------------------------

def orbit_count(n: int) -> int:
    """6 / gcd(6, n) * phi(n)."""
    if n < 3:
        raise DomainError("orbit_count needs n >= 3")
    phi = sum(1 for m in range(1, n + 1) if math.gcd(m, n) == 1)
    return 6 // math.gcd(6, n) * phi


def _symmetries(m: int = 6):
    """The dihedral group of the regular m-gon as 2x2 matrices."""
    flip = np.array([[1.0, 0.0], [0.0, -1.0]])
    out = []
    for r in range(m):
        R = rotation_matrix(2 * math.pi * r / m)
        out.append(R)
        out.append(R @ flip)
    return out


def _quantized(P, quantum):
    q = np.round(np.asarray(P) / quantum).astype(np.int64) + 0  # +0 clears -0
    return tuple(sorted(map(tuple, q.tolist())))


def point_key(orbit: PeriodicOrbit, quantum: float = KEY_QUANTUM):
    return (orbit.n, orbit.k, _quantized(orbit.xy - orbit.table.center, quantum))


def canonical_form(orbit: PeriodicOrbit, quantum: float = KEY_QUANTUM):
    """Key invariant under the table's dihedral symmetries and relabeling."""
    P = orbit.xy - orbit.table.center
    keys = [_quantized(P @ g.T, quantum) for g in _symmetries(orbit.table.n)]
    return (orbit.n, orbit.k, min(keys))


def rotated_copies(orbit: PeriodicOrbit, quantum: float = KEY_QUANTUM) -> int:
    """Number of distinct images of the orbit under the table's rotations."""
    P = orbit.xy - orbit.table.center
    m = orbit.table.n
    return len({_quantized(P @ rotation_matrix(2 * math.pi * r / m).T, quantum) for r in range(m)})


def exhaustive_count(table: StringTable, n: int, grid: int = 48) -> dict:
    """Sweep seeds for every rotation number k < n/2 coprime to n and count
    the distinct orbits found, raw and after expansion by rotations.

    Orbits are point sets, so an orbit and its time reversal count once.
    """
    offsets = np.arange(grid) * table.n / (grid * n) + 1e-3
    raw = {}
    classes = {}
    for k in range(1, (n + 1) // 2):
        if math.gcd(n, k) != 1 or 2 * k == n:
            continue
        orbits, _ = search_orbits(table, n, k, offsets)
        for orb in orbits:
            raw.setdefault(point_key(orb), orb)
            classes.setdefault(canonical_form(orb), orb)
    expanded = sum(rotated_copies(o) for o in classes.values())
    return {
        "n": n,
        "raw_distinct": len(raw),
        "symmetry_classes": len(classes),
        "expanded_total": expanded,
        "formula": orbit_count(n),
        "orbits": list(classes.values()),
    }

