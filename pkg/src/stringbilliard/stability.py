"""Linear stability of periodic orbits through deviation matrices.

A block M_{i,k} maps a deviation (ds, dp) at impact P_i to the deviation at
the next impact P_k, where s is boundary arc length and p = cos(theta) the
tangential momentum of the departing ray.  The monodromy of an n-periodic
orbit is the composition M_{n,1} ... M_{2,3} M_{1,2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import trace_section
from .errors import DomainError, IntegrityError
from .geometry import arc_curvature
from .periodic import PeriodicOrbit
from .table import StringTable

TOL_NEUTRAL = 1e-6
DET_TOL = 1e-9

STABLE = "stable"
UNSTABLE = "unstable"
NEUTRAL = "neutral"


@dataclass(frozen=True)
class StabilityReport:
    trace: float
    tag: str
    tol_neutral: float
    determinant: float
    per_bounce: list = field(default_factory=list)
    blocks: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"trace": self.trace, "tag": self.tag, "tol_neutral": self.tol_neutral,
                "determinant": self.determinant, "per_bounce": self.per_bounce,
                "blocks": self.blocks}


def deviation_block(R_i: float, R_k: float, alpha_i: float, alpha_k: float,
                    rho_ik: float) -> np.ndarray:
    """Linearised map between consecutive impacts in (s, cos theta) coordinates.

    R are radii of curvature, alpha the departing angles against the tangent,
    rho the chord length.  rho = 0 is accepted as a degenerate limit.
    """
    if R_i <= 0 or R_k <= 0:
        raise DomainError("radii of curvature must be positive")
    if not (0 < alpha_i < math.pi and 0 < alpha_k < math.pi):
        raise DomainError("angles must lie in (0, pi)")
    if rho_ik < 0:
        raise DomainError("chord length must be non-negative")
    si, sk, r = math.sin(alpha_i), math.sin(alpha_k), rho_ik
    return np.array([
        [-si / sk + r / (R_i * sk), -r / (si * sk)],
        [-r / (R_i * R_k) + sk / R_i + si / R_k, -sk / si + r / (R_k * si)],
    ])


def orbit_blocks(table: StringTable, orbit: PeriodicOrbit):
    """Per-bounce (R, alpha, rho) and the blocks M_{i,i+1}."""
    R = np.array([1.0 / float(arc_curvature(table.arcs[p.arc_id], p.t, check=False))
                  for p in orbit.points])
    alpha = np.asarray(orbit.theta, dtype=float)
    rho = np.asarray(orbit.chord_lengths, dtype=float)
    n = orbit.n
    blocks = [deviation_block(R[i], R[(i + 1) % n], alpha[i], alpha[(i + 1) % n], rho[i])
              for i in range(n)]
    return R, alpha, rho, blocks


def deviation_matrix(table: StringTable, orbit: PeriodicOrbit, order: str = "composition") -> np.ndarray:
    """Monodromy of ``orbit`` at its first vertex.

    ``order="composition"`` applies M_{1,2} first (rightmost), which is the
    linearised return map.  ``order="literal"`` multiplies M_{1,2} M_{2,3} ...
    left to right; the two share a trace only for special orbits, such as
    ones with a two-block alternation.
    """
    if orbit.closure_residual >= 1e-6:
        raise DomainError(f"orbit is not closed (residual {orbit.closure_residual:.2e})")
    *_, blocks = orbit_blocks(table, orbit)
    M = np.eye(2)
    if order == "composition":
        for B in blocks:
            M = B @ M
    elif order == "literal":
        for B in blocks:
            M = M @ B
    else:
        raise DomainError(f"unknown order {order!r}")
    return M


def stability_class(M, tol_neutral: float = TOL_NEUTRAL, det_tol: float = DET_TOL) -> StabilityReport:
    M = np.asarray(M, dtype=float)
    det = float(np.linalg.det(M))
    if abs(det - 1.0) > det_tol:
        raise IntegrityError(f"deviation matrix has determinant {det!r}, not 1")
    tr = float(np.trace(M))
    gap = abs(tr) - 2.0
    if abs(gap) <= tol_neutral:
        tag = NEUTRAL
    elif gap < 0:
        tag = STABLE
    else:
        tag = UNSTABLE
    return StabilityReport(tr, tag, tol_neutral, det)


def analyze(table: StringTable, orbit: PeriodicOrbit, tol_neutral: float = TOL_NEUTRAL) -> StabilityReport:
    """Full report: trace, tag, per-bounce data and the block list."""
    R, alpha, rho, blocks = orbit_blocks(table, orbit)
    M = np.eye(2)
    for B in blocks:
        M = B @ M
    rep = stability_class(M, tol_neutral, det_tol=max(DET_TOL, 1e-12 * np.abs(M).max() ** 2))
    per_bounce = [{"R": float(R[i]), "alpha": float(alpha[i]), "rho": float(rho[i])}
                  for i in range(orbit.n)]
    return StabilityReport(rep.trace, rep.tag, tol_neutral, rep.determinant, per_bounce,
                           [B.tolist() for B in blocks])


def finite_difference_monodromy(table: StringTable, orbit: PeriodicOrbit, h: float = 1e-6,
                                extrapolate: bool = True) -> np.ndarray:
    """Central-difference Jacobian of the return map at the first vertex,
    expressed in (s, cos theta) coordinates.

    The boundary is only C^2, so the map's second derivative jumps where a
    vertex sits on an arc junction and the central difference is then only
    first-order accurate.  ``extrapolate`` combines steps h and 2h to cancel
    that linear term.
    """
    s0 = orbit.points[0].s
    th0 = float(orbit.theta[0])
    L = table.boundary_length

    def ret(s, th):
        tr = trace_section(table, [s], [th], orbit.n)[0]
        return np.array([tr.s[-1], tr.theta[-1]])

    def central(step):
        J = np.empty((2, 2))
        for c, (ds, dt) in enumerate(((step, 0.0), (0.0, step))):
            d = ret(s0 + ds, th0 + dt) - ret(s0 - ds, th0 - dt)
            d[0] = (d[0] + L / 2) % L - L / 2
            J[:, c] = d / (2 * step)
        return J

    J = 2 * central(h) - central(2 * h) if extrapolate else central(h)
    D = np.diag([1.0, -math.sin(th0)])
    return D @ J @ np.linalg.inv(D)


# closed forms of the stable 12/5 orbit on the hexagon table
TAU = 3 * math.sqrt(4947 - 2328 * math.sqrt(3)) / 97
R_12_5 = math.sqrt(2) / 54 * ((2160 + 216 * math.sqrt(3)) / 97) ** 1.5
ALPHA_12_5 = 5 * math.pi / 12
RHO_T = math.sqrt((43 / 3) * TAU**2 + 8 * math.sqrt(3) * TAU**2 + 8 * TAU + 6 * math.sqrt(3) * TAU + 3)
RHO_S = (8 / 3) * TAU + (4 * math.sqrt(3) / 3) * TAU + 2


def closed_form_12_5():
    """The T and S blocks and M = (TS)^6 from the closed-form orbit data."""
    T = deviation_block(R_12_5, R_12_5, ALPHA_12_5, ALPHA_12_5, RHO_T)
    S = deviation_block(R_12_5, R_12_5, ALPHA_12_5, ALPHA_12_5, RHO_S)
    return T, S, np.linalg.matrix_power(T @ S, 6)
