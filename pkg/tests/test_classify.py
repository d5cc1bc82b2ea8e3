import math

import numpy as np
import pytest

from conftest import SQ3
from stringbilliard.classify import (DISJOINT, FOCAL, INNER, INTERSECTING, MIXED, OUTER,
                                     SUPPORTING, classify_orbit, classify_segment, clip_halfplane,
                                     focal_angle_of_height, focal_convergence, focal_starts,
                                     forbidden_region, is_caustic, measured_focal_angles)
from stringbilliard.dynamics import launch, trace, trace_focal
from stringbilliard.errors import DomainError
from stringbilliard.geometry import arc_point, ray_boundary_intersection
from stringbilliard.periodic import symmetric_orbit
from stringbilliard.table import ConvexPolygon

S_TRIANGLE = np.array([(0, 2 * SQ3), (-3, -SQ3), (3, -SQ3)])


def _chord_through(table, p, angle):
    d = np.array([math.cos(angle), math.sin(angle)])
    a = ray_boundary_intersection(table, p, d).point
    b = ray_boundary_intersection(table, p, -d).point
    return np.array([b, a])


@pytest.fixture(scope="module")
def arc24(hexagon):
    return hexagon.arcs[hexagon.arc_with_foci(2, 4)]


@pytest.fixture(scope="module")
def focal_traj(hexagon, arc24):
    P = arc_point(arc24, arc24.t_start + 0.3 * (arc24.t_end - arc24.t_start))
    return trace_focal(hexagon, P, 2, 1000)


def test_segment_classes(hexagon, arc24):
    K = hexagon.K
    # through F2 between the directions of its two edges: a supporting line
    assert classify_segment(_chord_through(hexagon, hexagon.focus(2), -math.pi / 6), K).tag == SUPPORTING
    assert classify_segment(_chord_through(hexagon, (0, 0), 0.7), K).tag == INTERSECTING
    p, q = arc_point(arc24, arc24.t_mid - 0.1), arc_point(arc24, arc24.t_mid + 0.1)
    seg = classify_segment((p, q), K)
    assert seg.tag == DISJOINT
    # independent check: the chord's midpoint is outside K and both ends are right of x = 2
    assert not K.contains((p + q) / 2) and min(p[0], q[0]) > 2


def test_segment_witness(hexagon):
    seg = classify_segment(_chord_through(hexagon, hexagon.focus(2), -math.pi / 6), hexagon.K)
    np.testing.assert_allclose(seg.witness["vertex"], hexagon.focus(2), atol=1e-12)


def test_degenerate_segment(hexagon):
    with pytest.raises(DomainError):
        classify_segment(((1, 1), (1, 1)), hexagon.K)


def test_orbit_trichotomy_examples(hexagon, focal_traj):
    assert classify_orbit(focal_traj).tag == FOCAL
    assert classify_orbit(trace(hexagon, (0, 0), (math.cos(0.3), math.sin(0.3)), 1000)).tag == INNER
    P, D = launch(hexagon, [1.0], [0.05])
    assert classify_orbit(trace(hexagon, P[0], D[0], 1000)).tag == OUTER


def test_mixed_classes_reported_with_index(hexagon):
    # a small polygon that only some chords cross
    tiny = ConvexPolygon.from_points(np.array([[0, 0], [0.3, 0], [0, 0.3]]) + [1.8, 0])
    c = classify_orbit(trace(hexagon, (0, 0), (math.cos(0.3), math.sin(0.3)), 50), K=tiny)
    assert c.tag == MIXED and not c.consistent
    assert c.segment_tags[c.offending_index] != c.segment_tags[0]
    assert all(t == c.segment_tags[0] for t in c.segment_tags[:c.offending_index])


def test_focal_angle_formula():
    assert math.degrees(focal_angle_of_height(0.0)) == pytest.approx(70.528779, abs=1e-6)
    assert focal_angle_of_height(0.0) == pytest.approx(math.acos(1 / 3), abs=1e-15)
    assert focal_angle_of_height(SQ3) == pytest.approx(math.pi / 3, abs=1e-12)
    assert focal_angle_of_height(-SQ3) == pytest.approx(math.pi / 3, abs=1e-12)
    with pytest.raises(DomainError):
        focal_angle_of_height(2.0)


def test_focal_angle_from_geometry(hexagon, arc24):
    # oracle: angle at P between the rays to F2 and F4, from coordinates alone
    for t in np.linspace(arc24.t_start, arc24.t_end, 11):
        P = arc_point(arc24, t)
        u, v = hexagon.focus(2) - P, hexagon.focus(4) - P
        gamma = math.acos(u @ v / np.linalg.norm(u) / np.linalg.norm(v))
        assert focal_angle_of_height(P[1]) == pytest.approx(gamma, abs=1e-12)


def test_measured_focal_angles_on_arc24(hexagon, focal_traj, arc24):
    on = focal_traj.arc_id == arc24.arc_id
    gam = measured_focal_angles(focal_traj)[on]
    ref = np.array([focal_angle_of_height(y) for y in focal_traj.points[on, 1]])
    np.testing.assert_allclose(gam, ref, atol=1e-10)


def test_focal_convergence_limits(focal_traj):
    ser = focal_convergence(focal_traj)
    assert ser.limits["phi"] == pytest.approx(math.pi / 2, abs=1e-6)
    assert ser.limits["s"] == pytest.approx(4.0, abs=1e-6)
    assert ser.limits["alpha"] == pytest.approx(math.pi / 3, abs=1e-6)
    assert all(ser.check_bounds().values())
    assert ser.converged_at is not None and ser.converged_at < 500
    assert ser.final_triangle_distance < 1e-5
    np.testing.assert_allclose(ser.s + ser.t, 6.0, atol=1e-12)


def test_focal_convergence_rejects_other_orbits(hexagon):
    with pytest.raises(DomainError):
        focal_convergence(trace(hexagon, (0, 0), (1, 0), 20))


def test_focal_starts_give_focal_orbits(hexagon):
    starts = focal_starts(hexagon, 2, 5, np.random.default_rng(3))
    assert starts.shape == (5, 2)
    for p in starts:
        assert classify_orbit(trace_focal(hexagon, p, 2, 50)).tag == FOCAL


def test_clip_halfplane():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    # keep the side left of the upward line x = 0.5, i.e. x <= 0.5
    half = clip_halfplane(sq, np.array([0.5, 0.0]), np.array([0.0, 1.0]))
    assert ConvexPolygon.from_points(half).area == pytest.approx(0.5)
    assert len(clip_halfplane(sq, np.array([2.0, 0.0]), np.array([0.0, -1.0]))) == 0
    np.testing.assert_array_equal(clip_halfplane(sq, np.array([2.0, 0.0]), np.array([0.0, 1.0])), sq)


def test_region_of_triangle_orbit_is_the_triangle(hexagon):
    o = symmetric_orbit(hexagon, 4, phase="junction")
    P0 = o.xy[0]
    d = (o.xy[1] - P0) / np.linalg.norm(o.xy[1] - P0)
    region = forbidden_region(trace(hexagon, P0, d, 9))
    assert region.polygon.area == pytest.approx(9 * SQ3, abs=1e-9)
    tri = ConvexPolygon.from_points(S_TRIANGLE)
    assert all(tri.contains(v, tol=1e-9) for v in region.polygon.vertices)


def test_focal_region_contains_k_inside_limit_triangle(hexagon, focal_traj):
    region = forbidden_region(focal_traj)
    assert all(region.polygon.contains(v, tol=1e-9) for v in hexagon.K.vertices)
    tri = ConvexPolygon.from_points(S_TRIANGLE)
    assert all(tri.contains(v, tol=1e-9) for v in region.polygon.vertices)


def test_k_is_caustic_of_focal_orbit(hexagon, focal_traj):
    ok, gaps = is_caustic(hexagon.K, focal_traj)
    assert ok and np.max(np.abs(gaps)) < 1e-9


def test_whispering_gallery_region(hexagon):
    P, D = launch(hexagon, [1.0], [0.05])
    tr = trace(hexagon, P[0], D[0], 1000)
    region = forbidden_region(tr)
    assert region.polygon.area > 3 * hexagon.K.area
    assert not is_caustic(region.polygon, tr)[0]
    assert not is_caustic(ConvexPolygon.from_points([(0.1, 0.2)]), tr)[0]


def test_forbidden_region_validation(hexagon):
    tr = trace(hexagon, (0, 0), (1, 0), 2)
    with pytest.raises(DomainError):
        forbidden_region(tr)
    tr = trace(hexagon, (0, 0), (math.cos(0.3), math.sin(0.3)), 20)
    with pytest.raises(DomainError):
        forbidden_region(tr, orientation="up")


def test_inner_orbit_region_is_empty(hexagon):
    region = forbidden_region(trace(hexagon, (0, 0), (math.cos(0.3), math.sin(0.3)), 300))
    assert region.empty or region.polygon.area < 1e-6


def test_reverse_focal_cycle_closes_on_mirror_triangle(hexagon):
    seen = set()
    for p in focal_starts(hexagon, 2, 12, np.random.default_rng(8)):
        ser = focal_convergence(trace_focal(hexagon, p, 2, 200))
        step = (ser.foci_out[0] - ser.foci_in[0]) % 6
        assert ser.limit_triangle == {4: "S1S5S3", 2: "S2S4S6"}[step]
        assert ser.final_triangle_distance < 1e-5
        seen.add(ser.limit_triangle)
    assert seen == {"S1S5S3", "S2S4S6"}
