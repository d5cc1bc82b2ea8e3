import math

import mpmath
import numpy as np
import pytest

from conftest import SQ3, SQ6
from stringbilliard.errors import DomainError
from stringbilliard.geometry import arc_length
from stringbilliard.table import (ConvexPolygon, build_table, curvature_range, hausdorff,
                                  string_length, verify_c2)


def test_string_length_hexagon_is_exactly_14():
    assert string_length(6) == 14.0


@pytest.mark.parametrize("n", range(5, 13))
def test_string_length_against_high_precision(n):
    with mpmath.workdps(50):
        ref = 2 * (n - 1) - 2 / mpmath.cos((n - 2) * mpmath.pi / n)
    assert string_length(n) == pytest.approx(float(ref), rel=0, abs=2e-14)


def test_string_length_pentagon():
    assert string_length(5) == pytest.approx(8 + 2 / math.cos(2 * math.pi / 5), abs=1e-13)
    assert string_length(5) == pytest.approx(14.47213595, abs=1e-8)


@pytest.mark.parametrize("n", [2, 3, 4, 5.5])
def test_string_length_rejects_small_or_fractional(n):
    with pytest.raises(DomainError):
        string_length(n)


def test_hexagon_foci_and_dimensions(hexagon):
    expected = np.array([(-1, SQ3), (1, SQ3), (2, 0), (1, -SQ3), (-1, -SQ3), (-2, 0)])
    np.testing.assert_allclose(hexagon.foci, expected, atol=1e-15)
    assert hexagon.d == 2.0
    assert hexagon.focal_sum == 6.0
    for arc in hexagon.arcs:
        assert arc.a == pytest.approx(3.0, abs=1e-15)
        assert arc.b == pytest.approx(SQ6, abs=1e-14)
        assert arc.c == pytest.approx(SQ3, abs=1e-15)


def _arc_samples(table, i, j, m=50):
    arc = table.arcs[table.arc_with_foci(i, j)]
    from stringbilliard.geometry import arc_point
    return arc_point(arc, np.linspace(arc.t_start, arc.t_end, m))


def test_arc_24_equation(hexagon):
    x, y = _arc_samples(hexagon, 2, 4).T
    np.testing.assert_allclose((x - 1) ** 2 / 6 + y**2 / 9, 1.0, atol=1e-13)


def test_arc_13_equation(hexagon):
    x, y = _arc_samples(hexagon, 1, 3).T
    lhs = 11 * y**2 + 2 * SQ3 * (x - 6) * y + 9 * x**2 - 12 * x
    np.testing.assert_allclose(lhs, 60.0, atol=1e-11)


def test_arcs_close_up(hexagon):
    from stringbilliard.geometry import arc_point
    for j, arc in enumerate(hexagon.arcs):
        nxt = hexagon.arcs[(j + 1) % 6]
        np.testing.assert_allclose(arc_point(arc, arc.t_end), arc_point(nxt, nxt.t_start),
                                   atol=1e-12)


def test_junction_derivatives_at_3_sqrt3(hexagon):
    rep = verify_c2(hexagon)
    (j,) = [r for r in rep.junctions if np.allclose(r.point, (3, SQ3), atol=1e-12)]
    assert j.slope == pytest.approx((-SQ3, -SQ3), abs=1e-10)
    assert j.second_derivative == pytest.approx((-1.5 * SQ3, -1.5 * SQ3), abs=1e-9)


def test_generic_apex_is_flat_with_closed_form_second_derivative():
    rep = verify_c2(build_table(6, "generic"))
    assert rep.apex_passed
    assert abs(rep.apex_slope) < 1e-10
    # (cos a - 1) cos a sin a / (2 cos a - 1) at a = 2 pi / 3 is -3 sqrt3 / 16
    with mpmath.workdps(30):
        a = 2 * mpmath.pi / 3
        ref = (mpmath.cos(a) - 1) * mpmath.cos(a) * mpmath.sin(a) / (2 * mpmath.cos(a) - 1)
    assert float(ref) == pytest.approx(-3 * SQ3 / 16, abs=1e-15)
    assert rep.apex_second_derivative == pytest.approx(float(ref), abs=1e-9)


@pytest.mark.parametrize("n", range(5, 13))
def test_c2_at_every_junction(n):
    rep = verify_c2(build_table(n))
    assert rep.passed
    assert len(rep.junctions) == n


def test_enneagon():
    T = build_table(9)
    assert len(T.arcs) == 9
    assert T.string_length == pytest.approx(16 - 2 / math.cos(7 * math.pi / 9), abs=1e-13)


def test_curvature_range_hexagon(hexagon):
    kmin, kmax = curvature_range(hexagon)
    assert kmin == pytest.approx(SQ6 / 9, abs=1e-10)
    assert kmax == pytest.approx(3 * SQ3 / 16, abs=1e-10)


def test_boundary_is_convex(hexagon):
    for T in (hexagon, build_table(7), build_table(12)):
        P = T.sample_boundary(300)
        a = np.roll(P, -1, axis=0) - P
        b = np.roll(P, -2, axis=0) - np.roll(P, -1, axis=0)
        assert np.all(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0] >= -1e-13)


def test_boundary_length_is_sum_of_arc_lengths(hexagon):
    total = sum(arc_length(a, a.t_start, a.t_end) for a in hexagon.arcs)
    assert hexagon.boundary_length == pytest.approx(total, abs=1e-11)


def test_frame_errors():
    with pytest.raises(DomainError):
        build_table(7, "hexagon")
    with pytest.raises(DomainError):
        build_table(6, "polar")


def test_frame_alias_gives_same_table(hexagon):
    np.testing.assert_array_equal(build_table(6, "hexagon-canonical").foci, hexagon.foci)


def test_generic_frame_anchor_points():
    T = build_table(6, "generic")
    np.testing.assert_allclose(T.focus(1), (-1, 0), atol=1e-15)
    np.testing.assert_allclose(T.focus(2), (1, 0), atol=1e-15)


def test_to_dict_fields(hexagon):
    d = hexagon.to_dict()
    assert {"n", "frame", "l", "foci", "apexes", "arcs", "boundary_length"} <= set(d)
    assert d["l"] == 14.0
    assert {"foci", "focal_sum", "t_start", "t_end", "transform"} <= set(d["arcs"][0])


def test_convex_polygon_basics():
    sq = ConvexPolygon.from_points([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert sq.area == pytest.approx(1.0)
    v = sq.vertices  # reoriented counterclockwise
    assert np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]) > 0
    assert sq.perimeter == pytest.approx(4.0)
    assert sq.contains((0.5, 0.5)) and not sq.contains((1.5, 0.5))
    shifted = ConvexPolygon.from_points(sq.vertices + [0.25, 0.0])
    assert hausdorff(sq.vertices, shifted.vertices) == pytest.approx(0.25)
