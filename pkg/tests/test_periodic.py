import math

import numpy as np
import pytest

from conftest import SQ3, SQ6
from stringbilliard.dynamics import trace
from stringbilliard.errors import DomainError, SearchFailure
from stringbilliard.periodic import (birkhoff_pair, canonical_form, exhaustive_count,
                                     find_periodic_orbit, make_orbit, orbit_count,
                                     similarity_ratio, symmetric_orbit)
from stringbilliard.stability import analyze

TABLE_ONE = {3: 4, 4: 6, 5: 24, 6: 2, 7: 36, 8: 12, 9: 12, 10: 12, 11: 60, 12: 4}


@pytest.mark.parametrize("n,count", TABLE_ONE.items())
def test_orbit_count_values(n, count):
    assert orbit_count(n) == count


def test_orbit_count_domain():
    with pytest.raises(DomainError):
        orbit_count(2)


@pytest.mark.parametrize("k", range(1, 7))
def test_symmetric_orbits(hexagon, k):
    o = symmetric_orbit(hexagon, k)
    assert o.n == 12 // math.gcd(12, k)
    assert o.closure_residual < 1e-10
    # every vertex sits on a symmetry axis at a 30-degree multiple
    ang = np.degrees(np.arctan2(o.xy[:, 1], o.xy[:, 0]))
    np.testing.assert_allclose((ang + 360) % 30, 0, atol=1e-9)


def test_symmetric_diameter(hexagon):
    o = symmetric_orbit(hexagon, 6)
    np.testing.assert_allclose(sorted(o.xy[:, 0]), [-1 - SQ6, 1 + SQ6], atol=1e-13)
    np.testing.assert_allclose(o.theta, math.pi / 2, atol=1e-12)


def test_symmetric_triangles(hexagon):
    S = {(0.0, round(2 * SQ3, 9)), (3.0, round(-SQ3, 9)), (-3.0, round(-SQ3, 9))}
    tri = symmetric_orbit(hexagon, 4, phase="junction")
    assert {(round(x, 9) + 0.0, round(y, 9)) for x, y in tri.xy} == S
    assert tri.perimeter == pytest.approx(18.0, abs=1e-12)
    mid = symmetric_orbit(hexagon, 4)
    assert mid.perimeter == pytest.approx(3 * SQ3 * (1 + SQ6), abs=1e-12)


def test_symmetric_domain(hexagon):
    with pytest.raises(DomainError):
        symmetric_orbit(hexagon, 7)
    with pytest.raises(DomainError):
        symmetric_orbit(hexagon, 2, phase="edge")


def test_birkhoff_triangles_and_similarity_ratio(hexagon):
    a, b = birkhoff_pair(hexagon, 3, 1)
    assert a.perimeter == pytest.approx(18.0, abs=1e-10)
    assert b.perimeter == pytest.approx(3 * SQ3 * (1 + SQ6), abs=1e-10)
    assert similarity_ratio(a, b) == pytest.approx(2 * SQ3 * (SQ6 - 1) / 5, abs=1e-10)
    assert analyze(hexagon, a).tag == "unstable"
    assert analyze(hexagon, b).tag == "stable"


@pytest.mark.parametrize("n,k", [(4, 1), (5, 1), (5, 2), (12, 5)])
def test_birkhoff_pairs_distinct(hexagon, n, k):
    a, b = birkhoff_pair(hexagon, n, k)
    assert (a.n, a.k, b.n, b.k) == (n, k, n, k)
    assert canonical_form(a) != canonical_form(b)
    assert a.perimeter >= b.perimeter
    for o in (a, b):
        assert o.closure_residual < 1e-10


def test_birkhoff_domain(hexagon):
    with pytest.raises(DomainError):
        birkhoff_pair(hexagon, 6, 2)


def test_stable_12_5_geometry(hexagon):
    _, b = birkhoff_pair(hexagon, 12, 5)
    # departing angles all 5 pi / 12 and two alternating chord lengths
    np.testing.assert_allclose(b.theta, 5 * math.pi / 12, atol=1e-9)
    rho = b.chord_lengths
    np.testing.assert_allclose(rho[::2], rho[0], atol=1e-9)
    np.testing.assert_allclose(rho[1::2], rho[1], atol=1e-9)
    assert abs(rho[0] - rho[1]) > 1e-3


def test_seventeen_gon_stars_are_unstable(hexagon):
    for k in range(1, 9):
        a, _ = birkhoff_pair(hexagon, 17, k)
        assert (a.n, a.k) == (17, k)
        assert analyze(hexagon, a).tag == "unstable"


def test_orbit_closes_under_tracing(hexagon):
    o = find_periodic_orbit(hexagon, 7, 3)
    d = (o.xy[1] - o.xy[0]) / np.linalg.norm(o.xy[1] - o.xy[0])
    tr = trace(hexagon, o.xy[0], d, 7)
    np.testing.assert_allclose(tr.points[-1], o.xy[0], atol=1e-9)


def test_find_periodic_orbit_domain(hexagon):
    with pytest.raises(DomainError):
        find_periodic_orbit(hexagon, 5, 5)
    with pytest.raises(DomainError):
        find_periodic_orbit(hexagon, 5, 2, seed=np.zeros(3))


def test_make_orbit_rejects_open_polygons(hexagon):
    with pytest.raises(SearchFailure):
        make_orbit(hexagon, [0.1, 2.3, 4.1])


def test_canonical_form_symmetries(hexagon):
    o = symmetric_orbit(hexagon, 5)
    rotated = make_orbit(hexagon, o.u + 1.0)  # one arc on: rotation by pi/3
    reversed_ = make_orbit(hexagon, o.u[::-1])
    relabeled = make_orbit(hexagon, np.roll(o.u, 4))
    key = canonical_form(o)
    assert canonical_form(rotated) == key
    assert canonical_form(reversed_) == key
    assert canonical_form(relabeled) == key


def test_dict_round_trip(hexagon):
    a, _ = birkhoff_pair(hexagon, 5, 2)
    d = a.to_dict()
    b = make_orbit(hexagon, np.array(d["u"]), k=d["k"])
    np.testing.assert_allclose(b.xy, a.xy, atol=1e-14)


@pytest.mark.parametrize("n", [3, 4])
def test_exhaustive_count_small(hexagon, n):
    res = exhaustive_count(hexagon, n)
    assert res["expanded_total"] == TABLE_ONE[n]
    assert res["formula"] == TABLE_ONE[n]
    assert res["symmetry_classes"] == 2
