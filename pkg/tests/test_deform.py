import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import same_vectors
from flatlab.deform import (
    SHEAR,
    STRETCH,
    SurgerySpec,
    cylinder_surgery,
    extend_horizontal_scs,
    find_cylinder_in_direction,
    flow,
    rel,
    stretch_parameter_for_area,
)
from flatlab.errors import InvalidParameter, InvalidSurgery, RelDomainExceeded
from flatlab.experiments import best_extension_cylinder
from flatlab.families import H11Point, build_h11, build_two_tori, regular_octagon, sample_torus_haar, square_torus
from flatlab.geom import Mat2
from flatlab.surface import area, periods, validate
from flatlab.trace import (
    Periodic,
    horizontal_cylinders,
    horizontal_saddle_connections,
    saddle_connections,
    shortest_horizontal_sc,
)

h11_points = st.tuples(
    st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.floats(0, 0.999), st.floats(0, 0.999)
).map(lambda t: H11Point(t[0], t[1] * min(t[0], 1 - t[0]), t[2], t[3]))


def holonomies(q, L):
    return [tuple(s.holonomy) for s in saddle_connections(q, L)]


def cylinders(q):
    res = horizontal_cylinders(q, 10)
    assert isinstance(res, Periodic)
    return res.cylinders


def twist_of(q, circ):
    for c in cylinders(q):
        if abs(c.circumference - circ) < 1e-9:
            return c.twist
    raise AssertionError("no cylinder of that circumference")


def cdist(a, b, c):
    d = (a - b) % c
    return min(d, c - d)


# ---- flows ---------------------------------------------------------------


def test_flow_identities():
    q = build_h11(0.6, 0.1, 0.3, 0.8)
    assert flow(q, "horocycle", 0.0).almost_equal(q)
    back = flow(flow(q, "geodesic", 0.8), "geodesic", -0.8)
    assert back.almost_equal(q, 1e-9)
    assert area(flow(q, "rescale", 2.0)) == pytest.approx(4.0)
    with pytest.raises(InvalidParameter):
        flow(q, "rescale", -1.0)


@given(h11_points, st.floats(-2, 2))
def test_horocycle_moves_twists(p, s):
    q = flow(build_h11(p), "horocycle", s)
    # each crossing curve has height 1, so twists move by s
    assert cdist(twist_of(q, p.a), p.tau1_bar + s, p.a) < 1e-9 or abs(p.a - 0.5) < 1e-6
    assert cdist(twist_of(q, 1 - p.a), p.tau2_bar + s, 1 - p.a) < 1e-9 or abs(p.a - 0.5) < 1e-6


# ---- cylinder surgery ---------------------------------------------------------


def test_full_twist_of_square_torus():
    q = square_torus()
    (c,) = cylinders(q)
    r = cylinder_surgery(q, SurgerySpec([(c, 1.0)], SHEAR, 1.0))
    assert validate(r).ok
    assert same_vectors(holonomies(q, 3), holonomies(r, 3), 1e-9)


def test_zero_surgery_is_identity():
    q = build_h11(0.6, 0.1, 0.3, 0.8)
    c = cylinders(q)[0]
    assert cylinder_surgery(q, SurgerySpec([(c, 1.0)], STRETCH, 0.0)) is q
    assert cylinder_surgery(q, SurgerySpec([(c, 1.0)], SHEAR, 0.0)) is q


def test_shear_one_cylinder():
    p = H11Point(0.6, 0.1, 0.3, 0.8)
    q = build_h11(p)
    ca = [c for c in cylinders(q) if abs(c.circumference - 0.6) < 1e-9][0]
    d = 0.17
    r = cylinder_surgery(q, SurgerySpec([(ca, 1.0)], SHEAR, d))
    P, Q = periods(q).as_dict(), periods(r).as_dict()
    assert Q["cross1"][0] == pytest.approx(P["cross1"][0] + d * ca.height, abs=1e-9)
    for k in ("b", "a-b", "1-a-b", "cross2"):
        assert Q[k] == pytest.approx(P[k], abs=1e-9)
    assert cdist(twist_of(r, 0.6), p.tau1_bar + d, 0.6) < 1e-9
    assert cdist(twist_of(r, 0.4), p.tau2_bar, 0.4) < 1e-9


@given(h11_points, st.floats(-0.7, 0.7), st.floats(-0.7, 0.7))
def test_shears_compose(p, s1, s2):
    q = build_h11(p)
    cyls = cylinders(q)
    spec = lambda s: SurgerySpec([(c, 1.0) for c in cyls], SHEAR, s)
    once = cylinder_surgery(q, spec(s1 + s2))
    r = cylinder_surgery(q, spec(s1))
    twice = cylinder_surgery(r, SurgerySpec([(c, 1.0) for c in cylinders(r)], SHEAR, s2))
    assert np.allclose(periods(once).x, periods(twice).x, atol=1e-9)
    assert np.allclose(periods(once).y, periods(twice).y, atol=1e-9)


def test_stretch_changes_height():
    q = build_h11(0.6, 0.1, 0.3, 0.8)
    c = cylinders(q)[0]
    r = cylinder_surgery(q, SurgerySpec([(c, 1.0)], STRETCH, math.log(2)))
    assert sorted(x.height for x in cylinders(r)) == pytest.approx([1, 2])
    assert area(r) == pytest.approx(1 + c.area)


def test_overlapping_cylinders_rejected():
    q = build_h11(0.6, 0.1, 0.3, 0.8)
    c = cylinders(q)[0]
    with pytest.raises(InvalidSurgery):
        cylinder_surgery(q, SurgerySpec([(c, 1.0), (c, 1.0)], SHEAR, 0.2))


def test_surgery_spec_validation():
    with pytest.raises(InvalidParameter):
        SurgerySpec([], "twist", 1.0)
    with pytest.raises(InvalidParameter):
        SurgerySpec([(None, 0.0)], SHEAR, 1.0)


# ---- Rel ------------------------------------------------------------------


def test_rel_examples():
    p = H11Point(0.6, 0.1, 0.3, 0.8)
    assert rel(p, 0.0) == p
    r = rel(p, 0.15)
    assert r.b == pytest.approx(0.25)
    assert (r.tau1_bar, r.tau2_bar) == pytest.approx((p.tau1_bar, p.tau2_bar))
    with pytest.raises(RelDomainExceeded) as exc:
        rel(p, 0.35)
    assert exc.value.max_dv == pytest.approx(0.3)


def test_rel_fixes_absolute_periods():
    p = H11Point(0.6, 0.1, 0.3, 0.8)
    P, Q = periods(build_h11(p)).as_dict(), periods(build_h11(rel(p, 0.1))).as_dict()
    # a = b + (a - b) and 1 - a = b + (1 - a - b) are absolute; the crossing curves too
    assert P["b"][0] + P["a-b"][0] == pytest.approx(Q["b"][0] + Q["a-b"][0])
    assert P["b"][0] + P["1-a-b"][0] == pytest.approx(Q["b"][0] + Q["1-a-b"][0])
    assert Q["b"][0] - P["b"][0] == pytest.approx(0.1)


# ---- cylinders in other directions and the extension step --------------------


def test_vertical_cylinder_of_square_torus():
    (c,) = find_cylinder_in_direction(square_torus(), math.pi / 2, 10)
    assert (c.circumference, c.height) == pytest.approx((1, 1))
    assert c.core_direction == pytest.approx((0, 1), abs=1e-15)


def test_octagon_diagonal_cylinders():
    cyls = find_cylinder_in_direction(regular_octagon(), math.pi / 4, 20)
    r = math.sqrt(2)
    got = sorted(v for c in cyls for v in (c.circumference, c.height))
    assert got == pytest.approx(sorted([1 + r, 1.0, 2 + r, 1 / r]), abs=1e-9)
    assert sum(c.area for c in cyls) == pytest.approx(area(regular_octagon()))


def test_h11_verticals_meet_horizontal_connections():
    # a vertical closed curve crosses the horizontal cylinder boundaries
    for c in find_cylinder_in_direction(build_h11(0.6, 0.1, 0, 0), math.pi / 2, 10):
        assert c.avoids_horizontal is False


def test_extension_factor():
    class C:
        circumference, height, frame_angle = 1.0, 0.5, math.pi / 2

    assert 1 / (1 - 0.5 / 2) == pytest.approx(4 / 3)
    q = build_h11(0.6, 0.1, 0, 0)
    with pytest.raises(InvalidSurgery):
        c = find_cylinder_in_direction(q, math.pi / 2, 10)[0]
        extend_horizontal_scs(q, c)


def test_extension_on_b_arc():
    q = build_h11(0.6, 0.1, 0, 0)
    (c,) = [c for c in find_cylinder_in_direction(q, math.pi / 2, 10) if abs(c.area - 0.3) < 1e-9]
    # this cylinder avoids both b arcs but crosses the 1-a-b arc
    st = extend_horizontal_scs(q, c, check=False)
    assert st.t == pytest.approx(1 / 0.85)
    assert area(st.surface) == pytest.approx(1)
    assert shortest_horizontal_sc(st.surface, 5) == pytest.approx(0.1 / 0.85, rel=1e-9)


def test_small_cylinder_is_nearly_noop():
    # A -> 0 gives t -> 1
    class C:
        circumference, height = 1e-8, 1.0

    assert 1 / (1 - C.circumference * C.height / 2) == pytest.approx(1, abs=1e-8)


def test_extension_on_two_tori():
    rng = np.random.default_rng(3)
    s = math.sqrt(0.5)
    q = build_two_tori(sample_torus_haar(rng).scaled(s), sample_torus_haar(rng).scaled(s), 0.05)
    l0 = shortest_horizontal_sc(q, 10)
    before = sorted(L for _, _, L, _ in horizontal_saddle_connections(q, 3) if L > 0)
    c, _ = best_extension_cylinder(q, 10, 2.0)
    assert c is not None
    st = extend_horizontal_scs(q, c)
    after = sorted(L for _, _, L, _ in horizontal_saddle_connections(st.surface, 3 * st.t) if L > 0)
    assert st.t == pytest.approx(1 / (1 - c.area / 2))
    assert len(after) >= len(before)
    for L in before:
        assert any(abs(M - st.t * L) <= 1e-9 * st.t * L for M in after)
    assert shortest_horizontal_sc(st.surface, 10) == pytest.approx(st.t * l0, rel=1e-9)
    assert area(st.surface) == pytest.approx(1)


def test_stretch_parameter():
    class C:
        def __init__(self, c, h):
            self.circumference, self.height = c, h

    cyls = [(C(1.0, 0.3), 1.0), (C(0.5, 0.2), 2.0)]
    s = stretch_parameter_for_area(cyls, 0.1)
    removed = sum(c.circumference * c.height * (1 - math.exp(s * h)) for c, h in cyls)
    assert s < 0 and removed == pytest.approx(0.1)
    with pytest.raises(InvalidParameter):
        stretch_parameter_for_area(cyls, 1.0)
