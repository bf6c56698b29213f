import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import primitive_lattice_vectors, same_vectors
from flatlab.errors import UnsupportedSurface
from flatlab.families import (
    build_h11,
    regular_octagon,
    sample_h2,
    build_h2,
    sample_torus_haar,
    square_torus,
    torus_surface,
)
from flatlab.geom import Mat2, geodesic, horocycle, rotate
from flatlab.mesh import delaunay_min_edge
from flatlab.surface import apply_matrix, area
from flatlab.trace import (
    DegenerateHit,
    HitSingularity,
    LengthCap,
    NotPeriodicWithinCap,
    Periodic,
    Prong,
    horizontal_cylinders,
    horizontal_saddle_connections,
    saddle_connections,
    saddle_connections_in_box,
    shortest_horizontal_sc,
    shortest_sc,
    sup_norm,
    trace_generic,
    trace_ray,
)

h11_params = st.tuples(
    st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0, 0.999), st.floats(0, 0.999)
).map(lambda t: (t[0], t[1] * min(t[0], 1 - t[0]), t[2], t[3]))


def holonomies(scs):
    return [tuple(sc.holonomy) for sc in scs]


# ---- ray tracing -------------------------------------------------------


def test_horizontal_ray_on_torus_hits_marked_point():
    tr = trace_ray(square_torus(), Prong(0, 0), (1, 0), 1.5)
    assert isinstance(tr.termination, HitSingularity)
    assert tr.length == pytest.approx(1)


def test_irrational_slope_reaches_the_cap():
    phi = (1 + math.sqrt(5)) / 2
    tr = trace_ray(square_torus(), Prong(0, 0), (1, phi), 10)
    assert isinstance(tr.termination, LengthCap)
    assert tr.length == pytest.approx(10)
    # oracle: no primitive vector of norm <= 10 has slope phi
    for x, y in primitive_lattice_vectors((1, 0), (0, 1), 10):
        assert abs(x * phi - y) > 1e-6


def test_octagon_side_is_a_connection():
    tr = trace_ray(regular_octagon(), Prong(0, 0), (1, 0), 5)
    assert isinstance(tr.termination, HitSingularity)
    assert tr.length == pytest.approx(1)


def test_trajectory_segments_are_connected():
    q = build_h11(0.6, 0.1, 0.3, 0.2)
    tr = trace_ray(q, (0, (0.2, 0.3)), (0.31, 1.0), 7.5)
    total = sum(math.dist(a, b) for _, a, b in tr.segments)
    assert total == pytest.approx(tr.length, abs=1e-9)
    assert tr.length <= 7.5 + 1e-9
    for (p, _, b), (p2, a2, _), (cp, ce) in zip(tr.segments, tr.segments[1:], tr.crossings):
        assert cp == p
        tx, ty = q.glue_translation(cp, ce)
        assert (b[0] + tx, b[1] + ty) == pytest.approx(a2, abs=1e-12)
        assert q.partner[(cp, ce)][0] == p2


def test_near_vertex_is_degenerate():
    # passes at distance about 5e-9 from the torus vertex
    tr = trace_ray(square_torus(), (0, (0.5, 0.5)), (0.5, 0.5 + 1e-8), 2)
    assert isinstance(tr.termination, DegenerateHit)
    tr2, da = trace_generic(square_torus(), (0, (0.5, 0.5)), (0.5, 0.5 + 1e-8), 2)
    assert not isinstance(tr2.termination, DegenerateHit) and da != 0


def test_bad_arguments():
    with pytest.raises(ValueError):
        trace_ray(square_torus(), Prong(0, 0), (0, 0), 1)
    with pytest.raises(ValueError):
        trace_ray(square_torus(), Prong(0, 0), (1, 0), 0)


# ---- saddle connections ---------------------------------------------------


def test_square_torus_short_connections():
    scs = saddle_connections(square_torus(), 1.0)
    assert sorted(holonomies(scs)) == [(-1, 0), (0, -1), (0, 1), (1, 0)]
    # L=1.5 adds the four diagonals
    assert len(saddle_connections(square_torus(), 1.5)) == 8


def test_connections_have_consistent_lengths():
    for sc in saddle_connections(build_h11(0.6, 0.1, 0.3, 0.2), 2.0):
        assert sc.length > 0
        assert sc.length == pytest.approx(math.hypot(*sc.holonomy), abs=1e-12)


def test_connections_are_sorted_and_monotone():
    q = build_h11(0.45, 0.2, 0.1, 0.8)
    a = saddle_connections(q, 1.5)
    b = saddle_connections(q, 2.5)
    assert [s.length for s in a] == sorted(s.length for s in a)
    assert len(a) <= len(b)
    assert same_vectors(holonomies(a), [h for h in holonomies(b) if math.hypot(*h) <= 1.5])


def test_h11_horizontal_arcs():
    a, b = 0.6, 0.1
    q = build_h11(a, b, 0.37, 0.52)
    lengths = sorted(round(abs(sc.holonomy[0]), 9) for sc in saddle_connections(q, 0.55)
                     if abs(sc.holonomy[1]) < 1e-12)
    assert set(lengths) == {round(b, 9), round(a - b, 9), round(1 - a - b, 9)}
    hs = sorted(round(L, 9) for _, _, L, _ in horizontal_saddle_connections(q, 2) if L > 0)
    assert set(hs) == {round(b, 9), round(a - b, 9), round(1 - a - b, 9)}


def test_half_half_arcs():
    q = build_h11(0.5, 0.25, 0, 0)
    hs = [L for _, _, L, _ in horizontal_saddle_connections(q, 2) if L > 0]
    # one rightward connection per prong: two prongs at each of the two cone points
    assert hs == pytest.approx([0.25] * 4)


@pytest.mark.parametrize("seed", range(8))
def test_torus_oracle(seed):
    lat = sample_torus_haar(np.random.default_rng(seed))
    u, v = lat.basis
    q = torus_surface(u, v)
    for L in (1, 2, 5):
        got = holonomies(saddle_connections(q, L))
        assert same_vectors(got, primitive_lattice_vectors(u, v, L)), (seed, L)


@given(st.floats(0.05, 0.95), st.floats(-1, 1), st.floats(0.5, 2), st.floats(0, 3.1))
def test_torus_oracle_property(ux, vx, vy, theta):
    c, s = math.cos(theta), math.sin(theta)
    u = (c * ux / vy, s * ux / vy)
    v = (c * vx - s * vy, s * vx + c * vy)
    q = torus_surface(u, v)
    L = 3.0
    assert same_vectors(holonomies(saddle_connections(q, L)), primitive_lattice_vectors(u, v, L))


@given(h11_params, st.floats(0.5, 1.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_equivariance(params, a, b, c):
    d = (1 + b * c) / a
    M = Mat2(a, b, c, d)
    q = build_h11(*params)
    L = 1.2
    mq = [tuple(M(h)) for h in holonomies(saddle_connections(q, 4 * L))]
    mq = [h for h in mq if math.hypot(*h) <= L - 1e-7]
    got = [h for h in holonomies(saddle_connections(apply_matrix(q, M), L)) if math.hypot(*h) <= L - 1e-7]
    assert same_vectors(mq, got, 1e-9)


@given(st.integers(0, 10**6), st.floats(0.5, 1.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_equivariance_h2(seed, a, b, c):
    # slit edges give two horizontal connections with equal holonomy and distinct prongs
    M = Mat2(a, b, c, (1 + b * c) / a)
    q = build_h2(sample_h2(0.5, np.random.default_rng(seed)))
    L = 1.2
    mq = [tuple(M(h)) for h in holonomies(saddle_connections(q, 4 * L))]
    mq = [h for h in mq if math.hypot(*h) <= L - 1e-7]
    got = [h for h in holonomies(saddle_connections(apply_matrix(q, M), L)) if math.hypot(*h) <= L - 1e-7]
    assert same_vectors(mq, got, 1e-9)


def test_box_search_matches_disk_filter():
    q = build_h11(0.45, 0.2, 0.1, 0.8)
    X, Y = 1.5, 0.6
    box = holonomies(saddle_connections_in_box(q, X, Y))
    disk = [h for h in holonomies(saddle_connections(q, math.hypot(X, Y) + 0.01))
            if abs(h[0]) <= X and abs(h[1]) < Y]
    assert same_vectors(box, disk)


def test_shortest_sc_agrees_with_delaunay_oracle():
    rng = np.random.default_rng(7)
    for _ in range(20):
        q = build_h2(sample_h2(0.3, rng))
        q = apply_matrix(q, geodesic(rng.uniform(0, 2)))
        assert shortest_sc(q) == pytest.approx(delaunay_min_edge(q), rel=1e-9)


def test_shortest_sc_is_below_every_connection():
    q = build_h11(0.45, 0.2, 0.1, 0.8)
    assert shortest_sc(q) == pytest.approx(min(s.length for s in saddle_connections(q, 1)))


# ---- horizontal structure ----------------------------------------------


def test_square_torus_cylinder():
    res = horizontal_cylinders(square_torus(), 10)
    assert isinstance(res, Periodic) and len(res.cylinders) == 1
    c = res.cylinders[0]
    assert (c.circumference, c.height) == pytest.approx((1, 1))


def test_h11_cylinders():
    res = horizontal_cylinders(build_h11(0.6, 0.1, 0.3, 0.8), 10)
    assert isinstance(res, Periodic)
    circ = sorted(c.circumference for c in res.cylinders)
    assert circ == pytest.approx([0.4, 0.6], abs=1e-9)
    assert [c.height for c in res.cylinders] == pytest.approx([1, 1], abs=1e-9)


def test_rotated_h11_is_not_periodic():
    q = apply_matrix(build_h11(0.6, 0.1, 0.3, 0.8), rotate(0.3))
    res = horizontal_cylinders(q, 1e3)
    assert isinstance(res, NotPeriodicWithinCap)
    assert not any(abs(s.holonomy[1]) < 1e-9 for s in saddle_connections(q, 3))


def test_shortest_horizontal():
    q = build_h11(0.6, 0.1, 0, 0)
    assert shortest_horizontal_sc(q, 10) == pytest.approx(0.1)
    assert shortest_horizontal_sc(apply_matrix(square_torus(), rotate(0.3)), 100) is None
    t = 0.4
    assert shortest_horizontal_sc(apply_matrix(q, geodesic(t)), 10) == pytest.approx(0.1 * math.exp(t))


@given(h11_params)
def test_periodic_areas_add_up(params):
    q = build_h11(*params)
    res = horizontal_cylinders(q, 10)
    assert isinstance(res, Periodic)
    assert sum(c.circumference * c.height for c in res.cylinders) == pytest.approx(area(q), abs=1e-9)
    for c in res.cylinders:
        assert c.circumference > 0 and c.height > 0


@given(h11_params, st.floats(-3, 3))
def test_horizontal_count_is_horocycle_invariant(params, s):
    q = build_h11(*params)
    n0 = len(horizontal_saddle_connections(q, 5))
    n1 = len(horizontal_saddle_connections(apply_matrix(q, horocycle(s)), 5))
    assert n0 == n1


# ---- sup norm ------------------------------------------------------------


def test_sup_norm_examples():
    q = square_torus()
    assert sup_norm(q, [(0, 0), (0, 0)], 2) == 0
    assert sup_norm(q, [(2, 0), (0, 1)], 1) == pytest.approx(2)
    h = build_h11(0.6, 0.1, 0.3, 0.8)
    from flatlab.surface import periods

    assert sup_norm(h, periods(h).entries, 2) == pytest.approx(1)


def test_sup_norm_needs_a_basis():
    q = square_torus().with_basis(())
    with pytest.raises(UnsupportedSurface):
        sup_norm(q, [], 1)
