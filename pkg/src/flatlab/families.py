"""Explicit surfaces, parameter charts and horospherical samplers.

* :func:`build_h11` - two horizontal cylinders of height 1 glued along
  arcs of lengths ``b``, ``a - b`` and ``1 - a - b`` (stratum H(1,1)).
* :func:`build_h2` - a torus with a horizontal slit of length ``x`` with a
  cylinder of circumference ``x`` and height ``a`` glued in (stratum H(2)).
* :func:`build_two_tori` - two tori glued crosswise along a horizontal
  slit (stratum H(1,1)); a test bed without horizontal cylinders.
* Haar-random unimodular lattices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, SamplerStarved
from .geom import Vec2
from .mesh import Mesh
from .surface import PathSpec, PeriodVector, TranslationSurface


# ---- simple surfaces -------------------------------------------------------


def torus_surface(u, v) -> TranslationSurface:
    """Flat torus R^2 / (Zu + Zv) as one parallelogram, basis ``a = u``, ``b = v``."""
    u = (float(u[0]), float(u[1]))
    v = (float(v[0]), float(v[1]))
    det = u[0] * v[1] - u[1] * v[0]
    if det == 0:
        raise InvalidParameter("degenerate lattice basis")
    if det < 0:
        v = (-v[0], -v[1])
    pts = [(0.0, 0.0), u, (u[0] + v[0], u[1] + v[1]), v]
    basis = [
        PathSpec.from_points("a", [(0, (0.0, 0.0), u)]),
        PathSpec.from_points("b", [(0, (0.0, 0.0), v)]),
    ]
    return TranslationSurface([pts], [((0, 0), (0, 2)), ((0, 1), (0, 3))], basis)


def square_torus() -> TranslationSurface:
    return torus_surface((1.0, 0.0), (0.0, 1.0))


def regular_octagon(side: float = 1.0) -> TranslationSurface:
    """Regular octagon with opposite sides glued (one 6pi point, genus 2)."""
    pts = [(0.0, 0.0)]
    for k in range(7):
        ang = k * math.pi / 4
        x, y = pts[-1]
        pts.append((x + side * math.cos(ang), y + side * math.sin(ang)))
    pts = [(round(x, 15), round(y, 15)) for x, y in pts]
    glue = [((0, k), (0, k + 4)) for k in range(4)]
    basis = [
        PathSpec.from_points(f"e{k}", [(0, pts[k], pts[(k + 1) % 8])]) for k in range(4)
    ]
    return TranslationSurface([pts], glue, basis)


# ---- lattices ----------------------------------------------------------


@dataclass(frozen=True)
class Lattice:
    basis: tuple  # (Vec2, Vec2), positively oriented

    @property
    def covolume(self) -> float:
        (a, b), (c, d) = self.basis
        return abs(a * d - b * c)

    def scaled(self, c: float) -> "Lattice":
        (a, b), (p, q) = self.basis
        return Lattice((Vec2(c * a, c * b), Vec2(c * p, c * q)))

    def transformed(self, M) -> "Lattice":
        u, v = self.basis
        return Lattice((M(u), M(v)))

    def reduced(self) -> "Lattice":
        u, v = gauss_reduce(*self.basis)
        return Lattice((u, v))

    def vectors_in_disk(self, r: float):
        """Nonzero lattice vectors of norm at most ``r``."""
        u, v = gauss_reduce(*self.basis)
        A = self.covolume
        nu = math.hypot(*u)
        nmax = int(math.floor(r * nu / A)) + 1
        out = []
        for n in range(-nmax, nmax + 1):
            cx, cy = n * v[0], n * v[1]
            # solve |m u + c| <= r for m
            t0 = -(cx * u[0] + cy * u[1]) / (nu * nu)
            perp2 = (cx + t0 * u[0]) ** 2 + (cy + t0 * u[1]) ** 2
            if perp2 > r * r:
                continue
            half = math.sqrt(r * r - perp2) / nu
            for m in range(math.ceil(t0 - half), math.floor(t0 + half) + 1):
                if m == 0 and n == 0:
                    continue
                x, y = m * u[0] + cx, m * u[1] + cy
                if x * x + y * y <= r * r * (1 + 1e-12):
                    out.append(Vec2(x, y))
        return out

    def primitive_vectors(self, r: float):
        (a, b), (c, d) = self.basis
        det = a * d - b * c
        out = []
        for w in self.vectors_in_disk(r):
            m = round((w[0] * d - w[1] * c) / det)
            n = round((a * w[1] - b * w[0]) / det)
            if math.gcd(abs(m), abs(n)) == 1:
                out.append(w)
        return out


def gauss_reduce(u, v):
    """Lagrange-Gauss reduction; returns a positively oriented reduced basis."""
    u = np.array(u, dtype=float)
    v = np.array(v, dtype=float)
    if u @ u > v @ v:
        u, v = v, u
    for _ in range(200):
        mu = round((u @ v) / (u @ u))
        v = v - mu * u
        if v @ v >= u @ u:
            break
        u, v = v, u
    if u[0] * v[1] - u[1] * v[0] < 0:
        v = -v
    return Vec2(float(u[0]), float(u[1])), Vec2(float(v[0]), float(v[1]))


def sample_torus_haar(rng: np.random.Generator) -> Lattice:
    """Haar-random unimodular lattice.

    The shape ``z = u + iv`` is drawn from the modular fundamental domain
    with density proportional to ``1/v^2`` (Pareto proposal in ``v``,
    uniform ``u``, reject ``|z| < 1``); the basis ``(1, 0), (u, v)`` is
    scaled by ``1/sqrt(v)`` and rotated by a uniform angle.
    """
    v0 = math.sqrt(3.0) / 2
    while True:
        u = rng.uniform(-0.5, 0.5)
        v = v0 / (1.0 - rng.random())
        if u * u + v * v >= 1.0:
            break
    s = 1.0 / math.sqrt(v)
    th = rng.uniform(0.0, 2 * math.pi)
    c, si = math.cos(th), math.sin(th)
    e1 = (s, 0.0)
    e2 = (u * s, v * s)
    rot = lambda p: Vec2(c * p[0] - si * p[1], si * p[0] + c * p[1])
    return Lattice((rot(e1), rot(e2)))


def sample_haar_shapes(rng, n):
    """Vectorised shapes ``(u, v)`` of ``n`` Haar lattices (rotation omitted)."""
    v0 = math.sqrt(3.0) / 2
    us = np.empty(n)
    vs = np.empty(n)
    filled = 0
    while filled < n:
        k = max(2 * (n - filled), 64)
        u = rng.uniform(-0.5, 0.5, k)
        v = v0 / (1.0 - rng.random(k))
        ok = u * u + v * v >= 1.0
        u, v = u[ok], v[ok]
        take = min(len(u), n - filled)
        us[filled:filled + take] = u[:take]
        vs[filled:filled + take] = v[:take]
        filled += take
    return us, vs


def count_in_disk_shapes(us, vs, r):
    """Nonzero lattice points in the disk of radius ``r`` for each shape."""
    sq = np.sqrt(vs)
    total = np.zeros(len(us), dtype=np.int64)
    nmax = int(math.ceil(r / math.sqrt(math.sqrt(3) / 2))) + 1
    for n in range(-nmax, nmax + 1):
        y = n * sq
        rem = r * r - y * y
        ok = rem >= 0
        half = np.sqrt(np.where(ok, rem, 0.0)) * sq
        c = -n * us
        cnt = np.floor(c + half) - np.ceil(c - half) + 1
        cnt = np.where(ok, np.maximum(cnt, 0), 0).astype(np.int64)
        if n == 0:
            cnt -= 1
        total += cnt
    return total


def shortest_horizontal_vector(lattice: Lattice, tol=1e-12):
    """Length of the shortest nonzero horizontal lattice vector, or ``None``."""
    u, v = gauss_reduce(*lattice.basis)
    for _ in range(60):
        # squash horizontally so that near-horizontal vectors become short
        if abs(u[1]) <= tol * max(1.0, abs(u[0])):
            return abs(u[0])
        if abs(v[1]) <= tol * max(1.0, abs(v[0])):
            return abs(v[0])
        uu, vv = gauss_reduce((u[0] * 1e-2, u[1]), (v[0] * 1e-2, v[1]))
        u = Vec2(uu[0] * 1e2, uu[1])
        v = Vec2(vv[0] * 1e2, vv[1])
        if math.hypot(u[0], u[1]) > 1e12:
            return None
    return None


# ---- H(1,1) two-cylinder family ----------------------------------------


@dataclass(frozen=True)
class H11Point:
    """Parameters of the two-cylinder family.

    ``tau1``, ``tau2`` are in [0, 1); the twists are ``tau1_bar = a tau1``
    (circumference ``a`` cylinder) and ``tau2_bar = (1 - a) tau2``.
    """

    a: float
    b: float
    tau1: float = 0.0
    tau2: float = 0.0

    def __post_init__(self):
        a, b = self.a, self.b
        if not (0 < a < 1):
            raise InvalidParameter(f"need 0 < a < 1, got a={a}")
        if not (0 < b < min(a, 1 - a)):
            raise InvalidParameter(f"need 0 < b < min(a, 1-a), got b={b}")

    @property
    def tau1_bar(self):
        return self.a * (self.tau1 % 1.0)

    @property
    def tau2_bar(self):
        return (1 - self.a) * (self.tau2 % 1.0)

    @classmethod
    def from_bars(cls, a, b, t1bar, t2bar):
        return cls(a, b, (t1bar / a) % 1.0, (t2bar / (1 - a)) % 1.0)

    def periods(self) -> PeriodVector:
        a, b = self.a, self.b
        return PeriodVector(
            ((b, 0.0), (a - b, 0.0), (1 - a - b, 0.0), (self.tau2_bar, 1.0), (self.tau1_bar, 1.0)),
            H11_BASIS,
            "h11",
        )


H11_BASIS = ("b", "a-b", "1-a-b", "cross2", "cross1")


def build_h11(p: H11Point, b=None, tau1=None, tau2=None) -> TranslationSurface:
    """Surface of the two-cylinder H(1,1) family.

    Accepts an :class:`H11Point` or the raw numbers ``(a, b, tau1, tau2)``.
    Polygon 0 is the cylinder of circumference ``1 - a`` (bottom), polygon 1
    the cylinder of circumference ``a`` on top of it; both have height 1.
    """
    if not isinstance(p, H11Point):
        p = H11Point(p, b, tau1 or 0.0, tau2 or 0.0)
    a, b = p.a, p.b
    t1, t2 = p.tau1_bar, p.tau2_bar
    c = 1 - a
    bottom = [
        (0.0, 0.0),
        (c - b, 0.0),
        (c, 0.0),
        (t2 + c, 1.0),
        (t2 + c - b, 1.0),
        (t2, 1.0),
    ]
    x0 = t2 + c - b
    top = [
        (x0, 1.0),
        (x0 + b, 1.0),
        (x0 + a, 1.0),
        (x0 + a + t1, 2.0),
        (x0 + b + t1, 2.0),
        (x0 + t1, 2.0),
    ]
    glue = [
        ((0, 2), (0, 5)),
        ((0, 0), (0, 4)),
        ((0, 3), (1, 0)),
        ((0, 1), (1, 4)),
        ((1, 1), (1, 3)),
        ((1, 2), (1, 5)),
    ]
    basis = [
        PathSpec.from_points("b", [(0, bottom[1], bottom[2])]),
        PathSpec.from_points("a-b", [(1, top[1], top[2])]),
        PathSpec.from_points("1-a-b", [(0, bottom[0], bottom[1])]),
        PathSpec.from_points("cross2", [(0, bottom[0], bottom[5])]),
        PathSpec.from_points("cross1", [(1, top[0], top[5])]),
    ]
    return TranslationSurface([bottom, top], glue, basis)


def sample_h11(rng: np.random.Generator) -> H11Point:
    """Draw from ``da db dtau1_bar dtau2_bar`` on the family's domain."""
    while True:
        a, b = rng.random(), rng.random()
        if 0 < b < min(a, 1 - a):
            break
    return H11Point(a, b, rng.random(), rng.random())


# ---- H(2) slit torus bundle ----------------------------------------------


@dataclass(frozen=True)
class H2Point:
    """Point of the slit-torus bundle: slit length ``x``, twist ``tau``.

    ``lattice`` has covolume ``1 - a x``.
    """

    a: float
    x: float
    tau: float
    lattice: Lattice

    def __post_init__(self):
        a, x, tau = self.a, self.x, self.tau
        if not a > 0:
            raise InvalidParameter("need a > 0")
        if not (0 <= tau < x < 1 / a):
            raise InvalidParameter(f"need 0 <= tau < x < 1/a, got x={x}, tau={tau}")
        if abs(self.lattice.covolume - (1 - a * x)) > 1e-9:
            raise InvalidParameter("lattice covolume must equal 1 - a x")


H2_BASIS = ("lambda1", "lambda2", "slit", "crossing")


def _slit_frame(lattice: Lattice, x: float):
    """Basis ``(w, v)`` of the lattice with ``0 < v_y < covol / x``.

    ``w`` is shifted by multiples of ``v`` to sit as close as possible to
    the slit vector ``(x, 0)``.
    """
    A = lattice.covolume
    hmin = shortest_horizontal_vector(lattice)
    if hmin is not None and hmin <= x + 1e-12:
        raise InvalidParameter("slit is not embedded: short horizontal lattice vector")
    bound = A / x
    u0, v0 = lattice.basis
    delta = 1.0
    for _ in range(200):
        u, v = gauss_reduce((u0[0] * delta, u0[1]), (v0[0] * delta, v0[1]))
        u = Vec2(u[0] / delta, u[1])
        v = Vec2(v[0] / delta, v[1])
        for cand, other in ((u, v), (v, u)):
            if abs(cand[1]) > 1e-14 * max(1.0, abs(cand[0])) and abs(cand[1]) < bound:
                vv = cand if cand[1] > 0 else Vec2(-cand[0], -cand[1])
                w = other
                if w[0] * vv[1] - w[1] * vv[0] < 0:
                    w = Vec2(-w[0], -w[1])
                # shift w towards the slit vector
                vv2 = vv[0] ** 2 + vv[1] ** 2
                k = round(((x - w[0]) * vv[0] + (0 - w[1]) * vv[1]) / vv2)
                w = Vec2(w[0] + k * vv[0], w[1] + k * vv[1])
                return w, vv
        delta *= 0.25
    raise InvalidParameter("could not find a lattice frame for the slit")


def _slit_hexagon(lattice: Lattice, x: float):
    w, v = _slit_frame(lattice, x)
    s = (x, 0.0)
    return [
        (0.0, 0.0),
        s,
        tuple(w),
        (w[0] + v[0], w[1] + v[1]),
        (x + v[0], v[1]),
        tuple(v),
    ]


def build_h2(p: H2Point) -> TranslationSurface:
    """Slit torus with a cylinder glued in, triangulated.

    The torus ``R^2/lattice`` is cut along the horizontal segment from 0 to
    ``(x, 0)``.  The cylinder of circumference ``x`` and height ``a`` has
    its top glued to the lower side of the slit and its bottom to the upper
    side; its crossing connection has holonomy ``(tau, a)``.
    """
    a, x, tau = p.a, p.x, p.tau
    hexa = _slit_hexagon(p.lattice, x)
    cyl = [(-tau, -a), (x - tau, -a), (x, 0.0), (0.0, 0.0)]
    glue = [
        ((0, 1), (0, 3)),
        ((0, 2), (0, 5)),
        ((0, 0), (1, 2)),
        ((0, 4), (1, 0)),
        ((1, 1), (1, 3)),
    ]
    walks = [
        [(0, 0, 1), (0, 1, 1)],  # lambda1 = w
        [(0, 5, -1)],  # lambda2 = v
        [(0, 0, 1)],  # slit
        [(1, 3, -1)],  # crossing, from bottom to top of the cylinder
    ]
    flags = [[True] * 6, [True] * 4]
    m = Mesh.from_pieces([hexa, cyl], glue, flags, walks)
    return m.to_surface(H2_BASIS)


def h2_periods(p: H2Point) -> PeriodVector:
    w, v = _slit_frame(p.lattice, p.x)
    return PeriodVector((tuple(w), tuple(v), (p.x, 0.0), (p.tau, p.a)), H2_BASIS, "h2")


def sample_h2(a: float, rng: np.random.Generator, max_tries: int = 1000) -> H2Point:
    """Draw from the bundle measure: ``dtau dx`` on the triangle, Haar lattice."""
    if not a > 0:
        raise InvalidParameter("need a > 0")
    x = math.sqrt(rng.random()) / a
    while x <= 0.0:
        x = math.sqrt(rng.random()) / a
    tau = rng.uniform(0.0, x)
    A = 1 - a * x
    for _ in range(max_tries):
        lat = sample_torus_haar(rng).scaled(math.sqrt(A))
        h = shortest_horizontal_vector(lat)
        if h is None or h > x:
            return H2Point(a, x, tau, lat)
    raise SamplerStarved(f"no embeddable lattice after {max_tries} draws (x={x})")


# ---- two tori glued along a slit ------------------------------------------


def build_two_tori(lat1: Lattice, lat2: Lattice, x: float) -> TranslationSurface:
    """Two tori glued crosswise along a horizontal slit of length ``x``.

    The slit endpoints become two cone points of angle 4pi.  The basis is
    the frames of both tori followed by the slit.
    """
    h1 = _slit_hexagon(lat1, x)
    h2 = _slit_hexagon(lat2, x)
    glue = [
        ((0, 1), (0, 3)),
        ((0, 2), (0, 5)),
        ((1, 1), (1, 3)),
        ((1, 2), (1, 5)),
        ((0, 0), (1, 4)),
        ((0, 4), (1, 0)),
    ]
    walks = [
        [(0, 0, 1), (0, 1, 1)],
        [(0, 5, -1)],
        [(1, 0, 1), (1, 1, 1)],
        [(1, 5, -1)],
        [(0, 0, 1)],
    ]
    flags = [[True] * 6, [True] * 6]
    m = Mesh.from_pieces([h1, h2], glue, flags, walks)
    return m.to_surface(("w1", "v1", "w2", "v2", "slit"))
