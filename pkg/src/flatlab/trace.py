"""Straight-line flow, saddle connections and horizontal cylinders.

Saddle connections are found by unfolding: from each corner of each
polygon we grow a tree of translated polygon copies, each seen through an
open wedge of directions.  A vertex strictly inside the wedge of a copy is
visible from the start, so the segment to it is a saddle connection; the
wedge is then split at every visible vertex and pushed through the far
edges into the glued neighbours.  Copies whose entry window lies outside
the search region are pruned.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedSurface
from .geom import DEFAULT_POLICY, NumericPolicy, Vec2, angle_between, rotate
from .surface import (
    TWO_PI,
    TranslationSurface,
    apply_matrix,
    cochain_from_basis,
    evaluate_walk,
)


@dataclass(frozen=True)
class SaddleConnection:
    holonomy: Vec2
    start: tuple  # (vertex_class, prong)
    end: tuple  # (vertex_class, prong) of the reversed connection
    crossing_word: tuple  # ((poly, edge), ...) edges crossed, in order
    start_corner: tuple
    end_corner: tuple

    @property
    def length(self) -> float:
        return math.hypot(*self.holonomy)

    @property
    def angle(self) -> float:
        return math.atan2(self.holonomy[1], self.holonomy[0]) % TWO_PI


@dataclass(frozen=True)
class HitSingularity:
    vertex_class: int
    corner: tuple


@dataclass(frozen=True)
class LengthCap:
    pass


@dataclass(frozen=True)
class DegenerateHit:
    corner: tuple
    distance: float


@dataclass
class Trajectory:
    segments: list
    termination: object
    length: float

    @property
    def crossing_word(self):
        return tuple(self.crossings)

    crossings: list = field(default_factory=list)


@dataclass(frozen=True)
class Prong:
    vertex_class: int
    index: int


# ---- search tables ---------------------------------------------------------


class _Table:
    """Flat per-surface arrays used by the inner search loops."""

    def __init__(self, surface: TranslationSurface):
        self.xs = [[v[0] for v in poly] for poly in surface.polygons]
        self.ys = [[v[1] for v in poly] for poly in surface.polygons]
        self.partner = surface.partner_table
        self.corners = [(p, i) for p, poly in enumerate(surface.polygons) for i in range(len(poly))]


def _table(surface) -> _Table:
    t = surface.__dict__.get("_trace_table")
    if t is None:
        t = _Table(surface)
        surface.__dict__["_trace_table"] = t
    return t


def _seg_dist2(ax, ay, bx, by):
    """Squared distance from the origin to segment AB."""
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return ax * ax + ay * ay
    t = -(ax * dx + ay * dy) / L2
    if t <= 0.0:
        return ax * ax + ay * ay
    if t >= 1.0:
        return bx * bx + by * by
    px, py = ax + t * dx, ay + t * dy
    return px * px + py * py


_FLAT = 1e-13


def _clip(ax, ay, bx, by, lx, ly, hx, hy):
    """Clip far edge AB to the open wedge (l, h).

    Returns the new wedge and the clipped window endpoints, or ``None``.
    """
    if lx * ay - ly * ax > 0.0:
        nlx, nly = ax, ay
        p1x, p1y = ax, ay
    else:
        nlx, nly = lx, ly
        dx, dy = bx - ax, by - ay
        den = lx * dy - ly * dx
        if den <= 0.0:
            return None
        t = (ax * dy - ay * dx) / den
        p1x, p1y = t * lx, t * ly
    if bx * hy - by * hx > 0.0:
        nhx, nhy = bx, by
        p2x, p2y = bx, by
    else:
        nhx, nhy = hx, hy
        dx, dy = bx - ax, by - ay
        den = hx * dy - hy * dx
        if den <= 0.0:
            return None
        t = (ax * dy - ay * dx) / den
        p2x, p2y = t * hx, t * hy
    # a numerically flat wedge is a ray through a vertex: nothing lies beyond it
    if nlx * nhy - nly * nhx <= _FLAT * math.hypot(nlx, nly) * math.hypot(nhx, nhy):
        return None
    return nlx, nly, nhx, nhy, p1x, p1y, p2x, p2y


class _Disk:
    def __init__(self, L):
        self.L = L
        self.L2 = L * L * (1 + 1e-12)

    def point(self, x, y):
        return x * x + y * y <= self.L2

    def window(self, p1x, p1y, p2x, p2y):
        return _seg_dist2(p1x, p1y, p2x, p2y) <= self.L2


class _Box:
    """Axis-parallel box ``|x| <= X, |y| < Y``."""

    def __init__(self, X, Y):
        self.X = X
        self.Y = Y

    def point(self, x, y):
        return abs(x) <= self.X and abs(y) < self.Y

    def window(self, p1x, p1y, p2x, p2y):
        # Liang-Barsky clip of the segment against the box
        X, Y = self.X, self.Y
        t0, t1 = 0.0, 1.0
        dx, dy = p2x - p1x, p2y - p1y
        for p, q in ((-dx, p1x + X), (dx, X - p1x), (-dy, p1y + Y), (dy, Y - p1y)):
            if p == 0.0:
                if q < 0.0:
                    return False
            else:
                r = q / p
                if p < 0.0:
                    if r > t1:
                        return False
                    if r > t0:
                        t0 = r
                else:
                    if r < t0:
                        return False
                    if r < t1:
                        t1 = r
        return True


def _word(link):
    out = []
    while link is not None:
        out.append(link[0])
        link = link[1]
    out.reverse()
    return tuple(out)


def _root(tab, p, i, eps, region, emit, push):
    """Initial polygon of the corner ``(p, i)``."""
    X, Y = tab.xs[p], tab.ys[p]
    n = len(X)
    x0, y0 = X[i], Y[i]
    j1 = (i + 1) % n
    jm = (i - 1) % n
    ox, oy = X[j1] - x0, Y[j1] - y0
    ix, iy = X[jm] - x0, Y[jm] - y0
    lo_n = math.hypot(ox, oy)
    hi_n = math.hypot(ix, iy)
    if region.point(ox, oy):
        emit(ox, oy, (p, j1), None)
    for k in range(2, n - 1):
        j = (i + k) % n
        cx, cy = X[j] - x0, Y[j] - y0
        if ox * cy - oy * cx > eps * lo_n and cx * iy - cy * ix > eps * hi_n:
            if region.point(cx, cy):
                emit(cx, cy, (p, j), None)
    for k in range(1, n - 1):
        e = (i + k) % n
        a = e
        b = (e + 1) % n
        ax, ay = X[a] - x0, Y[a] - y0
        bx, by = X[b] - x0, Y[b] - y0
        # edges collinear with the corner (straight angles) are not visible
        if ax * by - ay * bx <= _FLAT * math.hypot(ax, ay) * math.hypot(bx, by):
            continue
        if not region.window(ax, ay, bx, by):
            continue
        push(p, e, -x0, -y0, ax, ay, bx, by, ax, ay, bx, by, None)


def _expand(tab, node, eps, region, emit, push):
    p, ein, ox, oy, lx, ly, hx, hy, link = node
    X, Y = tab.xs[p], tab.ys[p]
    n = len(X)
    ln = math.hypot(lx, ly)
    hn = math.hypot(hx, hy)
    a = (ein + 1) % n
    ax, ay = X[a] + ox, Y[a] + oy
    for k in range(1, n):
        b = (ein + 1 + k) % n
        bx, by = X[b] + ox, Y[b] + oy
        if k < n - 1:
            if lx * by - ly * bx > eps * ln and bx * hy - by * hx > eps * hn:
                if region.point(bx, by):
                    emit(bx, by, (p, b), link)
        e = (ein + k) % n
        if ax * by - ay * bx > 0.0:
            c = _clip(ax, ay, bx, by, lx, ly, hx, hy)
            if c is not None:
                nlx, nly, nhx, nhy, p1x, p1y, p2x, p2y = c
                if region.window(p1x, p1y, p2x, p2y):
                    push(p, e, ox, oy, nlx, nly, nhx, nhy, p1x, p1y, p2x, p2y, link)
        ax, ay = bx, by


def _child(tab, p, e, ox, oy, link):
    X, Y = tab.xs[p], tab.ys[p]
    n = len(X)
    b = (e + 1) % n
    p2, e2 = tab.partner[p][e]
    nox = X[b] + ox - tab.xs[p2][e2]
    noy = Y[b] + oy - tab.ys[p2][e2]
    return p2, e2, nox, noy, ((p, e), link)


def _cone_angle(surface, corner, hx, hy):
    """Class and angle coordinate in ``[0, total)`` of direction ``(hx, hy)`` at a corner."""
    k = surface.corner_class[corner]
    total = surface.class_angles[k]
    theta = surface.corner_offsets[corner] + angle_between(surface.edge_vector(*corner), (hx, hy))
    return k, theta % total, total


def _prong(surface, corner, hx, hy):
    k, theta, total = _cone_angle(surface, corner, hx, hy)
    m = int(round(total / TWO_PI))
    return k, min(int(theta // TWO_PI), m - 1)


def _search(surface, region, corners=None, policy: NumericPolicy = DEFAULT_POLICY, max_nodes=None):
    tab = _table(surface)
    eps = policy.eps_hit
    raw = []
    if corners is None:
        corners = tab.corners
    stack = []
    for corner in corners:

        def emit(x, y, end, link, corner=corner):
            raw.append((corner, x, y, end, link))

        def push(p, e, ox, oy, lx, ly, hx, hy, p1x, p1y, p2x, p2y, link):
            p2, e2, nox, noy, nl = _child(tab, p, e, ox, oy, link)
            stack.append((p2, e2, nox, noy, lx, ly, hx, hy, nl))

        _root(tab, corner[0], corner[1], eps, region, emit, push)
        count = 0
        while stack:
            node = stack.pop()
            _expand(tab, node, eps, region, emit, push)
            count += 1
            if max_nodes is not None and count > max_nodes:
                raise RuntimeError("saddle connection search exceeded node budget")
    return raw


def _build(surface, raw):
    out = []
    for corner, x, y, end, link in raw:
        out.append(
            SaddleConnection(
                holonomy=Vec2(x, y),
                start=_prong(surface, corner, x, y),
                end=_prong(surface, end, -x, -y),
                crossing_word=_word(link),
                start_corner=corner,
                end_corner=end,
            )
        )
    return out


def _dedup(surface, scs, eps, ang=1e-9):
    """Drop repeats: same start class, same outgoing angle, same holonomy.

    The continuous cone angle is used rather than the prong index, since
    directions on a prong boundary (e.g. horizontal ones) round either way.
    """
    keyed = {}
    for s in scs:
        k, theta, total = _cone_angle(surface, s.start_corner, *s.holonomy)
        keyed.setdefault(k, []).append((theta, total, s))

    def same(a, b):
        return abs(a.holonomy[0] - b.holonomy[0]) <= eps and abs(a.holonomy[1] - b.holonomy[1]) <= eps

    out = []
    for k, items in keyed.items():
        items.sort(key=lambda t: t[0])
        kept = []
        for theta, total, s in items:
            dup = False
            for j in range(len(kept) - 1, -1, -1):
                if theta - kept[j][0] > ang:
                    break
                if same(kept[j][2], s):
                    dup = True
                    break
            if not dup and theta > total - ang:
                # wrap around the cone
                for t0, _, s0 in kept:
                    if t0 + total - theta > ang:
                        break
                    if same(s0, s):
                        dup = True
                        break
            if not dup:
                kept.append((theta, total, s))
        out.extend(s for _, _, s in kept)
    out.sort(key=lambda s: (s.length, s.start, s.angle))
    return out


def saddle_connections(surface: TranslationSurface, L: float,
                       policy: NumericPolicy = DEFAULT_POLICY):
    """All directed saddle connections of length at most ``L``.

    Sorted by (length, start prong, angle).
    """
    if not L > 0:
        return []
    raw = _search(surface, _Disk(L), policy=policy)
    return _dedup(surface, _build(surface, raw), policy.eps_dedup)


def saddle_connections_in_box(surface, X, Y, policy: NumericPolicy = DEFAULT_POLICY):
    """Directed saddle connections with ``|hol_x| <= X`` and ``|hol_y| < Y``."""
    raw = _search(surface, _Box(X, Y), policy=policy)
    return _dedup(surface, _build(surface, raw), policy.eps_dedup)


def shortest_saddle_connection(surface: TranslationSurface, policy: NumericPolicy = DEFAULT_POLICY):
    """Best-first unfolding search for the globally shortest connection.

    Returns ``(length, holonomy)``.
    """
    tab = _table(surface)
    eps = policy.eps_hit
    best = [math.inf, None]
    heap = []
    counter = [0]

    class _Bound:
        def point(self, x, y):
            return x * x + y * y < best[0]

        def window(self, p1x, p1y, p2x, p2y):
            return _seg_dist2(p1x, p1y, p2x, p2y) < best[0]

    region = _Bound()

    def emit(x, y, end, link):
        d2 = x * x + y * y
        if d2 < best[0]:
            best[0] = d2
            best[1] = (x, y)

    def push(p, e, ox, oy, lx, ly, hx, hy, p1x, p1y, p2x, p2y, link):
        d2 = _seg_dist2(p1x, p1y, p2x, p2y)
        counter[0] += 1
        heapq.heappush(heap, (d2, counter[0], (p, e, ox, oy, lx, ly, hx, hy, link)))

    # seed the bound with the shortest edge so pruning starts early
    for p in range(len(tab.xs)):
        X, Y = tab.xs[p], tab.ys[p]
        n = len(X)
        for i in range(n):
            dx, dy = X[(i + 1) % n] - X[i], Y[(i + 1) % n] - Y[i]
            d2 = dx * dx + dy * dy
            if d2 < best[0]:
                best[0] = d2
                best[1] = (dx, dy)
    for p, i in tab.corners:
        _root(tab, p, i, eps, region, emit, push)
    while heap and heap[0][0] < best[0]:
        _, _, (p, e, ox, oy, lx, ly, hx, hy, link) = heapq.heappop(heap)
        node = _child(tab, p, e, ox, oy, link)
        _expand(tab, (node[0], node[1], node[2], node[3], lx, ly, hx, hy, None), eps, region, emit, push)
    return math.sqrt(best[0]), Vec2(*best[1])


def shortest_sc(surface, policy: NumericPolicy = DEFAULT_POLICY) -> float:
    return shortest_saddle_connection(surface, policy)[0]


# ---- ray tracing -----------------------------------------------------------


def _start_state(surface, start, direction):
    """Resolve ``start`` into ``(poly, point, start_corner)``."""
    if isinstance(start, Prong):
        k = start.vertex_class
        m = int(round(surface.class_angles[k] / TWO_PI))
        if not 0 <= start.index < m:
            raise ValueError(f"prong index {start.index} out of range for class {k}")
        theta = TWO_PI * start.index + (math.atan2(direction[1], direction[0]) % TWO_PI)
        corner, _ = surface.corner_at_angle(k, theta)
        return corner[0], tuple(surface.vertex(*corner)), corner
    try:
        p, pt = start
        return int(p), (float(pt[0]), float(pt[1])), None
    except (TypeError, ValueError):
        raise ValueError("start must be a Prong or (poly_id, (x, y))") from None


def trace_ray(surface: TranslationSurface, start, direction, max_len: float,
              policy: NumericPolicy = DEFAULT_POLICY) -> Trajectory:
    """Follow the straight line flow from ``start`` in ``direction``.

    ``start`` is a :class:`Prong` or ``(poly_id, (x, y))``.  A ray passing
    within ``eps_hit`` of a vertex is taken to hit it; a closest approach
    between ``eps_hit`` and ``100 * eps_hit`` ends the trace with
    :class:`DegenerateHit` so the caller can perturb.
    """
    dn = math.hypot(direction[0], direction[1])
    if dn == 0:
        raise ValueError("direction must be nonzero")
    if not max_len > 0:
        raise ValueError("max_len must be positive")
    dx, dy = direction[0] / dn, direction[1] / dn
    eps = policy.eps_hit
    p, (px, py), corner = _start_state(surface, start, (dx, dy))
    segments, crossings = [], []
    travelled = 0.0
    polys = surface.polygons
    for _ in range(1_000_000):
        poly = polys[p]
        n = len(poly)
        # exit through the first forward-facing supporting line
        tmin, emin = math.inf, -1
        for e in range(n):
            ax, ay = poly[e]
            bx, by = poly[(e + 1) % n]
            ex, ey = bx - ax, by - ay
            den = dx * ey - dy * ex
            if den <= 1e-14 * math.hypot(ex, ey):
                continue
            t = ((ax - px) * ey - (ay - py) * ex) / den
            if t > 1e-12 and t < tmin:
                tmin, emin = t, e
        if emin < 0:
            raise UnsupportedSurface("ray could not leave polygon")
        # vertices close to the ray before the exit point
        hit = None
        for j in range(n):
            vx, vy = poly[j]
            wx, wy = vx - px, vy - py
            along = wx * dx + wy * dy
            if along <= 1e-12 or along > tmin + 100 * eps:
                continue
            off = abs(wx * dy - wy * dx)
            if off < 100 * eps and (hit is None or along < hit[0]):
                hit = (along, j, off)
        if hit is not None:
            along, j, off = hit
            if travelled + along > max_len + eps:
                hit = None
            else:
                vx, vy = poly[j]
                segments.append((p, (px, py), (vx, vy)))
                travelled += along
                if off < eps:
                    return Trajectory(segments, HitSingularity(surface.corner_class[(p, j)], (p, j)), travelled, crossings)
                return Trajectory(segments, DegenerateHit((p, j), off), travelled, crossings)
        if travelled + tmin >= max_len:
            t = max_len - travelled
            segments.append((p, (px, py), (px + t * dx, py + t * dy)))
            return Trajectory(segments, LengthCap(), max_len, crossings)
        qx, qy = px + tmin * dx, py + tmin * dy
        segments.append((p, (px, py), (qx, qy)))
        travelled += tmin
        crossings.append((p, emin))
        tx, ty = surface.glue_translation(p, emin)
        p = surface.partner[(p, emin)][0]
        px, py = qx + tx, qy + ty
    raise UnsupportedSurface("ray tracing did not terminate")


RETRY_ANGLES = (1e-7, -1e-7, 2e-7, -2e-7, 4e-7, -4e-7)


def trace_generic(surface: TranslationSurface, start, direction, max_len: float,
                  policy: NumericPolicy = DEFAULT_POLICY):
    """``trace_ray`` that sidesteps degenerate hits.

    On a :class:`DegenerateHit` the direction is rotated by the fixed
    schedule ``RETRY_ANGLES`` until a trace ends cleanly.  Returns the
    trajectory and the rotation used (0.0 if none was needed).
    """
    tr = trace_ray(surface, start, direction, max_len, policy)
    if not isinstance(tr.termination, DegenerateHit):
        return tr, 0.0
    for da in RETRY_ANGLES:
        c, s = math.cos(da), math.sin(da)
        d = (c * direction[0] - s * direction[1], s * direction[0] + c * direction[1])
        tr = trace_ray(surface, start, d, max_len, policy)
        if not isinstance(tr.termination, DegenerateHit):
            return tr, da
    return tr, RETRY_ANGLES[-1]


# ---- horizontal separatrices and cylinders ------------------------------


@dataclass(frozen=True)
class HorizontalSC:
    """A rightward horizontal saddle connection traced as a separatrix."""

    start: tuple  # (class, cone coordinate of the outgoing direction)
    end: tuple  # (class, cone coordinate pointing back along the connection)
    length: float
    segments: tuple
    crossing_word: tuple

    @property
    def holonomy(self):
        return Vec2(self.length, 0.0)


@dataclass
class Cylinder:
    circumference: float
    height: float
    twist: float
    core_direction: Vec2
    boundary_bottom: list
    boundary_top: list
    strip: list = field(default_factory=list)
    avoids_horizontal: bool | None = None
    frame_angle: float = 0.0

    @property
    def area(self):
        return self.circumference * self.height


@dataclass
class Periodic:
    cylinders: list
    saddle_connections: list


@dataclass
class NotPeriodicWithinCap:
    diagnostic: str
    saddle_connections: list = field(default_factory=list)


def _class_prongs(surface, k):
    return int(round(surface.class_angles[k] / TWO_PI))


def _trace_from_coordinate(surface, k, theta, cap, policy):
    """Trace the separatrix leaving class ``k`` at cone coordinate ``theta``."""
    corner, local = surface.corner_at_angle(k, theta)
    p, i = corner
    e = surface.edge_vector(p, i)
    base = math.atan2(e[1], e[0])
    ang = base + local
    d = (math.cos(ang), math.sin(ang))
    if abs(d[1]) < 1e-15:
        d = (d[0], 0.0)
    if abs(d[0]) < 1e-15:
        d = (0.0, d[1])
    poly_pt = (p, tuple(surface.vertex(p, i)))
    return _trace_from_corner(surface, corner, d, cap, policy)


def _trace_from_corner(surface, corner, d, cap, policy):
    p, i = corner
    # along the outgoing edge the trajectory is the edge itself
    ev = surface.edge_vector(p, i)
    evn = math.hypot(*ev)
    if abs(ev[0] * d[1] - ev[1] * d[0]) <= 1e-13 * evn and ev[0] * d[0] + ev[1] * d[1] > 0:
        if evn > cap:
            v = surface.vertex(p, i)
            return Trajectory([(p, tuple(v), (v[0] + cap * d[0], v[1] + cap * d[1]))], LengthCap(), cap, [])
        n = len(surface.polygons[p])
        j = (i + 1) % n
        return Trajectory([(p, tuple(surface.vertex(p, i)), tuple(surface.vertex(p, j)))],
                          HitSingularity(surface.corner_class[(p, j)], (p, j)), evn, [])
    return trace_ray(surface, (p, tuple(surface.vertex(p, i))), d, cap, policy)


def _arrival_coordinate(surface, corner, hx, hy):
    """Cone coordinate at the end corner of the direction pointing back."""
    k = surface.corner_class[corner]
    local = angle_between(surface.edge_vector(*corner), (-hx, -hy))
    if local > surface.corner_angle(*corner) + 1e-9:
        local = 0.0
    return (surface.corner_offsets[corner] + local) % surface.class_angles[k]


def horizontal_separatrices(surface: TranslationSurface, cap: float,
                            policy: NumericPolicy = DEFAULT_POLICY):
    """Trace every rightward horizontal separatrix up to length ``cap``.

    Returns ``(connections, failures)`` where failures lists prongs whose
    separatrix did not reach a singularity.
    """
    out, fail = [], []
    for k in range(len(surface.vertex_classes)):
        for j in range(_class_prongs(surface, k)):
            theta = TWO_PI * j
            tr = _trace_from_coordinate(surface, k, theta, cap, policy)
            term = tr.termination
            if isinstance(term, HitSingularity):
                last = tr.segments[-1]
                hx = last[2][0] - last[1][0]
                end_theta = _arrival_coordinate(surface, term.corner, 1.0, 0.0)
                out.append(HorizontalSC((k, theta), (term.vertex_class, end_theta), tr.length,
                                        tuple(tr.segments), tuple(tr.crossings)))
            else:
                fail.append(((k, j), term))
    return out, fail


def horizontal_saddle_connections(surface, cap, policy: NumericPolicy = DEFAULT_POLICY):
    """Rightward and leftward horizontal saddle connections of length <= cap."""
    scs = []
    for k in range(len(surface.vertex_classes)):
        for j in range(_class_prongs(surface, k)):
            for half in (0.0, math.pi):
                tr = _trace_from_coordinate(surface, k, TWO_PI * j + half, cap, policy)
                if isinstance(tr.termination, HitSingularity):
                    sgn = 1.0 if half == 0.0 else -1.0
                    scs.append((k, j, sgn * tr.length, tr))
    return scs


def shortest_horizontal_sc(surface: TranslationSurface, cap: float,
                           policy: NumericPolicy = DEFAULT_POLICY):
    """Length of the shortest horizontal saddle connection, or ``None``."""
    best = None
    for k in range(len(surface.vertex_classes)):
        for j in range(_class_prongs(surface, k)):
            tr = _trace_from_coordinate(surface, k, TWO_PI * j, cap, policy)
            if isinstance(tr.termination, HitSingularity):
                if best is None or tr.length < best:
                    best = tr.length
    return best


def _key(k, theta, total):
    m = int(round(total / (math.pi / 2)))
    return (k, int(round((theta % total) / (math.pi / 2))) % m)


def _on_edge(surface, q, u, v, tol=1e-9):
    poly = surface.polygons[q]
    n = len(poly)
    for e in range(n):
        a = poly[e]
        b = poly[(e + 1) % n]
        ex, ey = b[0] - a[0], b[1] - a[1]
        ln = math.hypot(ex, ey)
        if abs((u[0] - a[0]) * ey - (u[1] - a[1]) * ex) > tol * ln:
            continue
        if abs((v[0] - a[0]) * ey - (v[1] - a[1]) * ex) > tol * ln:
            continue
        tu = ((u[0] - a[0]) * ex + (u[1] - a[1]) * ey) / (ln * ln)
        tv = ((v[0] - a[0]) * ex + (v[1] - a[1]) * ey) / (ln * ln)
        if -tol <= min(tu, tv) and max(tu, tv) <= 1 + tol:
            return e
    return None


def _pieces(surface, scs):
    """Horizontal pieces ``(poly, left_x, right_x, y, sc, offset)``.

    Pieces lying on a polygon edge are also recorded in the glued polygon.
    """
    out = []
    for s in scs:
        acc = 0.0
        for q, u, v in s.segments:
            out.append((q, u[0], v[0], u[1], s, acc))
            e = _on_edge(surface, q, u, v)
            if e is not None:
                tx, ty = surface.glue_translation(q, e)
                q2 = surface.partner[(q, e)][0]
                out.append((q2, u[0] + tx, v[0] + tx, u[1] + ty, s, acc))
            acc += v[0] - u[0]
    return out


def _above(surface, s0, pieces, cap, policy, by_start=None):
    """First horizontal connection met going straight up from the start of ``s0``.

    Returns ``(height, connection, offset along it)`` or ``None``.
    """
    k, theta = s0.start
    tr = _trace_from_coordinate(surface, k, theta + math.pi / 2, cap, policy)
    travelled = 0.0
    for p, a, b in tr.segments:
        y0, y1 = a[1], b[1]
        x = a[0]
        best = None
        for q, lx, rx, y, s, acc in pieces:
            if q != p or y <= y0 + 1e-12 or y > y1 + 1e-9:
                continue
            if lx - 1e-9 <= x <= rx + 1e-9 and (best is None or y < best[0]):
                best = (y, s, acc + (x - lx))
        if best is not None:
            return travelled + (best[0] - y0), best[1], best[2]
        travelled += y1 - y0
    term = tr.termination
    if by_start is not None and isinstance(term, HitSingularity):
        # a vertical connection: the top boundary leaves the hit point to the right
        k2 = term.vertex_class
        back = _arrival_coordinate(surface, term.corner, 0.0, 1.0)
        s = by_start.get(_key(k2, back + math.pi / 2, surface.class_angles[k2]))
        if s is not None:
            return travelled, s, 0.0
    return None


def _assemble(surface, scs, cap, policy, closed_only=False):
    """Group horizontal connections into cylinders.

    With ``closed_only`` the boundary chains that do not close up are
    skipped instead of aborting.
    """
    by_start = {}
    for s in scs:
        k, th = s.start
        by_start[_key(k, th, surface.class_angles[k])] = s

    def nxt(s, delta):
        k, th = s.end
        total = surface.class_angles[k]
        return by_start.get(_key(k, th + delta, total))

    def chain(s0, delta):
        out = [s0]
        cur = s0
        while True:
            cur = nxt(cur, delta)
            if cur is None or len(out) > len(scs):
                return None
            if cur is s0:
                return out
            out.append(cur)

    pieces = _pieces(surface, scs)
    cylinders = []
    seen = set()
    for s0 in scs:
        if id(s0) in seen:
            continue
        bottom = chain(s0, -math.pi)
        res = _above(surface, s0, pieces, cap, policy, by_start) if bottom else None
        top = chain(res[1], math.pi) if res else None
        if top is None:
            if closed_only:
                continue
            return None
        for s in bottom:
            seen.add(id(s))
        h, s_hit, offset = res
        circ = sum(s.length for s in bottom)
        # twist: offset of the top vertex in the class of the bottom reference
        pos = -offset
        xs = []
        for s in top:
            xs.append((s.start[0], pos))
            pos += s.length
        same = [x % circ for c, x in xs if c == s0.start[0]]
        twist = min(same) if same else xs[0][1] % circ
        if circ - twist < 1e-12:
            twist = 0.0
        cylinders.append(
            Cylinder(
                circumference=circ,
                height=h,
                twist=twist,
                core_direction=Vec2(1.0, 0.0),
                boundary_bottom=bottom,
                boundary_top=top,
            )
        )
    cylinders.sort(key=lambda c: (c.circumference, c.height))
    return cylinders


def horizontal_cylinders(surface: TranslationSurface, cap: float,
                         policy: NumericPolicy = DEFAULT_POLICY):
    """Horizontal cylinder decomposition, or :class:`NotPeriodicWithinCap`."""
    scs, fail = horizontal_separatrices(surface, cap, policy)
    if fail:
        kinds = sorted({type(t).__name__ for _, t in fail})
        return NotPeriodicWithinCap(
            f"{len(fail)} horizontal separatrices did not close within {cap} ({', '.join(kinds)})",
            scs,
        )
    cyls = _assemble(surface, scs, cap, policy)
    if cyls is None:
        return NotPeriodicWithinCap("horizontal connections do not bound cylinders", scs)
    return Periodic(cyls, scs)


def partial_horizontal_cylinders(surface, cap, policy: NumericPolicy = DEFAULT_POLICY):
    """Horizontal cylinders whose boundaries consist of connections found up to ``cap``.

    Unlike :func:`horizontal_cylinders` this does not require the whole
    surface to be periodic.
    """
    scs, _ = horizontal_separatrices(surface, cap, policy)
    return _assemble(surface, scs, cap, policy, closed_only=True) or []


# ---- sup norm ----------------------------------------------------------


def sup_norm(surface: TranslationSurface, values, L_cutoff: float, basis=None,
             policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """Finite cutoff of ``sup ||beta(sigma)|| / l(sigma)`` over saddle connections.

    ``values`` assigns a vector to each basis path.  Only connections of
    length at most ``L_cutoff`` are used, so this is a lower bound for the
    full supremum.
    """
    cochain = cochain_from_basis(surface, values, basis, policy)
    best = 0.0
    for sc in saddle_connections(surface, L_cutoff, policy):
        walk = sc_edge_walk(surface, sc)
        bx, by = evaluate_walk(surface, cochain, walk)
        r = math.hypot(bx, by) / sc.length
        if r > best:
            best = r
    return best


def sc_edge_walk(surface, sc: SaddleConnection):
    """Edge walk homotopic (rel endpoints) to a saddle connection.

    Inside each polygon the straight piece is replaced by the boundary path
    between the anchors of its entry and exit points; a crossing of edge
    ``e`` is anchored at the start vertex of the canonical side of the
    glued pair.
    """
    walk = []
    p, i = sc.start_corner
    cur = i
    for q, e in sc.crossing_word:
        n = len(surface.polygons[q])
        anchor = e if surface.canonical_side[(q, e)] else (e + 1) % n
        k = cur
        while k != anchor:
            walk.append((q, k, 1))
            k = (k + 1) % n
        p2, e2 = surface.partner[(q, e)]
        n2 = len(surface.polygons[p2])
        cur = (e2 + 1) % n2 if surface.canonical_side[(q, e)] else e2
    q, j = sc.end_corner
    n = len(surface.polygons[q])
    k = cur
    while k != j:
        walk.append((q, k, 1))
        k = (k + 1) % n
    return walk


def rotate_surface(surface, theta):
    return apply_matrix(surface, rotate(theta))
