"""Flows, cylinder surgeries, Rel and the horizontal extension step."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy.optimize import brentq

from .cutting import cut_surface, transport_walk
from .errors import InvalidParameter, InvalidSurgery, RelDomainExceeded
from .families import H11Point
from .geom import DEFAULT_POLICY, Mat2, NumericPolicy, Vec2, diag, rotate, special_element
from .mesh import Mesh
from .surface import TranslationSurface, apply_matrix, path_edge_walk
from .trace import (
    Cylinder,
    horizontal_saddle_connections,
    partial_horizontal_cylinders,
)

SHEAR = "shear"
STRETCH = "stretch"


def flow(surface: TranslationSurface, which: str, param: float) -> TranslationSurface:
    """Apply ``horocycle(s)``, ``geodesic(t)``, ``rescale(c)`` or ``rotate(theta)``."""
    return apply_matrix(surface, special_element(which, param))


@dataclass
class SurgerySpec:
    """Cylinders with weights ``h_i``, a mode and the parameter ``s``.

    Shear applies ``(1, s h_i; 0, 1)`` inside cylinder ``i``, stretch applies
    ``(1, 0; 0, exp(s h_i))``, both in the frame where the cylinders are
    horizontal.
    """

    cylinders: list
    mode: str = SHEAR
    s: float = 0.0

    def __post_init__(self):
        if self.mode not in (SHEAR, STRETCH):
            raise InvalidParameter(f"unknown surgery mode {self.mode!r}")
        for _, h in self.cylinders:
            if not h > 0:
                raise InvalidParameter("cylinder weights must be positive")

    def matrix(self, h) -> Mat2:
        if self.mode == SHEAR:
            return Mat2(1.0, self.s * h, 0.0, 1.0)
        return Mat2(1.0, 0.0, 0.0, math.exp(self.s * h))


def _boundary_segments(cyl: Cylinder):
    segs = []
    for sc in list(cyl.boundary_bottom) + list(cyl.boundary_top):
        segs.extend(sc.segments)
    # each connection may appear both as a top and a bottom boundary
    out = []
    for s in segs:
        if s not in out:
            out.append(s)
    return out


def _frame(surface, theta):
    if theta == 0.0:
        return surface
    return apply_matrix(surface, rotate(-theta))


def cylinder_footprints(surface: TranslationSurface, cylinders):
    """Cut along the cylinders' boundaries and locate each cylinder's pieces.

    All cylinders must share one core direction.  Returns the cut (in the
    frame where the cylinders are horizontal) and one set of piece indices
    per cylinder.
    """
    if not cylinders:
        raise InvalidSurgery("no cylinders given")
    theta = cylinders[0].frame_angle
    for c in cylinders:
        if abs(c.frame_angle - theta) > 1e-12:
            raise InvalidSurgery("cylinders of one surgery must be parallel")
    R = _frame(surface, theta)
    segs = []
    for c in cylinders:
        for s in _boundary_segments(c):
            if s not in segs:
                segs.append(s)
    cut = cut_surface(R, segs)
    comps = []
    for c in cylinders:
        p, u, v = c.boundary_bottom[0].segments[0]
        seed = cut.piece_above(p, u, v)
        comp = cut.flood(seed)
        area = sum(_area(cut.pieces[k]) for k in comp)
        if abs(area - c.circumference * c.height) > 1e-7 * max(1.0, area):
            raise InvalidSurgery(
                f"cylinder footprint area {area} differs from circumference*height "
                f"{c.circumference * c.height}"
            )
        comps.append(comp)
    seen = set()
    for comp in comps:
        if comp & seen:
            raise InvalidSurgery("cylinders overlap")
        seen |= comp
    return R, cut, comps


def _area(pts):
    from .geom import polygon_area

    return polygon_area(pts)


def cylinder_strip(surface, cyl: Cylinder):
    """Footprint of a cylinder as ``(poly_id, sub-polygon)`` in surface coordinates."""
    _, cut, (comp,) = cylinder_footprints(surface, [cyl])
    back = rotate(cyl.frame_angle)
    out = []
    for k in sorted(comp):
        pts = [tuple(back(v)) for v in cut.pieces[k]] if cyl.frame_angle else list(cut.pieces[k])
        out.append((cut.origin[k], pts))
    return out


def cylinder_surgery(surface: TranslationSurface, spec: SurgerySpec, condition: bool = True,
                     policy: NumericPolicy = DEFAULT_POLICY) -> TranslationSurface:
    """Shear or stretch the given cylinders, identity elsewhere.

    The result is triangulated; auxiliary points created by cutting are
    removed again, and ``condition`` applies Delaunay flips.  The surface's
    basis paths are carried along.
    """
    cyls = [c for c, _ in spec.cylinders]
    if spec.mode == STRETCH:
        for c, h in spec.cylinders:
            if not math.exp(spec.s * h) * c.height > 0:
                raise InvalidSurgery("stretch would collapse a cylinder")
    if spec.s == 0.0:
        return surface
    R, cut, comps = cylinder_footprints(surface, cyls)
    pieces = [list(p) for p in cut.pieces]
    for comp, (_, h) in zip(comps, spec.cylinders):
        g = spec.matrix(h)
        for k in comp:
            pieces[k] = [tuple(g(v)) for v in pieces[k]]
    walks = [transport_walk(cut, path_edge_walk(R, b, policy)) for b in R.basis]
    mesh = Mesh.from_pieces(pieces, cut.piece_gluings(), cut.real, walks)
    mesh.remove_regular_points()
    if condition:
        mesh.delaunay()
    out = mesh.to_surface([b.name for b in surface.basis])
    theta = cyls[0].frame_angle
    if theta != 0.0:
        out = apply_matrix(out, rotate(theta))
    return out


# ---- Rel ---------------------------------------------------------------


def rel(point: H11Point, dv: float) -> H11Point:
    """Move the relative period ``b`` by ``dv`` keeping absolute periods."""
    if dv == 0.0:
        return point
    a, b = point.a, point.b
    hi = min(a, 1 - a)
    nb = b + dv
    if not (0 < nb < hi):
        max_dv = hi - b if dv > 0 else b
        raise RelDomainExceeded(
            f"rel by {dv} leaves the domain 0 < b < {hi}; admissible |dv| < {max_dv}", max_dv
        )
    # twists stay fixed as lengths along the cylinders
    return H11Point.from_bars(a, nb, point.tau1_bar, point.tau2_bar)


# ---- cylinders in other directions -----------------------------------------


def _segment_overlaps(p0, p1, poly, tol=1e-9):
    """Whether segment ``p0 p1`` meets the closed convex polygon ``poly`` in a
    piece of length greater than ``tol``."""
    t0, t1 = 0.0, 1.0
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    seg = math.hypot(dx, dy)
    if seg <= tol:
        return False
    n = len(poly)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        ex, ey = b[0] - a[0], b[1] - a[1]
        ln = math.hypot(ex, ey)
        if ln == 0.0:
            continue
        # inside the slightly enlarged polygon means cross(e, p - a) >= -tol * |e|
        f0 = ex * (p0[1] - a[1]) - ey * (p0[0] - a[0]) + tol * ln
        df = ex * dy - ey * dx
        if df == 0.0:
            if f0 < 0:
                return False
            continue
        t = -f0 / df
        if df > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 >= t1:
            return False
    return (t1 - t0) * seg > 10 * tol


def avoids_horizontal(surface, cyl: Cylinder, cap: float,
                      policy: NumericPolicy = DEFAULT_POLICY) -> bool:
    """True if no horizontal saddle connection of length <= cap enters the cylinder.

    The cylinder's boundary is not horizontal, so a horizontal connection
    sharing a segment of positive length with the closed footprint runs
    through the open cylinder, also when it lies along a polygon edge.
    """
    strip = cyl.strip or cylinder_strip(surface, cyl)
    for _, _, _, tr in horizontal_saddle_connections(surface, cap, policy):
        for p, u, v in tr.segments:
            for q, pts in strip:
                if q == p and _segment_overlaps(u, v, pts):
                    return False
    return True


def find_cylinder_in_direction(surface: TranslationSurface, theta: float, cap: float,
                               policy: NumericPolicy = DEFAULT_POLICY):
    """Cylinders with core direction ``theta`` whose boundaries close within ``cap``.

    Each cylinder is tagged with whether it avoids all horizontal saddle
    connections up to ``cap``.  Boundary traces of the returned cylinders
    live in the frame rotated by ``-theta``.
    """
    R = _frame(surface, theta)
    cyls = partial_horizontal_cylinders(R, cap, policy)
    out = []
    for c in cyls:
        c.frame_angle = theta
        c.core_direction = Vec2(math.cos(theta), math.sin(theta))
        try:
            c.strip = cylinder_strip(surface, c)
        except InvalidSurgery:
            continue
        c.avoids_horizontal = avoids_horizontal(surface, c, cap, policy)
        out.append(c)
    return out


@dataclass
class ExtensionStep:
    surface: TranslationSurface
    t: float
    area: float
    s: float


def extend_horizontal_scs(surface: TranslationSurface, cylinder: Cylinder, s: float | None = None,
                          cutoff: float = 10.0, policy: NumericPolicy = DEFAULT_POLICY,
                          check: bool = True) -> ExtensionStep:
    """Stretch a cylinder avoiding the horizontal connections, then renormalise.

    By default the stretch removes half of the cylinder's area ``A`` and the
    result is multiplied by ``diag(t, 1)`` with ``t = (1 - A/2)^-1`` so the
    area is 1 again; every horizontal connection grows by exactly ``t``.
    """
    A = cylinder.circumference * cylinder.height
    if cylinder.frame_angle % math.pi == 0.0:
        raise InvalidSurgery("cylinder must not be horizontal")
    if check and not avoids_horizontal(surface, cylinder, cutoff, policy):
        raise InvalidSurgery("cylinder meets a horizontal saddle connection")
    if s is None:
        s = math.log(0.5)
    if not s < 0:
        raise InvalidParameter("stretch parameter must be negative")
    removed = A * (1 - math.exp(s))
    stretched = cylinder_surgery(surface, SurgerySpec([(cylinder, 1.0)], STRETCH, s))
    t = 1.0 / (1.0 - removed)
    return ExtensionStep(apply_matrix(stretched, diag(t, 1.0)), t, A, s)


def stretch_parameter_for_area(cylinders, target):
    """Solve ``sum A_i (1 - exp(s h_i)) = target`` for ``s < 0``."""
    total = sum(c.circumference * c.height for c, _ in cylinders)
    if not 0 < target < total:
        raise InvalidParameter("target must lie strictly between 0 and the total area")
    f = lambda s: sum(c.circumference * c.height * (1 - math.exp(s * h)) for c, h in cylinders) - target
    lo = -1.0
    while f(lo) < 0:
        lo *= 2
    return brentq(f, lo, 0.0, xtol=1e-15)
