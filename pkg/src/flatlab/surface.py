"""Polygonal translation surfaces.

A surface is a finite list of convex polygons (counterclockwise vertex
lists) whose edges are glued in pairs by translations.  Edge ``e`` of a
polygon runs from vertex ``e`` to vertex ``e + 1``.  Every polygon vertex
belongs to a vertex class (a point of the surface); the classes are the
marked points, and the total angle around a class of order ``k`` is
``2 pi (k + 1)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidParameter, InvalidPath, InvalidSurface, UnsupportedSurface
from .geom import DEFAULT_POLICY, Mat2, NumericPolicy, Vec2, angle_between, cross, polygon_area

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PathSpec:
    """An oriented path given as straight pieces inside polygons.

    Each segment is ``(poly_id, entry_point, exit_point)`` in the
    coordinates of that polygon.  Consecutive segments must be joined
    across a gluing, inside the same polygon, or at a common vertex class.
    """

    name: str
    segments: tuple

    @classmethod
    def from_points(cls, name, segments):
        segs = tuple(
            (int(p), (float(a[0]), float(a[1])), (float(b[0]), float(b[1])))
            for p, a, b in segments
        )
        return cls(name, segs)

    def holonomy(self) -> Vec2:
        hx = hy = 0.0
        for _, a, b in self.segments:
            hx += b[0] - a[0]
            hy += b[1] - a[1]
        return Vec2(hx, hy)

    def transformed(self, M: Mat2) -> "PathSpec":
        f = lambda v: (M.a * v[0] + M.b * v[1], M.c * v[0] + M.d * v[1])
        return PathSpec(self.name, tuple((p, f(a), f(b)) for p, a, b in self.segments))


@dataclass(frozen=True)
class PeriodVector:
    """Holonomies of a named basis; ``entries[i] = (x_i, y_i)``."""

    entries: tuple
    names: tuple
    basis_id: str = ""

    @property
    def x(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries])

    @property
    def y(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries])

    def __len__(self):
        return len(self.entries)

    def as_dict(self):
        return {n: e for n, e in zip(self.names, self.entries)}


@dataclass
class ValidationReport:
    ok: bool
    checks: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    stratum: tuple = ()
    genus: int | None = None
    cone_angles: list = field(default_factory=list)

    def as_dict(self):
        return {
            "ok": self.ok,
            "checks": self.checks,
            "errors": self.errors,
            "stratum": list(self.stratum),
            "genus": self.genus,
            "cone_angles": self.cone_angles,
        }


class TranslationSurface:
    """Immutable polygonal translation surface.

    ``polygons`` is a sequence of vertex lists, ``gluings`` a sequence of
    pairs ``((p, e), (p2, e2))``.  An optional ``basis`` of :class:`PathSpec`
    gives paths used for period coordinates.
    """

    __slots__ = ("polygons", "gluings", "basis", "__dict__")

    def __init__(self, polygons, gluings, basis=()):
        polys = tuple(tuple((float(x), float(y)) for x, y in poly) for poly in polygons)
        glue = tuple(
            ((int(a[0]), int(a[1])), (int(b[0]), int(b[1]))) for a, b in gluings
        )
        object.__setattr__(self, "polygons", polys)
        object.__setattr__(self, "gluings", glue)
        object.__setattr__(self, "basis", tuple(basis))

    def __setattr__(self, name, value):
        raise AttributeError("TranslationSurface is immutable")

    def __repr__(self):
        return (
            f"TranslationSurface({len(self.polygons)} polygons, "
            f"{len(self.gluings)} gluings, stratum={self.stratum})"
        )

    def with_basis(self, basis) -> "TranslationSurface":
        return TranslationSurface(self.polygons, self.gluings, basis)

    # ---- combinatorics -------------------------------------------------

    @cached_property
    def partner(self) -> dict:
        part = {}
        for a, b in self.gluings:
            if a in part or b in part:
                raise InvalidSurface(f"edge glued twice: {a} or {b}")
            part[a] = b
            part[b] = a
        return part

    @cached_property
    def partner_table(self):
        """``table[p][e] = (p2, e2)``; ``None`` for unglued edges."""
        part = self.partner
        return [
            [part.get((p, e)) for e in range(len(poly))]
            for p, poly in enumerate(self.polygons)
        ]

    @cached_property
    def canonical_side(self) -> dict:
        side = {}
        for a, b in self.gluings:
            side[a] = True
            side[b] = False
        return side

    def edge_vector(self, p, e) -> Vec2:
        poly = self.polygons[p]
        a = poly[e]
        b = poly[(e + 1) % len(poly)]
        return Vec2(b[0] - a[0], b[1] - a[1])

    def glue_translation(self, p, e) -> Vec2:
        """Translation taking edge ``(p, e)`` onto its partner edge."""
        p2, e2 = self.partner[(p, e)]
        poly, poly2 = self.polygons[p], self.polygons[p2]
        end = poly[(e + 1) % len(poly)]
        start2 = poly2[e2]
        return Vec2(start2[0] - end[0], start2[1] - end[1])

    def corner_angle(self, p, i) -> float:
        poly = self.polygons[p]
        n = len(poly)
        v = poly[i]
        nxt = poly[(i + 1) % n]
        prv = poly[(i - 1) % n]
        return angle_between((nxt[0] - v[0], nxt[1] - v[1]), (prv[0] - v[0], prv[1] - v[1]))

    @cached_property
    def vertex_classes(self) -> list:
        """Corner cycles ``[(p, i), ...]`` in counterclockwise order."""
        part = self.partner
        seen = set()
        classes = []
        for p, poly in enumerate(self.polygons):
            n = len(poly)
            for i in range(n):
                if (p, i) in seen:
                    continue
                cyc = []
                c = (p, i)
                while c not in seen:
                    seen.add(c)
                    cyc.append(c)
                    q, j = c
                    m = len(self.polygons[q])
                    nb = part.get((q, (j - 1) % m))
                    if nb is None:
                        raise InvalidSurface(f"edge {(q, (j - 1) % m)} is not glued")
                    c = nb
                if c != cyc[0]:
                    raise InvalidSurface("inconsistent corner cycle")
                classes.append(cyc)
        return classes

    @cached_property
    def corner_class(self) -> dict:
        return {c: k for k, cyc in enumerate(self.vertex_classes) for c in cyc}

    @cached_property
    def corner_offsets(self) -> dict:
        """Cone-angle coordinate of each corner's outgoing edge direction.

        The coordinate of a direction at a vertex class is measured
        counterclockwise around the cone point and normalised so that it is
        congruent to the plane angle of the direction modulo ``2 pi``.
        """
        out = {}
        for cyc in self.vertex_classes:
            p0, i0 = cyc[0]
            d0 = self.edge_vector(p0, i0)
            acc = math.atan2(d0[1], d0[0]) % TWO_PI
            for c in cyc:
                out[c] = acc
                acc += self.corner_angle(*c)
        return out

    @cached_property
    def class_angles(self) -> list:
        return [sum(self.corner_angle(*c) for c in cyc) for cyc in self.vertex_classes]

    @cached_property
    def stratum(self) -> tuple:
        orders = [max(0, int(round(a / TWO_PI)) - 1) for a in self.class_angles]
        return tuple(sorted(orders, reverse=True))

    @cached_property
    def genus(self) -> int:
        chi = len(self.vertex_classes) - len(self.gluings) + len(self.polygons)
        return (2 - chi) // 2

    def class_total_angle(self, k) -> float:
        return self.class_angles[k]

    def corner_at_angle(self, k, theta):
        """Return ``(corner, local_angle)`` for cone coordinate ``theta``."""
        cyc = self.vertex_classes[k]
        offs = self.corner_offsets
        base = offs[cyc[0]]
        total = self.class_angles[k]
        rel = (theta - base) % total
        acc = 0.0
        for c in cyc:
            a = self.corner_angle(*c)
            if rel < acc + a or c is cyc[-1]:
                return c, rel - acc
            acc += a
        raise AssertionError("unreachable")

    def cone_coordinate(self, corner, direction) -> float:
        """Cone coordinate of a direction leaving ``corner``.

        The result lies in ``[0, total_angle)`` of the corner's class.
        """
        p, i = corner
        k = self.corner_class[corner]
        local = angle_between(self.edge_vector(p, i), direction)
        if local > self.corner_angle(p, i) + 1e-12 and local > math.pi:
            local = 0.0
        return (self.corner_offsets[corner] + local) % self.class_angles[k]

    # ---- geometry ------------------------------------------------------

    def area(self) -> float:
        return sum(polygon_area(poly) for poly in self.polygons)

    def vertex(self, p, i) -> Vec2:
        poly = self.polygons[p]
        return Vec2(*poly[i % len(poly)])

    def __eq__(self, other):
        if not isinstance(other, TranslationSurface):
            return NotImplemented
        return self.polygons == other.polygons and self.gluings == other.gluings

    def __hash__(self):
        return hash((self.polygons, self.gluings))

    def almost_equal(self, other, tol=1e-9) -> bool:
        if self.gluings != other.gluings or len(self.polygons) != len(other.polygons):
            return False
        for a, b in zip(self.polygons, other.polygons):
            if len(a) != len(b):
                return False
            for u, v in zip(a, b):
                if abs(u[0] - v[0]) > tol or abs(u[1] - v[1]) > tol:
                    return False
        return True

    # ---- serialisation -------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "polygons": [[list(v) for v in poly] for poly in self.polygons],
            "gluings": [[list(a), list(b)] for a, b in self.gluings],
        }
        if self.basis:
            d["basis"] = [
                {"name": b.name, "segments": [[p, list(a), list(c)] for p, a, c in b.segments]}
                for b in self.basis
            ]
        return d

    @classmethod
    def from_dict(cls, d) -> "TranslationSurface":
        try:
            basis = [PathSpec.from_points(b["name"], b["segments"]) for b in d.get("basis", [])]
            return cls(d["polygons"], d["gluings"], basis)
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise InvalidSurface(f"malformed surface description: {exc}") from exc

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text) -> "TranslationSurface":
        return cls.from_dict(json.loads(text))


def save_surface(surface: TranslationSurface, path) -> None:
    with open(path, "w") as fh:
        json.dump(surface.to_dict(), fh, indent=1)


def load_surface(path) -> TranslationSurface:
    with open(path) as fh:
        return TranslationSurface.from_dict(json.load(fh))


# ---- operations ------------------------------------------------------------


def validate(surface: TranslationSurface, policy: NumericPolicy = DEFAULT_POLICY) -> ValidationReport:
    """Check every structural invariant; problems are reported, not raised."""
    eps = policy.eps_glue
    rep = ValidationReport(ok=True)

    def check(name, passed, msg=""):
        rep.checks[name] = {"pass": bool(passed), "message": msg}
        if not passed:
            rep.ok = False
            rep.errors.append(f"{name}: {msg}")

    polys = surface.polygons
    all_edges = {(p, e) for p, poly in enumerate(polys) for e in range(len(poly))}
    seen = {}
    bad = []
    for a, b in surface.gluings:
        for s in (a, b):
            if s not in all_edges:
                bad.append(f"unknown edge {s}")
            seen[s] = seen.get(s, 0) + 1
        if a == b:
            bad.append(f"edge {a} glued to itself")
    twice = [s for s, k in seen.items() if k > 1]
    unpaired = sorted(all_edges - set(seen))
    if twice:
        bad.append(f"edges glued more than once: {twice}")
    if unpaired:
        bad.append(f"unpaired edges: {unpaired}")
    check("gluing_structure", not bad, "; ".join(bad))
    if bad:
        return rep

    conv = []
    for p, poly in enumerate(polys):
        n = len(poly)
        if n < 3:
            conv.append(f"polygon {p} has fewer than 3 vertices")
            continue
        if polygon_area(poly) <= 0:
            conv.append(f"polygon {p} is not counterclockwise with positive area")
        for i in range(n):
            u = surface.edge_vector(p, i)
            w = surface.edge_vector(p, (i + 1) % n)
            lu, lw = math.hypot(*u), math.hypot(*w)
            if lu <= eps:
                conv.append(f"polygon {p} edge {i} is degenerate")
            elif cross(u, w) < -eps * max(1.0, lu * lw):
                conv.append(f"polygon {p} is not convex at vertex {(i + 1) % n}")
    check("convex_polygons", not conv, "; ".join(conv))

    glue_bad = []
    for a, b in surface.gluings:
        u = surface.edge_vector(*a)
        w = surface.edge_vector(*b)
        if abs(u[0] + w[0]) > eps or abs(u[1] + w[1]) > eps:
            glue_bad.append(f"{a}~{b}: {tuple(u)} vs {tuple(w)}")
    check("translation_gluings", not glue_bad, "; ".join(glue_bad))
    if conv or glue_bad:
        return rep

    try:
        angles = surface.class_angles
    except InvalidSurface as exc:
        check("vertex_classes", False, str(exc))
        return rep
    ang_bad = []
    orders = []
    for k, a in enumerate(angles):
        m = round(a / TWO_PI)
        if m < 1 or abs(a - m * TWO_PI) > eps * max(1.0, m):
            ang_bad.append(f"class {k} has angle {a}")
        orders.append(int(m) - 1)
    check("cone_angles", not ang_bad, "; ".join(ang_bad))
    rep.cone_angles = [
        {"class": k, "angle": a, "order": o} for k, (a, o) in enumerate(zip(angles, orders))
    ]
    chi = len(angles) - len(surface.gluings) + len(polys)
    genus_ok = chi % 2 == 0 and chi <= 2
    g = (2 - chi) // 2
    rep.genus = g
    check("euler_characteristic", genus_ok, f"chi={chi}")
    check("order_sum", sum(orders) == 2 * g - 2, f"sum={sum(orders)}, 2g-2={2 * g - 2}")
    rep.stratum = tuple(sorted(orders, reverse=True))
    return rep


def area(surface: TranslationSurface) -> float:
    return surface.area()


def cone_points(surface: TranslationSurface):
    return [(k, a) for k, a in enumerate(surface.class_angles)]


def apply_matrix(surface: TranslationSurface, M: Mat2) -> TranslationSurface:
    """Act by ``M`` on every polygon chart; combinatorics are unchanged."""
    if not M.det > 0:
        raise InvalidParameter(f"matrix must have positive determinant, got {M.det}")
    a, b, c, d = M.a, M.b, M.c, M.d
    polys = [[(a * x + b * y, c * x + d * y) for x, y in poly] for poly in surface.polygons]
    basis = [bp.transformed(M) for bp in surface.basis]
    return TranslationSurface(polys, surface.gluings, basis)


def _locate(surface, p, pt, eps):
    """Classify a point of polygon ``p``: ('vertex', i), ('edge', e, t) or ('interior',)."""
    poly = surface.polygons[p]
    n = len(poly)
    for i, v in enumerate(poly):
        if abs(v[0] - pt[0]) <= eps and abs(v[1] - pt[1]) <= eps:
            return ("vertex", i)
    for e in range(n):
        a = poly[e]
        b = poly[(e + 1) % n]
        ux, uy = b[0] - a[0], b[1] - a[1]
        L2 = ux * ux + uy * uy
        wx, wy = pt[0] - a[0], pt[1] - a[1]
        t = (wx * ux + wy * uy) / L2
        if -eps < t < 1 + eps and abs(wx * uy - wy * ux) <= eps * math.sqrt(L2):
            return ("edge", e, t)
    return ("interior",)


def _joined(surface, seg_a, seg_b, eps) -> bool:
    p, _, exit_pt = seg_a
    q, entry_pt, _ = seg_b
    if p == q and abs(exit_pt[0] - entry_pt[0]) <= eps and abs(exit_pt[1] - entry_pt[1]) <= eps:
        return True
    la = _locate(surface, p, exit_pt, eps)
    lb = _locate(surface, q, entry_pt, eps)
    if la[0] == "vertex" and lb[0] == "vertex":
        return surface.corner_class[(p, la[1])] == surface.corner_class[(q, lb[1])]
    if la[0] == "edge" or lb[0] == "edge" or la[0] == "vertex":
        # crossing a gluing: try every edge of p through exit_pt
        poly = surface.polygons[p]
        n = len(poly)
        for e in range(n):
            part = surface.partner.get((p, e))
            if part is None or part[0] != q:
                continue
            a = poly[e]
            b = poly[(e + 1) % n]
            ux, uy = b[0] - a[0], b[1] - a[1]
            wx, wy = exit_pt[0] - a[0], exit_pt[1] - a[1]
            if abs(wx * uy - wy * ux) > eps * math.hypot(ux, uy):
                continue
            tx, ty = surface.glue_translation(p, e)
            if abs(exit_pt[0] + tx - entry_pt[0]) <= eps and abs(exit_pt[1] + ty - entry_pt[1]) <= eps:
                return True
    return False


def check_path(surface, path: PathSpec, policy: NumericPolicy = DEFAULT_POLICY) -> None:
    eps = max(policy.eps_glue, 1e-9) * 10
    segs = path.segments
    if not segs:
        raise InvalidPath(f"path {path.name!r} is empty")
    for p, a, b in segs:
        if not 0 <= p < len(surface.polygons):
            raise InvalidPath(f"path {path.name!r} references unknown polygon {p}")
    for k in range(len(segs) - 1):
        if not _joined(surface, segs[k], segs[k + 1], eps):
            raise InvalidPath(f"path {path.name!r} is disconnected between segments {k} and {k + 1}")


def periods(surface: TranslationSurface, basis: Sequence[PathSpec] | None = None,
            policy: NumericPolicy = DEFAULT_POLICY) -> PeriodVector:
    """Holonomy of each basis path, summed segment by segment."""
    if basis is None:
        basis = surface.basis
    entries = []
    for path in basis:
        check_path(surface, path, policy)
        entries.append(tuple(path.holonomy()))
    return PeriodVector(tuple(entries), tuple(b.name for b in basis))


# ---- relative homology via edge walks ---------------------------------------


def _anchor(surface, p, pt, eps):
    loc = _locate(surface, p, pt, eps)
    if loc[0] == "vertex":
        return loc[1]
    if loc[0] == "edge":
        e = loc[1]
        n = len(surface.polygons[p])
        return e if surface.canonical_side[(p, e)] else (e + 1) % n
    return 0


def walk_between(n, i, j):
    """Counterclockwise boundary walk from vertex ``i`` to ``j`` of an n-gon."""
    out = []
    k = i
    while k != j:
        out.append((k, 1))
        k = (k + 1) % n
    return out


def path_edge_walk(surface, path: PathSpec, policy: NumericPolicy = DEFAULT_POLICY):
    """Oriented edges ``(p, e, sign)`` forming a walk homologous to ``path``."""
    eps = max(policy.eps_glue, 1e-9) * 10
    walk = []
    for p, a, b in path.segments:
        n = len(surface.polygons[p])
        i = _anchor(surface, p, a, eps)
        j = _anchor(surface, p, b, eps)
        walk.extend((p, e, s) for e, s in walk_between(n, i, j))
    return walk


def gluing_index(surface) -> dict:
    """Map each edge side to ``(pair index, sign)`` of the canonical side."""
    idx = {}
    for k, (a, b) in enumerate(surface.gluings):
        idx[a] = (k, 1)
        idx[b] = (k, -1)
    return idx


def walk_chain(surface, walk) -> np.ndarray:
    """Integer coefficients of a walk on the canonical edge sides."""
    idx = gluing_index(surface)
    v = np.zeros(len(surface.gluings))
    for p, e, s in walk:
        k, sg = idx[(p, e)]
        v[k] += s * sg
    return v


def cochain_from_basis(surface, values, basis=None, policy: NumericPolicy = DEFAULT_POLICY):
    """Solve for the edge cochain of a class in ``H^1(S, Sigma; R^2)``.

    ``values[i]`` is the vector assigned to the i-th basis path.  Returns an
    ``(E, 2)`` array of values on the canonical edge sides.
    """
    if basis is None:
        basis = surface.basis
    if not basis:
        raise UnsupportedSurface("surface carries no basis")
    idx = gluing_index(surface)
    E = len(surface.gluings)
    rows, rhs = [], []
    for p, poly in enumerate(surface.polygons):
        r = np.zeros(E)
        for e in range(len(poly)):
            k, sg = idx[(p, e)]
            r[k] += sg
        rows.append(r)
        rhs.append((0.0, 0.0))
    for path, val in zip(basis, values):
        rows.append(walk_chain(surface, path_edge_walk(surface, path, policy)))
        rhs.append(tuple(val))
    A = np.array(rows)
    B = np.array(rhs, dtype=float)
    sol, _, rank, _ = np.linalg.lstsq(A, B, rcond=None)
    if rank < E:
        raise UnsupportedSurface(
            f"basis does not determine the cochain (rank {rank} < {E} edges)"
        )
    if np.max(np.abs(A @ sol - B), initial=0.0) > 1e-7 * max(1.0, np.max(np.abs(B), initial=0.0)):
        raise UnsupportedSurface("basis values are inconsistent with a cocycle")
    return sol


def edge_vectors_cochain(surface) -> np.ndarray:
    """The cochain of the holonomy class itself."""
    return np.array([tuple(surface.edge_vector(*a)) for a, _ in surface.gluings])


def evaluate_walk(surface, cochain, walk):
    idx = gluing_index(surface)
    x = y = 0.0
    for p, e, s in walk:
        k, sg = idx[(p, e)]
        x += s * sg * cochain[k][0]
        y += s * sg * cochain[k][1]
    return Vec2(x, y)
