"""Cutting a surface along horizontal saddle connections.

The polygons are first subdivided at every point where a connection meets
an edge (consistently on both sides of each gluing), then split along the
chords.  Pieces can then be grouped by flood fill across the sides that do
not lie on a cutting connection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InvalidSurgery
from .geom import polygon_area


def _close(p, q, tol):
    return abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol


@dataclass
class Cut:
    pieces: list  # vertex lists
    real: list  # per piece vertex flags
    origin: list  # source polygon of each piece
    side_of: dict  # side id -> (piece, local edge)
    sides: list  # per piece list of side ids
    partner: dict  # side id -> side id
    boundary: set  # side ids lying on cutting connections
    sub_sides: dict  # (poly, edge) -> ordered side ids of its sub-edges
    tol: float = 1e-9
    groups: dict = field(default_factory=dict)

    def piece_gluings(self):
        out = []
        done = set()
        for s, t in self.partner.items():
            if s in done:
                continue
            done.add(s)
            done.add(t)
            out.append((self.side_of[s], self.side_of[t]))
        return out

    def find_side(self, poly, u, v):
        for k, pts in enumerate(self.pieces):
            if self.origin[k] != poly:
                continue
            n = len(pts)
            for e in range(n):
                if _close(pts[e], u, self.tol) and _close(pts[(e + 1) % n], v, self.tol):
                    return self.sides[k][e]
        return None

    def piece_above(self, poly, u, v):
        """Piece lying directly above the rightward segment ``u -> v`` of ``poly``."""
        s = self.find_side(poly, u, v)
        if s is not None:
            return self.side_of[s][0]
        s = self.find_side(poly, v, u)
        if s is not None:
            return self.side_of[self.partner[s]][0]
        raise InvalidSurgery("cylinder boundary does not match the cut polygons")

    def flood(self, seed):
        comp = {seed}
        stack = [seed]
        while stack:
            k = stack.pop()
            for s in self.sides[k]:
                if s in self.boundary:
                    continue
                q = self.side_of[self.partner[s]][0]
                if q not in comp:
                    comp.add(q)
                    stack.append(q)
        return comp


def _edge_param(poly, e, pt, tol):
    n = len(poly)
    a = poly[e]
    b = poly[(e + 1) % n]
    ex, ey = b[0] - a[0], b[1] - a[1]
    L2 = ex * ex + ey * ey
    wx, wy = pt[0] - a[0], pt[1] - a[1]
    if abs(wx * ey - wy * ex) > tol * math.sqrt(L2):
        return None
    t = (wx * ex + wy * ey) / L2
    if t < -tol or t > 1 + tol:
        return None
    return t


def cut_surface(surface, segments, tol=1e-9) -> Cut:
    """Cut ``surface`` along segments ``(poly, u, v)`` joining boundary points."""
    polys = surface.polygons
    params = {}
    # split parameters on each side, mirrored onto the partner side
    for p, u, v in segments:
        for pt in (u, v):
            poly = polys[p]
            n = len(poly)
            if any(_close(pt, q, tol) for q in poly):
                continue
            for e in range(n):
                t = _edge_param(poly, e, pt, tol)
                if t is not None and tol < t < 1 - tol:
                    params.setdefault((p, e), []).append(t)
                    params.setdefault(surface.partner[(p, e)], []).append(1 - t)
                    break
            else:
                raise InvalidSurgery(f"cut endpoint {pt} is not on the boundary of polygon {p}")
    for key, ts in params.items():
        ts.sort()
        merged = []
        for t in ts:
            if not merged or t - merged[-1] > tol:
                merged.append(t)
        params[key] = merged
    # subdivide
    next_id = 0
    sub_sides = {}
    new_polys, new_flags, new_sides = [], [], []
    for p, poly in enumerate(polys):
        n = len(poly)
        pts, flags, sids = [], [], []
        for e in range(n):
            a = poly[e]
            b = poly[(e + 1) % n]
            pts.append(a)
            flags.append(True)
            ts = params.get((p, e), [])
            ids = []
            for t in ts:
                pts.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
                flags.append(False)
            for _ in range(len(ts) + 1):
                ids.append(next_id)
                next_id += 1
            sub_sides[(p, e)] = ids
            sids.extend(ids)
        new_polys.append(pts)
        new_flags.append(flags)
        new_sides.append(sids)
    partner = {}
    for a, b in surface.gluings:
        sa, sb = sub_sides[a], sub_sides[b]
        if len(sa) != len(sb):
            raise InvalidSurgery("inconsistent subdivision across a gluing")
        for x, y in zip(sa, reversed(sb)):
            partner[x] = y
            partner[y] = x
    # split along chords
    pieces, real, origin, sides = [], [], [], []
    boundary = set()
    by_poly = {}
    for p in range(len(polys)):
        by_poly[p] = [len(pieces)]
        pieces.append(new_polys[p])
        real.append(new_flags[p])
        origin.append(p)
        sides.append(new_sides[p])
    for p, u, v in segments:
        done = False
        for k in by_poly[p]:
            pts = pieces[k]
            n = len(pts)
            iu = next((i for i in range(n) if _close(pts[i], u, tol)), None)
            iv = next((i for i in range(n) if _close(pts[i], v, tol)), None)
            if iu is None or iv is None:
                continue
            if (iu + 1) % n == iv or (iv + 1) % n == iu:
                e = iu if (iu + 1) % n == iv else iv
                boundary.add(sides[k][e])
                boundary.add(partner[sides[k][e]])
                done = True
                break
            i, j = sorted((iu, iv))
            c1, c2 = next_id, next_id + 1
            next_id += 2
            partner[c1] = c2
            partner[c2] = c1
            boundary.update((c1, c2))
            s = sides[k]
            first = (pts[i:j + 1], real[k][i:j + 1], s[i:j] + [c1])
            second = (pts[j:] + pts[:i + 1], real[k][j:] + real[k][:i + 1], s[j:] + s[:i] + [c2])
            pieces[k], real[k], sides[k] = first
            pieces.append(second[0])
            real.append(second[1])
            sides.append(second[2])
            origin.append(p)
            by_poly[p].append(len(pieces) - 1)
            done = True
            break
        if not done:
            raise InvalidSurgery(f"could not place cut segment in polygon {p}")
    side_of = {}
    for k, sl in enumerate(sides):
        for e, s in enumerate(sl):
            side_of[s] = (k, e)
    for k, pts in enumerate(pieces):
        if polygon_area(pts) <= 0:
            raise InvalidSurgery("cutting produced a degenerate piece")
    return Cut(pieces, real, origin, side_of, sides, partner, boundary, sub_sides, tol)


def transport_walk(cut: Cut, walk):
    """Rewrite a walk on the original polygons in terms of cut pieces."""
    out = []
    for p, e, s in walk:
        ids = cut.sub_sides[(p, e)]
        steps = [(*cut.side_of[i], 1) for i in ids]
        if s < 0:
            steps = [(a, b, -1) for a, b, _ in reversed(steps)]
        out.extend(steps)
    return out
