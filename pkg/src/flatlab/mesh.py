"""Mutable triangulations of translation surfaces.

Used internally to triangulate nonconvex or subdivided polygons, to flip
edges (Delaunay conditioning), and to erase regular marked points that
surgeries introduce.  Homology paths are carried along as edge walks: a
walk is a list of ``(triangle, edge, sign)`` steps.
"""
from __future__ import annotations

import math

from .errors import InvalidSurgery
from .geom import cross
from .surface import PathSpec, TranslationSurface


def _convex_corner(a, b, c, tol=1e-12):
    u = (b[0] - a[0], b[1] - a[1])
    v = (c[0] - b[0], c[1] - b[1])
    return cross(u, v) > tol * math.hypot(*u) * math.hypot(*v)


def _in_closed_triangle(p, a, b, c, tol=1e-12):
    scale = max(abs(b[0] - a[0]) + abs(b[1] - a[1]), abs(c[0] - a[0]) + abs(c[1] - a[1]), 1e-300)
    d1 = cross((b[0] - a[0], b[1] - a[1]), (p[0] - a[0], p[1] - a[1]))
    d2 = cross((c[0] - b[0], c[1] - b[1]), (p[0] - b[0], p[1] - b[1]))
    d3 = cross((a[0] - c[0], a[1] - c[1]), (p[0] - c[0], p[1] - c[1]))
    t = -tol * scale * scale
    return d1 >= t and d2 >= t and d3 >= t


def _min_angle(a, b, c):
    def ang(p, q, r):
        u = (q[0] - p[0], q[1] - p[1])
        v = (r[0] - p[0], r[1] - p[1])
        return abs(math.atan2(cross(u, v), u[0] * v[0] + u[1] * v[1]))

    return min(ang(a, b, c), ang(b, c, a), ang(c, a, b))


def ear_clip(pts):
    """Triangulate a simple counterclockwise polygon.

    Returns index triples.  Collinear (straight) vertices are allowed; an
    ear is accepted only if no other vertex lies in its closed triangle.
    Among valid ears the fattest is clipped first.
    """
    idx = list(range(len(pts)))
    tris = []
    while len(idx) > 3:
        m = len(idx)
        best = None
        for k in range(m):
            i, j, l = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = pts[i], pts[j], pts[l]
            if not _convex_corner(a, b, c):
                continue
            blocked = False
            for o in idx:
                if o in (i, j, l):
                    continue
                q = pts[o]
                if (q == a) or (q == b) or (q == c):
                    continue
                if _in_closed_triangle(q, a, b, c):
                    blocked = True
                    break
            if blocked:
                continue
            score = _min_angle(a, b, c)
            if best is None or score > best[0]:
                best = (score, k)
        if best is None:
            raise InvalidSurgery("polygon could not be triangulated")
        k = best[1]
        tris.append((idx[k - 1], idx[k], idx[(k + 1) % m]))
        del idx[k]
    tris.append(tuple(idx))
    return tris


class Mesh:
    """Triangles with translation gluings, real-vertex flags and walks."""

    def __init__(self):
        self.tris = []  # list of [p0, p1, p2] or None when deleted
        self.real = []  # per corner: True if the vertex is a genuine marked point
        self.part = {}
        self.walks = []

    # ---- construction ------------------------------------------------

    @classmethod
    def from_pieces(cls, pieces, gluings, real_flags, walks=()):
        """Triangulate polygon ``pieces`` glued along ``gluings``.

        ``walks`` use ``(piece, edge, sign)`` steps and are rewritten in
        terms of triangle edges.
        """
        m = cls()
        side_map = {}
        for q, pts in enumerate(pieces):
            n = len(pts)
            tri_idx = ear_clip(pts) if n > 3 else [(0, 1, 2)]
            edge_owner = {}
            base = len(m.tris)
            for t, (i, j, k) in enumerate(tri_idx):
                m.tris.append([pts[i], pts[j], pts[k]])
                m.real.append([real_flags[q][i], real_flags[q][j], real_flags[q][k]])
                for e, (u, v) in enumerate(((i, j), (j, k), (k, i))):
                    edge_owner[(u, v)] = (base + t, e)
            for e in range(n):
                side_map[(q, e)] = edge_owner[(e, (e + 1) % n)]
            for (u, v), side in edge_owner.items():
                if (v, u) in edge_owner:
                    m.part[side] = edge_owner[(v, u)]
        for a, b in gluings:
            sa, sb = side_map[a], side_map[b]
            m.part[sa] = sb
            m.part[sb] = sa
        m.walks = [[(*side_map[(q, e)], s) for q, e, s in w] for w in walks]
        return m

    @classmethod
    def from_surface(cls, surface: TranslationSurface, walks=()):
        flags = [[True] * len(p) for p in surface.polygons]
        return cls.from_pieces(surface.polygons, surface.gluings, flags, walks)

    # ---- queries -----------------------------------------------------

    def live(self):
        return [t for t, T in enumerate(self.tris) if T is not None]

    def classes(self):
        seen = set()
        out = []
        for t in self.live():
            for i in range(3):
                if (t, i) in seen:
                    continue
                cyc = []
                c = (t, i)
                while c not in seen:
                    seen.add(c)
                    cyc.append(c)
                    q, j = c
                    c = self.part[(q, (j - 1) % 3)]
                out.append(cyc)
        return out

    def corner_angle(self, t, i):
        T = self.tris[t]
        a, b, c = T[i], T[(i + 1) % 3], T[(i + 2) % 3]
        u = (b[0] - a[0], b[1] - a[1])
        v = (c[0] - a[0], c[1] - a[1])
        return math.atan2(cross(u, v), u[0] * v[0] + u[1] * v[1])

    def edge_len(self, t, e):
        T = self.tris[t]
        a, b = T[e], T[(e + 1) % 3]
        return math.hypot(b[0] - a[0], b[1] - a[1])

    # ---- flips -------------------------------------------------------

    def _quad(self, t1, i):
        t2, j = self.part[(t1, i)]
        T1, T2 = self.tris[t1], self.tris[t2]
        a, b, c = T1[i], T1[(i + 1) % 3], T1[(i + 2) % 3]
        bp, d = T2[j], T2[(j + 2) % 3]
        ds = (d[0] + b[0] - bp[0], d[1] + b[1] - bp[1])
        return t2, j, a, b, c, ds

    def can_flip(self, t1, i):
        t2, j, a, b, c, ds = self._quad(t1, i)
        if t2 == t1:
            return False
        q = [a, ds, b, c]
        return all(_convex_corner(q[k - 1], q[k], q[(k + 1) % 4], 1e-10) for k in range(4))

    def flip(self, t1, i):
        t2, j, a, b, c, ds = self._quad(t1, i)
        if t2 == t1:
            raise InvalidSurgery("cannot flip an edge glued within one triangle")
        r1, r2 = self.real[t1], self.real[t2]
        fa, fb, fc = r1[i], r1[(i + 1) % 3], r1[(i + 2) % 3]
        fd = r2[(j + 2) % 3]
        ext = {
            (t1, (i + 2) % 3): (t1, 0),
            (t2, (j + 1) % 3): (t1, 1),
            (t2, (j + 2) % 3): (t2, 0),
            (t1, (i + 1) % 3): (t2, 1),
        }
        old = {s: self.part[s] for s in ext}
        for s in list(ext) + [(t1, i), (t2, j)]:
            self.part.pop(s, None)
        for s, ns in ext.items():
            q = old[s]
            if q in ext:
                self.part[ns] = ext[q]
            else:
                self.part[ns] = q
                self.part[q] = ns
        self.part[(t1, 2)] = (t2, 2)
        self.part[(t2, 2)] = (t1, 2)
        self.tris[t1] = [c, a, ds]
        self.tris[t2] = [ds, b, c]
        self.real[t1] = [fc, fa, fd]
        self.real[t2] = [fd, fb, fc]
        fwd = [(t1, 1, 1), (t2, 0, 1)]
        removed = {(t1, i): fwd, (t2, j): [(t2, 0, -1), (t1, 1, -1)]}
        self._rewrite(ext, removed)

    def _rewrite(self, rename, removed):
        new_walks = []
        for w in self.walks:
            out = []
            for t, e, s in w:
                if (t, e) in removed:
                    rep = removed[(t, e)]
                    if s < 0:
                        rep = [(a, b, -c) for a, b, c in reversed(rep)]
                    out.extend(rep)
                elif (t, e) in rename:
                    out.append((*rename[(t, e)], s))
                else:
                    out.append((t, e, s))
            new_walks.append(_cancel(out, self.part))
        self.walks = new_walks

    def delaunay(self, max_flips=None):
        """Flip until every edge is locally Delaunay."""
        n = len(self.live())
        budget = max_flips if max_flips is not None else 50 * n * n + 1000
        flips = 0
        changed = True
        while changed:
            changed = False
            for t in self.live():
                for i in range(3):
                    t2, j = self.part[(t, i)]
                    if t2 == t or (t2, j) < (t, i):
                        continue
                    opp = self.corner_angle(t, (i + 2) % 3) + self.corner_angle(t2, (j + 2) % 3)
                    if opp > math.pi + 1e-12 and self.can_flip(t, i):
                        self.flip(t, i)
                        flips += 1
                        changed = True
                        if flips > budget:
                            raise InvalidSurgery("Delaunay flipping did not terminate")
                        break
        return flips

    def min_edge(self):
        return min(self.edge_len(t, e) for t in self.live() for e in range(3))

    # ---- regular point removal ---------------------------------------------

    def remove_regular_points(self):
        """Erase every vertex class with no genuine marked point.

        The star of such a point develops into a simple polygon (the angle
        around it is 2pi), which is re-triangulated without the point.
        """
        for it in range(10_000):
            phantom = None
            for cyc in self.classes():
                if not any(self.real[t][i] for t, i in cyc):
                    phantom = cyc
                    break
            if phantom is None:
                return
            ang = sum(self.corner_angle(t, i) for t, i in phantom)
            if abs(ang - 2 * math.pi) > 1e-6:
                raise InvalidSurgery(f"auxiliary vertex has angle {ang}, expected 2pi")
            if len({t for t, _ in phantom}) == len(phantom):
                self._remove_star(phantom)
                continue
            self._reduce_degree(phantom, it)
        raise InvalidSurgery("auxiliary vertex removal did not terminate")

    def _reduce_degree(self, cyc, it=0):
        """Flip one spoke at the vertex ``cyc``.

        A spoke whose new diagonal misses the vertex lowers its degree; if
        none exists, the choice rotates with ``it`` so that no single edge
        is flipped back and forth.
        """
        corners = set(cyc)
        fallback = []
        for t, i in cyc:
            if not self.can_flip(t, i):
                continue
            t2, j = self.part[(t, i)]
            if (t, (i + 2) % 3) not in corners and (t2, (j + 2) % 3) not in corners:
                self.flip(t, i)
                return
            fallback.append((t, i))
        if not fallback:
            raise InvalidSurgery("could not isolate an auxiliary vertex")
        self.flip(*fallback[it % len(fallback)])

    def _remove_star(self, cyc):
        k = len(cyc)
        t0, i0 = cyc[0]
        v0 = self.tris[t0][i0]
        ws, flags, outer = [], [], []
        for t, i in cyc:
            T = self.tris[t]
            v = T[i]
            w = T[(i + 1) % 3]
            ws.append((w[0] - v[0] + v0[0], w[1] - v[1] + v0[1]))
            flags.append(self.real[t][(i + 1) % 3])
            outer.append((t, (i + 1) % 3))
        spokes = {}
        for m, (t, i) in enumerate(cyc):
            spokes[(t, i)] = (m, True)  # v -> w_m
            spokes[(t, (i + 2) % 3)] = ((m + 1) % k, False)  # w_{m+1} -> v
        tri_idx = ear_clip(ws)
        slots = [t for t, _ in cyc]
        owner = {}
        for n, (a, b, c) in enumerate(tri_idx):
            for e, (u, w) in enumerate(((a, b), (b, c), (c, a))):
                owner[(u, w)] = (slots[n], e)
        rename = {outer[m]: owner[(m, (m + 1) % k)] for m in range(k)}
        old = {s: self.part[s] for s in outer}
        for t, _ in cyc:
            for e in range(3):
                self.part.pop((t, e), None)
        for s, ns in rename.items():
            q = old[s]
            if q in rename:
                self.part[ns] = rename[q]
            else:
                self.part[ns] = q
                self.part[q] = ns
        for (u, w), side in owner.items():
            if (w, u) in owner:
                self.part[side] = owner[(w, u)]
        for n, (a, b, c) in enumerate(tri_idx):
            self.tris[slots[n]] = [ws[a], ws[b], ws[c]]
            self.real[slots[n]] = [flags[a], flags[b], flags[c]]
        for t in slots[len(tri_idx):]:
            self.tris[t] = None
            self.real[t] = None
        new_walks = []
        for w in self.walks:
            out = []
            pending = None
            for t, e, s in w:
                if (t, e) in spokes:
                    m, outward = spokes[(t, e)]
                    if s < 0:
                        outward = not outward
                    if not outward:
                        pending = m
                        continue
                    if pending is None:
                        raise InvalidSurgery("path starts at an auxiliary vertex")
                    j = pending
                    while j != m:
                        out.append((*owner[(j, (j + 1) % k)], 1))
                        j = (j + 1) % k
                    pending = None
                elif (t, e) in rename:
                    out.append((*rename[(t, e)], s))
                else:
                    out.append((t, e, s))
            if pending is not None:
                raise InvalidSurgery("path ends at an auxiliary vertex")
            new_walks.append(_cancel(out, self.part))
        self.walks = new_walks

    # ---- export --------------------------------------------------------

    def to_surface(self, names=()):
        live = self.live()
        index = {t: k for k, t in enumerate(live)}
        polys = [self.tris[t] for t in live]
        gl = []
        done = set()
        for t in live:
            for e in range(3):
                if (t, e) in done:
                    continue
                q = self.part[(t, e)]
                done.add((t, e))
                done.add(q)
                gl.append(((index[t], e), (index[q[0]], q[1])))
        basis = []
        for name, w in zip(names, self.walks):
            segs = []
            for t, e, s in w:
                T = self.tris[t]
                a, b = T[e], T[(e + 1) % 3]
                segs.append((index[t], a, b) if s > 0 else (index[t], b, a))
            basis.append(PathSpec.from_points(name, segs))
        return TranslationSurface(polys, gl, basis)


def _cancel(walk, part):
    """Drop immediate backtracks ``x, x^-1`` from a walk."""
    out = []
    for step in walk:
        if out:
            t, e, s = out[-1]
            u, f, r = step
            if (t, e) == (u, f) and s == -r:
                out.pop()
                continue
            if part.get((t, e)) == (u, f) and s == r:
                out.pop()
                continue
        out.append(step)
    return out


def walks_of_basis(surface, basis=None):
    """Edge walks of the surface's basis paths."""
    from .surface import path_edge_walk

    if basis is None:
        basis = surface.basis
    return [path_edge_walk(surface, b) for b in basis]


def retriangulate(surface: TranslationSurface, delaunay=True) -> TranslationSurface:
    """Triangulated copy of ``surface`` carrying its basis along."""
    m = Mesh.from_surface(surface, walks_of_basis(surface))
    if delaunay:
        m.delaunay()
    return m.to_surface([b.name for b in surface.basis])


def delaunay_min_edge(surface: TranslationSurface) -> float:
    """Length of the shortest saddle connection.

    The shortest connection is an edge of every Delaunay triangulation, so
    it is the shortest edge after Delaunay flipping.
    """
    m = Mesh.from_surface(surface)
    m.delaunay()
    return m.min_edge()
