"""Multilinear checks in the split model space ``V = V_x + V_y``.

``V_x`` and ``V_y`` are copies of ``R^d`` paired by ``<x, y> = x^T P y``.
The volume forms are the standard determinants, and ``V^(1)`` is the
hypersurface ``<x, y> = 1``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFrame, InvalidFrame, InvalidParameter, OutsideChart


@dataclass(frozen=True)
class SplitSpace:
    d: int
    pairing: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.pairing, dtype=float)
        if P.shape != (self.d, self.d):
            raise InvalidParameter("pairing must be a d x d matrix")
        if abs(np.linalg.det(P)) <= 1e-12:
            raise InvalidParameter("pairing is degenerate")
        object.__setattr__(self, "pairing", P)

    @classmethod
    def standard(cls, d):
        return cls(d, np.eye(d))

    @classmethod
    def random(cls, d, rng):
        while True:
            P = np.eye(d) + 0.3 * rng.standard_normal((d, d))
            if abs(np.linalg.det(P)) > 0.1:
                return cls(d, P)

    def pair(self, x, y):
        return float(np.asarray(x) @ self.pairing @ np.asarray(y))


# ---- charts ----------------------------------------------------------------


def psi(space: SplitSpace, x, y):
    """Projective class of ``x`` (unit representative) together with ``y``."""
    x = np.asarray(x, dtype=float)
    if space.pair(x, y) <= 0:
        raise OutsideChart("<x, y> must be positive")
    return x / np.linalg.norm(x), np.asarray(y, dtype=float)


def psi_inv(space: SplitSpace, xclass, y):
    """The point of ``V^(1)`` over ``([x], y)``: ``(x / <x, y>, y)``."""
    x = np.asarray(xclass, dtype=float)
    c = space.pair(x, y)
    if c <= 0:
        raise OutsideChart("<x, y> must be positive")
    return x / c, np.asarray(y, dtype=float)


def geodesic_time(space: SplitSpace, x, y0, y1) -> float:
    """``log(<x, y0> / <x, y1>)``: the time taking the ``y0`` plaque point to ``y1``."""
    return math.log(space.pair(x, y0) / space.pair(x, y1))


# ---- Jacobian and distortion -----------------------------------------------


def tangent_frame(space: SplitSpace, y, rng=None):
    """Basis of the kernel of ``v -> <v, y>`` (``d - 1`` vectors)."""
    c = space.pairing @ np.asarray(y, dtype=float)
    _, _, vt = np.linalg.svd(c[None, :])
    frame = vt[1:]
    if rng is not None:
        frame = rng.standard_normal((len(frame), len(frame))) @ frame
    return frame


def jacobian_check(space: SplitSpace, y0, y1, x, frame):
    """Measured and predicted Jacobian of ``x -> x / <x, y1>`` on ``<x, y0> = 1``.

    The measured value is ``det[phi(x), Dphi v_1, ...] / det[x, v_1, ...]``
    with ``Dphi`` applied literally; the prediction is ``<x, y1>^-d``.
    """
    x = np.asarray(x, dtype=float)
    frame = np.atleast_2d(np.asarray(frame, dtype=float))
    d = space.d
    if frame.shape != (d - 1, d):
        raise DegenerateFrame(f"frame must hold {d - 1} vectors of length {d}")
    if abs(space.pair(x, y0) - 1) > 1e-9:
        raise InvalidParameter("x must satisfy <x, y0> = 1")
    c = space.pair(x, y1)
    if c <= 0:
        raise OutsideChart("<x, y1> must be positive")
    base = np.column_stack([x, *frame])
    den = np.linalg.det(base)
    scale = np.prod(np.linalg.norm(base, axis=0))
    if abs(den) <= 1e-12 * scale:
        raise DegenerateFrame("frame is degenerate")
    cy = space.pairing @ np.asarray(y1, dtype=float)
    imgs = [v / c - x * (v @ cy) / c ** 2 for v in frame]
    num = np.linalg.det(np.column_stack([x / c, *imgs]))
    return num / den, c ** (-d)


@dataclass
class BoxSpec:
    space: SplitSpace
    x_samples: list
    y0: np.ndarray
    y1: np.ndarray
    y_samples: list = field(default_factory=list)

    def __post_init__(self):
        sp = self.space
        ys = list(self.y_samples) or [self.y1]
        for x in self.x_samples:
            for y in [self.y0, *ys]:
                if sp.pair(x, y) <= 0:
                    raise OutsideChart("box requires <x, y> > 0 on all samples")


def distortion(box: BoxSpec) -> float:
    """Grid value of ``sup |1 - (<x, y0> / <x, y>)^d|`` (a lower bound of the sup)."""
    sp = box.space
    ys = list(box.y_samples) or [box.y1]
    X = np.array(box.x_samples, dtype=float)
    c0 = X @ sp.pairing @ np.asarray(box.y0, dtype=float)
    best = 0.0
    for y in ys:
        c1 = X @ sp.pairing @ np.asarray(y, dtype=float)
        best = max(best, float(np.max(np.abs(1 - (c0 / c1) ** sp.d))))
    return best


def mass_variation_check(space: SplitSpace, y0, y1, x0, half_width, rng, n=20000):
    """Masses of corresponding plaques at ``y0`` and ``y1``.

    The ``y0`` plaque is the square ``x0 + sum u_i t_i``, ``|u_i| <= half_width``
    in the hyperplane ``<x, y0> = 1``; the ``y1`` plaque is its image under
    ``x -> x / <x, y1>``.  Both masses use the contracted volume form and
    the image Jacobian is taken by finite differences.  Returns
    ``(ratio, distortion over the sampled points)``.
    """
    d = space.d
    x0 = np.asarray(x0, dtype=float)
    x0 = x0 / space.pair(x0, y0)
    T = tangent_frame(space, y0)
    U = rng.uniform(-half_width, half_width, (n, d - 1))
    X = x0 + U @ T
    cy1 = space.pairing @ np.asarray(y1, dtype=float)
    phi = lambda Z: Z / (Z @ cy1)[:, None]
    h = 1e-6
    m0 = np.empty(n)
    m1 = np.empty(n)
    P = phi(X)
    for k in range(n):
        m0[k] = abs(np.linalg.det(np.column_stack([X[k], *T])))
    cols = [(phi(X + h * t) - phi(X - h * t)) / (2 * h) for t in T]
    for k in range(n):
        m1[k] = abs(np.linalg.det(np.column_stack([P[k], *[c[k] for c in cols]])))
    ratio = m1.mean() / m0.mean()
    c0 = X @ space.pairing @ np.asarray(y0, dtype=float)
    c1 = X @ cy1
    delta = float(np.max(np.abs(1 - (c0 / c1) ** d)))
    return ratio, delta


# ---- contraction identity ---------------------------------------------------


def _shuffles(n, p):
    """Pairs ``(I, J, sign)`` with ``I`` of size ``p`` and ``J`` the complement."""
    for I in itertools.combinations(range(n), p):
        J = [j for j in range(n) if j not in I]
        perm = list(I) + J
        inv = sum(1 for a in range(n) for b in range(a + 1, n) if perm[a] > perm[b])
        yield list(I), J, -1 if inv % 2 else 1


def contraction_check(space: SplitSpace, point, frame):
    """Both sides of the contraction identity on a frame tangent to ``V^(1)``.

    ``lhs`` is ``det[E, f_1, ..., f_{2d-1}]`` with ``E`` the position
    vector; ``rhs`` is ``2 * sum_shuffles sign * det[x, f_I x-parts] * det[f_J y-parts]``.
    """
    d = space.d
    if d > 6:
        raise InvalidParameter("shuffle expansion is limited to d <= 6")
    x, y = (np.asarray(v, dtype=float) for v in point)
    F = np.atleast_2d(np.asarray(frame, dtype=float))
    if F.shape != (2 * d - 1, 2 * d):
        raise InvalidFrame(f"frame must hold {2 * d - 1} vectors of length {2 * d}")
    P = space.pairing
    for f in F:
        r = f[:d] @ P @ y + x @ P @ f[d:]
        if abs(r) > 1e-9 * max(1.0, np.linalg.norm(f)):
            raise InvalidFrame(f"frame vector not tangent (residual {r:.3g})")
    E = np.concatenate([x, y])
    lhs = float(np.linalg.det(np.column_stack([E, *F])))
    rhs = 0.0
    for I, J, sgn in _shuffles(2 * d - 1, d - 1):
        ax = np.linalg.det(np.column_stack([x, *[F[i][:d] for i in I]])) if I else x[0] if d == 1 else None
        if d == 1:
            ax = float(x[0])
        by = np.linalg.det(np.column_stack([F[j][d:] for j in J]))
        rhs += sgn * ax * by
    return lhs, 2.0 * rhs


def random_point(space: SplitSpace, rng):
    """Random point of ``V^(1)``."""
    while True:
        x = rng.standard_normal(space.d)
        y = rng.standard_normal(space.d)
        c = space.pair(x, y)
        if c > 0.1:
            return x / c, y


def tangent_frame_v1(space: SplitSpace, point, rng=None):
    """Basis of the tangent space of ``V^(1)`` at ``point`` (``2d - 1`` vectors)."""
    x, y = point
    grad = np.concatenate([space.pairing @ y, space.pairing.T @ x])
    _, _, vt = np.linalg.svd(grad[None, :])
    F = vt[1:]
    if rng is not None:
        F = rng.standard_normal((len(F), len(F))) @ F
    return F


# ---- cone measure -------------------------------------------------------


@dataclass(frozen=True)
class ChartPatch:
    """Patch of ``V^(1)`` over a box of ``(x_1..x_{d-1}, y_1..y_d)``.

    ``x_d`` is solved from ``<x, y> = 1``.
    """

    space: SplitSpace
    lo: np.ndarray
    hi: np.ndarray

    def embed(self, U):
        d = self.space.d
        U = np.atleast_2d(U)
        xs = U[:, : d - 1]
        ys = U[:, d - 1:]
        c = ys @ self.space.pairing.T  # c_i = (P y)_i
        xd = (1 - np.sum(xs * c[:, : d - 1], axis=1)) / c[:, d - 1]
        return np.column_stack([xs, xd, ys])

    def params_of(self, Z):
        d = self.space.d
        return np.column_stack([Z[:, : d - 1], Z[:, d:]])

    def bounding_box(self):
        """Coordinate bounds of the patch via interval arithmetic."""
        d = self.space.d
        P = self.space.pairing
        ylo, yhi = self.lo[d - 1:], self.hi[d - 1:]
        c_lo = np.where(P > 0, P * ylo, P * yhi).sum(axis=1)
        c_hi = np.where(P > 0, P * yhi, P * ylo).sum(axis=1)
        n_lo, n_hi = 1.0, 1.0
        for i in range(d - 1):
            prods = [a * b for a in (self.lo[i], self.hi[i]) for b in (c_lo[i], c_hi[i])]
            n_lo -= max(prods)
            n_hi -= min(prods)
        if c_lo[d - 1] <= 0 <= c_hi[d - 1]:
            raise InvalidParameter("patch crosses the chart singularity")
        q = [a / b for a in (n_lo, n_hi) for b in (c_lo[d - 1], c_hi[d - 1])]
        lo = np.concatenate([self.lo[: d - 1], [min(q)], ylo])
        hi = np.concatenate([self.hi[: d - 1], [max(q)], yhi])
        return lo, hi


def _contracted_density(patch: ChartPatch, U, h=1e-6):
    """``|det[E, dp/du_1, ...]|`` at parameter points ``U``."""
    Z = patch.embed(U)
    m = U.shape[1]
    cols = []
    for i in range(m):
        dU = np.zeros(m)
        dU[i] = h
        cols.append((patch.embed(U + dU) - patch.embed(U - dU)) / (2 * h))
    M = np.stack([Z, *cols], axis=2)
    return np.abs(np.linalg.det(M))


def cone_measure_check(patch: ChartPatch, N: int, rng, quad_order: int = 12):
    """Lebesgue volume of ``cone(A)`` versus the integral of the contracted form.

    Returns ``(vol_cone, sigma_vol, surf_int, ratio, sigma_ratio)``; the ratio
    should equal ``2d``.
    """
    d = patch.space.d
    m = 2 * d - 1
    lo, hi = patch.lo, patch.hi
    # tensor Gauss-Legendre quadrature over the parameter box
    g, w = np.polynomial.legendre.leggauss(quad_order)
    pts = np.array(list(itertools.product(g, repeat=m)))
    wts = np.prod(np.array(list(itertools.product(w, repeat=m))), axis=1)
    U = lo + (pts + 1) / 2 * (hi - lo)
    jac = np.prod((hi - lo) / 2)
    surf = float(np.sum(wts * _contracted_density(patch, U)) * jac)
    # Monte Carlo volume of the cone in R^{2d}
    blo, bhi = patch.bounding_box()
    blo = np.minimum(blo, 0.0)
    bhi = np.maximum(bhi, 0.0)
    vbox = float(np.prod(bhi - blo))
    hits = 0
    done = 0
    P = patch.space.pairing
    while done < N:
        k = min(200_000, N - done)
        Z = blo + rng.random((k, 2 * d)) * (bhi - blo)
        t2 = np.einsum("ij,jk,ik->i", Z[:, :d], P, Z[:, d:])
        ok = (t2 > 0) & (t2 <= 1)
        A = Z[ok] / np.sqrt(t2[ok])[:, None]
        par = patch.params_of(A)
        inside = np.all((par >= lo) & (par <= hi), axis=1)
        hits += int(inside.sum())
        done += k
    p = hits / N
    vol = vbox * p
    svol = vbox * math.sqrt(max(p * (1 - p), 1e-300) / N)
    ratio = surf / vol if vol > 0 else math.inf
    sratio = ratio * svol / vol if vol > 0 else math.inf
    return vol, svol, surf, ratio, sratio


def default_patch(d, space=None):
    """A small patch around ``x = y = (1, ..., 1)/sqrt(d)`` scaled to ``V^(1)``."""
    space = space or SplitSpace.standard(d)
    y = np.ones(d)
    lo = np.concatenate([np.full(d - 1, 0.05), y * 0.8])
    hi = np.concatenate([np.full(d - 1, 0.25), y * 1.2])
    return ChartPatch(space, lo, hi)
