"""Config-driven Monte Carlo experiments.

Four experiments are provided:

* ``equidistribution``: push samples of two horospherical sources by the
  geodesic flow and compare observables with the Kolmogorov-Smirnov distance;
* ``nondivergence``: fraction of horocycle time spent away from short saddle
  connections;
* ``leaf_equivalence``: random walks inside a horospherical leaf of the
  H(1,1) family, checking that the horizontal combinatorics never change;
* ``aw_extension``: iterate the cylinder stretch that lengthens all
  horizontal saddle connections.

Every sample draws from its own generator keyed by ``(seed, ...)`` so that
results do not depend on the number of workers.
"""
from __future__ import annotations

import csv
import json
import math
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.stats import ks_2samp

from .deform import (
    SHEAR,
    SurgerySpec,
    cylinder_surgery,
    extend_horizontal_scs,
    find_cylinder_in_direction,
    rel,
)
from .errors import (
    InvalidBasePoint,
    InvalidParameter,
    RelDomainExceeded,
    SamplerStarved,
    SearchExhausted,
)
from .families import (
    build_h11,
    build_h2,
    build_two_tori,
    sample_h11,
    sample_h2,
    sample_torus_haar,
    torus_surface,
)
from .geom import geodesic, horocycle
from .surface import apply_matrix, periods
from .svg import write_histogram
from .trace import (
    Periodic,
    horizontal_cylinders,
    horizontal_separatrices,
    rotate_surface,
    saddle_connections,
    saddle_connections_in_box,
    shortest_horizontal_sc,
    shortest_sc,
)

KINDS = ("equidistribution", "nondivergence", "leaf_equivalence", "aw_extension")
OBSERVABLES = ("shortest_sc", "sc_count", "horizontal_cyl_count", "shortest_horizontal_sc")


def version_string() -> str:
    """Package version, followed by ``+g<hash>`` when run from a git checkout."""
    from . import __version__

    try:
        here = os.path.dirname(os.path.abspath(__file__))
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def rng_for(*key) -> np.random.Generator:
    """Independent generator for a tuple of non-negative integers."""
    return np.random.default_rng([int(k) for k in key])


# ---- configuration --------------------------------------------------------


@dataclass
class ExperimentConfig:
    kind: str
    sources: list = field(default_factory=lambda: [{"family": "h2", "a": 0.3},
                                                   {"family": "h2", "a": 0.7}])
    family: dict = field(default_factory=lambda: {"family": "h11"})
    N: int = 200
    t_grid: list = field(default_factory=lambda: [0.0, 3.0])
    seed: int = 0
    replications: int = 1
    observables: list = field(default_factory=lambda: ["shortest_sc"])
    sc_grid: list = field(default_factory=lambda: [1.0])
    cap: float = 20.0
    ks_threshold: float = 0.05
    pass_fraction: float = 0.95
    T: float = 1000.0
    eta: float = 0.1
    grid_step: float | None = None
    base_points: int = 10
    min_fraction: float = 0.5
    mean_fraction: float = 0.9
    walks: int = 100
    steps: int = 20
    step_size: float = 0.05
    moves: list = field(default_factory=lambda: ["shear", "rel", "horocycle"])
    target_factor: float = 10.0
    max_steps: int = 30
    direction_len: float = 2.0
    threads: int | None = None
    out: str | None = None
    histograms: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if int(self.N) < 1:
            raise InvalidParameter("N must be at least 1")
        if list(self.t_grid) != sorted(self.t_grid):
            raise InvalidParameter("t_grid must be sorted")
        if not self.t_grid:
            raise InvalidParameter("t_grid must not be empty")
        for o in self.observables:
            if o not in OBSERVABLES:
                raise InvalidParameter(f"unknown observable {o!r}")
        if self.replications < 1:
            raise InvalidParameter("replications must be at least 1")
        if not self.eta > 0 or not self.T > 0:
            raise InvalidParameter("T and eta must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidParameter(f"unknown config keys: {sorted(extra)}")
        if "kind" not in d:
            raise InvalidParameter("config needs a 'kind'")
        return cls(**d)

    def as_dict(self):
        return asdict(self)


@dataclass
class Report:
    kind: str
    config: dict
    version: str
    results: dict
    passed: bool
    header: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    histograms: dict = field(default_factory=dict)

    def as_dict(self):
        return {"kind": self.kind, "version": self.version, "config": self.config,
                "passed": self.passed, "results": self.results}

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(os.path.join(out_dir, "samples.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header)
            for r in self.rows:
                w.writerow([_fmt(v) for v in r])
        for name, (title, series) in self.histograms.items():
            write_histogram(os.path.join(out_dir, name + ".svg"), series, title=title)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _pmap(fn, items, threads):
    """Ordered map, in worker processes when ``threads > 1``."""
    items = list(items)
    threads = threads or os.cpu_count() or 1
    if threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


# ---- observables ------------------------------------------------------


@dataclass
class ObservableVector:
    shortest_sc: float | None = None
    sc_counts: tuple = ()
    horizontal_cyl_count: int | None = None
    shortest_horizontal_sc: float | None = None

    def value(self, name):
        if name == "sc_count":
            return self.sc_counts
        return getattr(self, name)


def observe(surface, names=("shortest_sc",), sc_grid=(1.0,), cap=20.0) -> ObservableVector:
    """Evaluate the requested observables on a surface."""
    ov = ObservableVector()
    if "shortest_sc" in names:
        # best-first search; Delaunay flipping can need ~length/width flips
        # on thin twisted cylinders
        ov.shortest_sc = shortest_sc(surface)
    if "sc_count" in names:
        top = saddle_connections(surface, max(sc_grid))
        lens = np.array([s.length for s in top])
        ov.sc_counts = tuple(int(np.sum(lens <= L + 1e-12)) for L in sc_grid)
    if "horizontal_cyl_count" in names:
        hc = horizontal_cylinders(surface, cap)
        ov.horizontal_cyl_count = len(hc.cylinders) if isinstance(hc, Periodic) else None
    if "shortest_horizontal_sc" in names:
        ov.shortest_horizontal_sc = shortest_horizontal_sc(surface, cap)
    return ov


def _obs_columns(names, sc_grid):
    cols = []
    for n in names:
        if n == "sc_count":
            cols.extend(f"sc_count_{L:g}" for L in sc_grid)
        else:
            cols.append(n)
    return cols


def _obs_values(ov, names):
    vals = []
    for n in names:
        v = ov.value(n)
        if n == "sc_count":
            vals.extend(v)
        else:
            vals.append(v)
    return vals


def sample_surface(source: dict, rng):
    """A random surface of a configured source family."""
    fam = source.get("family")
    if fam == "h2":
        return build_h2(sample_h2(float(source["a"]), rng, int(source.get("max_tries", 1000))))
    if fam == "h11":
        return build_h11(sample_h11(rng))
    if fam == "torus":
        lat = sample_torus_haar(rng)
        return torus_surface(lat.basis[0], lat.basis[1])
    if fam == "two_tori":
        x = float(source.get("x", 0.05))
        s = math.sqrt(0.5)
        return build_two_tori(sample_torus_haar(rng).scaled(s), sample_torus_haar(rng).scaled(s), x)
    raise InvalidParameter(f"unknown family {fam!r}")


# ---- equidistribution ---------------------------------------------------------


def _equi_sample(job):
    source, key, t_grid, names, sc_grid, cap = job
    q = sample_surface(source, rng_for(*key))
    return [observe(apply_matrix(q, geodesic(t)) if t else q, names, sc_grid, cap) for t in t_grid]


def _ks(a, b):
    a = [v for v in a if v is not None]
    b = [v for v in b if v is not None]
    if not a or not b:
        return None
    return float(ks_2samp(a, b).statistic)


def run_equidistribution(cfg: ExperimentConfig) -> Report:
    """Cross-source and consecutive-time KS distances of pushed samples.

    A source is a dict like ``{"family": "h2", "a": 0.3}``; it may carry its
    own ``seed`` and ``stream``, so two identical sources with equal seed and
    stream produce identical samples.
    """
    names = list(cfg.observables)
    cols = _obs_columns(names, cfg.sc_grid)
    t_grid = [float(t) for t in cfg.t_grid]
    rows, reps = [], []
    hist = {}
    partial = None
    for rep in range(cfg.replications):
        data = []  # data[src][t_index][col] -> list of values
        for si, src in enumerate(cfg.sources):
            seed = int(src.get("seed", cfg.seed))
            stream = int(src.get("stream", si))
            jobs = [(src, (seed, rep, stream, i), t_grid, names, cfg.sc_grid, cfg.cap)
                    for i in range(cfg.N)]
            try:
                res = _pmap(_equi_sample, jobs, cfg.threads)
            except SamplerStarved as exc:
                partial = {"replication": rep, "source": si, "error": str(exc)}
                break
            per_t = []
            for ti, t in enumerate(t_grid):
                colvals = {c: [] for c in cols}
                for i, obs in enumerate(res):
                    vals = _obs_values(obs[ti], names)
                    rows.append([rep, si, t, i, *vals])
                    for c, v in zip(cols, vals):
                        colvals[c].append(v)
                per_t.append(colvals)
            data.append(per_t)
        if partial:
            break
        cross = {}
        for ti, t in enumerate(t_grid):
            cross[repr(t)] = {c: _ks(data[0][ti][c], data[1][ti][c]) for c in cols} \
                if len(data) >= 2 else {}
        cauchy = {}
        for si in range(len(data)):
            cauchy[str(si)] = {
                f"{t_grid[k]!r}->{t_grid[k + 1]!r}": {c: _ks(data[si][k][c], data[si][k + 1][c]) for c in cols}
                for k in range(len(t_grid) - 1)
            }
        reps.append({"replication": rep, "cross_ks": cross, "cauchy_ks": cauchy})
        if rep == 0 and cfg.histograms and "shortest_sc" in cols:
            for ti, t in enumerate(t_grid):
                series = {f"source {si}": data[si][ti]["shortest_sc"] for si in range(len(data))}
                hist[f"hist_shortest_sc_t{ti}"] = (f"shortest saddle connection, t = {t:g}", series)
    summary = _equi_summary(cfg, reps, cols, t_grid)
    results = {"replications": reps, "summary": summary,
               "calibration_note": "the t grid and KS threshold are calibration choices; "
                                   "no convergence rate is available"}
    if partial:
        results["starved"] = partial
    report = Report(cfg.kind, cfg.as_dict(), version_string(), results,
                    bool(summary.get("passed")) and not partial,
                    ["replication", "source", "t", "sample", *cols], rows, hist)
    if partial:
        exc = SamplerStarved(f"sampler starved: {partial['error']}")
        exc.partial = report
        raise exc
    return report


def _equi_summary(cfg, reps, cols, t_grid):
    if not reps or len(cfg.sources) < 2 or not cols:
        return {"passed": False}
    c = cols[0]
    t0, t1 = repr(t_grid[0]), repr(t_grid[-1])
    small = below = both = 0
    for r in reps:
        k0 = r["cross_ks"][t0][c]
        k1 = r["cross_ks"][t1][c]
        a = k1 is not None and k1 <= cfg.ks_threshold
        b = k1 is not None and k0 is not None and k1 < k0
        small += a
        below += b
        both += a and b
    n = len(reps)
    need = math.ceil(cfg.pass_fraction * n - 1e-12)
    return {"observable": c, "replications": n, "ks_below_threshold": small,
            "ks_below_baseline": below, "both": both, "required": need,
            "passed": both >= need}


# ---- nondivergence -----------------------------------------------------


def short_time_mask(surface, T, eta, ds):
    """Boolean mask over ``s = 0, ds, 2 ds, ...`` marking times where ``u_s q``
    has a saddle connection shorter than ``eta``.

    A connection with holonomy ``(x, y)``, ``y != 0``, is shorter than ``eta``
    on ``u_s q`` exactly when ``|x + s y| < sqrt(eta^2 - y^2)``, an interval of
    ``s`` centred at ``-x / y``.  Only connections with ``|x| <= (T + 1) eta``
    and ``|y| < eta`` can contribute.
    """
    n = int(math.floor(T / ds + 1e-9)) + 1
    diff = np.zeros(n + 1, dtype=np.int64)
    scs = saddle_connections_in_box(surface, (T + 1) * eta, eta)
    for sc in scs:
        x, y = sc.holonomy
        if y == 0.0:
            if abs(x) < eta:
                diff[0] += 1
                diff[n] -= 1
            continue
        c = -x / y
        w = math.sqrt(max(eta * eta - y * y, 0.0)) / abs(y)
        lo = max(0, math.ceil((c - w) / ds))
        hi = min(n - 1, math.floor((c + w) / ds))
        # open interval: drop grid points landing exactly on an endpoint
        if lo * ds <= c - w:
            lo += 1
        if hi * ds >= c + w:
            hi -= 1
        if lo <= hi:
            diff[lo] += 1
            diff[hi + 1] -= 1
    return np.cumsum(diff[:n]) > 0, len(scs)


def nondivergence_fraction(surface, T=1000.0, eta=0.1, ds=None):
    """Fraction of grid times ``s`` in ``[0, T]`` with ``u_s q`` in ``K_eta``."""
    ds = ds or 0.01 * eta
    mask, _ = short_time_mask(surface, T, eta, ds)
    return 1.0 - float(mask.mean())


def _nd_base(job):
    fam, key, cap = job
    rng = rng_for(*key)
    q = sample_surface(fam, rng)
    theta = float(rng.uniform(0.0, math.pi)) if fam.get("rotate", True) else 0.0
    if theta:
        q = rotate_surface(q, theta)
    return q, theta


def _nd_eval(job):
    i, q, theta, cfg = job
    if shortest_horizontal_sc(q, cfg.cap) is not None:
        raise InvalidBasePoint(f"base point {i} has a horizontal saddle connection")
    ds = cfg.grid_step or 0.01 * cfg.eta
    mask, nsc = short_time_mask(q, cfg.T, cfg.eta, ds)
    good = ~mask
    n = len(good)
    cum = np.cumsum(good)
    curve = []
    for frac in (0.01, 0.1, 0.25, 0.5, 1.0):
        k = max(1, int(round(frac * (n - 1))) + 1)
        curve.append([frac * cfg.T, float(cum[k - 1] / k)])
    return {"base_point": i, "theta": theta, "saddle_connections": nsc,
            "fraction": float(good.mean()), "fraction_vs_T": curve}


def run_nondivergence(cfg: ExperimentConfig, surfaces=None) -> Report:
    """Horocycle time spent with no saddle connection shorter than ``eta``.

    Base points are ``cfg.base_points`` surfaces of ``cfg.family`` rotated by
    a random angle, unless ``surfaces`` is given.
    """
    if surfaces is None:
        bases = [_nd_base((cfg.family, (cfg.seed, i), cfg.cap)) for i in range(cfg.base_points)]
    else:
        bases = [(q, 0.0) for q in surfaces]
    per = _pmap(_nd_eval, [(i, q, th, cfg) for i, (q, th) in enumerate(bases)], cfg.threads)
    fr = [p["fraction"] for p in per]
    summary = {"min_fraction": min(fr), "mean_fraction": float(np.mean(fr)),
               "min_required": cfg.min_fraction, "mean_required": cfg.mean_fraction}
    summary["min_ok"] = summary["min_fraction"] >= cfg.min_fraction
    summary["mean_ok"] = summary["mean_fraction"] >= cfg.mean_fraction
    rows = [[p["base_point"], p["theta"], p["saddle_connections"], p["fraction"]] for p in per]
    hist = {}
    if cfg.histograms:
        hist["hist_fraction"] = ("fraction of time in K", {"base points": fr})
    return Report(cfg.kind, cfg.as_dict(), version_string(), {"base_points": per, "summary": summary},
                  summary["min_ok"] and summary["mean_ok"],
                  ["base_point", "theta", "saddle_connections", "fraction"], rows, hist)


# ---- leaf equivalence -----------------------------------------------------


def horizontal_signature(surface, cap=20.0):
    """Presentation-independent summary of the horizontal direction.

    The number of horizontal saddle connections, the number of horizontal
    cylinders and, per cylinder, its height with the number of connections
    on its bottom and top boundaries.
    """
    scs, fail = horizontal_separatrices(surface, cap)
    hc = horizontal_cylinders(surface, cap)
    if not isinstance(hc, Periodic):
        return (len(scs), len(fail), None)
    cyl = tuple(sorted((round(c.height, 8), len(c.boundary_bottom), len(c.boundary_top))
                       for c in hc.cylinders))
    return (len(scs), len(fail), cyl)


def _shear_cylinder(surface, index, amount, cap):
    hc = horizontal_cylinders(surface, cap)
    cyl = hc.cylinders[index % len(hc.cylinders)]
    return cylinder_surgery(surface, SurgerySpec([(cyl, 1.0)], SHEAR, amount / cyl.height))


def _walk(job):
    key, cfg = job
    rng = rng_for(*key)
    p = sample_h11(rng)
    q = build_h11(p)
    sig0 = horizontal_signature(q, cfg.cap)
    log = {"walk": int(key[-1]), "steps": 0, "violations": 0, "truncated": None, "moves": []}
    for step in range(cfg.steps):
        move = cfg.moves[int(rng.integers(len(cfg.moves)))]
        u = float(rng.uniform(-cfg.step_size, cfg.step_size))
        if move == "shear":
            idx = int(rng.integers(2))
            q = _shear_cylinder(q, idx, u, cfg.cap)
        elif move == "horocycle":
            q = apply_matrix(q, horocycle(u))
        elif move == "rel":
            # Rel lives on the parameter point; the surface is rebuilt from the
            # current horizontal twists so earlier shears are kept.
            try:
                p = _current_point(q, p, cfg.cap)
                p = rel(p, u)
            except RelDomainExceeded as exc:
                log["truncated"] = {"step": step, "max_dv": exc.max_dv, "dv": u}
                break
            q = build_h11(p)
        else:
            raise InvalidParameter(f"unknown move {move!r}")
        log["moves"].append([move, u])
        log["steps"] = step + 1
        if horizontal_signature(q, cfg.cap) != sig0:
            log["violations"] += 1
    return log


def _current_point(q, p, cap):
    """H(1,1) parameters matching the horizontal cylinders of ``q``."""
    from .families import H11Point

    hc = horizontal_cylinders(q, cap)
    if not isinstance(hc, Periodic):
        raise InvalidParameter("surface left the periodic locus")
    t1 = t2 = None
    for c in hc.cylinders:
        if abs(c.circumference - p.a) < 1e-9:
            t1 = c.twist
        elif abs(c.circumference - (1 - p.a)) < 1e-9:
            t2 = c.twist
    if t1 is None or t2 is None:
        return p
    return H11Point.from_bars(p.a, p.b, t1 % p.a, t2 % (1 - p.a))


def run_leaf_equivalence(cfg: ExperimentConfig) -> Report:
    """Random leaf walks on the H(1,1) family; counts signature changes."""
    logs = _pmap(_walk, [((cfg.seed, i), cfg) for i in range(cfg.walks)], cfg.threads)
    viol = sum(w["violations"] for w in logs)
    trunc = sum(1 for w in logs if w["truncated"])
    rows = [[w["walk"], w["steps"], w["violations"], 1 if w["truncated"] else 0] for w in logs]
    return Report(cfg.kind, cfg.as_dict(), version_string(),
                  {"walks": logs, "summary": {"violations": viol, "truncated_walks": trunc}},
                  viol == 0, ["walk", "steps", "violations", "truncated"], rows)


# ---- horizontal extension ------------------------------------------------


def _y_periods(q):
    try:
        pv = periods(q)
    except Exception:
        return None
    return {n: e[1] for n, e in zip(pv.names, pv.entries)}


def best_extension_cylinder(q, cap, direction_len):
    """Largest-area cylinder avoiding the horizontal connections.

    Candidate directions are those of saddle connections up to
    ``direction_len``.
    """
    dirs = sorted({round(s.angle % math.pi, 12) for s in saddle_connections(q, direction_len)})
    best = None
    tried = 0
    for th in dirs:
        if th == 0.0 or abs(th - math.pi) < 1e-12:
            continue
        tried += 1
        for c in find_cylinder_in_direction(q, th, cap):
            if c.avoids_horizontal and (best is None or c.area > best.area + 1e-12):
                best = c
    return best, tried


def step_bound(l0, target, A0):
    """Steps needed if every step multiplies lengths by at least ``(1 - A0/2)^-1``."""
    return math.ceil(math.log(target / l0) / math.log(1.0 / (1.0 - A0 / 2.0)))


def run_aw_extension(cfg: ExperimentConfig, surface=None) -> Report:
    """Iterate the horizontal extension step until lengths grow by ``target_factor``."""
    q = surface if surface is not None else sample_surface(cfg.family, rng_for(cfg.seed, 0))
    l0 = shortest_horizontal_sc(q, cfg.cap)
    if l0 is None:
        raise InvalidBasePoint("surface has no horizontal saddle connection")
    target = cfg.target_factor * l0
    ell = l0
    steps, rows = [], []
    yp = _y_periods(q)
    while ell <= target and len(steps) < cfg.max_steps:
        cyl, tried = best_extension_cylinder(q, cfg.cap, cfg.direction_len)
        if cyl is None:
            raise SearchExhausted("no admissible cylinder among candidate directions",
                                  {"step": len(steps), "directions_tried": tried,
                                   "shortest_horizontal": ell, "steps": steps})
        st = extend_horizontal_scs(q, cyl, cutoff=cfg.cap)
        q = st.surface
        new = shortest_horizontal_sc(q, max(cfg.cap, 2 * st.t * ell))
        ny = _y_periods(q)
        delta = {k: ny[k] - yp[k] for k in yp} if yp and ny else None
        rec = {"step": len(steps) + 1, "theta": cyl.frame_angle, "area": st.area, "t": st.t,
               "before": ell, "after": new,
               "rel_error": abs(new / (st.t * ell) - 1) if new else None,
               "y_period_delta": delta}
        steps.append(rec)
        rows.append([rec["step"], rec["theta"], rec["area"], rec["t"], ell, new, rec["rel_error"]])
        ell, yp = new, ny
        if new is None:
            break
    A0 = min((s["area"] for s in steps), default=0.0)
    bound = step_bound(l0, target, A0) if A0 > 0 else None
    reached = ell is not None and ell > target
    max_err = max((s["rel_error"] for s in steps if s["rel_error"] is not None), default=0.0)
    summary = {"initial": l0, "final": ell, "target": target, "steps": len(steps),
               "min_area": A0, "step_bound": bound, "reached": reached,
               "within_bound": reached and bound is not None and len(steps) <= bound,
               "max_rel_error": max_err}
    return Report(cfg.kind, cfg.as_dict(), version_string(), {"steps": steps, "summary": summary},
                  summary["within_bound"] and max_err <= 1e-9,
                  ["step", "theta", "area", "t", "before", "after", "rel_error"], rows)


RUNNERS = {
    "equidistribution": run_equidistribution,
    "nondivergence": run_nondivergence,
    "leaf_equivalence": run_leaf_equivalence,
    "aw_extension": run_aw_extension,
}


def run(cfg: ExperimentConfig) -> Report:
    report = RUNNERS[cfg.kind](cfg)
    if cfg.out:
        report.write(cfg.out)
    return report
