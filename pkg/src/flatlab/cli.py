"""The ``flatlab`` command line.

Exit codes: 0 success, 1 validation or report failure (or a library error),
2 usage error including unreadable or malformed JSON input.  Data goes to
files or standard output; diagnostics and the resolved configuration go to
standard error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import FlatlabError
from .geom import NumericPolicy

SC_COLUMNS = ["start_class", "prong", "hol_x", "hol_y", "length"]
H11_COLUMNS = ["a", "b", "tau1", "tau2"]
H2_COLUMNS = ["a", "x", "tau", "u_x", "u_y", "v_x", "v_y"]


class UsageError(Exception):
    pass


def _read_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc.msg} at line {exc.lineno}, column {exc.colno}")


def _load_surface(path):
    from .surface import TranslationSurface

    return TranslationSurface.from_dict(_read_json(path))


def _emit_json(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "_asdict"):
        return list(o)
    return str(o)


def _write_csv(header, rows, out=None):
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    finally:
        if out:
            fh.close()


def _policy(args):
    return NumericPolicy(eps_glue=args.eps_glue, eps_hit=args.eps_hit, eps_dedup=args.eps_dedup)


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("FLATLAB_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"FLATLAB_SEED must be an integer, got {env!r}")


def _echo(args, **extra):
    conf = {k: v for k, v in vars(args).items() if k != "func"}
    conf.update(extra)
    print("resolved config: " + json.dumps(conf, sort_keys=True, default=str), file=sys.stderr)


# ---- subcommands -------------------------------------------------------------


def cmd_validate(args):
    from .surface import validate

    rep = validate(_load_surface(args.surface), _policy(args))
    _emit_json(rep.as_dict(), args.out)
    return 0 if rep.ok else 1


def _params_from_file(path, row):
    if path.lstrip().startswith("{"):
        try:
            return json.loads(path)
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed inline JSON: {exc.msg} at column {exc.colno}")
    if path.endswith(".csv"):
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}")
        if not 0 <= row < len(rows):
            raise UsageError(f"{path} has no row {row}")
        return {k: float(v) for k, v in rows[row].items()}
    d = _read_json(path)
    if not isinstance(d, dict):
        raise UsageError("parameter file must hold a JSON object")
    return d


def build_family(family, params):
    from .families import (
        H2Point,
        H11Point,
        Lattice,
        build_h2,
        build_h11,
        build_two_tori,
        regular_octagon,
        torus_surface,
    )

    try:
        if family == "h11":
            return build_h11(H11Point(float(params["a"]), float(params["b"]),
                                      float(params.get("tau1", 0.0)), float(params.get("tau2", 0.0))))
        if family == "h2":
            if "lattice" in params:
                u, v = params["lattice"]
            else:
                u = (params["u_x"], params["u_y"])
                v = (params["v_x"], params["v_y"])
            lat = Lattice((tuple(map(float, u)), tuple(map(float, v))))
            return build_h2(H2Point(float(params["a"]), float(params["x"]), float(params["tau"]), lat))
        if family == "torus":
            return torus_surface(tuple(params.get("u", (1.0, 0.0))), tuple(params.get("v", (0.0, 1.0))))
        if family == "octagon":
            return regular_octagon(float(params.get("side", 1.0)))
        if family == "two_tori":
            l1 = Lattice(tuple(map(tuple, params["lattice1"])))
            l2 = Lattice(tuple(map(tuple, params["lattice2"])))
            return build_two_tori(l1, l2, float(params["x"]))
    except KeyError as exc:
        raise UsageError(f"missing parameter {exc.args[0]!r} for family {family}")
    raise UsageError(f"unknown family {family!r}")


def cmd_build(args):
    from .surface import save_surface, validate

    params = _params_from_file(args.params, args.row) if args.params else {}
    q = build_family(args.family, params)
    if args.out:
        save_surface(q, args.out)
    else:
        print(q.to_json(indent=1))
    rep = validate(q, _policy(args))
    print(f"stratum {rep.stratum}, area {q.area():.12g}", file=sys.stderr)
    return 0 if rep.ok else 1


def cmd_sample(args):
    from .families import sample_h2, sample_h11
    from .experiments import rng_for

    seed = _seed(args)
    _echo(args, seed=seed)
    rows = []
    for i in range(args.n):
        rng = rng_for(seed, i)
        if args.family == "h11":
            p = sample_h11(rng)
            rows.append([p.a, p.b, p.tau1, p.tau2])
        else:
            if args.a is None:
                raise UsageError("--a is required for the h2 family")
            p = sample_h2(args.a, rng)
            (ux, uy), (vx, vy) = p.lattice.basis
            rows.append([p.a, p.x, p.tau, ux, uy, vx, vy])
    _write_csv(H11_COLUMNS if args.family == "h11" else H2_COLUMNS, rows, args.out)
    return 0


def cmd_sc(args):
    from .trace import saddle_connections

    q = _load_surface(args.surface)
    scs = saddle_connections(q, args.max_len, _policy(args))
    rows = [[s.start[0], s.start[1], float(s.holonomy[0]), float(s.holonomy[1]), float(s.length)]
            for s in scs]
    _write_csv(SC_COLUMNS, rows, args.out)
    return 0


def _cyl_dict(c):
    return {"circumference": c.circumference, "height": c.height, "twist": c.twist,
            "area": c.area, "core_direction": list(c.core_direction),
            "bottom_connections": len(c.boundary_bottom), "top_connections": len(c.boundary_top)}


def cmd_cylinders(args):
    from .deform import find_cylinder_in_direction
    from .trace import Periodic, horizontal_cylinders

    q = _load_surface(args.surface)
    if args.direction:
        cyls = find_cylinder_in_direction(q, args.direction, args.cap, _policy(args))
        out = {"direction": args.direction, "cylinders": [dict(_cyl_dict(c), avoids_horizontal=c.avoids_horizontal)
                                                         for c in cyls]}
        _emit_json(out, args.out)
        return 0
    hc = horizontal_cylinders(q, args.cap, _policy(args))
    if isinstance(hc, Periodic):
        _emit_json({"periodic": True, "cylinders": [_cyl_dict(c) for c in hc.cylinders]}, args.out)
        return 0
    _emit_json({"periodic": False, "diagnostic": hc.diagnostic}, args.out)
    return 1


def cmd_flow(args):
    from .deform import flow
    from .surface import save_surface

    q = _load_surface(args.surface)
    vals = {"horocycle": args.s, "geodesic": args.t, "rescale": args.c, "rotate": args.theta}
    param = vals[args.op]
    if param is None:
        param = args.param
    if param is None:
        raise UsageError(f"--op {args.op} needs a parameter")
    q2 = flow(q, args.op, param)
    if args.out:
        save_surface(q2, args.out)
    else:
        print(q2.to_json(indent=1))
    return 0


def cmd_surgery(args):
    from .deform import SurgerySpec, cylinder_surgery, find_cylinder_in_direction
    from .surface import save_surface
    from .trace import Periodic, horizontal_cylinders

    spec = _read_json(args.spec)
    _echo(args, spec=spec)
    for key in ("surface", "mode", "s"):
        if key not in spec:
            raise UsageError(f"surgery spec needs {key!r}")
    base = os.path.dirname(os.path.abspath(args.spec))
    path = spec["surface"] if os.path.isabs(spec["surface"]) else os.path.join(base, spec["surface"])
    q = _load_surface(path)
    cap = float(spec.get("cap", 20.0))
    theta = float(spec.get("direction", 0.0))
    if theta:
        cyls = find_cylinder_in_direction(q, theta, cap, _policy(args))
    else:
        hc = horizontal_cylinders(q, cap, _policy(args))
        if not isinstance(hc, Periodic):
            print(f"not horizontally periodic: {hc.diagnostic}", file=sys.stderr)
            return 1
        cyls = hc.cylinders
    chosen = spec.get("cylinders", [[0, 1.0]])
    try:
        pairs = [(cyls[int(i)], float(h)) for i, h in chosen]
    except (IndexError, TypeError, ValueError):
        raise UsageError(f"bad cylinder selection {chosen!r}; {len(cyls)} cylinders available")
    q2 = cylinder_surgery(q, SurgerySpec(pairs, spec["mode"], float(spec["s"])))
    out = args.out or spec.get("out")
    if out:
        save_surface(q2, out)
    else:
        print(q2.to_json(indent=1))
    return 0


def linmodel_report(check, d, n, seed):
    """Run a batch of linear model checks and summarise the worst error."""
    from . import linmodel as lm

    rng = np.random.default_rng(seed)
    worst = 0.0
    extra = {}
    if check == "jacobian":
        for _ in range(n):
            sp = lm.SplitSpace.random(d, rng)
            while True:
                y0 = rng.standard_normal(d)
                x = rng.standard_normal(d)
                c0 = sp.pair(x, y0)
                y1 = y0 + 0.3 * rng.standard_normal(d)
                if c0 > 0.1 and sp.pair(x, y1) > 0.1:
                    break
            x = x / c0
            frame = lm.tangent_frame(sp, y0, rng)
            m, p = lm.jacobian_check(sp, y0, y1, x, frame)
            worst = max(worst, abs(m / p - 1))
        tol = 1e-8
    elif check == "contraction":
        for _ in range(n):
            sp = lm.SplitSpace.random(d, rng)
            pt = lm.random_point(sp, rng)
            lhs, rhs = lm.contraction_check(sp, pt, lm.tangent_frame_v1(sp, pt, rng))
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
        tol = 1e-8
    elif check == "cone":
        vol, svol, surf, ratio, sratio = lm.cone_measure_check(lm.default_patch(d), n, rng)
        worst = abs(ratio - 2 * d)
        extra = {"vol_cone": vol, "sigma_vol": svol, "surf_int": surf, "ratio": ratio,
                 "sigma_ratio": sratio, "target": 2 * d}
        tol = 3 * sratio
    else:
        raise UsageError(f"unknown check {check!r}")
    rep = {"check": check, "d": d, "instances": n, "seed": seed, "max_rel_err": worst,
           "tolerance": tol, "pass": bool(worst <= tol)}
    rep.update(extra)
    return rep


def cmd_linmodel(args):
    seed = _seed(args)
    d_min = 1 if args.check == "cone" else 2
    if args.d < d_min or args.d > 6:
        raise UsageError(f"--d must lie in [{d_min}, 6]")
    rep = linmodel_report(args.check, args.d, args.n, seed)
    _emit_json(rep, args.out)
    return 0 if rep["pass"] else 1


def cmd_experiment(args):
    from .experiments import ExperimentConfig, run

    d = _read_json(args.config)
    if not isinstance(d, dict):
        raise UsageError("experiment config must be a JSON object")
    if args.seed is not None or ("seed" not in d and "FLATLAB_SEED" in os.environ):
        d["seed"] = _seed(args)
    if args.threads is not None:
        d["threads"] = args.threads
    if args.out:
        d["out"] = args.out
    cfg = ExperimentConfig.from_dict(d)
    print("resolved config: " + json.dumps(cfg.as_dict(), sort_keys=True), file=sys.stderr)
    report = run(cfg)
    if not cfg.out:
        _emit_json(report.as_dict())
    print(f"{cfg.kind}: {'pass' if report.passed else 'fail'}", file=sys.stderr)
    return 0 if report.passed else 1


# ---- parser --------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (overrides FLATLAB_SEED)")
    common.add_argument("--eps-glue", type=float, default=1e-9)
    common.add_argument("--eps-hit", type=float, default=1e-9)
    common.add_argument("--eps-dedup", type=float, default=1e-9)
    common.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")

    ap = argparse.ArgumentParser(prog="flatlab", description="Experiments on translation surfaces.")
    ap.add_argument("--version", action="version", version=f"flatlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a surface file")
    p.add_argument("--surface", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build", parents=[common], help="build a family surface")
    p.add_argument("--family", required=True, choices=["h11", "h2", "torus", "octagon", "two_tori"])
    p.add_argument("--params", help="JSON object or CSV file written by 'sample'")
    p.add_argument("--row", type=int, default=0, help="row of a CSV parameter file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("sample", parents=[common], help="sample family parameters")
    p.add_argument("--family", required=True, choices=["h11", "h2"])
    p.add_argument("--a", type=float)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("sc", parents=[common], help="enumerate saddle connections")
    p.add_argument("--surface", required=True)
    p.add_argument("--max-len", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sc)

    p = sub.add_parser("cylinders", parents=[common], help="cylinder decomposition")
    p.add_argument("--surface", required=True)
    p.add_argument("--cap", type=float, default=20.0)
    p.add_argument("--direction", type=float, default=0.0, help="angle of the core direction")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cylinders)

    p = sub.add_parser("flow", parents=[common], help="apply horocycle, geodesic, rescale or rotate")
    p.add_argument("--surface", required=True)
    p.add_argument("--op", required=True, choices=["horocycle", "geodesic", "rescale", "rotate"])
    p.add_argument("--t", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--param", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("surgery", parents=[common], help="shear or stretch cylinders")
    p.add_argument("--spec", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_surgery)

    p = sub.add_parser("linmodel", parents=[common], help="linear model checks")
    p.add_argument("--check", required=True, choices=["jacobian", "contraction", "cone"])
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=cmd_linmodel)

    p = sub.add_parser("experiment", help="run experiments")
    esub = p.add_subparsers(dest="action", required=True)
    r = esub.add_parser("run", parents=[common], help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out")
    r.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise UsageError("--threads must be positive")
        return args.func(args)
    except UsageError as exc:
        print(f"flatlab: error: {exc}", file=sys.stderr)
        return 2
    except FlatlabError as exc:
        print(f"flatlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
