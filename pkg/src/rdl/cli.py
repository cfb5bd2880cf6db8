"""Command-line front end.

Subcommands:
  simulate   run half-plane or radial SDE paths, dump trajectory CSV
  report     asymptotic-invariant report (drift, entropy, volume, chains)
  gromov     Gromov distance between two finite pointed metric spaces
  kernel     export a radial kernel table for plotting

Every command writes a run manifest (<out>.manifest.json) echoing the full
configuration and the SHA-256 digests of its outputs; identical manifests
(minus wall time) imply identical output bytes.  CSV floats use 17
significant digits so regression files are bit-stable.

Exit codes: 0 ok, 2 usage/input error, 3 non-converged estimator,
4 internal invariant failure.  --threads (or RDL_THREADS) caps worker
processes; it never affects results and is recorded in the manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .estimators import (
    Ensemble,
    EstimatorError,
    NonConvergedError,
    inequality_report,
)
from .gromov import (
    FinitePointedSpace,
    MetricError,
    gromov_distance,
)
from .heat_kernels import KernelError, kernel_for
from .model_spaces import GeometryError, builtin_profile, space_from_json
from .sde_sim import SimConfig, simulate_halfplane, simulate_radial

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3
EXIT_INVARIANT = 4


class UsageError(ValueError):
    pass


_SPACE_ALIASES = {
    "e1": {"kind": "euclidean", "dim": 1},
    "e2": {"kind": "euclidean", "dim": 2},
    "e3": {"kind": "euclidean", "dim": 3},
    "h2": {"kind": "hyperbolic", "dim": 2},
    "h3": {"kind": "hyperbolic", "dim": 3},
    "halfplane": {"kind": "halfplane"},
    "euclidean": {"kind": "euclidean"},
    "hyperbolic": {"kind": "hyperbolic"},
}


def _space_from_args(name, dim, kappa):
    name = name.lower()
    if name not in _SPACE_ALIASES:
        raise UsageError(f"unknown space {name!r} (choose from {sorted(_SPACE_ALIASES)})")
    desc = dict(_SPACE_ALIASES[name])
    if desc["kind"] == "euclidean":
        desc.setdefault("dim", dim if dim is not None else 2)
        if dim is not None:
            desc["dim"] = dim
    if desc["kind"] == "hyperbolic":
        desc["k"] = kappa if kappa is not None else 1.0
        if dim is not None:
            desc["dim"] = dim
    return space_from_json(desc)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(command: str, args_echo: dict, outputs: list, seed, wall: float) -> None:
    if not outputs:
        return
    manifest = {
        "schema": "v1",
        "command": command,
        "config": args_echo,
        "seed": seed,
        "version": __version__,
        "threads": args_echo.get("threads"),
        "wall_time_s": wall,
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
    }
    path = outputs[0] + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _threads(args) -> int:
    env = os.environ.get("RDL_THREADS")
    t = args.threads if args.threads is not None else (int(env) if env else 1)
    return max(1, t)


# ------------------------------------------------------------------ simulate


def _cmd_simulate(args) -> int:
    t0 = time.time()
    if (args.space is None) == (args.profile is None):
        raise UsageError("give exactly one of --space or --profile")
    cfg = SimConfig(
        seed=args.seed,
        n_paths=args.paths,
        t_max=args.t_max,
        dt=args.dt,
        record_stride=args.record_stride,
    )
    out = args.out
    if args.space is not None:
        if args.space.lower() != "halfplane":
            raise UsageError("--space supports only 'halfplane'; curved radial runs use --profile")
        paths = simulate_halfplane(cfg)
        with open(out, "w") as fh:
            fh.write("path_id,t,x,y\n")
            for i, p in enumerate(paths):
                for t, x, y in zip(p.times, p.x, p.y):
                    fh.write(f"{i},{_fmt(t)},{_fmt(x)},{_fmt(y)}\n")
    else:
        profile = builtin_profile(args.profile, args.kappa if args.kappa is not None else 1.0)
        r_cap = args.r_cap if args.profile == "kaimanovich" else None
        paths = simulate_radial(profile, cfg, r0=args.r0, r_cap=r_cap)
        with open(out, "w") as fh:
            fh.write("path_id,t,r,h_minus_t,theta\n")
            for i, p in enumerate(paths):
                for t, r, hmt, th in zip(p.times, p.r, p.h_minus_t, p.theta):
                    fh.write(f"{i},{_fmt(t)},{_fmt(r)},{_fmt(hmt)},{_fmt(th)}\n")
    echo = {k: getattr(args, k) for k in
            ("space", "profile", "kappa", "t_max", "dt", "paths", "seed", "r0", "r_cap",
             "record_stride")}
    echo["threads"] = _threads(args)
    _write_manifest("simulate", echo, [out], args.seed, time.time() - t0)
    print(f"wrote {out} ({len(paths)} paths)")
    return EXIT_OK


# -------------------------------------------------------------------- report


def _cmd_report(args) -> int:
    t0 = time.time()
    if (args.space is None) == (args.ensemble_file is None):
        raise UsageError("give exactly one of --space or --ensemble-file")
    t_grid = [float(x) for x in args.t_grid.split(",")] if args.t_grid else None
    if args.ensemble_file:
        with open(args.ensemble_file) as fh:
            target = Ensemble.from_json_dict(json.load(fh))
    else:
        target = _space_from_args(args.space, args.dim, args.kappa)
    report = inequality_report(target, t_grid=t_grid, r_max=args.r_max)
    print(report.render_table())
    outputs = []
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        outputs.append(args.out)
    echo = {
        "space": args.space,
        "dim": args.dim,
        "kappa": args.kappa,
        "ensemble_file": args.ensemble_file,
        "t_grid": t_grid,
        "r_max": args.r_max,
        "threads": _threads(args),
    }
    _write_manifest("report", echo, outputs, None, time.time() - t0)
    if not report.converged:
        print("non-converged estimate; rerun with a longer --t-grid", file=sys.stderr)
        return EXIT_NONCONVERGED
    if not report.all_pass():
        print("inequality chain violated: internal invariant failure", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# -------------------------------------------------------------------- gromov


def _load_space(path: str) -> FinitePointedSpace:
    with open(path) as fh:
        return FinitePointedSpace.from_json_dict(json.load(fh))


def _cmd_gromov(args) -> int:
    t0 = time.time()
    a = _load_space(args.a)
    b = _load_space(args.b)
    res = gromov_distance(a, b, tol=args.tol)
    print(f"d_GS in [{res.lo:.9f}, {res.hi:.9f}]  (value = {res.value:.9f})")
    outputs = []
    if args.witness:
        if res.witness is None:
            print("no witness at the final bracket (distance = 1/2)", file=sys.stderr)
        else:
            with open(args.witness, "w") as fh:
                json.dump({"schema": "v1", "eps": res.hi, "cross": res.witness.tolist()}, fh)
            outputs.append(args.witness)
    echo = {"a": args.a, "b": args.b, "tol": args.tol, "threads": _threads(args)}
    _write_manifest("gromov", echo, outputs, None, time.time() - t0)
    return EXIT_OK


# -------------------------------------------------------------------- kernel


def _cmd_kernel(args) -> int:
    t0 = time.time()
    space = _space_from_args(args.space, args.dim, args.kappa)
    ker = kernel_for(space)
    rs = np.linspace(0.0, args.r_max, args.points)
    with open(args.out, "w") as fh:
        fh.write("t,r,q\n")
        for t in (float(x) for x in args.t.split(",")):
            for r in rs:
                fh.write(f"{_fmt(t)},{_fmt(r)},{_fmt(float(ker.q(t, r)))}\n")
    echo = {"space": args.space, "dim": args.dim, "kappa": args.kappa, "t": args.t,
            "r_max": args.r_max, "points": args.points, "threads": _threads(args)}
    _write_manifest("kernel", echo, [args.out], None, time.time() - t0)
    print(f"wrote {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------- main


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdl", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--threads", type=int, default=None, help="cap worker count (no effect on results)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run SDE paths and dump a trajectory CSV")
    s.add_argument("--space", default=None, help="halfplane")
    s.add_argument("--profile", default=None, choices=["euclid", "hyperbolic", "kaimanovich"])
    s.add_argument("--kappa", type=float, default=None)
    s.add_argument("--t-max", dest="t_max", type=float, required=True)
    s.add_argument("--dt", type=float, default=1e-2)
    s.add_argument("--paths", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--r0", type=float, default=1.0)
    s.add_argument("--r-cap", dest="r_cap", type=float, default=200.0)
    s.add_argument("--record-stride", dest="record_stride", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_simulate)

    r = sub.add_parser("report", help="asymptotic invariants and inequality chains")
    r.add_argument("--space", default=None)
    r.add_argument("--dim", type=int, default=None)
    r.add_argument("--kappa", type=float, default=None)
    r.add_argument("--ensemble-file", dest="ensemble_file", default=None)
    r.add_argument("--t-grid", dest="t_grid", default=None, help="comma-separated horizons")
    r.add_argument("--r-max", dest="r_max", type=float, default=40.0)
    r.add_argument("--out", default=None, help="write the report JSON here")
    r.set_defaults(func=_cmd_report)

    g = sub.add_parser("gromov", help="Gromov distance between two finite pointed spaces")
    g.add_argument("--a", required=True)
    g.add_argument("--b", required=True)
    g.add_argument("--tol", type=float, default=1e-3)
    g.add_argument("--witness", default=None, help="dump the feasible cross matrix here")
    g.set_defaults(func=_cmd_gromov)

    k = sub.add_parser("kernel", help="export q(t, r) tables")
    k.add_argument("--space", required=True)
    k.add_argument("--dim", type=int, default=None)
    k.add_argument("--kappa", type=float, default=None)
    k.add_argument("--t", default="1.0", help="comma-separated times")
    k.add_argument("--r-max", dest="r_max", type=float, default=10.0)
    k.add_argument("--points", type=int, default=201)
    k.add_argument("--out", required=True)
    k.set_defaults(func=_cmd_kernel)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except (UsageError, GeometryError, MetricError, FileNotFoundError, json.JSONDecodeError,
            ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergedError as e:
        print(f"non-converged: {e}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (EstimatorError, KernelError, OverflowError) as e:
        print(f"invariant failure: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
