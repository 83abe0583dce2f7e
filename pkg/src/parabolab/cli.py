"""Command line entry point: ``parabolab <subcommand> [flags]``.

Every run writes its artifacts (GF01 fields, CSV tables, JSON reports) to
``--out`` and embeds a manifest with the resolved configuration in each JSON
report. Outputs depend only on the configuration and the seed; wall-clock
timings go to a separate ``timings.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .grid import CellSet, GridFunction, build_ball_grid, read_gf01, write_gf01

SCHEMA = "parabolab/1"
SUBCOMMANDS = ("case", "solve", "contact", "envelope", "decay", "w2d", "density", "covering",
               "verify")


class UsageError(Exception):
    """Bad input that argparse cannot catch (unreadable files, inconsistent flags)."""


# -- serialisation -------------------------------------------------------------------------


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars and arrays to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def manifest(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    return {"schema": SCHEMA, "version": __version__, "subcommand": args.command, "config": cfg}


def report(args, name: str, body: dict) -> Path:
    out = Path(args.out)
    path = out / name
    write_json(path, {"schema": SCHEMA, "manifest": manifest(args), **body})
    return path


# -- input fields ---------------------------------------------------------------------------


def _ellipticity(args):
    from .operators import Ellipticity

    return Ellipticity(args.lam, args.Lam)


def _case(args):
    from .catalog import parse_case

    return parse_case(args.case, ndim=args.ndim, ell=_ellipticity(args))


def load_field(args) -> tuple[GridFunction, object]:
    """The input field from ``--in`` (GF01) or ``--case``, plus the case when there is one."""
    if getattr(args, "input", None):
        try:
            u = read_gf01(args.input)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read {args.input}: {exc}") from exc
        # the file fixes the grid; record it so the manifest does not echo a default
        args.resolution, args.ndim = u.spec.cells_per_axis, u.spec.ndim
        return u, None
    if not getattr(args, "case", None):
        raise UsageError("give --in FILE or --case NAME")
    case = _case(args)
    spec = build_ball_grid(args.ndim, args.resolution)
    return case.sample(spec), case


# -- subcommands ----------------------------------------------------------------------------


def cmd_case(args) -> int:
    from .catalog import CASE_KINDS

    if args.list or not args.case:
        for kind in CASE_KINDS:
            print(kind)
        return 0
    case = _case(args)
    spec = build_ball_grid(args.ndim, args.resolution)
    u, f = case.sample(spec), case.sample_f(spec)
    out = Path(args.out)
    write_gf01(out / "u.gf", u)
    write_gf01(out / "f.gf", f)
    report(args, "case.json", {
        "case": case.name, "notes": case.notes, "in_class": case.in_class,
        "gamma": case.gamma, "lam": case.ell.lam, "Lam": case.ell.Lam,
        "params": case.params, "h": spec.h, "u_sup": u.sup_norm(), "f_sup": f.sup_norm(),
    })
    return 0


def cmd_solve(args) -> int:
    from .solver import SolverConfig, residual_report, solve_plaplace, solve_pucci

    spec = build_ball_grid(2 if args.kind == "pucci" else args.ndim, args.resolution)
    if args.boundary_case:
        from .catalog import parse_case

        bcase = parse_case(args.boundary_case, ndim=spec.ndim)
        boundary = bcase.u
    else:
        bcase = None
        boundary = lambda x: np.zeros(len(x))  # noqa: E731
    cfg = SolverConfig(max_iterations=args.max_iterations, residual_tolerance=args.tol,
                       seed=args.seed)
    if args.kind == "plaplace":
        res = solve_plaplace(args.f, boundary, args.p, spec, cfg)
        gamma = 2.0 - args.p
        from .operators import Ellipticity

        ell = Ellipticity(args.p - 1.0, 1.0)
    else:
        ell = _ellipticity(args)
        res = solve_pucci(args.f, boundary, args.sign, ell, spec, cfg)
        gamma = args.gamma
    rep = residual_report(res.u, args.f, gamma, ell)
    body = {"kind": args.kind, "converged": res.converged, "residual": res.residual,
            "iterations": res.iterations, "log": res.log,
            "residual_report": {"violations": rep.violations, "checked": rep.checked,
                                "worst_margin": rep.worst_margin, "tau": rep.tau}}
    if bcase is not None:
        exact = bcase.sample(spec)
        body["max_error_vs_boundary_case"] = float(np.nanmax(np.abs(res.u.values - exact.values)))
    write_gf01(Path(args.out) / "u.gf", res.u)
    report(args, "solve.json", body)
    return 0


def _vertex_set(args, spec):
    vs = args.vertex_set
    if not vs or vs == ["full"]:
        return None
    if vs[0] == "ball":
        if len(vs) != spec.ndim + 2:
            raise UsageError(f"--vertex-set ball needs {spec.ndim} centre coordinates and a radius")
        try:
            nums = [float(v) for v in vs[1:]]
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        return CellSet(spec, spec.ball_raster(nums[:-1], nums[-1]) & spec.mask)
    if len(vs) != 1:
        raise UsageError("--vertex-set takes 'full', 'ball C.. R' or a GF01 mask file")
    try:
        V = read_gf01(vs[0])
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {vs[0]}: {exc}") from exc
    if V.spec != spec:
        raise UsageError("vertex set grid differs from the field grid")
    return CellSet(spec, np.nan_to_num(V.values) > 0.5)


def cmd_contact(args) -> int:
    from .contact import contact_set

    u, _ = load_field(args)
    cs = contact_set(u, args.kappa, V=_vertex_set(args, u.spec), direction=args.dir, tol=args.tol)
    write_gf01(Path(args.out) / "mask.gf", cs.members)
    report(args, "contact.json", {
        "kappa": cs.kappa, "direction": cs.direction, "tol": cs.tol, "vertex_set": cs.vertex_set,
        "nodes": cs.members.count, "measure": cs.measure(),
        "complement_measure": cs.complement_measure(),
        "boundary_ring_nodes": int(np.count_nonzero(cs.mask & cs.boundary_ring)),
    })
    return 0


def cmd_envelope(args) -> int:
    from .contact import moreau_envelope

    u, _ = load_field(args)
    ue = moreau_envelope(u, args.epsilon)
    write_gf01(Path(args.out) / "u_eps.gf", ue)
    diff = u.values - ue.values
    report(args, "envelope.json", {"epsilon": args.epsilon, "kappa": 2.0 / args.epsilon**4,
                                   "max_gap": float(np.nanmax(diff)),
                                   "min_gap": float(np.nanmin(diff))})
    return 0


def cmd_decay(args) -> int:
    from .measure import decay_profile

    u, _ = load_field(args)
    rep = decay_profile(u, args.dir, (args.t0, args.M, args.kmax),
                        resolution_limit=args.resolution_limit)
    write_csv(Path(args.out) / "decay.csv",
              ["k", "t_k", "measure_lower", "measure_upper", "measure_both"], rep.rows())
    report(args, "decay.json", rep.to_dict())
    return 0


def cmd_w2d(args) -> int:
    from .measure import decay_profile, normalize_and_ratio, w2delta_compare

    u, case = load_field(args)
    direct, decay, ok = w2delta_compare(u, args.delta, args.M)
    prof = decay_profile(u, "both", (1.0, args.M, 8))
    body = {"delta": args.delta, "M": args.M, "direct": direct, "decay_bound": decay,
            "direct_below_bound": ok, "sigma": prof.sigma, "theta": prof.theta,
            "fit_steps": prof.fit_steps}
    if case is not None and case.in_class:
        params, ratio = normalize_and_ratio(u, case.sample_f(u.spec), case.gamma, args.eps_guard,
                                            args.delta)
        body["normalization"] = {"a": params.a, "u_scaled_sup": params.u_scaled_sup,
                                 "f_scaled_sup": params.f_scaled_sup,
                                 "hypotheses_hold": params.hypotheses_hold}
        body["ratio"] = ratio
    report(args, "w2d.json", body)
    return 0


def cmd_density(args) -> int:
    from .density import density_scan, nonempty_witness, step_pipeline

    u, case = load_field(args)
    body = {}
    scan = density_scan(u, args.K, args.M, args.balls, seed=args.seed)
    body["scan"] = scan.to_dict()
    if u.sup_norm() <= 1 / 16:
        body["witness"] = nonempty_witness(u, args.K)
    else:
        small = u.scaled(1.0 / (16 * u.sup_norm()) * (1 - 1e-12))
        body["witness_of_normalized"] = nonempty_witness(small, args.K)
    ell = case.ell if case is not None else _ellipticity(args)
    body["steps"] = {str(M): [r.to_dict() for r in
                              step_pipeline(u, args.K, M, ell, A=args.A, balls=args.step_balls,
                                            seed=args.seed)]
                     for M in args.M}
    report(args, "density.json", body)
    return 0


def _mask_arg(path, spec=None):
    try:
        g = read_gf01(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if spec is not None and g.spec != spec:
        raise UsageError("E and F live on different grids")
    return g.spec, np.nan_to_num(g.values) > 0.5


def cmd_covering(args) -> int:
    from .covering import RasterSet, covering_check, random_instance

    if args.E and args.F:
        spec, E = _mask_arg(args.E)
        _, F = _mask_arg(args.F, spec)
        if args.mu is None:
            raise UsageError("--mu is required with --E/--F")
        mu = args.mu
        Es, Fs = RasterSet.from_mask(spec, E), RasterSet.from_mask(spec, F)
    elif args.E or args.F:
        raise UsageError("give both --E and --F, or neither")
    else:
        spec = build_ball_grid(args.ndim, args.resolution)
        Es, Fs, mu = random_instance(spec, args.seed)
        mu = args.mu if args.mu is not None else mu
    try:
        verdict = covering_check(Es, Fs, mu, args.balls, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report(args, "covering.json", verdict.to_dict())
    return 0


def cmd_verify(args) -> int:
    from .acceptance import VerifyContext, run_all

    ctx = VerifyContext(resolution=args.resolution, seed=args.seed)
    only = set(args.only) if args.only else None
    out = Path(args.out)
    results = run_all(ctx, only=only, echo=None if args.quiet else print)
    fields = out / "fields"
    fields.mkdir(exist_ok=True)
    from .acceptance import catalog_cases

    spec = build_ball_grid(2, args.resolution)
    for case in catalog_cases():
        write_gf01(fields / f"case_{case.name.replace(':', '_')}.gf", case.sample(spec))
    for res in results:
        for name, gf in sorted(res.fields.items()):
            write_gf01(fields / f"criterion_{res.number:02d}_{name}.gf", gf)
        report(args, f"criterion_{res.number:02d}.json", res.to_dict())
        for name, rows in res.tables.items():
            write_csv(out / f"criterion_{res.number:02d}_{name}.csv",
                      ["k", "t_k", "measure_lower", "measure_upper", "measure_both"], rows)
    # a criterion also fails when it overruns its time budget; the budget
    # verdict lives in timings.json, as runtimes would break reproducibility
    summary = {"criteria": [{"number": r.number, "name": r.name, "ok": r.ok,
                             "summary": r.summary()} for r in results],
               "all_ok": all(r.ok for r in results)}
    path = report(args, "summary.json", summary)
    write_json(out / "timings.json", {"criteria": [
        {"number": r.number, "runtime_s": round(r.runtime, 3), "budget_s": r.budget,
         "within_budget": r.within_budget} for r in results]})
    failed = [r for r in results if not r.passed]
    if failed:
        for r in failed:
            print(f"criterion {r.number} failed, see {out / f'criterion_{r.number:02d}.json'}",
                  file=sys.stderr)
        return 1
    print(f"all {len(results)} criteria passed; summary in {path}")
    return 0


# -- parser ---------------------------------------------------------------------------------


def _field_flags(p, case_required=False):
    src = p.add_mutually_exclusive_group(required=case_required)
    src.add_argument("--in", dest="input", metavar="FILE", help="input field (GF01)")
    src.add_argument("--case", help="catalog case, e.g. quadratic:2, cone, radial_plaplace:1.5")


def _common(p):
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=129, help="nodes per axis (odd)")
    p.add_argument("--ndim", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--Lam", type=float, default=2.0)
    p.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    p.add_argument("--manifest", action="store_true", help="echo the resolved config and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parabolab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("case", help="sample a catalog case to GF01")
    _common(p)
    p.add_argument("--case", default=None)
    p.add_argument("--list", action="store_true", help="print the case kinds and exit")
    p.set_defaults(func=cmd_case)

    p = sub.add_parser("solve", help="p-Laplace or Pucci Dirichlet solve")
    _common(p)
    p.add_argument("--kind", choices=("plaplace", "pucci"), default="plaplace")
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--f", type=float, default=1.0, help="constant right-hand side")
    p.add_argument("--sign", choices=("plus", "minus"), default="minus")
    p.add_argument("--gamma", type=float, default=0.0,
                   help="gradient exponent used in the residual check of a Pucci solve")
    p.add_argument("--boundary-case", default=None,
                   help="catalog case supplying the boundary data (default: zero)")
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("contact", help="contact set of a field")
    _common(p)
    _field_flags(p, True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--dir", choices=("lower", "upper", "both"), default="lower")
    p.add_argument("--tol", type=float, default=None, help="default kappa*h^2")
    p.add_argument("--vertex-set", nargs="+", default=None, metavar="SPEC",
                   help="'full' (default), 'ball C1 .. Cn R', or a GF01 0/1 mask file")
    p.set_defaults(func=cmd_contact)

    p = sub.add_parser("envelope", help="Moreau envelope u_eps")
    _common(p)
    _field_flags(p, True)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("decay", help="contact-complement decay ladder and fitted exponent")
    _common(p)
    _field_flags(p, True)
    p.add_argument("--t0", type=float, default=1.0)
    p.add_argument("--M", type=float, default=2.0)
    p.add_argument("--kmax", type=int, default=8)
    p.add_argument("--dir", choices=("lower", "upper", "both"), default="lower")
    p.add_argument("--resolution-limit", type=float, default=0.3)
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("w2d", help="W^{2,delta} estimate, direct and via decay")
    _common(p)
    _field_flags(p, True)
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--M", type=float, default=2.0)
    p.add_argument("--eps-guard", type=float, default=1e-12)
    p.set_defaults(func=cmd_w2d)

    p = sub.add_parser("density", help="density scan and barrier/vertex-set probe")
    _common(p)
    _field_flags(p, True)
    p.add_argument("--K", type=float, default=1.0)
    p.add_argument("--M", type=float, nargs="+", default=[2.0, 4.0, 8.0])
    p.add_argument("--balls", type=int, default=200)
    p.add_argument("--step-balls", type=int, default=3)
    p.add_argument("--A", type=float, default=3.0)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("covering", help="covering-lemma hypothesis and conclusion check")
    _common(p)
    p.add_argument("--E", default=None, metavar="FILE", help="GF01 0/1 mask")
    p.add_argument("--F", default=None, metavar="FILE", help="GF01 0/1 mask")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--balls", type=int, default=200)
    p.set_defaults(func=cmd_covering)

    p = sub.add_parser("verify", help="run the acceptance suite")
    _common(p)
    p.add_argument("--only", type=int, nargs="+", default=None, metavar="N")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def _cap_threads(n: int | None) -> None:
    if not n:
        return
    if n < 1:
        raise UsageError("--threads must be positive")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMBA_NUM_THREADS"):
        os.environ[var] = str(n)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.manifest:
        print(json.dumps(_clean(manifest(args)), indent=2, sort_keys=True))
        return 0
    try:
        _cap_threads(args.threads)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"parabolab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"parabolab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
