"""Command-line entry point.

Every subcommand writes a JSON report (validated against its schema) to the
output directory, and sweeps additionally write a CSV with one row per
cell. The report is also printed to stdout. Exit codes: 0 success, 2 usage
or invalid parameters, 3 budget exhausted, 4 precondition unmet.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

import jsonschema
import numpy as np

from . import __version__
from .closing import (
    dichotomy_driver,
    find_hyperbolic_certificate,
    find_parabolic,
    flowed_delaunay,
    margulis_f,
    membership_certificate,
    near_returns,
    r_proxy,
    sheet_count_check,
)
from .config import RunConfig
from .errors import BudgetExceeded, InvalidParameter, PreconditionUnmet, StrataLabError
from .nondivergence import (
    fitted_alpha,
    good_sweep,
    main_nondiv_threshold,
    mw_sweep,
    polynomial_bound_mc,
)
from .saddle import cylinder_decomposition, enumerate_saddle_connections, injectivity_radius
from .sl2 import as_mat2, classify, u_s
from .surface import TranslationSurface, normalize_area, surface_from_json, surface_from_spec, validate

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_PRECONDITION = 0, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits by default; we route through run()
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _floats(text: str, n: int | None = None) -> list[float]:
    vals = [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
    return vals


def _pairs(text: str) -> list[tuple[float, float]]:
    out = []
    for chunk in text.split(";"):
        x, y = _floats(chunk, 2)
        out.append((x, y))
    return out


# ---------------------------------------------------------------- output


def _schema(name: str) -> dict:
    return json.loads(resources.files("strata_lab").joinpath("schemas", f"{name}.json").read_text())


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _portable_argv(argv: Sequence[str]) -> list[str]:
    """``argv`` without the output location, which must not affect report bytes."""
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
        elif a == "--out":
            skip = True
        elif not a.startswith("--out="):
            out.append(a)
    return out


class Emitter:
    """Writes reports under the output directory with deterministic names."""

    def __init__(self, cfg: RunConfig, argv: Sequence[str], stem: str):
        self.dir = Path(cfg.output_dir)
        self.stem = stem
        self.meta = {"version": __version__, "argv": _portable_argv(argv), "seed": cfg.seed}
        self.cfg = cfg

    def json(self, schema: str, payload: dict) -> dict:
        doc = _clean({"schema": f"{schema}/1", **payload, "config": {"constants": dict(self.cfg.constants), "budgets": dict(self.cfg.budgets)}, "metadata": self.meta})
        jsonschema.validate(doc, _schema(schema))
        self.dir.mkdir(parents=True, exist_ok=True)
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        (self.dir / f"{self.stem}.json").write_text(text)
        sys.stdout.write(text)
        return doc

    def csv(self, rows: list[dict], fields: Sequence[str]) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([repr(float(r[f])) if isinstance(r[f], (float, np.floating)) else r[f] for f in fields])
        path = self.dir / f"{self.stem}.csv"
        path.write_text(buf.getvalue())
        return path


def _surface(args) -> TranslationSurface:
    if getattr(args, "file", None):
        S = surface_from_json(Path(args.file).read_text())
    else:
        S = surface_from_spec(args.builder)
    return normalize_area(S) if getattr(args, "normalize", False) else S


# ---------------------------------------------------------------- commands


def cmd_surface(args, em: Emitter) -> int:
    S = _surface(args)
    if args.action == "validate":
        em.json("surface", {"action": "validate", "report": validate(S).to_json()})
    else:
        em.json("surface", {"action": "build", "surface": S.to_json(), "report": validate(S).to_json()})
    return EXIT_OK


def cmd_sc(args, em: Emitter) -> int:
    S = _surface(args)
    rows = [sc.to_row() for sc in enumerate_saddle_connections(S, args.L, budget=em.cfg.budgets["wedges"])]
    em.csv(rows, ["hol_x", "hol_y", "length", "start", "end"])
    em.json("enumeration", {"L": args.L, "count": len(rows), "csv": f"{em.stem}.csv"})
    return EXIT_OK


def cmd_inj(args, em: Emitter) -> int:
    S = _surface(args)
    if args.t is None and args.s is None:
        val = injectivity_radius(S)
    else:
        val = injectivity_radius(flowed_delaunay(S, u_s(args.s or 0.0), args.t or 0.0))
    em.json("inj", {"t": args.t, "s": args.s, "injectivity_radius": val})
    return EXIT_OK


def cmd_cyl(args, em: Emitter) -> int:
    S = _surface(args)
    cyls = cylinder_decomposition(S, tuple(args.dir))
    rows = [c.to_row() for c in cyls]
    em.csv(rows, ["dir_x", "dir_y", "circumference", "height", "modulus"])
    em.json("cylinders", {"direction": list(args.dir), "cylinders": rows})
    return EXIT_OK


def cmd_nondiv(args, em: Emitter) -> int:
    nd = em.cfg.nondiv()
    if args.action == "mw":
        S = _surface(args)
        eps = sorted(args.eps, reverse=True)
        reps = mw_sweep(S, args.t, eps, (args.lo, args.hi), args.grid, nd)
        rows = [r.to_json() for r in reps]
        em.csv([{k: r[k] for k in ("t", "epsilon", "fraction", "bound")} for r in rows], ["t", "epsilon", "fraction", "bound"])
        thr = main_nondiv_threshold(S, args.beta, nd) if args.beta else None
        em.json(
            "nondiv_mw",
            {"cells": rows, "alpha_fit": fitted_alpha(reps), "threshold": thr, "antitone": all(a.fraction >= b.fraction for a, b in zip(reps, reps[1:]))},
        )
    elif args.action == "good":
        S = _surface(args)
        rep = good_sweep(S, args.cells, np.random.default_rng(em.cfg.seed), args.L, args.grid)
        rows = [{"lo": c[0][0], "hi": c[0][1], "eps": c[1], "ratio": c[2], "bound": c[3]} for c in rep.cells]
        em.csv(rows, ["lo", "hi", "eps", "ratio", "bound"])
        em.json("nondiv_good", {"kappa": rep.kappa, "alpha": rep.alpha, "trials": rep.trials, "violations": [list(v) for v in rep.violations]})
    else:
        est = polynomial_bound_mc(args.a1, args.a2, args.a3, args.c, args.C, args.D, args.t, args.eta, args.samples, em.cfg.seed)
        em.json("nondiv_poly", est.to_json())
    return EXIT_OK


def cmd_margulis(args, em: Emitter) -> int:
    S = _surface(args)
    cc = em.cfg.closing()
    nu = args.nu if args.nu is not None else cc.nu
    scan = near_returns(S, args.t, args.beta, args.grid, constants=cc)
    by = scan.by_base()
    rows = []
    for i, z in enumerate(scan.surfaces):
        r = scan.r_values.get(i)
        if r is None:
            r = r_proxy(z, cc.C1, cc.c0)
        rows.append({"index": i, "returns": len(by.get(i, ())), "r_proxy": r, "f_t": margulis_f(r, by.get(i, ()), nu)})
    em.csv(rows, ["index", "returns", "r_proxy", "f_t"])
    em.json(
        "margulis",
        {
            "t": args.t,
            "beta": args.beta,
            "nu": nu,
            "scan": scan.summary(),
            "max_f_t": max(r["f_t"] for r in rows),
            "sheet_ok": sheet_count_check(len(scan), args.t, cc.kappa4, cc.K_sheet),
            "returns": [r.to_json() for r in scan.returns[: args.keep]],
        },
    )
    return EXIT_OK


def cmd_veech(args, em: Emitter) -> int:
    S = _surface(args)
    if args.action == "member":
        cert = membership_certificate(S, as_mat2(args.matrix))
        em.json("veech", {"action": "member", "member": cert.member, "certificate": cert.to_json()})
    elif args.action == "parabolic":
        P = find_parabolic(S, tuple(args.dir))
        em.json("veech", {"action": "parabolic", "direction": list(args.dir), "matrix": None if P is None else list(P.as_tuple())})
    else:
        cert = find_hyperbolic_certificate(S, args.dirs)
        payload = {"action": "hyperbolic", "found": cert is not None}
        if cert is not None:
            payload.update(
                {
                    "matrix": list(cert.gamma.as_tuple()),
                    "trace": cert.trace,
                    "class": classify(cert.gamma),
                    "translation_length": cert.translation_length,
                    "certificate": cert.to_json(),
                }
            )
        em.json("veech", payload)
    return EXIT_OK


def cmd_closing(args, em: Emitter) -> int:
    S = _surface(args)
    cc = em.cfg.closing()
    rep = dichotomy_driver(S, args.t, args.D, cc, t_prime=args.t_prime)
    doc = rep.to_json()
    doc.pop("schema")
    rows = [{k: p[k] for k in ("s", "inj", "max_f_t", "returns")} for p in rep.diagnostics.get("samples", [])]
    if rows:
        em.csv(rows, ["s", "inj", "max_f_t", "returns"])
    em.json("dichotomy", doc)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_surface_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--builder", default="octagon", help="octagon | torus | lshape:a,b | origami:<h>,<v>")
    g.add_argument("--file", help="surface JSON file")
    p.add_argument("--normalize", action="store_true", help="rescale to unit area first")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="strata-lab", description="Translation-surface experiments.")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1, help="worker cap (computations are serial)")
    p.add_argument("--config", help="RunConfig JSON file")
    p.add_argument("--out", help="output directory (STRATA_LAB_OUT overrides)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    q = sub.add_parser("surface")
    q.add_argument("action", choices=["validate", "build"])
    _add_surface_args(q)
    q.set_defaults(func=cmd_surface, stem=lambda a: f"surface_{a.action}")

    q = sub.add_parser("sc")
    q.add_argument("action", choices=["enum"])
    _add_surface_args(q)
    q.add_argument("--L", type=float, required=True)
    q.set_defaults(func=cmd_sc, stem=lambda a: "sc_enum")

    q = sub.add_parser("inj")
    _add_surface_args(q)
    q.add_argument("--t", type=float)
    q.add_argument("--s", type=float)
    q.set_defaults(func=cmd_inj, stem=lambda a: "inj")

    q = sub.add_parser("cyl")
    _add_surface_args(q)
    q.add_argument("--dir", type=lambda s: _floats(s, 2), default=[1.0, 0.0])
    q.set_defaults(func=cmd_cyl, stem=lambda a: "cyl")

    q = sub.add_parser("nondiv")
    nsub = q.add_subparsers(dest="action", required=True, parser_class=_Parser)
    m = nsub.add_parser("mw")
    _add_surface_args(m)
    m.add_argument("--t", type=float, required=True)
    m.add_argument("--eps", type=_floats, required=True)
    m.add_argument("--grid", type=int, default=1000)
    m.add_argument("--lo", type=float, default=0.0)
    m.add_argument("--hi", type=float, default=1.0)
    m.add_argument("--beta", type=float, help="also report the threshold in t for this eta")
    g = nsub.add_parser("good")
    _add_surface_args(g)
    g.add_argument("--cells", type=int, default=100)
    g.add_argument("--L", type=float, default=3.0)
    g.add_argument("--grid", type=int, default=10_000)
    b = nsub.add_parser("polybound")
    for name, default in (("a1", 0.0), ("a2", 1.0), ("a3", 0.0), ("c", 0.5), ("C", 0.1), ("D", 1.0), ("t", 1.0), ("eta", 0.1)):
        b.add_argument(f"--{name}", type=float, default=default)
    b.add_argument("--samples", type=int, default=100_000)
    q.set_defaults(func=cmd_nondiv, stem=lambda a: f"nondiv_{a.action}")

    q = sub.add_parser("margulis")
    _add_surface_args(q)
    q.add_argument("--t", type=float, required=True)
    q.add_argument("--beta", type=float, required=True)
    q.add_argument("--nu", type=float)
    q.add_argument("--grid", type=lambda s: [int(x) for x in _floats(s, 3)], default=[3, 3, 16])
    q.add_argument("--keep", type=int, default=20, help="returns listed in the report")
    q.set_defaults(func=cmd_margulis, stem=lambda a: "margulis")

    q = sub.add_parser("veech")
    vsub = q.add_subparsers(dest="action", required=True, parser_class=_Parser)
    v = vsub.add_parser("member")
    _add_surface_args(v)
    v.add_argument("--matrix", type=lambda s: _floats(s, 4), required=True)
    v = vsub.add_parser("parabolic")
    _add_surface_args(v)
    v.add_argument("--dir", type=lambda s: _floats(s, 2), default=[1.0, 0.0])
    v = vsub.add_parser("hyperbolic")
    _add_surface_args(v)
    v.add_argument("--dirs", type=_pairs, default=[(1.0, 0.0), (0.0, 1.0)], help="semicolon-separated directions")
    q.set_defaults(func=cmd_veech, stem=lambda a: f"veech_{a.action}")

    q = sub.add_parser("closing")
    q.add_argument("action", choices=["run"])
    _add_surface_args(q)
    q.add_argument("--t", type=float, required=True)
    q.add_argument("--D", type=float)
    q.add_argument("--t-prime", type=float, dest="t_prime")
    q.set_defaults(func=cmd_closing, stem=lambda a: "closing_run")
    return p


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError(parser.format_usage())
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_USAGE
    try:
        cfg = RunConfig.load(args.config, seed=args.seed, output_dir=args.out)
        if args.jobs < 1:
            raise InvalidParameter("--jobs must be positive")
        em = Emitter(cfg, argv, args.stem(args))
        return args.func(args, em)
    except PreconditionUnmet as exc:
        sys.stderr.write(f"precondition unmet: {exc}\n")
        return EXIT_PRECONDITION
    except BudgetExceeded as exc:
        sys.stderr.write(f"budget exceeded: {exc}\n")
        return EXIT_BUDGET
    except (InvalidParameter, ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"invalid input: {exc}\n")
        return EXIT_USAGE
    except StrataLabError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
