"""Command-line interface.

Subcommands: solve (full pipeline, writes fields.csv + report.json),
check (hypothesis certification only), verify (check an externally
supplied profile/density pair), compare (density stability between two
sources), example (materialize and validate a bundled fixture).

Exit codes: 0 success, 1 verification or assertion failure, 2
configuration error, 3 hypothesis failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import checks, pipeline, verify
from .eikonal import SolverError
from .fields import FieldFormatError, ScalarField
from .fixtures import FIXTURE_IDS
from .geometry import ConfigError, GeometryError, Scene, Source, load_scene
from .transport import HypothesisError, build_slices, transport_density

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_INTERNAL = 4


def _parse_tols(items: list[str] | None) -> dict:
    out: dict = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--tol expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = float(v)
    return out


def _load(args) -> Scene:
    if not args.scene:
        raise ConfigError("--scene is required")
    if not os.path.exists(args.scene):
        raise ConfigError(f"scene file not found: {args.scene}")
    tols = _parse_tols(getattr(args, "tol", None))
    if getattr(args, "seed", None) is not None:
        tols.setdefault("seed", args.seed)
    return load_scene(args.scene, h=getattr(args, "h", None),
                      tol_overrides=tols or None)


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    scene = _load(args)
    sol = pipeline.solve_scene(scene, seed=args.seed)
    out = _outdir(args)
    pipeline.write_fields_csv(sol, os.path.join(out, "fields.csv"))
    pipeline.report_json(sol, os.path.join(out, "report.json"))
    verdict = sol.uniqueness.to_json()["verdict"] if sol.uniqueness else "n/a"
    print("solve: h5=%s h6=%s uniqueness=%s discrepancy=%.3g" % (
        "pass" if sol.h5.passed else "fail",
        "pass" if sol.h6.passed else "fail",
        verdict, sol.lh.discrepancy))
    return EXIT_OK if sol.hypotheses_ok else EXIT_HYPOTHESIS


def cmd_check(args) -> int:
    scene = _load(args)
    sol = pipeline.solve_scene(scene, seed=args.seed, run_transport=False)
    out = _outdir(args)
    pipeline.report_json(sol, os.path.join(out, "report.json"))
    print("check: h5=%s h6=%s" % ("pass" if sol.h5.passed else "fail",
                                  "pass" if sol.h6.passed else "fail"))
    return EXIT_OK if sol.hypotheses_ok else EXIT_HYPOTHESIS


def cmd_verify(args) -> int:
    scene = _load(args)
    if not args.u or not args.v:
        raise ConfigError("verify needs --u and --v field files")
    u = ScalarField.load_csv(args.u)
    v = ScalarField.load_csv(args.v)
    if not (u.grid.matches(scene.grid) and v.grid.matches(scene.grid)):
        raise ConfigError("field file grids do not match the scene grid")
    sol = pipeline.solve_scene(scene, seed=args.seed, run_transport=False)
    rep = verify.verify_solution(scene, u, v, sol.bsets,
                                 rng=np.random.default_rng(args.seed or 0))
    out = _outdir(args)
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump({"pair_check": rep.to_json(),
                   "h5": sol.h5.to_json(), "h6": sol.h6.to_json()},
                  fh, indent=1, sort_keys=True)
        fh.write("\n")
    print("verify: %s" % ("pass" if rep.passed else "fail"))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_compare(args) -> int:
    scene = _load(args)
    if not args.f2:
        raise ConfigError("compare needs --f2 (inline JSON or path)")
    spec = args.f2
    if os.path.exists(spec):
        with open(spec, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    else:
        try:
            cfg = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--f2 is neither a file nor JSON: {exc}")
    f2 = Source.from_config(cfg)
    sol = pipeline.solve_scene(scene, seed=args.seed, run_verify=False)
    if not (sol.h5 and sol.h5.passed):
        print("compare: hypothesis failure (straight transport)")
        return EXIT_HYPOTHESIS
    lhs, rhs, ok = verify.stability_check(scene, sol.lh, sol.rf, sol.slices,
                                          scene.source, f2)
    v2 = transport_density(scene, sol.lh, sol.rf, sol.slices, source=f2)
    out = _outdir(args)
    v2.save_csv(os.path.join(out, "v_f2.csv"), "v_f2")
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump({"stability": {"lhs": lhs, "rhs": rhs, "pass": ok}},
                  fh, indent=1, sort_keys=True)
        fh.write("\n")
    print("compare: |v1-v2|_L1=%.6g bound=%.6g %s"
          % (lhs, rhs, "pass" if ok else "fail"))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_example(args) -> int:
    if args.fixture not in FIXTURE_IDS:
        raise ConfigError(f"unknown fixture {args.fixture!r}; "
                          f"choose from {', '.join(FIXTURE_IDS)}")
    out = _outdir(args)
    outcome = checks.run_example(args.fixture, out,
                                 h=args.h or 1.0 / 128.0,
                                 seed=args.seed or 0)
    for line in outcome.lines():
        print(line)
    return EXIT_OK if outcome.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sandflow",
        description="Solve and verify stationary two-layer granular "
                    "configurations on polygonal tables")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scene_required=True):
        p.add_argument("--scene", help="scene config JSON",
                       required=False)
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--h", type=float, help="grid spacing override")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for test-bump sampling")
        p.add_argument("--tol", action="append", metavar="KEY=VAL",
                       help="tolerance override (repeatable)")

    p = sub.add_parser("solve", help="full pipeline, write fields + report")
    common(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("check", help="hypothesis certification only")
    common(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("verify", help="verify an external (u, v) pair")
    common(p)
    p.add_argument("--u", help="profile field CSV")
    p.add_argument("--v", help="density field CSV")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("compare", help="density stability for two sources")
    common(p)
    p.add_argument("--f2", help="second source spec (JSON or path)")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("example", help="run a bundled fixture end to end")
    common(p)
    p.add_argument("--fixture", required=True,
                   help="one of " + ", ".join(FIXTURE_IDS))
    p.set_defaults(fn=cmd_example)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, GeometryError, FieldFormatError,
            FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisError as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (SolverError, RuntimeError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
