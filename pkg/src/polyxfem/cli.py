"""Command line front-end.

Verbs::

    polyxfem run <cfg | bundled-name> [--out DIR]
    polyxfem patch-test --elems 10,50,250 [--no-correction]
    polyxfem bench [--only NAME ...] [--no-correction] [--list] [--export-configs DIR]
    polyxfem mesh-only <cfg | bundled-name> [--out DIR]

Outputs go under ``$POLYXFEM_OUTPUT`` (default ``./polyxfem_out``) unless
``--out`` is given.  Exit codes: 0 success, 1 validation error (or a failed
acceptance gate), 2 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER = 0, 1, 2
OUTPUT_ENV = "POLYXFEM_OUTPUT"

log = logging.getLogger("polyxfem")


def output_root(override=None) -> Path:
    return Path(override or os.environ.get(OUTPUT_ENV) or "polyxfem_out")


def _load(ref: str):
    """Config from a file path, or a bundled benchmark by name."""
    from .benchmarks import bundled, bundled_config
    from .config import load_config

    if Path(ref).exists():
        return load_config(ref)
    if ref in bundled():
        return bundled_config(ref)
    raise FileNotFoundError(f"{ref}: no such config file or bundled benchmark")


def cmd_run(args) -> int:
    from . import runner

    cfg = _load(args.config)
    try:
        model = runner.build_model(cfg)
    except ValueError as exc:  # crack/mesh incompatibility surfaced at build time
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = output_root(args.out) / cfg.name
    res = runner.run(cfg, out, model=model)
    print(f"{cfg.name}: {res.status}, {len(res.steps)} steps, {res.timings['total']:.1f} s -> {out}")
    if res.status != "ok":
        print(f"solver failure: {res.message}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_patch_test(args) -> int:
    from . import output, plotting
    from .mesh import Domain, generate_voronoi_mesh
    from .solver import run_patch_test

    try:
        elems = [int(v) for v in args.elems.split(",") if v.strip()]
    except ValueError:
        print(f"--elems: expected comma-separated integers, got {args.elems!r}", file=sys.stderr)
        return EXIT_VALIDATION
    if not elems or min(elems) < 1:
        print("--elems: need at least one positive element count", file=sys.stderr)
        return EXIT_VALIDATION
    rows = []
    for n in elems:
        m = generate_voronoi_mesh(Domain.rectangle(0, 0, 1, 1), n, args.lloyd_iters, args.seed)
        l2c, h1c = run_patch_test(m, not args.no_correction)
        l2n, h1n = run_patch_test(m, False)
        rows.append([m.n_elements, l2c, l2n, h1c, h1n])
    out = output_root(args.out) / "patch_test"
    out.mkdir(parents=True, exist_ok=True)
    header = ["elements", "L2_with_correction", "L2_without_correction", "H1_with_correction",
              "H1_without_correction"]
    output.write_csv(out / "patch_test.csv", rows, header)
    plotting.plot_patch_table(out / "patch_test.png", rows)
    print(f"{'elements':>9} {'L2 corr':>10} {'L2 no corr':>10} {'H1 corr':>10} {'H1 no corr':>10}")
    for r in rows:
        print(f"{r[0]:9d} {r[1]:10.2e} {r[2]:10.2e} {r[3]:10.2e} {r[4]:10.2e}")
    print(f"-> {out / 'patch_test.csv'}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from . import benchmarks as bm
    from . import output

    if args.list:
        for name in bm.bundled():
            print(name)
        return EXIT_OK
    if args.export_configs:
        bm.export_configs(args.export_configs)
        print(f"configs written to {args.export_configs}")
        return EXIT_OK
    out = output_root(args.out) / "bench"
    groups = {
        "patch": lambda c: [bm.gate_patch(correction=not args.no_correction)],
        "edge_crack_square": lambda c: list(bm.gate_edge_square(out, c)),
        "center_crack": lambda c: [bm.gate_center(out, c)],
        "inclined_crack_hole": lambda c: [bm.gate_inclined(out, c)],
        "edge_crack_rectangle": lambda c: [bm.gate_completes(n, out, c) for n in bm.OTHER[:2]],
        "mechanism_specimen": lambda c: [bm.gate_completes(bm.OTHER[2], out, c)],
    }
    selected = args.only or list(groups)
    unknown = [g for g in selected if g not in groups]
    if unknown:
        print(f"--only: unknown group(s) {unknown}; choose from {list(groups)}", file=sys.stderr)
        return EXIT_VALIDATION
    cache, gates = {}, []
    t0 = time.perf_counter()
    for g in selected:
        for gate in groups[g](cache):
            print(f"{'PASS' if gate.passed else 'FAIL'}  {gate.criterion}: {gate.detail}", flush=True)
            gates.append(gate)
    out.mkdir(parents=True, exist_ok=True)
    output.write_csv(out / "report.csv", [[g.criterion, "pass" if g.passed else "fail", g.seconds, g.detail]
                                          for g in gates], ["criterion", "result", "seconds", "detail"])
    output.write_json(out / "report.json", {"total_s": time.perf_counter() - t0,
                                            "gates": [{"criterion": g.criterion, "passed": g.passed,
                                                       "detail": g.detail, "seconds": g.seconds,
                                                       "metrics": g.metrics} for g in gates]})
    n_pass = sum(g.passed for g in gates)
    print(f"{n_pass}/{len(gates)} gates passed in {time.perf_counter() - t0:.0f} s -> {out / 'report.csv'}")
    if any(r.status != "ok" for r in cache.values()):
        return EXIT_SOLVER
    return EXIT_OK if n_pass == len(gates) else EXIT_VALIDATION


def cmd_mesh_only(args) -> int:
    from . import output, plotting, runner
    from .enrichment import CrackGeometry, classify
    from .mesh import write_mesh

    import numpy as np

    cfg = _load(args.config)
    mesh = runner.build_mesh(cfg)
    out = output_root(args.out) / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    write_mesh(mesh, out / "mesh.txt")
    output.write_mesh_vtk(out / "mesh.vtk", mesh)
    crack = cfg.geometry.get("crack")
    cg = None if crack is None else CrackGeometry(np.array(crack, float))
    summary = {"name": cfg.name, "n_nodes": mesh.n_nodes, "n_elements": mesh.n_elements}
    if cg is not None:
        try:
            em = classify(mesh, cg)
        except ValueError as exc:
            print(f"{args.config}: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        summary.update(n_dofs=em.n_dofs, heaviside_nodes=len(em.heaviside_nodes), tip_nodes=len(em.tip_nodes))
    output.write_json(out / "mesh_summary.json", summary)
    if cfg.outputs.get("figures", True):
        plotting.plot_mesh(out / "mesh.png", mesh, cg, f"{cfg.name}: {mesh.n_elements} elements")
    print(f"{cfg.name}: {mesh.n_elements} elements, {mesh.n_nodes} nodes -> {out}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors; argparse would exit with 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polyxfem", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a configuration")
    r.add_argument("config", help="YAML config path or bundled benchmark name")
    r.add_argument("--out", help=f"output root (default ${OUTPUT_ENV} or ./polyxfem_out)")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("patch-test", help="linear patch test on Voronoi unit-square meshes")
    t.add_argument("--elems", default="10,50,250", help="comma-separated element counts")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--lloyd-iters", type=int, default=50)
    t.add_argument("--no-correction", action="store_true", help="disable the gradient correction")
    t.add_argument("--out")
    t.set_defaults(func=cmd_patch_test)

    b = sub.add_parser("bench", help="run bundled benchmarks and check acceptance gates")
    b.add_argument("--only", nargs="+", help="gate groups to run")
    b.add_argument("--no-correction", action="store_true", help="patch gate without gradient correction")
    b.add_argument("--list", action="store_true", help="list bundled configs")
    b.add_argument("--export-configs", metavar="DIR", help="write bundled configs as YAML and exit")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("mesh-only", help="build and write the mesh of a configuration")
    m.add_argument("config")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mesh_only)
    return p


def main(argv=None) -> int:
    from .config import ConfigError

    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
