"""Config-driven pipeline: mesh, model, solve, post-process, write artifacts."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fracture, output
from .config import RunConfig, domain_from_config
from .enrichment import CrackGeometry
from .material import linearized, make_material
from .mesh import RefinementSpec, build_refined_mesh, generate_voronoi_mesh, read_mesh, structured_quad_mesh
from .solver import LoadProgram, Model, SolverFailure, SolverOptions, Support, newton_solve

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    name: str
    model: Model
    state: object
    steps: list = field(default_factory=list)  # per-step dicts of derived quantities
    status: str = "ok"
    message: str = ""
    timings: dict = field(default_factory=dict)


def build_mesh(cfg: RunConfig):
    m = cfg.mesh
    domain = domain_from_config(cfg.geometry)
    crack = cfg.geometry.get("crack")
    if m["kind"] == "quad":
        return structured_quad_mesh(domain, int(m["nx"]), int(m["ny"]))
    if m["kind"] == "file":
        return read_mesh(m["file"])
    ref = m.get("refinement")
    n_seeds, iters, seed = int(m["n_seeds"]), int(m.get("lloyd_iters", 100)), int(m.get("rng_seed", 0))
    if ref:
        spec = RefinementSpec(tuple(float(v) for v in ref["region"]), float(ref["cell_size"]))
        return build_refined_mesh(domain, n_seeds, spec, None if crack is None else np.array(crack, float), iters,
                                  seed)
    return generate_voronoi_mesh(domain, n_seeds, iters, seed)


def build_model(cfg: RunConfig, mesh=None) -> Model:
    mesh = build_mesh(cfg) if mesh is None else mesh
    crack = cfg.geometry.get("crack")
    s = cfg.solver
    linear = s.get("kinematics", "nonlinear") == "linear"
    material = make_material(cfg.material)
    if linear:
        material = linearized(material)
    return Model(mesh, material, None if crack is None else CrackGeometry(np.array(crack, float)),
                 correction=bool(s["gradient_correction"]), order_std=int(s["order_std"]),
                 order_enr=int(s["order_enr"]), linear=linear)


def load_programs(cfg: RunConfig):
    loads = [LoadProgram(ld["kind"], ld["boundary_set"], float(ld["increment"]), int(ld["n_steps"]),
                         ld.get("component", "y")) for ld in cfg.loads]
    supports = [Support(s["boundary_set"], s.get("components", "both")) for s in cfg.supports]
    s = cfg.solver
    opts = SolverOptions(float(s["tol"]), int(s["max_iters"]), int(s["max_bisections"]), bool(s["bisection"]))
    return loads, supports, opts


def stretch_at(cfg: RunConfig, step: int) -> float:
    """Nominal stretch of the displacement program on ``stretch_set``."""
    t = cfg.fracture["tearing"]
    name = t.get("stretch_set", "top")
    d = cfg.geometry["domain"]
    for ld in cfg.loads:
        if ld["kind"] == "displacement" and ld["boundary_set"] == name:
            comp = ld.get("component", "y")
            length = float(d["y1"]) - float(d["y0"]) if comp == "y" else float(d["x1"]) - float(d["x0"])
            return 1.0 + step * float(ld["increment"]) / length
    raise ValueError(f"no displacement load on {name!r} to define the stretch")


def evaluate_step(cfg: RunConfig, model: Model, u, step: int) -> dict:
    row = {"step": step}
    if model.crack is None:
        return row
    fr = cfg.fracture
    factors = fr.get("j_radius_factors", [3.0])
    for f in factors:
        row[f"J_r{f:g}h"] = fracture.j_integral(model, u, fracture.j_domain(model, float(f)))
    row["J"] = row[f"J_r{factors[0]:g}h"]
    if fr.get("sif"):
        row["K_I"], row["K_II"] = fracture.sif_from_interaction(model, u)
    if "tearing" in fr:
        t = fr["tearing"]
        lam = stretch_at(cfg, step)
        b = 0.5 * fracture.crack_opening(model, u, 60)[:, 1].max()
        tf = fracture.tearing_factors(lam, t["mode"], model.material, float(t["half_length"]),
                                      b if t["mode"] == "equibiaxial" else None)
        row.update(stretch=lam, k_lake=tf.k_lake, k_lindley=tf.k_lindley, k_yeoh=tf.k_yeoh, W_far=tf.W_far,
                   G_lake=tf.G_lake, G_lindley=tf.G_lindley, G_yeoh=tf.G_yeoh, b=b)
    return row


def run(cfg: RunConfig, outdir=None, model: Model | None = None, write: bool = True) -> RunResult:
    """Execute a configuration.  Solver failures are captured in the result
    (``status='solver_failure'``) after partial artifacts are written."""
    t0 = time.perf_counter()
    model = build_model(cfg) if model is None else model
    t_model = time.perf_counter() - t0
    loads, supports, opts = load_programs(cfg)
    out = Path(outdir) if outdir is not None else None
    if write and out is not None:
        out.mkdir(parents=True, exist_ok=True)
        from .mesh import write_mesh

        write_mesh(model.mesh, out / "mesh.txt")
        if cfg.outputs.get("vtk"):
            output.write_mesh_vtk(out / "mesh.vtk", model.mesh)
            (out / "vtk").mkdir(exist_ok=True)
    steps = []

    def callback(step, state):
        row = evaluate_step(cfg, model, state.u, step)
        h = state.history[-1]
        row.update(load_factor=h["load_factor"], iterations=h["iterations"], residual=h["residual"],
                   bisections=h["bisections"])
        steps.append(row)
        log.info("step %d done: %s", step, {k: v for k, v in row.items() if k.startswith(("J", "K"))})
        if write and out is not None and cfg.outputs.get("vtk"):
            every = int(cfg.outputs.get("vtk_every", 1))
            if step % every == 0 or step == loads[0].n_steps:
                output.write_state_vtk(out / "vtk" / f"step_{step:04d}.vtk", model, state.u, step)

    result = RunResult(cfg.name, model, None, steps)
    try:
        result.state = newton_solve(model, loads, supports, opts, callback)
    except SolverFailure as exc:
        result.status, result.message = "solver_failure", str(exc)
        log.error("%s: %s", cfg.name, exc)
    result.timings = {"model": t_model, "total": time.perf_counter() - t0}
    if write and out is not None:
        write_artifacts(cfg, result, out)
    return result


def write_artifacts(cfg: RunConfig, result: RunResult, out: Path):
    steps = result.steps
    model = result.model
    if steps and cfg.outputs.get("csv"):
        keys = list(dict.fromkeys(k for r in steps for k in r))
        output.write_csv(out / "steps.csv", [[r.get(k, "") for k in keys] for r in steps], keys)
        if "J" in steps[0]:
            output.write_csv(out / "j_integral.csv", [[r["step"], r["load_factor"], r["J"]] for r in steps],
                             ["step", "load_factor", "J"])
        if "K_I" in steps[0]:
            output.write_csv(out / "sif.csv", [[r["step"], r["K_I"], r["K_II"]] for r in steps],
                             ["step", "K_I", "K_II"])
        if "stretch" in steps[0]:
            output.write_csv(out / "tearing.csv", [[r["stretch"], r["k_lake"], r["k_lindley"], r["k_yeoh"], r["J"]]
                                                   for r in steps],
                             ["stretch", "k_lake", "k_lindley", "k_yeoh", "J_numerical"])
    st = result.state
    if st is not None and model.crack is not None and steps:
        s, p, up, um, _ = fracture.crack_faces(model, st.u, 100)
        xp, xm = p + up, p + um
        output.write_csv(out / "crack_faces.csv", np.column_stack([s, xp, xm]).tolist(),
                         ["s", "x_upper", "y_upper", "x_lower", "y_lower"])
    if st is not None:
        output.write_csv(out / "iterations.csv",
                         [[e["step"], e["load_factor"], e["iter"], e["residual"], e["relative"], e.get("du", "")]
                          for e in st.log], ["step", "load_factor", "iteration", "residual", "relative", "du_norm"])
    if cfg.outputs.get("figures"):
        write_figures(cfg, result, out)
    summary = {
        "name": cfg.name,
        "status": result.status,
        "message": result.message,
        "n_nodes": model.mesh.n_nodes,
        "n_elements": model.mesh.n_elements,
        "n_dofs": model.n_dofs,
        "steps_completed": len(steps),
        "steps_requested": int(cfg.loads[0]["n_steps"]),
        "total_iterations": int(sum(r["iterations"] for r in steps)),
        "final_residual": steps[-1]["residual"] if steps else None,
        "final": {k: v for k, v in (steps[-1].items() if steps else []) if isinstance(v, (int, float))},
        "timings_s": result.timings,
    }
    output.write_json(out / "summary.json", summary)


def write_figures(cfg: RunConfig, result: RunResult, out: Path):
    from . import plotting

    model = result.model
    plotting.plot_mesh(out / "mesh.png", model.mesh, model.crack, f"{cfg.name}: {model.mesh.n_elements} elements")
    steps = result.steps
    if not steps:
        return
    u = result.state.u if result.state is not None else None
    if u is not None:
        pts, rings, parent, _ = output.deformed_polygons(model, u)
        vm = output.element_fields(model, u)["von_mises"][parent]
        plotting.plot_field(out / "von_mises.png", pts, rings, vm, title=f"{cfg.name}: deformed, final step")
    if u is not None and model.crack is not None:
        s, p, up, um, _ = fracture.crack_faces(model, u, 100)
        plotting.plot_crack_faces(out / "crack_faces.png", p, p + up, p + um, f"{cfg.name}: deformed crack faces")
    x = [r["step"] for r in steps]
    if "J" in steps[0]:
        curves = {k: [r[k] for r in steps] for k in steps[0] if k.startswith("J_r")}
        plotting.plot_curves(out / "j_integral.png", x, curves, "load step", "J")
    if "K_I" in steps[0]:
        plotting.plot_curves(out / "sif.png", x, {"K_I": [r["K_I"] for r in steps], "K_II": [r["K_II"] for r in steps]},
                             "load step", "K")
    if "stretch" in steps[0]:
        lam = [r["stretch"] for r in steps]
        curves = {"numerical J": [r["J"] for r in steps], "Lake": [r["G_lake"] for r in steps],
                  "Lindley": [r["G_lindley"] for r in steps]}
        if steps[0].get("G_yeoh") is not None:
            curves["Yeoh"] = [r["G_yeoh"] for r in steps]
        plotting.plot_curves(out / "tearing.png", lam, curves, "stretch", "J, G")
