"""Bundled benchmark configurations and their acceptance gates.

Refinement zones are laid out so that crack lines and tips fall in the
middle of grid cells: for a zone anchored at ``x = 0`` and a tip at ``x = a``
the cell size is ``a / (j + 1/2)``, and the zone spans an odd number of cells
centred on the crack line.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, dump_config, parse_config

MU_41 = 0.4225e6


def _zone(tip_x, crack_y, j, k, extra=3.0):
    h = tip_x / (j + 0.5)
    return {"region": [0.0, crack_y - (k + 0.5) * h, tip_x + extra * h, crack_y + (k + 0.5) * h], "cell_size": h}


def _base(name, domain, crack, mesh, material, loads, supports, fracture=None, holes=None, solver=None):
    geom = {"domain": domain}
    if holes:
        geom["holes"] = holes
    if crack is not None:
        geom["crack"] = crack
    return {"config_version": 1, "name": name, "geometry": geom, "mesh": mesh, "material": material, "loads": loads,
            "supports": supports, "solver": solver or {}, "fracture": fracture or {},
            "outputs": {"vtk": True, "vtk_every": 10}}


def _edge_crack_square(name, mesh):
    return _base(name, {"x0": 0.0, "y0": 0.0, "x1": 2.0, "y1": 2.0}, [[0.0, 1.0], [1.0, 1.0]], mesh,
                 {"kind": "neo_hookean_incompressible_ps", "mu": MU_41, "thickness": 1.0},
                 [{"kind": "traction", "boundary_set": "top", "increment": 5000.0, "n_steps": 40, "component": "y"}],
                 [{"boundary_set": "bottom", "components": "y"}, {"boundary_set": "corner_bl", "components": "x"}],
                 {"j_radius_factors": [3.0, 2.0, 5.0]})


def _poly(n_seeds, zone):
    return {"kind": "voronoi", "n_seeds": n_seeds, "lloyd_iters": 100, "rng_seed": 0, "refinement": zone}


def _center(name, mode, material):
    d = 0.05  # stretch increment per step
    loads = [{"kind": "displacement", "boundary_set": "top", "increment": 6.0 * d, "n_steps": 30, "component": "y"}]
    if mode == "equibiaxial":
        loads.append({"kind": "displacement", "boundary_set": "right", "increment": 3.0 * d, "n_steps": 30,
                      "component": "x"})
    # half model: x = 0 is the symmetry line through the crack centre
    return _base(name, {"x0": 0.0, "y0": 0.0, "x1": 3.0, "y1": 6.0}, [[0.0, 3.0], [0.25, 3.0]],
                 _poly(420, _zone(0.25, 3.0, 6, 4, extra=4.0)), material, loads,
                 [{"boundary_set": "bottom", "components": "y"}, {"boundary_set": "left", "components": "x"}],
                 {"j_radius_factors": [3.0], "tearing": {"mode": mode, "half_length": 0.25, "stretch_set": "top"}})


NH_42 = {"kind": "neo_hookean_incompressible_ps", "mu": MU_41, "thickness": 1.0}
MR_42 = {"kind": "mooney_rivlin_ps", "mu1": 3.6969e5, "mu2": -0.5281e5, "thickness": 1.0}
STEEL_LIKE = {"kind": "neo_hookean_compressible", "E": 50e3, "nu": 0.3}

_INCL_ANGLE = np.radians(30.0)
_INCL_CRACK = [[0.0, 2.8], [float(np.cos(_INCL_ANGLE)), float(2.8 + np.sin(_INCL_ANGLE))]]


def _inclined(name, mesh):
    return _base(name, {"x0": 0.0, "y0": 0.0, "x1": 4.0, "y1": 6.0}, _INCL_CRACK, mesh, STEEL_LIKE,
                 [{"kind": "traction", "boundary_set": "top", "increment": 50.0, "n_steps": 16, "component": "x"}],
                 [{"boundary_set": "bottom", "components": "both"}], {"j_radius_factors": [3.0], "sif": True},
                 holes=[[2.8, 4.2, 0.5]])


def _inclined_zone(h=0.08):
    tip = _INCL_CRACK[1]
    return {"region": [0.0, 2.8 - 4 * h, tip[0] + 4 * h, tip[1] + 4 * h], "cell_size": h}


def _edge_rect(name, kinematics):
    z = _zone(1.0, 3.0, 9, 2)
    return _base(name, {"x0": 0.0, "y0": 0.0, "x1": 2.0, "y1": 6.0}, [[0.0, 3.0], [1.0, 3.0]], _poly(534, z),
                 {"kind": "neo_hookean_compressible", "E": 50e3, "nu": 0.45},
                 [{"kind": "displacement", "boundary_set": "top", "increment": 0.0498, "n_steps": 20,
                   "component": "y"}],
                 [{"boundary_set": "bottom", "components": "y"}, {"boundary_set": "corner_bl", "components": "x"}],
                 {"j_radius_factors": [3.0]}, solver={"kinematics": kinematics})


def _mechanism():
    z = _zone(3.0, 3.0, 29, 2)
    return _base("mechanism_specimen", {"x0": 0.0, "y0": 0.0, "x1": 7.0, "y1": 6.0}, [[0.0, 3.0], [3.0, 3.0]],
                 _poly(667, z), STEEL_LIKE,
                 [{"kind": "traction", "boundary_set": "hole1", "increment": 50.0, "n_steps": 10, "component": "y"}],
                 [{"boundary_set": "hole0", "components": "both"}], {"j_radius_factors": [3.0], "sif": True},
                 holes=[[1.5, 1.5, 0.6], [1.5, 4.5, 0.6]])


def bundled() -> dict:
    """Name -> config dict for every bundled benchmark."""
    cfgs = [
        _edge_crack_square("edge_crack_square_q4", {"kind": "quad", "nx": 49, "ny": 49}),
        _edge_crack_square("edge_crack_square_poly603", _poly(555, _zone(1.0, 1.0, 9, 2))),
        _edge_crack_square("edge_crack_square_poly697", _poly(576, _zone(1.0, 1.0, 14, 3))),
        _edge_crack_square("edge_crack_square_poly859", _poly(678, _zone(1.0, 1.0, 19, 3))),
        _center("center_crack_uniaxial_nh", "uniaxial", NH_42),
        _center("center_crack_equibiaxial_nh", "equibiaxial", NH_42),
        _center("center_crack_uniaxial_mr", "uniaxial", MR_42),
        _center("center_crack_equibiaxial_mr", "equibiaxial", MR_42),
        _edge_rect("edge_crack_rectangle_nonlinear", "nonlinear"),
        _edge_rect("edge_crack_rectangle_linear", "linear"),
        _inclined("inclined_crack_hole_quad", {"kind": "quad", "nx": 39, "ny": 59}),
        _inclined("inclined_crack_hole_poly", _poly(690, _inclined_zone())),
        _mechanism(),
    ]
    return {c["name"]: c for c in cfgs}


def bundled_config(name: str) -> RunConfig:
    cfgs = bundled()
    if name not in cfgs:
        raise KeyError(f"unknown benchmark {name!r}; available: {', '.join(cfgs)}")
    import yaml

    return parse_config(yaml.safe_dump(cfgs[name], sort_keys=False), f"<bundled:{name}>")


def export_configs(directory):
    """Write every bundled config as YAML into ``directory``."""
    from pathlib import Path

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in bundled():
        (d / f"{name}.yaml").write_text(dump_config(bundled_config(name)))


# ------------------------------------------------------------------ gates


@dataclass
class Gate:
    criterion: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0


def _run(name, outdir=None, cache=None):
    from . import runner

    if cache is not None and name in cache:
        return cache[name]
    cfg = bundled_config(name)
    res = runner.run(cfg, None if outdir is None else f"{outdir}/{name}", write=outdir is not None)
    if cache is not None:
        cache[name] = res
    return res


def gate_patch(elems=(10, 50, 250), rng_seed=0, correction=True) -> Gate:
    """Criterion 1.  ``correction=False`` runs the corrected column without the
    gradient correction, which must make the gate fail."""
    from .mesh import Domain, generate_voronoi_mesh
    from .solver import run_patch_test

    t0 = time.perf_counter()
    rows = []
    for n in elems:
        m = generate_voronoi_mesh(Domain.rectangle(0, 0, 1, 1), n, 50, rng_seed)
        l2c, h1c = run_patch_test(m, correction)
        l2n, h1n = run_patch_test(m, False)
        rows.append((m.n_elements, l2c, l2n, h1c, h1n))
    ok_c = all(r[1] <= 1e-12 and r[3] <= 1e-11 for r in rows)
    ok_n = all(1e-5 <= r[2] <= 1e-3 for r in rows)
    dt = time.perf_counter() - t0
    passed = ok_c and ok_n and dt < 10
    detail = "; ".join(f"n={r[0]}: L2 {r[1]:.1e}/{r[2]:.1e}, H1 {r[3]:.1e}/{r[4]:.1e}" for r in rows)
    return Gate("1 patch test", passed, detail + f"; {dt:.1f}s", {"rows": rows}, dt)


EDGE_SQUARE = ("edge_crack_square_q4", "edge_crack_square_poly603", "edge_crack_square_poly697",
               "edge_crack_square_poly859")


def gate_edge_square(outdir=None, cache=None) -> tuple[Gate, Gate]:
    t0 = time.perf_counter()
    res = {n: _run(n, outdir, cache) for n in EDGE_SQUARE}
    dt = time.perf_counter() - t0
    ok_run = all(r.status == "ok" and len(r.steps) == 40 for r in res.values())
    Jq = np.array([s["J"] for s in res[EDGE_SQUARE[0]].steps])
    gaps = {}
    for n in EDGE_SQUARE[1:]:
        Jp = np.array([s["J"] for s in res[n].steps])
        gaps[n] = np.abs(Jp[: len(Jq)] - Jq[: len(Jp)]) / np.abs(Jq[: len(Jp)]) if len(Jp) else np.array([np.inf])
    ok_fine = all(gaps[n].max() <= 0.05 for n in EDGE_SQUARE[2:])
    ok_coarse = gaps[EDGE_SQUARE[1]].max() > 0.10
    counts = {n: r.model.mesh.n_elements for n, r in res.items()}
    detail = (f"converged={ok_run}; elements {counts}; max gap vs Q4: "
              + ", ".join(f"{n.rsplit('_', 1)[1]} {gaps[n].max():.3f}" for n in EDGE_SQUARE[1:])
              + f"; finer meshes within 5%={ok_fine}; coarsest beyond 10%={ok_coarse}; {dt:.0f}s")
    g6 = Gate("6 edge crack J mesh gaps", ok_run and ok_fine and ok_coarse and dt < 600, detail,
              {"gaps": {k: v.tolist() for k, v in gaps.items()}, "counts": counts}, dt)
    # domain independence on every final state
    spreads = {}
    for n, r in res.items():
        last = r.steps[-1]
        Js = np.array([last["J_r2h"], last["J_r3h"], last["J_r5h"]])
        spreads[n] = float((Js.max() - Js.min()) / abs(Js).mean())
    g9 = Gate("9 J domain independence", all(v <= 0.05 for v in spreads.values()),
              "radii 2h/3h/5h spread: " + ", ".join(f"{k.rsplit('_', 1)[1]} {v:.4f}" for k, v in spreads.items()),
              {"spreads": spreads})
    return g6, g9


def _deviation_gate(steps, ref_key, last=10, final_tol=0.15):
    J = np.array([s["J"] for s in steps])
    G = np.array([s[ref_key] for s in steps], dtype=float)
    dev = np.abs(J - G) / G
    tail = dev[-last:]
    return bool(np.all(np.diff(tail) < 0) and tail[-1] <= final_tol), dev


CENTER = ("center_crack_uniaxial_nh", "center_crack_equibiaxial_nh", "center_crack_uniaxial_mr",
          "center_crack_equibiaxial_mr")


def gate_center(outdir=None, cache=None) -> Gate:
    t0 = time.perf_counter()
    res = {n: _run(n, outdir, cache) for n in CENTER}
    dt = time.perf_counter() - t0
    ok_run = all(r.status == "ok" for r in res.values())
    ok_u, dev_u = _deviation_gate(res[CENTER[0]].steps, "G_lindley")
    ok_e, dev_e = _deviation_gate(res[CENTER[1]].steps, "G_yeoh")
    sep = {}
    for nh, mr in ((CENTER[0], CENTER[2]), (CENTER[1], CENTER[3])):
        a, b = res[nh].steps[-1]["J"], res[mr].steps[-1]["J"]
        sep[nh.split("_")[2]] = abs(b - a) / abs(a)
    ok_sep = all(v >= 0.05 for v in sep.values())
    detail = (f"Lindley dev last10 {dev_u[-10]:.4f}->{dev_u[-1]:.4f} (monotone={ok_u}); "
              f"Yeoh dev last10 {dev_e[-10]:.4f}->{dev_e[-1]:.4f} (monotone={ok_e}); "
              f"MR/NH separation {', '.join(f'{k} {v:.3f}' for k, v in sep.items())}; {dt:.0f}s")
    return Gate("7 center crack tearing energy", ok_run and ok_u and ok_e and ok_sep and dt < 900, detail,
                {"dev_uniaxial": dev_u.tolist(), "dev_equibiaxial": dev_e.tolist(), "separation": sep}, dt)


def gate_inclined(outdir=None, cache=None) -> Gate:
    t0 = time.perf_counter()
    q = _run("inclined_crack_hole_quad", outdir, cache)
    p = _run("inclined_crack_hole_poly", outdir, cache)
    dt = time.perf_counter() - t0
    ok_run = q.status == "ok" and p.status == "ok" and len(q.steps) == len(p.steps) == 16
    K1q = np.array([s["K_I"] for s in q.steps])
    K1p = np.array([s["K_I"] for s in p.steps])
    K2q = np.array([s["K_II"] for s in q.steps])
    K2p = np.array([s["K_II"] for s in p.steps])
    mono = bool(np.all(np.diff(K1p) > 0) and np.all(np.diff(K1q) > 0))
    g1 = float(np.max(np.abs(K1p - K1q) / np.abs(K1q)))
    g2 = float(np.max(np.abs(K2p - K2q) / np.abs(K2q)))
    detail = (f"elements poly {p.model.mesh.n_elements} / quad {q.model.mesh.n_elements}; K_I monotone={mono}; "
              f"max K_I gap {g1:.4f}; max K_II gap {g2:.4f}; {dt:.0f}s")
    return Gate("8 inclined crack SIFs", ok_run and mono and g1 <= 0.05 and g2 <= 0.15 and dt < 900, detail,
                {"K_I_gap": g1, "K_II_gap": g2}, dt)


OTHER = ("edge_crack_rectangle_nonlinear", "edge_crack_rectangle_linear", "mechanism_specimen")


def gate_completes(name, outdir=None, cache=None) -> Gate:
    t0 = time.perf_counter()
    r = _run(name, outdir, cache)
    dt = time.perf_counter() - t0
    n = int(bundled()[name]["loads"][0]["n_steps"])
    ok = r.status == "ok" and len(r.steps) == n and all(s.get("J", 0) >= 0 for s in r.steps)
    return Gate(f"run {name}", ok, f"{len(r.steps)}/{n} steps, final J {r.steps[-1].get('J', float('nan')):.4g}; "
                f"{dt:.0f}s" if r.steps else r.message, {}, dt)
