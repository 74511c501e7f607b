"""VTK legacy POLYDATA and CSV writers."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .enrichment import element_functions_at
from .material import von_mises


def sigma_zz(material, st) -> np.ndarray:
    """Out-of-plane Cauchy stress: zero in plane stress, ``lam ln J / J`` in
    plane strain for the logarithmic Neo-Hookean model."""
    if getattr(material, "plane", "stress") == "strain" and hasattr(material, "lam"):
        return material.lam * np.log(st.J_det) / st.J_det
    return np.zeros_like(st.J_det)


def element_fields(model, u) -> dict:
    """Area-weighted element averages of Cauchy stress and von Mises stress."""
    ne = model.mesh.n_elements
    out = {k: np.zeros(ne) for k in ("sigma_xx", "sigma_yy", "sigma_xy", "von_mises")}
    for d, F, st in model.point_results(u):
        w = d.weights / d.weights.sum()
        s = st.sigma
        out["sigma_xx"][d.elem] = w @ s[:, 0, 0]
        out["sigma_yy"][d.elem] = w @ s[:, 1, 1]
        out["sigma_xy"][d.elem] = w @ s[:, 0, 1]
        out["von_mises"][d.elem] = w @ von_mises(s, sigma_zz(model.material, st))
    return out


def deformed_polygons(model, u):
    """Deformed polygons; cut elements are drawn as separate sub-polygons so
    the crack opening is visible.  Returns ``(points, rings, parent, disp)``."""
    mesh, em = model.mesh, model.emap
    xn = model.current_nodes(u)
    un = model.nodal_displacement(u)
    pts, disp, rings, parent = [xn], [un], [], []
    n = len(xn)
    for e, ring in enumerate(mesh.elements):
        if em.split[e]:
            ue = u[model.data[e].dofs].reshape(-1, 2)
            for sub, H in em.sub_polygons[e]:
                _, _, phi, _ = element_functions_at(mesh, em, model.crack, e, sub, side=np.full(len(sub), H),
                                                    values_only=True)
                du = phi @ ue
                pts.append(sub + du)
                disp.append(du)
                rings.append(np.arange(n, n + len(sub)))
                parent.append(e)
                n += len(sub)
        else:
            rings.append(np.asarray(ring))
            parent.append(e)
    return np.vstack(pts), rings, np.array(parent), np.vstack(disp)


def write_vtk(path, points, rings, cell_data=None, point_data=None, title="polyxfem"):
    """Legacy ASCII ``POLYDATA`` with ``POLYGONS`` cells."""
    points = np.asarray(points, dtype=float)
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET POLYDATA",
             f"POINTS {len(points)} double"]
    lines += [f"{x:.10g} {y:.10g} 0" for x, y in points]
    size = sum(len(r) + 1 for r in rings)
    lines.append(f"POLYGONS {len(rings)} {size}")
    lines += [" ".join([str(len(r))] + [str(int(i)) for i in r]) for r in rings]
    if cell_data:
        lines.append(f"CELL_DATA {len(rings)}")
        for name, vals in cell_data.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{v:.10g}" for v in np.asarray(vals, dtype=float)]
    if point_data:
        lines.append(f"POINT_DATA {len(points)}")
        for name, vals in point_data.items():
            vals = np.asarray(vals, dtype=float)
            if vals.ndim == 2:
                lines.append(f"VECTORS {name} double")
                lines += [f"{a:.10g} {b:.10g} 0" for a, b in vals]
            else:
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [f"{v:.10g}" for v in vals]
    Path(path).write_text("\n".join(lines) + "\n")


def write_state_vtk(path, model, u, step=0):
    pts, rings, parent, disp = deformed_polygons(model, u)
    fields = element_fields(model, u)
    cell = {k: v[parent] for k, v in fields.items()}
    cell["element"] = parent.astype(float)
    write_vtk(path, pts, rings, cell, {"displacement": disp}, title=f"polyxfem step {step}")


def write_mesh_vtk(path, mesh):
    write_vtk(path, mesh.nodes, mesh.elements, {"n_vertices": [len(r) for r in mesh.elements]}, title="polyxfem mesh")


def write_csv(path, rows: list, header: list):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return v


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)
