"""Versioned YAML run configuration with line-anchored validation."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import yaml

CONFIG_VERSION = 1

MATERIAL_KINDS = {
    "neo_hookean_compressible": ({"E", "nu"}, {"lam", "mu"}),
    "neo_hookean_incompressible_ps": ({"mu"},),
    "mooney_rivlin_ps": ({"mu1", "mu2"},),
}


class ConfigError(ValueError):
    """Validation failure; ``errors`` holds ``(line, message)`` pairs."""

    def __init__(self, errors, source="<config>"):
        self.errors = sorted(errors, key=lambda e: (e[0] or 0))
        self.source = source
        super().__init__("\n".join(f"{source}:{ln or '?'}: {msg}" for ln, msg in self.errors))


@dataclass
class RunConfig:
    name: str
    geometry: dict
    mesh: dict
    material: dict
    loads: list
    supports: list
    solver: dict = field(default_factory=dict)
    fracture: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config_version": CONFIG_VERSION,
            "name": self.name,
            "geometry": copy.deepcopy(self.geometry),
            "mesh": copy.deepcopy(self.mesh),
            "material": copy.deepcopy(self.material),
            "loads": copy.deepcopy(self.loads),
            "supports": copy.deepcopy(self.supports),
            "solver": copy.deepcopy(self.solver),
            "fracture": copy.deepcopy(self.fracture),
            "outputs": copy.deepcopy(self.outputs),
        }


SOLVER_DEFAULTS = {"tol": 6e-3, "max_iters": 30, "max_bisections": 4, "bisection": True, "gradient_correction": True,
                   "order_std": 3, "order_enr": 7, "kinematics": "nonlinear"}
OUTPUT_DEFAULTS = {"vtk": True, "vtk_every": 1, "csv": True, "figures": True}


# ------------------------------------------------------------ node helpers


def _line(node) -> int | None:
    return node.start_mark.line + 1 if node is not None else None


def _mapping(node) -> dict:
    """Key -> (key node, value node) for a YAML mapping node."""
    return {k.value: (k, v) for k, v in node.value}


class _Checker:
    def __init__(self):
        self.errors = []

    def err(self, node, msg):
        self.errors.append((_line(node), msg))

    def mapping(self, node, where, required=(), optional=()):
        if not isinstance(node, yaml.MappingNode):
            self.err(node, f"{where}: expected a mapping")
            return None
        m = _mapping(node)
        for k in required:
            if k not in m:
                self.err(node, f"{where}: missing key '{k}'")
        allowed = set(required) | set(optional)
        for k, (kn, _) in m.items():
            if k not in allowed:
                self.err(kn, f"{where}: unknown key '{k}'")
        return m

    def number(self, m, key, where, positive=False, integer=False, optional=False):
        if key not in m:
            return
        _, v = m[key]
        val = yaml.safe_load(yaml.serialize(v)) if isinstance(v, yaml.ScalarNode) else None
        ok = isinstance(val, (int, float)) and not isinstance(val, bool)
        if integer:
            ok = isinstance(val, int) and not isinstance(val, bool)
        if not ok or not np.isfinite(val):
            self.err(v, f"{where}.{key}: expected a finite {'integer' if integer else 'number'}")
        elif positive and val <= 0:
            self.err(v, f"{where}.{key}: must be > 0")

    def points(self, node, where, min_len=1):
        if not isinstance(node, yaml.SequenceNode) or len(node.value) < min_len:
            self.err(node, f"{where}: expected a list of at least {min_len} [x, y] pairs")
            return
        for p in node.value:
            if not isinstance(p, yaml.SequenceNode) or len(p.value) != 2:
                self.err(p, f"{where}: each entry must be [x, y]")


def _validate(root) -> list:
    c = _Checker()
    top = c.mapping(root, "config", ("config_version", "name", "geometry", "mesh", "material", "loads", "supports"),
                    ("solver", "fracture", "outputs"))
    if top is None:
        return c.errors
    if "config_version" in top:
        v = top["config_version"][1]
        if getattr(v, "value", None) != str(CONFIG_VERSION):
            c.err(v, f"config_version: unsupported version {getattr(v, 'value', v)!r} (expected {CONFIG_VERSION})")
    if "geometry" in top:
        g = c.mapping(top["geometry"][1], "geometry", ("domain",), ("holes", "crack"))
        if g:
            d = g.get("domain")
            if d:
                dm = c.mapping(d[1], "geometry.domain", (), ("x0", "y0", "x1", "y1", "polygon"))
                if dm is not None:
                    if "polygon" in dm:
                        c.points(dm["polygon"][1], "geometry.domain.polygon", 3)
                    else:
                        for k in ("x0", "y0", "x1", "y1"):
                            if k not in dm:
                                c.err(d[1], f"geometry.domain: missing key '{k}'")
                            c.number(dm, k, "geometry.domain")
                        vals = {k: yaml.safe_load(yaml.serialize(dm[k][1])) for k in ("x0", "y0", "x1", "y1")
                                if k in dm and isinstance(dm[k][1], yaml.ScalarNode)}
                        if len(vals) == 4 and all(isinstance(x, (int, float)) for x in vals.values()):
                            if not (vals["x1"] > vals["x0"] and vals["y1"] > vals["y0"]):
                                c.err(d[1], "geometry.domain: zero or negative area")
            if "holes" in g:
                hn = g["holes"][1]
                if not isinstance(hn, yaml.SequenceNode):
                    c.err(hn, "geometry.holes: expected a list of [cx, cy, r]")
                else:
                    for h in hn.value:
                        if not isinstance(h, yaml.SequenceNode) or len(h.value) != 3:
                            c.err(h, "geometry.holes: each hole must be [cx, cy, r]")
            if "crack" in g:
                c.points(g["crack"][1], "geometry.crack", 2)
    if "mesh" in top:
        m = c.mapping(top["mesh"][1], "mesh", ("kind",),
                      ("n_seeds", "lloyd_iters", "rng_seed", "refinement", "nx", "ny", "file"))
        if m:
            kind = m.get("kind", (None, None))[1]
            kv = getattr(kind, "value", None)
            if kv not in ("voronoi", "quad", "file"):
                c.err(kind, f"mesh.kind: expected 'voronoi', 'quad' or 'file', got {kv!r}")
            if kv == "voronoi":
                if "n_seeds" not in m:
                    c.err(top["mesh"][1], "mesh: voronoi meshes need 'n_seeds'")
                c.number(m, "n_seeds", "mesh", positive=True, integer=True)
                c.number(m, "lloyd_iters", "mesh", integer=True)
                c.number(m, "rng_seed", "mesh", integer=True)
                if "refinement" in m:
                    r = c.mapping(m["refinement"][1], "mesh.refinement", ("region", "cell_size"))
                    if r:
                        c.number(r, "cell_size", "mesh.refinement", positive=True)
                        rn = r.get("region", (None, None))[1]
                        if rn is not None and (not isinstance(rn, yaml.SequenceNode) or len(rn.value) != 4):
                            c.err(rn, "mesh.refinement.region: expected [x0, y0, x1, y1]")
            if kv == "quad":
                for k in ("nx", "ny"):
                    if k not in m:
                        c.err(top["mesh"][1], f"mesh: quad meshes need '{k}'")
                    c.number(m, k, "mesh", positive=True, integer=True)
    if "material" in top:
        mn = top["material"][1]
        mm = c.mapping(mn, "material", ("kind",), ("E", "nu", "lam", "mu", "mu1", "mu2", "thickness"))
        if mm and "kind" in mm:
            kind = mm["kind"][1].value
            if kind not in MATERIAL_KINDS:
                c.err(mm["kind"][1], f"material.kind: unknown kind {kind!r}")
            else:
                present = set(mm) - {"kind", "thickness"}
                if not any(opt <= present for opt in MATERIAL_KINDS[kind]):
                    need = " or ".join("/".join(sorted(o)) for o in MATERIAL_KINDS[kind])
                    c.err(mn, f"material: kind {kind!r} needs {need}")
                for k in present:
                    c.number(mm, k, "material")
                for k in ("E", "mu", "thickness"):
                    c.number(mm, k, "material", positive=True)
                if "nu" in mm and isinstance(mm["nu"][1], yaml.ScalarNode):
                    nu = yaml.safe_load(mm["nu"][1].value)
                    if isinstance(nu, (int, float)) and not -1 < nu < 0.5:
                        c.err(mm["nu"][1], "material.nu: must lie in (-1, 0.5) for a compressible model")
    for key, req, opt in (("loads", ("kind", "boundary_set", "increment", "n_steps"), ("component",)),
                          ("supports", ("boundary_set",), ("components",))):
        if key not in top:
            continue
        seq = top[key][1]
        if not isinstance(seq, yaml.SequenceNode) or not seq.value:
            c.err(seq, f"{key}: expected a non-empty list")
            continue
        for i, item in enumerate(seq.value):
            im = c.mapping(item, f"{key}[{i}]", req, opt)
            if not im:
                continue
            if key == "loads":
                kv = im.get("kind", (None, None))[1]
                if kv is not None and kv.value not in ("traction", "displacement"):
                    c.err(kv, f"loads[{i}].kind: expected 'traction' or 'displacement'")
                c.number(im, "increment", f"loads[{i}]")
                c.number(im, "n_steps", f"loads[{i}]", positive=True, integer=True)
                cv = im.get("component", (None, None))[1]
                if cv is not None and cv.value not in ("x", "y"):
                    c.err(cv, f"loads[{i}].component: expected 'x' or 'y'")
            else:
                cv = im.get("components", (None, None))[1]
                if cv is not None and cv.value not in ("x", "y", "both"):
                    c.err(cv, f"supports[{i}].components: expected 'x', 'y' or 'both'")
    if "solver" in top:
        s = c.mapping(top["solver"][1], "solver", (), tuple(SOLVER_DEFAULTS))
        if s:
            c.number(s, "tol", "solver", positive=True)
            for k in ("max_iters", "order_std", "order_enr"):
                c.number(s, k, "solver", positive=True, integer=True)
            c.number(s, "max_bisections", "solver", integer=True)
            if "kinematics" in s and s["kinematics"][1].value not in ("linear", "nonlinear"):
                c.err(s["kinematics"][1], "solver.kinematics: expected 'linear' or 'nonlinear'")
    if "fracture" in top:
        f = c.mapping(top["fracture"][1], "fracture", (), ("j_radius_factors", "sif", "tearing"))
        if f and "tearing" in f:
            t = c.mapping(f["tearing"][1], "fracture.tearing", ("mode", "half_length"), ("stretch_set",))
            if t and "mode" in t and t["mode"][1].value not in ("uniaxial", "equibiaxial"):
                c.err(t["mode"][1], "fracture.tearing.mode: expected 'uniaxial' or 'equibiaxial'")
    if "outputs" in top:
        c.mapping(top["outputs"][1], "outputs", (), tuple(OUTPUT_DEFAULTS))
    return c.errors


def _semantic(cfg: RunConfig, root) -> list:
    """Cross-field checks anchored at the block they concern."""
    errors = []
    top = _mapping(root)
    n_steps = {int(ld["n_steps"]) for ld in cfg.loads}
    if len(n_steps) > 1:
        errors.append((_line(top["loads"][1]), "loads: all load programs must share n_steps"))
    names = {"bottom", "right", "top", "left", "corner_bl", "corner_br", "corner_tr", "corner_tl"}
    dom = cfg.geometry["domain"]
    if "polygon" in dom:
        names = {f"side{i}" for i in range(len(dom["polygon"]))}
    names |= {f"hole{k}" for k in range(len(cfg.geometry.get("holes", [])))}
    for key in ("loads", "supports"):
        for i, item in enumerate(cfg.__dict__[key]):
            if item["boundary_set"] not in names:
                node = _mapping(top[key][1].value[i])["boundary_set"][1]
                errors.append((_line(node), f"{key}[{i}].boundary_set: unknown set {item['boundary_set']!r}"))
    ref = cfg.mesh.get("refinement")
    crack = cfg.geometry.get("crack")
    if ref and crack:
        from .mesh import Domain, RefinementSpec, check_crack_in_zone, refinement_box

        try:
            domain = domain_from_config(cfg.geometry)
            spec = RefinementSpec(tuple(ref["region"]), float(ref["cell_size"]))
            zone, _, _ = refinement_box(spec, domain)
            check_crack_in_zone(np.array(crack, dtype=float), zone, spec.cell_size, domain)
        except ValueError as exc:
            node = _mapping(top["geometry"][1])["crack"][1]
            errors.append((_line(node), f"geometry.crack: {exc}"))
    return errors


def domain_from_config(geometry: dict):
    from .mesh import Domain

    d = geometry["domain"]
    holes = [tuple(map(float, h)) for h in geometry.get("holes", [])]
    if "polygon" in d:
        return Domain(np.array(d["polygon"], dtype=float), holes)
    return Domain.rectangle(float(d["x0"]), float(d["y0"]), float(d["x1"]), float(d["y1"]), holes)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate; raises :class:`ConfigError` with line numbers."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError([(mark.line + 1 if mark else None, f"YAML syntax error: {getattr(exc, 'problem', exc)}")],
                          source) from exc
    if root is None:
        raise ConfigError([(1, "empty configuration")], source)
    errors = _validate(root)
    if errors:
        raise ConfigError(errors, source)
    data = yaml.safe_load(text)
    cfg = RunConfig(
        name=str(data["name"]),
        geometry=data["geometry"],
        mesh=data["mesh"],
        material=data["material"],
        loads=data["loads"],
        supports=data["supports"],
        solver={**SOLVER_DEFAULTS, **(data.get("solver") or {})},
        fracture=data.get("fracture") or {},
        outputs={**OUTPUT_DEFAULTS, **(data.get("outputs") or {})},
    )
    errors = _semantic(cfg, root)
    if errors:
        raise ConfigError(errors, source)
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)
