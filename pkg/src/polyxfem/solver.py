"""Assembly, load stepping and Newton-Raphson iteration.

Quadrature lives in the undeformed configuration.  For every point the
deformation gradient is ``F = I + sum_a u_a (x) grad_X phi_a``; spatial
gradients follow from ``grad_x phi = F^{-T} grad_X phi`` and the current
volume element is ``dv = J T dA``.  Integrating ``B^T sigma`` and
``B^T c B + G^T M G`` over ``dv`` is the updated-Lagrangian form evaluated by
pull-back, which keeps the enrichment fixed at ``X``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import basis
from .enrichment import CrackGeometry, build_element_data, classify
from .material import ElementInversion, LinearElastic, lame_from_engineering
from .mesh import PolyMesh

log = logging.getLogger(__name__)

_COMP = {"x": (0,), "y": (1,), "xy": (0, 1), "both": (0, 1)}


class SolverFailure(RuntimeError):
    """Newton iteration failed after all load-step bisections."""


@dataclass
class LoadProgram:
    kind: str  # 'traction' | 'displacement'
    boundary_set: str
    increment: float  # traction [Pa] or displacement [mm] per step
    n_steps: int
    component: str = "y"

    def __post_init__(self):
        if self.kind not in ("traction", "displacement"):
            raise ValueError(f"unknown load kind {self.kind!r}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not np.isfinite(self.increment):
            raise ValueError("load increment must be finite")
        if self.component not in ("x", "y"):
            raise ValueError("load component must be 'x' or 'y'")


@dataclass
class Support:
    boundary_set: str
    components: str = "both"  # 'x', 'y' or 'both'


@dataclass
class SolverOptions:
    tol: float = 6e-3
    max_iters: int = 30
    max_bisections: int = 4
    bisection: bool = True
    diverge_count: int = 3


@dataclass
class SolverState:
    u: np.ndarray
    x_current: np.ndarray
    step: int = 0
    load_factor: float = 0.0
    residual_norm: float = 0.0
    history: list = field(default_factory=list)  # per-step dicts
    log: list = field(default_factory=list)  # per-iteration dicts


@dataclass
class _Group:
    elems: np.ndarray
    dofs: np.ndarray  # (E, 2m)
    w: np.ndarray  # (E, Q)
    D: np.ndarray  # (E, Q, m, 2)
    rows: np.ndarray
    cols: np.ndarray


class Model:
    """Discretized problem: mesh, crack enrichment, material and quadrature."""

    def __init__(self, mesh: PolyMesh, material, crack: CrackGeometry | None = None, correction: bool = True,
                 order_std: int = 3, order_enr: int = 7, linear: bool = False):
        if getattr(material, "kind", "") == "linear_elastic" and not linear:
            raise ValueError("the small-strain law needs linear kinematics (linear=True)")
        self.mesh = mesh
        self.material = material
        self.crack = crack
        self.linear = linear
        self.thickness = float(getattr(material, "thickness", 1.0))
        self.emap = classify(mesh, crack)
        self.data = build_element_data(mesh, self.emap, crack, correction, order_std, order_enr)
        self.n_dofs = self.emap.n_dofs
        self._groups = self._make_groups()

    def _make_groups(self):
        keys = {}
        for d in self.data:
            keys.setdefault((d.phi.shape[1], len(d.weights)), []).append(d)
        groups = []
        for (m, _), items in sorted(keys.items()):
            dofs = np.stack([d.dofs for d in items])
            n = 2 * m
            rows = np.repeat(dofs, n, axis=1).ravel()
            cols = np.tile(dofs, (1, n)).ravel()
            groups.append(_Group(np.array([d.elem for d in items]), dofs, np.stack([d.weights for d in items]),
                                 np.stack([d.dphi for d in items]), rows, cols))
        return groups

    # ------------------------------------------------------------ kinematics

    def deformation_gradients(self, u):
        """Per element, ``F`` at every quadrature point: list aligned with ``data``."""
        out = []
        for d in self.data:
            ue = u[d.dofs].reshape(-1, 2)
            out.append(np.eye(2) + np.einsum("mi,qmj->qij", ue, d.dphi))
        return out

    def nodal_displacement(self, u) -> np.ndarray:
        return u[: 2 * self.mesh.n_nodes].reshape(-1, 2)

    def current_nodes(self, u) -> np.ndarray:
        # shifted enrichment vanishes at nodes
        return self.mesh.nodes + self.nodal_displacement(u)

    # -------------------------------------------------------------- assembly

    def _group_state(self, g: _Group, u):
        E, Q, m, _ = g.D.shape
        ue = u[g.dofs].reshape(E, m, 2)
        F = np.eye(2) + np.einsum("emi,eqmj->eqij", ue, g.D)
        Ff = F.reshape(-1, 2, 2)
        if not self.linear:
            det = Ff[:, 0, 0] * Ff[:, 1, 1] - Ff[:, 0, 1] * Ff[:, 1, 0]
            if (det <= 0).any():
                bad = np.unique(g.elems[np.flatnonzero((det <= 0).reshape(E, Q).any(1))])
                raise ElementInversion(f"det F <= 0 in elements {bad.tolist()}", bad)
        st = self.material.evaluate(Ff)
        sigma = st.sigma.reshape(E, Q, 2, 2)
        if self.linear:
            gs = g.D
            dv = g.w * self.thickness
        else:
            Finv = np.linalg.inv(F)
            gs = np.einsum("eqmb,eqbc->eqmc", g.D, Finv)
            dv = g.w * st.J_det.reshape(E, Q) * self.thickness
        return st, sigma, gs, dv

    def assemble(self, u, tangent: bool = True):
        """Internal force vector and (optionally) the tangent ``K_mat + K_geo``."""
        fint = np.zeros(self.n_dofs)
        data, rows, cols = [], [], []
        for g in self._groups:
            E, Q, m, _ = g.D.shape
            st, sigma, gs, dv = self._group_state(g, u)
            fe = np.einsum("eq,eqij,eqmj->emi", dv, sigma, gs).reshape(E, 2 * m)
            fint += np.bincount(g.dofs.ravel(), weights=fe.ravel(), minlength=self.n_dofs)
            if not tangent:
                continue
            B = np.zeros((E, Q, 3, 2 * m))
            B[..., 0, 0::2] = gs[..., 0]
            B[..., 1, 1::2] = gs[..., 1]
            B[..., 2, 0::2] = gs[..., 1]
            B[..., 2, 1::2] = gs[..., 0]
            CB = st.Ce.reshape(E, Q, 3, 3) @ B
            Bw = (B * dv[..., None, None]).reshape(E, Q * 3, 2 * m)
            Ke = np.transpose(Bw, (0, 2, 1)) @ CB.reshape(E, Q * 3, 2 * m)
            if not self.linear:
                gsig = (gs @ sigma) * dv[..., None, None]  # (E, Q, m, 2)
                S = np.transpose(gsig, (0, 2, 1, 3)).reshape(E, m, 2 * Q) @ np.transpose(gs, (0, 1, 3, 2)).reshape(
                    E, 2 * Q, m)
                Ke[:, 0::2, 0::2] += S
                Ke[:, 1::2, 1::2] += S
            data.append(Ke.ravel())
            rows.append(g.rows)
            cols.append(g.cols)
        if not tangent:
            return fint, None
        K = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.n_dofs, self.n_dofs)).tocsr()
        return fint, K

    def assemble_internal(self, u) -> np.ndarray:
        return self.assemble(u, tangent=False)[0]

    def assemble_tangent(self, u):
        return self.assemble(u, tangent=True)[1]

    def point_results(self, u):
        """Per element: quadrature points, Cauchy stress, energy and ``F``."""
        out = []
        Fs = self.deformation_gradients(u)
        for d, F in zip(self.data, Fs):
            st = self.material.evaluate(F)
            out.append((d, F, st))
        return out

    # ------------------------------------------------------------- boundary

    def set_nodes(self, name) -> np.ndarray:
        if name not in self.mesh.boundary_sets:
            raise KeyError(f"unknown boundary set {name!r}")
        return self.mesh.node_set(name)

    def constrained_dofs(self, supports, loads):
        """Boolean mask of Dirichlet DOFs and prescribed-displacement templates."""
        fixed = np.zeros(self.n_dofs, dtype=bool)
        em = self.emap
        for s in supports:
            for nd in self.set_nodes(s.boundary_set):
                for c in _COMP[s.components]:
                    fixed[em.std_dof[nd] + c] = True
                    for extra in (em.heav_dof[nd], em.tip_dof[nd]):
                        if extra >= 0:
                            fixed[extra + c] = True
        presc = np.zeros(self.n_dofs)
        for ld in loads:
            if ld.kind != "displacement":
                continue
            c = _COMP[ld.component][0]
            for nd in self.set_nodes(ld.boundary_set):
                fixed[em.std_dof[nd] + c] = True
                presc[em.std_dof[nd] + c] = ld.increment
                for extra in (em.heav_dof[nd], em.tip_dof[nd]):
                    if extra >= 0:
                        fixed[extra + c] = True
        return fixed, presc

    def check_traction_edges(self, loads):
        em = self.emap
        for ld in loads:
            if ld.kind != "traction":
                continue
            if ld.boundary_set not in self.mesh.boundary_sets:
                raise KeyError(f"unknown boundary set {ld.boundary_set!r}")
            nodes = self.set_nodes(ld.boundary_set)
            if ((em.heav_dof[nodes] >= 0) | (em.tip_dof[nodes] >= 0)).any():
                raise ValueError(f"traction edge set {ld.boundary_set!r} touches enriched nodes")

    def assemble_external(self, loads, load_factor: float, u=None) -> np.ndarray:
        """Consistent nodal loads from edge tractions on the geometry of ``u``.

        Traction values are per unit current edge length; the edge trace of
        the mean value functions is linear, so each edge splits its load
        equally between its end nodes.
        """
        fext = np.zeros(self.n_dofs)
        x = self.mesh.nodes if u is None else self.current_nodes(u)
        for ld in loads:
            if ld.kind != "traction":
                continue
            c = _COMP[ld.component][0]
            t = ld.increment * load_factor
            for a, b in self.mesh.edge_set(ld.boundary_set):
                L = np.linalg.norm(x[b] - x[a])
                fext[self.emap.std_dof[a] + c] += 0.5 * t * L
                fext[self.emap.std_dof[b] + c] += 0.5 * t * L
        return fext

    def new_state(self) -> SolverState:
        u = np.zeros(self.n_dofs)
        return SolverState(u, self.mesh.nodes.copy())


# ------------------------------------------------------------------ Newton


def _solve_increment(model: Model, u0, lf, loads, fixed, presc, opts: SolverOptions, state: SolverState, step):
    """Newton iterations for load factor ``lf`` starting from ``u0``."""
    u = u0.copy()
    u[fixed] = presc[fixed] * lf
    free = ~fixed
    fext = model.assemble_external(loads, lf, u0)
    ref = np.linalg.norm(fext[free])
    prev = np.inf
    growth = 0
    for it in range(1, opts.max_iters + 1):
        fint, K = model.assemble(u)
        R = fint - fext
        rn = np.linalg.norm(R[free])
        scale = ref if ref > 0 else max(np.linalg.norm(R[fixed]), 1e-300)
        entry = {"step": step, "load_factor": lf, "iter": it, "residual": rn, "relative": rn / scale}
        if rn <= opts.tol * scale and it > 1:
            entry["du"] = 0.0
            state.log.append(entry)
            log.info("step %d it %d |R| %.3e (converged)", step, it, rn)
            return u, rn, it
        growth = growth + 1 if rn > prev else 0
        if growth >= opts.diverge_count:
            state.log.append(entry)
            raise SolverFailure(f"residual grew for {growth} consecutive iterations")
        prev = rn
        Kff = K[free][:, free].tocsc()
        try:
            du = spla.spsolve(Kff, -R[free], permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SolverFailure(f"singular tangent: {exc}") from exc
        if not np.all(np.isfinite(du)):
            raise SolverFailure("singular tangent (non-finite update); check supports")
        u[free] += du
        entry["du"] = float(np.linalg.norm(du))
        state.log.append(entry)
        log.info("step %d it %d |R| %.3e |du| %.3e", step, it, rn, entry["du"])
    raise SolverFailure(f"no convergence in {opts.max_iters} iterations")


def newton_solve(model: Model, loads, supports, opts: SolverOptions | None = None, callback=None) -> SolverState:
    """Incremental-iterative solution of the full load program.

    ``callback(step, state)`` is invoked after every converged step.
    """
    opts = opts or SolverOptions()
    loads = list(loads)
    n_steps = {ld.n_steps for ld in loads}
    if len(n_steps) != 1:
        raise ValueError("all load programs must share the same number of steps")
    n_steps = n_steps.pop()
    model.check_traction_edges(loads)
    fixed, presc = model.constrained_dofs(supports, loads)
    state = model.new_state()
    for step in range(1, n_steps + 1):
        lf_start, lf_end = float(step - 1), float(step)
        lf = lf_start
        dlf = lf_end - lf_start
        depth = 0
        iters = 0
        while lf < lf_end - 1e-12:
            target = min(lf + dlf, lf_end)
            try:
                u, rn, it = _solve_increment(model, state.u, target, loads, fixed, presc, opts, state, step)
            except (SolverFailure, ElementInversion, np.linalg.LinAlgError) as exc:
                if not opts.bisection or depth >= opts.max_bisections:
                    state.step = step
                    raise SolverFailure(f"step {step}: {exc}") from exc
                depth += 1
                dlf *= 0.5
                log.warning("step %d: %s; bisecting (level %d)", step, exc, depth)
                continue
            state.u = u
            lf = target
            iters += it
            state.residual_norm = rn
        state.step = step
        state.load_factor = lf_end
        state.x_current = model.current_nodes(state.u)
        state.history.append({"step": step, "load_factor": lf_end, "iterations": iters, "residual": state.residual_norm,
                              "bisections": depth, "u": state.u.copy()})
        if callback is not None:
            callback(step, state)
    return state


# -------------------------------------------------------------- patch test


def run_patch_test(mesh: PolyMesh, with_correction: bool = True, order: int = 3):
    """Linear patch test with ``u = (2x, -0.5y)`` and ``mu = kappa = 1``.

    Returns relative ``(L2, H1)`` errors of the discrete solution.
    """
    model = Model(mesh, LinearElastic(1.0, 1.0), None, correction=with_correction, order_std=order, linear=True)
    exact = lambda X: np.column_stack([2.0 * X[:, 0], -0.5 * X[:, 1]])
    grad_exact = np.array([[2.0, 0.0], [0.0, -0.5]])
    bnodes = np.unique(np.array(mesh.boundary_edges()).ravel())
    fixed = np.zeros(model.n_dofs, dtype=bool)
    fixed[2 * bnodes] = fixed[2 * bnodes + 1] = True
    u = np.zeros(model.n_dofs)
    u[: 2 * mesh.n_nodes] = exact(mesh.nodes).ravel()
    u_fixed = u.copy()
    u[~fixed] = 0.0
    u[fixed] = u_fixed[fixed]
    free = ~fixed
    if free.any():
        fint, K = model.assemble(u)
        du = spla.spsolve(K[free][:, free].tocsc(), -fint[free])
        if not np.all(np.isfinite(du)):
            raise SolverFailure("singular patch-test stiffness")
        u[free] += du
    e2 = n2 = h2 = hn2 = 0.0
    for d in model.data:
        ue = u[d.dofs].reshape(-1, 2)
        uh = d.phi @ ue
        gh = np.einsum("mi,qmj->qij", ue, d.dphi)
        ex = exact(d.points)
        e2 += (d.weights * ((uh - ex) ** 2).sum(1)).sum()
        n2 += (d.weights * (ex ** 2).sum(1)).sum()
        h2 += (d.weights * ((gh - grad_exact) ** 2).sum((1, 2))).sum()
        hn2 += d.weights.sum() * (grad_exact ** 2).sum()
    return float(np.sqrt(e2 / n2)), float(np.sqrt(h2 / hn2))
