"""J-integral, stress intensity factors and tearing-energy factors.

The J-integral uses the energy-momentum domain form on the undeformed
configuration,

    J = int_A (P_ij du_i/dX_k t_k - W t_j) dq/dX_j dA,

with first Piola-Kirchhoff stress ``P``, stored energy ``W`` per reference
volume, tip tangent ``t`` and a nodal plateau weight ``q``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .enrichment import element_functions_at
from .solver import Model


@dataclass
class JDomain:
    radius: float
    elements: np.ndarray  # elements with q > 0 somewhere
    active: np.ndarray  # elements where q varies (non-zero integrand)
    q: np.ndarray  # (n_nodes,) nodal weights
    h_size: float
    clipped: bool = False


def tip_cell_size(model: Model) -> float:
    """Local element size at the tip: square root of the tip element area."""
    em = model.emap
    if len(em.tip_elements) == 0:
        raise ValueError("model has no crack tip")
    return float(np.sqrt(model.mesh.areas()[em.tip_elements].mean()))


def j_domain(model: Model, factor: float = 3.0, h_size: float | None = None) -> JDomain:
    """Plateau weight: ``q = 1`` within ``r/2``, ``0`` beyond ``r = factor*h``."""
    h = tip_cell_size(model) if h_size is None else h_size
    r = factor * h
    d = np.linalg.norm(model.mesh.nodes - model.crack.tip, axis=1)
    q = np.clip((r - d) / (0.5 * r), 0.0, 1.0)
    elems, active = [], []
    for e, ring in enumerate(model.mesh.elements):
        qe = q[ring]
        if qe.max() > 0:
            elems.append(e)
            if qe.max() - qe.min() > 0:
                active.append(e)
    # clipped when the outer circle leaves the body anywhere but along the crack
    bnodes = np.unique(np.array(model.mesh.boundary_edges()).ravel())
    clipped = bool((d[bnodes] < r).any())
    if clipped:
        warnings.warn("J domain is clipped by the external boundary; result uses a reduced domain")
    dom = JDomain(r, np.array(elems), np.array(active), q, h, clipped)
    if not set(model.emap.tip_elements.tolist()) <= set(elems):
        raise ValueError("J domain does not contain the tip element")
    return dom


def _element_fields(model: Model, e, u):
    d = model.data[e]
    ue = u[d.dofs].reshape(-1, 2)
    F = np.eye(2) + np.einsum("mi,qmj->qij", ue, d.dphi)
    st = model.material.evaluate(F)
    return d, F, st


def j_integral(model: Model, u, domain: JDomain | None = None) -> float:
    dom = domain or j_domain(model)
    t = model.crack.tangent
    J = 0.0
    for e in dom.active:
        d, F, st = _element_fields(model, e, u)
        P = st.first_piola(F)
        gq = np.einsum("qaj,a->qj", d.dN, dom.q[model.mesh.elements[e]])
        du1 = np.einsum("qik,k->qi", F - np.eye(2), t)
        integrand = np.einsum("qij,qi,qj->q", P, du1, gq) - st.W * (gq @ t)
        J += float(d.weights @ integrand)
    return J


# ------------------------------------------------------------ interaction


def kolosov(nu: float, plane: str) -> float:
    return 3.0 - 4.0 * nu if plane == "strain" else (3.0 - nu) / (1.0 + nu)


def _williams_theta(th, mode):
    """Angular parts of the displacement (per sqrt(r/2pi)/2mu) and stress."""
    c, s = np.cos(0.5 * th), np.sin(0.5 * th)
    c3, s3 = np.cos(1.5 * th), np.sin(1.5 * th)
    if mode == "I":
        sig = np.stack([c * (1 - s * s3), c * (1 + s * s3), c * s * c3])
    else:
        sig = np.stack([-s * (2 + c * c3), s * c * c3, c * (1 - s * s3)])
    return sig


def _williams_u(th, mode, kap):
    c, s = np.cos(0.5 * th), np.sin(0.5 * th)
    if mode == "I":
        return np.stack([c * (kap - 1 + 2 * s * s), s * (kap + 1 - 2 * c * c)])
    return np.stack([s * (kap + 1 + 2 * c * c), -c * (kap - 1 - 2 * s * s)])


def auxiliary_fields(xl, mode, mu, kap):
    """Williams near-tip fields for unit ``K`` in tip-local coordinates.

    Returns stress ``(P, 2, 2)`` and displacement gradient ``(P, 2, 2)``
    (``du_i/dx_j``) at local points ``xl``.
    """
    r = np.hypot(xl[:, 0], xl[:, 1])
    th = np.arctan2(xl[:, 1], xl[:, 0])
    a = 1.0 / np.sqrt(2.0 * np.pi * r)
    sv = _williams_theta(th, mode) * a
    sig = np.empty((len(r), 2, 2))
    sig[:, 0, 0], sig[:, 1, 1] = sv[0], sv[1]
    sig[:, 0, 1] = sig[:, 1, 0] = sv[2]
    # u = sqrt(r) f(theta) / (2 mu sqrt(2 pi)); f' by complex step (exact for analytic f)
    hcs = 1e-30
    f = _williams_u(th, mode, kap)
    fp = _williams_u(th + 1j * hcs, mode, kap).imag / hcs
    k = 1.0 / (2.0 * mu * np.sqrt(2.0 * np.pi))
    du_dr = k * f / (2.0 * np.sqrt(r))
    du_dth = k * np.sqrt(r) * fp
    ct, st = np.cos(th), np.sin(th)
    grad = np.empty((len(r), 2, 2))
    grad[:, :, 0] = (du_dr * ct - du_dth * st / r).T
    grad[:, :, 1] = (du_dr * st + du_dth * ct / r).T
    return sig, grad


def effective_modulus(material) -> tuple[float, float, str]:
    E, nu = material.small_strain
    plane = getattr(material, "plane", "strain")
    Ep = E / (1.0 - nu ** 2) if plane == "strain" else E
    return Ep, nu, plane


def sif_from_interaction(model: Model, u, domain: JDomain | None = None) -> tuple[float, float]:
    """Mode I and II stress intensity factors from the interaction integral."""
    dom = domain or j_domain(model)
    Ep, nu, plane = effective_modulus(model.material)
    E, _ = model.material.small_strain
    mu = E / (2.0 * (1.0 + nu))
    kap = kolosov(nu, plane)
    Rm = model.crack.tip_frame
    I = {"I": 0.0, "II": 0.0}
    for e in dom.active:
        d, F, st = _element_fields(model, e, u)
        P = st.first_piola(F)
        gq = np.einsum("qaj,a->qj", d.dN, dom.q[model.mesh.elements[e]]) @ Rm.T
        Pl = Rm @ P @ Rm.T
        Hl = Rm @ (F - np.eye(2)) @ Rm.T
        xl = (d.points - model.crack.tip) @ Rm.T
        for mode in I:
            sa, ga = auxiliary_fields(xl, mode, mu, kap)
            eps = 0.5 * (Hl + np.transpose(Hl, (0, 2, 1)))
            Wint = np.einsum("qij,qij->q", sa, eps)
            integrand = (np.einsum("qij,qi,qj->q", Pl, ga[:, :, 0], gq) + np.einsum("qij,qi,qj->q", sa, Hl[:, :, 0], gq)
                         - Wint * gq[:, 0])
            I[mode] += float(d.weights @ integrand)
    return 0.5 * Ep * I["I"], 0.5 * Ep * I["II"]


# -------------------------------------------------------------- opening


def crack_faces(model: Model, u, n_samples: int = 200):
    """Displacements of both crack faces at points along the crack.

    Returns ``(s, points, u_plus, u_minus, normals)`` where ``s`` is the
    arclength from the crack mouth, ``u_plus`` the displacement on the side
    the normal points to and ``u_minus`` on the other side.
    """
    crack = model.crack
    v = crack.vertices
    seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
    s_all = np.concatenate([[0.0], np.cumsum(seg)])
    s = (np.arange(n_samples) + 0.5) / n_samples * s_all[-1]
    mesh = model.mesh
    from shapely import STRtree
    from shapely.geometry import Point, Polygon

    polys = [Polygon(mesh.ring(e)) for e in range(mesh.n_elements)]
    tree = STRtree(polys)
    pts = np.zeros((n_samples, 2))
    normals = np.zeros((n_samples, 2))
    up = np.zeros((n_samples, 2))
    um = np.zeros((n_samples, 2))
    for k, sk in enumerate(s):
        i = min(np.searchsorted(s_all, sk, side="right") - 1, len(seg) - 1)
        p = v[i] + (sk - s_all[i]) / seg[i] * (v[i + 1] - v[i])
        n = np.array([-(v[i + 1] - v[i])[1], (v[i + 1] - v[i])[0]]) / seg[i]
        hits = [int(e) for e in tree.query(Point(p)) if polys[int(e)].covers(Point(p))]
        if not hits:
            raise ValueError("crack sample point outside the mesh")
        e = hits[0]
        ue = u[model.data[e].dofs].reshape(-1, 2)
        # evaluate just off the line so the tip branch also sees the face
        off = 1e-9 * np.sqrt(abs(mesh.areas()[e]))
        for side, dst in ((1.0, up), (-1.0, um)):
            _, _, phi, _ = element_functions_at(mesh, model.emap, crack, e, (p + side * off * n)[None],
                                                side=np.array([side]), values_only=True)
            dst[k] = (phi @ ue)[0]
        pts[k], normals[k] = p, n
    return s, pts, up, um, normals


def crack_opening(model: Model, u, n_samples: int = 200) -> np.ndarray:
    """Normal opening ``[[u]] . n`` at sample points along the crack faces.

    Returns ``(n_samples, 2)``: arclength from the crack mouth and opening.
    """
    s, _, up, um, n = crack_faces(model, u, n_samples)
    return np.column_stack([s, np.einsum("ki,ki->k", up - um, n)])


# -------------------------------------------------------------- tearing


@dataclass
class TearingFactors:
    stretch: float
    k_lake: float
    k_lindley: float
    k_yeoh: float | None
    W_far: float
    G_lake: float
    G_lindley: float
    G_yeoh: float | None


def far_field_F(material, stretch: float, mode: str) -> np.ndarray:
    """In-plane deformation gradient of the crack-free body.

    ``mode='uniaxial'`` stretches along y with traction-free lateral faces;
    ``'equibiaxial'`` stretches both in-plane directions equally.
    """
    if mode == "equibiaxial":
        return np.diag([stretch, stretch])
    if mode != "uniaxial":
        raise ValueError(f"unknown loading mode {mode!r}")
    if getattr(material, "plane", "strain") == "stress":
        return np.diag([stretch ** -0.5, stretch])  # isotropic incompressible membrane
    sxx = lambda a: material.evaluate(np.diag([a, stretch])[None]).sigma[0, 0, 0]
    if stretch == 1.0:
        return np.eye(2)
    lo, hi = (0.2, 1.0) if stretch > 1 else (1.0, 5.0)
    return np.diag([brentq(sxx, lo, hi, xtol=1e-14), stretch])


def far_field_energy(material, stretch: float, mode: str) -> float:
    F = far_field_F(material, stretch, mode)
    return float(material.evaluate(F[None]).W[0])


def yeoh_stress(material, stretch: float) -> float:
    """``sigma_y = 2 (l - l^-5)(dW/dI1 + l^2 dW/dI2)`` for the incompressible models."""
    mu1 = getattr(material, "mu1", None)
    if mu1 is None:
        raise ValueError("Yeoh factor requires an incompressible invariant-based model")
    W1, W2 = 0.5 * material.mu1, -0.5 * material.mu2
    return 2.0 * (stretch - stretch ** -5) * (W1 + stretch ** 2 * W2)


def tearing_factors(stretch: float, mode: str, material, c: float, b: float | None = None) -> TearingFactors:
    """Empirical tearing-energy factors and ``G = 2 k W c`` at a stretch."""
    if stretch < 1.0:
        raise ValueError("tearing factors need stretch >= 1")
    k_lake = np.pi / np.sqrt(stretch)
    k_lindley = (2.95 - 0.08 * (1.0 - stretch)) / np.sqrt(stretch)
    W = far_field_energy(material, stretch, mode)
    k_yeoh = G_yeoh = None
    if b is not None and W > 0:
        k_yeoh = yeoh_stress(material, stretch) * np.pi * b / (4.0 * W * c)
        G_yeoh = 2.0 * k_yeoh * W * c
    return TearingFactors(stretch, float(k_lake), float(k_lindley), k_yeoh, W, 2 * k_lake * W * c,
                          2 * k_lindley * W * c, G_yeoh)
