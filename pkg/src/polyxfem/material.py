"""Hyperelastic constitutive laws in the current configuration.

Every model maps a batch of in-plane deformation gradients ``F`` of shape
``(P, 2, 2)`` to a :class:`StressTangent`.  The spatial tangent ``Ce`` is
stored in Voigt form ``(P, 3, 3)`` with rows/columns ``(xx, yy, xy)`` and is
the exact linearisation of the Cauchy stress for integration over the current
volume ``dv = J dV``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_VOIGT = ((0, 0), (1, 1), (0, 1))


class ElementInversion(RuntimeError):
    """Raised when ``det F <= 0`` at a material point."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


@dataclass
class StressTangent:
    sigma: np.ndarray  # (P, 2, 2) Cauchy stress
    Ce: np.ndarray  # (P, 3, 3) spatial tangent, Voigt
    J_det: np.ndarray  # (P,) volume ratio dv/dV
    W: np.ndarray  # (P,) stored energy per reference volume
    t: np.ndarray | None = None  # (P,) current thickness (plane stress)

    @property
    def kirchhoff(self) -> np.ndarray:
        return self.sigma * self.J_det[:, None, None]

    def first_piola(self, F) -> np.ndarray:
        """``P = J sigma F^{-T}`` for the in-plane block."""
        Finv = np.linalg.inv(F)
        return np.einsum("pij,pkj->pik", self.kirchhoff, Finv)


def lame_from_engineering(E: float, nu: float) -> tuple[float, float]:
    """Lame parameters ``(lam, mu)`` from Young's modulus and Poisson ratio."""
    if E <= 0:
        raise ValueError("Young's modulus must be positive")
    if not -1.0 < nu < 0.5:
        raise ValueError("Poisson ratio must lie in (-1, 0.5) for a compressible model")
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return lam, mu


def engineering_from_lame(lam: float, mu: float) -> tuple[float, float]:
    E = (3.0 * lam + 2.0 * mu) * mu / (lam + mu)
    nu = lam / (2.0 * (lam + mu))
    return E, nu


def _batch(F):
    F = np.asarray(F, dtype=float)
    if F.ndim == 2:
        F = F[None]
    return F


def _det2(A):
    return A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]


def _check_det(detF):
    bad = detF <= 0.0
    if bad.any():
        raise ElementInversion("det F <= 0 at %d point(s)" % int(bad.sum()), np.flatnonzero(bad))


def tensor_to_voigt(C4) -> np.ndarray:
    """Fourth-order ``(P, 2, 2, 2, 2)`` tensor with minor symmetries to Voigt."""
    out = np.empty(C4.shape[:-4] + (3, 3))
    for a, (i, j) in enumerate(_VOIGT):
        for b, (k, l) in enumerate(_VOIGT):
            out[..., a, b] = C4[..., i, j, k, l]
    return out


def push_forward(F, S, CE, J=None):
    """Push a second Piola-Kirchhoff stress and material tangent forward.

    ``sigma = F S F^T / J`` and ``Ce_ijkl = F_im F_jn F_kp F_lq CE_mnpq / J``.
    ``CE`` is a full ``(P, 2, 2, 2, 2)`` tensor; the tangent is returned in
    Voigt form.  ``J`` defaults to ``det F``; plane-stress callers pass the
    through-thickness volume ratio instead.
    """
    F = _batch(F)
    S = np.asarray(S, dtype=float).reshape(F.shape)
    CE = np.asarray(CE, dtype=float).reshape(F.shape[:1] + (2, 2, 2, 2))
    if J is None:
        J = _det2(F)
        _check_det(J)
    J = np.broadcast_to(np.asarray(J, dtype=float), F.shape[:1])
    sigma = np.einsum("pim,pmn,pjn->pij", F, S, F) / J[:, None, None]
    c4 = np.einsum("pim,pjn,pkq,plr,pmnqr->pijkl", F, F, F, F, CE) / J[:, None, None, None, None]
    return sigma, tensor_to_voigt(c4)


def _identity_terms(P):
    """Voigt forms of ``d_ij d_kl`` and ``(d_ik d_jl + d_il d_jk)/2``."""
    ii = np.zeros((3, 3))
    ii[:2, :2] = 1.0
    isym = np.diag([1.0, 1.0, 0.5])
    return np.broadcast_to(ii, (P, 3, 3)), np.broadcast_to(isym, (P, 3, 3))


def _outer_voigt(a, b):
    """Voigt form of ``a_ij b_kl`` for symmetric 2x2 ``a``, ``b``."""
    av = np.stack([a[:, 0, 0], a[:, 1, 1], a[:, 0, 1]], axis=1)
    bv = np.stack([b[:, 0, 0], b[:, 1, 1], b[:, 0, 1]], axis=1)
    return av[:, :, None] * bv[:, None, :]


def _sym_product_voigt(a):
    """Voigt form of ``(a_ik a_jl + a_il a_jk)/2``."""
    out = np.empty(a.shape[:1] + (3, 3))
    for m, (i, j) in enumerate(_VOIGT):
        for n, (k, l) in enumerate(_VOIGT):
            out[:, m, n] = 0.5 * (a[:, i, k] * a[:, j, l] + a[:, i, l] * a[:, j, k])
    return out


@dataclass
class NeoHookeanCompressible:
    """Plane-strain Neo-Hookean solid with logarithmic volumetric term."""

    lam: float
    mu: float
    kind: str = field(default="neo_hookean_compressible", init=False)
    plane: str = field(default="strain", init=False)

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("shear modulus must be positive")

    @classmethod
    def from_engineering(cls, E, nu):
        return cls(*lame_from_engineering(E, nu))

    @property
    def small_strain(self) -> tuple[float, float]:
        return engineering_from_lame(self.lam, self.mu)

    def energy(self, F):
        F = _batch(F)
        J = _det2(F)
        _check_det(J)
        lnJ = np.log(J)
        trC = np.einsum("pij,pij->p", F, F) + 1.0
        return 0.5 * self.lam * lnJ ** 2 - self.mu * lnJ + 0.5 * self.mu * (trC - 3.0)

    def evaluate(self, F) -> StressTangent:
        F = _batch(F)
        P = len(F)
        J = _det2(F)
        _check_det(J)
        lnJ = np.log(J)
        b = np.einsum("pik,pjk->pij", F, F)
        eye = np.eye(2)
        sigma = (self.lam * lnJ[:, None, None] * eye + self.mu * (b - eye)) / J[:, None, None]
        ii, isym = _identity_terms(P)
        Ce = (self.lam * ii + 2.0 * (self.mu - self.lam * lnJ)[:, None, None] * isym) / J[:, None, None]
        W = 0.5 * self.lam * lnJ ** 2 - self.mu * lnJ + 0.5 * self.mu * (np.trace(b, axis1=1, axis2=2) + 1.0 - 3.0)
        return StressTangent(sigma, Ce, J, W)


@dataclass
class MooneyRivlinPS:
    """Incompressible Mooney-Rivlin membrane in plane stress.

    ``W = mu1/2 (I1 - 3) - mu2/2 (I2 - 3)``; the out-of-plane stretch follows
    from incompressibility, ``C33 = 1/det(Cbar)``, and the pressure is
    eliminated through ``S33 = 0``.  With ``mu2 = 0`` this is the
    incompressible Neo-Hookean model.
    """

    mu1: float
    mu2: float = 0.0
    thickness: float = 1.0
    kind: str = field(default="mooney_rivlin_ps", init=False)
    plane: str = field(default="stress", init=False)

    def __post_init__(self):
        if self.mu1 - self.mu2 <= 0:
            raise ValueError("effective shear modulus mu1 - mu2 must be positive")

    @property
    def small_strain(self) -> tuple[float, float]:
        return 3.0 * (self.mu1 - self.mu2), 0.5

    def _invariants(self, F):
        F = _batch(F)
        detF = _det2(F)
        _check_det(detF)
        C = np.einsum("pki,pkj->pij", F, F)
        detC = detF ** 2
        c33 = 1.0 / detC
        trC = C[:, 0, 0] + C[:, 1, 1]
        I1 = trC + c33
        I2 = detC + c33 * trC
        return F, detF, C, detC, c33, trC, I1, I2

    def energy(self, F):
        _, _, _, _, _, _, I1, I2 = self._invariants(F)
        return 0.5 * self.mu1 * (I1 - 3.0) - 0.5 * self.mu2 * (I2 - 3.0)

    def second_piola(self, F):
        """In-plane ``S`` and material tangent ``CE = 2 dS/dCbar`` (full tensor)."""
        F, detF, C, detC, c33, trC, I1, I2 = self._invariants(F)
        mu1, mu2 = self.mu1, self.mu2
        Cinv = np.linalg.inv(C)
        eye = np.broadcast_to(np.eye(2), C.shape)
        coef = c33 * (mu1 - mu2 * trC)  # pressure over c33 ... p * C^-1 term weight
        S = mu1 * eye - mu2 * (I1[:, None, None] * eye - C) - coef[:, None, None] * Cinv
        d = np.eye(2)
        dd = np.einsum("ij,kl->ijkl", d, d)
        isym = 0.5 * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d))
        CiCi = np.einsum("pij,pkl->pijkl", Cinv, Cinv)
        Ci_sym = 0.5 * (np.einsum("pik,pjl->pijkl", Cinv, Cinv) + np.einsum("pil,pjk->pijkl", Cinv, Cinv))
        dCi = np.einsum("ij,pkl->pijkl", d, Cinv)
        Cid = np.einsum("pij,kl->pijkl", Cinv, d)
        dS = (
            -mu2 * dd
            + mu2 * c33[:, None, None, None, None] * dCi
            + mu2 * isym
            + coef[:, None, None, None, None] * (CiCi + Ci_sym)
            + mu2 * c33[:, None, None, None, None] * Cid
        )
        return S, 2.0 * dS

    def evaluate(self, F) -> StressTangent:
        F, detF, C, detC, c33, trC, I1, I2 = self._invariants(F)
        P = len(F)
        mu1, mu2 = self.mu1, self.mu2
        # spatial forms: F Cinv F^T = I, F F^T = b
        b = np.einsum("pik,pjk->pij", F, F)
        eye = np.broadcast_to(np.eye(2), b.shape)
        coef = c33 * (mu1 - mu2 * trC)
        sigma = mu1 * b - mu2 * (I1[:, None, None] * b - np.einsum("pik,pkj->pij", b, b)) - coef[:, None, None] * eye
        ii, isym = _identity_terms(P)
        Ce = 2.0 * (
            -mu2 * _outer_voigt(b, b)
            + mu2 * c33[:, None, None] * (_outer_voigt(b, eye) + _outer_voigt(eye, b))
            + mu2 * _sym_product_voigt(b)
            + coef[:, None, None] * (ii + isym)
        )
        W = 0.5 * mu1 * (I1 - 3.0) - 0.5 * mu2 * (I2 - 3.0)
        t = self.thickness * np.sqrt(c33)
        return StressTangent(sigma, Ce, np.ones(P), W, t)


class NeoHookeanIncompressiblePS(MooneyRivlinPS):
    """Incompressible Neo-Hookean membrane (plane stress, thickness update)."""

    def __init__(self, mu: float, thickness: float = 1.0):
        super().__init__(mu1=mu, mu2=0.0, thickness=thickness)
        self.kind = "neo_hookean_incompressible_ps"

    @property
    def mu(self) -> float:
        return self.mu1

    def evaluate(self, F) -> StressTangent:
        F = _batch(F)
        detF = _det2(F)
        _check_det(detF)
        P = len(F)
        b = np.einsum("pik,pjk->pij", F, F)
        detC = detF ** 2
        c33 = 1.0 / detC
        sigma = self.mu1 * (b - c33[:, None, None] * np.eye(2))
        ii, isym = _identity_terms(P)
        Ce = self.mu1 * c33[:, None, None] * (2.0 * ii + 2.0 * isym)
        W = 0.5 * self.mu1 * (np.trace(b, axis1=1, axis2=2) + c33 - 3.0)
        t = self.thickness * np.sqrt(c33)
        return StressTangent(sigma, Ce, np.ones(P), W, t)

    def __repr__(self):
        return f"NeoHookeanIncompressiblePS(mu={self.mu1!r}, thickness={self.thickness!r})"


@dataclass
class LinearElastic:
    """Small-strain isotropic law with shear and 2D bulk moduli.

    Used by the patch test and geometrically linear runs; ``F`` is read as
    ``I + grad u``.  ``engineering`` keeps the 3D ``(E, nu)`` it was derived
    from so fracture post-processing sees the parent material.
    """

    mu: float
    kappa: float
    plane: str = "strain"
    engineering: tuple | None = None
    kind: str = field(default="linear_elastic", init=False)

    @property
    def small_strain(self) -> tuple[float, float]:
        if self.engineering is not None:
            return self.engineering
        return engineering_from_lame(self.kappa - self.mu, self.mu)

    def D(self) -> np.ndarray:
        lam = self.kappa - self.mu
        return np.array([[lam + 2 * self.mu, lam, 0.0], [lam, lam + 2 * self.mu, 0.0], [0.0, 0.0, self.mu]])

    def evaluate(self, F) -> StressTangent:
        F = _batch(F)
        P = len(F)
        H = F - np.eye(2)
        eps = np.stack([H[:, 0, 0], H[:, 1, 1], H[:, 0, 1] + H[:, 1, 0]], axis=1)
        s = eps @ self.D().T
        sigma = np.empty((P, 2, 2))
        sigma[:, 0, 0], sigma[:, 1, 1] = s[:, 0], s[:, 1]
        sigma[:, 0, 1] = sigma[:, 1, 0] = s[:, 2]
        W = 0.5 * np.einsum("pa,pa->p", eps, s)
        return StressTangent(sigma, np.broadcast_to(self.D(), (P, 3, 3)).copy(), np.ones(P), W)


def linearized(material) -> LinearElastic:
    """Small-strain law with the initial moduli of ``material`` and the same
    plane condition (plane stress uses the reduced Lame constant)."""
    E, nu = material.small_strain
    mu = E / (2.0 * (1.0 + nu))
    if material.plane == "stress":
        lam = E * nu / (1.0 - nu ** 2)
    else:
        lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return LinearElastic(mu, lam + mu, material.plane, (E, nu))


def von_mises(sigma, sigma_zz=None) -> np.ndarray:
    s = np.asarray(sigma)
    sxx, syy, sxy = s[..., 0, 0], s[..., 1, 1], s[..., 0, 1]
    szz = np.zeros_like(sxx) if sigma_zz is None else sigma_zz
    return np.sqrt(0.5 * ((sxx - syy) ** 2 + (syy - szz) ** 2 + (szz - sxx) ** 2) + 3.0 * sxy ** 2)


def make_material(block: dict):
    """Build a material from a config block."""
    kind = block["kind"]
    if kind == "neo_hookean_compressible":
        if "E" in block:
            return NeoHookeanCompressible.from_engineering(float(block["E"]), float(block["nu"]))
        return NeoHookeanCompressible(float(block["lam"]), float(block["mu"]))
    if kind == "neo_hookean_incompressible_ps":
        return NeoHookeanIncompressiblePS(float(block["mu"]), float(block.get("thickness", 1.0)))
    if kind == "mooney_rivlin_ps":
        return MooneyRivlinPS(float(block["mu1"]), float(block["mu2"]), float(block.get("thickness", 1.0)))
    raise ValueError(f"unknown material kind {kind!r}")
