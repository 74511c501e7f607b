import numpy as np
import pytest

from polyxfem import fracture as fr
from polyxfem.enrichment import CrackGeometry
from polyxfem.material import MooneyRivlinPS, NeoHookeanCompressible, NeoHookeanIncompressiblePS, linearized
from polyxfem.mesh import Domain, structured_quad_mesh
from polyxfem.solver import LoadProgram, Model, SolverOptions, Support, newton_solve

NH_PS = NeoHookeanIncompressiblePS(0.4225e6)
MR_PS = MooneyRivlinPS(3.6969e5, -0.5281e5)


@pytest.fixture(scope="module")
def symmetric_edge_crack():
    """Small-strain edge crack pulled by equal and opposite tractions."""
    mat = linearized(NeoHookeanCompressible.from_engineering(50e3, 0.3))
    m = structured_quad_mesh(Domain.rectangle(0, 0, 2, 2), 25, 25)
    model = Model(m, mat, CrackGeometry(np.array([[0.0, 1.0], [1.0, 1.0]])), linear=True)
    loads = [LoadProgram("traction", "top", 500.0, 1), LoadProgram("traction", "bottom", -500.0, 1)]
    st = newton_solve(model, loads, [Support("corner_bl", "both"), Support("corner_br", "y")],
                      SolverOptions(tol=1e-10))
    return model, st.u


def test_lake_and_lindley_at_unit_stretch():
    t = fr.tearing_factors(1.0, "uniaxial", NH_PS, 0.25)
    assert np.isclose(t.k_lake, np.pi)
    assert np.isclose(t.k_lindley, 2.95)
    assert t.W_far == pytest.approx(0.0, abs=1e-9)


def test_lake_and_lindley_at_stretch_two():
    t = fr.tearing_factors(2.0, "uniaxial", NH_PS, 0.25)
    assert np.isclose(t.k_lake, np.pi / np.sqrt(2))
    assert np.isclose(t.k_lindley, (2.95 + 0.08) / np.sqrt(2))
    assert np.isclose(t.G_lindley, 2 * t.k_lindley * t.W_far * 0.25)


def test_far_field_energy_closed_form():
    lam = 1.8
    mu = NH_PS.mu
    assert np.isclose(fr.far_field_energy(NH_PS, lam, "uniaxial"), 0.5 * mu * (lam ** 2 + 2 / lam - 3))
    assert np.isclose(fr.far_field_energy(NH_PS, lam, "equibiaxial"), 0.5 * mu * (2 * lam ** 2 + lam ** -4 - 3))


def test_compressible_uniaxial_far_field_is_traction_free():
    m = NeoHookeanCompressible.from_engineering(50e3, 0.3)
    F = fr.far_field_F(m, 1.3, "uniaxial")
    assert abs(m.evaluate(F[None]).sigma[0, 0, 0]) <= 1e-8 * 50e3


@pytest.mark.parametrize("model", [NH_PS, MR_PS])
def test_yeoh_stress_is_equibiaxial_nominal_stress(model):
    # sigma_y = 1/2 dW/dlambda along the equibiaxial path
    h = 1e-6
    for lam in (1.2, 1.7, 2.4):
        dW = (fr.far_field_energy(model, lam + h, "equibiaxial") - fr.far_field_energy(model, lam - h, "equibiaxial"))
        assert np.isclose(fr.yeoh_stress(model, lam), 0.5 * dW / (2 * h), rtol=1e-6)


def test_yeoh_factor_from_opening():
    t = fr.tearing_factors(1.5, "equibiaxial", NH_PS, 0.25, b=0.1)
    assert np.isclose(t.k_yeoh, fr.yeoh_stress(NH_PS, 1.5) * np.pi * 0.1 / (4 * t.W_far * 0.25))
    assert np.isclose(t.G_yeoh, 2 * t.k_yeoh * t.W_far * 0.25)


def test_stretch_below_one_rejected():
    with pytest.raises(ValueError):
        fr.tearing_factors(0.9, "uniaxial", NH_PS, 0.25)


def test_auxiliary_fields_satisfy_hooke_and_equilibrium():
    mu, nu = 1.0, 0.3
    kap = fr.kolosov(nu, "strain")
    lam = 2 * mu * nu / (1 - 2 * nu)
    rng = np.random.default_rng(0)
    r, th = rng.uniform(0.1, 1.0, 30), rng.uniform(-0.95 * np.pi, 0.95 * np.pi, 30)
    xl = np.column_stack([r * np.cos(th), r * np.sin(th)])
    for mode in ("I", "II"):
        sig, grad = fr.auxiliary_fields(xl, mode, mu, kap)
        eps = 0.5 * (grad + np.transpose(grad, (0, 2, 1)))
        hooke = lam * np.trace(eps, axis1=1, axis2=2)[:, None, None] * np.eye(2) + 2 * mu * eps
        assert np.allclose(sig, hooke, rtol=1e-10, atol=1e-12)
        h = 1e-5
        div = np.zeros((len(xl), 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            div += (fr.auxiliary_fields(xl + e, mode, mu, kap)[0][:, :, j]
                    - fr.auxiliary_fields(xl - e, mode, mu, kap)[0][:, :, j]) / (2 * h)
        assert np.abs(div).max() <= 1e-5 * np.abs(sig).max() / r.min()


def test_mode_one_symmetry_and_energy_release(symmetric_edge_crack):
    model, u = symmetric_edge_crack
    K1, K2 = fr.sif_from_interaction(model, u)
    assert K1 > 0
    assert abs(K2 / K1) <= 0.02
    J = fr.j_integral(model, u)
    E, nu = model.material.small_strain
    assert np.isclose(J, K1 ** 2 * (1 - nu ** 2) / E, rtol=0.05)


def test_zero_load_gives_zero(symmetric_edge_crack):
    model, u = symmetric_edge_crack
    z = np.zeros_like(u)
    assert fr.j_integral(model, z) == 0.0
    assert fr.sif_from_interaction(model, z) == (0.0, 0.0)


def test_j_domain_plateau(symmetric_edge_crack):
    model, _ = symmetric_edge_crack
    dom = fr.j_domain(model, 3.0)
    d = np.linalg.norm(model.mesh.nodes - model.crack.tip, axis=1)
    assert np.all(dom.q[d <= dom.radius / 2] == 1.0)
    assert np.all(dom.q[d >= dom.radius] == 0.0)
    assert np.isclose(dom.h_size, 2 / 25)
    assert not dom.clipped


def test_crack_opening_positive(symmetric_edge_crack):
    model, u = symmetric_edge_crack
    op = fr.crack_opening(model, u, 20)
    assert (op[:, 1] > 0).all()
    # opening closes towards the tip
    assert op[0, 1] > op[-1, 1]
