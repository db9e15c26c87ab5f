import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dicfrac import errors
from dicfrac.material import (
    Material,
    RambergOsgood,
    effective_constants,
    effective_isotropic_from_cubic,
    isotropic_C,
    j_from_k,
    load_material,
    plane_stiffness,
    secant_modulus,
)


def vrh_oracle(c11, c12, c44):
    """Hand-evaluated Voigt-Reuss-Hill averaging, independent of the module."""
    K = (c11 + 2 * c12) / 3
    gv = (c11 - c12 + 3 * c44) / 5
    gr = 5 * (c11 - c12) * c44 / (4 * c44 + 3 * (c11 - c12))
    G = (gv + gr) / 2
    E = 9 * K * G / (3 * K + G)
    nu = (3 * K - 2 * G) / (2 * (3 * K + G))
    return E, nu, G, gv, gr


def test_cubic_zener_one_reproduces_isotropy():
    # 2*C44 = C11 - C12 -> Zener ratio 1, G_V = G_R
    E, nu = 200e9, 0.25
    C = isotropic_C(E, nu)
    eff = effective_isotropic_from_cubic(C[0, 0], C[0, 1], C[3, 3])
    assert eff.E_eff == pytest.approx(E, rel=1e-12)
    assert eff.nu_eff == pytest.approx(nu, rel=1e-12)
    _, _, _, gv, gr = vrh_oracle(C[0, 0], C[0, 1], C[3, 3])
    assert gv == pytest.approx(gr, rel=1e-12)


def test_cubic_aluminium_vrh():
    c11, c12, c44 = 107e9, 61e9, 28e9
    E_o, nu_o, G_o, _, _ = vrh_oracle(c11, c12, c44)
    eff = effective_isotropic_from_cubic(c11, c12, c44)
    assert eff.E_eff == pytest.approx(E_o, rel=1e-12)
    assert eff.nu_eff == pytest.approx(nu_o, rel=1e-12)
    # coarse published-style check
    assert eff.E_eff == pytest.approx(69.7e9, rel=2e-3)
    assert eff.nu_eff == pytest.approx(0.348, abs=1e-3)


def test_cubic_not_positive_definite():
    with pytest.raises(errors.NotPositiveDefinite):
        effective_isotropic_from_cubic(100e9, 100e9, 30e9)


@settings(max_examples=40, deadline=None)
@given(c11=st.floats(50e9, 500e9), ratio=st.floats(0.05, 0.95),
       c44=st.floats(5e9, 200e9))
def test_vrh_bounds(c11, ratio, c44):
    c12 = c11 * ratio
    _, _, G, gv, gr = vrh_oracle(c11, c12, c44)
    eff = effective_isotropic_from_cubic(c11, c12, c44)
    assert gr <= eff.G_eff * (1 + 1e-12)
    assert eff.G_eff <= gv * (1 + 1e-12)
    # G consistency invariant
    assert eff.G_eff == pytest.approx(
        eff.E_eff / (2 * (1 + eff.nu_eff)), rel=1e-12)


def test_plane_stress_d11():
    m = Material(model="isotropic", E=210e9, nu=0.3, plane_state="plane stress")
    D = plane_stiffness(m)
    assert D[0, 0] == pytest.approx(210e9 / (1 - 0.09), rel=1e-12)
    assert D[0, 0] == pytest.approx(230.769e9, rel=1e-5)


def test_plane_stiffness_nu_zero_decouples():
    m = Material(model="isotropic", E=100e9, nu=0.0, plane_state="plane stress")
    D = plane_stiffness(m)
    assert D[0, 1] == 0.0
    assert D[0, 0] == pytest.approx(100e9, rel=1e-14)


@pytest.mark.parametrize("plane", ["plane stress", "plane strain"])
def test_anisotropic_branch_matches_isotropic(plane):
    E, nu = 73e9, 0.34
    iso = Material(model="isotropic", E=E, nu=nu, plane_state=plane)
    # independent construction of the isotropic stiffness tensor
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[np.diag_indices(3)] += 2 * mu
    C[3, 3] = C[4, 4] = C[5, 5] = mu
    aniso = Material(model="general-anisotropic", C=C, plane_state=plane)
    np.testing.assert_allclose(plane_stiffness(aniso), plane_stiffness(iso),
                               rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(E=st.floats(1e9, 1000e9), nu=st.floats(-0.9, 0.49),
       plane=st.sampled_from(["plane stress", "plane strain"]))
def test_plane_stiffness_positive_definite(E, nu, plane):
    m = Material(model="isotropic", E=E, nu=nu, plane_state=plane)
    eig = np.linalg.eigvalsh(plane_stiffness(m))
    assert eig[0] > 0


def test_secant_modulus_limits():
    ro = RambergOsgood(sigma0=193e6, alpha=0.6, n=8.87)
    E = 70e9
    assert secant_modulus(ro, E, 0.0) == E
    assert secant_modulus(ro, E, 193e6) == pytest.approx(E / 1.6, rel=1e-12)
    ro0 = RambergOsgood(sigma0=193e6, alpha=0.0, n=8.87)
    for s in (0.0, 1e6, 1e9):
        assert secant_modulus(ro0, E, s) == E


@settings(max_examples=30, deadline=None)
@given(s1=st.floats(1e6, 1e9), s2=st.floats(1e6, 1e9))
def test_secant_modulus_decreasing(s1, s2):
    ro = RambergOsgood(sigma0=200e6, alpha=0.5, n=5.0)
    lo, hi = sorted([s1, s2])
    assert secant_modulus(ro, 70e9, hi) <= secant_modulus(ro, 70e9, lo)
    if hi > lo * (1 + 1e-6):  # strict once the correction is representable
        assert secant_modulus(ro, 70e9, hi) < secant_modulus(ro, 70e9, lo)


def _eff(E, nu, plane):
    return effective_constants(
        Material(model="isotropic", E=E, nu=nu, plane_state=plane))


def test_j_from_k_mixed_mode_oracle():
    # hand-evaluated: (9+1)/230769 + 25/161538 MPa*m
    eff = _eff(210e9, 0.3, "plane strain")
    E_star = 210e9 / (1 - 0.09)
    G = 210e9 / 2.6
    expected = (9e12 + 1e12) / E_star + 25e12 / (2 * G)
    assert j_from_k(3e6, 1e6, 5e6, eff) == pytest.approx(expected, rel=1e-14)
    assert j_from_k(3e6, 1e6, 5e6, eff) == pytest.approx(198.1, rel=1e-3)
    assert j_from_k(0, 0, 0, eff) == 0.0
    assert j_from_k(3e6, 0, 0, eff) == pytest.approx(39.0, rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(k1=st.floats(-9e6, 9e6), k2=st.floats(-9e6, 9e6),
       k3=st.floats(-9e6, 9e6))
def test_j_from_k_sign_invariance(k1, k2, k3):
    eff = _eff(70e9, 0.33, "plane strain")
    j = j_from_k(k1, k2, k3, eff)
    assert j_from_k(-k1, k2, k3, eff) == j
    assert j_from_k(k1, -k2, -k3, eff) == j
    assert j >= 0


def test_effective_constants_plane_state():
    e_strain = _eff(210e9, 0.3, "plane strain")
    e_stress = _eff(210e9, 0.3, "plane stress")
    assert e_strain.E_star == pytest.approx(210e9 / 0.91, rel=1e-12)
    assert e_stress.E_star == 210e9


def test_material_file_roundtrip(tmp_path):
    doc = {
        "model": "isotropic", "E": 70e9, "nu": 0.33,
        "plane_state": "plane stress",
        "ramberg_osgood": {"sigma0": 193e6, "alpha": 0.6, "n": 8.87},
    }
    p = tmp_path / "mat.json"
    import json
    p.write_text(json.dumps(doc))
    m = load_material(p)
    assert m.E == 70e9 and m.ro.n == 8.87
    assert m.plane_state == "plane stress"


def test_material_file_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(errors.ConfigError):
        load_material(p)
    p2 = tmp_path / "bad2.json"
    p2.write_text('{"model": "isotropic", "E": -1, "nu": 0.3}')
    with pytest.raises(errors.ConfigError):
        load_material(p2)


def test_general_anisotropic_has_no_sif_constants():
    C = isotropic_C(70e9, 0.3)
    C[0, 1] += 5e9
    C[1, 0] += 5e9
    m = Material(model="general-anisotropic", C=C)
    with pytest.raises(errors.ConfigError):
        effective_constants(m)
