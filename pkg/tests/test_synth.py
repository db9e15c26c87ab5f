import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dicfrac.material import Material
from dicfrac.synth import (
    SyntheticSpec,
    add_noise,
    crack_tip_displacements,
    generate_williams_field,
    polar_about_tip,
)


def spec_with(k1=0.0, k2=0.0, k3=0.0, nx=51, ny=51, crack_angle=0.0,
              nu=0.3, E=210e9):
    mat = Material(model="isotropic", E=E, nu=nu, plane_state="plane strain")
    return SyntheticSpec(k1=k1, k2=k2, k3=k3, material=mat, nx=nx, ny=ny,
                         spacing=0.04e-6, tip=(0.0, 0.0),
                         crack_angle=crack_angle)


def test_mode_one_upper_face_values():
    # at theta = pi the opening column gives Ux = 0, Uy = (K/mu) sqrt(r/2pi) (2-2nu)
    E, nu, k1 = 210e9, 0.3, 3e6
    mu = E / (2 * (1 + nu))
    r = 1e-6
    u1, u2, u3 = crack_tip_displacements(r, np.pi, k1, 0.0, 0.0, E, nu)
    assert u1 == pytest.approx(0.0, abs=1e-22)
    expected = k1 / mu * np.sqrt(r / (2 * np.pi)) * (2 - 2 * nu)
    assert u2 == pytest.approx(expected, rel=1e-12)
    assert u3 == 0.0


def test_tip_node_zero_displacement():
    f = generate_williams_field(spec_with(k1=3e6, k2=1e6, k3=5e6))
    tip_idx = 25 + 25 * 51
    assert np.all(f.u[tip_idx] == 0.0)
    assert f.has_out_of_plane


def test_out_of_plane_flag_follows_k3():
    assert not generate_williams_field(spec_with(k1=1e6)).has_out_of_plane
    assert generate_williams_field(spec_with(k3=1e6)).has_out_of_plane


def test_theta_branch_upper_face():
    xy = np.array([[-1e-6, 0.0], [-1e-6, -1e-12]])
    r, theta, _, _ = polar_about_tip(xy, (0.0, 0.0), 0.0)
    assert theta[0] == pytest.approx(np.pi)       # exactly on the cut: upper
    assert theta[1] < 0                            # just below: lower face


@settings(max_examples=15, deadline=None)
@given(c=st.floats(-4.0, 4.0).filter(lambda v: abs(v) > 1e-3),
       k1=st.floats(0.5e6, 4e6), k2=st.floats(-2e6, 2e6),
       k3=st.floats(-3e6, 3e6))
def test_linearity_in_k(c, k1, k2, k3):
    f1 = generate_williams_field(spec_with(k1=k1, k2=k2, k3=k3, nx=11, ny=11))
    f2 = generate_williams_field(spec_with(k1=c * k1, k2=c * k2, k3=c * k3,
                                           nx=11, ny=11))
    np.testing.assert_allclose(f2.u, c * f1.u, rtol=1e-12, atol=1e-30)


def test_mode_one_reflection_symmetry():
    # the crack-line row itself is double-valued (theta = +pi branch), so the
    # symmetry is asserted on the open half-planes
    f = generate_williams_field(spec_with(k1=3e6, nx=21, ny=21))
    u = f.u.reshape(21, 21, 2)
    upper, lower = u[11:], u[:10][::-1]
    np.testing.assert_allclose(upper[..., 0], lower[..., 0], rtol=1e-10,
                               atol=1e-30)  # Ux even under y -> -y
    np.testing.assert_allclose(upper[..., 1], -lower[..., 1], rtol=1e-10,
                               atol=1e-30)  # Uy odd


def test_mode_three_antisymmetry():
    f = generate_williams_field(spec_with(k3=5e6, nx=21, ny=21))
    uz = f.u[:, 2].reshape(21, 21)
    np.testing.assert_allclose(uz[11:], -uz[:10][::-1], rtol=1e-10, atol=1e-30)


def test_rotated_crack_consistency():
    # generating with the crack at 90 degrees equals rotating the straight one
    s0 = spec_with(k1=3e6, k2=1e6, nx=21, ny=21)
    s90 = spec_with(k1=3e6, k2=1e6, nx=21, ny=21, crack_angle=np.pi / 2)
    f0 = generate_williams_field(s0)
    f90 = generate_williams_field(s90)
    u0 = f0.u.reshape(21, 21, 2)
    u90 = f90.u.reshape(21, 21, 2)
    # physical rotation by +90 deg: node (i,j) -> (-j,i); (ux,uy) -> (-uy,ux)
    for i, j in [(3, 4), (15, 2), (10, 16)]:
        src = u0[j, i]
        dst = u90[i, 20 - j]
        assert dst[0] == pytest.approx(-src[1], rel=1e-10)
        assert dst[1] == pytest.approx(src[0], rel=1e-10)


def test_paper_mu_variant_scales_field():
    nu = 0.3
    f_std = generate_williams_field(spec_with(k1=3e6, nx=11, ny=11))
    f_alt = generate_williams_field(spec_with(k1=3e6, nx=11, ny=11),
                                    paper_mu=True)
    np.testing.assert_allclose(f_alt.u, f_std.u * (1 - nu**2), rtol=1e-12,
                               atol=1e-30)


def test_add_noise_zero_fraction_bitwise():
    f = generate_williams_field(spec_with(k1=3e6, nx=11, ny=11))
    g = add_noise(f, 0.0, seed=3)
    assert np.array_equal(g.u, f.u)


def test_add_noise_deterministic():
    f = generate_williams_field(spec_with(k1=3e6, k3=5e6))
    g1 = add_noise(f, 0.01, seed=42)
    g2 = add_noise(f, 0.01, seed=42)
    assert np.array_equal(g1.u, g2.u)
    g3 = add_noise(f, 0.01, seed=43)
    assert not np.array_equal(g1.u, g3.u)


def test_add_noise_std_matches_target():
    f = generate_williams_field(spec_with(k1=3e6, k2=1e6, k3=5e6))
    frac = 0.01
    g = add_noise(f, frac, seed=0)
    target = frac * f.magnitude().mean()
    noise = g.u - f.u
    for c in range(noise.shape[1]):
        assert noise[:, c].std() == pytest.approx(target, rel=0.05)


def test_add_noise_preserves_mean():
    f = generate_williams_field(spec_with(k1=3e6, k2=1e6, k3=5e6))
    frac = 0.01
    g = add_noise(f, frac, seed=1)
    sigma = frac * f.magnitude().mean()
    sem = 3 * sigma / np.sqrt(f.n_nodes)
    for c in range(f.u.shape[1]):
        assert abs(g.u[:, c].mean() - f.u[:, c].mean()) < sem


def test_add_noise_skips_masked_nodes():
    from dataclasses import replace
    f = generate_williams_field(spec_with(k1=3e6, nx=11, ny=11))
    mask = np.zeros(f.n_nodes, dtype=bool)
    mask[:20] = True
    f = replace(f, mask=mask, u=f.u.copy())
    g = add_noise(f, 0.05, seed=9)
    assert np.array_equal(g.u[:20], f.u[:20])
    assert not np.array_equal(g.u[20:], f.u[20:])


def test_uniform_noise_variant():
    f = generate_williams_field(spec_with(k1=3e6))
    g = add_noise(f, 0.01, seed=5, distribution="uniform")
    noise = g.u - f.u
    target = 0.01 * f.magnitude().mean()
    assert noise[:, 0].std() == pytest.approx(target, rel=0.05)
    assert np.abs(noise).max() <= target * np.sqrt(3.0) * 1.0000001
