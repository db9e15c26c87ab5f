import pytest

from dicfrac.field import MaskRegion, apply_mask
from dicfrac.material import Material
from dicfrac.mesh import CrackDefinition, build_seam_mesh
from dicfrac.synth import SyntheticSpec, generate_williams_field

E_REF = 210e9
NU_REF = 0.3
PITCH = 0.04e-6  # 0.04 um


@pytest.fixture(scope="session")
def steel_plane_strain():
    return Material(model="isotropic", E=E_REF, nu=NU_REF,
                    plane_state="plane strain")


@pytest.fixture(scope="session")
def mixed_mode_spec(steel_plane_strain):
    """The 51x51, 0.04 um pitch validation field: K = (3, 1, 5) MPa*sqrt(m)."""
    return SyntheticSpec(k1=3e6, k2=1e6, k3=5e6, material=steel_plane_strain,
                         nx=51, ny=51, spacing=PITCH, tip=(0.0, 0.0))


@pytest.fixture(scope="session")
def mixed_mode_field(mixed_mode_spec):
    return generate_williams_field(mixed_mode_spec)


def centre_crack(half_mask_cells: float = 2.2) -> CrackDefinition:
    """Straight crack from the left edge to the grid centre, small tip mask."""
    m = half_mask_cells * PITCH
    return CrackDefinition(
        polyline=[(-1.1e-6, 0.0), (0.0, 0.0)], tip=(0.0, 0.0),
        mask=MaskRegion("rect", [(-m, -m), (m, m)]))


@pytest.fixture(scope="session")
def mixed_mode_mesh(mixed_mode_field):
    crack = centre_crack()
    field = apply_mask(mixed_mode_field, crack.mask)
    return build_seam_mesh(field, crack), crack, field
