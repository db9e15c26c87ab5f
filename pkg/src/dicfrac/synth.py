"""Analytical mixed-mode crack displacement fields and controlled noise.

The generator evaluates the first-order asymptotic crack-tip solution on a
regular grid. In the tip frame the crack faces lie along the negative x1 axis
(theta = +/- pi); in plane strain, with kappa = 3 - 4 nu:

    ux1 = (KI/mu) sqrt(r/2pi) cos(t/2) (1 - 2nu + sin^2(t/2))
        + (KII/mu) sqrt(r/2pi) sin(t/2) (2 - 2nu + cos^2(t/2))
    ux2 = (KI/mu) sqrt(r/2pi) sin(t/2) (2 - 2nu - cos^2(t/2))
        + (KII/mu) sqrt(r/2pi) cos(t/2) (-1 + 2nu + sin^2(t/2))
    uz  = (KIII/mu) sqrt(r/2pi) 2 sin(t/2)
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .field import DisplacementField
from .material import PLANE_STRAIN


@dataclass(frozen=True)
class SyntheticSpec:
    """Ground truth for a generated crack field.

    K values are in Pa*sqrt(m); the crack extension direction makes
    ``crack_angle`` with the +x axis and the faces run along the opposite ray.
    """

    k1: float
    k2: float
    k3: float
    material: Material
    nx: int
    ny: int
    spacing: float
    tip: tuple = (0.0, 0.0)
    crack_angle: float = 0.0

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid must be at least 3x3 nodes")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    def origin(self) -> tuple:
        """Grid anchored so the tip sits at the lattice centre."""
        return (self.tip[0] - (self.nx - 1) / 2 * self.spacing,
                self.tip[1] - (self.ny - 1) / 2 * self.spacing)


def crack_tip_displacements(r, theta, k1, k2, k3, E, nu, plane_state=PLANE_STRAIN,
                            mu=None):
    """Asymptotic displacements (u1, u2, u3) in the tip frame.

    ``mu`` overrides the shear modulus entering the prefactor (the standard
    E / 2(1+nu) unless given). Plane stress substitutes
    kappa = (3 - nu)/(1 + nu).
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if mu is None:
        mu = E / (2 * (1 + nu))
    if plane_state == PLANE_STRAIN:
        kappa = 3 - 4 * nu
    else:
        kappa = (3 - nu) / (1 + nu)
    amp = np.sqrt(r / (2 * np.pi)) / (2 * mu)
    s, c = np.sin(theta / 2), np.cos(theta / 2)
    cos_t = np.cos(theta)
    u1 = amp * (k1 * c * (kappa - cos_t) + k2 * s * (kappa + 2 + cos_t))
    u2 = amp * (k1 * s * (kappa - cos_t) - k2 * c * (kappa - 2 + cos_t))
    u3 = (2 * k3 / mu) * np.sqrt(r / (2 * np.pi)) * s
    return u1, u2, u3


def polar_about_tip(xy: np.ndarray, tip, crack_angle: float):
    """(r, theta) of points in the tip frame, crack faces at theta = +/- pi.

    Points exactly on the crack line behind the tip get theta = +pi (upper
    face); the seam mesh resolves the two faces.
    """
    dx = xy[:, 0] - tip[0]
    dy = xy[:, 1] - tip[1]
    ca, sa = np.cos(crack_angle), np.sin(crack_angle)
    x1 = ca * dx + sa * dy
    x2 = -sa * dx + ca * dy
    r = np.hypot(x1, x2)
    theta = np.arctan2(x2, x1)
    theta = np.where((x2 == 0.0) & (x1 < 0.0), np.pi, theta)
    return r, theta, x1, x2


def generate_williams_field(spec: SyntheticSpec, paper_mu: bool = False) -> DisplacementField:
    """Evaluate the asymptotic crack field of ``spec`` on its grid.

    Nodes exactly at the tip get zero displacement (the sqrt(r) factor).
    ``paper_mu`` switches the prefactor to mu = E / (2 (1+nu) (1-nu^2)) for
    comparison runs; the default is the standard shear modulus.
    """
    mat = spec.material
    E, nu = mat.E, mat.nu
    mu = None
    if paper_mu:
        mu = E / (1 - nu**2) / (2 * (1 + nu))
    field = DisplacementField(
        nx=spec.nx, ny=spec.ny, spacing_x=spec.spacing, spacing_y=spec.spacing,
        origin=spec.origin(),
        u=np.zeros((spec.nx * spec.ny, 3 if spec.k3 else 2)),
        mask=np.zeros(spec.nx * spec.ny, dtype=bool),
        has_out_of_plane=bool(spec.k3),
        source_units="m")
    xy = field.node_xy()
    r, theta, _, _ = polar_about_tip(xy, spec.tip, spec.crack_angle)
    u1, u2, u3 = crack_tip_displacements(
        r, theta, spec.k1, spec.k2, spec.k3, E, nu, mat.plane_state, mu=mu)
    at_tip = r == 0.0
    if at_tip.any():
        u1, u2, u3 = (np.where(at_tip, 0.0, comp) for comp in (u1, u2, u3))
    ca, sa = np.cos(spec.crack_angle), np.sin(spec.crack_angle)
    ux = ca * u1 - sa * u2
    uy = sa * u1 + ca * u2
    cols = [ux, uy, u3] if spec.k3 else [ux, uy]
    return replace(field, u=np.column_stack(cols))


def add_noise(field: DisplacementField, fraction: float, seed: int,
              distribution: str = "gaussian") -> DisplacementField:
    """Add zero-mean noise with std = fraction * mean displacement magnitude.

    Noise is independent per component, applied to unmasked nodes only, and
    deterministic for a given seed. ``distribution`` is "gaussian" or
    "uniform" (same standard deviation).
    """
    if fraction < 0:
        raise ValueError("noise fraction must be nonnegative")
    if fraction == 0:
        return field
    free = ~field.mask
    scale = float(field.magnitude()[free].mean()) * fraction
    rng = np.random.default_rng(seed)
    shape = (int(np.count_nonzero(free)), field.u.shape[1])
    if distribution == "gaussian":
        noise = rng.normal(0.0, scale, size=shape)
    elif distribution == "uniform":
        half = scale * np.sqrt(3.0)
        noise = rng.uniform(-half, half, size=shape)
    else:
        raise ValueError(f"unknown noise distribution {distribution!r}")
    u = field.u.copy()
    u[free] += noise
    return replace(field, u=u, mask=field.mask.copy())
