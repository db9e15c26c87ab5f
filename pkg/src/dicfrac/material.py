"""Constitutive models and the elastic constants used by the solver and the
fracture integrals.

All moduli are in Pa. The engine works with the standard shear modulus
G = E / (2 (1 + nu)); the crack-field generator offers a nonstandard variant
behind a flag (see synth.generate_williams_field).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, NotPositiveDefinite, SingularStiffness

PLANE_STRESS = "plane stress"
PLANE_STRAIN = "plane strain"

#: Voigt order used for 6x6 stiffness input: 11, 22, 33, 23, 13, 12.
_IN_PLANE = [0, 1, 5]
_OUT_PLANE = [2, 3, 4]


@dataclass(frozen=True)
class RambergOsgood:
    """Power-law hardening parameters: E*eps = sig + alpha*sig*(sig/sigma0)^(n-1)."""

    sigma0: float
    alpha: float
    n: float

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.n <= 1:
            raise ValueError("hardening exponent must exceed 1")


@dataclass(frozen=True)
class EffectiveConstants:
    """Isotropic constants driving the J-K relations.

    E_star is E/(1-nu^2) in plane strain and E in plane stress.
    """

    E_eff: float
    nu_eff: float
    G_eff: float
    E_star: float


@dataclass(frozen=True)
class Material:
    model: str = "isotropic"  # isotropic | cubic | general-anisotropic
    E: float = 0.0
    nu: float = 0.0
    C: np.ndarray | None = None  # 6x6 stiffness, Pa
    ro: RambergOsgood | None = None
    plane_state: str = PLANE_STRAIN

    def __post_init__(self):
        if self.model not in ("isotropic", "cubic", "general-anisotropic"):
            raise ValueError(f"unknown material model {self.model!r}")
        if self.plane_state not in (PLANE_STRESS, PLANE_STRAIN):
            raise ValueError(f"unknown plane state {self.plane_state!r}")
        if self.model == "isotropic":
            if self.E <= 0:
                raise ValueError("E must be positive")
            if not -1 < self.nu < 0.5:
                raise ValueError("nu must lie in (-1, 0.5)")
        else:
            if self.C is None:
                raise ValueError(f"{self.model} material requires a 6x6 C matrix")
            C = np.asarray(self.C, dtype=float)
            if C.shape != (6, 6):
                raise ValueError("C must be 6x6")
            if not np.allclose(C, C.T, rtol=1e-8, atol=0.0):
                raise ValueError("C must be symmetric")
            object.__setattr__(self, "C", C)
            if self.model == "cubic":
                c11, c12, c44 = C[0, 0], C[0, 1], C[3, 3]
                if not (c11 > c12 and c44 > 0 and c11 + 2 * c12 > 0):
                    raise NotPositiveDefinite(
                        "cubic constants need C11 > C12, C44 > 0, C11 + 2*C12 > 0")

    @property
    def is_isotropic_like(self) -> bool:
        """True when effective isotropic constants are meaningful (iso or cubic)."""
        return self.model in ("isotropic", "cubic")


def effective_isotropic_from_cubic(c11: float, c12: float, c44: float) -> EffectiveConstants:
    """Reduce cubic elastic constants to isotropic ones by Voigt-Reuss-Hill averaging.

    Returns EffectiveConstants with E_star left at the plane-strain convention;
    use effective_constants(material) when the plane state matters.
    """
    if not (c11 > c12 and c44 > 0 and c11 + 2 * c12 > 0):
        raise NotPositiveDefinite(
            "cubic constants need C11 > C12, C44 > 0, C11 + 2*C12 > 0")
    K = (c11 + 2 * c12) / 3.0
    G_V = (c11 - c12 + 3 * c44) / 5.0
    G_R = 5 * (c11 - c12) * c44 / (4 * c44 + 3 * (c11 - c12))
    G = 0.5 * (G_V + G_R)
    E = 9 * K * G / (3 * K + G)
    nu = (3 * K - 2 * G) / (2 * (3 * K + G))
    return EffectiveConstants(E_eff=E, nu_eff=nu, G_eff=G,
                              E_star=E / (1 - nu**2))


def effective_constants(material: Material) -> EffectiveConstants:
    """Effective isotropic constants for the J-K relations of a material."""
    if material.model == "isotropic":
        E, nu = material.E, material.nu
        G = E / (2 * (1 + nu))
    elif material.model == "cubic":
        C = material.C
        eff = effective_isotropic_from_cubic(C[0, 0], C[0, 1], C[3, 3])
        E, nu, G = eff.E_eff, eff.nu_eff, eff.G_eff
    else:
        raise ConfigError(
            "stress intensity factors are not decomposed for general-anisotropic "
            "materials; only J is reported")
    E_star = E if material.plane_state == PLANE_STRESS else E / (1 - nu**2)
    return EffectiveConstants(E_eff=E, nu_eff=nu, G_eff=G, E_star=E_star)


def isotropic_plane_stiffness(E: float, nu: float, plane_state: str) -> np.ndarray:
    """3x3 matrix D relating (exx, eyy, gxy) to (sxx, syy, sxy)."""
    if plane_state == PLANE_STRESS:
        c = E / (1 - nu**2)
        return np.array([[c, c * nu, 0.0],
                         [c * nu, c, 0.0],
                         [0.0, 0.0, E / (2 * (1 + nu))]])
    c = E / ((1 + nu) * (1 - 2 * nu))
    return np.array([[c * (1 - nu), c * nu, 0.0],
                     [c * nu, c * (1 - nu), 0.0],
                     [0.0, 0.0, E / (2 * (1 + nu))]])


def plane_stiffness(material: Material) -> np.ndarray:
    """Plane stress/strain stiffness of the material.

    Anisotropic input is condensed from the 6x6 C: plane strain keeps the
    in-plane block; plane stress eliminates the out-of-plane stresses by
    static condensation.
    """
    if material.model == "isotropic":
        return isotropic_plane_stiffness(material.E, material.nu,
                                         material.plane_state)
    C = material.C
    Caa = C[np.ix_(_IN_PLANE, _IN_PLANE)]
    if material.plane_state == PLANE_STRAIN:
        D = Caa.copy()
    else:
        Cab = C[np.ix_(_IN_PLANE, _OUT_PLANE)]
        Cbb = C[np.ix_(_OUT_PLANE, _OUT_PLANE)]
        try:
            D = Caa - Cab @ np.linalg.solve(Cbb, Cab.T)
        except np.linalg.LinAlgError:
            raise SingularStiffness("out-of-plane stiffness block is singular")
    eig = np.linalg.eigvalsh(0.5 * (D + D.T))
    if eig[0] <= 0:
        raise SingularStiffness("condensed plane stiffness is not positive definite")
    return D


def isotropic_C(E: float, nu: float) -> np.ndarray:
    """Full 6x6 stiffness of an isotropic material (Voigt, engineering shear)."""
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[np.diag_indices(3)] = lam + 2 * mu
    C[3, 3] = C[4, 4] = C[5, 5] = mu
    return C


def secant_modulus(ro: RambergOsgood, E: float, sigma_eq) -> float | np.ndarray:
    """Secant Young's modulus E / (1 + alpha*(sig/sigma0)^(n-1)).

    Accepts scalar or array equivalent stress; strictly decreasing in
    sigma_eq when alpha > 0.
    """
    s = np.asarray(sigma_eq, dtype=float)
    out = E / (1.0 + ro.alpha * (s / ro.sigma0) ** (ro.n - 1.0))
    return float(out) if np.isscalar(sigma_eq) else out


def j_from_k(k1: float, k2: float, k3: float, eff: EffectiveConstants) -> float:
    """Energy release rate of a mixed-mode crack: (K1^2+K2^2)/E* + K3^2/(2G)."""
    return (k1**2 + k2**2) / eff.E_star + k3**2 / (2 * eff.G_eff)


def load_material(path) -> Material:
    """Read a material JSON file.

    Keys: model, E, nu, plane_state, optional C (36 numbers, row-major),
    optional ramberg_osgood {sigma0, alpha, n}. SI units (Pa).
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read material file {path}: {exc}")
    return material_from_dict(doc)


def material_from_dict(doc: dict) -> Material:
    if not isinstance(doc, dict):
        raise ConfigError("material document must be a JSON object")
    model = doc.get("model", "isotropic")
    ro = None
    if doc.get("ramberg_osgood") is not None:
        rd = doc["ramberg_osgood"]
        try:
            ro = RambergOsgood(sigma0=float(rd["sigma0"]),
                               alpha=float(rd["alpha"]), n=float(rd["n"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad ramberg_osgood block: {exc}")
    C = None
    if doc.get("C") is not None:
        arr = np.asarray(doc["C"], dtype=float)
        C = arr.reshape(6, 6) if arr.size == 36 else arr
    try:
        return Material(model=model,
                        E=float(doc.get("E", 0.0)),
                        nu=float(doc.get("nu", 0.0)),
                        C=C, ro=ro,
                        plane_state=doc.get("plane_state", PLANE_STRAIN))
    except (ValueError, NotPositiveDefinite) as exc:
        raise ConfigError(f"invalid material: {exc}")
