"""Displacement-driven plane FE solver on the seam mesh.

4-node isoparametric quads with 2x2 Gauss quadrature; prescribed DOFs are
eliminated by static condensation and the free block is factorised sparse.
The deformation-plasticity path iterates a secant-stiffness fixed point with
the von Mises equivalent stress.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonFiniteInput, NoConvergence, SingularSystem
from .material import Material, PLANE_STRAIN, RambergOsgood, plane_stiffness
from .mesh import SeamMesh

_GP = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]) / np.sqrt(3.0)
_GP_W = np.ones(4)


def _shape_gradients(xi: float, eta: float) -> np.ndarray:
    """dN/d(xi,eta) for the CCW unit quad, shape (2, 4)."""
    return 0.25 * np.array([
        [-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
        [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)],
    ])


class QuadOps:
    """Precomputed per-element quadrature data shared by solver and integrals.

    Attributes:
        dNdx: (E, 4gp, 2, 4) shape-function gradients in physical coordinates
        B: (E, 4gp, 3, 8) strain-displacement matrices (engineering shear)
        detJw: (E, 4gp) Jacobian determinant times Gauss weight
        gp_xy: (E, 4gp, 2) quadrature point coordinates
    """

    def __init__(self, mesh: SeamMesh):
        coords = mesh.nodes[mesh.elements]  # (E, 4, 2)
        E = len(mesh.elements)
        dN_ref = np.stack([_shape_gradients(x, e) for x, e in _GP])  # (4gp,2,4)
        N_ref = np.stack([
            0.25 * np.array([(1 - x) * (1 - e), (1 + x) * (1 - e),
                             (1 + x) * (1 + e), (1 - x) * (1 + e)])
            for x, e in _GP])  # (4gp, 4)
        # J[e,g] = dN_ref[g] @ coords[e]  -> (E, 4gp, 2, 2)
        J = np.einsum("gia,eaj->egij", dN_ref, coords)
        detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(detJ <= 0):
            raise ValueError("element with non-positive Jacobian")
        inv = np.empty_like(J)
        inv[..., 0, 0] = J[..., 1, 1]
        inv[..., 1, 1] = J[..., 0, 0]
        inv[..., 0, 1] = -J[..., 0, 1]
        inv[..., 1, 0] = -J[..., 1, 0]
        inv /= detJ[..., None, None]
        self.dNdx = np.einsum("egij,gja->egia", inv, dN_ref)  # (E,4gp,2,4)
        self.detJw = detJ * _GP_W[None, :]
        self.gp_xy = np.einsum("ga,eaj->egj", N_ref, coords)
        B = np.zeros((E, 4, 3, 8))
        B[:, :, 0, 0::2] = self.dNdx[:, :, 0, :]
        B[:, :, 1, 1::2] = self.dNdx[:, :, 1, :]
        B[:, :, 2, 0::2] = self.dNdx[:, :, 1, :]
        B[:, :, 2, 1::2] = self.dNdx[:, :, 0, :]
        self.B = B
        # global DOF indices per element, (E, 8)
        dofs = np.empty((E, 8), dtype=int)
        dofs[:, 0::2] = 2 * mesh.elements
        dofs[:, 1::2] = 2 * mesh.elements + 1
        self.dofs = dofs

    def strains(self, u_elem: np.ndarray, elems=None) -> np.ndarray:
        """(E, 4gp, 3) strains from per-element DOF vectors (E, 8)."""
        B = self.B if elems is None else self.B[elems]
        return np.einsum("egij,ej->egi", B, u_elem)

    def grad_u(self, u_elem: np.ndarray, elems=None) -> np.ndarray:
        """(E, 4gp, 2, 2) displacement gradients d u_i / d x_j."""
        dNdx = self.dNdx if elems is None else self.dNdx[elems]
        ux = u_elem[:, 0::2]
        uy = u_elem[:, 1::2]
        gx = np.einsum("egja,ea->egj", dNdx, ux)
        gy = np.einsum("egja,ea->egj", dNdx, uy)
        return np.stack([gx, gy], axis=2)  # [..., i, j]

    def grad_nodal_scalar(self, q_elem: np.ndarray, elems=None) -> np.ndarray:
        """(E, 4gp, 2) gradient of a nodal scalar given per-element values (E, 4)."""
        dNdx = self.dNdx if elems is None else self.dNdx[elems]
        return np.einsum("egja,ea->egj", dNdx, q_elem)


@dataclass
class SolutionState:
    """Solved displacement state with quadrature-point fields."""

    nodal_u: np.ndarray           # (N, 2)
    gp_stress: np.ndarray         # (E, 4, 3) sxx, syy, sxy
    gp_strain: np.ndarray         # (E, 4, 3) exx, eyy, gxy
    gp_energy_density: np.ndarray  # (E, 4)
    model_used: str               # "elastic" | "deformation-plasticity"
    iterations: int
    residual: float
    ops: QuadOps
    gp_stress_zz: np.ndarray = None
    gp_eq_stress: np.ndarray = None
    residual_history: list = dc_field(default_factory=list)


def _assemble(ops: QuadOps, D, n_dofs: int) -> sp.csc_matrix:
    """Assemble the global stiffness; D is (3,3) or per-gp (E,4,3,3)."""
    if D.ndim == 2:
        ke = np.einsum("egki,kl,eglj,eg->eij", ops.B, D, ops.B, ops.detJw,
                       optimize=True)
    else:
        ke = np.einsum("egki,egkl,eglj,eg->eij", ops.B, D, ops.B, ops.detJw,
                       optimize=True)
    rows = np.repeat(ops.dofs, 8, axis=1).ravel()
    cols = np.tile(ops.dofs, (1, 8)).ravel()
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n_dofs, n_dofs))
    return K.tocsc()


def _solve_partitioned(K: sp.csc_matrix, fixed: np.ndarray, u_fixed: np.ndarray):
    """Solve K u = 0 with prescribed DOFs; returns the full DOF vector."""
    n = K.shape[0]
    free = ~fixed
    u = np.zeros(n)
    u[fixed] = u_fixed
    if free.any():
        if not fixed.any():
            raise SingularSystem(
                "every node is free; rigid-body modes are unconstrained")
        Kff = K[np.ix_(free, free)].tocsc()
        rhs = -K[np.ix_(free, fixed)] @ u_fixed
        try:
            lu = spla.splu(Kff)
            uf = lu.solve(rhs)
        except RuntimeError as exc:
            raise SingularSystem(f"free DOFs are not fully supported: {exc}")
        if not np.all(np.isfinite(uf)):
            raise SingularSystem("singular reduced system (non-finite solution)")
        # a factorization of a numerically singular block can still "succeed";
        # reject solutions that do not actually satisfy the reduced system
        resid = np.linalg.norm(Kff @ uf - rhs)
        scale = np.linalg.norm(rhs) + np.abs(Kff).max() * np.linalg.norm(uf)
        if scale > 0 and resid > 1e-6 * scale:
            raise SingularSystem("free DOFs are not fully supported "
                                 f"(residual {resid:.2e} of scale {scale:.2e})")
        u[free] = uf
    return u


def _fixed_dofs(mesh: SeamMesh):
    fixed = np.repeat(mesh.constrained, 2)
    u_fixed = mesh.bc_values.ravel()[fixed]
    return fixed, u_fixed


def solve_elastic(mesh: SeamMesh, material: Material,
                  bc_override: np.ndarray | None = None) -> SolutionState:
    """Linear elastic solve with measured displacements as boundary conditions.

    ``bc_override`` substitutes the mesh bc_values (same shape); used by the
    out-of-plane pipeline to inject Uz as an in-plane component.
    """
    bc = mesh.bc_values if bc_override is None else bc_override
    if not np.all(np.isfinite(bc)):
        raise NonFiniteInput("boundary conditions contain non-finite values")
    D = plane_stiffness(material)
    ops = QuadOps(mesh)
    fixed = np.repeat(mesh.constrained, 2)
    u_fixed = bc.ravel()[fixed]
    K = _assemble(ops, D, 2 * mesh.n_nodes)
    u = _solve_partitioned(K, fixed, u_fixed)
    nodal_u = u.reshape(-1, 2)
    eps = ops.strains(nodal_u.ravel()[ops.dofs])
    sig = np.einsum("kl,egl->egk", D, eps)
    W = 0.5 * np.einsum("egk,egk->eg", sig, eps)
    szz = _stress_zz_elastic(material, eps)
    return SolutionState(nodal_u=nodal_u, gp_stress=sig, gp_strain=eps,
                         gp_energy_density=W, model_used="elastic",
                         iterations=1, residual=0.0, ops=ops,
                         gp_stress_zz=szz,
                         gp_eq_stress=_von_mises(sig, szz))


def _stress_zz_elastic(material: Material, eps: np.ndarray) -> np.ndarray:
    if material.plane_state != PLANE_STRAIN:
        return np.zeros(eps.shape[:2])
    if material.model == "isotropic":
        E, nu = material.E, material.nu
        lam = E * nu / ((1 + nu) * (1 - 2 * nu))
        return lam * (eps[..., 0] + eps[..., 1])
    C = material.C
    return (C[2, 0] * eps[..., 0] + C[2, 1] * eps[..., 1]
            + C[2, 5] * eps[..., 2])


def _von_mises(sig: np.ndarray, szz: np.ndarray) -> np.ndarray:
    sxx, syy, sxy = sig[..., 0], sig[..., 1], sig[..., 2]
    return np.sqrt(0.5 * ((sxx - syy) ** 2 + (syy - szz) ** 2 + (szz - sxx) ** 2)
                   + 3 * sxy**2)


def _ro_stress_from_strain(eps_eq: np.ndarray, ro: RambergOsgood, E: float,
                           G: float) -> np.ndarray:
    """Invert eps_eq = (2/3) s_eq [1/2G + (3a/2E)(s_eq/s0)^(n-1)] per point.

    Vectorized Newton on the monotone Ramberg-Osgood curve; exact (3G*eps_eq)
    where the plastic term vanishes.
    """
    sig = 3 * G * eps_eq  # elastic guess, also an upper bound
    c = ro.alpha / E
    for _ in range(60):
        t = c * (sig / ro.sigma0) ** (ro.n - 1.0)
        f = sig / (3 * G) + sig * t - eps_eq
        fp = 1.0 / (3 * G) + ro.n * t
        step = f / fp
        sig = np.maximum(sig - step, 0.0)
        if np.all(np.abs(step) <= 1e-14 * (sig + 1e-300)):
            break
    return sig


def solve_deformation_plasticity(mesh: SeamMesh, material: Material,
                                 tol: float = 1e-8, max_iter: int = 50) -> SolutionState:
    """Secant-stiffness fixed point for the power-law hardening material.

    Hencky form: elastic bulk response, deviatoric response softened to the
    secant shear modulus G_s = s_eq / (3 e_eq), with the equivalent (von
    Mises) stress recovered from the previous iterate's strains by inverting
    the hardening curve per quadrature point. Iterates until the free
    displacements and the equivalent-stress field both settle below tol.
    """
    if material.ro is None:
        raise ValueError("material has no Ramberg-Osgood parameters")
    if material.model != "isotropic":
        raise ValueError("deformation plasticity requires an isotropic material")
    if not np.all(np.isfinite(mesh.bc_values)):
        raise NonFiniteInput("boundary conditions contain non-finite values")
    ro: RambergOsgood = material.ro
    E, nu = material.E, material.nu
    G = E / (2 * (1 + nu))
    Kbulk = E / (3 * (1 - 2 * nu))
    plane_strain = material.plane_state == PLANE_STRAIN
    ops = QuadOps(mesh)
    fixed, u_fixed = _fixed_dofs(mesh)

    # iterate zero: elastic solve seeds the strain field
    elastic = solve_elastic(mesh, material)
    u_prev = elastic.nodal_u.ravel()
    eps = elastic.gp_strain
    sig_eq = elastic.gp_eq_stress
    nus_prev = np.full(sig_eq.shape, nu)
    history = []
    u_scale = max(np.max(np.abs(u_fixed)) if len(u_fixed) else 0.0, 1e-300)
    for it in range(1, max_iter + 1):
        exx, eyy, gxy = eps[..., 0], eps[..., 1], eps[..., 2]
        if plane_strain:
            ezz = np.zeros_like(exx)
        else:
            ezz = -nus_prev / (1 - nus_prev) * (exx + eyy)
        ev = exx + eyy + ezz
        dxx, dyy, dzz = exx - ev / 3, eyy - ev / 3, ezz - ev / 3
        eps_eq = np.sqrt(2.0 / 3.0 * (dxx**2 + dyy**2 + dzz**2
                                      + 2 * (gxy / 2) ** 2))
        sig_eq_new = _ro_stress_from_strain(eps_eq, ro, E, G)
        Gs = np.where(eps_eq > 0, sig_eq_new / (3 * eps_eq + 1e-300), G)
        nus_prev = (3 * Kbulk - 2 * Gs) / (2 * (3 * Kbulk + Gs))
        D = _secant_plane_D_batch(Kbulk, Gs, material.plane_state)
        K = _assemble(ops, D, 2 * mesh.n_nodes)
        u = _solve_partitioned(K, fixed, u_fixed)
        eps = ops.strains(u[ops.dofs])
        sig = np.einsum("egkl,egl->egk", D, eps)

        du = np.max(np.abs(u - u_prev)) / u_scale
        s_scale = max(float(sig_eq_new.max()), 1e-300)
        ds = np.max(np.abs(sig_eq_new - sig_eq)) / s_scale
        residual = max(du, ds)
        history.append(residual)
        u_prev, sig_eq = u, sig_eq_new
        if residual < tol:
            break
    else:
        raise NoConvergence(
            f"secant iteration did not reach tol={tol:g} in {max_iter} iterations",
            residual=float(history[-1]), iterations=max_iter)

    if plane_strain:
        szz = nus_prev * (sig[..., 0] + sig[..., 1])
    else:
        szz = np.zeros_like(sig_eq)
    sig_m = (sig[..., 0] + sig[..., 1] + szz) / 3.0
    eps_p = (ro.alpha * ro.sigma0 / E) * (sig_eq / ro.sigma0) ** ro.n
    W = (sig_eq**2 / (6 * G) + sig_m**2 / (2 * Kbulk)
         + (ro.n / (ro.n + 1)) * sig_eq * eps_p)
    return SolutionState(nodal_u=u.reshape(-1, 2), gp_stress=sig,
                         gp_strain=eps, gp_energy_density=W,
                         model_used="deformation-plasticity",
                         iterations=it, residual=float(history[-1]), ops=ops,
                         gp_stress_zz=szz, gp_eq_stress=sig_eq,
                         residual_history=history)


def _secant_plane_D_batch(Kbulk: float, Gs: np.ndarray, plane_state: str) -> np.ndarray:
    """(E, 4, 3, 3) plane stiffness from bulk modulus and secant shear moduli.

    The plane-strain branch is written in Lame form, which stays finite as the
    secant Poisson ratio approaches 1/2 (heavily yielded points).
    """
    D = np.zeros(Gs.shape + (3, 3))
    if plane_state == PLANE_STRAIN:
        lam = Kbulk - 2.0 * Gs / 3.0
        D[..., 0, 0] = D[..., 1, 1] = lam + 2 * Gs
        D[..., 0, 1] = D[..., 1, 0] = lam
    else:
        Es = 9 * Kbulk * Gs / (3 * Kbulk + Gs)
        nus = (3 * Kbulk - 2 * Gs) / (2 * (3 * Kbulk + Gs))
        c = Es / (1 - nus**2)
        D[..., 0, 0] = D[..., 1, 1] = c
        D[..., 0, 1] = D[..., 1, 0] = c * nus
    D[..., 2, 2] = Gs
    return D


def quadrature_dump_rows(solution: SolutionState):
    """Rows `elem,gp,x,y,sxx,syy,sxy,W` for the optional quadrature dump."""
    ops = solution.ops
    nE = ops.gp_xy.shape[0]
    for e in range(nE):
        for g in range(4):
            x, y = ops.gp_xy[e, g]
            sxx, syy, sxy = solution.gp_stress[e, g]
            yield (e, g, float(x), float(y), float(sxx), float(syy),
                   float(sxy), float(solution.gp_energy_density[e, g]))
