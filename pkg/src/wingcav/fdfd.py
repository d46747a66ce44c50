"""Scalar frequency-domain Helmholtz eigensolver with stretched-coordinate PML.

Discretizes -d/dx(s_y/s_x du/dx) - d/dy(s_x/s_y du/dy) = (omega/c)^2 eps s_x s_y u
on cell centers with a symmetric 5-point stencil, eliminating PEC cells from
the dof set (missing neighbors are Dirichlet walls). Stretch factors
s = 1 + i*sigma/omega_ref are frozen at a reference frequency so the pencil
(A, B) stays linear in the eigenvalue; interior eigenpairs come from explicit
shift-invert Arnoldi around a target frequency.

Sign conventions: exp(-i*omega*t) time factor, so passive decaying modes have
Im(omega) <= 0 and absorbing media Im(eps) >= 0.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constants import C_LIGHT
from .errors import (AssemblyError, ConvergenceError, DimensionError,
                     FactorizationError, GeometryError, SingularityError)
from .geometry import MaterialMap

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PmlParams:
    """Polynomial-graded PML: sigma(u) = sigma_max * (u/width)^order."""

    width: float
    order: float = 3.0
    target_reflection: float = 1e-4

    def validate(self):
        if self.width <= 0.0:
            raise GeometryError("PML width must be > 0")
        if self.order < 1.0:
            raise GeometryError("PML grading order must be >= 1")
        if not 0.0 < self.target_reflection < 1.0:
            raise GeometryError("target_reflection must be in (0, 1)")

    def sigma_max(self, eta: float = 1.0) -> float:
        """Peak stretch rate (rad/s) from the standard grading rule
        sigma_max = -(order+1) ln(R_target) / (2 * (eta/c) * width)."""
        return (-(self.order + 1.0) * math.log(self.target_reflection)
                * C_LIGHT / (2.0 * eta * self.width))


@dataclass
class HelmholtzOperator:
    """Assembled pencil A x = lambda B x with lambda = (omega/c)^2."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    n_dof: int
    index_map: np.ndarray  # grid-shaped, dof index or -1 for PEC
    dims: tuple[int, int]
    dx: float
    omega_ref: float
    eps_dof: np.ndarray
    pml_dof: np.ndarray
    pml_mask: np.ndarray  # grid-shaped


@dataclass
class EigenMode:
    """One resonance: complex angular frequency and the out-of-plane field on
    the full grid (zero on PEC cells), normalized to max |field| = 1 with the
    peak value rotated to the positive real axis."""

    omega: complex
    field: np.ndarray
    residual: float
    grid_ref: tuple[tuple[int, int], float]  # (dims, dx)
    pml_mask: np.ndarray | None = None


def assemble(mat: MaterialMap, pml: PmlParams, omega_ref: float) -> HelmholtzOperator:
    """Build the (A, B) pencil for the map with stretch factors frozen at omega_ref."""
    pml.validate()
    nx, ny = mat.dims
    if mat.eps.shape != (nx, ny) or mat.pec_mask.shape != (nx, ny):
        raise AssemblyError("map arrays disagree with dims")
    if omega_ref <= 0.0:
        raise AssemblyError("omega_ref must be > 0")
    if np.any(mat.eps.imag < -1e-15):
        raise AssemblyError("eps must be passive (Im >= 0)")

    pml_mask = mat.pml_mask
    if pml_mask.any():
        eta_bg = float(np.sqrt(np.mean(mat.eps.real[pml_mask])))
    else:
        eta_bg = 1.0
    smax = pml.sigma_max(eta_bg)
    sigma_x = smax * mat.pml_sigma_x**pml.order
    sigma_y = smax * mat.pml_sigma_y**pml.order
    s_x = 1.0 + 1j * sigma_x / omega_ref
    s_y = 1.0 + 1j * sigma_y / omega_ref

    dx = mat.dx
    inv_dx2 = 1.0 / dx**2

    # face-centered stretch factors; domain-edge faces use the one-sided cell value
    sxf_x = np.empty((nx + 1, ny), dtype=complex)  # faces normal to x
    syf_x = np.empty((nx + 1, ny), dtype=complex)
    sxf_x[1:-1] = 0.5 * (s_x[:-1] + s_x[1:]); sxf_x[0] = s_x[0]; sxf_x[-1] = s_x[-1]
    syf_x[1:-1] = 0.5 * (s_y[:-1] + s_y[1:]); syf_x[0] = s_y[0]; syf_x[-1] = s_y[-1]
    alpha = syf_x / sxf_x * inv_dx2

    sxf_y = np.empty((nx, ny + 1), dtype=complex)  # faces normal to y
    syf_y = np.empty((nx, ny + 1), dtype=complex)
    sxf_y[:, 1:-1] = 0.5 * (s_x[:, :-1] + s_x[:, 1:]); sxf_y[:, 0] = s_x[:, 0]; sxf_y[:, -1] = s_x[:, -1]
    syf_y[:, 1:-1] = 0.5 * (s_y[:, :-1] + s_y[:, 1:]); syf_y[:, 0] = s_y[:, 0]; syf_y[:, -1] = s_y[:, -1]
    beta = sxf_y / syf_y * inv_dx2

    pec = mat.pec_mask
    n_dof = int((~pec).sum())
    if n_dof == 0:
        raise AssemblyError("no degrees of freedom: everything is PEC")
    index_map = np.full((nx, ny), -1, dtype=np.int64)
    index_map[~pec] = np.arange(n_dof)

    diag_grid = alpha[:-1, :] + alpha[1:, :] + beta[:, :-1] + beta[:, 1:]
    diag = diag_grid[~pec]

    rows, cols, vals = [], [], []
    left, right = index_map[:-1, :], index_map[1:, :]
    both = (left >= 0) & (right >= 0)
    w = -alpha[1:-1, :][both]
    rows += [left[both], right[both]]
    cols += [right[both], left[both]]
    vals += [w, w]

    lo, hi = index_map[:, :-1], index_map[:, 1:]
    both = (lo >= 0) & (hi >= 0)
    w = -beta[:, 1:-1][both]
    rows += [lo[both], hi[both]]
    cols += [hi[both], lo[both]]
    vals += [w, w]

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_dof, n_dof),
    ).tocsr()
    A += sp.diags(diag)

    eps_dof = mat.eps[~pec]
    b_diag = eps_dof * s_x[~pec] * s_y[~pec]
    if np.any(b_diag == 0.0):
        raise SingularityError("mass matrix has a zero diagonal entry")
    B = sp.diags(b_diag).tocsr()

    return HelmholtzOperator(A=A, B=B, n_dof=n_dof, index_map=index_map,
                             dims=(nx, ny), dx=dx, omega_ref=omega_ref,
                             eps_dof=eps_dof, pml_dof=pml_mask[~pec],
                             pml_mask=pml_mask.copy())


def _residual(A, B, lam, x):
    bx = lam * (B @ x)
    return float(np.linalg.norm(A @ x - bx) / np.linalg.norm(bx))


def solve_modes(op: HelmholtzOperator, shift: complex, n_modes: int, seed: int,
                max_pml_fraction: float = 0.2, residual_tol: float = 1e-8,
                min_ppw: float = 10.0) -> list[EigenMode]:
    """Up to n_modes eigenpairs nearest the target angular frequency `shift`,
    sorted by |omega - shift|. Deterministic for fixed (op, shift, n_modes,
    seed); the seed fixes the Arnoldi start vector. Modes with more than
    max_pml_fraction of their energy in the PML are discarded as artifacts.
    """
    ppw_at_shift = 2.0 * math.pi * C_LIGHT / (shift.real * op.dx)
    if ppw_at_shift < min_ppw:
        raise ValueError(
            f"shift unresolvable: {ppw_at_shift:.1f} points per wavelength < {min_ppw}")

    sigma = (shift / C_LIGHT) ** 2
    shifted = (op.A - sigma * op.B).astype(np.complex128).tocsc()
    try:
        lu = spla.splu(shifted)
    except RuntimeError as exc:
        raise FactorizationError(f"shifted matrix singular at {shift}: {exc}") from exc
    if not np.all(np.isfinite(lu.U.diagonal())):
        raise FactorizationError(f"shifted matrix singular at {shift}")

    B = op.B
    linop = spla.LinearOperator(
        (op.n_dof, op.n_dof), matvec=lambda v: lu.solve(B @ v), dtype=np.complex128)
    k = min(n_modes, op.n_dof - 2)
    ncv = min(op.n_dof, max(3 * k, k + 3, 20))
    v0 = np.random.default_rng(seed).standard_normal(op.n_dof).astype(np.complex128)
    try:
        mu, vecs = spla.eigs(linop, k=k, which="LM", v0=v0, ncv=ncv)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"Arnoldi failed at shift {shift:.6g}: {len(exc.eigenvalues)}/{k} "
            f"eigenvalues converged") from exc

    lam = sigma + 1.0 / mu
    omegas = C_LIGHT * np.sqrt(lam)

    modes = []
    for i in range(len(omegas)):
        x = vecs[:, i]
        res = _residual(op.A, op.B, lam[i], x)
        if res > residual_tol:
            log.warning("dropping mode at %.6g Hz: residual %.2e", omegas[i].real / (2 * np.pi), res)
            continue
        weight = op.eps_dof.real * np.abs(x) ** 2
        total = weight.sum()
        frac = weight[op.pml_dof].sum() / total if total > 0 else 1.0
        if frac > max_pml_fraction:
            log.debug("dropping PML artifact at %.6g Hz: fraction %.2f",
                      omegas[i].real / (2 * np.pi), frac)
            continue
        field = np.zeros(op.dims, dtype=complex)
        field[op.index_map >= 0] = x
        peak = x[np.argmax(np.abs(x))]
        field /= peak
        modes.append(EigenMode(omega=complex(omegas[i]), field=field,
                               residual=res, grid_ref=(op.dims, op.dx),
                               pml_mask=op.pml_mask))
    modes.sort(key=lambda m: (abs(m.omega - shift), m.omega.real))
    return modes


def eigen_residual(op: HelmholtzOperator, mode: EigenMode) -> float:
    """Relative eigen-residual ||A x - lambda B x|| / ||lambda B x||."""
    dims, _ = mode.grid_ref
    if tuple(dims) != tuple(op.dims) or mode.field.shape != tuple(op.dims):
        raise DimensionError("mode grid does not match operator layout")
    x = mode.field[op.index_map >= 0]
    lam = (mode.omega / C_LIGHT) ** 2
    return _residual(op.A, op.B, lam, x)


def find_modes(mat: MaterialMap, pml: PmlParams, shift: complex, n_modes: int,
               seed: int, max_pml_fraction: float = 0.2, refine: bool = True,
               refine_tol: float = 1e-4) -> list[EigenMode]:
    """Assemble and solve around `shift`, then re-solve once with the stretch
    reference moved to the found frequency (fixed-point pass on the PML
    linearization). Skipped when the map has no PML or refinement is off.
    """
    op = assemble(mat, pml, omega_ref=shift.real)
    modes = solve_modes(op, shift, n_modes, seed, max_pml_fraction)
    if not refine or not modes or not mat.pml_mask.any():
        return modes
    omega_ref = modes[0].omega.real
    op2 = assemble(mat, pml, omega_ref=omega_ref)
    refined = solve_modes(op2, shift, n_modes, seed, max_pml_fraction)
    if refined:
        drift = abs(refined[0].omega - modes[0].omega) / abs(refined[0].omega)
        if drift > refine_tol:
            log.warning("PML reference fixed point moved omega by %.2e relative", drift)
    return refined
