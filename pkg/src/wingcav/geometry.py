"""Winged Fabry-Perot cavity geometry rasterized onto a uniform 2D grid.

Coordinates: x is transverse, y runs mirror to mirror. For the confocal
profile the mirror gap is gap(x) = L - x^2/L (parabolic arcs whose vertex
radius of curvature equals L), shrinking from L on axis to h at the aperture
half-width x_ap = sqrt(L*(L-h)). Wings continue the h-gap channel outward in
x between PEC walls and end in a PML band of width l_pml.

Arrays are indexed [i, j] <-> (x_i, y_j) with cell centers placed
symmetrically about the origin, so reflection symmetry of the parameters is
cell-exact in the rasterized maps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT
from .errors import DomainError, GeometryError, ResolutionError
from .mirrors import StackSpec

IDEAL_PEC = "ideal_pec"
DIELECTRIC_STACK = "dielectric_stack"
CONFOCAL_ARC = "confocal_arc"
PLANE = "plane"


@dataclass(frozen=True)
class CavityParams:
    """Winged-cavity description; lengths in meters.

    L: on-axis mirror separation, h: minimum separation (at the aperture),
    d: wing width, l_pml: PML band width, eta: background refractive index.
    """

    L: float
    h: float
    d: float
    l_pml: float
    eta: float = 1.0
    mirror_model: str = IDEAL_PEC
    profile: str = CONFOCAL_ARC
    stack: StackSpec | None = None

    def validate(self):
        if not 0.0 < self.h < self.L:
            raise GeometryError(f"need 0 < h < L, got h={self.h}, L={self.L}")
        if self.d < 0.0:
            raise GeometryError("wing width d must be >= 0")
        if self.l_pml <= 0.0:
            raise GeometryError("PML width must be > 0")
        if self.eta < 1.0:
            raise GeometryError("background index eta must be >= 1")
        if self.profile not in (CONFOCAL_ARC, PLANE):
            raise GeometryError(f"unknown profile {self.profile!r}")
        if self.mirror_model not in (IDEAL_PEC, DIELECTRIC_STACK):
            raise GeometryError(f"unknown mirror model {self.mirror_model!r}")
        if self.mirror_model == DIELECTRIC_STACK and self.stack is None:
            raise GeometryError("dielectric_stack mirrors need a StackSpec")


@dataclass(frozen=True)
class GridSpec:
    """Uniform isotropic grid covering [-extent_x, extent_x] x [-extent_y, extent_y]."""

    dx: float
    extent_x: float
    extent_y: float
    ppw_target: float = 20.0

    def validate(self):
        if self.dx <= 0.0:
            raise GeometryError("dx must be > 0")
        if self.ppw_target < 15.0:
            raise GeometryError(f"ppw_target must be >= 15, got {self.ppw_target}")
        for name, extent in (("extent_x", self.extent_x), ("extent_y", self.extent_y)):
            n = 2.0 * extent / self.dx
            if abs(n - round(n)) > 1e-6:
                raise GeometryError(f"{name} must be a whole number of cells")

    def cell_counts(self) -> tuple[int, int]:
        return (int(round(2.0 * self.extent_x / self.dx)),
                int(round(2.0 * self.extent_y / self.dx)))


@dataclass
class MaterialMap:
    """Rasterized cavity: complex permittivity, PEC mask and PML profile.

    pml_sigma_* hold the normalized linear depth ramp into the PML band
    (0 outside, rising to 1 at the outer edge); the solver applies the
    polynomial grading and peak value.
    """

    eps: np.ndarray
    pec_mask: np.ndarray
    pml_sigma_x: np.ndarray
    pml_sigma_y: np.ndarray
    dims: tuple[int, int]
    dx: float

    def x_centers(self) -> np.ndarray:
        nx = self.dims[0]
        return (np.arange(nx) - (nx - 1) / 2.0) * self.dx

    def y_centers(self) -> np.ndarray:
        ny = self.dims[1]
        return (np.arange(ny) - (ny - 1) / 2.0) * self.dx

    @property
    def pml_mask(self) -> np.ndarray:
        return (self.pml_sigma_x > 0.0) | (self.pml_sigma_y > 0.0)


def aperture_half_width(params: CavityParams) -> float:
    """Transverse position where the confocal gap closes down to h."""
    return math.sqrt(params.L * (params.L - params.h))


def mirror_gap(params: CavityParams, x) -> float | np.ndarray:
    """Mirror-to-mirror distance at transverse position x (within the aperture)."""
    x_ap = aperture_half_width(params)
    ax = np.abs(x)
    if np.any(ax > x_ap * (1.0 + 1e-12)):
        raise DomainError(f"|x| beyond the mirror aperture {x_ap:.6g} m")
    if params.profile == PLANE:
        gap = np.full_like(np.asarray(x, dtype=float), params.L)
    else:
        gap = params.L - np.asarray(x, dtype=float) ** 2 / params.L
    if np.isscalar(x):
        return float(gap)
    return gap


def grid_for_cavity(params: CavityParams, ppw_target: float,
                    design_freq_hz: float, margin_cells: int = 2) -> GridSpec:
    """Snug grid resolving the in-medium wavelength at design_freq_hz with
    ppw_target cells and covering cavity, wings, PML and mirror backing.

    Cell counts are forced even so that cell centers sit at half-integer
    multiples of dx; maps built for different wing widths then share cell
    positions over the common interior, which mode tracking relies on.
    """
    params.validate()
    lam = C_LIGHT / (params.eta * design_freq_hz)
    dx = lam / ppw_target
    x_need = aperture_half_width(params) + params.d + params.l_pml
    y_need = params.L / 2.0 + margin_cells * dx
    if params.mirror_model == DIELECTRIC_STACK and params.stack is not None:
        y_need += params.stack.total_thickness()
    nx_half = int(math.ceil(x_need / dx - 1e-9))
    ny_half = int(math.ceil(y_need / dx - 1e-9))
    return GridSpec(dx=dx, extent_x=nx_half * dx, extent_y=ny_half * dx,
                    ppw_target=ppw_target)


def _arc_distance(ax: np.ndarray, ay: np.ndarray, L: float, x_ap: float) -> np.ndarray:
    """Distance from points (ax, ay) with ax, ay >= 0 to the top mirror arc
    y = (L - x^2/L)/2, the arc truncated at x = x_ap.

    The nearest-point condition is the monotone depressed cubic
    x^3 + L(L + 2y) x - 2 L^2 ax = 0, solved in closed form.
    """
    p = L * (L + 2.0 * ay)
    half_q = L * L * ax
    disc = np.sqrt(half_q**2 + (p / 3.0) ** 3)
    root = np.cbrt(half_q + disc) + np.cbrt(half_q - disc)
    root = np.clip(root, 0.0, x_ap)
    y_arc = (L - root**2 / L) / 2.0
    return np.hypot(ax - root, ay - y_arc)


def build_geometry(params: CavityParams, grid: GridSpec) -> MaterialMap:
    """Rasterize the winged cavity onto the grid.

    Mirrors occupy |x| <= x_ap: painted into pec_mask for ideal_pec mirrors,
    or as constant-normal-depth permittivity shells (backed by PEC) for
    dielectric stacks. Wing channel walls are PEC in either model. The PML
    ramp rises over x_ap + d <= |x| <= x_ap + d + l_pml.
    """
    params.validate()
    grid.validate()
    nx, ny = grid.cell_counts()
    dx = grid.dx
    x_ap = aperture_half_width(params)

    x_need = x_ap + params.d + params.l_pml
    if x_need > grid.extent_x + dx / 2.0 + 1e-12:
        raise GeometryError(
            f"aperture + wings + PML need extent_x >= {x_need:.6g} m, "
            f"grid provides {grid.extent_x:.6g} m")
    y_need = params.L / 2.0
    if params.mirror_model == DIELECTRIC_STACK:
        y_need += params.stack.total_thickness()
    if y_need > grid.extent_y + dx / 2.0 + 1e-12:
        raise GeometryError(
            f"mirrors need extent_y >= {y_need:.6g} m, grid provides {grid.extent_y:.6g} m")

    x = (np.arange(nx) - (nx - 1) / 2.0) * dx
    y = (np.arange(ny) - (ny - 1) / 2.0) * dx
    ax = np.abs(x)[:, None]
    ay = np.abs(y)[None, :]

    if params.profile == PLANE:
        gap = np.where(ax <= x_ap, params.L, params.h)
    else:
        gap = np.where(ax <= x_ap, params.L - ax**2 / params.L, params.h)
    outside = np.broadcast_to(ay >= gap / 2.0, (nx, ny)).copy()

    eps = np.full((nx, ny), params.eta**2, dtype=complex)
    pec = outside.copy()

    if params.mirror_model == DIELECTRIC_STACK:
        stack = params.stack
        thick = np.array([layer.thickness for layer in stack.layers])
        if thick.size and thick.min() / dx < 4.0:
            raise ResolutionError(
                f"thinnest stack layer {thick.min():.4g} m under-resolved at dx={dx:.4g} m")
        mirror_zone = outside & (ax <= x_ap)
        if params.profile == PLANE:
            depth = ay - params.L / 2.0
            depth = np.broadcast_to(depth, (nx, ny))
        else:
            axg, ayg = np.broadcast_arrays(ax, ay)
            depth = np.full((nx, ny), np.inf)
            depth[mirror_zone] = _arc_distance(
                axg[mirror_zone], ayg[mirror_zone], params.L, x_ap)
        bounds = np.cumsum(thick)
        eps_layers = np.array([layer.n_complex**2 for layer in stack.layers])
        in_stack = mirror_zone & (depth <= bounds[-1]) if thick.size else np.zeros_like(pec)
        layer_ix = np.searchsorted(bounds, depth[in_stack], side="left")
        eps[in_stack] = eps_layers[layer_ix]
        pec[in_stack] = False  # stack cells are dielectric, PEC only behind

    x0 = x_ap + params.d
    ramp = np.clip((ax - x0) / params.l_pml, 0.0, 1.0)
    pml_x = np.broadcast_to(ramp, (nx, ny)).copy()
    pml_x[pec] = 0.0  # PEC and PML bands stay disjoint
    pml_y = np.zeros((nx, ny))

    return MaterialMap(eps=eps, pec_mask=pec, pml_sigma_x=pml_x,
                       pml_sigma_y=pml_y, dims=(nx, ny), dx=dx)


def rectangular_box_map(a: float, b: float, dx: float, eps_r: float = 1.0) -> MaterialMap:
    """Closed PEC box of inner size a x b with no PML; the Dirichlet wall sits
    on the ghost ring just outside the stored cells, so a = (nx+1)*dx exactly.

    Used as the analytic validation target for the eigensolver.
    """
    nx = int(round(a / dx)) - 1
    ny = int(round(b / dx)) - 1
    if abs((nx + 1) * dx - a) > 1e-9 * a or abs((ny + 1) * dx - b) > 1e-9 * b:
        raise GeometryError("box dimensions must be whole multiples of dx")
    if nx < 1 or ny < 1:
        raise GeometryError("box under-resolved")
    shape = (nx, ny)
    return MaterialMap(
        eps=np.full(shape, eps_r, dtype=complex),
        pec_mask=np.zeros(shape, dtype=bool),
        pml_sigma_x=np.zeros(shape),
        pml_sigma_y=np.zeros(shape),
        dims=shape,
        dx=dx,
    )
