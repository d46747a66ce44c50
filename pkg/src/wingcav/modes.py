"""Reduce raw eigenmodes to figures of merit: Q, mode volume, mode orders,
field-maximum location and the subwavelength classification.

Mode "volume" in this 2D model is mode area times an effective out-of-plane
depth (default: one in-medium wavelength), which keeps the coupling formula
g = gamma * sqrt(Va/V) dimensionally meaningful. Both volume integrals run
over the physical (non-PML) region only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT
from .errors import ClassificationError, EmptyFieldError, UndampedError
from .fdfd import EigenMode
from .geometry import CavityParams, MaterialMap, aperture_half_width, mirror_gap


@dataclass(frozen=True)
class ModeReport:
    freq_hz: float
    Q: float
    V: float
    q_over_v: float
    m_order: int
    k_order: int
    r_c: tuple[float, float]
    subwavelength: bool
    lambda_m: float
    residual: float


def quality_factor(mode: EigenMode) -> float:
    """Q = Re(omega) / (2 |Im(omega)|) for a decaying mode."""
    w = mode.omega
    if w.imag >= 0.0 or abs(w.imag) < 1e-14 * w.real:
        raise UndampedError(
            f"decay unresolvable: Im(omega)={w.imag:.3e} at Re(omega)={w.real:.3e}")
    return w.real / (2.0 * abs(w.imag))


def _grid_coords(mode: EigenMode):
    (nx, ny), dx = mode.grid_ref
    x = (np.arange(nx) - (nx - 1) / 2.0) * dx
    y = (np.arange(ny) - (ny - 1) / 2.0) * dx
    return x, y, dx


def field_argmax(mode: EigenMode) -> tuple[int, int]:
    """Grid indices of the field maximum, PML cells excluded; ties resolve to
    the smallest (row, column) pair."""
    mag = np.abs(mode.field)
    if mode.pml_mask is not None:
        mag = np.where(mode.pml_mask, -1.0, mag)
    if mag.max() < 1e-12:
        raise EmptyFieldError("field magnitude below 1e-12 everywhere")
    i, j = np.unravel_index(int(np.argmax(mag)), mag.shape)
    return int(i), int(j)


def field_maximum(mode: EigenMode) -> tuple[float, float]:
    """Location of max |field| in meters."""
    i, j = field_argmax(mode)
    x, y, _ = _grid_coords(mode)
    return float(x[i]), float(y[j])


def mode_volume(mode: EigenMode, mat: MaterialMap, depth: float) -> float:
    """Energy-integral mode volume
    V = depth * sum(eps |E|^2) dx^2 / max(eps |E|^2), PML excluded."""
    if depth <= 0.0:
        raise ValueError("depth must be > 0")
    if np.abs(mode.field).max() < 1e-12:
        raise EmptyFieldError("field magnitude below 1e-12 everywhere")
    w = mat.eps.real * np.abs(mode.field) ** 2
    w = np.where(mat.pml_mask, 0.0, w)
    return float(depth * w.sum() * mat.dx**2 / w.max())


def mode_volume_rigorous(mode: EigenMode, mat: MaterialMap,
                         r_c: tuple[float, float], depth: float) -> float:
    """Quasinormal-mode volume from the unconjugated product:
    1/V = Re(1/nu_Q), nu_Q = depth * sum(eps f^2) dx^2 / (eps(r_c) f(r_c)^2),
    integrated over the non-PML region."""
    if depth <= 0.0:
        raise ValueError("depth must be > 0")
    f = mode.field
    if np.abs(f).max() < 1e-12:
        raise EmptyFieldError("field magnitude below 1e-12 everywhere")
    x, y, dx = _grid_coords(mode)
    i = int(round(r_c[0] / dx + (len(x) - 1) / 2.0))
    j = int(round(r_c[1] / dx + (len(y) - 1) / 2.0))
    fsq = mat.eps * f**2
    fsq = np.where(mat.pml_mask, 0.0, fsq)
    nu_q = depth * fsq.sum() * dx**2 / (mat.eps[i, j] * f[i, j] ** 2)
    return float(1.0 / (1.0 / nu_q).real)


def _count_sign_changes(values: np.ndarray, noise_floor: float) -> int:
    mag = np.abs(values)
    peak = mag.max()
    if peak <= 0.0:
        raise ClassificationError("cut is identically zero")
    keep = mag > noise_floor * peak
    signs = np.sign(values.real[keep])
    signs = signs[signs != 0]
    if signs.size == 0:
        raise ClassificationError("no resolvable lobes along the cut")
    return int((np.diff(signs) != 0).sum())


def classify_mode(mode: EigenMode, params: CavityParams,
                  noise_floor: float = 1e-6,
                  max_pml_fraction: float = 0.2) -> tuple[int, int]:
    """Mode orders (m, k): k is one plus the sign changes of Re(field) along
    the cavity axis between the mirrors, m the sign changes along the
    transverse line through the field maximum."""
    f = mode.field
    x, y, dx = _grid_coords(mode)
    gmax = np.abs(f).max()
    if gmax < 1e-12:
        raise EmptyFieldError("field magnitude below 1e-12 everywhere")
    if mode.pml_mask is not None:
        frac = float((np.abs(f[mode.pml_mask]) ** 2).sum() / (np.abs(f) ** 2).sum())
        if frac > max_pml_fraction:
            raise ClassificationError(
                f"mode not localized: PML energy fraction {frac:.2f}")

    # axis cut: the grid line nearest x = 0 carrying resolvable field
    # (odd-m modes vanish on x = 0 itself, so fall over to the next column)
    order = np.argsort(np.abs(np.abs(x) - dx / 4.0))
    k_order = None
    for ix in order[:3]:
        gap = mirror_gap(params, float(x[ix]))
        cut = f[ix, np.abs(y) < gap / 2.0]
        if np.abs(cut).max() < noise_floor * gmax:
            continue
        k_order = _count_sign_changes(cut, noise_floor) + 1
        break
    if k_order is None:
        raise ClassificationError("field below noise floor along the cavity axis")

    i0, j0 = field_argmax(mode)
    x_ap = aperture_half_width(params)
    inside = np.abs(x) <= x_ap + params.d
    row = f[inside, j0]
    if np.abs(row).max() < noise_floor * gmax:
        raise ClassificationError("field below noise floor along the transverse cut")
    m_order = _count_sign_changes(row, noise_floor)
    return m_order, k_order


def analytic_frequency(k: int, m: int, L: float, eta: float = 1.0) -> float:
    """Paraxial resonance frequency c*(k + (m+1)/2) / (2*eta*L) in Hz."""
    if k < 1 or m < 0:
        raise ValueError("need k >= 1 and m >= 0")
    if L <= 0.0 or eta < 1.0:
        raise ValueError("need L > 0 and eta >= 1")
    return C_LIGHT * (k + (m + 1) / 2.0) / (2.0 * eta * L)


def mode_overlap(mode_a: EigenMode, mode_b: EigenMode) -> float:
    """|<a|b>| over the shared centered region of two same-spacing grids.

    Grids built by grid_for_cavity share cell positions on the common interior
    (even cell counts, centers at half-integer multiples of dx), so fields from
    different wing widths can be compared column-aligned.
    """
    (nxa, nya), dxa = mode_a.grid_ref
    (nxb, nyb), dxb = mode_b.grid_ref
    if abs(dxa - dxb) > 1e-12 * dxa:
        raise ValueError("modes live on different grid spacings")
    nx, ny = min(nxa, nxb), min(nya, nyb)

    def center(fld, nx_f, ny_f):
        i0 = (nx_f - nx) // 2
        j0 = (ny_f - ny) // 2
        return fld[i0:i0 + nx, j0:j0 + ny]

    fa = center(mode_a.field, nxa, nya)
    fb = center(mode_b.field, nxb, nyb)
    na = np.linalg.norm(fa)
    nb = np.linalg.norm(fb)
    if na == 0.0 or nb == 0.0:
        raise EmptyFieldError("empty field in overlap")
    return float(abs(np.vdot(fa, fb)) / (na * nb))


def build_report(mode: EigenMode, mat: MaterialMap, params: CavityParams,
                 depth: float | None = None) -> ModeReport:
    freq = mode.omega.real / (2.0 * math.pi)
    lam = C_LIGHT / freq
    if depth is None:
        depth = lam / params.eta
    try:
        q = quality_factor(mode)
    except UndampedError:
        q = math.inf
    vol = mode_volume(mode, mat, depth)
    m_order, k_order = classify_mode(mode, params)
    r_c = field_maximum(mode)
    return ModeReport(
        freq_hz=freq, Q=q, V=vol, q_over_v=q / vol, m_order=m_order,
        k_order=k_order, r_c=r_c, subwavelength=vol <= lam**3,
        lambda_m=lam, residual=mode.residual)
