import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wingcav.errors import DomainError, GeometryError, ResolutionError
from wingcav.geometry import (CavityParams, GridSpec, aperture_half_width,
                              build_geometry, grid_for_cavity, mirror_gap,
                              rectangular_box_map)
from wingcav.mirrors import quarter_wave_stack

from conftest import winged_params


def test_param_invariants():
    with pytest.raises(GeometryError):
        CavityParams(L=0.01, h=0.02, d=0.0, l_pml=0.004).validate()
    with pytest.raises(GeometryError):
        CavityParams(L=0.01, h=0.005, d=-1e-3, l_pml=0.004).validate()
    with pytest.raises(GeometryError):
        CavityParams(L=0.01, h=0.005, d=0.0, l_pml=0.004, eta=0.5).validate()
    winged_params(0.0).validate()


def test_mirror_gap_examples():
    p = winged_params(0.0)
    assert mirror_gap(p, 0.0) == pytest.approx(0.01)
    x_ap = np.sqrt(p.L * (p.L - p.h))
    assert aperture_half_width(p) == pytest.approx(x_ap)
    assert mirror_gap(p, x_ap) == pytest.approx(0.005)
    plane = winged_params(0.0, profile="plane")
    assert mirror_gap(plane, 0.5 * x_ap) == pytest.approx(0.01)
    with pytest.raises(DomainError):
        mirror_gap(p, 1.1 * x_ap)


def test_d_zero_is_plain_confocal():
    p = winged_params(0.0)
    grid = grid_for_cavity(p, 20, 45e9)
    mat = build_geometry(p, grid)
    x_ap = aperture_half_width(p)
    # PML starts straight at the aperture: no wing band of plain channel
    x = mat.x_centers()
    chan = (np.abs(x) > x_ap) & (np.abs(x) < x_ap + p.l_pml)
    assert mat.pml_sigma_x[chan, :].max() > 0.0


@settings(max_examples=20, deadline=None)
@given(d_over_l=st.floats(0.0, 0.4), h_over_l=st.floats(0.2, 0.8),
       ppw=st.floats(15, 25))
def test_reflection_symmetry_cell_exact(d_over_l, h_over_l, ppw):
    L = 0.01
    p = CavityParams(L=L, h=h_over_l * L, d=d_over_l * L, l_pml=0.4 * L)
    mat = build_geometry(p, grid_for_cavity(p, ppw, 45e9))
    for arr in (mat.eps, mat.pec_mask, mat.pml_sigma_x, mat.pml_sigma_y):
        assert np.array_equal(arr, arr[::-1, :])
        assert np.array_equal(arr, arr[:, ::-1])


def test_monotone_containment():
    small = winged_params(0.1)
    big = winged_params(0.3)
    grid_s = grid_for_cavity(small, 20, 45e9)
    grid_b = grid_for_cavity(big, 20, 45e9)
    assert grid_b.extent_x > grid_s.extent_x
    mat_s = build_geometry(small, grid_s)
    mat_b = build_geometry(big, grid_b)
    ns = mat_s.dims[0]
    nb = mat_b.dims[0]
    pad = (nb - ns) // 2
    # the original interior is untouched: compare the shared centered block
    inner_b = mat_b.pec_mask[pad:pad + ns, :]
    x_ap = aperture_half_width(small)
    inside = np.abs(mat_s.x_centers()) <= x_ap
    assert np.array_equal(mat_s.pec_mask[inside, :], inner_b[inside, :])
    free_s = (~mat_s.pec_mask & ~mat_s.pml_mask).sum()
    free_b = (~mat_b.pec_mask & ~mat_b.pml_mask).sum()
    assert free_b > free_s


def test_passivity_and_disjoint_masks():
    p = winged_params(0.2, mirror_model="dielectric_stack",
                      stack=quarter_wave_stack(2.0, 1e-3, 1.2, 1e-4, 6.633e-3, 2))
    mat = build_geometry(p, grid_for_cavity(p, 35, 45.2e9))
    assert mat.eps.imag.min() >= 0.0
    assert not np.any(mat.pec_mask & mat.pml_mask)


def test_pml_ramp_monotone_toward_boundary():
    p = winged_params(0.1)
    mat = build_geometry(p, grid_for_cavity(p, 20, 45e9))
    x = mat.x_centers()
    j = mat.dims[1] // 2  # on-axis row, inside the channel
    right = mat.pml_sigma_x[x > 0, j]
    assert np.all(np.diff(right) >= 0.0)
    x_ap = aperture_half_width(p)
    inside = np.abs(x) <= x_ap + p.d
    assert mat.pml_sigma_x[inside, :].max() == 0.0


def test_dielectric_stack_shells():
    # quarter-wave layers at 45 GHz: n_h = 6 -> eps 36, n_l = 1.2 -> eps 1.44
    lam0 = 299792458.0 / 45e9
    stack = quarter_wave_stack(6.0, 0.0, 1.2, 0.0, lam0, 2)
    p = winged_params(0.0, mirror_model="dielectric_stack", stack=stack)
    t_h = lam0 / 24.0
    dx = t_h / 4.0
    need_x = aperture_half_width(p) + p.d + p.l_pml
    need_y = p.L / 2 + stack.total_thickness() + 2 * dx
    nx_half = int(np.ceil(need_x / dx))
    ny_half = int(np.ceil(need_y / dx))
    grid = GridSpec(dx=dx, extent_x=nx_half * dx, extent_y=ny_half * dx, ppw_target=20)
    mat = build_geometry(p, grid)

    ix = mat.dims[0] // 2  # column at x = dx/2, stack depth is vertical there
    col = mat.eps[ix, :].real
    y = mat.y_centers()
    above = y > p.L / 2
    vals = col[above]
    assert set(np.round(np.unique(vals), 6)) <= {1.0, 1.44, 36.0}
    # layer thicknesses along the column, within a cell: H L H L H stack has
    # three lam/(4*6) high shells and two lam/(4*1.2) low shells
    n_high = int((np.abs(vals - 36.0) < 1e-9).sum())
    n_low = int((np.abs(vals - 1.44) < 1e-9).sum())
    t_l = lam0 / 4.8
    assert n_high == pytest.approx(3 * t_h / dx, abs=2)
    assert n_low == pytest.approx(2 * t_l / dx, abs=2)


def test_resolution_error_for_thin_layers():
    lam0 = 299792458.0 / 45e9
    stack = quarter_wave_stack(6.0, 0.0, 1.2, 0.0, lam0, 2)
    p = winged_params(0.0, mirror_model="dielectric_stack", stack=stack)
    with pytest.raises(ResolutionError):
        build_geometry(p, grid_for_cavity(p, 20, 45e9))  # 20 ppw can't resolve lam/24


def test_geometry_error_when_box_too_small():
    p = winged_params(0.3)
    grid = grid_for_cavity(winged_params(0.0), 20, 45e9)  # sized for d = 0
    with pytest.raises(GeometryError):
        build_geometry(p, grid)


def test_box_map():
    m = rectangular_box_map(0.01, 0.01, 0.01 / 20)
    assert m.dims == (19, 19)
    assert not m.pec_mask.any()
    assert not m.pml_mask.any()
    with pytest.raises(GeometryError):
        rectangular_box_map(0.0101, 0.01, 0.01 / 20)
