import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wingcav.constants import C_LIGHT as C
from wingcav.errors import ParameterError
from wingcav.mirrors import (LayerSpec, StackSpec, mirror_loss_rate,
                             quarter_wave_stack, total_decay, transfer_matrix)


def dbr_reflectivity(n_h, n_l, n_pairs, n_sub=1.0, n_in=1.0):
    """Closed-form on-design reflectivity of the high-terminated quarter-wave
    stack: admittance (n_h/n_l)^(2N) * n_h^2 / n_sub."""
    y = (n_h / n_l) ** (2 * n_pairs) * n_h**2 / n_sub
    return ((n_in - y) / (n_in + y)) ** 2


def fresnel_recursive(stack, lam):
    """Independent oracle: backward recursion over interface reflections."""
    ns = [complex(stack.n_in)] + [l.n_complex for l in stack.layers] + [complex(stack.n_sub)]
    ts = [None] + [l.thickness for l in stack.layers] + [None]
    r = (ns[-2] - ns[-1]) / (ns[-2] + ns[-1])
    for j in range(len(stack.layers), 0, -1):
        phase = np.exp(2j * (2 * np.pi * ns[j] * ts[j] / lam))
        r_j = (ns[j - 1] - ns[j]) / (ns[j - 1] + ns[j])
        r = (r_j + r * phase) / (1 + r_j * r * phase)
    return r


def test_quarter_wave_thicknesses():
    st_ = quarter_wave_stack(6.0, 0.0, 1.2, 0.0, 6.633e-3, 2)
    assert st_.layers[0].thickness == pytest.approx(0.2764e-3, rel=1e-3)
    assert st_.layers[1].thickness == pytest.approx(1.382e-3, rel=1e-3)
    assert st_.is_quarter_wave()
    assert [l.n for l in st_.layers] == [6.0, 1.2, 6.0, 1.2, 6.0]


def test_extinction_attached_to_layers():
    st_ = quarter_wave_stack(6.0, 0.0003, 1.2, 0.0001, 6.633e-3, 3)
    assert {l.k_abs for l in st_.layers if l.n == 6.0} == {0.0003}
    assert {l.k_abs for l in st_.layers if l.n == 1.2} == {0.0001}


def test_empty_stack_is_fresnel_interface():
    st_ = quarter_wave_stack(6.0, 0.0, 1.2, 0.0, 6.633e-3, 0, n_sub=6.0)
    assert st_.layers == ()
    resp = transfer_matrix(st_, 6.633e-3)
    assert resp.R == pytest.approx(25.0 / 49.0, abs=1e-12)
    assert resp.T == pytest.approx(24.0 / 49.0, abs=1e-12)
    assert resp.A == 0.0


def test_no_stopband_rejected():
    with pytest.raises(ParameterError):
        quarter_wave_stack(1.2, 0.0, 6.0, 0.0, 6.633e-3, 2)
    with pytest.raises(ParameterError):
        LayerSpec(n=-1.0, k_abs=0.0, thickness=1e-3)


@pytest.mark.parametrize("n_pairs", range(1, 11))
def test_closed_form_dbr_agreement(n_pairs):
    st_ = quarter_wave_stack(6.0, 0.0, 1.2, 0.0, 6.633e-3, n_pairs)
    resp = transfer_matrix(st_, 6.633e-3)
    assert resp.R == pytest.approx(dbr_reflectivity(6.0, 1.2, n_pairs), abs=1e-10)


def test_reflectivity_monotone_in_pairs_and_contrast():
    r_by_pairs = [transfer_matrix(
        quarter_wave_stack(6.0, 0.0, 1.2, 0.0, 6.633e-3, n), 6.633e-3).R
        for n in range(1, 7)]
    assert all(b > a for a, b in zip(r_by_pairs, r_by_pairs[1:]))
    r_by_contrast = [transfer_matrix(
        quarter_wave_stack(nh, 0.0, 1.2, 0.0, 6.633e-3, 3), 6.633e-3).R
        for nh in (2.0, 3.0, 4.5, 6.0)]
    assert all(b > a for a, b in zip(r_by_contrast, r_by_contrast[1:]))


def test_absorption_lowers_reflectivity():
    lossless = transfer_matrix(quarter_wave_stack(6.0, 0.0, 1.2, 0.0, 6.633e-3, 4),
                               6.633e-3)
    lossy = transfer_matrix(quarter_wave_stack(6.0, 3e-4, 1.2, 1e-4, 6.633e-3, 4),
                            6.633e-3)
    assert lossy.A > 0.0
    assert lossy.R < lossless.R


@settings(max_examples=60, deadline=None)
@given(n_h=st.floats(1.5, 8.0), n_l=st.floats(1.0, 1.4),
       k_h=st.floats(0.0, 1e-2), k_l=st.floats(0.0, 1e-2),
       n_pairs=st.integers(0, 6), lam_rel=st.floats(0.5, 2.0))
def test_energy_identity(n_h, n_l, k_h, k_l, n_pairs, lam_rel):
    st_ = quarter_wave_stack(n_h, k_h, n_l, k_l, 6.633e-3, n_pairs)
    resp = transfer_matrix(st_, lam_rel * 6.633e-3)
    assert 0.0 <= resp.R <= 1.0 + 1e-12
    assert 0.0 <= resp.T <= 1.0 + 1e-12
    assert -1e-12 <= resp.A <= 1.0
    assert resp.R + resp.T + resp.A == pytest.approx(1.0, abs=1e-12)
    if k_h == 0.0 and k_l == 0.0:
        assert resp.A == 0.0


@settings(max_examples=25, deadline=None)
@given(lam_rel=st.floats(0.6, 1.6), k_h=st.floats(0.0, 1e-3))
def test_matches_recursive_fresnel_oracle(lam_rel, k_h):
    st_ = quarter_wave_stack(6.0, k_h, 1.2, 1e-4, 6.633e-3, 5)
    lam = lam_rel * 6.633e-3
    resp = transfer_matrix(st_, lam)
    assert resp.r == pytest.approx(fresnel_recursive(st_, lam), abs=1e-12)


def test_reciprocity_lossless_transmission():
    fwd = StackSpec(layers=(LayerSpec(2.0, 0.0, 1e-3), LayerSpec(3.0, 0.0, 0.4e-3),
                            LayerSpec(1.5, 0.0, 0.8e-3)), n_in=1.0, n_sub=1.0)
    rev = StackSpec(layers=fwd.layers[::-1], n_in=1.0, n_sub=1.0)
    for lam in (4e-3, 6.633e-3, 9e-3):
        assert transfer_matrix(fwd, lam).T == pytest.approx(
            transfer_matrix(rev, lam).T, abs=1e-12)


def test_mirror_loss_rate():
    resp = transfer_matrix(quarter_wave_stack(6.0, 0.0, 1.2, 0.0, 6.633e-3, 0), 6.633e-3)
    perfect = type(resp)(r=-1.0, R=1.0, T=0.0, A=0.0, lam=6.633e-3)
    assert mirror_loss_rate(perfect, 0.01) == 0.0
    partial = type(resp)(r=0, R=0.99964, T=0, A=0, lam=6.633e-3)
    got = mirror_loss_rate(partial, 0.01, 1.0)
    assert got == pytest.approx(C * (1 - 0.99964) / 0.01)
    assert got / (2 * np.pi) == pytest.approx(1.717e6, rel=1e-3)


def test_total_decay():
    omega = 2 * np.pi * 45e9
    assert total_decay(1e5, omega, 0.0) == pytest.approx(omega / 1e5)
    assert total_decay(1e30, omega, 123.0) == pytest.approx(123.0, rel=1e-10)
    got = total_decay(1e5, omega, 2 * np.pi * 1e6)
    assert got / (2 * np.pi) == pytest.approx(1.45e6, rel=1e-2)
