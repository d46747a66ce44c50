"""Multilayer dielectric mirrors via the characteristic-matrix method.

Normal incidence, scalar polarization. Complex index convention
n_tilde = n + i*k_abs with the exp(-i*omega*t) time factor, so k_abs >= 0
is absorbing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT
from .errors import NumericalError, ParameterError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LayerSpec:
    n: float
    k_abs: float
    thickness: float

    def __post_init__(self):
        if self.n <= 0.0:
            raise ParameterError(f"layer index must be positive, got n={self.n}")
        if self.n < 1.0:
            log.warning("layer with sub-unity index n=%g", self.n)
        if self.k_abs < 0.0:
            raise ParameterError("extinction coefficient must be >= 0")
        if self.thickness <= 0.0:
            raise ParameterError("layer thickness must be > 0")

    @property
    def n_complex(self) -> complex:
        return complex(self.n, self.k_abs)


@dataclass(frozen=True)
class StackSpec:
    """Layered mirror, incidence side first."""

    layers: tuple[LayerSpec, ...]
    n_in: float = 1.0
    n_sub: float = 1.0
    lambda0: float = 1.0

    def total_thickness(self) -> float:
        return sum(layer.thickness for layer in self.layers)

    def is_lossless(self) -> bool:
        return all(layer.k_abs == 0.0 for layer in self.layers)

    def is_quarter_wave(self, rel_tol: float = 1e-12) -> bool:
        quarter = self.lambda0 / 4.0
        return all(
            abs(layer.n * layer.thickness - quarter) <= rel_tol * quarter
            for layer in self.layers
        )


@dataclass(frozen=True)
class MirrorResponse:
    r: complex
    R: float
    T: float
    A: float
    lam: float


def quarter_wave_stack(n_h, k_h, n_l, k_l, lambda0, n_pairs, n_sub=1.0, n_in=1.0) -> StackSpec:
    """Quarter-wave mirror with n_pairs high/low pairs plus a terminating
    high-index layer against the substrate (the classic high-R design whose
    on-design reflectivity follows the closed-form Bragg formula).

    n_pairs = 0 gives a bare n_in/n_sub interface.
    """
    if n_h <= n_l:
        raise ParameterError(f"need n_h > n_l for a stopband, got {n_h} <= {n_l}")
    if n_l < 1.0:
        raise ParameterError(f"low index must be >= 1, got {n_l}")
    if n_pairs < 0:
        raise ParameterError("n_pairs must be >= 0")
    high = LayerSpec(n_h, k_h, lambda0 / (4.0 * n_h))
    low = LayerSpec(n_l, k_l, lambda0 / (4.0 * n_l))
    layers: tuple[LayerSpec, ...] = ()
    if n_pairs > 0:
        layers = (high, low) * n_pairs + (high,)
    return StackSpec(layers=layers, n_in=n_in, n_sub=n_sub, lambda0=lambda0)


def transfer_matrix(stack: StackSpec, lam: float) -> MirrorResponse:
    """Complex reflectivity, power transmission and absorption at wavelength lam."""
    if lam <= 0.0:
        raise ParameterError("wavelength must be > 0")
    m = np.eye(2, dtype=complex)
    scale_log = 0.0
    for layer in stack.layers:
        nc = layer.n_complex
        delta = 2.0 * np.pi * nc * layer.thickness / lam
        # relates (E, H) at the incidence face to the exit face; the -i signs
        # belong to the exp(-i omega t) convention with absorbing n + i*k
        ml = np.array(
            [
                [np.cos(delta), -1j * np.sin(delta) / nc],
                [-1j * nc * np.sin(delta), np.cos(delta)],
            ]
        )
        m = m @ ml
        peak = np.max(np.abs(m))
        if peak > 1e100:  # keep the product in range; ratios are unaffected
            m /= peak
            scale_log += np.log(peak)
    if not np.all(np.isfinite(m)):
        raise NumericalError("transfer-matrix product is not finite")

    n_in, n_sub = stack.n_in, stack.n_sub
    b = m[0, 0] + m[0, 1] * n_sub
    c = m[1, 0] + m[1, 1] * n_sub
    denom = n_in * b + c
    r = (n_in * b - c) / denom
    t = 2.0 * n_in / denom * np.exp(-scale_log)
    R = float(abs(r) ** 2)
    T = float(n_sub / n_in * abs(t) ** 2)
    if stack.is_lossless():
        A = 0.0
    else:
        A = float(1.0 - R - T)
    return MirrorResponse(r=complex(r), R=R, T=T, A=A, lam=lam)


def mirror_loss_rate(resp: MirrorResponse, L: float, eta: float = 1.0) -> float:
    """Cavity decay rate (rad/s) from two identical mirrors of reflectivity R:
    per-round-trip fractional loss 2(1-R) over the round-trip time 2*eta*L/c.
    """
    if not 0.0 <= resp.R <= 1.0:
        raise ParameterError(f"reflectivity out of range: {resp.R}")
    return C_LIGHT * (1.0 - resp.R) / (eta * L)


def total_decay(Q_geom: float, omega: float, kappa_mirror: float) -> float:
    """Additive two-channel cavity decay: geometric leakage plus mirror loss."""
    if Q_geom <= 0.0:
        raise ParameterError("Q_geom must be > 0")
    if kappa_mirror < 0.0:
        raise ParameterError("kappa_mirror must be >= 0")
    return omega / Q_geom + kappa_mirror
