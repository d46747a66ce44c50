"""Dissipative Jaynes-Cummings system on the truncated Fock x qubit basis.

Basis ordering |n> x {|g>,|e>} with flat index 2n + s (s = 0 ground,
1 excited). All rates are angular (rad/s). The driven Hamiltonian lives in
the frame rotating at the drive frequency, with equal detuning
Delta = omega_a - omega_d for cavity and atom (resonant case).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .constants import C_LIGHT
from .errors import (ConvergenceError, DimensionError, FitError,
                     SingularLiouvillian, StepFailure, TruncationWarning,
                     VacuumError)


@dataclass(frozen=True)
class QedParams:
    omega_a: float
    omega_sigma: float
    g: float
    kappa: float
    gamma: float
    Omega: float = 0.0
    delta: float = 0.0
    n_max: int = 10

    def validate(self):
        if self.kappa < 0.0 or self.gamma < 0.0:
            raise ValueError("decay rates must be >= 0")
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)


@dataclass
class DensityState:
    rho: np.ndarray
    t: float


@dataclass
class ObservableSeries:
    times: np.ndarray
    p_0e: np.ndarray
    p_1g: np.ndarray
    n_a: np.ndarray


def basis_index(n: int, excited: bool) -> int:
    return 2 * n + (1 if excited else 0)


def operators(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation operator a and atomic lowering operator sigma on the
    product basis; a|n_max+1> is truncated away."""
    a_fock = np.diag(np.sqrt(np.arange(1.0, n_max + 1)), 1)
    a = np.kron(a_fock, np.eye(2))
    sigma = np.kron(np.eye(n_max + 1), np.array([[0.0, 1.0], [0.0, 0.0]]))
    return a, sigma


def fock_qubit_state(n: int, excited: bool, n_max: int) -> DensityState:
    dim = 2 * (n_max + 1)
    rho = np.zeros((dim, dim), dtype=complex)
    rho[basis_index(n, excited), basis_index(n, excited)] = 1.0
    return DensityState(rho=rho, t=0.0)


def coherent_density(alpha: complex, n_max: int) -> DensityState:
    """Coherent state (truncated, renormalized) with the atom in |g>."""
    n = np.arange(n_max + 1)
    amps = np.exp(-abs(alpha) ** 2 / 2.0) * alpha**n / np.sqrt(
        np.array([math.factorial(int(k)) for k in n], dtype=float))
    amps /= np.linalg.norm(amps)
    psi = np.kron(amps, [1.0, 0.0])
    return DensityState(rho=np.outer(psi, psi.conj()), t=0.0)


def thermal_density(nbar: float, n_max: int) -> DensityState:
    n = np.arange(n_max + 1)
    p = (nbar / (1.0 + nbar)) ** n / (1.0 + nbar)
    p /= p.sum()
    rho_f = np.diag(p.astype(complex))
    rho = np.kron(rho_f, np.diag([1.0, 0.0]))
    return DensityState(rho=rho, t=0.0)


def hamiltonian(p: QedParams) -> np.ndarray:
    """Jaynes-Cummings Hamiltonian; the driven form (Omega > 0) uses the
    rotating frame with detuning delta for cavity and atom."""
    p.validate()
    a, sm = operators(p.n_max)
    exchange = p.g * (a.conj().T @ sm + a @ sm.conj().T)
    if p.Omega > 0.0:
        h = (p.delta * (a.conj().T @ a) + p.delta * (sm.conj().T @ sm)
             + exchange + p.Omega * (a.conj().T + a))
    else:
        h = (p.omega_a * (a.conj().T @ a) + p.omega_sigma * (sm.conj().T @ sm)
             + exchange)
    return h


def _dissipator(o: np.ndarray, rho: np.ndarray) -> np.ndarray:
    od = o.conj().T
    odo = od @ o
    return o @ rho @ od - 0.5 * (odo @ rho + rho @ odo)


def lindblad_rhs(state: DensityState, p: QedParams) -> np.ndarray:
    """drho/dt = -i[H, rho] + kappa L[a] rho + gamma L[sigma] rho."""
    rho = state.rho
    if rho.shape != (p.dim, p.dim):
        raise DimensionError(f"rho shape {rho.shape} does not match n_max={p.n_max}")
    h = hamiltonian(p)
    a, sm = operators(p.n_max)
    out = -1j * (h @ rho - rho @ h)
    if p.kappa > 0.0:
        out += p.kappa * _dissipator(a, rho)
    if p.gamma > 0.0:
        out += p.gamma * _dissipator(sm, rho)
    return out


def _observables(rho: np.ndarray, n_max: int):
    diag = np.diagonal(rho).real
    n_weights = np.repeat(np.arange(n_max + 1), 2)
    return (diag[basis_index(0, True)], diag[basis_index(1, False)],
            float(n_weights @ diag))


def evolve(rho0: DensityState, t_end: float, p: QedParams,
           rel_tol: float = 1e-8) -> ObservableSeries:
    """Adaptive integration of the master equation, sampled densely enough to
    resolve the Rabi period (at least 40 samples per 2*pi/g)."""
    p.validate()
    if not 1e-12 <= rel_tol <= 1e-4:
        raise ValueError("rel_tol must be in [1e-12, 1e-4]")
    if rho0.rho.shape != (p.dim, p.dim):
        raise DimensionError("rho0 does not match n_max")

    h = hamiltonian(p)
    a, sm = operators(p.n_max)
    kappa, gamma = p.kappa, p.gamma

    def rhs(_t, y):
        rho = y.reshape(p.dim, p.dim)
        out = -1j * (h @ rho - rho @ h)
        if kappa > 0.0:
            out += kappa * _dissipator(a, rho)
        if gamma > 0.0:
            out += gamma * _dissipator(sm, rho)
        return out.ravel()

    n_samples = 200
    if p.g > 0.0:
        n_samples = max(n_samples, int(math.ceil(40.0 * t_end * p.g / (2.0 * math.pi))) + 1)
    t_eval = np.linspace(0.0, t_end, n_samples)

    sol = solve_ivp(rhs, (0.0, t_end), rho0.rho.ravel().astype(complex),
                    method="DOP853", t_eval=t_eval, rtol=rel_tol,
                    atol=rel_tol * 1e-2)
    if not sol.success:
        raise StepFailure(f"integrator failed: {sol.message}")

    frames = sol.y.T.reshape(-1, p.dim, p.dim)
    obs = np.array([_observables(r, p.n_max) for r in frames])

    top = frames[:, basis_index(p.n_max, False), basis_index(p.n_max, False)].real
    top = top + frames[:, basis_index(p.n_max, True), basis_index(p.n_max, True)].real
    if top.max() > 1e-6:
        warnings.warn(TruncationWarning(
            f"population {top.max():.2e} reached the n_max={p.n_max} cutoff"))

    final = frames[-1]
    if abs(np.trace(final).real - 1.0) > 1e-9 or abs(np.trace(final).imag) > 1e-9:
        raise StepFailure(f"trace drifted to {np.trace(final):g}")

    return ObservableSeries(times=sol.t, p_0e=obs[:, 0], p_1g=obs[:, 1],
                            n_a=obs[:, 2])


def evolve_to(rho0: DensityState, t: float, p: QedParams,
              rel_tol: float = 1e-8) -> DensityState:
    """Final density matrix after integrating to time t."""
    p.validate()
    if not 1e-12 <= rel_tol <= 1e-4:
        raise ValueError("rel_tol must be in [1e-12, 1e-4]")
    h = hamiltonian(p)
    a, sm = operators(p.n_max)

    def rhs(_t, y):
        rho = y.reshape(p.dim, p.dim)
        out = -1j * (h @ rho - rho @ h)
        if p.kappa > 0.0:
            out += p.kappa * _dissipator(a, rho)
        if p.gamma > 0.0:
            out += p.gamma * _dissipator(sm, rho)
        return out.ravel()

    sol = solve_ivp(rhs, (0.0, t), rho0.rho.ravel().astype(complex),
                    method="DOP853", rtol=rel_tol, atol=rel_tol * 1e-2)
    if not sol.success:
        raise StepFailure(f"integrator failed: {sol.message}")
    rho = sol.y[:, -1].reshape(p.dim, p.dim)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityState(rho=rho, t=t)


def t2_decoherence(series: ObservableSeries) -> float:
    """Time for the fitted oscillation envelope of p_1g to decay to 1/e of its
    initial value. Peak heights above the local one-period mean feed a
    log-linear fit; returns inf when no decay is resolvable."""
    p = series.p_1g
    t = series.times
    inner = slice(1, -1)
    is_max = (p[1:-1] > p[:-2]) & (p[1:-1] >= p[2:])
    is_min = (p[1:-1] < p[:-2]) & (p[1:-1] <= p[2:])
    n_extrema = int(is_max.sum() + is_min.sum())
    if n_extrema < 10:
        raise ValueError(f"need >= 10 oscillation extrema, found {n_extrema}")

    peak_ix = np.flatnonzero(is_max) + 1
    period = float(np.median(np.diff(t[peak_ix])))
    half = max(1, int(round(period / 2.0 / (t[1] - t[0]))))
    amps, times = [], []
    for ix in peak_ix:
        lo, hi = max(0, ix - half), min(len(p), ix + half + 1)
        amp = p[ix] - p[lo:hi].mean()
        if amp > 0.0:
            amps.append(amp)
            times.append(t[ix])
    if len(amps) < 3:
        raise FitError("too few usable peaks for an envelope fit")

    amps = np.log(np.array(amps))
    times = np.array(times)
    slope, intercept = np.polyfit(times, amps, 1)
    fitted = slope * times + intercept
    ss_res = float(((amps - fitted) ** 2).sum())
    ss_tot = float(((amps - amps.mean()) ** 2).sum())
    if ss_tot < 1e-20:
        return math.inf  # flat envelope, no decay
    r2 = 1.0 - ss_res / ss_tot
    if r2 < 0.95:
        raise FitError(f"envelope fit R^2 = {r2:.3f} < 0.95")
    rate = -slope
    if rate <= 0.0 or rate * (t[-1] - t[0]) < 1e-9:
        return math.inf
    return 1.0 / rate


def _liouvillian(p: QedParams) -> np.ndarray:
    """Superoperator on row-major vec(rho): vec(A rho B) = kron(A, B.T) vec(rho)."""
    h = hamiltonian(p)
    a, sm = operators(p.n_max)
    eye = np.eye(p.dim)
    liou = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, o in ((p.kappa, a), (p.gamma, sm)):
        if rate > 0.0:
            odo = o.conj().T @ o
            liou += rate * (np.kron(o, o.conj())
                            - 0.5 * (np.kron(odo, eye) + np.kron(eye, odo.T)))
    return liou


def steady_state(p: QedParams, residual_tol: float = 1e-10) -> DensityState:
    """Steady state from the vectorized Liouvillian with one row replaced by
    the trace condition. The residual is measured on the Liouvillian scaled by
    its largest entry. Requires a drive or cavity decay so the null space is
    one-dimensional."""
    p.validate()
    if p.Omega == 0.0 and p.kappa == 0.0:
        raise SingularLiouvillian("undriven lossless system has no unique steady state")
    liou = _liouvillian(p)
    scale = max(np.abs(liou).max(), 1.0)
    ls = liou / scale

    dim = p.dim
    mat = ls.copy()
    mat[0, :] = 0.0
    mat[0, np.arange(dim) * dim + np.arange(dim)] = 1.0
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = 1.0

    lu, piv = sla.lu_factor(mat)
    rcond = _rcond(mat, lu, piv)
    if rcond < 1e-8:
        # suspicious: check the Liouvillian null-space dimension directly
        svals = np.linalg.svd(ls, compute_uv=False)
        n_null = int((svals <= 1e-8 * svals[0]).sum())
        if n_null != 1:
            raise SingularLiouvillian(
                f"null space dimension {n_null} at tolerance 1e-8")
    vec = sla.lu_solve((lu, piv), rhs)

    res = float(np.linalg.norm(ls @ vec) / np.linalg.norm(vec))
    if res > residual_tol:
        raise SingularLiouvillian(f"steady-state residual {res:.2e} > {residual_tol:g}")

    rho = vec.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return DensityState(rho=rho, t=math.inf)


def _rcond(mat, lu, piv) -> float:
    anorm = np.abs(mat).sum(axis=0).max()
    gecon = sla.get_lapack_funcs("gecon", (lu,))
    rcond, _info = gecon(lu, anorm, norm="1")
    return float(rcond)


def g2_zero(state: DensityState) -> float:
    """Zero-delay second-order correlation <adag adag a a> / <adag a>^2."""
    rho = state.rho
    dim = rho.shape[0]
    n_max = dim // 2 - 1
    n = np.repeat(np.arange(n_max + 1), 2)
    diag = np.diagonal(rho).real
    mean_n = float(n @ diag)
    if mean_n <= 1e-12:
        raise VacuumError(f"mean photon number {mean_n:.2e} below threshold")
    pair = float((n * (n - 1)) @ diag)
    return pair / mean_n**2


def mean_photon(state: DensityState) -> float:
    rho = state.rho
    n_max = rho.shape[0] // 2 - 1
    n = np.repeat(np.arange(n_max + 1), 2)
    return float(n @ np.diagonal(rho).real)


def blockade_spectrum(p_base: QedParams, delta_grid,
                      g2_rel_tol: float = 0.01,
                      n_max_cap: int = 40) -> list[tuple[float, float, float]]:
    """(Delta/gamma, g2(0), n_a) in the driven steady state at each detuning.
    The Fock cutoff is raised in steps of 2 until g2(0) moves by less than
    g2_rel_tol between consecutive cutoffs."""
    p_base.validate()
    if p_base.Omega <= 0.0:
        raise ValueError("blockade spectrum needs a drive (Omega > 0)")
    rows = []
    for delta in np.atleast_1d(delta_grid):
        n_fock = p_base.n_max
        prev = None
        while True:
            pt = replace(p_base, delta=float(delta), n_max=n_fock)
            ss = steady_state(pt)
            g2 = g2_zero(ss)
            na = mean_photon(ss)
            if prev is not None and abs(g2 - prev) <= g2_rel_tol * max(abs(prev), 1e-12):
                break
            prev = g2
            n_fock += 2
            if n_fock > n_max_cap:
                raise ConvergenceError(
                    f"g2(0) not converged in n_max at Delta/gamma={delta / p_base.gamma:.1f}")
        rows.append((float(delta / p_base.gamma), g2, na))
    return rows


def trace_distance(a: DensityState, b: DensityState) -> float:
    diff = a.rho - b.rho
    return float(0.5 * np.linalg.svd(diff, compute_uv=False).sum())


def purity(state: DensityState) -> float:
    return float(np.trace(state.rho @ state.rho).real)


def atomic_interaction_volume(gamma: float, omega_sigma: float) -> float:
    """Characteristic interaction volume 3 pi c^3 / (gamma omega_sigma^2)."""
    if gamma <= 0.0 or omega_sigma <= 0.0:
        raise ValueError("gamma and omega_sigma must be > 0")
    return 3.0 * math.pi * C_LIGHT**3 / (gamma * omega_sigma**2)


def coupling_from_mode(V: float, gamma: float, omega_sigma: float) -> float:
    """Coupling rate g = gamma * sqrt(Va / V) for an atom at the field maximum."""
    if V <= 0.0:
        raise ValueError("mode volume must be > 0")
    return gamma * math.sqrt(atomic_interaction_volume(gamma, omega_sigma) / V)


def cooperativity(g: float, kappa: float, gamma: float) -> float:
    if kappa <= 0.0 or gamma <= 0.0:
        raise ValueError("kappa and gamma must be > 0")
    return g**2 / (kappa * gamma)


def effective_nonlinearity(p: QedParams, level: int = 1) -> complex:
    """N_eff = alpha/beta with alpha = sqrt((kappa-gamma)^2 - 16 l g^2)
    (principal branch) and beta = (2l-1) kappa + gamma."""
    if level < 1:
        raise ValueError("ladder level must be >= 1")
    beta = (2 * level - 1) * p.kappa + p.gamma
    if beta == 0.0:
        raise ValueError("beta = 0: nonlinearity undefined")
    alpha = np.sqrt(complex((p.kappa - p.gamma) ** 2 - 16.0 * level * p.g**2))
    return complex(alpha / beta)


def ladder_frequencies(p: QedParams, level: int = 1) -> tuple[complex, complex]:
    """Effective eigenfrequencies l*omega_a - i beta/4 +- i alpha/4 of the
    l-th rung of the dissipative ladder."""
    beta = (2 * level - 1) * p.kappa + p.gamma
    alpha = np.sqrt(complex((p.kappa - p.gamma) ** 2 - 16.0 * level * p.g**2))
    base = level * p.omega_a - 1j * beta / 4.0
    return complex(base + 1j * alpha / 4.0), complex(base - 1j * alpha / 4.0)
