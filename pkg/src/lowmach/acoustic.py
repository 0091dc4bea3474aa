"""Acoustic wave group and filtered variables.

A pair (phi, v) of a mean-zero scalar and a vector field evolves under the
linear acoustic generator (phi, v) -> (-div v, -grad phi).  Per Fourier
mode k != 0 only phi_k and the longitudinal amplitude alpha_k = (k/|k|).v_k
couple, through the exact rotation

    phi_k(tau)   =  cos(|k| tau) phi_k(0) - i sin(|k| tau) alpha_k(0)
    alpha_k(tau) = -i sin(|k| tau) phi_k(0) + cos(|k| tau) alpha_k(0),

while the transverse (divergence-free) part and the spatial means are
frozen.  The rotation is unitary, so the group is an isometry in every
Sobolev norm.  Filtering a solution of the scaled dynamics by the inverse
group at tau = t/eps removes the fast oscillation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pressure import density_fluctuation, pressure_potential, renormalized_pressure
from .spectral import (ScalarField, TorusGrid, VectorField, div_hat,
                       fft_forward, fft_inverse, grad_hat, lebesgue_norm,
                       same_grid, sobolev_norm)

MEAN_TOL = 1e-12


@dataclass
class AcousticPair:
    """Scalar/vector pair in the domain of the acoustic group.

    The scalar slot must be mean-zero; any spatial mean is split off at
    construction and carried in phi_mean, which the group leaves invariant.
    """

    phi: ScalarField
    vel: VectorField
    phi_mean: complex = 0.0

    def __post_init__(self):
        same_grid(self.phi, self.vel)
        m = self.phi.mean()
        scale = np.abs(self.phi.values).max() + 1.0
        if abs(m) > MEAN_TOL * scale:
            raise ValueError(
                f"scalar slot has mean {m:.3e}; split it off via from_fields")

    @classmethod
    def from_fields(cls, phi: ScalarField, vel: VectorField) -> "AcousticPair":
        m = phi.mean()
        return cls(ScalarField(phi.grid, phi.values - m), vel, complex(m))

    @property
    def grid(self) -> TorusGrid:
        return self.phi.grid

    @property
    def is_complex(self) -> bool:
        return self.phi.is_complex or self.vel.is_complex

    def copy(self) -> "AcousticPair":
        return AcousticPair(ScalarField(self.grid, self.phi.values.copy()),
                            VectorField(self.grid, self.vel.values.copy()),
                            self.phi_mean)

    def __add__(self, other: "AcousticPair") -> "AcousticPair":
        same_grid(self.phi, other.phi)
        return AcousticPair(
            ScalarField(self.grid, self.phi.values + other.phi.values),
            VectorField(self.grid, self.vel.values + other.vel.values),
            self.phi_mean + other.phi_mean)

    def __sub__(self, other: "AcousticPair") -> "AcousticPair":
        same_grid(self.phi, other.phi)
        return AcousticPair(
            ScalarField(self.grid, self.phi.values - other.phi.values),
            VectorField(self.grid, self.vel.values - other.vel.values),
            self.phi_mean - other.phi_mean)

    def scale(self, a: float) -> "AcousticPair":
        return AcousticPair(ScalarField(self.grid, a * self.phi.values),
                            VectorField(self.grid, a * self.vel.values),
                            a * self.phi_mean)


def pair_norm(pair: AcousticPair, kind: str = "lebesgue", *,
              s: float = 0.0, p: float = 2.0, include_mean: bool = True) -> float:
    """Norm of a pair; the split-off scalar mean is reattached by default."""
    phi = pair.phi
    if include_mean and pair.phi_mean != 0.0:
        phi = ScalarField(pair.grid, pair.phi.values + pair.phi_mean)
    if kind == "sobolev":
        return float(np.sqrt(sobolev_norm(phi, s) ** 2
                             + sobolev_norm(pair.vel, s) ** 2))
    mag = np.sqrt(np.abs(phi.values) ** 2
                  + np.sum(np.abs(pair.vel.values) ** 2, axis=0))
    return lebesgue_norm(ScalarField(pair.grid, mag), p)


def apply_group(pair: AcousticPair, tau: float) -> AcousticPair:
    """Exact application of the acoustic group at time tau (any real)."""
    grid = pair.grid
    phi_hat = fft_forward(grid, pair.phi.values)
    v_hat = fft_forward(grid, pair.vel.values)
    khat = grid.unit_wavevectors
    alpha = np.sum(khat * v_hat, axis=0)
    sol = v_hat - khat * alpha[np.newaxis]
    c = np.cos(grid.wavenumber * tau)
    s = np.sin(grid.wavenumber * tau)
    phi_new = c * phi_hat - 1j * s * alpha
    alpha_new = -1j * s * phi_hat + c * alpha
    v_new = sol + khat * alpha_new[np.newaxis]
    real = not pair.is_complex
    return AcousticPair(
        ScalarField(grid, fft_inverse(grid, phi_new, real=real)),
        VectorField(grid, fft_inverse(grid, v_new, real=real)),
        pair.phi_mean)


def filter_pair(pair: AcousticPair, t: float, eps: float) -> AcousticPair:
    """Undo the fast acoustic oscillation: apply the group at -t/eps."""
    return apply_group(pair, -t / eps)


def _leray_q_hat(grid: TorusGrid, vhat: np.ndarray) -> np.ndarray:
    khat = grid.unit_wavevectors
    amp = np.sum(khat * vhat, axis=0)
    return khat * amp[np.newaxis]


def build_U(state, eps: float) -> AcousticPair:
    """Acoustic pair of the raw variables: density fluctuation and the
    gradient part of the momentum."""
    grid = state.grid
    delta = density_fluctuation(state.rho.values, eps)
    j_hat = fft_forward(grid, state.J.values)
    qj = fft_inverse(grid, _leray_q_hat(grid, j_hat), real=True)
    return AcousticPair.from_fields(ScalarField(grid, delta),
                                    VectorField(grid, qj))


def build_Ubar(state, eps: float, normalized: bool = False) -> AcousticPair:
    """Acoustic pair of the renormalized variables: signed renormalized
    pressure and the gradient part of Lambda = J/sqrt(rho)."""
    grid = state.grid
    psi = renormalized_pressure(state.rho.values, eps, state.gamma, normalized)
    lam_hat = fft_forward(grid, state.Lambda.values)
    ql = fft_inverse(grid, _leray_q_hat(grid, lam_hat), real=True)
    return AcousticPair.from_fields(ScalarField(grid, psi),
                                    VectorField(grid, ql))


def pair_gap_norm(u: AcousticPair, ubar: AcousticPair, gamma: float) -> float:
    """Lebesgue gap between the raw and renormalized pairs with the
    exponent 2 gamma / (gamma + 1) dictated by the pressure growth."""
    p = 2.0 * gamma / (gamma + 1.0)
    return pair_norm(u - ubar, "lebesgue", p=p)


def compute_G(state, sobolev_index: float = 2.0):
    """Source term of the rewritten acoustic system.

    Returns (G, bound) where G collects the gradient-projected convective
    flux, the dispersive flux, and the nonlinear pressure remainder, and
    bound is its Sobolev norm of order -sobolev_index.  The dispersive
    term uses the identity

        div(rho * hessian(log rho)) = grad(lap rho) - div(4 grad(sqrt rho) x grad(sqrt rho)),

    and the pressure remainder is grad of the pressure potential over eps^2,
    both of which are safe to evaluate near constant density.
    """
    grid = state.grid
    n = grid.dimension
    eps, gamma = state.eps, state.gamma
    rho, J, sq = state.rho.values, state.J.values, state.sqrt_rho.values

    grad_sq = fft_inverse(grid, grad_hat(grid, fft_forward(grid, sq)), real=True)
    flux = np.empty((n,) + grid.shape)
    disp = np.empty((n,) + grid.shape)
    for i in range(n):
        conv_i = fft_forward(grid, J[i] * J / rho)            # row J_i J_j / rho
        quant_i = fft_forward(grid, 4.0 * grad_sq[i] * grad_sq)
        flux[i] = fft_inverse(grid, div_hat(grid, conv_i), real=True)
        disp[i] = fft_inverse(grid, div_hat(grid, quant_i), real=True)
    rho_hat = fft_forward(grid, rho)
    grad_lap = fft_inverse(
        grid, grad_hat(grid, div_hat(grid, grad_hat(grid, rho_hat))), real=True)

    body_hat = fft_forward(grid, flux - grad_lap + disp)
    g_hat = -_leray_q_hat(grid, body_hat)
    w_hat = fft_forward(grid, pressure_potential(rho, gamma))
    g_hat -= grad_hat(grid, w_hat) / eps ** 2
    g = VectorField(grid, fft_inverse(grid, g_hat, real=True))
    return g, sobolev_norm(g, -sobolev_index)


@dataclass
class AcousticDiagnostics:
    gap_norm: float
    source_bound: float
    residual_continuity: float
    residual_momentum: float


def mso_residuals(prev, cur, nxt, eps: float, fd_dt: float):
    """Central-difference residuals of the rewritten acoustic system

        eps d/dt delta + div(Q J) = 0,
        eps d/dt (Q J) + grad delta = eps G,

    along three consecutive states spaced fd_dt apart."""
    grid = cur.grid
    d_prev = density_fluctuation(prev.rho.values, eps)
    d_next = density_fluctuation(nxt.rho.values, eps)
    d_cur = density_fluctuation(cur.rho.values, eps)

    def q_of(state):
        return fft_inverse(grid, _leray_q_hat(
            grid, fft_forward(grid, state.J.values)), real=True)

    qj_prev, qj_cur, qj_next = q_of(prev), q_of(cur), q_of(nxt)
    div_qj = fft_inverse(grid, div_hat(grid, fft_forward(grid, qj_cur)), real=True)
    r1 = eps * (d_next - d_prev) / (2.0 * fd_dt) + div_qj
    g, _ = compute_G(cur)
    grad_delta = fft_inverse(grid, grad_hat(grid, fft_forward(grid, d_cur)), real=True)
    r2 = eps * (qj_next - qj_prev) / (2.0 * fd_dt) + grad_delta - eps * g.values
    res1 = lebesgue_norm(ScalarField(grid, r1), 2.0)
    res2 = lebesgue_norm(VectorField(grid, r2), 2.0)
    return res1, res2


def acoustic_diagnostics(prev, cur, nxt, eps: float, fd_dt: float,
                         normalized: bool = False,
                         sobolev_index: float = 2.0) -> AcousticDiagnostics:
    u = build_U(cur, eps)
    ubar = build_Ubar(cur, eps, normalized)
    _, bound = compute_G(cur, sobolev_index)
    r1, r2 = mso_residuals(prev, cur, nxt, eps, fd_dt)
    return AcousticDiagnostics(pair_gap_norm(u, ubar, cur.gamma), bound, r1, r2)
