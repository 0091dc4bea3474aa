"""Time integrators for the three dynamical layers.

The scaled quantum hydrodynamic system

    d/dt rho + div J = 0
    d/dt J + div(J x J / rho) + eps^-2 grad(rho^gamma/gamma)
        = div(rho hess(log rho))

is integrated through its wave-function formulation.  With the convention
rho = |psi|^2, J = 2 Im(conj(psi) grad psi), the system above is exactly
the Madelung form of

    i d/dt psi = -lap psi + (|psi|^(2(gamma-1)) - 1) / (2(gamma-1) eps^2) psi,

where the constant -1 is a uniform gauge shift that leaves rho and J
unchanged but removes an O(eps^-2) global phase rotation.  The constants
(the factor 2 in J and the potential scaling) are certified numerically by
qhd_residuals below rather than trusted from the derivation.

The incompressible Euler equations and the filtered oscillation equation
are advanced with classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .acoustic import AcousticPair
from .errors import (NumericalBlowupError, RealizabilityError, StepSizeError,
                     TimeSyncError, VacuumError)
from .pressure import pressure_potential, psi_limit_constant
from .resonance import OscillationProfile, b1_profile, b2_profile, branch_decompose
from .spectral import (ScalarField, TorusGrid, VectorField, dealias, div_hat,
                       divergence, fft_forward, fft_inverse, grad_hat,
                       gradient, lebesgue_norm, leray_decompose, same_grid,
                       sobolev_norm, solve_poisson)

VACUUM_FLOOR = 1e-8

TIME_SYNC_TOL = 1e-12

_DIV_TOL = 1e-10


@dataclass
class WaveFunction:
    """NLS state; psi is complex-valued on the grid."""

    psi: ScalarField
    eps: float
    gamma: float = 2.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.gamma <= 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not np.all(np.isfinite(self.psi.values)):
            raise NumericalBlowupError("non-finite wave function")

    @property
    def grid(self) -> TorusGrid:
        return self.psi.grid

    def mass(self) -> float:
        return float(np.sum(np.abs(self.psi.values) ** 2)
                     * self.grid.cell_volume)


@dataclass
class QhdState:
    """Hydrodynamic variables extracted from a wave function."""

    rho: ScalarField
    J: VectorField
    sqrt_rho: ScalarField
    Lambda: VectorField
    time: float
    eps: float
    gamma: float
    vacuum_mask: np.ndarray | None = None

    @property
    def grid(self) -> TorusGrid:
        return self.rho.grid

    def mass(self) -> float:
        return float(np.sum(self.rho.values) * self.grid.cell_volume)


@dataclass
class EulerState:
    """Incompressible velocity and diagnostic pressure."""

    v: VectorField
    pi: ScalarField
    time: float = 0.0

    def __post_init__(self):
        same_grid(self.v, self.pi)
        grid = self.v.grid
        div = div_hat(grid, fft_forward(grid, self.v.values))
        defect = float(np.sqrt(grid.volume * np.sum(np.abs(div) ** 2)))
        if defect > _DIV_TOL * (1.0 + sobolev_norm(self.v, 1.0)):
            raise RealizabilityError(
                f"velocity is not divergence free (defect {defect:.3e})")

    @property
    def grid(self) -> TorusGrid:
        return self.v.grid

    def kinetic_energy(self) -> float:
        return 0.5 * lebesgue_norm(self.v, 2.0) ** 2


@dataclass
class InitialDataSpec:
    """Target limit data (sigma0, vtilde0) plus the Mach number.

    second_order_density optionally adds an O(eps^2) ripple to sqrt(rho0);
    it perturbs none of the limit objects but gives the prepared state a
    nontrivial eps-dependent pressure component.
    """

    sigma0: ScalarField
    vtilde0: VectorField
    preparation: str
    eps: float
    smoothness: float = 3.0
    second_order_density: ScalarField | None = None

    def __post_init__(self):
        same_grid(self.sigma0, self.vtilde0)
        if self.preparation not in ("well", "ill"):
            raise ValueError(
                f"preparation must be 'well' or 'ill', got {self.preparation!r}")
        if self.eps <= 0 or self.eps > 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        n = self.sigma0.grid.dimension
        if self.smoothness < n / 2 + 1:
            raise ValueError("smoothness below n/2 + 1")
        if self.preparation == "well":
            scal = float(np.abs(self.sigma0.values).max(initial=0.0))
            _, q = leray_decompose(self.vtilde0)
            if scal > 1e-12 or lebesgue_norm(q, 2.0) > 1e-10:
                raise ValueError(
                    "well-prepared data requires sigma0 = 0 and Q(vtilde0) = 0")


def build_initial_data(spec: InitialDataSpec, gamma: float = 2.0,
                       psi_normalization: str = "raw",
                       vacuum_floor: float = VACUUM_FLOOR):
    """Construct the synchronized initial states of the three layers.

    sqrt(rho0) = 1 + (eps/c) sigma0 with c the normalization constant of
    the renormalized pressure, so the signed pressure converges to sigma0;
    the phase solves grad(S0) = vtilde0, which restricts vtilde0 to a
    gradient plus a quantized constant mean (each mean component must be an
    even integer so that exp(i S0 / 2) is single-valued on the torus).
    Divergence-free content beyond the mean is not realizable by a phase
    and is rejected.

    Returns (WaveFunction, EulerState, OscillationProfile).
    """
    grid = spec.sigma0.grid
    eps = spec.eps
    c = psi_limit_constant(psi_normalization == "normalized")

    mean = spec.vtilde0.mean()
    half = mean / 2.0
    if np.max(np.abs(half - np.round(half))) > 1e-9:
        raise RealizabilityError(
            f"mean velocity {mean} is not phase-realizable; components "
            "must be even integers")
    mean = 2.0 * np.round(half)
    fluct = VectorField(grid, spec.vtilde0.values
                        - mean.reshape((-1,) + (1,) * grid.dimension))
    sol, grad_part = leray_decompose(fluct)
    if lebesgue_norm(sol, 2.0) > 1e-10 * (1.0 + lebesgue_norm(fluct, 2.0)):
        raise RealizabilityError(
            "vtilde0 carries mean-free solenoidal content, which no "
            "single-valued phase can produce")

    # S0 with grad S0 = Q(vtilde0); the mean enters as a winding phase
    s0 = solve_poisson(divergence(fluct))
    phase = 0.5 * s0.values
    for j in range(grid.dimension):
        phase = phase + 0.5 * mean[j] * grid.coordinates[j]

    amp = 1.0 + (eps / c) * spec.sigma0.values
    if spec.second_order_density is not None:
        amp = amp + eps ** 2 * spec.second_order_density.values
    if amp.min() <= vacuum_floor:
        raise VacuumError(
            f"sqrt(rho0) reaches {amp.min():.3e}, below the vacuum floor")

    psi = dealias(ScalarField(grid, amp * np.exp(1j * phase)))
    wave = WaveFunction(psi, eps, gamma)

    v0 = VectorField(grid, np.broadcast_to(
        mean.reshape((-1,) + (1,) * grid.dimension),
        (grid.dimension,) + grid.shape).copy())
    euler = EulerState(v0, ScalarField(grid, np.zeros(grid.shape)), 0.0)

    pair = AcousticPair.from_fields(spec.sigma0, grad_part)
    prof, _, _ = branch_decompose(pair)
    prof.time = 0.0
    return wave, euler, prof


# NLS integration ----------------------------------------------------------

def nls_dt_default(grid: TorusGrid, eps: float, gamma: float) -> float:
    """Splitting-error guard: both substeps are exact, so this only keeps
    the Strang commutator error small against the stiff potential phase."""
    dx = 2.0 * np.pi / grid.resolution
    return min(0.5 * dx * dx, 0.5 * (gamma - 1.0) * eps * eps)


def _potential_phase(values: np.ndarray, eps: float, gamma: float,
                     dt: float) -> np.ndarray:
    rho = np.abs(values) ** 2
    pot = np.expm1((gamma - 1.0) * np.log(rho, where=rho > 0,
                                          out=np.full_like(rho, -np.inf)))
    pot /= 2.0 * (gamma - 1.0) * eps * eps
    return values * np.exp(-1j * dt * pot)


def nls_step(w: WaveFunction, dt: float) -> WaveFunction:
    """One Strang step: half potential phase, full kinetic multiplier,
    half potential phase, then restriction to the dealias band.  Mass is
    conserved exactly by each substep; the Hamiltonian to O(dt^2)."""
    if dt <= 0:
        raise StepSizeError(f"dt must be positive, got {dt}")
    bound = 4.0 * nls_dt_default(w.grid, w.eps, w.gamma)
    if dt > bound:
        raise StepSizeError(f"dt = {dt:.3e} exceeds the splitting bound "
                            f"{bound:.3e}")
    grid = w.grid
    vals = _potential_phase(w.psi.values, w.eps, w.gamma, 0.5 * dt)
    kin = np.exp(-1j * dt * grid.wavenumber_sq)
    vals = fft_inverse(grid, kin * fft_forward(grid, vals))
    vals = _potential_phase(vals, w.eps, w.gamma, 0.5 * dt)
    vals = fft_inverse(grid, fft_forward(grid, vals) * grid.dealias_mask)
    if not np.all(np.isfinite(vals)):
        raise NumericalBlowupError("NLS step produced non-finite values")
    return WaveFunction(ScalarField(grid, vals), w.eps, w.gamma)


def madelung(w: WaveFunction, time: float = 0.0,
             vacuum_floor: float = VACUUM_FLOOR) -> QhdState:
    """Hydrodynamic variables: rho = |psi|^2, J = 2 Im(conj(psi) grad psi),
    Lambda = J / max(sqrt(rho), floor).  Vacuum cells are flagged, not
    modified; the studied regime stays near rho = 1."""
    grid = w.grid
    rho = np.abs(w.psi.values) ** 2
    grad_psi = gradient(w.psi)
    j = 2.0 * np.imag(np.conj(w.psi.values)[np.newaxis] * grad_psi.values)
    sq = np.sqrt(rho)
    mask = sq < vacuum_floor
    lam = j / np.maximum(sq, vacuum_floor)[np.newaxis]
    return QhdState(ScalarField(grid, rho), VectorField(grid, j),
                    ScalarField(grid, sq), VectorField(grid, lam),
                    time, w.eps, w.gamma,
                    vacuum_mask=mask if mask.any() else None)


def nls_hamiltonian(w: WaveFunction) -> float:
    """Conserved functional int |grad psi|^2 + pressure_potential /
    (2(gamma-1) eps^2); equals int(|Lambda|^2/4 + Psi^2/2 + |grad sqrt rho|^2)."""
    grid = w.grid
    rho = np.abs(w.psi.values) ** 2
    gp = gradient(w.psi)
    kin = np.sum(np.abs(gp.values) ** 2, axis=0)
    pot = pressure_potential(rho, w.gamma) \
        / (2.0 * (w.gamma - 1.0) * w.eps ** 2)
    return float(np.sum(kin + pot) * grid.cell_volume)


# Euler integration --------------------------------------------------------

def euler_dt_default(e: EulerState, cfl: float = 0.5) -> float:
    dx = 2.0 * np.pi / e.grid.resolution
    vmax = float(np.sqrt(np.sum(e.v.values ** 2, axis=0)).max())
    return cfl * dx / max(vmax, 1e-12)


def _euler_rhs(grid: TorusGrid, v: np.ndarray) -> np.ndarray:
    n = grid.dimension
    div_t = np.empty((n,) + grid.shape, dtype=complex)
    for i in range(n):
        div_t[i] = div_hat(grid, fft_forward(grid, v[i] * v))
    khat = grid.unit_wavevectors
    amp = np.sum(khat * div_t, axis=0)
    proj = (div_t - khat * amp[np.newaxis]) * grid.dealias_mask[np.newaxis]
    return -fft_inverse(grid, proj, real=True)


def euler_pressure(grid: TorusGrid, v: np.ndarray) -> np.ndarray:
    """Diagnostic pressure with grad(pi) = -Q div(v x v), mean zero."""
    n = grid.dimension
    div_t = np.empty((n,) + grid.shape, dtype=complex)
    for i in range(n):
        div_t[i] = div_hat(grid, fft_forward(grid, v[i] * v))
    ddt = np.sum(grid.derivative_multiplier * div_t, axis=0)
    pi_hat = ddt * grid.inverse_wavenumber_sq * grid.dealias_mask
    return fft_inverse(grid, pi_hat, real=True)


def euler_step(e: EulerState, dt: float, cfl: float = 0.5) -> EulerState:
    """Classical RK4 on d/dt v = -P div(v x v) with per-stage dealiasing."""
    if dt <= 0:
        raise StepSizeError(f"dt must be positive, got {dt}")
    bound = euler_dt_default(e, cfl)
    if dt > bound:
        raise StepSizeError(
            f"dt = {dt:.3e} exceeds the CFL bound {bound:.3e}")
    grid = e.grid
    v = e.v.values
    k1 = _euler_rhs(grid, v)
    k2 = _euler_rhs(grid, v + 0.5 * dt * k1)
    k3 = _euler_rhs(grid, v + 0.5 * dt * k2)
    k4 = _euler_rhs(grid, v + dt * k3)
    vn = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(vn)):
        raise NumericalBlowupError("Euler step produced non-finite values")
    pi = euler_pressure(grid, vn)
    return EulerState(VectorField(grid, vn), ScalarField(grid, pi),
                      e.time + dt)


# limit oscillation equation -----------------------------------------------

def limit_dt_default(V: OscillationProfile, e: EulerState,
                     cfl: float = 0.5) -> float:
    """Heuristic bound from the size of the bilinear forms on the band."""
    scale = e.grid.band_limit * math.sqrt(e.grid.dimension) \
        * (float(np.sqrt(np.sum(e.v.values ** 2, axis=0)).max()) + V.norm())
    return cfl / max(scale, 1e-12)


def limit_step(V: OscillationProfile, e: EulerState, dt: float,
               gamma: float = 2.0) -> OscillationProfile:
    """RK4 step of d/dt V + B1(v, V) + B2(V, V) = 0 with v held fixed from
    the synchronized Euler state (exact whenever v is steady, as for
    phase-realizable initial data).  The pair norm is conserved to O(dt^4)
    per step by the cancellation identities of both forms."""
    if abs(V.time - e.time) > TIME_SYNC_TOL:
        raise TimeSyncError(
            f"oscillation profile at t = {V.time} but Euler state at "
            f"t = {e.time}")
    if dt <= 0:
        raise StepSizeError(f"dt must be positive, got {dt}")
    v = e.v

    def rhs(p: OscillationProfile) -> OscillationProfile:
        return (b1_profile(v, p) + b2_profile(p, p, gamma)).scale(-1.0)

    k1 = rhs(V)
    k2 = rhs(V + k1.scale(0.5 * dt))
    k3 = rhs(V + k2.scale(0.5 * dt))
    k4 = rhs(V + k3.scale(dt))
    out = V + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0)
    if not (np.all(np.isfinite(out.plus)) and np.all(np.isfinite(out.minus))):
        raise NumericalBlowupError("limit step produced non-finite values")
    out.time = V.time + dt
    return out


# residual certification ---------------------------------------------------

def qhd_residuals(prev: QhdState, cur: QhdState, nxt: QhdState,
                  fd_dt: float):
    """L2 residuals of both equations of the scaled system along three
    consecutive states, with the time derivative by central differences.

    The right side is evaluated on an independent route: the convective
    flux and the pressure gradient directly, and the dispersive term as
    div(rho hess(log rho)) through the spectral Hessian of log rho.  The
    residuals certify the wave-function constants (the factor 2 in J and
    the potential scaling), decreasing at O(dt^2) along solver output.
    """
    grid = cur.grid
    n = grid.dimension
    eps, gamma = cur.eps, cur.gamma
    rho, j = cur.rho.values, cur.J.values

    r1 = (nxt.rho.values - prev.rho.values) / (2.0 * fd_dt) \
        + fft_inverse(grid, div_hat(grid, fft_forward(grid, j)), real=True)

    log_rho = np.log(rho)
    log_hat = fft_forward(grid, log_rho)
    hess = np.empty((n, n) + grid.shape)
    ik = grid.derivative_multiplier
    for a in range(n):
        for b in range(n):
            hess[a, b] = fft_inverse(grid, ik[a] * ik[b] * log_hat, real=True)
    r2 = (nxt.J.values - prev.J.values) / (2.0 * fd_dt)
    p_hat = fft_forward(grid, rho ** gamma / gamma)
    pressure = fft_inverse(grid, grad_hat(grid, p_hat), real=True) / eps ** 2
    for i in range(n):
        conv = fft_inverse(grid, div_hat(
            grid, fft_forward(grid, j[i] * j / rho)), real=True)
        quant = fft_inverse(grid, div_hat(
            grid, fft_forward(grid, rho * hess[i])), real=True)
        r2[i] += conv + pressure[i] - quant

    res1 = lebesgue_norm(ScalarField(grid, r1), 2.0)
    res2 = lebesgue_norm(VectorField(grid, r2), 2.0)
    return res1, res2
