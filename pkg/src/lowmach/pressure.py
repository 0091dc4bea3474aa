"""Renormalized pressure and density fluctuation helpers.

The renormalized pressure is the signed square root of the relative
internal energy density

    psi = sign(rho - 1) * sqrt((rho^g - 1 - g(rho-1)) / (eps^2 g (g-1))),

which tends to delta/sqrt(2) as rho -> 1 for every g > 1.  Direct
evaluation loses half the significant digits once |rho - 1| is small, so
below 1e-4 a truncated binomial series is used instead; the exact branch
is written with expm1/log1p so the two agree through the crossover.
"""

from __future__ import annotations

import numpy as np

from .errors import VacuumError

SERIES_THRESHOLD = 1e-4
SQRT2 = float(np.sqrt(2.0))


def _check(gamma: float):
    if gamma <= 1.0:
        raise ValueError(f"gamma must exceed 1, got {gamma}")


def pressure_potential(rho: np.ndarray, gamma: float) -> np.ndarray:
    """(rho^g - 1 - g(rho-1)) / g, evaluated without catastrophic cancellation.

    Equals (g-1) * eps^2 * psi^2; its gradient times 1/eps^2 is the nonlinear
    part of the scaled pressure force.
    """
    _check(gamma)
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho <= 0.0):
        raise VacuumError("density must be positive")
    h = rho - 1.0
    exact = (np.expm1(gamma * np.log1p(h)) - gamma * h) / gamma
    series = _series_sum(h, gamma) * (gamma - 1.0)
    return np.where(np.abs(h) < SERIES_THRESHOLD, series, exact)


def _series_sum(h: np.ndarray, gamma: float) -> np.ndarray:
    # (rho^g - 1 - g h) / (g (g-1)) = (h^2/2) * sum_m s_m h^(m-2), s_2 = 1
    total = np.zeros_like(h)
    power = np.ones_like(h)
    s = 1.0
    for m in range(2, 9):
        total = total + s * power
        power = power * h
        s *= (gamma - m) / (m + 1.0)
    return 0.5 * h * h * total


def renormalized_pressure(rho: np.ndarray, eps: float, gamma: float,
                          normalized: bool = False) -> np.ndarray:
    """Signed renormalized pressure field.

    With normalized=True the result carries an extra factor sqrt(2), which
    at gamma = 2 makes it equal the density fluctuation (rho-1)/eps exactly
    and removes the constant offset between the two acoustic variables.
    """
    _check(gamma)
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho <= 0.0):
        raise VacuumError("density must be positive")
    h = rho - 1.0
    exact = (np.expm1(gamma * np.log1p(h)) - gamma * h) / gamma
    arg = np.where(np.abs(h) < SERIES_THRESHOLD,
                   _series_sum(h, gamma),
                   exact / (gamma - 1.0))
    arg = np.maximum(arg, 0.0)  # clip round-off below the convexity bound
    psi = np.sign(h) * np.sqrt(arg) / eps
    return SQRT2 * psi if normalized else psi


def density_fluctuation(rho: np.ndarray, eps: float) -> np.ndarray:
    """(rho - 1)/eps."""
    return (np.asarray(rho, dtype=np.float64) - 1.0) / eps


def psi_limit_constant(normalized: bool) -> float:
    """Constant c with sqrt(rho0) = 1 + (eps/c) * sigma0 making the
    renormalized pressure of the constructed data tend to sigma0."""
    return 2.0 if normalized else SQRT2
