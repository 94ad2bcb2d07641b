"""
MSE-optimal SoS coefficient magnitudes.

With white noise of variance ``sigma2`` added to ``N`` samples and the kernel
energy fixed to ``sum_i |b_i|^2 = 1``, the error of the linear MMSE estimate of
the Fourier coefficients is

    sum_i q_i / (1 + beta_i q_i N / sigma2),   q_i = |h~_i|^2,

with ``beta_i = |b_i|^2`` and ``h~_k = H(2 pi k / tau) sigma_a sqrt(L) / tau``.
The minimiser is a waterfilling allocation: sorting ``|h~|`` increasingly, the
indices below some ``m`` get ``beta = 0`` and the rest share the budget
according to a closed form in the Lagrange multiplier ``lambda``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SosFriError, WaterfillingError
from .signal import PulseShape, ctft_pulse


@dataclass(frozen=True)
class WaterfillingSolution:
    """Optimal energy split ``beta`` (in index-set order) and its multiplier."""

    ks: np.ndarray
    beta: np.ndarray
    lam: float
    n_inactive: int
    h_tilde: np.ndarray
    gain: float  # N / sigma2

    @property
    def b(self) -> np.ndarray:
        """Zero-phase coefficients ``b_k = sqrt(beta_k)``."""
        return np.sqrt(self.beta)

    def objective(self) -> float:
        return mse_objective(self.beta, self.h_tilde, self.gain)


def mse_objective(beta, h_tilde, gain: float) -> float:
    """``sum_i q_i / (1 + beta_i q_i gain)`` with ``q_i = |h~_i|^2``."""
    q = np.abs(np.asarray(h_tilde)) ** 2
    return float(np.sum(q / (1 + np.asarray(beta) * q * gain)))


def effective_gains(shape: PulseShape, tau: float, ks, L: int, sigma_a2: float) -> np.ndarray:
    """``h~_k = H(2 pi k / tau) sigma_a sqrt(L) / tau``."""
    ks = np.asarray(ks)
    return ctft_pulse(shape, 2 * np.pi * ks / tau) * np.sqrt(sigma_a2 * L) / tau


def waterfill(h_tilde, noise_var: float, N: int, ks=None) -> WaterfillingSolution:
    """Closed-form waterfilling over the gains ``h_tilde``.

    The active set is found by scanning the number ``m`` of switched-off
    indices upward; for each candidate the multiplier is

        sqrt(lambda) = (M - m) sqrt(g) / (g + sum_{i > m} 1 / q_i),   g = N / noise_var,

    and the first ``m`` whose ``lambda`` lies in ``(q_m^2 g, q_{m+1}^2 g]``
    (with ``q_0 = 0``) is the unique solution.
    """
    h_tilde = np.asarray(h_tilde, dtype=complex)
    M = len(h_tilde)
    if ks is None:
        ks = np.arange(M)
    if not noise_var > 0 or N < 1:
        raise SosFriError("noise variance must be positive and N >= 1")
    mag = np.abs(h_tilde)
    if np.any(mag == 0):
        raise SosFriError("all gains must be nonzero")
    gain = N / noise_var
    order = np.argsort(mag, kind="stable")
    q = mag[order] ** 2

    if np.all(mag == mag[0]):
        beta = np.full(M, 1.0 / M)
        sqrt_lam = M * np.sqrt(gain) / (gain + M / q[0])
        return WaterfillingSolution(np.asarray(ks), beta, sqrt_lam**2, 0, h_tilde, gain)

    inv_tail = np.cumsum((1.0 / q)[::-1])[::-1]  # sum_{i >= m} 1/q_i (0-based)
    for m in range(M):
        sqrt_lam = (M - m) * np.sqrt(gain) / (gain + inv_tail[m])
        lam = sqrt_lam**2
        upper = q[m] ** 2 * gain
        lower = q[m - 1] ** 2 * gain if m > 0 else 0.0
        if lower < lam <= upper * (1 + 1e-12):
            break
    else:
        raise WaterfillingError("no active set satisfies its own multiplier bounds")

    beta_sorted = np.zeros(M)
    beta_sorted[m:] = (np.sqrt(gain) / sqrt_lam - 1.0 / q[m:]) / gain
    beta_sorted[m:] = np.maximum(beta_sorted[m:], 0.0)
    beta_sorted /= beta_sorted.sum()
    beta = np.empty(M)
    beta[order] = beta_sorted
    return WaterfillingSolution(np.asarray(ks), beta, lam, m, h_tilde, gain)


def optimal_coefficients(
    shape: PulseShape,
    tau: float,
    ks,
    L: int,
    sigma_a2: float,
    noise_var: float,
    N: int,
) -> WaterfillingSolution:
    """Energy split ``|b_k|^2`` minimising the linear-estimator MSE.

    Parameters
    ----------
    shape : PulseShape
        Known pulse; ``H(2 pi k / tau)`` must be nonzero on ``ks``.
    tau : float
        Period / window length.
    ks : array_like
        Index set.
    L : int
        Number of pulses.
    sigma_a2 : float
        Variance of the (uncorrelated) amplitudes.
    noise_var : float
        Variance of the white noise added to each sample.
    N : int
        Number of samples.
    """
    h = effective_gains(shape, tau, ks, L, sigma_a2)
    return waterfill(h, noise_var, N, ks=np.asarray(ks))


def kkt_residual(sol: WaterfillingSolution) -> float:
    """Largest violation of the KKT conditions, relative to ``lambda``.

    Active indices must satisfy stationarity with ``mu_i = 0``; inactive ones
    need ``mu_i = lambda - q_i^2 g >= 0``.  Primal feasibility is included.
    """
    q = np.abs(sol.h_tilde) ** 2
    g = sol.gain
    grad = q**2 * g / (1 + sol.beta * q * g) ** 2  # minus the objective gradient
    active = sol.beta > 0
    res = [abs(sol.beta.sum() - 1), max(0.0, -sol.beta.min())]
    if active.any():
        res.append(np.max(np.abs(grad[active] - sol.lam)) / sol.lam)
    if (~active).any():
        res.append(max(0.0, np.max(grad[~active] - sol.lam)) / sol.lam)
    return float(max(res))
