"""User activity, tapped-delay channels and the noisy uplink observation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


@dataclass(frozen=True, eq=False)
class ChannelState:
    """Channel taps ``H`` (K x L), activity flags and the power-delay profile."""

    H: np.ndarray
    active: np.ndarray
    pdp: np.ndarray


@dataclass(frozen=True, eq=False)
class FreqResponse:
    """Per-block subcarrier coefficients ``alpha[b, n, k]``."""

    alpha: np.ndarray


def dft_matrix(config: SystemConfig) -> np.ndarray:
    """(B, N, L) DFT rows ``exp(-j 2 pi n_g l / (B N))`` with taps l = 1..L.

    ``n_g = b * N + n`` is the 0-based global subcarrier index.
    """
    B, N, L = config.B, config.N, config.L
    n_g = np.arange(B * N).reshape(B, N, 1)
    taps = np.arange(1, L + 1)
    return np.exp(-2j * np.pi * n_g * taps / (B * N))


def draw_activity(lambda_activity: float, K: int, rng: np.random.Generator) -> np.ndarray:
    """Poisson(lambda) active-user count, truncated to [0, K], placed uniformly at random."""
    while True:
        m = int(rng.poisson(lambda_activity))
        if m <= K:
            break
    active = np.zeros(K, dtype=bool)
    active[rng.choice(K, size=m, replace=False)] = True
    return active


def draw_cirs(active, L: int, pdp, rng: np.random.Generator) -> ChannelState:
    """Rayleigh taps ``h_kl ~ CN(0, pdp[l])`` for active users, zeros otherwise."""
    active = np.asarray(active, dtype=bool)
    pdp = np.asarray(pdp, dtype=float)
    if pdp.shape != (L,) or (pdp < 0).any():
        raise ValueError("pdp must be a nonnegative length-L profile")
    pdp = pdp / pdp.sum()
    K = active.size
    g = (rng.standard_normal((K, L)) + 1j * rng.standard_normal((K, L))) * np.sqrt(pdp / 2)
    H = np.where(active[:, None], g, 0.0)
    return ChannelState(H=H, active=active, pdp=pdp)


def freq_response(state: ChannelState, config: SystemConfig) -> FreqResponse:
    F = dft_matrix(config)
    alpha = np.einsum("bnl,kl->bnk", F, state.H)
    return FreqResponse(alpha)


def transmit(symbols, alpha, noise_var: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """Received tensor ``Y[b, t, n] = sum_k alpha[b, n, k] x[b, t, n, k] + z``.

    Parameters
    ----------
    symbols : ndarray, shape (B, T, N, K)
        Transmitted subcarrier symbols (pilot slots followed by data slots).
    alpha : ndarray or FreqResponse, shape (B, N, K)
    noise_var : float
        Per-complex-dimension noise variance; 0 gives a noiseless observation.
    """
    if isinstance(alpha, FreqResponse):
        alpha = alpha.alpha
    symbols = np.asarray(symbols)
    alpha = np.asarray(alpha)
    if symbols.ndim != 4 or alpha.shape != (symbols.shape[0], symbols.shape[2], symbols.shape[3]):
        raise ValueError(f"shape mismatch: symbols {symbols.shape}, alpha {alpha.shape}")
    Y = np.einsum("btnk,bnk->btn", symbols, alpha)
    if noise_var > 0:
        if rng is None:
            raise ValueError("rng required when noise_var > 0")
        Y = Y + complex_noise(Y.shape, noise_var, rng)
    return Y


def complex_noise(shape, var: float, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(var / 2)
