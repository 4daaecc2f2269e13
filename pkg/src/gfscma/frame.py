"""One simulated fading block: ground truth plus the received tensor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelState, draw_activity, draw_cirs, freq_response, transmit
from .codebook import Codebook
from .config import SystemConfig
from .pattern import FactorGraphPattern
from .pilots import PilotBook


@dataclass(frozen=True, eq=False)
class Frame:
    """Received block ``Y`` (B, T, N) with its ground truth.

    ``symbols`` holds augmented codeword indices (B, N_s, K), 0 for silent
    users; ``bits`` the labels of the transmitted codewords.
    """

    config: SystemConfig
    pattern: FactorGraphPattern
    codebook: Codebook
    pilots: PilotBook
    Y: np.ndarray
    channel: ChannelState
    alpha: np.ndarray
    symbols: np.ndarray
    bits: np.ndarray

    @property
    def active(self) -> np.ndarray:
        return self.channel.active

    @property
    def H(self) -> np.ndarray:
        return self.channel.H


def generate_frame(
    config: SystemConfig,
    pattern: FactorGraphPattern,
    codebook: Codebook,
    pilots: PilotBook,
    rng: np.random.Generator,
    active: np.ndarray | None = None,
) -> Frame:
    """Draw activity, channels and data, and pass them through the channel.

    Random draws happen in a fixed order (activity, taps, data, noise) and
    noise is drawn at unit scale, so frames generated from equal seeds at
    different ``noise_var`` share every draw.
    """
    B, Ns, K, nb = config.B, config.N_s, config.K, config.bits_per_symbol
    if active is None:
        active = draw_activity(config.lambda_activity, K, rng)
    active = np.asarray(active, dtype=bool)
    ch = draw_cirs(active, config.L, config.power_delay_profile, rng)
    alpha = freq_response(ch, config).alpha
    idx = rng.integers(0, config.M, size=(B, Ns, K))
    sym = np.where(active[None, None, :], idx + 1, 0)
    bits = codebook.bit_table[np.arange(K)[None, None, :], idx]
    x_data = codebook.augmented[np.arange(K)[None, None, :], sym]  # (B, Ns, K, N)
    x = np.zeros((B, config.T, config.N, K), dtype=complex)
    x[:, : config.N_p] = pilots.symbols * active[None, None, None, :]
    x[:, config.N_p :] = np.moveaxis(x_data, -1, -2)
    Y = transmit(x, alpha, config.noise_var, rng)
    return Frame(config, pattern, codebook, pilots, Y, ch, alpha, sym, bits)
