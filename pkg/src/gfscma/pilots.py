"""Zadoff-Chu pilot books and the pilot-only ML channel estimate."""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .channel import dft_matrix
from .config import ConfigError, IdentifiabilityError, SystemConfig
from .pattern import FactorGraphPattern, build_pattern


@dataclass(frozen=True, eq=False)
class PilotBook:
    """Pilot symbols ``x^p[b, t, n, k]``, zero off the pattern support."""

    symbols: np.ndarray

    @property
    def N_p(self) -> int:
        return self.symbols.shape[1]


@dataclass(frozen=True, eq=False)
class MlEstimate:
    h_hat: np.ndarray
    gram: np.ndarray


def zadoff_chu(length: int, root: int = 1) -> np.ndarray:
    t = np.arange(length)
    if length % 2:
        return np.exp(-1j * np.pi * root * t * (t + 1) / length)
    return np.exp(-1j * np.pi * root * t * t / length)


def pilot_gram(pilots: PilotBook, pattern: FactorGraphPattern) -> np.ndarray:
    """(B, N, d_max, d_max) pilot cross-correlations between users of ``F[n]``."""
    B = pilots.symbols.shape[0]
    d = max(len(f) for f in pattern.F)
    out = np.zeros((B, pattern.N, d, d), dtype=complex)
    for n, users in enumerate(pattern.F):
        x = pilots.symbols[:, :, n, list(users)]
        out[:, n, : len(users), : len(users)] = np.einsum("bti,btj->bij", x.conj(), x)
    return out


def generate_zc_pilots(config: SystemConfig, pattern: FactorGraphPattern) -> PilotBook:
    """Per-subcarrier orthonormal pilots from cyclic shifts of a root-1 ZC sequence.

    The user ranked ``r`` in ``F[n]`` uses shift ``r * (N_p // d_c)``,
    scaled by ``1/sqrt(N_p)``; identical across subcarrier blocks.
    """
    N_p = config.N_p
    d_c = max(len(f) for f in pattern.F)
    spacing = N_p // d_c
    if spacing < 1:
        raise ConfigError(f"N_p = {N_p} cannot host {d_c} orthogonal shifts")
    base = zadoff_chu(N_p) / np.sqrt(N_p)
    sym = np.zeros((config.B, N_p, pattern.N, pattern.K), dtype=complex)
    for n, users in enumerate(pattern.F):
        for r, k in enumerate(users):
            sym[:, :, n, k] = np.roll(base, -r * spacing)
    book = PilotBook(sym)
    gram = pilot_gram(book, pattern)
    eye = np.zeros_like(gram)
    for n, users in enumerate(pattern.F):
        eye[:, n, range(len(users)), range(len(users))] = 1.0
    if np.abs(gram - eye).max() > 1e-10:
        raise ConfigError(f"pilot shifts with N_p = {N_p}, d_c = {d_c} are not orthogonal")
    return book


def gram_blocks(pilots: PilotBook, pattern: FactorGraphPattern, config: SystemConfig) -> np.ndarray:
    """(K, L, L) per-user blocks ``sum_b F_b^H E_k F_b``."""
    F = dft_matrix(config)
    E = np.einsum("btnk,btnk->bnk", pilots.symbols.conj(), pilots.symbols).real
    return np.einsum("bnl,bnk,bnm->klm", F.conj(), E, F)


def check_identifiability(config) -> bool:
    """Whether the pilot-only ML estimate is unique (``B * d_v >= L``).

    When the degree condition holds, the Gram block of user 0 is also
    checked numerically (smallest singular value > 1e-6). ``config`` may be
    a :class:`SystemConfig`, a mapping or any object with its attributes.
    """
    if isinstance(config, dict):
        config = SimpleNamespace(**config)
    if config.B * config.d_v < config.L:
        return False
    if not isinstance(config, SystemConfig):
        fields = {f: getattr(config, f) for f in SystemConfig.__dataclass_fields__ if hasattr(config, f)}
        config = SystemConfig(**fields)
    pattern = build_pattern(config)
    G = gram_blocks(generate_zc_pilots(config, pattern), pattern, config)
    return bool(np.linalg.svd(G[0], compute_uv=False).min() > 1e-6)


def ml_estimate(Y_pilot, pilots: PilotBook, config: SystemConfig, pattern: FactorGraphPattern | None = None) -> MlEstimate:
    """Least-squares CIR estimate from pilot slots, one L x L solve per user.

    ``Y_pilot`` has shape (B, N_p, N). Relies on per-subcarrier pilot
    orthogonality, so the K*L normal equations are block diagonal.
    """
    Y_pilot = np.asarray(Y_pilot)
    X = pilots.symbols
    if Y_pilot.shape != X.shape[:3]:
        raise ValueError(f"Y_pilot shape {Y_pilot.shape} does not match pilots {X.shape[:3]}")
    if pattern is None:
        pattern = build_pattern(config)
    F = dft_matrix(config)
    G = gram_blocks(pilots, pattern, config)
    z = np.einsum("btnk,btn->bnk", X.conj(), Y_pilot)
    u = np.einsum("bnl,bnk->kl", F.conj(), z)
    sv = np.linalg.svd(G, compute_uv=False)
    if (sv.min(axis=1) <= 1e-10 * np.maximum(sv.max(axis=1), 1e-300)).any():
        raise IdentifiabilityError("singular per-user Gram block")
    h = np.linalg.solve(G, u[..., None])[..., 0]
    return MlEstimate(h_hat=h, gram=G)
