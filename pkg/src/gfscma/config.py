"""System configuration shared by the simulator and the receivers."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Raised when a configuration cannot describe a valid system."""


class IdentifiabilityError(ConfigError):
    """Raised when the pilot-only channel estimate is not unique."""


def exponential_pdp(L: int, decay: float = 2.0) -> tuple[float, ...]:
    """Normalized exponential power-delay profile ``p[l] ~ exp(-l / decay)``."""
    w = [math.exp(-l / decay) for l in range(L)]
    s = sum(w)
    return tuple(x / s for x in w)


@dataclass(frozen=True)
class SystemConfig:
    """Uplink grant-free SCMA system and receiver parameters.

    Defaults reproduce the evaluation set-up of the reference system
    (B=6 reused subcarrier blocks of N=24 subcarriers, K=48 users, M=4,
    d_v=2, d_c=4, L=6 taps, 7 pilot and 64 data slots per fading block).

    ``delta=None`` selects the default activity threshold
    ``0.05 * L * mean(pdp)``.
    """

    B: int = 6
    N: int = 24
    K: int = 48
    M: int = 4
    d_v: int = 2
    d_c: int = 4
    L: int = 6
    N_p: int = 7
    N_s: int = 64
    lambda_activity: float = 8.0
    a: float = 1e-7
    b: float = 1e-7
    delta: float | None = None
    max_iters: int = 20
    damping: float = 0.5
    var_cap: float = 1e6
    noise_var: float = 0.1
    pdp: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        for name in ("B", "N", "K", "M", "d_v", "d_c", "L", "N_p", "max_iters"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.N_s < 0:
            raise ConfigError("N_s must be >= 0")
        if self.M < 2 or self.M & (self.M - 1):
            raise ConfigError(f"M must be a power of two >= 2, got {self.M}")
        if self.K * self.d_v != self.N * self.d_c:
            raise ConfigError(
                f"degree equation K*d_v = N*d_c violated: {self.K}*{self.d_v} != {self.N}*{self.d_c}"
            )
        if self.d_v > self.N or self.d_c > self.K:
            raise ConfigError("d_v must not exceed N and d_c must not exceed K")
        if self.B * self.d_v < self.L:
            raise IdentifiabilityError(
                f"B*d_v = {self.B * self.d_v} < L = {self.L}: pilot channel estimate not identifiable"
            )
        if self.N_p < self.d_c:
            raise ConfigError(f"N_p = {self.N_p} < d_c = {self.d_c}: no orthogonal pilot set")
        if not self.lambda_activity > 0:
            raise ConfigError("lambda_activity must be > 0")
        if not (self.a > 0 and self.b > 0):
            raise ConfigError("Gamma hyperparameters a, b must be > 0")
        if not 0 < self.damping <= 1:
            raise ConfigError("damping must lie in (0, 1]")
        if not self.var_cap > 0:
            raise ConfigError("var_cap must be > 0")
        if not (self.noise_var >= 0 and math.isfinite(self.noise_var)):
            raise ConfigError("noise_var must be finite and >= 0")
        if self.delta is not None and self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if self.pdp is not None:
            p = tuple(float(x) for x in self.pdp)
            if len(p) != self.L or any(x < 0 or not math.isfinite(x) for x in p) or sum(p) <= 0:
                raise ConfigError(f"pdp must hold {self.L} nonnegative finite entries")
            s = sum(p)
            object.__setattr__(self, "pdp", tuple(x / s for x in p))

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.M))

    @property
    def T(self) -> int:
        """Slots per fading block (pilots first, then data)."""
        return self.N_p + self.N_s

    @property
    def power_delay_profile(self) -> tuple[float, ...]:
        return self.pdp if self.pdp is not None else exponential_pdp(self.L)

    @property
    def activity_threshold(self) -> float:
        if self.delta is not None:
            return self.delta
        pdp = self.power_delay_profile
        return 0.05 * self.L * (sum(pdp) / self.L)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


def ebn0_to_noise_var(ebn0_db: float, M: int) -> float:
    """Noise variance per complex dimension for unit-energy codewords.

    Each codeword carries ``log2(M)`` bits with unit energy, so
    ``Eb = 1 / log2(M)`` and ``sigma^2 = Eb / 10**(EbN0_dB / 10)``.
    """
    eb = 1.0 / math.log2(M)
    return eb / 10.0 ** (ebn0_db / 10.0)
