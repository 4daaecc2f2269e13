"""Gaussian and discrete messages and the algebra the receivers use.

All functions broadcast over numpy arrays; a "message" is just a pair of
arrays (complex mean, real variance) so one call updates every edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Variance used for point masses; keeps every precision finite.
VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class GaussMsg:
    """Complex Gaussian message CN(mean, var), elementwise over arrays.

    Non-positive or non-finite variances are replaced by ``var_cap`` and
    non-finite means by 0, so a constructed message is always proper.
    """

    mean: np.ndarray
    var: np.ndarray
    var_cap: float = 1e6

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=complex)
        var = np.asarray(self.var, dtype=float)
        mean, var = np.broadcast_arrays(mean, var)
        mean = mean.copy()
        var = var.copy()
        bad_var = ~(np.isfinite(var) & (var > 0))
        var[bad_var] = self.var_cap
        mean[~np.isfinite(mean)] = 0.0
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    def __mul__(self, other: "GaussMsg") -> "GaussMsg":
        return GaussMsg(*gauss_product(self.mean, self.var, other.mean, other.var), self.var_cap)

    def __truediv__(self, other: "GaussMsg") -> "GaussMsg":
        return GaussMsg(*gauss_divide(self.mean, self.var, other.mean, other.var), self.var_cap)


@dataclass(frozen=True)
class DiscreteMsg:
    """Normalized probabilities over the augmented alphabet (index 0 = zero symbol).

    ``axis`` names the alphabet axis of ``probs``.
    """

    probs: np.ndarray
    axis: int = -1

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if (p < 0).any() or not np.isfinite(p).all():
            raise ValueError("probabilities must be finite and nonnegative")
        s = p.sum(axis=self.axis, keepdims=True)
        if (s <= 0).any():
            raise ValueError("probability vector sums to zero")
        object.__setattr__(self, "probs", p / s)

    @classmethod
    def from_log(cls, logp, axis: int = -1) -> "DiscreteMsg":
        return cls(normalize_log(logp, axis=axis), axis)

    @classmethod
    def uniform(cls, shape, size: int) -> "DiscreteMsg":
        return cls(np.full(tuple(shape) + (size,), 1.0 / size))


def normalize_log(logp, axis: int = -1) -> np.ndarray:
    """exp(logp) normalized along ``axis`` (max-shifted, so no underflow of the mode)."""
    logp = np.asarray(logp, dtype=float)
    top = np.max(logp, axis=axis, keepdims=True)
    if not np.isfinite(top).all():
        raise FloatingPointError("log-probabilities have no finite maximum")
    p = np.exp(logp - top)
    p /= np.sum(p, axis=axis, keepdims=True)
    return p


def gauss_product(m1, v1, m2, v2):
    """Moments of CN(m1, v1) * CN(m2, v2) (normalized)."""
    p = 1.0 / v1 + 1.0 / v2
    v = 1.0 / p
    return v * (m1 / v1 + m2 / v2), v


def gauss_divide(m1, v1, m2, v2):
    """Moments of CN(m1, v1) / CN(m2, v2); variance may come out non-positive."""
    with np.errstate(divide="ignore", invalid="ignore"):
        p = 1.0 / v1 - 1.0 / v2
        v = 1.0 / p
        m = v * (m1 / v1 - m2 / v2)
    return m, v


def ep_divide(m_belief, v_belief, m_in, v_in, var_cap: float):
    """Extrinsic message belief / incoming with the variance clamp.

    Where the quotient variance is non-positive or non-finite it is set to
    ``var_cap`` and the mean to the belief mean.
    """
    m, v = gauss_divide(m_belief, v_belief, m_in, v_in)
    bad = ~(np.isfinite(v) & (v > 0) & np.isfinite(m))
    if bad.any():
        v = np.where(bad, var_cap, v)
        m = np.where(bad, m_belief, m)
    return m, v


def damp(m_new, v_new, m_old, v_old, factor: float):
    """Convex combination of two messages in natural parameters.

    ``factor = 1`` returns the new message unchanged.
    """
    if factor >= 1.0:
        return m_new, v_new
    p = factor / v_new + (1.0 - factor) / v_old
    eta = factor * m_new / v_new + (1.0 - factor) * m_old / v_old
    v = 1.0 / p
    return eta * v, v


def cn_logpdf(x, mean, var):
    """log CN(x; mean, var)."""
    return -np.abs(x - mean) ** 2 / var - np.log(np.pi * var)
