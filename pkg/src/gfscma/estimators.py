"""Estimator-style wrappers around the receivers.

``fit(frame)`` runs a receiver on one fading block and stores the results
as fitted attributes; ``predict(frame)`` returns hard bit decisions. The
receivers have no parameters learned across frames, so each ``fit`` call
replaces the previous results.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .config import ConfigError
from .frame import Frame
from .receivers.baselines import MF_WARMUP_ITERS, bp_mf_receiver, genie_input, mpa_genie
from .receivers.ep import ReceiverOutput, run_receiver


def check_frame(frame) -> Frame:
    """Validate that ``frame`` is a simulated block with a consistent observation tensor."""
    if not isinstance(frame, Frame):
        raise TypeError(f"expected a Frame, got {type(frame).__name__}")
    cfg = frame.config
    if np.shape(frame.Y) != (cfg.B, cfg.T, cfg.N):
        raise ConfigError(f"Y has shape {np.shape(frame.Y)}, expected {(cfg.B, cfg.T, cfg.N)}")
    if not np.all(np.isfinite(frame.Y)):
        raise ConfigError("Y contains non-finite entries")
    return frame


class _ReceiverEstimator(BaseEstimator):
    def _overrides(self) -> dict:
        return {}

    def _config(self, frame: Frame):
        ov = {k: v for k, v in self._overrides().items() if v is not None}
        return frame.config.replace(**ov) if ov else frame.config

    def _run(self, frame: Frame, config) -> ReceiverOutput:  # pragma: no cover - abstract
        raise NotImplementedError

    def fit(self, X, y=None):
        """Run the receiver on frame ``X``; ``y`` is ignored."""
        frame = check_frame(X)
        out = self._run(frame, self._config(frame))
        self.output_ = out
        self.h_hat_ = out.h_hat
        self.active_ = out.active
        self.symbol_posteriors_ = out.symbol_probs
        self.llr_ = out.llr
        self.n_iter_ = out.iterations
        self.n_ops_ = out.ops
        return self

    def predict(self, X=None):
        """Hard bits (B, N_s, K, log2 M); fits on ``X`` first when given."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "output_")
        return self.output_.bits

    def score(self, X, y=None) -> float:
        """``1 - BER`` over the truly active users of frame ``X``."""
        bits = self.predict(X)
        a = X.active
        if not a.any():
            return 1.0
        return float(1.0 - np.mean(bits[:, :, a] != X.bits[:, :, a]))


class BPGAEPReceiver(_ReceiverEstimator):
    """BP-GA-EP joint receiver; ``None`` parameters keep the frame configuration."""

    def __init__(self, max_iters=None, damping=None, delta=None, tol=1e-4):
        self.max_iters = max_iters
        self.damping = damping
        self.delta = delta
        self.tol = tol

    def _overrides(self):
        return {"max_iters": self.max_iters, "damping": self.damping, "delta": self.delta}

    def _run(self, frame, config):
        return run_receiver(frame.Y, frame.pilots, frame.codebook, frame.pattern, config, tol=self.tol)


class BPMFReceiver(_ReceiverEstimator):
    """BP-MF joint receiver with MPA warm-up."""

    def __init__(self, max_iters=None, delta=None, tol=1e-4, warmup_iters=MF_WARMUP_ITERS):
        self.max_iters = max_iters
        self.delta = delta
        self.tol = tol
        self.warmup_iters = warmup_iters

    def _overrides(self):
        return {"max_iters": self.max_iters, "delta": self.delta}

    def _run(self, frame, config):
        return bp_mf_receiver(
            frame.Y, frame.pilots, frame.codebook, frame.pattern, config, tol=self.tol, warmup_iters=self.warmup_iters
        )


class GenieMPAReceiver(_ReceiverEstimator):
    """Exact MPA given the true channel and activity of the frame."""

    def __init__(self, iters=10):
        self.iters = iters

    def _run(self, frame, config):
        return mpa_genie(genie_input(frame), iters=self.iters, H=frame.H)
