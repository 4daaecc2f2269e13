"""BP-GA-EP joint channel estimation, data detection and activity detection.

One fading block is processed at a time. Every message lives on an edge
``e`` of the factor-graph pattern (a user/subcarrier pair), replicated over
subcarrier blocks ``b`` and slots ``t``; hypotheses run over the augmented
alphabet with index 0 the silent (all-zero) codeword. Pilot slots come
first, data slots after them.

The step functions mutate a :class:`ReceiverState` in place and return it
so that one iteration of the schedule reads as a pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..channel import dft_matrix
from ..codebook import Codebook
from ..config import ConfigError, SystemConfig
from ..messages import VAR_FLOOR, DiscreteMsg, GaussMsg, damp, ep_divide, gauss_product, normalize_log
from ..pattern import FactorGraphPattern
from ..pilots import MlEstimate, PilotBook, ml_estimate
from ._kernels import detect_project, ep_update

#: Initial variance of the u -> f messages.
U_INIT_VAR = 1e6


# --------------------------------------------------------------------------
# scalar-level message math
#
# Hypothesis tables put the alphabet on the LEADING axis: ``X`` has shape
# (M+1, ...) and broadcasts against the per-edge message arrays.
# --------------------------------------------------------------------------


def loo_sum(x: np.ndarray) -> np.ndarray:
    """Sum over the last axis excluding each element itself."""
    d = x.shape[-1]
    mask = 1.0 - np.eye(d)
    return np.einsum("...j,ij->...i", x, mask)


def f_to_u(y, uf_mean, uf_var, noise_var):
    """Messages f -> u on one subcarrier; the last axis runs over ``F[n]``."""
    mean = y[..., None] - loo_sum(uf_mean)
    var = noise_var + loo_sum(uf_var)
    return mean, var


def total_var(fu_var, af_var, X2):
    """``v_fu + v_af |x|^2`` per hypothesis (``X2 = |X|^2``)."""
    return fu_var + af_var * X2


def log_likelihood_delta(fu_mean, fu_var, af_mean, af_var, X, s=None):
    """Per-hypothesis distance ``Delta(x)``.

    ``exp(-Delta)`` is proportional to the likelihood of the f -> u mean
    after integrating the channel coefficient out under its Gaussian
    message; for ``x = 0`` it reduces to ``|tau_fu|^2 / v_fu + ln v_fu``.
    """
    if s is None:
        s = total_var(fu_var, af_var, np.abs(X) ** 2)
    r = fu_mean - af_mean * X
    return (r.real**2 + r.imag**2) / s + np.log(s)


def x_to_f(delta_user: np.ndarray, log_prior: np.ndarray) -> np.ndarray:
    """Extrinsic symbol messages for every edge of a user.

    ``delta_user`` has shape (M+1, ..., d_v); the result for edge ``i``
    combines the prior (shape (M+1, ...) broadcastable) with the distances
    of the other ``d_v - 1`` edges.
    """
    others = loo_sum(delta_user)
    return normalize_log(log_prior[..., None] - others, axis=0)


def mixture_weights(prior: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Normalized weights ``beta(x) ~ prior(x) exp(-Delta(x))`` over axis 0 (zero symbol included)."""
    with np.errstate(divide="ignore"):
        return normalize_log(np.log(prior) - delta, axis=0)


def u_prior_mixture(prior, af_mean, af_var, X):
    """Mixture form of the message u -> f before projection.

    Returns ``(weights, means, variances)`` per hypothesis: component ``x``
    is ``CN(af_mean * x, af_var |x|^2)`` with weight ``prior(x)``; the zero
    symbol is a point mass at 0 carrying exactly ``prior(0)``.
    """
    weights = np.asarray(prior, dtype=float)
    means = af_mean * X
    variances = af_var * np.abs(X) ** 2
    return weights, means, variances


def u_components(fu_mean, fu_var, af_mean, af_var, X, s=None):
    """Posterior component moments of ``u = alpha x`` given each hypothesis ``x``.

    The zero hypothesis yields the point mass (0, 0).
    """
    ax2 = af_var * np.abs(X) ** 2
    if s is None:
        s = fu_var + ax2
    mean = (af_mean * fu_var * X + fu_mean * ax2) / s
    var = fu_var * ax2 / s
    return mean, var


def alpha_components(fu_mean, fu_var, af_mean, af_var, X, s=None):
    """Posterior component moments of ``alpha`` given each hypothesis ``x``.

    The zero hypothesis leaves the channel message unchanged.
    """
    if s is None:
        s = total_var(fu_var, af_var, np.abs(X) ** 2)
    mean = (af_mean * fu_var + fu_mean * af_var * X.conj()) / s
    var = fu_var * af_var / s
    return mean, var


def match_moments(weights, means, variances):
    """Mean and variance of a Gaussian mixture (hypotheses on axis 0)."""
    m = np.sum(weights * means, axis=0)
    second = np.sum(weights * (means.real**2 + means.imag**2 + variances), axis=0)
    v = second - (m.real**2 + m.imag**2)
    return m, np.maximum(v, VAR_FLOOR)


# --------------------------------------------------------------------------
# receiver state
# --------------------------------------------------------------------------


@dataclass
class ReceiverProblem:
    """Static inputs of one fading block, laid out per edge."""

    config: SystemConfig
    pattern: FactorGraphPattern
    codebook: Codebook
    y: np.ndarray  # (B, T, N)
    x_pilot: np.ndarray  # (B, N_p, E)
    X: np.ndarray  # (M+1, 1, 1, E) data hypotheses
    X2: np.ndarray  # |X|^2
    F: np.ndarray  # (B, E, L)
    noise_var: float

    @classmethod
    def build(cls, Y, pilots: PilotBook, codebook: Codebook, pattern: FactorGraphPattern, config: SystemConfig):
        Y = np.asarray(Y, dtype=complex)
        if Y.shape != (config.B, config.T, config.N):
            raise ConfigError(f"Y must have shape {(config.B, config.T, config.N)}, got {Y.shape}")
        if not np.isfinite(Y).all():
            raise ConfigError("Y contains non-finite entries")
        if not pattern.matches(config):
            raise ConfigError("pattern does not match configuration")
        if codebook.K != pattern.K or codebook.N != pattern.N or codebook.M != config.M:
            raise ConfigError("codebook does not match pattern/configuration")
        if pilots.symbols.shape != (config.B, config.N_p, config.N, config.K):
            raise ConfigError("pilot book does not match configuration")
        es, eu = pattern.edge_sub, pattern.edge_user
        x_pilot = pilots.symbols[:, :, es, eu]
        if np.any(x_pilot == 0):
            raise ConfigError("pilot symbol 0 at a support position")
        X = codebook.edge_table(pattern).T[:, None, None, :]
        return cls(
            config=config,
            pattern=pattern,
            codebook=codebook,
            y=Y,
            x_pilot=x_pilot,
            X=X,
            X2=np.abs(X) ** 2,
            F=dft_matrix(config)[:, es, :],
            noise_var=max(float(config.noise_var), VAR_FLOOR),
        )

    @property
    def y_pilot(self) -> np.ndarray:
        return self.y[:, : self.config.N_p]

    def to_sub(self, arr: np.ndarray) -> np.ndarray:
        """(..., E) -> (..., N, d_c) grouped by subcarrier."""
        return arr[..., self.pattern.sub_edges]

    def from_sub(self, arr: np.ndarray) -> np.ndarray:
        """(..., N, d_c) -> (..., E)."""
        out = np.empty(arr.shape[:-2] + (self.pattern.n_edges,), dtype=arr.dtype)
        out[..., self.pattern.sub_edges.ravel()] = arr.reshape(arr.shape[:-2] + (-1,))
        return out

    def to_user(self, arr: np.ndarray) -> np.ndarray:
        """(..., E) -> (..., K, d_v) grouped by user."""
        return arr[..., self.pattern.user_edges]

    def from_user(self, arr: np.ndarray) -> np.ndarray:
        out = np.empty(arr.shape[:-2] + (self.pattern.n_edges,), dtype=arr.dtype)
        out[..., self.pattern.user_edges.ravel()] = arr.reshape(arr.shape[:-2] + (-1,))
        return out


@dataclass
class GammaBelief:
    a_hat: np.ndarray
    b_hat: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.a_hat / self.b_hat


@dataclass
class ReceiverState:
    """All messages of the BP-GA-EP schedule.

    Slot-indexed messages have shape (B, T, E) with pilot slots first;
    hypothesis tables (M+1, B, N_s, E); channel-side messages (B, E) and
    (B, E, L); tap-level messages (K, L); ``log_prior`` is (M+1, K).
    """

    u_to_f: GaussMsg
    f_to_u: GaussMsg
    alpha_to_f: GaussMsg
    f_to_alpha: GaussMsg
    delta: np.ndarray
    x_to_f: DiscreteMsg
    beta: np.ndarray
    alpha_to_phi: GaussMsg
    phi_to_alpha: GaussMsg
    alpha_belief: GaussMsg
    phi_to_h: GaussMsg
    h_to_phi: GaussMsg
    h_to_q: GaussMsg
    h_belief: GaussMsg
    tau_lambda: np.ndarray
    gamma: GammaBelief
    log_prior: np.ndarray
    iteration: int = 0
    ops: int = 0
    ops_history: list = field(default_factory=list)
    _s: np.ndarray | None = None  # cached v_fu + v_af |x|^2 of the current iteration


def init_state(ml: MlEstimate | np.ndarray, problem: ReceiverProblem) -> ReceiverState:
    """Initial messages: ML taps on h -> phi, vague channel and interference messages."""
    cfg = problem.config
    h_ml = ml.h_hat if isinstance(ml, MlEstimate) else np.asarray(ml)
    B, T, E, K, L, M1 = cfg.B, cfg.T, problem.pattern.n_edges, cfg.K, cfg.L, cfg.M + 1
    cap = cfg.var_cap
    eu = problem.pattern.edge_user
    slot = (B, T, E)
    hyp = (M1, B, cfg.N_s, E)
    return ReceiverState(
        u_to_f=GaussMsg(np.zeros(slot), np.full(slot, U_INIT_VAR), cap),
        f_to_u=GaussMsg(np.zeros(slot), np.full(slot, cap), cap),
        alpha_to_f=GaussMsg(np.zeros(slot), np.ones(slot), cap),
        f_to_alpha=GaussMsg(np.zeros(slot), np.full(slot, cap), cap),
        delta=np.zeros(hyp),
        x_to_f=DiscreteMsg(np.full(hyp, 1.0 / M1), axis=0),
        beta=np.full(hyp, 1.0 / M1),
        alpha_to_phi=GaussMsg(np.zeros((B, E)), np.full((B, E), cap), cap),
        phi_to_alpha=GaussMsg(np.zeros((B, E)), np.ones((B, E)), cap),
        alpha_belief=GaussMsg(np.zeros((B, E)), np.ones((B, E)), cap),
        phi_to_h=GaussMsg(np.zeros((B, E, L)), np.full((B, E, L), cap), cap),
        h_to_phi=GaussMsg(np.broadcast_to(h_ml[eu][None], (B, E, L)), np.ones((B, E, L)), cap),
        h_to_q=GaussMsg(np.zeros((K, L)), np.full((K, L), cap), cap),
        h_belief=GaussMsg(h_ml.copy(), np.ones((K, L)), cap),
        tau_lambda=np.full((K, L), cfg.a / cfg.b),
        gamma=GammaBelief(np.full((K, L), cfg.a), np.full((K, L), cfg.b)),
        log_prior=np.full((M1, K), -np.log(M1)),
    )


def _count(state: ReceiverState, n: int) -> None:
    state.ops += int(n)


def _data(msg: GaussMsg, Np: int):
    return msg.mean[:, Np:], msg.var[:, Np:]


# --------------------------------------------------------------------------
# data-detection loop
# --------------------------------------------------------------------------


def update_f_to_u(state: ReceiverState, problem: ReceiverProblem) -> ReceiverState:
    """Interference-cancelled f -> u messages for every slot (step 1)."""
    m_sub, v_sub = f_to_u(
        problem.y, problem.to_sub(state.u_to_f.mean), problem.to_sub(state.u_to_f.var), problem.noise_var
    )
    state.f_to_u = GaussMsg(problem.from_sub(m_sub), problem.from_sub(v_sub), problem.config.var_cap)
    state._s = None
    return state


def _total_var(state: ReceiverState, problem: ReceiverProblem) -> np.ndarray:
    if state._s is None:
        Np = problem.config.N_p
        state._s = total_var(state.f_to_u.var[:, Np:], state.alpha_to_f.var[:, Np:], problem.X2)
    return state._s


def symbol_extrinsic(state: ReceiverState, problem: ReceiverProblem) -> ReceiverState:
    """Distances for all hypotheses and the extrinsic x -> f messages (step 2, data slots)."""
    Np = problem.config.N_p
    fm, fv = _data(state.f_to_u, Np)
    am, av = _data(state.alpha_to_f, Np)
    state.delta = log_likelihood_delta(fm, fv, am, av, problem.X, s=_total_var(state, problem))
    # (M+1, B, N_s, K, d_v) against a (M+1, 1, 1, K) prior
    probs = x_to_f(problem.to_user(state.delta), state.log_prior[:, None, None, :])
    state.x_to_f = DiscreteMsg(problem.from_user(probs), axis=0)
    return state


def project_u_belief(state: ReceiverState, problem: ReceiverProblem):
    """Moment-matched Gaussian belief of ``u = alpha x`` on every data edge (step 3).

    Returns ``(mean, var)``; the normalized component weights are stored on
    the state and reused by the channel-side projection.
    """
    Np = problem.config.N_p
    fm, fv = _data(state.f_to_u, Np)
    am, av = _data(state.alpha_to_f, Np)
    state.beta = mixture_weights(state.x_to_f.probs, state.delta)
    cm, cv = u_components(fm, fv, am, av, problem.X, s=_total_var(state, problem))
    _count(state, cm[1:].size)
    return match_moments(state.beta, cm, cv)


def update_u_to_f(state: ReceiverState, problem: ReceiverProblem, belief) -> ReceiverState:
    """EP extrinsic u -> f (step 4).

    Data slots: projected belief divided by f -> u with the variance clamp,
    then damped. Pilot slots: the symbol is known, so the message is the
    channel message scaled by the pilot.
    """
    cfg = problem.config
    Np = cfg.N_p
    fm, fv = _data(state.f_to_u, Np)
    om, ov = _data(state.u_to_f, Np)
    m, v = ep_update(belief[0], belief[1], fm, fv, om, ov, cfg.var_cap, cfg.damping)
    xp = problem.x_pilot
    pm = state.alpha_to_f.mean[:, :Np] * xp
    pv = state.alpha_to_f.var[:, :Np] * np.abs(xp) ** 2
    state.u_to_f = GaussMsg(np.concatenate([pm, m], axis=1), np.concatenate([pv, v], axis=1), cfg.var_cap)
    return state


def fused_data_projection(state: ReceiverState, problem: ReceiverProblem):
    """Steps 2, 3 and 5 in one compiled pass over the data edges.

    Same result as :func:`symbol_extrinsic`, :func:`project_u_belief` and
    :func:`project_alpha_belief` in sequence; returns the u and alpha beliefs.
    """
    Np = problem.config.N_p
    fm, fv = _data(state.f_to_u, Np)
    am, av = _data(state.alpha_to_f, Np)
    X = np.ascontiguousarray(problem.X[:, 0, 0, :].T)
    delta, xf, beta, um, uv, alm, alv = detect_project(
        np.ascontiguousarray(fm),
        np.ascontiguousarray(fv),
        np.ascontiguousarray(am),
        np.ascontiguousarray(av),
        X,
        np.ascontiguousarray(state.log_prior),
        problem.pattern.user_edges.astype(np.int64),
    )
    state.delta = np.moveaxis(delta, -1, 0)
    state.x_to_f = DiscreteMsg(np.moveaxis(xf, -1, 0), axis=0)
    state.beta = np.moveaxis(beta, -1, 0)
    _count(state, 2 * (delta.size - delta[..., 0].size))
    return (um, uv), (alm, alv)


# --------------------------------------------------------------------------
# channel-estimation loop
# --------------------------------------------------------------------------


def project_alpha_belief(state: ReceiverState, problem: ReceiverProblem):
    """Moment-matched channel belief per data slot (step 5)."""
    Np = problem.config.N_p
    fm, fv = _data(state.f_to_u, Np)
    am, av = _data(state.alpha_to_f, Np)
    cm, cv = alpha_components(fm, fv, am, av, problem.X, s=_total_var(state, problem))
    _count(state, cm[1:].size)
    return match_moments(state.beta, cm, cv)


def update_f_to_alpha(state: ReceiverState, problem: ReceiverProblem, belief=None) -> ReceiverState:
    """f -> alpha messages (step 6).

    Data slots divide the projected belief by alpha -> f (clamped, damped);
    pilot slots rescale f -> u by the known pilot.
    """
    cfg = problem.config
    Np = cfg.N_p
    if belief is None:
        belief = project_alpha_belief(state, problem)
    am, av = _data(state.alpha_to_f, Np)
    om, ov = _data(state.f_to_alpha, Np)
    m, v = ep_update(belief[0], belief[1], am, av, om, ov, cfg.var_cap, cfg.damping)
    xp = problem.x_pilot
    pm = state.f_to_u.mean[:, :Np] / xp
    pv = state.f_to_u.var[:, :Np] / np.abs(xp) ** 2
    state.f_to_alpha = GaussMsg(np.concatenate([pm, m], axis=1), np.concatenate([pv, v], axis=1), cfg.var_cap)
    return state


def combine_alpha(state: ReceiverState, problem: ReceiverProblem) -> ReceiverState:
    """Slot product, DFT-node message, channel belief and per-slot extrinsic alpha -> f (steps 7-9)."""
    cap = problem.config.var_cap
    fa = state.f_to_alpha
    v = 1.0 / np.sum(1.0 / fa.var, axis=1)
    state.alpha_to_phi = GaussMsg(v * np.sum(fa.mean / fa.var, axis=1), v, cap)
    hp = state.h_to_phi
    state.phi_to_alpha = GaussMsg(
        np.sum(problem.F * hp.mean, axis=-1), np.sum(np.abs(problem.F) ** 2 * hp.var, axis=-1), cap
    )
    ap, pa = state.alpha_to_phi, state.phi_to_alpha
    state.alpha_belief = GaussMsg(*gauss_product(ap.mean, ap.var, pa.mean, pa.var), cap)
    ab = state.alpha_belief
    m, v = ep_divide(ab.mean[:, None], ab.var[:, None], fa.mean, fa.var, cap)
    state.alpha_to_f = GaussMsg(m, v, cap)
    state._s = None
    return state


def update_h_messages(state: ReceiverState, problem: ReceiverProblem) -> ReceiverState:
    """DFT-node messages phi -> h and their product over a user's subcarriers (steps 10-11)."""
    cap = problem.config.var_cap
    F = problem.F
    F2 = np.abs(F) ** 2
    ap, hp = state.alpha_to_phi, state.h_to_phi
    mean = (ap.mean[..., None] - loo_sum(F * hp.mean)) / F
    var = (ap.var[..., None] + loo_sum(F2 * hp.var)) / F2
    state.phi_to_h = GaussMsg(mean, var, cap)
    ue = problem.pattern.user_edges
    ph = state.phi_to_h
    prec = (1.0 / ph.var)[:, ue, :].sum(axis=(0, 2))
    eta = (ph.mean / ph.var)[:, ue, :].sum(axis=(0, 2))
    state.h_to_q = GaussMsg(eta / prec, 1.0 / prec, cap)
    return state


# --------------------------------------------------------------------------
# activity loop
# --------------------------------------------------------------------------


def vb_activity(state: ReceiverState, problem: ReceiverProblem) -> ReceiverState:
    """Tap posterior under the current precision, Gamma update, extrinsic h -> phi (steps 12-13)."""
    cfg = problem.config
    hq = state.h_to_q
    shrink = 1.0 + state.tau_lambda * hq.var
    state.h_belief = GaussMsg(hq.mean / shrink, hq.var / shrink, cfg.var_cap)
    hb = state.h_belief
    power = np.abs(hb.mean) ** 2 + hb.var
    state.gamma = GammaBelief(np.full_like(power, cfg.a + 1.0), cfg.b + power)
    state.tau_lambda = state.gamma.mean
    eu = problem.pattern.edge_user
    ph = state.phi_to_h
    m, v = ep_divide(hb.mean[eu][None], hb.var[eu][None], ph.mean, ph.var, cfg.var_cap)
    state.h_to_phi = GaussMsg(m, v, cfg.var_cap)
    return state


def channel_power(tau_lambda: np.ndarray) -> np.ndarray:
    """Estimated total channel power per user, ``sum_l 1 / tau_lambda``."""
    return np.sum(1.0 / tau_lambda, axis=-1)


def detect_active(tau_lambda, delta: float) -> np.ndarray:
    """User is active unless its estimated channel power falls below ``delta``."""
    return ~(channel_power(np.asarray(tau_lambda)) < delta)


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------


@dataclass
class ReceiverOutput:
    """Result of one receiver run on one fading block.

    ``symbol_probs`` is (B, N_s, K, M+1) with index 0 the silent symbol;
    ``llr`` and ``bits`` are (B, N_s, K, log2 M), with
    ``llr = ln P(bit=0) / P(bit=1)`` marginalized over nonzero codewords.
    """

    symbol_probs: np.ndarray
    llr: np.ndarray
    bits: np.ndarray
    h_hat: np.ndarray
    active: np.ndarray
    power: np.ndarray
    iterations: int
    ops: int
    ops_per_iteration: float


def symbol_posteriors(log_prior, delta, pattern: FactorGraphPattern) -> np.ndarray:
    """Full symbol beliefs (B, N_s, K, M+1) from per-edge distances (M+1, B, N_s, E)."""
    d = delta[..., pattern.user_edges].sum(axis=-1)  # (M+1, B, N_s, K)
    p = normalize_log(log_prior[:, None, None, :] - d, axis=0)
    return np.moveaxis(p, 0, -1)


def bit_decisions(symbol_probs: np.ndarray, codebook: Codebook):
    """Bit LLRs and hard bits marginalized over the nonzero codewords."""
    p = np.maximum(symbol_probs[..., 1:], 1e-300)
    bt = codebook.bit_table.astype(bool)  # (K, M, nb)
    p1 = np.einsum("...km,kmi->...ki", p, bt.astype(float))
    p0 = np.einsum("...km,kmi->...ki", p, (~bt).astype(float))
    llr = np.log(np.maximum(p0, 1e-300)) - np.log(np.maximum(p1, 1e-300))
    m = np.argmax(p, axis=-1)
    K = bt.shape[0]
    bits = codebook.bit_table[np.arange(K), m]
    return llr, bits


def finalize(state: ReceiverState, problem: ReceiverProblem) -> ReceiverOutput:
    cfg = problem.config
    probs = symbol_posteriors(state.log_prior, state.delta, problem.pattern)
    llr, bits = bit_decisions(probs, problem.codebook)
    power = channel_power(state.tau_lambda)
    per_iter = float(np.mean(state.ops_history)) if state.ops_history else 0.0
    return ReceiverOutput(
        symbol_probs=probs,
        llr=llr,
        bits=bits,
        h_hat=state.h_belief.mean.copy(),
        active=~(power < cfg.activity_threshold),
        power=power,
        iterations=state.iteration,
        ops=state.ops,
        ops_per_iteration=per_iter,
    )


def iterate(state: ReceiverState, problem: ReceiverProblem, fused: bool = True) -> ReceiverState:
    """One pass of the 13-step schedule.

    ``fused=False`` runs the vectorized reference functions instead of the
    compiled kernel for the data-edge projections.
    """
    ops0 = state.ops
    update_f_to_u(state, problem)
    if fused:
        u_belief, a_belief = fused_data_projection(state, problem)
    else:
        symbol_extrinsic(state, problem)
        u_belief = project_u_belief(state, problem)
        a_belief = project_alpha_belief(state, problem)
    update_u_to_f(state, problem, u_belief)
    update_f_to_alpha(state, problem, a_belief)
    combine_alpha(state, problem)
    update_h_messages(state, problem)
    vb_activity(state, problem)
    state.iteration += 1
    state.ops_history.append(state.ops - ops0)
    return state


def run_receiver(
    Y,
    pilots: PilotBook,
    codebook: Codebook,
    pattern: FactorGraphPattern,
    config: SystemConfig,
    *,
    ml: MlEstimate | None = None,
    tol: float = 1e-4,
    callback: Callable[[ReceiverState, ReceiverProblem], None] | None = None,
    fused: bool = True,
) -> ReceiverOutput:
    """Run BP-GA-EP on one fading block.

    Iterates until the largest change of a tap-belief mean drops below
    ``tol`` (``tol=0`` disables early stopping) or ``config.max_iters``.
    ``callback(state, problem)`` is invoked after every iteration.
    """
    problem = ReceiverProblem.build(Y, pilots, codebook, pattern, config)
    if ml is None:
        ml = ml_estimate(problem.y_pilot, pilots, config, pattern)
    state = init_state(ml, problem)
    prev = state.h_belief.mean.copy()
    for _ in range(config.max_iters):
        iterate(state, problem, fused)
        if callback is not None:
            callback(state, problem)
        cur = state.h_belief.mean
        if tol > 0 and np.max(np.abs(cur - prev)) < tol:
            break
        prev = cur.copy()
    return finalize(state, problem)
