"""Reference receivers: genie-aided exact MPA and the BP-MF joint receiver."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..codebook import Codebook
from ..config import ConfigError, SystemConfig
from ..messages import VAR_FLOOR, GaussMsg, normalize_log
from ..pattern import FactorGraphPattern
from ..pilots import MlEstimate, PilotBook, ml_estimate
from .ep import (
    ReceiverOutput,
    ReceiverProblem,
    bit_decisions,
    channel_power,
    init_state,
    update_h_messages,
    vb_activity,
)

#: MPA iterations used to initialize the BP-MF symbol beliefs.
MF_WARMUP_ITERS = 3

#: Lower bound on normalized log-messages inside the MPA.
LOG_FLOOR = -700.0


# --------------------------------------------------------------------------
# discrete sum-product (MPA)
# --------------------------------------------------------------------------


@dataclass
class MpaResult:
    """Log symbol beliefs (B, S, K, A) of the instantiated users and the op count.

    Rows of users outside ``users`` are left at ``-inf``.
    """

    log_belief: np.ndarray
    users: np.ndarray
    ops_per_iteration: int
    iterations: int


def mpa(y, alpha, table, pattern: FactorGraphPattern, users, noise_var: float, iters: int, log_prior=None) -> MpaResult:
    """Sum-product over the SCMA factor graph with known channel coefficients.

    Parameters
    ----------
    y : ndarray, shape (B, S, N)
        Observations of the data slots.
    alpha : ndarray, shape (B, N, K)
        Channel coefficients treated as exact.
    table : ndarray, shape (K, A, N)
        Alphabet per user (``codebook.codewords`` or ``codebook.augmented``).
    users : array of bool, shape (K,)
        Users whose symbols are variables; all others are taken as silent.
    noise_var : float
    iters : int
        Number of flooding iterations (function and variable updates).
    log_prior : ndarray, shape (K, A), optional
        Symbol log-priors; uniform when omitted.

    Notes
    -----
    Each subcarrier factor enumerates all ``A**d`` joint hypotheses of its
    ``d`` instantiated users. ``ops_per_iteration`` counts these joint
    hypothesis evaluations, ``B * S * sum_n A**d_n``.
    """
    y = np.asarray(y)
    B, S, N = y.shape
    K, A, _ = table.shape
    users = np.asarray(users, dtype=bool)
    s2 = max(float(noise_var), VAR_FLOOR)
    if log_prior is None:
        log_prior = np.full((K, A), -np.log(A))
    factors = []
    ops = 0
    for n in range(N):
        U = [k for k in pattern.F[n] if users[k]]
        d = len(U)
        if d == 0:
            continue
        combos = np.array(list(itertools.product(range(A), repeat=d)))  # (A^d, d)
        S_n = np.zeros((B, len(combos)), dtype=complex)
        for i, k in enumerate(U):
            S_n += alpha[:, n, k][:, None] * table[k, combos[:, i], n][None, :]
        r = y[:, :, n][..., None] - S_n[:, None, :]
        ll = -(r.real**2 + r.imag**2) / s2
        factors.append((n, U, ll.reshape((B, S) + (A,) * d)))
        ops += B * S * len(combos)
    # variable -> factor messages, start uniform
    v2f = {(n, k): np.zeros((B, S, A)) for n, U, _ in factors for k in U}
    f2v = {(n, k): np.zeros((B, S, A)) for n, U, _ in factors for k in U}
    for _ in range(iters):
        for n, U, ll in factors:
            d = len(U)
            total = ll.copy()
            for i, k in enumerate(U):
                total += v2f[(n, k)].reshape(_axis_shape(B, S, A, d, i))
            top = total.reshape(B, S, -1).max(axis=-1).reshape((B, S) + (1,) * d)
            P = np.exp(total - top)
            for i, k in enumerate(U):
                other = tuple(2 + j for j in range(d) if j != i)
                marg = P.sum(axis=other) if other else P
                with np.errstate(divide="ignore"):
                    msg = np.log(marg) - v2f[(n, k)]
                # floor keeps later subtractions finite when a marginal underflows
                f2v[(n, k)] = np.maximum(msg - msg.max(axis=-1, keepdims=True), LOG_FLOOR)
        for k in np.flatnonzero(users):
            tot = log_prior[k] + sum(f2v[(n, k)] for n in pattern.V[k])
            for n in pattern.V[k]:
                m = tot - f2v[(n, k)]
                v2f[(n, k)] = m - m.max(axis=-1, keepdims=True)
    log_belief = np.full((B, S, K, A), -np.inf)
    for k in np.flatnonzero(users):
        tot = log_prior[k] + sum(f2v[(n, k)] for n in pattern.V[k])
        log_belief[:, :, k] = tot - logsumexp(tot, axis=-1, keepdims=True)
    return MpaResult(log_belief, users, ops, iters)


def _axis_shape(B, S, A, d, i):
    shape = [B, S] + [1] * d
    shape[2 + i] = A
    return shape


# --------------------------------------------------------------------------
# genie receiver
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GenieInput:
    """True channel and activity plus the data-slot observations (B, N_s, N)."""

    alpha: np.ndarray
    active: np.ndarray
    Y: np.ndarray
    codebook: Codebook
    pattern: FactorGraphPattern
    noise_var: float

    def __post_init__(self):
        B, S, N = np.shape(self.Y)
        if np.shape(self.alpha) != (B, N, self.pattern.K):
            raise ConfigError("alpha does not match the observations")
        if np.shape(self.active) != (self.pattern.K,):
            raise ConfigError("activity flags do not match the pattern")


def genie_input(frame) -> GenieInput:
    """Genie view of a simulated :class:`~gfscma.frame.Frame`."""
    Np = frame.config.N_p
    return GenieInput(
        alpha=frame.alpha,
        active=frame.active,
        Y=frame.Y[:, Np:],
        codebook=frame.codebook,
        pattern=frame.pattern,
        noise_var=frame.config.noise_var,
    )


def mpa_genie(inp: GenieInput, iters: int = 10, H=None) -> ReceiverOutput:
    """Exact MPA over the true active users with perfect CSI.

    Symbol posteriors are returned over the augmented alphabet for a common
    output format: silent users are one-hot on index 0, active users put
    no mass there. ``h_hat`` is ``H`` when given (the genie knows the taps),
    otherwise zeros.
    """
    cb, pat = inp.codebook, inp.pattern
    active = np.asarray(inp.active, dtype=bool)
    res = mpa(inp.Y, inp.alpha, cb.codewords, pat, active, inp.noise_var, iters)
    B, S, K, M = res.log_belief.shape
    probs = np.zeros((B, S, K, M + 1))
    probs[:, :, ~active, 0] = 1.0
    probs[:, :, active, 1:] = np.exp(res.log_belief[:, :, active])
    llr, bits = bit_decisions(probs, cb)
    h = np.zeros((K, 1)) if H is None else np.asarray(H).copy()
    return ReceiverOutput(
        symbol_probs=probs,
        llr=llr,
        bits=bits,
        h_hat=h,
        active=active.copy(),
        power=np.where(active, np.inf, 0.0),
        iterations=iters,
        ops=res.ops_per_iteration * iters,
        ops_per_iteration=float(res.ops_per_iteration),
    )


# --------------------------------------------------------------------------
# BP-MF receiver
# --------------------------------------------------------------------------


def mf_symbol_messages(y, a_mean, a_var, x_mean, noise_var):
    """Mean-only interference cancellation on one subcarrier (last axis over ``F[n]``).

    Returns ``(tau, upsilon)`` of the Gaussian message f -> x for each user;
    the interferers enter only through the product of their channel and
    symbol means.
    """
    prod = a_mean * x_mean
    interf = prod.sum(axis=-1, keepdims=True) - prod
    power = np.abs(a_mean) ** 2 + a_var
    tau = np.conj(a_mean) * (y[..., None] - interf) / power
    ups = noise_var / power
    return tau, ups


def mf_channel_message(y, x_mean, x_var, a_mean, noise_var):
    """Mean-field message on ``alpha`` from every slot, combined over slots.

    ``y`` (B, T, N) grouped per subcarrier, ``x_mean``/``x_var`` (B, T, N, d_c)
    symbol belief moments, ``a_mean`` (B, N, d_c) current channel means.
    Returns ``(mean, var)`` of shape (B, N, d_c).
    """
    prod = a_mean[:, None] * x_mean
    interf = prod.sum(axis=-1, keepdims=True) - prod
    resid = y[..., None] - interf
    prec = np.sum(np.abs(x_mean) ** 2 + x_var, axis=1) / noise_var
    eta = np.sum(np.conj(x_mean) * resid, axis=1) / noise_var
    prec = np.maximum(prec, VAR_FLOOR)
    return eta / prec, 1.0 / prec


def bp_mf_receiver(
    Y,
    pilots: PilotBook,
    codebook: Codebook,
    pattern: FactorGraphPattern,
    config: SystemConfig,
    *,
    ml: MlEstimate | None = None,
    tol: float = 1e-4,
    warmup_iters: int = MF_WARMUP_ITERS,
    callback=None,
) -> ReceiverOutput:
    """Joint channel estimation, detection and activity detection by BP-MF.

    Symbols live on the augmented alphabet so silent users can be
    represented. Initialization: ML taps, then ``warmup_iters`` MPA
    iterations with the ML channel to get initial symbol beliefs. Each
    iteration then runs the mean-field channel update, the tap and
    activity messages shared with BP-GA-EP, and mean-only interference
    cancellation for the symbols.

    ``ops_per_iteration`` counts per-hypothesis evaluations: the symbol
    likelihoods and the symbol moments, ``2 * B * N_s * E * M``.
    """
    problem = ReceiverProblem.build(Y, pilots, codebook, pattern, config)
    cfg = config
    Np, cap = cfg.N_p, cfg.var_cap
    s2 = problem.noise_var
    if ml is None:
        ml = ml_estimate(problem.y_pilot, pilots, config, pattern)
    state = init_state(ml, problem)
    se, ue = pattern.sub_edges, pattern.user_edges
    X = problem.X[:, 0, 0, :]  # (M+1, E)
    X2 = np.abs(X) ** 2
    F = problem.F

    # channel belief from the ML taps
    state.phi_to_alpha = GaussMsg(np.sum(F * state.h_to_phi.mean, axis=-1), np.zeros(F.shape[:2]) + VAR_FLOOR, cap)
    a_mean = state.phi_to_alpha.mean
    a_var = np.zeros_like(a_mean.real)
    # warm-up MPA on the augmented alphabet with the ML channel
    alpha_bnk = np.zeros((cfg.B, cfg.N, cfg.K), dtype=complex)
    alpha_bnk[:, pattern.edge_sub, pattern.edge_user] = a_mean
    warm = mpa(
        problem.y[:, Np:], alpha_bnk, codebook.augmented, pattern, np.ones(cfg.K, bool), s2, warmup_iters
    )
    belief = np.exp(warm.log_belief)  # (B, S, K, M+1)
    warm_ops = warm.ops_per_iteration * warmup_iters

    def symbol_moments(belief):
        pe = np.moveaxis(belief, -1, 0)[..., pattern.edge_user]  # (M+1, B, S, E)
        xm = np.sum(pe * X[:, None, None, :], axis=0)
        xv = np.maximum(np.sum(pe * X2[:, None, None, :], axis=0) - np.abs(xm) ** 2, 0.0)
        return xm, xv

    xp = problem.x_pilot
    ops_iter = 2 * cfg.B * cfg.N_s * pattern.n_edges * cfg.M
    history = []
    prev = state.h_belief.mean.copy()
    it = 0
    for it in range(1, cfg.max_iters + 1):
        xm, xv = symbol_moments(belief)
        x_mean = np.concatenate([xp, xm], axis=1)  # (B, T, E)
        x_var = np.concatenate([np.zeros(xp.shape), xv], axis=1)
        m_sub, v_sub = mf_channel_message(problem.y, x_mean[..., se], x_var[..., se], a_mean[:, se], s2)
        state.alpha_to_phi = GaussMsg(problem.from_sub(m_sub), problem.from_sub(v_sub), cap)
        update_h_messages(state, problem)
        vb_activity(state, problem)
        hp = state.h_to_phi
        pm, pv = np.sum(F * hp.mean, axis=-1), np.sum(np.abs(F) ** 2 * hp.var, axis=-1)
        ap = state.alpha_to_phi
        v = 1.0 / (1.0 / ap.var + 1.0 / pv)
        state.alpha_belief = GaussMsg(v * (ap.mean / ap.var + pm / pv), v, cap)
        a_mean, a_var = state.alpha_belief.mean, state.alpha_belief.var
        # data detection
        tau, ups = mf_symbol_messages(
            problem.y[:, Np:], a_mean[:, None, se], a_var[:, None, se], xm[..., se], s2
        )
        tau, ups = problem.from_sub(tau), problem.from_sub(ups)  # (B, S, E)
        r = tau[None] - X[:, None, None, :]
        ll = -(r.real**2 + r.imag**2) / ups[None]  # (M+1, B, S, E)
        logb = state.log_prior[:, None, None, :] + ll[..., ue].sum(axis=-1)
        belief = np.moveaxis(normalize_log(logb, axis=0), 0, -1)
        history.append(ops_iter)
        state.iteration = it
        if callback is not None:
            callback(state, problem)
        cur = state.h_belief.mean
        if tol > 0 and np.max(np.abs(cur - prev)) < tol:
            break
        prev = cur.copy()
    llr, bits = bit_decisions(belief, codebook)
    power = channel_power(state.tau_lambda)
    return ReceiverOutput(
        symbol_probs=belief,
        llr=llr,
        bits=bits,
        h_hat=state.h_belief.mean.copy(),
        active=~(power < cfg.activity_threshold),
        power=power,
        iterations=it,
        ops=warm_ops + ops_iter * len(history),
        ops_per_iteration=float(ops_iter),
    )
