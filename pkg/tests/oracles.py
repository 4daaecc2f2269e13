"""Independent numerical oracles shared by the unit and acceptance tests."""

import itertools

import numpy as np


def random_instances(rng, n, M=4):
    """Random edge-level inputs: f -> u, alpha -> f messages, hypotheses and prior."""
    disk = lambda r: r * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
    X = np.zeros((n, M + 1), complex)
    X[:, 1:] = rng.uniform(0.4, 1.1, (n, M)) * np.exp(2j * np.pi * rng.uniform(0, 1, (n, M)))
    prior = rng.dirichlet(np.ones(M + 1), n)
    return dict(
        fm=disk(1.5),
        fv=rng.uniform(0.3, 1.0, n),
        am=disk(1.5),
        av=rng.uniform(0.3, 1.0, n),
        X=X,
        prior=prior,
    )


def _grid(half_width, h):
    g = np.arange(-half_width, half_width + h / 2, h)
    return (g[:, None] + 1j * g[None, :]).ravel(), h * h


def _cn(z, m, v):
    d = z - m
    return np.exp(-(d.real**2 + d.imag**2) / v) / (np.pi * v)


def grid_moments_dense(inst, which, half_width=9.0, h=0.1, chunk=64):
    """Posterior mean and variance of ``u`` or ``alpha`` by trapezoidal integration.

    ``which="u"``: density ``CN(u; fm, fv) * [p0 delta(u) + sum_x p(x) CN(u; am x, av |x|^2)]``,
    where only the point mass is integrated in closed form.
    ``which="alpha"``: density ``CN(alpha; am, av) * sum_x p(x) CN(fm; alpha x, fv)``.
    """
    z, dA = _grid(half_width, h)
    n = inst["fm"].size
    mean = np.empty(n, complex)
    var = np.empty(n)
    for lo in range(0, n, chunk):
        sl = slice(lo, lo + chunk)
        fm, fv = inst["fm"][sl, None], inst["fv"][sl, None]
        am, av = inst["am"][sl, None], inst["av"][sl, None]
        X, p = inst["X"][sl], inst["prior"][sl]
        dens = np.zeros((fm.shape[0], z.size))
        if which == "u":
            lik = _cn(z[None], fm, fv)
            for m in range(1, X.shape[1]):
                x = X[:, m : m + 1]
                dens += p[:, m : m + 1] * lik * _cn(z[None], am * x, av * np.abs(x) ** 2)
            w0 = p[:, 0] * _cn(0.0, fm[:, 0], fv[:, 0])
        else:
            pri = _cn(z[None], am, av)
            mix = np.zeros_like(dens)
            for m in range(X.shape[1]):
                mix += p[:, m : m + 1] * _cn(fm, z[None] * X[:, m : m + 1], fv)
            dens = pri * mix
            w0 = np.zeros(fm.shape[0])
        Z = dens.sum(axis=1) * dA + w0
        m1 = (dens * z[None]).sum(axis=1) * dA / Z
        m2 = (dens * np.abs(z[None]) ** 2).sum(axis=1) * dA / Z
        mean[sl] = m1
        var[sl] = m2 - np.abs(m1) ** 2
    return mean, var


def _axis_sums(g, c1, v1, c2, v2):
    """1-D sums of ``g**k exp(-(g-c1)^2/v1 - (g-c2)^2/v2)`` for k = 0, 1, 2 (real centres)."""
    e = np.exp(-((g - c1[..., None]) ** 2) / v1[..., None] - (g - c2[..., None]) ** 2 / v2[..., None])
    return e.sum(-1), (e * g).sum(-1), (e * g * g).sum(-1)


def grid_moments(inst, which, half_width=9.0, h=0.02):
    """Same trapezoidal rule as :func:`grid_moments_dense`, evaluated per component.

    Every mixture component is a product of two isotropic complex Gaussian
    factors, so its 2-D grid sum is the product of a real-axis and an
    imaginary-axis 1-D sum. This makes a much finer grid affordable.
    """
    g = np.arange(-half_width, half_width + h / 2, h)
    dA = h * h
    fm, fv, am, av = inst["fm"], inst["fv"], inst["am"], inst["av"]
    X, p = inst["X"], inst["prior"]
    big = np.full_like(fv, np.inf)
    Z = np.zeros(fm.size)
    S1 = np.zeros(fm.size, complex)
    S2 = np.zeros(fm.size)
    for m in range(X.shape[1]):
        x = X[:, m]
        if which == "u":
            if m == 0:
                Z += p[:, 0] * _cn(0.0, fm, fv)
                continue
            w = av * np.abs(x) ** 2
            c, c1, v1, c2, v2 = p[:, m] / (np.pi * fv * np.pi * w), fm, fv, am * x, w
        elif m == 0:
            c = p[:, 0] * _cn(fm, 0.0, fv) / (np.pi * av)
            c1, v1, c2, v2 = am, av, np.zeros_like(am), big
        else:
            # |fm - alpha x|^2 = |x|^2 |alpha - fm / x|^2
            c, c1, v1, c2, v2 = p[:, m] / (np.pi * av * np.pi * fv), am, av, fm / x, fv / np.abs(x) ** 2
        r0, r1, r2 = _axis_sums(g, c1.real, v1, c2.real, v2)
        i0, i1, i2 = _axis_sums(g, c1.imag, v1, c2.imag, v2)
        Z += c * dA * r0 * i0
        S1 += c * dA * (r1 * i0 + 1j * r0 * i1)
        S2 += c * dA * (r2 * i0 + r0 * i2)
    mean = S1 / Z
    return mean, S2 / Z - np.abs(mean) ** 2


def brute_force_marginals(y, alpha, table, noise_var, log_prior=None):
    """Exact per-user symbol marginals by enumerating all joint hypotheses.

    ``y`` (N,), ``alpha`` (N, K), ``table`` (K, A, N) codeword entries,
    ``log_prior`` (K, A).
    """
    K, A, _ = table.shape
    combos = list(itertools.product(range(A), repeat=K))
    logs = np.empty(len(combos))
    for i, c in enumerate(combos):
        s = sum(alpha[:, k] * table[k, c[k]] for k in range(K))
        logs[i] = -np.sum(np.abs(y - s) ** 2) / noise_var
        if log_prior is not None:
            logs[i] += sum(log_prior[k, c[k]] for k in range(K))
    w = np.exp(logs - logs.max())
    w /= w.sum()
    marg = np.zeros((K, A))
    for c, wc in zip(combos, w):
        marg[np.arange(K), list(c)] += wc
    return marg


def grid_evidence(inst, half_width=9.0, h=0.02):
    """``Z(x) = int CN(alpha; am, av) CN(fm; alpha x, fv) d alpha`` per hypothesis, shape (n, M+1)."""
    g = np.arange(-half_width, half_width + h / 2, h)
    fm, fv, am, av, X = inst["fm"], inst["fv"], inst["am"], inst["av"], inst["X"]
    out = np.empty(X.shape)
    for m in range(X.shape[1]):
        x = X[:, m]
        if m == 0:
            out[:, 0] = _cn(fm, 0.0, fv)
            continue
        c = 1.0 / (np.pi * av * np.pi * fv)
        v2 = fv / np.abs(x) ** 2
        r0 = _axis_sums(g, am.real, av, (fm / x).real, v2)[0]
        i0 = _axis_sums(g, am.imag, av, (fm / x).imag, v2)[0]
        out[:, m] = c * h * h * r0 * i0
    return out
