"""Sparse user/subcarrier incidence structure of one subcarrier block."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np

from .config import ConfigError, SystemConfig


@dataclass(frozen=True, eq=False)
class FactorGraphPattern:
    """Binary K x N incidence matrix and its row/column supports.

    ``F[n]`` lists the users colliding on subcarrier ``n`` and ``V[k]`` the
    subcarriers occupied by user ``k``, both in increasing order. Edges are
    numbered row-major over the incidence matrix; ``edge_user`` and
    ``edge_sub`` give the endpoints of each edge.

    Irregular patterns are allowed here (the genie decoder works on any
    graph); regular ones expose ``d_v``/``d_c`` and the rectangular edge
    tables ``user_edges`` (K x d_v) and ``sub_edges`` (N x d_c) used by the
    vectorized receivers.
    """

    incidence: np.ndarray

    def __post_init__(self):
        inc = np.asarray(self.incidence)
        if inc.ndim != 2 or inc.size == 0:
            raise ConfigError("incidence must be a nonempty 2-D array")
        if not np.isin(inc, (0, 1)).all():
            raise ConfigError("incidence must be binary")
        inc = inc.astype(np.int8)
        if (inc.sum(axis=1) == 0).any() or (inc.sum(axis=0) == 0).any():
            raise ConfigError("every user and subcarrier needs at least one edge")
        inc.setflags(write=False)
        object.__setattr__(self, "incidence", inc)

    @property
    def K(self) -> int:
        return self.incidence.shape[0]

    @property
    def N(self) -> int:
        return self.incidence.shape[1]

    @cached_property
    def F(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(np.flatnonzero(self.incidence[:, n]).tolist()) for n in range(self.N))

    @cached_property
    def V(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(np.flatnonzero(self.incidence[k]).tolist()) for k in range(self.K))

    @cached_property
    def edge_user(self) -> np.ndarray:
        return np.nonzero(self.incidence)[0]

    @cached_property
    def edge_sub(self) -> np.ndarray:
        return np.nonzero(self.incidence)[1]

    @property
    def n_edges(self) -> int:
        return int(self.edge_user.size)

    @cached_property
    def _edge_id(self) -> np.ndarray:
        eid = -np.ones(self.incidence.shape, dtype=np.intp)
        eid[self.edge_user, self.edge_sub] = np.arange(self.n_edges)
        return eid

    def edge(self, k: int, n: int) -> int:
        e = int(self._edge_id[k, n])
        if e < 0:
            raise KeyError(f"user {k} does not occupy subcarrier {n}")
        return e

    @property
    def is_regular(self) -> bool:
        return len(set(self.incidence.sum(axis=1))) == 1 and len(set(self.incidence.sum(axis=0))) == 1

    @property
    def d_v(self) -> int:
        self._require_regular()
        return int(self.incidence[0].sum())

    @property
    def d_c(self) -> int:
        self._require_regular()
        return int(self.incidence[:, 0].sum())

    @cached_property
    def user_edges(self) -> np.ndarray:
        """(K, d_v) edge ids per user, ordered by subcarrier."""
        self._require_regular()
        out = np.array([[self._edge_id[k, n] for n in self.V[k]] for k in range(self.K)], dtype=np.intp)
        out.setflags(write=False)
        return out

    @cached_property
    def sub_edges(self) -> np.ndarray:
        """(N, d_c) edge ids per subcarrier, ordered by user."""
        self._require_regular()
        out = np.array([[self._edge_id[k, n] for k in self.F[n]] for n in range(self.N)], dtype=np.intp)
        out.setflags(write=False)
        return out

    @cached_property
    def edge_rank_in_sub(self) -> np.ndarray:
        """Position of each edge's user within ``F[n]``."""
        rank = np.empty(self.n_edges, dtype=np.intp)
        for n, users in enumerate(self.F):
            for j, k in enumerate(users):
                rank[self._edge_id[k, n]] = j
        return rank

    def _require_regular(self):
        if not self.is_regular:
            raise ConfigError("operation needs a (d_v, d_c)-regular pattern")

    def matches(self, config: SystemConfig) -> bool:
        return (
            self.is_regular
            and (self.K, self.N, self.d_v, self.d_c) == (config.K, config.N, config.d_v, config.d_c)
        )


def _base_tile(N0: int, K0: int, d_v: int, d_c: int) -> np.ndarray | None:
    """First (lexicographic) set of K0 distinct d_v-subsets of range(N0) with column sums d_c."""
    supports = list(combinations(range(N0), d_v))
    if len(supports) < K0:
        return None
    counts = np.zeros(N0, dtype=int)
    chosen: list[tuple[int, ...]] = []

    def search(start: int) -> bool:
        if len(chosen) == K0:
            return bool((counts == d_c).all())
        for i in range(start, len(supports)):
            s = supports[i]
            if any(counts[n] >= d_c for n in s):
                continue
            # Remaining slots must be fillable by the remaining candidates.
            if len(supports) - i < K0 - len(chosen):
                return False
            for n in s:
                counts[n] += 1
            chosen.append(s)
            if search(i + 1):
                return True
            chosen.pop()
            for n in s:
                counts[n] -= 1
        return False

    if not search(0):
        return None
    tile = np.zeros((K0, N0), dtype=np.int8)
    for k, s in enumerate(chosen):
        tile[k, list(s)] = 1
    return tile


def build_pattern(config: SystemConfig, seed: int | None = None) -> FactorGraphPattern:
    """Deterministic (d_v, d_c)-regular pattern built by tiling a base block.

    The base block is the smallest ``K0 x N0`` tile with ``N0 | N``,
    ``K0 = N0 * d_c / d_v`` and distinct user supports; the default system
    uses a 12 x 6 tile repeated four times along the diagonal. When no tile
    with distinct supports exists (e.g. ``d_v = 1 < d_c``) the slots are
    filled cyclically instead. A non-None
    ``seed`` applies a reproducible permutation of user labels.
    """
    K, N, d_v, d_c = config.K, config.N, config.d_v, config.d_c
    if K * d_v != N * d_c:
        raise ConfigError("degree equation K*d_v = N*d_c is unsatisfiable")
    tile = None
    for N0 in range(1, N + 1):
        if N % N0 or (N0 * d_c) % d_v:
            continue
        K0 = N0 * d_c // d_v
        if d_v > N0 or d_c > K0:
            continue
        tile = _base_tile(N0, K0, d_v, d_c)
        if tile is not None:
            break
    if tile is None:
        # users must share supports: fill slots cyclically
        inc = np.zeros((K, N), dtype=np.int8)
        for k in range(K):
            inc[k, [(k * d_v + j) % N for j in range(d_v)]] = 1
    else:
        reps = N // tile.shape[1]
        inc = np.kron(np.eye(reps, dtype=np.int8), tile)
    if seed is not None:
        perm = np.random.default_rng(seed).permutation(K)
        inc = inc[perm]
    return FactorGraphPattern(inc)
