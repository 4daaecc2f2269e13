"""SCMA codebooks: loading, normalization and the bit/codeword map.

Codebook files are JSON::

    {"M": 4,
     "users": [{"support": [n1, n2],
                "codewords": [[[re, im], [re, im]], ...],
                "bits": ["00", "01", "11", "10"]}, ...]}

Each codeword lists either its ``len(support)`` nonzero entries or all
``N`` entries. Index 0 of the augmented alphabet is the all-zero codeword;
codeword ``m`` of the file is augmented index ``m + 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ConfigError
from .pattern import FactorGraphPattern


class CodebookError(ConfigError):
    """Malformed or inconsistent codebook."""


@dataclass(frozen=True, eq=False)
class Codebook:
    """Per-user sparse codewords with unit average energy.

    Attributes
    ----------
    codewords : ndarray, shape (K, M, N)
        Complex codewords; zero outside each user's support.
    bit_table : ndarray, shape (K, M, log2 M)
        Bit label of every codeword.
    """

    codewords: np.ndarray
    bit_table: np.ndarray

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=complex)
        bt = np.asarray(self.bit_table, dtype=np.int8)
        if cw.ndim != 3 or bt.shape != cw.shape[:2] + (int(math.log2(cw.shape[1])),):
            raise CodebookError("codewords must be (K, M, N) and bit_table (K, M, log2 M)")
        cw.setflags(write=False)
        bt.setflags(write=False)
        object.__setattr__(self, "codewords", cw)
        object.__setattr__(self, "bit_table", bt)

    @property
    def K(self) -> int:
        return self.codewords.shape[0]

    @property
    def M(self) -> int:
        return self.codewords.shape[1]

    @property
    def N(self) -> int:
        return self.codewords.shape[2]

    @property
    def bits_per_symbol(self) -> int:
        return self.bit_table.shape[2]

    @property
    def zero_codeword(self) -> np.ndarray:
        return np.zeros(self.N, dtype=complex)

    @cached_property
    def augmented(self) -> np.ndarray:
        """(K, M+1, N) alphabet with the zero codeword at index 0."""
        out = np.concatenate([np.zeros((self.K, 1, self.N), complex), self.codewords], axis=1)
        out.setflags(write=False)
        return out

    @cached_property
    def _label_index(self) -> list[dict[tuple[int, ...], int]]:
        return [{tuple(row.tolist()): m for m, row in enumerate(self.bit_table[k])} for k in range(self.K)]

    def edge_table(self, pattern: FactorGraphPattern, augmented: bool = True) -> np.ndarray:
        """Per-edge symbol values, shape (E, M+1) or (E, M)."""
        src = self.augmented if augmented else self.codewords
        return src[pattern.edge_user, :, pattern.edge_sub]

    def index_of(self, bits, user: int) -> int:
        key = tuple(int(b) for b in np.asarray(bits).ravel())
        if len(key) != self.bits_per_symbol:
            raise ValueError(f"expected {self.bits_per_symbol} bits, got {len(key)}")
        return self._label_index[user][key]


def encode(bits, codebook: Codebook, user: int) -> np.ndarray:
    """Codeword (length N) carrying ``bits`` for ``user``."""
    return codebook.codewords[user, codebook.index_of(bits, user)].copy()


def decode_index(probs, codebook: Codebook, user: int) -> np.ndarray:
    """Bits of the most likely nonzero codeword under an (M+1)-vector of probabilities."""
    probs = np.asarray(probs)
    m = int(np.argmax(probs[1:]))
    return codebook.bit_table[user, m].copy()


def _parse_complex(entry) -> complex:
    if isinstance(entry, (list, tuple)) and len(entry) == 2:
        return complex(float(entry[0]), float(entry[1]))
    raise CodebookError(f"complex entries must be [re, im] pairs, got {entry!r}")


def codebook_from_dict(doc: dict, pattern: FactorGraphPattern) -> Codebook:
    try:
        M = int(doc["M"])
        users = doc["users"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CodebookError(f"codebook needs keys 'M' and 'users': {exc}") from None
    if M < 2 or M & (M - 1):
        raise CodebookError(f"M must be a power of two, got {M}")
    nb = int(math.log2(M))
    if len(users) != pattern.K:
        raise CodebookError(f"codebook has {len(users)} users, pattern has {pattern.K}")
    cw = np.zeros((pattern.K, M, pattern.N), dtype=complex)
    bt = np.zeros((pattern.K, M, nb), dtype=np.int8)
    for k, u in enumerate(users):
        support = tuple(int(n) for n in u["support"])
        if support != pattern.V[k]:
            raise CodebookError(f"user {k}: support {support} does not match pattern {pattern.V[k]}")
        words = u["codewords"]
        if len(words) != M:
            raise CodebookError(f"user {k}: expected {M} codewords, got {len(words)}")
        for m, w in enumerate(words):
            vals = np.array([_parse_complex(e) for e in w])
            if not np.isfinite(vals).all():
                raise CodebookError(f"user {k}, codeword {m}: non-finite entry")
            if vals.size == len(support):
                cw[k, m, list(support)] = vals
            elif vals.size == pattern.N:
                off = np.setdiff1d(np.arange(pattern.N), support)
                if np.any(vals[off] != 0):
                    raise CodebookError(f"user {k}, codeword {m}: nonzero entry outside support")
                cw[k, m] = vals
            else:
                raise CodebookError(f"user {k}, codeword {m}: wrong length {vals.size}")
            if np.any(cw[k, m, list(support)] == 0):
                raise CodebookError(f"user {k}, codeword {m}: zero entry inside support")
        labels = u.get("bits") or [format(m, f"0{nb}b") for m in range(M)]
        if len(labels) != M or len(set(labels)) != M or any(len(s) != nb or set(s) - {"0", "1"} for s in labels):
            raise CodebookError(f"user {k}: bits must be {M} distinct {nb}-bit strings")
        bt[k] = [[int(c) for c in s] for s in labels]
        energy = np.mean(np.sum(np.abs(cw[k]) ** 2, axis=1))
        cw[k] /= math.sqrt(energy)
    return Codebook(cw, bt)


def load_codebook(path: str | Path | None, pattern: FactorGraphPattern) -> Codebook:
    """Load and normalize a codebook file; ``None`` loads the bundled default."""
    if path is None:
        text = resources.files("gfscma").joinpath("data/default_codebook.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodebookError(f"cannot parse codebook: {exc}") from None
    return codebook_from_dict(doc, pattern)


def _gray(m: int) -> int:
    return m ^ (m >> 1)


def default_codebook_dict(pattern: FactorGraphPattern, M: int = 4) -> dict:
    """Rotated-PSK codebook for any pattern.

    Dimension ``i`` of the mother constellation maps codeword ``m`` to the
    M-PSK point ``(2i+1) * m mod M``, so every dimension alone identifies
    the codeword. On subcarrier ``n`` the user ranked ``r`` in ``F[n]`` is
    additionally rotated by ``r * (2 pi / M) / |F[n]|``. Labels are Gray
    coded along the first dimension.
    """
    nb = int(math.log2(M))
    rank = pattern.edge_rank_in_sub
    users = []
    for k in range(pattern.K):
        support = pattern.V[k]
        words = []
        for m in range(M):
            w = []
            for i, n in enumerate(support):
                r = rank[pattern.edge(k, n)]
                ph = math.pi / M + 2 * math.pi * (((2 * i + 1) * m) % M) / M
                ph += r * (2 * math.pi / M) / len(pattern.F[n])
                amp = 1.0 / math.sqrt(len(support))
                w.append([round(amp * math.cos(ph), 15), round(amp * math.sin(ph), 15)])
            words.append(w)
        users.append(
            {
                "support": list(support),
                "codewords": words,
                "bits": [format(_gray(m), f"0{nb}b") for m in range(M)],
            }
        )
    return {"M": M, "users": users}


def make_codebook(pattern: FactorGraphPattern, M: int = 4) -> Codebook:
    return codebook_from_dict(default_codebook_dict(pattern, M), pattern)


def write_codebook(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1))
