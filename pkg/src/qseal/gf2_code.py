"""Binary linear codes for the codeword-masked commitment.

Bitstrings are tuples of 0/1 ints at the API boundary; strings like
``"0110"`` and numpy arrays are accepted wherever a bitstring is expected.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import RNonSeparating

Bits = tuple[int, ...]


def as_bits(x, n: int | None = None) -> Bits:
    if isinstance(x, str):
        x = x.strip()
        out = tuple(int(c) for c in x)
    else:
        out = tuple(int(b) for b in np.asarray(x).reshape(-1))
    if any(b not in (0, 1) for b in out):
        raise ValueError(f"not a bitstring: {x!r}")
    if n is not None and len(out) != n:
        raise ValueError(f"expected {n} bits, got {len(out)}")
    return out


def bits_str(bits: Iterable[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def xor(a: Sequence[int], b: Sequence[int]) -> Bits:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return tuple(int(x) ^ int(y) for x, y in zip(a, b))


def dot_parity(c, r) -> int:
    """Parity of the bitwise AND of ``c`` and ``r``."""
    c, r = as_bits(c), as_bits(r)
    if len(c) != len(r):
        raise ValueError(f"length mismatch: {len(c)} vs {len(r)}")
    return sum(x & y for x, y in zip(c, r)) & 1


def rref(mat: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2) and its pivot columns."""
    a = (np.asarray(mat, dtype=np.uint8) & 1).copy()
    rows, cols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(a[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + int(hits[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def rank(mat: np.ndarray) -> int:
    return len(rref(mat)[1])


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    rows: np.ndarray
    d_min: int | None = None

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=np.uint8))
        if rows.ndim != 2 or rows.size == 0 or np.any(rows > 1):
            raise ValueError("generator rows must be a non-empty 0/1 matrix")
        k, n = rows.shape
        if k > n:
            raise ValueError(f"k={k} exceeds n={n}")
        if rank(rows) != k:
            raise ValueError("generator rows are linearly dependent over GF(2)")
        rows = rows.copy()
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def k(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    def __eq__(self, other):
        return isinstance(other, GeneratorMatrix) and np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash(self.rows.tobytes())

    def __repr__(self):
        return f"GeneratorMatrix({self.to_text()!r})"

    @cached_property
    def parity_check(self) -> np.ndarray:
        """``(n-k) x n`` matrix H with ``H c^T = 0`` exactly on the row space."""
        red, pivots = rref(self.rows)
        free = [c for c in range(self.n) if c not in pivots]
        h = np.zeros((len(free), self.n), dtype=np.uint8)
        for j, f in enumerate(free):
            h[j, f] = 1
            for i, p in enumerate(pivots):
                h[j, p] = red[i, f]
        return h

    def to_text(self) -> str:
        return "\n".join(bits_str(r) for r in self.rows)

    @classmethod
    def from_text(cls, text: str | Sequence[str], d_min: int | None = None) -> "GeneratorMatrix":
        lines = text.split() if isinstance(text, str) else list(text)
        return cls(np.array([as_bits(line) for line in lines if line.strip()], dtype=np.uint8), d_min)


@dataclass(frozen=True)
class Codeword:
    bits: Bits

    @classmethod
    def of(cls, bits, G: GeneratorMatrix) -> "Codeword":
        bits = as_bits(bits, G.n)
        if not is_codeword(bits, G):
            raise ValueError(f"{bits_str(bits)} is not a codeword")
        return cls(bits)

    def __str__(self):
        return bits_str(self.bits)


def encode(msg, G: GeneratorMatrix) -> Codeword:
    m = np.array(as_bits(msg, G.k), dtype=np.uint8)
    return Codeword(as_bits((m @ G.rows) & 1))


def is_codeword(c, G: GeneratorMatrix) -> bool:
    v = np.array(as_bits(c, G.n), dtype=np.uint8)
    return not np.any((G.parity_check.astype(np.int64) @ v) & 1)


def separating(G: GeneratorMatrix, r) -> bool:
    """True iff ``c -> c . r`` is not identically zero on the code."""
    r = np.array(as_bits(r, G.n), dtype=np.int64)
    return bool(np.any((G.rows.astype(np.int64) @ r) & 1))


def choose_codeword(G: GeneratorMatrix, r, b: int, rng: np.random.Generator) -> Codeword:
    """Uniform codeword among those with ``c . r == b``.

    With ``g = G r^T``, ``(m G) . r == m . g``; a uniform message is drawn and,
    if its parity against ``g`` is wrong, one coordinate where ``g`` is set is
    flipped. That map pairs the two halves of the message space, so the result
    stays uniform on the solution set.
    """
    r = as_bits(r, G.n)
    if not any(r):
        raise ValueError("r must be non-zero")
    g = (G.rows.astype(np.int64) @ np.array(r)) & 1
    m = rng.integers(0, 2, size=G.k)
    if not g.any():
        if b:
            raise RNonSeparating(f"r={bits_str(r)} annihilates every row of G")
        return encode(m, G)
    if int(m @ g) & 1 != b:
        m[int(np.nonzero(g)[0][0])] ^= 1
    return encode(m, G)


def codewords(G: GeneratorMatrix) -> list[Bits]:
    """All ``2**k`` codewords, in message order."""
    msgs = (np.arange(1 << G.k)[:, None] >> np.arange(G.k - 1, -1, -1)) & 1
    return [as_bits(row) for row in (msgs @ G.rows) & 1]


def hamming_8_4() -> GeneratorMatrix:
    """Extended Hamming [8,4,4] code in systematic form."""
    return GeneratorMatrix.from_text(
        ["10000111", "01001011", "00101101", "00011110"],
        d_min=4,
    )


def systematic_code(n: int, k: int) -> GeneratorMatrix:
    """``[I_k | J]`` with J all ones; a small code family for sweeps over n."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rows = np.zeros((k, n), dtype=np.uint8)
    rows[:, :k] = np.eye(k, dtype=np.uint8)
    rows[:, k:] = 1
    return GeneratorMatrix(rows)


def default_code(n: int) -> GeneratorMatrix:
    """The [8,4] extended Hamming code at n=8, otherwise ``systematic_code(n, max(1, n // 2))``."""
    return hamming_8_4() if n == 8 else systematic_code(n, max(1, n // 2))
