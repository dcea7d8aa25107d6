"""Subshifts of finite type over a finite alphabet.

Symbols are opaque string labels; every matrix in this package is indexed by
the fixed ordering of the :class:`Alphabet` it was built from.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

Word = tuple[str, ...]

POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000


@dataclass(frozen=True)
class Alphabet:
    """Ordered finite set of distinct symbol labels."""

    symbols: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if not symbols:
            raise ValueError("alphabet must contain at least one symbol")
        if len(set(symbols)) != len(symbols):
            raise ValueError(f"duplicate symbols in alphabet {symbols!r}")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __contains__(self, symbol) -> bool:
        return symbol in self._index

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise KeyError(f"symbol {symbol!r} not in alphabet {self.symbols!r}") from None

    def encode(self, word: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.index(s) for s in word)

    def decode(self, indices: Iterable[int]) -> Word:
        return tuple(self.symbols[i] for i in indices)


@dataclass(frozen=True)
class SubshiftSpec:
    """A one-sided SFT given by an alphabet and a 0/1 adjacency matrix."""

    alphabet: Alphabet
    adjacency: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in row) for row in self.adjacency)
        n = len(self.alphabet)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"adjacency must be {n}x{n} to match the alphabet")
        if any(v not in (0, 1) for r in rows for v in r):
            raise ValueError("adjacency entries must be 0 or 1")
        object.__setattr__(self, "adjacency", rows)

    @classmethod
    def from_matrix(cls, symbols: Sequence[str], matrix) -> "SubshiftSpec":
        return cls(Alphabet(tuple(symbols)), tuple(tuple(int(v) for v in row) for row in matrix))

    @classmethod
    def full_shift(cls, symbols: Sequence[str]) -> "SubshiftSpec":
        n = len(symbols)
        return cls.from_matrix(symbols, [[1] * n for _ in range(n)])

    @property
    def size(self) -> int:
        return len(self.alphabet)

    def successors(self, i: int) -> tuple[int, ...]:
        return tuple(j for j, v in enumerate(self.adjacency[i]) if v)

    def predecessors(self, j: int) -> tuple[int, ...]:
        return tuple(i for i in range(self.size) if self.adjacency[i][j])

    def as_array(self) -> np.ndarray:
        return np.array(self.adjacency, dtype=np.int64)

    def allows(self, word: Sequence[str]) -> bool:
        idx = self.alphabet.encode(word)
        return all(self.adjacency[a][b] for a, b in zip(idx, idx[1:]))

    def is_reduced(self) -> bool:
        return all(any(r) for r in self.adjacency) and all(
            any(r[j] for r in self.adjacency) for j in range(self.size)
        )


def trim(s: SubshiftSpec) -> tuple[SubshiftSpec, tuple[int, ...]]:
    """Remove symbols with no successor or no predecessor, repeatedly.

    Returns the reduced SFT and the original indices of the kept symbols.
    Raises ``ValueError`` if nothing survives.
    """
    alive = set(range(s.size))
    changed = True
    while changed:
        changed = False
        for i in sorted(alive):
            has_out = any(s.adjacency[i][j] for j in alive)
            has_in = any(s.adjacency[j][i] for j in alive)
            if not (has_out and has_in):
                alive.discard(i)
                changed = True
    if not alive:
        raise ValueError("trimming removed every symbol: the SFT is empty")
    kept = tuple(sorted(alive))
    symbols = [s.alphabet.symbols[i] for i in kept]
    matrix = [[s.adjacency[i][j] for j in kept] for i in kept]
    return SubshiftSpec.from_matrix(symbols, matrix), kept


def _reachable_from(s: SubshiftSpec, start: int) -> set[int]:
    # states reachable by paths of length >= 1
    seen: set[int] = set()
    queue = deque(s.successors(start))
    while queue:
        j = queue.popleft()
        if j in seen:
            continue
        seen.add(j)
        queue.extend(s.successors(j))
    return seen


def is_irreducible(s: SubshiftSpec) -> bool:
    everything = set(range(s.size))
    return all(_reachable_from(s, i) == everything for i in range(s.size))


def strongly_connected_components(s: SubshiftSpec) -> list[tuple[int, ...]]:
    """Strongly connected components, each as a sorted tuple of indices."""
    _, labels = connected_components(s.as_array(), directed=True, connection="strong")
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(i)
    return sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])


def _component_period(s: SubshiftSpec, comp: tuple[int, ...]) -> int:
    """gcd of cycle lengths inside one component; 0 if it carries no cycle."""
    members = set(comp)
    root = comp[0]
    level = {root: 0}
    queue = deque([root])
    period = 0
    while queue:
        u = queue.popleft()
        for v in s.successors(u):
            if v not in members:
                continue
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                period = math.gcd(period, level[u] + 1 - level[v])
    return abs(period)


def period(s: SubshiftSpec, symbol: int) -> int:
    """Return-length gcd of ``symbol`` (0 when the symbol never returns)."""
    for comp in strongly_connected_components(s):
        if symbol in comp:
            return _component_period(s, comp)
    raise IndexError(symbol)


def is_aperiodic(s: SubshiftSpec) -> bool:
    return all(_component_period(s, c) == 1 for c in strongly_connected_components(s))


def is_primitive(s: SubshiftSpec) -> bool:
    return is_irreducible(s) and is_aperiodic(s)


def is_primitive_by_powers(s: SubshiftSpec) -> bool:
    """Primitivity via boolean powers, capped at the Wielandt bound."""
    m = s.as_array().astype(bool)
    n = s.size
    power = m.copy()
    for _ in range((n - 1) ** 2 + 1):
        if power.all():
            return True
        power = (power.astype(np.int64) @ m.astype(np.int64)) > 0
    return bool(power.all())


def allowed_words(s: SubshiftSpec, n: int) -> list[Word]:
    """All allowed words of length ``n`` in lexicographic (alphabet) order."""
    if n < 1:
        raise ValueError("word length must be at least 1")
    words = [(i,) for i in range(s.size)]
    for _ in range(n - 1):
        words = [w + (j,) for w in words for j in s.successors(w[-1])]
    return [s.alphabet.decode(w) for w in words]


def _perron_root(m: np.ndarray) -> float:
    # Power iteration on M + I: same Perron vector, and the shift makes
    # irreducible components aperiodic so the iteration converges.
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0])
    a = m.astype(float) + np.eye(n)
    x = np.ones(n)
    for _ in range(POWER_MAX_ITER):
        y = a @ x
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        x = y / y.max()
        if hi - lo <= POWER_TOL * hi:
            break
    return 0.5 * (lo + hi) - 1.0


def spectral_radius(s: SubshiftSpec) -> float:
    """Perron root of the adjacency matrix, maximized over components."""
    m = s.as_array()
    best = 0.0
    for comp in strongly_connected_components(s):
        sub = m[np.ix_(comp, comp)]
        if not sub.any():
            continue
        best = max(best, _perron_root(sub))
    return best


def topological_entropy(s: SubshiftSpec) -> float:
    rho = spectral_radius(s)
    return math.log(rho) if rho > 0 else float("-inf")


def block_label(block: Sequence[str]) -> str:
    return ",".join(block)


def higher_block_recode(s: SubshiftSpec, k: int) -> tuple[SubshiftSpec, dict[str, Word]]:
    """Recode ``s`` on its allowed ``k``-blocks.

    Two blocks are adjacent when they overlap in ``k - 1`` symbols. For
    ``k == 1`` the input is returned unchanged with the identity dictionary.
    """
    if k < 1:
        raise ValueError("block length must be positive")
    if k == 1:
        return s, {a: (a,) for a in s.alphabet}
    blocks = allowed_words(s, k)
    if not blocks:
        raise ValueError(f"no allowed blocks of length {k}")
    labels = [block_label(b) for b in blocks]
    matrix = [[int(u[1:] == v[:-1]) for v in blocks] for u in blocks]
    return SubshiftSpec.from_matrix(labels, matrix), dict(zip(labels, blocks))


def boolean_product(a, b) -> tuple[tuple[int, ...], ...]:
    """Boolean matrix product of two nested-sequence 0/1 matrices."""
    cols = len(b[0]) if b else 0
    return tuple(
        tuple(int(any(row[k] and b[k][j] for k in range(len(b)))) for j in range(cols))
        for row in a
    )


def random_adjacency(n: int, rng: np.random.Generator, density: float = 0.5):
    return [[int(v) for v in row] for row in (rng.random((n, n)) < density)]


def enumerate_adjacencies(n: int):
    """Every n x n 0/1 matrix (use only for tiny n)."""
    for bits in itertools.product((0, 1), repeat=n * n):
        yield [list(bits[i * n:(i + 1) * n]) for i in range(n)]
