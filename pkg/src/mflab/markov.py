"""Stationary Markov measures on subshifts of finite type.

Matrices are nested tuples whose entries are either all ``Fraction`` (exact
mode) or all ``float`` (double mode). Exact mode is what makes equality-based
tests such as lumpability meaningful, so it is preferred whenever the inputs
are rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .sft import (
    SubshiftSpec,
    Word,
    is_primitive,
    spectral_radius,
    strongly_connected_components,
)

Number = Union[Fraction, float]
Matrix = tuple[tuple[Number, ...], ...]

ROW_SUM_TOL = 1e-9
RNG_NAME = "numpy.random.PCG64"


def to_number(value) -> Number:
    """Parse a matrix entry.

    ``"1/3"``, integers and ``Fraction`` become exact; decimals (``0.25`` or
    ``"0.25"``) become floats.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            return Fraction(text)
        try:
            return Fraction(int(text))
        except ValueError:
            return float(text)
    raise TypeError(f"cannot interpret {value!r} as a probability")


def is_exact_matrix(matrix) -> bool:
    return all(isinstance(v, Fraction) for row in matrix for v in row)


def normalize_matrix(matrix) -> Matrix:
    """Coerce entries to a single arithmetic mode (floats win if mixed)."""
    rows = [[to_number(v) for v in row] for row in matrix]
    if not all(isinstance(v, Fraction) for row in rows for v in row):
        rows = [[float(v) for v in row] for row in rows]
    return tuple(tuple(row) for row in rows)


def support(matrix) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(v > 0) for v in row) for row in matrix)


def check_stochastic(matrix: Matrix, labels: Sequence[str] | None = None) -> None:
    n = len(matrix)
    if any(len(row) != n for row in matrix):
        raise ValueError("transition matrix must be square")
    labels = labels or [str(i) for i in range(n)]
    for label, row in zip(labels, matrix):
        if any(v < 0 for v in row):
            raise ValueError(f"row {label!r} has a negative entry")
        total = sum(row)
        if isinstance(total, Fraction):
            if total != 1:
                raise ValueError(f"row {label!r} sums to {total}, not 1")
        elif abs(total - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"row {label!r} sums to {total!r}, not 1")


def check_compatible(P: Matrix, s: SubshiftSpec) -> bool:
    """True iff the support of ``P`` is exactly the adjacency of ``s``."""
    if len(P) != s.size or any(len(row) != s.size for row in P):
        raise ValueError(f"dimension mismatch: P is {len(P)}x{len(P[0])}, SFT has {s.size} symbols")
    return support(P) == s.adjacency


def _solve_exact(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    # Gauss-Jordan on a full-column-rank (possibly overdetermined) system.
    rows, cols = len(a), len(a[0])
    m = [list(r) + [v] for r, v in zip(a, b)]
    pivot_row = 0
    pivots = []
    for c in range(cols):
        pr = next((r for r in range(pivot_row, rows) if m[r][c] != 0), None)
        if pr is None:
            raise ValueError("singular system")
        m[pivot_row], m[pr] = m[pr], m[pivot_row]
        inv = 1 / m[pivot_row][c]
        m[pivot_row] = [v * inv for v in m[pivot_row]]
        for r in range(rows):
            if r != pivot_row and m[r][c] != 0:
                f = m[r][c]
                m[r] = [x - f * y for x, y in zip(m[r], m[pivot_row])]
        pivots.append(pivot_row)
        pivot_row += 1
    for r in range(pivot_row, rows):
        if m[r][-1] != 0:
            raise ValueError("inconsistent system")
    return [m[r][-1] for r in pivots]


def stationary_distribution(P: Matrix) -> tuple[Number, ...]:
    """The unique invariant probability vector of an irreducible ``P``."""
    n = len(P)
    comps = strongly_connected_components(SubshiftSpec.from_matrix([str(i) for i in range(n)], support(P)))
    if len(comps) != 1:
        raise ValueError(f"transition matrix is reducible; communicating classes {comps}")
    if is_exact_matrix(P):
        # (P^T - I) x = 0 plus sum(x) = 1
        a = [[P[j][i] - (1 if i == j else 0) for j in range(n)] for i in range(n)]
        a.append([Fraction(1)] * n)
        b = [Fraction(0)] * n + [Fraction(1)]
        return tuple(_solve_exact(a, b))
    a = np.array(P, dtype=float).T - np.eye(n)
    a = np.vstack([a, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    x = np.clip(x, 0.0, None)
    return tuple(float(v) for v in x / x.sum())


def reversal_of(P: Matrix, p: Sequence[Number]) -> Matrix:
    """Q[a][a'] = p[a] P[a][a'] / p[a']; each column of Q sums to 1."""
    n = len(P)
    return tuple(tuple(p[a] * P[a][b] / p[b] for b in range(n)) for a in range(n))


@dataclass(frozen=True)
class MarkovModel:
    """A stationary Markov chain compatible with an SFT."""

    shift: SubshiftSpec
    transition: Matrix
    stationary: tuple[Number, ...]
    reversal: Matrix

    @classmethod
    def from_transition(cls, P, shift: SubshiftSpec | None = None, symbols: Sequence[str] | None = None) -> "MarkovModel":
        P = normalize_matrix(P)
        if shift is None:
            if symbols is None:
                symbols = [str(i + 1) for i in range(len(P))]
            shift = SubshiftSpec.from_matrix(symbols, support(P))
        check_stochastic(P, shift.alphabet.symbols)
        if not check_compatible(P, shift):
            raise ValueError("transition matrix support differs from the SFT adjacency")
        p = stationary_distribution(P)
        return cls(shift, P, p, reversal_of(P, p))

    @property
    def exact(self) -> bool:
        return is_exact_matrix(self.transition)

    @property
    def alphabet(self):
        return self.shift.alphabet

    @property
    def size(self) -> int:
        return self.shift.size

    def as_float(self) -> "MarkovModel":
        if not self.exact:
            return self
        f = lambda m: tuple(tuple(float(v) for v in row) for row in m)
        return MarkovModel(self.shift, f(self.transition), tuple(float(v) for v in self.stationary), f(self.reversal))


def time_reversal_matrix(m: MarkovModel) -> Matrix:
    return m.reversal


def cylinder_probability(m: MarkovModel, w: Sequence[str]) -> Number:
    """mu([w]) = p_{w_0} prod P_{w_i w_{i+1}}; zero for disallowed words."""
    idx = m.alphabet.encode(w)
    if not idx:
        raise ValueError("empty word")
    value = m.stationary[idx[0]]
    for a, b in zip(idx, idx[1:]):
        value = value * m.transition[a][b]
    return value


def entropy_rate(m: MarkovModel) -> float:
    h = 0.0
    for a in range(m.size):
        for b in range(m.size):
            pab = float(m.transition[a][b])
            if pab > 0:
                h -= float(m.stationary[a]) * pab * math.log(pab)
    return h


def _exact_null_vector(a: list[list[Fraction]]) -> list[Fraction] | None:
    """A vector spanning the null space of ``a`` if it is one-dimensional."""
    n = len(a)
    m = [list(r) for r in a]
    pivots: list[int] = []
    r = 0
    for c in range(n):
        pr = next((i for i in range(r, n) if m[i][c] != 0), None)
        if pr is None:
            continue
        m[r], m[pr] = m[pr], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(n):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    free = [c for c in range(n) if c not in pivots]
    if len(free) != 1:
        return None
    f = free[0]
    x = [Fraction(0)] * n
    x[f] = Fraction(1)
    for row, c in enumerate(pivots):
        x[c] = -m[row][f]
    return x


def parry_measure(s: SubshiftSpec) -> MarkovModel:
    """Markov measure of maximal entropy: P_ij = M_ij r_j / (lambda r_i).

    When the Perron root is an integer the right Perron vector is solved
    exactly and the result is an exact model.
    """
    if not is_primitive(s):
        raise ValueError("Parry measure requires a primitive SFT")
    lam = spectral_radius(s)
    n = s.size
    lam_int = round(lam)
    if abs(lam - lam_int) < 1e-9 and lam_int > 0:
        a = [[Fraction(s.adjacency[i][j]) - (lam_int if i == j else 0) for j in range(n)] for i in range(n)]
        r = _exact_null_vector(a)
        if r is not None and (all(v > 0 for v in r) or all(v < 0 for v in r)):
            P = [[Fraction(s.adjacency[i][j]) * r[j] / (lam_int * r[i]) for j in range(n)] for i in range(n)]
            return MarkovModel.from_transition(P, shift=s)
    w, v = np.linalg.eig(s.as_array().astype(float))
    k = int(np.argmax(w.real))
    r = np.abs(v[:, k].real)
    lam = float(w[k].real)
    P = [[s.adjacency[i][j] * r[j] / (lam * r[i]) for j in range(n)] for i in range(n)]
    # renormalize rows against eigenvector rounding
    P = [[v / sum(row) for v in row] for row in P]
    return MarkovModel.from_transition(P, shift=s)


def _cumulative(m: MarkovModel) -> np.ndarray:
    cum = np.cumsum(np.array(m.transition, dtype=float), axis=1)
    cum[:, -1] = 1.0
    return cum


def sample_indices(m: MarkovModel, n: int, count: int, seed: int) -> np.ndarray:
    """``count`` independent stationary paths of length ``n`` as an int array.

    Deterministic given ``seed``; the generator is PCG64.
    """
    if n < 1:
        raise ValueError("path length must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    p = np.array(m.stationary, dtype=float)
    pcum = np.cumsum(p)
    pcum[-1] = 1.0
    cum = _cumulative(m)
    paths = np.empty((count, n), dtype=np.int64)
    paths[:, 0] = np.searchsorted(pcum, rng.random(count), side="right")
    for t in range(1, n):
        u = rng.random(count)
        rows = cum[paths[:, t - 1]]
        paths[:, t] = (u[:, None] >= rows).sum(axis=1)
    return paths


def sample_path(m: MarkovModel, n: int, seed: int) -> Word:
    """One stationary realization of length ``n``."""
    if n < 1:
        raise ValueError("path length must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    pcum = np.cumsum(np.array(m.stationary, dtype=float))
    pcum[-1] = 1.0
    cum = _cumulative(m)
    u = rng.random(n)
    out = np.empty(n, dtype=np.int64)
    out[0] = int(np.searchsorted(pcum, u[0], side="right"))
    for t in range(1, n):
        out[t] = int(np.searchsorted(cum[out[t - 1]], u[t], side="right"))
    return m.alphabet.decode(out.tolist())
