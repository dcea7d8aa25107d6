"""Conditional probabilities of the factor process.

The forward recursion carries a row vector over pi^-1(current symbol) and
multiplies it by the block of P between consecutive preimage sets. In exact
mode P and p are scaled to integers (P = A / D, p = v / E), so a forward
vector after k steps is an integer vector over the common denominator
E * D**k; cylinder values are rebuilt as ``Fraction`` at the end. In double
mode each step is renormalized and the scale is kept as a log.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .factor import FactorMap, FactorSystem
from .markov import MarkovModel, Matrix, Number, is_exact_matrix, sample_indices
from .sft import Word


class ZeroProbabilityError(ValueError):
    """Conditioning on an event of probability zero."""


def _lcm_denominator(values) -> int:
    d = 1
    for v in values:
        d = math.lcm(d, Fraction(v).denominator)
    return d


class _Engine:
    """Cached per-(model, factor) blocks in integer and float form."""

    def __init__(self, m: MarkovModel, fs: FactorSystem):
        if m.shift != fs.domain:
            raise ValueError("model and factor system live on different SFTs")
        self.exact = m.exact
        pre = fs.preimages
        self.pre = pre
        nb = len(pre)
        self.image = fs.image
        P = m.transition
        p = m.stationary
        self.fsub = {}
        self.finit = [tuple(float(p[i]) for i in pre[b]) for b in range(nb)]
        for b in range(nb):
            for c in range(nb):
                self.fsub[b, c] = tuple(tuple(float(P[i][j]) for j in pre[c]) for i in pre[b])
        if self.exact:
            self.D = _lcm_denominator(v for row in P for v in row)
            self.E = _lcm_denominator(p)
            self.isub = {}
            for b in range(nb):
                for c in range(nb):
                    self.isub[b, c] = tuple(tuple(int(P[i][j] * self.D) for j in pre[c]) for i in pre[b])
            self.iinit = [tuple(int(p[i] * self.E) for i in pre[b]) for b in range(nb)]

    # integer (exact) recursion -------------------------------------------
    def istep(self, vec, b, c):
        sub = self.isub[b, c]
        cols = len(self.pre[c])
        return tuple(sum(vec[i] * sub[i][j] for i in range(len(vec)) if vec[i]) for j in range(cols))

    def iforward(self, idx) -> tuple[int, ...]:
        vec = self.iinit[idx[0]]
        for b, c in zip(idx, idx[1:]):
            vec = self.istep(vec, b, c)
        return vec

    def imass(self, idx) -> Fraction:
        return Fraction(sum(self.iforward(idx)), self.E * self.D ** (len(idx) - 1))

    # float recursion ------------------------------------------------------
    def fstep(self, vec, b, c):
        sub = self.fsub[b, c]
        cols = len(self.pre[c])
        return tuple(sum(vec[i] * sub[i][j] for i in range(len(vec))) for j in range(cols))

    def flogmass(self, idx) -> float:
        vec = self.finit[idx[0]]
        log_scale = 0.0
        for b, c in zip(idx, idx[1:]):
            vec = self.fstep(vec, b, c)
            s = sum(vec)
            if s <= 0:
                return float("-inf")
            vec = tuple(v / s for v in vec)
            log_scale += math.log(s)
        s = sum(vec)
        return log_scale + math.log(s) if s > 0 else float("-inf")


@functools.lru_cache(maxsize=128)
def _engine(m: MarkovModel, fs: FactorSystem) -> _Engine:
    return _Engine(m, fs)


def _encode(fs: FactorSystem, y: Sequence[str]) -> tuple[int, ...]:
    try:
        return fs.encode(y)
    except KeyError as exc:
        raise ValueError(str(exc)) from None


def _allowed_idx(fs: FactorSystem, idx) -> bool:
    adj = fs.image.adjacency
    return all(adj[a][b] for a, b in zip(idx, idx[1:]))


def factor_cylinder_probability(m: MarkovModel, fs: FactorSystem, y: Sequence[str]) -> Number:
    """nu([y]): total mu-mass of the fibre over the observed word ``y``."""
    idx = _encode(fs, y)
    if not idx:
        raise ValueError("empty word")
    if not _allowed_idx(fs, idx):
        return Fraction(0) if m.exact else 0.0
    eng = _engine(m, fs)
    if eng.exact:
        return eng.imass(idx)
    return math.exp(eng.flogmass(idx))


def g_n(m: MarkovModel, fs: FactorSystem, y: Sequence[str]) -> Number:
    """nu(y_0 | y_1 .. y_n) for ``y = (y_0, .., y_n)``."""
    idx = _encode(fs, y)
    if not idx:
        raise ValueError("empty word")
    eng = _engine(m, fs)
    if len(idx) == 1:
        return factor_cylinder_probability(m, fs, y)
    tail = idx[1:]
    if not _allowed_idx(fs, tail):
        raise ZeroProbabilityError(f"conditioning word {tuple(y[1:])!r} has probability 0")
    if eng.exact:
        den = sum(eng.iforward(tail))
        if den == 0:
            raise ZeroProbabilityError(f"conditioning word {tuple(y[1:])!r} has probability 0")
        if not _allowed_idx(fs, idx):
            return Fraction(0)
        return Fraction(sum(eng.iforward(idx)), den * eng.D)
    log_den = eng.flogmass(tail)
    if log_den == float("-inf"):
        raise ZeroProbabilityError(f"conditioning word {tuple(y[1:])!r} has probability 0")
    if not _allowed_idx(fs, idx):
        return 0.0
    return math.exp(eng.flogmass(idx) - log_den)


def admissible_heads(fs: FactorSystem, tail: Sequence[str]) -> list[str]:
    """Symbols b such that b followed by ``tail`` is allowed in the image."""
    first = fs.image.alphabet.index(tail[0])
    return [fs.image.alphabet.symbols[b] for b in range(fs.image.size) if fs.image.adjacency[b][first]]


# --------------------------------------------------------------------------
# lumpability


@dataclass(frozen=True)
class LumpabilityResult:
    lumpable: bool
    matrix: Optional[Matrix] = None
    witness: Optional[tuple[str, str, str]] = None  # (state, other state, target class)


def strong_lumpability(P: Matrix, fmap: FactorMap) -> LumpabilityResult:
    """Preimage row-sum equality test; returns the lumped matrix on success."""
    exact = is_exact_matrix(P)
    nb = len(fmap.target)
    pre = [fmap.preimage(b) for b in range(nb)]
    names = fmap.source.symbols
    lumped = []
    for b in range(nb):
        rows = [[sum((P[x][j] for j in pre[c]), Fraction(0) if exact else 0.0) for c in range(nb)] for x in pre[b]]
        for x, row in zip(pre[b][1:], rows[1:]):
            for c in range(nb):
                if not _equal(row[c], rows[0][c], exact):
                    return LumpabilityResult(False, witness=(names[pre[b][0]], names[x], fmap.target.symbols[c]))
        lumped.append(tuple(rows[0]))
    return LumpabilityResult(True, matrix=tuple(lumped))


def _equal(a, b, exact: bool) -> bool:
    return a == b if exact else abs(a - b) <= 1e-12


# --------------------------------------------------------------------------
# word tables and Markov-order probe


def _mass_table(m: MarkovModel, fs: FactorSystem, max_len: int) -> dict[tuple[int, ...], Number]:
    """nu of every realizable image word up to ``max_len`` symbols."""
    eng = _engine(m, fs)
    table: dict = {}
    adj = fs.image.adjacency
    nb = fs.image.size
    if eng.exact:
        stack = [((b,), eng.iinit[b]) for b in range(nb)]
        while stack:
            w, vec = stack.pop()
            total = sum(vec)
            if total == 0:
                continue
            table[w] = Fraction(total, eng.E * eng.D ** (len(w) - 1))
            if len(w) < max_len:
                for c in range(nb):
                    if adj[w[-1]][c]:
                        stack.append((w + (c,), eng.istep(vec, w[-1], c)))
    else:
        stack = [((b,), eng.finit[b], 0.0) for b in range(nb)]
        while stack:
            w, vec, log_scale = stack.pop()
            s = sum(vec)
            if s <= 0:
                continue
            table[w] = math.exp(log_scale + math.log(s))
            if len(w) < max_len:
                norm = tuple(v / s for v in vec)
                for c in range(nb):
                    if adj[w[-1]][c]:
                        stack.append((w + (c,), eng.fstep(norm, w[-1], c), log_scale + math.log(s)))
    return table


@dataclass(frozen=True)
class MarkovOrderReport:
    """Finite-depth Markov-order probe of the factor process.

    ``order`` is 0 or 1 when no violation was found up to ``depth``; then
    ``matrix`` is the recovered factor transition matrix nu(bc)/nu(b).
    """

    depth: int
    order: Optional[int]
    violation: Optional[Word] = None
    matrix: Optional[Matrix] = None
    marginal: Optional[tuple[Number, ...]] = None
    exact: bool = True


def markov_order_probe(m: MarkovModel, fs: FactorSystem, depth: int = 8) -> MarkovOrderReport:
    """Check nu(y_0 | y_1..y_k) == nu(y_0 | y_1) for all words with k <= depth."""
    if depth < 2:
        raise ValueError("depth must be at least 2")
    table = _mass_table(m, fs, depth + 1)
    exact = m.exact
    nb = fs.image.size
    zero = Fraction(0) if exact else 0.0
    marginal = tuple(table.get((b,), zero) for b in range(nb))
    one_step = {}
    for w, v in table.items():
        if len(w) == 2:
            one_step[w] = v / table[w[1:]]
    decode = fs.image.alphabet.decode
    for w in sorted(table, key=lambda w: (len(w), w)):
        if len(w) < 3:
            continue
        cond = table[w] / table[w[1:]]
        if not _equal(cond, one_step[w[:2]], exact):
            return MarkovOrderReport(depth, None, violation=decode(w), marginal=marginal, exact=exact)
    # order 0: nu(a | b) == nu(a) for every b of positive mass, missing pairs counting as 0
    independent = all(
        _equal(one_step.get((a, b), zero), marginal[a], exact)
        for a in range(nb)
        for b in range(nb)
        if marginal[b]
    )
    order = 0 if independent else 1
    matrix = tuple(
        tuple((table.get((b, c), zero) / marginal[b]) if marginal[b] else zero for c in range(nb)) for b in range(nb)
    )
    return MarkovOrderReport(depth, order, matrix=matrix, marginal=marginal, exact=exact)


# --------------------------------------------------------------------------
# variation and bad configurations (double precision)


@dataclass(frozen=True)
class BadConfigWitness:
    """Center y_0..y_n with two continuations whose conditionals differ by ``gap``."""

    center: Word
    upper: Word
    lower: Word
    upper_value: float
    lower_value: float

    @property
    def gap(self) -> float:
        return self.upper_value - self.lower_value


class _Steering:
    """Extremal continuations of a fixed center, in double precision.

    Both forward vectors (over y_0..y_n and y_1..y_n) are divided by the same
    scalar each step, so their mass ratio is the conditional probability.
    """

    def __init__(self, eng: _Engine, center: tuple[int, ...]):
        self.eng = eng
        self.center = center
        a = eng.finit[center[0]]
        for b, c in zip(center, center[1:]):
            a = eng.fstep(a, b, c)
        t = eng.finit[center[1]]
        for b, c in zip(center[1:], center[2:]):
            t = eng.fstep(t, b, c)
        s = sum(t)
        self.root = (tuple(v / s for v in a), tuple(v / s for v in t)) if s > 0 else None

    def advance(self, state, last, c):
        a, t = state
        a = self.eng.fstep(a, last, c)
        t = self.eng.fstep(t, last, c)
        s = sum(t)
        if s <= 0:
            return None
        return tuple(v / s for v in a), tuple(v / s for v in t)

    @staticmethod
    def value(state) -> float:
        return sum(state[0]) / sum(state[1])

    @staticmethod
    def realizable(state) -> bool:
        return state is not None and sum(state[0]) > 0

    def extremes(self, length: int, budget: int):
        """(z_max, v_max, z_min, v_min) over continuations of ``length``.

        Exhaustive over the first L0 symbols (|B|^L0 <= budget), then greedy
        one-symbol extension from the best exhaustive leaf. Along the greedy
        path the value is monotone, since a conditional is a convex
        combination of its one-symbol refinements.
        """
        if self.root is None or not self.realizable(self.root):
            return None
        adj = self.eng.image.adjacency
        nb = self.eng.image.size
        l0 = length
        if nb > 1:
            l0 = min(length, max(0, int(math.log(budget) / math.log(nb) + 1e-9)))
        best_hi = best_lo = None
        stack = [((), self.center[-1], self.root)]
        while stack:
            z, last, state = stack.pop()
            if len(z) == l0:
                v = self.value(state)
                if best_hi is None or v > best_hi[1] or (v == best_hi[1] and z < best_hi[0]):
                    best_hi = (z, v, last, state)
                if best_lo is None or v < best_lo[1] or (v == best_lo[1] and z < best_lo[0]):
                    best_lo = (z, v, last, state)
                continue
            for c in range(nb - 1, -1, -1):
                if adj[last][c]:
                    nxt = self.advance(state, last, c)
                    if self.realizable(nxt):
                        stack.append((z + (c,), c, nxt))
        if best_hi is None:
            return None
        hi = self._greedy(best_hi, length, +1)
        lo = self._greedy(best_lo, length, -1)
        return hi[0], hi[1], lo[0], lo[1]

    def _greedy(self, start, length, sign):
        z, v, last, state = start
        adj = self.eng.image.adjacency
        while len(z) < length:
            choice = None
            for c in range(self.eng.image.size):
                if not adj[last][c]:
                    continue
                nxt = self.advance(state, last, c)
                if not self.realizable(nxt):
                    continue
                val = self.value(nxt)
                if choice is None or sign * val > sign * choice[1]:
                    choice = (c, val, nxt)
            if choice is None:
                break
            c, v, state = choice
            z = z + (c,)
            last = c
        return z, v


def _centers(fs: FactorSystem, length: int, limit: int, seed: int) -> tuple[list[tuple[int, ...]], bool]:
    """Allowed image words of ``length`` in lexicographic order, sampled if too many."""
    adj = fs.image.adjacency
    nb = fs.image.size
    words: list[tuple[int, ...]] = [(b,) for b in range(nb)]
    for _ in range(length - 1):
        words = [w + (c,) for w in words for c in range(nb) if adj[w[-1]][c]]
        if len(words) > 50 * limit:
            break
    if len(words[0]) == length and len(words) <= limit:
        return words, False
    rng = np.random.Generator(np.random.PCG64(seed))
    sample = set()
    attempts = 0
    while len(sample) < limit and attempts < 20 * limit:
        attempts += 1
        w = [int(rng.integers(nb))]
        while len(w) < length:
            succ = [c for c in range(nb) if adj[w[-1]][c]]
            w.append(int(succ[rng.integers(len(succ))]))
        sample.add(tuple(w))
    return sorted(sample), True


@dataclass(frozen=True)
class VariationBounds:
    """Bounds on var_n(g) at one depth.

    ``lower`` is certified: it is a realized gap between two conditionals of
    cylinders agreeing on coordinates 0..n. ``upper`` is a heuristic Birkhoff
    contraction product and is not a proof. ``sampled`` marks a lower bound
    computed on a random subset of centers.
    """

    n: int
    m_ext: int
    lower: float
    upper: float
    sampled: bool
    witness: Optional[BadConfigWitness] = None


def birkhoff_coefficient(block: Sequence[Sequence[float]]) -> float:
    """tau(A) = (1 - sqrt(phi)) / (1 + sqrt(phi)); 1 if A has a zero entry."""
    a = np.asarray(block, dtype=float)
    if a.size == 0 or (a <= 0).any():
        return 1.0
    if a.shape[0] == 1 or a.shape[1] == 1:
        return 0.0
    phi = math.inf
    for i, j in itertools.combinations(range(a.shape[0]), 2):
        for k, l in itertools.combinations(range(a.shape[1]), 2):
            r = (a[i, k] * a[j, l]) / (a[j, k] * a[i, l])
            phi = min(phi, r, 1 / r)
    s = math.sqrt(phi)
    return (1 - s) / (1 + s)


def contraction_upper_bound(m: MarkovModel, fs: FactorSystem, n: int) -> float:
    """Largest product of Birkhoff coefficients along n image transitions."""
    eng = _engine(m, fs)
    nb = fs.image.size
    adj = fs.image.adjacency
    tau = {(b, c): birkhoff_coefficient(eng.fsub[b, c]) for b in range(nb) for c in range(nb) if adj[b][c]}
    best = [1.0] * nb
    for _ in range(n):
        best = [max((best[b] * tau[b, c] for b in range(nb) if adj[b][c]), default=0.0) for c in range(nb)]
    return min(1.0, max(best))


def variation_estimate(
    m: MarkovModel,
    fs: FactorSystem,
    n: int,
    m_ext: int,
    budget: int = 256,
    center_budget: int = 4096,
    seed: int = 0,
) -> VariationBounds:
    """Lower/upper bounds on var_n(g) using continuations of length ``m_ext``."""
    if n < 1 or m_ext < 1:
        raise ValueError("n and m_ext must be at least 1")
    eng = _engine(m, fs)
    centers, sampled = _centers(fs, n + 1, center_budget, seed)
    decode = fs.image.alphabet.decode
    best = None
    for center in centers:
        ext = _Steering(eng, center).extremes(m_ext, budget)
        if ext is None:
            continue
        z_hi, v_hi, z_lo, v_lo = ext
        if best is None or v_hi - v_lo > best.gap:
            best = BadConfigWitness(decode(center), decode(z_hi), decode(z_lo), v_hi, v_lo)
    lower = best.gap if best is not None else 0.0
    return VariationBounds(n, m_ext, lower, contraction_upper_bound(m, fs, n), sampled, best)


def find_bad_configuration(
    m: MarkovModel,
    fs: FactorSystem,
    n_max: int,
    m_max: int,
    eps: float,
    budget: int = 256,
    center_budget: int = 4096,
    seed: int = 0,
) -> Optional[BadConfigWitness]:
    """First center y_0..y_{n_max} with two continuations of length ``m_max``
    whose conditionals of y_0 differ by at least ``eps``.

    ``None`` means nothing was found within the bounds; it is not a proof of
    regularity.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n_max < 1 or m_max < 1:
        raise ValueError("n_max and m_max must be at least 1")
    eng = _engine(m, fs)
    centers, _ = _centers(fs, n_max + 1, center_budget, seed)
    decode = fs.image.alphabet.decode
    for center in centers:
        ext = _Steering(eng, center).extremes(m_max, budget)
        if ext is None:
            continue
        z_hi, v_hi, z_lo, v_lo = ext
        if v_hi - v_lo >= eps:
            return BadConfigWitness(decode(center), decode(z_hi), decode(z_lo), v_hi, v_lo)
    return None


@dataclass(frozen=True)
class DecayFit:
    rate: float  # fitted c in var_n ~ C c^n
    r_squared: float
    points: int


def fit_decay(ns: Sequence[int], values: Sequence[float]) -> Optional[DecayFit]:
    """Least-squares fit of log(var_n) against n over the positive values."""
    pts = [(n, math.log(v)) for n, v in zip(ns, values) if v > 0]
    if len(pts) < 3:
        return None
    x, y = zip(*pts)
    res = stats.linregress(x, y)
    return DecayFit(math.exp(res.slope), float(res.rvalue) ** 2, len(pts))


@dataclass(frozen=True)
class ConditionalTable:
    """g_k(y_0..y_k) along one base word plus variation bounds per depth."""

    base: Word
    values: tuple[Number, ...]
    variation: tuple[VariationBounds, ...] = field(default=())
    fit: Optional[DecayFit] = None


def conditional_table(
    m: MarkovModel,
    fs: FactorSystem,
    y: Sequence[str],
    m_ext: int = 6,
    budget: int = 256,
    center_budget: int = 1024,
    seed: int = 0,
) -> ConditionalTable:
    y = tuple(y)
    values = tuple(g_n(m, fs, y[: k + 1]) for k in range(len(y)))
    var = tuple(
        variation_estimate(m, fs, k, m_ext, budget=budget, center_budget=center_budget, seed=seed)
        for k in range(1, len(y))
    )
    fit = fit_decay([v.n for v in var], [v.lower for v in var])
    return ConditionalTable(y, values, var, fit)


# --------------------------------------------------------------------------
# Monte Carlo cross-check


@dataclass(frozen=True)
class EmpiricalEstimate:
    estimate: Optional[float]
    stderr: Optional[float]
    hits: int
    samples: int
    seed: int
    flagged: bool


def empirical_conditional(
    m: MarkovModel, fs: FactorSystem, y: Sequence[str], samples: int, seed: int
) -> EmpiricalEstimate:
    """Sampled nu(y_0 | y_1..y_n) from independent stationary paths."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    idx = np.array(_encode(fs, y), dtype=np.int64)
    paths = sample_indices(m, len(idx), samples, seed)
    images = np.asarray(fs.map.assignment, dtype=np.int64)[paths]
    cond = (images[:, 1:] == idx[1:]).all(axis=1)
    hits = int(cond.sum())
    if hits == 0:
        return EmpiricalEstimate(None, None, 0, samples, seed, True)
    k = int((images[cond, 0] == idx[0]).sum())
    q = k / hits
    return EmpiricalEstimate(q, math.sqrt(q * (1 - q) / hits), hits, samples, seed, False)
