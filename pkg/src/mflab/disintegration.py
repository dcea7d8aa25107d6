"""Conditional measures on fibres, computed at finite depth.

Nothing here builds a limit object. The fibre measures are reached only
through finite-window conditionals: posteriors of the first hidden symbol,
Gibbs kernels on a window with a fixed boundary state, and conditionals on
cylinder neighbourhoods of a point. Every limit-flavoured value carries its
last depth deltas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence, Union

from .conditionals import (
    ZeroProbabilityError,
    _encode,
    _engine,
    fit_decay,
)
from .factor import FactorMap, FactorSystem, FibreWindow
from .markov import MarkovModel, Matrix, Number, cylinder_probability
from .sft import Word

CONVERGED_DELTA = 1e-10


def _zero(m: MarkovModel) -> Number:
    return Fraction(0) if m.exact else 0.0


# --------------------------------------------------------------------------
# reversed-chain lumpability


@dataclass(frozen=True)
class ReversedLumpability:
    """Strong lumpability of the time-reversed chain.

    On success ``kernel[b][c]`` is the common column-class sum
    sum_{a in pi^-1(b)} Q[a][a'] for a' in pi^-1(c), and g-tilde equals
    ``kernel[y_0][y_1]`` everywhere.
    """

    lumpable: bool
    kernel: Optional[Matrix] = None
    witness: Optional[tuple[str, str, str]] = None  # (row class, column state, other column state)


def reversed_lumpability(m: MarkovModel, fmap: FactorMap) -> ReversedLumpability:
    Q = m.reversal
    nb = len(fmap.target)
    pre = [fmap.preimage(b) for b in range(nb)]
    exact = m.exact
    names = fmap.source.symbols
    kernel = [[_zero(m)] * nb for _ in range(nb)]
    for b in range(nb):
        for c in range(nb):
            sums = [sum((Q[a][col] for a in pre[b]), _zero(m)) for col in pre[c]]
            for col, s in zip(pre[c][1:], sums[1:]):
                same = s == sums[0] if exact else abs(s - sums[0]) <= 1e-12
                if not same:
                    return ReversedLumpability(False, witness=(fmap.target.symbols[b], names[pre[c][0]], names[col]))
            kernel[b][c] = sums[0]
    return ReversedLumpability(True, kernel=tuple(tuple(r) for r in kernel))


def kappa(m: MarkovModel) -> Number:
    """Smallest reversal entry Q[a][a'] over allowed transitions; lower bound for g-tilde."""
    return min(m.reversal[a][b] for a in range(m.size) for b in range(m.size) if m.transition[a][b] > 0)


# --------------------------------------------------------------------------
# fibre posteriors and g-tilde


def fibre_marginals(m: MarkovModel, fs: FactorSystem, window: Sequence[str]) -> dict[str, Number]:
    """Posterior law of the first hidden symbol given the observed ``window``."""
    idx = _encode(fs, window)
    if not idx:
        raise ValueError("empty window")
    eng = _engine(m, fs)
    pre = fs.preimages
    if eng.exact:
        beta = (1,) * len(pre[idx[-1]])
        for b, c in zip(reversed(idx[:-1]), reversed(idx[1:])):
            sub = eng.isub[b, c]
            beta = tuple(sum(row[j] * beta[j] for j in range(len(beta))) for row in sub)
        weights = [v * w for v, w in zip(eng.iinit[idx[0]], beta)]
        total = sum(weights)
        if total == 0:
            raise ZeroProbabilityError(f"window {tuple(window)!r} has probability 0")
        post = [Fraction(w, total) for w in weights]
    else:
        beta = (1.0,) * len(pre[idx[-1]])
        for b, c in zip(reversed(idx[:-1]), reversed(idx[1:])):
            sub = eng.fsub[b, c]
            beta = tuple(sum(row[j] * beta[j] for j in range(len(beta))) for row in sub)
            s = sum(beta)
            if s <= 0:
                raise ZeroProbabilityError(f"window {tuple(window)!r} has probability 0")
            beta = tuple(v / s for v in beta)
        weights = [v * w for v, w in zip(eng.finit[idx[0]], beta)]
        total = sum(weights)
        if total <= 0:
            raise ZeroProbabilityError(f"window {tuple(window)!r} has probability 0")
        post = [w / total for w in weights]
    names = fs.domain.alphabet.symbols
    return {names[a]: v for a, v in zip(pre[idx[0]], post)}


def conditional_fibre_marginal(m: MarkovModel, fs: FactorSystem, window: Sequence[str], state: str) -> Number:
    """P(X_1 = state | Y_1..Y_N = window), the depth-N approximation of the
    fibre measure of the cylinder {x_0 = state} over the shifted point."""
    post = fibre_marginals(m, fs, window)
    if state not in post:
        raise ValueError(f"state {state!r} is not a preimage of {window[0]!r}")
    return post[state]


@dataclass(frozen=True)
class GTildeValue:
    value: Number
    depth: int
    deltas: tuple[float, ...]  # |change| over the last (up to) two depth increments
    converged: bool


def _g_tilde_at(m: MarkovModel, fs: FactorSystem, y: tuple[str, ...]) -> Number:
    post = fibre_marginals(m, fs, y[1:])
    Q = m.reversal
    src = fs.preimages[fs.image.alphabet.index(y[0])]
    index = fs.domain.alphabet.index
    total = _zero(m)
    for name, weight in post.items():
        col = index(name)
        total += sum((Q[a][col] for a in src), _zero(m)) * weight
    return total


def g_tilde(m: MarkovModel, fs: FactorSystem, y: Sequence[str]) -> GTildeValue:
    """g-tilde(y) through fibre posteriors at depth N = len(y) - 1.

    Sum over a' in pi^-1(y_1) of [sum over a in pi^-1(y_0) of Q[a][a']]
    times P(X_1 = a' | y_1..y_N).
    """
    y = tuple(y)
    if len(y) < 2:
        raise ValueError("g-tilde needs at least y_0 and y_1")
    value = _g_tilde_at(m, fs, y)
    history = [value]
    for k in (1, 2):
        if len(y) - k >= 2:
            history.append(_g_tilde_at(m, fs, y[: len(y) - k]))
    deltas = tuple(float(abs(a - b)) for a, b in zip(history, history[1:]))
    rl = reversed_lumpability(m, fs.map).lumpable
    converged = rl or (bool(deltas) and deltas[0] < CONVERGED_DELTA)
    return GTildeValue(value, len(y) - 1, deltas, converged)


# --------------------------------------------------------------------------
# potentials, averaging operators, Gibbs kernels


@dataclass(frozen=True)
class FibrePotential:
    """Normalized Q-product weights of the interior words of a window.

    The window covers y_0..y_{n+1}; interior words occupy positions 0..n
    and ``boundary`` is the state at position n+1.
    """

    window: Word
    boundary: str
    weights: dict
    partition: Number

    def __getitem__(self, word) -> Number:
        return self.weights[tuple(word)]


def _interior_words(m: MarkovModel, fw: FibreWindow, boundary: int):
    """Yield (interior word as indices, Q-product) for paths ending into ``boundary``."""
    Q = m.reversal
    adj = m.shift.adjacency
    layers = fw.sets[:-1]
    if not layers:
        raise ValueError("window needs at least one interior position")

    def walk(pos, word, weight):
        last = word[-1]
        if pos == len(layers):
            if adj[last][boundary]:
                yield word, weight * Q[last][boundary]
            return
        for nxt in layers[pos]:
            if adj[last][nxt]:
                yield from walk(pos + 1, word + (nxt,), weight * Q[last][nxt])

    one = Fraction(1) if m.exact else 1.0
    for a in layers[0]:
        yield from walk(1, (a,), one)


def _boundary_index(m: MarkovModel, fw: FibreWindow, boundary: str) -> int:
    b = m.alphabet.index(boundary)
    if b not in fw.sets[-1]:
        raise ValueError(f"boundary state {boundary!r} is not admissible at the end of window {fw.y!r}")
    return b


def fibre_potential(m: MarkovModel, fw: FibreWindow, boundary: str) -> FibrePotential:
    b = _boundary_index(m, fw, boundary)
    decode = m.alphabet.decode
    raw = {decode(w): wt for w, wt in _interior_words(m, fw, b)}
    z = sum(raw.values(), _zero(m))
    if not raw or z == 0:
        raise ValueError(f"no admissible interior word before boundary {boundary!r}")
    return FibrePotential(fw.y, boundary, {w: v / z for w, v in raw.items()}, z)


def averaging_operator_apply(
    pot: FibrePotential, f: Union[Mapping[Word, Number], Callable[[Word], Number]]
) -> Number:
    """Average of ``f`` over interior words under the potential weights."""
    if callable(f):
        return sum(wt * f(w) for w, wt in pot.weights.items())
    missing = [w for w in pot.weights if w not in f]
    if missing:
        raise ValueError(f"function table lacks interior words {missing[:3]}")
    return sum(wt * f[w] for w, wt in pot.weights.items())


@dataclass(frozen=True)
class GibbsKernel:
    window: Word
    boundary: Word
    values: dict
    partition: Number

    def cylinder(self, prefix: Sequence[str]) -> Number:
        """Kernel mass of interior words starting with ``prefix``."""
        prefix = tuple(prefix)
        k = len(prefix)
        total = None
        for w, v in self.values.items():
            if w[:k] == prefix:
                total = v if total is None else total + v
        return total if total is not None else 0 * next(iter(self.values.values()))


def gibbs_kernel(m: MarkovModel, fw: FibreWindow, boundary: Sequence[str]) -> GibbsKernel:
    """DLR kernel on the interior of ``fw`` given the boundary x_{n+1}, x_{n+2}, ...

    Only x_{n+1} enters the weights (two-point interaction); the rest of the
    boundary is checked for admissibility.
    """
    boundary = tuple(boundary)
    if not boundary:
        raise ValueError("empty boundary")
    idx = m.alphabet.encode(boundary)
    if any(not m.shift.adjacency[a][b] for a, b in zip(idx, idx[1:])):
        raise ValueError(f"boundary {boundary!r} is not an allowed word")
    pot = fibre_potential(m, fw, boundary[0])
    return GibbsKernel(fw.y, boundary, pot.weights, pot.partition)


def boundary_uniformity_constant(m: MarkovModel, fw: FibreWindow, depth: int) -> Number:
    """min over boundary pairs and cylinders a_0..a_depth of the kernel ratio.

    A positive value certifies the boundary uniformity hypothesis at this
    window size; 0 means some cylinder is charged under one boundary and not
    under another.
    """
    if depth < 0 or depth > len(fw.sets) - 2:
        raise ValueError("depth must lie inside the interior of the window")
    names = m.alphabet.symbols
    kernels = []
    for b in fw.sets[-1]:
        try:
            kernels.append(fibre_potential(m, fw, names[b]))
        except ValueError:
            continue
    if len(kernels) <= 1:
        return Fraction(1) if m.exact else 1.0
    prefixes = sorted({w[: depth + 1] for k in kernels for w in k.weights})

    def mass(k, pre):
        return sum((v for w, v in k.weights.items() if w[: depth + 1] == pre), _zero(m))

    table = [[mass(k, pre) for pre in prefixes] for k in kernels]
    best = None
    for i in range(len(kernels)):
        for j in range(len(kernels)):
            if i == j:
                continue
            for num, den in zip(table[i], table[j]):
                if den == 0:
                    continue
                r = num / den
                best = r if best is None or r < best else best
    return best if best is not None else (Fraction(1) if m.exact else 1.0)


# --------------------------------------------------------------------------
# direct conditioning on cylinder neighbourhoods


def constrained_mass(
    m: MarkovModel, fs: FactorSystem, y: Sequence[str], fixed: Mapping[int, str] | None = None
) -> Number:
    """mu({x : pi(x)_0..k = y, x_i = fixed[i]}) by a restricted forward pass."""
    idx = _encode(fs, y)
    fixed = fixed or {}
    if any(not 0 <= pos < len(idx) for pos in fixed):
        raise ValueError("fixed positions must lie inside the observed word")
    layers = []
    for pos, b in enumerate(idx):
        layer = fs.preimages[b]
        if pos in fixed:
            a = m.alphabet.index(fixed[pos])
            layer = (a,) if a in layer else ()
        if not layer:
            return _zero(m)
        layers.append(layer)
    eng = _engine(m, fs)
    if eng.exact:
        P = _int_full(m, eng)
        vec = {a: _int_stationary(m, eng)[a] for a in layers[0]}
        for layer in layers[1:]:
            vec = {j: sum(v * P[i][j] for i, v in vec.items()) for j in layer}
        return Fraction(sum(vec.values()), eng.E * eng.D ** (len(layers) - 1))
    P = m.transition
    vec = {a: float(m.stationary[a]) for a in layers[0]}
    log_scale = 0.0
    for layer in layers[1:]:
        vec = {j: sum(v * P[i][j] for i, v in vec.items()) for j in layer}
        s = sum(vec.values())
        if s <= 0:
            return 0.0
        vec = {j: v / s for j, v in vec.items()}
        log_scale += math.log(s)
    return math.exp(log_scale) * sum(vec.values())


def _int_full(m: MarkovModel, eng) -> list[list[int]]:
    cached = getattr(eng, "ifull", None)
    if cached is None:
        cached = [[int(v * eng.D) for v in row] for row in m.transition]
        eng.ifull = cached
    return cached


def _int_stationary(m: MarkovModel, eng) -> list[int]:
    cached = getattr(eng, "ip", None)
    if cached is None:
        cached = [int(v * eng.E) for v in m.stationary]
        eng.ip = cached
    return cached


def direct_conditional(
    m: MarkovModel,
    fs: FactorSystem,
    y: Sequence[str],
    event: Mapping[int, str],
    given: Mapping[int, str] | None = None,
) -> Number:
    """mu(event | given and pi^-1[y]) for cylinder constraints on hidden states."""
    given = dict(given or {})
    den = constrained_mass(m, fs, y, given)
    if den == 0:
        raise ZeroProbabilityError(f"conditioning event over {tuple(y)!r} has probability 0")
    both = dict(given)
    for pos, a in event.items():
        if pos in both and both[pos] != a:
            return _zero(m)
        both[pos] = a
    return constrained_mass(m, fs, y, both) / den


def fibre_markov_conditional(
    m: MarkovModel, fs: FactorSystem, y: Sequence[str], x: Sequence[str], boundary: str
) -> Number:
    """rho(x_0..x_n | x_{n+1}) on the fibre over y_0..y_{n+1}.

    mu(x_0..x_n | x_{n+1}) divided by the sum of mu(b_0..b_n | x_{n+1}) over
    fibre words b with pi(b_0..b_n x_{n+1}) = y_0..y_{n+1}.
    """
    x = tuple(x)
    n = len(x) - 1
    y = tuple(y)[: n + 2]
    if len(y) < n + 2:
        raise ValueError("observed word must cover the interior and the boundary position")
    word = x + (boundary,)
    if fs.map.apply(word) != y:
        raise ValueError(f"{word!r} does not lie over {y!r}")
    den = constrained_mass(m, fs, y, {n + 1: boundary})
    if den == 0:
        raise ZeroProbabilityError(f"no fibre word over {y!r} enters boundary {boundary!r}")
    num = cylinder_probability(m, word)
    if num == 0:
        raise ValueError(f"{word!r} is not an allowed word")
    return num / den


@dataclass(frozen=True)
class TjurProbe:
    """Conditionals of a test cylinder on neighbourhoods [y_0..y_n z] of a point."""

    point: Word
    continuations: tuple[Word, ...]
    cylinder: Word
    offset: int
    depths: tuple[int, ...]
    values: tuple[tuple[Number, ...], ...]  # values[k][j]: depth depths[k], continuation j

    @property
    def spreads(self) -> tuple[Number, ...]:
        return tuple(max(v) - min(v) for v in self.values)

    def certifies_discontinuity(self, eps: float, runs: int = 3) -> bool:
        """True if the deepest ``runs`` probed depths all have spread >= eps."""
        s = self.spreads
        return len(s) >= runs and all(v >= eps for v in s[-runs:])

    def decay_rate(self):
        return fit_decay(self.depths, [float(v) for v in self.spreads])


def tjur_probe(
    m: MarkovModel,
    fs: FactorSystem,
    y: Sequence[str],
    continuations: Sequence[Sequence[str]],
    cylinder: Sequence[str],
    offset: int = 0,
    depths: Sequence[int] | None = None,
) -> TjurProbe:
    """mu(cylinder at offset | pi^-1[y_0..y_n z]) for each depth n and continuation z."""
    y = tuple(y)
    cylinder = tuple(cylinder)
    conts = tuple(tuple(z) for z in continuations)
    if not conts:
        raise ValueError("need at least one continuation")
    if depths is None:
        depths = range(len(y))
    depths = tuple(depths)
    if any(d >= len(y) for d in depths):
        raise ValueError("probe depth exceeds the supplied prefix")
    event = {offset + i: a for i, a in enumerate(cylinder)}
    rows = []
    for n in depths:
        row = []
        for z in conts:
            word = y[: n + 1] + z
            if max(event, default=0) >= len(word):
                raise ValueError("test cylinder reaches past the conditioning word")
            row.append(direct_conditional(m, fs, word, event))
        rows.append(tuple(row))
    return TjurProbe(y, conts, cylinder, offset, depths, tuple(rows))
