"""One-block factor maps and the topology of their fibres.

The fibre over an observed word y_0..y_n is the non-homogeneous SFT whose
n-th transition matrix is the block of the domain adjacency with rows in
pi^-1(y_n) and columns in pi^-1(y_{n+1}).

Fibre mixing is decided on reachability relations: for a Sigma-word w let
R(w) be the 0/1 matrix with R(a, b) = 1 iff some fibre path over w runs from
a to b. The window-trimmed product over w is positive exactly when R(w) is a
full rectangle on its row and column supports, and rectangles stay rectangles
under extension on either side. So the non-rectangular words form a factorial
language, and the factor is fibre mixing iff that language is finite, which
is a cycle test on the finite graph of (first, last, R) states.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .sft import Alphabet, SubshiftSpec, Word, boolean_product, is_irreducible

BoolMatrix = tuple[tuple[int, ...], ...]

SEMIGROUP_CAP = 10**6


@dataclass(frozen=True)
class FactorMap:
    """Surjective symbol map pi: source alphabet -> target alphabet."""

    source: Alphabet
    target: Alphabet
    assignment: tuple[int, ...]

    def __post_init__(self):
        assignment = tuple(int(v) for v in self.assignment)
        if len(assignment) != len(self.source):
            raise ValueError("factor assignment must cover every source symbol")
        if any(not 0 <= v < len(self.target) for v in assignment):
            raise ValueError("factor assignment points outside the target alphabet")
        missing = set(range(len(self.target))) - set(assignment)
        if missing:
            names = [self.target.symbols[i] for i in sorted(missing)]
            raise ValueError(f"factor map is not surjective; unhit symbols {names}")
        object.__setattr__(self, "assignment", assignment)

    @classmethod
    def from_mapping(cls, source: Alphabet, mapping: Mapping[str, str], target: Sequence[str] | None = None) -> "FactorMap":
        """Build from ``{source_label: target_label}``.

        Without an explicit ``target`` ordering, target symbols are ordered by
        first appearance along the source alphabet.
        """
        unknown = set(mapping) - set(source.symbols)
        if unknown:
            raise ValueError(f"factor mentions unknown symbols {sorted(unknown)}")
        missing = [a for a in source if a not in mapping]
        if missing:
            raise ValueError(f"factor does not assign symbols {missing}")
        if target is None:
            target = list(dict.fromkeys(str(mapping[a]) for a in source))
        tgt = Alphabet(tuple(target))
        return cls(source, tgt, tuple(tgt.index(str(mapping[a])) for a in source))

    @classmethod
    def identity(cls, source: Alphabet) -> "FactorMap":
        return cls(source, source, tuple(range(len(source))))

    def preimage(self, b: int) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.assignment) if v == b)

    def apply(self, word: Sequence[str]) -> Word:
        return tuple(self.target.symbols[self.assignment[self.source.index(a)]] for a in word)

    def is_injective(self) -> bool:
        return len(set(self.assignment)) == len(self.assignment)

    def as_mapping(self) -> dict[str, str]:
        return {a: self.target.symbols[b] for a, b in zip(self.source.symbols, self.assignment)}


def induced_image_adjacency(domain: SubshiftSpec, fmap: FactorMap) -> SubshiftSpec:
    """M'(b, b') = 1 iff some allowed domain edge maps onto (b, b')."""
    k = len(fmap.target)
    m = [[0] * k for _ in range(k)]
    for i in range(domain.size):
        for j in domain.successors(i):
            m[fmap.assignment[i]][fmap.assignment[j]] = 1
    return SubshiftSpec(fmap.target, tuple(tuple(r) for r in m))


@dataclass(frozen=True)
class FactorSystem:
    """Domain SFT, factor map, candidate image SFT, and per-edge blocks."""

    domain: SubshiftSpec
    map: FactorMap
    image: SubshiftSpec
    preimages: tuple[tuple[int, ...], ...] = field(init=False)
    blocks: dict = field(init=False, compare=False, hash=False, repr=False)

    def __post_init__(self):
        if self.map.source != self.domain.alphabet:
            raise ValueError("factor source alphabet differs from the domain alphabet")
        if self.image.alphabet != self.map.target:
            raise ValueError("image alphabet differs from the factor target alphabet")
        induced = induced_image_adjacency(self.domain, self.map)
        for b in range(self.image.size):
            for c in range(self.image.size):
                if induced.adjacency[b][c] and not self.image.adjacency[b][c]:
                    pair = (self.image.alphabet.symbols[b], self.image.alphabet.symbols[c])
                    raise ValueError(f"image adjacency forbids {pair}, which the domain realizes")
        pre = tuple(self.map.preimage(b) for b in range(len(self.map.target)))
        object.__setattr__(self, "preimages", pre)
        blocks = {}
        for b in range(self.image.size):
            for c in range(self.image.size):
                blocks[b, c] = tuple(tuple(self.domain.adjacency[i][j] for j in pre[c]) for i in pre[b])
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def build(cls, domain: SubshiftSpec, fmap: FactorMap, image_adjacency=None) -> "FactorSystem":
        if image_adjacency is None:
            image = induced_image_adjacency(domain, fmap)
        else:
            image = SubshiftSpec(fmap.target, tuple(tuple(int(v) for v in r) for r in image_adjacency))
        return cls(domain, fmap, image)

    def block(self, b: int, c: int) -> BoolMatrix:
        """0/1 submatrix M_{b,c}: rows pi^-1(b), columns pi^-1(c)."""
        return self.blocks[b, c]

    def encode(self, y: Sequence[str]) -> tuple[int, ...]:
        return self.image.alphabet.encode(y)


@dataclass(frozen=True)
class ImageCheck:
    ok: bool
    witness: Optional[Word]
    complete: bool  # True when the follower-set search closed before the depth bound


def verify_image_sft(fs: FactorSystem, depth: int = 8) -> ImageCheck:
    """Check that every word allowed by the image adjacency is realized.

    Breadth-first subset construction: the state after reading y is the set
    of domain states at which a fibre path over y can end. The first word
    reaching the empty set is the shortest unrealizable word.
    """
    if depth < 2:
        raise ValueError("depth must be at least 2")
    img = fs.image
    start = [(b, frozenset(fs.preimages[b])) for b in range(img.size)]
    seen = set(start)
    queue = deque((state, (state[0],)) for state in start)
    cap = 2 ** fs.domain.size * img.size
    while queue:
        (b, states), word = queue.popleft()
        if len(word) >= depth:
            return ImageCheck(True, None, False)
        for c in img.successors(b):
            nxt = frozenset(j for j in fs.preimages[c] if any(fs.domain.adjacency[i][j] for i in states))
            w = word + (c,)
            if not nxt:
                return ImageCheck(False, img.alphabet.decode(w), True)
            key = (c, nxt)
            if key not in seen and len(seen) < cap:
                seen.add(key)
                queue.append((key, w))
    return ImageCheck(True, None, True)


@dataclass(frozen=True)
class FibreWindow:
    """Trimmed fibre over a finite observed word.

    ``sets[k]`` are the domain states kept at position k, ``matrices[k]`` the
    0/1 block between ``sets[k]`` and ``sets[k+1]``, ``removed[k]`` the states
    dropped by trimming.
    """

    y: Word
    sets: tuple[tuple[int, ...], ...]
    matrices: tuple[BoolMatrix, ...]
    removed: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.y)


def trim_layers(domain: SubshiftSpec, layers: Sequence[Sequence[int]]) -> tuple[tuple[int, ...], ...]:
    """Keep only states lying on some full path through all layers."""
    fwd = [tuple(layers[0])]
    for layer in layers[1:]:
        prev = fwd[-1]
        fwd.append(tuple(j for j in layer if any(domain.adjacency[i][j] for i in prev)))
    kept = [fwd[-1]]
    for layer in reversed(fwd[:-1]):
        nxt = kept[-1]
        kept.append(tuple(i for i in layer if any(domain.adjacency[i][j] for j in nxt)))
    return tuple(reversed(kept))


def fibre_window(fs: FactorSystem, y: Sequence[str]) -> FibreWindow:
    y = tuple(y)
    idx = fs.encode(y)
    if not fs.image.allows(y):
        raise ValueError(f"word {y!r} is not allowed in the image SFT")
    full = [fs.preimages[b] for b in idx]
    sets = trim_layers(fs.domain, full)
    if any(not s for s in sets):
        raise ValueError(f"word {y!r} has an empty fibre")
    removed = tuple(tuple(i for i in f if i not in s) for f, s in zip(full, sets))
    mats = tuple(
        tuple(tuple(fs.domain.adjacency[i][j] for j in sets[k + 1]) for i in sets[k])
        for k in range(len(sets) - 1)
    )
    return FibreWindow(y, sets, mats, removed)


def _is_positive(m: BoolMatrix) -> bool:
    return all(all(row) for row in m)


def transitivity_index(fw: FibreWindow) -> Optional[int]:
    """Smallest m such that every product of m consecutive window matrices is positive."""
    mats = fw.matrices
    for m in range(1, len(mats) + 1):
        ok = True
        for start in range(len(mats) - m + 1):
            prod = mats[start]
            for k in range(start + 1, start + m):
                prod = boolean_product(prod, mats[k])
            if not _is_positive(prod):
                ok = False
                break
        if ok:
            return m
    return None


def _rectangular(r: BoolMatrix) -> bool:
    rows = [i for i, row in enumerate(r) if any(row)]
    cols = [j for j in range(len(r[0])) if any(row[j] for row in r)] if r else []
    return all(r[i][j] for i in rows for j in cols)


def _nonzero(r: BoolMatrix) -> bool:
    return any(any(row) for row in r)


@dataclass(frozen=True)
class MixingVerdict:
    """Outcome of the fibre-mixing decision.

    ``index`` is the uniform number of fibre matrices after which every
    window-trimmed product is positive (set for ``mixing``). For
    ``not_mixing`` the witness is a Sigma-word with two domain states, both on
    fibre paths over it, that no fibre path connects. ``explored`` counts
    semigroup states visited.
    """

    verdict: str
    index: Optional[int] = None
    witness_word: Optional[Word] = None
    witness_pair: Optional[tuple[str, str]] = None
    explored: int = 0
    cap: int = SEMIGROUP_CAP


def _reach(fs: FactorSystem, idx: Sequence[int]) -> BoolMatrix:
    r = tuple(tuple(int(i == j) for j in range(len(fs.preimages[idx[0]]))) for i in range(len(fs.preimages[idx[0]])))
    for b, c in zip(idx, idx[1:]):
        r = boolean_product(r, fs.block(b, c))
    return r


def reachability(fs: FactorSystem, y: Sequence[str]) -> BoolMatrix:
    """R(y): which preimages of y_0 reach which preimages of y_last inside the fibre."""
    return _reach(fs, fs.encode(y))


def _gap_pair(fs: FactorSystem, idx: Sequence[int], r: BoolMatrix) -> tuple[str, str]:
    src = fs.preimages[idx[0]]
    dst = fs.preimages[idx[-1]]
    rows = [i for i, row in enumerate(r) if any(row)]
    cols = [j for j in range(len(dst)) if any(row[j] for row in r)]
    for i in rows:
        for j in cols:
            if not r[i][j]:
                names = fs.domain.alphabet.symbols
                return names[src[i]], names[dst[j]]
    raise AssertionError("relation is rectangular")


def is_fibre_mixing(fs: FactorSystem, cap: int = SEMIGROUP_CAP) -> MixingVerdict:
    """Decide fibre mixing through the finite semigroup of fibre relations."""
    img = fs.image
    # state: (first symbol, last symbol, relation); only non-rectangular ones are kept
    parent: dict = {}
    depth: dict = {}
    order: list = []
    queue: deque = deque()
    for b in range(img.size):
        r = _reach(fs, (b,))
        if not _rectangular(r):
            key = (b, b, r)
            parent[key] = None
            depth[key] = 0
            order.append(key)
            queue.append(key)
    edges: dict = {}
    while queue:
        key = queue.popleft()
        first, last, r = key
        succ = []
        for c in img.successors(last):
            r2 = boolean_product(r, fs.block(last, c))
            if not _nonzero(r2) or _rectangular(r2):
                continue
            k2 = (first, c, r2)
            succ.append(k2)
            if k2 not in parent:
                if len(parent) >= cap:
                    return MixingVerdict("inconclusive", explored=len(parent), cap=cap)
                parent[k2] = (key, c)
                depth[k2] = depth[key] + 1
                order.append(k2)
                queue.append(k2)
        edges[key] = succ

    cycle_node = _find_cycle(order, edges)
    if cycle_node is not None:
        word = _word_to(parent, cycle_node)
        # pump once around the cycle so the witness is visibly long
        word = _extend_along_cycle(edges, cycle_node, word)
        idx = tuple(word)
        r = _reach(fs, idx)
        return MixingVerdict(
            "not_mixing",
            witness_word=img.alphabet.decode(idx),
            witness_pair=_gap_pair(fs, idx, r),
            explored=len(parent),
            cap=cap,
        )
    longest = max(depth.values(), default=-1)
    return MixingVerdict("mixing", index=max(1, longest + 1), explored=len(parent), cap=cap)


def _word_to(parent: dict, key) -> list[int]:
    word = []
    while parent[key] is not None:
        key, c = parent[key]
        word.append(c)
    word.append(key[0])
    return word[::-1]


def _find_cycle(order: list, edges: dict):
    """Return a node on a directed cycle, or None (iterative three-colour DFS)."""
    colour = {k: 0 for k in order}
    for root in order:
        if colour[root]:
            continue
        stack = [(root, iter(edges.get(root, ())))]
        colour[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[node] = 2
                stack.pop()
            elif colour[nxt] == 1:
                return nxt
            elif colour[nxt] == 0:
                colour[nxt] = 1
                stack.append((nxt, iter(edges.get(nxt, ()))))
    return None


def _extend_along_cycle(edges: dict, start, word: list[int]) -> list[int]:
    # breadth-first search for a path start -> ... -> start
    prev = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in edges.get(node, ()):
            if nxt == start:
                path = [nxt[1]]
                while node != start:
                    path.append(node[1])
                    node = prev[node]
                return word + path[::-1]
            if nxt not in prev:
                prev[nxt] = node
                queue.append(nxt)
    return word


def check_assumptions(fs: FactorSystem, depth: int = 8) -> ImageCheck:
    """(A1) irreducible domain and (A2) image realized by the domain."""
    if not is_irreducible(fs.domain):
        raise ValueError("domain SFT is not irreducible")
    return verify_image_sft(fs, depth)
