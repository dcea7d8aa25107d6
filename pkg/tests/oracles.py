"""Brute-force reference implementations.

Everything here enumerates domain words directly, so it is slow but shares
no code path with the forward/backward recursions under test.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction

from mflab.markov import cylinder_probability
from mflab.sft import allowed_words


def fibre_masses(m, fs, length: int) -> dict:
    """nu([y]) for every image word of the given length, by summing cylinders."""
    out = defaultdict(lambda: Fraction(0) if m.exact else 0.0)
    for w in allowed_words(m.shift, length):
        out[fs.map.apply(w)] += cylinder_probability(m, w)
    return dict(out)


def fibre_mass(m, fs, y) -> object:
    y = tuple(y)
    zero = Fraction(0) if m.exact else 0.0
    return sum(
        (cylinder_probability(m, w) for w in allowed_words(m.shift, len(y)) if fs.map.apply(w) == y),
        zero,
    )


def conditional(m, fs, y, event: dict, given: dict | None = None):
    """mu(event | given and pi^-1[y]) for position -> state constraints."""
    given = given or {}
    num = den = Fraction(0) if m.exact else 0.0
    for w in allowed_words(m.shift, len(y)):
        if fs.map.apply(w) != tuple(y) or any(w[i] != a for i, a in given.items()):
            continue
        mass = cylinder_probability(m, w)
        den += mass
        if all(w[i] == a for i, a in event.items()):
            num += mass
    return num / den


def first_symbol_posterior(m, fs, window) -> dict:
    """P(X_0 = a | pi(X)_0..N = window) by enumeration."""
    post = defaultdict(Fraction)
    for w in allowed_words(m.shift, len(window)):
        if fs.map.apply(w) == tuple(window):
            post[w[0]] += cylinder_probability(m, w)
    total = sum(post.values())
    return {a: v / total for a, v in post.items()}


def interior_weights(m, fw, boundary: str) -> dict:
    """Normalized Q-products over every domain word matching the window sets."""
    names = m.alphabet.symbols
    b = m.alphabet.index(boundary)
    raw = {}
    for w in allowed_words(m.shift, len(fw.sets) - 1):
        idx = m.alphabet.encode(w)
        if any(i not in s for i, s in zip(idx, fw.sets)) or not m.shift.adjacency[idx[-1]][b]:
            continue
        weight = Fraction(1)
        for u, v in zip(idx + (b,), idx[1:] + (b,)):
            weight *= m.reversal[u][v]
        raw[tuple(names[i] for i in idx)] = weight
    z = sum(raw.values())
    return {w: v / z for w, v in raw.items()}
