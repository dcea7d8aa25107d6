"""Built-in example models with machine-checkable ground truths.

Each constructor returns a :class:`NamedModel` whose ``facts`` can be run
with :meth:`NamedModel.verify`; the golden tests do exactly that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence, Union

from .conditionals import (
    find_bad_configuration,
    g_n,
    markov_order_probe,
    strong_lumpability,
    variation_estimate,
)
from .disintegration import fibre_marginals, reversed_lumpability, tjur_probe
from .factor import FactorMap, FactorSystem, is_fibre_mixing, verify_image_sft
from .markov import MarkovModel, entropy_rate, stationary_distribution
from .sft import SubshiftSpec, allowed_words, higher_block_recode, topological_entropy

PLUS, MINUS = "+1", "-1"


@dataclass(frozen=True)
class Fact:
    """One expected property, the operation that checks it, and where it comes from."""

    description: str
    operation: str
    check: Callable[["NamedModel"], bool] = field(repr=False, compare=False)
    provenance: str = "derived"


@dataclass(frozen=True)
class NamedModel:
    identifier: str
    model: MarkovModel
    system: FactorSystem
    facts: tuple[Fact, ...] = ()

    def verify(self) -> list[tuple[Fact, bool]]:
        return [(f, bool(f.check(self))) for f in self.facts]


def _probability(p) -> Fraction:
    q = Fraction(str(p)) if isinstance(p, float) else Fraction(p)
    if not 0 < q < 1:
        raise ValueError(f"p must lie strictly between 0 and 1, got {p}")
    return q


def _product_code(P, exact: bool) -> tuple[MarkovModel, FactorSystem]:
    """Two-block recoding of a chain on {+1, -1} with the product factor y = x_0 x_1."""
    base = SubshiftSpec.full_shift((PLUS, MINUS))
    blocks_shift, blocks = higher_block_recode(base, 2)
    sign = {PLUS: 1, MINUS: -1}
    k = {PLUS: 0, MINUS: 1}
    Pb = [
        [P[k[u[1]]][k[v[1]]] if u[1] == v[0] else 0 for v in blocks.values()]
        for u in blocks.values()
    ]
    if not exact:
        Pb = [[float(v) for v in row] for row in Pb]
    model = MarkovModel.from_transition(Pb, shift=blocks_shift)
    mapping = {label: PLUS if sign[b[0]] * sign[b[1]] == 1 else MINUS for label, b in blocks.items()}
    fmap = FactorMap.from_mapping(blocks_shift.alphabet, mapping, target=(PLUS, MINUS))
    return model, FactorSystem.build(blocks_shift, fmap)


def _image_words(nm: NamedModel, length: int):
    return allowed_words(nm.system.image, length)


def closed_form_furstenberg_g(p, y: Sequence[Union[str, int]]):
    """nu(y_0 | y_1..y_n) for the product code of a Bernoulli(p) sequence.

    (a L^S + b) / (c L^S + d) for y_0 = +1 with a = p^2, b = (1-p)^2, c = p,
    d = 1-p, L = p/(1-p) and S the sum of the partial products y_1...y_k.
    Exact when ``p`` is a Fraction.
    """
    signs = [int(v) if not isinstance(v, str) else (1 if v == PLUS else -1) for v in y]
    if not signs:
        raise ValueError("empty word")
    if isinstance(p, (Fraction, int)):
        p = Fraction(p)
    if not 0 < p < 1:
        raise ValueError("p must lie strictly between 0 and 1")
    s, prod = 0, 1
    for v in signs[1:]:
        prod *= v
        s += prod
    lam = p / (1 - p)
    ls = lam**s
    plus = (p * p * ls + (1 - p) ** 2) / (p * ls + (1 - p))
    return plus if signs[0] == 1 else 1 - plus


def furstenberg(p=Fraction(7, 10), exact: bool = True) -> NamedModel:
    q = _probability(p)
    P = [[q, 1 - q], [q, 1 - q]]
    model, fs = _product_code(P, exact)
    gap = abs(2 * q - 1)
    facts = [
        Fact(
            "image is the full 2-shift",
            "verify_image_sft",
            lambda nm: verify_image_sft(nm.system).ok and all(all(r) for r in nm.system.image.adjacency),
            "published",
        ),
        Fact(
            "g_n agrees with the closed form up to length 8",
            "g_n",
            lambda nm: all(
                abs(float(g_n(nm.model, nm.system, w)) - float(closed_form_furstenberg_g(q, w))) <= 1e-12
                for w in _image_words(nm, 8)
            ),
            "published",
        ),
        Fact("fibres are not mixing", "is_fibre_mixing", lambda nm: is_fibre_mixing(nm.system).verdict == "not_mixing"),
    ]
    if q != Fraction(1, 2):
        facts.append(
            Fact(
                f"bad configuration with gap near |2p-1| = {float(gap):.3g}",
                "find_bad_configuration",
                lambda nm: find_bad_configuration(nm.model, nm.system, 4, 40, float(gap) - 0.01) is not None,
                "published",
            )
        )
    else:
        facts += [
            Fact(
                "g_n is 1/2 everywhere",
                "g_n",
                lambda nm: all(g_n(nm.model, nm.system, w) == Fraction(1, 2) for w in _image_words(nm, 7)),
                "published",
            ),
            Fact(
                "fibre marginals are 1/2",
                "conditional_fibre_marginal",
                lambda nm: all(
                    all(v == Fraction(1, 2) for v in fibre_marginals(nm.model, nm.system, w).values())
                    for w in _image_words(nm, 6)
                ),
                "published",
            ),
            Fact(
                "no bad configuration",
                "find_bad_configuration",
                lambda nm: find_bad_configuration(nm.model, nm.system, 4, 20, 1e-9) is None,
                "published",
            ),
        ]
    return NamedModel(f"furstenberg:{float(q):g}", model, fs, tuple(facts))


def symmetric_xor(p=Fraction(2, 5), exact: bool = True) -> NamedModel:
    q = _probability(p)
    P = [[q, 1 - q], [1 - q, q]]
    model, fs = _product_code(P, exact)
    facts = (
        Fact(
            "factor is Bernoulli(p): g_n(+1 | .) = p",
            "g_n",
            lambda nm: all(g_n(nm.model, nm.system, (PLUS,) + w) == q for w in _image_words(nm, 7)),
            "published",
        ),
        Fact(
            "base chain has stationary law (1/2, 1/2)",
            "stationary_distribution",
            lambda nm: stationary_distribution(tuple(map(tuple, P))) == (Fraction(1, 2), Fraction(1, 2)),
            "published",
        ),
        Fact(
            "fibre marginals are 1/2",
            "conditional_fibre_marginal",
            lambda nm: all(
                all(v == Fraction(1, 2) for v in fibre_marginals(nm.model, nm.system, w).values())
                for w in _image_words(nm, 6)
            ),
            "published",
        ),
        Fact("fibres are not mixing", "is_fibre_mixing", lambda nm: is_fibre_mixing(nm.system).verdict == "not_mixing"),
        Fact(
            "no bad configuration",
            "find_bad_configuration",
            lambda nm: find_bad_configuration(nm.model.as_float(), nm.system, 4, 20, 1e-9) is None,
        ),
    )
    return NamedModel(f"xor:{float(q):g}", model, fs, facts)


WL4_P = (
    ("1/2", "1/2", "0", "0"),
    ("1/2", "0", "1/2", "0"),
    ("0", "0", "1/2", "1/2"),
    ("1/2", "0", "1/2", "0"),
)
WL4_FACTOR = {"1": "a", "2": "b", "3": "a", "4": "c"}


def weak_lumpable_4state() -> NamedModel:
    model = MarkovModel.from_transition(WL4_P, symbols=("1", "2", "3", "4"))
    fmap = FactorMap.from_mapping(model.alphabet, WL4_FACTOR)
    fs = FactorSystem.build(model.shift, fmap)
    F = Fraction
    lumped = ((F(1, 2), F(1, 4), F(1, 4)), (F(1), F(0), F(0)), (F(1), F(0), F(0)))

    def tjur_spread_one(nm):
        probe = tjur_probe(nm.model, nm.system, ("a",) * 12, [("b",), ("c",)], ("1",))
        return all(s == 1 for s in probe.spreads)

    facts = (
        Fact(
            "stationary law (1/3, 1/6, 1/3, 1/6)",
            "stationary_distribution",
            lambda nm: nm.model.stationary == (F(1, 3), F(1, 6), F(1, 3), F(1, 6)),
            "published",
        ),
        Fact(
            "not strongly lumpable",
            "strong_lumpability",
            lambda nm: not strong_lumpability(nm.model.transition, nm.system.map).lumpable,
            "published",
        ),
        Fact(
            "factor is Markov with the lumped matrix",
            "markov_order_probe",
            lambda nm: (lambda r: r.order is not None and r.order <= 1 and r.matrix == lumped)(
                markov_order_probe(nm.model, nm.system, 8)
            ),
            "published",
        ),
        Fact(
            "reversed chain is lumpable",
            "reversed_lumpability",
            lambda nm: reversed_lumpability(nm.model, nm.system.map).lumpable,
            "published",
        ),
        Fact("Tjur spread 1 along a-prefixes", "tjur_probe", tjur_spread_one, "published"),
        Fact(
            "entropy rate log 2",
            "entropy_rate",
            lambda nm: abs(entropy_rate(nm.model) - math.log(2)) <= 1e-12,
            "published",
        ),
        Fact(
            "topological entropy log 2",
            "topological_entropy",
            lambda nm: abs(topological_entropy(nm.model.shift) - math.log(2)) <= 1e-9,
            "published",
        ),
    )
    return NamedModel("wl4", model, fs, facts)


POS3_DEFAULT = (
    ("1/2", "1/3", "1/6"),
    ("1/6", "1/2", "1/3"),
    ("1/3", "1/6", "1/2"),
)
POS3_FACTOR = {"1": "a", "2": "a", "3": "b"}


def positive_merge_3state(P=None) -> NamedModel:
    """Strictly positive 3-state chain with states 1 and 2 merged.

    The default matrix is cyclic rather than symmetric: a symmetric
    circulant with this merge is strongly lumpable, which makes the factor
    Markov and every variation identically zero.
    """
    P = POS3_DEFAULT if P is None else P
    model = MarkovModel.from_transition(P, symbols=("1", "2", "3"))
    if any(v <= 0 for row in model.transition for v in row):
        raise ValueError("positive_merge_3state needs a strictly positive matrix")
    fmap = FactorMap.from_mapping(model.alphabet, POS3_FACTOR)
    fs = FactorSystem.build(model.shift, fmap)

    def ratio_below_one(nm):
        f = nm.model.as_float()
        v3 = variation_estimate(f, nm.system, 3, 6).lower
        v4 = variation_estimate(f, nm.system, 4, 6).lower
        return v3 == 0 or v4 / v3 < 1

    facts = (
        Fact(
            "fibre mixing with index 1",
            "is_fibre_mixing",
            lambda nm: (lambda v: v.verdict == "mixing" and v.index == 1)(is_fibre_mixing(nm.system)),
            "trivial",
        ),
        Fact("var_4 / var_3 < 1", "variation_estimate", ratio_below_one),
    )
    return NamedModel("pos3", model, fs, facts)


PRESETS = ("furstenberg:0.7", "wl4", "xor:0.4", "pos3")


def preset(identifier: str) -> NamedModel:
    """Look up a preset such as ``"furstenberg:0.3"``, ``"wl4"``, ``"xor:0.25"`` or ``"pos3"``."""
    name, _, arg = identifier.strip().partition(":")
    try:
        if name == "furstenberg":
            return furstenberg(Fraction(arg) if arg else Fraction(7, 10))
        if name == "xor":
            return symmetric_xor(Fraction(arg) if arg else Fraction(2, 5))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad preset parameter in {identifier!r}: {exc}") from None
    if arg:
        raise ValueError(f"preset {name!r} takes no parameter")
    if name == "wl4":
        return weak_lumpable_4state()
    if name == "pos3":
        return positive_merge_3state()
    raise ValueError(f"unknown preset {identifier!r}; known: {', '.join(PRESETS)}")


def all_presets() -> list[NamedModel]:
    return [
        furstenberg(Fraction(3, 10)),
        furstenberg(Fraction(1, 2)),
        furstenberg(Fraction(7, 10)),
        symmetric_xor(Fraction(1, 4)),
        symmetric_xor(Fraction(3, 5)),
        weak_lumpable_4state(),
        positive_merge_3state(),
    ]


__all__ = [
    "Fact",
    "NamedModel",
    "closed_form_furstenberg_g",
    "furstenberg",
    "symmetric_xor",
    "weak_lumpable_4state",
    "positive_merge_3state",
    "preset",
    "all_presets",
    "PRESETS",
]

