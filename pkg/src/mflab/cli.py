"""Command-line front end: model files, analyses, and deterministic reports.

Model files are JSON objects with the fields ``alphabet``, ``transition``,
``factor`` and optionally ``adjacency`` and ``image_adjacency``. Exact
entries are written as strings such as ``"1/3"``; decimal entries switch
the model to double precision.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Sequence

from .conditionals import (
    ZeroProbabilityError,
    empirical_conditional,
    find_bad_configuration,
    fit_decay,
    g_n,
    markov_order_probe,
    strong_lumpability,
    variation_estimate,
)
from .disintegration import g_tilde, kappa, reversed_lumpability, tjur_probe
from .factor import FactorMap, FactorSystem, check_assumptions, is_fibre_mixing
from .markov import RNG_NAME, MarkovModel, entropy_rate, sample_path, support
from .sft import SubshiftSpec, is_aperiodic, is_irreducible, topological_entropy
from .zoo import preset

EXIT_OK, EXIT_INPUT, EXIT_A2 = 0, 2, 3
SUBCOMMANDS = ("check", "lump", "mix", "gfun", "badconfig", "gtilde", "tjur", "simulate")


class ModelError(ValueError):
    """Malformed or inconsistent model input; the message names the location."""


class A2Violation(ValueError):
    """The candidate image is not realized by the domain."""

    def __init__(self, witness):
        self.witness = tuple(witness)
        super().__init__(f"image SFT check failed: word {','.join(self.witness)} is allowed but not realized")


@dataclass(frozen=True)
class LoadedModel:
    identifier: str
    model: MarkovModel
    system: FactorSystem

    @property
    def provenance(self) -> str:
        return "exact" if self.model.exact else "double"


# --------------------------------------------------------------------------
# model files


def _matrix_field(data: dict, name: str, n: int) -> list[list[Any]]:
    rows = data.get(name)
    if not isinstance(rows, list) or len(rows) != n:
        raise ModelError(f"{name}: expected a list of {n} rows")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise ModelError(f"{name}: row {i} must have {n} entries")
    return rows


def _image_matrix(spec, target: Sequence[str]) -> list[list[int]]:
    if isinstance(spec, dict):
        unknown = [k for k in spec if k not in target]
        if unknown:
            raise ModelError(f"image_adjacency: unknown image symbols {unknown}")
        rows = []
        for b in target:
            succ = spec.get(b, [])
            bad = [c for c in succ if c not in target]
            if bad:
                raise ModelError(f"image_adjacency: {b!r} lists unknown successors {bad}")
            rows.append([int(c in succ) for c in target])
        return rows
    if isinstance(spec, list) and len(spec) == len(target) and all(isinstance(r, list) and len(r) == len(target) for r in spec):
        return [[int(v) for v in r] for r in spec]
    raise ModelError("image_adjacency: expected successor lists or a square 0/1 matrix")


def model_from_dict(data: dict, identifier: str = "<model>") -> LoadedModel:
    """Build and validate a model from the parsed file contents (A2 not checked)."""
    if not isinstance(data, dict):
        raise ModelError("model file must contain a JSON object")
    missing = [k for k in ("alphabet", "transition", "factor") if k not in data]
    if missing:
        raise ModelError(f"missing field(s): {', '.join(missing)}")
    alphabet = data["alphabet"]
    if not isinstance(alphabet, list) or not alphabet:
        raise ModelError("alphabet: expected a non-empty list of labels")
    alphabet = [str(a) for a in alphabet]
    n = len(alphabet)
    rows = _matrix_field(data, "transition", n)
    try:
        shift = None
        if "adjacency" in data:
            shift = SubshiftSpec.from_matrix(alphabet, _matrix_field(data, "adjacency", n))
        model = MarkovModel.from_transition(rows, shift=shift, symbols=alphabet)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ModelError(f"transition: {exc}") from None
    factor = data["factor"]
    if not isinstance(factor, dict):
        raise ModelError("factor: expected an object mapping domain symbols to image symbols")
    try:
        fmap = FactorMap.from_mapping(model.alphabet, {str(k): str(v) for k, v in factor.items()})
    except (ValueError, KeyError) as exc:
        raise ModelError(f"factor: {exc}") from None
    image = data.get("image_adjacency")
    try:
        fs = FactorSystem.build(
            model.shift, fmap, None if image is None else _image_matrix(image, fmap.target.symbols)
        )
    except ValueError as exc:
        raise ModelError(f"image_adjacency: {exc}") from None
    if not is_irreducible(model.shift):
        raise ModelError("adjacency: domain SFT is not irreducible")
    return LoadedModel(identifier, model, fs)


def _entry(v) -> Any:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return v


def serialize_model(model: MarkovModel, fs: FactorSystem) -> dict:
    """Inverse of :func:`model_from_dict`; exact entries stay exact."""
    target = fs.image.alphabet.symbols
    return {
        "alphabet": list(model.alphabet.symbols),
        "transition": [[_entry(v) for v in row] for row in model.transition],
        "factor": fs.map.as_mapping(),
        "adjacency": [list(r) for r in model.shift.adjacency],
        "image_adjacency": {b: [target[j] for j, v in enumerate(row) if v] for b, row in zip(target, fs.image.adjacency)},
    }


def parse_model(source: str, is_preset: Optional[bool] = None, depth: int = 8, strict: bool = True) -> LoadedModel:
    """Load a preset id or a model file and validate it.

    With ``strict`` an unrealized image word raises :class:`A2Violation`.
    """
    if is_preset is None:
        is_preset = not Path(source).exists()
    if is_preset:
        try:
            nm = preset(source)
        except ValueError as exc:
            raise ModelError(str(exc)) from None
        loaded = LoadedModel(nm.identifier, nm.model, nm.system)
    else:
        try:
            data = json.loads(Path(source).read_text())
        except OSError as exc:
            raise ModelError(f"cannot read {source}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ModelError(f"{source}: malformed JSON at line {exc.lineno} column {exc.colno}") from None
        loaded = model_from_dict(data, identifier=Path(source).name)
    if strict:
        check = check_assumptions(loaded.system, depth=max(depth, 2))
        if not check.ok:
            raise A2Violation(check.witness)
    return loaded


# --------------------------------------------------------------------------
# reports


def _plain(v):
    if isinstance(v, Fraction):
        return _entry(v)
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, list):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    return v


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (bool, list, dict)):
        return json.dumps(x)
    return x


class Report:
    """Analysis output: verdicts, scalar values with provenance, and tables."""

    def __init__(self, analysis: str, inputs: dict):
        self.analysis = analysis
        self.inputs = inputs
        self.verdicts: dict = {}
        self.values: dict = {}
        self.tables: dict = {}

    def value(self, name: str, v, provenance: str) -> None:
        self.values[name] = {"value": v, "provenance": provenance}

    def table(self, name: str, columns: Sequence[str], rows, provenance: str) -> None:
        self.tables[name] = {"columns": list(columns), "provenance": provenance, "rows": [list(r) for r in rows]}

    def as_dict(self) -> dict:
        return _plain(
            {
                "analysis": self.analysis,
                "inputs": self.inputs,
                "verdicts": self.verdicts,
                "values": self.values,
                "tables": self.tables,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        d = self.as_dict()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        sections = []
        if d["verdicts"] or d["values"] or d["inputs"]:
            rows = [["input", k, v, ""] for k, v in d["inputs"].items()]
            rows += [["verdict", k, v, ""] for k, v in d["verdicts"].items()]
            rows += [["value", k, v["value"], v["provenance"]] for k, v in d["values"].items()]
            sections.append(("summary", ["kind", "name", "value", "provenance"], rows))
        for name, t in d["tables"].items():
            sections.append((name, t["columns"] + ["provenance"], [r + [t["provenance"]] for r in t["rows"]]))
        for i, (name, cols, rows) in enumerate(sections):
            if i:
                buf.write("\n")
            buf.write(f"# {d['analysis']}: {name}\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([_cell(x) for x in r])
        return buf.getvalue()


# --------------------------------------------------------------------------
# analyses


def _word(text: Optional[str]) -> Optional[tuple[str, ...]]:
    if text is None:
        return None
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _observed(lm: LoadedModel, args, length: int) -> tuple[str, ...]:
    """The --word option validated against the image, or a seeded sample."""
    word = _word(args.word)
    if not word:
        return _default_word(lm, length, args.seed)
    img = lm.system.image
    unknown = [b for b in word if b not in img.alphabet]
    if unknown:
        raise ModelError(f"--word: unknown image symbols {unknown}")
    if not img.allows(word):
        raise ModelError(f"--word: {','.join(word)} is not allowed in the image")
    return word


def _default_word(lm: LoadedModel, length: int, seed: int) -> tuple[str, ...]:
    path = sample_path(lm.model, length, seed)
    return lm.system.map.apply(path)


def _joined(w) -> Optional[str]:
    return None if w is None else ",".join(w)


def run_check(lm: LoadedModel, args) -> Report:
    r = Report("check", _inputs(lm, args))
    s = lm.model.shift
    a2 = check_assumptions(lm.system, depth=args.depth)
    r.verdicts.update(
        irreducible=is_irreducible(s),
        aperiodic=is_aperiodic(s),
        compatible=support(lm.model.transition) == s.adjacency,
        image_realized=a2.ok,
        image_check_complete=a2.complete,
        image_witness=_joined(a2.witness),
    )
    r.value("entropy_rate", entropy_rate(lm.model), "double")
    r.value("topological_entropy", topological_entropy(s), "double")
    r.table(
        "stationary",
        ["symbol", "probability"],
        zip(lm.model.alphabet.symbols, lm.model.stationary),
        lm.provenance,
    )
    return r


def run_lump(lm: LoadedModel, args) -> Report:
    r = Report("lump", _inputs(lm, args))
    m, fs = lm.model, lm.system
    target = fs.image.alphabet.symbols
    strong = strong_lumpability(m.transition, fs.map)
    rev = reversed_lumpability(m, fs.map)
    probe = markov_order_probe(m, fs, depth=args.depth)
    r.verdicts.update(
        strong_lumpable=strong.lumpable,
        strong_witness=strong.witness,
        reversed_lumpable=rev.lumpable,
        reversed_witness=rev.witness,
        markov_order=probe.order,
        order_probe_depth=probe.depth,
    )
    if strong.lumpable:
        r.table("strong_lumped_matrix", ["from"] + list(target), ([b] + list(row) for b, row in zip(target, strong.matrix)), lm.provenance)
    if rev.lumpable:
        r.table("reversed_kernel", ["y0"] + list(target), ([b] + list(row) for b, row in zip(target, rev.kernel)), lm.provenance)
    if probe.matrix is not None:
        r.table("factor_matrix", ["from"] + list(target), ([b] + list(row) for b, row in zip(target, probe.matrix)), lm.provenance)
    if probe.violation is not None:
        r.verdicts["order_violation"] = _plain(probe.violation)
    return r


def run_mix(lm: LoadedModel, args) -> Report:
    r = Report("mix", _inputs(lm, args))
    v = is_fibre_mixing(lm.system)
    r.verdicts.update(
        verdict=v.verdict,
        index=v.index,
        witness_word=_joined(v.witness_word),
        witness_pair=v.witness_pair,
        explored=v.explored,
    )
    return r


def run_gfun(lm: LoadedModel, args) -> Report:
    r = Report("gfun", _inputs(lm, args))
    depth = args.depth
    word = _observed(lm, args, depth + 1)
    r.inputs["word"] = _joined(word)
    fm = lm.model.as_float()
    rows = []
    lowers = []
    for n in range(len(word)):
        g = g_n(lm.model, lm.system, word[: n + 1])
        if n == 0:
            rows.append([n, g, None, None, None])
            continue
        vb = variation_estimate(fm, lm.system, n, args.ext, seed=args.seed)
        lowers.append((n, vb.lower))
        rows.append([n, g, vb.lower, vb.upper, vb.sampled])
    r.table("gfun", ["n", "g_n", "var_lower", "var_upper", "sampled"], rows, f"g_n:{lm.provenance};var:double")
    fit = fit_decay([n for n, _ in lowers], [v for _, v in lowers])
    if fit is not None:
        r.value("decay_rate", fit.rate, "double")
        r.value("decay_r_squared", fit.r_squared, "double")
    return r


def run_badconfig(lm: LoadedModel, args) -> Report:
    r = Report("badconfig", _inputs(lm, args))
    w = find_bad_configuration(lm.model.as_float(), lm.system, args.depth, args.ext, args.eps, seed=args.seed)
    r.verdicts["found"] = w is not None
    if w is not None:
        r.verdicts.update(center=_joined(w.center), upper_continuation=_joined(w.upper), lower_continuation=_joined(w.lower))
        r.value("upper_value", w.upper_value, "double")
        r.value("lower_value", w.lower_value, "double")
        r.value("gap", w.gap, "double")
    return r


def run_gtilde(lm: LoadedModel, args) -> Report:
    r = Report("gtilde", _inputs(lm, args))
    word = _observed(lm, args, args.depth + 1)
    r.inputs["word"] = _joined(word)
    gt = g_tilde(lm.model, lm.system, word)
    r.verdicts.update(converged=gt.converged, reversed_lumpable=reversed_lumpability(lm.model, lm.system.map).lumpable)
    r.value("g_tilde", gt.value, lm.provenance)
    r.value("depth", gt.depth, "exact")
    r.value("deltas", list(gt.deltas), "double")
    r.value("kappa", kappa(lm.model), lm.provenance)
    return r


def run_tjur(lm: LoadedModel, args) -> Report:
    r = Report("tjur", _inputs(lm, args))
    word = _observed(lm, args, args.depth + 1)
    img = lm.system.image
    if args.cont:
        conts = [_word(c) for c in args.cont.split(";")]
    else:
        last = img.alphabet.index(word[-1])
        conts = [(img.alphabet.symbols[c],) for c in img.successors(last)]
    if args.cylinder:
        cyl = _word(args.cylinder)
    else:
        cyl = (lm.model.alphabet.symbols[lm.system.preimages[img.alphabet.index(word[0])][0]],)
    r.inputs.update(word=_joined(word), continuations=[_joined(c) for c in conts], cylinder=_joined(cyl), offset=args.offset)
    probe = tjur_probe(lm.model, lm.system, word, conts, cyl, offset=args.offset)
    rows = [[d, s] + list(v) for d, s, v in zip(probe.depths, probe.spreads, probe.values)]
    r.table("tjur", ["depth", "spread"] + [f"z={_joined(c)}" for c in conts], rows, lm.provenance)
    r.verdicts["discontinuity_certified"] = probe.certifies_discontinuity(args.eps)
    return r


def run_simulate(lm: LoadedModel, args) -> Report:
    r = Report("simulate", _inputs(lm, args))
    word = _observed(lm, args, args.depth + 1)
    r.inputs.update(word=_joined(word), samples=args.samples, rng=RNG_NAME)
    exact = g_n(lm.model, lm.system, word)
    est = empirical_conditional(lm.model, lm.system, word, args.samples, args.seed)
    r.value("g_n", exact, lm.provenance)
    r.value("estimate", est.estimate, "sampled")
    r.value("stderr", est.stderr, "sampled")
    r.value("hits", est.hits, "sampled")
    z = None
    if est.stderr:
        z = abs(float(exact) - est.estimate) / est.stderr
    elif est.estimate is not None:
        z = 0.0 if float(exact) == est.estimate else float("inf")
    r.value("z_score", z, "sampled")
    r.verdicts["flagged_no_hits"] = est.flagged
    r.verdicts["within_4_stderr"] = z is not None and z <= 4
    return r


RUNNERS = {
    "check": run_check,
    "lump": run_lump,
    "mix": run_mix,
    "gfun": run_gfun,
    "badconfig": run_badconfig,
    "gtilde": run_gtilde,
    "tjur": run_tjur,
    "simulate": run_simulate,
}
DEFAULT_FORMAT = {"gfun": "csv"}


def _inputs(lm: LoadedModel, args) -> dict:
    return {
        "model": lm.identifier,
        "arithmetic": lm.provenance,
        "depth": args.depth,
        "ext": args.ext,
        "eps": args.eps,
        "seed": args.seed,
    }


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mflab", description="Analyse factors of Markov measures on SFTs.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="path to a JSON model file")
    src.add_argument("--preset", help="built-in model id, e.g. furstenberg:0.7, wl4, xor:0.4, pos3")
    p.add_argument("--depth", type=int, default=8, help="analysis depth (default 8)")
    p.add_argument("--ext", type=int, default=6, help="continuation length for variation searches (default 6)")
    p.add_argument("--eps", type=float, default=0.1, help="gap threshold (default 0.1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--word", help="observed word, comma separated")
    p.add_argument("--cont", help="tjur continuations, ';' between words, ',' within a word")
    p.add_argument("--cylinder", help="tjur test cylinder (domain symbols, comma separated)")
    p.add_argument("--offset", type=int, default=0, help="position of the test cylinder")
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo sample count")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.depth < 1 or args.ext < 1 or args.eps <= 0 or args.samples < 1:
        parser.error("--depth, --ext and --samples must be positive and --eps > 0")
    source = args.model if args.model is not None else args.preset
    strict = args.subcommand != "check"
    try:
        lm = parse_model(source, is_preset=args.preset is not None, depth=max(args.depth, 2), strict=strict)
        report = RUNNERS[args.subcommand](lm, args)
    except A2Violation as exc:
        print(f"mflab: {exc}", file=sys.stderr)
        return EXIT_A2
    except (ModelError, ZeroProbabilityError, ValueError, KeyError) as exc:
        print(f"mflab: {exc}", file=sys.stderr)
        return EXIT_INPUT
    fmt = args.format or DEFAULT_FORMAT.get(args.subcommand, "json")
    text = report.to_csv() if fmt == "csv" else report.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.subcommand == "check" and not report.verdicts["image_realized"]:
        return EXIT_A2
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
