"""JSON encoding of systems and certificates.

Integers and rationals are decimal strings ("12", "-3/7"), matrices are
lists of rows, and every top-level document carries schema_version and
kind.  dumps() is canonical (sorted keys, two-space indent, trailing
newline), so encode(decode(text)) reproduces text byte for byte.
"""

import json
from fractions import Fraction
from typing import Any, Dict

from .congruence import DensityWitness
from .exact_core import Ball, ProjHyperplane, ProjPoint, Region, Tube
from .schottky import FullGroupCert, Generator, SchottkyQuadruple, SchottkySystem, Z2PairCert
from .unipotent import Rank1Unipotent

SCHEMA_VERSION = "1"


class MalformedInput(ValueError):
    pass


def dumps(doc: Dict[str, Any]) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def loads(text: str) -> Dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"not JSON: {exc}") from exc
    if not isinstance(doc, dict) or "kind" not in doc:
        raise MalformedInput("expected an object with a 'kind' field")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise MalformedInput(f"unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def document(kind: str, **fields) -> Dict[str, Any]:
    return dict(fields, kind=kind, schema_version=SCHEMA_VERSION)


# --------------------------------------------------------------------------
# scalars

def enc_int(x: int) -> str:
    return str(int(x))


def dec_int(s) -> int:
    if not isinstance(s, str):
        raise MalformedInput(f"integers are encoded as strings, got {s!r}")
    try:
        return int(s)
    except ValueError as exc:
        raise MalformedInput(f"bad integer {s!r}") from exc


def enc_rat(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def dec_rat(s) -> Fraction:
    if not isinstance(s, str):
        raise MalformedInput(f"rationals are encoded as strings, got {s!r}")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise MalformedInput(f"bad rational {s!r}") from exc


def enc_vec(v):
    return [enc_int(x) for x in v]


def dec_vec(v):
    if not isinstance(v, list) or not v:
        raise MalformedInput(f"expected a nonempty list, got {v!r}")
    return tuple(dec_int(x) for x in v)


def enc_matrix(a):
    return [enc_vec(row) for row in a]


def dec_matrix(a):
    if not isinstance(a, list) or not a:
        raise MalformedInput("expected a matrix")
    rows = tuple(dec_vec(r) for r in a)
    if any(len(r) != len(rows) for r in rows):
        raise MalformedInput("matrix must be square")
    return rows


def enc_word(w):
    return [[enc_int(i), enc_int(e)] for i, e in w]


def dec_word(w):
    if not isinstance(w, list):
        raise MalformedInput("expected a word (list of [index, exponent])")
    out = []
    for letter in w:
        if not isinstance(letter, list) or len(letter) != 2:
            raise MalformedInput(f"bad letter {letter!r}")
        out.append((dec_int(letter[0]), dec_int(letter[1])))
    return tuple(out)


# --------------------------------------------------------------------------
# geometry

def enc_region(r: Region):
    return {"balls": [{"center": enc_vec(b.center.coords), "radius2": enc_rat(b.radius2)} for b in r.balls],
            "tubes": [{"covector": enc_vec(t.hyperplane.covector), "radius2": enc_rat(t.radius2)}
                      for t in r.tubes]}


def dec_region(d) -> Region:
    try:
        balls = tuple(Ball(ProjPoint(dec_vec(b["center"])), dec_rat(b["radius2"])) for b in d["balls"])
        tubes = tuple(Tube(ProjHyperplane(dec_vec(t["covector"])), dec_rat(t["radius2"])) for t in d["tubes"])
    except (KeyError, TypeError) as exc:
        raise MalformedInput(f"bad region: {exc}") from exc
    return Region(balls, tubes)


def enc_density(w: DensityWitness):
    return {"moduli_checked": [enc_int(d) for d in w.moduli_checked],
            "surjective": list(w.surjective),
            "recipe_conformant": w.recipe_conformant,
            "assumptions": list(w.assumptions),
            "basis": w.basis}


def dec_density(d) -> DensityWitness:
    try:
        return DensityWitness(tuple(dec_int(x) for x in d["moduli_checked"]),
                              tuple(bool(x) for x in d["surjective"]),
                              bool(d["recipe_conformant"]), tuple(d["assumptions"]), d["basis"])
    except (KeyError, TypeError) as exc:
        raise MalformedInput(f"bad density witness: {exc}") from exc


# --------------------------------------------------------------------------
# systems

def enc_system(sys: SchottkySystem):
    return {"n": enc_int(sys.n),
            "generators": [{"v": enc_vec(g.u.v), "f": enc_vec(g.u.f), "m": enc_int(g.u.m),
                            "eps2": enc_rat(g.eps2), "del2": enc_rat(g.del2)} for g in sys.generators],
            "attracting": enc_region(sys.attracting),
            "repelling": enc_region(sys.repelling),
            "density": None if sys.density is None else enc_density(sys.density),
            "dense_prefix": enc_int(sys.dense_prefix)}


def dec_system(d) -> SchottkySystem:
    try:
        gens = tuple(Generator(Rank1Unipotent(dec_vec(g["v"]), dec_vec(g["f"]), dec_int(g["m"])),
                               dec_rat(g["eps2"]), dec_rat(g["del2"])) for g in d["generators"])
        density = None if d.get("density") is None else dec_density(d["density"])
        sys = SchottkySystem(gens, dec_region(d["attracting"]), dec_region(d["repelling"]),
                             density, dec_int(d.get("dense_prefix", "0")))
    except (KeyError, TypeError) as exc:
        raise MalformedInput(f"bad system: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, MalformedInput):
            raise
        raise MalformedInput(f"bad system: {exc}") from exc
    if "n" in d and dec_int(d["n"]) != sys.n:
        raise MalformedInput("declared n does not match the generators")
    return sys


def enc_quadruple(q: SchottkyQuadruple):
    return {"base": enc_system(q.base), "open_nbhd": enc_region(q.open_nbhd)}


def dec_quadruple(d) -> SchottkyQuadruple:
    try:
        return SchottkyQuadruple(dec_system(d["base"]), dec_region(d["open_nbhd"]))
    except (KeyError, TypeError) as exc:
        raise MalformedInput(f"bad quadruple: {exc}") from exc


def enc_full_cert(c: FullGroupCert):
    return {"group_generators": [enc_matrix(g) for g in c.group_generators],
            "pair": {"u": enc_matrix(c.pair.u), "w": enc_matrix(c.pair.w)},
            "pair_words": [enc_word(c.pair_words[0]), enc_word(c.pair_words[1])],
            "density": enc_density(c.density),
            "density_indices": [enc_int(i) for i in c.density_indices],
            "notes": list(c.notes),
            "conclusion_basis": c.conclusion_basis}


def dec_full_cert(d) -> FullGroupCert:
    try:
        pair = Z2PairCert(dec_matrix(d["pair"]["u"]), dec_matrix(d["pair"]["w"]))
        words = d["pair_words"]
        return FullGroupCert(tuple(dec_matrix(g) for g in d["group_generators"]), pair,
                             (dec_word(words[0]), dec_word(words[1])), dec_density(d["density"]),
                             tuple(dec_int(i) for i in d["density_indices"]), tuple(d["notes"]),
                             d["conclusion_basis"])
    except (KeyError, TypeError, IndexError) as exc:
        raise MalformedInput(f"bad certificate: {exc}") from exc


def enc_start_cert(c):
    return {"k": enc_matrix(c.k), "w2": enc_matrix(c.w2), "word_in_s": enc_word(c.word_in_s),
            "conj_word": enc_word(c.conj_word), "full": enc_full_cert(c.full)}


def dec_start_cert(d):
    from .constructions import StartCert
    try:
        return StartCert(dec_matrix(d["k"]), dec_matrix(d["w2"]), dec_word(d["word_in_s"]),
                         dec_word(d["conj_word"]), dec_full_cert(d["full"]))
    except (KeyError, TypeError) as exc:
        raise MalformedInput(f"bad start certificate: {exc}") from exc


def enc_batches(batches):
    return [{"index": enc_int(b.index), "elementary": [enc_int(b.elementary[0]), enc_int(b.elementary[1])],
             "conjugator": enc_matrix(b.conjugator), "exponent": enc_int(b.exponent),
             "modulus": enc_int(b.modulus), "period": enc_int(b.period)} for b in batches]


def dec_batches(d):
    from .constructions import BatchRecord
    try:
        return tuple(BatchRecord(dec_int(b["index"]), (dec_int(b["elementary"][0]), dec_int(b["elementary"][1])),
                                 dec_matrix(b["conjugator"]), dec_int(b["exponent"]),
                                 dec_int(b["modulus"]), dec_int(b["period"])) for b in d)
    except (KeyError, TypeError, IndexError) as exc:
        raise MalformedInput(f"bad batch records: {exc}") from exc


def enc_family_spec(spec):
    return {"base": enc_system(spec.base),
            "anchors": [{"p": enc_vec(a.p.coords), "L": enc_vec(a.L.covector),
                         "eps2": enc_rat(a.eps2), "del2": enc_rat(a.del2)} for a in spec.anchors],
            "choices": [[{"v": enc_vec(g.u.v), "f": enc_vec(g.u.f), "m": enc_int(g.u.m),
                          "eps2": enc_rat(g.eps2), "del2": enc_rat(g.del2)} for g in pair]
                        for pair in spec.choices]}


def dec_family_spec(d):
    from .constructions import FamilyAnchor, FamilySpec
    try:
        anchors = tuple(FamilyAnchor(ProjPoint(dec_vec(a["p"])), ProjHyperplane(dec_vec(a["L"])),
                                     dec_rat(a["eps2"]), dec_rat(a["del2"])) for a in d["anchors"])
        choices = tuple(tuple(Generator(Rank1Unipotent(dec_vec(g["v"]), dec_vec(g["f"]), dec_int(g["m"])),
                                        dec_rat(g["eps2"]), dec_rat(g["del2"])) for g in pair)
                        for pair in d["choices"])
        return FamilySpec(dec_system(d["base"]), anchors, choices)
    except (KeyError, TypeError) as exc:
        raise MalformedInput(f"bad family spec: {exc}") from exc
