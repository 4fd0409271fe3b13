"""Command-line front end.

Exit codes: 0 success, 1 verification failure or violated precondition,
2 search or enumeration budget exhausted, 3 malformed input.
Diagnostics go to standard error; documents go to --out (or stdout).
"""

import argparse
import csv
import io
import math
import random
import sys
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

from . import congruence, serialize as ser
from .constructions import (AvoidanceInstance, BuildConfig, avoid_step, avoidance_base,
                            build_profinitely_dense, family_member, family_spec, family_union_cert,
                            quad_extend, quad_start, starting_system)
from .errors import CapExceeded, PingPongError, SearchExhausted
from .exact_core import (ProjHyperplane, ProjPoint, apply_point, disjoint_ball_tube, dist2_point_hyperplane,
                         dist2_points, min_dist2_to_region)
from .schottky import add_generator, evaluate_word, random_reduced_word, throw, verify_quadruple, verify_system
from .unipotent import group_element

EXIT_OK, EXIT_FAIL, EXIT_SEARCH, EXIT_MALFORMED = 0, 1, 2, 3


class Malformed(Exception):
    pass


@dataclass(frozen=True)
class Manifest:
    command: str
    inputs: tuple
    output: Optional[str]
    seed: int
    depth: int
    bfs_cap: int
    word_samples: int
    n: int

    def as_json(self):
        return {"command": self.command, "inputs": list(self.inputs), "seed": str(self.seed),
                "depth": str(self.depth), "bfs_cap": str(self.bfs_cap),
                "word_samples": str(self.word_samples), "n": str(self.n)}


# --------------------------------------------------------------------------
# argument parsing helpers

def parse_rational(s: str) -> Fraction:
    try:
        return Fraction(s.strip())
    except (ValueError, ZeroDivisionError):
        raise Malformed(f"bad rational {s!r}; use a/b")


def parse_vector(s: str) -> tuple:
    try:
        return tuple(int(x) for x in s.replace(" ", "").split(","))
    except ValueError:
        raise Malformed(f"bad integer vector {s!r}; use comma-separated integers")


def parse_matrix(s: str) -> tuple:
    rows = tuple(parse_vector(r) for r in s.split(";"))
    if any(len(r) != len(rows) for r in rows):
        raise Malformed(f"matrix {s!r} is not square; rows are separated by ';'")
    try:
        return group_element(rows)
    except ValueError as exc:
        raise Malformed(str(exc))


def parse_point(s: str, n: int) -> ProjPoint:
    v = parse_vector(s)
    if len(v) != n:
        raise Malformed(f"point {s!r} has {len(v)} coordinates, expected {n}")
    return ProjPoint(v)


def parse_hyperplane(s: str, n: int) -> ProjHyperplane:
    v = parse_vector(s)
    if len(v) != n:
        raise Malformed(f"covector {s!r} has {len(v)} entries, expected {n}")
    return ProjHyperplane(v)


def parse_moduli(s: str) -> tuple:
    out = parse_vector(s)
    if any(d < 2 for d in out):
        raise Malformed("moduli must be >= 2")
    return out


def _read(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise Malformed(f"cannot read {path}: {exc}")
    try:
        return ser.loads(text)
    except ser.MalformedInput as exc:
        raise Malformed(f"{path}: {exc}")


def _write(args, doc) -> None:
    text = ser.dumps(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args) -> BuildConfig:
    moduli = tuple(args.moduli) if args.moduli else (3, args.q * args.q)
    return BuildConfig(q=args.q, moduli=moduli, depth=args.depth, seed=args.seed, cap=args.bfs_cap)


def _manifest(args, inputs=()) -> Manifest:
    return Manifest(args.command, tuple(inputs), args.out, args.seed, args.depth, args.bfs_cap,
                    args.word_samples, args.n)


def _load_system(path: str):
    doc = _read(path)
    try:
        if doc["kind"] == "schottky_quadruple":
            return ser.dec_quadruple(doc["quadruple"]).base
        if "system" in doc:
            return ser.dec_system(doc["system"])
        if doc["kind"] == "schottky_system":
            return ser.dec_system(doc)
    except ser.MalformedInput as exc:
        raise Malformed(f"{path}: {exc}")
    raise Malformed(f"{path}: no system in a document of kind {doc['kind']!r}")


def _check_n(args, n: int):
    if n < 3:
        raise Malformed(f"n must be >= 3, got {n}")
    if args.n and args.n != n:
        raise Malformed(f"--n {args.n} does not match the data (n = {n})")
    args.n = n


# --------------------------------------------------------------------------
# verification of any emitted document

def _report(result) -> dict:
    if result.ok:
        return {k: (str(v) if isinstance(v, int) and not isinstance(v, bool) else v)
                for k, v in asdict(result).items()}
    return {"ok": False, "violations": [
        {"condition": v.condition, "generator": str(v.generator),
         "other": None if v.other is None else str(v.other), "detail": v.detail}
        for v in result.violations]}


def verify_document(doc, cap) -> List[str]:
    """Re-check every verifiable part of a document; returns problems."""
    problems = []
    kind = doc["kind"]
    if "system" in doc:
        res = verify_system(ser.dec_system(doc["system"]))
        if not res.ok:
            problems += [f"condition {v.condition}: {v.detail}" for v in res.violations]
    if kind == "schottky_system":
        res = verify_system(ser.dec_system(doc))
        if not res.ok:
            problems += [f"condition {v.condition}: {v.detail}" for v in res.violations]
    if "quadruple" in doc:
        quad = ser.dec_quadruple(doc["quadruple"])
        res = verify_quadruple(quad)
        if not res.ok:
            problems += [f"condition {v.condition}: {v.detail}" for v in res.violations]
        if "g" in doc and "p" in doc:
            from .constructions import check_quad_assumption1
            try:
                check_quad_assumption1(quad, ser.dec_matrix(doc["g"]), ProjPoint(ser.dec_vec(doc["p"])))
            except PingPongError as exc:
                problems.append(str(exc))
    if "certificate" in doc:
        ok, why = ser.dec_full_cert(doc["certificate"]).revalidate(cap)
        problems += why
    if kind == "full_group_cert":
        ok, why = ser.dec_full_cert(doc).revalidate(cap)
        problems += why
    if "start_cert" in doc:
        cert = ser.dec_start_cert(doc["start_cert"])
        base = (ser.dec_system(doc["system"]) if "system" in doc
                else ser.dec_quadruple(doc["quadruple"]).base)
        if not cert.check(base):
            problems.append("w2 does not match its words in <S> and k<S>k^-1")
        ok, why = cert.full.revalidate(cap)
        problems += why
    if "batches" in doc:
        system = ser.dec_system(doc["system"])
        for rec in ser.dec_batches(doc["batches"]):
            if not rec.check(system.generators[rec.index].u):
                problems.append(f"generator {rec.index} is not g e^s g^-1 with g in K_{rec.modulus}")
    if kind == "family_spec":
        from .constructions import check_family_anchors
        spec = ser.dec_family_spec(doc["spec"])
        try:
            check_family_anchors(spec.base, spec.anchors)
        except PingPongError as exc:
            problems.append(str(exc))
    if kind == "pingpong_certificate" and not doc["result"]["ok"]:
        problems.append("certificate records a failed verification")
    return problems


def _document_n(doc) -> int:
    for key in ("system", "quadruple", "spec", "certificate"):
        if key in doc:
            sub = doc[key]
            sub = sub.get("base", sub) if key in ("quadruple", "spec") else sub
            if "n" in sub:
                return int(sub["n"])
            if "group_generators" in sub:
                return len(sub["group_generators"][0])
    return 0


def cmd_verify(args) -> int:
    doc = _read(args.system)
    if doc["kind"] == "schottky_system":
        system = ser.dec_system(doc)
        _check_n(args, system.n)
        result = verify_system(system)
        _write(args, ser.document("pingpong_certificate", system=ser.enc_system(system),
                                  result=_report(result), manifest=_manifest(args, [args.system]).as_json()))
        if not result.ok:
            for v in result.violations:
                print(f"violation of condition {v.condition}: {v.detail}", file=sys.stderr)
            return EXIT_FAIL
        return EXIT_OK
    problems = verify_document(doc, args.bfs_cap)
    args.n = args.n or _document_n(doc)
    for p in problems:
        print(f"verification failure: {p}", file=sys.stderr)
    _write(args, ser.document("verification_report", input_kind=doc["kind"], ok=not problems,
                              problems=problems, manifest=_manifest(args, [args.system]).as_json()))
    return EXIT_FAIL if problems else EXIT_OK


# --------------------------------------------------------------------------
# commands

def cmd_build_dense(args) -> int:
    n = args.n or len(parse_vector(args.p))
    p, L = parse_point(args.p, n), parse_hyperplane(args.L, n)
    _check_n(args, n)
    build = build_profinitely_dense(p, L, parse_rational(args.eps) ** 2, parse_rational(args.delta) ** 2,
                                    _config(args), exact_anchor=args.exact_anchor)
    _write(args, ser.document("dense_build", system=ser.enc_system(build.system),
                              batches=ser.enc_batches(build.batches),
                              manifest=_manifest(args).as_json()))
    return EXIT_OK


def cmd_add(args) -> int:
    system = _load_system(args.system)
    n = system.n
    _check_n(args, n)
    out = add_generator(system, parse_point(args.p, n), parse_hyperplane(args.L, n),
                        parse_rational(args.eps) ** 2, parse_rational(args.delta) ** 2)
    _write(args, ser.document("extension_result", system=ser.enc_system(out),
                              manifest=_manifest(args, [args.system]).as_json()))
    return EXIT_OK


def cmd_throw(args) -> int:
    system = _load_system(args.system)
    n = system.n
    _check_n(args, n)
    out, cert = throw(system, parse_matrix(args.g), parse_point(args.p1, n), parse_point(args.p2, n),
                      parse_hyperplane(args.L1, n), parse_hyperplane(args.L2, n),
                      parse_rational(args.eps) ** 2, parse_rational(args.delta) ** 2, args.bfs_cap)
    _write(args, ser.document("extension_result", system=ser.enc_system(out),
                              certificate=ser.enc_full_cert(cert),
                              manifest=_manifest(args, [args.system]).as_json()))
    return EXIT_OK


def cmd_start(args) -> int:
    k = parse_matrix(args.k)
    n = len(k)
    _check_n(args, n)
    anchors = [(parse_point(args.p1, n), parse_hyperplane(args.L1, n)),
               (parse_point(args.p2, n), parse_hyperplane(args.L2, n)),
               (parse_point(args.p3, n), parse_hyperplane(args.L3, n))]
    system, cert = starting_system(k, anchors, parse_rational(args.eps) ** 2,
                                   parse_rational(args.delta) ** 2, _config(args))
    _write(args, ser.document("start_result", system=ser.enc_system(system),
                              start_cert=ser.enc_start_cert(cert), manifest=_manifest(args).as_json()))
    return EXIT_OK


def _family(args):
    if args.spec:
        doc = _read(args.spec)
        if doc["kind"] != "family_spec":
            raise Malformed(f"{args.spec}: expected a family_spec document")
        return ser.dec_family_spec(doc["spec"])
    if args.size is None:
        raise Malformed("give --spec or --size")
    return family_spec(args.size, _config(args))


def cmd_family(args) -> int:
    spec = _family(args)
    if args.spec_out:
        with open(args.spec_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(ser.dumps(ser.document("family_spec", spec=ser.enc_family_spec(spec))))
    system = family_member(spec, args.bits)
    _write(args, ser.document("family_member", bits=args.bits, system=ser.enc_system(system),
                              manifest=_manifest(args, [args.spec] if args.spec else []).as_json()))
    return EXIT_OK


def cmd_family_cert(args) -> int:
    spec = _family(args)
    cert = family_union_cert(spec, args.f, args.g)
    _write(args, ser.document("family_union", f=args.f, g=args.g, certificate=ser.enc_full_cert(cert),
                              manifest=_manifest(args, [args.spec] if args.spec else []).as_json()))
    return EXIT_OK


def cmd_avoid_step(args) -> int:
    n = args.n or len(parse_vector(args.p0))
    inst = AvoidanceInstance(parse_hyperplane(args.L0, n), parse_hyperplane(args.L1, n),
                             parse_hyperplane(args.L2, n), parse_point(args.p0, n), parse_rational(args.rho2))
    config = _config(args)
    system = _load_system(args.system) if args.system else avoidance_base(inst, config)
    _check_n(args, system.n)
    out, cert = avoid_step(system, inst, parse_matrix(args.g), parse_hyperplane(args.L, n), config)
    _write(args, ser.document("extension_result", system=ser.enc_system(out),
                              certificate=ser.enc_full_cert(cert),
                              manifest=_manifest(args, [args.system] if args.system else []).as_json()))
    return EXIT_OK


def cmd_quad_start(args) -> int:
    g, k = parse_matrix(args.g), parse_matrix(args.k)
    n = len(g)
    _check_n(args, n)
    p = parse_point(args.p, n)
    quad, cert = quad_start(g, p, k, _config(args))
    _write(args, ser.document("quad_result", quadruple=ser.enc_quadruple(quad),
                              start_cert=ser.enc_start_cert(cert), g=ser.enc_matrix(g),
                              p=ser.enc_vec(p.coords), manifest=_manifest(args).as_json()))
    return EXIT_OK


def cmd_quad_extend(args) -> int:
    doc = _read(args.quad)
    if "quadruple" not in doc:
        raise Malformed(f"{args.quad}: expected a document with a quadruple")
    quad = ser.dec_quadruple(doc["quadruple"])
    n = quad.base.n
    _check_n(args, n)
    g = parse_matrix(args.g) if args.g else ser.dec_matrix(doc["g"])
    p = parse_point(args.p, n) if args.p else ProjPoint(ser.dec_vec(doc["p"]))
    out, cert, branch = quad_extend(quad, g, p, parse_matrix(args.h), _config(args))
    _write(args, ser.document("quad_result", quadruple=ser.enc_quadruple(out),
                              certificate=ser.enc_full_cert(cert), branch=branch,
                              g=ser.enc_matrix(g), p=ser.enc_vec(p.coords),
                              manifest=_manifest(args, [args.quad]).as_json()))
    return EXIT_OK


def cmd_congruence(args) -> int:
    moduli = tuple(args.moduli) if args.moduli else (3, 4)
    if args.system:
        system = _load_system(args.system)
        gens = system.matrices
        n = system.n
    else:
        n = args.n or 3
        gens = [m.entries for m in congruence.elementary_generators(n, 2)]
    _check_n(args, n)
    rows = []
    for d in moduli:
        order = congruence.closure_order([congruence.reduce_mod(g, d) for g in gens], args.bfs_cap)
        full = congruence.sl_order(n, d, args.bfs_cap)
        rows.append({"modulus": str(d), "closure_order": str(order), "sl_order": str(full),
                     "formula_order": str(congruence.sl_order_formula(n, d)),
                     "surjective": order == full})
    _write(args, ser.document("congruence_report", n=str(n), results=rows,
                              manifest=_manifest(args, [args.system] if args.system else []).as_json()))
    return EXIT_OK if all(r["surjective"] for r in rows) else EXIT_FAIL


def _float_point(x) -> List[float]:
    big = max(abs(c) for c in x)
    v = [float(Fraction(c, big)) for c in x]
    norm = math.sqrt(sum(t * t for t in v))
    return [t / norm for t in v]


def orbit_rows(system, start: ProjPoint, words) -> List[list]:
    rows = []
    for wid, word in enumerate(words):
        g = evaluate_word(system, word)
        y = apply_point(g, start)
        dists = [max(0.0, math.sqrt(dist2_points(b.center, y)) - math.sqrt(b.radius2))
                 for b in system.attracting.balls]
        dists += [max(0.0, math.sqrt(dist2_point_hyperplane(y, t.hyperplane)) - math.sqrt(t.radius2))
                  for t in system.attracting.tubes]
        # the ping-pong guarantee applies once the first letter moves x off its repelling tube
        first = system.generators[word[-1][0]] if word else None
        guaranteed = first is not None and disjoint_ball_tube(start, 0, first.u.hyperplane, first.del2)
        word_text = " ".join(f"{i}^{e}" for i, e in word)
        rows.append([wid, word_text] + [f"{t:.17g}" for t in _float_point(y.coords)]
                    + [f"{min(dists) if dists else 0.0:.17g}",
                       f"{math.sqrt(min_dist2_to_region(system.attracting, y)):.17g}", int(guaranteed)])
    return rows


def cmd_orbit_trace(args) -> int:
    system = _load_system(args.system)
    n = system.n
    _check_n(args, n)
    start = parse_point(args.start, n)
    if args.mode == "powers":
        if not 0 <= args.gen < len(system.generators):
            raise Malformed(f"--gen {args.gen} out of range")
        words = [((args.gen, k),) for k in range(1, args.samples + 1)]
    else:
        rng = random.Random(args.seed)
        words = [random_reduced_word(len(system.generators), args.length, rng) for _ in range(args.samples)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["word_id", "word"] + [f"x{i}" for i in range(n)] + ["dist_to_attracting", "dist_to_center", "guaranteed"])
    writer.writerows(orbit_rows(system, start, words))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=0, help="dimension (checked against the data)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--depth", type=int, default=BuildConfig().depth, help="search budget")
    common.add_argument("--bfs-cap", type=int, default=congruence.DEFAULT_CAP)
    common.add_argument("--word-samples", type=int, default=1000)
    common.add_argument("--moduli", type=parse_moduli, default=None, help="e.g. 3,4")
    common.add_argument("--q", type=int, default=2)
    common.add_argument("--out", default=None)

    parser = argparse.ArgumentParser(prog="pingpong", description="Schottky systems in SL(n, Z)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kw):
        sp = sub.add_parser(name, parents=[common], **kw)
        sp.set_defaults(func=func)
        return sp

    sp = add("verify", cmd_verify, help="verify a system or re-check any emitted document")
    sp.add_argument("--system", required=True)

    sp = add("build-dense", cmd_build_dense, help="profinitely dense system inside [p]_eps, [L]_del")
    sp.add_argument("--p", required=True)
    sp.add_argument("--L", required=True)
    sp.add_argument("--eps", required=True)
    sp.add_argument("--delta", required=True)
    sp.add_argument("--exact-anchor", action="store_true")

    sp = add("add", cmd_add, help="add a generator with data (p, L)")
    sp.add_argument("--system", required=True)
    for name in ("--p", "--L", "--eps", "--delta"):
        sp.add_argument(name, required=True)

    sp = add("throw", cmd_throw, help="add two generators so that <S+, g> = SL(n, Z)")
    for name in ("--system", "--g", "--p1", "--p2", "--L1", "--L2", "--eps", "--delta"):
        sp.add_argument(name, required=True)

    sp = add("start", cmd_start, help="starting system for an element k")
    for name in ("--k", "--p1", "--L1", "--p2", "--L2", "--p3", "--L3", "--eps", "--delta"):
        sp.add_argument(name, required=True)

    for name, func in (("family", cmd_family), ("family-cert", cmd_family_cert)):
        sp = add(name, func)
        sp.add_argument("--spec", default=None, help="family_spec document")
        sp.add_argument("--size", type=int, default=None)
        if name == "family":
            sp.add_argument("--bits", required=True)
            sp.add_argument("--spec-out", default=None)
        else:
            sp.add_argument("--f", required=True)
            sp.add_argument("--g", required=True)

    sp = add("avoid-step", cmd_avoid_step, help="one avoidance extension step")
    sp.add_argument("--system", default=None, help="input system (default: build the base)")
    for name in ("--L0", "--L1", "--L2", "--p0", "--rho2", "--g", "--L"):
        sp.add_argument(name, required=True)

    sp = add("quad-start", cmd_quad_start, help="starting quadruple")
    for name in ("--g", "--p", "--k"):
        sp.add_argument(name, required=True)

    sp = add("quad-extend", cmd_quad_extend, help="one quadruple extension step")
    sp.add_argument("--quad", required=True)
    sp.add_argument("--h", required=True)
    sp.add_argument("--g", default=None)
    sp.add_argument("--p", default=None)

    sp = add("congruence", cmd_congruence, help="closure orders modulo d")
    sp.add_argument("--system", default=None)

    sp = add("orbit-trace", cmd_orbit_trace, help="CSV of orbit points for plotting")
    sp.add_argument("--system", required=True)
    sp.add_argument("--start", required=True)
    sp.add_argument("--length", type=int, default=8)
    sp.add_argument("--samples", type=int, default=10)
    sp.add_argument("--mode", choices=("random", "powers"), default="random")
    sp.add_argument("--gen", type=int, default=0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_MALFORMED if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (Malformed, ser.MalformedInput) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (SearchExhausted, CapExceeded) as exc:
        print(f"search exhausted: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    except PingPongError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
