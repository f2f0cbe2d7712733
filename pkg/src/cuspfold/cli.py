"""Command-line front end; every command prints one JSON document."""

from __future__ import annotations

import argparse
import json
import re
import sys
from fractions import Fraction

from . import grouppres, hypgeom, lattice, montesinos, pipeline, qforms
from .toys import level_map

NEG_VALUE = re.compile(r"^-\d[\d,\s/-]*$")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(" ", "").split(",") if t)


def _load_json(arg: str):
    """A path to a JSON file, or the JSON text itself."""
    s = arg.strip()
    if s.startswith(("[", "{")):
        return json.loads(s)
    with open(arg) as fh:
        return json.load(fh)


def _config(path: str):
    return pipeline.load_config(_load_json(path))


# ------------------------------------------------------------------ forms

def cmd_form(args):
    if args.action == "invariants":
        q = qforms.DiagonalForm.parse(args.coeffs)
        d = qforms.discriminant(q)
        return {
            "form": [str(c) for c in q.coeffs],
            "rank": q.rank,
            "signature": list(qforms.signature(q)),
            "discriminant": str(d),
            "discriminantNegated": str(-d),
            "hasse": {str(v): qforms.hasse_invariant(q, v) for v in qforms.support_places(q)},
        }
    if args.action == "equiv":
        q1 = qforms.DiagonalForm.parse(args.lhs)
        q2 = qforms.DiagonalForm.parse(args.rhs)
        return qforms.rationally_equivalent(q1, q2).to_json()
    q = qforms.DiagonalForm.parse(args.coeffs)
    return qforms.is_isotropic_global(q, bound=args.bound).to_json()


def cmd_montesinos(args):
    params = montesinos.MontesinosParams(args.S, args.a, args.reading)
    rep = montesinos.montesinos_report(params).to_json()
    rep["valid"] = params.is_valid()
    return rep


def cmd_prime_replace(args):
    params = montesinos.MontesinosParams(args.S, args.a, args.reading)
    params.validate()
    a2 = montesinos.replacement_prime(args.S, args.a, reading=args.reading)
    q1 = montesinos.montesinos_form(params)
    q2 = montesinos.montesinos_form(params.with_a(a2))
    return {
        "S": str(args.S),
        "a": str(args.a),
        "replacement": str(a2),
        "equivalence": qforms.rationally_equivalent(q1, q2).to_json(),
    }


def cmd_subchain(args):
    return qforms.subform_chain(qforms.DiagonalForm.parse(args.coeffs)).to_json()


# --------------------------------------------------------------- matrices

def cmd_matrix(args):
    if args.action == "check":
        q = qforms.DiagonalForm.parse(args.form)
        g = lattice.ExactMatrix.from_json(_load_json(args.file))
        return {
            "preservesForm": lattice.preserves_form(g, q),
            "det": str(g.det()),
            "integral": g.is_integral(),
            "unipotent": lattice.is_unipotent(g),
            "soPlus": lattice.is_so_plus(g, q),
        }
    if args.action == "eichler":
        q = qforms.DiagonalForm.parse(args.form)
        return {"matrix": lattice.eichler_transvection(q, _ints(args.u), _ints(args.v)).to_json()}
    g = lattice.ExactMatrix.from_json(_load_json(args.file))
    return {"matrix": lattice.corner_embed(g).to_json()}


# ------------------------------------------------------------------ words

def cmd_word(args):
    cfg, opts = _config(args.config)
    if args.action == "sweep":
        return pipeline.faithfulness_sweep(
            cfg,
            args.L if args.L is not None else opts["L"],
            args.E if args.E is not None else opts["E"],
            args.B if args.B is not None else opts["B"],
            args.D if args.D is not None else opts["D"],
            args.precision or opts["precisionBits"],
            engine=args.engine,
            timing=args.timing,
        )
    w = grouppres.Word.from_json(_load_json(args.word))
    if args.action == "reduce":
        r = grouppres.britton_reduce(w, cfg)
        return {"input": w.to_json(), "reduced": r.to_json(), "ell": r.ell, "text": str(r)}
    v = grouppres.is_identity(w, cfg)
    return {"identity": v.identity, "reason": v.reason, "reduced": v.reduced.to_json()}


# --------------------------------------------------------------- geometry

def cmd_certify(args):
    cfg, opts = _config(args.config)
    D = args.D if args.D is not None else opts["D"]
    prec = args.precision or opts["precisionBits"]
    w = grouppres.Word.from_json(_load_json(args.word))
    bg = hypgeom.build_broken_geodesic(w, cfg, level_map(cfg, D, prec), D=D, prec=prec)
    out = hypgeom.check_certificate(bg, D).to_json()
    out["ell"] = bg.ell
    return out


def cmd_horoballs(args):
    cfg, opts = _config(args.config)
    D = args.D if args.D is not None else opts["D"]
    prec = args.precision or opts["precisionBits"]
    choice = hypgeom.horoball_levels([c.point for c in cfg.cusps], cfg.form, D, prec)
    out = choice.to_json()
    if cfg.levels:
        out["configured"] = {str(k): f"{Fraction(v).numerator}/{Fraction(v).denominator}" for k, v in cfg.levels.items()}
    return out


# --------------------------------------------------------------- pipeline

def cmd_pipeline(args):
    common = dict(D=args.D, L=args.L, E=args.E, B=args.B, prec=args.precision, engine=args.engine,
                  timing=args.timing, cusps=args.cusps)
    if args.action == "toy":
        return pipeline.run_pipeline(toy=args.name, **common)
    if args.form:
        return pipeline.run_pipeline(form=qforms.DiagonalForm.parse(args.form), **common)
    if args.S is None or args.a is None:
        raise SystemExit("pipeline run needs --S and --a, or --form")
    return pipeline.run_pipeline(S=args.S, a=args.a, reading=args.reading, **common)


def cmd_density(args):
    cfg, _ = _config(args.config)
    base = pipeline.hyperplane_invariance_check(cfg.base_generators, cfg.form, cfg.subform_indices)
    out = {"baseGroup": base.to_json()}
    if cfg.stable_letters:
        full = pipeline.hyperplane_invariance_check(
            list(cfg.base_generators) + list(cfg.stable_letters), cfg.form, cfg.subform_indices
        )
        out["withStableLetters"] = full.to_json()
    return out


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cuspfold", description=__doc__)
    ap.add_argument("--out", help="write the JSON here instead of stdout")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("form", help="diagonal forms over Q")
    fs = p.add_subparsers(dest="action", required=True)
    x = fs.add_parser("invariants")
    x.add_argument("--coeffs", required=True)
    x = fs.add_parser("equiv")
    x.add_argument("--lhs", required=True)
    x.add_argument("--rhs", required=True)
    x = fs.add_parser("isotropic")
    x.add_argument("--coeffs", required=True)
    x.add_argument("--bound", type=int, default=1000)
    p.set_defaults(func=cmd_form)

    for name, fn in (("montesinos", cmd_montesinos), ("prime-replace", cmd_prime_replace)):
        p = sub.add_parser(name)
        p.add_argument("--S", type=int, required=True)
        p.add_argument("--a", type=int, required=True)
        p.add_argument("--reading", default=montesinos.DEFAULT_READING, choices=montesinos.READINGS)
        p.set_defaults(func=fn)

    p = sub.add_parser("subchain")
    p.add_argument("--coeffs", required=True)
    p.set_defaults(func=cmd_subchain)

    p = sub.add_parser("matrix", help="exact matrices")
    ms = p.add_subparsers(dest="action", required=True)
    x = ms.add_parser("check")
    x.add_argument("--form", required=True)
    x.add_argument("--file", required=True)
    x = ms.add_parser("eichler")
    x.add_argument("--form", required=True)
    x.add_argument("--u", required=True)
    x.add_argument("--v", required=True)
    x = ms.add_parser("corner")
    x.add_argument("--file", required=True)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("word", help="folded-double words")
    ws = p.add_subparsers(dest="action", required=True)
    for name in ("reduce", "identity"):
        x = ws.add_parser(name)
        x.add_argument("--config", required=True)
        x.add_argument("--word", required=True)
    x = ws.add_parser("sweep")
    x.add_argument("--config", required=True)
    x.add_argument("--L", type=int)
    x.add_argument("--E", type=int)
    x.add_argument("--B", type=int)
    x.add_argument("--D", type=float)
    x.add_argument("--precision", type=int)
    x.add_argument("--engine", default="windowed", choices=("windowed", "literal"))
    x.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_word)

    p = sub.add_parser("certify")
    p.add_argument("--config", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--D", type=float)
    p.add_argument("--precision", type=int)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("horoballs")
    p.add_argument("--config", required=True)
    p.add_argument("--D", type=float)
    p.add_argument("--precision", type=int)
    p.set_defaults(func=cmd_horoballs)

    p = sub.add_parser("pipeline", help="end-to-end runs")
    ps = p.add_subparsers(dest="action", required=True)
    run = ps.add_parser("run")
    run.add_argument("--S", type=int)
    run.add_argument("--a", type=int)
    run.add_argument("--form")
    run.add_argument("--reading", default=montesinos.DEFAULT_READING, choices=montesinos.READINGS)
    toy = ps.add_parser("toy")
    toy.add_argument("--name", default="T1")
    for x in (run, toy):
        x.add_argument("--D", type=float, default=6.0)
        x.add_argument("--L", type=int, default=3)
        x.add_argument("--E", type=int, default=1)
        x.add_argument("--B", type=int, default=1)
        x.add_argument("--precision", type=int, default=hypgeom.DEFAULT_PREC)
        x.add_argument("--cusps", type=int, default=2)
        x.add_argument("--engine", default="windowed", choices=("windowed", "literal"))
        x.add_argument("--timing", action="store_true", help="include wall-clock time (breaks byte equality)")
        x.add_argument("--out", dest="out_sub")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("density")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_density)
    return ap


def _glue_negative_values(argv):
    """Turn ``--coeffs -1,1,1`` into ``--coeffs=-1,1,1`` so argparse keeps the value."""
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and NEG_VALUE.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_negative_values(argv))
    try:
        result = args.func(args)
    except pipeline.StageError as exc:
        print(json.dumps({"error": str(exc.error), "type": type(exc.error).__name__, "stage": exc.stage}),
              file=sys.stderr)
        return 1
    except (ValueError, KeyError, ArithmeticError, RuntimeError, OSError) as exc:
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1
    text = pipeline.dumps_report(result) + "\n"
    out = getattr(args, "out_sub", None) or args.out
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0
