"""Command-line front end: ``jn gen | transform | verify | analyze | witness | pipeline``.

Exit codes: 0 when every asserted invariant held, 1 on an invariant or
verification failure, 2 on usage, parse or precondition errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from . import analysis, density, generators, transforms, verify
from .errors import HorizonError, InvariantViolation, JNError, ParseError, PreconditionError
from .spaces import CorpusConfig, as_fraction, corpus, frac_str

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    N: int | None = None
    tau: str | None = None
    eps: str | None = None
    delta: str | None = None
    Q: int | None = None
    seed: int = 0
    space: str | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


class UsageError(Exception):
    pass


def _frac(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, path: str | None):
    if path:
        generators.atomic_write(path, text)
    else:
        sys.stdout.write(text)


def _corpus_for(seq, args):
    cfg = CorpusConfig(lipschitz=args.lipschitz, count=args.corpus_size, seed=args.seed)
    return corpus(seq.space, cfg)


def _jobs(args) -> int:
    return args.jobs if args.jobs else verify.default_jobs()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    name = args.variant
    seq = generators.generator(name, args.alpha)
    cfg = RunConfig("gen", output=args.out, N=args.n, space=seq.space.id, seed=args.seed,
                    extra={"variant": name, "alpha": frac_str(args.alpha)})
    text = generators.dump_lines(seq.prefix(args.n), {**cfg.to_json(), "meta": _json_safe(seq.meta)})
    _emit(text, args.out)
    return EXIT_OK


def _json_safe(meta: dict) -> dict:
    return json.loads(json.dumps(meta, default=str))


def cmd_transform(args) -> int:
    seq = generators.load_sequence(args.input)
    tol = args.tol
    op = args.op
    cfg = RunConfig("transform", input=args.input, output=args.out, N=args.horizon,
                    tau=frac_str(tol), Q=args.Q, space=seq.space.id, seed=args.seed,
                    extra={"op": op, "K": args.K, "levels": args.levels, "M_bound": args.M_bound})
    sidecar = None
    if op == "split":
        res = transforms.kpr_split(seq, args.K, tol, args.horizon)
        out = [res.peel(seq, k) for k in range(len(res.indices))]
        sidecar = {"indices": res.indices, "limit": res.limit.to_json(),
                   "residual_norms": [frac_str(r) for r in res.residual_norms]}
    elif op == "disjointify":
        res = transforms.disjointify(seq, args.eps_floor, args.K, tol, args.horizon)
        out = res.prefix(len(res))
        sidecar = _json_safe(res.meta)
    elif op == "discretize":
        res = transforms.discretize(seq, args.levels, args.horizon, args.Q)
        out = res.rho
        sidecar = res.to_json()
    elif op == "constcoef":
        M = args.M_bound or len(seq[0])
        res = transforms.constant_coefficients(seq, M, tol, args.horizon, args.Q)
        out = res.sequence.prefix(len(res.indices))
        sidecar = {"alpha": [frac_str(a) for a in res.alpha], "indices": res.indices,
                   "distances": [frac_str(d) for d in res.distances]}
    elif op == "pairs":
        if not args.M_bound:
            raise UsageError("--M-bound is required for --op pairs")
        res = transforms.reduce_to_pairs(seq, args.M_bound, args.horizon, tol, args.Q)
        out = res.prefix(len(res))
        sidecar = _json_safe(res.meta)
    else:  # argparse restricts choices
        raise UsageError(op)
    generators.save_sequence(out, args.out, header={**cfg.to_json(), "meta": {"provenance": seq.meta["provenance"] + [op]}})
    if sidecar is not None:
        generators.atomic_write(args.out + ".json", _dump_json({"config": cfg.to_json(), "result": sidecar}))
    print(f"{op}: wrote {len(out)} measures to {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    seq = generators.load_sequence(args.input)
    fs = _corpus_for(seq, args)
    cert = verify.jn_certificate(seq, fs, args.N, args.eps, jobs=_jobs(args))
    disj = verify.disjointness_check(seq, args.N)
    cfg = RunConfig("verify", input=args.input, output=args.report, N=args.N, eps=frac_str(args.eps),
                    space=seq.space.id, seed=args.seed)
    bundle = {"config": cfg.to_json(), "certificate": cert.to_json(),
              "disjoint": disj.disjoint,
              "collision": None if disj.collision is None else
              [seq.space.point_to_json(disj.collision[0]), disj.collision[1], disj.collision[2]]}
    if args.report:
        generators.atomic_write(args.report, _dump_json(bundle))
    if args.csv:
        generators.atomic_write(args.csv, cert.decay.to_csv())
    print(f"verdict: {cert.verdict}")
    print(f"disjoint: {disj.disjoint}")
    return EXIT_OK if cert.ok else EXIT_FAIL


def cmd_analyze(args) -> int:
    seq = generators.load_sequence(args.input) if args.input else generators.generator(args.gen, args.alpha)
    N = seq.available(args.N)
    rows = analysis.half_split_profile(seq, N)
    est = analysis.classify_points(seq, N, min(args.W, N), args.tau)
    bound = analysis.limit_mass_bound(seq, N, min(args.W, N), args.tau)
    if args.csv:
        generators.atomic_write(args.csv, analysis.profile_csv(rows))
    cfg = RunConfig("analyze", input=args.input, output=args.out, N=N, tau=frac_str(args.tau),
                    space=seq.space.id, extra={"W": args.W, "gen": args.gen})
    report = {
        "config": cfg.to_json(),
        "classification": est.to_json(seq.space),
        "limit_mass_bound": {"value": frac_str(bound.value), "threshold": frac_str(bound.threshold),
                             "violated": bound.violated},
    }
    _emit(_dump_json(report), args.out)
    if not args.out:
        return EXIT_FAIL if bound.violated else EXIT_OK
    print(f"limit mass {float(bound.value):.6g} (threshold {float(bound.threshold):.6g})"
          f"{' VIOLATION' if bound.violated else ''}")
    return EXIT_FAIL if bound.violated else EXIT_OK


def read_pairs(path) -> list:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                if s.startswith("["):
                    x, y = json.loads(s)
                else:
                    x, y = s.replace(",", " ").split()
                pairs.append((int(x), int(y)))
            except (ValueError, TypeError):
                raise ParseError(f"{path}: expected two naturals, got {s!r}", lineno) from None
    return pairs


PAIR_FAMILIES = {
    "squares": lambda n: (n * n, n * n + 1),
    "evens": lambda n: (2 * n, 2 * n + 1),
}


def cmd_witness(args) -> int:
    if args.pairs:
        pairs = read_pairs(args.pairs)
    elif args.gen:
        if args.gen not in PAIR_FAMILIES:
            raise UsageError(f"unknown pair family {args.gen!r}; known: {sorted(PAIR_FAMILIES)}")
        pairs = [PAIR_FAMILIES[args.gen](n) for n in range(args.start, args.start + args.count)]
    else:
        raise UsageError("give --pairs FILE or --gen FAMILY")
    rep = density.obstruction_witness(pairs, args.N, args.delta)
    cfg = RunConfig("witness", input=args.pairs, output=args.out, N=args.N, delta=frac_str(args.delta),
                    extra={"gen": args.gen, "count": len(pairs)})
    _emit(_dump_json({"config": cfg.to_json(), "report": rep.to_json()}), args.out)
    if args.out:
        print(f"witness: {rep.witness} ({rep.verdict})")
    return EXIT_OK if rep.found else EXIT_FAIL


def cmd_pipeline(args) -> int:
    seq = generators.generator(args.gen, args.alpha)
    fs = _corpus_for(seq, args)
    disj = transforms.disjointify(seq, None, args.N, args.tau)
    d_ok = verify.disjointness_check(disj, args.N)
    decay = verify.weak_star_report(disj, fs, args.N, args.eps, jobs=_jobs(args))
    disc = transforms.discretize(disj, args.levels, min(args.N, len(disj)), args.Q)
    cert = verify.discreteness_certificate(disc, source=disj)
    rho = disc.sequence()
    rho_ok = verify.disjointness_check(rho, len(rho))
    norms_ok = all(mu.norm() == 1 for mu in rho) and all(mu.norm() == 1 for mu in disj.prefix(args.N))
    cfg = RunConfig("pipeline", output=args.out, N=args.N, tau=frac_str(args.tau), eps=frac_str(args.eps),
                    Q=args.Q, space=seq.space.id, seed=args.seed,
                    extra={"gen": args.gen, "levels": args.levels, "alpha": frac_str(args.alpha)})
    report = {
        "config": cfg.to_json(),
        "disjoint": bool(d_ok) and bool(rho_ok),
        "norms": norms_ok,
        "discreteness": cert.to_json(seq.space),
        "decay": decay.to_json(),
        "discretize": disc.to_json(),
    }
    if args.out:
        generators.atomic_write(args.out, _dump_json(report))
        generators.save_sequence(rho, args.out + ".rho.jsonl", header=cfg.to_json())
    ok = report["disjoint"] and norms_ok and cert.ok and not decay.refuted
    print(f"disjoint: {'ok' if report['disjoint'] else 'FAILED'}")
    print(f"unit norms: {'ok' if norms_ok else 'FAILED'}")
    print(f"discreteness certificate: {'ok' if cert.ok else 'FAILED'} ({cert.checked} witness evaluations)")
    print(f"decay: {decay.verdict}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jn", description="Finitely supported measure sequences: "
                                "generators, transforms and verification.")
    sub = p.add_subparsers(dest="command", required=True)

    def corpus_flags(sp):
        sp.add_argument("--lipschitz", type=_frac, default=Fraction(8), help="corpus Lipschitz budget")
        sp.add_argument("--corpus-size", type=int, default=50)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=0, help="worker processes (0 = all cores)")

    g = sub.add_parser("gen", help="write a prefix of a generator as JSON lines")
    g.add_argument("--variant", required=True, choices=sorted(generators.GENERATORS))
    g.add_argument("--alpha", type=_frac, default=Fraction(0))
    g.add_argument("--n", type=int, default=100, help="number of measures")
    g.add_argument("--out")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("transform", help="apply a sequence transform to a JSON-lines file")
    t.add_argument("--op", required=True, choices=["split", "disjointify", "discretize", "constcoef", "pairs"])
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--horizon", type=int, default=400)
    t.add_argument("--tol", type=_frac, default=analysis.DEFAULT_TAU)
    t.add_argument("--K", type=int, default=20, help="rounds / output count")
    t.add_argument("--levels", type=int, default=20, help="discretize: number of levels I")
    t.add_argument("--Q", type=int, default=8, help="finite stand-in for 'infinitely many'")
    t.add_argument("--M-bound", dest="M_bound", type=int, default=None)
    t.add_argument("--eps-floor", dest="eps_floor", type=_frac, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_transform)

    v = sub.add_parser("verify", help="JN certificate and disjointness check of a file")
    v.add_argument("--in", dest="input", required=True)
    v.add_argument("--N", type=int, default=200)
    v.add_argument("--eps", type=_frac, default=verify.DEFAULT_EPS)
    v.add_argument("--report", help="write the JSON verdict bundle here")
    v.add_argument("--csv", help="write the CSV decay report here")
    corpus_flags(v)
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("analyze", help="half/half profile and point classification")
    src = a.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input")
    src.add_argument("--gen", choices=sorted(generators.GENERATORS))
    a.add_argument("--alpha", type=_frac, default=Fraction(0))
    a.add_argument("--N", type=int, default=analysis.DEFAULT_N)
    a.add_argument("--W", type=int, default=analysis.DEFAULT_W)
    a.add_argument("--tau", type=_frac, default=analysis.DEFAULT_TAU)
    a.add_argument("--csv")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("witness", help="clopen obstruction witness for pairs in the naturals")
    w.add_argument("--pairs")
    w.add_argument("--gen", help="built-in pair family: " + ", ".join(sorted(PAIR_FAMILIES)))
    w.add_argument("--count", type=int, default=10**4)
    w.add_argument("--start", type=int, default=1)
    w.add_argument("--N", type=int, default=10**6)
    w.add_argument("--delta", type=_frac, default=Fraction(1, 64))
    w.add_argument("--out")
    w.set_defaults(func=cmd_witness)

    pl = sub.add_parser("pipeline", help="generate, disjointify, discretize and verify")
    pl.add_argument("--gen", required=True, choices=sorted(generators.GENERATORS))
    pl.add_argument("--alpha", type=_frac, default=Fraction(0))
    pl.add_argument("--N", type=int, default=200, help="number of disjointified measures")
    pl.add_argument("--levels", type=int, default=20)
    pl.add_argument("--Q", type=int, default=8)
    pl.add_argument("--tau", type=_frac, default=analysis.DEFAULT_TAU)
    pl.add_argument("--eps", type=_frac, default=verify.DEFAULT_EPS)
    pl.add_argument("--out")
    corpus_flags(pl)
    pl.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, PreconditionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantViolation, HorizonError) as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except JNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
