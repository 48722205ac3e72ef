"""Command-line interface.

Deterministic by contract: everything written to stdout (and --out) is a
pure function of the arguments, including --seed; wall-clock chatter goes
to stderr.  Subcommands: design es | design bloom | design eval, decode,
adaptive, simulate, prevalence estimate, serve.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import adaptive, bloom, bp, fileformats, mitm, model, oracle, simulate
from .evolve import ESConfig, es_optimize
from .types import (
    GroupTestError,
    PoolingConstraints,
    PosteriorSummary,
    TestCharacteristics,
)

__all__ = ["main", "build_parser"]


def _chars_argument(arg: str) -> TestCharacteristics:
    tpr, tnr = (float(x) for x in arg.split(","))
    return TestCharacteristics(tpr=tpr, tnr=tnr)


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    parser.add_argument("--seed", type=int, help="64-bit RNG seed",
                        **({"default": argparse.SUPPRESS} if suppress else {"default": 0}))
    parser.add_argument("--chars", type=str, metavar="TPR,TNR",
                        help="test characteristics, e.g. 0.99,0.9",
                        **({"default": argparse.SUPPRESS} if suppress else {"default": "0.99,0.9"}))
    parser.add_argument("--prior", type=str, metavar="FILE|uniform:P",
                        help="per-patient priors file or uniform:p",
                        **({"default": argparse.SUPPRESS} if suppress else {"default": "uniform:0.001"}))
    parser.add_argument("--out", type=str, metavar="PATH",
                        help="also write the stdout payload to this file",
                        **({"default": argparse.SUPPRESS} if suppress else {"default": None}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poolkit",
        description="Design pooled tests and decode their results.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    _global_flags(shared, suppress=True)

    design = sub.add_parser("design", help="construct or score designs")
    design_sub = design.add_subparsers(dest="design_command", required=True)

    des_es = design_sub.add_parser("es", parents=[shared],
                                   help="evolutionary search for a design")
    des_es.add_argument("--n", type=int, required=True)
    des_es.add_argument("--m", type=int, required=True)
    des_es.add_argument("--budget", type=int, default=20_000)
    des_es.add_argument("--lambda", dest="lam", type=int, default=None)
    des_es.add_argument("--luby-base", type=int, default=None)
    des_es.add_argument("--objective", choices=["neg-conditional-entropy",
                                                "expected-confidence"],
                        default="neg-conditional-entropy")
    des_es.add_argument("--max-pool-size", type=int, default=None)
    des_es.add_argument("--max-splits", type=int, default=None)

    des_bloom = design_sub.add_parser("bloom", parents=[shared],
                                      help="balanced Bloom-array design")
    des_bloom.add_argument("--n", type=int, required=True)
    des_bloom.add_argument("--m", type=int, required=True)
    des_bloom.add_argument("--prevalence", type=float, default=None,
                           help="defaults to the max prior entry")
    des_bloom.add_argument("--g", type=int, default=None)
    des_bloom.add_argument("--b", type=int, default=None)

    des_eval = design_sub.add_parser("eval", parents=[shared],
                                     help="score a design file")
    des_eval.add_argument("--design", required=True)

    decode = sub.add_parser("decode", parents=[shared],
                            help="posterior decode an outcome file")
    decode.add_argument("--design", required=True)
    decode.add_argument("--outcome", required=True)
    decode.add_argument("--method", choices=["exact", "mitm", "bp", "perfect"],
                        required=True)
    decode.add_argument("--epsilon", type=float, default=mitm.DEFAULT_EPSILON)
    decode.add_argument("--max-iters", type=int, default=200)
    decode.add_argument("--damping", type=float, default=0.5)
    decode.add_argument("--tol", type=float, default=1e-8)

    adapt = sub.add_parser("adaptive", parents=[shared],
                           help="interactive greedy-adaptive loop")
    adapt.add_argument("--n", type=int, required=True)
    adapt.add_argument("--m", type=int, required=True)
    adapt.add_argument("--max-pool-size", type=int, default=None)
    adapt.add_argument("--max-splits", type=int, default=None)

    sim = sub.add_parser("simulate", parents=[shared],
                         help="Monte-Carlo evaluation of a design/decoder pair")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--m", type=int, required=True)
    sim.add_argument("--design-kind", choices=["es", "bloom", "file", "leave-one-out"],
                     required=True)
    sim.add_argument("--design-file", default=None)
    sim.add_argument("--g", type=int, default=None)
    sim.add_argument("--b", type=int, default=None)
    sim.add_argument("--budget", type=int, default=20_000)
    sim.add_argument("--decoder", choices=["exact", "mitm", "bp", "perfect"],
                     required=True)
    sim.add_argument("--epsilon", type=float, default=mitm.DEFAULT_EPSILON)
    sim.add_argument("--trials", type=int, required=True)

    prev = sub.add_parser("prevalence", help="prevalence estimation")
    prev_sub = prev.add_subparsers(dest="prevalence_command", required=True)
    prev_est = prev_sub.add_parser("estimate", parents=[shared])
    prev_est.add_argument("--k", type=int, required=True)
    prev_est.add_argument("--pools", type=int, required=True)
    prev_est.add_argument("--positives", type=int, required=True)

    serve = sub.add_parser("serve", parents=[shared], help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8321)
    serve.add_argument("--store-dir", default=None,
                       help="directory for append-only session logs")
    serve.add_argument("--console-dir", default=None,
                       help="serve the built operator console from this directory at /console")

    return parser


def _emit(args, payload: str) -> None:
    sys.stdout.write(payload)
    if not payload.endswith("\n"):
        sys.stdout.write("\n")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload if payload.endswith("\n") else payload + "\n")


def _summary_json(summary: PosteriorSummary) -> str:
    payload = {
        "marginals": [float(x) for x in summary.marginals],
        "ml_secret": str(summary.ml_secret),
        "confidence": summary.confidence,
    }
    if summary.error_bound is not None:
        payload["error_bound"] = summary.error_bound
    if summary.evidence_mass is not None:
        payload["evidence_mass"] = summary.evidence_mass
    if summary.converged is not None:
        payload["converged"] = summary.converged
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _cmd_design_es(args, chars, prior) -> None:
    constraints = PoolingConstraints(max_pool_size=args.max_pool_size,
                                     max_splits_per_sample=args.max_splits)
    config = ESConfig(budget=args.budget, seed=args.seed, lam=args.lam,
                      luby_base=args.luby_base, objective=args.objective,
                      constraints=constraints)
    started = time.perf_counter()
    result = es_optimize(args.n, args.m, chars, prior, config)
    print(f"search: score={result.score!r} evaluations={result.evaluations} "
          f"restarts={result.restarts} elapsed={time.perf_counter() - started:.2f}s",
          file=sys.stderr)
    _emit(args, fileformats.design_to_text(result.design.canonical()))


def _cmd_design_bloom(args, chars, prior) -> None:
    prevalence = args.prevalence
    if prevalence is None:
        prevalence = float(np.max(prior.as_array()))
    if args.g is not None and args.b is not None:
        g, b = args.g, args.b
    else:
        plan = bloom.plan_dimensions(args.n, args.m, prevalence)
        g, b = plan.g, plan.b
        print(f"plan: g={g} b={b} m_used={plan.m_used} unused={plan.unused_tests} "
              f"(unclamped g={plan.g_unclamped:.3f})", file=sys.stderr)
    layout = bloom.build_layout(args.n, g, b, args.seed)
    _emit(args, fileformats.design_to_text(layout.to_design_matrix(), layout))


def _cmd_design_eval(args, chars, prior) -> None:
    design, _ = fileformats.read_design(args.design)
    dist = prior.distribution()
    lines = [
        f"m {design.m}",
        f"n {design.n}",
        f"entropy-prior {model.entropy(dist)!r}",
        f"conditional-entropy {model.conditional_entropy(dist, design, chars)!r}",
        f"mutual-information {model.mutual_information(dist, design, chars)!r}",
        f"expected-confidence {model.expected_confidence(dist, design, chars)!r}",
    ]
    _emit(args, "\n".join(lines))


def _cmd_decode(args, chars, prior) -> None:
    design, layout = fileformats.read_design(args.design)
    outcome = fileformats.read_outcome(args.outcome)
    if args.method == "exact":
        summary = oracle.exact_posterior(prior, design, outcome, chars)
    elif args.method == "mitm":
        table = mitm.mitm_preprocess(design, prior.as_array(), args.epsilon)
        summary = mitm.mitm_query(table, outcome, chars).to_posterior_summary()
    elif args.method == "bp":
        summary = bp.bp_posterior(design, chars, prior, outcome,
                                  bp.BPParams(args.max_iters, args.damping, args.tol))
    else:
        if layout is None:
            raise GroupTestError("perfect decoding needs a design file with a bloom block")
        suspects = bloom.perfect_decode(layout, outcome)
        payload = json.dumps(
            {"labels": ["suspect" if s else "negative" for s in suspects]},
            sort_keys=True, separators=(",", ":"))
        _emit(args, payload)
        return
    _emit(args, _summary_json(summary))


def _cmd_adaptive(args, chars, prior) -> None:
    constraints = PoolingConstraints(max_pool_size=args.max_pool_size,
                                     max_splits_per_sample=args.max_splits)
    session = adaptive.start_session("cli", prior, chars, args.m, constraints)
    print(f"adaptive session: n={args.n} tests={args.m}")
    while session.remaining_tests > 0 and session.recommended is not None:
        print(f"recommend {session.recommended}")
        print("result?", flush=True)
        line = sys.stdin.readline()
        if not line:
            print("input closed; stopping", file=sys.stderr)
            return
        observed = int(line.strip())
        session = adaptive.record_result(session, observed)
        marg = " ".join(f"{x:.6f}" for x in session.posterior.marginals())
        print(f"marginals {marg}")
    summary = model.summarize(session.posterior)
    _emit(args, _summary_json(summary))


def _cmd_simulate(args, chars, prior) -> None:
    design_spec = simulate.DesignSpec(kind=args.design_kind, g=args.g, b=args.b,
                                      path=args.design_file, budget=args.budget)
    decoder_spec = simulate.DecoderSpec(kind=args.decoder, epsilon=args.epsilon)
    config = simulate.ExperimentConfig(
        n=args.n, m=args.m, chars=chars, prior=prior, design=design_spec,
        decoder=decoder_spec, trials=args.trials, seed=args.seed)
    report = simulate.run_experiment(config)
    print(report.to_text(), file=sys.stderr)
    print(f"elapsed={report.wall_time_s:.2f}s", file=sys.stderr)
    _emit(args, report.to_json())


def _cmd_prevalence_estimate(args) -> None:
    from . import prevalence as prevalence_mod

    est = prevalence_mod.estimate_prevalence(args.k, args.pools, args.positives)
    payload = {
        "rho_hat": est.rho_hat,
        "k": est.k,
        "pools_tested": est.pools_tested,
        "positives": est.positives,
        "std_individual": est.std_individual,
        "std_pooled": est.std_pooled,
        "standard_error": est.standard_error(),
        "warning": est.warning,
    }
    _emit(args, json.dumps(payload, sort_keys=True, separators=(",", ":")))


def _cmd_serve(args) -> None:
    import uvicorn

    from .service import create_app

    app = create_app(store_dir=args.store_dir, console_dir=args.console_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        chars = _chars_argument(args.chars)
        if args.command == "prevalence":
            _cmd_prevalence_estimate(args)
            return 0
        if args.command == "serve":
            _cmd_serve(args)
            return 0
        n = getattr(args, "n", None)
        if n is None and getattr(args, "design", None):
            design, _ = fileformats.read_design(args.design)
            n = design.n
        prior = fileformats.parse_prior_argument(args.prior, n)
        if args.command == "design":
            if args.design_command == "es":
                _cmd_design_es(args, chars, prior)
            elif args.design_command == "bloom":
                _cmd_design_bloom(args, chars, prior)
            else:
                _cmd_design_eval(args, chars, prior)
        elif args.command == "decode":
            _cmd_decode(args, chars, prior)
        elif args.command == "adaptive":
            _cmd_adaptive(args, chars, prior)
        elif args.command == "simulate":
            _cmd_simulate(args, chars, prior)
        return 0
    except GroupTestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
