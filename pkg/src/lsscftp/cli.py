"""Command-line entry point: ``lsscftp {gen,sample,learn,bench,verify}``.

Every run is a pure function of its arguments and ``--seed``. JSON outputs
carry ``format_version`` and the effective configuration. Exit codes: 0 ok,
1 acceptance failure, 2 usage or parse error, 3 budget exceeded.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .cftp import DEFAULT_BUDGET_CAP, SampleBudget, run_exact_sampler_with_learning, run_naive_cftp
from .io import FORMAT_VERSION, dumps, instance_to_dict, load_estimate, load_instance, load_replay
from .learning import LearnConfig, learn_distribution, learn_from_data, relative_error
from .model import (
    InstanceError,
    LssOracle,
    OracleExhausted,
    make_bimodal_path_instance,
    make_clique_instance,
    make_path_instance,
    make_random_instance,
    validate_instance,
)
from .rng import BufferedUniforms, as_rng

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3
DEFAULT_SEED = 20240601

log = logging.getLogger("lsscftp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(args, text, suffix=""):
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(str(args.out) + suffix).write_text(text)


def _config(args):
    return {k: str(v) if isinstance(v, Path) else v
            for k, v in sorted(vars(args).items()) if k not in ("func", "out")}


def _document(args, **body):
    return {"format_version": FORMAT_VERSION, "command": args.command, "config": _config(args), **body}


def _learn_config(args, n):
    eps = args.epsilon if args.epsilon is not None else 1 / math.sqrt(max(n, 2))
    return LearnConfig(epsilon=eps, delta=args.delta, phi=args.phi, population_mode=args.population_mode)


def _oracle(args, target, comp):
    if getattr(args, "replay", None):
        return LssOracle.replay(comp, load_replay(args.replay))
    return LssOracle.simulated(target, comp, as_rng(args.seed, "oracle"))


def cmd_gen(args):
    family, n, k = args.family, args.n, args.k
    if family == "bimodal_path":
        target, comp = make_bimodal_path_instance(n)
    elif family == "path":
        target, comp = make_path_instance(n, k)
    elif family == "clique":
        target, comp = make_clique_instance(n, k)
    else:
        target, comp = make_random_instance(n, k, args.phi, seed=as_rng(args.seed, "gen", n, k))
    report = validate_instance(target, comp, args.phi)
    doc = instance_to_dict(target, comp, args.phi)
    doc["config"] = _config(args)
    doc["valid"] = report.valid
    _emit(args, dumps(doc))
    return EXIT_OK


def cmd_sample(args):
    target, comp, _ = load_instance(args.instance)
    oracle = _oracle(args, target, comp)
    estimate = load_estimate(args.estimate) if args.estimate else None
    if estimate is not None and estimate.n != comp.n:
        raise InstanceError(f"estimate has {estimate.n} states, instance has {comp.n}")
    engine = args.engine
    if engine == "auto":
        engine = "param" if estimate is not None or (comp.n > 1 and not oracle.is_replay) else "naive"

    learn_info = None
    states, steps, loops, statuses = [], [], [], []
    exhausted = False
    try:
        if engine == "param" and estimate is None:
            res = learn_distribution(oracle, _learn_config(args, comp.n))
            estimate = res.estimate
            learn_info = {"samples_used": res.samples_used, "estimate": estimate.probs.tolist()}
        uniforms = BufferedUniforms(as_rng(args.seed, "sample-aux"))
        for _ in range(args.num_samples):
            budget = SampleBudget(args.budget)
            if engine == "naive":
                out = run_naive_cftp(oracle, budget)
            else:
                out = run_exact_sampler_with_learning(oracle, estimate, budget, rng=uniforms)
            statuses.append(out.status)
            states.append(out.state)
            steps.append(out.steps)
            loops.append(out.loops)
    except OracleExhausted:
        exhausted = True

    lines = [str(s) if s is not None else "budget_exceeded" for s in states]
    _emit(args, "".join(line + "\n" for line in lines))
    overrun = exhausted or any(s == "budget_exceeded" for s in statuses)
    summary = _document(
        args,
        engine=engine,
        requested=args.num_samples,
        produced=sum(s is not None for s in states),
        budget_exceeded=sum(s == "budget_exceeded" for s in statuses),
        oracle_exhausted=exhausted,
        oracle_samples=oracle.samples_drawn,
        mean_steps=sum(steps) / len(steps) if steps else None,
        mean_loops=sum(loops) / len(loops) if loops else None,
        learn=learn_info,
        seed=args.seed,
    )
    if args.out is None:
        sys.stderr.write(dumps(summary))
    else:
        Path(str(args.out) + ".summary.json").write_text(dumps(summary))
    return EXIT_BUDGET if overrun else EXIT_OK


def cmd_learn(args):
    target, comp, _ = load_instance(args.instance)
    config = _learn_config(args, comp.n)
    if args.replay and not args.population_mode:
        res = learn_from_data(load_replay(args.replay), comp, config)
    else:
        oracle = _oracle(args, target, comp)
        try:
            res = learn_distribution(oracle, config, target=target)
        except OracleExhausted as exc:
            log.error("replay ran out after %d samples", exc.consumed)
            return EXIT_BUDGET
    body = res.to_dict()
    if not args.replay:
        body["relative_error"] = list(relative_error(target, res.estimate))
    _emit(args, dumps(_document(args, result=body)))
    return EXIT_OK


def _sizes(text):
    try:
        sizes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --sizes {text!r}") from exc
    if not sizes or any(n < 3 or n % 2 == 0 for n in sizes):
        raise UsageError("--sizes must be odd integers >= 3")
    return sizes


def cmd_bench(args):
    from .verify import coalescence_benchmark

    report = coalescence_benchmark(_sizes(args.sizes), args.trials, seed=args.seed, budget_cap=args.budget)
    _emit(args, dumps(_document(args, result=report.to_dict(include_timing=args.timing))))
    if args.table:
        _emit(args, report.to_table(args.timing), ".tsv")
    return EXIT_BUDGET if report.any_exceeded else EXIT_OK


def cmd_verify(args):
    from .suite import CHECKS, EXTRA_CHECKS, run_checks

    names = args.only or list(CHECKS)
    unknown = [n for n in names if n not in CHECKS and n not in EXTRA_CHECKS]
    if unknown:
        raise UsageError(f"unknown checks: {', '.join(unknown)}")
    results = run_checks(names, seed=args.seed, echo=lambda line: sys.stderr.write(line + "\n"))
    doc = _document(args, results=[r.to_dict() for r in results], passed=all(r.passed for r in results))
    _emit(args, dumps(doc))
    if any(r.overrun for r in results):
        return EXIT_BUDGET
    return EXIT_OK if doc["passed"] else EXIT_FAIL


def build_parser():
    p = _Parser(prog="lsscftp", description="Exact sampling from local comparison oracles.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--out", type=Path, default=None)

    def learner(sp):
        sp.add_argument("--epsilon", type=float, default=None, help="default 1/sqrt(n)")
        sp.add_argument("--delta", type=float, default=0.05)
        sp.add_argument("--phi", type=float, default=2.0)
        sp.add_argument("--population-mode", action="store_true")

    sp = sub.add_parser("gen", help="write an instance file")
    common(sp)
    sp.add_argument("--family", choices=["path", "bimodal_path", "clique", "random"], required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--phi", type=float, default=2.0)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("sample", help="draw exact samples")
    common(sp)
    learner(sp)
    sp.add_argument("--instance", type=Path, required=True)
    sp.add_argument("--engine", choices=["naive", "param", "auto"], default="auto")
    sp.add_argument("--num-samples", type=int, default=1)
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET_CAP)
    sp.add_argument("--estimate", type=Path, default=None)
    sp.add_argument("--replay", type=Path, default=None)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("learn", help="estimate the target distribution")
    common(sp)
    learner(sp)
    sp.add_argument("--instance", type=Path, required=True)
    sp.add_argument("--replay", type=Path, default=None)
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("bench", help="naive vs parameterized coalescence on bimodal paths")
    common(sp)
    sp.add_argument("--sizes", default="7,9,11")
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET_CAP)
    sp.add_argument("--table", action="store_true", help="also write a tab-separated table")
    sp.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identity)")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("verify", help="run the pinned acceptance checks")
    common(sp)
    sp.add_argument("--only", nargs="+", default=None)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "num_samples", 1) < 0 or getattr(args, "trials", 10) < 10:
            raise UsageError("--num-samples must be >= 0 and --trials >= 10")
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"lsscftp: error: {exc}\n")
        return EXIT_USAGE
    except (InstanceError, OSError, json.JSONDecodeError, ValueError) as exc:
        sys.stderr.write(f"lsscftp: error: {exc}\n")
        return EXIT_USAGE


def entry():
    sys.exit(main())
