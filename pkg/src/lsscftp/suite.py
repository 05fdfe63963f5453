"""Pinned end-to-end checks with fixed seeds and tolerances.

Each check returns a :class:`CheckResult`. ``run_checks`` runs a selection
and is what ``lsscftp verify`` executes.
"""

from dataclasses import dataclass, field
import math
import time

import numpy as np

from .cftp import run_exact_sampler_with_learning, run_naive_cftp
from .hypergraph import KSetEngineConfig, run_kset_sampler_with_learning
from .learning import (
    ComparisonCounts,
    LearnConfig,
    centered,
    learn,
    learn_distribution,
    negative_log_likelihood,
    nll_gradient,
    relative_error,
)
from .model import (
    ComparisonDistribution,
    LssOracle,
    TargetDistribution,
    make_bimodal_path_instance,
    make_path_instance,
    make_random_instance,
)
from .rng import BufferedUniforms, as_rng
from .spectral import (
    absolute_spectral_gap,
    build_laplacian,
    build_rescaled_matrix,
    build_transition_matrix,
    fiedler_eigenvalue,
    stationary_distribution,
)
from .verify import (
    chi_square_gof,
    coalescence_benchmark,
    fiedler_concentration_experiment,
    rejection_rate_check,
    three_state_closed_form_sampler,
)

__all__ = ["CheckResult", "CHECKS", "instance_suite", "perturbed_estimate", "run_checks", "PATH4_WEIGHTS"]

SIGNIFICANCE = 1e-3
PATH4_WEIGHTS = (1.0, 2.0, 1.5, 0.75)
DEFAULT_SEED = 20240601


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    overrun: bool = False

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.details.get('summary', '')}"

    def to_dict(self):
        return {"name": self.name, "pass": self.passed, "overrun": self.overrun, "details": self.details}


def instance_suite(seed=DEFAULT_SEED):
    """Twenty random instances with ``n <= 8``: ten pairwise, ten with 3-sets."""
    out = []
    for i in range(10):
        out.append(make_random_instance(2 + i % 7, 2, 2.0, seed=as_rng(seed, "suite-pairs", i)))
    for i in range(10):
        out.append(make_random_instance(3 + i % 6, 3, 2.0, seed=as_rng(seed, "suite-triples", i)))
    return out


def perturbed_estimate(target, eps, rng, max_tries=1000):
    """Random estimate whose two relative errors against ``target`` are both at most ``eps``."""
    for _ in range(max_tries):
        u = rng.uniform(-eps, eps, size=target.n)
        est = TargetDistribution.from_weights(target.probs * np.exp(u / 2))
        if max(relative_error(target, est)) <= eps:
            return est
    raise RuntimeError("could not build a perturbed estimate")


def _gof_states(states, target):
    counts = np.bincount(np.asarray(states, dtype=np.int64), minlength=target.n)
    return chi_square_gof(counts, target.probs, SIGNIFICANCE)


def check_stationary(seed=DEFAULT_SEED):
    start = time.perf_counter()
    worst = 0.0
    for target, comp in instance_suite(seed):
        pi = stationary_distribution(build_transition_matrix(target, comp))
        worst = max(worst, float(np.max(np.abs(pi - target.probs))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5.0
    # wall time stays out of the details so reports are byte-identical
    return CheckResult("stationary", ok, {
        "max_error": worst, "under_5s": elapsed < 5.0,
        "summary": f"max |pi - D| = {worst:.2e} (<= 1e-9), runtime under 5s: {elapsed < 5.0}"})


def check_naive_exact(seed=DEFAULT_SEED, runs=20_000):
    target, comp = make_bimodal_path_instance(7)
    oracle = LssOracle.simulated(target, comp, as_rng(seed, "naive-exact"))
    states, steps, exceeded = [], 0, 0
    for _ in range(runs):
        out = run_naive_cftp(oracle)
        exceeded += out.budget_exceeded
        if out.accepted:
            states.append(out.state)
        steps += out.steps
    gof = _gof_states(states, target)
    return CheckResult("naive_exact", gof.passed and not exceeded, {
        "gof": gof.to_dict(), "mean_steps": steps / runs,
        "summary": f"bimodal path n=7, {runs} runs: chi2={gof.statistic:.2f}, p={gof.p_value:.4f} (> 0.001)"},
        overrun=bool(exceeded))


def _exact_runs(oracle, estimate, runs, rng):
    uniforms = BufferedUniforms(rng)
    states, loops = [], []
    for _ in range(runs):
        out = run_exact_sampler_with_learning(oracle, estimate, rng=uniforms)
        states.append(out.state)
        loops.append(out.loops)
    return states, float(np.mean(loops))


def check_learned_exact(seed=DEFAULT_SEED, runs=20_000):
    target, comp = make_bimodal_path_instance(7)
    oracle = LssOracle.simulated(target, comp, as_rng(seed, "learned-exact-a"))
    states_a, loops_a = _exact_runs(oracle, target, runs, as_rng(seed, "learned-exact-a-aux"))
    gof_a = _gof_states(states_a, target)

    oracle = LssOracle.simulated(target, comp, as_rng(seed, "learned-exact-b"))
    learned = learn_distribution(oracle, LearnConfig(epsilon=1 / math.sqrt(comp.n), phi=2.0))
    states_b, loops_b = _exact_runs(oracle, learned.estimate, runs, as_rng(seed, "learned-exact-b-aux"))
    gof_b = _gof_states(states_b, target)
    rel = relative_error(target, learned.estimate)
    return CheckResult("learned_exact", gof_a.passed and gof_b.passed, {
        "exact_estimate": gof_a.to_dict(), "learned_estimate": gof_b.to_dict(),
        "mean_loops": [loops_a, loops_b], "learned_relative_error": rel,
        "learn_samples": learned.samples_used,
        "summary": f"p(exact D)={gof_a.p_value:.4f}, p(learned)={gof_b.p_value:.4f} (> 0.001)"})


def check_rescaled_stationary(seed=DEFAULT_SEED, eps=0.1):
    rng = as_rng(seed, "rescaled")
    instances = [make_bimodal_path_instance(7)] + instance_suite(seed)
    worst_uniform, worst_ratio, bound = 0.0, 0.0, ((1 + eps) / (1 - eps)) ** 2
    ratio_ok = True
    for target, comp in instances:
        pi = stationary_distribution(build_rescaled_matrix(target, comp, target))
        worst_uniform = max(worst_uniform, float(np.max(np.abs(pi - 1.0 / comp.n))))
        est = perturbed_estimate(target, eps, rng)
        pi = stationary_distribution(build_rescaled_matrix(target, comp, est))
        r = float(pi.max() / pi.min())
        worst_ratio = max(worst_ratio, r)
        ratio_ok &= r <= bound
    ok = worst_uniform <= 1e-9 and ratio_ok
    return CheckResult("rescaled_stationary", ok, {
        "max_uniform_error": worst_uniform, "max_ratio": worst_ratio, "bound": bound,
        "summary": f"max |pi - 1/n| = {worst_uniform:.2e} (<= 1e-9); max/min = {worst_ratio:.4f} <= {bound:.4f}"})


def check_gap_ordering(seed=DEFAULT_SEED):
    worst = math.inf
    for target, comp in instance_suite(seed):
        M = build_rescaled_matrix(target, comp, target)
        gap = absolute_spectral_gap(M, stationary_distribution(M))
        lam = fiedler_eigenvalue(build_laplacian(comp))
        worst = min(worst, gap / lam)
    return CheckResult("gap_ordering", worst >= 0.1, {
        "min_gap_over_lambda": worst,
        "summary": f"min Gamma(M~)/lambda(Q) = {worst:.4f} (>= 0.1)"})


def check_speedup(seed=DEFAULT_SEED, sizes=(7, 9, 11), trials=50):
    report = coalescence_benchmark(sizes, trials, seed=seed)
    ratios = report.ratios()
    last = ratios[max(ratios)]
    ok = last >= 5 and report.ratio_nondecreasing() and not report.any_exceeded
    text = ", ".join(f"n={n}: {r:.2f}" for n, r in ratios.items())
    return CheckResult("speedup", ok, {
        "report": report.to_dict(include_raw=False), "ratios": ratios,
        "summary": f"naive/param ratios {text}; need >= 5 at n={max(ratios)} and nondecreasing"},
        overrun=report.any_exceeded)


def check_rejection_rate(seed=DEFAULT_SEED, trials=3000):
    target = TargetDistribution.from_weights([1.0, 2.0, 1.5, 0.75])
    comp = ComparisonDistribution(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    oracle = LssOracle.simulated(target, comp, as_rng(seed, "rejection-oracle"))
    exact = rejection_rate_check(oracle, target, trials, seed=as_rng(seed, "rejection-a").integers(2**63))
    p = target.probs.copy()
    p[0] /= 2
    pert = rejection_rate_check(oracle, p, trials, seed=as_rng(seed, "rejection-b").integers(2**63))
    ok = exact.passed and pert.passed and abs(exact.expected_rate - 0.25) < 1e-12
    return CheckResult("rejection_rate", ok, {
        "exact": exact.to_dict(), "perturbed": pert.to_dict(),
        "summary": (f"p=D: {exact.empirical_rate:.4f} vs 1/4 (3 sigma {3 * exact.sigma:.4f}); "
                    f"perturbed: {pert.empirical_rate:.4f} vs 1/A={pert.expected_rate:.4f}")})


def check_learning(seed=DEFAULT_SEED, trials=20, probes=100):
    target, comp = make_path_instance(4, weights=PATH4_WEIGHTS)
    z_star = centered(target.log_params)
    oracle = LssOracle.simulated(target, comp, as_rng(seed, "learning-pop"))
    pop = learn(oracle, LearnConfig(population_mode=True, phi=2.0))
    pop_err = float(np.max(np.abs(pop.raw_params - z_star)))

    good = 0
    rel_errors = []
    for i in range(trials):
        oracle = LssOracle.simulated(target, comp, as_rng(seed, "learning-finite", i))
        res = learn_distribution(oracle, LearnConfig(epsilon=0.1, phi=2.0))
        rel = max(relative_error(target, res.estimate))
        rel_errors.append(rel)
        good += rel <= 0.1

    rng = as_rng(seed, "gradient-probes")
    worst_fd = 0.0
    h = 1e-5
    for _ in range(probes):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(2, min(n, 4) + 1))
        t, c = make_random_instance(n, k, 3.0, seed=rng)
        o = LssOracle.simulated(t, c, rng)
        data = ComparisonCounts.from_draws(c, *o.draw_many(int(rng.integers(1, 200))))
        z = rng.normal(size=n)
        g = nll_gradient(z, data)
        fd = np.array([(negative_log_likelihood(z + h * e, data) - negative_log_likelihood(z - h * e, data)) / (2 * h)
                       for e in np.eye(n)])
        worst_fd = max(worst_fd, float(np.max(np.abs(g - fd)) / max(np.max(np.abs(g)), 1e-8)))
    ok = pop_err <= 1e-6 and good >= 16 and worst_fd <= 1e-6
    return CheckResult("learning", ok, {
        "population_error": pop_err, "finite_sample_successes": good, "relative_errors": rel_errors,
        "max_fd_relative_error": worst_fd,
        "summary": (f"population ||z - z*|| = {pop_err:.2e} (<= 1e-6); {good}/{trials} within 0.1 (>= 16); "
                    f"FD rel err {worst_fd:.2e} (<= 1e-6)")})


def check_fiedler(seed=DEFAULT_SEED):
    _, comp = make_path_instance(6)
    rep = fiedler_concentration_experiment(comp, 2000, 100, 0.3, seed=seed)
    return CheckResult("fiedler_concentration", rep.fraction >= 0.9, {
        "fraction": rep.fraction, "lambda_q": rep.lambda_q, "implied_samples": rep.implied_samples,
        "summary": f"path n=6, m=2000: fraction within 30% = {rep.fraction:.2f} (>= 0.9)"})


def check_kset(seed=DEFAULT_SEED, samples=10_000):
    target, comp = make_random_instance(5, 3, 2.0, seed=as_rng(seed, "kset-instance"))
    pi = stationary_distribution(build_transition_matrix(target, comp))
    stat_err = float(np.max(np.abs(pi - target.probs)))
    oracle = LssOracle.simulated(target, comp, as_rng(seed, "kset-oracle"))
    config = KSetEngineConfig(k=3)
    uniforms = BufferedUniforms(as_rng(seed, "kset-aux"))
    states = [run_kset_sampler_with_learning(oracle, config, rng=uniforms).state for _ in range(samples)]
    gof = _gof_states(states, target)
    ok = stat_err <= 1e-9 and gof.passed
    return CheckResult("kset", ok, {
        "stationary_error": stat_err, "gof": gof.to_dict(),
        "learned_relative_error": relative_error(target, config.estimate),
        "summary": f"n=5, k=3: |pi - D| = {stat_err:.2e}; GOF p={gof.p_value:.4f} over {samples}"})


def check_three_state(seed=DEFAULT_SEED, runs=100_000):
    target = TargetDistribution([0.5, 0.25, 0.25])
    comp = ComparisonDistribution(3, [(0, 1), (1, 2)])
    oracle = LssOracle.simulated(target, comp, as_rng(seed, "three-state"))
    states = [three_state_closed_form_sampler(oracle)[0] for _ in range(runs)]
    gof = _gof_states(states, target)
    return CheckResult("three_state", gof.passed, {
        "gof": gof.to_dict(),
        "summary": f"D=(.5,.25,.25), {runs} runs: p={gof.p_value:.4f} (> 0.001)"})


def check_determinism(seed=DEFAULT_SEED):
    import tempfile
    from pathlib import Path

    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        inst = tmp / "inst.json"
        main(["gen", "--family", "bimodal_path", "--n", "5", "--out", str(inst), "--seed", str(seed)])
        commands = {
            "gen": ["gen", "--family", "random", "--n", "5", "--phi", "2", "--seed", str(seed)],
            "sample": ["sample", "--instance", str(inst), "--num-samples", "50", "--engine", "param",
                       "--seed", str(seed)],
            "learn": ["learn", "--instance", str(inst), "--epsilon", "0.2", "--seed", str(seed)],
            "bench": ["bench", "--sizes", "3,5", "--trials", "10", "--seed", str(seed)],
            "verify": ["verify", "--only", "stationary", "three_state_small", "--seed", str(seed)],
        }
        same = {}
        for name, args in commands.items():
            blobs = []
            for rep in range(2):
                out = tmp / f"{name}-{rep}"
                main(args + ["--out", str(out)])
                files = sorted(p for p in tmp.iterdir() if p.name.startswith(f"{name}-{rep}"))
                blobs.append([p.read_bytes() for p in files])
            same[name] = blobs[0] == blobs[1] and len(blobs[0]) > 0
    ok = all(same.values())
    return CheckResult("determinism", ok, {
        "identical": same,
        "summary": ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in same.items())})


def check_three_state_small(seed=DEFAULT_SEED):
    return check_three_state(seed, runs=2000)


CHECKS = {
    "stationary": check_stationary,
    "naive_exact": check_naive_exact,
    "learned_exact": check_learned_exact,
    "rescaled_stationary": check_rescaled_stationary,
    "gap_ordering": check_gap_ordering,
    "speedup": check_speedup,
    "rejection_rate": check_rejection_rate,
    "learning": check_learning,
    "fiedler_concentration": check_fiedler,
    "kset": check_kset,
    "three_state": check_three_state,
    "determinism": check_determinism,
}

EXTRA_CHECKS = {"three_state_small": check_three_state_small}


def run_checks(names=None, seed=DEFAULT_SEED, echo=None):
    names = list(CHECKS) if not names else list(names)
    results = []
    for name in names:
        fn = CHECKS.get(name) or EXTRA_CHECKS.get(name)
        if fn is None:
            raise KeyError(f"unknown check {name!r}")
        res = fn(seed)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
