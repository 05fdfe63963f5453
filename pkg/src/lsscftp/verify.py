"""Statistical and spectral experiments for checking exactness and speed.

Every report keeps the raw per-trial data it was computed from, and
``to_dict`` output is a pure function of that data.
"""

from dataclasses import dataclass, field
import math
import time

import numpy as np
from scipy.special import gammaincc

from .cftp import (
    SampleBudget,
    acceptance_constant,
    run_exact_sampler_with_learning,
    run_naive_cftp,
    run_parameterized_cftp,
)
from .learning import ComparisonCounts, empirical_laplacian
from .model import InstanceError, LssOracle, TargetDistribution, make_bimodal_path_instance
from .rng import BufferedUniforms, as_rng
from .spectral import build_laplacian, fiedler_eigenvalue

__all__ = [
    "GofReport",
    "BenchRow",
    "BenchReport",
    "FiedlerReport",
    "RejectionReport",
    "chi_square_gof",
    "coalescence_benchmark",
    "fiedler_concentration_experiment",
    "three_state_closed_form_sampler",
    "rejection_rate_check",
]

DEFAULT_SIGNIFICANCE = 1e-3


@dataclass
class GofReport:
    counts: np.ndarray
    expected: np.ndarray
    statistic: float
    dof: int
    p_value: float
    significance: float

    @property
    def passed(self):
        return self.p_value > self.significance

    def to_dict(self):
        return {
            "counts": self.counts.tolist(),
            "expected": self.expected.tolist(),
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "significance": self.significance,
            "pass": self.passed,
        }


def _merge_bins(obs, exp, min_expected):
    order = np.argsort(exp, kind="stable")
    groups, acc = [], []
    total = 0.0
    for i in order:
        acc.append(i)
        total += exp[i]
        if total >= min_expected:
            groups.append(acc)
            acc, total = [], 0.0
    if acc:
        if groups:
            groups[-1].extend(acc)
        else:
            groups.append(acc)
    return (np.array([obs[g].sum() for g in groups], dtype=float),
            np.array([exp[g].sum() for g in groups], dtype=float))


def chi_square_gof(observed, expected, significance=DEFAULT_SIGNIFICANCE, min_expected=5.0):
    """Pearson goodness-of-fit of ``observed`` counts against probabilities ``expected``.

    Bins with expected count below ``min_expected`` are merged (smallest
    first). The p-value is the regularized upper incomplete gamma function
    ``Q(dof/2, stat/2)``.
    """
    obs = np.asarray(observed, dtype=float)
    probs = np.asarray(expected, dtype=float)
    if obs.shape != probs.shape or obs.ndim != 1:
        raise InstanceError("observed and expected must be 1-d arrays of equal length")
    if not 0 < significance < 1:
        raise ValueError("significance must lie in (0, 1)")
    if np.any(probs < 0) or probs.sum() <= 0:
        raise InstanceError("expected probabilities must be non-negative")
    trials = obs.sum()
    exp_counts = probs / probs.sum() * trials
    o, e = _merge_bins(obs, exp_counts, min_expected)
    if o.size < 2:
        raise InstanceError("goodness of fit needs at least two bins after merging")
    stat = float(np.sum((o - e) ** 2 / e))
    dof = o.size - 1
    p = float(gammaincc(dof / 2.0, stat / 2.0))
    return GofReport(obs.astype(np.int64), exp_counts, stat, dof, p, significance)


@dataclass
class BenchRow:
    n: int
    engine: str
    trials: int
    coalescence: np.ndarray
    loops: np.ndarray
    exceeded: int
    wall_time: float

    def summary(self, include_timing=False):
        c = self.coalescence
        row = {
            "n": self.n,
            "engine": self.engine,
            "trials": self.trials,
            "runs": int(c.size),
            "mean": float(c.mean()),
            "median": float(np.median(c)),
            "max": int(c.max()),
            "mean_loops": float(self.loops.mean()),
            "budget_exceeded": self.exceeded,
        }
        if include_timing:
            row["wall_time"] = self.wall_time
        return row


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def means(self, engine):
        return {r.n: float(r.coalescence.mean()) for r in self.rows if r.engine == engine}

    def ratios(self):
        naive, param = self.means("naive"), self.means("parameterized")
        return {n: naive[n] / param[n] for n in sorted(naive) if n in param}

    def ratio_nondecreasing(self):
        r = [v for _, v in sorted(self.ratios().items())]
        return all(b >= a for a, b in zip(r, r[1:]))

    @property
    def any_exceeded(self):
        return any(r.exceeded for r in self.rows)

    def to_dict(self, include_timing=False, include_raw=True):
        out = {
            "rows": [r.summary(include_timing) for r in self.rows],
            "ratios": {str(n): v for n, v in self.ratios().items()},
            "ratio_nondecreasing": self.ratio_nondecreasing(),
        }
        if include_raw:
            out["raw"] = [
                {"n": r.n, "engine": r.engine, "coalescence": r.coalescence.tolist(), "loops": r.loops.tolist()}
                for r in self.rows
            ]
        return out

    def to_table(self, include_timing=False):
        rows = [r.summary(include_timing) for r in self.rows]
        cols = list(rows[0]) if rows else []
        lines = ["\t".join(cols)]
        lines += ["\t".join(str(row[c]) for c in cols) for row in rows]
        return "\n".join(lines) + "\n"


def coalescence_benchmark(sizes, trials, *, seed, budget_cap=10**8, engines=("naive", "parameterized")):
    """Naive vs parameterized (``p = D``) engines on bimodal paths of the given odd sizes.

    The naive row records one coalescence per trial. The parameterized row
    runs the full accept/reject loop per trial and records every inner
    coalescence together with the number of loops.
    """
    trials = int(trials)
    if trials < 10:
        raise ValueError("trials must be at least 10")
    if any(int(n) < 3 or int(n) % 2 == 0 for n in sizes):
        raise InstanceError("sizes must be odd integers >= 3")
    report = BenchReport()
    for n in sizes:
        target, comp = make_bimodal_path_instance(n)
        for engine in engines:
            start = time.perf_counter()
            coal, loops, exceeded = [], [], 0
            for i in range(trials):
                oracle = LssOracle.simulated(target, comp, as_rng(seed, "bench", n, engine, i))
                budget = SampleBudget(budget_cap)
                if engine == "naive":
                    out = run_naive_cftp(oracle, budget)
                elif engine == "parameterized":
                    out = run_exact_sampler_with_learning(oracle, target, budget,
                                                          rng=as_rng(seed, "bench-aux", n, i))
                else:
                    raise ValueError(f"unknown engine {engine!r}")
                coal.extend(out.coalescence_steps)
                loops.append(out.loops)
                exceeded += int(out.budget_exceeded)
            report.rows.append(BenchRow(n, engine, trials, np.array(coal, dtype=np.int64),
                                        np.array(loops, dtype=np.int64), exceeded,
                                        time.perf_counter() - start))
    return report


@dataclass
class FiedlerReport:
    lambda_q: float
    lambdas: np.ndarray
    epsilon: float
    samples_per_trial: int
    implied_samples: int

    @property
    def fraction(self):
        ok = np.abs(self.lambdas - self.lambda_q) <= self.epsilon * self.lambda_q
        return float(ok.mean())

    def to_dict(self):
        return {
            "lambda_q": self.lambda_q,
            "lambdas": self.lambdas.tolist(),
            "epsilon": self.epsilon,
            "samples_per_trial": self.samples_per_trial,
            "implied_samples": self.implied_samples,
            "fraction": self.fraction,
        }


def fiedler_concentration_experiment(comp, m, trials, epsilon, *, seed, target=None, delta=0.1):
    """Fraction of trials whose empirical Fiedler value is within ``epsilon`` relative of ``lambda(Q)``.

    ``implied_samples`` is ``ceil(log(n/delta) / (lambda(Q) epsilon^2))``,
    the concentration bound with its constant set to one.
    """
    if not comp.is_connected():
        raise InstanceError("comparison graph must be connected")
    target = target or TargetDistribution(np.full(comp.n, 1.0 / comp.n))
    lam_q = fiedler_eigenvalue(build_laplacian(comp))
    lams = np.empty(int(trials))
    for i in range(int(trials)):
        oracle = LssOracle.simulated(target, comp, as_rng(seed, "fiedler", i))
        data = ComparisonCounts.from_draws(comp, *oracle.draw_many(m))
        lams[i] = fiedler_eigenvalue(empirical_laplacian(data, comp.n))
    implied = math.ceil(math.log(comp.n / delta) / (lam_q * epsilon**2))
    return FiedlerReport(lam_q, lams, float(epsilon), int(m), implied)


def three_state_closed_form_sampler(oracle, max_rounds=10**7):
    """Exact sample on three states compared along ``{a, b}`` and ``{b, c}``.

    Takes one winner ``x`` of ``{a, b}`` and one winner ``y`` of ``{b, c}``
    from the oracle and retries while ``(x, y) == (a, c)``. Otherwise ``b``
    appears and the other coordinate is returned (``b`` if both are ``b``).
    Returns ``(state, oracle_samples_used)``.
    """
    sets = oracle.comp.sets()
    if oracle.comp.n != 3 or len(sets) != 2 or oracle.comp.k != 2:
        raise InstanceError("needs three states and exactly two comparison pairs")
    shared = set(sets[0]) & set(sets[1])
    if len(shared) != 1:
        raise InstanceError("the two pairs must share one state")
    b = shared.pop()
    a = (set(sets[0]) - {b}).pop()
    c = (set(sets[1]) - {b}).pop()
    left = oracle.comp.set_index()[sets[0]]
    used = 0
    for _ in range(max_rounds):
        x = y = None
        while x is None or y is None:
            s, w = oracle.next_raw()
            used += 1
            if s == left:
                x = w if x is None else x
            else:
                y = w if y is None else y
        if (x, y) == (a, c):
            continue
        if x == b:
            return y, used
        return x, used
    raise RuntimeError("three-state sampler did not terminate")


@dataclass
class RejectionReport:
    accepted: np.ndarray
    acceptance_constant: float

    @property
    def trials(self):
        return int(self.accepted.size)

    @property
    def expected_rate(self):
        return 1.0 / self.acceptance_constant

    @property
    def empirical_rate(self):
        return float(self.accepted.mean())

    @property
    def sigma(self):
        q = self.expected_rate
        return math.sqrt(q * (1 - q) / self.trials)

    @property
    def passed(self):
        return abs(self.empirical_rate - self.expected_rate) <= 3 * self.sigma

    def to_dict(self):
        return {
            "trials": self.trials,
            "acceptance_constant": self.acceptance_constant,
            "expected_rate": self.expected_rate,
            "empirical_rate": self.empirical_rate,
            "sigma": self.sigma,
            "pass": self.passed,
        }


def rejection_rate_check(oracle, estimate, trials, *, seed, target=None):
    """Empirical acceptance of the parameterized engine against ``1/A``, ``A = sum D/p``."""
    target = target or oracle.target
    if target is None:
        raise ValueError("the true target is needed for the closed-form rate")
    p = estimate.probs if isinstance(estimate, TargetDistribution) else np.asarray(estimate, dtype=float)
    uniforms = BufferedUniforms(as_rng(seed, "rejection"))
    acc = np.zeros(int(trials), dtype=bool)
    for i in range(int(trials)):
        acc[i] = run_parameterized_cftp(oracle, p, rng=uniforms).accepted
    return RejectionReport(acc, acceptance_constant(target, p))
