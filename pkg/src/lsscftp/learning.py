"""Maximum-likelihood learning of the target from comparison samples.

Samples are aggregated into per-set winner counts, so the objective and its
gradient cost ``O(m k)`` regardless of how many samples were drawn. The
estimate minimizes the multinomial-logit negative log-likelihood over

    {z : sum(z) = 0, |z_x - z_y| <= log(phi) for x, y sharing a set}

by projected gradient descent, then is shifted onto the simplex.
"""

from dataclasses import asdict, dataclass, field
import math

import numpy as np
from scipy.special import logsumexp

from .model import (
    ComparisonDistribution,
    InstanceError,
    TargetDistribution,
    softmax_from_params,
)
from .spectral import fiedler_eigenvalue

__all__ = [
    "ProjectionError",
    "ComparisonCounts",
    "LearnConfig",
    "LearnResult",
    "negative_log_likelihood",
    "nll_gradient",
    "project_to_omega_phi",
    "learn",
    "learn_distribution",
    "learn_from_data",
    "pilot_lambda",
    "shift_to_distribution",
    "relative_error",
    "empirical_laplacian",
    "centered",
]


class ProjectionError(RuntimeError):
    """Cyclic projection did not reach the requested feasibility."""


def centered(z):
    z = np.asarray(z, dtype=float)
    return z - z.mean()


@dataclass
class ComparisonCounts:
    """Winner counts per comparison set.

    ``members`` is ``(m, k)``; ``counts[s, j]`` is the (possibly fractional)
    number of times ``members[s, j]`` won set ``s``; ``total`` is the sample
    count used for averaging.
    """

    n: int
    members: np.ndarray
    counts: np.ndarray
    total: float

    @classmethod
    def from_draws(cls, comp, set_idx, winners):
        set_idx = np.asarray(set_idx, dtype=np.int64)
        winners = np.asarray(winners, dtype=np.int64)
        if set_idx.size == 0:
            raise InstanceError("at least one sample is required")
        pos = np.argmax(comp.members[set_idx] == winners[:, None], axis=1)
        m, k = comp.members.shape
        counts = np.bincount(set_idx * k + pos, minlength=m * k).reshape(m, k).astype(float)
        return cls(comp.n, comp.members, counts, float(set_idx.size))

    @classmethod
    def from_samples(cls, samples, n=None):
        samples = list(samples)
        if not samples:
            raise InstanceError("at least one sample is required")
        index, rows, pos = {}, [], []
        for members, w in samples:
            key = tuple(sorted(int(x) for x in members))
            if int(w) not in key:
                raise InstanceError(f"winner {w} is not in {key}")
            if key not in index:
                index[key] = len(index)
            rows.append(index[key])
            pos.append(key.index(int(w)))
        sets = list(index)
        k = len(sets[0])
        if any(len(s) != k for s in sets):
            raise InstanceError("samples mix set sizes")
        if n is None:
            n = max(max(s) for s in sets) + 1
        m = len(sets)
        counts = np.bincount(np.array(rows) * k + np.array(pos), minlength=m * k).reshape(m, k)
        return cls(int(n), np.array(sets, dtype=np.int64), counts.astype(float), float(len(samples)))

    @classmethod
    def population(cls, comp, target):
        """Expected counts per unit sample: ``Q(S) * D_S(x)``."""
        within = target.probs[comp.members]
        counts = comp.probs[:, None] * within / within.sum(axis=1, keepdims=True)
        return cls(comp.n, comp.members, counts, 1.0)

    @property
    def k(self):
        return self.members.shape[1]


def _as_counts(samples, n=None):
    if isinstance(samples, ComparisonCounts):
        return samples
    return ComparisonCounts.from_samples(samples, n)


def negative_log_likelihood(z, samples):
    """Average of ``logsumexp(z[S]) - z[winner]`` over the samples."""
    data = _as_counts(samples, len(z))
    z = np.asarray(z, dtype=float)
    zs = z[data.members]
    per_set = data.counts.sum(axis=1) * logsumexp(zs, axis=1) - (data.counts * zs).sum(axis=1)
    return float(per_set.sum() / data.total)


def nll_gradient(z, samples):
    """Gradient of :func:`negative_log_likelihood`; its entries sum to zero."""
    data = _as_counts(samples, len(z))
    z = np.asarray(z, dtype=float)
    zs = z[data.members]
    soft = np.exp(zs - logsumexp(zs, axis=1, keepdims=True))
    contrib = data.counts.sum(axis=1, keepdims=True) * soft - data.counts
    grad = np.bincount(data.members.ravel(), weights=contrib.ravel(), minlength=z.size)
    return grad / data.total


def _pairs_of(comp):
    if isinstance(comp, ComparisonDistribution):
        pairs = comp.supported_pairs()
    else:
        pairs = sorted({tuple(sorted(p)) for p in comp})
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def project_to_omega_phi(z, comp, phi, tol=1e-10, max_sweeps=10_000):
    """Euclidean projection onto zero-sum vectors with bounded supported differences.

    Every difference constraint is invariant under adding a constant, so the
    point is centred first and Dykstra's cyclic projections are run over the
    slabs ``|z_a - z_b| <= log(phi)``.
    """
    if not phi > 1:
        raise InstanceError("phi must exceed 1")
    c = math.log(phi)
    z = centered(z).copy()
    pairs = _pairs_of(comp)
    if pairs.size == 0:
        return z
    a_idx, b_idx = pairs[:, 0].tolist(), pairs[:, 1].tolist()

    def violation(v):
        return float(np.max(np.abs(v[pairs[:, 0]] - v[pairs[:, 1]])) - c)

    if violation(z) <= 0:
        return z
    vals = z.tolist()
    corr = [(0.0, 0.0)] * len(a_idx)
    for _ in range(max_sweeps):
        moved = 0.0
        for e, (a, b) in enumerate(zip(a_idx, b_idx)):
            ya, yb = corr[e]
            va, vb = vals[a] + ya, vals[b] + yb
            d = va - vb
            if d > c:
                s = 0.5 * (d - c)
                pa, pb = va - s, vb + s
            elif d < -c:
                s = 0.5 * (-d - c)
                pa, pb = va + s, vb - s
            else:
                pa, pb = va, vb
            corr[e] = (va - pa, vb - pb)
            moved = max(moved, abs(pa - vals[a]), abs(pb - vals[b]))
            vals[a], vals[b] = pa, pb
        if moved <= 1e-3 * tol:
            out = np.array(vals)
            if violation(out) <= tol:
                return out - out.mean()
    raise ProjectionError(f"cyclic projection did not converge in {max_sweeps} sweeps")


@dataclass
class LearnConfig:
    epsilon: float = 0.1
    delta: float = 0.05
    phi: float = 2.0
    step_size: float = 1.0
    max_iters: int = 10_000
    grad_tolerance: float = 1e-10
    sample_constant: float = 200.0
    pilot_constant: float = 50.0
    population_mode: bool = False

    def __post_init__(self):
        if not 0 < self.epsilon < 1 or not 0 < self.delta < 1:
            raise ValueError("epsilon and delta must lie in (0, 1)")
        if not self.phi > 1:
            raise ValueError("phi must exceed 1")
        if self.step_size <= 0 or self.grad_tolerance <= 0 or self.sample_constant <= 0:
            raise ValueError("step size, tolerance and sample constant must be positive")

    def num_samples(self, n, lam):
        return math.ceil(self.sample_constant * n * math.log(1 / self.delta) / (lam * self.epsilon**2))


@dataclass
class LearnResult:
    estimate: TargetDistribution
    raw_params: np.ndarray
    iterations: int
    final_gradient_norm: float
    samples_used: int
    lambda_estimate: float = float("nan")
    objective_trace: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "estimate": self.estimate.probs.tolist(),
            "raw_params": self.raw_params.tolist(),
            "iterations": self.iterations,
            "final_gradient_norm": self.final_gradient_norm,
            "samples_used": self.samples_used,
            "lambda_estimate": self.lambda_estimate,
        }


def _minimize(data, comp, config):
    z = np.zeros(data.n)
    f = negative_log_likelihood(z, data)
    trace = [f]
    step = config.step_size
    gmap = math.inf
    it = 0
    while it < config.max_iters:
        g = nll_gradient(z, data)
        z_new = project_to_omega_phi(z - step * g, comp, config.phi)
        gmap = float(np.max(np.abs(z - z_new))) / step
        if gmap <= config.grad_tolerance:
            break
        f_new = negative_log_likelihood(z_new, data)
        if f_new > f + 1e-12:
            step *= 0.5
            if step < 1e-12:
                break
            continue
        z, f = z_new, f_new
        trace.append(f)
        it += 1
    return z, it, gmap, trace


def learn(oracle, config=None, lambda_estimate=None, target=None):
    """Constrained maximum-likelihood estimate of the centred log-weights.

    Draws ``ceil(C n log(1/delta) / (lambda epsilon^2))`` samples and runs
    projected gradient descent from zero. In population mode no samples are
    drawn and the exact expected objective under ``target`` (default: the
    oracle's own target) is minimized instead.
    """
    config = config or LearnConfig()
    comp = oracle.comp
    n = comp.n
    if n == 1:
        return LearnResult(TargetDistribution([1.0]), np.zeros(1), 0, 0.0, 0, lambda_estimate or 0.0)
    if config.population_mode:
        target = target if target is not None else oracle.target
        if target is None:
            raise ValueError("population mode needs the true target")
        data = ComparisonCounts.population(comp, target)
        used = 0
    else:
        if lambda_estimate is None or not lambda_estimate > 0:
            raise ValueError("a positive lambda estimate is required")
        used = config.num_samples(n, lambda_estimate)
        data = ComparisonCounts.from_draws(comp, *oracle.draw_many(used))
    z, iters, gmap, trace = _minimize(data, comp, config)
    return LearnResult(shift_to_distribution(z), z, iters, gmap, used,
                       float(lambda_estimate) if lambda_estimate is not None else float("nan"), trace)


def learn_from_data(data, comp, config=None):
    """Constrained MLE on an existing sample set (a list of samples or counts)."""
    config = config or LearnConfig()
    data = _as_counts(data, comp.n)
    if comp.n == 1:
        return LearnResult(TargetDistribution([1.0]), np.zeros(1), 0, 0.0, data.total)
    z, iters, gmap, trace = _minimize(data, comp, config)
    return LearnResult(shift_to_distribution(z), z, iters, gmap, int(data.total), float("nan"), trace)


def pilot_lambda(oracle, config=None, max_doublings=20):
    """Fiedler value of the empirical Laplacian from ``ceil(c log n)`` pilot samples.

    The pilot batch is doubled until its comparison graph is connected.
    """
    config = config or LearnConfig()
    n = oracle.comp.n
    m = max(1, math.ceil(config.pilot_constant * math.log(max(n, 2))))
    for _ in range(max_doublings):
        s, w = oracle.draw_many(m)
        lam = fiedler_eigenvalue(empirical_laplacian(ComparisonCounts.from_draws(oracle.comp, s, w), n))
        if lam > 0:
            return lam, m
        m *= 2
    raise InstanceError("pilot samples never connected the comparison graph")


def learn_distribution(oracle, config=None, target=None):
    """Pilot Fiedler estimate, constrained MLE and shift onto the simplex.

    ``samples_used`` in the result includes the pilot batch.
    """
    config = config or LearnConfig(epsilon=1 / math.sqrt(max(oracle.comp.n, 2)))
    if oracle.comp.n == 1 or config.population_mode:
        return learn(oracle, config, target=target)
    lam, pilot = pilot_lambda(oracle, config)
    result = learn(oracle, config, lam)
    result.samples_used += pilot
    return result


def shift_to_distribution(z_hat):
    """Subtract ``log(sum(exp(z_hat)))`` so the weights form a distribution."""
    return softmax_from_params(z_hat)


def relative_error(d1, d2):
    """``(||1 - d1/d2||_inf, ||1 - d2/d1||_inf)``."""
    p1 = d1.probs if isinstance(d1, TargetDistribution) else np.asarray(d1, dtype=float)
    p2 = d2.probs if isinstance(d2, TargetDistribution) else np.asarray(d2, dtype=float)
    if p1.shape != p2.shape:
        raise InstanceError("distributions differ in size")
    if np.any(p1 <= 0) or np.any(p2 <= 0):
        raise InstanceError("relative error needs strictly positive distributions")
    return float(np.max(np.abs(1 - p1 / p2))), float(np.max(np.abs(1 - p2 / p1)))


def empirical_laplacian(samples, n=None):
    """Average of ``k diag(1_S) - 1_S 1_S^T`` over the drawn sets."""
    data = _as_counts(samples, n)
    n = data.n if n is None else int(n)
    k = data.k
    weight = data.counts.sum(axis=1) / data.total
    L = np.zeros((n, n))
    for members, q in zip(data.members, weight):
        if q == 0:
            continue
        idx = np.asarray(members)
        L[np.ix_(idx, idx)] -= q
        L[idx, idx] += q * k
    return L


def config_dict(config):
    return asdict(config)
