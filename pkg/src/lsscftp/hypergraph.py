"""Exact sampling from k-wise comparisons.

The pairwise engine already handles sets of any size: every loser in the
drawn set is pulled onto the winner. This module adds the configuration
checks for the k-set regime and the learn-once, sample-many wrapper.
"""

from dataclasses import dataclass, field
import math

from .cftp import SampleBudget, run_exact_sampler_with_learning, run_parameterized_cftp
from .learning import LearnConfig, learn_distribution
from .model import InstanceError

__all__ = ["KSetEngineConfig", "run_kset_cftp", "run_kset_sampler_with_learning"]

MAX_K = 8


@dataclass
class KSetEngineConfig:
    """Settings for the k-set sampler.

    ``estimate`` is filled in by the first call to
    :func:`run_kset_sampler_with_learning` when left as None, so later calls
    reuse the learned estimate. ``budget`` is a template: each call gets a
    fresh allowance with the same cap.
    """

    k: int
    budget: SampleBudget = field(default_factory=SampleBudget)
    estimate: object = None
    learn_config: LearnConfig | None = None
    max_k: int = MAX_K
    learn_samples: int = 0

    def check(self, comp):
        if self.k < 2:
            raise InstanceError("k must be at least 2")
        if comp.k != self.k:
            raise InstanceError(f"instance has set size {comp.k}, config says {self.k}")
        if self.k > self.max_k:
            raise InstanceError(f"k={self.k} exceeds the configured cap {self.max_k}")


def run_kset_cftp(oracle, p, budget=None, *, rng, coupling="shared", max_k=MAX_K, trace=None):
    """Parameterized coupling from the past on a k-set oracle, plus the acceptance coin."""
    k = oracle.comp.k
    if k > max_k:
        raise InstanceError(f"k={k} exceeds the configured cap {max_k}")
    return run_parameterized_cftp(oracle, p, budget, rng=rng, coupling=coupling, trace=trace)


def run_kset_sampler_with_learning(oracle, config, *, rng, coupling="shared"):
    """One exact sample; learns the estimate at ``epsilon = 1/sqrt(n)`` on first use."""
    config.check(oracle.comp)
    budget = SampleBudget(config.budget.cap)
    learned = 0
    if config.estimate is None:
        n = oracle.comp.n
        lc = config.learn_config or LearnConfig(epsilon=1 / math.sqrt(max(n, 2)))
        before = oracle.samples_drawn
        config.estimate = learn_distribution(oracle, lc).estimate
        config.learn_samples = oracle.samples_drawn - before
        learned = config.learn_samples
        budget.consumed += learned
    out = run_exact_sampler_with_learning(oracle, config.estimate, budget, rng=rng, coupling=coupling)
    out.steps += learned
    return out
