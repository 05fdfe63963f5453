"""Grand-coupling coupling-from-the-past engines.

The coupling map ``F_t`` sends every start state at past time ``t`` to its
image at time 0. Each extension one step further into the past draws one
comparison ``(S, w)`` from the oracle and composes ``F_t = F_{t+1} o f_t``
where ``f_t`` moves losers of ``S`` onto the winner ``w``. In the
parameterized engine a loser ``x`` only moves when a uniform falls below
``min(p(x) / p(w), 1)``, and the coalesced state ``y`` is then accepted with
probability ``p(y)``.

Trace lines, one per extension step::

    t,m1;m2;...;mk,winner,u,coalesced

``u`` is empty for the naive engine; ``coalesced`` is 0 or 1.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .model import InstanceError, TargetDistribution
from .rng import BufferedUniforms, as_rng

__all__ = [
    "DEFAULT_BUDGET_CAP",
    "SampleBudget",
    "GrandCouplingMap",
    "CftpOutcome",
    "CoalescenceTimes",
    "cftp_extend_one_step",
    "run_naive_cftp",
    "run_parameterized_cftp",
    "run_exact_sampler_with_learning",
    "coalescence_time_samples",
    "acceptance_constant",
]

log = logging.getLogger(__name__)

DEFAULT_BUDGET_CAP = 10**8
ACCEPTED, REJECTED, BUDGET_EXCEEDED = "accepted", "rejected", "budget_exceeded"


@dataclass
class SampleBudget:
    """Oracle-sample allowance shared by everything inside one end-to-end call."""

    cap: int | None = DEFAULT_BUDGET_CAP
    consumed: int = 0
    advisory: int | None = None
    _warned: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.cap is not None and self.cap < 1:
            raise ValueError("budget cap must be positive")

    @property
    def remaining(self):
        return None if self.cap is None else self.cap - self.consumed

    @property
    def exhausted(self):
        return self.cap is not None and self.consumed >= self.cap

    def note_advisory(self, n):
        """Log once when consumption passes a multiple of ``n log n``."""
        if self.advisory is None:
            self.advisory = int(10_000 * n * max(1.0, math.log(max(n, 2))))
        if not self._warned and self.consumed > self.advisory:
            self._warned = True
            log.warning("CFTP has used %d samples (advisory threshold %d)", self.consumed, self.advisory)


@dataclass
class GrandCouplingMap:
    images: np.ndarray
    t: int = 0
    samples_consumed: int = 0

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n, dtype=np.int64))

    @property
    def n(self):
        return self.images.size

    @property
    def coalesced(self):
        return bool(np.all(self.images == self.images[0]))

    def copy(self):
        return GrandCouplingMap(self.images.copy(), self.t, self.samples_consumed)


@dataclass
class CftpOutcome:
    status: str
    state: int | None
    steps: int
    loops: int = 1
    coalescence_steps: list = field(default_factory=list)

    @property
    def accepted(self):
        return self.status == ACCEPTED

    @property
    def rejected(self):
        return self.status == REJECTED

    @property
    def budget_exceeded(self):
        return self.status == BUDGET_EXCEEDED

    def to_dict(self):
        return {
            "status": self.status,
            "state": self.state,
            "steps": self.steps,
            "loops": self.loops,
            "coalescence_steps": list(self.coalescence_steps),
        }


def _check_p(p, n):
    if p is None:
        return None
    if isinstance(p, TargetDistribution):
        p = p.probs
    p = np.asarray(p, dtype=float)
    if p.shape != (n,):
        raise InstanceError(f"p must have length {n}")
    if not np.all(np.isfinite(p)) or np.any(p <= 0) or np.any(p > 1):
        raise InstanceError("p entries must lie in (0, 1]")
    return p


def cftp_extend_one_step(cmap, sample, aux_uniform, p=None):
    """Extend the coupling one step into the past using ``sample``.

    Returns a new map; ``cmap`` is left untouched.
    """
    members, w = sample
    members = tuple(int(x) for x in members)
    w = int(w)
    n = cmap.n
    if w not in members or len(set(members)) != len(members) or min(members) < 0 or max(members) >= n:
        raise InstanceError(f"malformed sample {sample!r}")
    if not 0.0 <= aux_uniform < 1.0:
        raise ValueError("aux_uniform must lie in [0, 1)")
    p = _check_p(p, n)
    out = cmap.copy()
    target = cmap.images[w]
    for x in members:
        if x == w:
            continue
        if p is None or aux_uniform < min(p[x] / p[w], 1.0):
            out.images[x] = target
    out.t -= 1
    out.samples_consumed += 1
    return out


def _format_trace(t, members, w, u, coalesced):
    u_txt = "" if u is None else repr(u)
    return f"{t},{';'.join(str(x) for x in members)},{w},{u_txt},{int(coalesced)}\n"


def _coalesce(oracle, p, budget, uniforms, coupling, trace):
    """Run the backward composition to coalescence.

    Returns ``(state, steps)``; ``state`` is None when the budget ran out.
    """
    n = oracle.comp.n
    images = list(range(n))
    counts = [1] * n
    distinct = n
    sets = oracle.comp.sets()
    plist = None if p is None else p.tolist()
    independent = coupling == "independent"
    draw = oracle.next_raw
    steps = 0
    t = 0
    while distinct > 1:
        if budget.exhausted:
            return None, steps
        s, w = draw()
        budget.consumed += 1
        steps += 1
        t -= 1
        members = sets[s]
        u = None
        if plist is not None and not independent:
            u = uniforms()
        new = images[w]
        for x in members:
            if x == w:
                continue
            if plist is not None:
                if independent:
                    u = uniforms()
                if not u < plist[x] / plist[w]:
                    continue
            old = images[x]
            if old != new:
                images[x] = new
                counts[old] -= 1
                counts[new] += 1
                if counts[old] == 0:
                    distinct -= 1
        if trace is not None:
            trace.write(_format_trace(t, members, w, u, distinct == 1))
        if steps & 0xFFFF == 0:
            budget.note_advisory(n)
    return images[0], steps


def _budget(budget):
    return SampleBudget() if budget is None else budget


def run_naive_cftp(oracle, budget=None, trace=None):
    """Coupling from the past on the raw comparison chain; the output law is ``D``."""
    budget = _budget(budget)
    state, steps = _coalesce(oracle, None, budget, None, "shared", trace)
    if state is None:
        return CftpOutcome(BUDGET_EXCEEDED, None, steps, coalescence_steps=[steps])
    return CftpOutcome(ACCEPTED, state, steps, coalescence_steps=[steps])


def run_parameterized_cftp(oracle, p, budget=None, *, rng, coupling="shared", trace=None):
    """Downscaled coupling from the past followed by a ``Be(p(y))`` acceptance coin.

    ``rng`` drives the downscaling uniforms and the acceptance coin; it may be
    a seed, a ``Generator`` or an existing :class:`BufferedUniforms`.
    ``coupling="independent"`` gives each loser its own uniform instead of
    one shared uniform per step.
    """
    if coupling not in ("shared", "independent"):
        raise ValueError(f"unknown coupling {coupling!r}")
    p = _check_p(p, oracle.comp.n)
    uniforms = rng if isinstance(rng, BufferedUniforms) else BufferedUniforms(as_rng(rng))
    budget = _budget(budget)
    state, steps = _coalesce(oracle, p, budget, uniforms, coupling, trace)
    if state is None:
        return CftpOutcome(BUDGET_EXCEEDED, None, steps, coalescence_steps=[steps])
    if uniforms() < p[state]:
        return CftpOutcome(ACCEPTED, state, steps, coalescence_steps=[steps])
    return CftpOutcome(REJECTED, None, steps, coalescence_steps=[steps])


def run_exact_sampler_with_learning(oracle, estimate=None, budget=None, *, rng, coupling="shared",
                                    learn_config=None, trace=None):
    """Repeat the parameterized engine with ``p = estimate`` until a state is accepted.

    With ``estimate=None`` the estimate is first learned from the same oracle
    at accuracy ``1/sqrt(n)``; those samples count against the budget too.
    """
    budget = _budget(budget)
    uniforms = rng if isinstance(rng, BufferedUniforms) else BufferedUniforms(as_rng(rng))
    used = 0
    if estimate is None:
        from .learning import learn_distribution

        before = oracle.samples_drawn
        estimate = learn_distribution(oracle, learn_config).estimate
        used = oracle.samples_drawn - before
        budget.consumed += used
    p = _check_p(estimate, oracle.comp.n)
    loops = 0
    per_run = []
    while True:
        out = run_parameterized_cftp(oracle, p, budget, rng=uniforms, coupling=coupling, trace=trace)
        loops += 1
        used += out.steps
        per_run.append(out.steps)
        if out.accepted:
            return CftpOutcome(ACCEPTED, out.state, used, loops, per_run)
        if out.budget_exceeded:
            return CftpOutcome(BUDGET_EXCEEDED, None, used, loops, per_run)


def acceptance_constant(target, p):
    """``A = sum_y D(y) / p(y)``; the acceptance probability is ``1 / A``."""
    probs = target.probs if isinstance(target, TargetDistribution) else np.asarray(target, dtype=float)
    p = p.probs if isinstance(p, TargetDistribution) else np.asarray(p, dtype=float)
    return float(np.sum(probs / p))


@dataclass
class CoalescenceTimes:
    steps: np.ndarray
    exceeded: np.ndarray

    @property
    def mean(self):
        return float(self.steps.mean())


def coalescence_time_samples(oracle_factory, engine="naive", trials=1, *, seed, p=None,
                             budget_cap=DEFAULT_BUDGET_CAP):
    """Samples consumed until coalescence over ``trials`` independent runs.

    ``oracle_factory(rng)`` builds a fresh oracle from a derived generator.
    ``engine`` is ``"naive"`` or ``"parameterized"`` (needs ``p``). Only the
    coalescence phase is counted, never the acceptance loop.
    """
    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if engine not in ("naive", "parameterized"):
        raise ValueError(f"unknown engine {engine!r}")
    steps = np.zeros(trials, dtype=np.int64)
    exceeded = np.zeros(trials, dtype=bool)
    for i in range(trials):
        oracle = oracle_factory(as_rng(seed, "coalescence-oracle", i))
        budget = SampleBudget(budget_cap)
        if engine == "naive":
            out = run_naive_cftp(oracle, budget)
        else:
            out = run_parameterized_cftp(oracle, p, budget, rng=as_rng(seed, "coalescence-aux", i))
        steps[i] = out.coalescence_steps[0]
        exceeded[i] = out.budget_exceeded
    return CoalescenceTimes(steps, exceeded)

