"""Problem instances and the local sampling oracle.

A problem instance is a target distribution ``D`` over ``{0, ..., n-1}``
together with a distribution ``Q`` over comparison sets of a fixed size
``k``. The oracle returns ``(S, x)`` with ``S ~ Q`` and ``x ~ D`` restricted
to ``S``. States are 0-based everywhere in code and in files.
"""

from dataclasses import dataclass, field
from itertools import combinations
import math
from typing import NamedTuple

import numpy as np

from .rng import as_rng

__all__ = [
    "NORMALIZATION_TOL",
    "InstanceError",
    "OracleExhausted",
    "TargetDistribution",
    "ComparisonDistribution",
    "LssSample",
    "LssOracle",
    "ValidationReport",
    "validate_instance",
    "softmax_from_params",
    "make_bimodal_path_instance",
    "make_path_instance",
    "make_clique_instance",
    "make_random_instance",
]

NORMALIZATION_TOL = 1e-12


class InstanceError(ValueError):
    """Malformed target, comparison distribution or sample."""


class OracleExhausted(RuntimeError):
    """A replayed sample stream ran out."""

    def __init__(self, consumed):
        super().__init__(f"replay stream exhausted after {consumed} samples")
        self.consumed = consumed


def _normalize_exact(values, what):
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise InstanceError(f"{what} must be a non-empty 1-d array")
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise InstanceError(f"{what} must be strictly positive and finite")
    total = values.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise InstanceError(f"{what} sums to {total!r}, not 1 within {NORMALIZATION_TOL}")
    return values / total


@dataclass(frozen=True, eq=False)
class TargetDistribution:
    """Strictly positive distribution over ``n`` states, kept in linear and log space."""

    probs: np.ndarray
    log_params: np.ndarray = field(repr=False)

    def __init__(self, probs):
        p = _normalize_exact(probs, "target probabilities")
        p.setflags(write=False)
        z = np.log(p)
        z.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "log_params", z)

    @classmethod
    def from_weights(cls, weights):
        """Normalize arbitrary positive weights."""
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise InstanceError("weights must be positive and finite")
        return cls(w / w.sum())

    @property
    def n(self):
        return self.probs.size

    def __eq__(self, other):
        return isinstance(other, TargetDistribution) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


def softmax_from_params(z):
    """Distribution with ``probs[x] = exp(z[x]) / sum_y exp(z[y])``."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0 or not np.all(np.isfinite(z)):
        raise InstanceError("parameters must be a finite 1-d array")
    e = np.exp(z - z.max())
    return TargetDistribution(e / e.sum())


@dataclass(frozen=True, eq=False)
class ComparisonDistribution:
    """Distribution over comparison sets, all of the same size ``k``.

    ``members`` is an ``(m, k)`` int array with each row sorted; ``probs``
    has length ``m``.
    """

    n: int
    members: np.ndarray
    probs: np.ndarray

    def __init__(self, n, sets, probs=None):
        n = int(n)
        if n < 1:
            raise InstanceError("n must be positive")
        rows = [tuple(sorted(int(x) for x in s)) for s in sets]
        if not rows:
            if n == 1:
                members = np.zeros((0, 1), dtype=np.int64)
                object.__setattr__(self, "n", n)
                object.__setattr__(self, "members", members)
                object.__setattr__(self, "probs", np.zeros(0))
                return
            raise InstanceError("at least one comparison set is required")
        k = len(rows[0])
        if k < 2:
            raise InstanceError("comparison sets need at least 2 members")
        for r in rows:
            if len(r) != k:
                raise InstanceError("all comparison sets must have the same size")
            if len(set(r)) != k:
                raise InstanceError(f"set {r} has repeated members")
            if r[0] < 0 or r[-1] >= n:
                raise InstanceError(f"set {r} has members outside [0, {n})")
        if len(set(rows)) != len(rows):
            raise InstanceError("duplicate comparison sets")
        if probs is None:
            probs = np.full(len(rows), 1.0 / len(rows))
        p = _normalize_exact(probs, "set probabilities")
        if p.size != len(rows):
            raise InstanceError("one probability per set is required")
        members = np.array(rows, dtype=np.int64)
        members.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "probs", p)

    @property
    def k(self):
        return self.members.shape[1]

    @property
    def num_sets(self):
        return self.members.shape[0]

    def sets(self):
        return [tuple(r) for r in self.members.tolist()]

    def set_index(self):
        """Map from sorted member tuple to row index."""
        return {s: i for i, s in enumerate(self.sets())}

    def supported_pairs(self):
        """Sorted list of unordered pairs sharing at least one supported set."""
        pairs = set()
        for s in self.sets():
            pairs.update(combinations(s, 2))
        return sorted(pairs)

    def is_connected(self):
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for s in self.sets():
            r0 = find(s[0])
            for x in s[1:]:
                parent[find(x)] = r0
        return len({find(x) for x in range(self.n)}) == 1


class LssSample(NamedTuple):
    members: tuple
    winner: int


@dataclass
class ValidationReport:
    connected: bool
    ratios_ok: bool
    max_ratio: float
    phi: float
    violations: list

    @property
    def valid(self):
        return self.connected and self.ratios_ok


def validate_instance(target, comp, phi):
    """Check connectivity of the comparison support and the ratio bound ``phi``.

    ``violations`` lists ``(set, ratio)`` for every supported set whose largest
    within-set probability ratio exceeds ``phi``.
    """
    if not isinstance(target, TargetDistribution):
        target = TargetDistribution(target)
    if target.n != comp.n:
        raise InstanceError(f"target has {target.n} states but comparisons cover {comp.n}")
    phi = float(phi)
    if not phi > 1:
        raise InstanceError("phi must exceed 1")
    violations = []
    worst = 1.0
    for s in comp.sets():
        vals = target.probs[list(s)]
        ratio = float(vals.max() / vals.min())
        worst = max(worst, ratio)
        # relative slack so that exact ratios like 2.0 survive normalization
        if ratio > phi * (1 + 1e-12):
            violations.append((s, ratio))
    return ValidationReport(
        connected=comp.is_connected(),
        ratios_ok=not violations,
        max_ratio=worst,
        phi=phi,
        violations=violations,
    )


class LssOracle:
    """Source of comparison samples ``(S, winner)``.

    Build with :meth:`simulated` (draws from ``(Q, D)`` with a seeded stream)
    or :meth:`replay` (serves a recorded stream). ``samples_drawn`` counts
    every sample handed out.
    """

    BLOCK = 8192

    def __init__(self, comp, target=None, rng=None, set_idx=None, winners=None):
        self.comp = comp
        self.target = target
        self.samples_drawn = 0
        self._members = comp.sets()
        self._rng = rng
        if rng is not None and comp.num_sets:
            cum_q = np.cumsum(comp.probs)
            cum_q[-1] = 1.0
            self._cum_q = cum_q
            within = target.probs[comp.members]
            cond = np.cumsum(within / within.sum(axis=1, keepdims=True), axis=1)
            cond[:, -1] = 1.0
            self._cond = cond
        if rng is not None:
            self._buf_s = np.zeros(0, dtype=np.int64)
            self._buf_w = np.zeros(0, dtype=np.int64)
        else:
            self._buf_s = np.asarray(set_idx, dtype=np.int64)
            self._buf_w = np.asarray(winners, dtype=np.int64)
        self._list_s = self._buf_s.tolist()
        self._list_w = self._buf_w.tolist()
        self._pos = 0

    @classmethod
    def simulated(cls, target, comp, seed):
        if target.n != comp.n:
            raise InstanceError("target and comparison distribution disagree on n")
        if comp.num_sets == 0 and comp.n > 1:
            raise InstanceError("cannot simulate comparisons without any sets")
        return cls(comp, target=target, rng=as_rng(seed))

    @classmethod
    def replay(cls, comp, samples):
        """Replay ``samples``: an iterable of ``LssSample`` or ``(members, winner)``."""
        index = comp.set_index()
        s_idx, wins = [], []
        for row, (members, winner) in enumerate(samples):
            key = tuple(sorted(int(x) for x in members))
            if key not in index:
                raise InstanceError(f"sample {row}: set {key} is not in the support")
            if int(winner) not in key:
                raise InstanceError(f"sample {row}: winner {winner} not in {key}")
            s_idx.append(index[key])
            wins.append(int(winner))
        return cls(comp, set_idx=s_idx, winners=wins)

    @property
    def is_replay(self):
        return self._rng is None

    @property
    def remaining(self):
        """Samples left in a replay stream (``None`` when simulated)."""
        if self._rng is not None:
            return None
        return len(self._list_s) - self._pos

    def _generate(self, count):
        if not self.comp.num_sets:
            raise InstanceError("a single-state instance has no comparisons to draw")
        u_set = self._rng.random(count)
        u_win = self._rng.random(count)
        s = np.minimum(np.searchsorted(self._cum_q, u_set, side="right"), self.comp.num_sets - 1)
        pos = np.minimum((self._cond[s] <= u_win[:, None]).sum(axis=1), self.comp.k - 1)
        return s, self.comp.members[s, pos]

    def _refill(self):
        if self._rng is None:
            raise OracleExhausted(self.samples_drawn)
        self._buf_s, self._buf_w = self._generate(self.BLOCK)
        self._list_s = self._buf_s.tolist()
        self._list_w = self._buf_w.tolist()
        self._pos = 0

    def next_raw(self):
        """Fast path: ``(set_index, winner)`` as Python ints."""
        if self._pos == len(self._list_s):
            self._refill()
        i = self._pos
        self._pos = i + 1
        self.samples_drawn += 1
        return self._list_s[i], self._list_w[i]

    def draw(self):
        s, w = self.next_raw()
        return LssSample(self._members[s], w)

    def draw_many(self, count):
        """``count`` samples as ``(set_index, winner)`` int arrays."""
        count = int(count)
        parts_s, parts_w = [], []
        need = count
        while need > 0:
            avail = len(self._list_s) - self._pos
            if avail == 0:
                if self._rng is None:
                    self.samples_drawn += count - need
                    raise OracleExhausted(self.samples_drawn)
                self._refill()
                continue
            take = min(avail, need)
            parts_s.append(self._buf_s[self._pos:self._pos + take])
            parts_w.append(self._buf_w[self._pos:self._pos + take])
            self._pos += take
            need -= take
        self.samples_drawn += count
        if not parts_s:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return np.concatenate(parts_s), np.concatenate(parts_w)

    def draw_samples(self, count):
        s, w = self.draw_many(count)
        return [LssSample(self._members[i], x) for i, x in zip(s.tolist(), w.tolist())]


# ---------------------------------------------------------------------------
# instance families


def make_bimodal_path_instance(n):
    """Path comparisons over a target whose mass halves toward the middle.

    Weights are ``2^-1, 2^-2, ..., 2^-(n+1)/2, ..., 2^-2, 2^-1`` and every
    path edge has probability ``1/(n-1)``. Adjacent ratios are exactly 2.
    """
    n = int(n)
    if n < 3 or n % 2 == 0:
        raise InstanceError("bimodal path needs an odd n >= 3")
    half = (n + 1) // 2
    exps = [min(i + 1, n - i) for i in range(n)]
    assert max(exps) == half
    weights = np.array([2.0 ** -e for e in exps])
    comp = ComparisonDistribution(n, [(i, i + 1) for i in range(n - 1)])
    return TargetDistribution.from_weights(weights), comp


def make_path_instance(n, k=2, weights=None):
    """Sliding-window sets ``{i, ..., i+k-1}`` with uniform ``Q``; uniform target by default."""
    n, k = int(n), int(k)
    if n == 1:
        return TargetDistribution([1.0]), ComparisonDistribution(1, [])
    if not 2 <= k <= n:
        raise InstanceError("need 2 <= k <= n")
    comp = ComparisonDistribution(n, [tuple(range(i, i + k)) for i in range(n - k + 1)])
    target = TargetDistribution(np.full(n, 1.0 / n)) if weights is None else TargetDistribution.from_weights(weights)
    return target, comp


def make_clique_instance(n, k=2, weights=None):
    """All ``k``-subsets with uniform ``Q``; uniform target by default."""
    n, k = int(n), int(k)
    if n == 1:
        return TargetDistribution([1.0]), ComparisonDistribution(1, [])
    if not 2 <= k <= n:
        raise InstanceError("need 2 <= k <= n")
    comp = ComparisonDistribution(n, list(combinations(range(n), k)))
    target = TargetDistribution(np.full(n, 1.0 / n)) if weights is None else TargetDistribution.from_weights(weights)
    return target, comp


def make_random_instance(n, k=2, phi=2.0, seed=0, num_sets=None, max_tries=10_000):
    """Random connected instance satisfying the ratio bound ``phi``.

    Draws random ``k``-sets with random probabilities and log-weights spread
    over ``[0, 1.5 log phi]``, rejecting draws that are disconnected or break
    the ratio bound.
    """
    n, k = int(n), int(k)
    if n < 2 or not 2 <= k <= n:
        raise InstanceError("need n >= 2 and 2 <= k <= n")
    if phi <= 1:
        raise InstanceError("phi must exceed 1")
    rng = seed if isinstance(seed, np.random.Generator) else as_rng(seed, "random-instance", n, k)
    total = math.comb(n, k)
    m = num_sets if num_sets is not None else min(total, n + n // 2)
    m = max(1, min(int(m), total))
    for _ in range(max_tries):
        chosen = set()
        while len(chosen) < m:
            chosen.add(tuple(sorted(rng.choice(n, size=k, replace=False).tolist())))
        sets = sorted(chosen)
        q = rng.uniform(0.5, 1.5, size=len(sets))
        comp = ComparisonDistribution(n, sets, q / q.sum())
        if not comp.is_connected():
            continue
        z = rng.uniform(0.0, 1.5 * math.log(phi), size=n)
        target = TargetDistribution.from_weights(np.exp(z - z.max()))
        if validate_instance(target, comp, phi).valid:
            return target, comp
    raise InstanceError(f"no valid random instance found for n={n}, k={k}, phi={phi}")
