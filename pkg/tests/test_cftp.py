import io

import numpy as np
import pytest

from lsscftp.cftp import (
    _coalesce,
    GrandCouplingMap,
    SampleBudget,
    acceptance_constant,
    cftp_extend_one_step,
    coalescence_time_samples,
    run_exact_sampler_with_learning,
    run_naive_cftp,
    run_parameterized_cftp,
)
from lsscftp.model import (
    ComparisonDistribution,
    InstanceError,
    LssOracle,
    LssSample,
    TargetDistribution,
    make_bimodal_path_instance,
    make_path_instance,
    make_random_instance,
)
from lsscftp.rng import BufferedUniforms, make_rng
from lsscftp.verify import chi_square_gof


def gof(states, target):
    return chi_square_gof(np.bincount(states, minlength=target.n), target.probs)


def test_extend_one_step_by_hand():
    m0 = GrandCouplingMap.identity(3)
    m1 = cftp_extend_one_step(m0, LssSample((0, 1), 1), 0.5)
    assert m1.images.tolist() == [1, 1, 2]
    assert m0.images.tolist() == [0, 1, 2]
    # one step further back: state 1 loses to 2, then follows F_{t+1}(2) = 2
    m2 = cftp_extend_one_step(m1, LssSample((1, 2), 2), 0.5)
    assert m2.images.tolist() == [1, 2, 2]
    assert (m2.t, m2.samples_consumed) == (-2, 2)
    assert not m2.coalesced
    m3 = cftp_extend_one_step(m2, LssSample((0, 1), 1), 0.5)
    assert m3.images.tolist() == [2, 2, 2] and m3.coalesced


def test_extend_one_step_thinning():
    p = np.array([0.2, 0.4, 0.4])
    m = GrandCouplingMap.identity(3)
    # loser 0 against winner 1 moves iff u < 0.5
    assert cftp_extend_one_step(m, ((0, 1), 1), 0.49, p).images.tolist() == [1, 1, 2]
    assert cftp_extend_one_step(m, ((0, 1), 1), 0.5, p).images.tolist() == [0, 1, 2]
    # the ratio is capped at one: a heavier loser always moves
    assert cftp_extend_one_step(m, ((0, 1), 0), 0.99, p).images.tolist() == [0, 0, 2]


def test_extend_one_step_rejects_malformed():
    m = GrandCouplingMap.identity(3)
    with pytest.raises(InstanceError):
        cftp_extend_one_step(m, ((0, 1), 2), 0.1)
    with pytest.raises(InstanceError):
        cftp_extend_one_step(m, ((0, 5), 0), 0.1)
    with pytest.raises(ValueError):
        cftp_extend_one_step(m, ((0, 1), 0), 1.0)
    with pytest.raises(InstanceError):
        cftp_extend_one_step(m, ((0, 1), 0), 0.1, [0.5, 0.5, 1.5])


def reference_run(samples, n, uniforms=None, p=None):
    """Coalescence via the functional one-step map over an explicit stream."""
    m = GrandCouplingMap.identity(n)
    for sample in samples:
        u = uniforms() if p is not None else 0.0
        m = cftp_extend_one_step(m, sample, u, p)
        if m.coalesced:
            return int(m.images[0]), m.samples_consumed
    return None, m.samples_consumed


@pytest.mark.parametrize("seed", range(5))
def test_engine_agrees_with_reference_naive(seed):
    target, comp = make_random_instance(6, 3, 2.0, seed=seed)
    stream = LssOracle.simulated(target, comp, seed).draw_samples(20_000)
    state, steps = reference_run(stream, comp.n)
    out = run_naive_cftp(LssOracle.replay(comp, stream))
    assert (out.state, out.steps) == (state, steps)


@pytest.mark.parametrize("seed", range(5))
def test_engine_agrees_with_reference_parameterized(seed):
    target, comp = make_random_instance(6, 2, 2.0, seed=seed)
    p = make_rng(seed, "p").uniform(0.2, 1.0, 6)
    stream = LssOracle.simulated(target, comp, seed).draw_samples(50_000)
    ref_u = BufferedUniforms(make_rng(seed, "u"))
    state, steps = reference_run(stream, comp.n, ref_u, p)
    accept = ref_u() < p[state]
    out = run_parameterized_cftp(LssOracle.replay(comp, stream), p, rng=BufferedUniforms(make_rng(seed, "u")))
    assert out.steps == steps
    assert out.accepted == accept
    if accept:
        assert out.state == state


def test_n2_coalesces_in_one_step():
    target = TargetDistribution([0.3, 0.7])
    comp = ComparisonDistribution(2, [(0, 1)])
    oracle = LssOracle.simulated(target, comp, 1)
    outs = [run_naive_cftp(oracle) for _ in range(100)]
    assert all(o.steps == 1 for o in outs)


def test_single_state():
    target = TargetDistribution([1.0])
    comp = ComparisonDistribution(1, [])
    oracle = LssOracle.simulated(target, comp, 0)
    out = run_naive_cftp(oracle)
    assert (out.state, out.steps) == (0, 0)
    out = run_exact_sampler_with_learning(oracle, rng=0)
    assert out.accepted and out.state == 0


def test_naive_output_law_three_states():
    target = TargetDistribution([0.5, 0.25, 0.25])
    comp = ComparisonDistribution(3, [(0, 1), (1, 2)])
    oracle = LssOracle.simulated(target, comp, 11)
    states = [run_naive_cftp(oracle).state for _ in range(20_000)]
    assert gof(states, target).passed


def test_naive_output_law_k3():
    target, comp = make_random_instance(6, 3, 2.0, seed=4)
    oracle = LssOracle.simulated(target, comp, 12)
    states = [run_naive_cftp(oracle).state for _ in range(10_000)]
    assert gof(states, target).passed


@pytest.mark.parametrize("coupling", ["shared", "independent"])
def test_parameterized_law_with_poor_estimate(coupling):
    target, comp = make_path_instance(5, weights=[1, 2, 1, 0.5, 1])
    p = np.array([0.9, 0.3, 0.6, 0.6, 0.2])
    oracle = LssOracle.simulated(target, comp, 13)
    u = BufferedUniforms(make_rng(13, "aux"))
    states = [run_exact_sampler_with_learning(oracle, p, rng=u, coupling=coupling).state for _ in range(10_000)]
    assert gof(states, target).passed


def test_coalesced_state_follows_d_over_p():
    # before the acceptance coin the coalesced state has law proportional to D/p
    target, comp = make_path_instance(4, weights=[1, 2, 1.5, 0.75])
    p = np.array([0.3, 0.9, 0.5, 0.8])
    oracle = LssOracle.simulated(target, comp, 14)
    u = BufferedUniforms(make_rng(14, "aux"))
    states = [_coalesce(oracle, p, SampleBudget(), u, "shared", None)[0] for _ in range(10_000)]
    want = target.probs / p
    assert chi_square_gof(np.bincount(states, minlength=4), want / want.sum()).passed


def test_acceptance_rate_closed_form():
    target, comp = make_path_instance(4, weights=[1, 2, 1.5, 0.75])
    assert acceptance_constant(target, target) == pytest.approx(4.0)
    p = target.probs.copy()
    p[0] /= 2
    assert acceptance_constant(target, p) == pytest.approx(5.0)
    oracle = LssOracle.simulated(target, comp, 15)
    u = BufferedUniforms(make_rng(15, "aux"))
    acc = np.mean([run_parameterized_cftp(oracle, p, rng=u).accepted for _ in range(4000)])
    sigma = np.sqrt(0.2 * 0.8 / 4000)
    assert abs(acc - 0.2) <= 3 * sigma


def test_budget_exceeded():
    target, comp = make_bimodal_path_instance(9)
    oracle = LssOracle.simulated(target, comp, 16)
    out = run_naive_cftp(oracle, SampleBudget(5))
    assert out.budget_exceeded and out.state is None and out.steps == 5
    out = run_exact_sampler_with_learning(oracle, target, SampleBudget(5), rng=1)
    assert out.budget_exceeded
    with pytest.raises(ValueError):
        SampleBudget(0)


def test_trace_format():
    target, comp = make_path_instance(3)
    oracle = LssOracle.simulated(target, comp, 17)
    buf = io.StringIO()
    out = run_parameterized_cftp(oracle, target, rng=3, trace=buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == out.steps
    t, members, w, u, c = lines[0].split(",")
    assert t == "-1" and int(w) in map(int, members.split(";")) and 0 <= float(u) < 1
    assert lines[-1].endswith(",1") and all(x.endswith(",0") for x in lines[:-1])
    buf = io.StringIO()
    run_naive_cftp(oracle, trace=buf)
    assert buf.getvalue().splitlines()[0].split(",")[3] == ""


def test_learning_sampler_charges_budget():
    target, comp = make_path_instance(4, weights=[1, 2, 1.5, 0.75])
    oracle = LssOracle.simulated(target, comp, 18)
    out = run_exact_sampler_with_learning(oracle, rng=4)
    assert out.accepted
    assert out.steps == oracle.samples_drawn
    assert out.steps > sum(out.coalescence_steps)


def test_coalescence_times():
    target, comp = make_bimodal_path_instance(5)
    res = coalescence_time_samples(lambda g: LssOracle.simulated(target, comp, g), trials=20, seed=1)
    again = coalescence_time_samples(lambda g: LssOracle.simulated(target, comp, g), trials=20, seed=1)
    assert np.array_equal(res.steps, again.steps)
    assert not res.exceeded.any() and res.mean > 1
    param = coalescence_time_samples(lambda g: LssOracle.simulated(target, comp, g), "parameterized",
                                     trials=20, seed=1, p=target.probs)
    assert param.steps.min() >= 1


def test_extension_after_coalescence_is_stable():
    target, comp = make_random_instance(5, 2, 2.0, seed=8)
    oracle = LssOracle.simulated(target, comp, 8)
    rng = make_rng(8, "aux")
    m = GrandCouplingMap.identity(5)
    while not m.coalesced:
        m = cftp_extend_one_step(m, oracle.draw(), rng.random(), target.probs)
    state = m.images[0]
    for _ in range(10):
        m = cftp_extend_one_step(m, oracle.draw(), rng.random(), target.probs)
        assert m.coalesced and m.images[0] == state


@pytest.mark.parametrize("scaled", [False, True])
def test_one_step_marginals_match_matrix(scaled):
    from lsscftp.spectral import build_rescaled_matrix, build_transition_matrix

    target, comp = make_random_instance(4, 3, 2.0, seed=9)
    p = np.array([0.9, 0.2, 0.5, 0.7]) if scaled else None
    M = build_rescaled_matrix(target, comp, p) if scaled else build_transition_matrix(target, comp)
    oracle = LssOracle.simulated(target, comp, 9)
    rng = make_rng(9, "aux")
    steps = 100_000
    hits = np.zeros((4, 4))
    ident = GrandCouplingMap.identity(4)
    for _ in range(steps):
        img = cftp_extend_one_step(ident, oracle.draw(), rng.random(), p).images
        hits[np.arange(4), img] += 1
    freq = hits / steps
    sigma = np.sqrt(M * (1 - M) / steps)
    assert np.all(np.abs(freq - M) <= 3 * sigma + 1e-12)


def test_relabeling_invariance():
    target, comp = make_random_instance(5, 2, 2.0, seed=10)
    perm = np.array([3, 0, 4, 1, 2])
    t2 = TargetDistribution(target.probs[np.argsort(perm)])
    c2 = ComparisonDistribution(5, [tuple(int(perm[x]) for x in s) for s in comp.sets()], comp.probs)
    o2 = LssOracle.simulated(t2, c2, 10)
    states = np.array([run_naive_cftp(o2).state for _ in range(10_000)])
    back = np.argsort(perm)[states]
    assert gof(back, target).passed


def test_all_ones_never_rejects():
    target, comp = make_path_instance(5)
    oracle = LssOracle.simulated(target, comp, 11)
    u = BufferedUniforms(make_rng(11, "aux"))
    assert all(run_parameterized_cftp(oracle, np.ones(5), rng=u).accepted for _ in range(500))
