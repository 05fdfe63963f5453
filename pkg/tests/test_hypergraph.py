import numpy as np
import pytest

from lsscftp.cftp import SampleBudget
from lsscftp.hypergraph import KSetEngineConfig, run_kset_cftp, run_kset_sampler_with_learning
from lsscftp.learning import LearnConfig, relative_error
from lsscftp.model import InstanceError, LssOracle, make_path_instance, make_random_instance
from lsscftp.rng import BufferedUniforms, make_rng
from lsscftp.spectral import build_transition_matrix, stationary_distribution
from lsscftp.verify import chi_square_gof


def test_config_checks():
    _, comp = make_path_instance(5, k=3)
    KSetEngineConfig(k=3).check(comp)
    with pytest.raises(InstanceError):
        KSetEngineConfig(k=2).check(comp)
    with pytest.raises(InstanceError):
        KSetEngineConfig(k=1).check(comp)
    with pytest.raises(InstanceError):
        KSetEngineConfig(k=3, max_k=2).check(comp)


def test_kset_cftp_respects_cap():
    target, comp = make_path_instance(5, k=4)
    oracle = LssOracle.simulated(target, comp, 0)
    with pytest.raises(InstanceError):
        run_kset_cftp(oracle, target, rng=1, max_k=3)
    assert run_kset_cftp(oracle, target, rng=1).status in ("accepted", "rejected")


def test_kset_stationary():
    target, comp = make_random_instance(5, 3, 2.0, seed=1)
    pi = stationary_distribution(build_transition_matrix(target, comp))
    assert np.max(np.abs(pi - target.probs)) <= 1e-9


def test_learns_once_and_reuses():
    target, comp = make_random_instance(6, 3, 2.0, seed=2)
    oracle = LssOracle.simulated(target, comp, 3)
    cfg = KSetEngineConfig(k=3, budget=SampleBudget(10**7))
    u = BufferedUniforms(make_rng(3, "aux"))
    first = run_kset_sampler_with_learning(oracle, cfg, rng=u)
    est = cfg.estimate
    assert est is not None and cfg.learn_samples > 0
    assert first.steps >= cfg.learn_samples
    assert max(relative_error(target, est)) < 1.0
    second = run_kset_sampler_with_learning(oracle, cfg, rng=u)
    assert cfg.estimate is est
    assert second.steps < cfg.learn_samples


def test_kset_output_law():
    target, comp = make_random_instance(5, 4, 2.0, seed=4)
    oracle = LssOracle.simulated(target, comp, 5)
    cfg = KSetEngineConfig(k=4, learn_config=LearnConfig(epsilon=0.4))
    u = BufferedUniforms(make_rng(5, "aux"))
    states = [run_kset_sampler_with_learning(oracle, cfg, rng=u).state for _ in range(8000)]
    assert chi_square_gof(np.bincount(states, minlength=5), target.probs).passed


def test_budget_template_is_per_call():
    target, comp = make_random_instance(5, 3, 2.0, seed=6)
    oracle = LssOracle.simulated(target, comp, 6)
    cfg = KSetEngineConfig(k=3, budget=SampleBudget(10), estimate=target)
    out = run_kset_sampler_with_learning(oracle, cfg, rng=1)
    assert out.budget_exceeded
    assert cfg.budget.consumed == 0
