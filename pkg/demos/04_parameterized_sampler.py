# %% [markdown]
# # Exact sampling with a learned estimate
#
# Thinning each move x -> w by min(p(x)/p(w), 1) turns the chain into one
# whose stationary law is proportional to D/p. With p close to D that law is
# nearly uniform and mixes fast. Accepting the coalesced state y with
# probability p(y) brings the output back to exactly D; the acceptance rate
# is 1/A with A = sum D/p.

# %%
import numpy as np

from lsscftp import (
    LssOracle,
    acceptance_constant,
    learn_distribution,
    make_bimodal_path_instance,
    run_exact_sampler_with_learning,
    run_parameterized_cftp,
)
from lsscftp.rng import BufferedUniforms, make_rng
from lsscftp.spectral import build_rescaled_matrix, stationary_distribution
from lsscftp.verify import chi_square_gof, coalescence_benchmark

target, comp = make_bimodal_path_instance(7)
print("rescaled stationary with p = D:", np.round(stationary_distribution(build_rescaled_matrix(target, comp, target)), 6))

# %% [markdown]
# Learn the estimate from the same oracle, then sample.

# %%
oracle = LssOracle.simulated(target, comp, seed=3)
u = BufferedUniforms(make_rng(3, "aux"))
first = run_exact_sampler_with_learning(oracle, rng=u)
print("first sample used", first.steps, "oracle calls (learning included)")

est = learn_distribution(oracle).estimate
states = [run_exact_sampler_with_learning(oracle, est, rng=u).state for _ in range(5000)]
print("GOF p-value:", chi_square_gof(np.bincount(states, minlength=7), target.probs).p_value)

# %% [markdown]
# Acceptance rate against the closed form.

# %%
p = target.probs.copy()
p[0] /= 2
acc = np.mean([run_parameterized_cftp(oracle, p, rng=u).accepted for _ in range(4000)])
print("empirical", acc, "closed form", 1 / acceptance_constant(target, p))

# %% [markdown]
# Naive vs parameterized coalescence on growing bimodal paths. The ratio
# grows with n; at these small sizes it is still modest.

# %%
rep = coalescence_benchmark([7, 9, 11, 13], 30, seed=4)
print(rep.to_table())
print({n: round(r, 2) for n, r in rep.ratios().items()})
