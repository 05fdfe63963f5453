# %% [markdown]
# # Coupling from the past on the comparison chain
#
# The chain x -> winner of a drawn set containing x has stationary law D.
# Running the grand coupling backwards until every start state agrees gives
# an exact D-sample. On the bimodal path the two ends sit in separate basins,
# so coalescence takes a long time.

# %%
import numpy as np

from lsscftp import LssOracle, make_bimodal_path_instance, run_naive_cftp
from lsscftp.spectral import build_transition_matrix, stationary_distribution
from lsscftp.verify import chi_square_gof

target, comp = make_bimodal_path_instance(7)
M = build_transition_matrix(target, comp)
print("max |pi - D| =", np.abs(stationary_distribution(M) - target.probs).max())

# %%
oracle = LssOracle.simulated(target, comp, seed=2)
outs = [run_naive_cftp(oracle) for _ in range(5000)]
states = np.array([o.state for o in outs])
steps = np.array([o.steps for o in outs])
print("mean coalescence steps:", steps.mean(), "max:", steps.max())
print("GOF p-value:", chi_square_gof(np.bincount(states, minlength=7), target.probs).p_value)

# %% [markdown]
# Coalescence time grows quickly with n on this family.

# %%
for n in (5, 7, 9, 11):
    t, c = make_bimodal_path_instance(n)
    o = LssOracle.simulated(t, c, seed=n)
    print(n, np.mean([run_naive_cftp(o).steps for _ in range(200)]))
