# %% [markdown]
# # Instances and the comparison oracle
#
# A target distribution D over n states is only reachable through a local
# oracle: draw a set S from Q, then a winner from D restricted to S. Here we
# build a few instances and check the oracle's empirical frequencies.

# %%
import numpy as np

from lsscftp import (
    LssOracle,
    make_bimodal_path_instance,
    make_clique_instance,
    make_random_instance,
    validate_instance,
)
from lsscftp.verify import chi_square_gof

target, comp = make_bimodal_path_instance(7)
print("bimodal path target:", np.round(target.probs, 4))
print("sets:", comp.sets())
print(validate_instance(target, comp, phi=2.0))

# %% [markdown]
# Random instances are rejection-sampled until the support is connected and
# every within-set probability ratio is at most phi.

# %%
t, c = make_random_instance(6, k=3, phi=2.0, seed=1)
print("random k=3 instance:", c.num_sets, "sets, valid =", validate_instance(t, c, 2.0).valid)

# %% [markdown]
# The oracle's joint law over (set, winner) is Q(S) D(w) / D(S).

# %%
t, c = make_clique_instance(4, weights=[4, 2, 1, 1])
oracle = LssOracle.simulated(t, c, seed=0)
s, w = oracle.draw_many(100_000)
pos = np.argmax(c.members[s] == w[:, None], axis=1)
counts = np.bincount(s * 2 + pos, minlength=2 * c.num_sets)
within = t.probs[c.members]
joint = (c.probs[:, None] * within / within.sum(axis=1, keepdims=True)).ravel()
print(chi_square_gof(counts, joint).to_dict()["p_value"], "<- GOF p-value of the oracle")
