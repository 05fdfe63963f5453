# %% [markdown]
# # Spectral quantities
#
# The comparison Laplacian's Fiedler value lambda(Q) governs both learning
# and mixing. The rescaled chain's absolute spectral gap stays within a
# constant of lambda(Q) when p = D, while the raw chain's gap can be tiny.

# %%
from lsscftp import make_bimodal_path_instance, make_random_instance, spectral_report
from lsscftp.learning import ComparisonCounts, empirical_laplacian
from lsscftp import LssOracle
from lsscftp.spectral import fiedler_eigenvalue

for n in (5, 9, 13):
    target, comp = make_bimodal_path_instance(n)
    raw = spectral_report(target, comp)
    scaled = spectral_report(target, comp, target)
    print(f"n={n:2d} lambda(Q)={raw.fiedler_eigenvalue:.4f} gap(M)={raw.absolute_spectral_gap:.5f} "
          f"gap(M~)={scaled.absolute_spectral_gap:.5f}")

# %% [markdown]
# The empirical Laplacian from m samples concentrates around the true one.

# %%
target, comp = make_random_instance(6, 2, 2.0, seed=5)
lam = spectral_report(target, comp).fiedler_eigenvalue
oracle = LssOracle.simulated(target, comp, seed=5)
for m in (100, 1000, 10_000):
    data = ComparisonCounts.from_draws(comp, *oracle.draw_many(m))
    print(m, fiedler_eigenvalue(empirical_laplacian(data, comp.n)) / lam)
