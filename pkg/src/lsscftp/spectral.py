"""Laplacians, transition matrices and their spectra.

Everything here is dense; the supports of interest have at most a few
hundred states.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .model import InstanceError, TargetDistribution

__all__ = [
    "SpectralError",
    "SpectralReport",
    "build_laplacian",
    "build_transition_matrix",
    "build_rescaled_matrix",
    "fiedler_eigenvalue",
    "absolute_spectral_gap",
    "stationary_distribution",
    "is_ergodic",
    "spectral_report",
]


class SpectralError(ValueError):
    """Input matrix does not meet the requirements of a spectral routine."""


@dataclass
class SpectralReport:
    fiedler_eigenvalue: float
    absolute_spectral_gap: float
    stationary: np.ndarray

    def to_dict(self):
        return {
            "fiedler_eigenvalue": self.fiedler_eigenvalue,
            "absolute_spectral_gap": self.absolute_spectral_gap,
            "stationary": self.stationary.tolist(),
        }


def build_laplacian(comp):
    """Weighted Laplacian of the comparison (hyper)graph.

    Off-diagonal ``(x, y)`` is minus the total probability of sets holding
    both; the diagonal is ``(k - 1)`` times the probability of sets holding
    ``x``. For ``k = 2`` this is the usual edge-weighted graph Laplacian.
    """
    n, k = comp.n, comp.k
    L = np.zeros((n, n))
    for members, q in zip(comp.members, comp.probs):
        idx = np.asarray(members)
        L[np.ix_(idx, idx)] -= q
        L[idx, idx] += q * k
    return L


def _scaled(target, comp, scale):
    d = target.probs
    n = comp.n
    P = np.zeros((n, n))
    for members, q in zip(comp.members, comp.probs):
        idx = np.asarray(members)
        mass = d[idx].sum()
        # row x, column y: move from x to winner y
        block = q * np.broadcast_to(d[idx] / mass, (idx.size, idx.size))
        if scale is not None:
            block = block * np.minimum(scale[idx][:, None] / scale[idx][None, :], 1.0)
        P[np.ix_(idx, idx)] += block
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return P


def build_transition_matrix(target, comp):
    """Chain that moves ``x -> y`` when a set holding both is drawn and ``y`` wins."""
    if target.n != comp.n:
        raise InstanceError("target and comparison distribution disagree on n")
    return _scaled(target, comp, None)


def build_rescaled_matrix(target, comp, estimate):
    """Transition matrix with each move ``x -> w`` thinned by ``min(p(x)/p(w), 1)``.

    ``estimate`` is a :class:`TargetDistribution` or any positive vector ``p``.
    """
    if target.n != comp.n:
        raise InstanceError("target and comparison distribution disagree on n")
    p = estimate.probs if isinstance(estimate, TargetDistribution) else np.asarray(estimate, dtype=float)
    if p.shape != (comp.n,):
        raise InstanceError("estimate has the wrong length")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise InstanceError("estimate must be strictly positive")
    return _scaled(target, comp, p)


def fiedler_eigenvalue(L):
    """Second-smallest eigenvalue of a Laplacian (0 when the graph is disconnected)."""
    L = np.asarray(L, dtype=float)
    if L.shape[0] < 2:
        return 0.0
    w = np.linalg.eigvalsh(L)
    scale = max(1.0, abs(w[-1]))
    lam = float(w[1])
    return 0.0 if lam < 1e-12 * scale else lam


def _check_stochastic(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise SpectralError("transition matrix must be square")
    if np.any(M < -1e-15) or np.any(np.abs(M.sum(axis=1) - 1.0) > 1e-12):
        raise SpectralError("matrix is not row-stochastic")
    return M


def absolute_spectral_gap(M, pi):
    """``1 - max(|lambda_2|, |lambda_n|)`` for a chain reversible w.r.t. ``pi``."""
    M = _check_stochastic(M)
    pi = np.asarray(pi, dtype=float)
    flow = pi[:, None] * M
    if np.max(np.abs(flow - flow.T)) > 1e-9:
        raise SpectralError("chain is not reversible with respect to pi")
    if M.shape[0] == 1:
        return 1.0
    root = np.sqrt(pi)
    S = root[:, None] * M / root[None, :]
    S = 0.5 * (S + S.T)
    w = np.linalg.eigvalsh(S)
    # w[-1] is the unit eigenvalue
    return float(1.0 - max(abs(w[-2]), abs(w[0])))


def is_ergodic(M):
    M = np.asarray(M, dtype=float)
    if M.shape[0] == 1:
        return True
    ncomp, _ = connected_components(M > 0, directed=True, connection="strong")
    return ncomp == 1 and bool(np.any(np.diag(M) > 0))


def stationary_distribution(M, tol=1e-12, max_iter=1_000_000):
    """Left unit eigenvector of an ergodic chain, by power iteration.

    Iterates the lazy chain ``(I + M) / 2`` (same stationary law, spectrum in
    ``[0, 1]``) from the uniform vector until ``||v M - v||_inf <= tol``.
    """
    M = _check_stochastic(M)
    if not is_ergodic(M):
        raise SpectralError("chain is not ergodic")
    n = M.shape[0]
    lazy = 0.5 * (np.eye(n) + M)
    v = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        if np.max(np.abs(v @ M - v)) <= tol:
            return v / v.sum()
        v = v @ lazy
        v /= v.sum()
    raise SpectralError(f"power iteration did not converge in {max_iter} iterations")


def spectral_report(target, comp, estimate=None):
    """Fiedler value of ``Q`` plus gap and stationary law of the (rescaled) chain."""
    lam = fiedler_eigenvalue(build_laplacian(comp))
    if estimate is None:
        M = build_transition_matrix(target, comp)
    else:
        M = build_rescaled_matrix(target, comp, estimate)
    pi = stationary_distribution(M)
    return SpectralReport(lam, absolute_spectral_gap(M, pi), pi)
