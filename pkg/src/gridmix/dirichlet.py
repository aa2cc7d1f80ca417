"""Exact and Monte Carlo marginal likelihoods under a Dirichlet weight prior.

For a fixed support, placing a Dirichlet prior (precision ``alpha0``, base
weights ``f0``) on the mixing weights gives a marginal likelihood that can
be computed exactly by summing over component allocations, or estimated
unbiasedly by sequential imputation.  These serve as ground truth for the
recursive approximation: with ``alpha0 = 1/w_1 - 1`` the one-observation
posterior mean coincides exactly with the first recursive update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .kernels import KernelSpec, log_kernel_matrix, validate_observations, _support_params
from .recursion import DEFAULT_GAMMA, DegenerateMixtureError

__all__ = [
    "DirichletSpec",
    "default_alpha0",
    "exact_marginal",
    "exact_posterior_mean",
    "sequential_imputation_marginal",
    "polya_one_step",
    "pr_posterior_l1_gap",
]

MAX_EXACT_N = 10
MAX_EXACT_SUPPORT = 4


def default_alpha0(gamma: float = DEFAULT_GAMMA) -> float:
    """Precision matching the first recursive gain: ``1/w_1 - 1 = 2**gamma - 1``."""
    return 2.0**gamma - 1.0


@dataclass(frozen=True)
class DirichletSpec:
    """Dirichlet prior on the mixing weights of a fixed support."""

    alpha0: float
    f0: tuple[float, ...]

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be > 0")
        f0 = tuple(float(v) for v in self.f0)
        if len(f0) == 0 or any(v <= 0 for v in f0):
            raise ValueError("f0 must be a nonempty strictly positive vector")
        if abs(sum(f0) - 1.0) > 1e-8:
            raise ValueError("f0 must sum to 1")
        object.__setattr__(self, "f0", f0)

    @classmethod
    def uniform(cls, size: int, alpha0: float | None = None) -> "DirichletSpec":
        return cls(default_alpha0() if alpha0 is None else alpha0, (1.0 / size,) * size)


def _check_spec(dspec: DirichletSpec, support: Sequence) -> np.ndarray:
    f0 = np.asarray(dspec.f0, dtype=float)
    if f0.size != len(support):
        raise ValueError(f"f0 has length {f0.size}, support has {len(support)} points")
    return f0


def _guard_exact(n: int, k: int) -> None:
    if n > MAX_EXACT_N or k > MAX_EXACT_SUPPORT:
        raise ValueError(
            f"exact enumeration is limited to n <= {MAX_EXACT_N} observations and "
            f"supports of at most {MAX_EXACT_SUPPORT} points (got n={n}, |U|={k})"
        )


def exact_marginal(support: Sequence, data, dspec: DirichletSpec, kspec: KernelSpec) -> float:
    """Log marginal likelihood by full enumeration of component allocations.

    Sums, over every allocation of observations to support points, the
    product of component densities times the allocation's prior mass
    (rising factorials of the Dirichlet parameters).  Exact up to float
    arithmetic; guarded to small cases.
    """
    y = validate_observations(kspec, data)
    k = len(support)
    if k == 0:
        return float("-inf")
    f0 = _check_spec(dspec, support)
    n = y.size
    _guard_exact(n, k)
    if n == 0:
        return 0.0
    logp = log_kernel_matrix(kspec, _support_params(kspec, support), y)
    a0 = dspec.alpha0
    af0 = a0 * f0
    log_denom = np.log(a0 + np.arange(n))
    counts = np.zeros(k)
    blocks: list[float] = []

    def descend(i: int, logw: float):
        if i == n - 1:
            with np.errstate(divide="ignore"):
                last = logp[i] + np.log(af0 + counts) - log_denom[i]
            blocks.append(logw + logsumexp(last))
            return
        for z in range(k):
            lf = logp[i, z] + math.log(af0[z] + counts[z]) - log_denom[i]
            if lf == float("-inf"):
                continue
            counts[z] += 1
            descend(i + 1, logw + lf)
            counts[z] -= 1

    descend(0, 0.0)
    if not blocks:
        raise DegenerateMixtureError("every allocation has zero likelihood")
    return float(logsumexp(blocks))


def exact_posterior_mean(support: Sequence, data, dspec: DirichletSpec, kspec: KernelSpec) -> np.ndarray:
    """Posterior mean mixing weights by allocation enumeration (same guard as exact_marginal)."""
    y = validate_observations(kspec, data)
    k = len(support)
    f0 = _check_spec(dspec, support)
    n = y.size
    _guard_exact(n, k)
    if n == 0:
        return f0.copy()
    logp = log_kernel_matrix(kspec, _support_params(kspec, support), y)
    a0 = dspec.alpha0
    af0 = a0 * f0
    log_denom = np.log(a0 + np.arange(n))
    counts = np.zeros(k)
    log_weights: list[float] = []
    means: list[np.ndarray] = []

    def descend(i: int, logw: float):
        if i == n:
            log_weights.append(logw)
            means.append((af0 + counts) / (a0 + n))
            return
        for z in range(k):
            lf = logp[i, z] + math.log(af0[z] + counts[z]) - log_denom[i]
            if lf == float("-inf"):
                continue
            counts[z] += 1
            descend(i + 1, logw + lf)
            counts[z] -= 1

    descend(0, 0.0)
    if not log_weights:
        raise DegenerateMixtureError("every allocation has zero likelihood")
    lw = np.asarray(log_weights)
    lw -= lw.max()
    w = np.exp(lw)
    out = np.average(np.asarray(means), axis=0, weights=w)
    return out / out.sum()


def sequential_imputation_marginal(
    support: Sequence,
    data,
    dspec: DirichletSpec,
    kspec: KernelSpec,
    n_paths: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Unbiased Monte Carlo estimate of the log marginal with a jackknife standard error.

    Each path allocates observations sequentially from the one-step
    predictive and accumulates the product of its normalizing masses; the
    average of these path weights is unbiased for the marginal likelihood.
    The standard error is reported on the log scale (``nan`` when only one
    path is drawn).
    """
    y = validate_observations(kspec, data)
    k = len(support)
    if k == 0:
        return float("-inf"), 0.0
    f0 = _check_spec(dspec, support)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    n = y.size
    if n == 0:
        return 0.0, 0.0
    logp = log_kernel_matrix(kspec, _support_params(kspec, support), y)
    a0 = dspec.alpha0
    af0 = a0 * f0
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    counts = np.zeros((n_paths, k))
    log_w = np.zeros(n_paths)
    for i in range(n):
        with np.errstate(divide="ignore"):
            lq = logp[i][None, :] + np.log(af0[None, :] + counts) - math.log(a0 + i)
        row_max = lq.max(axis=1)
        if np.any(~np.isfinite(row_max)):
            raise DegenerateMixtureError(
                f"predictive mass vanished at observation {i}: "
                "all support points assign zero density"
            )
        q = np.exp(lq - row_max[:, None])
        mass = q.sum(axis=1)
        log_w += row_max + np.log(mass)
        u = rng.random(n_paths)
        z = np.minimum((np.cumsum(q / mass[:, None], axis=1) < u[:, None]).sum(axis=1), k - 1)
        counts[np.arange(n_paths), z] += 1

    shift = log_w.max()
    w = np.exp(log_w - shift)
    estimate = shift + math.log(w.mean())
    if n_paths == 1:
        return float(estimate), float("nan")
    total = w.sum()
    loo = (total - w) / (n_paths - 1)
    theta = np.log(loo) + shift
    se = math.sqrt((n_paths - 1) / n_paths * np.sum((theta - theta.mean()) ** 2))
    return float(estimate), float(se)


def polya_one_step(support: Sequence, y, dspec: DirichletSpec, kspec: KernelSpec) -> np.ndarray:
    """Posterior mean weights after one observation: a prior/predictive blend.

    Returns ``(alpha0 f0 + posterior_allocation) / (alpha0 + 1)`` where the
    allocation term is the normalized ``p(y|u) f0(u)`` vector.
    """
    f0 = _check_spec(dspec, support)
    logp = log_kernel_matrix(kspec, _support_params(kspec, support), [y])[0]
    with np.errstate(divide="ignore"):
        lw = logp + np.log(f0)
    shift = lw.max()
    if not np.isfinite(shift):
        raise DegenerateMixtureError(
            f"predictive mass vanished at observation y={y!r}: "
            "all support points assign zero density"
        )
    post = np.exp(lw - shift)
    post /= post.sum()
    a0 = dspec.alpha0
    return (a0 / (a0 + 1.0)) * f0 + (1.0 / (a0 + 1.0)) * post


def pr_posterior_l1_gap(
    support: Sequence,
    data,
    dspec: DirichletSpec,
    kspec: KernelSpec,
    gamma: float = DEFAULT_GAMMA,
) -> np.ndarray:
    """L1 distance between the recursive weights and the exact posterior mean after each step.

    A small-sample diagnostic of how closely the recursion tracks the
    Bayes estimate; no particular threshold is promised.  Subject to the
    exact-enumeration size guard.
    """
    from .recursion import PRConfig, pr_weights, pr_update

    y = validate_observations(kspec, data)
    _guard_exact(y.size, len(support))
    f = PRConfig(gamma=gamma).initial_weights(len(support))
    gains = pr_weights(y.size, gamma)
    gaps = np.empty(y.size)
    for i in range(y.size):
        f, _ = pr_update(f, support, y[i], gains[i], kspec)
        exact = exact_posterior_mean(support, y[: i + 1], dspec, kspec)
        gaps[i] = np.abs(f - exact).sum()
    return gaps
