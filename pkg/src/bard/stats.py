"""Statistical primitives shared across the design engines.

Beta-binomial tail probabilities, weighted isotonic regression (PAVA),
the two-parameter logistic toxicity model posterior on a deterministic
quadrature grid, and Dirichlet-multinomial utility means.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import betainc, expit


# ---------------------------------------------------------------------------
# Beta posterior


@dataclass(frozen=True)
class BetaPosterior:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("beta shape parameters must be strictly positive")


def beta_tail(post: BetaPosterior, cutoff: float) -> float:
    """Pr(p > cutoff) under Beta(a, b)."""
    if not 0.0 <= cutoff <= 1.0:
        raise ValueError("cutoff must lie in [0, 1]")
    return float(1.0 - betainc(post.a, post.b, cutoff))


def beta_lower_tail(post: BetaPosterior, cutoff: float) -> float:
    """Pr(p < cutoff) under Beta(a, b); the continuous CDF."""
    if not 0.0 <= cutoff <= 1.0:
        raise ValueError("cutoff must lie in [0, 1]")
    return float(betainc(post.a, post.b, cutoff))


# ---------------------------------------------------------------------------
# Isotonic regression


def pava(rates: Sequence[float], weights: Sequence[float]) -> np.ndarray:
    """Weighted least-squares nondecreasing fit via pool-adjacent-violators.

    Pooled blocks carry summed weights. Entries with zero weight do not
    constrain the fit; they inherit the fitted value of the nearest
    positive-weight block on the left (on the right for a leading run).
    """
    r = np.asarray(rates, dtype=float)
    w = np.asarray(weights, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("rates must be a non-empty 1-d sequence")
    if w.shape != r.shape:
        raise ValueError("rates and weights must have equal length")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")

    pos = np.flatnonzero(w > 0)
    if pos.size == 0:
        # nothing to constrain; the identity fit is as good as any
        return r.copy()

    # stack of (weighted sum, weight, block length) over the positive-weight subsequence
    sums: list[float] = []
    wts: list[float] = []
    lens: list[int] = []
    for i in pos:
        sums.append(r[i] * w[i])
        wts.append(w[i])
        lens.append(1)
        while len(sums) > 1 and sums[-2] * wts[-1] >= sums[-1] * wts[-2]:
            # previous block mean >= current block mean: pool
            s, ww, ln = sums.pop(), wts.pop(), lens.pop()
            sums[-1] += s
            wts[-1] += ww
            lens[-1] += ln

    fit_pos = np.empty(pos.size)
    k = 0
    for s, ww, ln in zip(sums, wts, lens):
        fit_pos[k : k + ln] = s / ww
        k += ln

    out = np.empty_like(r)
    out[pos] = fit_pos
    # zero-weight entries inherit a neighbouring pooled value (left block,
    # or the first block for a leading run)
    last = fit_pos[0]
    for i in range(r.size):
        if w[i] > 0:
            last = out[i]
        else:
            out[i] = last
    return out


# ---------------------------------------------------------------------------
# Two-parameter logistic toxicity model posterior


@dataclass(frozen=True)
class BlrmPrior:
    """Independent normal priors on (log alpha, log beta)."""

    mu_alpha: float = -1.1
    mu_beta: float = 0.0
    sigma_alpha: float = 2.0
    sigma_beta: float = 1.0

    def __post_init__(self):
        if not (self.sigma_alpha > 0 and self.sigma_beta > 0):
            raise ValueError("prior standard deviations must be strictly positive")


def _grid_axes(prior: BlrmPrior, nodes: int, span: float) -> tuple[np.ndarray, np.ndarray]:
    a = np.linspace(prior.mu_alpha - span * prior.sigma_alpha,
                    prior.mu_alpha + span * prior.sigma_alpha, nodes)
    b = np.linspace(prior.mu_beta - span * prior.sigma_beta,
                    prior.mu_beta + span * prior.sigma_beta, nodes)
    return a, b


def _dose_scale(dosages: np.ndarray, ref_dosage: float, log_dose: bool) -> np.ndarray:
    if np.any(dosages <= 0) or np.any(np.diff(dosages) <= 0):
        raise ValueError("dosages must be positive and strictly increasing")
    if ref_dosage <= 0:
        raise ValueError("reference dosage must be positive")
    x = dosages / ref_dosage
    return np.log(x) if log_dose else x


@dataclass
class BlrmPosteriorGrid:
    """Posterior of (log alpha, log beta) on a tensor grid.

    ``weights`` has shape (nodes, nodes), first axis log-alpha, and sums
    to 1. Toxicity at dose j is logistic(log_alpha + exp(log_beta) * x_j)
    where x_j is the (log-)scaled dosage.
    """

    log_alpha: np.ndarray
    log_beta: np.ndarray
    weights: np.ndarray
    dosages: np.ndarray
    ref_dosage: float
    log_dose: bool = True

    @property
    def n_doses(self) -> int:
        return len(self.dosages)

    def toxicity_at(self, j: int) -> np.ndarray:
        """Toxicity probability at dose index j over the grid nodes."""
        x = _dose_scale(self.dosages, self.ref_dosage, self.log_dose)
        A = self.log_alpha[:, None]
        B = self.log_beta[None, :]
        return expit(A + np.exp(B) * x[j])


def blrm_posterior(
    prior: BlrmPrior,
    dlt: Sequence[int],
    n: Sequence[int],
    dosages: Sequence[float],
    ref_dosage: float,
    *,
    nodes: int = 201,
    span: float = 6.0,
    log_dose: bool = True,
) -> BlrmPosteriorGrid:
    """Grid posterior: prior density times the binomial likelihood, normalized.

    With no data this recovers the prior (up to discretization).
    """
    dlt = list(dlt)
    n = list(n)
    dos = np.asarray(dosages, dtype=float)
    if len(dlt) != len(n) or len(n) != len(dos):
        raise ValueError("dlt, n and dosages must have equal length")
    for y_j, n_j in zip(dlt, n):
        if not 0 <= y_j <= n_j:
            raise ValueError("need 0 <= dlt <= n at every dose")
    x = _dose_scale(dos, ref_dosage, log_dose)

    a_ax, b_ax = _grid_axes(prior, nodes, span)
    A = a_ax[:, None]
    eB = np.exp(b_ax)[None, :]
    logw = (
        -0.5 * ((a_ax - prior.mu_alpha) / prior.sigma_alpha) ** 2
    )[:, None] + (
        -0.5 * ((b_ax - prior.mu_beta) / prior.sigma_beta) ** 2
    )[None, :]
    for j in range(len(dos)):
        if n[j] == 0:
            continue
        p = expit(A + eB * x[j])
        p = np.clip(p, 1e-300, 1.0 - 1e-16)
        logw = logw + dlt[j] * np.log(p) + (n[j] - dlt[j]) * np.log1p(-p)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    return BlrmPosteriorGrid(a_ax, b_ax, w, dos, float(ref_dosage), log_dose)


def interval_probs(
    grid: BlrmPosteriorGrid, dose_index: int, gamma1: float, gamma2: float
) -> tuple[float, float]:
    """(PTT, POD): posterior mass of (gamma1, gamma2) and [gamma2, 1] at a dose.

    Grid cells straddling an interval edge contribute fractionally, which
    makes the quadrature O(h^2) accurate instead of O(h) and keeps the
    three interval masses an exact partition of 1.
    """
    if not 0.0 < gamma1 < gamma2 < 1.0:
        raise ValueError("need 0 < gamma1 < gamma2 < 1")
    if not 0 <= dose_index < grid.n_doses:
        raise ValueError("dose index out of range")
    x = _dose_scale(grid.dosages, grid.ref_dosage, grid.log_dose)[dose_index]
    h = grid.log_alpha[1] - grid.log_alpha[0]
    A = grid.log_alpha[:, None]
    eB = np.exp(grid.log_beta)[None, :]
    # p >= gamma  <=>  log_alpha >= logit(gamma) - exp(log_beta) * x
    t1 = np.log(gamma1 / (1 - gamma1)) - eB * x
    t2 = np.log(gamma2 / (1 - gamma2)) - eB * x
    above1 = np.clip((A + h / 2 - t1) / h, 0.0, 1.0)
    above2 = np.clip((A + h / 2 - t2) / h, 0.0, 1.0)
    w = grid.weights
    pod = float((w * above2).sum())
    ptt = float((w * (above1 - above2)).sum())
    return ptt, pod


# ---------------------------------------------------------------------------
# Dirichlet-multinomial utilities


@dataclass(frozen=True)
class DirichletPosterior:
    alpha: tuple[float, float, float, float]

    def __post_init__(self):
        if len(self.alpha) != 4 or any(a <= 0 for a in self.alpha):
            raise ValueError("alpha must be four strictly positive reals")

    @classmethod
    def from_counts(
        cls, prior: Sequence[float], counts: Sequence[int]
    ) -> "DirichletPosterior":
        if len(prior) != 4 or len(counts) != 4:
            raise ValueError("prior and counts must have four components")
        return cls(tuple(float(a) + float(c) for a, c in zip(prior, counts)))

    def means(self) -> tuple[float, ...]:
        s = sum(self.alpha)
        return tuple(a / s for a in self.alpha)


def dirichlet_mean_utility(post: DirichletPosterior, utilities: Sequence[float]) -> float:
    """Posterior mean utility: sum of u_k * E(pi_k | data)."""
    if len(utilities) != 4:
        raise ValueError("utilities must have four components")
    if not all(np.isfinite(utilities)):
        raise ValueError("utilities must be finite")
    s = sum(post.alpha)
    return float(sum(u * a for u, a in zip(utilities, post.alpha)) / s)
