"""Client-selection strategies.

Probability allocators (uniform, data-ratio, gradient-norm importance
sampling, diversity-based sampling, practical stale-score updates,
cluster-based IS) and the two cohort samplers (with / without
replacement), plus the biased power-of-choice baseline.

Every allocator returns a probability vector on the simplex.  A floor
of ``PROB_FLOOR`` keeps importance weights finite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-8
SIMPLEX_TOL = 1e-12

STRATEGIES = ("uniform", "md", "fedis", "delta", "prac_is", "prac_delta",
              "cluster_is", "power_of_choice")


@dataclass
class ClientStats:
    """Per-client cached statistics feeding the practical samplers."""

    grad_sum_norm: float = 0.0
    diversity: float = 0.0  # zeta: distance of client gradient from global
    local_var: float = 0.0  # sigma_L^2: variance across local batches
    last_round: int | None = None  # None = never participated


@dataclass
class DeltaSamplerConfig:
    """Score weights for diversity-based sampling; defaults follow the 0.5 convention."""

    alpha1: float = 0.5
    alpha2: float = 0.5

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0 or self.alpha1 + self.alpha2 <= 0:
            raise ValueError("alpha1, alpha2 must be nonnegative with positive sum")


@dataclass
class SelectionResult:
    """Selected cohort plus the aggregation weight w_i / (n * p_i) per slot."""

    cohort: np.ndarray  # client indices; duplicates only for with-replacement
    weights: np.ndarray

    def __post_init__(self):
        self.cohort = np.asarray(self.cohort, dtype=int)
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.cohort) != len(self.weights):
            raise ValueError("cohort/weights length mismatch")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ValueError("selection weights must be positive and finite")


def _floor_and_normalize(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("negative probability")
    p = p / p.sum()
    if p.min() < PROB_FLOOR:
        p = np.maximum(p, PROB_FLOOR)
        p = p / p.sum()
    return p


def check_simplex(p: np.ndarray, tol: float = SIMPLEX_TOL):
    if np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise ValueError("probabilities must be nonnegative and sum to 1")


def _scores(stats, attr):
    return np.asarray([getattr(s, attr, s) for s in stats], dtype=float)


def probs_uniform(m: int) -> np.ndarray:
    if m < 1:
        raise ValueError("m must be >= 1")
    return np.full(m, 1.0 / m)


def probs_data_ratio(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("negative data-ratio weight")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("data-ratio weights must sum to 1")
    return _floor_and_normalize(w)


def probs_fedis(stats) -> np.ndarray:
    """p_i proportional to the client's last gradient-sum norm."""
    norms = _scores(stats, "grad_sum_norm")
    if np.any(norms < 0):
        raise ValueError("negative gradient norm")
    total = norms.sum()
    if total <= 0:
        log.warning("all gradient norms zero; falling back to uniform")
        return probs_uniform(len(norms))
    return _floor_and_normalize(norms / total)


def delta_scores(zeta, local_var, cfg: DeltaSamplerConfig) -> np.ndarray:
    zeta = np.asarray(zeta, dtype=float)
    local_var = np.asarray(local_var, dtype=float)
    return np.sqrt(cfg.alpha1 * zeta * zeta + cfg.alpha2 * local_var)


def probs_delta(stats, cfg: DeltaSamplerConfig | None = None) -> np.ndarray:
    """p_i proportional to sqrt(alpha1 * zeta_i^2 + alpha2 * sigma_Li^2)."""
    cfg = cfg or DeltaSamplerConfig()
    scores = delta_scores(_scores(stats, "diversity"), _scores(stats, "local_var"), cfg)
    total = scores.sum()
    if total <= 0:
        log.warning("all diversity scores zero; falling back to uniform")
        return probs_uniform(len(scores))
    return _floor_and_normalize(scores / total)


def probs_practical_update(prev: np.ndarray, cohort, fresh_scores) -> np.ndarray:
    """Stale-information update: cohort clients share the mass they held.

    Non-cohort probabilities are left untouched; the cohort's combined
    mass is redistributed proportionally to the fresh scores.
    """
    prev = np.asarray(prev, dtype=float)
    check_simplex(prev, tol=1e-9)
    cohort = np.asarray(cohort, dtype=int)
    if len(np.unique(cohort)) != len(cohort):
        raise ValueError("cohort indices must be distinct")
    scores = np.asarray(fresh_scores, dtype=float)
    if np.any(scores < 0):
        raise ValueError("negative fresh score")
    total = scores.sum()
    if total <= 0:
        log.warning("all fresh scores zero; keeping previous probabilities")
        return prev.copy()
    p = prev.copy()
    cohort_mass = prev[cohort].sum()  # equals 1 - sum over the complement
    p[cohort] = scores / total * cohort_mass
    drift = abs(p.sum() - 1.0)
    if drift > 1e-9:
        p = p / p.sum()
    if p.min() < PROB_FLOOR:
        p = _floor_and_normalize(p)
    return p


# --- cluster-based importance sampling ------------------------------------

def kmeans_1d(values: np.ndarray, k: int, iterations: int = 50) -> np.ndarray:
    """1-D k-means over sorted contiguous chunks; returns cluster labels.

    Initialized with equal-count (quantile) chunks; a fixed number of
    Lloyd iterations moves each chunk boundary to the midpoint between
    adjacent cluster centers.  Tied centers keep their boundary, and
    empty chunks are merged away, so fewer than k labels may be used.
    """
    values = np.asarray(values, dtype=float)
    m = len(values)
    k = min(k, m)
    order = np.argsort(values, kind="stable")
    sv = values[order]
    # bounds[i] = first sorted index belonging to chunk i+1
    bounds = np.asarray([round(m * (i + 1) / k) for i in range(k - 1)], dtype=int)
    for _ in range(iterations):
        edges = np.concatenate([[0], bounds, [m]])
        centers = np.asarray([sv[a:b].mean() if b > a else np.nan
                              for a, b in zip(edges[:-1], edges[1:])])
        new_bounds = bounds.copy()
        for i in range(k - 1):
            lo, hi = centers[i], centers[i + 1]
            if np.isnan(lo) or np.isnan(hi) or hi <= lo:
                continue
            new_bounds[i] = np.searchsorted(sv, (lo + hi) / 2.0, side="left")
        new_bounds = np.sort(new_bounds)
        if np.array_equal(new_bounds, bounds):
            break
        bounds = new_bounds
    labels = np.empty(m, dtype=int)
    edges = np.concatenate([[0], bounds, [m]])
    c = 0
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            labels[order[a:b]] = c
            c += 1
    return labels


@dataclass
class ClusterPlan:
    """Cluster membership, per-cluster budgets and within-cluster probabilities."""

    clusters: list  # list of index arrays
    budgets: np.ndarray
    within_probs: list  # per-cluster probability vectors
    global_probs: np.ndarray  # effective per-client p_i = budget_c * q_i / n


def _largest_remainder(quotas: np.ndarray, total: int, minimum: int = 1) -> np.ndarray:
    base = np.floor(quotas).astype(int)
    base = np.maximum(base, minimum)
    while base.sum() > total:
        # retract from the largest overshoot while respecting the minimum
        over = base - quotas
        over[base <= minimum] = -np.inf
        base[np.argmax(over)] -= 1
    remainder = quotas - base
    while base.sum() < total:
        idx = int(np.argmax(remainder))
        base[idx] += 1
        remainder[idx] = -np.inf
    return base


def probs_cluster_is(stats, clusters: int, budget: int) -> ClusterPlan:
    """Cluster clients by gradient norm, then run IS within each cluster."""
    norms = _scores(stats, "grad_sum_norm")
    m = len(norms)
    if not 1 <= clusters <= m:
        raise ValueError("cluster count must lie in [1, m]")
    if budget < clusters:
        raise ValueError("budget must cover at least one client per cluster")
    labels = kmeans_1d(norms, clusters)
    used = np.unique(labels)
    members = [np.flatnonzero(labels == c) for c in used]
    sizes = np.asarray([len(g) for g in members], dtype=float)
    budgets = _largest_remainder(budget * sizes / m, budget)
    within, global_p = [], np.zeros(m)
    for g, b in zip(members, budgets):
        s = norms[g]
        q = s / s.sum() if s.sum() > 0 else np.full(len(g), 1.0 / len(g))
        within.append(q)
        global_p[g] = b * q / budget
    global_p = _floor_and_normalize(global_p)
    return ClusterPlan(members, budgets, within, global_p)


# --- cohort samplers -------------------------------------------------------

def _selection_weights(p, cohort, n, client_weights):
    if client_weights is None:
        client_weights = np.full(len(p), 1.0 / len(p))
    return client_weights[cohort] / (n * p[cohort])


def sample_with_replacement(p: np.ndarray, n: int, rng: np.random.Generator,
                            client_weights=None) -> SelectionResult:
    """n i.i.d. categorical draws; duplicates allowed."""
    p = np.asarray(p, dtype=float)
    check_simplex(p, tol=1e-9)
    cohort = rng.choice(len(p), size=n, p=p)
    cohort.sort()
    return SelectionResult(cohort, _selection_weights(p, cohort, n, client_weights))


def sample_without_replacement(p: np.ndarray, n: int, rng: np.random.Generator,
                               client_weights=None) -> SelectionResult:
    """Systematic PPS draw with inclusion probability exactly n * p_i.

    Random permutation, cumulative sums of n * p_i, one uniform start u;
    clients whose cumulative interval contains u + k (k = 0..n-1) are
    selected.  Requires n * p_i <= 1 for all i.
    """
    p = np.asarray(p, dtype=float)
    check_simplex(p, tol=1e-9)
    if np.any(n * p > 1.0 + 1e-9):
        raise ValueError("n * p_i exceeds 1; apply cap_inclusion first")
    perm = rng.permutation(len(p))
    c = np.cumsum(n * p[perm])
    c[-1] = n
    u = rng.random()
    hits = np.floor(c - u)
    taken = hits - np.concatenate([[-1.0], hits[:-1]]) >= 1.0
    cohort = np.sort(perm[taken])
    if len(cohort) != n:
        raise RuntimeError("systematic PPS produced a cohort of the wrong size")
    return SelectionResult(cohort, _selection_weights(p, cohort, n, client_weights))


def inclusion_counts_without_replacement(p, n, draws, rng) -> np.ndarray:
    """Vectorized repetition of :func:`sample_without_replacement`; returns counts."""
    p = np.asarray(p, dtype=float)
    m = len(p)
    perms = np.argsort(rng.random((draws, m)), axis=1)
    c = np.cumsum(n * p[perms], axis=1)
    c[:, -1] = n
    u = rng.random((draws, 1))
    hits = np.floor(c - u)
    taken = hits - np.concatenate([np.full((draws, 1), -1.0), hits[:, :-1]], axis=1) >= 1.0
    return np.bincount(perms[taken], minlength=m)


def inclusion_counts_with_replacement(p, n, draws, rng) -> np.ndarray:
    return rng.multinomial(n, p, size=draws).sum(axis=0)


def cap_inclusion(p: np.ndarray, n: int) -> np.ndarray:
    """Clamp p_i to 1/n where n * p_i > 1, redistributing the excess.

    Iterates until no violation remains; the clamped set only grows, so
    at most m passes are needed.
    """
    p = np.asarray(p, dtype=float).copy()
    check_simplex(p, tol=1e-9)
    capped = np.zeros(len(p), dtype=bool)
    for _ in range(len(p)):
        viol = (n * p > 1.0 + SIMPLEX_TOL) & ~capped
        if not viol.any():
            break
        capped |= viol
        free = ~capped
        mass = 1.0 - capped.sum() / n
        p[capped] = 1.0 / n
        if free.any() and p[free].sum() > 0:
            p[free] *= mass / p[free].sum()
    return p


def select_power_of_choice(candidate_count: int, n: int, losses, rng: np.random.Generator,
                           client_weights=None) -> SelectionResult:
    """Biased baseline: d random candidates, keep the n with largest loss."""
    losses = np.asarray(losses, dtype=float)
    m = len(losses)
    if candidate_count > m:
        raise ValueError("candidate_count exceeds the number of clients")
    if n > candidate_count:
        raise ValueError("cohort size exceeds candidate_count")
    candidates = rng.choice(m, size=candidate_count, replace=False)
    top = candidates[np.argsort(-losses[candidates], kind="stable")[:n]]
    cohort = np.sort(top)
    if client_weights is None:
        client_weights = np.full(m, 1.0 / m)
    w = client_weights[cohort]
    return SelectionResult(cohort, w / w.sum())
