"""The end-to-end federated training loop.

Each round: refresh sampling probabilities per the active strategy,
draw a cohort, run K local SGD steps on every cohort client in
parallel-safe RNG streams, aggregate the importance-weighted deltas,
and apply the (optionally momentum-smoothed) server update.

Oracle strategies (fedis, delta, cluster_is) refresh their statistics
from a probe pass over all clients; practical strategies update stale
cached scores from cohort information only.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from fedsampler import models, rngs
from fedsampler.datasets import ClientDataset
from fedsampler.metrics import RoundMetrics, entropy, phi_ratio, update_gap
from fedsampler.models import ModelSpec, REGRESSION
from fedsampler.sampling import (
    ClientStats,
    DeltaSamplerConfig,
    SelectionResult,
    cap_inclusion,
    delta_scores,
    probs_cluster_is,
    probs_data_ratio,
    probs_delta,
    probs_fedis,
    probs_practical_update,
    probs_uniform,
    sample_with_replacement,
    sample_without_replacement,
    select_power_of_choice,
)

ORACLE_STRATEGIES = ("fedis", "delta", "cluster_is")
PRACTICAL_STRATEGIES = ("prac_is", "prac_delta")


@dataclass
class RoundConfig:
    local_lr: float
    server_lr: float
    local_steps: int
    batch_size: int  # 0 means deterministic full batch
    cohort_size: int
    proximal_mu: float = 0.0
    momentum_gamma: float = 0.0

    def __post_init__(self):
        if self.local_lr <= 0 or self.server_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.local_steps < 1 or self.cohort_size < 1:
            raise ValueError("local_steps and cohort_size must be >= 1")
        if self.batch_size < 0:
            raise ValueError("batch_size must be >= 0")
        if self.proximal_mu < 0:
            raise ValueError("proximal_mu must be nonnegative")
        if not 0.0 <= self.momentum_gamma < 1.0:
            raise ValueError("momentum_gamma must lie in [0, 1)")


@dataclass
class StrategyConfig:
    name: str
    replacement: str = "without"  # "with" | "without"
    delta: DeltaSamplerConfig = field(default_factory=DeltaSamplerConfig)
    clusters: int = 2
    poc_candidates: int | None = None  # power-of-choice candidate pool size
    reuse_probe: bool = False  # oracle strategies: reuse probe updates for the cohort
    min_prob_mix: float = 0.0  # mix oracle probabilities with uniform: p_i >= mix/m

    def __post_init__(self):
        from fedsampler.sampling import STRATEGIES

        if self.name not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.name!r}; valid: {', '.join(STRATEGIES)}")
        if self.replacement not in ("with", "without"):
            raise ValueError("replacement must be 'with' or 'without'")


@dataclass
class ServerState:
    params: np.ndarray
    round: int
    momentum_buffer: np.ndarray
    probabilities: np.ndarray
    stats: list  # per-client ClientStats

    @classmethod
    def initial(cls, model: ModelSpec, m: int) -> "ServerState":
        params = model.init_params()
        return cls(params=params, round=0,
                   momentum_buffer=np.zeros_like(params),
                   probabilities=probs_uniform(m),
                   stats=[ClientStats() for _ in range(m)])


@dataclass
class ClientUpdate:
    client_id: int
    delta: np.ndarray  # x_K - x_0 = -local_lr * grad_sum
    grad_sum: np.ndarray  # sum of the step gradients actually applied
    per_batch_grads: list  # raw stochastic gradients (noise included, proximal excluded)


def _local_train_scalar(model, client, start, cfg, rng):
    """Scalar-regression fast path: the batch enters only via its target mean."""
    a, b = client.constants
    x0 = float(start[0])
    x = x0
    n = client.n_examples
    full_batch = cfg.batch_size <= 0 or cfg.batch_size >= n
    full_mean = float(client.targets.mean())
    grad_sum = 0.0
    per_batch = []
    noise = client.noise_std
    for _ in range(cfg.local_steps):
        if full_batch:
            ybar = full_mean
        else:
            idx = rng.integers(0, n, size=cfg.batch_size)
            ybar = float(client.targets[idx].mean())
        core = a * x - b
        if abs(core) < models.SINGULARITY_EPS:
            raise models.SingularModelError(
                f"A*x - b within {models.SINGULARITY_EPS} of zero")
        g = -2.0 * (ybar - np.log(core * core / 2.0)) * (2.0 * a / core)
        if noise > 0:
            g = g + noise * rng.standard_normal()
        per_batch.append(np.array([g]))
        step_g = g + cfg.proximal_mu * (x - x0) if cfg.proximal_mu > 0 else g
        grad_sum += step_g
        x = x - cfg.local_lr * step_g
    if not np.isfinite(x):
        raise FloatingPointError("non-finite parameters in local training")
    return ClientUpdate(client.client_id, np.array([x - x0]),
                        np.array([grad_sum]), per_batch)


def local_train(model: ModelSpec, client: ClientDataset, start: np.ndarray,
                cfg: RoundConfig, rng: np.random.Generator) -> ClientUpdate:
    """K local SGD steps from ``start`` on one client's data."""
    if model.kind == REGRESSION and model.param_dim == 1:
        return _local_train_scalar(model, client, start, cfg, rng)
    x = np.array(start, dtype=float, copy=True)
    n = client.n_examples
    full_batch = cfg.batch_size <= 0 or cfg.batch_size >= n
    grad_sum = np.zeros_like(x)
    per_batch = []
    inject_noise = client.noise_std > 0 and model.kind == REGRESSION
    for _ in range(cfg.local_steps):
        if full_batch:
            feats, targs = client.features, client.targets
        else:
            idx = rng.integers(0, n, size=cfg.batch_size)
            feats, targs = client.features[idx], client.targets[idx]
        g = models.grad(model, x, feats, targs, client.constants)
        if inject_noise:
            g = g + client.noise_std * rng.standard_normal(x.shape)
        per_batch.append(g)
        step_g = g + cfg.proximal_mu * (x - start) if cfg.proximal_mu > 0 else g
        grad_sum = grad_sum + step_g
        x = models.sgd_step(x, step_g, cfg.local_lr)
    return ClientUpdate(client.client_id, x - start, grad_sum, per_batch)


def aggregate(updates: list[ClientUpdate], selection: SelectionResult) -> np.ndarray:
    """Importance-weighted sum of cohort deltas, in ascending client-id order."""
    if len(updates) != len(selection.cohort):
        raise ValueError("update/selection length mismatch")
    by_id = {u.client_id: u for u in updates}
    total = np.zeros_like(updates[0].delta)
    for cid, w in zip(selection.cohort, selection.weights):
        total = total + w * by_id[int(cid)].delta
    if not np.all(np.isfinite(total)):
        raise FloatingPointError("non-finite aggregate")
    return total


def server_update(state: ServerState, delta: np.ndarray, cfg: RoundConfig) -> ServerState:
    """Momentum-buffered server step; gamma = 0 recovers the plain update."""
    if delta.shape != state.params.shape:
        raise ValueError("delta dimension mismatch")
    buf = cfg.momentum_gamma * state.momentum_buffer + delta
    return replace(state,
                   params=state.params + cfg.server_lr * buf,
                   momentum_buffer=buf,
                   round=state.round + 1)


def _sigma_sq(update: ClientUpdate) -> float:
    g = np.asarray(update.per_batch_grads)
    mean = g.mean(axis=0)
    return float(((g - mean) ** 2).sum(axis=1).mean())


def _train_many(model, clients, ids, start, cfg, seed, round_idx, purpose, threads):
    def work(cid):
        rng = rngs.client_stream(seed, purpose, round_idx, int(cid))
        return local_train(model, clients[int(cid)], start, cfg, rng)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, ids))
    return [work(cid) for cid in ids]


def _exact_diagnostics(model, clients, params):
    """Full-population weighted loss and gradient, computed exactly."""
    if model.kind == REGRESSION and model.param_dim == 1:
        x = float(params[0])
        total_loss = 0.0
        grads = []
        full = 0.0
        for c in clients:
            a, b = c.constants
            core = a * x - b
            if abs(core) < models.SINGULARITY_EPS:
                raise models.SingularModelError(
                    f"A*x - b within {models.SINGULARITY_EPS} of zero")
            pred = np.log(core * core / 2.0)
            ybar = float(c.targets.mean())
            ysq = float((c.targets * c.targets).mean())
            total_loss += c.weight * (ysq - 2.0 * pred * ybar + pred * pred)
            g = -2.0 * (ybar - pred) * (2.0 * a / core)
            grads.append(np.array([g]))
            full += c.weight * g
        return total_loss, np.array([full]), grads
    total_loss = 0.0
    grads = []
    for c in clients:
        total_loss += c.weight * models.loss(model, params, c.features, c.targets, c.constants)
        grads.append(models.grad(model, params, c.features, c.targets, c.constants))
    full_grad = sum(c.weight * g for c, g in zip(clients, grads))
    return total_loss, full_grad, grads


def run_round(state: ServerState, clients: list[ClientDataset], model: ModelSpec,
              strategy: StrategyConfig, cfg: RoundConfig, seed: int,
              threads: int = 1) -> tuple[ServerState, RoundMetrics]:
    t0 = time.perf_counter()
    t = state.round
    m = len(clients)
    n = cfg.cohort_size
    if n > m:
        raise ValueError("cohort_size exceeds the number of clients")
    w = np.asarray([c.weight for c in clients])

    global_loss, full_grad, exact_grads = _exact_diagnostics(model, clients, state.params)

    probe_updates = None
    if strategy.name == "uniform":
        p = probs_uniform(m)
    elif strategy.name == "md":
        p = probs_data_ratio(w)
    elif strategy.name in PRACTICAL_STRATEGIES:
        p = state.probabilities
    elif strategy.name in ORACLE_STRATEGIES:
        probe_updates = _train_many(model, clients, range(m), state.params, cfg,
                                    seed, t, rngs.PROBE, threads)
        norms = np.asarray([np.linalg.norm(u.grad_sum) for u in probe_updates])
        if strategy.name == "fedis":
            p = probs_fedis(norms)
        elif strategy.name == "cluster_is":
            p = probs_cluster_is(norms, strategy.clusters, n).global_probs
        else:  # delta
            zeta = np.asarray([np.linalg.norm(u.grad_sum / cfg.local_steps - full_grad)
                               for u in probe_updates])
            sigma2 = np.asarray([_sigma_sq(u) for u in probe_updates])
            stats = [ClientStats(grad_sum_norm=nm, diversity=z, local_var=s, last_round=t)
                     for nm, z, s in zip(norms, zeta, sigma2)]
            p = probs_delta(stats, strategy.delta)
        if strategy.min_prob_mix > 0:
            lam = strategy.min_prob_mix
            p = (1.0 - lam) * p + lam / m  # keeps importance weights bounded
    elif strategy.name == "power_of_choice":
        p = probs_uniform(m)  # placeholder; selection below is loss-based and biased
    else:
        raise AssertionError(strategy.name)

    select_rng = rngs.round_stream(seed, rngs.SELECT, t)
    if strategy.name == "power_of_choice":
        d = strategy.poc_candidates or min(m, 2 * n)
        losses = np.asarray([models.loss(model, state.params, c.features, c.targets, c.constants)
                             for c in clients])
        selection = select_power_of_choice(d, n, losses, select_rng, w)
        p_used = p
    else:
        if strategy.replacement == "without":
            p_used = cap_inclusion(p, n)
            selection = sample_without_replacement(p_used, n, select_rng, w)
        else:
            p_used = p
            selection = sample_with_replacement(p_used, n, select_rng, w)

    cohort_ids = np.unique(selection.cohort)
    if probe_updates is not None and strategy.reuse_probe:
        updates = {int(c): probe_updates[int(c)] for c in cohort_ids}
    else:
        trained = _train_many(model, clients, cohort_ids, state.params, cfg,
                              seed, t, rngs.TRAIN, threads)
        updates = {u.client_id: u for u in trained}
    cohort_updates = [updates[int(c)] for c in selection.cohort]

    delta = aggregate(cohort_updates, selection)
    new_state = server_update(state, delta, cfg)

    # refresh the stats cache and, for practical strategies, the probabilities
    new_stats = list(state.stats)
    fhat = sum(updates[int(c)].grad_sum for c in cohort_ids) / len(cohort_ids)
    for c in cohort_ids:
        u = updates[int(c)]
        new_stats[int(c)] = ClientStats(
            grad_sum_norm=float(np.linalg.norm(u.grad_sum)),
            diversity=float(np.linalg.norm(u.grad_sum - fhat)),
            local_var=_sigma_sq(u),
            last_round=t,
        )
    new_probs = p_used
    if strategy.name in PRACTICAL_STRATEGIES:
        if strategy.name == "prac_is":
            scores = [new_stats[int(c)].grad_sum_norm for c in cohort_ids]
        else:
            scores = delta_scores([new_stats[int(c)].diversity for c in cohort_ids],
                                  [new_stats[int(c)].local_var for c in cohort_ids],
                                  strategy.delta)
        new_probs = probs_practical_update(p_used, cohort_ids, scores)
    new_state = replace(new_state, stats=new_stats, probabilities=new_probs)

    surrogate_grad = sum(wt * exact_grads[int(c)]
                         for c, wt in zip(selection.cohort, selection.weights))
    variance = float(np.mean([np.linalg.norm(n * wt * exact_grads[int(c)] - full_grad) ** 2
                              for c, wt in zip(selection.cohort, selection.weights)]))
    metrics = RoundMetrics(
        round=t,
        global_loss=global_loss,
        full_grad_norm=float(np.linalg.norm(full_grad)),
        update_gap=update_gap(surrogate_grad, full_grad),
        update_variance=variance,
        phi_ratio=phi_ratio(p_used),
        selected=tuple(int(c) for c in selection.cohort),
        probabilities_entropy=entropy(p_used),
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )
    return new_state, metrics


def run_experiment(clients, model, strategy: StrategyConfig, cfg: RoundConfig,
                   rounds: int, seed: int, threads: int = 1):
    """Run T rounds from a fresh server state; returns (final state, metrics list)."""
    state = ServerState.initial(model, len(clients))
    records = []
    for _ in range(rounds):
        state, rec = run_round(state, clients, model, strategy, cfg, seed, threads)
        records.append(rec)
    return state, records
