"""Synthetic federated dataset generators.

Three recipes: per-client log-quadratic regression data with a hidden
truth x* = 1, Dirichlet-partitioned Gaussian-cluster classification
data, and a "split" partition where a small fraction of clients holds
most of the samples.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

WEIGHT_TOL = 1e-12


@dataclass
class ClientDataset:
    """One client's local data plus its aggregation weight n_i / N."""

    client_id: int
    features: np.ndarray  # (n, d_feat); d_feat may be 0 for regression
    targets: np.ndarray  # (n,)
    weight: float
    constants: tuple[float, float] | None = None  # (A_i, b_i), regression only
    noise_std: float = 0.0  # gradient-noise level, injected at training time

    @property
    def n_examples(self) -> int:
        return len(self.targets)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.features.tobytes())
        h.update(self.targets.tobytes())
        return h.hexdigest()


@dataclass
class PartitionSpec:
    """How to split classification samples across clients."""

    mode: str = "dirichlet"  # "dirichlet" | "split"
    dirichlet_alpha: float = 0.5
    split_rich_fraction: float = 0.1
    split_rich_share: float = 0.9

    def __post_init__(self):
        if self.mode not in ("dirichlet", "split"):
            raise ValueError(f"unknown partition mode {self.mode!r}")
        if self.dirichlet_alpha <= 0:
            raise ValueError("dirichlet_alpha must be > 0")
        for name in ("split_rich_fraction", "split_rich_share"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")


def _check_weights(clients):
    total = sum(c.weight for c in clients)
    if abs(total - 1.0) > 1e-9:
        raise AssertionError(f"client weights sum to {total}, not 1")


def gen_regression_clients(m: int, samples_per_client: int, a: float, b: float,
                           noise_std: float, seed: int, *,
                           x_star: float = 1.0,
                           label_noise_std: float = 0.1,
                           noise_profile: str = "constant") -> list[ClientDataset]:
    """Generate m regression clients sharing constants (A, b).

    Targets are ``log((A*x_star - b)^2 / 2) + eps`` with
    ``eps ~ N(0, label_noise_std^2)``; the gradient noise level
    ``noise_std`` is stored for injection during local training.
    ``noise_profile`` controls how levels spread across clients, all
    with mean ``noise_std``: ``'constant'`` (identical), ``'linear'``
    (0.25x to 1.75x) or ``'geometric'`` (two decades), the latter two
    making clients heterogeneous in gradient-noise magnitude.
    """
    if m < 1 or samples_per_client < 1:
        raise ValueError("m and samples_per_client must be >= 1")
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    if noise_profile == "constant" or m == 1:
        levels = np.full(m, float(noise_std))
    elif noise_profile == "linear":
        levels = noise_std * np.linspace(0.25, 1.75, m)
    elif noise_profile == "geometric":
        levels = np.geomspace(0.1, 10.0, m)
        levels *= noise_std / levels.mean()
    else:
        raise ValueError(f"unknown noise_profile {noise_profile!r}")
    core = a * x_star - b
    if abs(core) < 1e-12:
        raise ValueError("degenerate setup: A*x_star == b")
    clean = float(np.log(core * core / 2.0))
    clients = []
    for i in range(m):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0, i)))
        eps = rng.normal(0.0, label_noise_std, samples_per_client) if label_noise_std > 0 \
            else np.zeros(samples_per_client)
        targets = clean + eps
        clients.append(ClientDataset(
            client_id=i,
            features=np.zeros((samples_per_client, 0)),
            targets=targets,
            weight=1.0 / m,
            constants=(a, b),
            noise_std=float(levels[i]),
        ))
    _check_weights(clients)
    return clients


def _class_features(labels: np.ndarray, classes: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance Gaussians centered at 3 * one_hot(class)."""
    means = 3.0 * np.eye(classes)
    return means[labels] + rng.standard_normal((len(labels), classes))


def gen_classification_clients(m: int, classes: int, total_samples: int,
                               partition: PartitionSpec, seed: int) -> list[ClientDataset]:
    """Generate Gaussian-cluster classification clients under a partition."""
    if classes < 2:
        raise ValueError("classes must be >= 2")
    if total_samples < m:
        raise ValueError("total_samples must be >= m")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    if partition.mode == "dirichlet":
        # even per-client counts conserve the total; skew lives in the labels
        counts = np.full(m, total_samples // m)
        counts[: total_samples % m] += 1
        if counts.min() < 1:
            raise RuntimeError("dirichlet partition left a client with zero samples")
        props = rng.dirichlet(np.full(classes, partition.dirichlet_alpha), size=m)
        clients = []
        for i in range(m):
            crng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, i)))
            labels = crng.choice(classes, size=counts[i], p=props[i])
            feats = _class_features(labels, classes, crng)
            clients.append(ClientDataset(i, feats, labels.astype(float), counts[i] / total_samples))
    else:  # split
        rich = max(1, round(partition.split_rich_fraction * m))
        rich_total = round(partition.split_rich_share * total_samples)
        poor = m - rich
        if poor < 1:
            raise ValueError("split partition needs at least one non-rich client")
        counts = np.empty(m, dtype=int)
        counts[:rich] = rich_total // rich
        counts[: rich_total % rich] += 1
        poor_total = total_samples - rich_total
        counts[rich:] = poor_total // poor
        counts[rich : rich + poor_total % poor] += 1
        if counts.min() < 1:
            raise RuntimeError("split partition left a client with zero samples")
        # group by label: a balanced, label-sorted pool cut into contiguous shards
        labels_pool = np.sort(np.arange(total_samples) % classes)
        order = rng.permutation(m)  # which client gets which shard
        starts = np.concatenate([[0], np.cumsum(counts[order])])
        clients = [None] * m
        for pos, i in enumerate(order):
            crng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, int(i))))
            labels = labels_pool[starts[pos] : starts[pos + 1]]
            feats = _class_features(labels, classes, crng)
            clients[i] = ClientDataset(int(i), feats, labels.astype(float),
                                       counts[i] / total_samples)
    _check_weights(clients)
    return clients


# --- line-delimited export / import ---------------------------------------

def write_examples(path: str | Path, features: np.ndarray, targets: np.ndarray):
    """One example per line: comma-separated features, then target."""
    with open(path, "w") as fh:
        for row, y in zip(features, targets):
            parts = [format(v, ".17g") for v in row] + [format(y, ".17g")]
            fh.write(",".join(parts) + "\n")


def read_examples(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    feats, targets = [], []
    with open(path) as fh:
        for line in fh:
            vals = [float(v) for v in line.strip().split(",")]
            feats.append(vals[:-1])
            targets.append(vals[-1])
    return np.asarray(feats, dtype=float), np.asarray(targets, dtype=float)


def export_clients(clients: list[ClientDataset], out_dir: str | Path):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for c in clients:
        write_examples(out_dir / f"client_{c.client_id:04d}.txt", c.features, c.targets)
