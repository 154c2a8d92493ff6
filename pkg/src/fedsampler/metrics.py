"""Per-round diagnostics and the CSV record stream.

CSV schema: a leading ``# fedsampler-metrics v1`` marker line, then a
comma-separated header, then one row per round.  Reals are printed with
17 significant digits so re-import is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

SCHEMA_MARKER = "# fedsampler-metrics v1"


@dataclass
class RoundMetrics:
    round: int
    global_loss: float
    full_grad_norm: float
    update_gap: float
    update_variance: float
    phi_ratio: float
    selected: tuple  # cohort client ids
    probabilities_entropy: float
    wall_ms: float


COLUMNS = [f.name for f in fields(RoundMetrics)]


def update_gap(cohort_grad: np.ndarray, full_grad: np.ndarray) -> float:
    """L2 distance between the cohort's surrogate gradient and the full gradient."""
    cohort_grad = np.asarray(cohort_grad, dtype=float)
    full_grad = np.asarray(full_grad, dtype=float)
    if cohort_grad.shape != full_grad.shape:
        raise ValueError("gradient dimension mismatch")
    return float(np.linalg.norm(cohort_grad - full_grad))


def phi_ratio(scores) -> float:
    """Variance ratio m * sum(c^2) / (sum c)^2; >= 1 by Cauchy-Schwarz."""
    c = np.asarray(scores, dtype=float)
    if c.size == 0:
        raise ValueError("empty score vector")
    if np.any(c <= 0):
        raise ValueError("scores must be positive")
    total = c.sum()
    return float(len(c) * (c * c).sum() / (total * total))


def entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def _format_value(name: str, value) -> str:
    if name == "round":
        return str(int(value))
    if name == "selected":
        return ";".join(str(int(i)) for i in value)
    return format(float(value), ".17g")


def emit_csv(records, path: str | Path, *, deterministic_timing: bool = True):
    """Write the metrics stream; wall_ms is zeroed by default for reproducibility."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(SCHEMA_MARKER + "\n")
        fh.write(",".join(COLUMNS) + "\n")
        for rec in records:
            row = []
            for name in COLUMNS:
                value = getattr(rec, name)
                if name == "wall_ms" and deterministic_timing:
                    value = 0.0
                row.append(_format_value(name, value))
            fh.write(",".join(row) + "\n")


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Load a metrics CSV into column arrays; validates the schema marker."""
    path = Path(path)
    with open(path) as fh:
        marker = fh.readline().strip()
        if marker != SCHEMA_MARKER:
            raise ValueError(f"{path}: missing metrics schema marker")
        header = fh.readline().strip().split(",")
        cols: dict[str, list] = {name: [] for name in header}
        for line in fh:
            for name, raw in zip(header, line.rstrip("\n").split(",")):
                if name == "selected":
                    cols[name].append(tuple(int(v) for v in raw.split(";") if v))
                else:
                    cols[name].append(float(raw))
    return {name: (np.asarray(vals) if name != "selected" else vals)
            for name, vals in cols.items()}
