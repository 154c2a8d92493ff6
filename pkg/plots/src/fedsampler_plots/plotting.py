"""Read fedsampler metrics CSVs and render comparison figures.

The only coupling to the simulator is the CSV file format: a leading
``# fedsampler-metrics v1`` marker line, a comma-separated header, and
one row per round.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SCHEMA_MARKER = "# fedsampler-metrics v1"
COLUMNS = ("global_loss", "full_grad_norm", "update_gap", "update_variance")
DEFAULT_COLUMN = "global_loss"
DEFAULT_WINDOW = 10


class SchemaError(ValueError):
    """Input file is not a fedsampler metrics CSV."""


@dataclass
class SeriesSpec:
    """One curve: a legend label, a metrics CSV and the column to plot."""

    label: str
    path: Path
    column: str = DEFAULT_COLUMN

    def __post_init__(self):
        self.path = Path(self.path)
        if self.column not in COLUMNS:
            raise ValueError(
                f"unknown column {self.column!r}; choose from {', '.join(COLUMNS)}")


def load_series(spec: SeriesSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return (rounds, values) for one series; validates the schema marker."""
    with open(spec.path) as fh:
        if fh.readline().strip() != SCHEMA_MARKER:
            raise SchemaError(f"{spec.path}: missing metrics schema marker")
        reader = csv.DictReader(fh)
        if spec.column not in (reader.fieldnames or []):
            raise SchemaError(f"{spec.path}: no column {spec.column!r}")
        rounds, values = [], []
        for row in reader:
            rounds.append(int(row["round"]))
            values.append(float(row[spec.column]))
    if not rounds:
        raise SchemaError(f"{spec.path}: no data rows")
    return np.asarray(rounds), np.asarray(values)


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; window 1 returns the values unchanged."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if window == 1:
        return np.asarray(values, dtype=float)
    values = np.asarray(values, dtype=float)
    cum = np.cumsum(values)
    out = np.empty_like(values)
    out[:window] = cum[:window] / np.arange(1, window + 1)
    out[window:] = (cum[window:] - cum[:-window]) / window
    return out


def plot_compare(series: list[SeriesSpec], out: str | Path, *,
                 log_scale: bool = False, window: int = DEFAULT_WINDOW) -> Path:
    """Render one figure with a labeled curve per series."""
    if not series:
        raise ValueError("need at least one series")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    columns = set()
    for spec in series:
        rounds, values = load_series(spec)
        values = moving_average(values, window)
        if log_scale:
            values = np.log10(np.maximum(values, 1e-300))
        ax.plot(rounds, values, label=spec.label)
        columns.add(spec.column)
    ylabel = "/".join(sorted(columns))
    ax.set_xlabel("round")
    ax.set_ylabel(f"log10 {ylabel}" if log_scale else ylabel)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    plt.close(fig)
    return out
