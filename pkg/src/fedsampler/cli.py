"""Command-line front door.

Subcommands:
  run <config>            run an experiment, one metrics CSV per seed
  sweep <config-dir>      run every config file in a directory
  toy                     the three-client aggregation demonstration
  check-unbiased          Monte-Carlo unbiasedness report for a strategy

Exit codes: 0 success, 1 config error, 2 runtime/numeric error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from fedsampler import metrics as metrics_mod
from fedsampler.config import ConfigError, ExperimentConfig
from fedsampler.federation import run_experiment
from fedsampler.sampling import (
    STRATEGIES,
    ClientStats,
    DeltaSamplerConfig,
    cap_inclusion,
    inclusion_counts_with_replacement,
    inclusion_counts_without_replacement,
    probs_data_ratio,
    probs_delta,
    probs_fedis,
    probs_practical_update,
    probs_uniform,
)

TOY_GRADIENTS = np.array([[2.0, 2.0], [4.0, 1.0], [6.0, -3.0]])


def cmd_run(config_path: str, output: str | None, threads: int) -> int:
    cfg = ExperimentConfig.from_file(config_path)
    out_dir = Path(output or cfg.output)
    for seed in cfg.seeds:
        clients = cfg.build_clients(seed)
        _, records = run_experiment(clients, cfg.model_spec(), cfg.strategy_config(),
                                    cfg.round_config(), cfg.rounds, seed, threads)
        path = out_dir / f"{cfg.strategy}_seed{seed}.csv"
        metrics_mod.emit_csv(records, path)
        final = records[-1]
        print(f"{cfg.strategy} seed={seed}: rounds={cfg.rounds} "
              f"final_loss={final.global_loss:.6g} -> {path}")
    return 0


def cmd_sweep(config_dir: str, output: str | None, threads: int) -> int:
    paths = sorted(p for p in Path(config_dir).iterdir()
                   if p.is_file() and not p.name.startswith("."))
    if not paths:
        print(f"no config files in {config_dir}", file=sys.stderr)
        return 1
    for p in paths:
        cmd_run(str(p), output, threads)
    return 0


def toy_table() -> dict:
    """The three-client demonstration: top-2 cohorts per strategy at (1, 1)."""
    grads = TOY_GRADIENTS
    ideal = grads.mean(axis=0)  # (4, 0)

    fedis_p = probs_fedis(np.linalg.norm(grads, axis=1))
    fedis_cohort = np.sort(np.argsort(-fedis_p, kind="stable")[:2])
    diversity = np.linalg.norm(grads - ideal, axis=1)
    delta_p = probs_delta([ClientStats(diversity=z) for z in diversity],
                          DeltaSamplerConfig(1.0, 0.0))
    delta_cohort = np.sort(np.argsort(-delta_p, kind="stable")[:2])
    fedavg_cohort = np.array([0, 1])  # equal probabilities; clients 1 and 2 by convention

    rows = {}
    for name, cohort in (("fedavg", fedavg_cohort), ("fedis", fedis_cohort),
                         ("delta", delta_cohort)):
        agg = grads[cohort].mean(axis=0)
        rows[name] = {"cohort": cohort + 1, "aggregate": agg,
                      "distance": float(np.linalg.norm(agg - ideal))}
    rows["ideal"] = {"aggregate": ideal}
    return rows


def cmd_toy() -> int:
    rows = toy_table()
    ideal = rows["ideal"]["aggregate"]
    print(f"ideal global gradient: ({ideal[0]:g}, {ideal[1]:g})")
    print(f"{'strategy':<10} {'cohort':<10} {'aggregate':<16} distance")
    for name in ("fedavg", "fedis", "delta"):
        r = rows[name]
        cohort = ",".join(str(c) for c in r["cohort"])
        agg = f"({r['aggregate'][0]:g}, {r['aggregate'][1]:g})"
        print(f"{name:<10} {cohort:<10} {agg:<16} {r['distance']:.4f}")
    d = {k: rows[k]["distance"] for k in ("fedavg", "fedis", "delta")}
    assert d["delta"] < d["fedis"] < d["fedavg"], "expected distance ordering violated"
    print("ordering OK: D(delta) < D(fedis) < D(fedavg)")
    return 0


def unbiasedness_report(m: int, n: int, draws: int, strategy: str,
                        replacement: str, seed: int) -> dict:
    """Monte-Carlo check that the weighted cohort estimator matches the full sum."""
    rng = np.random.default_rng(seed)
    vectors = rng.normal(size=(m, 5))
    weights = rng.random(m)
    weights /= weights.sum()
    exact = weights @ vectors

    if strategy == "uniform":
        p = probs_uniform(m)
    elif strategy == "md":
        p = probs_data_ratio(weights)
    elif strategy in ("fedis", "cluster_is"):
        p = probs_fedis(rng.random(m) + 0.1)
    elif strategy == "delta":
        p = probs_delta([ClientStats(diversity=z, local_var=s)
                         for z, s in zip(rng.random(m), rng.random(m))])
    elif strategy in ("prac_is", "prac_delta"):
        cohort = rng.choice(m, size=n, replace=False)
        p = probs_practical_update(probs_uniform(m), cohort, rng.random(n) + 0.1)
    elif strategy == "power_of_choice":
        p = None
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    if strategy == "power_of_choice":
        d = min(m, 2 * n)
        losses = rng.random(m)
        total = np.zeros_like(exact)
        for _ in range(draws):
            cand = rng.choice(m, size=d, replace=False)
            top = cand[np.argsort(-losses[cand], kind="stable")[:n]]
            w = weights[top]
            total += (w / w.sum()) @ vectors[top]
        estimate = total / draws
    else:
        if replacement == "without":
            p = cap_inclusion(p, n)
            counts = inclusion_counts_without_replacement(p, n, draws, rng)
        else:
            counts = inclusion_counts_with_replacement(p, n, draws, rng)
        estimate = (counts * weights / (n * p * draws)) @ vectors
    rel_error = float(np.linalg.norm(estimate - exact) / np.linalg.norm(exact))
    return {"exact": exact, "estimate": estimate, "rel_error": rel_error,
            "passed": rel_error <= 0.02}


def cmd_check_unbiased(m, n, draws, strategy, replacement, seed) -> int:
    if draws < 10_000:
        print("draws must be >= 10000", file=sys.stderr)
        return 1
    r = unbiasedness_report(m, n, draws, strategy, replacement, seed)
    status = "PASS" if r["passed"] else "FAIL"
    print(f"{strategy} ({replacement} replacement), m={m} n={n} draws={draws}: "
          f"rel_error={r['rel_error']:.5f} -> {status}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedsampler",
                                     description="Federated client-sampling simulator")
    parser.add_argument("--threads", type=int, default=1,
                        help="cohort-training thread count (default 1)")
    parser.add_argument("--output", type=str, default=None,
                        help="output directory (overrides the config's)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")
    p_sweep = sub.add_parser("sweep", help="run every config in a directory")
    p_sweep.add_argument("config_dir")
    sub.add_parser("toy", help="three-client aggregation demonstration")
    p_chk = sub.add_parser("check-unbiased", help="Monte-Carlo unbiasedness report")
    p_chk.add_argument("--m", type=int, default=10)
    p_chk.add_argument("--n", type=int, default=3)
    p_chk.add_argument("--draws", type=int, default=100_000)
    p_chk.add_argument("--strategy", choices=STRATEGIES, default="fedis")
    p_chk.add_argument("--replacement", choices=["with", "without"], default="without")
    p_chk.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.output, args.threads)
        if args.command == "sweep":
            return cmd_sweep(args.config_dir, args.output, args.threads)
        if args.command == "toy":
            return cmd_toy()
        return cmd_check_unbiased(args.m, args.n, args.draws, args.strategy,
                                  args.replacement, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FloatingPointError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
