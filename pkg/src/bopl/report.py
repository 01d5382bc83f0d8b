"""Figure rendering for training traces and sweep results.

Renders the per-round curves (empirical risk with its excess-risk bound,
gradient norm, self-normalized training reward) to a PNG next to a small
summary CSV, so a run can be eyeballed without a notebook.  Uses the Agg
backend; nothing here opens a window.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .boosting import TrainTrace


def render_trace_figure(trace: TrainTrace, out_png) -> None:
    ts = np.array([s.t for s in trace.rounds])
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.4))

    ax = axes[0]
    ax.plot(ts, [s.emp_risk for s in trace.rounds], label="empirical risk")
    if any(s.surrogate_risk is not None for s in trace.rounds):
        ax.plot(ts, [s.surrogate_risk for s in trace.rounds],
                label="surrogate risk", linestyle="--")
    if any(s.bound is not None for s in trace.rounds):
        ax.plot(ts, [
            trace.min_emp_risk + s.bound if s.bound is not None else np.nan
            for s in trace.rounds
        ], label="risk bound", linestyle=":")
    ax.axhline(trace.min_emp_risk, color="gray", linewidth=0.8, label="min risk")
    ax.set_xlabel("round")
    ax.set_ylabel("risk")
    ax.legend(fontsize=8)

    ax = axes[1]
    ax.plot(ts, [s.grad_norm for s in trace.rounds])
    ax.set_xlabel("round")
    ax.set_ylabel("gradient norm")
    ax.set_yscale("log")

    ax = axes[2]
    ax.plot(ts, [s.snips_train for s in trace.rounds])
    ax.set_xlabel("round")
    ax.set_ylabel("train reward (SNIPS)")

    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def write_trace_summary(trace: TrainTrace, meta: dict, out_csv) -> None:
    last = trace.rounds[-1] if trace.rounds else None
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "rounds_completed", "stop_reason", "min_emp_risk", "initial_gap",
            "final_emp_risk", "final_bound", "final_snips_train", "config",
        ])
        writer.writerow([
            len(trace.rounds),
            trace.stop_reason,
            repr(trace.min_emp_risk),
            repr(trace.initial_gap),
            "" if last is None else repr(last.emp_risk),
            "" if last is None or last.bound is None else repr(last.bound),
            "" if last is None else repr(last.snips_train),
            json.dumps(meta.get("config", {}), sort_keys=True),
        ])


def render_sweep_figure(rows: list[dict], out_png) -> None:
    """Mean validation reward by rank for a sweep results table."""
    rewards = [float(r["mean_validation_reward"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(range(1, len(rewards) + 1), rewards)
    ax.set_xlabel("rank")
    ax.set_ylabel("mean validation reward")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def render_report(trace: TrainTrace, meta: dict, out_dir, stem: str = "trace") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    png = out_dir / f"{stem}_curves.png"
    summary = out_dir / f"{stem}_summary.csv"
    render_trace_figure(trace, png)
    write_trace_summary(trace, meta, summary)
    return [png, summary]
