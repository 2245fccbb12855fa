"""Render report tables to PNG files with the non-interactive Agg backend."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_reserve_development", "plot_quantile_fan", "plot_layer_schedule", "plot_line_reports"]

_FAN = (("q05", "q95", 0.15), ("q25", "q75", 0.3))


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # no version stamp, so the bytes depend only on the data
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_reserve_development(rows: list[dict], path) -> Path:
    """Paid amount, best-estimate ultimate loss and its quantile fan against time."""
    t = [r["t"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for lo, hi, alpha in _FAN:
        ax.fill_between(t, [r[lo] for r in rows], [r[hi] for r in rows], color="C0", alpha=alpha, step="post",
                        label=f"{lo}-{hi}")
    ax.step(t, [r["ultimate_best_estimate"] for r in rows], where="post", color="C0", label="best estimate")
    ax.step(t, [r["paid"] for r in rows], where="post", color="k", label="paid")
    ax.set_xlabel("t")
    ax.set_ylabel("amount")
    ax.legend(loc="upper left", fontsize="small")
    return _save(fig, path)


def plot_quantile_fan(rows: list[dict], path) -> Path:
    """Mean and quantile bands of simulated paid-claims paths."""
    t = [r["t"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for lo, hi, alpha in _FAN:
        ax.fill_between(t, [r[lo] for r in rows], [r[hi] for r in rows], color="C1", alpha=alpha, label=f"{lo}-{hi}")
    ax.plot(t, [r["q50"] for r in rows], color="C1", label="median")
    ax.plot(t, [r["mean"] for r in rows], color="k", linestyle="--", label="mean")
    ax.set_xlabel("t")
    ax.set_ylabel("paid")
    ax.legend(loc="upper left", fontsize="small")
    return _save(fig, path)


def plot_layer_schedule(rows: list[dict], path) -> Path:
    """Expected payment per date, one bar group per layer."""
    layers = sorted({r["layer"] for r in rows})
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    width = 0.8 / max(len(layers), 1)
    for i, layer in enumerate(layers):
        sub = [r for r in rows if r["layer"] == layer]
        xs = [j + i * width for j in range(len(sub))]
        ax.bar(xs, [r["expected_payment"] for r in sub], width=width, label=f"layer {layer}")
        ax.set_xticks(range(len(sub)), [f"{r['date']:g}" for r in sub])
    ax.set_xlabel("payment date")
    ax.set_ylabel("expected payment")
    ax.legend(fontsize="small")
    return _save(fig, path)


def plot_line_reports(rows: list[dict], path) -> Path:
    """Best-estimate ultimate loss per line against observation time."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for line in (1, 2):
        sub = [r for r in rows if r["line"] == line]
        t = [r["t"] for r in sub]
        ax.fill_between(t, [r["q05"] for r in sub], [r["q95"] for r in sub], color=f"C{line}", alpha=0.15)
        ax.plot(t, [r["ultimate_best_estimate"] for r in sub], color=f"C{line}", marker="o", label=f"line {line}")
        ax.plot(t, [r["paid"] for r in sub], color=f"C{line}", linestyle=":")
    ax.set_xlabel("t")
    ax.set_ylabel("amount")
    ax.legend(fontsize="small")
    return _save(fig, path)
