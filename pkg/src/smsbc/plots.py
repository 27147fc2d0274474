"""Render run figures from the event log, next to the line-delimited output.

Three figures per run: ledger balance traces per site, the lifecycle of every
outbound log row over time, and per-tick channel activity at the message
center. All are plain matplotlib, written as PNG files.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .events import EventRecord

_STATUS_COLORS = {
    "PENDING": "#999999",
    "SENT": "#1f77b4",
    "DELIVERED": "#2ca02c",
    "CONFIRMED": "#17becf",
    "FAILED": "#d62728",
}

_SITES = ("site1", "site2")


def _balance_traces(records: list[EventRecord]) -> dict[str, dict[int, tuple[list, list]]]:
    traces: dict[str, dict[int, tuple[list, list]]] = {s: {} for s in _SITES}
    for rec in records:
        if rec.component not in traces:
            continue
        if rec.event in ("ledger_init", "ledger_apply"):
            account = rec.details["account"]
            ticks, balances = traces[rec.component].setdefault(account, ([], []))
            ticks.append(rec.tick)
            balances.append(rec.details["balance"])
    return traces


def plot_balances(records: list[EventRecord], path: Path) -> None:
    traces = _balance_traces(records)
    fig, axes = plt.subplots(len(_SITES), 1, sharex=True, figsize=(8, 6))
    for ax, site in zip(axes, _SITES):
        for account in sorted(traces[site]):
            ticks, balances = traces[site][account]
            ax.step(ticks, [b / 100 for b in balances], where="post",
                    marker=".", label=f"account {account}")
        ax.set_ylabel(f"{site} balance")
        ax.grid(True, alpha=0.3)
        if traces[site]:
            ax.legend(loc="best", fontsize=8)
    axes[-1].set_xlabel("tick")
    fig.suptitle("Ledger balances")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_outbox(records: list[EventRecord], path: Path) -> None:
    # row index per (site, msgid) in order of first appearance
    order: dict[tuple[str, str], int] = {}
    points = defaultdict(list)  # status -> (ticks, rows)
    for rec in records:
        if rec.component not in _SITES:
            continue
        if rec.event == "outbox_insert":
            key = (rec.component, rec.details["msgid"])
            order.setdefault(key, len(order))
            points["PENDING"].append((rec.tick, order[key]))
        elif rec.event == "outbox_status":
            key = (rec.component, rec.details["msgid"])
            if key in order:
                points[rec.details["status"]].append((rec.tick, order[key]))
    fig, ax = plt.subplots(figsize=(8, 5))
    for status, color in _STATUS_COLORS.items():
        if points[status]:
            xs, ys = zip(*points[status])
            ax.scatter(xs, ys, s=18, c=color, label=status)
    ax.set_xlabel("tick")
    ax.set_ylabel("outbound log row")
    ax.set_title("Outbound record lifecycle")
    ax.grid(True, alpha=0.3)
    if order:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_channel(records: list[EventRecord], path: Path) -> None:
    kinds = ("submitted", "delivered", "attempt_lost", "expired")
    per_tick: dict[str, Counter] = {k: Counter() for k in kinds}
    for rec in records:
        if rec.component == "smsc" and rec.event in per_tick:
            per_tick[rec.event][rec.tick] += 1
    fig, ax = plt.subplots(figsize=(8, 4))
    last = max((rec.tick for rec in records), default=0)
    ticks = list(range(last + 1))
    for kind in kinds:
        counts = per_tick[kind]
        if counts:
            ax.plot(ticks, [counts.get(t, 0) for t in ticks],
                    drawstyle="steps-mid", label=kind)
    ax.set_xlabel("tick")
    ax.set_ylabel("segments")
    ax.set_title("Message center activity")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_figures(records: list[EventRecord], out_dir: Path, prefix: str) -> list[Path]:
    """Write the three run figures; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, renderer in (("balances", plot_balances),
                           ("outbox", plot_outbox),
                           ("channel", plot_channel)):
        path = out_dir / f"{prefix}_{name}.png"
        renderer(records, path)
        paths.append(path)
    return paths
