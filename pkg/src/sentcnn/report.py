"""Report rendering: aligned text tables and percent-change figures.

The report path always produces both forms side by side: the delimited
aggregate (written by :mod:`sentcnn.sweep`) and a matplotlib figure saved
next to it, mirroring the mean/min/max-over-replications table format.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from sentcnn.evaluation import percent_change
from sentcnn.sweep import AggregateRow


def _baseline_index(aggregate: Sequence[AggregateRow], baseline_value: str) -> int:
    for i, row in enumerate(aggregate):
        if row.value == baseline_value:
            return i
    raise ValueError(f"baseline value {baseline_value!r} not present in results")


def render_report(aggregate: Sequence[AggregateRow], baseline_value: str) -> str:
    """Plain-text table of value, mean (min, max) and percent change versus
    the baseline row, in the aggregate's value order."""
    b = _baseline_index(aggregate, baseline_value)
    changes = percent_change([row.mean for row in aggregate], b)
    cells = [
        (row.value, f"{row.mean:.2f} ({row.min:.2f}, {row.max:.2f})", f"{chg:+.2f}%")
        for row, chg in zip(aggregate, changes)
    ]
    headers = ("value", "mean (min, max)", "change vs " + baseline_value)
    widths = [
        max(len(headers[c]), max(len(row[c]) for row in cells)) for c in range(3)
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in cells:
        lines.append(
            "  ".join(
                cell.ljust(w) if c == 0 else cell.rjust(w)
                for c, (cell, w) in enumerate(zip(row, widths))
            ).rstrip()
        )
    return "\n".join(lines) + "\n"


def plot_percent_change(
    aggregate: Sequence[AggregateRow],
    baseline_value: str,
    out_path: str | Path,
    *,
    title: str = "",
    metric: str = "score",
) -> Path:
    """Save the percent-change curve (with the min/max band) as a figure."""
    b = _baseline_index(aggregate, baseline_value)
    base_mean = aggregate[b].mean
    xs = range(len(aggregate))
    mean_chg = percent_change([row.mean for row in aggregate], b)
    lo_chg = [100.0 * (row.min - base_mean) / base_mean for row in aggregate]
    hi_chg = [100.0 * (row.max - base_mean) / base_mean for row in aggregate]

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.fill_between(xs, lo_chg, hi_chg, alpha=0.25, label="min..max over replications")
    ax.plot(xs, mean_chg, marker="o", label="mean")
    ax.axhline(0.0, color="gray", linewidth=0.8, linestyle="--")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([row.value for row in aggregate], rotation=30, ha="right")
    ax.set_ylabel(f"% change in {metric} vs {baseline_value}")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
