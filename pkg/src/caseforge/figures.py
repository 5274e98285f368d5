"""Report figures rendered to files; no display server required."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_coverage_figure(report: Mapping[str, Any], path: Path) -> Path | None:
    """Bar chart of test cases per story with the minimum-count threshold."""
    counts: Mapping[str, int] = report["case_counts"]
    if not counts:
        return None
    stories = sorted(counts)
    values = [counts[s] for s in stories]
    min_cases = report["min_cases"]

    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(stories) + 2.0), 3.5))
    colors = ["#d9534f" if v < min_cases else "#5b8dd9" for v in values]
    ax.bar(stories, values, color=colors)
    ax.axhline(min_cases, color="#444444", linestyle="--", linewidth=1, label=f"minimum ({min_cases})")
    ax.set_ylabel("test cases")
    ax.set_title("Test cases per story")
    ax.tick_params(axis="x", rotation=45)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_latency_figure(report: Mapping[str, Any], path: Path) -> Path | None:
    """Summary bars for generation latency against the SLO line."""
    if report["n"] == 0:
        return None
    labels = ["mean", "median", "p95", "max"]
    values = [report[k] for k in labels]
    slo = report["slo_millis"]

    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.bar(labels, values, color="#5b8dd9")
    ax.axhline(slo, color="#d9534f", linestyle="--", linewidth=1, label=f"SLO ({slo} ms)")
    ax.set_ylabel("milliseconds")
    ax.set_title(f"Generation latency (n={report['n']})")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_report_figures(report: Mapping[str, Any], out_dir: Path) -> list[Path]:
    """Write every applicable figure for a full analysis document."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    cov = render_coverage_figure(report["coverage"], out_dir / "coverage.png")
    if cov:
        written.append(cov)
    lat = render_latency_figure(report["latency"], out_dir / "latency.png")
    if lat:
        written.append(lat)
    return written
