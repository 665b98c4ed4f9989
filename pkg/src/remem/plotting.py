"""Figure rendering for benchmark summaries.

Renders one series per backend as a self-contained SVG: payload size on
the x axis, mean elapsed time with min-max whiskers on the y axis (or mean
throughput in throughput mode). Deterministic mode strips the date
metadata and pins the SVG id hash salt so re-rendering the same summary is
byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "local": dict(color="#2a9d34", marker="o"),
    "vfs": dict(color="#d1342f", marker="s"),
    "remote": dict(color="#2457a8", marker="^"),
}


def _series(rows: list[dict]) -> dict[str, list[dict]]:
    by_backend: dict[str, list[dict]] = {}
    for row in rows:
        by_backend.setdefault(row["backend"], []).append(row)
    for series in by_backend.values():
        series.sort(key=lambda r: r["size_bytes"])
    return by_backend


def plot_summary(
    rows: list[dict],
    out_path,
    metric: str = "elapsed",
    deterministic: bool = False,
    title: str | None = None,
) -> Path:
    """Render summary rows (see bench.read_summary_csv) to an SVG file."""
    if not rows:
        raise ValueError("no summary rows to plot")
    if metric not in ("elapsed", "throughput"):
        raise ValueError(f"metric must be elapsed or throughput, got {metric!r}")
    out_path = Path(out_path)
    if deterministic:
        plt.rcParams["svg.hashsalt"] = "remem"
    plt.rcParams["svg.fonttype"] = "none"
    fig, ax = plt.subplots(figsize=(7, 4.5))
    try:
        for backend, series in sorted(_series(rows).items()):
            sizes_mb = [r["size_bytes"] / 1e6 for r in series]
            style = _STYLE.get(backend, {})
            if metric == "elapsed":
                means = [r["mean_ns"] / 1e6 for r in series]
                lower = [(r["mean_ns"] - r["min_ns"]) / 1e6 for r in series]
                upper = [(r["max_ns"] - r["mean_ns"]) / 1e6 for r in series]
                ax.errorbar(
                    sizes_mb,
                    means,
                    yerr=[lower, upper],
                    label=backend,
                    capsize=3,
                    **style,
                )
            else:
                ax.plot(
                    sizes_mb,
                    [r["mean_mb_s"] for r in series],
                    label=backend,
                    **style,
                )
        ax.set_xlabel("payload size (MB)")
        if metric == "elapsed":
            ax.set_ylabel("mean elapsed (ms), min-max whiskers")
            ax.set_yscale("log")
        else:
            ax.set_ylabel("mean throughput (MB/s)")
        ax.set_title(title or "memory access: local vs vfs vs remote")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        metadata = {"Date": None} if deterministic else None
        fig.savefig(out_path, format="svg", metadata=metadata)
    finally:
        plt.close(fig)
    return out_path
