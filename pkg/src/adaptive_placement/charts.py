"""
SVG line charts of campaign metrics (optional ``charts`` extra).

Charts are drawn from the metrics table alone: one file per metric, one line
per mode, rounds on the x axis.
"""

from __future__ import annotations

import importlib.util
from pathlib import Path

import pandas as pd

CHART_METRICS: dict[str, str] = {
    "downtime_pct": "Downtime (%)",
    "app_quality_pct": "Application quality (%)",
    "energy_kwh": "Energy (kWh)",
    "co2_g": "Emissions (gCO2)",
}


def charts_available() -> bool:
    """Return True when matplotlib can be imported."""
    return importlib.util.find_spec("matplotlib") is not None


def write_charts(frame: pd.DataFrame, output_dir: str | Path) -> list[Path]:
    """
    Write ``<metric>.svg`` for every charted metric.

    Raises:
        ImportError: If matplotlib is not installed.
    """
    if not charts_available():
        raise ImportError(
            "matplotlib is required for charts. Install with: pip install adaptive-placement[charts]"
        )
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with matplotlib.rc_context({"svg.hashsalt": "adaptive-placement"}):
        for metric, label in CHART_METRICS.items():
            fig, ax = plt.subplots(figsize=(6, 4))
            for mode, group in frame.groupby("mode", sort=False):
                ax.plot(group["round"], group[metric], marker="o", label=str(mode))
            ax.set_xlabel("Round")
            ax.set_ylabel(label)
            ax.grid(True, alpha=0.3)
            ax.legend()
            path = out / f"{metric}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    return written
