"""Optional PNG figures for a run report (matplotlib, Agg backend)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# (series name, y label, log-scale y)
FIGURES = (
    ("drift_n", "drift", False),
    ("l2_log_rate_n", "L2 distance of n^-1 log|c(n)| to log L", True),
    ("dP_root_n", "d_P(|c(n)|^(1/n), L)", True),
    ("raw_growth_n", "raw growth", False),
    ("smooth_growth_n", "smoothed growth", False),
)


def _collect(report) -> dict:
    out = defaultdict(lambda: defaultdict(list))
    for s in report.seeds:
        for name, xv, yv in s.series:
            out[name][s.seed].append((xv, yv))
    return out


def render_report(report, out_dir, prefix: str) -> dict:
    """One figure per diagnostic, one line per seed; return ``{key: path}``."""
    out_dir = Path(out_dir)
    series = _collect(report)
    paths = {}
    for name, label, logy in FIGURES:
        if name not in series:
            continue
        fig, ax = plt.subplots(figsize=(5.0, 3.5))
        for seed, pts in sorted(series[name].items()):
            if logy:
                # the last horizon is the estimate itself, so its distance is exactly 0
                pts = [p for p in pts if p[1] > 0] or [(pts[0][0], float("nan"))]
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", ms=3, lw=1, label=f"seed {seed}")
        ax.set_xscale("log")
        if logy and any(y > 0 for pts in series[name].values() for _, y in pts):
            ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel(label)
        ax.set_title(f"{report.config['name']}: {name}")
        if len(series[name]) <= 8:
            ax.legend(fontsize=7)
        fig.tight_layout()
        path = out_dir / f"{prefix}_{name}.png"
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
        paths[f"plot_{name}"] = path
    return paths
