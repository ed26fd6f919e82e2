"""Figure rendering for benchmark reports.

Performance profiles are rendered as step plots on a logarithmic ratio
axis, one line per solver, and written straight to file.  The data itself
always goes to CSV as well; figures are a convenience layer on top.
"""

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import ProfileTable

_METRIC_LABELS = {
    "iterations": "iteration ratio",
    "time": "wall-time ratio",
}


def save_profile_figure(profile: ProfileTable, path, title=None):
    """Render one performance profile to ``path`` (format from the suffix)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    tau_max = 1.0
    for points in profile.points.values():
        for tau, _ in points:
            if math.isfinite(tau) and tau > tau_max:
                tau_max = tau
    tau_max = max(tau_max * 1.1, 2.0)
    for solver in sorted(profile.points):
        points = profile.points[solver]
        taus = [t for t, _ in points] + [tau_max]
        rhos = [r for _, r in points] + [points[-1][1] if points else 0.0]
        ax.step(taus, rhos, where="post", label=solver)
    ax.set_xscale("log")
    ax.set_xlim(1.0, tau_max)
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel(_METRIC_LABELS.get(profile.metric, "cost ratio"))
    ax.set_ylabel("fraction of instances")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="lower right", fontsize=9)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
