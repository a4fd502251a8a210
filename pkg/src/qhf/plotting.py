"""SVG line charts of run results (one file per observable)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .stats import CumulantSeries  # noqa: E402

# deterministic SVG output (no random ids, no timestamps)
matplotlib.rcParams["svg.hashsalt"] = "qhf"
matplotlib.rcParams["svg.fonttype"] = "none"

_TITLES = {
    "Q": ("heat", "<Q>", "<<Q^2>>", "F"),
    "J": ("current", "<J>", "<<J^2>>", "F_J"),
}


def _line(path: Path, t, y, ylabel, title, reference=None, ref_label=None, hline=None):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ok = np.isfinite(y)
    ax.plot(np.asarray(t)[ok], np.asarray(y)[ok], marker="o", ms=2.5, lw=1.2, label="tensor train")
    if reference is not None:
        ax.plot(reference[0], reference[1], "k--", lw=1.0, label=ref_label or "reference")
        ax.legend(frameon=False, fontsize=8)
    if hline is not None:
        ax.axhline(hline, color="0.6", ls=":", lw=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_cumulants(cs: CumulantSeries, directory: str | Path, prefix: str = "", references: dict | None = None):
    """Write ``<prefix>mean.svg``, ``<prefix>variance.svg`` and ``<prefix>fano.svg``.

    ``references`` may map ``"mean"``/``"variance"`` to ``(t, y)`` curves
    drawn dashed for comparison.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    references = references or {}
    name, mlab, vlab, flab = _TITLES["J" if cs.scaled else "Q"]
    out = [_line(directory / f"{prefix}mean.svg", cs.times, cs.mean, mlab, f"mean {name}",
                 references.get("mean"), "exact")]
    if cs.cumulants.shape[1] >= 2:
        out.append(_line(directory / f"{prefix}variance.svg", cs.times, cs.variance, vlab, f"{name} variance",
                         references.get("variance"), "exact"))
        out.append(_line(directory / f"{prefix}fano.svg", cs.times, cs.fano, flab, f"{name} Fano factor",
                         hline=1.0 if cs.scaled else None))
    return out
