"""Score-vs-MOS scatter and MOS histogram series.

The CSV files are the contract; SVG renderings are produced only when
matplotlib is importable.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from .metrics import ScoreTable
from .subjective import MosTable

log = logging.getLogger(__name__)


def mos_histogram(mos: MosTable, bins: int = 10) -> tuple[np.ndarray, np.ndarray]:
    counts, edges = np.histogram([r.mos for r in mos.values()], bins=bins, range=(0.0, 100.0))
    return counts, edges


def write_figures(tables: Sequence[ScoreTable], mos: MosTable, out_dir: str | Path,
                  bins: int = 10) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    counts, edges = mos_histogram(mos, bins)
    path = out_dir / "mos_hist.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
    written.append(path)

    series = {}
    for t in tables:
        ids = [i for i in mos if i in t.scores]
        series[t.model_name] = (ids, [t.scores[i] for i in ids], [mos[i].mos for i in ids])
        path = out_dir / f"scatter_{t.model_name}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["image_id", "score", "mos"])
            for i, s, m in zip(*series[t.model_name]):
                w.writerow([i, repr(float(s)), repr(float(m))])
        written.append(path)

    try:
        import matplotlib

        matplotlib.use("Agg")
        from matplotlib import pyplot as plt
    except ImportError:
        log.info("matplotlib not available; skipping SVG output")
        return written

    with matplotlib.rc_context({"svg.hashsalt": "uiqa", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge", edgecolor="black")
        ax.set_xlabel("MOS")
        ax.set_ylabel("images")
        fig.tight_layout()
        path = out_dir / "mos_hist.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
        for name, (_, s, m) in series.items():
            fig, ax = plt.subplots(figsize=(4, 3))
            finite = np.isfinite(s)
            ax.scatter(np.asarray(s)[finite], np.asarray(m)[finite], s=6)
            ax.set_xlabel(f"{name} score")
            ax.set_ylabel("MOS")
            fig.tight_layout()
            path = out_dir / f"scatter_{name}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    return written
