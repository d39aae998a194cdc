"""Persistence and figure rendering for experiment runs.

CSV holds one row per (seed, checkpoint) with a mandatory header; JSON
holds the summary with a config echo and version string.  Figures are
rendered next to the delimited output with a matching stem.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import __version__  # noqa: E402
from .harness import ROW_FIELDS, ExperimentConfig  # noqa: E402


def write_csv(rows: list[dict], path: str) -> None:
    # orbit tables use the canonical schema; suite tables carry their own
    fields = ROW_FIELDS if rows and all(k in rows[0] for k in ROW_FIELDS) \
        else (list(rows[0]) if rows else list(ROW_FIELDS))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in fields})


def write_json(config: ExperimentConfig, summary: dict, path: str,
               criteria: Optional[dict] = None) -> None:
    payload = {
        "version": __version__,
        "config": dataclasses.asdict(config),
        "summary": summary,
        "criteria": criteria or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=str)
        fh.write("\n")


def _stem(path: str) -> str:
    base, _ = os.path.splitext(path)
    return base


def render_figures(config: ExperimentConfig, result: dict, out_path: str) -> list[str]:
    """Write experiment figures next to the data file; returns the paths."""
    summary = result.get("summary", {})
    rows = result.get("rows", [])
    stem = _stem(out_path)
    written = []

    if summary.get("experiment") == "weak_convergence":
        cps = summary["checkpoints"]
        ns = [c["n"] for c in cps]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.fill_between(ns, [c["q25"] for c in cps], [c["q75"] for c in cps],
                        alpha=0.3, label="interquartile band")
        ax.plot(ns, [c["median"] for c in cps], marker="o", label="median")
        ax.plot(ns, [c["median_prediction"] for c in cps], ls="--",
                label="truncated-mean prediction")
        ax.set_xscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("S_n / (n log n)")
        ax.legend()
        fig.tight_layout()
        path = stem + "_ratio.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    elif summary.get("experiment") == "trimmed_law" and rows:
        import collections
        by_seed = collections.defaultdict(list)
        for r in rows:
            by_seed[r["seed"]].append((r["n"], r["ratio_trimmed"]))
        fig, ax = plt.subplots(figsize=(6, 4))
        for seed, pts in list(by_seed.items())[:50]:
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    color="tab:blue", alpha=0.2, lw=0.8)
        ax.axhline(1.0, color="k", ls="--", lw=1)
        ax.set_xscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("trimmed ratio")
        ax.set_title(f"psi = {config.psi_expr}")
        fig.tight_layout()
        path = stem + "_trajectories.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    elif summary.get("experiment") == "phi_concentration":
        devs = [p["tail_deviation"] for p in summary.get("per_seed", [])]
        if devs:
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.hist(devs, bins=40)
            ax.axvline(1.0, color="k", ls="--", lw=1)
            ax.set_xlabel("max |phi_m - 2m| / m^0.75 over tail grid")
            ax.set_ylabel("orbits")
            fig.tight_layout()
            path = stem + "_deviation.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(path)

    elif "defects" in summary:
        pts = summary["defects"]
        fig, ax = plt.subplots(figsize=(6, 4))
        ns = [d["k"] + d["ell"] for d in pts if not d["oracle"]]
        vals = [d["defect"] for d in pts if not d["oracle"]]
        ax.plot(ns, vals, marker="o", label="orbit")
        ons = [d["k"] + d["ell"] for d in pts if d["oracle"]]
        ovals = [d["defect"] for d in pts if d["oracle"]]
        if ons:
            ax.plot(ons, ovals, marker="s", label="iid oracle")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n = k + l")
        ax.set_ylabel("characteristic-function defect")
        ax.legend()
        fig.tight_layout()
        path = stem + "_defect.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written
