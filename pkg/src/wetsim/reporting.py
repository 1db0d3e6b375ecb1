"""Campaign artifacts: CSV tables, a metadata sidecar, and rendered figures.

CSV is the data contract (schema versioned via a column); figures are plain
PNG renderings of the same numbers for quick visual checks.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from wetsim.simulate import CampaignSummary, SimConfig  # noqa: E402

SCHEMA_VERSION = 1

SUMMARY_FIELDS = [
    "schema_version",
    "policy",
    "num_antennas",
    "num_ers",
    "feedback_len",
    "num_clusters",
    "power",
    "snr_db",
    "sigma",
    "blocks",
    "rng_seed",
    "mean_harvested_all",
    "mean_harvested_selected",
    "mean_phase_err_pct",
    "mean_mag_err_pct",
    "mean_solver_t",
    "selection_max_min_ratio",
]

BLOCK_FIELDS = [
    "schema_version",
    "point",
    "block",
    "er",
    "harvested",
    "in_selected_cluster",
    "solver_t",
    "solver_status",
    "rank_ratio",
    "phase_err_pct",
    "mag_err_pct",
]


def summary_row(summary: CampaignSummary) -> dict:
    """Flatten one campaign into a summary.csv row."""
    cfg = summary.config
    freq = summary.selection_frequency
    fmin = float(freq.min())
    ratio = float(freq.max() / fmin) if fmin > 0 else float("inf")
    return {
        "schema_version": SCHEMA_VERSION,
        "policy": cfg.policy,
        "num_antennas": cfg.num_antennas,
        "num_ers": cfg.num_ers,
        "feedback_len": cfg.feedback_len,
        "num_clusters": cfg.num_clusters,
        "power": cfg.power,
        "snr_db": cfg.snr_db,
        "sigma": cfg.noise_sigma(),
        "blocks": summary.num_blocks,
        "rng_seed": cfg.rng_seed,
        "mean_harvested_all": summary.mean_harvested_all,
        "mean_harvested_selected": summary.mean_harvested_selected,
        "mean_phase_err_pct": summary.mean_phase_err_pct,
        "mean_mag_err_pct": summary.mean_mag_err_pct,
        "mean_solver_t": summary.mean_solver_t,
        "selection_max_min_ratio": ratio,
    }


def write_summary_csv(path, summaries: list[CampaignSummary]) -> None:
    """One row per config point."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for s in summaries:
            writer.writerow(summary_row(s))


def write_blocks_csv(path, summaries: list[CampaignSummary]) -> None:
    """One row per block per ER, across all config points."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BLOCK_FIELDS)
        for point, s in enumerate(summaries):
            for r in s.block_results:
                members = set(r.selected_members)
                for er, value in enumerate(r.harvested):
                    writer.writerow(
                        [SCHEMA_VERSION, point, r.block_index, er, repr(float(value)),
                         int(er in members), repr(r.solver_t), r.solver_status,
                         repr(r.rank_ratio), repr(r.phase_err_pct), repr(r.mag_err_pct)]
                    )


def write_meta_json(path, configs: list[SimConfig], extra: dict | None = None) -> None:
    """Sidecar recording every mode flag so the CSVs are self-describing."""
    from wetsim import __version__

    payload = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "points": [dataclasses.asdict(cfg) for cfg in configs],
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=str)
        fh.write("\n")


def write_campaign_outputs(out_dir, summaries: list[CampaignSummary], extra_meta: dict | None = None) -> Path:
    """Write the full artifact set (summary.csv, blocks.csv, meta.json) to a
    directory, creating it if needed.  Returns the directory path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(out / "summary.csv", summaries)
    write_blocks_csv(out / "blocks.csv", summaries)
    write_meta_json(out / "meta.json", [s.config for s in summaries], extra_meta)
    return out


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def campaign_figure(summary: CampaignSummary, path) -> None:
    """Two panels: harvested-energy distribution and S*-selection frequency."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    sel = [r.mean_selected_harvest for r in summary.block_results]
    allm = [float(r.harvested.mean()) for r in summary.block_results]
    ax1.hist(allm, bins=30, alpha=0.6, label="all ERs")
    ax1.hist(sel, bins=30, alpha=0.6, label="S* members")
    ax1.set_xlabel("mean harvested energy per block")
    ax1.set_ylabel("blocks")
    ax1.legend()
    ax2.bar(np.arange(summary.selection_frequency.size), summary.selection_frequency)
    ax2.set_xlabel("ER index")
    ax2.set_ylabel("S*-membership frequency")
    fig.suptitle(f"policy={summary.config.policy}  Q={summary.config.num_clusters}  N={summary.config.num_ers}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def feedback_sweep_figure(summaries: list[CampaignSummary], path) -> None:
    """Estimation error and harvested energy against the amount of feedback
    (K-1)(L+1), swept via L."""
    feedback = [(s.config.num_antennas - 1) * (s.config.feedback_len + 1) for s in summaries]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(feedback, [s.mean_phase_err_pct for s in summaries], "o-", label="phase error %")
    ax1.plot(feedback, [s.mean_mag_err_pct for s in summaries], "s-", label="magnitude error %")
    ax1.set_xlabel("amount of feedback (K-1)(L+1)")
    ax1.set_ylabel("estimation error (%)")
    ax1.legend()
    ax2.plot(feedback, [s.mean_harvested_selected for s in summaries], "o-")
    ax2.set_xlabel("amount of feedback (K-1)(L+1)")
    ax2.set_ylabel("mean harvested energy per S* member")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cluster_sweep_figure(summaries: list[CampaignSummary], path) -> None:
    """Harvested energy per S* member against Q, one line per (N, K)."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    combos = sorted({(s.config.num_ers, s.config.num_antennas) for s in summaries})
    for N, K in combos:
        pts = sorted(
            (s.config.num_clusters, s.mean_harvested_selected)
            for s in summaries
            if s.config.num_ers == N and s.config.num_antennas == K
        )
        ax.plot([q for q, _ in pts], [v for _, v in pts], "o-", label=f"N={N}, K={K}")
    ax.set_xlabel("number of clusters Q")
    ax.set_ylabel("mean harvested energy per S* member")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
