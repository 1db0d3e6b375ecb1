"""Command-line front end: campaigns, sweeps, calibration, canned figures.

Config files are flat key=value text mirroring SimConfig field names:

    num_antennas = 4
    num_ers = 40
    feedback_len = 8
    num_clusters = 3
    policy = cluster-maxmin
    blocks = 1000
    rng_seed = 7

Lines starting with '#' are comments.  `path_loss` takes comma-separated
per-ER multipliers.  In `sweep` mode any other key may hold a comma-separated
list, and the command runs the Cartesian product of all listed axes.
"""

from __future__ import annotations

import itertools
from pathlib import Path

import click

from wetsim.errors import ConfigurationError
from wetsim.estimation import calibrate_epsilon_scale
from wetsim.reporting import (
    campaign_figure,
    cluster_sweep_figure,
    feedback_sweep_figure,
    write_campaign_outputs,
)
from wetsim.simulate import POLICIES, SimConfig, run_campaign

_INT_KEYS = {"num_antennas", "num_ers", "feedback_len", "num_clusters", "blocks", "rng_seed", "restarts"}
_FLOAT_KEYS = {"power", "snr_db", "sigma", "amplitude_low", "amplitude_high", "epsilon_scale",
               "solver_tol", "time_budget"}
_BOOL_KEYS = {"circular_clustering", "normalized_selection"}
_STR_KEYS = {"policy"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS | {"path_loss"}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if raw.lower() in {"none", ""}:
        return None
    if key == "path_loss":
        return tuple(float(x) for x in raw.split(","))
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _BOOL_KEYS:
        if raw.lower() in {"true", "1", "yes", "on"}:
            return True
        if raw.lower() in {"false", "0", "no", "off"}:
            return False
        raise ConfigurationError(f"bad boolean for {key}: {raw!r}")
    return raw


def parse_config_text(text: str, allow_lists: bool = False) -> dict:
    """Flat key=value parser; with allow_lists, comma values become axes."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno} is not key=value: {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigurationError(f"unknown config key {key!r} (line {lineno})")
        if allow_lists and key != "path_loss" and "," in raw:
            out[key] = [_coerce(key, item) for item in raw.split(",")]
        else:
            out[key] = _coerce(key, raw)
    return out


def load_config(path: str | None, allow_lists: bool = False) -> dict:
    if path is None:
        return {}
    return parse_config_text(Path(path).read_text(), allow_lists=allow_lists)


def _build_config(base: dict, seed, blocks, policy) -> SimConfig:
    kv = dict(base)
    if seed is not None:
        kv["rng_seed"] = seed
    if blocks is not None:
        kv["blocks"] = blocks
    if policy is not None:
        kv["policy"] = policy
    return SimConfig(**kv)


def _echo_summary(summary) -> None:
    click.echo(
        f"policy={summary.config.policy} Q={summary.config.num_clusters} "
        f"N={summary.config.num_ers} blocks={summary.num_blocks}  "
        f"harvested/all={summary.mean_harvested_all:.6f}  "
        f"harvested/S*={summary.mean_harvested_selected:.6f}  "
        f"phase_err={summary.mean_phase_err_pct:.3f}%"
    )


def _common_options(f):
    f = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     default=None, help="flat key=value config file")(f)
    f = click.option("--seed", type=int, default=None, help="override rng_seed")(f)
    f = click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out",
                     help="output directory")(f)
    f = click.option("--blocks", type=int, default=None, help="override block count")(f)
    f = click.option("--policy", type=click.Choice(POLICIES), default=None, help="override policy")(f)
    f = click.option("--threads", type=int, default=1, help="worker processes")(f)
    return f


@click.group()
def main():
    """Multi-user wireless energy transfer simulator."""


@main.command()
@_common_options
def run(config_path, seed, out_dir, blocks, policy, threads):
    """Run one campaign from a config file and write CSV/JSON/PNG artifacts."""
    cfg = _build_config(load_config(config_path), seed, blocks, policy)
    summary = run_campaign(cfg, threads=threads)
    out = write_campaign_outputs(out_dir, [summary])
    campaign_figure(summary, out / "campaign.png")
    _echo_summary(summary)
    click.echo(f"artifacts written to {out}")


@main.command()
@_common_options
def sweep(config_path, seed, out_dir, blocks, policy, threads):
    """Grid sweep: comma-separated config values define the axes."""
    base = load_config(config_path, allow_lists=True)
    axes = {k: v for k, v in base.items() if isinstance(v, list)}
    fixed = {k: v for k, v in base.items() if not isinstance(v, list)}
    if axes:
        keys = sorted(axes)
        points = [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]
    else:
        points = [{}]
    summaries = []
    for point in points:
        cfg = _build_config({**fixed, **point}, seed, blocks, policy)
        summary = run_campaign(cfg, threads=threads)
        summaries.append(summary)
        _echo_summary(summary)
    out = write_campaign_outputs(out_dir, summaries, extra_meta={"sweep_axes": sorted(axes)})
    if "num_clusters" in axes:
        cluster_sweep_figure(summaries, out / "sweep.png")
    elif "feedback_len" in axes:
        feedback_sweep_figure(summaries, out / "sweep.png")
    else:
        campaign_figure(summaries[0], out / "sweep.png")
    click.echo(f"artifacts written to {out}")


@main.command("calibrate-epsilon")
@click.option("--trials", type=int, default=20000, show_default=True)
@click.option("--antennas", "K", type=int, default=4, show_default=True)
@click.option("--feedback-len", "L", type=int, default=8, show_default=True)
@click.option("--snr-db", type=float, default=20.0, show_default=True)
@click.option("--power", type=float, default=1.0, show_default=True)
@click.option("--quantile", type=float, default=0.95, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def calibrate_epsilon(trials, K, L, snr_db, power, quantile, seed):
    """Estimate the epsilon scale constant c (quantile of the error-norm ratio)."""
    c = calibrate_epsilon_scale(K=K, L=L, snr_db=snr_db, P=power, trials=trials,
                                quantile=quantile, seed=seed)
    click.echo(f"epsilon scale c = {c:.4f}  (epsilon = c * sigma * sqrt(K/L))")


@main.command()
@_common_options
def fig2(config_path, seed, out_dir, blocks, policy, threads):
    """Canned feedback sweep: L in {4, 8, 16, 32} at K=4, SNR 20 dB."""
    base = {"num_antennas": 4, "snr_db": 20.0, "blocks": 200, **load_config(config_path)}
    summaries = []
    for L in (4, 8, 16, 32):
        cfg = _build_config({**base, "feedback_len": L}, seed, blocks, policy)
        summary = run_campaign(cfg, threads=threads)
        summaries.append(summary)
        _echo_summary(summary)
    out = write_campaign_outputs(out_dir, summaries, extra_meta={"sweep_axes": ["feedback_len"]})
    feedback_sweep_figure(summaries, out / "fig2.png")
    click.echo(f"artifacts written to {out}")


@main.command()
@_common_options
@click.option("--clusters", default="1,2,3,4,5,6", show_default=True,
              help="comma-separated Q values")
def fig3(config_path, seed, out_dir, blocks, policy, threads, clusters):
    """Canned cluster-count sweep: harvested energy per S* member vs Q."""
    base = {"num_ers": 40, "num_antennas": 4, "blocks": 100, **load_config(config_path)}
    summaries = []
    for Q in (int(q) for q in clusters.split(",")):
        cfg = _build_config({**base, "num_clusters": Q}, seed, blocks, policy)
        summary = run_campaign(cfg, threads=threads)
        summaries.append(summary)
        _echo_summary(summary)
    out = write_campaign_outputs(out_dir, summaries, extra_meta={"sweep_axes": ["num_clusters"]})
    cluster_sweep_figure(summaries, out / "fig3.png")
    click.echo(f"artifacts written to {out}")


if __name__ == "__main__":
    main()
