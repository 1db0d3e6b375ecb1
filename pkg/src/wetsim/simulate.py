"""End-to-end block simulation, scheduling policies, and campaign running.

One block runs the two-stage protocol: sample ground-truth channels, measure
the training schedule under RSSI noise, estimate each receiver's effective
channel, cluster receivers by relative phase, pick the densest cluster S*,
design the power beam per the active policy, and score the TRUE harvested
energy of every receiver (so estimation error costs real energy).

Blocks are independent given per-block RNG substreams derived from the
campaign seed, which keeps campaign aggregates identical regardless of how
many workers execute them.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from multiprocessing import Pool

import numpy as np

from wetsim.channel import MisoChannel, energy_from_effective, wrap_phase
from wetsim.clustering import DEFAULT_RESTARTS, PhasePoint, lloyd_cluster, select_cluster
from wetsim.codebook import build_schedule
from wetsim.errors import ConfigurationError
from wetsim.estimation import (
    DEFAULT_EPSILON_SCALE,
    assemble_estimate,
    magnitude_error_pct,
    phase_error_pct,
)
from wetsim.feedback import NoiseModel, measure_block, sigma_from_snr
from wetsim.robust import RobustSpec, extract_beam, solve_maxmin

POLICIES = (
    "cluster-maxmin",
    "no-cluster-maxmin",
    "round-robin",
    "random-beam",
    "best-channel",
    "egt-selected",
    "mrt-perfect-csi",
)


@dataclass(frozen=True)
class SimConfig:
    """All knobs of one campaign; field names double as config-file keys."""

    num_antennas: int = 4
    num_ers: int = 40
    feedback_len: int = 8
    num_clusters: int = 3
    power: float = 1.0
    snr_db: float | None = 20.0
    sigma: float | None = None  # overrides snr_db when set
    amplitude_low: float = 0.1
    amplitude_high: float = 1.0
    path_loss: tuple[float, ...] | None = None  # per-ER amplitude multipliers
    epsilon_scale: float = DEFAULT_EPSILON_SCALE
    circular_clustering: bool = False
    normalized_selection: bool = False
    policy: str = "cluster-maxmin"
    blocks: int = 1000
    rng_seed: int = 0
    restarts: int = DEFAULT_RESTARTS
    solver_tol: float = 1e-4
    time_budget: float | None = None  # per-block budget hook, off by default

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigurationError(f"unknown policy {self.policy!r}")
        if not 1 <= self.num_clusters <= self.num_ers:
            raise ConfigurationError("need 1 <= num_clusters <= num_ers")
        if self.blocks < 1:
            raise ConfigurationError("blocks must be >= 1")
        if self.power <= 0:
            raise ConfigurationError("power must be positive")
        if self.path_loss is not None:
            pl = tuple(float(x) for x in self.path_loss)
            if len(pl) != self.num_ers:
                raise ConfigurationError("path_loss must list one multiplier per ER")
            if any(x <= 0 for x in pl):
                raise ConfigurationError("path_loss multipliers must be positive")
            object.__setattr__(self, "path_loss", pl)
        if self.sigma is not None and self.sigma < 0:
            raise ConfigurationError("sigma must be non-negative")

    def noise_sigma(self) -> float:
        """Measurement noise level; sigma wins over the SNR definition."""
        if self.sigma is not None:
            return float(self.sigma)
        if self.snr_db is None:
            return 0.0
        return sigma_from_snr(self.snr_db, self.power, self.amplitude_low, self.amplitude_high)


@dataclass
class BlockResult:
    """Outcome of one block: who was selected, who harvested what, and how
    well the training stage worked."""

    block_index: int
    selected_cluster: int
    selected_members: tuple[int, ...]
    harvested: np.ndarray  # (N,) true harvested energy per ER
    phase_err_pct: float
    mag_err_pct: float
    solver_t: float
    solver_status: str
    rank_ratio: float
    epsilon: float
    num_clamped: int = 0
    num_degenerate: int = 0

    @property
    def mean_selected_harvest(self) -> float:
        return float(self.harvested[list(self.selected_members)].mean())


@dataclass
class CampaignSummary:
    """Aggregates over all blocks of one campaign."""

    config: SimConfig
    block_results: list[BlockResult]
    mean_harvested_all: float
    mean_harvested_selected: float
    mean_phase_err_pct: float
    mean_mag_err_pct: float
    mean_solver_t: float
    selection_counts: np.ndarray  # (N,) times each ER appeared in S*

    @property
    def num_blocks(self) -> int:
        return len(self.block_results)

    @property
    def selection_frequency(self) -> np.ndarray:
        return self.selection_counts / max(self.num_blocks, 1)


@dataclass(frozen=True)
class FairnessReport:
    """Empirical S*-membership statistics across a campaign."""

    frequencies: np.ndarray
    max_min_ratio: float


def block_rng(seed: int, block_index: int) -> np.random.Generator:
    """Per-block substream; depends only on (campaign seed, block index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block_index)]))


def _mrt_beam(h: np.ndarray, P: float) -> np.ndarray:
    n = np.linalg.norm(h)
    if n == 0:
        return np.full(h.size, np.sqrt(P / h.size), dtype=complex)
    return np.sqrt(P) * h / n


def _egt_beam(rel_phases: np.ndarray, K: int, P: float) -> np.ndarray:
    full = np.concatenate([[0.0], rel_phases])
    return np.sqrt(P / K) * np.exp(-1j * full)


def _centroid_phases(clustering, cluster: int) -> np.ndarray:
    c = clustering.centroids[cluster]
    if clustering.circular:
        d = c.size // 2
        return wrap_phase(np.arctan2(c[d:], c[:d]))
    return wrap_phase(c)


class _Pipeline:
    """Shared training/estimation/clustering stage of every policy."""

    def __init__(self, config: SimConfig, rng: np.random.Generator):
        K, N, L, P = config.num_antennas, config.num_ers, config.feedback_len, config.power
        mags = rng.uniform(config.amplitude_low, config.amplitude_high, size=(N, K))
        if config.path_loss is not None:
            mags = mags * np.asarray(config.path_loss)[:, None]
        phases = wrap_phase(rng.uniform(0.0, 2.0 * np.pi, size=(N, K)))
        self.channels = [MisoChannel(mags[i], phases[i]) for i in range(N)]
        self.G_true = np.stack([ch.effective_vector() for ch in self.channels])

        schedule = build_schedule(K, L, P)
        noise = NoiseModel(config.noise_sigma())
        reports = measure_block(self.channels, schedule, noise, rng if noise.sigma > 0 else None)
        self.estimates = [assemble_estimate(r, P, noise, config.epsilon_scale) for r in reports]
        self.H_hat = np.stack([e.effective_vector() for e in self.estimates])
        self.epsilons = np.array([e.epsilon for e in self.estimates])

        self.phase_err = float(
            np.mean([phase_error_pct(e, wrap_phase(ch.phases[1:] - ch.phases[0]))
                     for e, ch in zip(self.estimates, self.channels)])
        )
        self.mag_err = float(
            np.mean([magnitude_error_pct(e, ch.magnitudes) for e, ch in zip(self.estimates, self.channels)])
        )
        self.num_clamped = int(sum(e.clamped_flags.sum() for e in self.estimates))
        self.num_degenerate = int(sum(e.degenerate_flags.sum() for e in self.estimates))

        points = [PhasePoint(i, e.rel_phases) for i, e in enumerate(self.estimates)]
        self.clustering = lloyd_cluster(
            points, config.num_clusters, restarts=config.restarts,
            rng=rng, circular=config.circular_clustering,
        )
        self.selected_cluster = select_cluster(self.clustering, normalized=config.normalized_selection)
        self.members = tuple(int(i) for i in np.flatnonzero(self.clustering.assignments == self.selected_cluster))


def _finish(config, pipe, block_index, cov_entries, solver_t, status, rank_ratio) -> BlockResult:
    harvested = np.array([energy_from_effective(g, cov_entries) for g in pipe.G_true])
    return BlockResult(
        block_index=block_index,
        selected_cluster=pipe.selected_cluster,
        selected_members=pipe.members,
        harvested=harvested,
        phase_err_pct=pipe.phase_err,
        mag_err_pct=pipe.mag_err,
        solver_t=solver_t,
        solver_status=status,
        rank_ratio=rank_ratio,
        epsilon=float(pipe.epsilons.mean()),
        num_clamped=pipe.num_clamped,
        num_degenerate=pipe.num_degenerate,
    )


def run_block(config: SimConfig, rng: np.random.Generator | None = None, block_index: int = 0) -> BlockResult:
    """One block of the proposed scheme: cluster, select S*, robust max-min
    beamforming over S*, then true-channel harvesting for all N receivers."""
    if rng is None:
        rng = block_rng(config.rng_seed, block_index)
    pipe = _Pipeline(config, rng)
    spec = RobustSpec(
        channels=pipe.H_hat[list(pipe.members)],
        epsilons=pipe.epsilons[list(pipe.members)],
        power_budget=config.power,
    )
    sol = solve_maxmin(spec, tol=config.solver_tol)
    extracted = extract_beam(sol)
    if extracted.rank_deficient:
        cov_entries = sol.cov.entries
    else:
        b = extracted.beam.entries
        cov_entries = np.outer(b, b.conj())
    return _finish(config, pipe, block_index, cov_entries, sol.t, sol.solver_status, extracted.rank_ratio)


def run_baseline_block(
    config: SimConfig,
    policy: str,
    rng: np.random.Generator | None = None,
    block_index: int = 0,
) -> BlockResult:
    """One block under any scheduling policy; shares run_block's pipeline."""
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown policy {policy!r}")
    if policy == "cluster-maxmin":
        return run_block(config, rng, block_index)
    if policy == "no-cluster-maxmin":
        flat = dataclasses.replace(config, num_clusters=1, policy="cluster-maxmin")
        return run_block(flat, rng, block_index)

    if rng is None:
        rng = block_rng(config.rng_seed, block_index)
    pipe = _Pipeline(config, rng)
    K, N, P = config.num_antennas, config.num_ers, config.power

    if policy == "round-robin":
        b = _mrt_beam(pipe.H_hat[block_index % N], P)
    elif policy == "random-beam":
        b = np.sqrt(P / K) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=K))
    elif policy == "best-channel":
        best = int(np.argmax(np.linalg.norm(pipe.H_hat, axis=1) ** 2))
        b = _mrt_beam(pipe.H_hat[best], P)
    elif policy == "egt-selected":
        b = _egt_beam(_centroid_phases(pipe.clustering, pipe.selected_cluster), K, P)
    else:  # mrt-perfect-csi
        b = _mrt_beam(pipe.G_true[block_index % N], P)
    cov_entries = np.outer(b, b.conj())
    return _finish(config, pipe, block_index, cov_entries, float("nan"), policy, 1.0)


def _run_one(args) -> BlockResult:
    config, block_index = args
    return run_baseline_block(config, config.policy, block_rng(config.rng_seed, block_index), block_index)


def run_campaign(config: SimConfig, threads: int = 1) -> CampaignSummary:
    """Run `config.blocks` independent blocks and aggregate.

    Aggregation order is fixed by block index, so results are identical for
    any worker count.
    """
    jobs = [(config, b) for b in range(config.blocks)]
    if threads > 1:
        with Pool(processes=threads) as pool:
            results = pool.map(_run_one, jobs, chunksize=max(1, config.blocks // (4 * threads)))
    else:
        results = [_run_one(j) for j in jobs]

    counts = np.zeros(config.num_ers)
    for r in results:
        counts[list(r.selected_members)] += 1
    solver_ts = [r.solver_t for r in results if np.isfinite(r.solver_t)]
    return CampaignSummary(
        config=config,
        block_results=results,
        mean_harvested_all=float(np.mean([r.harvested.mean() for r in results])),
        mean_harvested_selected=float(np.mean([r.mean_selected_harvest for r in results])),
        mean_phase_err_pct=float(np.mean([r.phase_err_pct for r in results])),
        mean_mag_err_pct=float(np.mean([r.mag_err_pct for r in results])),
        mean_solver_t=float(np.mean(solver_ts)) if solver_ts else float("nan"),
        selection_counts=counts,
    )


def fairness_report(summary: CampaignSummary) -> FairnessReport:
    """Empirical probability each ER lands in S*, plus the max/min ratio."""
    freq = summary.selection_frequency
    fmin = float(freq.min())
    ratio = float(freq.max() / fmin) if fmin > 0 else float("inf")
    return FairnessReport(frequencies=freq, max_min_ratio=ratio)
