"""Shared heavy fixtures for the acceptance suite.

The four 1000-block campaigns below are run once per session and shared by
the Fig.-3-trend and proposed-vs-baselines acceptance tests, which also need
the wall-clock time of the two solver-backed campaigns.
"""

import time

import pytest

from wetsim.simulate import SimConfig, run_campaign

CAMPAIGN_BASE = dict(
    num_antennas=4,
    num_ers=40,
    feedback_len=8,
    power=1.0,
    snr_db=20.0,
    blocks=1000,
    rng_seed=2024,
    solver_tol=1e-4,
)

CAMPAIGN_POINTS = {
    "q3": dict(num_clusters=3),
    "q1": dict(num_clusters=1),
    "random-beam": dict(num_clusters=3, policy="random-beam"),
    "best-channel": dict(num_clusters=3, policy="best-channel"),
}


@pytest.fixture(scope="session")
def heavy_campaigns():
    summaries, seconds = {}, {}
    for name, overrides in CAMPAIGN_POINTS.items():
        cfg = SimConfig(**{**CAMPAIGN_BASE, **overrides})
        start = time.perf_counter()
        summaries[name] = run_campaign(cfg)
        seconds[name] = time.perf_counter() - start
    return summaries, seconds
