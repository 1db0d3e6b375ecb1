import numpy as np
import pytest

from wetsim.channel import MisoChannel
from wetsim.codebook import build_schedule, training_angles
from wetsim.errors import ConfigurationError, DimensionError
from wetsim.feedback import (
    NoiseModel,
    measure_block,
    mean_pairwise_rssi,
    reports_to_csv,
    sigma_from_snr,
)


def closed_form_pairwise(P, h1, hv, phi, theta):
    alpha = P / 4 * (h1**2 + hv**2)
    beta = P / 2 * h1 * hv
    return alpha + beta * np.cos(theta + phi)


def test_noise_model_validation():
    with pytest.raises(ConfigurationError):
        NoiseModel(-0.1)


def test_noise_free_hand_example():
    # |h| = (0.5, 0.5), phi = pi/3, P = 4 -> alpha = beta = 0.5
    P, L = 4.0, 4
    ch = MisoChannel(np.array([0.5, 0.5]), np.array([0.0, np.pi / 3]))
    sched = build_schedule(2, L, P)
    (rep,) = measure_block([ch], sched, NoiseModel(0.0))
    expected = [0.75, 0.0669873, 0.25, 0.9330127]
    assert np.allclose(rep.pairwise(2), expected, atol=1e-6)
    # single-antenna beam: (P/2)|h1|^2 with P=2, |h1|=0.5 -> 0.25
    ch2 = MisoChannel(np.array([0.5, 0.9]), np.array([0.0, 1.0]))
    (rep2,) = measure_block([ch2], build_schedule(2, L, 2.0), NoiseModel(0.0))
    assert rep2.matrix[0, -1] == pytest.approx(0.25, rel=1e-12)


def test_noise_free_matches_closed_form_everywhere():
    rng = np.random.default_rng(0)
    K, L, P = 5, 6, 1.7
    mags = rng.uniform(0.1, 1, K)
    phases = rng.uniform(0, 2 * np.pi, K)
    ch = MisoChannel(mags, phases)
    (rep,) = measure_block([ch], build_schedule(K, L, P), NoiseModel(0.0))
    theta = training_angles(L)
    for v in range(2, K + 1):
        phi = (phases[v - 1] - phases[0]) % (2 * np.pi)
        expected = closed_form_pairwise(P, mags[0], mags[v - 1], phi, theta)
        assert np.abs(rep.pairwise(v) - expected).max() <= 1e-12
        assert rep.matrix[v - 2, -1] == pytest.approx(P / 2 * mags[0] ** 2, abs=1e-12)


def test_noise_statistics():
    sigma = 0.3
    ch = MisoChannel(np.array([0.5, 0.5]), np.array([0.0, 0.0]))
    channels = [ch] * 4000
    rng = np.random.default_rng(1)
    reports = measure_block(channels, build_schedule(2, 8, 1.0), NoiseModel(sigma), rng)
    vals = np.stack([r.matrix for r in reports])  # identical clean signal + noise
    noise = vals - vals.mean(axis=0)
    assert noise.var() == pytest.approx(sigma**2, rel=0.05)
    # independence across ERs: identical channels differ only by noise
    assert not np.array_equal(reports[0].matrix, reports[1].matrix)


def test_measure_block_requires_rng_with_noise():
    ch = MisoChannel(np.array([0.5, 0.5]), np.array([0.0, 0.0]))
    with pytest.raises(ConfigurationError):
        measure_block([ch], build_schedule(2, 4, 1.0), NoiseModel(0.1))


def test_measure_block_dimension_mismatch():
    ch = MisoChannel(np.ones(3) * 0.5, np.zeros(3))
    with pytest.raises(DimensionError):
        measure_block([ch], build_schedule(2, 4, 1.0), NoiseModel(0.0))


def test_k2_repetition_readings():
    ch = MisoChannel(np.array([0.6, 0.3]), np.array([0.0, 1.0]))
    L, P = 5, 1.0
    (rep,) = measure_block([ch], build_schedule(2, L, P), NoiseModel(0.0))
    singles = rep.single_antenna_readings()
    assert singles.size == L  # 1 base + L-1 repeats
    assert np.allclose(singles, P / 2 * 0.6**2, atol=1e-12)


def test_snr_definition():
    # E[|h|^2] for uniform(0.1, 1) is 0.37; mean pairwise RSSI = P * 0.37 / 2
    assert mean_pairwise_rssi(1.0, 0.1, 1.0) == pytest.approx(0.185, rel=1e-12)
    assert sigma_from_snr(20.0, 1.0, 0.1, 1.0) == pytest.approx(0.00185, rel=1e-12)
    assert sigma_from_snr(0.0, 1.0, 0.1, 1.0) == pytest.approx(0.185, rel=1e-12)


def test_reports_to_csv(tmp_path):
    ch = MisoChannel(np.array([0.5, 0.5, 0.5]), np.zeros(3))
    reports = measure_block([ch], build_schedule(3, 4, 1.0), NoiseModel(0.0))
    path = tmp_path / "reports.csv"
    reports_to_csv(reports, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "er_id,v,l,rssi"
    assert len(lines) == 1 + 2 * 5  # (K-1)(L+1) data rows
