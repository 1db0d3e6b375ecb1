"""Noisy RSSI measurement of a training schedule.

Noise enters at the energy level: each reading is the exact received energy
plus an independent N(0, sigma^2) draw.  Readings may therefore go negative;
downstream estimators must accept that.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from wetsim.channel import MisoChannel
from wetsim.codebook import TrainingSchedule
from wetsim.errors import ConfigurationError, DimensionError


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian measurement noise with standard deviation sigma."""

    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigurationError("sigma must be non-negative")


@dataclass(frozen=True)
class TrainingReport:
    """All RSSI values one receiver fed back for one block.

    matrix  : (K-1, L+1) readings, row v-2 holds codebook v in minislot order
    repeats : extra single-antenna readings (K=2 repetition policy; empty otherwise)
    """

    er_id: int
    matrix: np.ndarray
    repeats: np.ndarray

    @property
    def feedback_len(self) -> int:
        return self.matrix.shape[1] - 1

    def pairwise(self, v: int) -> np.ndarray:
        """The L pairwise readings of codebook v."""
        return self.matrix[v - 2, :-1]

    def single_antenna_readings(self) -> np.ndarray:
        """All readings taken under the single-antenna beam."""
        return np.concatenate([self.matrix[:, -1], self.repeats])


def mean_pairwise_rssi(P: float, amplitude_low: float, amplitude_high: float) -> float:
    """Ensemble-average pairwise RSSI (P/4)*2*E[|h|^2] for uniform magnitudes.

    Used as the reference level in the SNR definition SNR = E[R]/sigma.
    """
    second_moment = (amplitude_high**2 + amplitude_high * amplitude_low + amplitude_low**2) / 3.0
    return P * second_moment / 2.0


def sigma_from_snr(snr_db: float, P: float, amplitude_low: float, amplitude_high: float) -> float:
    """Noise sigma implied by SNR = E[R]/sigma with SNR given in dB."""
    return mean_pairwise_rssi(P, amplitude_low, amplitude_high) / 10.0 ** (snr_db / 10.0)


def measure_block(
    channels: list[MisoChannel],
    schedule: TrainingSchedule,
    noise: NoiseModel,
    rng: np.random.Generator | None = None,
) -> list[TrainingReport]:
    """Exact received energies for every (ER, beam) pair plus i.i.d. noise.

    Noise realizations are independent across ERs and minislots.
    """
    K = schedule.num_antennas
    if any(ch.num_antennas != K for ch in channels):
        raise DimensionError("channel/schedule antenna counts differ")
    if noise.sigma > 0 and rng is None:
        raise ConfigurationError("rng required when sigma > 0")

    B = schedule.beam_matrix()  # (num_beams, K)
    G = np.stack([ch.effective_vector() for ch in channels])  # (N, K)
    clean = np.abs(G.conj() @ B.T) ** 2  # (N, num_beams)
    if noise.sigma > 0:
        clean = clean + rng.normal(0.0, noise.sigma, size=clean.shape)

    L = schedule.feedback_len
    base = schedule.base_len
    reports = []
    for i in range(len(channels)):
        matrix = clean[i, :base].reshape(K - 1, L + 1)
        repeats = clean[i, base:]
        reports.append(TrainingReport(er_id=i, matrix=matrix, repeats=repeats))
    return reports


def reports_to_csv(reports: list[TrainingReport], path) -> None:
    """Dump reports as rows (er_id, v, l, rssi); repetition readings continue
    the l index past L+1."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["er_id", "v", "l", "rssi"])
        for rep in reports:
            L = rep.feedback_len
            for row, v in enumerate(range(2, rep.matrix.shape[0] + 2)):
                for l in range(1, L + 2):
                    writer.writerow([rep.er_id, v, l, repr(rep.matrix[row, l - 1])])
            for r, val in enumerate(rep.repeats):
                writer.writerow([rep.er_id, 2, L + 2 + r, repr(val)])
