"""Training codebooks and the minislot transmission schedule.

Codebook v (for v = 2..K) holds L pairwise beams that activate antennas
{1, v}, with antenna-v phase theta_l = 2*(l-1)*pi/L, plus one single-antenna
beam on antenna 1.  Every training beam radiates total power P/2: pairwise
beams use per-antenna amplitude sqrt(P)/2, the single-antenna beam uses
amplitude sqrt(P/2).  That choice makes the noise-free pairwise RSSI equal
alpha + beta*cos(theta_l + phi) with alpha = (P/4)(|h1|^2 + |hv|^2) and
beta = (P/2)|h1||hv|, and the single-antenna RSSI equal (P/2)|h1|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wetsim.errors import ConfigurationError

MIN_FEEDBACK_LEN = 3  # below this the three-parameter sinusoid fit is underdetermined


@dataclass(frozen=True)
class BeamVector:
    """A transmit beam; label is (codebook index v, element index l) for
    training beams and None for the power-beamforming stage beam."""

    entries: np.ndarray
    label: tuple[int, int] | None = None

    @property
    def power(self) -> float:
        return float(np.vdot(self.entries, self.entries).real)


@dataclass(frozen=True)
class TrainingSchedule:
    """Ordered training beams: K-1 slots of L+1 minislots, slot-major.

    For K = 2 the single-antenna beam is repeated L-1 extra times at the end
    so the reference-magnitude estimate averages L measurements, matching the
    number used by each phase estimate.
    """

    beams: tuple[BeamVector, ...]
    num_antennas: int
    feedback_len: int
    power: float

    @property
    def slots(self) -> int:
        return self.num_antennas - 1

    @property
    def minislots_per_slot(self) -> int:
        return self.feedback_len + 1

    @property
    def base_len(self) -> int:
        return self.slots * self.minislots_per_slot

    @property
    def num_repeats(self) -> int:
        return len(self.beams) - self.base_len

    def beam_matrix(self) -> np.ndarray:
        """(num_beams, K) complex matrix of all scheduled beams, in order."""
        return np.stack([b.entries for b in self.beams])


def training_angles(L: int) -> np.ndarray:
    """theta_l = 2*(l-1)*pi/L for l = 1..L."""
    if L < MIN_FEEDBACK_LEN:
        raise ConfigurationError(f"feedback length must be >= {MIN_FEEDBACK_LEN}, got {L}")
    return 2.0 * np.arange(L) * np.pi / L


def build_codebook(v: int, K: int, L: int, P: float) -> list[BeamVector]:
    """The L+1 beams of codebook v: L pairwise beams on antennas {1, v} plus
    one single-antenna beam on antenna 1."""
    if not 2 <= v <= K:
        raise ConfigurationError(f"codebook index v={v} out of range 2..{K}")
    if P <= 0:
        raise ConfigurationError("power must be positive")
    angles = training_angles(L)
    amp_pair = np.sqrt(P) / 2.0
    beams = []
    for l, theta in enumerate(angles, start=1):
        e = np.zeros(K, dtype=complex)
        e[0] = amp_pair
        e[v - 1] = amp_pair * np.exp(1j * theta)
        beams.append(BeamVector(e, label=(v, l)))
    e = np.zeros(K, dtype=complex)
    e[0] = np.sqrt(P / 2.0)
    beams.append(BeamVector(e, label=(v, L + 1)))
    return beams


def build_schedule(K: int, L: int, P: float) -> TrainingSchedule:
    """All (K-1)(L+1) training beams in slot-major, minislot-minor order,
    plus the K=2 repetition of the single-antenna beam."""
    if K < 2:
        raise ConfigurationError("need at least 2 antennas")
    beams: list[BeamVector] = []
    for v in range(2, K + 1):
        beams.extend(build_codebook(v, K, L, P))
    if K == 2:
        last = beams[-1]
        for r in range(L - 1):
            beams.append(BeamVector(last.entries, label=(2, L + 2 + r)))
    return TrainingSchedule(tuple(beams), num_antennas=K, feedback_len=L, power=P)
