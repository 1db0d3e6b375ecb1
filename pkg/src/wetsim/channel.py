"""Ground-truth MISO channels and exact received-energy evaluation.

Phase convention used everywhere in this package: the effective complex
vector of a channel is ``g_k = |h_k| * exp(-1j * delta_k)`` and the energy
delivered by a transmit covariance ``C`` is ``g^H C g``.  With this sign
choice a training beam carrying phase ``theta`` on antenna ``v`` produces an
interference term ``cos(theta + (delta_v - delta_1))``, i.e. beam phases add
to channel phase differences, which is what the downstream phase estimator
inverts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wetsim.errors import ConfigurationError, DimensionError

TWO_PI = 2.0 * np.pi


def wrap_phase(x):
    """Wrap angles to [0, 2*pi)."""
    y = np.mod(x, TWO_PI)
    # np.mod of a tiny negative angle can round up to exactly 2*pi
    return np.where(y >= TWO_PI, 0.0, y)


@dataclass(frozen=True)
class MisoChannel:
    """One block's channel between the transmitter array and a single receiver.

    magnitudes : (K,) non-negative gains
    phases     : (K,) radians in [0, 2*pi)
    """

    magnitudes: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=float)
        phs = np.asarray(self.phases, dtype=float)
        if mags.ndim != 1 or phs.shape != mags.shape:
            raise DimensionError("magnitudes and phases must be 1-D with equal length")
        if mags.size < 2:
            raise ConfigurationError("need at least 2 antennas")
        if np.any(mags < 0):
            raise ConfigurationError("magnitudes must be non-negative")
        if np.any(phs < 0) or np.any(phs >= TWO_PI):
            raise ConfigurationError("phases must lie in [0, 2*pi)")
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "phases", phs)

    @property
    def num_antennas(self) -> int:
        return self.magnitudes.size

    def effective_vector(self) -> np.ndarray:
        """Complex vector used in all quadratic forms (see module docstring)."""
        return self.magnitudes * np.exp(-1j * self.phases)


@dataclass(frozen=True)
class EnsembleConfig:
    """Sampling parameters for a block of i.i.d. channels."""

    num_antennas: int
    num_ers: int
    amplitude_low: float = 0.1
    amplitude_high: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_antennas < 2:
            raise ConfigurationError("num_antennas must be >= 2")
        if self.num_ers < 1:
            raise ConfigurationError("num_ers must be >= 1")
        if not (0 < self.amplitude_low <= self.amplitude_high):
            raise ConfigurationError("need 0 < amplitude_low <= amplitude_high")


@dataclass(frozen=True)
class TransmitCovariance:
    """Hermitian PSD transmit covariance with a sum-power budget."""

    entries: np.ndarray
    power_budget: float

    def __post_init__(self):
        c = np.asarray(self.entries, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DimensionError("covariance must be square")
        if self.power_budget <= 0:
            raise ConfigurationError("power budget must be positive")
        scale = max(1.0, float(np.abs(c).max(initial=0.0)))
        if np.abs(c - c.conj().T).max(initial=0.0) > 1e-12 * scale:
            raise ConfigurationError("covariance must be Hermitian")
        c = 0.5 * (c + c.conj().T)
        tr = float(np.trace(c).real)
        if tr > self.power_budget + 1e-9:
            raise ConfigurationError("trace exceeds power budget")
        if np.linalg.eigvalsh(c).min() < -1e-9 * max(tr, 1.0):
            raise ConfigurationError("covariance must be positive semidefinite")
        object.__setattr__(self, "entries", c)

    @property
    def num_antennas(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)


def sample_ensemble(config: EnsembleConfig, rng: np.random.Generator | None = None) -> list[MisoChannel]:
    """Draw N i.i.d. channels: uniform magnitudes, uniform phases in [0, 2*pi).

    Deterministic given ``config.rng_seed`` when no generator is supplied.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    mags = rng.uniform(config.amplitude_low, config.amplitude_high, size=(config.num_ers, config.num_antennas))
    phases = rng.uniform(0.0, TWO_PI, size=(config.num_ers, config.num_antennas))
    # uniform() can return exactly 2*pi only through fp rounding; wrap defensively
    phases = wrap_phase(phases)
    return [MisoChannel(mags[i], phases[i]) for i in range(config.num_ers)]


def received_energy(channel: MisoChannel, cov: TransmitCovariance, conversion_efficiency: float = 1.0) -> float:
    """Energy harvested by ``channel`` under transmit covariance ``cov``.

    ``conversion_efficiency`` is an extension point for rectifier modeling and
    defaults to the ideal value 1.
    """
    if cov.num_antennas != channel.num_antennas:
        raise DimensionError("covariance and channel dimensions differ")
    g = channel.effective_vector()
    val = float(np.real(g.conj() @ cov.entries @ g))
    if val < -1e-12 * max(1.0, cov.trace):
        raise ConfigurationError("received energy is negative; covariance not PSD?")
    return conversion_efficiency * max(0.0, val)


def energy_from_effective(g: np.ndarray, cov_entries: np.ndarray) -> float:
    """Same quadratic form as received_energy, on a raw effective vector."""
    return max(0.0, float(np.real(g.conj() @ cov_entries @ g)))


def relative_phases(channel: MisoChannel) -> np.ndarray:
    """Phases of antennas 2..K relative to antenna 1, wrapped to [0, 2*pi)."""
    return wrap_phase(channel.phases[1:] - channel.phases[0])
