"""Multi-user wireless energy transfer toolkit.

Simulates the full pipeline of a multi-antenna energy transmitter serving
single-antenna energy receivers: RSSI-feedback channel estimation, phase
clustering of receivers, and robust max-min transmit-covariance optimization.
"""

from wetsim.channel import (
    EnsembleConfig,
    MisoChannel,
    TransmitCovariance,
    received_energy,
    relative_phases,
    sample_ensemble,
)
from wetsim.codebook import BeamVector, TrainingSchedule, build_codebook, build_schedule, training_angles
from wetsim.feedback import NoiseModel, TrainingReport, measure_block
from wetsim.estimation import ChannelEstimate, assemble_estimate
from wetsim.clustering import Clustering, PhasePoint, lloyd_cluster, select_cluster
from wetsim.robust import CovarianceSolution, RobustSpec, extract_beam, solve_maxmin, worst_case_energy
from wetsim.simulate import SimConfig, run_block, run_baseline_block, run_campaign, fairness_report

__version__ = "0.1.0"
