"""Adaptive Bayesian estimation of qubit decoherence timescales.

Sequential Monte Carlo tracking of a decay-time parameter from stochastic
qubit measurements, with Fisher-information-guided selection of the next
probing time and a benchmark harness for comparing acquisition strategies
against the Cramer-Rao limit.
"""

__version__ = "0.1.0"

from .estimator import DegeneratePosterior, EstimatorConfig
from .infotheory import Criterion, NoMaximum, crlb_envelope, fisher, solve_xi
from .model import DecayLaw, ExperimentKind, ReadoutModel
from .protocol import EstimationSession, Strategy
from .simulator import GroundTruth, RandomStream

__all__ = [
    "__version__",
    "Criterion",
    "DecayLaw",
    "DegeneratePosterior",
    "EstimationSession",
    "EstimatorConfig",
    "ExperimentKind",
    "GroundTruth",
    "NoMaximum",
    "RandomStream",
    "ReadoutModel",
    "Strategy",
    "crlb_envelope",
    "fisher",
    "solve_xi",
]
