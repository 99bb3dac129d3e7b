"""Stochastic measurement simulator standing in for the experiment.

Outcomes are drawn from the exact single-shot or binomial count
distributions of the decay model; the Gaussian used on the inference side is
an approximation the simulator deliberately does not share.

Randomness comes from the counter-based Philox generator.  Substreams are
derived by feeding (seed, replica, role) to the seed sequence, so every
replica of a batch gets an independent, reproducible stream no matter how
replicas are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DecayLaw, ExperimentKind, ReadoutModel, detection_probability, outcome_likelihood

# Substream roles, kept distinct so that e.g. measurement draws never shift
# when the estimator draws more or fewer resampling variates.
ROLE_MEASUREMENT = 0
ROLE_ESTIMATOR = 1
ROLE_BOOTSTRAP = 2


@dataclass(frozen=True)
class GroundTruth:
    """The simulated qubit: its true decay law and the sequence being run."""

    law: DecayLaw
    kind: ExperimentKind = ExperimentKind.RAMSEY


@dataclass(frozen=True)
class RandomStream:
    """Named substream of the batch-level random source.

    The same (seed, replica, role) triple always yields the same draw
    sequence; distinct triples are independent.
    """

    seed: int
    replica: int = 0
    role: int = ROLE_MEASUREMENT

    def key(self) -> tuple[int, int, int]:
        return (self.seed, self.replica, self.role)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(self.key())))


def sample_single_shot(tau: float, truth: GroundTruth, rng: np.random.Generator) -> int:
    """One projective readout: 1 with the exact outcome probability."""
    p_one = outcome_likelihood(1, tau, truth.law)
    return int(rng.random() < p_one)


def sample_counts(
    tau: float, truth: GroundTruth, readout: ReadoutModel, rng: np.random.Generator
) -> int:
    """Total clicks over R repetitions: an exact binomial draw."""
    p_click = detection_probability(tau, truth.law, readout)
    return int(rng.binomial(readout.repetitions, p_click))
