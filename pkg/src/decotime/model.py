"""Decoherence decay model and measurement likelihoods.

A single qubit prepared in a known state loses coherence on a timescale
``t_chi``; the surviving signal after a probing time ``tau`` follows a
stretched exponential ``exp(-(tau / t_chi) ** beta)``.  The exponent selects
the physics: beta = 1 for energy relaxation, beta = 2 for a Gaussian-damped
free-induction decay, beta = 3/2 for a typical spin-echo envelope.

Two readout channels are modelled: an ideal projective (single-shot) readout
returning 0 or 1, and a weak photon-count readout where each of R repetitions
yields a click with a small state-dependent probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class ExperimentKind(Enum):
    """Pulse sequence family being run."""

    RELAXATION = "relaxation"
    RAMSEY = "ramsey"
    HAHN_ECHO = "hahn_echo"

    @property
    def duration_factor(self) -> int:
        """Wall-clock sequence length per unit of probing time.

        An echo sequence refocuses at 2 * tau, so it spends twice the
        nominal probing time; the other sequences spend tau.
        """
        return 2 if self is ExperimentKind.HAHN_ECHO else 1

    @property
    def default_beta(self) -> float:
        return {"relaxation": 1.0, "ramsey": 2.0, "hahn_echo": 1.5}[self.value]


@dataclass(frozen=True)
class DecayLaw:
    """Stretched-exponential coherence decay exp(-(tau/t_chi)**beta)."""

    t_chi: float  # seconds
    beta: float

    def __post_init__(self) -> None:
        if not self.t_chi > 0:
            raise ValueError(f"t_chi must be positive, got {self.t_chi}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")


@dataclass(frozen=True)
class ReadoutModel:
    """Photon-count readout: click probabilities per qubit state.

    p_click_0 and p_click_1 are the per-repetition click probabilities for
    the two basis states; repetitions is the number of identical sequences
    averaged into one recorded count.
    """

    p_click_0: float
    p_click_1: float
    repetitions: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_click_1 < self.p_click_0 <= 1.0):
            raise ValueError(
                "click probabilities must satisfy 0 <= p_click_1 < p_click_0 <= 1, "
                f"got p_click_0={self.p_click_0}, p_click_1={self.p_click_1}"
            )
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")

    @property
    def alpha(self) -> float:
        """Mean click probability, (p_click_0 + p_click_1) / 2."""
        return 0.5 * (self.p_click_0 + self.p_click_1)

    @property
    def visibility(self) -> float:
        """Readout contrast, (p_click_0 - p_click_1) / (p_click_0 + p_click_1)."""
        return (self.p_click_0 - self.p_click_1) / (self.p_click_0 + self.p_click_1)


def decay_envelope(tau, t_chi, beta):
    """exp(-(tau/t_chi)**beta); broadcasts over array arguments."""
    return np.exp(-((np.asarray(tau, dtype=float) / t_chi) ** beta))


def outcome_likelihood(m: int, tau: float, law: DecayLaw) -> float:
    """Probability of a single-shot outcome m in {0, 1}.

    The surviving coherence biases the outcome towards 0; as tau grows the
    two outcomes become equally likely.
    """
    if m not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {m}")
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    envelope = math.exp(-((tau / law.t_chi) ** law.beta))
    sign = 1.0 if m == 0 else -1.0
    return 0.5 * (1.0 + sign * envelope)


def detection_probability(tau: float, law: DecayLaw, readout: ReadoutModel) -> float:
    """Per-repetition click probability at probing time tau.

    alpha * (1 + visibility * exp(-(tau/t_chi)**beta)): decays from
    p_click_0 at tau = 0 towards the state-averaged alpha.
    """
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    envelope = math.exp(-((tau / law.t_chi) ** law.beta))
    return readout.alpha * (1.0 + readout.visibility * envelope)


def count_variance(r: float, repetitions: int) -> float:
    """Plug-in variance r*(R-r)/R for an observed count, floored at 1.

    The floor keeps the likelihood well defined for the degenerate counts
    r = 0 and r = R, where the plug-in estimate collapses to zero.
    """
    return max(r * (repetitions - r) / repetitions, 1.0)


def count_likelihood(r: float, tau: float, law: DecayLaw, readout: ReadoutModel) -> float:
    """Gaussian likelihood of observing r clicks out of R repetitions.

    The count is modelled as Normal with mean R * detection_probability and
    a plug-in variance estimated from the observed count itself, so the
    (common) normalisation does not depend on t_chi.
    """
    if not 0 <= r <= readout.repetitions:
        raise ValueError(
            f"count must lie in [0, {readout.repetitions}], got {r}"
        )
    mean = readout.repetitions * detection_probability(tau, law, readout)
    var = count_variance(r, readout.repetitions)
    return math.exp(-((r - mean) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def sequence_duration(tau: float, kind: ExperimentKind) -> float:
    """Wall-clock duration of one pulse sequence at probing time tau."""
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    return kind.duration_factor * tau
