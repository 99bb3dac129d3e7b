"""Measurement scheduling: how each epoch's probing time is chosen.

An epoch is: pick tau, run R identical sequences, absorb the summed outcome
into the posterior, optionally rejuvenate the ensemble.  The adaptive
strategies set tau to a fixed multiple of the current posterior mean (the
multiple maximises Fisher information per shot or per unit time); the
non-adaptive baselines draw tau at random or sweep it across the prior
support.

The instrument is abstracted behind a backend with a single operation
``execute(tau, repetitions) -> outcome`` so the simulator, a replay log, or
real hardware can be swapped in without touching the loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Protocol, Sequence

import numpy as np

from .estimator import (
    DegeneratePosterior,
    EstimatorConfig,
    ParticleEnsemble,
    bayes_update,
    init_prior,
    maybe_resample,
    posterior_mean,
    posterior_std,
)
from .infotheory import Criterion, XiTable
from .model import ExperimentKind, ReadoutModel, sequence_duration
from .simulator import GroundTruth, sample_counts, sample_single_shot


class Strategy(Enum):
    ADAPTIVE_VARIANCE = "adaptive_variance"
    ADAPTIVE_SENSITIVITY = "adaptive_sensitivity"
    RANDOM = "random"
    SWEEP = "sweep"

    @property
    def criterion(self) -> Criterion | None:
        """Information criterion driving the choice; None for baselines."""
        if self is Strategy.ADAPTIVE_VARIANCE:
            return Criterion.VARIANCE
        if self is Strategy.ADAPTIVE_SENSITIVITY:
            return Criterion.SENSITIVITY
        return None


@dataclass(frozen=True)
class EpochRecord:
    """One row of the run log, written after each epoch's update."""

    epoch: int
    tau: float
    outcome: int
    cumulative_probing_time: float
    estimate: float
    estimate_std: float
    resampled: bool


class MeasurementBackend(Protocol):
    """Anything that can execute one epoch of measurements."""

    def execute(self, tau: float, repetitions: int) -> int: ...


class SimulatorBackend:
    """Default backend: draw outcomes from the stochastic simulator."""

    def __init__(
        self,
        truth: GroundTruth,
        readout: ReadoutModel | None,
        rng: np.random.Generator,
    ):
        self.truth = truth
        self.readout = readout
        self.rng = rng

    def execute(self, tau: float, repetitions: int) -> int:
        if self.readout is None:
            return sample_single_shot(tau, self.truth, self.rng)
        return sample_counts(tau, self.truth, self.readout, self.rng)


class ReplayMismatch(RuntimeError):
    """A replayed run diverged from its log."""


class ReplayBackend:
    """Feed back outcomes recorded in an earlier run.

    In strict mode the probing times recomputed during replay must match the
    logged ones (relative tolerance 1e-9); a mismatch means the code no
    longer reproduces the recorded decision sequence.
    """

    def __init__(self, records: Sequence[EpochRecord], strict: bool = True):
        self.records = list(records)
        self.strict = strict
        self.cursor = 0

    def execute(self, tau: float, repetitions: int) -> int:
        if self.cursor >= len(self.records):
            raise ReplayMismatch("replay ran past the end of the log")
        record = self.records[self.cursor]
        self.cursor += 1
        if self.strict and not math.isclose(tau, record.tau, rel_tol=1e-9, abs_tol=0.0):
            raise ReplayMismatch(
                f"epoch {record.epoch}: replay chose tau={tau!r}, log has {record.tau!r}"
            )
        return record.outcome


def next_tau(
    strategy: Strategy,
    ensemble: ParticleEnsemble,
    *,
    beta: float,
    xi_table: XiTable,
    tau_lo: float,
    tau_hi: float,
    epoch: int,
    total_epochs: int,
    rng: np.random.Generator | None = None,
) -> float:
    """Probing time for the coming epoch.

    Adaptive strategies use xi * posterior_mean clamped to [tau_lo, tau_hi];
    the clamp keeps runaway estimates from requesting probing times outside
    the supported range.  RANDOM draws uniformly over the same interval and
    SWEEP walks an ascending equally spaced grid across it, one pass over
    the whole run.
    """
    criterion = strategy.criterion
    if criterion is not None:
        xi = xi_table.get(criterion, beta)
        tau = xi * posterior_mean(ensemble)
        return min(max(tau, tau_lo), tau_hi)
    if strategy is Strategy.RANDOM:
        if rng is None:
            raise ValueError("RANDOM strategy needs a random stream")
        return float(rng.uniform(tau_lo, tau_hi))
    if total_epochs <= 1:
        return tau_lo
    step = (tau_hi - tau_lo) / (total_epochs - 1)
    return tau_lo + epoch * step


def quantize_tau(
    tau: float, lo: float, hi: float, levels: int = 256
) -> tuple[int, float]:
    """Snap tau onto a uniform grid of `levels` codes over [lo, hi].

    Mirrors a controller that transfers the probing time to the waveform
    generator as a fixed-width integer.  Rounds half up; returns the code
    and the reconstructed probing time.
    """
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    if not hi > lo:
        raise ValueError(f"need hi > lo, got [{lo}, {hi}]")
    fraction = (min(max(tau, lo), hi) - lo) / (hi - lo)
    index = int(math.floor(fraction * (levels - 1) + 0.5))
    return index, lo + index * (hi - lo) / (levels - 1)


class EstimationSession:
    """State machine for one estimation run.

    Drives the propose/measure/absorb cycle without owning the instrument:
    callers fetch propose_tau(), perform the measurement however they like,
    and hand the outcome to absorb().  Used both by run_protocol and by the
    HTTP service, which keeps one session per client run.
    """

    def __init__(
        self,
        strategy: Strategy,
        beta: float,
        kind: ExperimentKind,
        readout: ReadoutModel | None,
        config: EstimatorConfig,
        total_epochs: int,
        *,
        xi_table: XiTable | None = None,
        quantize: bool = False,
        quantize_levels: int = 256,
        strategy_rng: np.random.Generator | None = None,
    ):
        if strategy is Strategy.ADAPTIVE_SENSITIVITY and beta <= 1.0:
            raise ValueError(
                f"the per-time criterion has no optimum for beta={beta}; "
                "use ADAPTIVE_VARIANCE instead"
            )
        self.strategy = strategy
        self.beta = beta
        self.kind = kind
        self.readout = readout
        self.config = config
        self.total_epochs = total_epochs
        self.xi_table = xi_table if xi_table is not None else XiTable()
        self.quantize = quantize
        self.quantize_levels = quantize_levels
        self.strategy_rng = strategy_rng
        self.ensemble = init_prior(config)
        self.epoch = 0
        self.cumulative_probing_time = 0.0
        self.last_resampled = False

    @property
    def repetitions(self) -> int:
        return self.readout.repetitions if self.readout is not None else 1

    def propose_tau(self) -> float:
        """Probing time for the next epoch (posterior untouched)."""
        tau = next_tau(
            self.strategy,
            self.ensemble,
            beta=self.beta,
            xi_table=self.xi_table,
            tau_lo=self.config.prior_low,
            tau_hi=self.config.prior_high,
            epoch=self.epoch,
            total_epochs=self.total_epochs,
            rng=self.strategy_rng,
        )
        if self.quantize:
            _, tau = quantize_tau(
                tau, self.config.prior_low, self.config.prior_high, self.quantize_levels
            )
        return tau

    def absorb(self, tau: float, outcome: int) -> EpochRecord:
        """Fold one epoch's outcome into the posterior and log it."""
        try:
            bayes_update(self.ensemble, outcome, tau, self.beta, self.readout)
        except DegeneratePosterior as err:
            err.epoch = self.epoch
            raise
        self.ensemble, resampled = maybe_resample(self.ensemble, self.config)
        self.cumulative_probing_time += self.repetitions * sequence_duration(tau, self.kind)
        record = EpochRecord(
            epoch=self.epoch,
            tau=tau,
            outcome=int(outcome),
            cumulative_probing_time=self.cumulative_probing_time,
            estimate=posterior_mean(self.ensemble),
            estimate_std=posterior_std(self.ensemble),
            resampled=resampled,
        )
        self.epoch += 1
        self.last_resampled = resampled
        return record


def run_protocol(
    strategy: Strategy,
    truth: GroundTruth,
    readout: ReadoutModel | None,
    config: EstimatorConfig,
    epochs: int,
    rng: np.random.Generator,
    *,
    xi_table: XiTable | None = None,
    quantize: bool = False,
    quantize_levels: int = 256,
    backend: MeasurementBackend | None = None,
) -> list[EpochRecord]:
    """Run a full estimation protocol and return its epoch log.

    rng drives both the measurement draws and any strategy randomness, in a
    fixed interleaving, so a seed pins the whole run.  A custom backend
    replaces the simulator (e.g. ReplayBackend for regression runs).
    """
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if backend is None:
        backend = SimulatorBackend(truth, readout, rng)
    session = EstimationSession(
        strategy,
        truth.law.beta,
        truth.kind,
        readout,
        config,
        epochs,
        xi_table=xi_table,
        quantize=quantize,
        quantize_levels=quantize_levels,
        strategy_rng=rng,
    )
    records = []
    for _ in range(epochs):
        tau = session.propose_tau()
        outcome = backend.execute(tau, session.repetitions)
        records.append(session.absorb(tau, outcome))
    return records
