"""Sequential Monte Carlo posterior over a decoherence timescale.

The posterior over t_chi is carried by K weighted particles.  Each epoch
multiplies the weights by the likelihood of the newly observed data; when the
effective sample size drops below a threshold the ensemble is rejuvenated by
Liu-West resampling: parents are drawn in proportion to weight and new
positions are sampled around means shrunk towards the posterior mean, which
preserves the first two posterior moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ReadoutModel, count_variance

_TWO_PI = 2.0 * math.pi


@dataclass
class EstimatorConfig:
    """Settings for the particle-filter posterior.

    prior_low / prior_high bound the uniform prior over t_chi (seconds).
    liu_west_a is the shrinkage parameter of the rejuvenation kernel;
    resample_threshold triggers resampling when the effective sample size
    falls below that fraction of the particle count.  rng_seed may be an int
    or a tuple of ints (a derived substream key).
    """

    prior_low: float
    prior_high: float
    particle_count: int = 200
    liu_west_a: float = 0.98
    resample_threshold: float = 0.5
    rng_seed: int | tuple[int, ...] = 0
    iid_prior: bool = False
    full_variance_resample: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.prior_low < self.prior_high:
            raise ValueError(
                f"prior bounds must satisfy 0 < low < high, got "
                f"[{self.prior_low}, {self.prior_high}]"
            )
        if self.particle_count < 2:
            raise ValueError(f"particle_count must be >= 2, got {self.particle_count}")
        if not 0.0 <= self.liu_west_a <= 1.0:
            raise ValueError(f"liu_west_a must lie in [0, 1], got {self.liu_west_a}")
        if not 0.0 <= self.resample_threshold <= 1.0:
            raise ValueError(
                f"resample_threshold must lie in [0, 1], got {self.resample_threshold}"
            )


@dataclass
class ParticleEnsemble:
    """Positions (t_chi candidates, seconds), weights summing to one, and the
    stream used for resampling draws.  Single-owner: updates mutate in place."""

    positions: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator = field(repr=False)


class DegeneratePosterior(RuntimeError):
    """Every particle's weight underflowed to zero.

    This signals data inconsistent with the model over the whole prior
    support (for example counts far outside the plausible range), not a
    numerical hiccup; the update is aborted rather than papered over.
    """

    def __init__(self, message: str, *, tau: float | None = None,
                 outcome: float | None = None, epoch: int | None = None):
        super().__init__(message)
        self.tau = tau
        self.outcome = outcome
        self.epoch = epoch


def _make_rng(seed: int | tuple[int, ...]) -> np.random.Generator:
    # Philox is counter-based, so substreams derived from distinct seed
    # tuples are independent regardless of draw order.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def init_prior(config: EstimatorConfig) -> ParticleEnsemble:
    """Fresh ensemble spanning the uniform prior with equal weights.

    Default placement is deterministic stratified: one particle at the
    midpoint of each of K equal slices of the support.  iid_prior switches
    to independent uniform draws.
    """
    k = config.particle_count
    rng = _make_rng(config.rng_seed)
    if config.iid_prior:
        positions = rng.uniform(config.prior_low, config.prior_high, size=k)
    else:
        step = (config.prior_high - config.prior_low) / k
        positions = config.prior_low + (np.arange(k) + 0.5) * step
    weights = np.full(k, 1.0 / k)
    return ParticleEnsemble(positions=positions, weights=weights, rng=rng)


def posterior_mean(ensemble: ParticleEnsemble) -> float:
    return float(np.dot(ensemble.weights, ensemble.positions))


def posterior_variance(ensemble: ParticleEnsemble) -> float:
    mu = np.dot(ensemble.weights, ensemble.positions)
    second = np.dot(ensemble.weights, ensemble.positions**2)
    return float(max(second - mu * mu, 0.0))


def posterior_std(ensemble: ParticleEnsemble) -> float:
    return math.sqrt(posterior_variance(ensemble))


def effective_sample_size(ensemble: ParticleEnsemble) -> float:
    """1 / sum(w**2): K for uniform weights, 1 for a collapsed ensemble."""
    return float(1.0 / np.dot(ensemble.weights, ensemble.weights))


def bayes_update(
    ensemble: ParticleEnsemble,
    outcome: float,
    tau: float,
    beta: float,
    readout: ReadoutModel | None = None,
) -> ParticleEnsemble:
    """Multiply weights by the likelihood of the observed data and renormalise.

    With a readout model the outcome is a click count and the Gaussian
    count likelihood applies; with readout None the outcome is a single-shot
    bit in {0, 1} and the exact two-outcome likelihood applies.  Raises
    DegeneratePosterior when the total weight underflows to zero.
    """
    env = np.exp(-((tau / ensemble.positions) ** beta))
    if readout is None:
        if outcome not in (0, 1):
            raise ValueError(f"single-shot outcome must be 0 or 1, got {outcome}")
        sign = 1.0 if outcome == 0 else -1.0
        like = 0.5 * (1.0 + sign * env)
    else:
        reps = readout.repetitions
        mean = reps * readout.alpha * (1.0 + readout.visibility * env)
        var = count_variance(outcome, reps)
        like = np.exp(-((outcome - mean) ** 2) / (2.0 * var)) / math.sqrt(_TWO_PI * var)
    ensemble.weights *= like
    total = float(ensemble.weights.sum())
    if not math.isfinite(total) or total <= 0.0:
        raise DegeneratePosterior(
            f"posterior weights underflowed (outcome={outcome}, tau={tau:g})",
            tau=tau,
            outcome=outcome,
        )
    ensemble.weights /= total
    return ensemble


def _systematic_parents(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Low-variance parent selection: one stratified point per particle."""
    k = len(weights)
    points = (rng.random() + np.arange(k)) / k
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0  # guard against rounding just below the last point
    return np.searchsorted(cumulative, points)


def maybe_resample(
    ensemble: ParticleEnsemble, config: EstimatorConfig
) -> tuple[ParticleEnsemble, bool]:
    """Rejuvenate the ensemble iff ESS < resample_threshold * K.

    Parents are chosen by systematic resampling; each new position is drawn
    from Normal(a*parent + (1-a)*mean, (1-a**2)*variance), which leaves the
    posterior mean and variance unchanged in expectation.  With
    full_variance_resample the kernel keeps the full posterior variance
    instead (slightly over-dispersing the ensemble).  Non-positive draws are
    rejected and redrawn.  Returns (ensemble, whether it resampled).
    """
    k = config.particle_count
    if effective_sample_size(ensemble) >= config.resample_threshold * k:
        return ensemble, False
    mu = posterior_mean(ensemble)
    var = posterior_variance(ensemble)
    a = config.liu_west_a
    parents = ensemble.positions[_systematic_parents(ensemble.weights, ensemble.rng)]
    centres = a * parents + (1.0 - a) * mu
    spread = var if config.full_variance_resample else (1.0 - a * a) * var
    scale = math.sqrt(max(spread, 0.0))
    fresh = ensemble.rng.normal(centres, scale)
    bad = fresh <= 0.0
    while bad.any():
        fresh[bad] = ensemble.rng.normal(centres[bad], scale)
        bad = fresh <= 0.0
    ensemble.positions = fresh
    ensemble.weights = np.full(k, 1.0 / k)
    return ensemble, True
