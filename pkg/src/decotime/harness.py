"""Benchmark harness: seeded replica batches, error curves, and persistence.

A batch runs every configured strategy over `replicas` independent seeded
protocol runs, interpolates each replica's |estimate - truth| trajectory
onto a shared log-spaced grid of cumulative probing times (step-hold), and
aggregates to a root-mean-square error curve with percentile-bootstrap
confidence bands and the matching Cramer-Rao envelope.

Everything downstream of a (config, seed) pair is deterministic, including
the emitted CSV/JSON bytes, so result files double as regression fixtures.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    RunConfig,
    config_hash,
    config_to_dict,
    config_from_dict,
    validate_config,
    xi_table_for,
)
from .estimator import (
    DegeneratePosterior,
    EstimatorConfig,
    bayes_update,
    init_prior,
    maybe_resample,
)
from .infotheory import Criterion, XiTable, crlb_envelope
from .model import DecayLaw, ExperimentKind, ReadoutModel
from .protocol import (
    EpochRecord,
    ReplayBackend,
    SimulatorBackend,
    Strategy,
    next_tau,
    run_protocol,
)
from .simulator import (
    ROLE_BOOTSTRAP,
    ROLE_ESTIMATOR,
    ROLE_MEASUREMENT,
    GroundTruth,
    RandomStream,
)

PROBING_TIME_NOTE = (
    "cumulative probing time counts pulse-sequence time only; "
    "state preparation and readout overhead are excluded"
)


class NotReached(Exception):
    """The uncertainty curve never dropped to the requested target."""


@dataclass
class RunSummary:
    """Aggregated error curve for one strategy of a batch."""

    strategy: str
    replica_count: int
    excluded_replicas: int
    grid_time_s: np.ndarray
    uncertainty_s: np.ndarray
    ci_lo_s: np.ndarray
    ci_hi_s: np.ndarray
    bound_s: np.ndarray
    metadata: dict

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunSummary):
            return NotImplemented
        return (
            self.strategy == other.strategy
            and self.replica_count == other.replica_count
            and self.excluded_replicas == other.excluded_replicas
            and self.metadata == other.metadata
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in ("grid_time_s", "uncertainty_s", "ci_lo_s", "ci_hi_s", "bound_s")
            )
        )


@dataclass
class BatchResult:
    summaries: list[RunSummary]
    metadata: dict

    def summary(self, strategy: Strategy | str) -> RunSummary:
        name = strategy.value if isinstance(strategy, Strategy) else strategy
        for item in self.summaries:
            if item.strategy == name:
                return item
        raise KeyError(f"no summary for strategy {name!r}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, BatchResult):
            return NotImplemented
        return self.summaries == other.summaries and self.metadata == other.metadata


@dataclass
class BenchReport:
    """Hot-path latency against particle count, with a linear fit."""

    particle_counts: list[int]
    median_step_s: list[float]
    mean_step_s: list[float]
    slope_s_per_particle: float
    intercept_s: float
    r_squared: float


def _estimator_config(config: RunConfig, replica: int) -> EstimatorConfig:
    return EstimatorConfig(
        prior_low=config.prior_low,
        prior_high=config.prior_high,
        particle_count=config.particle_count,
        liu_west_a=config.liu_west_a,
        resample_threshold=config.resample_threshold,
        rng_seed=(config.seed, replica, ROLE_ESTIMATOR),
        iid_prior=config.iid_prior,
        full_variance_resample=config.full_variance_resample,
    )


def _replica_curves(
    config: RunConfig, strategy: Strategy, replica: int
) -> tuple[np.ndarray, np.ndarray] | None:
    """(cumulative times, |error|) for one replica, or None if degenerate.

    The measurement substream is keyed by replica only (not strategy), so
    strategies see common random numbers where their probing times agree.
    """
    truth = GroundTruth(DecayLaw(config.truth_t_chi, config.beta), config.kind)
    rng = RandomStream(config.seed, replica, ROLE_MEASUREMENT).generator()
    try:
        records = run_protocol(
            strategy,
            truth,
            config.readout,
            _estimator_config(config, replica),
            config.epochs,
            rng,
            xi_table=xi_table_for(config),
            quantize=config.quantize,
            quantize_levels=config.quantize_levels,
        )
    except DegeneratePosterior:
        return None
    times = np.array([r.cumulative_probing_time for r in records])
    errors = np.abs(np.array([r.estimate for r in records]) - config.truth_t_chi)
    return times, errors


def _replica_curves_star(args) -> tuple[np.ndarray, np.ndarray] | None:
    return _replica_curves(*args)


def step_hold(
    times: np.ndarray, values: np.ndarray, grid: np.ndarray, before_first: float
) -> np.ndarray:
    """Piecewise-constant lookup: value of the last epoch at or before t.

    Grid points before the first epoch get `before_first` (the prior-only
    estimate's error); points beyond the last epoch hold the final value.
    """
    idx = np.searchsorted(times, grid, side="right") - 1
    out = values[np.clip(idx, 0, None)]
    out[idx < 0] = before_first
    return out


def run_batch(
    config: RunConfig, replicas: int | None = None, workers: int | None = None
) -> BatchResult:
    """Run all configured strategies over seeded replicas and aggregate.

    Replicas whose posterior degenerates are excluded from aggregation and
    counted in the metadata.  With several strategies the shared time grid
    ends at the shortest strategy's final probing time, so curves are always
    compared on equal time budgets.
    """
    validate_config(config)
    n_replicas = config.replicas if replicas is None else replicas
    n_workers = config.workers if workers is None else workers
    if n_replicas < 1:
        raise ConfigError(f"replicas must be >= 1, got {n_replicas}")

    per_strategy: dict[Strategy, list[tuple[np.ndarray, np.ndarray]]] = {}
    excluded: dict[str, int] = {}
    for strategy in config.strategies:
        jobs = [(config, strategy, replica) for replica in range(n_replicas)]
        if n_workers > 1:
            with ProcessPoolExecutor(max_workers=n_workers) as pool:
                raw = list(pool.map(_replica_curves_star, jobs, chunksize=8))
        else:
            raw = [_replica_curves_star(job) for job in jobs]
        kept = [item for item in raw if item is not None]
        excluded[strategy.value] = n_replicas - len(kept)
        if not kept:
            raise ConfigError(
                f"every replica of strategy {strategy.value!r} hit a degenerate posterior"
            )
        per_strategy[strategy] = kept

    grid_lo = min(curves[0][0] for kept in per_strategy.values() for curves in kept)
    grid_hi = min(
        max(curves[0][-1] for curves in kept) for kept in per_strategy.values()
    )
    if not grid_hi > grid_lo:
        raise ConfigError(
            "degenerate time grid: the strategies' probing-time ranges do not overlap"
        )
    grid = np.geomspace(grid_lo, grid_hi, config.grid_points)

    truth_law = DecayLaw(config.truth_t_chi, config.beta)
    bound = np.asarray(
        crlb_envelope(grid, truth_law, config.readout, Criterion.SENSITIVITY)
    )
    prior_error = abs(0.5 * (config.prior_low + config.prior_high) - config.truth_t_chi)
    boot_rng = RandomStream(config.seed, 0, ROLE_BOOTSTRAP).generator()

    metadata = {
        "config_hash": config_hash(config),
        "seed": config.seed,
        "code_version": __version__,
        "replicas": n_replicas,
        "excluded": excluded,
        "grid_points": config.grid_points,
        "probing_time_note": PROBING_TIME_NOTE,
        "config": config_to_dict(config),
    }

    summaries = []
    for strategy in config.strategies:
        kept = per_strategy[strategy]
        squared = np.stack(
            [step_hold(t, e, grid, prior_error) for t, e in kept]
        ) ** 2
        uncertainty = np.sqrt(squared.mean(axis=0))
        n_kept = squared.shape[0]
        # a bootstrap draw is a multinomial reweighting of the replicas
        counts = boot_rng.multinomial(
            n_kept, np.full(n_kept, 1.0 / n_kept), size=config.bootstrap_draws
        )
        boot = np.sqrt((counts @ squared) / n_kept)
        ci_lo, ci_hi = np.percentile(boot, [2.5, 97.5], axis=0)
        summaries.append(
            RunSummary(
                strategy=strategy.value,
                replica_count=n_kept,
                excluded_replicas=excluded[strategy.value],
                grid_time_s=grid.copy(),
                uncertainty_s=uncertainty,
                ci_lo_s=ci_lo,
                ci_hi_s=ci_hi,
                bound_s=bound.copy(),
                metadata=metadata,
            )
        )

    return BatchResult(summaries=summaries, metadata=metadata)


def sensitivity_metric(summary: RunSummary) -> np.ndarray:
    """Squared uncertainty times elapsed probing time, along the grid.

    Lower is better; the quantity an acquisition strategy should minimise
    when wall time is the scarce resource.
    """
    return summary.uncertainty_s**2 * summary.grid_time_s


def time_to_uncertainty(summary: RunSummary, target: float) -> float:
    """First grid time at which the uncertainty curve is at or below target."""
    below = summary.uncertainty_s <= target
    if not below.any():
        closest = float(summary.uncertainty_s.min())
        raise NotReached(
            f"uncertainty never reached {target:g} s "
            f"(closest approach {closest:g} s)"
        )
    return float(summary.grid_time_s[int(np.argmax(below))])


def _replica_std_crossing(
    config: RunConfig, strategy: Strategy, replica: int, target: float
) -> float:
    """Probing time at which one replica's posterior std first hits target.

    Returns nan for replicas that degenerate or never reach the target.
    """
    truth = GroundTruth(DecayLaw(config.truth_t_chi, config.beta), config.kind)
    rng = RandomStream(config.seed, replica, ROLE_MEASUREMENT).generator()
    try:
        records = run_protocol(
            strategy,
            truth,
            config.readout,
            _estimator_config(config, replica),
            config.epochs,
            rng,
            xi_table=xi_table_for(config),
            quantize=config.quantize,
            quantize_levels=config.quantize_levels,
        )
    except DegeneratePosterior:
        return float("nan")
    for record in records:
        if record.estimate_std <= target:
            return record.cumulative_probing_time
    return float("nan")


def _replica_std_crossing_star(args) -> float:
    return _replica_std_crossing(*args)


def median_time_to_target_std(
    config: RunConfig,
    strategy: Strategy,
    target: float,
    replicas: int | None = None,
    workers: int | None = None,
) -> float:
    """Median over replicas of the probing time to reach a posterior std.

    Replicas that never reach the target (or degenerate) are dropped; if
    more than half are dropped the median is undefined and NotReached is
    raised.
    """
    validate_config(config)
    n_replicas = config.replicas if replicas is None else replicas
    n_workers = config.workers if workers is None else workers
    jobs = [(config, strategy, replica, target) for replica in range(n_replicas)]
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            crossings = np.array(list(pool.map(_replica_std_crossing_star, jobs, chunksize=8)))
    else:
        crossings = np.array([_replica_std_crossing_star(job) for job in jobs])
    reached = crossings[np.isfinite(crossings)]
    if len(reached) <= n_replicas // 2:
        raise NotReached(
            f"posterior std reached {target:g} s in only {len(reached)} of "
            f"{n_replicas} replicas of strategy {strategy.value!r}"
        )
    return float(np.median(reached))


# ---------------------------------------------------------------------------
# single-run logs and replay

def record_run(config: RunConfig, strategy: Strategy, replica: int = 0) -> dict:
    """Run one replica and return a JSON-able log of its epochs."""
    validate_config(config)
    truth = GroundTruth(DecayLaw(config.truth_t_chi, config.beta), config.kind)
    rng = RandomStream(config.seed, replica, ROLE_MEASUREMENT).generator()
    records = run_protocol(
        strategy,
        truth,
        config.readout,
        _estimator_config(config, replica),
        config.epochs,
        rng,
        xi_table=xi_table_for(config),
        quantize=config.quantize,
        quantize_levels=config.quantize_levels,
    )
    return {
        "config": config_to_dict(config),
        "strategy": strategy.value,
        "replica": replica,
        "epochs": [
            {
                "epoch": r.epoch,
                "tau": r.tau,
                "outcome": r.outcome,
                "cumulative_probing_time": r.cumulative_probing_time,
                "estimate": r.estimate,
                "estimate_std": r.estimate_std,
                "resampled": r.resampled,
            }
            for r in records
        ],
    }


def replay_run(log: dict, strict: bool = True) -> list[EpochRecord]:
    """Re-run a recorded log through the estimator, returning fresh records.

    Outcomes come from the log; probing times are recomputed and (in strict
    mode) must match the logged ones, which catches behavioural drift in the
    selection logic as well as the update.
    """
    config = config_from_dict(log["config"])
    validate_config(config)
    strategy = Strategy(log["strategy"])
    replica = int(log.get("replica", 0))
    logged = [
        EpochRecord(
            epoch=int(e["epoch"]),
            tau=float(e["tau"]),
            outcome=int(e["outcome"]),
            cumulative_probing_time=float(e["cumulative_probing_time"]),
            estimate=float(e["estimate"]),
            estimate_std=float(e["estimate_std"]),
            resampled=bool(e["resampled"]),
        )
        for e in log["epochs"]
    ]
    truth = GroundTruth(DecayLaw(config.truth_t_chi, config.beta), config.kind)
    rng = RandomStream(config.seed, replica, ROLE_MEASUREMENT).generator()
    return run_protocol(
        strategy,
        truth,
        config.readout,
        _estimator_config(config, replica),
        len(logged),
        rng,
        xi_table=xi_table_for(config),
        quantize=config.quantize,
        quantize_levels=config.quantize_levels,
        backend=ReplayBackend(logged, strict=strict),
    )


# ---------------------------------------------------------------------------
# latency benchmark

def latency_bench(
    particle_counts: tuple[int, ...] = (50, 100, 200, 400, 800, 1600),
    repeats: int = 300,
    seed: int = 123,
) -> BenchReport:
    """Time the per-epoch hot path (bayes_update + next_tau) against K.

    Resampling is excluded from the timed section: in the architecture this
    models, rejuvenation runs while the next acquisition is already in
    flight.  Outcome generation also happens outside the timer.
    """
    if len(particle_counts) < 2:
        raise ValueError("latency_bench needs at least two particle counts to fit a line")
    truth = GroundTruth(DecayLaw(2.5e-6, 2.0), ExperimentKind.RAMSEY)
    readout = ReadoutModel(0.0187, 0.0148, 10000)
    xi_table = XiTable()
    xi_table.get(Criterion.VARIANCE, 2.0)  # solve outside the timed region

    medians, means = [], []
    for k in particle_counts:
        est_config = EstimatorConfig(
            prior_low=0.1e-6,
            prior_high=8e-6,
            particle_count=k,
            rng_seed=(seed, k, ROLE_ESTIMATOR),
        )
        ensemble = init_prior(est_config)
        rng = RandomStream(seed, k, ROLE_MEASUREMENT).generator()
        backend = SimulatorBackend(truth, readout, rng)
        tau = next_tau(
            Strategy.ADAPTIVE_VARIANCE,
            ensemble,
            beta=2.0,
            xi_table=xi_table,
            tau_lo=est_config.prior_low,
            tau_hi=est_config.prior_high,
            epoch=0,
            total_epochs=repeats,
        )
        samples = []
        for step in range(repeats + 20):
            outcome = backend.execute(tau, readout.repetitions)
            start = time.perf_counter_ns()
            bayes_update(ensemble, outcome, tau, 2.0, readout)
            tau = next_tau(
                Strategy.ADAPTIVE_VARIANCE,
                ensemble,
                beta=2.0,
                xi_table=xi_table,
                tau_lo=est_config.prior_low,
                tau_hi=est_config.prior_high,
                epoch=step,
                total_epochs=repeats,
            )
            elapsed = time.perf_counter_ns() - start
            maybe_resample(ensemble, est_config)
            if step >= 20:  # discard warm-up
                samples.append(elapsed * 1e-9)
        medians.append(float(np.median(samples)))
        means.append(float(np.mean(samples)))

    counts = np.asarray(particle_counts, dtype=float)
    med = np.asarray(medians)
    slope, intercept = np.polyfit(counts, med, 1)
    fitted = slope * counts + intercept
    ss_res = float(np.sum((med - fitted) ** 2))
    ss_tot = float(np.sum((med - med.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return BenchReport(
        particle_counts=list(particle_counts),
        median_step_s=medians,
        mean_step_s=means,
        slope_s_per_particle=float(slope),
        intercept_s=float(intercept),
        r_squared=float(r_squared),
    )


# ---------------------------------------------------------------------------
# persistence

_CSV_HEADER = ["strategy", "grid_time_s", "uncertainty_s", "ci_lo_s", "ci_hi_s", "bound_s"]


def _fmt(value: float) -> str:
    """Shortest exact decimal form; identical bytes for identical doubles."""
    return repr(float(value))


def render_csv(result: BatchResult) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(_CSV_HEADER)
    for summary in result.summaries:
        for i in range(len(summary.grid_time_s)):
            writer.writerow(
                [
                    summary.strategy,
                    _fmt(summary.grid_time_s[i]),
                    _fmt(summary.uncertainty_s[i]),
                    _fmt(summary.ci_lo_s[i]),
                    _fmt(summary.ci_hi_s[i]),
                    _fmt(summary.bound_s[i]),
                ]
            )
    return buffer.getvalue()


def result_to_dict(result: BatchResult) -> dict:
    return {
        "metadata": result.metadata,
        "summaries": [
            {
                "strategy": s.strategy,
                "replica_count": s.replica_count,
                "excluded_replicas": s.excluded_replicas,
                "grid_time_s": [float(v) for v in s.grid_time_s],
                "uncertainty_s": [float(v) for v in s.uncertainty_s],
                "ci_lo_s": [float(v) for v in s.ci_lo_s],
                "ci_hi_s": [float(v) for v in s.ci_hi_s],
                "bound_s": [float(v) for v in s.bound_s],
            }
            for s in result.summaries
        ],
    }


def result_from_dict(data: dict) -> BatchResult:
    metadata = data["metadata"]
    summaries = [
        RunSummary(
            strategy=s["strategy"],
            replica_count=int(s["replica_count"]),
            excluded_replicas=int(s["excluded_replicas"]),
            grid_time_s=np.asarray(s["grid_time_s"], dtype=float),
            uncertainty_s=np.asarray(s["uncertainty_s"], dtype=float),
            ci_lo_s=np.asarray(s["ci_lo_s"], dtype=float),
            ci_hi_s=np.asarray(s["ci_hi_s"], dtype=float),
            bound_s=np.asarray(s["bound_s"], dtype=float),
            metadata=metadata,
        )
        for s in data["summaries"]
    ]
    return BatchResult(summaries=summaries, metadata=metadata)


def render_json(result: BatchResult) -> str:
    return json.dumps(result_to_dict(result), indent=2) + "\n"


def bench_to_dict(report: BenchReport) -> dict:
    return {
        "particle_counts": report.particle_counts,
        "median_step_s": report.median_step_s,
        "mean_step_s": report.mean_step_s,
        "slope_s_per_particle": report.slope_s_per_particle,
        "intercept_s": report.intercept_s,
        "r_squared": report.r_squared,
    }


def render_bench_csv(report: BenchReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["particle_count", "median_step_s", "mean_step_s"])
    for k, med, mean in zip(
        report.particle_counts, report.median_step_s, report.mean_step_s
    ):
        writer.writerow([k, _fmt(med), _fmt(mean)])
    return buffer.getvalue()


def emit_results(result: BatchResult | BenchReport, path: str, fmt: str = "csv") -> None:
    """Write a batch result (or bench report) to disk as CSV or JSON."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    if isinstance(result, BenchReport):
        if fmt == "json":
            text = json.dumps(bench_to_dict(result), indent=2) + "\n"
        else:
            text = render_bench_csv(result)
    else:
        text = render_csv(result) if fmt == "csv" else render_json(result)
    with open(path, "w", newline="") as handle:
        handle.write(text)


def load_results(path: str) -> BatchResult:
    """Reload a JSON result file written by emit_results."""
    with open(path) as handle:
        return result_from_dict(json.load(handle))
