"""Run configuration: one validated record for a whole benchmark batch.

Configs live in TOML files with one section per concern (experiment,
readout, estimator, protocol, harness); string time values accept unit
suffixes ("2.5us").  The same sectioned dict shape is used for JSON
round-trips, config hashing, and the HTTP API, so a config means the same
thing everywhere.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import Any, Mapping

from .infotheory import REFERENCE_XI, Criterion, XiTable
from .model import ExperimentKind, ReadoutModel
from .protocol import Strategy
from .units import parse_time

CONFIG_VERSION = 1


class ConfigError(Exception):
    """The configuration cannot produce a meaningful run."""


@dataclass(frozen=True)
class RunConfig:
    kind: ExperimentKind
    beta: float
    truth_t_chi: float  # seconds
    prior_low: float
    prior_high: float
    strategies: tuple[Strategy, ...]
    epochs: int
    replicas: int
    seed: int = 0
    readout: ReadoutModel | None = None  # None selects single-shot mode
    particle_count: int = 200
    liu_west_a: float = 0.98
    resample_threshold: float = 0.5
    iid_prior: bool = False
    full_variance_resample: bool = False
    quantize: bool = False
    quantize_levels: int = 256
    grid_points: int = 200
    bootstrap_draws: int = 1000
    xi_source: str = "solver"  # "solver" or "reference"
    workers: int = 1


def validate_config(config: RunConfig) -> None:
    """Reject nonsensical configurations before any replica runs."""
    problems = []
    if config.beta <= 0:
        problems.append(f"beta must be positive, got {config.beta}")
    if config.truth_t_chi <= 0:
        problems.append(f"truth t_chi must be positive, got {config.truth_t_chi}")
    if not 0 < config.prior_low < config.prior_high:
        problems.append(
            f"prior bounds must satisfy 0 < low < high, got "
            f"[{config.prior_low}, {config.prior_high}]"
        )
    if not config.strategies:
        problems.append("at least one strategy is required")
    if Strategy.ADAPTIVE_SENSITIVITY in config.strategies and config.beta <= 1.0:
        problems.append(
            f"adaptive_sensitivity has no optimal probing time for beta={config.beta}"
        )
    if config.epochs < 1:
        problems.append(f"epochs must be >= 1, got {config.epochs}")
    if config.replicas < 1:
        problems.append(f"replicas must be >= 1, got {config.replicas}")
    if config.particle_count < 2:
        problems.append(f"particle_count must be >= 2, got {config.particle_count}")
    if not 0.0 <= config.liu_west_a <= 1.0:
        problems.append(f"liu_west_a must lie in [0, 1], got {config.liu_west_a}")
    if not 0.0 <= config.resample_threshold <= 1.0:
        problems.append(
            f"resample_threshold must lie in [0, 1], got {config.resample_threshold}"
        )
    if config.grid_points < 2:
        problems.append(f"grid_points must be >= 2, got {config.grid_points}")
    if config.bootstrap_draws < 1:
        problems.append(f"bootstrap_draws must be >= 1, got {config.bootstrap_draws}")
    if config.xi_source not in ("solver", "reference"):
        problems.append(f"xi_source must be 'solver' or 'reference', got {config.xi_source!r}")
    if config.quantize and config.quantize_levels < 2:
        problems.append(f"quantize_levels must be >= 2, got {config.quantize_levels}")
    if config.workers < 1:
        problems.append(f"workers must be >= 1, got {config.workers}")
    if problems:
        raise ConfigError("; ".join(problems))


def xi_table_for(config: RunConfig) -> XiTable:
    """Probing-ratio table honouring the configured source."""
    if config.xi_source == "reference":
        return XiTable(overrides=REFERENCE_XI)
    return XiTable()


def config_to_dict(config: RunConfig) -> dict[str, Any]:
    """Canonical sectioned dict (plain JSON types, times in seconds)."""
    readout = None
    if config.readout is not None:
        readout = {
            "p_click_0": config.readout.p_click_0,
            "p_click_1": config.readout.p_click_1,
            "repetitions": config.readout.repetitions,
        }
    return {
        "version": CONFIG_VERSION,
        "experiment": {
            "kind": config.kind.value,
            "beta": config.beta,
            "truth": config.truth_t_chi,
        },
        "readout": readout,
        "estimator": {
            "particles": config.particle_count,
            "prior_low": config.prior_low,
            "prior_high": config.prior_high,
            "liu_west_a": config.liu_west_a,
            "resample_threshold": config.resample_threshold,
            "iid_prior": config.iid_prior,
            "full_variance_resample": config.full_variance_resample,
        },
        "protocol": {
            "strategies": [s.value for s in config.strategies],
            "epochs": config.epochs,
            "quantize": config.quantize,
            "quantize_levels": config.quantize_levels,
        },
        "harness": {
            "replicas": config.replicas,
            "seed": config.seed,
            "grid_points": config.grid_points,
            "bootstrap_draws": config.bootstrap_draws,
            "xi_source": config.xi_source,
            "workers": config.workers,
        },
    }


def config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    """Build a RunConfig from the sectioned dict shape (or parsed TOML)."""
    try:
        version = data.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version}")
        experiment = data["experiment"]
        kind = ExperimentKind(experiment.get("kind", "ramsey"))
        beta = float(experiment.get("beta", kind.default_beta))
        truth = parse_time(experiment["truth"])

        readout_data = data.get("readout")
        readout = None
        if readout_data:
            readout = ReadoutModel(
                p_click_0=float(readout_data["p_click_0"]),
                p_click_1=float(readout_data["p_click_1"]),
                repetitions=int(readout_data["repetitions"]),
            )

        est = data.get("estimator", {})
        proto = data.get("protocol", {})
        harness = data.get("harness", {})
        strategies = tuple(Strategy(s) for s in proto.get("strategies", ["adaptive_variance"]))
        return RunConfig(
            kind=kind,
            beta=beta,
            truth_t_chi=truth,
            prior_low=parse_time(est.get("prior_low", "0.1us")),
            prior_high=parse_time(est.get("prior_high", "8us")),
            strategies=strategies,
            epochs=int(proto.get("epochs", 100)),
            replicas=int(harness.get("replicas", 100)),
            seed=int(harness.get("seed", 0)),
            readout=readout,
            particle_count=int(est.get("particles", 200)),
            liu_west_a=float(est.get("liu_west_a", 0.98)),
            resample_threshold=float(est.get("resample_threshold", 0.5)),
            iid_prior=bool(est.get("iid_prior", False)),
            full_variance_resample=bool(est.get("full_variance_resample", False)),
            quantize=bool(proto.get("quantize", False)),
            quantize_levels=int(proto.get("quantize_levels", 256)),
            grid_points=int(harness.get("grid_points", 200)),
            bootstrap_draws=int(harness.get("bootstrap_draws", 1000)),
            xi_source=str(harness.get("xi_source", "solver")),
            workers=int(harness.get("workers", 1)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"bad configuration: {err}") from err


def load_config(path: str) -> RunConfig:
    """Read a TOML config file and validate it."""
    import tomli

    try:
        with open(path, "rb") as handle:
            data = tomli.load(handle)
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    except tomli.TOMLDecodeError as err:
        raise ConfigError(f"malformed config file {path}: {err}") from err
    config = config_from_dict(data)
    validate_config(config)
    return config


def config_hash(config: RunConfig) -> str:
    """Short stable digest of the canonical config dict."""
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def with_overrides(
    config: RunConfig,
    *,
    replicas: int | None = None,
    seed: int | None = None,
    workers: int | None = None,
) -> RunConfig:
    """CLI-style overrides on top of a loaded config."""
    updates: dict[str, Any] = {}
    if replicas is not None:
        updates["replicas"] = replicas
    if seed is not None:
        updates["seed"] = seed
    if workers is not None:
        updates["workers"] = workers
    return replace(config, **updates) if updates else config


_PAPER_CLICKS = {"p_click_0": 0.0187, "p_click_1": 0.0148}


def _preset(**kwargs) -> RunConfig:
    defaults: dict[str, Any] = dict(
        kind=ExperimentKind.RAMSEY,
        beta=2.0,
        truth_t_chi=2.5e-6,
        prior_low=0.1e-6,
        prior_high=8e-6,
        seed=1,
    )
    defaults.update(kwargs)
    return RunConfig(**defaults)


# Desk-scale benchmark presets.  Names follow the figures of the experiment
# they emulate; all finish in minutes on one core.
PRESETS: dict[str, RunConfig] = {
    # single-shot readout, Gaussian-damped dephasing: adaptive protocols
    # against the single-shot time-budget bound
    "fig2b": _preset(
        strategies=(
            Strategy.ADAPTIVE_SENSITIVITY,
            Strategy.ADAPTIVE_VARIANCE,
            Strategy.RANDOM,
        ),
        epochs=500,
        replicas=500,
        particle_count=1000,
    ),
    # photon-count readout at high repetition count
    "fig2c": _preset(
        strategies=(
            Strategy.ADAPTIVE_VARIANCE,
            Strategy.ADAPTIVE_SENSITIVITY,
            Strategy.RANDOM,
        ),
        epochs=150,
        replicas=200,
        readout=ReadoutModel(repetitions=50000, **_PAPER_CLICKS),
    ),
    # energy relaxation on millisecond scales (per-shot criterion only:
    # the per-time criterion is undefined at beta = 1)
    "fig3a": _preset(
        kind=ExperimentKind.RELAXATION,
        beta=1.0,
        truth_t_chi=2.5e-3,
        prior_low=0.1e-3,
        prior_high=8e-3,
        strategies=(Strategy.ADAPTIVE_VARIANCE, Strategy.RANDOM),
        epochs=300,
        replicas=100,
        readout=ReadoutModel(repetitions=10000, **_PAPER_CLICKS),
    ),
    # spin-echo decay; the sequence spends 2 * tau per shot
    "fig3b": _preset(
        kind=ExperimentKind.HAHN_ECHO,
        beta=1.5,
        strategies=(Strategy.ADAPTIVE_VARIANCE, Strategy.RANDOM),
        epochs=300,
        replicas=100,
        readout=ReadoutModel(repetitions=10000, **_PAPER_CLICKS),
    ),
    # per-shot vs per-time criteria head to head at moderate repetition
    # count; truth sits well below the prior midpoint so the early phase,
    # where the per-time criterion earns its advantage, is resolved
    "fig4": _preset(
        truth_t_chi=1.8e-6,
        strategies=(
            Strategy.ADAPTIVE_SENSITIVITY,
            Strategy.ADAPTIVE_VARIANCE,
        ),
        epochs=1500,
        replicas=120,
        readout=ReadoutModel(repetitions=10000, **_PAPER_CLICKS),
    ),
}
