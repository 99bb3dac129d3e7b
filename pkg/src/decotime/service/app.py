"""HTTP front end over the estimation library.

Stateless analysis endpoints (/xi, /crlb, /runs, /bench, /replay) plus a
stateful /sessions API that drives the propose/measure/absorb loop for an
external instrument.  Error mapping: invalid inputs give 400, a collapsed
posterior or a replay mismatch gives 409, unknown resources give 404.
"""

from __future__ import annotations

import uuid

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import (
    PRESETS,
    ConfigError,
    config_from_dict,
    with_overrides,
)
from ..estimator import DegeneratePosterior, EstimatorConfig
from ..harness import (
    bench_to_dict,
    latency_bench,
    record_run,
    replay_run,
    result_to_dict,
    run_batch,
)
from ..infotheory import Criterion, NoMaximum, XiTable, crlb_envelope, solve_xi
from ..model import DecayLaw, ExperimentKind, ReadoutModel
from ..protocol import EstimationSession, ReplayMismatch, Strategy
from ..simulator import ROLE_ESTIMATOR, ROLE_MEASUREMENT, RandomStream
from .schemas import (
    AbsorbRequest,
    BenchRequest,
    CrlbRequest,
    CrlbResponse,
    EpochOut,
    ProposeResponse,
    RecordRequest,
    ReplayRequest,
    ReplayResponse,
    RunRequest,
    SessionCreate,
    SessionState,
    XiRequest,
    XiResponse,
)

_CRITERIA = {"var": Criterion.VARIANCE, "sens": Criterion.SENSITIVITY}


def _readout(spec) -> ReadoutModel | None:
    if spec is None:
        return None
    return ReadoutModel(spec.p_click_0, spec.p_click_1, spec.repetitions)


def _epoch_out(record) -> EpochOut:
    return EpochOut(
        epoch=record.epoch,
        tau=record.tau,
        outcome=record.outcome,
        cumulative_probing_time=record.cumulative_probing_time,
        estimate=record.estimate,
        estimate_std=record.estimate_std,
        resampled=record.resampled,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="decotime", version=__version__)
    sessions: dict[str, EstimationSession] = {}

    @app.exception_handler(ConfigError)
    async def _config_error(request: Request, exc: ConfigError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(NoMaximum)
    async def _no_maximum(request: Request, exc: NoMaximum):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(DegeneratePosterior)
    async def _degenerate(request: Request, exc: DegeneratePosterior):
        return JSONResponse(
            status_code=409,
            content={
                "detail": str(exc),
                "error": "degenerate_posterior",
                "epoch": getattr(exc, "epoch", None),
            },
        )

    @app.exception_handler(ReplayMismatch)
    async def _mismatch(request: Request, exc: ReplayMismatch):
        return JSONResponse(
            status_code=409,
            content={"detail": str(exc), "error": "replay_mismatch"},
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/xi", response_model=XiResponse)
    def xi(req: XiRequest):
        value = solve_xi(req.beta, _CRITERIA[req.criterion])
        return XiResponse(beta=req.beta, criterion=req.criterion, xi=value)

    @app.post("/crlb", response_model=CrlbResponse)
    def crlb(req: CrlbRequest):
        law = DecayLaw(req.t_chi, req.beta)
        times = np.asarray(req.times, dtype=float)
        if (times <= 0).any():
            raise ConfigError("all times must be positive")
        bounds = crlb_envelope(
            times,
            law,
            _readout(req.readout),
            _CRITERIA[req.criterion],
            n_shots=req.n_shots,
        )
        return CrlbResponse(
            times=[float(t) for t in times],
            bounds=[float(b) for b in np.asarray(bounds)],
        )

    @app.post("/runs")
    def runs(req: RunRequest):
        if (req.preset is None) == (req.config is None):
            raise ConfigError("provide exactly one of 'preset' or 'config'")
        if req.preset is not None:
            if req.preset not in PRESETS:
                return JSONResponse(
                    status_code=404,
                    content={
                        "detail": f"unknown preset {req.preset!r}; "
                        f"available: {', '.join(sorted(PRESETS))}"
                    },
                )
            config = PRESETS[req.preset]
        else:
            config = config_from_dict(req.config)
        config = with_overrides(
            config, replicas=req.replicas, seed=req.seed, workers=req.workers
        )
        return result_to_dict(run_batch(config))

    @app.post("/bench")
    def bench(req: BenchRequest):
        report = latency_bench(tuple(req.particles), repeats=req.repeats, seed=req.seed)
        return bench_to_dict(report)

    @app.post("/record")
    def record(req: RecordRequest):
        if (req.preset is None) == (req.config is None):
            raise ConfigError("provide exactly one of 'preset' or 'config'")
        if req.preset is not None:
            if req.preset not in PRESETS:
                return JSONResponse(
                    status_code=404,
                    content={"detail": f"unknown preset {req.preset!r}"},
                )
            config = PRESETS[req.preset]
        else:
            config = config_from_dict(req.config)
        config = with_overrides(config, seed=req.seed)
        strategy = (
            Strategy(req.strategy) if req.strategy is not None else config.strategies[0]
        )
        return record_run(config, strategy, replica=req.replica)

    @app.post("/replay", response_model=ReplayResponse)
    def replay(req: ReplayRequest):
        records = replay_run(req.log, strict=req.strict)
        return ReplayResponse(
            records=[_epoch_out(r) for r in records],
            final_estimate=records[-1].estimate,
            final_estimate_std=records[-1].estimate_std,
        )

    @app.post("/sessions", response_model=SessionState, status_code=201)
    def create_session(req: SessionCreate):
        strategy = Strategy(req.strategy)
        kind = ExperimentKind(req.kind)
        beta = req.beta if req.beta is not None else kind.default_beta
        config = EstimatorConfig(
            prior_low=req.prior_low,
            prior_high=req.prior_high,
            particle_count=req.particle_count,
            liu_west_a=req.liu_west_a,
            resample_threshold=req.resample_threshold,
            rng_seed=(req.seed, req.replica, ROLE_ESTIMATOR),
            iid_prior=req.iid_prior,
            full_variance_resample=req.full_variance_resample,
        )
        session = EstimationSession(
            strategy,
            beta,
            kind,
            _readout(req.readout),
            config,
            req.total_epochs,
            quantize=req.quantize,
            quantize_levels=req.quantize_levels,
            strategy_rng=RandomStream(req.seed, req.replica, ROLE_MEASUREMENT).generator(),
        )
        sid = uuid.uuid4().hex
        sessions[sid] = session
        return _session_state(sid, session)

    def _session_state(sid: str, session: EstimationSession) -> SessionState:
        from ..estimator import posterior_mean, posterior_std

        return SessionState(
            session_id=sid,
            strategy=session.strategy.value,
            epoch=session.epoch,
            repetitions=session.repetitions,
            cumulative_probing_time=session.cumulative_probing_time,
            estimate=posterior_mean(session.ensemble),
            estimate_std=posterior_std(session.ensemble),
        )

    def _get_session(sid: str) -> EstimationSession:
        if sid not in sessions:
            raise LookupError(sid)
        return sessions[sid]

    @app.exception_handler(LookupError)
    async def _not_found(request: Request, exc: LookupError):
        return JSONResponse(
            status_code=404, content={"detail": f"no such session: {exc}"}
        )

    @app.get("/sessions/{sid}", response_model=SessionState)
    def get_session(sid: str):
        return _session_state(sid, _get_session(sid))

    @app.post("/sessions/{sid}/propose", response_model=ProposeResponse)
    def propose(sid: str):
        session = _get_session(sid)
        return ProposeResponse(epoch=session.epoch, tau=session.propose_tau())

    @app.post("/sessions/{sid}/absorb", response_model=EpochOut)
    def absorb(sid: str, req: AbsorbRequest):
        session = _get_session(sid)
        return _epoch_out(session.absorb(req.tau, req.outcome))

    @app.delete("/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        _get_session(sid)
        del sessions[sid]

    return app


app = create_app()
