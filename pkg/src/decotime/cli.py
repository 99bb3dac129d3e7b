"""Command-line client for the estimation service.

All subcommands go through the HTTP API: against an in-process app by
default, or a remote server with --server.  Exit codes: 0 success, 2 for
configuration problems, 3 when a replay aborts on a collapsed posterior.
"""

from __future__ import annotations

import argparse
import json
import sys

from .units import parse_time

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


class Client:
    """Minimal request wrapper hiding in-process vs remote transport."""

    def __init__(self, server: str | None = None):
        if server is not None:
            import httpx

            self._http = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings

            from .service.app import create_app

            with warnings.catch_warnings():
                # starlette warns about the installed httpx major version;
                # harmless for an in-process client
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient

                self._http = TestClient(create_app())

    def post(self, path: str, payload: dict) -> dict:
        return self._check(self._http.post(path, json=payload))

    def get(self, path: str) -> dict:
        return self._check(self._http.get(path))

    @staticmethod
    def _check(response) -> dict:
        if response.status_code < 300:
            return response.json()
        try:
            body = response.json()
        except ValueError:
            body = {"detail": response.text}
        detail = body.get("detail", response.text)
        if not isinstance(detail, str):
            detail = json.dumps(detail)
        if response.status_code == 409 and body.get("error") == "degenerate_posterior":
            raise CliError(f"posterior collapsed: {detail}", EXIT_DEGENERATE)
        raise CliError(detail, EXIT_CONFIG)


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as handle:
            handle.write(text)


def _kv_csv(rows: list[tuple[float, float]]) -> str:
    lines = ["input,value"]
    lines += [f"{repr(float(a))},{repr(float(b))}" for a, b in rows]
    return "\n".join(lines) + "\n"


def _parse_readout(text: str) -> dict:
    parts = text.split(",")
    if len(parts) != 3:
        raise CliError(f"--readout expects p0,p1,R, got {text!r}")
    try:
        return {
            "p_click_0": float(parts[0]),
            "p_click_1": float(parts[1]),
            "repetitions": int(parts[2]),
        }
    except ValueError as err:
        raise CliError(f"bad --readout value: {err}") from err


def _parse_time_range(text: str) -> tuple[float, float]:
    if ".." in text:
        lo_text, hi_text = text.split("..", 1)
        try:
            lo, hi = parse_time(lo_text), parse_time(hi_text)
        except ValueError as err:
            raise CliError(str(err)) from err
        if not 0 < lo < hi:
            raise CliError(f"need 0 < t1 < t2 in --times, got {text!r}")
        return lo, hi
    try:
        value = parse_time(text)
    except ValueError as err:
        raise CliError(str(err)) from err
    return value, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decotime",
        description="Adaptive Bayesian estimation of qubit decoherence timescales.",
    )
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark batch")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", help="named preset configuration")
    source.add_argument("--config", help="TOML configuration file")
    run.add_argument("--replicas", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--out", help="output path (default: stdout)")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--record", help="also record a single-replica epoch log to this path")

    xi = sub.add_parser("xi", help="optimal probing-time ratio for a decay exponent")
    xi.add_argument("--beta", type=float, required=True)
    xi.add_argument("--criterion", choices=("var", "sens"), required=True)
    xi.add_argument("--out")

    crlb = sub.add_parser("crlb", help="estimation-limit envelope vs total probing time")
    crlb.add_argument("--beta", type=float, required=True)
    crlb.add_argument("--t-chi", required=True, help="decay time, e.g. 2.5us")
    crlb.add_argument("--times", required=True, help="time range t1..t2 (suffixes s/ms/us/ns)")
    crlb.add_argument("--points", type=int, default=50)
    crlb.add_argument("--readout", help="photon-count readout as p0,p1,R")
    crlb.add_argument("--criterion", choices=("var", "sens"), default="sens")
    crlb.add_argument("--n-shots", type=int)
    crlb.add_argument("--out")

    bench = sub.add_parser("bench", help="hot-path latency vs particle count")
    bench.add_argument("--particles", default="50,100,200,400,800,1600")
    bench.add_argument("--repeats", type=int, default=300)
    bench.add_argument("--out")
    bench.add_argument("--format", choices=("csv", "json"), default="csv")

    replay = sub.add_parser("replay", help="re-run a recorded epoch log")
    replay.add_argument("--log", required=True)
    replay.add_argument("--no-strict", action="store_true",
                        help="skip probing-time agreement checks")
    replay.add_argument("--out", help="write replayed records as JSON")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    return parser


def _load_config_dict(path: str) -> dict:
    try:
        import tomllib  # py >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except OSError as err:
        raise CliError(f"cannot read config {path}: {err}") from err
    except tomllib.TOMLDecodeError as err:
        raise CliError(f"bad TOML in {path}: {err}") from err


def _cmd_run(args, client: Client) -> int:
    payload: dict = {"replicas": args.replicas, "seed": args.seed, "workers": args.workers}
    if args.preset:
        payload["preset"] = args.preset
    else:
        payload["config"] = _load_config_dict(args.config)
    result = client.post("/runs", payload)
    from .harness import render_csv, result_from_dict

    if args.format == "csv":
        _write(render_csv(result_from_dict(result)), args.out)
    else:
        _write(json.dumps(result, indent=2) + "\n", args.out)
    if args.record:
        record_payload = dict(payload)
        record_payload.pop("replicas", None)
        record_payload.pop("workers", None)
        log = client.post("/record", record_payload)
        with open(args.record, "w") as handle:
            json.dump(log, handle, indent=2)
            handle.write("\n")
    return EXIT_OK


def _cmd_xi(args, client: Client) -> int:
    result = client.post("/xi", {"beta": args.beta, "criterion": args.criterion})
    _write(_kv_csv([(result["beta"], result["xi"])]), args.out)
    return EXIT_OK


def _cmd_crlb(args, client: Client) -> int:
    import numpy as np

    try:
        t_chi = parse_time(args.t_chi)
    except ValueError as err:
        raise CliError(str(err)) from err
    lo, hi = _parse_time_range(args.times)
    if args.points < 1:
        raise CliError(f"--points must be >= 1, got {args.points}")
    times = [lo] if lo == hi else [float(t) for t in np.geomspace(lo, hi, args.points)]
    payload = {
        "beta": args.beta,
        "t_chi": t_chi,
        "times": times,
        "criterion": args.criterion,
        "n_shots": args.n_shots,
    }
    if args.readout:
        payload["readout"] = _parse_readout(args.readout)
    result = client.post("/crlb", payload)
    _write(_kv_csv(list(zip(result["times"], result["bounds"]))), args.out)
    return EXIT_OK


def _cmd_bench(args, client: Client) -> int:
    try:
        particles = [int(p) for p in args.particles.split(",") if p.strip()]
    except ValueError as err:
        raise CliError(f"bad --particles value: {err}") from err
    result = client.post("/bench", {"particles": particles, "repeats": args.repeats})
    if args.format == "json":
        _write(json.dumps(result, indent=2) + "\n", args.out)
    else:
        from .harness import BenchReport, render_bench_csv

        _write(render_bench_csv(BenchReport(**result)), args.out)
    return EXIT_OK


def _cmd_replay(args, client: Client) -> int:
    try:
        with open(args.log) as handle:
            log = json.load(handle)
    except OSError as err:
        raise CliError(f"cannot read log {args.log}: {err}") from err
    except json.JSONDecodeError as err:
        raise CliError(f"bad JSON in {args.log}: {err}") from err
    result = client.post("/replay", {"log": log, "strict": not args.no_strict})
    records = result["records"]
    if args.out:
        with open(args.out, "w") as handle:
            json.dump(result, handle, indent=2)
            handle.write("\n")
    sys.stdout.write(
        f"replayed {len(records)} epochs; final estimate "
        f"{result['final_estimate']:.6e} s +- {result['final_estimate_std']:.6e} s\n"
    )
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("decotime.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        client = Client(args.server)
        handler = {
            "run": _cmd_run,
            "xi": _cmd_xi,
            "crlb": _cmd_crlb,
            "bench": _cmd_bench,
            "replay": _cmd_replay,
        }[args.command]
        return handler(args, client)
    except CliError as err:
        sys.stderr.write(f"error: {err}\n")
        return err.code


if __name__ == "__main__":
    sys.exit(main())
