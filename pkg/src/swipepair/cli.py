"""Command-line client for the pairing simulator.

All orchestration lives in the service layer; each subcommand builds a
request model, obtains a response (in-process by default, over HTTP when
--server is given), and writes files/stdout from it.  Exit codes: 0 on
success (an accepted pairing for `pair`), 1 for a rejected pairing or
infeasible calibration, 2 for configuration or usage errors.  stderr
carries diagnostics only.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from pydantic import ValidationError

from . import __version__, service
from .config import ScenarioConfig, load_config
from .errors import ConfigError, SwipePairError
from .harness import CSV_COLUMNS, _fmt

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_CONFIG = 2


class _Client:
    """Dispatches requests to the in-process handlers or a remote server."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def call(self, name: str, handler, request):
        if self.server is None:
            response = handler(request)
            return response.model_dump(mode="json")
        import httpx

        r = httpx.post(f"{self.server}/{name}", json=request.model_dump(mode="json"),
                       timeout=600.0)
        if r.status_code == 422:
            raise ConfigError(r.json().get("detail", "invalid request"))
        r.raise_for_status()
        return r.json()

    def get(self, name: str, handler):
        if self.server is None:
            return handler().model_dump(mode="json")
        import httpx

        r = httpx.get(f"{self.server}/{name}", timeout=60.0)
        r.raise_for_status()
        return r.json()


def _add_common(p: argparse.ArgumentParser, runs_default: int | None = None) -> None:
    p.add_argument("--config", help="scenario file (YAML or JSON)")
    p.add_argument("--seed", type=int, help="base random seed (overrides config)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="dotted-path config override")
    p.add_argument("--out", help="output directory", default=None)
    p.add_argument("--server", help="base URL of a running service; "
                   "default is in-process execution")
    if runs_default is not None:
        p.add_argument("--runs", type=int, default=runs_default,
                       help=f"Monte-Carlo runs (default {runs_default})")


def _scenario(args) -> ScenarioConfig:
    return load_config(args.config, overrides=args.overrides, seed=args.seed)


def _outdir(args) -> Path:
    out = Path(args.out) if args.out else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, indent=2))


def cmd_pair(args) -> int:
    cfg = _scenario(args)
    client = _Client(args.server)
    resp = client.call("pair", service.handle_pair,
                       service.PairRequest(config=cfg, include_transcript=True))
    out = _outdir(args)
    transcript_path = out / "transcript.json"
    transcript_path.write_text(json.dumps(resp["transcript"], sort_keys=True) + "\n")
    _emit({"accepted": resp["accepted"], "failed_check": resp["failed_check"],
           "metrics": resp["metrics"], "transcript": str(transcript_path)})
    return EXIT_OK if resp["accepted"] else EXIT_REJECTED


def cmd_montecarlo(args) -> int:
    cfg = _scenario(args)
    client = _Client(args.server)
    resp = client.call("montecarlo", service.handle_monte_carlo,
                       service.MonteCarloRequest(config=cfg, n_runs=args.runs))
    out = _outdir(args)
    runs_path = out / "runs.csv"
    with open(runs_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in resp["runs"]:
            writer.writerow([
                f"{r['seed']}:{r['run_index']}",
                _fmt(r["accepted"]), _fmt(r["failed_check"]),
                _fmt(r["residual_std_fwd"]), _fmt(r["residual_std_rev"]),
                _fmt(r["depth_db"]), _fmt(r["width_s"]),
            ])
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(resp["summary"], sort_keys=True, indent=2) + "\n")
    _emit(resp["summary"])
    return EXIT_OK


def cmd_roc(args) -> int:
    cfg = _scenario(args)
    if cfg.attacker is None:
        raise ConfigError("roc needs a config with an attacker section")
    client = _Client(args.server)
    resp = client.call("roc", service.handle_roc,
                       service.RocRequest(config=cfg, n_runs=args.runs))
    out = _outdir(args)
    roc_path = out / "roc.json"
    roc_path.write_text(json.dumps(resp, sort_keys=True, indent=2) + "\n")
    _emit({"auc": resp["auc"], "n_legit": resp["n_legit"],
           "n_attack": resp["n_attack"], "roc": str(roc_path)})
    return EXIT_OK


def _read_trace_csv(path: str) -> tuple[list[float], list[float]]:
    times, values = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ConfigError(f"{path}: empty trace file")
        cols = [c.strip().lower() for c in header]
        if cols[:2] != ["time_s", "pathloss_db"]:
            raise ConfigError(f"{path}: header must be time_s,pathloss_db")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"{path}: malformed row {lineno}: {row!r}") from exc
    if not times:
        raise ConfigError(f"{path}: no data rows")
    return times, values


def cmd_analyze(args) -> int:
    times, values = _read_trace_csv(args.trace)
    detector = {"lag": args.lag, "threshold": args.threshold,
                "influence": args.influence, "smooth_window": args.smooth_window}
    req = service.AnalyzeRequest(times_s=times, pathloss_db=values,
                                 detector=detector,
                                 variation_threshold_db=args.variation_threshold,
                                 cutoff_fraction=args.cutoff)
    client = _Client(args.server)
    resp = client.call("analyze", service.handle_analyze, req)
    if args.out:
        out = _outdir(args)
        (out / "analysis.json").write_text(
            json.dumps(resp, sort_keys=True, indent=2) + "\n")
    _emit(resp)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    req = service.CalibrateRequest(environment=args.environment,
                                   target_fpr=args.target_fpr,
                                   target_tpr=args.target_tpr,
                                   n_runs=args.runs, seed=args.seed or 0,
                                   attacker_distance_m=args.attacker_distance)
    client = _Client(args.server)
    resp = client.call("calibrate", service.handle_calibrate, req)
    _emit(resp)
    if not resp["feasible"]:
        print("targets infeasible; best achievable point printed above",
              file=sys.stderr)
        return EXIT_REJECTED
    return EXIT_OK


def cmd_presets(args) -> int:
    client = _Client(args.server)
    resp = client.get("presets", service.handle_presets)
    _emit(resp)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run(service.app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swipepair",
        description="Swipe-motion RSSI proximity pairing simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pair", help="run one pairing and write its transcript")
    _add_common(p)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("montecarlo", help="run a seeded Monte-Carlo sweep")
    _add_common(p, runs_default=1000)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("roc", help="legit-vs-attack threshold sweep (ROC)")
    _add_common(p, runs_default=1000)
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("analyze", help="analyze a pathloss trace CSV")
    p.add_argument("trace", help="CSV with header time_s,pathloss_db")
    p.add_argument("--lag", type=int, default=100)
    p.add_argument("--threshold", type=float, default=4.0)
    p.add_argument("--influence", type=float, default=0.5)
    p.add_argument("--smooth-window", type=int, default=21)
    p.add_argument("--variation-threshold", type=float, default=1.27)
    p.add_argument("--cutoff", type=float, default=0.01)
    p.add_argument("--out", default=None)
    p.add_argument("--server", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", help="recommend a variation threshold")
    p.add_argument("environment", choices=["office", "lobby", "dining"])
    p.add_argument("--target-fpr", type=float, default=0.10)
    p.add_argument("--target-tpr", type=float, default=0.90)
    p.add_argument("--attacker-distance", type=float, default=None)
    p.add_argument("--runs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--server", default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("presets", help="list environment and trajectory presets")
    p.add_argument("--server", default=None)
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SwipePairError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
