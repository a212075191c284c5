"""Command line entry point: a thin client of the HTTP service.

Every subcommand builds one request, sends it to the service (an in-process
application by default, a remote server with ``--server``), and writes the
returned artifacts plus a ``manifest.json`` that pins the fully resolved
configuration, its hash, the seeds, and package versions, so any output file
can be regenerated from its manifest alone.

Exit codes: 0 success, 2 usage, 3 invalid configuration, 4 infeasible
problem, 5 training divergence, 6 routing/contract failure, 7 transcript
verification mismatch, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from pathlib import Path

import yaml

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_INFEASIBLE = 4
EXIT_DIVERGED = 5
EXIT_ROUTE = 6
EXIT_VERIFY = 7

_ERROR_EXIT = {
    "config": EXIT_CONFIG,
    "infeasible": EXIT_INFEASIBLE,
    "diverged": EXIT_DIVERGED,
    "route": EXIT_ROUTE,
    "contract": EXIT_ROUTE,
}

OUTPUT_DIR_ENV = "LEOCOLLAB_OUTPUT_DIR"
MANIFEST_FORMAT = "leocollab-manifest/v1"


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_ERROR):
        super().__init__(message)
        self.exit_code = exit_code


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server.rstrip("/"), timeout=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _post(client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    try:
        body = response.json()
    except ValueError:
        raise CliError(
            f"{path}: non-JSON response with status {response.status_code}"
        )
    if response.status_code >= 400:
        tag = body.get("error")
        message = body.get("message") or json.dumps(body.get("detail", body))
        code = _ERROR_EXIT.get(tag, EXIT_CONFIG if response.status_code == 422 else EXIT_ERROR)
        raise CliError(f"{path}: {message}", exit_code=code)
    return body


def _config_payload(args) -> dict:
    payload: dict = {"config": {}, "overrides": list(args.set or [])}
    if args.config:
        text = Path(args.config).read_text()
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise CliError(f"{args.config}: configuration root must be a mapping",
                           EXIT_CONFIG)
        payload["config"] = data
    return payload


def _output_dir(args, resolved_config: dict) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(resolved_config["run"]["output_dir"])


def _resolve_config(client, payload: dict) -> dict:
    return _post(client, "/config/resolve", payload)


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")


def _write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in fieldnames})
    print(f"wrote {path}")


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return " ".join(str(v) for v in value)
    return value


def _write_manifest(
    out_dir: Path, command: str, resolved: dict, outputs: list[str], extra: dict | None = None
) -> None:
    from .runs import version_info

    manifest = {
        "format": MANIFEST_FORMAT,
        "command": command,
        "config_hash": resolved["config_hash"],
        "config": resolved["config"],
        "seeds": {
            "run": resolved["config"]["run"]["seed"],
            "training": resolved["config"]["training"]["seed"],
            "placement": resolved["config"]["tasks"]["placement_seed"],
        },
        "versions": version_info(),
        "outputs": sorted(outputs),
    }
    if extra:
        manifest["parameters"] = extra
    _write_json(out_dir / "manifest.json", manifest)


def _load_policy_file(path: str | None) -> dict | None:
    if path is None:
        return None
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"policy file not found: {path}", EXIT_CONFIG)
    except ValueError as err:
        raise CliError(f"policy file {path} is not valid JSON: {err}", EXIT_CONFIG)


def _parse_alphas(text: str | None):
    if text is None:
        return None
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise CliError(f"cannot parse alphas {text!r}", EXIT_CONFIG)
    if not values:
        raise CliError("empty alphas", EXIT_CONFIG)
    return values[0] if len(values) == 1 else values


# -- subcommand implementations -------------------------------------------------


def cmd_topology(client, args) -> int:
    payload = _config_payload(args)
    resolved = _resolve_config(client, payload)
    out_dir = _output_dir(args, resolved["config"])
    body = _post(client, "/topology", {**payload, "slot": args.slot})
    _write_json(out_dir / "topology.json", body)
    _write_manifest(out_dir, "topology", resolved, ["topology.json"],
                    extra={"slot": args.slot})
    print(f"slot {body['slot']}: {len(body['nodes'])} nodes, {len(body['links'])} links")
    return EXIT_OK


CURVE_COLUMNS = [
    "epoch", "mean_reward", "mean_t_bar", "mean_loss",
    "epsilon", "delivered_frac", "eval_reward",
]


def cmd_train(client, args) -> int:
    payload = _config_payload(args)
    resolved = _resolve_config(client, payload)
    out_dir = _output_dir(args, resolved["config"])
    body = _post(client, "/train", payload)
    policy_path = out_dir / (args.policy_out or "policy.json")
    _write_json(policy_path, body["policy"])
    curves = body["curves"]
    rows = [
        {col: curves[col][i] for col in CURVE_COLUMNS}
        for i in range(len(curves["epoch"]))
    ]
    _write_csv(out_dir / "curves.csv", CURVE_COLUMNS, rows)
    _write_manifest(
        out_dir, "train", resolved,
        [policy_path.name, "curves.csv"],
        extra={"train_steps": body["train_steps"], "best_epoch": body["best_epoch"]},
    )
    print(
        f"trained {len(rows)} epochs, {body['train_steps']} train steps, "
        f"best epoch {body['best_epoch']}"
    )
    return EXIT_OK


EVALUATION_COLUMNS = [
    "task_id", "alpha", "feasible", "cause", "t_model", "t_feature",
    "t_data", "t_large", "t_local", "t_total", "binding_branch",
]


def cmd_evaluate(client, args) -> int:
    payload = _config_payload(args)
    resolved = _resolve_config(client, payload)
    out_dir = _output_dir(args, resolved["config"])
    body = _post(client, "/evaluate", {
        **payload,
        "alphas": _parse_alphas(args.alphas),
        "policy": _load_policy_file(args.policy),
        "router": args.router,
    })
    _write_csv(out_dir / "evaluation.csv", EVALUATION_COLUMNS, body["tasks"])
    _write_manifest(out_dir, "evaluate", resolved, ["evaluation.csv"],
                    extra={"alphas": args.alphas, "router": args.router,
                           "policy_file": args.policy})
    objective = body["objective"]
    print(f"feasible: {body['feasible']}  objective: "
          f"{objective if objective is not None else 'n/a'}")
    return EXIT_OK


BISECT_COLUMNS = [
    "k", "task_id", "alpha", "t_loc", "t_d_plus_t_lar", "idle_time",
    "objective", "feasible",
]


def cmd_bisect(client, args) -> int:
    payload = _config_payload(args)
    resolved = _resolve_config(client, payload)
    out_dir = _output_dir(args, resolved["config"])
    body = _post(client, "/bisect", {
        **payload,
        "policy": _load_policy_file(args.policy),
        "iterations": args.iters,
        "early_stop": None if args.no_early_stop is False else False,
        "router": args.router,
    })
    rows = []
    for it in body["history"]:
        for i, alpha in enumerate(it["alphas"]):
            rows.append({
                "k": it["k"],
                "task_id": i,
                "alpha": alpha,
                "t_loc": it["t_loc"][i],
                "t_d_plus_t_lar": it["t_offload"][i],
                "idle_time": it["idle"][i],
                "objective": it["objective"],
                "feasible": it["feasible"],
            })
    _write_csv(out_dir / "bisect.csv", BISECT_COLUMNS, rows)
    _write_manifest(out_dir, "bisect", resolved, ["bisect.csv"],
                    extra={"iterations": args.iters, "router": args.router,
                           "policy_file": args.policy})
    print(
        f"best objective {body['objective']} at alphas "
        f"{[round(a, 6) for a in body['alphas']]} "
        f"({body['iterations']} iterations"
        f"{', stopped early' if body['stopped_early'] else ''})"
    )
    return EXIT_OK


def cmd_bench(client, args) -> int:
    payload = _config_payload(args)
    if args.grid:
        grid = yaml.safe_load(Path(args.grid).read_text()) or {}
        if not isinstance(grid, dict):
            raise CliError(f"{args.grid}: grid file must be a mapping", EXIT_CONFIG)
        payload["config"].setdefault("bench", {}).update(grid)
    resolved = _resolve_config(client, payload)
    out_dir = _output_dir(args, resolved["config"])
    body = _post(client, "/bench", {**payload, "policy": _load_policy_file(args.policy)})
    out_name = args.out_file or "results.csv"
    _write_csv(out_dir / out_name, body["fields"], body["rows"])
    _write_manifest(out_dir, "bench", resolved, [out_name],
                    extra={"grid_file": args.grid, "policy_file": args.policy})
    print(f"{len(body['rows'])} rows")
    return EXIT_OK


def cmd_replay(client, args) -> int:
    payload = _config_payload(args)
    resolved = _resolve_config(client, payload)
    out_dir = _output_dir(args, resolved["config"])
    if (args.policy is None) == (args.transcript is None):
        raise CliError(
            "replay needs exactly one of --policy (record) or --transcript (verify)",
            EXIT_USAGE,
        )
    if args.policy is not None:
        body = _post(client, "/replay", {
            **payload,
            "policy": _load_policy_file(args.policy),
            "epsilon": args.epsilon,
            "seed": args.seed,
        })
        out_name = args.out_file or "episode.jsonl"
        path = out_dir / out_name
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            for row in body["transcript"]:
                fh.write(json.dumps(row) + "\n")
        print(f"wrote {path}")
        _write_manifest(out_dir, "replay", resolved, [out_name],
                        extra={"mode": "record", "policy_file": args.policy,
                               "epsilon": args.epsilon, "seed": args.seed})
        print(f"recorded {len(body['transcript']) - 2} steps")
        return EXIT_OK
    rows = []
    with Path(args.transcript).open() as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    body = _post(client, "/replay", {**payload, "transcript": rows})
    report = body["report"]
    print(
        f"replayed {report['steps_replayed']} steps, reward {report['reward']}"
        f" (recorded {report['recorded_reward']})"
    )
    if not report["ok"]:
        for line in report["mismatches"]:
            print(f"mismatch: {line}", file=sys.stderr)
        return EXIT_VERIFY
    print("transcript verified")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument(
        "--set", action="append", metavar="SECTION.KEY=VALUE",
        help="override one configuration value (repeatable)",
    )
    common.add_argument("--server", help="base URL of a running service "
                        "(default: run in-process)")
    common.add_argument("--out", help="output directory (default: config "
                        f"run.output_dir, or ${OUTPUT_DIR_ENV})")
    common.add_argument("--workers", type=int, default=1,
                        help="worker cap (current procedures are single-process)")

    parser = argparse.ArgumentParser(
        prog="leocollab",
        description="Delay-aware small/large detector collaboration over a "
                    "LEO constellation: simulate, train, optimize, benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("topology", parents=[common],
                       help="export the per-slot constellation graph")
    p.add_argument("--slot", type=int, default=None)
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("train", parents=[common],
                       help="train the routing policy on the configured scenario")
    p.add_argument("--policy-out", help="checkpoint file name (default policy.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="route and price the scenario at fixed offloaded shares")
    p.add_argument("--policy", help="policy checkpoint file")
    p.add_argument("--alphas", help="offloaded share(s), e.g. '0.5' or '0.4,0.6,...'")
    p.add_argument("--router", choices=["policy", "dijkstra"], default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bisect", parents=[common],
                       help="optimize the offloaded shares by interval halving")
    p.add_argument("--policy", help="policy checkpoint file")
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--no-early-stop", action="store_true")
    p.add_argument("--router", choices=["policy", "dijkstra"], default=None)
    p.set_defaults(func=cmd_bisect)

    p = sub.add_parser("bench", parents=[common],
                       help="run the scheme-comparison sweep")
    p.add_argument("--grid", help="YAML file overriding the bench section")
    p.add_argument("--policy", help="policy checkpoint file")
    p.add_argument("--out-file", help="CSV name (default results.csv)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", parents=[common],
                       help="record or verify an episode transcript")
    p.add_argument("--policy", help="record one episode with this checkpoint")
    p.add_argument("--transcript", help="verify this transcript file")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-file", help="transcript name (default episode.jsonl)")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve, serve=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "serve", False):
        return cmd_serve(args)
    if args.workers is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    client = _client(args.server)
    try:
        return args.func(client, args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    finally:
        client.close()


if __name__ == "__main__":
    sys.exit(main())
