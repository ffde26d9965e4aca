"""Command line entry points: train, analyze, serve, report.

Every flag can also be supplied through the environment with a GFLOWSTATE_
prefix (GFLOWSTATE_DB, GFLOWSTATE_PORT, ...); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Callable

from . import jsonio
from .envs import GridConfig, GridEnv
from .store import IngestionError, Store
from .training import TrainConfig, train


def _env_default(name: str, fallback: Any, cast: Callable[[str], Any]) -> Any:
    raw = os.environ.get(f"GFLOWSTATE_{name}")
    if raw is None:
        return fallback
    return cast(raw)


def _bool_env(raw: str) -> bool:
    return raw.strip().lower() in ("1", "true", "yes", "on")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gflowstate",
        description="GFlowNet training and diagnostics workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_db(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--db",
            default=_env_default("DB", None, str),
            required=_env_default("DB", None, str) is None,
            help="path to the run database",
        )

    p_train = sub.add_parser("train", help="train a policy and log every trajectory")
    add_db(p_train)
    p_train.add_argument("--env", default=_env_default("ENV", "grid", str), choices=["grid"])
    p_train.add_argument(
        "--height", type=int, default=_env_default("HEIGHT", 20, int), help="grid side length"
    )
    p_train.add_argument(
        "--iterations", type=int, default=_env_default("ITERATIONS", 1000, int)
    )
    p_train.add_argument(
        "--batch-size", type=int, default=_env_default("BATCH_SIZE", 16, int)
    )
    p_train.add_argument(
        "--learning-rate", type=float, default=_env_default("LEARNING_RATE", 1e-3, float)
    )
    p_train.add_argument(
        "--log-z-learning-rate",
        type=float,
        default=_env_default("LOG_Z_LEARNING_RATE", 1e-1, float),
    )
    p_train.add_argument(
        "--epsilon", type=float, default=_env_default("EPSILON", 0.05, float)
    )
    p_train.add_argument("--seed", type=int, default=_env_default("SEED", 0, int))
    p_train.add_argument(
        "--hidden-width", type=int, default=_env_default("HIDDEN_WIDTH", 64, int)
    )
    p_train.add_argument(
        "--validation",
        default=_env_default("VALIDATION", None, str),
        help="JSONL file of validation records (default: every grid state)",
    )
    p_train.add_argument(
        "--no-validation",
        action="store_true",
        default=_env_default("NO_VALIDATION", False, _bool_env),
        help="skip populating the validation table",
    )

    p_analyze = sub.add_parser("analyze", help="compute log_ptx and build the trajectory DAG")
    add_db(p_analyze)
    p_analyze.add_argument(
        "--estimator",
        default=_env_default("ESTIMATOR", "auto", str),
        choices=["auto", "exact", "sampled"],
    )
    p_analyze.add_argument("--k", type=int, default=_env_default("K", 1000, int))
    p_analyze.add_argument("--seed", type=int, default=_env_default("SEED", 0, int))

    p_serve = sub.add_parser("serve", help="serve the JSON API over HTTP")
    add_db(p_serve)
    p_serve.add_argument("--host", default=_env_default("HOST", "127.0.0.1", str))
    p_serve.add_argument("--port", type=int, default=_env_default("PORT", 8000, int))

    p_report = sub.add_parser("report", help="write a static JSON+SVG summary")
    add_db(p_report)
    p_report.add_argument("--out", default=_env_default("OUT", "report", str))
    p_report.add_argument(
        "--metric", default=_env_default("METRIC", "reward", str), choices=["reward", "loss"]
    )
    p_report.add_argument("--n", type=int, default=_env_default("N", 20, int))
    p_report.add_argument("--top", type=int, default=_env_default("TOP", 50, int))
    p_report.add_argument(
        "--resolution", type=int, default=_env_default("RESOLUTION", 20, int)
    )
    p_report.add_argument("--method", default=_env_default("METHOD", "auto", str))
    p_report.add_argument("--step", type=int, default=None)
    return parser


def _read_jsonl(path: str) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise IngestionError(lineno, f"invalid JSON: {exc}") from exc
    return records


def cmd_train(args: argparse.Namespace) -> int:
    env = GridEnv(GridConfig(height=args.height))
    config = TrainConfig(
        iterations=args.iterations,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        log_z_learning_rate=args.log_z_learning_rate,
        epsilon=args.epsilon,
        seed=args.seed,
        hidden_width=args.hidden_width,
    )
    with Store.create(args.db, env, config.to_json()) as store:
        if args.validation:
            count = store.load_validation(_read_jsonl(args.validation))
        elif not args.no_validation:
            count = store.populate_grid_validation()
        else:
            count = 0
        result = train(env, config, store)
        summary = dict(result.summary)
        summary["validation_count"] = count
    print(jsonio.dumps(summary))
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    from .api import analyze_run

    with Store.open(args.db, writable=True) as store:
        info = analyze_run(store, estimator=args.estimator, k=args.k, seed=args.seed)
    print(jsonio.dumps(info))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    app = create_app(args.db)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from .report import write_report

    with Store.open(args.db) as store:
        paths = write_report(
            store,
            args.out,
            metric=args.metric,
            n=args.n,
            top=args.top,
            resolution=args.resolution,
            method=args.method,
            step=args.step,
        )
    print(jsonio.dumps({"written": [paths[k] for k in sorted(paths)]}))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "train": cmd_train,
        "analyze": cmd_analyze,
        "serve": cmd_serve,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
