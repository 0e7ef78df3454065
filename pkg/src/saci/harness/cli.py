"""Command-line interface: train, eval, sweep, export-plot, serve-env.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 protocol error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace

import numpy as np

from ..errors import CheckpointError, ConfigError, ProtocolError, UsageError
from .config import TrainConfig, load_config
from .presets import PRESET_NAMES, preset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_PROTOCOL = 3


class _UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageExit(message)


def _field_types():
    return {f.name: f.type for f in fields(TrainConfig)}


def _coerce(name: str, raw: str):
    ftype = _field_types().get(name)
    if ftype is None:
        raise ConfigError(f"unknown config field {name!r}")
    if ftype == "bool":
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return raw


def _base_config(args) -> TrainConfig:
    if args.preset:
        cfg = preset(args.preset)
    elif args.config:
        cfg = load_config(args.config)
    else:
        raise ConfigError("provide --preset or --config")
    overrides = {}
    for name in ("seed", "episodes", "algo", "env", "load", "out_dir"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, raw = item.split("=", 1)
        overrides[key] = _coerce(key, raw)
    return replace(cfg, **overrides).validate()


def _add_config_args(sub):
    sub.add_argument("--preset", choices=PRESET_NAMES)
    sub.add_argument("--config", help="config file (key = value sections)")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--episodes", type=int)
    sub.add_argument("--algo", choices=("sac", "saci"))
    sub.add_argument("--env", choices=("stopgo", "lander", "runner"))
    sub.add_argument("--load", help="baseline checkpoint to transfer from")
    sub.add_argument("--out", dest="out_dir", help="output directory")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override any config field")


def _cmd_train(args) -> int:
    from .train import run_training

    cfg = _base_config(args)

    def progress(episode, step, avg100):
        if episode % max(args.log_every, 1) == 0:
            print(f"episode {episode} step {step} avg100 {avg100:.1f}",
                  flush=True)

    result = run_training(cfg, progress=progress if args.log_every else None)
    print(f"done: {result.episodes} episodes, {result.steps} steps, "
          f"final avg100 {result.final_avg100:.1f}")
    print(f"metrics: {result.metrics_path}")
    print(f"checkpoint: {result.checkpoint_path}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .evaluate import evaluate_checkpoint

    overrides = {}
    if args.bomb_freq is not None:
        overrides["bomb_freq"] = args.bomb_freq
    if args.stop_prob is not None:
        overrides["stop_prob"] = args.stop_prob
    summary = evaluate_checkpoint(args.load, args.episodes, seed=args.seed,
                                  env_name=args.env or "", **overrides)
    print(f"episodes: {summary['episodes']}")
    print(f"mean reward: {summary['mean_reward']:.2f} "
          f"(std {summary['std_reward']:.2f})")
    print(f"success rate: {summary['success_rate']:.2%}")
    for cause, count in sorted(summary["cause_counts"].items()):
        print(f"  {cause}: {count}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .sweep import sweep

    cfg = _base_config(args)
    axis = {}
    for item in args.axis:
        if "=" not in item:
            raise ConfigError(f"--axis needs field=v1,v2,..., got {item!r}")
        key, raw = item.split("=", 1)
        axis[key] = [_coerce(key, v) for v in raw.split(",")]
    cells = sweep(cfg, axis, args.seeds, args.out_dir or "sweep",
                  workers=args.workers)
    print(f"ran {len(cells)} cells into {args.out_dir or 'sweep'}")
    return EXIT_OK


def _cmd_export_plot(args) -> int:
    from .plotdata import export_plot_data

    export_plot_data(args.metrics, args.out, smoothing=args.smooth,
                     value_column=args.column)
    print(f"wrote {args.out}.csv and {args.out}.png")
    return EXIT_OK


def _cmd_serve_env(args) -> int:
    import socket

    from ..bridge import SocketTransport, StreamTransport, serve_env
    from ..envs import make_env

    kwargs = {}
    if args.bomb_freq is not None:
        kwargs["bomb_freq"] = args.bomb_freq
    if args.stop_prob is not None:
        kwargs["stop_prob"] = args.stop_prob
    if args.max_steps:
        kwargs["max_steps"] = args.max_steps
    env = make_env(args.env, np.random.default_rng(args.seed), **kwargs)
    if args.stdio:
        transport = StreamTransport(sys.stdin.buffer, sys.stdout.buffer)
        serve_env(env, transport)
        return EXIT_OK
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind((args.host, args.port))
    server.listen(1)
    print(f"serving {args.env} on {args.host}:{args.port}", flush=True)
    conn, _ = server.accept()
    serve_env(env, SocketTransport(conn))
    server.close()
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="saci",
                     description="soft actor-critic with inhibitory networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training configuration")
    _add_config_args(p_train)
    p_train.add_argument("--log-every", type=int, default=50,
                         help="episodes between progress lines (0 = quiet)")
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--load", required=True)
    p_eval.add_argument("--episodes", type=int, default=20)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--env", choices=("stopgo", "lander", "runner"))
    p_eval.add_argument("--bomb-freq", type=float, dest="bomb_freq")
    p_eval.add_argument("--stop-prob", type=float, dest="stop_prob")
    p_eval.set_defaults(func=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="multi-seed sweep over config axes")
    _add_config_args(p_sweep)
    p_sweep.add_argument("--axis", action="append", required=True,
                         metavar="FIELD=V1,V2,...")
    p_sweep.add_argument("--seeds", type=int, default=5)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_plot = sub.add_parser("export-plot",
                            help="aggregate metrics files into table + figure")
    p_plot.add_argument("metrics", nargs="+")
    p_plot.add_argument("--out", required=True, help="output base path")
    p_plot.add_argument("--smooth", type=int, default=1)
    p_plot.add_argument("--column", default="avg100")
    p_plot.set_defaults(func=_cmd_export_plot)

    p_serve = sub.add_parser("serve-env",
                             help="serve a built-in env over the wire protocol")
    p_serve.add_argument("--env", required=True,
                         choices=("stopgo", "lander", "runner"))
    p_serve.add_argument("--port", type=int, default=7331)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--stdio", action="store_true")
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--max-steps", type=int, dest="max_steps")
    p_serve.add_argument("--bomb-freq", type=float, dest="bomb_freq")
    p_serve.add_argument("--stop-prob", type=float, dest="stop_prob")
    p_serve.set_defaults(func=_cmd_serve_env)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageExit as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, UsageError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (CheckpointError, OSError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
