"""Command line front end.

Subcommands: ``bmvm``, ``ldpc``, ``track`` run one experiment and append a
stats row; ``sweep`` runs an experiment across several topologies;
``gen-matrix`` / ``gen-vector`` / ``gen-video`` emit deterministic inputs.

The order of precedence for settings is: built-in default, then the
--config file, then explicit flags.
"""

from __future__ import annotations

import argparse
import sys

from . import video
from .errors import ConfigError, SimulationStalled
from .gf2 import matrix_to_text, vector_to_text
from .harness import (
    ExperimentConfig,
    gen_matrix,
    gen_vector,
    parse_config_text,
    run_experiment,
    set_config_value,
)

_APP_KEYS = {
    "bmvm": ["n", "k", "f", "r", "density", "columns", "matrix", "vector", "checkpoints"],
    "ldpc": ["iters", "llr", "llr_file"],
    "track": [
        "video", "width", "height", "frames", "vx", "vy", "noise",
        "start_x", "start_y", "particles", "workers", "sigma", "lam",
        "bins", "half_w", "half_h", "init_x", "init_y",
    ],
}
_COMMON_KEYS = ["shape", "endpoints", "flit_width", "buffer_depth"]


def _add_run_args(sub: argparse.ArgumentParser, app: str) -> None:
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--topology", choices=["ring", "mesh", "torus", "fat_tree"])
    sub.add_argument("--partition", help="partition spec file (router_id:partition_id lines)")
    sub.add_argument("--stats-out", dest="stats_out", help="stats CSV to append to")
    sub.add_argument("--out", help="result file path")
    for key in _COMMON_KEYS + _APP_KEYS.get(app, []):
        sub.add_argument(f"--{key.replace('_', '-')}", dest=key)
    if app in ("ldpc", "sweep"):
        sign = sub.add_mutually_exclusive_group()
        sign.add_argument("--sign-mode", dest="sign_mode", action="store_true", default=None)
        sign.add_argument("--literal-mode", dest="sign_mode", action="store_false", default=None)
    if app == "sweep":
        sub.add_argument("--app", choices=["bmvm", "ldpc", "track"])
        sub.add_argument(
            "--topologies", default="ring,mesh,torus,fat_tree",
            help="comma-separated topology kinds to sweep",
        )
        for key in _APP_KEYS["bmvm"] + _APP_KEYS["ldpc"] + _APP_KEYS["track"]:
            if f"--{key.replace('_', '-')}" not in sub._option_string_actions:
                sub.add_argument(f"--{key.replace('_', '-')}", dest=key)


def _build_config(args: argparse.Namespace, app: str | None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config_text(fh.read(), cfg)
    if app:
        cfg.app = app
    for key, value in vars(args).items():
        if key in ("command", "config", "topologies") or value is None:
            continue
        if isinstance(value, str):
            set_config_value(cfg, key, value)
        else:
            setattr(cfg, key, value)
    return cfg


def _report(record) -> None:
    print(record.to_row())


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="flitsim")
    subs = parser.add_subparsers(dest="command", required=True)

    for app in ("bmvm", "ldpc", "track"):
        _add_run_args(subs.add_parser(app, help=f"run the {app} experiment"), app)
    _add_run_args(subs.add_parser("sweep", help="run one experiment across topologies"), "sweep")

    gm = subs.add_parser("gen-matrix", help="write a random GF(2) matrix file")
    gm.add_argument("--n", type=int, required=True)
    gm.add_argument("--density", type=float, default=0.5)
    gm.add_argument("--seed", type=int, default=1)
    gm.add_argument("--out", required=True)

    gv = subs.add_parser("gen-vector", help="write a random GF(2) vector file")
    gv.add_argument("--n", type=int, required=True)
    gv.add_argument("--seed", type=int, default=1)
    gv.add_argument("--count", type=int, default=1)
    gv.add_argument("--out", required=True)

    gvid = subs.add_parser("gen-video", help="write a synthetic moving-square video")
    gvid.add_argument("--width", type=int, default=64)
    gvid.add_argument("--height", type=int, default=64)
    gvid.add_argument("--frames", type=int, default=30)
    gvid.add_argument("--vx", type=float, default=2.0)
    gvid.add_argument("--vy", type=float, default=0.0)
    gvid.add_argument("--noise", type=float, default=0.0)
    gvid.add_argument("--start-x", dest="start_x", type=float, default=None)
    gvid.add_argument("--start-y", dest="start_y", type=float, default=None)
    gvid.add_argument("--seed", type=int, default=1)
    gvid.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, SimulationStalled, OSError) as exc:
        kind = type(exc).__name__
        print(f"ERROR {kind}: {exc}", file=sys.stderr)
        return 2


def _dispatch(args: argparse.Namespace) -> int:
    cmd = args.command
    if cmd == "gen-matrix":
        a = gen_matrix(args.n, args.density, args.seed)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(matrix_to_text(a))
        return 0
    if cmd == "gen-vector":
        with open(args.out, "w", encoding="utf-8") as fh:
            for c in range(args.count):
                fh.write(vector_to_text(gen_vector(args.n, args.seed, c), args.n))
        return 0
    if cmd == "gen-video":
        spec = video.VideoSpec(
            width=args.width, height=args.height, frames=args.frames,
            vx=args.vx, vy=args.vy, noise=args.noise,
            start_x=args.start_x, start_y=args.start_y,
        )
        video.write_video(args.out, video.gen_video(spec, args.seed))
        return 0
    if cmd == "sweep":
        base = _build_config(args, None)
        if not base.app:
            raise ConfigError("sweep needs an app (--app or app= in the config)")
        out_base = base.out
        for kind in [t.strip() for t in args.topologies.split(",") if t.strip()]:
            cfg = ExperimentConfig(**vars(base))
            cfg.topology = kind
            if out_base:
                cfg.out = f"{out_base}.{kind}"
            _report(run_experiment(cfg))
        return 0
    cfg = _build_config(args, cmd)
    record = run_experiment(cfg)
    _report(record)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
