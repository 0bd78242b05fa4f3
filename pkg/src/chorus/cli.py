"""Command-line driver for ensembles, sweeps, and recorded-run replay.

Subcommands: align (build and export alignment maps), decode (one prompt
through a fused session), sweep (full noise grid to CSV), diag (labeled
observation samples to CSV), replay (fuse recorded dumps), selftest
(randomized equivalence check of the fusion engine against the reference
evaluator). Exit codes: 0 success, 1 usage/config problem, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .alignment import export_alignment
from .configio import load_config
from .decoding import decode
from .diagnostics import collect_traces, diagnostics_export
from .errors import ChorusError, ConfigError
from .experiment import ExperimentConfig, build_bundle, run_experiment, write_metrics_csv, _cell_session
from .fusion import MODES, ConsistencyKernel, Distribution, EnsembleConfig, fuse
from .oracle import oracle_fuse
from .replay import ReplaySpec, replay
from .tasks import load_suite

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    # Usage errors must exit 1, not argparse's default 2.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _require_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config", "this command needs a configuration file")
    return load_config(args.config)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pick_seed(args, config: ExperimentConfig) -> int:
    return config.noise.seeds[0] if args.seed is None else args.seed


def cmd_align(args) -> int:
    config = _require_config(args)
    bundle = build_bundle(config)
    out = _out_dir(args)
    main_id = bundle.main.spec.id
    for model_id in sorted(bundle.clean_maps):
        amap = bundle.clean_maps[model_id]
        path = out / f"{model_id}__into__{main_id}.align"
        export_alignment(amap, path)
        print(f"{path}  rows={len(amap.pairs)}  coverage={amap.coverage:.3f}")
    return EXIT_OK


def cmd_decode(args) -> int:
    config = _require_config(args)
    bundle = build_bundle(config)
    mode = args.mode or config.modes[0]
    session = _cell_session(bundle, mode, args.rho, args.std, _pick_seed(args, config))
    session.record = True
    generated, transcript = decode(session, args.prompt)
    print(generated)
    if args.transcript:
        out = _out_dir(args) / args.transcript
        with out.open("w", encoding="utf-8") as fh:
            for entry in transcript:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
        print(f"transcript: {out}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _require_config(args)
    csv_path = _out_dir(args) / args.csv
    rows = run_experiment(config, csv_path)
    ensembles = [r for r in rows if r.method == "ensemble"]
    print(f"{csv_path}  rows={len(rows)}  cells={len(ensembles)}")
    return EXIT_OK


def cmd_diag(args) -> int:
    config = _require_config(args)
    bundle = build_bundle(config)
    mode = args.mode or config.modes[0]
    rho = config.noise.alignment_rho[0] if args.rho is None else args.rho
    std = config.noise.prob_noise_std[0] if args.std is None else args.std
    traces = collect_traces(bundle, mode, rho, std, _pick_seed(args, config), args.limit)
    out = _out_dir(args) / args.csv
    count = diagnostics_export(traces, out)
    print(f"{out}  samples={count}  tasks={len(traces)}")
    return EXIT_OK


def cmd_replay(args) -> int:
    if args.config is not None:
        config = load_config(args.config)
        main_id = next(m.id for m in config.models if m.role == "main")
        joiners = {m.id: " " for m in config.models if m.scheme == "whitespace-word"}
        spec = ReplaySpec(
            main=args.main or main_id,
            modes=tuple(args.mode) if args.mode else config.modes,
            kernel=config.kernel,
            aligner=args.aligner or "prefix",
            main_weight_floor=config.main_weight_floor,
            entropy_floor=config.entropy_floor,
            stop_token=config.stop_token,
            max_steps=config.max_steps,
            joiners=joiners,
        )
        suite_path = args.suite or (
            Path(config.base_dir) / config.suite.path if config.suite.path else None
        )
    else:
        if args.main is None:
            raise ConfigError("--main", "required when no --config is given")
        spec = ReplaySpec(
            main=args.main,
            modes=tuple(args.mode) if args.mode else ("core",),
            kernel=ConsistencyKernel(),
            aligner=args.aligner or "prefix",
        )
        suite_path = args.suite
    if suite_path is None:
        raise ConfigError("--suite", "a task suite is needed to score the replay")
    suite = load_suite(suite_path)
    rows = replay(args.dump or [], args.vocab or [], suite, spec)
    out = _out_dir(args) / args.csv
    write_metrics_csv(rows, out)
    print(f"{out}  rows={len(rows)}")
    return EXIT_OK


def _random_dist(rng, size: int) -> Distribution:
    probs = rng.random(size) + 1e-9
    return Distribution("selftest", probs / probs.sum())


def cmd_selftest(args) -> int:
    """Randomized check that the vectorized engine matches the reference math."""
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    kinds = ("rbf", "power", "sigmoid")
    worst = 0.0
    for _ in range(args.count):
        size = int(rng.integers(2, 17))
        main = _random_dist(rng, size)
        assists = [_random_dist(rng, size) for _ in range(int(rng.integers(0, 4)))]
        kernel = ConsistencyKernel(
            kind=kinds[int(rng.integers(0, 3))],
            sigma=float(rng.random() * 1.5 + 0.1),
            alpha=float(rng.random() * 2 + 0.1),
            beta=float(rng.random() * 3),
            gamma=float(rng.random() * 4 - 1),
        )
        mode = MODES[int(rng.integers(0, 4))]
        config = EnsembleConfig(kernel=kernel, mode=mode)
        fused, _ = fuse(main, assists, config)
        expected = oracle_fuse(
            list(main.probs),
            [list(a.probs) for a in assists],
            kind=kernel.kind,
            sigma=kernel.sigma,
            alpha=kernel.alpha,
            beta=kernel.beta,
            gamma=kernel.gamma,
            mode=mode,
            main_weight_floor=config.main_weight_floor,
            entropy_floor=config.entropy_floor,
        )
        worst = max(worst, float(np.max(np.abs(fused.probs - np.asarray(expected)))))
    print(f"selftest: {args.count} instances, max abs error {worst:.3e}")
    if worst > 1e-9:
        print("selftest: FAILED (tolerance 1e-9)", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="chorus", description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=None, help="TOML experiment configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the first configured seed")
    parser.add_argument("--out", default=".", help="directory for produced files")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        # Accept the global flags after the subcommand too, without letting
        # their absence wipe values parsed before it.
        p.add_argument("--config", default=argparse.SUPPRESS)
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        p.add_argument("--out", default=argparse.SUPPRESS)

    p = sub.add_parser("align", help="build alignment maps and export them")
    common(p)
    p.set_defaults(fn=cmd_align)

    p = sub.add_parser("decode", help="decode one prompt through a fused session")
    common(p)
    p.add_argument("--prompt", required=True)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--rho", type=float, default=0.0, help="alignment corruption rate")
    p.add_argument("--std", type=float, default=0.0, help="probability noise level")
    p.add_argument("--transcript", default=None, help="write per-step JSONL under --out")
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("sweep", help="run the configured noise grid, write metrics CSV")
    common(p)
    p.add_argument("--csv", default="metrics.csv")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("diag", help="export labeled observation samples")
    common(p)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--std", type=float, default=None)
    p.add_argument("--limit", type=int, default=None, help="only the first N suite tasks")
    p.add_argument("--csv", default="diagnostics.csv")
    p.set_defaults(fn=cmd_diag)

    p = sub.add_parser("replay", help="fuse recorded dump files instead of live models")
    common(p)
    p.add_argument("--dump", action="append", help="dump JSONL (repeatable)")
    p.add_argument("--vocab", action="append", help="vocabulary file (repeatable)")
    p.add_argument("--suite", default=None, help="task suite JSONL for scoring")
    p.add_argument("--main", default=None, help="model id anchoring the fusion space")
    p.add_argument("--mode", action="append", choices=MODES)
    p.add_argument("--aligner", choices=("exact", "prefix", "min_edit"), default=None)
    p.add_argument("--csv", default="replay_metrics.csv")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("selftest", help="compare the engine against the reference evaluator")
    common(p)
    p.add_argument("--count", type=int, default=1000)
    p.set_defaults(fn=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"chorus: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ChorusError as err:
        print(f"chorus: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as err:
        print(f"chorus: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
