"""Command-line front end: seeded synthetic / MARL experiments and oracle checks.

Subcommands:

* ``run-synthetic`` - multi-gradient descent runs from random starts, one
  trace CSV per seed plus an oracle classification of every final point.
* ``run-marl``      - tabular gridworld or matrix-game training, one trace
  CSV and summary JSON per seed plus a cross-seed summary.
* ``verify``        - classify endpoints of stored trace CSVs.

JSON config files carry the experiment definition; the flags ``--seed``,
``--out``, ``--algo`` and ``--epsilon`` override config values.  Outputs are
byte-identical for identical config + seeds.
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import descent, gridworld, marl, problems
from .oracle import GridOracle, GridSpec

__all__ = ["main"]

_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["synthetic", "marl", "verify"]},
        "name": {"type": "string"},
        "problem": {"type": "string"},
        "scenario": {"type": "string"},
        "algorithm": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "varepsilon": {"type": "number", "exclusiveMinimum": 0},
        "step_rule": {"enum": ["constant", "theorem1"]},
        "step_size": {"type": "number", "exclusiveMinimum": 0},
        "max_iters": {"type": "integer", "minimum": 0},
        "dummy_objective": {"type": "number"},
        "start_box": {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 2,
            "maxItems": 2,
        },
        "grid_points": {"type": "integer", "minimum": 2},
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "out": {"type": "string"},
        "total_steps": {"type": "integer", "minimum": 1},
        "batch_episodes": {"type": "integer", "minimum": 1},
        "lr": {"type": "number", "exclusiveMinimum": 0},
        "entropy_coef": {"type": "number", "minimum": 0},
        "traces": {"type": "array", "items": {"type": "string"}},
    },
    "required": ["kind", "name", "seeds", "out"],
    "additionalProperties": False,
}

_DEFAULT_BOXES = {"quadratic_pair": (-2.0, 2.0), "clamped_norm": (-10.0, 10.0)}
_DEFAULT_MARL_EPS = {"dead_end": 0.1}


class ConfigError(Exception):
    pass


class TraceFormatError(Exception):
    pass


def _load_config(args) -> dict:
    config: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        config = json.loads(path.read_text())
    config.setdefault("kind", args.kind)
    if args.seed:
        config["seeds"] = list(args.seed)
    if args.out:
        config["out"] = args.out
    if args.algo:
        config["algorithm"] = args.algo
    if args.epsilon is not None:
        config["epsilon"] = args.epsilon
    config.setdefault("name", config.get("kind", "experiment"))
    errors = sorted(
        Draft202012Validator(_SCHEMA).iter_errors(config), key=lambda e: e.path
    )
    if errors:
        raise ConfigError("; ".join(e.message for e in errors))
    if config["kind"] != args.kind:
        raise ConfigError(f"config kind {config['kind']!r} does not match subcommand")
    return config


def _make_problem(config: dict):
    name = config.get("problem")
    m = config.get("dimension", 2)
    if name == "quadratic_pair":
        prob = problems.quadratic_pair(m)
    elif name == "clamped_norm":
        prob = problems.clamped_norm_landscape(m)
    else:
        raise ConfigError(f"unknown problem {name!r}")
    if "dummy_objective" in config:
        prob = problems.with_dummy_objective(prob, config["dummy_objective"])
    box = config.get("start_box") or _DEFAULT_BOXES[name]
    return prob, tuple(box)


def _grid_for(prob, box, config: dict) -> GridSpec:
    pts = config.get("grid_points", 401)
    return GridSpec(lower=(box[0],) * prob.m, upper=(box[1],) * prob.m, points_per_axis=pts)


def _descent_config(config: dict, prob) -> descent.DescentConfig:
    varepsilon = config.get("varepsilon")
    eps = config.get("epsilon")
    if eps is None:
        eps = descent.epsilon_for(varepsilon, prob.smoothness) if varepsilon else 0.01
    return descent.DescentConfig(
        algorithm=config.get("algorithm", descent.MGDA_PP),
        step_rule=config.get("step_rule", "theorem1"),
        step_size=config.get("step_size"),
        epsilon=eps,
        max_iters=config.get("max_iters", 10_000),
    )


def run_synthetic(config: dict) -> int:
    prob, box = _make_problem(config)
    dconf = _descent_config(config, prob)
    exp_dir = Path(config["out"]) / config["name"]
    exp_dir.mkdir(parents=True, exist_ok=True)
    try:
        finals = []
        for seed in config["seeds"]:
            rng = np.random.default_rng(seed)
            x0 = rng.uniform(box[0], box[1], size=prob.m)
            trace = descent.run(prob, x0, dconf)
            seed_dir = exp_dir / str(seed)
            seed_dir.mkdir(parents=True, exist_ok=True)
            trace.to_csv(seed_dir / "trace.csv")
            finals.append((seed, trace))
        oracle = GridOracle(prob, _grid_for(prob, box, config))
        varepsilon = config.get("varepsilon", 0.0)
        oracle.write_csv(exp_dir / "verdicts.csv", [t.final_x for _, t in finals], varepsilon)
        verdicts = [oracle.classify(t.final_x, varepsilon) for _, t in finals]
        summary = {
            "experiment": config["name"],
            "algorithm": dconf.algorithm,
            "epsilon": dconf.epsilon,
            "seeds": list(config["seeds"]),
            "terminations": {str(s): t.termination for s, t in finals},
            "n_strong": sum(v.is_strong for v in verdicts),
            "n_weak_only": sum(v.is_weak and not v.is_strong for v in verdicts),
            "n_eps": sum(v.is_eps for v in verdicts),
        }
        (exp_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except Exception:
        shutil.rmtree(exp_dir, ignore_errors=True)
        raise
    return 0


def run_marl(config: dict) -> int:
    scenario = config.get("scenario")
    algo = config.get("algorithm", "mgpo_pp")
    if algo not in marl.ALGOS:
        raise ConfigError(f"unknown algorithm {algo!r}")
    if scenario == "matrix_game":
        env_factory = gridworld.matrix_game
    elif scenario in gridworld.SCENARIOS:
        layout = gridworld.make_scenario(scenario)
        env_factory = lambda: gridworld.GridworldEnv(layout)
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    eps = config.get("epsilon", _DEFAULT_MARL_EPS.get(scenario, 0.05))
    exp_dir = Path(config["out"]) / config["name"]
    exp_dir.mkdir(parents=True, exist_ok=True)
    try:
        per_seed = []
        for seed in config["seeds"]:
            tconf = marl.TrainConfig(
                total_steps=config.get("total_steps", 100_000),
                batch_episodes=config.get("batch_episodes", 4),
                lr=config.get("lr", marl.TrainConfig.lr),
                entropy_coef=config.get("entropy_coef", marl.TrainConfig.entropy_coef),
                filter_eps=eps,
                seed=seed,
            )
            result = marl.train(env_factory(), algo, tconf)
            seed_dir = exp_dir / str(seed)
            seed_dir.mkdir(parents=True, exist_ok=True)
            result.trace.to_csv(seed_dir / "trace.csv")
            result.trace.write_summary(seed_dir / "summary.json")
            per_seed.append(result.trace.final_returns)
        finals = np.array(per_seed)
        summary = {
            "experiment": config["name"],
            "scenario": scenario,
            "algorithm": algo,
            "epsilon": eps,
            "seeds": list(config["seeds"]),
            "agents": [
                {
                    "agent": i + 1,
                    "mean_return": float(finals[:, i].mean()),
                    "std_return": float(finals[:, i].std()),
                }
                for i in range(finals.shape[1])
            ],
        }
        (exp_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except Exception:
        shutil.rmtree(exp_dir, ignore_errors=True)
        raise
    return 0


def _read_endpoint(path: Path, m: int) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{path}: line 1: empty trace")
        cols = [f"x{j}" for j in range(m)]
        try:
            idx = [header.index(c) for c in cols]
        except ValueError:
            raise TraceFormatError(f"{path}: line 1: missing coordinate columns {cols}")
        last = None
        for lineno, row in enumerate(reader, start=2):
            try:
                last = np.array([float(row[i]) for i in idx])
            except (ValueError, IndexError):
                raise TraceFormatError(f"{path}: line {lineno}: malformed row")
        if last is None:
            raise TraceFormatError(f"{path}: line 2: no data rows")
    return last


def verify(config: dict) -> int:
    prob, box = _make_problem(config)
    traces = config.get("traces")
    if not traces:
        raise ConfigError("verify requires a non-empty 'traces' list")
    paths = [Path(t) for t in traces]
    missing = [p for p in paths if not p.exists()]
    if missing:
        raise FileNotFoundError(f"missing trace files: {', '.join(map(str, missing))}")
    endpoints = [_read_endpoint(p, prob.m) for p in paths]
    oracle = GridOracle(prob, _grid_for(prob, box, config))
    exp_dir = Path(config["out"]) / config["name"]
    exp_dir.mkdir(parents=True, exist_ok=True)
    oracle.write_csv(exp_dir / "verdicts.csv", endpoints, config.get("varepsilon", 0.0))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgdakit")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, kind in (
        ("run-synthetic", "synthetic"),
        ("run-marl", "marl"),
        ("verify", "verify"),
    ):
        p = sub.add_parser(cmd)
        p.set_defaults(kind=kind)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, action="append", help="seed (repeatable)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--algo", help="algorithm name")
        p.add_argument("--epsilon", type=float, help="filter threshold")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
        if args.kind == "synthetic":
            return run_synthetic(config)
        if args.kind == "marl":
            return run_marl(config)
        return verify(config)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (FileNotFoundError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
