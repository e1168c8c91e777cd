"""Command-line entry point: ``subgoal-planner <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 missing model.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataset, evaluation, export
from .config import RunConfig
from .cvae import build_cvae, load_cvae, save_cvae, train_cvae
from .errors import (CapacityError, ConfigError, DatasetParseError, GenerationError,
                     InvalidArgumentError, ModelMissingError, TrainingError)
from .time_estimator import (build_estimator, load_estimator, rows_from_records, save_estimator,
                             train_estimator)
from .world import load_world_file, random_world, save_world_file

log = logging.getLogger("subgoal_planner")

EXIT_CONFIG, EXIT_DATA, EXIT_MODEL = 2, 3, 4


def _world_files(directory) -> list:
    files = sorted(Path(directory).glob("*.json"))
    if not files:
        raise GenerationError(f"no world files in {directory}")
    return [load_world_file(f)[0] for f in files]


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def cmd_gen_worlds(args, cfg):
    out = Path(args.out_dir) / "worlds"
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    args.count = args.count or cfg["world.pool"]
    for k in range(args.count):
        w = random_world(rng, f"w{k:04d}", (cfg["world.count_min"], cfg["world.count_max"]),
                         (cfg["world.radius_min"], cfg["world.radius_max"]),
                         (cfg["world.ring_min"], cfg["world.ring_max"]), cfg["world.bounds"],
                         cfg["world.k_max"])
        save_world_file(out / f"{w.name}.json", w)
    print(f"wrote {args.count} worlds to {out}")


def _witness_params(cfg):
    p = cfg.planner_params()
    return type(p)(p.step_size, cfg["dataset.witness_iterations"], p.resolution)


def cmd_gen_problems(args, cfg):
    worlds = _world_files(args.worlds)
    probs = dataset.generate_problems(worlds, cfg.robot(), args.count, args.seed, _witness_params(cfg),
                                      prefix=args.prefix)
    if args.hard:
        probs = evaluation.hard_subset(cfg.robot(), probs, cfg.planner_params(), cfg["eval.hard_runs"],
                                       cfg.checks(cfg["dataset.budget_seconds"]), args.seed)
    out = Path(args.out or Path(args.out_dir) / "problems.jsonl")
    dataset.save_problems(probs, out)
    print(f"wrote {len(probs)} problems to {out}")


def cmd_gen_data(args, cfg):
    worlds = _world_files(args.worlds)
    robot = cfg.robot()
    runs = args.runs or cfg["dataset.runs"]
    count = args.count or cfg["dataset.count"]
    probs = dataset.generate_problems(worlds, robot, count, args.seed, _witness_params(cfg))
    records = []
    for p in probs:
        records += dataset.label_waypoints(p, robot, runs, cfg.planner_params(),
                                           cfg["dataset.waypoint_spacing"], cfg["shortcut.iterations"])
    out = Path(args.out or Path(args.out_dir) / "data.jsonl")
    dataset.save_dataset(records, out)
    print(json.dumps(dataset.dataset_summary(records), sort_keys=True))


def _nn_kwargs(cfg, batch_key="nn.batch_size"):
    return {"batch_size": cfg[batch_key], "lr": cfg["nn.lr"]}


def cmd_train_cvae(args, cfg):
    records = dataset.load_dataset(args.data)
    budget = args.budget_seconds or cfg["dataset.budget_seconds"]
    kept = dataset.filter_training_set(records, cfg.checks(budget),
                                       cfg["dataset.filter_mode"])
    model = build_cvae(cfg.robot(), cfg.feature_params(), cfg["cvae.latent_dim"], cfg["cvae.beta"],
                       cfg["world.k_max"], tuple(cfg["cvae.encoder_hidden"]), cfg["cvae.condition_dim"],
                       tuple(cfg["cvae.hidden"]), seed=args.seed)
    model, history = train_cvae(model, kept, args.epochs or cfg["cvae.epochs"], args.seed,
                                **_nn_kwargs(cfg, "cvae.batch_size"))
    out = Path(args.out or Path(args.out_dir) / "cvae.json")
    save_cvae(model, out)
    print(f"trained on {len(kept)} of {len(records)} records; loss {history[0]:.4f} -> {history[-1]:.4f}")


def cmd_train_time(args, cfg):
    records = dataset.load_dataset(args.data)
    cvae = load_cvae(args.cvae)
    family = args.family or cfg["time.family"]
    model = build_estimator(cvae.encoder, cfg.robot(), family, cfg["time.w"], cfg.feature_params(),
                            cfg["world.k_max"], tuple(cfg["time.hidden"]), seed=args.seed)
    model, history = train_estimator(model, rows_from_records(records), args.epochs or cfg["time.epochs"],
                                     args.seed, **_nn_kwargs(cfg))
    out = Path(args.out or Path(args.out_dir) / f"time_{family}.json")
    save_estimator(model, out)
    print(f"{family} estimator loss {history[0]:.4f} -> {history[-1]:.4f}")


def _models(args) -> evaluation.Models:
    estimators = {}
    for family, path in (("lognormal", args.time_lognormal), ("normal", args.time_normal)):
        if path:
            estimators[family] = load_estimator(path)
    return evaluation.Models(load_cvae(args.cvae), estimators)


def cmd_eval_static(args, cfg):
    problems = dataset.load_problems(args.problems)
    settings = evaluation.EvalSettings.from_config(cfg)
    needs_models = any(v != "Baseline" for v in args.variants)
    models = _models(args) if needs_models else evaluation.Models()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, summaries = [], {}
    for v in args.variants:
        r, summaries[v] = evaluation.eval_static(problems, models, v, settings, args.seed, args.mode)
        rows += r
        print(v, json.dumps(summaries[v], sort_keys=True))
    export.write_csv(rows, out / f"static_{args.mode}.csv")
    _write_json(out / f"static_{args.mode}_summary.json", summaries)


def cmd_eval_dynamic(args, cfg):
    problem, movers = (evaluation.load_scenario(args.scenario) if args.scenario
                       else evaluation.desk_scenario())
    settings = evaluation.EvalSettings.from_config(cfg)
    sim = evaluation.SimSettings.from_config(cfg)
    models = _models(args)
    results = []
    for k in range(args.runs):
        o = evaluation.eval_dynamic(problem, movers, models, args.variant, settings, sim, args.seed + k)
        valid = evaluation.validate_trace(settings.robot, problem.world, movers, o.states)
        results.append({"seed": args.seed + k, "success": o.success, "reason": o.reason,
                        "final_time": o.final_time, "trace_valid": valid, "total_cost": o.total_cost,
                        "trace": [{"t": e.t, "config": e.config.tolist(),
                                   "subgoal": None if e.subgoal is None else np.asarray(e.subgoal).tolist(),
                                   "plan_cost": e.plan_cost, "snapshot_id": e.snapshot_id,
                                   "event": e.event}
                                  for e in o.trace]})
        print(f"seed {args.seed + k}: {o.reason} at t={o.final_time:.2f} (trace valid: {valid})")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "dynamic.json", results)
    print(f"success {sum(r['success'] for r in results)}/{args.runs}")


def cmd_export(args, cfg):
    rows = export.read_csv(args.rows)
    csv_path, svg_path = export.export_results(rows, args.out_dir, cfg.budget().t_d, args.stem)
    print(f"wrote {csv_path} and {svg_path}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration overriding the defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default=".")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="subgoal-planner", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-worlds", parents=[common], help="random obstacle worlds")
    s.add_argument("--count", type=int)
    s.set_defaults(func=cmd_gen_worlds)

    s = sub.add_parser("gen-problems", parents=[common], help="evaluation problems, optionally the hard subset")
    s.add_argument("--worlds", required=True)
    s.add_argument("--count", type=int, default=1000)
    s.add_argument("--hard", action="store_true")
    s.add_argument("--prefix", default="e")
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen_problems)

    s = sub.add_parser("gen-data", parents=[common], help="label waypoint plan costs")
    s.add_argument("--worlds", required=True)
    s.add_argument("--count", type=int)
    s.add_argument("--runs", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("train-cvae", parents=[common], help="train the subgoal generator")
    s.add_argument("--data", required=True)
    s.add_argument("--budget-seconds", type=float)
    s.add_argument("--epochs", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_train_cvae)

    s = sub.add_parser("train-time", parents=[common], help="train a plan-cost estimator")
    s.add_argument("--data", required=True)
    s.add_argument("--cvae", required=True)
    s.add_argument("--family", choices=["lognormal", "normal"])
    s.add_argument("--epochs", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_train_time)

    for name, func, help_ in (("eval-static", cmd_eval_static, "subgoal and goal-reaching ablations"),
                              ("eval-dynamic", cmd_eval_dynamic, "replanning among moving obstacles")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--cvae")
        s.add_argument("--time-lognormal")
        s.add_argument("--time-normal")
        s.set_defaults(func=func)
        if name == "eval-static":
            s.add_argument("--problems", required=True)
            s.add_argument("--variants", type=lambda v: v.split(","),
                           default=["Random", "B-L-S", "B-N-S", "B-L", "B-N", "Baseline"])
            s.add_argument("--mode", choices=["subgoal", "goal"], default="subgoal")
        else:
            s.add_argument("--scenario", help="scenario file; defaults to the bundled desk scenario")
            s.add_argument("--variant", default="G-L-S")
            s.add_argument("--runs", type=int, default=10)

    s = sub.add_parser("export", parents=[common], help="CSV and SVG summary of evaluation rows")
    s.add_argument("--rows", required=True)
    s.add_argument("--stem", default="results")
    s.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if getattr(args, "cvae", "") is None and args.command.startswith("eval") and (
                args.command == "eval-dynamic" or any(v != "Baseline" for v in args.variants)):
            raise ModelMissingError("--cvae is required for learned variants")
        args.func(args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelMissingError as exc:
        print(f"missing model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (DatasetParseError, GenerationError, TrainingError, CapacityError, InvalidArgumentError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
