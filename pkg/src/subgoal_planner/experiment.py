"""Desk-scale end-to-end build: worlds, labeled dataset, hard evaluation problems, trained models.

Artifacts are written to a work directory and reused on later calls when the
recorded build parameters match.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .cvae import CvaeModel, build_cvae, load_cvae, save_cvae, train_cvae
from .dataset import (filter_training_set, generate_problems, label_waypoints, load_dataset,
                      load_problems, save_dataset, save_problems)
from .evaluation import Models, hard_subset
from .planner import PlannerParams
from .time_estimator import build_estimator, load_estimator, rows_from_records, save_estimator, train_estimator
from .world import random_world

log = logging.getLogger(__name__)

FAMILIES = ("lognormal", "normal")


@dataclass
class DeskExperiment:
    worlds: list
    records: list
    training_set: list
    hard: list
    cvae: CvaeModel
    estimators: dict
    cvae_history: list

    @property
    def models(self) -> Models:
        return Models(self.cvae, self.estimators)


def world_pool(cfg: RunConfig, seed: int) -> list:
    rng = np.random.default_rng(seed)
    return [random_world(rng, f"w{k:03d}", (cfg["world.count_min"], cfg["world.count_max"]),
                         (cfg["world.radius_min"], cfg["world.radius_max"]),
                         (cfg["world.ring_min"], cfg["world.ring_max"]), cfg["world.bounds"],
                         cfg["world.k_max"])
            for k in range(cfg["world.pool"])]


def build_desk_experiment(workdir, cfg: RunConfig | None = None, seed: int = 0,
                          train_problems: int = 1000, eval_problems: int = 1000) -> DeskExperiment:
    """Build (or reload) everything the static and dynamic evaluations need.

    Training and evaluation problems are drawn from the same world pool with
    different seeds; the evaluation set keeps only the hard problems.
    """
    cfg = cfg or RunConfig()
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    stamp = {"config": dict(sorted(cfg.items())), "seed": seed, "train_problems": train_problems,
             "eval_problems": eval_problems, "version": 1}
    stamp_path = workdir / "build.json"
    fresh = not (stamp_path.exists() and json.loads(stamp_path.read_text()) == json.loads(json.dumps(stamp)))
    robot = cfg.robot()
    pp = cfg.planner_params()
    witness = PlannerParams(pp.step_size, cfg["dataset.witness_iterations"], pp.resolution)
    worlds = world_pool(cfg, seed)

    data_path, hard_path = workdir / "data.jsonl", workdir / "hard.jsonl"
    if fresh or not data_path.exists():
        t0 = time.perf_counter()
        records = []
        for p in generate_problems(worlds, robot, train_problems, seed + 1, witness, prefix="t"):
            records += label_waypoints(p, robot, cfg["dataset.runs"], pp, cfg["dataset.waypoint_spacing"],
                                       cfg["shortcut.iterations"])
        save_dataset(records, data_path)
        log.info("labeled %d records in %.0f s", len(records), time.perf_counter() - t0)
    records = load_dataset(data_path)
    if fresh or not hard_path.exists():
        problems = generate_problems(worlds, robot, eval_problems, seed + 2, witness, prefix="e")
        save_problems(hard_subset(robot, problems, pp, cfg["eval.hard_runs"],
                                  cfg.checks(cfg["dataset.budget_seconds"]), seed), hard_path)
    hard = load_problems(hard_path)

    kept = filter_training_set(records, cfg.checks(cfg["dataset.budget_seconds"]), cfg["dataset.filter_mode"])
    cvae_path = workdir / "cvae.json"
    hist_path = workdir / "cvae_history.json"
    if fresh or not cvae_path.exists():
        model = build_cvae(robot, cfg.feature_params(), cfg["cvae.latent_dim"], cfg["cvae.beta"],
                           cfg["world.k_max"], tuple(cfg["cvae.encoder_hidden"]), cfg["cvae.condition_dim"],
                           tuple(cfg["cvae.hidden"]), seed=seed)
        model, history = train_cvae(model, kept, cfg["cvae.epochs"], seed, cfg["cvae.batch_size"], cfg["nn.lr"])
        save_cvae(model, cvae_path)
        hist_path.write_text(json.dumps(history))
    cvae = load_cvae(cvae_path)

    estimators = {}
    rows = rows_from_records(records)
    for family in FAMILIES:
        path = workdir / f"time_{family}.json"
        if fresh or not path.exists():
            est = build_estimator(cvae.encoder, robot, family, cfg["time.w"], cfg.feature_params(),
                                  cfg["world.k_max"], tuple(cfg["time.hidden"]), seed=seed + 1)
            est, _ = train_estimator(est, rows, cfg["time.epochs"], seed + 1, cfg["nn.batch_size"], cfg["nn.lr"])
            save_estimator(est, path)
        estimators[family] = load_estimator(path)
    stamp_path.write_text(json.dumps(stamp, indent=1))
    return DeskExperiment(worlds, records, kept, hard, cvae, estimators, json.loads(hist_path.read_text()))
