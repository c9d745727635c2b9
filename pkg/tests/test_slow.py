#  Copyright 2022, roi-reacher authors
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.
import dataclasses
import os
import tempfile
from pathlib import Path

import numpy as np
import pytest

from roi_reacher.agent.policies import GreedyAgentPolicy
from roi_reacher.evaluation.evaluator import evaluate
from roi_reacher.imaging.corruption import Light
from roi_reacher.training.trainer import train
from roi_reacher.utils.run_config import load_run_config
from roi_reacher.worksim.tasks import run_deploy_protocol


RUN_SLOW = os.environ.get("ROI_REACHER_SLOW_TESTS") == "1"
DEFAULT_CONFIG = Path(__file__).parent.parent / "resources" / "default_config.json"
SEEDS = [0, 1, 2]
UPPER_STARTS = ["M", "ML", "MR", "T", "TL", "TR"]


@pytest.fixture(scope="module")
def trained_agents():
    """
    One agent per seed on the default scene, with its clean evaluation report.
    """
    cfg = load_run_config(DEFAULT_CONFIG)
    agents = list()
    with tempfile.TemporaryDirectory() as tmp_dir:
        for seed in SEEDS:
            result = train(
                cfg.scene,
                cfg.env,
                cfg.agent,
                cfg.train,
                Path(tmp_dir) / f"seed_{seed}",
                seed=seed,
                config_hash=cfg.task_hash(),
            )
            policy = GreedyAgentPolicy(result.agent)
            report = evaluate(lambda gt, rng, p=policy: p, cfg.scene, cfg.env, cfg.eval, seed=seed)
            agents.append((policy, report))
    return cfg, agents


def best_policy(trained_agents) -> GreedyAgentPolicy:
    _, agents = trained_agents
    policy, _ = max(agents, key=lambda item: item[1].overall.ratio)
    return policy


@pytest.mark.skipif(not RUN_SLOW, reason="requires ROI_REACHER_SLOW_TESTS=1")
def test_desk_scale_learning(trained_agents):
    cfg, agents = trained_agents
    assert cfg.train.max_env_steps <= 30_000
    ratios = [report.overall.ratio for _, report in agents]
    assert all(report.overall.n == 90 for _, report in agents)
    assert sum(ratio >= 0.7 for ratio in ratios) >= 2, f"success per seed: {ratios}"


@pytest.mark.skipif(not RUN_SLOW, reason="requires ROI_REACHER_SLOW_TESTS=1")
def test_corruption_ordering(trained_agents):
    cfg, _ = trained_agents
    policy = best_policy(trained_agents)
    success = dict()
    for corruption in [None, "blur:7", "blur:15", "noise:20"]:
        protocol = dataclasses.replace(cfg.eval, corruption=corruption, export_trajectories=False)
        report = evaluate(lambda gt, rng: policy, cfg.scene, cfg.env, protocol, seed=cfg.seed)
        success[corruption] = report.overall.ratio
    assert success["blur:15"] <= success["blur:7"] + 0.15, success
    assert success[None] >= success["noise:20"] - 0.05, success


@pytest.mark.skipif(not RUN_SLOW, reason="requires ROI_REACHER_SLOW_TESTS=1")
def test_zero_shot_transfer(trained_agents):
    cfg, _ = trained_agents
    policy = best_policy(trained_agents)
    outcomes = run_deploy_protocol(
        lambda rng: policy, cfg.scene, cfg.workspace, UPPER_STARTS, [Light.Left], trials=30, seed=cfg.seed
    )
    per_start = {start: np.mean([o.success for o in outcomes if o.start == start]) for start in UPPER_STARTS}
    assert per_start["M"] >= 0.5, per_start
    assert np.mean(list(per_start.values())) >= 0.4, per_start
