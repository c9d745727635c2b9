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

"""
This module contains code related to client interface.
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import cv2
import numpy as np

from roi_reacher.agent.dqn import DQNAgent
from roi_reacher.agent.policies import GreedyAgentPolicy, LocalizationOracle, RandomPolicy
from roi_reacher.autodiff.checkpoint import load_checkpoint
from roi_reacher.benchmarks.utils import get_nb_threads, setup_logging
from roi_reacher.evaluation.evaluator import PolicyFactory, evaluate, threshold_sweep
from roi_reacher.evaluation.report import CellResult, DeployTable, aggregate, write_csv, write_report
from roi_reacher.evaluation.trajectory import draw_boxes
from roi_reacher.imaging.corruption import CorruptionSpec
from roi_reacher.imaging.frame import save_frame
from roi_reacher.imaging.scene import SceneManifest, generate_scene
from roi_reacher.training.trainer import load_agent, train
from roi_reacher.utils.args import parse_args
from roi_reacher.utils.config import to_dict
from roi_reacher.utils.errors import CheckpointError, ConfigurationError, ImageError, TrainingDivergedError
from roi_reacher.utils.run_config import RunConfig, load_run_config, load_scene_manifest, save_run_config
from roi_reacher.worksim.tasks import (
    WorkspaceOracle,
    WorkspacePolicyFactory,
    deploy_cells,
    run_deploy_protocol,
    run_moving_object,
    train_scratch,
    write_deploy_trace,
)


EXIT_OK = 0
EXIT_CONFIGURATION = 1
EXIT_RUNTIME = 2

GT_PREVIEW_COLOR = (255, 0, 0)


def resolve_config(commands: argparse.Namespace) -> RunConfig:
    """
    Load the run config and apply the command line overrides.
    """
    cfg = load_run_config(commands.config)
    if commands.seed is not None:
        cfg = cfg.replace(seed=commands.seed)
    if commands.output_dir is not None:
        cfg = cfg.replace(output_dir=commands.output_dir)
    episodes = getattr(commands, "episodes", None)
    if episodes is not None:
        if episodes < 0:
            raise ConfigurationError(f"--episodes should be >= 0, got {episodes}")
        cfg = cfg.replace(train=dataclasses.replace(cfg.train, total_episodes=episodes))
    return cfg


def load_checked_agent(path: str, cfg: RunConfig) -> DQNAgent:
    """
    Agent from a checkpoint, its architecture has to match the agent section of the config.
    """
    agent = load_agent(path, task_hash=cfg.task_hash())
    network = agent.network
    expected = (cfg.agent.variant, cfg.agent.use_dynamic_filter, cfg.env.state_size)
    found = (network.variant, network.use_dynamic_filter, network.state_size)
    if found != expected:
        raise CheckpointError(f"architecture mismatch: checkpoint {found}, config {expected}")
    return agent


def gen_scene(commands: argparse.Namespace) -> None:
    manifest = load_scene_manifest(commands.manifest) if commands.manifest is not None else SceneManifest()
    output_dir = Path(commands.out)
    output_dir.mkdir(parents=True, exist_ok=True)
    image = generate_scene(manifest, seed=commands.seed)
    save_frame(image, output_dir / f"scene.{commands.format}")
    (output_dir / "manifest.json").write_text(json.dumps(to_dict(manifest), indent=2, sort_keys=True) + "\n")
    preview = draw_boxes(image, [manifest.gt_box], [GT_PREVIEW_COLOR])
    save_frame(preview, output_dir / f"scene_preview.{commands.format}")
    logging.info("scene of %dpx written to %s", manifest.image_size, output_dir)


def run_train(commands: argparse.Namespace) -> None:
    cfg = resolve_config(commands)
    save_run_config(cfg, cfg.output_dir)
    result = train(
        scene=cfg.scene,
        env_cfg=cfg.env,
        agent_cfg=cfg.agent,
        train_cfg=cfg.train,
        output_dir=cfg.output_dir,
        seed=cfg.seed,
        config_hash=cfg.task_hash(),
    )
    print(f"{len(result.records)} episodes, last checkpoint: {result.last_checkpoint}")


def run_scratch_train(commands: argparse.Namespace) -> None:
    cfg = resolve_config(commands)
    save_run_config(cfg, cfg.output_dir)
    result = train_scratch(
        scene=cfg.scene,
        cfg=cfg.workspace,
        agent_cfg=cfg.agent,
        scratch_cfg=cfg.scratch,
        train_cfg=cfg.train,
        output_dir=cfg.output_dir,
        seed=cfg.seed,
        config_hash=cfg.task_hash(),
    )
    print(f"{len(result.records)} episodes, last checkpoint: {result.last_checkpoint}")


def eval_policy_factory(policy: str, cfg: RunConfig, checkpoint: Optional[str]) -> PolicyFactory:
    if policy == "oracle":
        return lambda gt, rng: LocalizationOracle(gt, cfg.env.transition)
    if policy == "random":
        return lambda gt, rng: RandomPolicy(rng)
    greedy = GreedyAgentPolicy(load_checked_agent(checkpoint, cfg))
    return lambda gt, rng: greedy


def run_eval(commands: argparse.Namespace) -> None:
    cfg = resolve_config(commands)
    if commands.corrupt is not None:
        cfg = cfg.replace(eval=dataclasses.replace(cfg.eval, corruption=commands.corrupt))
    policy_factory = eval_policy_factory(commands.policy, cfg, commands.checkpoint)
    name = f"eval_{commands.policy}_{(cfg.eval.corruption or 'clean').replace(':', '-')}"
    output_dir = Path(cfg.output_dir) / name
    save_run_config(cfg, output_dir)
    report = evaluate(
        policy_factory=policy_factory,
        scene=cfg.scene,
        env_cfg=cfg.env,
        protocol=cfg.eval,
        seed=cfg.seed,
        policy_name=commands.policy,
        output_dir=output_dir,
        image_format=cfg.image_format,
    )
    write_report(report, output_dir, name="report")
    print(f"{name}: success {report.overall.formatted} over {report.overall.n} episodes")
    for cell in report.cells:
        print(f"  {cell.name:>3}: {cell.formatted}")
    if commands.sweep:
        run_sweep(policy_factory, cfg, output_dir)


def run_sweep(policy_factory: PolicyFactory, cfg: RunConfig, output_dir: Path) -> None:
    """
    Success ratio against the overlap threshold, clean and under each corruption, written to sweep.csv.
    """
    rows = list()
    for corruption in [None, *CorruptionSpec.VALID]:
        protocol = dataclasses.replace(cfg.eval, corruption=corruption, export_trajectories=False)
        curve = threshold_sweep(policy_factory, cfg.scene, cfg.env, protocol, cfg.eval.thresholds, seed=cfg.seed)
        rows += [[corruption or "clean", f"{t:.2f}", f"{ratio:.6f}"] for t, ratio in curve]
        logging.info("sweep %s: %s", corruption or "clean", curve)
    write_csv(["corruption", "threshold", "ratio"], rows, output_dir / "sweep.csv")


def deploy_rows(commands: argparse.Namespace, cfg: RunConfig) -> List[Tuple[str, WorkspacePolicyFactory, int]]:
    """
    (row name, policy factory, network input size), one row per checkpoint or the scripted policy.
    """
    if commands.policy == "oracle":
        return [("oracle", lambda rng: WorkspaceOracle(), cfg.env.state_size)]
    if commands.policy == "random":
        return [("random", lambda rng: RandomPolicy(rng), cfg.env.state_size)]
    rows = list()
    for path in commands.checkpoint:
        # rows may mix variants, the task has to be the one of the config
        agent = load_agent(path, task_hash=cfg.task_hash())
        network = agent.network
        name = f"{Path(path).stem}-{network.variant.value}-{'filter' if network.use_dynamic_filter else 'base'}"
        policy = GreedyAgentPolicy(agent)
        rows.append((name, lambda rng, policy=policy: policy, network.state_size))
    return rows


def run_deploy(commands: argparse.Namespace) -> None:
    cfg = resolve_config(commands)
    protocol = cfg.deploy
    name = "deploy_moving" if commands.moving else "deploy"
    output_dir = Path(cfg.output_dir) / name
    save_run_config(cfg, output_dir)
    summary = "moving" if commands.moving else "all"
    table = DeployTable(
        columns=list(protocol.starts) + [summary],
        metadata={"seed": cfg.seed, "moving": commands.moving, "trials": protocol.trials},
    )
    for row, policy_factory, state_size in deploy_rows(commands, cfg):
        if commands.moving:
            overall, outcomes = run_moving_object(
                policy_factory,
                cfg.scene,
                cfg.workspace,
                cfg.motion,
                protocol.starts,
                protocol.lights,
                protocol.trials,
                cfg.seed,
                state_size=state_size,
            )
        else:
            outcomes = run_deploy_protocol(
                policy_factory,
                cfg.scene,
                cfg.workspace,
                protocol.starts,
                protocol.lights,
                protocol.trials,
                cfg.seed,
                state_size=state_size,
            )
            overall = aggregate(summary, [o.success for o in outcomes])
        cells: List[CellResult] = deploy_cells(outcomes, protocol.starts) + [overall]
        table.add_row(row, cells)
        for outcome in outcomes:
            if outcome.trial == 0:
                trace_name = f"{row}_{outcome.start}_{outcome.light.value}.jsonl"
                write_deploy_trace(outcome.trace, output_dir / "traces" / trace_name)
        print(f"{row}: {' '.join(f'{c.name}={c.formatted}' for c in cells)}")
    table.write(output_dir, name="report")


def describe_checkpoint(path: str) -> Dict[str, object]:
    """
    Parameter counts of the online network stored in a checkpoint.
    """
    checkpoint = load_checkpoint(path)
    online = {k.partition(".")[2]: v for k, v in checkpoint.tensors.items() if k.startswith("online.")}
    total = int(sum(v.size for v in online.values()))
    filter_params = int(sum(v.size for k, v in online.items() if k.startswith("dynamic_filter.")))
    backbone = total - filter_params
    return {
        "descriptor": checkpoint.descriptor,
        "metadata": checkpoint.metadata,
        "shapes": [(k, tuple(v.shape)) for k, v in online.items()],
        "total": total,
        "filter": filter_params,
        "backbone": backbone,
        "ratio": filter_params / backbone if backbone > 0 else float("nan"),
    }


def run_inspect(commands: argparse.Namespace) -> None:
    description = describe_checkpoint(commands.checkpoint)
    descriptor = {k: v for k, v in description["descriptor"].items() if k != "layers"}
    print(f"descriptor: {json.dumps(descriptor, sort_keys=True)}")
    print(f"metadata: {json.dumps(description['metadata'], sort_keys=True)}")
    print("layers:")
    for name, shape in description["shapes"]:
        print(f"  {name:<40} {str(shape):<20} {int(np.prod(shape)):>10}")
    print(f"total params: {description['total']}")
    print(f"dynamic filter params: {description['filter']}")
    print(f"backbone params: {description['backbone']}")
    print(f"filter / backbone ratio: {description['ratio']:.4g}")


COMMANDS: Dict[str, Callable[[argparse.Namespace], None]] = {
    "gen-scene": gen_scene,
    "train": run_train,
    "scratch-train": run_scratch_train,
    "eval": run_eval,
    "deploy": run_deploy,
    "inspect": run_inspect,
}


def main(commands: argparse.Namespace) -> None:
    setup_logging(level=logging.INFO if commands.verbose else logging.WARNING)
    cv2.setNumThreads(get_nb_threads())
    COMMANDS[commands.command](commands)


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse and run a command line, errors are mapped to exit codes.
    :param argv: command line without the program name, sys.argv when None
    :return: 0 on success, 1 on usage or configuration errors, 2 on runtime failures
    """
    try:
        main(commands=parse_args(argv))
    except ConfigurationError as e:
        logging.error("%s", e)
        return EXIT_CONFIGURATION
    except TrainingDivergedError as e:
        logging.error("training diverged at episode %d, update %d: %s", e.episode, e.update, e)
        return EXIT_RUNTIME
    except (ImageError, CheckpointError, OSError) as e:
        logging.error("%s", e)
        return EXIT_RUNTIME
    return EXIT_OK


def entrypoint():
    sys.exit(run())


if __name__ == "__main__":
    entrypoint()
