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
Training loop: episodes in an environment, replay, TD updates, checkpoints and metrics.
The loop works with any environment exposing reset() -> state and step(action) -> StepResult.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Protocol, Union

import numpy as np

from roi_reacher.agent.dqn import AgentConfig, DQNAgent
from roi_reacher.agent.networks import PolicyNetwork, QNetworkVariant
from roi_reacher.autodiff.checkpoint import load_checkpoint, save_checkpoint
from roi_reacher.autodiff.optim import ExponentialDecay
from roi_reacher.benchmarks.utils import print_timings, track_time
from roi_reacher.env.geometry import Action
from roi_reacher.env.localization import EnvConfig, LocalizationEnv, StepResult
from roi_reacher.imaging.scene import SceneManifest, generate_scene
from roi_reacher.training.metrics import EpisodeRecord, MetricsWriter, running_success
from roi_reacher.utils.errors import CheckpointError
from roi_reacher.utils.seeding import make_rng


@dataclass(frozen=True)
class TrainConfig:
    """
    seed: overrides the run seed when set
    max_env_steps: stop after the episode crossing this number of environment steps
    """

    total_episodes: int = 500
    lr_start: float = 0.001
    lr_decay_rate: float = 0.99995
    lr_min: float = 1e-5
    rmsprop_decay_rate: float = 0.99
    rmsprop_epsilon: float = 1e-8
    seed: Optional[int] = None
    checkpoint_every: int = 100
    metrics_path: str = "metrics.csv"
    log_every: int = 10
    record_wall_time: bool = False
    max_env_steps: Optional[int] = None

    def __post_init__(self):
        assert self.total_episodes >= 0, f"total_episodes should be >= 0: {self.total_episodes}"
        assert self.lr_start > 0, f"lr_start should be positive: {self.lr_start}"
        assert 0 < self.lr_decay_rate <= 1, f"lr_decay_rate should be in (0, 1]: {self.lr_decay_rate}"
        assert 0 < self.rmsprop_decay_rate < 1, f"rmsprop_decay_rate should be in (0, 1): {self.rmsprop_decay_rate}"
        assert self.checkpoint_every >= 1, f"checkpoint_every should be positive: {self.checkpoint_every}"
        assert self.log_every >= 1, f"log_every should be positive: {self.log_every}"

    def lr_schedule(self) -> ExponentialDecay:
        return ExponentialDecay(lr_start=self.lr_start, rate=self.lr_decay_rate, lr_min=self.lr_min)


class Environment(Protocol):
    def reset(self) -> Any:
        ...

    def step(self, action: Action) -> StepResult:
        ...


@dataclass
class TrainResult:
    agent: DQNAgent
    records: List[EpisodeRecord]
    metrics_path: Path
    checkpoints: List[Path] = field(default_factory=list)
    update_timings: List[float] = field(default_factory=list)

    @property
    def last_checkpoint(self) -> Path:
        return self.checkpoints[-1]


def checkpoint_name(episode: int) -> str:
    return f"ckpt_ep{episode}.ckpt"


def build_agent(agent_cfg: AgentConfig, train_cfg: TrainConfig, seed: int, state_size: int = 84) -> DQNAgent:
    """
    Policy network (with or without dynamic filter) plus DQN machinery, single precision.
    """
    network = PolicyNetwork(
        variant=agent_cfg.variant,
        use_dynamic_filter=agent_cfg.use_dynamic_filter,
        rng=make_rng(seed, "init"),
        state_size=state_size,
        dtype=np.float32,
    )
    return DQNAgent(
        network=network,
        cfg=agent_cfg,
        rng=make_rng(seed, "agent"),
        lr_schedule=train_cfg.lr_schedule(),
        rmsprop_decay_rate=train_cfg.rmsprop_decay_rate,
        rmsprop_epsilon=train_cfg.rmsprop_epsilon,
    )


def load_agent(path: Union[str, Path], task_hash: Optional[str] = None) -> DQNAgent:
    """
    Rebuild a policy agent from a checkpoint, the network follows the stored descriptor.
    :param path: checkpoint file
    :param task_hash: when provided, has to match the task hash stored at training time
    :return: agent, ready for greedy use
    """
    checkpoint = load_checkpoint(path)
    descriptor = checkpoint.descriptor
    if descriptor.get("network") != "policy":
        raise CheckpointError(f"{path} doesn't hold a policy network: {descriptor.get('network')}")
    network = PolicyNetwork(
        variant=QNetworkVariant(descriptor["variant"]),
        use_dynamic_filter=bool(descriptor["use_dynamic_filter"]),
        rng=np.random.default_rng(0),
        state_size=int(descriptor["state_size"]),
    )
    agent = DQNAgent(network=network, cfg=AgentConfig(use_target_network=False), rng=np.random.default_rng(0))
    agent.load_checkpoint(checkpoint, config_hash=task_hash)
    logging.info("loaded %s from %s", json.dumps(descriptor, sort_keys=True)[:120], path)
    return agent


def run_training(
    env: Environment,
    agent: DQNAgent,
    train_cfg: TrainConfig,
    output_dir: Union[str, Path],
    config_hash: Optional[str] = None,
    name: str = "train",
) -> TrainResult:
    """
    Generic episode loop.
    :param env: environment, reset() / step(action)
    :param agent: agent to train, mutated in place
    :param train_cfg: schedule, checkpoints and metrics settings
    :param output_dir: directory receiving metrics and checkpoints
    :param config_hash: stored in checkpoints
    :param name: prefix of log lines
    :return: trained agent, records and written files
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    result = TrainResult(agent=agent, records=list(), metrics_path=output_dir / train_cfg.metrics_path)

    def checkpoint(episode: int) -> None:
        path = output_dir / checkpoint_name(episode)
        save_checkpoint(agent.to_checkpoint(config_hash=config_hash), path)
        result.checkpoints.append(path)

    checkpoint(0)
    with MetricsWriter(result.metrics_path, with_wall_time=train_cfg.record_wall_time) as writer:
        for episode in range(train_cfg.total_episodes):
            start = time.perf_counter()
            epsilon = agent.epsilon
            state = agent.encode(env.reset())
            total_reward, steps, info = 0.0, 0, dict()
            terminal = False
            while not terminal:
                action = agent.act(state)
                step_result = env.step(action)
                next_state = agent.encode(step_result.state)
                timings: List[float] = list()
                with track_time(timings):
                    loss = agent.observe(state, action, step_result.reward, next_state, step_result.terminal)
                if loss is not None:
                    result.update_timings += timings
                total_reward += step_result.reward
                steps += 1
                state, terminal, info = next_state, step_result.terminal, step_result.info
            agent.end_episode()
            record = EpisodeRecord(
                episode=episode,
                total_reward=total_reward,
                steps=steps,
                final_jaccard=info.get("jaccard"),
                reached_goal=bool(info.get("reached_goal", False)),
                epsilon=epsilon,
                wall_time=time.perf_counter() - start,
            )
            result.records.append(record)
            writer.write(record)
            if (episode + 1) % train_cfg.log_every == 0:
                logging.info(
                    "[%s] episode %d, reward %.3f, running success %.3f, epsilon %.4f, lr %.2e, updates %d",
                    name,
                    episode + 1,
                    total_reward,
                    running_success(result.records)[-1],
                    agent.epsilon,
                    agent.lr,
                    agent.updates,
                )
            if (episode + 1) % train_cfg.checkpoint_every == 0:
                checkpoint(episode + 1)
            if train_cfg.max_env_steps is not None and agent.steps >= train_cfg.max_env_steps:
                logging.info("[%s] environment step budget reached after %d episodes", name, episode + 1)
                break
    last_episode = len(result.records)
    if last_episode > 0 and last_episode % train_cfg.checkpoint_every != 0:
        checkpoint(last_episode)
    if len(result.update_timings) > 0:
        print_timings(name=f"{name} update", timings=result.update_timings)
    return result


def train(
    scene: SceneManifest,
    env_cfg: EnvConfig,
    agent_cfg: AgentConfig,
    train_cfg: TrainConfig,
    output_dir: Union[str, Path],
    seed: int = 0,
    config_hash: Optional[str] = None,
) -> TrainResult:
    """
    Train a policy on the localization task of one generated scene.
    :param scene: scene manifest, the environment image is generated from it
    :param env_cfg: environment settings
    :param agent_cfg: agent settings
    :param train_cfg: training settings
    :param output_dir: output directory
    :param seed: run seed, generates the scene and seeds training unless train_cfg.seed is set
    :param config_hash: stored in checkpoints
    :return: trained agent, records and written files
    """
    env_image = generate_scene(scene, seed=seed)
    seed = train_cfg.seed if train_cfg.seed is not None else seed
    env = LocalizationEnv(env_image=env_image, gt_box=scene.gt_box, cfg=env_cfg, rng=make_rng(seed, "env"))
    agent = build_agent(agent_cfg, train_cfg, seed=seed, state_size=env_cfg.state_size)
    logging.info(
        "training %s network%s on a %dpx scene for %d episodes",
        agent_cfg.variant.value,
        " with dynamic filter" if agent_cfg.use_dynamic_filter else "",
        scene.image_size,
        train_cfg.total_episodes,
    )
    return run_training(env=env, agent=agent, train_cfg=train_cfg, output_dir=output_dir, config_hash=config_hash)
