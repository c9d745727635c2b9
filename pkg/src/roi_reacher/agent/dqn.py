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
Deep Q-learning: epsilon-greedy acting, experience replay and TD updates toward
r + gamma * max_a' Q_target(s', a'), without bootstrap on terminal transitions.
"""

import copy
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

from roi_reacher.agent.networks import QNetworkVariant
from roi_reacher.agent.replay import Experience, ReplayBuffer
from roi_reacher.autodiff import functional as F
from roi_reacher.autodiff.checkpoint import Checkpoint
from roi_reacher.autodiff.layers import Module
from roi_reacher.autodiff.optim import ExponentialDecay, RMSprop
from roi_reacher.env.geometry import NB_ACTIONS, Action
from roi_reacher.utils.errors import CheckpointError, TrainingDivergedError


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.85
    epsilon_start: float = 0.95
    epsilon_end: float = 0.05
    epsilon_decay_rate: float = 0.9999
    use_dynamic_filter: bool = True
    use_target_network: bool = True
    target_sync_interval: int = 500
    batch_size: int = 32
    train_every: int = 4
    warmup_steps: int = 1000
    replay_capacity: int = 5000
    variant: QNetworkVariant = QNetworkVariant.Standard
    loss: str = "huber"

    def __post_init__(self):
        assert 0 < self.gamma < 1, f"gamma should be in (0, 1): {self.gamma}"
        assert 0 <= self.epsilon_end <= self.epsilon_start <= 1, f"invalid epsilon range: {self}"
        assert 0 < self.epsilon_decay_rate <= 1, f"epsilon_decay_rate should be in (0, 1]: {self.epsilon_decay_rate}"
        assert self.target_sync_interval >= 1, f"target_sync_interval should be positive: {self.target_sync_interval}"
        assert self.batch_size >= 1 and self.train_every >= 1, f"invalid batch_size / train_every: {self}"
        assert self.warmup_steps >= 0, f"warmup_steps should be >= 0: {self.warmup_steps}"
        assert self.replay_capacity >= self.batch_size, "replay_capacity should be >= batch_size"
        assert self.loss in ("huber", "mse"), f"loss should be huber or mse: {self.loss}"


def epsilon_at(step: int, cfg: AgentConfig) -> float:
    assert step >= 0, f"step should be >= 0: {step}"
    return max(cfg.epsilon_end, cfg.epsilon_start * cfg.epsilon_decay_rate**step)


def select_action(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> Action:
    """
    Epsilon-greedy. Ties on the max Q-value go to the lowest action index.
    """
    assert 0.0 <= epsilon <= 1.0, f"epsilon should be in [0, 1]: {epsilon}"
    assert len(q_values) == NB_ACTIONS, f"expected {NB_ACTIONS} q-values, got {len(q_values)}"
    # the exploration draw always happens, so greedy and exploring runs consume the generator the same way
    explore = rng.random() < epsilon
    if explore:
        return Action(int(rng.integers(0, NB_ACTIONS)))
    return Action(int(np.argmax(q_values)))


def bellman_target(experience: Experience, target_q_next: np.ndarray, cfg: AgentConfig) -> float:
    if experience.terminal:
        return float(experience.reward)
    return float(experience.reward + cfg.gamma * np.max(target_q_next))


def bellman_targets(
    rewards: np.ndarray, terminals: np.ndarray, target_q_next: np.ndarray, gamma: float
) -> np.ndarray:
    """
    Batched TD targets.
    :param rewards: shape N
    :param terminals: shape N, bool
    :param target_q_next: shape N x actions
    :param gamma: discount factor
    :return: shape N
    """
    bootstrap = np.where(terminals, 0.0, target_q_next.max(axis=1))
    return rewards + gamma * bootstrap


class DQNAgent:
    def __init__(
        self,
        network: Module,
        cfg: AgentConfig,
        rng: np.random.Generator,
        lr_schedule: ExponentialDecay = ExponentialDecay(),
        rmsprop_decay_rate: float = 0.99,
        rmsprop_epsilon: float = 1e-8,
    ):
        """
        :param network: online Q-network, exposes encode / batch_input / descriptor
        :param cfg: agent hyper parameters
        :param rng: generator for exploration and replay sampling
        :param lr_schedule: learning rate per gradient update
        :param rmsprop_decay_rate: squared gradient moving average coefficient
        :param rmsprop_epsilon: RMSprop denominator epsilon
        """
        self.network = network
        self.cfg = cfg
        self.rng = rng
        self.lr_schedule = lr_schedule
        self.target_network: Optional[Module] = copy.deepcopy(network) if cfg.use_target_network else None
        self.optimizer = RMSprop(
            network.parameters(), lr=lr_schedule(0), decay_rate=rmsprop_decay_rate, epsilon=rmsprop_epsilon
        )
        self.replay = ReplayBuffer(capacity=cfg.replay_capacity)
        self.steps = 0
        self.updates = 0
        self.episodes = 0
        self.last_loss: Optional[float] = None

    @property
    def epsilon(self) -> float:
        # warmup exploration lives in act(), the schedule itself starts at epsilon_start
        return epsilon_at(self.steps, self.cfg)

    @property
    def lr(self) -> float:
        return self.optimizer.lr

    def encode(self, state: Any) -> np.ndarray:
        return self.network.encode(state)

    def q_values(self, encoded_state: np.ndarray) -> np.ndarray:
        return self.network(self.network.batch_input([encoded_state])).data[0]

    def act(self, encoded_state: np.ndarray, greedy: bool = False) -> Action:
        """
        :param encoded_state: state encoded by the network codec
        :param greedy: evaluation mode, epsilon = 0 and no random draw
        :return: selected action
        """
        if greedy:
            return Action(int(np.argmax(self.q_values(encoded_state))))
        if self.steps < self.cfg.warmup_steps:
            return Action(int(self.rng.integers(0, NB_ACTIONS)))
        return select_action(self.q_values(encoded_state), self.epsilon, self.rng)

    def observe(
        self, state: np.ndarray, action: Action, reward: float, next_state: np.ndarray, terminal: bool
    ) -> Optional[float]:
        """
        Store a transition and run a TD update on schedule.
        :return: loss of the update, None when no update happened
        """
        self.replay.push(Experience(state, int(action), float(reward), next_state, bool(terminal)))
        self.steps += 1
        loss = None
        if (
            self.steps >= self.cfg.warmup_steps
            and self.steps % self.cfg.train_every == 0
            and len(self.replay) >= self.cfg.batch_size
        ):
            loss = self.learn(self.replay.sample(self.cfg.batch_size, self.rng))
        # sync period is counted in environment steps
        if self.target_network is not None and self.steps % self.cfg.target_sync_interval == 0:
            self.sync_target()
        return loss

    def end_episode(self) -> None:
        self.episodes += 1

    def learn(self, batch: Sequence[Experience]) -> float:
        """
        One gradient step on a batch of experiences.
        """
        states = self.network.batch_input([e.state for e in batch])
        next_states = self.network.batch_input([e.next_state for e in batch])
        actions = np.array([e.action for e in batch], dtype=np.int64)
        rewards = np.array([e.reward for e in batch], dtype=np.float64)
        terminals = np.array([e.terminal for e in batch], dtype=bool)
        bootstrap_network = self.target_network if self.target_network is not None else self.network
        q_next = bootstrap_network(next_states).data
        targets = bellman_targets(rewards, terminals, q_next, self.cfg.gamma).astype(q_next.dtype)

        q_taken = F.gather(self.network(states), actions)
        if self.cfg.loss == "huber":
            loss = F.huber_loss(q_taken, targets, delta=1.0)
        else:
            loss = F.mse_loss(q_taken, targets)
        loss_value = float(loss.data)
        if not np.isfinite(loss_value):
            raise TrainingDivergedError(f"TD loss is not finite: {loss_value}", self.episodes, self.updates)
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.lr = self.lr_schedule(self.updates)
        self.optimizer.step()
        self.updates += 1
        self.last_loss = loss_value
        return loss_value

    def sync_target(self) -> None:
        if self.target_network is not None:
            self.target_network.load_state_dict(self.network.state_dict())
            logging.debug("target network synced at update %d", self.updates)

    def to_checkpoint(self, config_hash: Optional[str] = None) -> Checkpoint:
        tensors = dict()
        for name, value in self.network.state_dict().items():
            tensors[f"online.{name}"] = value
        if self.target_network is not None:
            for name, value in self.target_network.state_dict().items():
                tensors[f"target.{name}"] = value
        for name, value in self.optimizer.state_dict().items():
            tensors[f"optim.{name}"] = value
        metadata = {
            "config_hash": config_hash,
            "steps": self.steps,
            "updates": self.updates,
            "episodes": self.episodes,
            "lr": self.optimizer.lr,
            "rmsprop_decay_rate": self.optimizer.state.decay_rate,
            "rmsprop_epsilon": self.optimizer.state.epsilon,
        }
        return Checkpoint(descriptor=self.network.descriptor(), metadata=metadata, tensors=tensors)

    def load_checkpoint(self, checkpoint: Checkpoint, config_hash: Optional[str] = None) -> None:
        """
        Restore parameters, optimizer state and counters.
        :param checkpoint: content loaded from disk
        :param config_hash: when provided, has to match the hash stored in the checkpoint
        """
        if checkpoint.descriptor != self.network.descriptor():
            raise CheckpointError("architecture mismatch between checkpoint and agent configuration")
        stored_hash = checkpoint.metadata.get("config_hash")
        if config_hash is not None and stored_hash is not None and stored_hash != config_hash:
            raise CheckpointError(f"config hash mismatch: checkpoint {stored_hash[:12]}, run {config_hash[:12]}")
        groups: Dict[str, Dict[str, np.ndarray]] = {"online": dict(), "target": dict(), "optim": dict()}
        for name, value in checkpoint.tensors.items():
            group, _, key = name.partition(".")
            if group not in groups:
                raise CheckpointError(f"unexpected tensor in checkpoint: {name}")
            groups[group][key] = value
        self.network.load_state_dict(groups["online"])
        if self.target_network is not None:
            self.target_network.load_state_dict(groups["target"] if len(groups["target"]) > 0 else groups["online"])
        self.optimizer.load_state_dict(groups["optim"])
        self.steps = checkpoint.metadata.get("steps", 0)
        self.updates = checkpoint.metadata.get("updates", 0)
        self.episodes = checkpoint.metadata.get("episodes", 0)
        self.optimizer.lr = checkpoint.metadata.get("lr", self.lr_schedule(self.updates))
