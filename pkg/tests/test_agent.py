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
import tempfile
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from roi_reacher.agent.dqn import AgentConfig, DQNAgent, bellman_target, bellman_targets, epsilon_at, select_action
from roi_reacher.agent.networks import DynamicFilter, PolicyNetwork, QNetwork, QNetworkVariant, TabularQNetwork
from roi_reacher.agent.policies import LocalizationOracle, NoOpPolicy, RandomPolicy
from roi_reacher.agent.replay import Experience, ReplayBuffer
from roi_reacher.autodiff.checkpoint import load_checkpoint, save_checkpoint
from roi_reacher.autodiff.layers import count_params
from roi_reacher.autodiff.optim import ExponentialDecay
from roi_reacher.env.geometry import NB_ACTIONS, Action, BoundingBox, TransitionConfig, jaccard, transition
from roi_reacher.env.localization import StepResult
from roi_reacher.imaging.frame import Frame
from roi_reacher.training.trainer import TrainConfig, build_agent, run_training
from roi_reacher.utils.errors import CheckpointError, TrainingDivergedError


def test_parameter_counts():
    rng = np.random.default_rng(0)
    assert count_params(DynamicFilter(rng=rng)) == 264
    assert count_params(QNetwork(QNetworkVariant.Standard, rng=rng)) == 1_685_671
    assert count_params(QNetwork(QNetworkVariant.Compact, rng=rng)) == 676_919
    with_filter = PolicyNetwork(QNetworkVariant.Standard, use_dynamic_filter=True, rng=rng)
    without_filter = PolicyNetwork(QNetworkVariant.Standard, use_dynamic_filter=False, rng=rng)
    assert count_params(with_filter) - count_params(without_filter) == 264
    assert 264 / count_params(without_filter) <= 5e-4


def test_policy_network_forward():
    rng = np.random.default_rng(0)
    network = PolicyNetwork(QNetworkVariant.Compact, use_dynamic_filter=True, rng=rng)
    frames = [Frame.from_array(rng.uniform(size=(84, 84, 3))) for _ in range(2)]
    encoded = [network.encode(f) for f in frames]
    assert encoded[0].dtype == np.uint8 and encoded[0].shape == (3, 84, 84)
    batch = network.batch_input(encoded)
    assert batch.data.dtype == np.float32 and batch.shape == (2, 3, 84, 84)
    assert batch.data.min() >= 0.0 and batch.data.max() <= 1.0
    gate = network.dynamic_filter(batch)
    assert gate.shape == batch.shape
    assert gate.data.min() > 0.0 and gate.data.max() < 1.0
    assert network(batch).shape == (2, NB_ACTIONS)
    with pytest.raises(AssertionError):
        network.encode(Frame.from_array(np.zeros((42, 42, 3))))


def test_descriptor():
    rng = np.random.default_rng(0)
    descriptor = PolicyNetwork(QNetworkVariant.Compact, use_dynamic_filter=False, rng=rng, state_size=84).descriptor()
    assert descriptor["network"] == "policy"
    assert descriptor["variant"] == "compact"
    assert descriptor["use_dynamic_filter"] is False
    assert descriptor["n_actions"] == NB_ACTIONS
    assert not any(name.startswith("dynamic_filter.") for name, _ in descriptor["layers"])


def make_experience(index: int) -> Experience:
    return Experience(np.asarray(index), 0, 0.0, np.asarray(index), False)


def test_replay_fifo():
    buffer = ReplayBuffer(capacity=5)
    for index in range(8):
        buffer.push(make_experience(index))
    assert len(buffer) == 5
    assert [int(e.state) for e in buffer.contents()] == [3, 4, 5, 6, 7]
    with pytest.raises(ValueError):
        ReplayBuffer(capacity=10).sample(4, np.random.default_rng(0))


def test_replay_uniform_sampling():
    buffer = ReplayBuffer(capacity=10)
    for index in range(10):
        buffer.push(make_experience(index))
    draws = 20_000
    counts = Counter(int(e.state) for e in buffer.sample(draws, np.random.default_rng(0)))
    expected = draws / 10
    chi_square = sum((counts[i] - expected) ** 2 / expected for i in range(10))
    # 9 degrees of freedom, p = 0.001
    assert chi_square < 27.88


def test_select_action_frequencies():
    rng = np.random.default_rng(0)
    q_values = np.array([0.1, 0.2, 0.9, 0.3, 0.0, -1.0, 0.5])
    draws = 20_000
    counts = Counter(select_action(q_values, 0.3, rng) for _ in range(draws))
    assert counts[Action.ShiftUp] / draws == pytest.approx(0.7 + 0.3 / NB_ACTIONS, abs=0.015)
    for action in Action:
        if action != Action.ShiftUp:
            assert counts[action] / draws == pytest.approx(0.3 / NB_ACTIONS, abs=0.01)
    assert all(select_action(q_values, 0.0, rng) == Action.ShiftUp for _ in range(100))
    # ties go to the lowest index
    assert select_action(np.zeros(NB_ACTIONS), 0.0, rng) == Action.ShiftLeft


def test_bellman_target():
    cfg = AgentConfig(gamma=0.85)
    q_next = np.array([0.1, 0.4, -0.2, 0.0, 0.3, 0.2, 0.1])
    terminal = Experience(np.asarray(0), 0, 1.0, np.asarray(0), True)
    assert bellman_target(terminal, q_next, cfg) == 1.0
    step = Experience(np.asarray(0), 0, -0.25, np.asarray(0), False)
    assert bellman_target(step, q_next, cfg) == pytest.approx(0.09, abs=1e-12)
    batched = bellman_targets(np.array([1.0, -0.25]), np.array([True, False]), np.stack([q_next, q_next]), 0.85)
    assert batched == pytest.approx([1.0, 0.09], abs=1e-12)


def test_epsilon_schedule():
    cfg = AgentConfig(epsilon_start=0.95, epsilon_end=0.05, epsilon_decay_rate=0.9999)
    assert epsilon_at(0, cfg) == 0.95
    assert epsilon_at(1000, cfg) == pytest.approx(0.95 * 0.9999**1000)
    assert epsilon_at(100_000, cfg) == 0.05
    values = [epsilon_at(step, cfg) for step in range(0, 50_000, 500)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_agent_epsilon_stays_in_schedule_range():
    cfg = AgentConfig()
    agent = DQNAgent(TabularQNetwork(n_states=4), cfg, rng=np.random.default_rng(0))
    assert agent.epsilon == cfg.epsilon_start
    for step in range(cfg.warmup_steps + 10):
        agent.observe(agent.encode(step % 4), Action.NoOp, -0.1, agent.encode((step + 1) % 4), False)
        assert cfg.epsilon_end <= agent.epsilon <= cfg.epsilon_start
    assert agent.epsilon == epsilon_at(agent.steps, cfg)


def test_target_sync_counts_environment_steps(monkeypatch):
    cfg = AgentConfig()
    agent = DQNAgent(TabularQNetwork(n_states=4), cfg, rng=np.random.default_rng(0))
    synced_at = list()
    monkeypatch.setattr(agent, "sync_target", lambda: synced_at.append(agent.steps))
    for step in range(2000):
        agent.observe(agent.encode(step % 4), Action(step % NB_ACTIONS), -0.1, agent.encode((step + 1) % 4), False)
    assert synced_at == [500, 1000, 1500, 2000]
    assert agent.updates == (2000 - cfg.warmup_steps) // cfg.train_every + 1


def test_localization_oracle_reaches_goal():
    cfg = TransitionConfig(sigma_min=0.1, sigma_max=0.1)
    gt = BoundingBox(200, 60, 70)
    box = BoundingBox(0, 0, 360)
    oracle = LocalizationOracle(gt, cfg)
    for _ in range(40):
        if jaccard(gt, box) > 0.8:
            break
        box = transition(box, oracle(None, box), 0.1, cfg)
    assert jaccard(gt, box) > 0.8
    assert oracle.sigmas == [0.1]
    assert LocalizationOracle(gt, TransitionConfig()).sigmas == pytest.approx([0.05, 0.1, 0.15])


def test_scripted_policies():
    rng = np.random.default_rng(0)
    policy = RandomPolicy(rng)
    actions = {policy(None, None) for _ in range(500)}
    assert actions == set(Action)
    assert NoOpPolicy()(None, None) == Action.NoOp


def small_agent(seed: int = 0) -> DQNAgent:
    agent_cfg = AgentConfig(variant=QNetworkVariant.Compact, use_dynamic_filter=True, warmup_steps=0, batch_size=2)
    return build_agent(agent_cfg, TrainConfig(), seed=seed)


def test_agent_checkpoint_round_trip():
    agent = small_agent(seed=0)
    state = agent.encode(Frame.from_array(np.random.default_rng(1).uniform(size=(84, 84, 3))))
    with tempfile.TemporaryDirectory() as tmp_dir:
        path = Path(tmp_dir) / "agent.ckpt"
        save_checkpoint(agent.to_checkpoint(config_hash="a" * 64), path)
        restored = small_agent(seed=1)
        assert not np.array_equal(restored.q_values(state), agent.q_values(state))
        restored.load_checkpoint(load_checkpoint(path), config_hash="a" * 64)
        assert np.array_equal(restored.q_values(state), agent.q_values(state))
        assert restored.act(state, greedy=True) == agent.act(state, greedy=True)
        with pytest.raises(CheckpointError, match="config hash mismatch"):
            small_agent().load_checkpoint(load_checkpoint(path), config_hash="b" * 64)


def test_architecture_mismatch():
    agent = small_agent()
    other = build_agent(AgentConfig(variant=QNetworkVariant.Compact, use_dynamic_filter=False), TrainConfig(), seed=0)
    with pytest.raises(CheckpointError, match="architecture mismatch"):
        other.load_checkpoint(agent.to_checkpoint())


def test_divergence_is_reported():
    network = TabularQNetwork(n_states=3)
    agent = DQNAgent(network=network, cfg=AgentConfig(batch_size=2, warmup_steps=0), rng=np.random.default_rng(0))
    network.table.weight.data[...] = np.nan
    batch = [Experience(np.asarray(0), 1, 0.5, np.asarray(1), False)] * 2
    with pytest.raises(TrainingDivergedError) as error:
        agent.learn(batch)
    assert error.value.update == 0


LINE_LENGTH = 8
LINE_GOAL = LINE_LENGTH - 1
LINE_STEP_LIMIT = 1000
GAMMA = 0.85


def line_move(state: int, action: Action) -> int:
    if action == Action.ShiftLeft:
        return max(state - 1, 0)
    if action == Action.ShiftRight:
        return min(state + 1, LINE_GOAL)
    return state


class LineWorld:
    """
    Walk on a line, +1 when entering the last cell, -0.1 otherwise.
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.state = 0
        self.steps = 0

    def reset(self) -> int:
        self.state = int(self.rng.integers(0, LINE_GOAL))
        self.steps = 0
        return self.state

    def step(self, action: Action) -> StepResult:
        self.state = line_move(self.state, action)
        self.steps += 1
        reached = self.state == LINE_GOAL
        reward = 1.0 if reached else -0.1
        return StepResult(self.state, reward, reached or self.steps >= LINE_STEP_LIMIT, {"reached_goal": reached})


def line_value_iteration() -> np.ndarray:
    q = np.zeros((LINE_LENGTH, NB_ACTIONS))
    for _ in range(500):
        values = q.max(axis=1)
        values[LINE_GOAL] = 0.0
        for state in range(LINE_GOAL):
            for action in Action:
                next_state = line_move(state, action)
                if next_state == LINE_GOAL:
                    q[state, action] = 1.0
                else:
                    q[state, action] = -0.1 + GAMMA * values[next_state]
    return q


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dqn_solves_line_world(seed: int):
    optimal = line_value_iteration()
    assert optimal[LINE_GOAL - 1, Action.ShiftRight] == 1.0
    assert optimal[LINE_GOAL - 2, Action.ShiftRight] == pytest.approx(0.75)
    agent_cfg = AgentConfig(
        gamma=GAMMA,
        epsilon_start=0.95,
        epsilon_end=0.05,
        epsilon_decay_rate=0.999,
        target_sync_interval=50,
        batch_size=32,
        train_every=1,
        warmup_steps=100,
        replay_capacity=5000,
    )
    network = TabularQNetwork(n_states=LINE_LENGTH)
    agent = DQNAgent(
        network=network,
        cfg=agent_cfg,
        rng=np.random.default_rng(seed),
        lr_schedule=ExponentialDecay(lr_start=0.01, rate=1.0, lr_min=0.01),
    )
    train_cfg = TrainConfig(total_episodes=500, checkpoint_every=500, log_every=100)
    with tempfile.TemporaryDirectory() as tmp_dir:
        result = run_training(LineWorld(np.random.default_rng(seed + 100)), agent, train_cfg, tmp_dir)
    assert len(result.records) == 500
    assert all(agent_cfg.epsilon_end <= r.epsilon <= agent_cfg.epsilon_start for r in result.records)
    learned = np.stack([agent.q_values(agent.encode(state)) for state in range(LINE_GOAL)])
    for state in range(LINE_GOAL):
        assert np.argmax(learned[state]) == Action.ShiftRight
        assert learned[state, Action.ShiftRight] == pytest.approx(optimal[state, Action.ShiftRight], abs=0.1)
