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
from pathlib import Path

import numpy as np
import pytest

from roi_reacher.agent.dqn import AgentConfig
from roi_reacher.agent.networks import QNetworkVariant
from roi_reacher.autodiff.checkpoint import load_checkpoint
from roi_reacher.env.localization import EnvConfig
from roi_reacher.imaging.scene import SceneManifest
from roi_reacher.training.metrics import METRICS_HEADER, EpisodeRecord, MetricsWriter, running_success
from roi_reacher.training.trainer import TrainConfig, load_agent, train
from roi_reacher.utils.errors import CheckpointError


def make_record(episode: int, reached_goal: bool) -> EpisodeRecord:
    return EpisodeRecord(
        episode=episode,
        total_reward=-0.5,
        steps=3,
        final_jaccard=0.25,
        reached_goal=reached_goal,
        epsilon=1.0,
        wall_time=0.1,
    )


def test_running_success():
    flags = [True, False, True, True, False, False]
    records = [make_record(i, f) for i, f in enumerate(flags)]
    assert running_success(records, window=3) == pytest.approx([1.0, 0.5, 2 / 3, 2 / 3, 2 / 3, 1 / 3])
    assert running_success(records, window=1) == [float(f) for f in flags]
    assert running_success([], window=30) == []


def test_metrics_writer():
    with tempfile.TemporaryDirectory() as tmp_dir:
        path = Path(tmp_dir) / "metrics.csv"
        with MetricsWriter(path) as writer:
            for episode in range(100):
                writer.write(make_record(episode, episode % 2 == 0))
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(METRICS_HEADER)
        assert len(lines) == 101
        assert lines[1] == "0,-0.500000,3,0.250000,1,1.000000"
        assert [int(line.split(",")[0]) for line in lines[1:]] == list(range(100))
        with MetricsWriter(path, with_wall_time=True) as writer:
            writer.write(make_record(0, False))
        lines = path.read_text().splitlines()
        assert lines[0].endswith(",wall_time")
        assert lines[1] == "0,-0.500000,3,0.250000,0,1.000000,0.100000"


SMALL_AGENT = AgentConfig(
    variant=QNetworkVariant.Compact,
    use_dynamic_filter=True,
    warmup_steps=8,
    batch_size=4,
    train_every=2,
    replay_capacity=64,
    target_sync_interval=4,
)
SMALL_ENV = EnvConfig(t_max=6)


def small_train(output_dir: Path, episodes: int, seed: int = 0):
    train_cfg = TrainConfig(total_episodes=episodes, checkpoint_every=2)
    return train(SceneManifest(), SMALL_ENV, SMALL_AGENT, train_cfg, output_dir, seed=seed, config_hash="c" * 64)


def test_zero_episode_run_writes_initial_checkpoint():
    with tempfile.TemporaryDirectory() as tmp_dir:
        result = small_train(Path(tmp_dir), episodes=0)
        assert result.records == []
        assert [p.name for p in result.checkpoints] == ["ckpt_ep0.ckpt"]
        assert result.metrics_path.read_text().splitlines() == [",".join(METRICS_HEADER)]
        checkpoint = load_checkpoint(result.last_checkpoint)
        assert checkpoint.metadata["config_hash"] == "c" * 64
        assert checkpoint.metadata["steps"] == 0


def test_training_is_reproducible():
    contents = list()
    with tempfile.TemporaryDirectory() as tmp_dir:
        for run in ("a", "b"):
            result = small_train(Path(tmp_dir) / run, episodes=3, seed=5)
            assert len(result.records) == 3
            assert [p.name for p in result.checkpoints] == ["ckpt_ep0.ckpt", "ckpt_ep2.ckpt", "ckpt_ep3.ckpt"]
            assert result.agent.updates > 0
            contents.append((result.metrics_path.read_bytes(), result.last_checkpoint.read_bytes()))
        assert contents[0] == contents[1]
        other = small_train(Path(tmp_dir) / "c", episodes=3, seed=6)
        assert other.metrics_path.read_bytes() != contents[0][0]


def test_load_agent():
    with tempfile.TemporaryDirectory() as tmp_dir:
        result = small_train(Path(tmp_dir), episodes=2)
        agent = load_agent(result.last_checkpoint, task_hash="c" * 64)
        assert agent.network.variant == QNetworkVariant.Compact
        assert agent.network.use_dynamic_filter
        state = np.zeros((3, 84, 84), dtype=np.uint8)
        assert np.array_equal(agent.q_values(state), result.agent.q_values(state))
        with pytest.raises(CheckpointError, match="config hash mismatch"):
            load_agent(result.last_checkpoint, task_hash="d" * 64)
        not_a_checkpoint = Path(tmp_dir) / "bad.ckpt"
        not_a_checkpoint.write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointError):
            load_agent(not_a_checkpoint)
