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
One JSON document per run, every field has a default.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Union

from roi_reacher.agent.dqn import AgentConfig
from roi_reacher.env.localization import EnvConfig
from roi_reacher.evaluation.protocol import EvalProtocol
from roi_reacher.imaging.scene import SceneManifest
from roi_reacher.training.trainer import TrainConfig
from roi_reacher.utils.config import config_hash, from_dict, to_dict
from roi_reacher.utils.errors import ConfigurationError
from roi_reacher.worksim.tasks import DeployProtocol, MotionConfig, ScratchRewardConfig
from roi_reacher.worksim.workspace import WorkspaceConfig


IMAGE_FORMATS = ("ppm", "png")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    output_dir: str = "runs/default"
    image_format: str = "ppm"
    scene: SceneManifest = field(default_factory=SceneManifest)
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalProtocol = field(default_factory=EvalProtocol)
    workspace: WorkspaceConfig = field(default_factory=WorkspaceConfig)
    deploy: DeployProtocol = field(default_factory=DeployProtocol)
    motion: MotionConfig = field(default_factory=MotionConfig)
    scratch: ScratchRewardConfig = field(default_factory=ScratchRewardConfig)

    def __post_init__(self):
        if self.image_format not in IMAGE_FORMATS:
            raise ConfigurationError(f"image_format: expected one of {IMAGE_FORMATS}, got {self.image_format!r}")
        if self.scene.image_size != self.env.transition.image_size:
            raise ConfigurationError(
                f"env.transition.image_size ({self.env.transition.image_size}) "
                f"should match scene.image_size ({self.scene.image_size})"
            )

    def task_hash(self) -> str:
        """
        Hash of the sections defining the task a checkpoint was trained for.
        """
        return config_hash(self.scene, self.env)

    def replace(self, **changes: Any) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_json(self) -> str:
        return json.dumps(to_dict(self), indent=2, sort_keys=True) + "\n"


def parse_run_config(document: Dict[str, Any]) -> RunConfig:
    return from_dict(RunConfig, document)


def read_json(path: Union[str, Path]) -> Any:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: invalid JSON ({e})")


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    :param path: JSON document, unknown keys are rejected
    :return: run config with defaults filled
    """
    return parse_run_config(read_json(path))


def load_scene_manifest(path: Union[str, Path]) -> SceneManifest:
    return from_dict(SceneManifest, read_json(path))


def save_run_config(cfg: RunConfig, output_dir: Union[str, Path]) -> Path:
    """
    Echo of the fully resolved config, beside the run outputs.
    """
    path = Path(output_dir) / "config.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(cfg.to_json())
    return path
