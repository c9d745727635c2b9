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
Procedural single image environments: textured background, object sprite and light direction.
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Tuple

import cv2
import numpy as np

from roi_reacher.env.geometry import BoundingBox
from roi_reacher.imaging.corruption import Light, relight
from roi_reacher.imaging.frame import Frame
from roi_reacher.utils.errors import ConfigurationError


MIN_GT_WIDTH = 20
MIN_CONTRAST = 0.3


@dataclass(frozen=True)
class BackgroundSpec:
    """
    kind: `noise` (smooth value noise) or `checker`
    cell: size of a noise cell / checker square in pixels
    """

    kind: str = "noise"
    color: Tuple[float, float, float] = (0.35, 0.4, 0.45)
    amplitude: float = 0.12
    cell: int = 24
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("noise", "checker"):
            raise ConfigurationError(f"background.kind: expected noise or checker, got {self.kind!r}")
        if self.cell < 1:
            raise ConfigurationError(f"background.cell: should be positive, got {self.cell}")


@dataclass(frozen=True)
class SpriteSpec:
    """
    shape: `square`, `disc` or `diamond`, drawn inside the groundtruth box
    """

    shape: str = "disc"
    color: Tuple[float, float, float] = (0.9, 0.3, 0.1)
    texture_amplitude: float = 0.05
    seed: int = 1

    def __post_init__(self):
        if self.shape not in ("square", "disc", "diamond"):
            raise ConfigurationError(f"object.shape: expected square, disc or diamond, got {self.shape!r}")


@dataclass(frozen=True)
class WorldSpec:
    """
    Workspace pose of the object (units) and goal region extents, used by the workspace simulator.
    """

    object_position: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    object_size: float = 0.12
    goal_min: Tuple[float, float, float] = (-0.03, -0.03, 0.84)
    goal_max: Tuple[float, float, float] = (0.03, 0.03, 0.9)

    def __post_init__(self):
        if self.object_size <= 0:
            raise ConfigurationError(f"world.object_size: should be positive, got {self.object_size}")
        if any(lo >= hi for lo, hi in zip(self.goal_min, self.goal_max)):
            raise ConfigurationError(f"world.goal_min should be below world.goal_max: {self.goal_min}, {self.goal_max}")
        if self.goal_max[2] >= self.object_position[2] - self.object_size / 2:
            raise ConfigurationError("world: goal region should be in front of the object volume")


@dataclass(frozen=True)
class SceneManifest:
    image_size: int = 360
    background: BackgroundSpec = field(default_factory=BackgroundSpec)
    object: SpriteSpec = field(default_factory=SpriteSpec)
    groundtruth_box: Tuple[float, float, float] = (150.0, 150.0, 60.0)
    light: Light = Light.Left
    light_strength: float = 0.4
    world: Optional[WorldSpec] = None

    def __post_init__(self):
        self.validate()

    @property
    def gt_box(self) -> BoundingBox:
        return BoundingBox(*self.groundtruth_box)

    def validate(self) -> None:
        if self.image_size < MIN_GT_WIDTH:
            raise ConfigurationError(f"image_size: should be >= {MIN_GT_WIDTH}, got {self.image_size}")
        if len(self.groundtruth_box) != 3:
            raise ConfigurationError(f"groundtruth_box: expected [x, y, w], got {self.groundtruth_box}")
        box = self.gt_box
        if box.w < MIN_GT_WIDTH:
            raise ConfigurationError(f"groundtruth_box: width should be >= {MIN_GT_WIDTH}, got {box.w}")
        if box.x < 0 or box.y < 0 or box.x + box.w > self.image_size or box.y + box.w > self.image_size:
            raise ConfigurationError(
                f"groundtruth_box: {box.to_list()} is not fully inside the {self.image_size}px image"
            )
        if not 0.0 <= self.light_strength <= 1.0:
            raise ConfigurationError(f"light_strength: should be in [0, 1], got {self.light_strength}")
        contrast = np.max(np.abs(np.asarray(self.object.color) - np.asarray(self.background.color)))
        if contrast < MIN_CONTRAST:
            raise ConfigurationError(
                f"object.color: should differ from background.color by >= {MIN_CONTRAST} in one channel"
            )

    def with_light(self, light: Light) -> "SceneManifest":
        return dataclasses.replace(self, light=light)


def _value_noise(size: int, cell: int, rng: np.random.Generator) -> np.ndarray:
    """
    Smooth noise in [-1, 1]: random coarse grid upsampled bilinearly.
    """
    coarse_size = max(2, int(np.ceil(size / cell)) + 1)
    coarse = rng.uniform(-1.0, 1.0, size=(coarse_size, coarse_size, 3))
    return cv2.resize(coarse, (size, size), interpolation=cv2.INTER_LINEAR)


def background_texture(spec: BackgroundSpec, size: int, seed: int) -> np.ndarray:
    """
    Procedural background, size x size x 3, before lighting.
    """
    rng = np.random.default_rng([seed, spec.seed])
    base = np.asarray(spec.color, dtype=np.float64)[None, None, :]
    if spec.kind == "noise":
        pattern = _value_noise(size=size, cell=spec.cell, rng=rng)
    else:
        rows, cols = np.indices((size, size))
        checker = ((rows // spec.cell + cols // spec.cell) % 2) * 2.0 - 1.0
        pattern = np.repeat(checker[:, :, None], 3, axis=2)
        pattern += 0.25 * rng.uniform(-1.0, 1.0, size=(size, size, 3))
    return np.clip(base + spec.amplitude * pattern, 0.0, 1.0)


def sprite_mask(shape: str, size: int) -> np.ndarray:
    """
    Binary mask of the object silhouette in a size x size square.
    """
    center = (size - 1) / 2
    rows, cols = np.indices((size, size))
    if shape == "square":
        return np.ones((size, size), dtype=bool)
    if shape == "disc":
        return (rows - center) ** 2 + (cols - center) ** 2 <= (size / 2) ** 2
    if shape == "diamond":
        return np.abs(rows - center) + np.abs(cols - center) <= size / 2
    raise Exception(f"unknown sprite shape: {shape}")


def sprite_texture(spec: SpriteSpec, size: int, seed: int) -> np.ndarray:
    """
    Object appearance in a size x size square (colour plus a stripe texture).
    """
    rng = np.random.default_rng([seed, spec.seed])
    base = np.asarray(spec.color, dtype=np.float64)[None, None, :]
    frequency = rng.uniform(2.0, 4.0)
    rows = np.linspace(0.0, 2 * np.pi * frequency, size)[:, None, None]
    stripes = np.sin(rows) * np.ones((1, size, 3))
    grain = rng.uniform(-1.0, 1.0, size=(size, size, 3))
    return np.clip(base + spec.texture_amplitude * (0.7 * stripes + 0.3 * grain), 0.0, 1.0)


def generate_scene(manifest: SceneManifest, seed: int) -> Frame:
    """
    Render the environment image of a manifest. Deterministic for a given seed.
    :param manifest: scene description
    :param seed: generation seed
    :return: image_size x image_size frame
    """
    manifest.validate()
    size = manifest.image_size
    image = background_texture(spec=manifest.background, size=size, seed=seed)
    gt = manifest.gt_box
    x0, y0 = int(round(gt.x)), int(round(gt.y))
    side = int(round(gt.x + gt.w)) - x0
    side = min(side, size - x0, size - y0)
    mask = sprite_mask(shape=manifest.object.shape, size=side)
    texture = sprite_texture(spec=manifest.object, size=side, seed=seed)
    region = image[y0 : y0 + side, x0 : x0 + side]
    region[mask] = texture[mask]
    return relight(Frame.from_array(image), light=manifest.light, strength=manifest.light_strength)
