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
Toy robot workspace seen from a hand-eye camera.
World axes: x to the right, y up, z along the optical axis (the camera never rotates).
A pixel (u, v) sees the direction ((u - c) / f, -(v - c) / f, 1) from the camera.
"""

import dataclasses
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import cv2
import numpy as np

from roi_reacher.env.geometry import Action, BoundingBox
from roi_reacher.imaging.corruption import Light, relight
from roi_reacher.imaging.frame import Frame
from roi_reacher.imaging.scene import SceneManifest, WorldSpec, background_texture, sprite_mask, sprite_texture
from roi_reacher.utils.errors import ConfigurationError


Vector = Tuple[float, float, float]

# camera placement relative to the approach axis: (horizontal, vertical) signs
# B: camera below the object, which then appears near the top of the frame
CAMERA_STARTS: Dict[str, Tuple[int, int]] = {
    "M": (0, 0),
    "ML": (-1, 0),
    "MR": (1, 0),
    "T": (0, 1),
    "TL": (-1, 1),
    "TR": (1, 1),
    "B": (0, -1),
    "BL": (-1, -1),
    "BR": (1, -1),
}

ACTION_DIRECTIONS: Dict[Action, Vector] = {
    Action.ShiftLeft: (-1.0, 0.0, 0.0),
    Action.ShiftRight: (1.0, 0.0, 0.0),
    Action.ShiftUp: (0.0, 1.0, 0.0),
    Action.ShiftDown: (0.0, -1.0, 0.0),
    Action.ZoomIn: (0.0, 0.0, 1.0),
    Action.ZoomOut: (0.0, 0.0, -1.0),
    Action.NoOp: (0.0, 0.0, 0.0),
}


@dataclass(frozen=True)
class WorkspaceConfig:
    """
    Distances are workspace units.
    start_depth: camera z of the canonical start, 30 steps before the goal region
    start_offset: lateral spacing of the 3 x 3 start grid
    start_jitter: per trial uniform perturbation of the start position
    explorable_min / explorable_max: camera moves leaving this box are voided
    """

    step_size: float = 0.02
    image_size: int = 360
    focal_length: float = 360.0
    backdrop_depth: float = 1.3
    backdrop_extent: float = 2.0
    backdrop_resolution: int = 720
    sprite_resolution: int = 128
    start_depth: float = 0.25
    start_offset: float = 0.1
    start_jitter: float = 0.01
    explorable_min: Vector = (-0.3, -0.3, 0.0)
    explorable_max: Vector = (0.3, 0.3, 0.92)
    t_max: int = 50

    def __post_init__(self):
        if self.step_size <= 0 or self.focal_length <= 0:
            raise ConfigurationError("workspace: step_size and focal_length should be positive")
        if any(lo >= hi for lo, hi in zip(self.explorable_min, self.explorable_max)):
            raise ConfigurationError(f"workspace.explorable_min should be below explorable_max: {self}")
        if self.t_max < 1:
            raise ConfigurationError(f"workspace.t_max: should be positive, got {self.t_max}")


@dataclass(frozen=True)
class WorkspaceAssets:
    """
    Textures shared by every workspace built from one scene.
    """

    backdrop: np.ndarray
    sprite: np.ndarray
    sprite_mask: np.ndarray

    @classmethod
    def from_scene(cls, scene: SceneManifest, cfg: WorkspaceConfig, seed: int) -> "WorkspaceAssets":
        backdrop = background_texture(scene.background, size=cfg.backdrop_resolution, seed=seed)
        sprite = sprite_texture(scene.object, size=cfg.sprite_resolution, seed=seed)
        mask = sprite_mask(scene.object.shape, size=cfg.sprite_resolution)
        return cls(backdrop=backdrop.astype(np.float32), sprite=sprite.astype(np.float32), sprite_mask=mask)


@dataclass(frozen=True)
class Workspace:
    cfg: WorkspaceConfig
    world: WorldSpec
    assets: WorkspaceAssets
    camera: Vector
    object_position: Vector
    light: Light = Light.Left
    light_strength: float = 0.4

    @property
    def goal_region(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Goal box, attached to the object: it follows the object when it moves.
        """
        shift = np.asarray(self.object_position) - np.asarray(self.world.object_position)
        return np.asarray(self.world.goal_min) + shift, np.asarray(self.world.goal_max) + shift

    def in_goal(self, position: Optional[Vector] = None) -> bool:
        low, high = self.goal_region
        p = np.asarray(self.camera if position is None else position)
        return bool(np.all(p >= low - 1e-9) and np.all(p <= high + 1e-9))

    def distance_to_goal(self, position: Optional[Vector] = None) -> float:
        """
        Euclidean distance to the goal box, 0 inside.
        """
        low, high = self.goal_region
        p = np.asarray(self.camera if position is None else position)
        gap = np.maximum(np.maximum(low - p, p - high), 0.0)
        return float(np.linalg.norm(gap))

    def distance_to_object(self) -> float:
        return float(np.linalg.norm(np.asarray(self.camera) - np.asarray(self.object_position)))

    def is_explorable(self, position: Vector) -> bool:
        p = np.asarray(position)
        low, high = np.asarray(self.cfg.explorable_min), np.asarray(self.cfg.explorable_max)
        return bool(np.all(p >= low) and np.all(p <= high))

    def with_camera(self, camera: Vector) -> "Workspace":
        return dataclasses.replace(self, camera=tuple(float(c) for c in camera))

    def with_object(self, position: Vector) -> "Workspace":
        return dataclasses.replace(self, object_position=tuple(float(c) for c in position))


def build_workspace(
    scene: SceneManifest, cfg: WorkspaceConfig, seed: int, light: Optional[Light] = None
) -> Workspace:
    """
    Workspace whose backdrop and object share the appearance of the training scene.
    """
    world = scene.world if scene.world is not None else WorldSpec()
    return Workspace(
        cfg=cfg,
        world=world,
        assets=WorkspaceAssets.from_scene(scene, cfg, seed),
        camera=camera_start("M", world, cfg),
        object_position=world.object_position,
        light=scene.light if light is None else light,
        light_strength=scene.light_strength,
    )


def camera_start(name: str, world: WorldSpec, cfg: WorkspaceConfig, jitter: Optional[np.ndarray] = None) -> Vector:
    """
    One of the 9 named starts: a 3 x 3 grid around the approach axis at the canonical depth.
    """
    if name not in CAMERA_STARTS:
        raise ConfigurationError(f"unknown camera start {name}, valid: {list(CAMERA_STARTS)}")
    sign_x, sign_y = CAMERA_STARTS[name]
    ox, oy, _ = world.object_position
    position = np.array([ox + sign_x * cfg.start_offset, oy + sign_y * cfg.start_offset, cfg.start_depth])
    if jitter is not None:
        position = position + jitter
    return tuple(float(c) for c in position)


def start_jitter(cfg: WorkspaceConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-cfg.start_jitter, cfg.start_jitter, size=3) if cfg.start_jitter > 0 else np.zeros(3)


def apply_robot_action(workspace: Workspace, action: Action) -> Workspace:
    """
    Translate the camera by one step. Moves leaving the explorable region are voided.
    """
    direction = np.asarray(ACTION_DIRECTIONS[Action(action)])
    if not np.any(direction):
        return workspace
    position = np.asarray(workspace.camera) + workspace.cfg.step_size * direction
    if not workspace.is_explorable(tuple(position)):
        return workspace
    return workspace.with_camera(tuple(position))


def projected_box(workspace: Workspace) -> Optional[BoundingBox]:
    """
    Image box of the object, None when the object is not in front of the camera.
    """
    cfg = workspace.cfg
    cx, cy, cz = workspace.camera
    ox, oy, oz = workspace.object_position
    depth = oz - cz
    if depth <= 0:
        return None
    center = cfg.image_size / 2
    half = workspace.world.object_size / 2
    u0 = cfg.focal_length * (ox - half - cx) / depth + center
    v0 = center - cfg.focal_length * (oy + half - cy) / depth
    return BoundingBox(u0, v0, cfg.focal_length * workspace.world.object_size / depth)


def _pixel_grid(size: int) -> np.ndarray:
    # pixel centers, continuous coordinates
    return np.arange(size, dtype=np.float64) + 0.5


def render(workspace: Workspace) -> Frame:
    """
    Pinhole view: backdrop plane filling the frame plus the object sprite at its projected place.
    An object behind the camera is not drawn.
    """
    cfg = workspace.cfg
    size = cfg.image_size
    center = size / 2
    cx, cy, cz = workspace.camera
    pixels = _pixel_grid(size)
    u, v = np.meshgrid(pixels, pixels)

    depth = cfg.backdrop_depth - cz
    texels = cfg.backdrop_resolution / cfg.backdrop_extent
    world_x = cx + (u - center) / cfg.focal_length * depth
    world_y = cy - (v - center) / cfg.focal_length * depth
    map_x = ((world_x + cfg.backdrop_extent / 2) * texels - 0.5).astype(np.float32)
    map_y = ((cfg.backdrop_extent / 2 - world_y) * texels - 0.5).astype(np.float32)
    image = cv2.remap(workspace.assets.backdrop, map_x, map_y, cv2.INTER_LINEAR, borderMode=cv2.BORDER_WRAP)

    box = projected_box(workspace)
    if box is not None and box.w > 0:
        resolution = cfg.sprite_resolution
        sprite_x = ((u - box.x) / box.w * resolution - 0.5).astype(np.float32)
        sprite_y = ((v - box.y) / box.w * resolution - 0.5).astype(np.float32)
        inside = (u >= box.x) & (u < box.x + box.w) & (v >= box.y) & (v < box.y + box.w)
        if np.any(inside):
            sprite = cv2.remap(
                workspace.assets.sprite, sprite_x, sprite_y, cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE
            )
            mask = cv2.remap(
                workspace.assets.sprite_mask.astype(np.uint8),
                sprite_x,
                sprite_y,
                cv2.INTER_NEAREST,
                borderMode=cv2.BORDER_CONSTANT,
                borderValue=0,
            )
            visible = inside & (mask > 0)
            image[visible] = sprite[visible]
    return relight(Frame.from_array(image), light=workspace.light, strength=workspace.light_strength)
