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

from pathlib import Path
from typing import List, Sequence, Tuple, Union

import cv2
import numpy as np

from roi_reacher.env.geometry import BoundingBox
from roi_reacher.env.localization import TraceRecord
from roi_reacher.imaging.frame import Frame, crop_resize, pixel_bounds, save_frame


START_COLOR = (0, 0, 139)  # dark blue
END_COLOR = (255, 255, 0)  # yellow


def step_colors(n: int) -> List[Tuple[int, int, int]]:
    """
    RGB colors along the dark blue -> yellow gradient, one per step.
    """
    if n == 1:
        return [START_COLOR]
    ratios = np.linspace(0.0, 1.0, n)
    start, end = np.asarray(START_COLOR, dtype=np.float64), np.asarray(END_COLOR, dtype=np.float64)
    return [tuple(int(round(c)) for c in start + r * (end - start)) for r in ratios]


def draw_boxes(frame: Frame, boxes: Sequence[BoundingBox], colors: Sequence[Tuple[int, int, int]]) -> Frame:
    canvas = np.ascontiguousarray(frame.to_uint8())
    for box, color in zip(boxes, colors):
        x0, y0, x1, y1 = pixel_bounds(box, frame.height, frame.width)
        cv2.rectangle(canvas, (x0, y0), (x1 - 1, y1 - 1), color=color, thickness=2)
    return Frame.from_array(canvas.astype(np.float64) / 255.0)


def export_trajectory(records: Sequence[TraceRecord], env_image: Frame, state_size: int = 84) -> Tuple[Frame, Frame]:
    """
    Overlay of the RoI at each recorded step, colour graded by step, and the strip of states.
    One box and one strip cell per record: a trace of T records, the initial state included, gives T outlines
    and a strip T x state_size wide.
    :param records: episode trace
    :param env_image: image the episode ran on
    :param state_size: side of the states in the strip
    :return: overlay (env image size) and strip (state_size x len(records) * state_size)
    """
    assert len(records) > 0, "empty trace"
    boxes = [BoundingBox(*r.box) for r in records]
    overlay = draw_boxes(env_image, boxes, step_colors(len(boxes)))
    strip = np.concatenate([crop_resize(env_image, box, state_size).data for box in boxes], axis=1)
    return overlay, Frame(data=strip)


def save_trajectory(
    records: Sequence[TraceRecord], env_image: Frame, prefix: Union[str, Path], image_format: str = "ppm"
) -> List[Path]:
    overlay, strip = export_trajectory(records, env_image)
    prefix = Path(prefix)
    paths = [prefix.with_name(f"{prefix.name}_{kind}.{image_format}") for kind in ("overlay", "strip")]
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_frame(overlay, paths[0])
    save_frame(strip, paths[1])
    return paths
