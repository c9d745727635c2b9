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
RGB frame representation, raster I/O and crop-and-resize.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import cv2
import numpy as np

from roi_reacher.env.geometry import BoundingBox
from roi_reacher.utils.errors import ImageError


SUPPORTED_FORMATS = (".ppm", ".png")


@dataclass(frozen=True)
class Frame:
    """
    H x W x 3 image, float channels in [0, 1], RGB order.
    """

    data: np.ndarray

    def __post_init__(self):
        assert self.data.ndim == 3 and self.data.shape[2] == 3, f"expected H x W x 3 data, got {self.data.shape}"
        assert np.issubdtype(self.data.dtype, np.floating), f"expected float data, got {self.data.dtype}"

    @classmethod
    def from_array(cls, data: np.ndarray) -> "Frame":
        """
        Build a frame, values are clamped to [0, 1].
        """
        return cls(data=np.clip(np.asarray(data, dtype=np.float64), 0.0, 1.0))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape

    def to_chw(self, dtype=np.float32) -> np.ndarray:
        """
        Channel first layout expected by the networks.
        """
        return np.ascontiguousarray(self.data.transpose(2, 0, 1), dtype=dtype)

    def to_uint8(self) -> np.ndarray:
        return np.round(self.data * 255.0).astype(np.uint8)


def load_frame(path: Union[str, Path], expected_size: Optional[Tuple[int, int]] = None) -> Frame:
    """
    Read an 8 bits raster (binary PPM or PNG).
    :param path: raster path
    :param expected_size: declared (height, width), checked if provided
    :return: frame with values scaled to [0, 1]
    """
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_FORMATS:
        raise ImageError(f"unsupported format: {path.suffix} (supported: {SUPPORTED_FORMATS})")
    if not path.is_file():
        raise ImageError(f"unreadable file: {path}")
    if path.suffix.lower() == ".ppm":
        _check_ppm_payload(path)
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise ImageError(f"corrupt image: {path}")
    rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
    if expected_size is not None and rgb.shape[:2] != tuple(expected_size):
        raise ImageError(f"dimension mismatch: {path} is {rgb.shape[:2]}, expected {tuple(expected_size)}")
    return Frame(data=rgb.astype(np.float64) / 255.0)


def _check_ppm_payload(path: Path) -> None:
    """
    OpenCV pads truncated PPM files silently, the payload length is checked here.
    """
    raw = path.read_bytes()
    fields = list()
    position = 0
    while len(fields) < 4:
        while position < len(raw) and raw[position : position + 1].isspace():
            position += 1
        if position < len(raw) and raw[position : position + 1] == b"#":
            while position < len(raw) and raw[position : position + 1] != b"\n":
                position += 1
            continue
        start = position
        while position < len(raw) and not raw[position : position + 1].isspace():
            position += 1
        if start == position:
            raise ImageError(f"corrupt image: {path} (truncated header)")
        fields.append(raw[start:position])
    if fields[0] != b"P6":
        raise ImageError(f"unsupported format: {path} is not a binary PPM (P6)")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise ImageError(f"corrupt image: {path} (invalid header)")
    if maxval != 255:
        raise ImageError(f"unsupported format: {path} has maxval {maxval}, expected 255")
    payload = len(raw) - (position + 1)
    if payload < width * height * 3:
        raise ImageError(f"corrupt image: {path} (payload {payload} < {width * height * 3} bytes)")


def save_frame(frame: Frame, path: Union[str, Path]) -> None:
    """
    Write an 8 bits raster, values are quantized with round(v * 255).
    Format is chosen from the file extension (.ppm or .png).
    """
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_FORMATS:
        raise ImageError(f"unsupported format: {path.suffix} (supported: {SUPPORTED_FORMATS})")
    bgr = cv2.cvtColor(frame.to_uint8(), cv2.COLOR_RGB2BGR)
    params = [cv2.IMWRITE_PXM_BINARY, 1] if path.suffix.lower() == ".ppm" else []
    if not cv2.imwrite(str(path), bgr, params):
        raise ImageError(f"failed to write {path}")


def pixel_bounds(box: BoundingBox, height: int, width: int) -> Tuple[int, int, int, int]:
    """
    Box rounded to integer pixel bounds and clamped to the image.
    :return: x0, y0, x1, y1 (exclusive ends)
    """
    x0 = min(max(int(round(box.x)), 0), width)
    y0 = min(max(int(round(box.y)), 0), height)
    x1 = min(max(int(round(box.x + box.w)), 0), width)
    y1 = min(max(int(round(box.y + box.w)), 0), height)
    return x0, y0, x1, y1


def crop_resize(frame: Frame, box: BoundingBox, out_size: int) -> Frame:
    """
    Extract the region of interest and resize it (bilinear, half pixel centers).
    :param frame: source image
    :param box: region of interest, rounded to pixels inside this function only
    :param out_size: side of the square output
    :return: out_size x out_size frame
    """
    assert out_size >= 1, f"out_size should be positive: {out_size}"
    assert round(box.w) >= 1, f"box width should be at least 1 pixel once rounded: {box.w}"
    x0, y0, x1, y1 = pixel_bounds(box=box, height=frame.height, width=frame.width)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"box {box.to_list()} is outside the {frame.height}x{frame.width} image")
    region = frame.data[y0:y1, x0:x1]
    if region.shape[0] == out_size and region.shape[1] == out_size:
        return Frame(data=region.copy())
    resized = cv2.resize(region, (out_size, out_size), interpolation=cv2.INTER_LINEAR)
    return Frame(data=resized)
