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
Image corruptions used to test robustness: blur, sensor noise and illumination.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import cv2
import numpy as np

from roi_reacher.imaging.frame import Frame
from roi_reacher.utils.errors import ConfigurationError


class Light(Enum):
    Left = "left"
    Right = "right"
    Above = "above"


def gaussian_kernel(kernel_size: int) -> np.ndarray:
    """
    Normalized 1D Gaussian kernel, sigma derived from the kernel size:
    sigma = 0.3 * ((k - 1) / 2 - 1) + 0.8
    """
    if kernel_size < 3 or kernel_size % 2 == 0:
        raise ValueError(f"kernel size should be odd and >= 3, got {kernel_size}")
    sigma = 0.3 * ((kernel_size - 1) / 2 - 1) + 0.8
    x = np.arange(kernel_size, dtype=np.float64) - (kernel_size - 1) / 2
    kernel = np.exp(-(x**2) / (2 * sigma**2))
    return kernel / kernel.sum()


def gaussian_blur(frame: Frame, kernel_size: int) -> Frame:
    """
    Separable Gaussian blur, borders handled by reflection.
    """
    kernel = gaussian_kernel(kernel_size)
    blurred = cv2.sepFilter2D(frame.data, -1, kernel, kernel, borderType=cv2.BORDER_REFLECT_101)
    return Frame.from_array(blurred)


def gaussian_noise(frame: Frame, variance_8bit: float, seed: int) -> Frame:
    """
    Additive i.i.d. Gaussian noise. Variance is expressed on the 0-255 scale.
    """
    if variance_8bit < 0:
        raise ValueError(f"noise variance should be >= 0, got {variance_8bit}")
    if variance_8bit == 0:
        return Frame(data=frame.data.copy())
    rng = np.random.default_rng(seed)
    std = np.sqrt(variance_8bit) / 255.0
    return Frame.from_array(frame.data + rng.normal(0.0, std, size=frame.data.shape))


def luminance_ramp(height: int, width: int, light: Light, strength: float) -> np.ndarray:
    """
    Multiplicative ramp, 1 on the lit side down to (1 - strength) on the opposite side.
    :return: H x W x 1 array
    """
    assert 0.0 <= strength <= 1.0, f"strength should be in [0, 1], got {strength}"
    if light == Light.Above:
        position = np.linspace(0.0, 1.0, height)[:, None] * np.ones((1, width))
    elif light == Light.Left:
        position = np.ones((height, 1)) * np.linspace(0.0, 1.0, width)[None, :]
    elif light == Light.Right:
        position = np.ones((height, 1)) * np.linspace(1.0, 0.0, width)[None, :]
    else:
        raise Exception(f"unknown light: {light}")
    return (1.0 - strength * position)[:, :, None]


def relight(frame: Frame, light: Light, strength: float) -> Frame:
    """
    Directional brightness change, bright on the lit side.
    """
    if strength == 0:
        return Frame(data=frame.data.copy())
    ramp = luminance_ramp(height=frame.height, width=frame.width, light=Light(light), strength=strength)
    return Frame.from_array(frame.data * ramp)


@dataclass(frozen=True)
class CorruptionSpec:
    """
    Test time corruption, parsed from `kind:value` strings (blur:7, noise:20, light:right).
    """

    kind: str
    value: str

    VALID = ("blur:7", "blur:15", "noise:10", "noise:20", "light:right", "light:above")

    @classmethod
    def parse(cls, text: str) -> "CorruptionSpec":
        if text not in cls.VALID:
            raise ConfigurationError(f"invalid corruption spec: {text}, valid values are: {', '.join(cls.VALID)}")
        kind, value = text.split(":")
        return cls(kind=kind, value=value)

    @property
    def light(self) -> Optional[Light]:
        return Light(self.value) if self.kind == "light" else None

    def __str__(self) -> str:
        return f"{self.kind}:{self.value}"

    def apply(self, frame: Frame, seed: int) -> Frame:
        """
        Pixel level corruption. Light changes are handled by regenerating the scene, not here.
        """
        if self.kind == "blur":
            return gaussian_blur(frame, kernel_size=int(self.value))
        if self.kind == "noise":
            return gaussian_noise(frame, variance_8bit=float(self.value), seed=seed)
        return frame
