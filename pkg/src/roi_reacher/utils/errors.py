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
Exceptions raised by the library. The command line maps them to exit codes.
"""


class ConfigurationError(ValueError):
    """
    Invalid manifest, run configuration or command line value.
    """


class ImageError(IOError):
    """
    Raster file can't be read, is truncated or doesn't have the declared size.
    """


class CheckpointError(IOError):
    """
    Checkpoint container is corrupt or doesn't match the expected architecture / configuration.
    """


class TrainingDivergedError(RuntimeError):
    def __init__(self, message: str, episode: int, update: int):
        """
        Raised when a TD loss is not finite.
        :param message: diagnostic
        :param episode: episode index when the loss diverged
        :param update: gradient update index when the loss diverged
        """
        super().__init__(f"{message} (episode={episode}, update={update})")
        self.episode = episode
        self.update = update


class EpisodeFinishedError(RuntimeError):
    """
    An environment was stepped after its terminal transition.
    """
