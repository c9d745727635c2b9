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
Command line args parser
"""

import argparse
from typing import List

from roi_reacher.imaging.corruption import CorruptionSpec
from roi_reacher.utils.errors import ConfigurationError


POLICIES = ["agent", "oracle", "random"]


class ArgumentParser(argparse.ArgumentParser):
    """
    Usage errors are raised as ConfigurationError (exit code 1) instead of exiting.
    """

    def error(self, message: str):
        raise ConfigurationError(f"{self.prog}: {message}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-v", "--verbose", action="store_true", help="display info level logs")


def _add_config(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("-c", "--config", required=required, help="path to the JSON run config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("-o", "--output-dir", default=None, help="override the config output directory")


def parse_args(commands: List[str] = None) -> argparse.Namespace:
    """
    Parse command line arguments
    :param commands: to provide command line programatically
    :return: parsed command line
    """
    parser = ArgumentParser(
        prog="roi_reacher",
        description="learn a hand-eye reaching policy from a single image",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    gen_scene = subparsers.add_parser("gen-scene", help="generate an environment image from a scene manifest")
    gen_scene.add_argument("--manifest", default=None, help="scene manifest (JSON), default scene when omitted")
    gen_scene.add_argument("--out", required=True, help="output directory")
    gen_scene.add_argument("--seed", type=int, default=0, help="generation seed")
    gen_scene.add_argument("--format", default="ppm", choices=["ppm", "png"], help="raster format")
    _add_common(gen_scene)

    train = subparsers.add_parser("train", help="train a policy on the localization task")
    _add_config(train)
    train.add_argument("--episodes", type=int, default=None, help="override train.total_episodes")
    _add_common(train)

    scratch = subparsers.add_parser("scratch-train", help="train the Scratch baseline in the workspace")
    _add_config(scratch)
    scratch.add_argument("--episodes", type=int, default=None, help="override train.total_episodes")
    _add_common(scratch)

    evaluate = subparsers.add_parser("eval", help="evaluate a policy on the localization task")
    _add_config(evaluate)
    evaluate.add_argument("--checkpoint", default=None, help="agent checkpoint, required with --policy agent")
    evaluate.add_argument("--corrupt", default=None, choices=CorruptionSpec.VALID, help="test time corruption")
    evaluate.add_argument("--policy", default="agent", choices=POLICIES, help="policy to evaluate")
    evaluate.add_argument(
        "--sweep", action="store_true", help="also sweep the overlap threshold, clean and under every corruption"
    )
    _add_common(evaluate)

    deploy = subparsers.add_parser("deploy", help="deploy policies in the workspace, one report row per policy")
    _add_config(deploy)
    deploy.add_argument(
        "--checkpoint",
        action="append",
        default=None,
        help="agent checkpoint, repeat the flag for several rows (required with --policy agent)",
    )
    deploy.add_argument("--moving", action="store_true", help="moving object reaching task")
    deploy.add_argument("--policy", default="agent", choices=POLICIES, help="policy to deploy")
    _add_common(deploy)

    inspect = subparsers.add_parser("inspect", help="describe a checkpoint")
    inspect.add_argument("--checkpoint", required=True, help="checkpoint path")
    _add_common(inspect)

    args = parser.parse_args(args=commands)
    if args.command in ("eval", "deploy") and args.policy == "agent" and not args.checkpoint:
        parser.error(f"{args.command}: --checkpoint is required with --policy agent")
    return args
