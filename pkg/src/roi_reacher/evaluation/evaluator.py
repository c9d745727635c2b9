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
Greedy evaluation on the localization task: start positions x lights x trials,
success ratios with standard errors and overlap threshold sweeps.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from roi_reacher.agent.policies import Policy
from roi_reacher.benchmarks.utils import get_nb_threads, print_timings, track_time
from roi_reacher.env.geometry import BoundingBox
from roi_reacher.env.localization import EnvConfig, LocalizationEnv, TraceRecord
from roi_reacher.evaluation.protocol import EvalProtocol, start_box
from roi_reacher.evaluation.report import EvalReport, aggregate
from roi_reacher.evaluation.trajectory import save_trajectory
from roi_reacher.imaging.corruption import Light
from roi_reacher.imaging.frame import Frame
from roi_reacher.imaging.scene import SceneManifest, generate_scene
from roi_reacher.utils.config import to_dict
from roi_reacher.utils.seeding import make_rng


# builds the policy of one episode from its groundtruth box and its own generator
PolicyFactory = Callable[[BoundingBox, np.random.Generator], Policy]


@dataclass(frozen=True)
class EpisodeOutcome:
    position: str
    light: Light
    trial: int
    reached_goal: bool
    max_jaccard: float
    final_jaccard: float
    steps: int
    trace: Tuple[TraceRecord, ...]


def environment_images(scene: SceneManifest, protocol: EvalProtocol, seed: int) -> Dict[Light, Frame]:
    """
    One environment image per light. Pixel corruptions are applied once to the whole image,
    before any cropping; light corruptions regenerate the scene with another light.
    """
    corruption = protocol.corruption_spec
    images = dict()
    for light in protocol.effective_lights():
        image = generate_scene(scene.with_light(light), seed=seed)
        if corruption is not None:
            image = corruption.apply(image, seed=seed)
        images[light] = image
    return images


def run_episode(
    env_image: Frame,
    gt_box: BoundingBox,
    start: BoundingBox,
    policy: Policy,
    env_cfg: EnvConfig,
    rng: np.random.Generator,
) -> Tuple[bool, List[TraceRecord]]:
    """
    Run one episode from a fixed start box until success or t_max.
    :return: success flag and trace
    """
    env = LocalizationEnv(env_image=env_image, gt_box=gt_box, cfg=env_cfg, rng=rng)
    state = env.reset(start_box=start)
    reached_goal = False
    while not env.done:
        result = env.step(policy(state, env.pose))
        state = result.state
        reached_goal = bool(result.info["reached_goal"])
    return reached_goal, list(env.trace)


def sweep_curve(max_jaccards: Sequence[float], thresholds: Sequence[float]) -> List[Tuple[float, float]]:
    """
    Success ratio per threshold, an episode succeeds at t when its best overlap is above t.
    """
    values = np.asarray(max_jaccards, dtype=np.float64)
    assert len(values) > 0, "no episode to sweep"
    return [(float(t), float(np.mean(values > t))) for t in thresholds]


def run_protocol(
    policy_factory: PolicyFactory,
    scene: SceneManifest,
    env_cfg: EnvConfig,
    protocol: EvalProtocol,
    seed: int,
) -> List[EpisodeOutcome]:
    """
    All episodes of a protocol, ordered by (position, light, trial) whatever the thread count.
    """
    images = environment_images(scene, protocol, seed)
    gt = scene.gt_box
    jobs = list()
    for cell_index, position in enumerate(protocol.start_positions):
        start = start_box(position, gt, env_cfg.transition, scale=protocol.start_scale)
        for light in protocol.effective_lights():
            for trial in range(protocol.trials_per_cell):
                jobs.append((cell_index, position, start, light, trial))

    timings: List[float] = list()

    def run(job) -> EpisodeOutcome:
        cell_index, position, start, light, trial = job
        with track_time(timings):
            policy = policy_factory(gt, make_rng(seed, "policy", cell_index, light.value, trial))
            env_rng = make_rng(seed, "eval", cell_index, light.value, trial)
            reached_goal, trace = run_episode(images[light], gt, start, policy, env_cfg, env_rng)
        return EpisodeOutcome(
            position=position,
            light=light,
            trial=trial,
            reached_goal=reached_goal,
            max_jaccard=max(r.jaccard for r in trace),
            final_jaccard=trace[-1].jaccard,
            steps=len(trace) - 1,
            trace=tuple(trace),
        )

    nb_threads = get_nb_threads()
    if nb_threads > 1:
        with ThreadPoolExecutor(max_workers=nb_threads) as executor:
            outcomes = list(executor.map(run, jobs))
    else:
        outcomes = [run(job) for job in jobs]
    print_timings(name="evaluation episode", timings=timings)
    return outcomes


def evaluate(
    policy_factory: PolicyFactory,
    scene: SceneManifest,
    env_cfg: EnvConfig,
    protocol: EvalProtocol,
    seed: int,
    policy_name: str = "agent",
    output_dir: Optional[Union[str, Path]] = None,
    image_format: str = "ppm",
) -> EvalReport:
    """
    Success ratio per start position (all lights and trials of a position form a cell).
    :param policy_factory: builds the policy of each episode
    :param scene: scene manifest, regenerated per light
    :param env_cfg: environment settings, the success threshold included
    :param protocol: positions, lights, trials, corruption and sweep thresholds
    :param seed: top level seed, recorded in the report
    :param policy_name: recorded in the report
    :param output_dir: where trajectory overlays are written, when exported
    :param image_format: ppm or png
    :return: report
    """
    outcomes = run_protocol(policy_factory, scene, env_cfg, protocol, seed)
    cells = list()
    for position in protocol.start_positions:
        flags = [o.reached_goal for o in outcomes if o.position == position]
        cells.append(aggregate(position, flags))
    overall = aggregate("all", [o.reached_goal for o in outcomes])
    trajectories = list()
    if protocol.export_trajectories and output_dir is not None:
        images = environment_images(scene, protocol, seed)
        for outcome in outcomes:
            if outcome.trial != 0:
                continue
            prefix = Path(output_dir) / "trajectories" / f"{outcome.position}_{outcome.light.value}"
            paths = save_trajectory(outcome.trace, images[outcome.light], prefix, image_format=image_format)
            trajectories += [str(p.relative_to(output_dir)) for p in paths]
    report = EvalReport(
        seed=seed,
        policy=policy_name,
        corruption=protocol.corruption,
        protocol=to_dict(protocol),
        cells=cells,
        overall=overall,
        curve=sweep_curve([o.max_jaccard for o in outcomes], protocol.thresholds),
        mean_steps=float(np.mean([o.steps for o in outcomes])),
        trajectories=trajectories,
    )
    logging.info(
        "evaluation of %s (corruption: %s): success %s over %d episodes",
        policy_name,
        protocol.corruption or "none",
        overall.formatted,
        overall.n,
    )
    return report


def threshold_sweep(
    policy_factory: PolicyFactory,
    scene: SceneManifest,
    env_cfg: EnvConfig,
    protocol: EvalProtocol,
    thresholds: Sequence[float],
    seed: int,
) -> List[Tuple[float, float]]:
    """
    Success ratio against the overlap threshold, under the protocol corruption.
    """
    assert list(thresholds) == sorted(thresholds), f"thresholds should be sorted: {thresholds}"
    assert all(0 < t < 1 for t in thresholds), f"thresholds should be in (0, 1): {thresholds}"
    outcomes = run_protocol(policy_factory, scene, env_cfg, protocol, seed)
    return sweep_curve([o.max_jaccard for o in outcomes], thresholds)
