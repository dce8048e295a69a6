"""Timestamp simulation of a manuscript and VirtualHome-style script export."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Tuple, Union

import numpy as np

from .manuscript import ActivityManuscript
from .records import ActionSpec

_TOKEN = re.compile(r"^[a-z0-9_]+$")


@dataclass(frozen=True)
class TraceStep:
    action_id: str
    scene: str
    t_s: float
    t_e: float


@dataclass(frozen=True)
class ExecutionTrace:
    video_id: str
    scene: str
    agent: str
    steps: Tuple[TraceStep, ...]
    total_duration: float

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "scene": self.scene,
            "agent": self.agent,
            "total_duration": round(self.total_duration, 6),
            "steps": [
                {"action_id": s.action_id, "scene": s.scene,
                 "t_s": round(s.t_s, 6), "t_e": round(s.t_e, 6)}
                for s in self.steps
            ],
        }


def execute(
    manuscript: ActivityManuscript,
    video_id: str = "v0",
    gap_min: float = 0.0,
    gap_max: float = 2.0,
    seed: Union[int, np.random.Generator] = 0,
) -> ExecutionTrace:
    """Lay the manuscript's actions on a timeline separated by random gaps.

    The lead pad before the first action, every inter-action gap and the
    trailing pad are each drawn uniformly from ``[gap_min, gap_max]``.
    """
    if gap_min < 0 or gap_max < 0:
        raise ValueError(f"gap bounds must be non-negative, got ({gap_min}, {gap_max})")
    if gap_max < gap_min:
        raise ValueError(f"gap_max {gap_max} < gap_min {gap_min}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    gaps = rng.uniform(gap_min, gap_max, size=len(manuscript) + 1)
    scenes = manuscript.scenes or (manuscript.scene,) * len(manuscript)
    steps = []
    t = float(gaps[0])
    for k, (a, d) in enumerate(zip(manuscript.actions, manuscript.durations)):
        steps.append(TraceStep(a, scenes[k], t, t + d))
        t = t + d + (float(gaps[k + 1]) if k + 1 < len(manuscript) else 0.0)
    total = t + float(gaps[-1]) if steps else t
    return ExecutionTrace(video_id, manuscript.scene, manuscript.agent, tuple(steps), total)


def export_program(manuscript: ActivityManuscript, catalog: Mapping[str, ActionSpec]) -> str:
    """Render ``[VERB] <object> (1)`` lines under a scene/agent header."""
    lines = [f"# scene: {manuscript.scene}", f"# agent: {manuscript.agent}"]
    for a in manuscript.actions:
        spec = catalog[a]
        for token in (spec.verb, spec.object):
            if not _TOKEN.match(token):
                raise ValueError(f"action {a!r}: token {token!r} cannot appear in a script line")
        lines.append(f"[{spec.verb.upper()}] <{spec.object}> (1)")
    return "\n".join(lines) + "\n"
