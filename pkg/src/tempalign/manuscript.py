"""Action Permutation (AP) and Action Duration Diversity (ADD).

AP re-orders a valid chain so each action visits as many slots as the
commonsense constraints allow.  It grows random topological orders of the
chain's constraint poset, weighting each eligible action by
``1 / (1 + times it already sat in this slot)``.  ADD gives every action
an independent speed multiplier from a fixed set.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .graph import ActionChain, ActivityGraph, chain_is_valid
from .records import ActionSpec

DEFAULT_MULTIPLIERS = (0.5, 0.75, 1.0, 1.25, 1.5)


@dataclass
class PositionLedger:
    counts: Dict[Tuple[str, int], int] = field(default_factory=lambda: defaultdict(int))

    def __getitem__(self, key: Tuple[str, int]) -> int:
        return self.counts.get(key, 0)

    def record(self, ordering: Sequence[str]) -> None:
        for slot, a in enumerate(ordering):
            self.counts[(a, slot)] += 1


@dataclass(frozen=True)
class ActivityManuscript:
    actions: Tuple[str, ...]
    multipliers: Tuple[float, ...]
    durations: Tuple[float, ...]
    scene: str = ""
    agent: str = ""
    # room each action happens in; drives the scene-change sentence template
    scenes: Tuple[str, ...] = ()

    def __post_init__(self):
        if not (len(self.actions) == len(self.multipliers) == len(self.durations)):
            raise ValueError("actions, multipliers and durations differ in length")
        if self.scenes and len(self.scenes) != len(self.actions):
            raise ValueError("scenes and actions differ in length")

    def __len__(self):
        return len(self.actions)

    def to_dict(self) -> dict:
        return {
            "actions": list(self.actions),
            "multipliers": list(self.multipliers),
            "durations": list(self.durations),
            "scene": self.scene,
            "agent": self.agent,
            "scenes": list(self.scenes),
        }


def _constraint_preds(actions: Sequence[str], graph: ActivityGraph) -> Dict[str, set]:
    """Within-chain predecessors implied by precedence and blocker rules."""
    members = set(actions)
    before = {a: set(graph.preds[a] & members) for a in actions}
    for b in actions:
        # a blocks b: b has to come first whenever both are present
        for a in graph.blocked_by[b] & members:
            before[a].add(b)
    return before


def permute_chain(
    chain: ActionChain,
    graph: ActivityGraph,
    k: int,
    ledger: PositionLedger,
    rng: np.random.Generator,
) -> List[Tuple[str, ...]]:
    """Return ``k`` valid orderings of the chain's actions and update the ledger."""
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    actions = tuple(chain)
    ok, why = chain_is_valid(actions, graph)
    if not ok:
        raise ValueError(f"permute_chain needs a valid chain: {why}")
    before = _constraint_preds(actions, graph)
    out = []
    for _ in range(k):
        placed: List[str] = []
        used = set()
        while len(placed) < len(actions):
            slot = len(placed)
            eligible = [a for a in actions if a not in used and before[a] <= used]
            if not eligible:
                raise ValueError(f"chain {actions} admits no valid ordering")
            w = np.array([1.0 / (1 + ledger[(a, slot)]) for a in eligible])
            pick = eligible[rng.choice(len(eligible), p=w / w.sum())]
            placed.append(pick)
            used.add(pick)
        ledger.record(placed)
        out.append(tuple(placed))
    return out


def assign_durations(
    ordering: Sequence[str],
    catalog: Mapping[str, ActionSpec],
    multiplier_set: Sequence[float],
    rng: np.random.Generator,
    scene: str = "",
    agent: str = "",
    scenes: Sequence[str] = (),
) -> ActivityManuscript:
    """Draw one multiplier per action uniformly from ``multiplier_set``."""
    mults = tuple(float(m) for m in multiplier_set)
    if not mults:
        raise ValueError("empty multiplier set")
    if any(m <= 0 for m in mults):
        raise ValueError(f"multipliers must be positive, got {mults}")
    picks = tuple(mults[i] for i in rng.integers(0, len(mults), size=len(ordering)))
    durations = tuple(catalog[a].base_duration * m for a, m in zip(ordering, picks))
    return ActivityManuscript(tuple(ordering), picks, durations, scene, agent, tuple(scenes))


def assign_scenes(
    ordering: Sequence[str],
    catalog: Mapping[str, ActionSpec],
    rng: np.random.Generator,
) -> Tuple[str, ...]:
    """Pick a room per action, staying in the current room when it allows the action."""
    rooms: List[str] = []
    current = None
    for a in ordering:
        valid = sorted(catalog[a].valid_scenes)
        if current not in valid:
            current = valid[rng.integers(len(valid))]
        rooms.append(current)
    return tuple(rooms)
