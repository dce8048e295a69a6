"""Commonsense activity graph and re-weighted logical-chain sampling.

Two rule kinds are read from a plain text rule file::

    PRE <a> BEFORE <b>     # b needs a earlier in the same chain
    BLOCK <a> BLOCKS <b>   # a must not appear before b

A chain grows one action at a time.  The eligible set at each step is every
unused action whose preconditions are already in the chain and none of
whose blockers are.  Candidates are weighted by ``1 / (1 + times chosen so
far)`` so actions with few prerequisites do not crowd out the rest.
"""

from __future__ import annotations

import graphlib
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .records import ActionSpec

log = logging.getLogger(__name__)

STRATEGIES = ("inverse_count", "uniform")


class RuleError(ValueError):
    pass


class ChainError(RuntimeError):
    def __init__(self, message: str, partial: Sequence[str] = ()):
        super().__init__(message)
        self.partial = tuple(partial)


def parse_catalog(lines: Iterable[str]) -> Dict[str, ActionSpec]:
    """Parse ``<id> <verb> <object> <base_duration> <scene,...> [<phrase>]`` lines.

    ``phrase`` is the third-person verb phrase with ``_`` for spaces
    (``sits_on``); it defaults to ``<verb>s``.
    """
    catalog = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (5, 6):
            raise RuleError(f"catalog line {lineno}: expected 5 or 6 fields, got {len(parts)}")
        action_id, verb, obj, duration, scenes = parts[:5]
        phrase = parts[5].replace("_", " ") if len(parts) == 6 else ""
        if action_id in catalog:
            raise RuleError(f"catalog line {lineno}: duplicate action id {action_id!r}")
        try:
            base = float(duration)
        except ValueError:
            raise RuleError(f"catalog line {lineno}: bad duration {duration!r}") from None
        try:
            catalog[action_id] = ActionSpec(
                action_id, verb.lower(), obj.lower(), base,
                frozenset(s for s in scenes.split(",") if s), phrase,
            )
        except ValueError as exc:
            raise RuleError(f"catalog line {lineno}: {exc}") from None
    return catalog


@dataclass(frozen=True)
class CommonsenseRuleSet:
    catalog: Mapping[str, ActionSpec]
    precedences: Tuple[Tuple[str, str], ...] = ()
    blockers: Tuple[Tuple[str, str], ...] = ()

    @classmethod
    def parse(cls, catalog: Mapping[str, ActionSpec], lines: Iterable[str]) -> "CommonsenseRuleSet":
        pre, block = [], []
        for lineno, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) == 4 and parts[0] == "PRE" and parts[2] == "BEFORE":
                pre.append((parts[1], parts[3]))
            elif len(parts) == 4 and parts[0] == "BLOCK" and parts[2] == "BLOCKS":
                block.append((parts[1], parts[3]))
            else:
                raise RuleError(f"rule line {lineno}: cannot parse {line!r}")
        return cls(dict(catalog), tuple(pre), tuple(block))


@dataclass(frozen=True)
class ActivityGraph:
    nodes: Tuple[str, ...]
    edges: Tuple[Tuple[str, str], ...]
    blocker_edges: Tuple[Tuple[str, str], ...]
    preds: Mapping[str, FrozenSet[str]]
    succs: Mapping[str, FrozenSet[str]]
    blocked_by: Mapping[str, FrozenSet[str]]
    catalog: Mapping[str, ActionSpec] = field(default_factory=dict, compare=False)

    def in_degree(self, node: str) -> int:
        return len(self.preds[node])

    def eligible(self, chosen: Sequence[str]) -> List[str]:
        used = set(chosen)
        return [
            a for a in self.nodes
            if a not in used and self.preds[a] <= used and not (self.blocked_by[a] & used)
        ]


def build_graph(rule_set: CommonsenseRuleSet) -> ActivityGraph:
    nodes = tuple(sorted(rule_set.catalog))
    known = set(nodes)
    for kind, pairs in (("PRE", rule_set.precedences), ("BLOCK", rule_set.blockers)):
        for a, b in pairs:
            for x in (a, b):
                if x not in known:
                    raise RuleError(f"{kind} {a} -> {b}: unknown action id {x!r}")
            if a == b:
                raise RuleError(f"{kind} {a} -> {b}: self-loop")
    preds, succs, blocked = defaultdict(set), defaultdict(set), defaultdict(set)
    for a, b in rule_set.precedences:
        preds[b].add(a)
        succs[a].add(b)
    for a, b in rule_set.blockers:
        blocked[b].add(a)
    sorter = graphlib.TopologicalSorter({n: preds[n] for n in nodes})
    try:
        sorter.prepare()
    except graphlib.CycleError as exc:
        cycle = exc.args[1]
        raise RuleError(f"precedence cycle: {' -> '.join(cycle)}") from None
    return ActivityGraph(
        nodes=nodes,
        edges=tuple(sorted(set(rule_set.precedences))),
        blocker_edges=tuple(sorted(set(rule_set.blockers))),
        preds={n: frozenset(preds[n]) for n in nodes},
        succs={n: frozenset(succs[n]) for n in nodes},
        blocked_by={n: frozenset(blocked[n]) for n in nodes},
        catalog=dict(rule_set.catalog),
    )


@dataclass(frozen=True)
class ActionChain:
    actions: Tuple[str, ...]

    def __len__(self):
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)


@dataclass
class SamplerState:
    rng_seed: int = 0
    selection_counts: Dict[str, int] = field(default_factory=dict)
    strategy: str = "inverse_count"
    max_restarts: int = 50
    restarts: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        self.rng = np.random.default_rng(self.rng_seed)

    def weights(self, candidates: Sequence[str]) -> np.ndarray:
        if self.strategy == "uniform":
            return np.ones(len(candidates))
        return np.array([1.0 / (1 + self.selection_counts.get(c, 0)) for c in candidates])


def sample_chain(graph: ActivityGraph, length: int, state: SamplerState) -> ActionChain:
    """Draw one valid chain of ``length`` actions and update the selection counts."""
    if length < 1:
        raise ValueError(f"chain length must be >= 1, got {length}")
    if length > len(graph.nodes):
        raise ChainError(f"length {length} exceeds the {len(graph.nodes)} actions in the graph")
    partial: List[str] = []
    for attempt in range(state.max_restarts + 1):
        partial = []
        while len(partial) < length:
            candidates = graph.eligible(partial)
            if not candidates:
                break
            w = state.weights(candidates)
            partial.append(candidates[state.rng.choice(len(candidates), p=w / w.sum())])
        if len(partial) == length:
            if attempt:
                log.debug("chain of length %d needed %d restarts", length, attempt)
                state.restarts += attempt
            for a in partial:
                state.selection_counts[a] = state.selection_counts.get(a, 0) + 1
            return ActionChain(tuple(partial))
    raise ChainError(
        f"dead end after {state.max_restarts} restarts; partial chain {partial}", partial
    )


def chain_is_valid(chain, graph: ActivityGraph) -> Tuple[bool, Optional[str]]:
    """Check preconditions, blockers and repeats; return the first violation."""
    seen = set()
    for pos, a in enumerate(chain):
        if a not in graph.preds:
            return False, f"position {pos}: unknown action {a!r}"
        if a in seen:
            return False, f"position {pos}: {a} repeated"
        missing = graph.preds[a] - seen
        if missing:
            return False, f"position {pos}: {a} requires {sorted(missing)} earlier"
        early = graph.blocked_by[a] & seen
        if early:
            return False, f"position {pos}: {a} blocked by earlier {sorted(early)}"
        seen.add(a)
    return True, None


def load_graph(catalog_path, rules_path) -> ActivityGraph:
    with open(catalog_path, encoding="utf-8") as fh:
        catalog = parse_catalog(fh)
    with open(rules_path, encoding="utf-8") as fh:
        rules = CommonsenseRuleSet.parse(catalog, fh)
    return build_graph(rules)
