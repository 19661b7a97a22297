"""Deterministic finite-state controllers and joint policies.

A controller node carries one action and a partial observation-to-node
transition map; observations missing from the map go to the node's fallback
successor (by default the node itself), so execution is total even on
observations never reached during planning.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import PolicyFormatError


@dataclass(frozen=True)
class FscNode:
    action: int
    transitions: dict[int, int] = field(default_factory=dict)  # observation -> node index
    fallback: int | None = None  # None resolves to the node's own index


class Fsc:
    """Finite automaton policy: nodes select actions, observations drive moves."""

    __slots__ = ("nodes", "initial_node")

    def __init__(self, nodes: list[FscNode], initial_node: int = 0) -> None:
        if not nodes:
            raise ValueError("an FSC needs at least one node")
        if not 0 <= initial_node < len(nodes):
            raise ValueError(f"initial node {initial_node} outside [0, {len(nodes)})")
        resolved = []
        for idx, node in enumerate(nodes):
            fallback = idx if node.fallback is None else node.fallback
            if not 0 <= fallback < len(nodes):
                raise ValueError(f"node {idx} fallback {fallback} outside [0, {len(nodes)})")
            if node.action < 0:
                raise ValueError(f"node {idx} has negative action {node.action}")
            for obs, target in node.transitions.items():
                if obs < 0:
                    raise ValueError(f"node {idx} maps negative observation {obs}")
                if not 0 <= target < len(nodes):
                    raise ValueError(
                        f"node {idx} transition on obs {obs} targets {target}, outside [0, {len(nodes)})"
                    )
            resolved.append(FscNode(node.action, dict(node.transitions), fallback))
        self.nodes = tuple(resolved)
        self.initial_node = initial_node

    def act(self, node: int) -> int:
        if not 0 <= node < len(self.nodes):
            raise ValueError(f"node index {node} outside [0, {len(self.nodes)})")
        return self.nodes[node].action

    def advance(self, node: int, obs: int) -> int:
        if not 0 <= node < len(self.nodes):
            raise ValueError(f"node index {node} outside [0, {len(self.nodes)})")
        if obs < 0:
            raise ValueError(f"negative observation {obs}")
        entry = self.nodes[node]
        return entry.transitions.get(obs, entry.fallback)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Fsc)
            and self.initial_node == other.initial_node
            and self.nodes == other.nodes
        )

    def __hash__(self) -> int:
        return hash((self.initial_node, tuple((n.action, tuple(sorted(n.transitions.items())), n.fallback) for n in self.nodes)))

    def __repr__(self) -> str:
        return f"Fsc({len(self.nodes)} nodes, initial={self.initial_node})"


def fsc_size(fsc: Fsc) -> int:
    """Node count of a controller."""
    return fsc.size


class JointPolicy:
    """One controller per agent."""

    __slots__ = ("controllers",)

    def __init__(self, controllers) -> None:
        controllers = tuple(controllers)
        if not controllers:
            raise ValueError("a joint policy needs at least one controller")
        self.controllers = controllers

    @property
    def agent_count(self) -> int:
        return len(self.controllers)

    def replace(self, agent: int, fsc: Fsc) -> "JointPolicy":
        if not 0 <= agent < len(self.controllers):
            raise ValueError(f"agent index {agent} outside [0, {len(self.controllers)})")
        new = list(self.controllers)
        new[agent] = fsc
        return JointPolicy(new)

    def initial_nodes(self) -> tuple[int, ...]:
        return tuple(c.initial_node for c in self.controllers)

    def sizes(self) -> tuple[int, ...]:
        return tuple(c.size for c in self.controllers)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, JointPolicy) and self.controllers == other.controllers

    def __repr__(self) -> str:
        return f"JointPolicy(sizes={self.sizes()})"


# --- serialization -----------------------------------------------------------
#
# Schema:
#   {"agents": [{"initial": int,
#                "nodes": [{"action": int, "fallback": int,
#                           "transitions": {"<obs>": int, ...}}, ...]}, ...]}
# Observation keys are stringified non-negative integers.


def policy_to_dict(policy: JointPolicy) -> dict:
    return {
        "agents": [
            {
                "initial": fsc.initial_node,
                "nodes": [
                    {
                        "action": node.action,
                        "fallback": node.fallback,
                        "transitions": {str(obs): tgt for obs, tgt in sorted(node.transitions.items())},
                    }
                    for node in fsc.nodes
                ],
            }
            for fsc in policy.controllers
        ]
    }


def serialize(policy: JointPolicy) -> str:
    return json.dumps(policy_to_dict(policy), sort_keys=True, indent=1)


def _require(cond: bool, where: str, problem: str) -> None:
    if not cond:
        raise PolicyFormatError(f"{where}: {problem}")


def policy_from_dict(doc: dict) -> JointPolicy:
    _require(isinstance(doc, dict), "document", "expected a JSON object")
    agents = doc.get("agents")
    _require(isinstance(agents, list) and agents, "agents", "expected a non-empty list")
    controllers = []
    for ai, agent_doc in enumerate(agents):
        where = f"agents[{ai}]"
        _require(isinstance(agent_doc, dict), where, "expected an object")
        nodes_doc = agent_doc.get("nodes")
        _require(isinstance(nodes_doc, list) and nodes_doc, f"{where}.nodes", "expected a non-empty list")
        initial = agent_doc.get("initial", 0)
        _require(isinstance(initial, int) and 0 <= initial < len(nodes_doc),
                 f"{where}.initial", f"node index {initial!r} outside [0, {len(nodes_doc)})")
        nodes = []
        for ni, node_doc in enumerate(nodes_doc):
            nwhere = f"{where}.nodes[{ni}]"
            _require(isinstance(node_doc, dict), nwhere, "expected an object")
            action = node_doc.get("action")
            _require(isinstance(action, int) and action >= 0, f"{nwhere}.action",
                     f"expected a non-negative integer, got {action!r}")
            fallback = node_doc.get("fallback", ni)
            _require(isinstance(fallback, int) and 0 <= fallback < len(nodes_doc),
                     f"{nwhere}.fallback", f"node index {fallback!r} outside [0, {len(nodes_doc)})")
            transitions: dict[int, int] = {}
            raw = node_doc.get("transitions", {})
            _require(isinstance(raw, dict), f"{nwhere}.transitions", "expected an object")
            for key, target in raw.items():
                twhere = f"{nwhere}.transitions[{key!r}]"
                try:
                    obs = int(key)
                except (TypeError, ValueError):
                    raise PolicyFormatError(f"{twhere}: key is not an integer") from None
                _require(obs >= 0, twhere, "observation must be non-negative")
                _require(isinstance(target, int) and 0 <= target < len(nodes_doc),
                         twhere, f"target {target!r} outside [0, {len(nodes_doc)})")
                transitions[obs] = target
            nodes.append(FscNode(action, transitions, fallback))
        controllers.append(Fsc(nodes, initial))
    return JointPolicy(controllers)


def deserialize(text: str) -> JointPolicy:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolicyFormatError(f"document: invalid JSON ({exc})") from None
    return policy_from_dict(doc)
