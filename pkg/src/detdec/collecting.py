"""Cooperative box-delivery benchmark on a walled grid.

Agents move on an ``(H+2) x (W+2)`` grid whose border is wall; the interior
``H x W`` region holds a fixed, known set of obstacle cells and goal cells
(one goal per box).  Indistinguishable boxes lie on free cells; an agent
entering a box cell while empty-handed picks the box up automatically, and
a carrying agent entering an unfilled goal cell delivers it for +100.  Each
goal accepts one box.  Moves resolve in ascending agent order within a
step; moving into a wall, an obstacle, or a cell currently occupied by
another agent is a no-op, which makes the problem asymmetric but keeps the
dynamics deterministic.  Once every goal is filled the state is absorbing.

Initial uncertainty: the set of start cells is known but which agent
occupies which start cell is not, and the boxes lie on an unknown
``n_b``-subset of the eligible cells (free interior cells that are neither
goals nor starts).  The initial belief enumerates all assignments x subsets
uniformly.

A per-agent observation is the 3x3 patch centered on the agent, each cell
rendered to one of five codes (wall 0, empty 1, box 2, agent 3, goal 4;
agents cover boxes and goals, boxes cover goals) and packed base-5 in
row-major patch order.

Packed state layout, least significant first: per agent (cell, carrying)
pairs in base ``2C`` over the ``C`` free cells, a ground-box bitmask over
free cells, then one filled flag per goal.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import PolicyFormatError
from .model import DetDecModel, SupportBelief
from .rng import PRNG_NAME, stream

UP, RIGHT, DOWN, LEFT, WAIT = range(5)
ACTION_COUNT = 5
DELIVERY_REWARD = 100.0

WALL_CODE, EMPTY_CODE, BOX_CODE, AGENT_CODE, GOAL_CODE = range(5)
OBS_BOUND = 5 ** 9


@dataclass(frozen=True)
class CollectingSpec:
    height: int
    width: int
    agents: int
    boxes: int
    seed: int

    def validate(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ValueError("interior must be at least 1x1")
        if self.agents < 1:
            raise ValueError(f"agents {self.agents} < 1")
        if self.boxes < 1:
            raise ValueError(f"boxes {self.boxes} < 1")
        cells = self.height * self.width
        if cells <= 2 * self.boxes + self.agents:
            raise ValueError(
                f"interior of {cells} cells too small for {self.boxes} boxes and {self.agents} agents"
            )
        # boxes additionally need n_b eligible cells outside goals and starts
        if cells - 2 * self.boxes - self.agents < self.boxes:
            raise ValueError(
                f"interior of {cells} cells leaves fewer than {self.boxes} box placements"
            )


@dataclass(frozen=True)
class CollectingInstance:
    height: int
    width: int
    agents: int
    boxes: int
    obstacles: tuple[int, ...]    # full-grid cell ids, sorted
    goals: tuple[int, ...]        # sorted; slot k is goals[k]
    start_cells: tuple[int, ...]  # sorted; assignment to agents is uncertain
    box_domain: tuple[int, ...]   # sorted cells eligible for initial boxes
    gamma: float = 0.95
    seed: int | None = None

    def validate(self) -> None:
        rows, cols = self.height + 2, self.width + 2
        interior = set()
        for r in range(1, self.height + 1):
            for c in range(1, self.width + 1):
                interior.add(r * cols + c)
        groups = {
            "obstacles": self.obstacles,
            "goals": self.goals,
            "start_cells": self.start_cells,
            "box_domain": self.box_domain,
        }
        seen: set[int] = set()
        for name, cells in groups.items():
            if list(cells) != sorted(set(cells)):
                raise ValueError(f"{name} must be sorted and distinct")
            for cell in cells:
                if cell not in interior:
                    raise ValueError(f"{name} cell {cell} outside the {rows}x{cols} interior")
                if cell in seen:
                    raise ValueError(f"cell {cell} appears in more than one group")
            seen.update(cells)
        if len(self.obstacles) != self.boxes or len(self.goals) != self.boxes:
            raise ValueError("need exactly one obstacle and one goal per box")
        if len(self.start_cells) != self.agents:
            raise ValueError("need one start cell per agent")
        if len(self.box_domain) < self.boxes:
            raise ValueError(
                f"box domain of {len(self.box_domain)} cells cannot host {self.boxes} boxes"
            )
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma {self.gamma} outside (0, 1)")


class CollectingModel(DetDecModel):
    def __init__(self, instance: CollectingInstance) -> None:
        instance.validate()
        self.instance = instance
        cols = instance.width + 2
        rows = instance.height + 2
        self._cols = cols
        self.agent_count = instance.agents
        self.discount = instance.gamma
        self.action_space_sizes = (ACTION_COUNT,) * instance.agents
        self.observation_space_sizes = (OBS_BOUND,) * instance.agents

        obstacle_set = set(instance.obstacles)
        free = []
        for r in range(1, instance.height + 1):
            for c in range(1, instance.width + 1):
                cell = r * cols + c
                if cell not in obstacle_set:
                    free.append(cell)
        self._free = tuple(free)
        self._fidx = {cell: i for i, cell in enumerate(free)}
        self._C = len(free)
        self._goal_slot = {cell: k for k, cell in enumerate(instance.goals)}
        # static render code per cell, before agents/boxes are overlaid
        base = [WALL_CODE] * (rows * cols)
        for cell in free:
            base[cell] = GOAL_CODE if cell in self._goal_slot else EMPTY_CODE
        self._base = base
        self._delta = (-cols, 1, cols, -1)  # up, right, down, left
        self._around = {
            cell: tuple(cell + dr * cols + dc for dr in (-1, 0, 1) for dc in (-1, 0, 1))
            for cell in free
        }
        self._agent_radix = 2 * self._C
        self._agents_card = self._agent_radix ** instance.agents
        self._flags_full = (1 << instance.boxes) - 1
        self._state_card = (self._agents_card << self._C) << instance.boxes

    # --- packing ---------------------------------------------------------

    def pack(self, cells, carries, boxmask: int, flags: int) -> int:
        code = 0
        mult = 1
        for cell, carry in zip(cells, carries):
            code += (self._fidx[cell] * 2 + carry) * mult
            mult *= self._agent_radix
        return ((code << self._C) | boxmask) * (self._flags_full + 1) + flags

    def unpack(self, state: int) -> tuple[tuple[int, ...], tuple[int, ...], int, int]:
        high, flags = divmod(state, self._flags_full + 1)
        code, boxmask = divmod(high, 1 << self._C)
        cells, carries = [], []
        for _ in range(self.agent_count):
            code, slot = divmod(code, self._agent_radix)
            fidx, carry = divmod(slot, 2)
            cells.append(self._free[fidx])
            carries.append(carry)
        return tuple(cells), tuple(carries), boxmask, flags

    def _check_state(self, state: int) -> None:
        if not 0 <= state < self._state_card:
            raise ValueError(f"state id {state} outside [0, {self._state_card})")

    # --- dynamics ----------------------------------------------------------

    def _advance(self, state: int, action) -> tuple[list[int], list[int], int, int, float]:
        cells, carries, boxmask, flags = self.unpack(state)
        cells = list(cells)
        carries = list(carries)
        reward = 0.0
        for i in range(self.agent_count):
            a = action[i]
            if a == WAIT:
                continue
            target = cells[i] + self._delta[a]
            if self._base[target] == WALL_CODE:
                continue
            if any(cells[j] == target for j in range(self.agent_count) if j != i):
                continue
            cells[i] = target
            if carries[i]:
                slot = self._goal_slot.get(target)
                if slot is not None and not flags >> slot & 1:
                    flags |= 1 << slot
                    carries[i] = 0
                    reward += DELIVERY_REWARD
            else:
                f = self._fidx[target]
                if boxmask >> f & 1:
                    boxmask &= ~(1 << f)
                    carries[i] = 1
        return cells, carries, boxmask, flags, reward

    def step(self, state, action):
        action = tuple(action)
        self._check_state(state)
        self.check_action(action)
        if self.is_terminal(state):
            cells, _, boxmask, _ = self.unpack(state)
            return state, self._observe(cells, boxmask), 0.0
        cells, carries, boxmask, flags, reward = self._advance(state, action)
        s2 = self.pack(cells, carries, boxmask, flags)
        return s2, self._observe(cells, boxmask), reward

    def transition_only(self, state, action):
        action = tuple(action)
        self._check_state(state)
        if self.is_terminal(state):
            return state, 0.0
        cells, carries, boxmask, flags, reward = self._advance(state, action)
        return self.pack(cells, carries, boxmask, flags), reward

    def _observe(self, cells, boxmask: int) -> tuple[int, ...]:
        occupied = set(cells)
        base = self._base
        fidx = self._fidx
        obs = []
        for i in range(self.agent_count):
            code = 0
            mult = 1
            for cell in self._around[cells[i]]:
                kind = base[cell]
                if kind != WALL_CODE:
                    if cell in occupied:
                        kind = AGENT_CODE
                    elif boxmask >> fidx[cell] & 1:
                        kind = BOX_CODE
                code += kind * mult
                mult *= 5
            obs.append(code)
        return tuple(obs)

    def initial_belief(self):
        pairs = []
        count = 0
        for perm in sorted(itertools.permutations(self.instance.start_cells)):
            for combo in itertools.combinations(self.instance.box_domain, self.instance.boxes):
                boxmask = 0
                for cell in combo:
                    boxmask |= 1 << self._fidx[cell]
                pairs.append(self.pack(perm, (0,) * self.agent_count, boxmask, 0))
                count += 1
        w = Fraction(1, count)
        return SupportBelief.from_pairs((s, w) for s in pairs)

    def is_terminal(self, state):
        self._check_state(state)
        return state % (self._flags_full + 1) == self._flags_full

    def reward_bounds(self):
        return (0.0, DELIVERY_REWARD * self.agent_count)

    # --- reporting ---------------------------------------------------------

    def sizing_report(self) -> dict:
        n_b = self.instance.boxes
        support = math.factorial(self.agent_count) * math.comb(len(self.instance.box_domain), n_b)
        return {
            "family": "collecting",
            "agents": self.agent_count,
            "interior": [self.instance.height, self.instance.width],
            "boxes": n_b,
            "free_cells": self._C,
            "env_state_bound": (2 * self._C) ** self.agent_count * math.comb(self._C, n_b),
            "belief_support": support,
            "action_space_sizes": list(self.action_space_sizes),
            "observation_space_bound": OBS_BOUND,
        }

    def descriptor(self) -> dict:
        inst = self.instance
        return {
            "family": "collecting",
            "format": 1,
            "prng": PRNG_NAME,
            "height": inst.height,
            "width": inst.width,
            "agents": inst.agents,
            "boxes": inst.boxes,
            "obstacles": list(inst.obstacles),
            "goals": list(inst.goals),
            "start_cells": list(inst.start_cells),
            "box_domain": list(inst.box_domain),
            "belief_rule": "all-start-assignments-x-box-subsets/v1",
            "belief_support": math.factorial(inst.agents) * math.comb(len(inst.box_domain), inst.boxes),
            "gamma": inst.gamma,
            "seed": inst.seed,
        }

    @classmethod
    def from_descriptor(cls, doc: dict) -> "CollectingModel":
        try:
            inst = CollectingInstance(
                height=int(doc["height"]),
                width=int(doc["width"]),
                agents=int(doc["agents"]),
                boxes=int(doc["boxes"]),
                obstacles=tuple(int(c) for c in doc["obstacles"]),
                goals=tuple(int(c) for c in doc["goals"]),
                start_cells=tuple(int(c) for c in doc["start_cells"]),
                box_domain=tuple(int(c) for c in doc["box_domain"]),
                gamma=float(doc.get("gamma", 0.95)),
                seed=doc.get("seed"),
            )
        except KeyError as exc:
            raise PolicyFormatError(f"instance descriptor: missing field {exc.args[0]!r}") from None
        return cls(inst)


def collecting_generate(spec: CollectingSpec, gamma: float = 0.95) -> CollectingModel:
    """Sample an instance from (spec, seed).

    Draw order is fixed and versioned: obstacle cells, then goal cells from
    the remainder, then start cells from the remainder; every other free
    non-goal interior cell is eligible for boxes.
    """
    spec.validate()
    rng = stream(spec.seed, "collecting-instance")
    cols = spec.width + 2
    interior = [
        r * cols + c
        for r in range(1, spec.height + 1)
        for c in range(1, spec.width + 1)
    ]
    obstacles = sorted(rng.sample(interior, spec.boxes))
    rest = [c for c in interior if c not in set(obstacles)]
    goals = sorted(rng.sample(rest, spec.boxes))
    rest = [c for c in rest if c not in set(goals)]
    starts = sorted(rng.sample(rest, spec.agents))
    box_domain = tuple(c for c in rest if c not in set(starts))
    instance = CollectingInstance(
        height=spec.height,
        width=spec.width,
        agents=spec.agents,
        boxes=spec.boxes,
        obstacles=tuple(obstacles),
        goals=tuple(goals),
        start_cells=tuple(starts),
        box_domain=box_domain,
        gamma=gamma,
        seed=spec.seed,
    )
    return CollectingModel(instance)
