"""Grid navigation benchmark with stochastic edge blockages.

Instances live on the 4-connected ``N x N`` grid, vertices numbered
row-major ``1..N^2``.  Every edge carries an integer traversal cost in
``{1..10}``.  A chosen subset of edges is *stochastic*: each is blocked
with a known probability, the realized open/blocked configuration is fixed
before the episode starts and never changes, and an agent standing at an
endpoint of a stochastic edge sees that edge's true status.  All agents
start at vertex 1; each must reach its own goal vertex, drawn from the top
of the vertex range.  The first arrival at the goal pays +500 and freezes
the agent (its later actions are no-ops at reward 0); each successful move
costs the edge weight; waiting and bumping into a blocked or missing edge
cost nothing.

Packed state layout, least significant first: agent positions in base
``N^2``, one blockage bit per stochastic edge, one arrived flag per agent.
The blockage bits make the initial belief a product distribution over the
``2^{n_e}`` configurations; the arrived flags keep the +500 bonus a
one-shot event (without them a returning agent could collect it again).

A per-agent observation packs (all agents' positions, blocked-bitmask over
the stochastic edges incident to the agent's own vertex) into one integer:
``positions_code * 16 + mask``, incident edges taken in ascending edge
index order, positions code in base ``N^2`` with agent 0 least significant.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import PolicyFormatError
from .model import DetDecModel, SupportBelief
from .rng import PRNG_NAME, stream

UP, RIGHT, DOWN, LEFT, WAIT = range(5)
ACTION_COUNT = 5
GOAL_REWARD = 500.0

_OBS_MASK_RADIX = 16  # a grid vertex touches at most 4 stochastic edges


def grid_edges(n: int) -> list[tuple[int, int]]:
    """Canonical edge list: vertices row-major, right edge then down edge."""
    edges = []
    for v in range(1, n * n + 1):
        col = (v - 1) % n
        row = (v - 1) // n
        if col < n - 1:
            edges.append((v, v + 1))
        if row < n - 1:
            edges.append((v, v + n))
    return edges


@dataclass(frozen=True)
class MactpSpec:
    grid_size: int
    agents: int
    stochastic_edges: int
    seed: int

    def validate(self) -> None:
        if self.grid_size < 2:
            raise ValueError(f"grid_size {self.grid_size} < 2")
        if self.agents < 1:
            raise ValueError(f"agents {self.agents} < 1")
        max_edges = 2 * self.grid_size * (self.grid_size - 1)
        if not 0 <= self.stochastic_edges <= max_edges:
            raise ValueError(
                f"stochastic_edges {self.stochastic_edges} outside [0, {max_edges}]"
            )


@dataclass(frozen=True)
class MactpInstance:
    grid_size: int
    agents: int
    weights: tuple[int, ...]            # aligned with grid_edges(grid_size)
    stochastic: tuple[int, ...]         # edge indices, strictly ascending
    block_probs: tuple[Fraction, ...]   # aligned with `stochastic`
    goals: tuple[int, ...]              # one vertex per agent
    starts: tuple[int, ...]             # one vertex per agent
    gamma: float = 0.95
    seed: int | None = None

    def validate(self) -> None:
        n = self.grid_size
        m = n * n
        edges = grid_edges(n)
        if len(self.weights) != len(edges):
            raise ValueError(f"{len(self.weights)} weights for {len(edges)} edges")
        if any(w < 1 for w in self.weights):
            raise ValueError("edge weights must be positive")
        if list(self.stochastic) != sorted(set(self.stochastic)):
            raise ValueError("stochastic edge indices must be strictly ascending")
        if self.stochastic and not 0 <= self.stochastic[-1] < len(edges):
            raise ValueError("stochastic edge index out of range")
        if len(self.block_probs) != len(self.stochastic):
            raise ValueError("one blockage probability per stochastic edge required")
        for p in self.block_probs:
            if not 0 <= p <= 1:
                raise ValueError(f"blockage probability {p} outside [0, 1]")
        if len(self.goals) != self.agents or len(self.starts) != self.agents:
            raise ValueError("need one goal and one start per agent")
        for v in (*self.goals, *self.starts):
            if not 1 <= v <= m:
                raise ValueError(f"vertex {v} outside 1..{m}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma {self.gamma} outside (0, 1)")


class MactpModel(DetDecModel):
    def __init__(self, instance: MactpInstance) -> None:
        instance.validate()
        self.instance = instance
        n = instance.grid_size
        m = n * n
        self._m = m
        self.agent_count = instance.agents
        self.discount = instance.gamma
        self.action_space_sizes = (ACTION_COUNT,) * instance.agents
        pos_code_card = m ** instance.agents
        self.observation_space_sizes = (pos_code_card * _OBS_MASK_RADIX,) * instance.agents

        edges = grid_edges(n)
        # _move[v][action] = (target vertex, edge index) or None
        move: list[list[tuple[int, int] | None]] = [[None] * 4 for _ in range(m + 1)]
        for idx, (u, v) in enumerate(edges):
            if v == u + 1:
                move[u][RIGHT] = (v, idx)
                move[v][LEFT] = (u, idx)
            else:
                move[u][DOWN] = (v, idx)
                move[v][UP] = (u, idx)
        self._move = move
        self._stoch_bit = {eidx: bit for bit, eidx in enumerate(instance.stochastic)}
        incident: list[tuple[int, ...]] = [()] * (m + 1)
        for v in range(1, m + 1):
            bits = []
            for d in range(4):
                mv = move[v][d]
                if mv is not None and mv[1] in self._stoch_bit:
                    bits.append((mv[1], self._stoch_bit[mv[1]]))
            incident[v] = tuple(bit for _, bit in sorted(bits))
        self._incident = incident
        self._weights = instance.weights
        self._goals = instance.goals
        self._n_edges = len(instance.stochastic)
        self._pos_card = pos_code_card
        self._done_full = (1 << instance.agents) - 1
        self._state_card = pos_code_card << (self._n_edges + instance.agents)

    # --- packing ---------------------------------------------------------

    def pack(self, positions, bits: int, dones: int) -> int:
        code = 0
        mult = 1
        for v in positions:
            code += (v - 1) * mult
            mult *= self._m
        return ((dones << self._n_edges) | bits) * self._pos_card + code

    def unpack(self, state: int) -> tuple[tuple[int, ...], int, int]:
        high, code = divmod(state, self._pos_card)
        dones, bits = divmod(high, 1 << self._n_edges)
        positions = []
        for _ in range(self.agent_count):
            code, p = divmod(code, self._m)
            positions.append(p + 1)
        return tuple(positions), bits, dones

    def _check_state(self, state: int) -> None:
        if not 0 <= state < self._state_card:
            raise ValueError(f"state id {state} outside [0, {self._state_card})")

    # --- dynamics ----------------------------------------------------------

    def step(self, state, action):
        action = tuple(action)
        self._check_state(state)
        self.check_action(action)
        positions, bits, dones = self.unpack(state)
        if dones == self._done_full:
            return state, self._observe(positions, bits), 0.0
        pos = list(positions)
        reward = 0.0
        for i in range(self.agent_count):
            if dones >> i & 1:
                continue
            a = action[i]
            if a == WAIT:
                continue
            mv = self._move[pos[i]][a]
            if mv is None:
                continue
            target, eidx = mv
            bit = self._stoch_bit.get(eidx)
            if bit is not None and bits >> bit & 1:
                continue
            pos[i] = target
            reward -= self._weights[eidx]
        new_dones = dones
        for i in range(self.agent_count):
            if not (new_dones >> i & 1) and pos[i] == self._goals[i]:
                new_dones |= 1 << i
                reward += GOAL_REWARD
        return self.pack(pos, bits, new_dones), self._observe(pos, bits), reward

    def transition_only(self, state, action):
        action = tuple(action)
        self._check_state(state)
        positions, bits, dones = self.unpack(state)
        if dones == self._done_full:
            return state, 0.0
        pos = list(positions)
        reward = 0.0
        for i in range(self.agent_count):
            if dones >> i & 1:
                continue
            a = action[i]
            if a == WAIT:
                continue
            mv = self._move[pos[i]][a]
            if mv is None:
                continue
            target, eidx = mv
            bit = self._stoch_bit.get(eidx)
            if bit is not None and bits >> bit & 1:
                continue
            pos[i] = target
            reward -= self._weights[eidx]
        new_dones = dones
        for i in range(self.agent_count):
            if not (new_dones >> i & 1) and pos[i] == self._goals[i]:
                new_dones |= 1 << i
                reward += GOAL_REWARD
        return self.pack(pos, bits, new_dones), reward

    def _observe(self, positions, bits: int) -> tuple[int, ...]:
        code = 0
        mult = 1
        for v in positions:
            code += (v - 1) * mult
            mult *= self._m
        base = code * _OBS_MASK_RADIX
        obs = []
        for i in range(self.agent_count):
            mask = 0
            for slot, bit in enumerate(self._incident[positions[i]]):
                if bits >> bit & 1:
                    mask |= 1 << slot
            obs.append(base + mask)
        return tuple(obs)

    def initial_belief(self):
        pairs = []
        for bits in range(1 << self._n_edges):
            w = Fraction(1)
            for bit, p in enumerate(self.instance.block_probs):
                w *= p if bits >> bit & 1 else 1 - p
                if w == 0:
                    break
            if w > 0:
                pairs.append((self.pack(self.instance.starts, bits, 0), w))
        return SupportBelief.from_pairs(pairs)

    def is_terminal(self, state):
        self._check_state(state)
        return state // (self._pos_card << self._n_edges) == self._done_full

    def reward_bounds(self):
        worst_move = max(self._weights) if self._weights else 0
        return (-float(worst_move) * self.agent_count, GOAL_REWARD * self.agent_count)

    # --- reporting ---------------------------------------------------------

    def sizing_report(self) -> dict:
        env_states = self._pos_card * (1 << self._n_edges)
        return {
            "family": "mactp",
            "agents": self.agent_count,
            "grid_size": self.instance.grid_size,
            "stochastic_edges": self._n_edges,
            "env_state_count": env_states,
            "state_count_with_flags": env_states << self.agent_count,
            "belief_support": len(self.initial_belief()),
            "action_space_sizes": list(self.action_space_sizes),
            "observation_space_bound": self.observation_space_sizes[0],
        }

    def descriptor(self) -> dict:
        inst = self.instance
        return {
            "family": "mactp",
            "format": 1,
            "prng": PRNG_NAME,
            "grid_size": inst.grid_size,
            "agents": inst.agents,
            "weights": list(inst.weights),
            "stochastic": list(inst.stochastic),
            "block_probs": [f"{p.numerator}/{p.denominator}" for p in inst.block_probs],
            "goals": list(inst.goals),
            "starts": list(inst.starts),
            "gamma": inst.gamma,
            "seed": inst.seed,
        }

    @classmethod
    def from_descriptor(cls, doc: dict) -> "MactpModel":
        try:
            inst = MactpInstance(
                grid_size=int(doc["grid_size"]),
                agents=int(doc["agents"]),
                weights=tuple(int(w) for w in doc["weights"]),
                stochastic=tuple(int(e) for e in doc["stochastic"]),
                block_probs=tuple(Fraction(p) for p in doc["block_probs"]),
                goals=tuple(int(g) for g in doc["goals"]),
                starts=tuple(int(s) for s in doc["starts"]),
                gamma=float(doc.get("gamma", 0.95)),
                seed=doc.get("seed"),
            )
        except KeyError as exc:
            raise PolicyFormatError(f"instance descriptor: missing field {exc.args[0]!r}") from None
        return cls(inst)


def mactp_generate(spec: MactpSpec, gamma: float = 0.95) -> MactpModel:
    """Sample an instance from (spec, seed).

    Draw order is fixed and versioned: edge weights in canonical edge order,
    the stochastic edge subset, blockage probabilities (percent points,
    uniform on 10..90) in ascending edge order, then one goal per agent
    uniform over the top of the vertex range.
    """
    spec.validate()
    rng = stream(spec.seed, "mactp-instance")
    n = spec.grid_size
    m = n * n
    edges = grid_edges(n)
    weights = tuple(rng.randint(1, 10) for _ in edges)
    stochastic = tuple(sorted(rng.sample(range(len(edges)), spec.stochastic_edges)))
    probs = tuple(Fraction(rng.randint(10, 90), 100) for _ in stochastic)
    # keep goals off the shared start vertex for degenerate (huge n_e) specs
    lo = max(2, m - spec.stochastic_edges)
    goals = tuple(rng.randint(lo, m) for _ in range(spec.agents))
    instance = MactpInstance(
        grid_size=n,
        agents=spec.agents,
        weights=weights,
        stochastic=stochastic,
        block_probs=probs,
        goals=goals,
        starts=(1,) * spec.agents,
        gamma=gamma,
        seed=spec.seed,
    )
    return MactpModel(instance)
