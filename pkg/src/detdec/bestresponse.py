"""Single-agent planning problems derived by freezing the other agents.

When every agent except one runs a fixed deterministic controller, the
remaining agent faces a single-agent problem over *extended states*
``(environment state, other agents' controller nodes, own last local
observation)``.  All three components evolve deterministically, so the
derived problem is itself a deterministic POMDP: the environment step is
deterministic, the others' node updates are driven by their (deterministic)
components of the unique joint observation, and the emitted local
observation is exactly the stored last-observation component.

Two variants share the construction:

* the best-response problem, where the other agents run their controllers;
* the initialization problem, where the other agents' actions come from a
  memoryless default policy of the fully observable relaxation (their node
  components collapse to an empty tuple).

Extended states are interned lazily into dense integer ids; the product
space is far too large to enumerate up front, and interning keeps belief
atoms cheap to hash, order, and compare.
"""
from __future__ import annotations

from typing import NamedTuple

from .fsc import JointPolicy
from .mdp import MdpPolicy, MdpValueTable
from .model import DetDecModel, StateId, SupportBelief, TransitionCache


class ExtState(NamedTuple):
    state: StateId
    other_nodes: tuple[int, ...]
    last_obs: int  # the agent's own latest observation, or the start symbol


class BrDetPomdp:
    """Deterministic single-agent POMDP over interned extended states.

    ``start_obs`` is a distinguished local observation index (one past the
    model's per-agent observation bound) seeding the last-observation slot
    at time 0; it is never emitted by ``step``.
    """

    def __init__(
        self,
        model: DetDecModel,
        agent: int,
        other_controllers: tuple | None,
        default_policy: MdpPolicy | None,
        value_table: MdpValueTable | None = None,
        cache: TransitionCache | None = None,
    ) -> None:
        if not 0 <= agent < model.agent_count:
            raise ValueError(f"agent index {agent} outside [0, {model.agent_count})")
        if (other_controllers is None) == (default_policy is None):
            raise ValueError("exactly one of other_controllers / default_policy is required")
        self.model = model
        self.agent = agent
        self.others = tuple(j for j in range(model.agent_count) if j != agent)
        self._controllers = other_controllers
        self._default_policy = default_policy
        self.value_table = value_table
        self.cache = cache if cache is not None else TransitionCache(model)
        self.action_count = model.action_space_sizes[agent]
        self.obs_bound = model.observation_space_sizes[agent]
        self.start_obs = self.obs_bound
        self.discount = model.discount
        self._ids: dict[ExtState, int] = {}
        self._ext: list[ExtState] = []
        self._step_memo: dict[int, tuple[int, int, float]] = {}

    # --- interning ---------------------------------------------------------

    def intern(self, ext: ExtState) -> int:
        eid = self._ids.get(ext)
        if eid is None:
            eid = len(self._ext)
            self._ids[ext] = eid
            self._ext.append(ext)
        return eid

    def ext(self, eid: int) -> ExtState:
        return self._ext[eid]

    @property
    def interned_count(self) -> int:
        return len(self._ext)

    # --- dynamics ----------------------------------------------------------

    def step(self, eid: int, action: int) -> tuple[int, int, float]:
        """Deterministic extended step: (successor id, local observation, reward)."""
        if not 0 <= action < self.action_count:
            raise ValueError(f"local action {action} outside [0, {self.action_count})")
        key = eid * self.action_count + action
        hit = self._step_memo.get(key)
        if hit is not None:
            return hit
        ext = self._ext[eid]
        if self._controllers is not None:
            joint = [0] * self.model.agent_count
            for j, node in zip(self.others, ext.other_nodes):
                joint[j] = self._controllers[j].nodes[node].action
            joint[self.agent] = action
            joint = tuple(joint)
        else:
            default = self._default_policy.joint_action(ext.state)
            joint = tuple(
                action if j == self.agent else default[j]
                for j in range(self.model.agent_count)
            )
        s2, obs, reward = self.cache.step(ext.state, joint)
        if self._controllers is not None:
            nodes2 = tuple(
                self._controllers[j].advance(node, obs[j])
                for j, node in zip(self.others, ext.other_nodes)
            )
        else:
            nodes2 = ()
        own = obs[self.agent]
        result = (self.intern(ExtState(s2, nodes2, own)), own, reward)
        self._step_memo[key] = result
        return result

    def initial_belief(self) -> SupportBelief:
        """One-to-one lift of the model's initial belief to extended states."""
        if self._controllers is not None:
            nodes0 = tuple(self._controllers[j].initial_node for j in self.others)
        else:
            nodes0 = ()
        pairs = [
            (self.intern(ExtState(state, nodes0, self.start_obs)), weight)
            for state, weight in self.model.initial_belief()
        ]
        return SupportBelief.from_pairs(pairs)

    def is_terminal(self, eid: int) -> bool:
        return self.model.is_terminal(self._ext[eid].state)

    def state_value_hint(self, eid: int) -> float | None:
        """Fully-observable relaxation value of the underlying state, if known."""
        if self.value_table is None:
            return None
        return self.value_table.value(self._ext[eid].state)

    def reward_bounds(self) -> tuple[float, float]:
        return self.model.reward_bounds()


def build_br_detpomdp(
    model: DetDecModel,
    policy: JointPolicy,
    agent: int,
    value_table: MdpValueTable | None = None,
    cache: TransitionCache | None = None,
) -> BrDetPomdp:
    """Best-response problem for ``agent`` against the policy's other controllers."""
    if policy.agent_count != model.agent_count:
        raise ValueError(
            f"policy has {policy.agent_count} controllers, model has {model.agent_count} agents"
        )
    return BrDetPomdp(
        model,
        agent,
        other_controllers=policy.controllers,
        default_policy=None,
        value_table=value_table,
        cache=cache,
    )


def build_init_detpomdp(
    model: DetDecModel,
    agent: int,
    pi_mdp: MdpPolicy,
    value_table: MdpValueTable | None = None,
    cache: TransitionCache | None = None,
) -> BrDetPomdp:
    """Initialization problem: the other agents play the default MDP policy.

    The default policy is memoryless, so extended states carry no node
    components; everything else matches the best-response construction.
    """
    return BrDetPomdp(
        model,
        agent,
        other_controllers=None,
        default_policy=pi_mdp,
        value_table=value_table if value_table is not None else pi_mdp.table,
        cache=cache,
    )


def initial_ext_belief(problem: BrDetPomdp) -> SupportBelief:
    """Initial belief of a derived single-agent problem (module-level alias)."""
    return problem.initial_belief()
