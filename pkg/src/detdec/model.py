"""Core abstraction: deterministic decentralized decision processes.

Models are generative: dynamics are computed on demand by a pure ``step``
function over packed integer states, never materialized as transition
matrices (benchmark instances reach millions of states).  The only
probabilistic object in the whole system is the initial belief, held as an
explicit weighted support.
"""
from __future__ import annotations

import abc
import itertools
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator

StateId = int
JointAction = tuple[int, ...]
JointObservation = tuple[int, ...]

_SUM_TOL = Fraction(1, 10**9)


class SupportBelief:
    """A distribution over states represented by its finite support.

    Weights are exact rationals.  Posteriors produced by deterministic
    filtering are ratios of sums of the initial weights, so rational
    arithmetic keeps structurally equal beliefs *identical* (safe to use as
    dict keys for memoization) with no rounding tolerance.

    Atoms are stored sorted ascending by state id with strictly positive
    weights, so equal beliefs have identical representations.
    """

    __slots__ = ("atoms", "float_weights")

    def __init__(self, atoms: Iterable[tuple[StateId, Fraction]]) -> None:
        atoms = tuple(atoms)
        if not atoms:
            raise ValueError("belief support must be non-empty")
        prev = None
        total = Fraction(0)
        for state, weight in atoms:
            if prev is not None and state <= prev:
                raise ValueError("belief atoms must be strictly ascending by state id")
            prev = state
            if weight <= 0:
                raise ValueError(f"belief weight for state {state} is not positive")
            total += weight
        if abs(total - 1) > _SUM_TOL:
            raise ValueError(f"belief weights sum to {float(total)!r}, expected 1")
        self.atoms = atoms
        self.float_weights = tuple(float(w) for _, w in atoms)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[StateId, object]]) -> "SupportBelief":
        """Merge duplicate states, drop zero weights, normalize exactly, sort."""
        acc: dict[StateId, Fraction] = {}
        for state, weight in pairs:
            w = weight if isinstance(weight, Fraction) else Fraction(weight)
            if w < 0:
                raise ValueError(f"negative weight for state {state}")
            if w == 0:
                continue
            acc[state] = acc.get(state, Fraction(0)) + w
        if not acc:
            raise ValueError("belief support must be non-empty")
        total = sum(acc.values())
        return cls(sorted((s, w / total) for s, w in acc.items()))

    @classmethod
    def point(cls, state: StateId) -> "SupportBelief":
        return cls(((state, Fraction(1)),))

    @property
    def states(self) -> tuple[StateId, ...]:
        return tuple(s for s, _ in self.atoms)

    @property
    def weights(self) -> tuple[Fraction, ...]:
        return tuple(w for _, w in self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self) -> Iterator[tuple[StateId, Fraction]]:
        return iter(self.atoms)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SupportBelief) and self.atoms == other.atoms

    def __hash__(self) -> int:
        return hash(self.atoms)

    def __repr__(self) -> str:
        inner = ", ".join(f"{s}:{float(w):.4g}" for s, w in self.atoms[:4])
        if len(self.atoms) > 4:
            inner += f", ... ({len(self.atoms)} atoms)"
        return f"SupportBelief({inner})"


@lru_cache(maxsize=None)
def enumerate_joint_actions(sizes: tuple[int, ...]) -> tuple[JointAction, ...]:
    """All joint actions in lexicographic order (agent 0 most significant).

    The position of a joint action in this tuple is its *joint action
    index*; tie-breaking rules elsewhere refer to this ordering.
    """
    return tuple(itertools.product(*(range(k) for k in sizes)))


def joint_action_index(sizes: tuple[int, ...], action: JointAction) -> int:
    idx = 0
    for k, a in zip(sizes, action):
        idx = idx * k + a
    return idx


class DetDecModel(abc.ABC):
    """A decentralized decision process with deterministic dynamics.

    Contract:
      * ``step`` is a pure function: identical ``(state, action)`` always
        yields an identical ``(successor, joint observation, reward)``
        triple, and the instance holds no mutable internal state.
      * Terminal states are absorbing: ``step`` returns the same state with
        reward 0 under every joint action.
      * Uncertainty exists only in ``initial_belief``.
    """

    agent_count: int
    action_space_sizes: tuple[int, ...]
    observation_space_sizes: tuple[int, ...]
    discount: float

    @abc.abstractmethod
    def step(self, state: StateId, action: JointAction) -> tuple[StateId, JointObservation, float]:
        """Deterministic transition: unique successor, joint observation, reward."""

    @abc.abstractmethod
    def initial_belief(self) -> SupportBelief:
        """Canonical normalized support belief over initial states."""

    @abc.abstractmethod
    def is_terminal(self, state: StateId) -> bool:
        """True iff the state is absorbing with zero reward forever."""

    @abc.abstractmethod
    def reward_bounds(self) -> tuple[float, float]:
        """Inclusive bounds on the one-step reward over reachable (s, a)."""

    def transition_only(self, state: StateId, action: JointAction) -> tuple[StateId, float]:
        """(successor, reward) without the observation.

        Hot path for sweeps that never look at observations; environments
        override it to skip observation rendering.
        """
        s2, _, r = self.step(state, action)
        return s2, r

    def descriptor(self) -> dict:
        """JSON-serializable document the instance can be rebuilt from."""
        raise NotImplementedError(f"{type(self).__name__} has no descriptor form")

    def sizing_report(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} has no sizing report")

    @property
    def num_joint_actions(self) -> int:
        n = 1
        for k in self.action_space_sizes:
            n *= k
        return n

    def joint_actions(self) -> tuple[JointAction, ...]:
        return enumerate_joint_actions(self.action_space_sizes)

    def check_action(self, action: JointAction) -> None:
        if len(action) != self.agent_count:
            raise ValueError(
                f"joint action has {len(action)} components, model has {self.agent_count} agents"
            )
        for i, (a, k) in enumerate(zip(action, self.action_space_sizes)):
            if not 0 <= a < k:
                raise ValueError(f"action {a} for agent {i} outside [0, {k})")


class TransitionCache:
    """Memo around ``model.step`` keyed on ``(state, joint action)``.

    Planners share one of these per task so repeated belief expansions do
    not recompute dynamics; the model itself stays pure and stateless.
    """

    __slots__ = ("model", "_memo")

    def __init__(self, model: DetDecModel) -> None:
        self.model = model
        self._memo: dict[tuple[StateId, JointAction], tuple[StateId, JointObservation, float]] = {}

    def step(self, state: StateId, action: JointAction) -> tuple[StateId, JointObservation, float]:
        key = (state, action)
        hit = self._memo.get(key)
        if hit is None:
            hit = self.model.step(state, action)
            self._memo[key] = hit
        return hit

    def __len__(self) -> int:
        return len(self._memo)


class TabularModel(DetDecModel):
    """Dict-backed model for small handcrafted problems (mainly tests/demos).

    ``transitions`` maps ``(state, joint action)`` to
    ``(successor, joint observation, reward)`` and must cover every pair
    reachable from the initial belief's support.
    """

    def __init__(
        self,
        agent_count: int,
        action_space_sizes: tuple[int, ...],
        observation_space_sizes: tuple[int, ...],
        discount: float,
        transitions: dict[tuple[StateId, JointAction], tuple[StateId, JointObservation, float]],
        belief: SupportBelief,
        terminal: frozenset[StateId] = frozenset(),
    ) -> None:
        if not 0 < discount < 1:
            raise ValueError(f"discount {discount} outside (0, 1)")
        self.agent_count = agent_count
        self.action_space_sizes = tuple(action_space_sizes)
        self.observation_space_sizes = tuple(observation_space_sizes)
        self.discount = discount
        self._transitions = dict(transitions)
        self._belief = belief
        self._terminal = frozenset(terminal)
        rewards = [r for _, _, r in transitions.values()]
        self._bounds = (min(rewards, default=0.0), max(rewards, default=0.0))
        # terminal states self-loop at reward 0 even if the table omits them
        zero_obs = tuple(0 for _ in range(agent_count))
        for s in self._terminal:
            for a in enumerate_joint_actions(self.action_space_sizes):
                self._transitions.setdefault((s, a), (s, zero_obs, 0.0))

    def step(self, state, action):
        self.check_action(tuple(action))
        try:
            return self._transitions[(state, tuple(action))]
        except KeyError:
            raise ValueError(f"no transition for state {state}, action {tuple(action)}") from None

    def initial_belief(self):
        return self._belief

    def is_terminal(self, state):
        return state in self._terminal

    def reward_bounds(self):
        lo, hi = self._bounds
        return (min(lo, 0.0), max(hi, 0.0))
