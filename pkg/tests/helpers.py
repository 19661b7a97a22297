"""Shared fixtures: tiny handcrafted models, random controllers, instance pools."""
from __future__ import annotations

from fractions import Fraction

from detdec import (
    CollectingInstance,
    CollectingModel,
    CollectingSpec,
    Fsc,
    FscNode,
    JointPolicy,
    MactpInstance,
    MactpModel,
    MactpSpec,
    SupportBelief,
    TabularModel,
    collecting_generate,
    mactp_generate,
)
from detdec.rng import SplitMix64


def selfloop_model(reward: float = 1.0, gamma: float = 0.95) -> TabularModel:
    """One state, one agent, one action, constant reward self-loop."""
    return TabularModel(
        agent_count=1,
        action_space_sizes=(1,),
        observation_space_sizes=(1,),
        discount=gamma,
        transitions={(0, (0,)): (0, (0,), reward)},
        belief=SupportBelief.point(0),
    )


def absorbing_model(gamma: float = 0.95) -> TabularModel:
    """Single terminal state."""
    return TabularModel(
        agent_count=1,
        action_space_sizes=(1,),
        observation_space_sizes=(1,),
        discount=gamma,
        transitions={},
        belief=SupportBelief.point(0),
        terminal=frozenset({0}),
    )


def chain_model(gamma: float = 0.95, length: int = 3, goal_reward: float = 500.0) -> TabularModel:
    """Single-agent line graph: states 0..length-1, unit move costs, goal at the end.

    Actions: 0 = left, 1 = right, 2 = wait.  Reaching the last state pays the
    goal reward and the state is absorbing.  Observation mirrors the state.
    """
    last = length - 1
    transitions = {}
    for s in range(length - 1):  # the last state is terminal
        for a in range(3):
            if a == 0:
                s2 = max(0, s - 1)
            elif a == 1:
                s2 = s + 1
            else:
                s2 = s
            r = -1.0 if s2 != s else 0.0
            if s2 == last:
                r += goal_reward
            transitions[(s, (a,))] = (s2, (s2,), r)
    return TabularModel(
        agent_count=1,
        action_space_sizes=(3,),
        observation_space_sizes=(length,),
        discount=gamma,
        transitions=transitions,
        belief=SupportBelief.point(0),
        terminal=frozenset({last}),
    )


def tiny_mactp(agents: int = 1, probs=(Fraction(1, 2),), gamma: float = 0.95) -> MactpModel:
    """Hand-built 2x2 grid instance with explicit blockage probabilities.

    Canonical edges of the 2x2 grid: 0:(1,2) 1:(1,3) 2:(2,4) 3:(3,4); the
    first ``len(probs)`` edges are stochastic.  Goal is vertex 4.
    """
    return MactpModel(
        MactpInstance(
            grid_size=2,
            agents=agents,
            weights=(3, 5, 2, 7),
            stochastic=tuple(range(len(probs))),
            block_probs=tuple(probs),
            goals=(4,) * agents,
            starts=(1,) * agents,
            gamma=gamma,
        )
    )


def tiny_collecting(agents: int = 1, gamma: float = 0.95) -> CollectingModel:
    """Hand-built 2x2 interior, one box: obstacle 5, goal 6, start 9, box at 10."""
    starts = (9,) if agents == 1 else (9, 10)
    domain = (10,) if agents == 1 else ()
    if agents != 1:
        raise ValueError("tiny_collecting is single-agent")
    return CollectingModel(
        CollectingInstance(
            height=2,
            width=2,
            agents=agents,
            boxes=1,
            obstacles=(5,),
            goals=(6,),
            start_cells=starts,
            box_domain=domain,
            gamma=gamma,
        )
    )


def small_instances(count: int = 24, seed: int = 1000):
    """Mixed pool of small generated instances for randomized properties."""
    pool = []
    for k in range(count):
        s = seed + k
        if k % 3 == 0:
            pool.append(mactp_generate(MactpSpec(2, 1 + k % 2, 1 + k % 3, s)))
        elif k % 3 == 1:
            pool.append(mactp_generate(MactpSpec(3, 2, 2 + k % 3, s)))
        else:
            dims = [(3, 2), (2, 3), (3, 3)][k % 3 - 2]
            pool.append(collecting_generate(CollectingSpec(dims[0], dims[1], 1 + k % 2, 1, s)))
    return pool


def observation_pool(model, agent: int, rng: SplitMix64, steps: int = 60) -> list[int]:
    """Local observations reachable by a short random walk (for controller maps)."""
    seen = set()
    belief = model.initial_belief()
    states = [s for s, _ in belief.atoms[: min(4, len(belief))]]
    for s0 in states:
        s = s0
        for _ in range(steps):
            action = tuple(rng.randbelow(k) for k in model.action_space_sizes)
            s, obs, _ = model.step(s, action)
            seen.add(obs[agent])
            if model.is_terminal(s):
                break
    return sorted(seen)


def random_fsc(model, agent: int, rng: SplitMix64, max_nodes: int = 3) -> Fsc:
    pool = observation_pool(model, agent, rng)
    k = 1 + rng.randbelow(max_nodes)
    nodes = []
    for _ in range(k):
        action = rng.randbelow(model.action_space_sizes[agent])
        transitions = {}
        if pool:
            for _ in range(rng.randbelow(min(4, len(pool)) + 1)):
                obs = pool[rng.randbelow(len(pool))]
                transitions[obs] = rng.randbelow(k)
        nodes.append(FscNode(action, transitions, rng.randbelow(k)))
    return Fsc(nodes, rng.randbelow(k))


def random_joint_policy(model, rng: SplitMix64, max_nodes: int = 3) -> JointPolicy:
    return JointPolicy([random_fsc(model, i, rng, max_nodes) for i in range(model.agent_count)])


def random_walk_states(model, rng: SplitMix64, walks: int = 5, steps: int = 30) -> list:
    """States reachable by random walks, always including the initial support."""
    states = list(model.initial_belief().states)
    seen = set(states)
    for _ in range(walks):
        s = states[rng.randbelow(len(states))]
        for _ in range(steps):
            action = tuple(rng.randbelow(k) for k in model.action_space_sizes)
            s, _, _ = model.step(s, action)
            if s not in seen:
                seen.add(s)
                states.append(s)
    return states
