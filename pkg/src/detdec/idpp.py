"""Iterative best-response driver.

The driver first builds one controller per agent against the default policy
of the fully observable relaxation (heuristic initialization), then loops:
pick the next agent round-robin, freeze everyone else, solve that agent's
best-response problem, and *keep the new controller only if the exactly
evaluated joint value improves* by more than the acceptance margin.  The
loop stops after a full round with no accepted update, which certifies a
Nash equilibrium up to the margin plus the subsolver's bound gap, or after
a round cap.

Accept/converge decisions use exact evaluation (deterministic models make
it cheap: one closed-form rollout per initial atom), never Monte Carlo, so
acceptance cannot oscillate on sampling noise.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .bestresponse import build_br_detpomdp, build_init_detpomdp
from .detpomdp import SolveParams, solve
from .evaluation import exact_value
from .fsc import Fsc, JointPolicy
from .mdp import DEFAULT_STATE_CAP, DEFAULT_TOL, MdpValueTable, default_policy, value_iteration
from .model import DetDecModel, TransitionCache
from .rng import stream


@dataclass
class IdppParams:
    value_tolerance: float = 1e-6   # acceptance margin and convergence threshold
    max_rounds: int = 20
    solve: SolveParams = field(default_factory=SolveParams)
    agent_order: str = "ascending"  # or "random" (seeded shuffle per round)
    seed: int = 0
    mdp_tol: float = DEFAULT_TOL
    state_cap: int = DEFAULT_STATE_CAP
    eval_episodes: int = 100_000    # reporting only; decisions are exact
    eval_horizon: int = 100

    def __post_init__(self) -> None:
        if self.value_tolerance <= 0:
            raise ValueError("value_tolerance must be positive")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        if self.agent_order not in ("ascending", "random"):
            raise ValueError(f"unknown agent_order {self.agent_order!r}")


@dataclass
class IterationRecord:
    round: int
    agent: int
    pre_value: float
    post_value: float
    accepted: bool
    solver_status: str
    solver_lb: float
    solver_expansions: int
    seconds: float


@dataclass
class InitRecord:
    agent: int
    solver_status: str
    solver_lb: float
    solver_expansions: int
    fsc_size: int
    seconds: float


@dataclass
class InitResult:
    policy: JointPolicy
    records: list[InitRecord]
    value: float | None = None

    @property
    def converged(self) -> bool:
        return all(r.solver_status == "converged" for r in self.records)


@dataclass
class RunResult:
    policy: JointPolicy
    history: list[IterationRecord]
    init: InitResult
    final_value: float
    converged: bool           # a full round passed with no accepted update
    rounds_completed: int
    budget_hit: bool          # any solver call stopped on a budget

    @property
    def init_value(self) -> float:
        return self.init.value


def _prepare_mdp(model: DetDecModel, params: IdppParams):
    table = value_iteration(model, tol=params.mdp_tol, state_cap=params.state_cap)
    return table, default_policy(table, model)


def heuristic_init(
    model: DetDecModel,
    params: IdppParams | None = None,
    table: MdpValueTable | None = None,
    cache: TransitionCache | None = None,
) -> InitResult:
    """Per-agent controllers planned against the default relaxation policy."""
    if params is None:
        params = IdppParams()
    if table is None:
        table, pi_mdp = _prepare_mdp(model, params)
    else:
        pi_mdp = default_policy(table, model)
    if cache is None:
        cache = TransitionCache(model)
    controllers: list[Fsc] = []
    records: list[InitRecord] = []
    for agent in range(model.agent_count):
        t0 = time.perf_counter()
        problem = build_init_detpomdp(model, agent, pi_mdp, value_table=table, cache=cache)
        result = solve(problem, problem.initial_belief(), params.solve)
        controllers.append(result.fsc)
        records.append(
            InitRecord(
                agent=agent,
                solver_status=result.status,
                solver_lb=result.lower_bound,
                solver_expansions=result.expansions,
                fsc_size=result.fsc.size,
                seconds=time.perf_counter() - t0,
            )
        )
    policy = JointPolicy(controllers)
    return InitResult(policy=policy, records=records, value=exact_value(model, policy))


def run(
    model: DetDecModel,
    params: IdppParams | None = None,
    table: MdpValueTable | None = None,
) -> RunResult:
    """Heuristic initialization followed by the iterative best-response loop."""
    if params is None:
        params = IdppParams()
    if table is None:
        table, _ = _prepare_mdp(model, params)
    cache = TransitionCache(model)
    init = heuristic_init(model, params, table=table, cache=cache)
    policy = init.policy
    value = init.value
    history: list[IterationRecord] = []
    budget_hit = any(r.solver_status != "converged" for r in init.records)
    order_rng = stream(params.seed, "agent-order") if params.agent_order == "random" else None
    converged = False
    rounds = 0
    for rnd in range(1, params.max_rounds + 1):
        rounds = rnd
        agents = list(range(model.agent_count))
        if order_rng is not None:
            order_rng.shuffle(agents)
        accepted_this_round = False
        for agent in agents:
            t0 = time.perf_counter()
            try:
                problem = build_br_detpomdp(model, policy, agent, value_table=table, cache=cache)
                result = solve(problem, problem.initial_belief(), params.solve)
            except Exception as exc:  # keep the incumbent controller, note the failure
                history.append(
                    IterationRecord(
                        round=rnd,
                        agent=agent,
                        pre_value=value,
                        post_value=value,
                        accepted=False,
                        solver_status=f"error:{type(exc).__name__}",
                        solver_lb=float("nan"),
                        solver_expansions=0,
                        seconds=time.perf_counter() - t0,
                    )
                )
                continue
            candidate = policy.replace(agent, result.fsc)
            post = exact_value(model, candidate)
            accepted = post > value + params.value_tolerance
            history.append(
                IterationRecord(
                    round=rnd,
                    agent=agent,
                    pre_value=value,
                    post_value=post,
                    accepted=accepted,
                    solver_status=result.status,
                    solver_lb=result.lower_bound,
                    solver_expansions=result.expansions,
                    seconds=time.perf_counter() - t0,
                )
            )
            budget_hit = budget_hit or not result.converged
            if accepted:
                policy = candidate
                value = post
                accepted_this_round = True
        if not accepted_this_round:
            converged = True
            break
    return RunResult(
        policy=policy,
        history=history,
        init=init,
        final_value=value,
        converged=converged,
        rounds_completed=rounds,
        budget_hit=budget_hit,
    )


def nash_check(
    model: DetDecModel,
    policy: JointPolicy,
    params: IdppParams | None = None,
    table: MdpValueTable | None = None,
) -> list[float]:
    """Per-agent improvement gaps: best-response certified value minus joint value.

    At an equilibrium reported by :func:`run`, every gap is at most
    ``value_tolerance`` plus the subsolver's bound gap.
    """
    if params is None:
        params = IdppParams()
    if table is None:
        table, _ = _prepare_mdp(model, params)
    cache = TransitionCache(model)
    joint = exact_value(model, policy)
    gaps = []
    for agent in range(model.agent_count):
        problem = build_br_detpomdp(model, policy, agent, value_table=table, cache=cache)
        result = solve(problem, problem.initial_belief(), params.solve)
        gaps.append(result.lower_bound - joint)
    return gaps
