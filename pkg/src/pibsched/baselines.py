"""Reference scheduling policies compared against the UCB gate.

Every ``decide`` call returns either a ``SuperArm`` that passes
``check_constraints`` for the slot or an ``Infeasible`` carrying the arm it
tried.  Fixed-camera policies transmit the ``min(K, k_max)`` highest-priority
cameras.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .scheduler.bandit import AgentTables
from .scheduler.constraints import SuperArm, Violation, check_constraints
from .scheduler.engine import DEFAULT_ALPHA, candidate_arms, ucb_actions
from .scheduler.network import OFF, Network, SlotState, profile_super_arm, super_arm_profile

REJECTION_TRIES = 200


class PolicyKind(str, Enum):
    UCB = "ucb"
    AVG_OPT = "avg-opt"
    STOCHASTIC = "stochastic"
    NON_COLLAB = "non-collab"
    NON_RELAY = "non-relay"


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    fixed_server: int = 0  # NonCollaboration's fusion server
    agents: AgentTables | None = None  # UCB gate state
    alpha: float = DEFAULT_ALPHA

    @classmethod
    def parse(cls, name: str, **kw) -> "Policy":
        return cls(PolicyKind(name), **kw)


@dataclass(frozen=True)
class Infeasible:
    attempted: SuperArm | None
    violations: tuple[Violation, ...] = ()


@dataclass(frozen=True)
class DecisionState:
    """What a policy sees before transmitting.

    ``c2e`` is the planning estimate of camera-to-edge delay; the realised
    slot delay is only known after transmission, so the default is the
    mean-channel delay.
    """

    net: Network
    slot: SlotState
    c2e: np.ndarray | None = None

    @property
    def planned_c2e(self) -> np.ndarray:
        return self.net.mean_c2e if self.c2e is None else self.c2e


def _violations(state: DecisionState, sa: SuperArm) -> list[Violation]:
    net = state.net
    return check_constraints(sa, net.constraints, net.path_delays(state.planned_c2e), state.slot.loads)


def _checked(state: DecisionState, sa: SuperArm):
    v = _violations(state, sa)
    return sa if not v else Infeasible(sa, tuple(v))


def transmitting_cameras(net: Network) -> list[int]:
    return sorted(net.order[: min(net.n_cameras, net.constraints.k_max)])


def mean_path_throughput(state: DecisionState, sa: SuperArm) -> float:
    """Average over paths of payload bits per second of planned camera-to-fusion time."""
    net, c2e = state.net, state.planned_c2e
    vals = []
    for k, s, s0 in sa.paths:
        t = c2e[k, s] + net.e2e[s, s0]
        vals.append(net.data_bits[k] / t if t > 0 else math.inf)
    return float(np.mean(vals)) if vals else 0.0


def _avg_opt(state: DecisionState):
    net = state.net
    cams = transmitting_cameras(net)
    best, best_v, first = None, -math.inf, None
    for s0 in range(net.n_servers):
        for edges in itertools.product(range(net.n_servers), repeat=len(cams)):
            sa = SuperArm(tuple((k, s, s0) for k, s in zip(cams, edges)), s0)
            first = first or sa
            if _violations(state, sa):
                continue
            v = mean_path_throughput(state, sa)
            if v > best_v:
                best, best_v = sa, v
    if best is None:
        return Infeasible(first, tuple(_violations(state, first)) if first else ())
    return best


def _stochastic(state: DecisionState, rng: np.random.Generator):
    """Uniform draw over feasible super arms: rejection first, enumeration as fallback."""
    net = state.net
    k, s = net.n_cameras, net.n_servers
    last = None
    for _ in range(REJECTION_TRIES):
        s0 = int(rng.integers(s))
        acts = tuple(int(a) - 1 for a in rng.integers(s + 1, size=k))
        sa = profile_super_arm(s0, acts)
        last = sa
        if not _violations(state, sa):
            return sa
    feasible = [profile_super_arm(s0, acts) for s0, acts in net.profiles()]
    feasible = [sa for sa in feasible if not _violations(state, sa)]
    if not feasible:
        return Infeasible(last, tuple(_violations(state, last)))
    return feasible[int(rng.integers(len(feasible)))]


def _direct_to(state: DecisionState, s0: int):
    cams = transmitting_cameras(state.net)
    return _checked(state, SuperArm(tuple((k, s0, s0) for k in cams), s0))


def decide(policy: Policy, state: DecisionState, rng: np.random.Generator):
    net = state.net
    kind = policy.kind
    if kind is PolicyKind.UCB:
        if policy.agents is None:
            raise ValueError("UCB policy needs agent tables")
        s0 = net.fusion_server
        acts = ucb_actions(policy.agents, net, s0, state.slot.t, policy.alpha,
                           candidate_arms(net, s0))
        return _checked(state, profile_super_arm(s0, acts))
    if kind is PolicyKind.AVG_OPT:
        return _avg_opt(state)
    if kind is PolicyKind.STOCHASTIC:
        return _stochastic(state, rng)
    if kind is PolicyKind.NON_COLLAB:
        return _direct_to(state, policy.fixed_server)
    if kind is PolicyKind.NON_RELAY:
        loads = np.asarray(state.slot.loads[: net.n_servers])
        return _direct_to(state, int(np.argmin(loads)))
    raise ValueError(f"unknown policy {kind}")


def as_chooser(policy: Policy, net: Network):
    """Adapter for ``run_experiment``: infeasible decisions still play the attempted arm."""

    def choose(slot: SlotState, rng: np.random.Generator):
        out = decide(policy, DecisionState(net, slot), rng)
        sa = out.attempted if isinstance(out, Infeasible) else out
        if sa is None:
            return net.fusion_server, (OFF,) * net.n_cameras
        return super_arm_profile(sa, net.n_cameras)

    return choose
