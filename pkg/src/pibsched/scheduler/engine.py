"""Slot stepping, regret accounting and the experiment loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bandit import AgentTables, RoundAudit, communication_round, kappa_arm
from .constraints import SuperArm, Violation, check_constraints, zeroed_cameras
from .network import OFF, Environment, Network, SlotState, profile_super_arm

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 1.0
DEFAULT_CADENCE = 50


@dataclass(frozen=True)
class SlotOutcome:
    super_arm: SuperArm
    actions: tuple[int, ...]  # per-camera edge server or OFF
    rewards: np.ndarray  # [K] clamped incremental MODA gains
    violations: tuple[Violation, ...]
    fused: tuple[int, ...]  # cameras whose features reached fusion, in priority order
    latency_s: float  # mean total latency over transmitting cameras, nan if none


def new_agents(net: Network) -> AgentTables:
    return AgentTables(net.n_cameras, net.n_arms)


def candidate_arms(net: Network, s0: int) -> np.ndarray:
    """[K, 1 + S] arm ids: the off arm, then (s, s0) for each active edge server s."""
    rows = []
    for k in range(net.n_cameras):
        rows.append([net.arm_index(k, OFF, s0)] + [net.arm_index(k, s, s0) for s in range(net.n_servers)])
    return np.array(rows)


def ucb_actions(agents: AgentTables, net: Network, s0: int, t: int,
                alpha: float = DEFAULT_ALPHA, cand: np.ndarray | None = None) -> tuple[int, ...]:
    """Each agent's UCB choice among its candidate arms, as per-camera edge or OFF."""
    if cand is None:
        cand = candidate_arms(net, s0)
    col = agents.select(cand, t, alpha)
    return tuple(int(c) - 1 for c in col)


def score_super_arm(net: Network, sa: SuperArm, slot: SlotState):
    """Rewards, violations, fused cameras and mean latency of any super arm on one slot.

    Cameras zeroed by a violation are dropped from fusion; the rest are
    added in priority order and each earns its clamped MODA increment.
    """
    violations = tuple(check_constraints(sa, net.constraints, net.path_delays(slot.c2e), slot.loads))
    dead = zeroed_cameras(sa, violations) if violations else set()
    selected = {k for k, _, _ in sa.paths}
    rewards = np.zeros(net.n_cameras)
    n_ped = len(net.world.pedestrians)
    covered, fp, m_prev = 0, 0, 0.0
    fused = []
    for k in net.order:
        if k not in selected or k in dead:
            continue
        covered |= slot.masks[k]
        fp += slot.fp[k]
        m = 1.0 - (n_ped - covered.bit_count() + fp) / n_ped
        rewards[k] = min(max(m - m_prev, 0.0), 1.0)
        m_prev = m
        fused.append(k)
    lat = [slot.c2e[k, s] + net.e2e[s, s0] + net.inference_s[s0] for k, s, s0 in sa.paths]
    latency = float(np.mean(lat)) if lat else math.nan
    return rewards, violations, tuple(fused), latency


def evaluate_slot(net: Network, s0: int, actions: tuple[int, ...], slot: SlotState) -> SlotOutcome:
    """Score a profile (fusion server, per-camera edge or OFF) against one slot."""
    sa = profile_super_arm(s0, actions)
    rewards, violations, fused, latency = score_super_arm(net, sa, slot)
    return SlotOutcome(sa, actions, rewards, violations, fused, latency)


def step(agents: AgentTables, net: Network, slot: SlotState, alpha: float = DEFAULT_ALPHA,
         cand: np.ndarray | None = None) -> SlotOutcome:
    """One gate-mechanism slot: choose arms by UCB, score, update local tables."""
    s0 = net.fusion_server
    if cand is None:
        cand = candidate_arms(net, s0)
    actions = ucb_actions(agents, net, s0, slot.t, alpha, cand)
    out = evaluate_slot(net, s0, actions, slot)
    agents.update(cand[np.arange(net.n_cameras), np.array(actions) + 1], out.rewards)
    return out


# -- oracle ------------------------------------------------------------------------

MAX_ENUMERATION = 1_000_000


class RewardTable:
    """Cached expected reward per profile; exact when possible, else Monte Carlo."""

    def __init__(self, net: Network, mc_trials: int = 500, seed: int = 0):
        self.net = net
        self.exact = not net.has_random_extras()
        self.mc_trials = mc_trials
        self.seed = seed
        self._cache: dict = {}

    def __call__(self, s0: int, actions: tuple[int, ...]) -> float:
        key = (s0, actions)
        v = self._cache.get(key)
        if v is None:
            v = self.net.expected_reward(s0, actions) if self.exact else self._mc(s0, actions)
            self._cache[key] = v
        return v

    def _mc(self, s0, actions) -> float:
        # same seed for every profile: common random numbers across profiles
        env = Environment(self.net, self.seed, block=self.mc_trials)
        total = 0.0
        for _ in range(self.mc_trials):
            total += float(evaluate_slot(self.net, s0, actions, env.next()).rewards.sum())
        return total / self.mc_trials


def oracle_best(net: Network, table: RewardTable | None = None) -> tuple[SuperArm, float]:
    """Exhaustive search over every profile; returns the best super arm and its value.

    Ties go to the first profile in enumeration order.
    """
    if net.n_profiles() > MAX_ENUMERATION:
        raise ValueError(f"{net.n_profiles()} profiles exceed the enumeration cap")
    table = table or RewardTable(net)
    best, best_v = None, -math.inf
    for s0, acts in net.profiles():
        v = table(s0, acts)
        if v > best_v:
            best, best_v = (s0, acts), v
    return profile_super_arm(*best), best_v


# -- experiment loop --------------------------------------------------------------


@dataclass
class RegretLog:
    reward: np.ndarray  # realized summed reward per slot
    expected_reward: np.ndarray  # expected reward of the played profile
    oracle_reward: float
    cum_regret: np.ndarray
    latency_s: np.ndarray
    sigma_r2: float
    a_n: float
    kappa_arm: int
    audits: list[RoundAudit] = field(default_factory=list)
    agents: AgentTables | None = None
    profiles: list | None = None

    @property
    def horizon(self) -> int:
        return len(self.reward)

    def normalized(self, t: np.ndarray) -> np.ndarray:
        """R(t) / sqrt(t ln t) at 1-based slots ``t``."""
        t = np.asarray(t, dtype=float)
        return self.cum_regret[t.astype(int) - 1] / np.sqrt(t * np.log(t))

    def c_star(self, t_min: int = 1000) -> float:
        ts = checkpoints(t_min, self.horizon)
        return float(np.max(self.normalized(ts))) if len(ts) else math.nan

    def theorem_bound(self, t: float | None = None) -> float:
        """Closed-form regret envelope evaluated with the measured constants."""
        t = float(t or self.horizon)
        k, a = self.kappa_arm, max(self.a_n, 1e-12)
        lt = math.log(t)
        return ((math.sqrt(2 * self.sigma_r2) + 2 * k * math.sqrt(2 / a)) * k * math.sqrt(t * lt)
                + 2 * k / 3 * lt - 2 * k * math.sqrt(2 * lt / a))


def checkpoints(t_min: int, t_max: int, per_decade: int = 20) -> np.ndarray:
    if t_max < max(t_min, 2):
        return np.array([], dtype=int)
    lo = max(t_min, 2)
    n = max(2, int(per_decade * math.log10(t_max / lo)) + 1)
    return np.unique(np.round(np.geomspace(lo, t_max, n)).astype(int))


Chooser = Callable[[SlotState, np.random.Generator], tuple[int, tuple[int, ...]]]


def run_experiment(net: Network, horizon: int, seed: int, alpha: float = DEFAULT_ALPHA,
                   cadence: int = DEFAULT_CADENCE, chooser: Chooser | None = None,
                   table: RewardTable | None = None, keep_profiles: bool = False) -> RegretLog:
    """Simulate ``horizon`` slots.

    With no ``chooser`` the UCB gate runs and aggregation rounds fire every
    ``cadence`` slots.  A ``chooser`` (a baseline) maps each slot to a
    profile instead and no learning happens.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    env = Environment(net, seed)
    table = table or RewardTable(net)
    _, oracle_v = oracle_best(net, table)
    policy_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(4)[3])
    agents = new_agents(net)
    s0 = net.fusion_server
    cand = candidate_arms(net, s0)
    rows = np.arange(net.n_cameras)
    sq = np.zeros(net.n_arms)
    reward = np.empty(horizon)
    expected = np.empty(horizon)
    latency = np.empty(horizon)
    audits: list[RoundAudit] = []
    played = [] if keep_profiles else None
    for i in range(horizon):
        slot = env.next()
        if chooser is None:
            acts = ucb_actions(agents, net, s0, slot.t, alpha, cand)
            out = evaluate_slot(net, s0, acts, slot)
            arms = cand[rows, np.array(acts) + 1]
            agents.update(arms, out.rewards)
            sq[arms] += out.rewards ** 2
            if cadence and slot.t % cadence == 0:
                audits.append(communication_round(agents))
            prof = (s0, acts)
        else:
            prof = chooser(slot, policy_rng)
            out = evaluate_slot(net, prof[0], prof[1], slot)
        reward[i] = out.rewards.sum()
        expected[i] = table(*prof)
        latency[i] = out.latency_s
        if played is not None:
            played.append(prof)
    cum = np.cumsum(oracle_v - expected)
    if chooser is None:
        counts, rsum = agents.totals()
        pulled = counts > 0
        var = np.zeros_like(sq)
        var[pulled] = sq[pulled] / counts[pulled] - (rsum[pulled] / counts[pulled]) ** 2
        sigma_r2 = float(max(var.max(), 0.0))
        a_n = float(counts.max() / horizon)
    else:
        sigma_r2 = float(np.var(reward))
        a_n = 1.0
    c = net.constraints
    return RegretLog(reward, expected, oracle_v, cum, latency, sigma_r2, a_n,
                     kappa_arm(net.n_cameras, net.n_servers, c.k_min, c.k_max),
                     audits, agents if chooser is None else None, played)
