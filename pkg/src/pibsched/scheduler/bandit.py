"""UCB statistics, per-agent tables and the aggregation round.

Every agent keeps a full copy of the arm table.  Between rounds an agent
only writes to its own rows; a round adds each agent's change since the last
broadcast into the global table and sends that table back to everyone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

# one (r_cum float64, n int64) record per arm
RECORD_DTYPE = np.dtype([("r_cum", "<f8"), ("n", "<i8")])
RECORD_BYTES = RECORD_DTYPE.itemsize


@dataclass(frozen=True)
class ArmStats:
    n: int = 0
    r_cum: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("pull count must be non-negative")

    @property
    def mu_hat(self) -> float:
        return self.r_cum / self.n if self.n > 0 else 0.0


def ucb_value(stats: ArmStats, t: float, alpha: float = 1.0) -> float:
    """mu_hat + alpha * sqrt(2 ln t / n); unpulled arms score +inf."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if stats.n == 0:
        return math.inf
    return stats.mu_hat + alpha * math.sqrt(2.0 * math.log(t) / stats.n)


def ucb_scores(n: np.ndarray, r: np.ndarray, t: float, alpha: float = 1.0) -> np.ndarray:
    """Vectorised ``ucb_value`` over arrays of counts and cumulative rewards."""
    n = np.asarray(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = r / n + alpha * np.sqrt(2.0 * math.log(t) / n)
    return np.where(n > 0, val, np.inf)


def ucb_argmax(n: np.ndarray, r: np.ndarray, t: float, alpha: float = 1.0) -> int:
    """Index of the best UCB score; ties go to the lowest index."""
    if len(n) == 0:
        raise ValueError("empty action set")
    return int(np.argmax(ucb_scores(n, r, t, alpha)))


def kappa_arm(n_cameras: int, n_servers: int, k_min: int, k_max: int) -> int:
    """Number of super arms: sum over camera subsets of size k of S^(k+1) path choices."""
    lo, hi = max(k_min, 0), min(k_max, n_cameras)
    return int(sum(comb(n_cameras, k, exact=True) * n_servers ** (k + 1) for k in range(lo, hi + 1)))


@dataclass(frozen=True)
class RoundAudit:
    round_index: int
    n_agents: int
    n_arms: int
    bytes_up: int
    bytes_down: int

    @property
    def total_bytes(self) -> int:
        return self.bytes_up + self.bytes_down


def round_bytes(n_agents: int, n_arms: int) -> int:
    """Closed-form bytes per round: every agent uploads and receives a full table."""
    return 2 * n_agents * n_arms * RECORD_BYTES


class AgentTables:
    """Local arm tables of ``n_agents`` agents over a shared arm index space."""

    def __init__(self, n_agents: int, n_arms: int):
        if n_agents < 1 or n_arms < 1:
            raise ValueError("need at least one agent and one arm")
        self.n = np.zeros((n_agents, n_arms), dtype=np.int64)
        self.r = np.zeros((n_agents, n_arms))
        self.global_n = np.zeros(n_arms, dtype=np.int64)
        self.global_r = np.zeros(n_arms)
        self.rounds = 0

    @classmethod
    def from_tables(cls, n: np.ndarray, r: np.ndarray) -> "AgentTables":
        """Agents holding the given local tables and an empty global snapshot."""
        n = np.asarray(n, dtype=np.int64)
        obj = cls(*n.shape)
        obj.n[:] = n
        obj.r[:] = np.asarray(r, dtype=float)
        return obj

    @property
    def n_agents(self) -> int:
        return self.n.shape[0]

    @property
    def n_arms(self) -> int:
        return self.n.shape[1]

    def totals(self) -> tuple[np.ndarray, np.ndarray]:
        """Fleet-wide (n, r_cum) per arm: last broadcast plus every agent's pending change."""
        n = self.global_n + (self.n.sum(axis=0) - self.n_agents * self.global_n)
        r = self.global_r + (self.r.sum(axis=0) - self.n_agents * self.global_r)
        return n, r

    def stats(self, agent: int, arm: int) -> ArmStats:
        return ArmStats(int(self.n[agent, arm]), float(self.r[agent, arm]))

    def select(self, candidates: np.ndarray, t: int, alpha: float = 1.0) -> np.ndarray:
        """Per-agent column of ``candidates`` ([agents, m] arm ids) with max UCB."""
        rows = np.arange(self.n_agents)[:, None]
        scores = ucb_scores(self.n[rows, candidates], self.r[rows, candidates], t, alpha)
        return np.argmax(scores, axis=1)

    def update(self, arms: np.ndarray, rewards: np.ndarray) -> None:
        """Agent i records reward ``rewards[i]`` for arm ``arms[i]`` in its own table."""
        rewards = np.asarray(rewards, dtype=float)
        if np.any(rewards < 0) or np.any(rewards > 1):
            raise ValueError("rewards must lie in [0, 1]")
        idx = np.arange(self.n_agents)
        self.n[idx, arms] += 1
        self.r[idx, arms] += rewards


def _records(n: np.ndarray, r: np.ndarray) -> bytes:
    rec = np.empty(len(n), dtype=RECORD_DTYPE)
    rec["r_cum"] = r
    rec["n"] = n
    return rec.tobytes()


def communication_round(agents: AgentTables) -> RoundAudit:
    """Merge every agent's local changes and broadcast the merged table.

    Byte counts are measured from the serialised upload and broadcast payloads.
    """
    bytes_up = 0
    merged_n = agents.global_n.copy()
    merged_r = agents.global_r.copy()
    for i in range(agents.n_agents):
        dn = agents.n[i] - agents.global_n
        dr = agents.r[i] - agents.global_r
        bytes_up += len(_records(dn, dr))
        merged_n += dn
        merged_r += dr
    payload = _records(merged_n, merged_r)
    agents.global_n = merged_n
    agents.global_r = merged_r
    agents.n[:] = merged_n
    agents.r[:] = merged_r
    agents.rounds += 1
    return RoundAudit(agents.rounds, agents.n_agents, agents.n_arms,
                      bytes_up, len(payload) * agents.n_agents)
