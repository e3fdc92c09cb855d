"""Camera/server topology, per-slot random state and closed-form expectations.

Server randomness is always drawn for the full ``distances_m`` pool even when
only the first ``n_servers`` columns are active, so networks that differ only
in their active server count see identical channels on shared links.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
from scipy.stats import norm

from ..channel import LinkParams, mean_snr, shadowing_trace
from ..scenario import Camera, Pedestrian, World, expected_moda, priority_order
from .constraints import Constraints, PathDelays, SuperArm, check_constraints, zeroed_cameras

OFF = -1


@dataclass
class Network:
    world: World
    distances_m: np.ndarray  # [K, S_pool] camera-to-server distances
    data_bits: np.ndarray  # [K] payload per slot
    inference_s: np.ndarray  # [S_pool]
    relay_s: np.ndarray  # [S_pool, S_pool] forwarding delay, diagonal ignored
    constraints: Constraints
    n_servers: int | None = None
    link: LinkParams = field(default_factory=LinkParams)
    rho: float = 0.9
    background_load: np.ndarray | None = None  # Poisson mean extra connections per server

    def __post_init__(self):
        self.distances_m = np.atleast_2d(np.asarray(self.distances_m, dtype=float))
        k, pool = self.distances_m.shape
        if k != len(self.world.cameras):
            raise ValueError("distances_m needs one row per camera")
        if self.world.camera_ids != list(range(k)):
            raise ValueError("scheduler networks need camera ids 0..K-1 in order")
        self.data_bits = np.broadcast_to(np.asarray(self.data_bits, dtype=float), (k,)).copy()
        self.inference_s = np.broadcast_to(np.asarray(self.inference_s, dtype=float), (pool,)).copy()
        self.relay_s = np.asarray(self.relay_s, dtype=float).reshape(pool, pool)
        if self.n_servers is None:
            self.n_servers = pool
        if not 1 <= self.n_servers <= pool:
            raise ValueError(f"n_servers must be in [1, {pool}]")
        if self.background_load is None:
            self.background_load = np.zeros(pool)
        self.background_load = np.asarray(self.background_load, dtype=float)
        if len(self.constraints.psi_remaining) not in (0, pool):
            raise ValueError("psi_remaining needs one entry per server")

    # -- static views ---------------------------------------------------------

    @property
    def n_cameras(self) -> int:
        return self.distances_m.shape[0]

    @property
    def pool_size(self) -> int:
        return self.distances_m.shape[1]

    @property
    def n_actions(self) -> int:
        """Per-camera arm count: an 'off' arm plus one arm per (edge, fusion) pair."""
        return 1 + self.n_servers * self.n_servers

    @property
    def n_arms(self) -> int:
        return self.n_cameras * self.n_actions

    def arm_index(self, k: int, s: int, s0: int) -> int:
        if s == OFF:
            return k * self.n_actions
        return k * self.n_actions + 1 + s * self.n_servers + s0

    def arm_label(self, arm: int) -> tuple[int, int, int]:
        """(camera, edge, fusion) for an arm id; edge and fusion are OFF for the off arm."""
        k, a = divmod(arm, self.n_actions)
        if a == 0:
            return k, OFF, OFF
        s, s0 = divmod(a - 1, self.n_servers)
        return k, s, s0

    def link_params(self, k: int, s: int) -> LinkParams:
        return replace(self.link, distance_m=float(self.distances_m[k, s]))

    @cached_property
    def median_snr(self) -> np.ndarray:
        return np.array([[mean_snr(self.link_params(k, s)) for s in range(self.pool_size)]
                         for k in range(self.n_cameras)])

    @cached_property
    def e2e(self) -> np.ndarray:
        """Edge-to-fusion delay with a zero diagonal (direct routes)."""
        out = self.relay_s.copy()
        np.fill_diagonal(out, 0.0)
        return out

    @cached_property
    def mean_c2e(self) -> np.ndarray:
        cap = self.link.bandwidth_hz * np.log2(1.0 + self.median_snr)
        return self.data_bits[:, None] / cap

    @cached_property
    def order(self) -> list[int]:
        return priority_order(self.world)

    def with_servers(self, n_servers: int) -> "Network":
        return replace(self, n_servers=n_servers)

    def with_data_bits(self, data_bits) -> "Network":
        return replace(self, data_bits=np.asarray(data_bits, dtype=float))

    def path_delays(self, c2e: np.ndarray) -> PathDelays:
        return PathDelays(c2e, self.e2e)

    def fusion_candidates(self) -> list[int]:
        c = self.constraints
        return [s for s in range(self.n_servers)
                if not c.psi_remaining or c.psi_remaining[s] >= c.psi_fusion_required]

    @cached_property
    def fusion_server(self) -> int:
        """Fusion server for every slot: least summed mean-channel route latency.

        Only servers with enough remaining capacity qualify; ties go to the
        lowest id.
        """
        cands = self.fusion_candidates()
        if not cands:
            raise ValueError("no server can host fusion")
        s_act = self.n_servers
        best, best_cost = cands[0], math.inf
        for s0 in cands:
            route = self.mean_c2e[:, :s_act] + self.e2e[:s_act, s0][None, :]
            cost = float(route.min(axis=1).sum()) + self.n_cameras * self.inference_s[s0]
            if cost < best_cost:
                best, best_cost = s0, cost
        return best

    # -- closed-form expectations --------------------------------------------

    def on_time_probability(self, k: int, s: int, s0: int) -> float:
        """P(T^{c->e}_{k,s} + T^{e->e}_{s,s0} <= t_upper) under stationary shadowing."""
        budget = self.constraints.t_upper - self.e2e[s, s0]
        if math.isinf(budget):
            return 1.0
        if budget <= 0:
            return 0.0 if self.data_bits[k] > 0 else 1.0
        snr_req = 2.0 ** (self.data_bits[k] / (budget * self.link.bandwidth_hz)) - 1.0
        if snr_req <= 0:
            return 1.0
        thr_db = 10.0 * math.log10(self.median_snr[k, s] / snr_req)
        sigma = self.link.shadowing_db_std
        if sigma == 0:
            return 1.0 if thr_db >= 0 else 0.0
        return float(norm.cdf(thr_db / sigma))

    def has_random_extras(self) -> bool:
        return bool(np.any(self.world.false_pos_rates > 0) or np.any(self.background_load > 0))

    def expected_reward(self, s0: int, actions: Sequence[int]) -> float:
        """Exact expected summed reward of a profile (fusion server, per-camera edge or OFF).

        Needs zero false-positive rates and zero background load, where the
        clamped incremental gains telescope to the fused set's MODA.
        """
        if self.has_random_extras():
            raise ValueError("exact expectation needs zero false positives and background load")
        sa = profile_super_arm(s0, actions)
        static = check_constraints(sa, self.constraints,
                                   PathDelays(np.zeros((self.n_cameras, self.pool_size)), self.e2e),
                                   np.zeros(self.pool_size, dtype=int))
        dead = zeroed_cameras(sa, static)
        live = [(k, s) for k, s in enumerate(actions) if s != OFF and k not in dead]
        if not live:
            return 0.0
        q = [self.on_time_probability(k, s, s0) for k, s in live]
        total = 0.0
        for mask in itertools.product((0, 1), repeat=len(live)):
            p = 1.0
            for bit, qi in zip(mask, q):
                p *= qi if bit else 1.0 - qi
            if p == 0.0:
                continue
            subset = [live[i][0] for i, bit in enumerate(mask) if bit]
            total += p * expected_moda(self.world, subset)
        return total

    def profiles(self) -> Iterator[tuple[int, tuple[int, ...]]]:
        choices = (OFF,) + tuple(range(self.n_servers))
        for s0 in range(self.n_servers):
            for acts in itertools.product(choices, repeat=self.n_cameras):
                yield s0, acts

    def n_profiles(self) -> int:
        return self.n_servers * (1 + self.n_servers) ** self.n_cameras


def profile_super_arm(s0: int, actions: Sequence[int]) -> SuperArm:
    return SuperArm(tuple((k, s, s0) for k, s in enumerate(actions) if s != OFF), s0)


def super_arm_profile(sa: SuperArm, n_cameras: int) -> tuple[int, tuple[int, ...]]:
    acts = [OFF] * n_cameras
    for k, s, _ in sa.paths:
        acts[k] = s
    return sa.fusion, tuple(acts)


# -- per-slot randomness ---------------------------------------------------------


@dataclass(frozen=True)
class SlotState:
    t: int  # 1-based slot index
    c2e: np.ndarray  # [K, S_pool] seconds
    masks: tuple[int, ...]  # per-camera detected-pedestrian bitmask
    fp: tuple[int, ...]  # per-camera false positives
    loads: np.ndarray  # [S_pool] background connections
    capacity_bps: np.ndarray  # [K, S_pool]


def _bitmasks(hits: np.ndarray) -> list[tuple[int, ...]]:
    """hits [B, P, K] -> per-slot tuple of per-camera python int bitmasks."""
    packed = np.packbits(hits, axis=1, bitorder="little")  # [B, bytes, K]
    b, _, k = packed.shape
    out = []
    for i in range(b):
        out.append(tuple(int.from_bytes(packed[i, :, j].tobytes(), "little") for j in range(k)))
    return out


class Environment:
    """Seeded stream of slot states generated in blocks.

    Channels, detections and loads use independent child streams of the seed,
    so policies run on the same seed see the same world.
    """

    def __init__(self, net: Network, seed: int, block: int = 2048):
        self.net = net
        ss = np.random.SeedSequence(seed)
        self._rng_chan, self._rng_det, self._rng_load = (np.random.default_rng(s) for s in ss.spawn(3))
        self._block = block
        self._shadow = None
        self._buf: list[SlotState] = []
        self._pos = 0
        self._t = 0

    def _fill(self):
        net, b = self.net, self._block
        k, pool = net.n_cameras, net.pool_size
        normals = self._rng_chan.standard_normal((b, k, pool))
        shadow = shadowing_trace(normals, net.link.shadowing_db_std, net.rho, initial=self._shadow)
        self._shadow = shadow[-1].copy()
        snr = net.median_snr[None] * 10.0 ** (-shadow / 10.0)
        cap = net.link.bandwidth_hz * np.log2(1.0 + snr)
        with np.errstate(divide="ignore"):
            c2e = np.where(cap > 0, net.data_bits[None, :, None] / cap, np.inf)
        w = net.world
        u = self._rng_det.random((b, len(w.pedestrians), k))
        fp = self._rng_det.poisson(np.broadcast_to(w.false_pos_rates, (b, k)))
        masks = _bitmasks(u < w.detect_probs)
        if np.any(net.background_load > 0):
            loads = self._rng_load.poisson(net.background_load, size=(b, pool))
        else:
            loads = np.zeros((b, pool), dtype=np.int64)
        base = self._t
        self._buf = [SlotState(base + i + 1, c2e[i], masks[i], tuple(int(x) for x in fp[i]),
                               loads[i], cap[i]) for i in range(b)]
        self._pos = 0
        self._t += b

    def next(self) -> SlotState:
        if self._pos >= len(self._buf):
            self._fill()
        s = self._buf[self._pos]
        self._pos += 1
        return s

    def __iter__(self):
        while True:
            yield self.next()


# -- benchmarks --------------------------------------------------------------------


def _disk_pedestrians(rng, centers, radius, per_disk, width, height):
    peds = []
    for cx, cy in centers:
        for _ in range(per_disk):
            r = radius * math.sqrt(rng.random())
            a = 2 * math.pi * rng.random()
            x = min(max(cx + r * math.cos(a), 0.0), width)
            y = min(max(cy + r * math.sin(a), 0.0), height)
            peds.append(Pedestrian(len(peds), (x, y)))
    return peds


# camera-to-server distances in metres for the four-server pool; server 0 hosts fusion
CANONICAL_DISTANCES_M = np.array([
    [150.0, 260.0, 240.0, 300.0],
    [260.0, 120.0, 280.0, 60.0],
    [170.0, 280.0, 60.0, 260.0],
])


def canonical_world(seed: int = 11, per_camera: int = 8) -> World:
    """Three cameras with disjoint fields of view along a 12 m x 36 m strip."""
    centers = [(6.0, 6.0), (6.0, 18.0), (6.0, 30.0)]
    radius = 5.5
    cams = [Camera(i, (0.0, cy), (cx, cy), radius, 0.95, 0.75, 0.0) for i, (cx, cy) in enumerate(centers)]
    rng = np.random.default_rng(seed)
    peds = _disk_pedestrians(rng, centers, radius * 0.95, per_camera, 12.0, 36.0)
    return World(12.0, 36.0, 0.025, cams, peds, seed)


def canonical_network(n_servers: int = 2, t_upper: float = 0.008, data_bits: float = 32_000.0,
                      e_max: int = 3) -> Network:
    """3-camera benchmark over a 4-server pool; server 0 is the only fusion-capable node."""
    pool = CANONICAL_DISTANCES_M.shape[1]
    relay = np.full((pool, pool), 0.001)
    cons = Constraints(k_min=1, k_max=3, psi_fusion_required=1.0,
                       psi_remaining=(2.0,) + (0.5,) * (pool - 1), e_max=e_max, t_upper=t_upper)
    return Network(
        world=canonical_world(),
        distances_m=CANONICAL_DISTANCES_M,
        data_bits=data_bits,
        inference_s=np.array([0.002, 0.003, 0.0025, 0.003]),
        relay_s=relay,
        constraints=cons,
        n_servers=n_servers,
    )
