"""Experiment runners that turn a config into CSV files.

Every runner returns the paths it wrote.  Rows are emitted in a fixed order
and floats are written with ``repr``, so identical configs give identical
bytes.  Column names carry their units.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import t as student_t

from ..baselines import Policy, PolicyKind, as_chooser
from ..channel import LinkParams, shannon_capacity, snr_from_shadow
from ..priority import softmax_weights
from ..scenario import (
    World,
    default_world,
    draw_detections,
    expected_moda,
    greedy_order,
    load_world,
    perceived_objects,
    priority_order,
    with_false_pos_rate,
)
from ..scheduler import Network, RewardTable, canonical_network, round_bytes, run_experiment
from .config import ExperimentConfig, ExperimentKind

log = logging.getLogger(__name__)

DEFAULT_SERVER_SWEEP = (1.0, 2.0, 4.0)


# -- output helpers ------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_long(path: Path, sweep: str, header: Sequence[str], rows: Sequence[Sequence],
               keys: int = 1) -> Path:
    """Plot-ready long format: one (sweep, key columns..., metric, value) row per cell."""
    out = []
    for row in rows:
        for name, v in zip(header[keys:], row[keys:]):
            out.append((sweep, *row[:keys], name, v))
    return write_csv(path, ["sweep", *header[:keys], "metric", "value"], out)


def ci95(x) -> float:
    """Half-width of the two-sided 95% Student-t interval of the mean; nan below two samples."""
    x = np.asarray(x, dtype=float)
    x = x[~np.isnan(x)]
    if len(x) < 2:
        return math.nan
    return float(student_t.ppf(0.975, len(x) - 1) * x.std(ddof=1) / math.sqrt(len(x)))


def _nanmean(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.mean(x[~np.isnan(x)])) if np.any(~np.isnan(x)) else math.nan


# -- shared builders ---------------------------------------------------------------


def build_world(cfg: ExperimentConfig) -> World:
    world = load_world(cfg.scenario) if cfg.scenario else default_world()
    if cfg.false_pos_rate is not None:
        world = with_false_pos_rate(world, cfg.false_pos_rate)
    return world


def build_network(cfg: ExperimentConfig) -> Network:
    net = canonical_network(**cfg.network)
    if cfg.channel:
        net = replace(net, link=replace(net.link, **cfg.channel))
    return net


def priority_payload_bits(world: World, feature_bits: float) -> np.ndarray:
    """Surrogate payload per camera: feature size scaled by exp(w_k - mean w).

    Weights are the softmax of each camera's perceived-object count normalised
    by the largest count.  A larger weight shrinks the compression penalty
    exp(w0 - w_k), so busier cameras compress less and send more bits.
    """
    chi = perceived_objects(world).astype(float)
    chi_norm = chi / chi.max() if chi.max() > 0 else chi
    w = softmax_weights(chi_norm).w
    return feature_bits * np.exp(w - w.mean())


class _Draws:
    """Common random numbers for one seed of a detection sweep."""

    def __init__(self, world: World, link: LinkParams, trials: int, seed: int):
        rng = np.random.default_rng(seed)
        k = len(world.cameras)
        self.hits, self.fp = draw_detections(world, rng, trials)  # [T, P, K], [T, K]
        self.z = rng.standard_normal((trials, len(world.pedestrians)))
        shadow = link.shadowing_db_std * rng.standard_normal((trials, k))
        self.capacity = shannon_capacity(link.bandwidth_hz, snr_from_shadow(link, shadow))  # [T, K]
        self.key = rng.random((trials, k))  # random ranks for picking delayed cameras


def scores_on_sets(world: World, hits, fp, z, on, loc_std_m: float = 0.3, err_max_m: float = 1.0):
    """Per-trial MODA and MODP when camera set ``on`` ([T, K] bool) is fused.

    MODP is nan in trials without a true positive.
    """
    n = len(world.pedestrians)
    tp_mask = (hits & on[:, None, :]).any(axis=2)  # [T, P]
    tp = tp_mask.sum(axis=1)
    moda = 1.0 - ((n - tp) + (fp * on).sum(axis=1)) / n
    cover = np.maximum((world.covered[None] & on[:, None, :]).sum(axis=2), 1)
    score = 1.0 - np.minimum(loc_std_m / np.sqrt(cover) * np.abs(z) / err_max_m, 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        modp = np.where(tp > 0, (score * tp_mask).sum(axis=1) / tp, np.nan)
    return moda, modp


def _ego_mask(world: World, trials: int) -> np.ndarray:
    ego = world.columns([priority_order(world)[0]])[0]
    m = np.zeros((trials, len(world.cameras)), dtype=bool)
    m[:, ego] = True
    return m


# -- detection sweeps --------------------------------------------------------------


DETECTION_HEADER = ["moda_mean", "moda_ci95", "modp_mean", "modp_ci95", "fused_cameras_mean"]


def _detection_row(world, draws_list, on_list):
    moda, modp, n_on = [], [], []
    for d, on in zip(draws_list, on_list):
        m, p = scores_on_sets(world, d.hits, d.fp, d.z, on)
        moda.append(m)
        modp.append(p)
        n_on.append(on.sum(axis=1))
    moda, modp, n_on = (np.concatenate(a) for a in (moda, modp, n_on))
    return [float(moda.mean()), ci95(moda), _nanmean(modp), ci95(modp), float(n_on.mean())], moda


def sweep_bottleneck(cfg: ExperimentConfig) -> list[Path]:
    """MODA/MODP of the on-time fused set versus a per-link rate cap.

    A camera is delayed when its payload over min(Shannon rate, cap) exceeds
    the slot deadline.  The ego camera fuses locally and is never delayed.
    """
    world = build_world(cfg)
    link = LinkParams(**cfg.channel)
    payload = priority_payload_bits(world, cfg.feature_bits)
    draws = [_Draws(world, link, cfg.trials, s) for s in cfg.seeds]
    ego = [_ego_mask(world, cfg.trials) for _ in draws]
    rows = []
    for cap in cfg.sweep:
        on_list = []
        for d, e in zip(draws, ego):
            rate = np.minimum(d.capacity, cap)
            with np.errstate(divide="ignore"):
                delay = np.where(rate > 0, payload[None, :] / rate, np.inf)
            on_list.append((delay <= cfg.deadline_s) | e)
        stats, _ = _detection_row(world, draws, on_list)
        delayed = float(np.mean([(~on).sum(axis=1).mean() for on in on_list]))
        rows.append([cap, *stats, delayed])
    header = ["bottleneck_bps", *DETECTION_HEADER, "delayed_cameras_mean"]
    out = Path(cfg.output_dir)
    return [write_csv(out / "bottleneck.csv", header, rows),
            write_long(out / "bottleneck_long.csv", "bottleneck", header, rows),
            _payload_csv(out, world, payload)]


def _payload_csv(out: Path, world: World, payload: np.ndarray) -> Path:
    # surrogate packet sizes; their spread is not comparable with real codec output
    rows = [[cam, bits / 1000.0] for cam, bits in zip(world.camera_ids, payload)]
    rows.append(["sd", float(np.std(payload / 1000.0))])
    return write_csv(out / "payload_surrogate.csv", ["camera", "payload_kbit"], rows)


def sweep_delayed_cameras(cfg: ExperimentConfig) -> list[Path]:
    """MODA/MODP when a given number of non-ego cameras, picked at random each trial, miss fusion."""
    world = build_world(cfg)
    k = len(world.cameras)
    values = cfg.sweep or tuple(float(m) for m in range(k))
    if any(v != int(v) or not 0 <= v <= k - 1 for v in values):
        raise ValueError(f"delayed camera counts must be integers in [0, {k - 1}]")
    draws = [_Draws(world, LinkParams(**cfg.channel), cfg.trials, s) for s in cfg.seeds]
    ego = [_ego_mask(world, cfg.trials) for _ in draws]
    rows = []
    for m in values:
        on_list = []
        for d, e in zip(draws, ego):
            key = np.where(e, np.inf, d.key)  # the ego is never picked
            rank = np.argsort(np.argsort(key, axis=1), axis=1)
            on_list.append(rank >= int(m))
        stats, _ = _detection_row(world, draws, on_list)
        rows.append([int(m), *stats])
    header = ["delayed_cameras", *DETECTION_HEADER]
    out = Path(cfg.output_dir)
    return [write_csv(out / "delayed_cameras.csv", header, rows),
            write_long(out / "delayed_cameras_long.csv", "delayed-cameras", header, rows)]


FUSION_HEADER = ["fused_cameras", "camera_added", "moda_mean", "moda_ci95", "gain_mean", "gain_ci95",
                 "modp_mean", "modp_ci95", "expected_moda", "comm_cost_kbit"]


def fusion_count_table(cfg: ExperimentConfig) -> list[list]:
    """Rows of the fused-camera sweep under the greedy order.

    ``fused_cameras`` counts cameras beyond the ego; gains are paired
    per-trial differences from the previous row (row 0 is measured against
    fusing nothing).  Communication cost sums the surrogate payloads of the
    non-ego cameras.
    """
    world = build_world(cfg)
    order = greedy_order(world)
    k = len(order)
    values = cfg.sweep or tuple(float(n) for n in range(k))
    if any(v != int(v) or not 0 <= v <= k - 1 for v in values):
        raise ValueError(f"fused camera counts must be integers in [0, {k - 1}]")
    payload = dict(zip(world.camera_ids, priority_payload_bits(world, cfg.feature_bits)))
    draws = [_Draws(world, LinkParams(**cfg.channel), cfg.trials, s) for s in cfg.seeds]
    prev = np.zeros(cfg.trials * len(draws))  # fusing nothing gives MODA 0
    rows = []
    for n in values:
        chosen = order[: int(n) + 1]
        cols = world.columns(chosen)
        mask = np.zeros(len(world.cameras), dtype=bool)
        mask[cols] = True
        on_list = [np.broadcast_to(mask, (cfg.trials, len(mask))) for _ in draws]
        stats, moda = _detection_row(world, draws, on_list)
        gain = moda - prev
        prev = moda
        cost = sum(payload[c] for c in chosen[1:]) / 1000.0
        rows.append([int(n), chosen[-1], stats[0], stats[1], float(gain.mean()), ci95(gain),
                     stats[2], stats[3], expected_moda(world, chosen), cost])
    return rows


def sweep_fusion_count(cfg: ExperimentConfig) -> list[Path]:
    rows = fusion_count_table(cfg)
    out = Path(cfg.output_dir)
    return [write_csv(out / "fusion_count.csv", FUSION_HEADER, rows),
            write_long(out / "fusion_count_long.csv", "fusion-count", FUSION_HEADER, rows)]


# -- scheduler experiments ----------------------------------------------------------


def _chooser(kind: PolicyKind, net: Network):
    return None if kind is PolicyKind.UCB else as_chooser(Policy(kind), net)


def _latency_task(args):
    cfg, n_servers, kind, seed = args
    net = build_network(cfg).with_servers(n_servers)
    logd = run_experiment(net, cfg.horizon, seed, cfg.alpha, cfg.cadence, chooser=_chooser(kind, net),
                          table=RewardTable(net))
    start = int(cfg.burn_in_frac * cfg.horizon)
    lat = logd.latency_s[start:]
    return (1e3 * _nanmean(lat), float(logd.reward[start:].mean()),
            float(np.mean(np.isnan(lat))))


def latency_runs(cfg: ExperimentConfig, n_servers: Sequence[int], kinds: Sequence[PolicyKind]) -> dict:
    """{(n_servers, policy): [(latency_ms, reward_per_slot, idle_frac) per seed]} after burn-in."""
    tasks = [(cfg, n, kind, seed) for n in n_servers for kind in kinds for seed in cfg.seeds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            results = list(ex.map(_latency_task, tasks))
    else:
        results = [_latency_task(t) for t in tasks]
    out: dict = {}
    for (_, n, kind, _), res in zip(tasks, results):
        out.setdefault((n, kind), []).append(res)
    return out


def sweep_servers(cfg: ExperimentConfig) -> list[Path]:
    """Mean total latency per policy versus the number of active edge servers."""
    values = [int(v) for v in (cfg.sweep or DEFAULT_SERVER_SWEEP)]
    kinds = [cfg.policy, *[p for p in cfg.compare if p is not cfg.policy]]
    runs = latency_runs(cfg, values, kinds)
    summary, per_seed = [], []
    for n in values:
        for kind in kinds:
            res = np.array(runs[(n, kind)])
            summary.append([n, kind.value, float(res[:, 0].mean()), ci95(res[:, 0]),
                            float(res[:, 1].mean()), float(res[:, 2].mean()), len(res)])
            for seed, r in zip(cfg.seeds, res):
                per_seed.append([n, kind.value, seed, r[0], r[1], r[2]])
    header = ["edge_servers", "policy", "latency_ms_mean", "latency_ms_ci95", "reward_per_slot_mean",
              "idle_slot_frac", "n_seeds"]
    out = Path(cfg.output_dir)
    return [write_csv(out / "servers.csv", header, summary),
            write_long(out / "servers_long.csv", "servers", header, summary, keys=2),
            write_csv(out / "servers_per_seed.csv",
                      ["edge_servers", "policy", "seed", "latency_ms", "reward_per_slot", "idle_slot_frac"],
                      per_seed)]


def run_regret(cfg: ExperimentConfig) -> list[Path]:
    """Regret trace, final arm statistics, byte audit and a per-seed summary."""
    net = build_network(cfg)
    table = RewardTable(net)
    regret, arms, audit, summary = [], [], [], []
    for seed in cfg.seeds:
        r = run_experiment(net, cfg.horizon, seed, cfg.alpha, cfg.cadence,
                           chooser=_chooser(cfg.policy, net), table=table)
        for i in range(r.horizon):
            regret.append([seed, i + 1, r.reward[i], r.oracle_reward, r.cum_regret[i]])
        if r.agents is not None:
            n, rc = r.agents.totals()
            for a in range(net.n_arms):
                k, s, s0 = net.arm_label(a)
                arms.append([seed, a, k, s, s0, n[a], rc[a], rc[a] / n[a] if n[a] else 0.0])
        closed = round_bytes(net.n_cameras, net.n_arms)
        for au in r.audits:
            audit.append([seed, au.round_index, au.n_agents, au.n_arms, au.bytes_up, au.bytes_down,
                          au.total_bytes, closed])
        summary.append([seed, r.horizon, r.oracle_reward, r.cum_regret[-1], r.c_star(),
                        r.theorem_bound(), r.sigma_r2, r.a_n, r.kappa_arm])
    out = Path(cfg.output_dir)
    paths = [
        write_csv(out / "regret.csv", ["seed", "t", "reward", "oracle_reward", "cum_regret"], regret),
        write_csv(out / "audit.csv", ["seed", "round", "n_agents", "n_arms", "bytes_up", "bytes_down",
                                      "total_bytes", "closed_form_bytes"], audit),
        write_csv(out / "summary.csv", ["seed", "horizon_slots", "oracle_reward", "final_regret", "c_star",
                                        "theorem_bound", "sigma_r2", "a_n", "kappa_arm"], summary),
    ]
    if arms:
        paths.append(write_csv(out / "arms.csv", ["seed", "arm", "camera", "edge", "fusion", "n",
                                                  "r_cum", "mu_hat"], arms))
    return paths


RUNNERS = {
    ExperimentKind.REGRET: run_regret,
    ExperimentKind.BOTTLENECK: sweep_bottleneck,
    ExperimentKind.FUSION_COUNT: sweep_fusion_count,
    ExperimentKind.DELAYED_CAMERAS: sweep_delayed_cameras,
    ExperimentKind.SERVERS: sweep_servers,
}


def run(cfg: ExperimentConfig) -> list[Path]:
    log.info("running %s experiment %r", cfg.experiment.value, cfg.name)
    return RUNNERS[cfg.experiment](cfg)
