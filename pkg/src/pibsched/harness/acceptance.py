"""The acceptance suite: one check per criterion, each reporting its measured numbers.

``run_acceptance`` runs every check and returns a report; the CLI prints it
and exits non-zero when anything fails.  ``quick=True`` shrinks seed and
sample counts for smoke runs; horizons and tolerances stay as stated.
"""

from __future__ import annotations

import filecmp
import logging
import math
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import t as student_t

from ..baselines import PolicyKind
from ..infobottleneck import (
    check_bounds,
    exact_posterior,
    instance_from_dict,
    load_instance_records,
    random_instances,
    variational_lower_bound,
)
from ..priority import PriorityNet, gradient_relative_error, synthetic_dataset
from ..scheduler import (
    AgentTables,
    Constraints,
    Environment,
    SuperArm,
    canonical_network,
    communication_round,
    round_bytes,
    run_experiment,
    score_super_arm,
)
from ..scheduler.bandit import RECORD_BYTES
from ..scheduler.engine import checkpoints
from .config import ExperimentConfig
from .sweeps import fusion_count_table, latency_runs, run

log = logging.getLogger(__name__)

BOUND_TOL = 1e-9
GRAD_TOL = 1e-4


@dataclass
class CheckResult:
    criterion: int | None
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    detail: str = ""
    runtime_s: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        num = f"[{self.criterion}]" if self.criterion is not None else "[-]"
        nums = " ".join(f"{k}={_short(v)}" for k, v in self.metrics.items())
        extra = f" :: {self.detail}" if self.detail else ""
        return f"{tag} {num} {self.name} ({self.runtime_s:.1f}s) {nums}{extra}"


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


@dataclass
class AcceptanceReport:
    results: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list[str]:
        return [r.line() for r in self.results]


def _timed(fn: Callable[..., CheckResult], *args, **kw) -> CheckResult:
    t0 = time.perf_counter()
    res = fn(*args, **kw)
    res.runtime_s = time.perf_counter() - t0
    return res


# -- 1, 2: information bottleneck bounds --------------------------------------------


def check_lower_bound(n: int = 1000, seed: int = 0, time_limit_s: float = 30.0) -> CheckResult:
    t0 = time.perf_counter()
    worst, worst_eq = math.inf, 0.0
    for i, inst in enumerate(random_instances(seed, n)):
        c = check_bounds(inst, i)
        worst = min(worst, c.lower_slack)
        tight = variational_lower_bound(inst.joint, inst.encoder, exact_posterior(inst.joint, inst.encoder))
        worst_eq = max(worst_eq, abs(tight - c.exact_mi))
    elapsed = time.perf_counter() - t0
    ok = worst >= -BOUND_TOL and worst_eq <= BOUND_TOL and elapsed < time_limit_s
    return CheckResult(1, "variational-lower-bound", ok,
                       {"instances": n, "min_slack_bits": worst, "max_equality_gap_bits": worst_eq})


def check_upper_bound(n: int = 1000, seed: int = 1, time_limit_s: float = 30.0) -> CheckResult:
    t0 = time.perf_counter()
    slacks = [check_bounds(inst, i).upper_slack for i, inst in enumerate(random_instances(seed, n))]
    elapsed = time.perf_counter() - t0
    worst = min(slacks)
    ok = worst >= -BOUND_TOL and elapsed < time_limit_s
    return CheckResult(2, "communication-upper-bound", ok,
                       {"instances": n, "min_slack_bits": worst, "median_slack_bits": float(np.median(slacks))})


# -- 3: priority-net gradients -----------------------------------------------------


def check_gradients(n: int = 100, seed: int = 0, h: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(n):
        net = PriorityNet.init(rng, hidden=int(rng.integers(1, 17)))
        data = synthetic_dataset(rng, int(rng.integers(1, 5)), int(rng.integers(1, 8)))
        errs.append(gradient_relative_error(net, data, h=h))
    worst = max(errs)
    return CheckResult(3, "priority-gradients", worst <= GRAD_TOL, {"nets": n, "max_rel_error": worst})


# -- 4: regret sublinearity --------------------------------------------------------


def regret_ratios(cum_regret: np.ndarray, t_lo: int = 1000) -> tuple[float, float]:
    """(normalised regret at T over its running max on [t_lo, T], R(T)/T over R(t_lo)/t_lo)."""
    T = len(cum_regret)
    ts = checkpoints(t_lo, T)
    norm = cum_regret[ts - 1] / np.sqrt(ts * np.log(ts))
    r_lo = cum_regret[t_lo - 1] / t_lo
    return float(norm[-1] / norm.max()), float((cum_regret[-1] / T) / r_lo) if r_lo > 0 else 0.0


def check_regret(seeds: int = 10, horizon: int = 100_000, time_limit_s: float = 300.0) -> CheckResult:
    t0 = time.perf_counter()
    net = canonical_network(n_servers=2)
    logs = [run_experiment(net, horizon, seed) for seed in range(seeds)]
    elapsed = time.perf_counter() - t0
    t_lo = max(horizon // 100, 2)
    per_seed = [regret_ratios(g.cum_regret, t_lo) for g in logs]
    mean_curve = np.mean([g.cum_regret for g in logs], axis=0)
    norm_ratio, lin_ratio = regret_ratios(mean_curve, t_lo)
    worst_norm = max(p[0] for p in per_seed)
    worst_lin = max(p[1] for p in per_seed)
    c_star = [g.c_star(t_lo) for g in logs]
    bound = [g.theorem_bound() for g in logs]
    ok = max(norm_ratio, worst_norm) <= 1.1 and max(lin_ratio, worst_lin) <= 0.25 and elapsed < time_limit_s
    return CheckResult(4, "regret-sublinear", ok, {
        "seeds": seeds, "horizon": horizon,
        "norm_ratio_mean": norm_ratio, "norm_ratio_worst": worst_norm,
        "linear_ratio_mean": lin_ratio, "linear_ratio_worst": worst_lin,
        "c_star_max": max(c_star), "final_regret_mean": float(mean_curve[-1]),
        "theorem_bound_slack": float(np.mean(bound) - mean_curve[-1]),
    })


# -- 5: constraint soundness -------------------------------------------------------


def naive_violations(paths, fusion, c: Constraints, c2e, e2e, loads) -> set:
    """Reference checker written rule by rule; keys are (code, camera or server)."""
    out = set()
    cams = [p[0] for p in paths]
    n_sel = len(set(cams))
    if n_sel < c.k_min or n_sel > c.k_max:
        out.add(("a", None))
    if fusion < len(c.psi_remaining) and c.psi_remaining[fusion] < c.psi_fusion_required:
        out.add(("b", fusion))
    for k in set(cams):
        mine = [p for p in paths if p[0] == k]
        if len(mine) != 1 or mine[0][2] != fusion:
            out.add(("c", k))
    for s in {p[1] for p in paths}:
        if sum(1 for p in paths if p[1] == s) + loads[s] > c.e_max:
            out.add(("d", s))
    for k, s, s0 in paths:
        if c2e[k][s] + (0.0 if s == s0 else e2e[s][s0]) > c.t_upper:
            out.add(("e", k))
    return out


def _keyed(violations) -> set:
    return {(v.code, v.camera if v.code in ("c", "e") else v.server) for v in violations}


def random_super_arm(rng: np.random.Generator, n_cameras: int, n_servers: int) -> SuperArm:
    """Half well-formed profiles (one path per camera or off), half arbitrary path lists.

    Fusion lands on server 0 half the time so capacity-feasible arms are common.
    """
    fusion = 0 if rng.random() < 0.5 else int(rng.integers(n_servers))
    if rng.random() < 0.5:
        acts = rng.integers(-1, n_servers, n_cameras)
        return SuperArm(tuple((k, int(s), fusion) for k, s in enumerate(acts) if s >= 0), fusion)
    paths = tuple((int(rng.integers(n_cameras)), int(rng.integers(n_servers)), int(rng.integers(n_servers)))
                  for _ in range(int(rng.integers(0, 6))))
    return SuperArm(paths, fusion)


def check_constraint_soundness(n: int = 10_000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    base = canonical_network(n_servers=4, e_max=2)
    nets = [
        base,
        replace(base, background_load=np.array([0.7, 0.7, 0.3, 0.3])),
        replace(base, constraints=replace(base.constraints, k_min=2, k_max=2, t_upper=0.006)),
    ]
    envs = [Environment(net, seed + i) for i, net in enumerate(nets)]
    disagreements = positive_violators = n_violating = n_rewarded = 0
    for i in range(n):
        net, env = nets[i % len(nets)], envs[i % len(nets)]
        slot = env.next()
        K, S = net.n_cameras, net.n_servers
        sa = random_super_arm(rng, K, S)
        paths, fusion = sa.paths, sa.fusion
        rewards, vio, _, _ = score_super_arm(net, sa, slot)
        want = naive_violations(paths, fusion, net.constraints, slot.c2e, net.e2e, slot.loads)
        if _keyed(vio) != want:
            disagreements += 1
        if vio:
            n_violating += 1
        n_rewarded += bool(rewards.sum() > 0)
        global_hit = any(code in ("a", "b") for code, _ in want)
        for k, s, _ in paths:
            hit = global_hit or ("c", k) in want or ("e", k) in want or ("d", s) in want
            if hit and rewards[k] > 0:
                positive_violators += 1
    ok = disagreements == 0 and positive_violators == 0
    return CheckResult(5, "constraint-soundness", ok, {
        "super_arms": n, "violating": n_violating, "rewarded": n_rewarded, "disagreements": disagreements,
        "rewarded_violators": positive_violators})


# -- 6: fused-camera trend ---------------------------------------------------------


def check_fusion_trend(trials: int = 500, seed: int = 0) -> CheckResult:
    cfg = ExperimentConfig(experiment="fusion-count", false_pos_rate=0.0, trials=trials, seeds=(seed,))
    rows = fusion_count_table(cfg)
    moda = [r[2] for r in rows]
    gain, ci = [r[4] for r in rows], [r[5] for r in rows]
    worst_rise = max(gain[i + 1] - gain[i] - max(ci[i], ci[i + 1]) for i in range(len(rows) - 1))
    worst_drop = max(moda[i] - moda[i + 1] for i in range(len(rows) - 1))
    ok = worst_rise <= 0.0 and worst_drop <= 1e-12
    return CheckResult(6, "fusion-count-trend", ok, {
        "points": len(rows), "trials": trials, "gain_first": gain[0], "gain_last": gain[-1],
        "max_gain_rise_beyond_ci": worst_rise, "max_moda_drop": worst_drop})


# -- 7, 8: latency trends ----------------------------------------------------------

LATENCY_SERVERS = (1, 2, 4)


def latency_table(seeds: int = 20, horizon: int = 10_000, jobs: int = 1) -> dict:
    cfg = ExperimentConfig(experiment="servers", horizon=horizon, seeds=tuple(range(seeds)), jobs=jobs)
    runs = latency_runs(cfg, [2], [PolicyKind.STOCHASTIC])
    runs.update(latency_runs(cfg, LATENCY_SERVERS, [PolicyKind.UCB]))
    return {key: np.array([r[0] for r in val]) for key, val in runs.items()}


def check_ucb_vs_stochastic(table: dict | None = None, **kw) -> CheckResult:
    table = table or latency_table(**kw)
    d = table[(2, PolicyKind.UCB)] - table[(2, PolicyKind.STOCHASTIC)]
    n = len(d)
    upper = float(d.mean() + student_t.ppf(0.95, n - 1) * d.std(ddof=1) / math.sqrt(n))
    return CheckResult(7, "ucb-beats-stochastic", upper <= 0.0, {
        "seeds": n, "ucb_ms": float(table[(2, PolicyKind.UCB)].mean()),
        "stochastic_ms": float(table[(2, PolicyKind.STOCHASTIC)].mean()),
        "diff_upper95_ms": upper})


def check_server_trend(table: dict | None = None, **kw) -> CheckResult:
    table = table or latency_table(**kw)
    metrics, ok = {}, True
    for a, b in zip(LATENCY_SERVERS, LATENCY_SERVERS[1:]):
        d = table[(b, PolicyKind.UCB)] - table[(a, PolicyKind.UCB)]
        n = len(d)
        lower = float(d.mean() - student_t.ppf(0.975, n - 1) * d.std(ddof=1) / math.sqrt(n))
        metrics[f"diff_{a}to{b}_ms"] = float(d.mean())
        metrics[f"diff_{a}to{b}_lower95_ms"] = lower
        ok &= lower <= 0.0
    for s in LATENCY_SERVERS:
        metrics[f"latency_{s}_ms"] = float(table[(s, PolicyKind.UCB)].mean())
    return CheckResult(8, "latency-vs-servers", ok, metrics)


# -- 9: communication and compute accounting ---------------------------------------


def slot_seconds(n_agents: int, n_arms: int, slots: int = 200, repeats: int = 5, cadence: int = 50,
                 seed: int = 0) -> float:
    """Best-of-``repeats`` mean wall time of one UCB slot (select, update, amortised round)."""
    rng = np.random.default_rng(seed)
    cand = np.tile(np.arange(n_arms), (n_agents, 1))
    rewards = rng.random((slots, n_agents))
    best = math.inf
    for _ in range(repeats):
        ag = AgentTables(n_agents, n_arms)
        t0 = time.perf_counter()
        for t in range(1, slots + 1):
            col = ag.select(cand, t)
            ag.update(cand[np.arange(n_agents), col], rewards[t - 1])
            if t % cadence == 0:
                communication_round(ag)
        best = min(best, (time.perf_counter() - t0) / slots)
    return best


def check_accounting(horizon: int = 500, arm_counts=tuple(2 ** k for k in range(6, 14))) -> CheckResult:
    mismatches = rounds = 0
    for s in (1, 2, 4):
        net = canonical_network(n_servers=s)
        g = run_experiment(net, horizon, seed=s)
        closed = round_bytes(net.n_cameras, net.n_arms)
        explicit = 2 * net.n_cameras * net.n_arms * RECORD_BYTES
        for a in g.audits:
            rounds += 1
            mismatches += a.total_bytes != closed or closed != explicit
    times = [slot_seconds(3, a) for a in arm_counts]
    slopes = [b / a for a, b in zip(times, times[1:])]
    ok = mismatches == 0 and rounds > 0 and max(slopes) <= 2.5
    return CheckResult(9, "accounting", ok, {
        "rounds": rounds, "byte_mismatches": mismatches, "max_doubling_slope": max(slopes),
        "slot_us_smallest": 1e6 * times[0], "slot_us_largest": 1e6 * times[-1]})


# -- 10: determinism ---------------------------------------------------------------


def determinism_configs(scale: int = 1) -> list[ExperimentConfig]:
    return [
        ExperimentConfig(experiment="regret", horizon=300 * scale, seeds=(0, 1)),
        ExperimentConfig(experiment="bottleneck", sweep=(3e4, 6.4e4, 1e5), trials=100 * scale, seeds=(0, 1)),
        ExperimentConfig(experiment="fusion-count", trials=100 * scale),
        ExperimentConfig(experiment="delayed-cameras", trials=100 * scale),
        ExperimentConfig(experiment="servers", horizon=200 * scale, seeds=(0, 1), sweep=(1, 2),
                         compare=("stochastic", "avg-opt", "non-collab", "non-relay")),
    ]


def check_determinism(configs: list[ExperimentConfig] | None = None) -> CheckResult:
    configs = configs or determinism_configs()
    differing, files = [], 0
    with tempfile.TemporaryDirectory() as tmp:
        for i, cfg in enumerate(configs):
            a = run(replace(cfg, output_dir=str(Path(tmp) / f"{i}a")))
            b = run(replace(cfg, output_dir=str(Path(tmp) / f"{i}b")))
            for pa, pb in zip(a, b):
                files += 1
                if not filecmp.cmp(pa, pb, shallow=False):
                    differing.append(f"{cfg.experiment.value}/{pa.name}")
    return CheckResult(10, "determinism", not differing and files > 0,
                       {"experiments": len(configs), "csv_files": files, "differing": len(differing)},
                       ", ".join(differing))


# -- instance files ----------------------------------------------------------------


def check_instance_file(path: str | Path) -> CheckResult:
    """Validate every record of an instance file and check both bounds on the valid ones."""
    problems, slack = [], math.inf
    records = load_instance_records(path)
    for rec in records:
        try:
            inst = instance_from_dict(rec)
        except (ValueError, KeyError) as exc:
            problems.append(f"instance {rec.get('id', '?')}: {exc}")
            continue
        c = check_bounds(inst, rec.get("id", 0))
        slack = min(slack, c.slack)
        if c.slack < -BOUND_TOL:
            problems.append(f"instance {c.instance_id}: bound violated by {-c.slack:.3g} bits")
    return CheckResult(None, "instance-file", not problems,
                       {"instances": len(records), "min_slack_bits": slack}, "; ".join(problems))


# -- suite ------------------------------------------------------------------------


def run_acceptance(quick: bool = False, instances: str | Path | None = None, jobs: int = 1,
                   echo: Callable[[str], None] | None = None) -> AcceptanceReport:
    """Run every check; ``echo`` receives each result line as soon as it is known."""
    results: list[CheckResult] = []

    def add(res: CheckResult):
        results.append(res)
        if echo:
            echo(res.line())

    if instances is not None:
        add(_timed(check_instance_file, instances))
    add(_timed(check_lower_bound, 200 if quick else 1000))
    add(_timed(check_upper_bound, 200 if quick else 1000))
    add(_timed(check_gradients, 20 if quick else 100))
    add(_timed(check_regret, 3 if quick else 10, 100_000))
    add(_timed(check_constraint_soundness, 2000 if quick else 10_000))
    add(_timed(check_fusion_trend, 500))
    t0 = time.perf_counter()
    table = latency_table(5 if quick else 20, 4000 if quick else 10_000, jobs)
    shared = time.perf_counter() - t0
    for fn in (check_ucb_vs_stochastic, check_server_trend):
        res = _timed(fn, table)
        res.runtime_s += shared / 2
        add(res)
    add(_timed(check_accounting, 200 if quick else 500,
               tuple(2 ** k for k in range(6, 11)) if quick else tuple(2 ** k for k in range(6, 14))))
    add(_timed(check_determinism, determinism_configs(1)))
    return AcceptanceReport(results)
