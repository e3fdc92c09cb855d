"""Synthetic multi-camera coverage worlds and detection scoring.

A world is a rectangle populated with pedestrians and watched by cameras
whose field of view is modelled as a disk.  Detection probability decays
linearly from ``detect_prob_center`` at the disk center to
``detect_prob_edge`` at the rim; a pedestrian counts as a true positive
under a camera set if at least one selected camera's Bernoulli draw
succeeds.  False positives are Poisson per camera and add up over the set.

All randomness comes from an explicit ``numpy.random.Generator``.  A
detection call always draws one uniform per (pedestrian, camera) pair and
one Poisson count per camera for *every* camera in the world, so outcomes
for different subsets under the same generator state share random numbers.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# Fig. 6 geometry: 12 m x 36 m at 2.5 cm resolution (480 x 1440 cells).
DEFAULT_WIDTH_M = 12.0
DEFAULT_HEIGHT_M = 36.0
DEFAULT_CELL_M = 0.025


@dataclass(frozen=True)
class Camera:
    id: int
    position: tuple[float, float]
    fov_center: tuple[float, float]
    fov_radius_m: float
    detect_prob_center: float = 0.95
    detect_prob_edge: float = 0.6
    false_pos_rate: float = 0.0

    def __post_init__(self):
        if self.fov_radius_m <= 0:
            raise ValueError(f"camera {self.id}: fov_radius_m must be positive")
        if not 0.0 <= self.detect_prob_edge <= self.detect_prob_center <= 1.0:
            raise ValueError(
                f"camera {self.id}: need 0 <= detect_prob_edge <= detect_prob_center <= 1"
            )
        if self.false_pos_rate < 0:
            raise ValueError(f"camera {self.id}: false_pos_rate must be >= 0")


@dataclass(frozen=True)
class Pedestrian:
    id: int
    position: tuple[float, float]


@dataclass(frozen=True)
class DetectionOutcome:
    tp: int
    fn_: int
    fp: int

    def __post_init__(self):
        if min(self.tp, self.fn_, self.fp) < 0:
            raise ValueError("detection counts must be non-negative")


@dataclass(frozen=True)
class World:
    width_m: float
    height_m: float
    cell_size_m: float
    cameras: tuple[Camera, ...]
    pedestrians: tuple[Pedestrian, ...]
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.width_m, self.height_m, self.cell_size_m) <= 0:
            raise ValueError("world extent and cell size must be positive")
        object.__setattr__(self, "cameras", tuple(self.cameras))
        object.__setattr__(self, "pedestrians", tuple(self.pedestrians))
        ids = [c.id for c in self.cameras]
        if len(set(ids)) != len(ids):
            raise ValueError("camera ids must be unique")
        for p in self.pedestrians:
            x, y = p.position
            if not (0.0 <= x <= self.width_m and 0.0 <= y <= self.height_m):
                raise ValueError(f"pedestrian {p.id} at {p.position} is outside the world")

    @property
    def grid_shape(self) -> tuple[int, int]:
        """(columns, rows) of the occupancy grid."""
        return (
            math.ceil(round(self.width_m / self.cell_size_m, 9)),
            math.ceil(round(self.height_m / self.cell_size_m, 9)),
        )

    @property
    def camera_ids(self) -> list[int]:
        return [c.id for c in self.cameras]

    @cached_property
    def _index(self) -> dict[int, int]:
        return {c.id: i for i, c in enumerate(self.cameras)}

    def columns(self, selected: Iterable[int]) -> list[int]:
        """Map camera ids to column indices; raises on unknown ids."""
        cols = []
        for k in selected:
            if k not in self._index:
                raise KeyError(f"unknown camera id {k}")
            cols.append(self._index[k])
        return sorted(cols)

    @cached_property
    def distances(self) -> np.ndarray:
        """[P, K] distance from each pedestrian to each FoV center."""
        if not self.pedestrians or not self.cameras:
            return np.zeros((len(self.pedestrians), len(self.cameras)))
        peds = np.array([p.position for p in self.pedestrians], dtype=float)
        centers = np.array([c.fov_center for c in self.cameras], dtype=float)
        return np.linalg.norm(peds[:, None, :] - centers[None, :, :], axis=-1)

    @cached_property
    def covered(self) -> np.ndarray:
        radii = np.array([c.fov_radius_m for c in self.cameras], dtype=float)
        return self.distances <= radii

    @cached_property
    def detect_probs(self) -> np.ndarray:
        """[P, K] per-camera detection probability, zero outside the FoV."""
        radii = np.array([c.fov_radius_m for c in self.cameras], dtype=float)
        pc = np.array([c.detect_prob_center for c in self.cameras], dtype=float)
        pe = np.array([c.detect_prob_edge for c in self.cameras], dtype=float)
        frac = np.clip(self.distances / radii, 0.0, 1.0)
        return np.where(self.covered, pc - (pc - pe) * frac, 0.0)

    @cached_property
    def false_pos_rates(self) -> np.ndarray:
        return np.array([c.false_pos_rate for c in self.cameras], dtype=float)


def coverage_count(world: World, ped: Pedestrian) -> int:
    x, y = ped.position
    if not (0.0 <= x <= world.width_m and 0.0 <= y <= world.height_m):
        raise ValueError("pedestrian outside the world")
    return sum(
        math.dist(ped.position, c.fov_center) <= c.fov_radius_m for c in world.cameras
    )


def perceived_objects(world: World) -> np.ndarray:
    """chi_k: number of pedestrians inside each camera's FoV disk."""
    return world.covered.sum(axis=0).astype(int)


# -- sampling -----------------------------------------------------------------


def draw_detections(world: World, rng: np.random.Generator, n_trials: int | None = None):
    """Draw the per-(pedestrian, camera) hits and per-camera false positives.

    Returns ``(hits, fp)`` with shapes ``[P, K]`` and ``[K]``, or with a leading
    trial axis when ``n_trials`` is given.  Uniforms are drawn before the
    Poisson counts.
    """
    lead = () if n_trials is None else (n_trials,)
    n_ped, n_cam = len(world.pedestrians), len(world.cameras)
    u = rng.random(lead + (n_ped, n_cam))
    fp = rng.poisson(np.broadcast_to(world.false_pos_rates, lead + (n_cam,)))
    return u < world.detect_probs, fp


def _tp_fp(hits: np.ndarray, fp: np.ndarray, cols: Sequence[int]):
    cols = list(cols)
    if not cols:
        shape = hits.shape[:-2]
        return np.zeros(shape, dtype=int), np.zeros(shape, dtype=int)
    tp = hits[..., cols].any(axis=-1).sum(axis=-1)
    return tp, fp[..., cols].sum(axis=-1)


def detect(world: World, selected: Iterable[int], rng: np.random.Generator) -> DetectionOutcome:
    cols = world.columns(selected)
    hits, fp = draw_detections(world, rng)
    tp, n_fp = _tp_fp(hits, fp, cols)
    return DetectionOutcome(tp=int(tp), fn_=len(world.pedestrians) - int(tp), fp=int(n_fp))


def moda(outcome: DetectionOutcome) -> float:
    n = outcome.tp + outcome.fn_
    if n <= 0:
        raise ValueError("MODA undefined for empty scene")
    return 1.0 - (outcome.fn_ + outcome.fp) / n


def moda_from_counts(tp, fp, n_ped: int):
    """Vectorised MODA given arrays of TP and FP counts."""
    if n_ped <= 0:
        raise ValueError("MODA undefined for empty scene")
    return 1.0 - ((n_ped - np.asarray(tp)) + np.asarray(fp)) / n_ped


def modp(
    world: World,
    selected: Iterable[int],
    rng: np.random.Generator,
    loc_std_m: float = 0.3,
    err_max_m: float = 1.0,
) -> float:
    """Mean localisation score of true positives.

    Each true positive gets an error ``loc_std_m / sqrt(c) * |z|`` where ``c``
    is the number of selected cameras covering it, and scores
    ``1 - min(err / err_max_m, 1)``.  Detection draws come first, then one
    standard normal per pedestrian.
    """
    cols = world.columns(selected)
    hits, _ = draw_detections(world, rng)
    z = rng.standard_normal(len(world.pedestrians))
    out = float(modp_from_draws(world, hits, z, cols, loc_std_m, err_max_m))
    if np.isnan(out):
        raise ValueError("MODP undefined: no true positives")
    return out


def modp_from_draws(world: World, hits: np.ndarray, z: np.ndarray, cols: Sequence[int],
                    loc_std_m: float = 0.3, err_max_m: float = 1.0):
    """MODP of column set ``cols`` on given draws; nan where there is no true positive.

    ``hits`` is ``[..., P, K]`` and ``z`` is ``[..., P]`` with the same leading shape.
    """
    cols = list(cols)
    lead = hits.shape[:-2]
    if not cols:
        return np.full(lead, np.nan) if lead else np.nan
    tp = hits[..., cols].any(axis=-1)
    cover = np.maximum(world.covered[:, cols].sum(axis=1), 1)
    score = 1.0 - np.minimum(loc_std_m / np.sqrt(cover) * np.abs(z) / err_max_m, 1.0)
    n_tp = tp.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(n_tp > 0, (score * tp).sum(axis=-1) / n_tp, np.nan)
    return out if lead else float(out)


def moda_gain(
    world: World,
    base_set: Iterable[int],
    k: int,
    n_trials: int,
    rng: np.random.Generator,
) -> float:
    """Mean MODA gain from adding camera ``k`` to ``base_set``.

    Both sets are scored on the same draws in every trial.
    """
    base = set(base_set)
    if k in base:
        raise ValueError(f"camera {k} already in base set")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    base_cols = world.columns(base)
    with_cols = world.columns(base | {k})
    hits, fp = draw_detections(world, rng, n_trials)
    n = len(world.pedestrians)
    m_base = moda_from_counts(*_tp_fp(hits, fp, base_cols), n)
    m_with = moda_from_counts(*_tp_fp(hits, fp, with_cols), n)
    return float(np.mean(m_with - m_base))


def expected_moda(world: World, selected: Iterable[int]) -> float:
    """Closed-form E[MODA] under the independent-detection model."""
    cols = world.columns(selected)
    n = len(world.pedestrians)
    if n == 0:
        raise ValueError("MODA undefined for empty scene")
    if not cols:
        return 0.0
    p_miss = np.prod(1.0 - world.detect_probs[:, cols], axis=1)
    e_tp = float(np.sum(1.0 - p_miss))
    return 1.0 - (n - e_tp + float(world.false_pos_rates[cols].sum())) / n


def priority_order(world: World) -> list[int]:
    """Camera ids by descending chi, ties to the lower id; ego camera first."""
    chi = perceived_objects(world)
    order = sorted(range(len(world.cameras)), key=lambda i: (-chi[i], world.cameras[i].id))
    return [world.cameras[i].id for i in order]


def greedy_order(world: World, ego: int | None = None) -> list[int]:
    """Ego camera first, then repeatedly the camera with the largest expected gain.

    The ego defaults to the highest-chi camera.
    """
    if ego is None:
        ego = priority_order(world)[0]
    chosen = [ego]
    remaining = [c for c in world.camera_ids if c != ego]
    while remaining:
        base = expected_moda(world, chosen)
        gains = [expected_moda(world, chosen + [c]) - base for c in remaining]
        best = remaining[int(np.argmax(gains))]
        chosen.append(best)
        remaining.remove(best)
    return chosen


# -- construction and persistence ---------------------------------------------

_DEFAULT_FOV_CENTERS = [
    (3.5, 5.0), (8.5, 9.0), (3.5, 15.0), (8.5, 19.5),
    (3.5, 25.0), (8.5, 29.0), (6.0, 32.5),
]


def default_world(
    seed: int = 7,
    n_pedestrians: int = 30,
    fov_radius_m: float = 6.5,
    false_pos_rate: float = 0.05,
) -> World:
    """Seven cameras over a 12 m x 36 m area with uniformly placed pedestrians."""
    rng = np.random.default_rng(seed)
    cams = []
    for k, (cx, cy) in enumerate(_DEFAULT_FOV_CENTERS):
        # mounted on the nearer long wall, looking inwards
        px = 0.0 if cx < DEFAULT_WIDTH_M / 2 else DEFAULT_WIDTH_M
        cams.append(
            Camera(
                id=k,
                position=(px, cy),
                fov_center=(cx, cy),
                fov_radius_m=fov_radius_m,
                false_pos_rate=false_pos_rate,
            )
        )
    xy = rng.uniform((0.0, 0.0), (DEFAULT_WIDTH_M, DEFAULT_HEIGHT_M), size=(n_pedestrians, 2))
    peds = [Pedestrian(id=i, position=(float(x), float(y))) for i, (x, y) in enumerate(xy)]
    return World(DEFAULT_WIDTH_M, DEFAULT_HEIGHT_M, DEFAULT_CELL_M, tuple(cams), tuple(peds), seed)


def with_false_pos_rate(world: World, rate: float) -> World:
    return replace(world, cameras=tuple(replace(c, false_pos_rate=rate) for c in world.cameras))


def world_to_dict(world: World) -> dict:
    return {
        "geometry": {
            "width_m": world.width_m,
            "height_m": world.height_m,
            "cell_size_m": world.cell_size_m,
        },
        "rng_seed": world.rng_seed,
        "cameras": [
            {**asdict(c), "position": list(c.position), "fov_center": list(c.fov_center)}
            for c in world.cameras
        ],
        "pedestrians": [{"id": p.id, "position": list(p.position)} for p in world.pedestrians],
    }


def world_from_dict(doc: dict) -> World:
    geo = doc["geometry"]
    cams = tuple(
        Camera(
            **{
                **c,
                "position": tuple(c["position"]),
                "fov_center": tuple(c["fov_center"]),
            }
        )
        for c in doc["cameras"]
    )
    peds = tuple(Pedestrian(id=p["id"], position=tuple(p["position"])) for p in doc["pedestrians"])
    return World(
        width_m=geo["width_m"],
        height_m=geo["height_m"],
        cell_size_m=geo["cell_size_m"],
        cameras=cams,
        pedestrians=peds,
        rng_seed=doc.get("rng_seed", 0),
    )


def save_world(world: World, path: str | Path) -> None:
    Path(path).write_text(json.dumps(world_to_dict(world), indent=2) + "\n")


def load_world(path: str | Path) -> World:
    return world_from_dict(json.loads(Path(path).read_text()))
