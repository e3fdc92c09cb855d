"""Super arms and the five feasibility constraints of the camera scheduling problem.

Constraint codes:

    a  camera-count band      k_min <= |selected cameras| <= k_max
    b  fusion capacity        psi_fusion_required <= psi_remaining[s0]
    c  unique path            each selected camera has exactly one path, ending at s0
    d  connection cap         connections into edge server s (plus background load) <= e_max
    e  path latency           T^{c->e}_{k,s} + T^{e->e}_{s,s0} <= t_upper
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class CameraToEdge:
    k: int
    s: int


@dataclass(frozen=True)
class EdgeToFusion:
    s: int
    s0: int


@dataclass(frozen=True)
class SuperArm:
    """Joint selection of camera->edge and edge->fusion connections.

    ``paths`` holds ``(camera, edge, fusion)`` triples.  A well-formed super arm
    has one triple per selected camera, all ending at ``fusion``; malformed ones
    are representable so the constraint checker can reject them.
    """

    paths: tuple[tuple[int, int, int], ...]
    fusion: int

    @classmethod
    def from_selections(cls, selections: Mapping[int, tuple[int, int]], fusion: int) -> "SuperArm":
        return cls(tuple(sorted((k, s, s0) for k, (s, s0) in selections.items())), fusion)

    @property
    def cameras(self) -> list[int]:
        return sorted({k for k, _, _ in self.paths})

    @property
    def selections(self) -> dict[int, tuple[int, int]]:
        return {k: (s, s0) for k, s, s0 in self.paths}

    def base_arms(self) -> list:
        arms = []
        for k, s, s0 in self.paths:
            arms.append(CameraToEdge(k, s))
            arms.append(EdgeToFusion(s, s0))
        return arms


@dataclass(frozen=True)
class Constraints:
    k_min: int = 1
    k_max: int = 64
    psi_fusion_required: float = 1.0
    psi_remaining: tuple[float, ...] = ()
    psi_forward: float = 0.0  # exposed but gates nothing
    e_max: int = 64
    t_upper: float = float("inf")

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise ValueError("k_min must not exceed k_max")
        if self.k_min < 0 or self.e_max < 0 or self.psi_fusion_required < 0:
            raise ValueError("constraint capacities must be non-negative")
        if any(p < 0 for p in self.psi_remaining):
            raise ValueError("psi_remaining must be non-negative")
        object.__setattr__(self, "psi_remaining", tuple(float(p) for p in self.psi_remaining))


@dataclass(frozen=True)
class Violation:
    code: str
    camera: int | None = None
    server: int | None = None
    detail: str = field(default="", compare=False)


@dataclass(frozen=True)
class PathDelays:
    """Latencies used by constraint (e).

    ``c2e[k, s]`` is camera-to-edge transmission time and ``e2e[s, s0]`` the
    edge-to-fusion forwarding time (zero on the diagonal).
    """

    c2e: np.ndarray
    e2e: np.ndarray

    def path(self, k: int, s: int, s0: int) -> float:
        return float(self.c2e[k, s]) + (0.0 if s == s0 else float(self.e2e[s, s0]))


def check_constraints(sa: SuperArm, c: Constraints, delays: PathDelays,
                      loads: Sequence[int] | None = None) -> list[Violation]:
    """Every violated constraint, or an empty list when the super arm is feasible."""
    out: list[Violation] = []
    per_camera = Counter(k for k, _, _ in sa.paths)
    n_sel = len(per_camera)
    if not c.k_min <= n_sel <= c.k_max:
        out.append(Violation("a", detail=f"{n_sel} cameras outside [{c.k_min}, {c.k_max}]"))
    psi = c.psi_remaining[sa.fusion] if sa.fusion < len(c.psi_remaining) else float("inf")
    if c.psi_fusion_required > psi:
        out.append(Violation("b", server=sa.fusion,
                             detail=f"fusion needs {c.psi_fusion_required}, server has {psi}"))
    for k in sorted(per_camera):
        ends = [s0 for kk, _, s0 in sa.paths if kk == k]
        if per_camera[k] != 1 or ends[0] != sa.fusion:
            out.append(Violation("c", camera=k, detail=f"paths ending at {ends}, fusion {sa.fusion}"))
    conn = Counter(s for _, s, _ in sa.paths)
    for s in sorted(conn):
        extra = int(loads[s]) if loads is not None else 0
        if conn[s] + extra > c.e_max:
            out.append(Violation("d", server=s, detail=f"{conn[s]}+{extra} connections > {c.e_max}"))
    late = sorted({k for k, s, s0 in sa.paths if delays.path(k, s, s0) > c.t_upper})
    out.extend(Violation("e", camera=k) for k in late)
    return out


def zeroed_cameras(sa: SuperArm, violations: Sequence[Violation]) -> set[int]:
    """Cameras whose reward must be forced to zero.

    Global violations (a, b) hit every selected camera; (c, e) hit the
    offending camera; (d) hits every camera whose first hop is the
    overloaded server.
    """
    cams = set(sa.cameras)
    hit: set[int] = set()
    for v in violations:
        if v.code in ("a", "b"):
            return cams
        if v.code in ("c", "e"):
            hit.add(v.camera)
        elif v.code == "d":
            hit.update(k for k, s, _ in sa.paths if s == v.server)
    return hit
