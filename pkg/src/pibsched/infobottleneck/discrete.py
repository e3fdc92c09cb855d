"""Exact prioritized-IB quantities on small discrete alphabets.

Mutual information and entropy are in bits.  The encoder only sees X, so the
chain Y - X - Z holds by construction and every joint is an exact sum.
Variational tables are floored at ``PROB_FLOOR`` and renormalised so that
logarithms stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

PROB_FLOOR = 1e-12
SUM_TOL = 1e-12
MAX_X, MAX_Y, MAX_Z, MAX_V = 16, 8, 8, 8


def _check_stochastic(name: str, table: np.ndarray, axis: int | None) -> None:
    if not np.all(np.isfinite(table)) or np.any(table < 0):
        raise ValueError(f"{name}: entries must be finite and non-negative")
    sums = table.sum() if axis is None else table.sum(axis=axis)
    if np.any(np.abs(sums - 1.0) > SUM_TOL):
        what = "total" if axis is None else "rows"
        raise ValueError(f"{name}: {what} must sum to 1 (got {np.ravel(sums)})")


def floor_rows(table, floor: float = PROB_FLOOR) -> np.ndarray:
    t = np.maximum(np.asarray(table, dtype=float), floor)
    return t / t.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class DiscreteJoint:
    p_xy: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p_xy, dtype=float)
        if p.ndim != 2:
            raise ValueError("p_xy must be a 2-D table")
        _check_stochastic("p_xy", p, None)
        object.__setattr__(self, "p_xy", p)

    @property
    def p_x(self) -> np.ndarray:
        return self.p_xy.sum(axis=1)

    @property
    def p_y(self) -> np.ndarray:
        return self.p_xy.sum(axis=0)


@dataclass(frozen=True)
class Encoder:
    p_z_given_x: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.p_z_given_x, dtype=float)
        if t.ndim != 2:
            raise ValueError("p_z_given_x must be a 2-D table")
        _check_stochastic("encoder p(z|x)", t, 1)
        object.__setattr__(self, "p_z_given_x", t)


@dataclass(frozen=True)
class VariationalDecoder:
    q_y_given_z: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.q_y_given_z, dtype=float)
        _check_stochastic("decoder q(y|z)", t, 1)
        object.__setattr__(self, "q_y_given_z", floor_rows(t))


@dataclass(frozen=True)
class SideInfoModel:
    p_v_given_z: np.ndarray
    q_z_given_v: np.ndarray
    q_v: np.ndarray

    def __post_init__(self):
        pvz = np.asarray(self.p_v_given_z, dtype=float)
        qzv = np.asarray(self.q_z_given_v, dtype=float)
        qv = np.asarray(self.q_v, dtype=float)
        _check_stochastic("p(v|z)", pvz, 1)
        _check_stochastic("q(z|v)", qzv, 1)
        _check_stochastic("q(v)", qv, None)
        if qzv.shape != (pvz.shape[1], pvz.shape[0]) or qv.shape != (pvz.shape[1],):
            raise ValueError("side-information table shapes disagree")
        object.__setattr__(self, "p_v_given_z", pvz)
        object.__setattr__(self, "q_z_given_v", floor_rows(qzv))
        object.__setattr__(self, "q_v", floor_rows(qv))


def _joint(p_xy) -> DiscreteJoint:
    return p_xy if isinstance(p_xy, DiscreteJoint) else DiscreteJoint(np.asarray(p_xy))


def _xlogy_ratio(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    m = p > 0
    out[m] = p[m] * np.log2(p[m] / q[m])
    return out


def entropy(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("not a probability vector")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def mutual_information(p_xy) -> float:
    p = _joint(p_xy).p_xy
    outer = np.outer(p.sum(axis=1), p.sum(axis=0))
    return float(_xlogy_ratio(p, outer).sum())


def joint_xz(p_x: np.ndarray, encoder: Encoder) -> np.ndarray:
    return np.asarray(p_x)[:, None] * encoder.p_z_given_x


def joint_zy(p_xy, encoder: Encoder) -> np.ndarray:
    p = _joint(p_xy).p_xy
    if p.shape[0] != encoder.p_z_given_x.shape[0]:
        raise ValueError("encoder input alphabet does not match |X|")
    return encoder.p_z_given_x.T @ p


def joint_zv(p_x: np.ndarray, encoder: Encoder, side: SideInfoModel) -> np.ndarray:
    p_z = np.asarray(p_x) @ encoder.p_z_given_x
    if side.p_v_given_z.shape[0] != p_z.shape[0]:
        raise ValueError("side-information table does not match |Z|")
    return p_z[:, None] * side.p_v_given_z


def exp_weight(w_k: float, w0: float) -> float:
    return float(np.exp(w0 - w_k))


def _per_camera(x, k: int, name: str) -> list:
    if isinstance(x, (list, tuple)):
        if len(x) != k:
            raise ValueError(f"{name}: expected {k} entries, got {len(x)}")
        return list(x)
    return [x] * k


def _weights(weights) -> tuple[np.ndarray, float]:
    if hasattr(weights, "w"):
        return np.asarray(weights.w, dtype=float), float(weights.w0)
    return np.asarray(weights, dtype=float).ravel(), 1.0


def ib_objective(p_xy, encoder, weights, lam: float) -> float:
    """Sum over cameras of ``-w_k I(Z;Y) + lam * exp(w0 - w_k) I(X;Z)``.

    ``p_xy`` and ``encoder`` may be single objects shared by every camera or
    per-camera sequences.
    """
    w, w0 = _weights(weights)
    joints = [_joint(j) for j in _per_camera(p_xy, len(w), "p_xy")]
    encs = _per_camera(encoder, len(w), "encoder")
    total = 0.0
    for wk, j, enc in zip(w, joints, encs):
        izy = mutual_information(joint_zy(j, enc))
        ixz = mutual_information(joint_xz(j.p_x, enc))
        total += -wk * izy + lam * exp_weight(wk, w0) * ixz
    return float(total)


def variational_lower_bound(p_xy, encoder: Encoder, decoder: VariationalDecoder) -> float:
    """``E_p(y,z)[log2 q(y|z)] + H(Y)``, a lower bound on I(Z;Y)."""
    j = _joint(p_xy)
    pzy = joint_zy(j, encoder)
    q = decoder.q_y_given_z
    if q.shape != pzy.shape:
        raise ValueError("decoder shape must be |Z| x |Y|")
    m = pzy > 0
    return float(np.sum(pzy[m] * np.log2(q[m])) + entropy(j.p_y))


def cross_entropy_term(p_xy, encoder: Encoder, decoder: VariationalDecoder) -> float:
    """``E[-log2 q(Y|Z)]`` under the induced joint."""
    pzy = joint_zy(_joint(p_xy), encoder)
    m = pzy > 0
    return float(-np.sum(pzy[m] * np.log2(decoder.q_y_given_z[m])))


def communication_upper_bound(encoder: Encoder, p_x, side: SideInfoModel,
                              w_k: float, w0: float = 1.0) -> float:
    """``E_p(z,v)[-log2 q(z|v) q(v)] * exp(w0 - w_k)``.

    Bounds ``exp(w0 - w_k) I(X;Z)`` from above through H(Z,V) >= H(Z) >= I(X;Z).
    """
    pzv = joint_zv(np.asarray(p_x, dtype=float), encoder, side)
    q = side.q_z_given_v.T * side.q_v[None, :]  # q(z, v)
    m = pzv > 0
    cost = float(-np.sum(pzv[m] * np.log2(q[m])))
    return cost * exp_weight(w_k, w0)


def loss_l2(p_xy, encoder, decoder, side, weights, lam: float, r_max: float,
            include_entropy_constant: bool = False) -> float:
    """Sum over cameras of ``w_k E[-log2 q(Y|Z)] + lam * min(r_max, comm_k)``.

    With ``include_entropy_constant`` the dropped ``-w_k H(Y)`` is added back,
    turning the first summand into an upper bound on ``-w_k I(Z;Y)``.
    """
    w, w0 = _weights(weights)
    k = len(w)
    joints = [_joint(j) for j in _per_camera(p_xy, k, "p_xy")]
    encs = _per_camera(encoder, k, "encoder")
    decs = _per_camera(decoder, k, "decoder")
    sides = _per_camera(side, k, "side")
    total = 0.0
    for wk, j, enc, dec, sd in zip(w, joints, encs, decs, sides):
        first = wk * cross_entropy_term(j, enc, dec)
        if include_entropy_constant:
            first -= wk * entropy(j.p_y)
        comm = communication_upper_bound(enc, j.p_x, sd, wk, w0)
        total += first + lam * min(r_max, comm)
    return float(total)


def exact_posterior(p_xy, encoder: Encoder) -> VariationalDecoder:
    """The true p(y|z); unreachable z rows fall back to p(y)."""
    j = _joint(p_xy)
    pzy = joint_zy(j, encoder)
    pz = pzy.sum(axis=1, keepdims=True)
    post = np.where(pz > 0, pzy / np.where(pz > 0, pz, 1.0), j.p_y[None, :])
    return VariationalDecoder(post / post.sum(axis=1, keepdims=True))


def exact_side_model(p_x, encoder: Encoder, p_v_given_z: np.ndarray) -> SideInfoModel:
    """Side model whose q(z|v) q(v) equals the true p(z, v) where p(v) > 0."""
    p_z = np.asarray(p_x, dtype=float) @ encoder.p_z_given_x
    pzv = p_z[:, None] * np.asarray(p_v_given_z, dtype=float)
    pv = pzv.sum(axis=0)
    nz = pv > 0
    qzv = np.full((pzv.shape[1], pzv.shape[0]), 1.0 / pzv.shape[0])
    qzv[nz] = (pzv[:, nz] / pv[nz]).T
    return SideInfoModel(p_v_given_z, qzv / qzv.sum(axis=1, keepdims=True), pv / pv.sum())


# -- random instances ----------------------------------------------------------


def random_simplex(rng: np.random.Generator, shape: Sequence[int], concentration: float = 1.0,
                   sparsity: float = 0.0) -> np.ndarray:
    """Dirichlet rows along the last axis, optionally with exact zeros."""
    a = rng.gamma(concentration, size=tuple(shape))
    if sparsity > 0:
        zero = rng.random(a.shape) < sparsity
        zero[..., 0] &= ~np.all(zero, axis=-1)  # keep at least one entry
        a = np.where(zero, 0.0, a)
    a = np.where(a.sum(axis=-1, keepdims=True) > 0, a, 1.0)
    return a / a.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class IBInstance:
    joint: DiscreteJoint
    encoder: Encoder
    decoder: VariationalDecoder
    side: SideInfoModel
    w_k: float
    w0: float = 1.0


def random_instance(rng: np.random.Generator, max_x: int = 8, max_y: int = 8,
                    max_z: int = 8, max_v: int = 8) -> IBInstance:
    nx, ny, nz, nv = (int(rng.integers(2, m + 1)) for m in (max_x, max_y, max_z, max_v))
    conc = float(rng.choice([0.2, 1.0, 5.0]))
    sparsity = float(rng.choice([0.0, 0.3]))
    p_xy = random_simplex(rng, (nx * ny,), conc, sparsity).reshape(nx, ny)
    return IBInstance(
        joint=DiscreteJoint(p_xy),
        encoder=Encoder(random_simplex(rng, (nx, nz), conc, sparsity)),
        decoder=VariationalDecoder(random_simplex(rng, (nz, ny), conc)),
        side=SideInfoModel(
            random_simplex(rng, (nz, nv), conc, sparsity),
            random_simplex(rng, (nv, nz), conc),
            random_simplex(rng, (nv,), conc),
        ),
        w_k=float(rng.uniform(0.0, 1.0)),
        w0=1.0,
    )
