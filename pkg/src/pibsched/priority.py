"""Dual-layer MLP priority scorer, softmax weighting and the L1 training loss.

The scorer maps a camera's normalised delay and normalised object count to
a scalar score ``p = w2 . relu(W1 [d, chi] + b1) + b2``; scores of the
cameras in one frame are turned into weights with a softmax.  Training
minimises

    L1 = sum_k  1[d_k <= eps] (w_k - W_target)^2 / chi_k  +  1[d_k > eps] w_k^2

by full-batch gradient descent with hand-derived gradients.  A camera sitting
exactly on ``eps`` counts as on time.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_HIDDEN = 16
DEFAULT_EPS = 0.1
DEFAULT_LR = 0.05
W0 = 1.0


@dataclass
class PriorityNet:
    w1: np.ndarray  # [hidden, 2]
    b1: np.ndarray  # [hidden]
    w2: np.ndarray  # [hidden]
    b2: float

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=float).reshape(-1, 2)
        self.b1 = np.asarray(self.b1, dtype=float).reshape(-1)
        self.w2 = np.asarray(self.w2, dtype=float).reshape(-1)
        self.b2 = float(self.b2)
        h = self.w1.shape[0]
        if h < 1 or self.b1.shape != (h,) or self.w2.shape != (h,):
            raise ValueError("inconsistent PriorityNet shapes")

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def init(cls, rng: np.random.Generator, hidden: int = DEFAULT_HIDDEN, scale: float = 0.5):
        return cls(
            w1=rng.normal(0.0, scale, size=(hidden, 2)),
            b1=rng.normal(0.0, 0.1, size=hidden),
            w2=rng.normal(0.0, scale, size=hidden),
            b2=0.0,
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])

    @classmethod
    def from_flat(cls, theta: np.ndarray, hidden: int) -> "PriorityNet":
        theta = np.asarray(theta, dtype=float)
        i = 2 * hidden
        return cls(theta[:i].reshape(hidden, 2), theta[i:i + hidden],
                   theta[i + hidden:i + 2 * hidden], theta[-1])

    def copy(self) -> "PriorityNet":
        return PriorityNet(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2)

    def check_finite(self) -> None:
        if not np.all(np.isfinite(self.flat())):
            raise ValueError("PriorityNet has non-finite parameters")


@dataclass(frozen=True)
class CameraObservation:
    d_norm: float
    chi_norm: float
    raw_delay_s: float = 0.0
    chi: int = 0

    @classmethod
    def from_raw(cls, delay_s: float, chi: int, d_max: float, chi_lo: float, chi_hi: float):
        if d_max <= 0 or chi_hi <= chi_lo:
            raise ValueError("need d_max > 0 and chi_hi > chi_lo")
        d = min(max(delay_s / d_max, 0.0), 1.0)
        c = min(max((chi - chi_lo) / (chi_hi - chi_lo), 0.0), 1.0)
        return cls(d_norm=d, chi_norm=c, raw_delay_s=delay_s, chi=chi)


@dataclass(frozen=True)
class PriorityWeights:
    w: np.ndarray
    w0: float = W0


def _as_inputs(obs) -> np.ndarray:
    if isinstance(obs, CameraObservation):
        return np.array([[obs.d_norm, obs.chi_norm]])
    arr = np.asarray(
        [[o.d_norm, o.chi_norm] if isinstance(o, CameraObservation) else o for o in obs],
        dtype=float,
    )
    return arr.reshape(-1, 2)


def score(net: PriorityNet, obs) -> float | np.ndarray:
    """Priority score for one observation, or an array of scores for many."""
    net.check_finite()
    x = _as_inputs(obs)
    h = np.maximum(x @ net.w1.T + net.b1, 0.0)
    p = h @ net.w2 + net.b2
    return float(p[0]) if isinstance(obs, CameraObservation) else p


def softmax_weights(scores: Sequence[float], w0: float = W0) -> PriorityWeights:
    p = np.asarray(scores, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("softmax of an empty score vector")
    e = np.exp(p - p.max())
    return PriorityWeights(w=e / e.sum(), w0=w0)


def on_time_mask(d_norm: np.ndarray, eps: float) -> np.ndarray:
    return np.asarray(d_norm) <= eps


def _frame_loss_and_grad_w(w, on_time, chi_norm, w_target=None):
    k_on = int(on_time.sum())
    if k_on and np.any(chi_norm[on_time] <= 0):
        raise ValueError("on-time camera with chi_norm = 0 makes L1 undefined")
    if w_target is not None:
        target = float(w_target)
    else:
        target = 1.0 / k_on if k_on else 0.0
    safe_chi = np.where(on_time, chi_norm, 1.0)
    diff = w - target
    loss = np.where(on_time, diff * diff / safe_chi, w * w)
    grad = np.where(on_time, 2.0 * diff / safe_chi, 2.0 * w)
    return float(loss.sum()), grad


def _frame_arrays(frame):
    x = _as_inputs(frame)
    return x, x[:, 0], x[:, 1]


def loss_l1(net: PriorityNet, observations, eps: float = DEFAULT_EPS,
            on_time: Sequence[bool] | None = None, w_target: float | None = None) -> float:
    """L1 for one frame of K cameras.

    ``on_time`` overrides the ``d_norm <= eps`` rule when given; ``w_target``
    defaults to one over the number of on-time cameras.
    """
    x, d, chi = _frame_arrays(observations)
    mask = on_time_mask(d, eps) if on_time is None else np.asarray(on_time, dtype=bool)
    w = softmax_weights(score(net, x)).w
    return _frame_loss_and_grad_w(w, mask, chi, w_target)[0]


def loss_and_grad(net: PriorityNet, dataset, eps: float = DEFAULT_EPS, masks=None):
    """Mean L1 over frames and its analytic gradient as a flat vector."""
    gw1 = np.zeros_like(net.w1)
    gb1 = np.zeros_like(net.b1)
    gw2 = np.zeros_like(net.w2)
    gb2 = 0.0
    total = 0.0
    for i, frame in enumerate(dataset):
        x, d, chi = _frame_arrays(frame)
        mask = on_time_mask(d, eps) if masks is None else np.asarray(masks[i], dtype=bool)
        pre = x @ net.w1.T + net.b1
        h = np.maximum(pre, 0.0)
        p = h @ net.w2 + net.b2
        w = softmax_weights(p).w
        loss, dl_dw = _frame_loss_and_grad_w(w, mask, chi)
        total += loss
        # softmax Jacobian: dw_k/dp_j = w_k (delta_kj - w_j)
        dl_dp = w * (dl_dw - np.dot(dl_dw, w))
        gw2 += h.T @ dl_dp
        gb2 += dl_dp.sum()
        dpre = np.outer(dl_dp, net.w2) * (pre > 0)
        gw1 += dpre.T @ x
        gb1 += dpre.sum(axis=0)
    n = len(dataset)
    grad = np.concatenate([gw1.ravel(), gb1, gw2, [gb2]]) / n
    return total / n, grad


def finite_difference_grad(net: PriorityNet, dataset, h: float = 1e-5,
                           eps: float = DEFAULT_EPS, masks=None) -> np.ndarray:
    """Central differences of the mean L1 loss over every flat parameter."""
    theta = net.flat()
    out = np.empty_like(theta)
    for i in range(len(theta)):
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        f_up = loss_and_grad(PriorityNet.from_flat(up, net.hidden), dataset, eps, masks)[0]
        f_dn = loss_and_grad(PriorityNet.from_flat(dn, net.hidden), dataset, eps, masks)[0]
        out[i] = (f_up - f_dn) / (2 * h)
    return out


GRAD_SCALE_FLOOR = 1e-8  # above central-difference round-off (~1e-16 / h)


def gradient_relative_error(net: PriorityNet, dataset, h: float = 1e-5,
                            eps: float = DEFAULT_EPS, masks=None) -> float:
    """max |analytic - numeric| / max(|analytic|_inf, |numeric|_inf, GRAD_SCALE_FLOOR)."""
    analytic = loss_and_grad(net, dataset, eps, masks)[1]
    numeric = finite_difference_grad(net, dataset, h, eps, masks)
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), GRAD_SCALE_FLOOR)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def train_l1(net: PriorityNet, dataset, lr: float = DEFAULT_LR, epochs: int = 500,
             rng: np.random.Generator | None = None, eps: float = DEFAULT_EPS,
             masks=None, history: list | None = None) -> PriorityNet:
    """Full-batch gradient descent on the mean L1 loss.

    ``rng`` is accepted for interface symmetry; plain gradient descent draws
    nothing.  Raises ``FloatingPointError`` if the loss stops being finite.
    """
    if len(dataset) == 0:
        raise ValueError("empty training set")
    hidden = net.hidden
    theta = net.flat()
    for epoch in range(epochs):
        cur = PriorityNet.from_flat(theta, hidden)
        loss, grad = loss_and_grad(cur, dataset, eps, masks)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"L1 training diverged at epoch {epoch}")
        if history is not None:
            history.append(loss)
        with np.errstate(invalid="ignore", over="ignore"):
            theta = theta - lr * grad
        if not np.all(np.isfinite(theta)):
            raise FloatingPointError(f"L1 training diverged at epoch {epoch}")
    out = PriorityNet.from_flat(theta, hidden)
    if history is not None:
        history.append(loss_and_grad(out, dataset, eps, masks)[0])
    log.debug("train_l1 finished after %d epochs", epochs)
    return out


# -- synthetic data and persistence -------------------------------------------


def synthetic_dataset(rng: np.random.Generator, n_frames: int, k: int,
                      late_frac: float = 0.3, eps: float = DEFAULT_EPS):
    """Frames of K cameras with random delays and object counts.

    On-time cameras draw ``d_norm`` below ``eps``; late ones above it.
    """
    frames = []
    for _ in range(n_frames):
        late = rng.random(k) < late_frac
        d = np.where(late, rng.uniform(eps + 0.05, 1.0, k), rng.uniform(0.0, eps * 0.95, k))
        chi = rng.uniform(0.1, 1.0, k)
        frames.append(np.column_stack([d, chi]))
    return frames


def save_net(net: PriorityNet, path: str | Path) -> None:
    doc = {
        "layers": [
            {"name": "w1", "shape": list(net.w1.shape), "values": net.w1.ravel().tolist()},
            {"name": "b1", "shape": list(net.b1.shape), "values": net.b1.tolist()},
            {"name": "w2", "shape": list(net.w2.shape), "values": net.w2.tolist()},
            {"name": "b2", "shape": [], "values": [net.b2]},
        ]
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_net(path: str | Path) -> PriorityNet:
    doc = json.loads(Path(path).read_text())
    parts = {}
    for layer in doc["layers"]:
        vals = np.asarray(layer["values"], dtype=float)
        parts[layer["name"]] = vals.reshape(layer["shape"]) if layer["shape"] else vals[0]
    return PriorityNet(parts["w1"], parts["b1"], parts["w2"], parts["b2"])


def read_dataset_csv(path: str | Path):
    """Read rows of (d_norm, chi_norm, on_time[, frame]) into frames and masks.

    Rows sharing a ``frame`` value form one softmax group; without that
    column the whole file is a single frame.
    """
    frames: dict[str, list] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = row.get("frame", "0")
            on = row["on_time"].strip().lower() in ("1", "true", "yes")
            frames.setdefault(key, []).append(
                (float(row["d_norm"]), float(row["chi_norm"]), on))
    data, masks = [], []
    for rows in frames.values():
        data.append(np.array([[d, c] for d, c, _ in rows]))
        masks.append(np.array([on for _, _, on in rows]))
    return data, masks
