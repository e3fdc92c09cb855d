"""Linear-Gaussian multi-frame correlation model.

The next latent given the previous ``order`` latents is Gaussian with a mean
linear in the history and a constant variance.  Divergences are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_NOISE_VAR = 1e-12


@dataclass(frozen=True)
class GaussianARModel:
    coeffs: np.ndarray  # coeffs[i] multiplies z_{t-1-i}
    noise_var: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "coeffs", c)
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def spectral_radius(self) -> float:
        companion = np.zeros((self.order, self.order))
        companion[0] = self.coeffs
        companion[1:, :-1] = np.eye(self.order - 1)
        return float(np.max(np.abs(np.linalg.eigvals(companion))))

    def is_stable(self) -> bool:
        return self.spectral_radius() < 1.0

    def conditional_mean(self, history: np.ndarray) -> np.ndarray:
        """Means for rows of ``history`` laid out as (z_{t-1}, ..., z_{t-order})."""
        h = np.atleast_2d(history)
        width = max(h.shape[1], self.order)
        c = np.zeros(width)
        c[: self.order] = self.coeffs
        hh = np.zeros((h.shape[0], width))
        hh[:, : h.shape[1]] = h
        return hh @ c


def gaussian_kl(mu1, var1, mu2, var2):
    """KL( N(mu1, var1) || N(mu2, var2) ) in nats."""
    mu1, var1, mu2, var2 = (np.asarray(a, dtype=float) for a in (mu1, var1, mu2, var2))
    if np.any(var1 <= 0) or np.any(var2 <= 0):
        raise ValueError("variances must be positive")
    kl = 0.5 * (np.log(var2 / var1) + (var1 + (mu1 - mu2) ** 2) / var2 - 1.0)
    return float(kl) if kl.ndim == 0 else kl


def simulate(model: GaussianARModel, n: int, rng: np.random.Generator, burn_in: int = 500) -> np.ndarray:
    z = np.zeros(n + burn_in + model.order)
    noise = rng.normal(0.0, np.sqrt(model.noise_var), size=len(z))
    for t in range(model.order, len(z)):
        z[t] = model.coeffs @ z[t - model.order:t][::-1] + noise[t]
    return z[model.order + burn_in:]


def lagged(sequence: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix of histories (z_{t-1}, ..., z_{t-order}) and targets z_t."""
    z = np.asarray(sequence, dtype=float)
    n = len(z) - order
    x = np.column_stack([z[order - 1 - i: order - 1 - i + n] for i in range(order)])
    return x, z[order:]


def fit_multiframe(order: int, sequence) -> GaussianARModel:
    """Least-squares AR fit; the noise variance is the residual mean square."""
    z = np.asarray(sequence, dtype=float)
    if order < 1:
        raise ValueError("order must be >= 1")
    if len(z) < order + 2:
        raise ValueError(f"need at least {order + 2} samples for order {order}")
    x, y = lagged(z, order)
    coeffs, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coeffs
    return GaussianARModel(coeffs, max(float(np.mean(resid ** 2)), MIN_NOISE_VAR))


def stationary_states(model: GaussianARModel, n: int, rng: np.random.Generator,
                      order: int | None = None) -> np.ndarray:
    """``n`` conditioning histories drawn from a long stationary run."""
    width = order or model.order
    z = simulate(model, n + width, rng)
    x, _ = lagged(z, width)
    return x[:n]


def loss_l3(true_model: GaussianARModel, fitted: GaussianARModel, states: np.ndarray) -> float:
    """Mean conditional KL(p || q) over the given conditioning histories."""
    states = np.atleast_2d(states)
    mu_p = true_model.conditional_mean(states)
    mu_q = fitted.conditional_mean(states)
    return float(np.mean(gaussian_kl(mu_p, true_model.noise_var, mu_q, fitted.noise_var)))
