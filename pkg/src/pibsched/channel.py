"""Per-link SNR, Shannon capacity, and direct/relay delay accounting.

SNR is linear internally; dB only appears at I/O boundaries.  Large-scale
fading is a log-distance path loss referenced to the free-space loss at 1 m
plus log-normal shadowing whose dB term follows a Gauss-Markov (AR(1))
process across slots:

    X_t = rho * X_{t-1} + sqrt(1 - rho**2) * sigma * N(0, 1),   X_0 ~ N(0, sigma**2)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.signal import lfilter

SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN = 1.380649e-23
REFERENCE_DISTANCE_M = 1.0
DEFAULT_RHO = 0.9


def thermal_noise_w(bandwidth_hz: float, temperature_k: float = 290.0) -> float:
    return BOLTZMANN * temperature_k * bandwidth_hz


@dataclass(frozen=True)
class LinkParams:
    bandwidth_hz: float = 2e6
    tx_power_w: float = 1.0
    interference_w: float = 1e-13  # aggregate received interference, folded into one constant
    noise_w: float = thermal_noise_w(2e6)
    distance_m: float = 200.0
    path_loss_exp: float = 3.5
    shadowing_db_std: float = 8.0
    carrier_hz: float = 2.4e9

    def __post_init__(self):
        for name in ("bandwidth_hz", "tx_power_w", "interference_w", "noise_w",
                     "distance_m", "carrier_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.shadowing_db_std < 0:
            raise ValueError("shadowing_db_std must be non-negative")
        if self.path_loss_exp < 2:
            raise ValueError("path_loss_exp must be >= 2")


@dataclass(frozen=True)
class ChannelState:
    snr: float
    capacity_bps: float
    slot: int
    shadow_db: float = 0.0

    @property
    def snr_db(self) -> float:
        return to_db(self.snr)


@dataclass(frozen=True)
class DelayBudget:
    d_T: float
    d_R: float
    d_I: float
    total: float


@dataclass(frozen=True)
class Direct:
    s0: int


@dataclass(frozen=True)
class Relay:
    r: int
    s0: int


Route = Union[Direct, Relay]


class LinkOutage(ValueError):
    pass


def to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def from_db(x_db):
    return 10.0 ** (np.asarray(x_db) / 10.0)


def free_space_loss_db(distance_m, carrier_hz: float):
    wavelength = SPEED_OF_LIGHT / carrier_hz
    return 20.0 * np.log10(4.0 * math.pi * np.asarray(distance_m) / wavelength)


def path_loss_db(params: LinkParams, shadow_db=0.0):
    """Log-distance path loss plus a shadowing term, in dB."""
    ref = free_space_loss_db(REFERENCE_DISTANCE_M, params.carrier_hz)
    return (
        ref
        + 10.0 * params.path_loss_exp * np.log10(params.distance_m / REFERENCE_DISTANCE_M)
        + shadow_db
    )


def snr_from_shadow(params: LinkParams, shadow_db):
    gain = from_db(-path_loss_db(params, shadow_db))
    return params.tx_power_w * gain / (params.noise_w + params.interference_w)


def mean_snr(params: LinkParams) -> float:
    """SNR at the median (zero-shadowing) channel."""
    return float(snr_from_shadow(params, 0.0))


def shannon_capacity(bandwidth_hz, snr):
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("snr must be non-negative")
    if np.any(np.asarray(bandwidth_hz) <= 0):
        raise ValueError("bandwidth must be positive")
    c = np.asarray(bandwidth_hz) * np.log2(1.0 + snr)
    return float(c) if c.ndim == 0 else c


def sample_snr(
    params: LinkParams,
    prev: ChannelState | None,
    rng: np.random.Generator,
    rho: float = DEFAULT_RHO,
) -> ChannelState:
    """Advance one link by one slot, consuming exactly one standard normal."""
    z = rng.standard_normal()
    sigma = params.shadowing_db_std
    if prev is None:
        shadow, slot = sigma * z, 0
    else:
        shadow = rho * prev.shadow_db + math.sqrt(max(0.0, 1.0 - rho * rho)) * sigma * z
        slot = prev.slot + 1
    snr = float(snr_from_shadow(params, shadow))
    return ChannelState(snr=snr, capacity_bps=shannon_capacity(params.bandwidth_hz, snr),
                        slot=slot, shadow_db=float(shadow))


def shadowing_trace(normals: np.ndarray, sigma, rho: float = DEFAULT_RHO,
                    initial: np.ndarray | None = None) -> np.ndarray:
    """Vectorised AR(1) shadowing along axis 0.

    ``normals[0]`` seeds the stationary start unless ``initial`` (the state of
    the slot before ``normals[0]``) is given.  Matches repeated ``sample_snr``.
    """
    normals = np.asarray(normals, dtype=float)
    innov = math.sqrt(max(0.0, 1.0 - rho * rho)) * sigma * normals
    if initial is None:
        x0 = sigma * normals[0]
        rest = innov[1:]
    else:
        x0 = rho * np.asarray(initial) + innov[0]
        rest = innov[1:]
    out = np.empty_like(innov)
    out[0] = x0
    if len(rest):
        zi = (rho * x0)[None, ...] if np.ndim(x0) else np.array([rho * x0])
        out[1:], _ = lfilter([1.0], [1.0, -rho], rest, axis=0, zi=zi)
    return out


def transmission_delay(data_bits: float, capacity_bps: float) -> float:
    if data_bits < 0:
        raise ValueError("data_bits must be non-negative")
    if capacity_bps <= 0:
        raise LinkOutage("link outage")
    return data_bits / capacity_bps


def route_delay(
    k: int,
    route: Route,
    capacities: np.ndarray,
    data_bits: float,
    inference_s: Sequence[float],
    relay_s: np.ndarray,
) -> DelayBudget:
    """Delay budget of camera ``k`` over a direct or relayed route.

    ``capacities[k, s]`` is the camera-to-server capacity, ``inference_s[s]``
    the inference delay at fusion server ``s`` and ``relay_s[r, s0]`` the
    server-to-server forwarding delay.
    """
    if isinstance(route, Direct):
        d_t = transmission_delay(data_bits, capacities[k][route.s0])
        d_r = 0.0
    elif isinstance(route, Relay):
        d_t = transmission_delay(data_bits, capacities[k][route.r])
        d_r = float(relay_s[route.r][route.s0])
    else:
        raise TypeError(f"not a route: {route!r}")
    d_i = float(inference_s[route.s0])
    return DelayBudget(d_T=d_t, d_R=d_r, d_I=d_i, total=d_t + d_r + d_i)


def candidate_routes(s0: int, n_servers: int) -> list[Route]:
    """Direct first, then relays by increasing id."""
    return [Direct(s0)] + [Relay(r, s0) for r in range(n_servers) if r != s0]


def best_route(
    k: int,
    s0: int,
    capacities: np.ndarray,
    data_bits: float,
    inference_s: Sequence[float],
    relay_s: np.ndarray,
) -> Route:
    """Minimum-total-delay route; ties go to Direct, then the lowest relay id."""
    best, best_total = None, math.inf
    for route in candidate_routes(s0, len(inference_s)):
        try:
            total = route_delay(k, route, capacities, data_bits, inference_s, relay_s).total
        except LinkOutage:
            continue
        if total < best_total:
            best, best_total = route, total
    if best is None:
        raise LinkOutage(f"camera {k}: every route to server {s0} is in outage")
    return best


def write_snr_trace(path: str | Path, rows: Iterable[tuple[int, int, int, float, float]]) -> None:
    """Write (slot, k, s, snr_db, capacity_bps) rows with a header."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "k", "s", "snr_db", "capacity_bps"])
        for slot, k, s, snr_db, cap in rows:
            w.writerow([slot, k, s, repr(float(snr_db)), repr(float(cap))])
