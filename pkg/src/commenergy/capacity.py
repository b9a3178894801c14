"""Gaussian multiple-access capacity regions.

The achievable rates of transmitters sharing one receiver form a
polymatroid: for every non-empty subset ``S`` of transmitters,

    sum_{n in S} r_n <= B log2(1 + sum_{n in S} g_n p_n / sigma^2).

This module generates those subset inequalities, tests membership, and
handles the two-user corner points and successive-interference-cancellation
(SIC) decoding priority.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

LN2 = math.log(2.0)
MAX_SUBSET_TRANSMITTERS = 10


class IntractableRegionError(ValueError):
    pass


class OffBoundaryError(ValueError):
    def __init__(self, message: str, distance: float):
        super().__init__(message)
        self.distance = distance


@dataclass(frozen=True)
class CapacitySubsetConstraint:
    receiver: int
    subset: tuple[int, ...]
    bandwidth: float


@dataclass(frozen=True)
class RateCorner:
    rates: tuple[float, ...]
    # transmitters in decoding order; the last one decoded sees no interference
    decoding_order: tuple[int, ...]


def shannon_rate(bandwidth, snr):
    """``B log2(1 + snr)`` using ``log1p`` for accuracy at low SNR."""
    return np.asarray(bandwidth) * np.log1p(snr) / LN2


def subset_capacity(gains, powers, noise_power: float, bandwidth: float) -> float:
    """Capacity bound ``B log2(1 + sum g p / sigma^2)`` of one subset."""
    snr = float(np.dot(np.asarray(gains, float), np.asarray(powers, float))) / noise_power
    return float(shannon_rate(bandwidth, snr))


def constraint_residual(c: CapacitySubsetConstraint, gains: Sequence[float],
                        p: Sequence[float], r: Sequence[float], noise_power: float) -> float:
    """Subset residual; ``<= 0`` means the subset inequality holds.

    ``gains``, ``p`` and ``r`` are indexed by position within ``c.subset``.
    """
    return float(np.sum(r)) - subset_capacity(gains, p, noise_power, c.bandwidth)


def subsets(transmitters: Sequence[int]) -> list[tuple[int, ...]]:
    """Non-empty subsets ordered by size, then lexicographically."""
    items = sorted(transmitters)
    return [s for k in range(1, len(items) + 1) for s in itertools.combinations(items, k)]


def enumerate_constraints(receiver: int, transmitters: Sequence[int], bandwidth: float = 1.0,
                          cap: int = MAX_SUBSET_TRANSMITTERS) -> list[CapacitySubsetConstraint]:
    """All ``2**|transmitters| - 1`` subset constraints for one receiver."""
    if not transmitters:
        raise ValueError("transmitter set must be non-empty")
    if receiver in transmitters:
        raise ValueError("receiver cannot be one of its own transmitters")
    if len(transmitters) > cap:
        raise IntractableRegionError(
            f"{len(transmitters)} transmitters would need {2 ** len(transmitters) - 1} "
            f"capacity constraints per knot (cap is {cap})")
    return [CapacitySubsetConstraint(receiver, s, bandwidth) for s in subsets(transmitters)]


def region_contains(gains, p, r, noise_power: float, bandwidth: float,
                    rtol: float = 1e-9) -> bool:
    """Whether rate tuple ``r`` lies in the capacity region for powers ``p``."""
    gains = np.asarray(gains, float)
    p = np.asarray(p, float)
    r = np.asarray(r, float)
    tol = rtol * bandwidth
    if np.any(r < -tol):
        return False
    for s in subsets(range(len(r))):
        idx = list(s)
        if r[idx].sum() - subset_capacity(gains[idx], p[idx], noise_power, bandwidth) > tol:
            return False
    return True


def polymatroid_corner(gains, p, noise_power: float, bandwidth: float,
                       order: Sequence[int]) -> RateCorner:
    """Vertex reached by SIC with the given decoding order.

    Each transmitter is decoded treating the not-yet-decoded ones as noise.
    """
    gains = np.asarray(gains, float)
    p = np.asarray(p, float)
    received = gains * p
    remaining = float(received.sum())
    rates = np.zeros(len(gains))
    for n in order:
        remaining -= received[n]
        rates[n] = float(shannon_rate(bandwidth, received[n] / (noise_power + max(remaining, 0.0))))
    return RateCorner(tuple(rates), tuple(order))


def two_user_corners(g1: float, g2: float, p1: float, p2: float, noise_power: float,
                     bandwidth: float) -> tuple[RateCorner, RateCorner]:
    """Corners ``R1`` (user 2 decoded first) and ``R2`` (user 1 decoded first)."""
    if p1 < 0 or p2 < 0:
        raise ValueError("powers must be non-negative")
    s1 = g1 * p1 / noise_power
    s2 = g2 * p2 / noise_power
    c1 = float(shannon_rate(bandwidth, s1))
    c2 = float(shannon_rate(bandwidth, s2))
    r1 = RateCorner((c1, float(shannon_rate(bandwidth, s2 / (1.0 + s1)))), (1, 0))
    r2 = RateCorner((float(shannon_rate(bandwidth, s1 / (1.0 + s2))), c2), (0, 1))
    return r1, r2


def project_on_segment(c1: Sequence[float], c2: Sequence[float], point: Sequence[float]) -> tuple[float, float]:
    """Least-squares weight ``w`` with ``point ~ w*c1 + (1-w)*c2`` and the residual distance.

    ``w`` is clipped to [0, 1]; the distance is to the clipped point.
    """
    a = np.asarray(c1, float)
    b = np.asarray(c2, float)
    x = np.asarray(point, float)
    d = a - b
    dd = float(d @ d)
    w = 1.0 if dd == 0.0 else float(np.clip((x - b) @ d / dd, 0.0, 1.0))
    dist = float(np.linalg.norm(x - (w * a + (1.0 - w) * b)))
    return w, dist


def decoding_priority(R1: RateCorner, R2: RateCorner, r_star: Sequence[float],
                      rtol: float = 1e-6) -> float:
    """Interpolation weight of ``r_star`` on the sum-rate segment between the corners.

    Returns 1 at ``R1`` (user 1 decoded last) and 0 at ``R2``.
    """
    w, dist = project_on_segment(R1.rates, R2.rates, r_star)
    scale = max(sum(R1.rates), 1e-300)
    if dist > rtol * scale:
        raise OffBoundaryError(f"rate pair is {dist:.3g} bit/s off the sum-rate segment", dist)
    return w
