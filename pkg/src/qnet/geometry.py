"""Node placement, planar/geodesic distances and seeded random streams."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

EARTH_RADIUS_KM = 6371.0


class PlanarPoint(NamedTuple):
    x: float
    y: float


class GeoPoint(NamedTuple):
    lat: float
    lon: float


@dataclass(frozen=True)
class RngStream:
    """An independent, reproducible random stream.

    ``(seed, stream)`` maps to a PCG64 generator through ``SeedSequence``
    spawn keys, so different stream indices are statistically independent
    and each ensemble sample can own one.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.stream < 0:
            raise ValueError(f"stream index must be >= 0, got {self.stream}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> RngStream:
        # Sub-streams used inside one sample: positions, fiber, overlay.
        return RngStream(self.seed, self.stream * 8 + index + 1)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")


def sample_disk(n: int, R: float, rng) -> np.ndarray:
    """Sample ``n`` points uniformly by area on a disk of radius ``R`` (km).

    Returns an ``(n, 2)`` float array of planar coordinates.
    """
    if not R > 0:
        raise ValueError(f"disk radius must be positive, got {R}")
    if n < 0:
        raise ValueError(f"point count must be >= 0, got {n}")
    gen = as_generator(rng)
    u = gen.random(n)
    theta = gen.random(n) * (2.0 * math.pi)
    r = R * np.sqrt(u)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def euclidean_distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _check_geo(lat, lon):
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if np.any(~np.isfinite(lat)) or np.any(np.abs(lat) > 90.0):
        raise ValueError("latitude out of bounds [-90, 90]")
    if np.any(~np.isfinite(lon)) or np.any(np.abs(lon) > 180.0):
        raise ValueError("longitude out of bounds [-180, 180]")
    return lat, lon


def haversine_km(lat1, lon1, lat2, lon2):
    """Vectorised great-circle distance (km) on the mean-radius sphere."""
    lat1, lon1 = _check_geo(lat1, lon1)
    lat2, lon2 = _check_geo(lat2, lon2)
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(lon2 - lon1)
    h = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def geodesic_distance(a, b) -> float:
    """Great-circle distance between two ``(lat, lon)`` points in degrees."""
    return float(haversine_km(a[0], a[1], b[0], b[1]))


def planar_lengths(positions: np.ndarray, edges: np.ndarray) -> np.ndarray:
    if len(edges) == 0:
        return np.zeros(0)
    diff = positions[edges[:, 0]] - positions[edges[:, 1]]
    return np.hypot(diff[:, 0], diff[:, 1])


def geodesic_lengths(positions: np.ndarray, edges: np.ndarray) -> np.ndarray:
    if len(edges) == 0:
        return np.zeros(0)
    a = positions[edges[:, 0]]
    b = positions[edges[:, 1]]
    return haversine_km(a[:, 0], a[:, 1], b[:, 0], b[:, 1])


def radius_for_density(n: int, rho: float) -> float:
    """Disk radius giving ``rho = n / (pi R^2)``."""
    if rho <= 0:
        raise ValueError(f"density must be positive, got {rho}")
    return math.sqrt(n / (math.pi * rho))


def density_for_radius(n: int, R: float) -> float:
    return n / (math.pi * R * R)
