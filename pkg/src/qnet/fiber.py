"""Optical-fiber infrastructure generators.

Three models share the disk placement of nodes and differ in how fibers
are laid:

* ``generate_waxman``: every pair tried once with ``beta * exp(-d / alphaL)``.
* ``generate_soares``: spatial preferential attachment, each arrival links to
  ``m`` existing nodes with weight ``k_i * d_ij ** -alphaA``.
* ``generate_rozenfeld``: each node draws a degree quota from a discrete
  power law and links to its nearest neighbours within ``A * sqrt(k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from qnet.geometry import as_generator
from qnet.graph import SpatialGraph

MIN_DISTANCE_KM = 1e-6


@dataclass(frozen=True)
class WaxmanParams:
    beta: float = 1.0
    alphaL: float = 226.0

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if not self.alphaL > 0:
            raise ValueError(f"alphaL must be positive, got {self.alphaL}")


@dataclass(frozen=True)
class SoaresParams:
    m: int = 3
    alphaA: float = 5.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.alphaA < 0:
            raise ValueError(f"alphaA must be >= 0, got {self.alphaA}")


@dataclass(frozen=True)
class RozenfeldParams:
    lam: float = 3.0
    m: int = 3
    K: int = 1_000_000
    A: float = 100.0
    support: str = "inclusive"

    def __post_init__(self):
        if not self.lam > 2:
            raise ValueError(f"lambda must be > 2, got {self.lam}")
        if not 1 <= self.m < self.K:
            raise ValueError(f"need 1 <= m < K, got m={self.m}, K={self.K}")
        if not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")
        if self.support not in ("inclusive", "exclusive"):
            raise ValueError(f"support must be 'inclusive' or 'exclusive', got {self.support!r}")
        if self.support == "exclusive" and self.K - self.m < 2:
            raise ValueError("exclusive support m < k < K is empty")


# -- Waxman -----------------------------------------------------------------


def waxman_probability(d, p: WaxmanParams = WaxmanParams()):
    return p.beta * np.exp(-np.asarray(d, dtype=float) / p.alphaL)


def generate_waxman(positions, p: WaxmanParams = WaxmanParams(), rng=0, *, chunk_pairs=4_000_000):
    """Try every unordered pair once, in row-major ``i < j`` order."""
    gen = as_generator(rng)
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = len(pos)
    found = []
    rows = max(1, chunk_pairs // max(n, 1))
    for start in range(0, max(n - 1, 0), rows):
        stop = min(start + rows, n - 1)
        for i in range(start, stop):
            d = np.hypot(*(pos[i + 1 :] - pos[i]).T)
            hit = np.flatnonzero(gen.random(len(d)) < waxman_probability(d, p))
            if len(hit):
                found.append(np.column_stack((np.full(len(hit), i), hit + i + 1)))
    edges = np.concatenate(found) if found else np.zeros((0, 2), dtype=np.int64)
    return SpatialGraph(pos, edges)


def expected_waxman_edges(positions, p: WaxmanParams = WaxmanParams()) -> float:
    pos = np.asarray(positions, dtype=float)
    iu, ju = np.triu_indices(len(pos), 1)
    d = np.hypot(*(pos[iu] - pos[ju]).T)
    return float(waxman_probability(d, p).sum())


# -- Brito-Soares -----------------------------------------------------------


def soares_attachment_weights(existing, alphaA: float) -> np.ndarray:
    """Normalised attachment weights for ``(degree, distance)`` candidates."""
    arr = np.asarray(existing, dtype=float).reshape(-1, 2)
    if len(arr) == 0:
        raise ValueError("no attachment candidates")
    k, d = arr[:, 0], np.maximum(arr[:, 1], MIN_DISTANCE_KM)
    w = k * d ** (-alphaA)
    return w / w.sum()


def generate_soares(positions, p: SoaresParams = SoaresParams(), rng=0):
    """Grow the network in the given position order.

    The first ``m + 1`` nodes form a clique; each later node draws ``m``
    distinct targets by successive sampling without replacement, done in one
    pass with Efraimidis-Spirakis keys ``log(u) / w``.
    """
    gen = as_generator(rng)
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    n, m = len(pos), p.m
    if n < m + 1:
        raise ValueError(f"Brito-Soares needs at least m+1={m + 1} nodes, got {n}")
    deg = np.zeros(n, dtype=np.int64)
    iu, ju = np.triu_indices(m + 1, 1)
    edges = [np.column_stack((iu, ju))]
    deg[: m + 1] = m
    for j in range(m + 1, n):
        d = np.maximum(np.hypot(*(pos[:j] - pos[j]).T), MIN_DISTANCE_KM)
        # scale distances before the power to stay clear of underflow
        logw = np.log(deg[:j]) - p.alphaA * np.log(d)
        logw -= logw.max()
        keys = np.log(gen.random(j)) / np.exp(logw)
        targets = np.argpartition(keys, j - m)[j - m :]
        deg[targets] += 1
        deg[j] = m
        edges.append(np.column_stack((targets, np.full(m, j))))
    return SpatialGraph(pos, np.concatenate(edges))


# -- Brito-Rozenfeld --------------------------------------------------------


@lru_cache(maxsize=16)
def _degree_cdf(lam: float, m: int, K: int, support: str):
    lo, hi = (m, K) if support == "inclusive" else (m + 1, K - 1)
    k = np.arange(lo, hi + 1, dtype=float)
    # sum small terms first for an accurate normaliser
    mass = k ** (-lam)
    total = mass[::-1].sum()
    cdf = np.cumsum(mass) / total
    cdf[-1] = 1.0
    return lo, cdf


def degree_pmf(k, p: RozenfeldParams = RozenfeldParams()):
    """Exact probability mass of the quota law at ``k`` (0 off support)."""
    lo, cdf = _degree_cdf(p.lam, p.m, p.K, p.support)
    k = np.asarray(k, dtype=np.int64)
    idx = k - lo
    ok = (idx >= 0) & (idx < len(cdf))
    safe = np.clip(idx, 0, len(cdf) - 1)
    prev = np.where(safe > 0, cdf[np.maximum(safe - 1, 0)], 0.0)
    return np.where(ok, cdf[safe] - prev, 0.0)


def sample_target_degrees(n: int, p: RozenfeldParams = RozenfeldParams(), rng=0) -> np.ndarray:
    gen = as_generator(rng)
    lo, cdf = _degree_cdf(p.lam, p.m, p.K, p.support)
    idx = np.searchsorted(cdf, gen.random(n), side="right")
    return lo + np.minimum(idx, len(cdf) - 1)


def sample_target_degree(p: RozenfeldParams = RozenfeldParams(), rng=0) -> int:
    return int(sample_target_degrees(1, p, rng)[0])


def connection_radius(k, A: float):
    if np.any(np.asarray(k) < 1) or not A > 0:
        raise ValueError("connection radius needs k >= 1 and A > 0")
    return A * np.sqrt(k)


def generate_rozenfeld(positions, p: RozenfeldParams = RozenfeldParams(), rng=0, *, quotas=None):
    """Quota-limited nearest-neighbour wiring.

    Nodes are visited once, in a uniform random order. A visited node links
    to the closest nodes within ``A * sqrt(k_i)`` (ties to the lower index)
    that are not yet adjacent and still have free quota, stopping once its
    own quota is met.
    """
    gen = as_generator(rng)
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = len(pos)
    if quotas is None:
        quotas = sample_target_degrees(n, p, gen)
    quotas = np.asarray(quotas, dtype=np.int64)
    order = gen.permutation(n)
    free = quotas.copy()
    tree = cKDTree(pos) if n else None
    neigh: list[set[int]] = [set() for _ in range(n)]
    edges = []
    for i in order.tolist():
        if free[i] <= 0:
            continue
        cand = np.asarray(tree.query_ball_point(pos[i], float(connection_radius(quotas[i], p.A))))
        cand = cand[cand != i]
        if len(cand) == 0:
            continue
        d = np.hypot(*(pos[cand] - pos[i]).T)
        cand = cand[np.lexsort((cand, d))]
        cand = cand[free[cand] > 0]
        for j in cand.tolist():
            if j in neigh[i]:
                continue
            neigh[i].add(j)
            neigh[j].add(i)
            free[i] -= 1
            free[j] -= 1
            edges.append((i, j))
            if free[i] == 0:
                break
    return SpatialGraph(pos, edges)


def generate(kind: str, positions, params, rng):
    if kind == "brito":
        return generate_waxman(positions, params, rng)
    if kind == "brito-soares":
        return generate_soares(positions, params, rng)
    if kind == "brito-rozenfeld":
        return generate_rozenfeld(positions, params, rng)
    raise ValueError(f"unknown model kind {kind!r}")


def default_params(kind: str):
    return {"brito": WaxmanParams, "brito-soares": SoaresParams, "brito-rozenfeld": RozenfeldParams}[kind]()
