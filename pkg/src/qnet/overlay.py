"""Photonic (entanglement) layer sampled on top of a fiber graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qnet.geometry import as_generator
from qnet.graph import SpatialGraph


@dataclass(frozen=True)
class PhotonicParams:
    gamma: float = 0.2  # dB/km
    n_p: int = 1000

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.n_p < 1:
            raise ValueError(f"n_p must be >= 1, got {self.n_p}")


def transmissivity(d, gamma: float = 0.2):
    """Per-photon survival probability over ``d`` km of fiber."""
    return 10.0 ** (-gamma * np.asarray(d, dtype=float) / 10.0)


def entanglement_probability(q, n_p: int = 1000):
    """``1 - (1 - q) ** n_p`` evaluated through log1p/expm1.

    The naive form loses every digit once ``q`` drops below machine epsilon.
    """
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        return -np.expm1(n_p * np.log1p(-q))


def edge_probabilities(fiber: SpatialGraph, p: PhotonicParams = PhotonicParams(), distance_fn=None):
    d = fiber.edge_lengths(distance_fn)
    return entanglement_probability(transmissivity(d, p.gamma), p.n_p)


def sample_overlay(fiber: SpatialGraph, p: PhotonicParams = PhotonicParams(), distance_fn=None, rng=0):
    """Keep each fiber edge independently with its entanglement probability."""
    gen = as_generator(rng)
    prob = edge_probabilities(fiber, p, distance_fn)
    keep = gen.random(len(prob)) < prob
    return SpatialGraph(fiber.positions, fiber.edges[keep], fiber.coords, "photonic")
