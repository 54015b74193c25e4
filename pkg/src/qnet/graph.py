"""Undirected simple spatial graph and its tab-separated file format.

Edge list (``*.edges``)::

    # nodes=4 edges=3 layer=fiber coords=planar
    0	1
    0	2
    1	3

Positions (``*.pos``)::

    # nodes=4 coords=planar
    0	12.5	-3.25
    ...

Coordinates are written with ``repr`` so a write/read cycle is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from qnet.geometry import geodesic_lengths, planar_lengths

COORD_KINDS = ("planar", "geo")


class GraphFormatError(ValueError):
    """Malformed serialized graph; carries the offending line number."""

    def __init__(self, path, lineno, msg):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


def canonical_edges(edges, n: int | None = None) -> np.ndarray:
    """Return edges as a sorted, de-duplicated ``(E, 2)`` array with ``u < v``."""
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(arr) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if np.any(arr[:, 0] == arr[:, 1]):
        raise ValueError("self-loops are not allowed")
    arr = np.sort(arr, axis=1)
    if n is not None and (arr.min() < 0 or arr.max() >= n):
        raise ValueError("edge endpoint out of range")
    return np.unique(arr, axis=0)


@dataclass
class SpatialGraph:
    """Simple undirected graph with one coordinate pair per node.

    ``positions`` is ``(n, 2)``: ``(x, y)`` in km for planar graphs or
    ``(lat, lon)`` in degrees for geographic ones.
    """

    positions: np.ndarray
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    coords: str = "planar"
    layer: str = "fiber"

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.edges = canonical_edges(self.edges, len(self.positions))
        if self.coords not in COORD_KINDS:
            raise ValueError(f"unknown coordinate kind {self.coords!r}")

    @classmethod
    def from_edges(cls, n: int, edges, **kw) -> SpatialGraph:
        """Graph without meaningful geometry (all nodes at the origin)."""
        return cls(np.zeros((n, 2)), edges, **kw)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def adjacency(self) -> sp.csr_matrix:
        n = self.n
        if self.n_edges == 0:
            return sp.csr_matrix((n, n), dtype=np.int64)
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(u), dtype=np.int64)
        return sp.csr_matrix((data, (np.r_[u, v], np.r_[v, u])), shape=(n, n))

    def edge_lengths(self, distance_fn=None) -> np.ndarray:
        """Length of every edge in km; planar or great-circle by ``coords``."""
        if distance_fn is not None:
            return np.asarray(distance_fn(self.positions, self.edges), dtype=float)
        if self.coords == "geo":
            return geodesic_lengths(self.positions, self.edges)
        return planar_lengths(self.positions, self.edges)

    def with_edges(self, edges, layer: str | None = None) -> SpatialGraph:
        return SpatialGraph(self.positions, edges, self.coords, layer or self.layer)

    def subgraph(self, nodes) -> tuple[SpatialGraph, np.ndarray]:
        """Induced subgraph; returns it with the old indices of its nodes."""
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        keep = (remap[self.edges[:, 0]] >= 0) & (remap[self.edges[:, 1]] >= 0)
        sub = remap[self.edges[keep]]
        return SpatialGraph(self.positions[nodes], sub, self.coords, self.layer), nodes

    # -- serialization -----------------------------------------------------

    def write(self, edges_path, positions_path=None) -> None:
        edges_path = Path(edges_path)
        lines = [f"# nodes={self.n} edges={self.n_edges} layer={self.layer} coords={self.coords}"]
        lines.extend(f"{u}\t{v}" for u, v in self.edges.tolist())
        edges_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        if positions_path is not None:
            plines = [f"# nodes={self.n} coords={self.coords}"]
            plines.extend(
                f"{i}\t{a!r}\t{b!r}" for i, (a, b) in enumerate(self.positions.tolist())
            )
            Path(positions_path).write_text("\n".join(plines) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, edges_path, positions_path=None) -> SpatialGraph:
        edges_path = Path(edges_path)
        header, body = _read_table(edges_path, 2)
        if "nodes" not in header:
            raise GraphFormatError(edges_path, 1, "missing '# nodes=N' header")
        try:
            n = int(header["nodes"])
        except ValueError:
            raise GraphFormatError(edges_path, 1, f"bad node count {header['nodes']!r}")
        coords = header.get("coords", "planar")
        layer = header.get("layer", "fiber")
        edges = []
        for lineno, fields in body:
            try:
                u, v = int(fields[0]), int(fields[1])
            except ValueError:
                raise GraphFormatError(edges_path, lineno, "edge endpoints must be integers")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(edges_path, lineno, f"endpoint out of range 0..{n - 1}")
            if u == v:
                raise GraphFormatError(edges_path, lineno, "self-loop")
            edges.append((u, v))
        positions = np.zeros((n, 2))
        if positions_path is not None:
            pheader, pbody = _read_table(Path(positions_path), 3)
            coords = pheader.get("coords", coords)
            seen = 0
            for lineno, fields in pbody:
                try:
                    i = int(fields[0])
                    positions[i] = (float(fields[1]), float(fields[2]))
                except (ValueError, IndexError):
                    raise GraphFormatError(positions_path, lineno, "bad position row")
                seen += 1
            if seen != n:
                raise GraphFormatError(positions_path, 1, f"expected {n} positions, got {seen}")
        try:
            return cls(positions, edges, coords, layer)
        except ValueError as exc:
            raise GraphFormatError(edges_path, 1, str(exc))


def _read_table(path: Path, width: int):
    header: dict[str, str] = {}
    body = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        header[k] = v
                continue
            fields = line.split("\t")
            if len(fields) != width:
                raise GraphFormatError(path, lineno, f"expected {width} tab-separated fields")
            body.append((lineno, fields))
    return header, body
