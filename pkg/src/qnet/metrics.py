"""Network statistics: giant component, path length, clustering, degree
correlations and degree histograms.

Undefined values (0/0 situations the caller must not mistake for a number)
are returned as ``None`` and serialised as the string ``"undefined"``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import csgraph

from qnet.geometry import as_generator
from qnet.graph import SpatialGraph

UNDEFINED = "undefined"
SAMPLED_ASPL_THRESHOLD = 20_000
SAMPLED_ASPL_SOURCES = 1024


def giant_component(g: SpatialGraph) -> tuple[np.ndarray, float]:
    """Nodes of the largest component and its share of all nodes.

    Among equally large components the one holding the smallest index wins.
    """
    if g.n == 0:
        raise ValueError("giant component of an empty graph")
    _, labels = csgraph.connected_components(g.adjacency(), directed=False)
    sizes = np.bincount(labels)
    _, first = np.unique(labels, return_index=True)
    biggest = np.flatnonzero(sizes == sizes.max())
    label = biggest[np.argmin(first[biggest])]
    nodes = np.flatnonzero(labels == label)
    return nodes, len(nodes) / g.n


def _giant_adjacency(g: SpatialGraph):
    nodes, _ = giant_component(g)
    sub, _ = g.subgraph(nodes)
    return sub.adjacency()


def _source_means(adj, sources, chunk=256):
    n = adj.shape[0]
    out = []
    for s in range(0, len(sources), chunk):
        d = csgraph.shortest_path(adj, method="D", unweighted=True, indices=sources[s : s + chunk])
        out.append(d.sum(axis=1) / (n - 1))
    return np.concatenate(out)


def avg_shortest_path(g: SpatialGraph) -> float | None:
    """Exact mean hop distance over ordered pairs of the giant component."""
    if g.n == 0:
        return None
    adj = _giant_adjacency(g)
    n = adj.shape[0]
    if n < 2:
        return None
    return float(_source_means(adj, np.arange(n)).mean())


def avg_shortest_path_sampled(g: SpatialGraph, sources: int = SAMPLED_ASPL_SOURCES, rng=0):
    """Estimate from ``sources`` random BFS roots; returns ``(mean, stderr)``.

    When ``sources`` covers the whole giant component the result is exact
    and the standard error is 0.
    """
    if g.n == 0:
        return None, None
    adj = _giant_adjacency(g)
    n = adj.shape[0]
    if n < 2:
        return None, None
    if sources >= n:
        return float(_source_means(adj, np.arange(n)).mean()), 0.0
    roots = np.sort(as_generator(rng).choice(n, size=sources, replace=False))
    means = _source_means(adj, roots)
    # finite-population correction for sampling sources without replacement
    fpc = math.sqrt((n - sources) / (n - 1))
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(sources) * fpc)


def local_clustering(g: SpatialGraph) -> np.ndarray:
    """Per-node ``C_i``; nodes with fewer than two neighbours get 0."""
    adj = g.adjacency()
    deg = g.degrees()
    tri2 = np.asarray((adj @ adj).multiply(adj).sum(axis=1)).ravel()
    pairs = deg * (deg - 1)
    out = np.zeros(g.n)
    ok = pairs > 0
    out[ok] = tri2[ok] / pairs[ok]
    return out


def avg_clustering(g: SpatialGraph) -> float:
    if g.n == 0:
        raise ValueError("clustering of an empty graph")
    return float(local_clustering(g).mean())


def _group_mean(keys, values) -> dict[int, float]:
    out = {}
    for k in np.unique(keys).tolist():
        out[int(k)] = float(values[keys == k].mean())
    return out


def clustering_by_degree(g: SpatialGraph) -> dict[int, float]:
    return _group_mean(g.degrees(), local_clustering(g))


def assortativity(g: SpatialGraph) -> float | None:
    """Pearson correlation of endpoint degrees over both edge orientations."""
    if g.n_edges == 0:
        return None
    deg = g.degrees().astype(float)
    u, v = g.edges[:, 0], g.edges[:, 1]
    x = np.r_[deg[u], deg[v]]
    y = np.r_[deg[v], deg[u]]
    x -= x.mean()
    y -= y.mean()
    sxx = float(x @ x)
    syy = float(y @ y)
    # integer degrees: any real spread is orders of magnitude above this
    if sxx <= 1e-12 * len(x) or syy <= 1e-12 * len(y):
        return None
    r = float(x @ y) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def knn_by_degree(g: SpatialGraph) -> dict[int, float]:
    deg = g.degrees()
    if g.n_edges == 0:
        return {}
    nsum = g.adjacency() @ deg.astype(float)
    ok = deg > 0
    return _group_mean(deg[ok], nsum[ok] / deg[ok])


def degree_histogram(g: SpatialGraph) -> dict[int, float]:
    if g.n == 0:
        raise ValueError("degree histogram of an empty graph")
    counts = np.bincount(g.degrees())
    return {int(k): float(c / g.n) for k, c in enumerate(counts.tolist()) if c}


def log_bins(hist: dict[int, float], bins_per_decade: int = 5) -> list[tuple[float, float]]:
    """Geometric-mean bin centres and per-degree-averaged densities.

    Presentation helper for heavy tails; metric values stay on raw degrees.
    """
    if not hist:
        return []
    ks = np.array(sorted(k for k in hist if k > 0), dtype=float)
    if len(ks) == 0:
        return []
    edges = 10 ** np.arange(0, math.log10(ks.max()) + 1.0 / bins_per_decade + 1e-12, 1.0 / bins_per_decade)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        width = math.floor(hi - 1e-9) - math.ceil(lo) + 1
        inside = [k for k in ks if lo <= k < hi]
        if not inside or width <= 0:
            continue
        mass = sum(hist[int(k)] for k in inside)
        out.append((math.sqrt(lo * hi), mass / width))
    return out


@dataclass
class MetricsReport:
    n_nodes: int
    n_edges: int
    giant_fraction: float
    avg_shortest_path: float | None
    avg_clustering: float
    assortativity: float | None
    edges_per_node: float
    degree_histogram: dict[int, float] = field(default_factory=dict)
    clustering_by_degree: dict[int, float] = field(default_factory=dict)
    knn_by_degree: dict[int, float] = field(default_factory=dict)
    aspl_stderr: float | None = None

    SCALARS = (
        "n_nodes",
        "n_edges",
        "giant_fraction",
        "avg_shortest_path",
        "aspl_stderr",
        "avg_clustering",
        "assortativity",
        "edges_per_node",
    )

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, dict):
                out[k] = {str(kk): vv for kk, vv in v.items()}
            else:
                out[k] = UNDEFINED if v is None else v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self) -> dict[str, object]:
        return {k: _fmt(getattr(self, k)) for k in self.SCALARS}

    @classmethod
    def from_dict(cls, d: dict) -> MetricsReport:
        def val(x):
            return None if x == UNDEFINED else x

        kw = {}
        for k, v in d.items():
            if isinstance(v, dict):
                kw[k] = {int(kk): float(vv) for kk, vv in v.items()}
            else:
                kw[k] = val(v)
        return cls(**kw)


def _fmt(v):
    return UNDEFINED if v is None else v


def write_reports_csv(reports, fh=None, extra: list[dict] | None = None) -> str:
    """One row per report, fixed column order; returns the text if no file."""
    buf = fh or io.StringIO()
    extra_cols = list(extra[0]) if extra else []
    w = csv.DictWriter(buf, fieldnames=extra_cols + list(MetricsReport.SCALARS), lineterminator="\n")
    w.writeheader()
    for i, r in enumerate(reports):
        row = dict(extra[i]) if extra else {}
        row.update(r.csv_row())
        w.writerow(row)
    return buf.getvalue() if fh is None else ""


def full_report(g: SpatialGraph, *, path_length: bool = True, sampled: bool | None = None, rng=0) -> MetricsReport:
    """All statistics for one graph.

    ``sampled=None`` switches to source-sampled path lengths above
    ``SAMPLED_ASPL_THRESHOLD`` giant-component nodes.
    """
    if g.n == 0:
        raise ValueError("metrics need at least one node")
    nodes, frac = giant_component(g)
    aspl = stderr = None
    if path_length:
        if sampled is None:
            sampled = len(nodes) > SAMPLED_ASPL_THRESHOLD
        if sampled:
            aspl, stderr = avg_shortest_path_sampled(g, SAMPLED_ASPL_SOURCES, rng)
        else:
            aspl = avg_shortest_path(g)
    return MetricsReport(
        n_nodes=g.n,
        n_edges=g.n_edges,
        giant_fraction=frac,
        avg_shortest_path=aspl,
        avg_clustering=avg_clustering(g),
        assortativity=assortativity(g),
        edges_per_node=g.n_edges / g.n,
        degree_histogram=degree_histogram(g),
        clustering_by_degree=clustering_by_degree(g),
        knn_by_degree=knn_by_degree(g),
        aspl_stderr=stderr,
    )
