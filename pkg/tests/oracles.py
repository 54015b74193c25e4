"""Brute-force reference implementations for small graphs.

Deliberately naive and independent of qnet.metrics: distances come from
boolean adjacency-matrix powers, triangles from triple enumeration, and the
assortativity from the textbook Pearson formula.
"""

import itertools
import math

import numpy as np


def adjacency(n, edges):
    a = np.zeros((n, n), dtype=bool)
    for u, v in edges:
        a[u, v] = a[v, u] = True
    return a


def hop_distances(n, edges):
    """Matrix of hop counts (inf when unreachable) via powers of A."""
    a = adjacency(n, edges).astype(np.int64)
    dist = np.full((n, n), math.inf)
    np.fill_diagonal(dist, 0)
    reach = np.eye(n, dtype=np.int64)
    for step in range(1, n):
        reach = (reach @ a > 0).astype(np.int64)
        newly = (reach > 0) & np.isinf(dist)
        dist[newly] = step
    return dist


def components(n, edges):
    dist = hop_distances(n, edges)
    seen, comps = set(), []
    for i in range(n):
        if i in seen:
            continue
        comp = [j for j in range(n) if math.isfinite(dist[i, j])]
        seen.update(comp)
        comps.append(comp)
    return comps


def giant(n, edges):
    comps = components(n, edges)
    best = max(comps, key=lambda c: (len(c), -min(c)))
    return sorted(best), len(best) / n


def aspl(n, edges):
    nodes, _ = giant(n, edges)
    if len(nodes) < 2:
        return None
    dist = hop_distances(n, edges)
    total = sum(dist[i, j] for i in nodes for j in nodes if i != j)
    return total / (len(nodes) * (len(nodes) - 1))


def degrees(n, edges):
    d = [0] * n
    for u, v in edges:
        d[u] += 1
        d[v] += 1
    return d


def local_clustering(n, edges):
    a = adjacency(n, edges)
    deg = degrees(n, edges)
    out = []
    for i in range(n):
        if deg[i] < 2:
            out.append(0.0)
            continue
        nb = [j for j in range(n) if a[i, j]]
        links = sum(1 for x, y in itertools.combinations(nb, 2) if a[x, y])
        out.append(2 * links / (deg[i] * (deg[i] - 1)))
    return out


def avg_clustering(n, edges):
    return sum(local_clustering(n, edges)) / n


def clustering_by_degree(n, edges):
    deg = degrees(n, edges)
    c = local_clustering(n, edges)
    out = {}
    for k in sorted(set(deg)):
        vals = [c[i] for i in range(n) if deg[i] == k]
        out[k] = sum(vals) / len(vals)
    return out


def assortativity(n, edges):
    deg = degrees(n, edges)
    xs, ys = [], []
    for u, v in edges:
        xs += [deg[u], deg[v]]
        ys += [deg[v], deg[u]]
    if not xs:
        return None
    m = len(xs)
    mx, my = sum(xs) / m, sum(ys) / m
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = sum((x - mx) ** 2 for x in xs)
    vy = sum((y - my) ** 2 for y in ys)
    if vx == 0 or vy == 0:
        return None
    return cov / math.sqrt(vx * vy)


def knn_by_degree(n, edges):
    a = adjacency(n, edges)
    deg = degrees(n, edges)
    out = {}
    for k in sorted(set(deg)):
        if k == 0:
            continue
        per_node = []
        for i in range(n):
            if deg[i] == k:
                per_node.append(sum(deg[j] for j in range(n) if a[i, j]) / k)
        out[k] = sum(per_node) / len(per_node)
    return out


def degree_histogram(n, edges):
    deg = degrees(n, edges)
    return {k: deg.count(k) / n for k in sorted(set(deg))}


def all_graphs(n):
    """Every labelled simple graph on n nodes."""
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        yield [p for b, p in enumerate(pairs) if mask >> b & 1]


def disk_mean_radius(R, steps=200_000):
    """E[r] for area-uniform sampling, midpoint-rule quadrature of r * 2r/R^2."""
    h = R / steps
    r = (np.arange(steps) + 0.5) * h
    return float(np.sum(r * 2 * r / R**2) * h)


def check_metrics(n, edges):
    """Assert every qnet metric agrees with the brute-force version to 1e-10."""
    from qnet import metrics as qm
    from qnet.graph import SpatialGraph

    g = SpatialGraph.from_edges(n, edges)
    e = g.edges.tolist()
    nodes, frac = qm.giant_component(g)
    o_nodes, o_frac = giant(n, e)
    assert nodes.tolist() == o_nodes and abs(frac - o_frac) <= 1e-10
    a, b = qm.avg_shortest_path(g), aspl(n, e)
    assert (a is None and b is None) or abs(a - b) <= 1e-10
    assert abs(qm.avg_clustering(g) - avg_clustering(n, e)) <= 1e-10
    a, b = qm.assortativity(g), assortativity(n, e)
    assert (a is None) == (b is None)
    if a is not None:
        assert abs(a - b) <= 1e-10
    for mine, ref in (
        (qm.clustering_by_degree(g), clustering_by_degree(n, e)),
        (qm.knn_by_degree(g), knn_by_degree(n, e)),
        (qm.degree_histogram(g), degree_histogram(n, e)),
    ):
        assert mine.keys() == ref.keys()
        assert all(abs(mine[k] - ref[k]) <= 1e-10 for k in ref)
