"""CAIDA ITDK ingestion: geolocated routers plus hyperedge links.

Accepted line shapes, chosen per line:

* ITDK ``.nodes.geo``:  ``node.geo N12:<TAB>EU<TAB>FR<TAB>IDF<TAB>Paris<TAB>48.85<TAB>2.35<TAB>...<TAB>source``
* fixture nodes:        ``N12<TAB>EU<TAB>FR<TAB>Paris<TAB>48.85<TAB>2.35<TAB>source``
* ITDK ``.links``:      ``link L7: N1:10.0.0.1 N2 N3:10.0.0.9``
* fixture links:        ``L7<TAB>N1<TAB>N2<TAB>N3``

Interface addresses after a node id (``N1:10.0.0.1``) are dropped.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from qnet.geometry import GeoPoint, RngStream
from qnet.graph import SpatialGraph
from qnet.metrics import MetricsReport, full_report
from qnet.overlay import PhotonicParams, sample_overlay

log = logging.getLogger(__name__)

CONTINENTS = ("AF", "AS", "EU", "NA", "OC", "SA")

# Node counts and densities of the August 2020 per-continent networks.
REFERENCE_NETWORKS = {
    "NA": (43957, 1.78e-3),
    "EU": (31430, 2.9848e-3),
    "SA": (23059, 1.2925e-3),
    "AS": (21317, 4.7817e-4),
    "OC": (5540, 6.4977e-4),
    "AF": (2032, 6.6908e-5),
}

_GEO_RE = re.compile(r"^node\.geo\s+(\S+?):\s*(.*)$")
_LINK_RE = re.compile(r"^link\s+(\S+?):\s*(.*)$")


@dataclass(frozen=True)
class GeoNodeRecord:
    node_id: str
    continent: str
    country: str
    city: str
    position: GeoPoint
    geo_source: str = ""


@dataclass(frozen=True)
class HyperLink:
    link_id: str
    members: tuple[str, ...]


@dataclass
class ItdkDataset:
    nodes: list[GeoNodeRecord]
    edges: set[tuple[str, str]]
    counts: dict[str, int] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)

    def digest(self) -> str:
        h = hashlib.sha256()
        for r in sorted(self.nodes, key=lambda r: r.node_id):
            h.update(f"{r.node_id}\t{r.continent}\t{r.country}\t{r.city}\t{r.position.lat!r}\t{r.position.lon!r}\n".encode())
        for a, b in sorted(self.edges):
            h.update(f"{a}\t{b}\n".encode())
        return h.hexdigest()

    def check_closure(self) -> None:
        ids = {r.node_id for r in self.nodes}
        for a, b in self.edges:
            if a not in ids or b not in ids:
                raise AssertionError(f"edge ({a}, {b}) has an endpoint outside the node set")
            if a == b:
                raise AssertionError(f"self-loop on {a}")


def _lines(source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", errors="replace") as fh:
            yield from fh
    else:
        yield from source


def _geo_fields(rest: str) -> tuple[str, str, str, str, str, str]:
    fields = [f.strip() for f in rest.split("\t")]
    if len(fields) < 6:
        fields = rest.split()
    if len(fields) < 6:
        raise ValueError(f"expected >= 6 fields after the node id, got {len(fields)}")
    continent, country, _region, city, lat, lon = fields[:6]
    source = fields[-1] if len(fields) > 6 else ""
    return continent, country, city, lat, lon, source


def parse_geo_line(line: str) -> GeoNodeRecord:
    m = _GEO_RE.match(line)
    if m:
        node_id = m.group(1)
        continent, country, city, lat, lon, source = _geo_fields(m.group(2))
    else:
        fields = [f.strip() for f in line.split("\t")]
        if len(fields) < 6:
            raise ValueError(f"expected >= 6 tab-separated fields, got {len(fields)}")
        node_id, continent, country, city, lat, lon = fields[:6]
        source = fields[6] if len(fields) > 6 else ""
    lat_f, lon_f = float(lat), float(lon)
    if not -90.0 <= lat_f <= 90.0:
        raise ValueError(f"latitude {lat_f} out of bounds")
    if not -180.0 <= lon_f <= 180.0:
        raise ValueError(f"longitude {lon_f} out of bounds")
    if not node_id:
        raise ValueError("empty node id")
    return GeoNodeRecord(node_id, continent.upper(), country, city, GeoPoint(lat_f, lon_f), source)


def parse_geo_nodes(source, errors: list | None = None) -> list[GeoNodeRecord]:
    """Parse geolocated node records, one per well-formed line.

    Malformed lines are skipped; ``(lineno, reason)`` pairs are appended to
    ``errors`` when given. A missing file raises ``OSError``.
    """
    out: list[GeoNodeRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(_lines(source), 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            rec = parse_geo_line(line)
            if rec.node_id in seen:
                raise ValueError(f"duplicate node id {rec.node_id}")
        except ValueError as exc:
            if errors is not None:
                errors.append((lineno, str(exc)))
            continue
        seen.add(rec.node_id)
        out.append(rec)
    return out


def _bare_id(token: str) -> str:
    # N12:10.0.0.1 -> N12
    return token.split(":", 1)[0]


def parse_link_line(line: str) -> HyperLink:
    m = _LINK_RE.match(line)
    if m:
        link_id, members = m.group(1), m.group(2).split()
    else:
        fields = line.split("\t")
        link_id = fields[0].strip()
        members = [tok for f in fields[1:] for tok in f.split()]
    ids = list(dict.fromkeys(_bare_id(t) for t in members if t))
    return HyperLink(link_id, tuple(ids))


def parse_links(source, errors: list | None = None) -> Iterable[HyperLink]:
    """Stream hyperlinks from a links file, one line at a time."""
    for lineno, line in enumerate(_lines(source), 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            yield parse_link_line(line)
        except (ValueError, IndexError) as exc:
            if errors is not None:
                errors.append((lineno, str(exc)))


def expand_hyperlinks(links: Iterable[HyperLink], stats: dict | None = None) -> set[tuple[str, str]]:
    """Clique-expand every hyperlink into sorted node-id pairs."""
    pairs: set[tuple[str, str]] = set()
    skipped = generated = 0
    for link in links:
        members = sorted(set(link.members))
        if len(members) < 2:
            log.warning("link %s has fewer than two distinct members; skipped", link.link_id)
            skipped += 1
            continue
        for a, b in itertools.combinations(members, 2):
            pairs.add((a, b))
            generated += 1
    if stats is not None:
        stats.update(links_skipped=skipped, pairs_generated=generated, pairs_unique=len(pairs))
    return pairs


def cross_filter(nodes: Iterable[GeoNodeRecord], pairs: Iterable[tuple[str, str]]) -> ItdkDataset:
    """Keep geolocated nodes that carry links, then links between kept nodes."""
    nodes = list(nodes)
    pairs = {tuple(sorted(p)) for p in pairs}
    active = {x for p in pairs for x in p}
    kept = [r for r in nodes if r.node_id in active]
    kept_ids = {r.node_id for r in kept}
    edges = {p for p in pairs if p[0] in kept_ids and p[1] in kept_ids and p[0] != p[1]}
    counts = {
        "nodes_in": len(nodes),
        "pairs_in": len(pairs),
        "active_nodes": len(active),
        "nodes_retained": len(kept),
        "pairs_retained": len(edges),
    }
    ds = ItdkDataset(kept, edges, counts)
    ds.check_closure()
    return ds


@dataclass
class Segment:
    graph: SpatialGraph
    node_ids: list[str]
    continent: str


def segment_continent(ds: ItdkDataset, continent: str) -> Segment:
    """Intracontinental subgraph with ``(lat, lon)`` positions.

    Node ``i`` of the graph is ``node_ids[i]``; nodes are ordered by id.
    """
    code = continent.upper()
    if code not in CONTINENTS:
        raise ValueError(f"unknown continent code {continent!r}; expected one of {', '.join(CONTINENTS)}")
    recs = sorted((r for r in ds.nodes if r.continent == code), key=lambda r: r.node_id)
    index = {r.node_id: i for i, r in enumerate(recs)}
    edges = [(index[a], index[b]) for a, b in ds.edges if a in index and b in index]
    pos = np.array([[r.position.lat, r.position.lon] for r in recs], dtype=float).reshape(-1, 2)
    g = SpatialGraph(pos, edges, coords="geo", layer="fiber")
    return Segment(g, [r.node_id for r in recs], code)


def real_network_report(g: SpatialGraph, photonic: PhotonicParams = PhotonicParams(), rng=0, *,
                        distance_fn=None) -> MetricsReport:
    """Photonic overlay with great-circle lengths, then all metrics."""
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    phot = sample_overlay(g, photonic, distance_fn=distance_fn, rng=stream.child(0))
    return full_report(phot, rng=stream.child(1))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def ingest(nodes_path, links_path) -> tuple[ItdkDataset, dict]:
    """Run parse -> expand -> cross-filter; returns the dataset and a report."""
    node_errors: list = []
    link_errors: list = []
    nodes = parse_geo_nodes(nodes_path, node_errors)
    stats: dict = {}
    pairs = expand_hyperlinks(parse_links(links_path, link_errors), stats)
    ds = cross_filter(nodes, pairs)
    ds.provenance = {"nodes": file_digest(nodes_path), "links": file_digest(links_path)}
    report = {
        "nodes_parsed": len(nodes),
        "nodes_malformed": len(node_errors),
        "malformed_lines": [{"file": "nodes", "line": n, "reason": r} for n, r in node_errors[:100]]
        + [{"file": "links", "line": n, "reason": r} for n, r in link_errors[:100]],
        **stats,
        **ds.counts,
        "provenance": ds.provenance,
        "dataset_digest": ds.digest(),
    }
    return ds, report


def write_segment(seg: Segment, out_dir, report: dict | None = None) -> dict[str, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = out / seg.continent
    paths = {
        "edges": str(stem.with_suffix(".edges")),
        "positions": str(stem.with_suffix(".pos")),
        "ids": str(stem.with_suffix(".ids")),
    }
    seg.graph.write(paths["edges"], paths["positions"])
    lines = ["# index\tnode_id"] + [f"{i}\t{nid}" for i, nid in enumerate(seg.node_ids)]
    Path(paths["ids"]).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if report is not None:
        paths["report"] = str(out / "ingest_report.json")
        Path(paths["report"]).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
