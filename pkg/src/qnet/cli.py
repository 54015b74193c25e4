"""``qnet`` command line: generate, overlay, metrics, scan, fit, ingest, compare.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from qnet import __version__
from qnet import experiments as ex
from qnet import itdk
from qnet.geometry import RngStream, density_for_radius
from qnet.graph import GraphFormatError, SpatialGraph
from qnet.metrics import UNDEFINED, MetricsReport, full_report, log_bins
from qnet.overlay import PhotonicParams, sample_overlay

log = logging.getLogger("qnet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- helpers ----------------------------------------------------------------


def _load_config(path, args) -> ex.ModelConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}")
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    if os.environ.get("QNET_SEED"):
        try:
            raw["seed"] = int(os.environ["QNET_SEED"])
        except ValueError:
            raise UsageError(f"QNET_SEED must be an integer, got {os.environ['QNET_SEED']!r}")
    for flag in ("N", "rho", "R", "seed"):
        val = getattr(args, flag, None)
        if val is not None:
            raw[flag] = val
            if flag == "rho":
                raw.pop("R", None)
            if flag == "R":
                raw.pop("rho", None)
    return ex.ModelConfig.from_dict(raw)


def _write_manifest(out: Path, command: str, argv, config=None, seed=None, outputs=()):
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "master_seed": seed,
        "tool_version": __version__,
        "output_paths": sorted(str(p) for p in outputs),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_graph(edges, positions=None) -> SpatialGraph:
    try:
        return SpatialGraph.read(edges, positions)
    except OSError as exc:
        raise DataError(f"cannot read graph: {exc}")


def _guess_positions(edges_path: str) -> str | None:
    p = Path(edges_path)
    for cand in (p.with_suffix(".pos"), p.parent / (p.name.split(".")[0] + ".pos")):
        if cand.exists():
            return str(cand)
    return None


def _report_json(rep: MetricsReport, log_binned: bool) -> dict:
    d = rep.to_dict()
    if log_binned:
        d["degree_histogram_log_binned"] = [list(x) for x in log_bins(rep.degree_histogram)]
        d["clustering_by_degree_log_binned"] = [list(x) for x in _log_bin_values(rep.clustering_by_degree)]
    return d


def _log_bin_values(ck: dict[int, float], bins_per_decade: int = 5):
    # plain average of the values falling in each geometric bin
    ks = sorted(k for k in ck if k > 0)
    if not ks:
        return []
    step = 1.0 / bins_per_decade
    out = []
    lo_exp = 0.0
    top = math.log10(ks[-1])
    while lo_exp <= top + 1e-12:
        lo, hi = 10**lo_exp, 10 ** (lo_exp + step)
        inside = [ck[k] for k in ks if lo <= k < hi]
        if inside:
            out.append((math.sqrt(lo * hi), sum(inside) / len(inside)))
        lo_exp += step
    return out


def _parse_grid(spec: str) -> list[float]:
    """``start:stop:count`` (linear), ``log:start:stop:count`` or ``v1,v2,...``."""
    try:
        if spec.startswith("log:"):
            a, b, n = spec[4:].split(":")
            return np.geomspace(float(a), float(b), int(n)).tolist()
        if ":" in spec:
            a, b, n = spec.split(":")
            return np.linspace(float(a), float(b), int(n)).tolist()
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad grid spec {spec!r}")


# -- commands ---------------------------------------------------------------


def cmd_generate(args) -> int:
    config = _load_config(args.config, args)
    out = Path(args.out)
    tag = config.tag()
    paths = {
        "fiber": out / f"{tag}.fiber.edges",
        "photonic": out / f"{tag}.photonic.edges",
        "positions": out / f"{tag}.pos",
    }
    _write_manifest(out, "generate", args.argv, config.to_dict(), config.seed, paths.values())
    fib, phot = ex.build_sample(config, args.index)
    fib.write(paths["fiber"], paths["positions"])
    phot.write(paths["photonic"])
    print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2))
    return EXIT_OK


def cmd_overlay(args) -> int:
    positions = args.positions or _guess_positions(args.graph)
    g = _read_graph(args.graph, positions)
    out = Path(args.out)
    seed = args.seed if args.seed is not None else int(os.environ.get("QNET_SEED", "0"))
    params = PhotonicParams(args.gamma, args.n_p)
    dest = out / (Path(args.graph).name.split(".")[0] + ".photonic.edges")
    _write_manifest(out, "overlay", args.argv, {"photonic": {"gamma": args.gamma, "n_p": args.n_p}}, seed, [dest])
    phot = sample_overlay(g, params, rng=RngStream(seed).child(0))
    phot.write(dest)
    print(str(dest))
    return EXIT_OK


def cmd_metrics(args) -> int:
    positions = args.positions or _guess_positions(args.graph)
    g = _read_graph(args.graph, positions)
    if g.n == 0:
        raise DataError(f"{args.graph}: graph has no nodes")
    rep = full_report(g, sampled=True if args.sampled else None)
    text = json.dumps(_report_json(rep, args.log_bins), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_scan(args) -> int:
    config = _load_config(args.config, args)
    grid = _parse_grid(args.grid)
    metrics = tuple(args.metrics.split(",")) if args.metrics else ("giant_fraction",)
    bad = [m for m in metrics if m not in ex.SCAN_METRICS]
    if bad:
        raise UsageError(f"unknown metric(s): {', '.join(bad)}")
    out = Path(args.out)
    stem = f"{config.tag()}_{args.parameter}-scan"
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    _write_manifest(out, "scan", args.argv, config.to_dict(), config.seed, [csv_path, json_path])
    try:
        result = ex.scan(config, args.parameter, grid, args.samples, metrics=metrics,
                         threads=args.threads, fixed=args.fixed)
    except ValueError as exc:
        raise UsageError(str(exc))
    csv_path.write_text(result.to_csv(), encoding="utf-8")
    summary = {"scan": result.to_dict()}
    if "giant_fraction" in metrics and args.parameter == "rho":
        cp = ex.critical_density(result)
        summary["critical_density"] = {
            "rho_c": cp.rho_c, "uncertainty": cp.uncertainty,
            "bracketed": cp.bracketed, "peak_std": cp.peak_std,
        }
        if not cp.bracketed:
            log.warning("critical density is not bracketed by the grid")
    json_path.write_text(ex.dumps(summary) + "\n", encoding="utf-8")
    print(str(csv_path))
    return EXIT_OK


def _ensemble_for_fit(args):
    if args.input:
        try:
            raw = json.loads(Path(args.input).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read {args.input}: {exc}")
        items = raw if isinstance(raw, list) else [raw]
        return None, [MetricsReport.from_dict({k: v for k, v in d.items() if k in MetricsReport.__dataclass_fields__}) for d in items]
    if not args.config:
        raise UsageError("fit needs a CONFIG or --input")
    config = _load_config(args.config, args)
    return config, ex.run_ensemble(config, args.samples, path_length=False, threads=args.threads)


def cmd_fit(args) -> int:
    out = Path(args.out)
    fits: dict[str, ex.FitResult] = {}
    if args.form == "path-scaling":
        if not args.config:
            raise UsageError("path-scaling fits need a CONFIG")
        config = _load_config(args.config, args)
        sizes = [int(x) for x in _parse_grid(args.sizes)]
        _write_manifest(out, "fit", args.argv, config.to_dict(), config.seed,
                        [out / f"{config.tag()}_fit.csv", out / f"{config.tag()}_fit.json"])
        points = []
        for n in sizes:
            c = ex.ModelConfig.create(config.kind, n, rho=config.rho, params=config.params,
                                      photonic=config.photonic, seed=config.seed)
            reps = ex.run_ensemble(c, args.samples, threads=args.threads)
            mean, _, _ = ex.aggregate(reps, ["avg_shortest_path"])
            if mean["avg_shortest_path"] is None:
                raise ex.FitError(f"no defined path length at N={n}")
            points.append((n, config.rho, mean["avg_shortest_path"]))
        fits["path_scaling"] = ex.fit_path_scaling(points)
        tag = config.tag()
    else:
        config, reports = _ensemble_for_fit(args)
        tag = config.tag() if config else Path(args.input).stem
        _write_manifest(out, "fit", args.argv, config.to_dict() if config else {"input": args.input},
                        config.seed if config else None, [out / f"{tag}_fit.csv", out / f"{tag}_fit.json"])
        hist = ex.pooled_histogram(reports)
        k_min = args.k_min if args.k_min is not None else ex.histogram_mode(hist)
        if args.form == "gen-exponential":
            fits["degree"] = ex.fit_gen_exponential(hist, k_min)
        elif args.form == "power-law":
            fits["degree"] = ex.fit_power_law_tail(hist, k_min)
        else:
            ck, counts = ex.pooled_by_degree(reports, "clustering_by_degree")
            fits["clustering"] = ex.fit_clustering_power(ck, int(args.k_min or 3), counts, args.min_count)
    (out / f"{tag}_fit.csv").write_text(ex.fits_to_csv(fits), encoding="utf-8")
    (out / f"{tag}_fit.json").write_text(ex.dumps({k: v.to_dict() for k, v in fits.items()}) + "\n", encoding="utf-8")
    for f in fits.values():
        if not f.converged:
            log.error("fit did not converge (residual %g)", f.residual)
            return EXIT_NUMERIC
    print(str(out / f"{tag}_fit.csv"))
    return EXIT_OK


def cmd_ingest(args) -> int:
    out = Path(args.out)
    continents = list(itdk.CONTINENTS) if args.continent.upper() == "ALL" else [args.continent.upper()]
    for c in continents:
        if c not in itdk.CONTINENTS:
            raise UsageError(f"unknown continent code {c!r}; expected one of {', '.join(itdk.CONTINENTS)} or ALL")
    planned = [out / f"{c}{s}" for c in continents for s in (".edges", ".pos", ".ids")] + [out / "ingest_report.json"]
    _write_manifest(out, "ingest", args.argv, {"nodes": args.nodes, "links": args.links, "continents": continents},
                    None, planned)
    try:
        ds, report = itdk.ingest(args.nodes, args.links)
    except OSError as exc:
        raise DataError(f"cannot read ITDK input: {exc}")
    report["segments"] = {}
    for c in continents:
        seg = itdk.segment_continent(ds, c)
        if seg.graph.n == 0:
            log.warning("continent %s has no nodes in this dataset", c)
        report["segments"][c] = {"nodes": seg.graph.n, "edges": seg.graph.n_edges}
        if args.r_eff:
            report["segments"][c]["rho_eff"] = density_for_radius(seg.graph.n, args.r_eff)
        ref = itdk.REFERENCE_NETWORKS.get(c)
        if ref:
            report["segments"][c]["reference_nodes"], report["segments"][c]["reference_rho"] = ref
        itdk.write_segment(seg, out)
    (out / "ingest_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(report["segments"], indent=2, sort_keys=True))
    return EXIT_OK


def _network_inputs(args):
    """Yield ``(label, graph or config)`` for every compare input."""
    for path in args.networks:
        if path.endswith(".json"):
            yield Path(path).stem, _load_config(path, argparse.Namespace())
        else:
            yield Path(path).name.split(".")[0], _read_graph(path, _guess_positions(path))


COMPARE_COLUMNS = ["network", "layer", "N", "rho", "avg_shortest_path", "avg_clustering", "assortativity", "edges_per_node"]


def cmd_compare(args) -> int:
    out = Path(args.out)
    real = _read_graph(args.real, args.positions or _guess_positions(args.real))
    seed = args.seed if args.seed is not None else int(os.environ.get("QNET_SEED", "0"))
    table_path, series_path = out / "comparison.csv", out / "series.csv"
    _write_manifest(out, "compare", args.argv, {"real": args.real, "networks": args.networks}, seed,
                    [table_path, series_path])
    photonic = PhotonicParams(args.gamma, args.n_p)
    rho_real = args.rho if args.rho is not None else (density_for_radius(real.n, args.r_eff) if args.r_eff else None)
    real_name = Path(args.real).name.split(".")[0]
    rows: list[tuple[str, str, float | None, MetricsReport]] = []
    rows.append((real_name, "photonic", rho_real, itdk.real_network_report(real, photonic, RngStream(seed))))
    if args.fiber_metrics:
        rows.append((real_name, "fiber", rho_real, full_report(real, rng=RngStream(seed).child(1))))
    for label, item in _network_inputs(args):
        if isinstance(item, SpatialGraph):
            if item.n != real.n and not args.allow_n_mismatch:
                raise UsageError(f"{label}: N={item.n} differs from real N={real.n} (use --allow-n-mismatch)")
            if item.layer == "photonic":
                rows.append((label, "photonic", rho_real, full_report(item, rng=RngStream(seed).child(1))))
            else:
                rows.append((label, "photonic", rho_real, itdk.real_network_report(item, photonic, RngStream(seed))))
            continue
        config = item
        if config.N != real.n:
            if not args.allow_n_mismatch:
                raise UsageError(f"{label}: model N={config.N} differs from real N={real.n} (use --allow-n-mismatch)")
        if args.rho is not None and config.N == real.n:
            config = config.with_rho(args.rho)
        reps = ex.run_ensemble(config, args.samples, threads=args.threads)
        rep = reps[0] if len(reps) == 1 else _mean_report(reps)
        rows.append((label, "photonic", config.rho, rep))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    for name, layer, rho, rep in rows:
        w.writerow([name, layer, rep.n_nodes, UNDEFINED if rho is None else repr(rho)] + [
            UNDEFINED if getattr(rep, c) is None else repr(float(getattr(rep, c))) for c in COMPARE_COLUMNS[4:]
        ])
    table_path.write_text(buf.getvalue(), encoding="utf-8")
    series_path.write_text(_series_csv(rows, args.log_bins), encoding="utf-8")
    print(str(table_path))
    return EXIT_OK


def _mean_report(reps) -> MetricsReport:
    mean, _, _ = ex.aggregate(reps, MetricsReport.SCALARS)
    ck, _ = ex.pooled_by_degree(reps, "clustering_by_degree")
    knn, _ = ex.pooled_by_degree(reps, "knn_by_degree")
    return MetricsReport(
        n_nodes=reps[0].n_nodes,
        n_edges=int(round(mean["n_edges"])),
        giant_fraction=mean["giant_fraction"],
        avg_shortest_path=mean["avg_shortest_path"],
        avg_clustering=mean["avg_clustering"],
        assortativity=mean["assortativity"],
        edges_per_node=mean["edges_per_node"],
        degree_histogram=ex.pooled_histogram(reps),
        clustering_by_degree=ck,
        knn_by_degree=knn,
    )


def _series_csv(rows, log_binned: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["network", "layer", "series", "k", "value"])
    for name, layer, _, rep in rows:
        if log_binned:
            series = {
                "P_k": log_bins(rep.degree_histogram),
                "C_k": _log_bin_values(rep.clustering_by_degree),
                "knn_k": _log_bin_values(rep.knn_by_degree),
            }
        else:
            series = {
                "P_k": sorted(rep.degree_histogram.items()),
                "C_k": sorted(rep.clustering_by_degree.items()),
                "knn_k": sorted(rep.knn_by_degree.items()),
            }
        for sname, pts in series.items():
            for k, v in pts:
                w.writerow([name, layer, sname, repr(k) if isinstance(k, float) else k, repr(float(v))])
    return buf.getvalue()


def cmd_replay(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}")
    argv = list(manifest["argv"])
    # pin the seed actually used, which may have come from QNET_SEED
    if manifest.get("master_seed") is not None:
        argv += ["--seed", str(manifest["master_seed"])]
    return main(argv)


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qnet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qnet {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def config_flags(sp):
        sp.add_argument("--N", type=int, help="override node count")
        sp.add_argument("--rho", type=float, help="override density (nodes/km^2)")
        sp.add_argument("--R", type=float, help="override disk radius (km)")
        sp.add_argument("--seed", type=int, help="override master seed")

    def threads(sp):
        sp.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")

    g = sub.add_parser("generate", help="sample fiber + photonic graphs from a config")
    g.add_argument("config")
    g.add_argument("--out", required=True)
    g.add_argument("--index", type=int, default=0, help="ensemble member (stream index)")
    config_flags(g)
    g.set_defaults(func=cmd_generate)

    o = sub.add_parser("overlay", help="sample a photonic layer on a serialized fiber graph")
    o.add_argument("graph")
    o.add_argument("--positions")
    o.add_argument("--out", required=True)
    o.add_argument("--gamma", type=float, default=0.2)
    o.add_argument("--n-p", type=int, default=1000)
    o.add_argument("--seed", type=int)
    o.set_defaults(func=cmd_overlay)

    m = sub.add_parser("metrics", help="full metric report of a serialized graph")
    m.add_argument("graph")
    m.add_argument("--positions")
    m.add_argument("--out")
    m.add_argument("--log-bins", action="store_true")
    m.add_argument("--sampled", action="store_true", help="source-sampled path length")
    m.set_defaults(func=cmd_metrics)

    s = sub.add_parser("scan", help="ensemble scan over rho, R or N")
    s.add_argument("config")
    s.add_argument("--grid", required=True, help="start:stop:count, log:start:stop:count or v1,v2,...")
    s.add_argument("--parameter", choices=("rho", "R", "N"), default="rho")
    s.add_argument("--fixed", choices=("N", "R"), default="N", help="quantity held fixed in a rho scan")
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--metrics", help=f"comma list from {','.join(ex.SCAN_METRICS)}")
    s.add_argument("--out", required=True)
    config_flags(s)
    threads(s)
    s.set_defaults(func=cmd_scan)

    f = sub.add_parser("fit", help="fit degree, clustering or path-length forms")
    f.add_argument("config", nargs="?")
    f.add_argument("--form", required=True, choices=("gen-exponential", "power-law", "path-scaling", "clustering-power"))
    f.add_argument("--input", help="metrics JSON (one report or a list) instead of running an ensemble")
    f.add_argument("--samples", type=int, default=100)
    f.add_argument("--sizes", default="250,500,1000,2000")
    f.add_argument("--k-min", type=float)
    f.add_argument("--min-count", type=int, default=10)
    f.add_argument("--out", required=True)
    config_flags(f)
    threads(f)
    f.set_defaults(func=cmd_fit)

    i = sub.add_parser("ingest", help="CAIDA ITDK nodes.geo + links -> per-continent graphs")
    i.add_argument("nodes")
    i.add_argument("links")
    i.add_argument("--continent", required=True, help="AF, AS, EU, NA, OC, SA or ALL")
    i.add_argument("--r-eff", type=float, help="radius (km) for a reported N/(pi R^2) density")
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_ingest)

    c = sub.add_parser("compare", help="real network vs model ensembles, Table-style CSV")
    c.add_argument("real", help="real fiber graph edge list (geo positions alongside)")
    c.add_argument("networks", nargs="+", help="model config JSON files or further edge lists")
    c.add_argument("--positions")
    c.add_argument("--out", required=True)
    c.add_argument("--samples", type=int, default=1)
    c.add_argument("--rho", type=float, help="density for the real network and the models")
    c.add_argument("--r-eff", type=float)
    c.add_argument("--gamma", type=float, default=0.2)
    c.add_argument("--n-p", type=int, default=1000)
    c.add_argument("--seed", type=int)
    c.add_argument("--allow-n-mismatch", action="store_true")
    c.add_argument("--fiber-metrics", action="store_true", help="also report the real fiber layer")
    c.add_argument("--log-bins", action="store_true")
    threads(c)
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    r.add_argument("manifest")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ex.ConfigError) as exc:
        print(f"qnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GraphFormatError) as exc:
        print(f"qnet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ex.FitError as exc:
        print(f"qnet: fit failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
