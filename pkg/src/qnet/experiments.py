"""Ensembles, parameter scans, critical-density detection and curve fits."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import jsonschema
import numpy as np
from scipy.optimize import minimize_scalar

from qnet import fiber as fiber_models
from qnet.geometry import RngStream, density_for_radius, radius_for_density, sample_disk
from qnet.graph import SpatialGraph
from qnet.metrics import UNDEFINED, MetricsReport, full_report
from qnet.overlay import PhotonicParams, sample_overlay

MODEL_KINDS = ("brito", "brito-soares", "brito-rozenfeld")

_PARAM_SCHEMAS = {
    "brito": {
        "type": "object",
        "properties": {
            "beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "alphaL": {"type": "number", "exclusiveMinimum": 0},
        },
        "additionalProperties": False,
    },
    "brito-soares": {
        "type": "object",
        "properties": {
            "m": {"type": "integer", "minimum": 1},
            "alphaA": {"type": "number", "minimum": 0},
        },
        "additionalProperties": False,
    },
    "brito-rozenfeld": {
        "type": "object",
        "properties": {
            "lambda": {"type": "number", "exclusiveMinimum": 2},
            "m": {"type": "integer", "minimum": 1},
            "K": {"type": "integer", "minimum": 2},
            "A": {"type": "number", "exclusiveMinimum": 0},
            "support": {"enum": ["inclusive", "exclusive"]},
        },
        "additionalProperties": False,
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qnet model configuration",
    "type": "object",
    "required": ["model", "N"],
    "properties": {
        "model": {"enum": list(MODEL_KINDS)},
        "N": {"type": "integer", "minimum": 1},
        "rho": {"type": "number", "exclusiveMinimum": 0},
        "R": {"type": "number", "exclusiveMinimum": 0},
        "params": {"type": "object"},
        "photonic": {
            "type": "object",
            "properties": {
                "gamma": {"type": "number", "exclusiveMinimum": 0},
                "n_p": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid model configuration; ``path`` locates the offending field."""

    def __init__(self, path: str, msg: str):
        self.path = path
        super().__init__(f"{path or '<root>'}: {msg}")


class FitError(RuntimeError):
    pass


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    N: int
    R: float
    params: object
    photonic: PhotonicParams = PhotonicParams()
    seed: int = 0

    @property
    def rho(self) -> float:
        return density_for_radius(self.N, self.R)

    @classmethod
    def create(cls, kind: str, N: int, *, rho=None, R=None, params=None, photonic=None, seed=0):
        if (rho is None) == (R is None):
            if rho is None:
                raise ConfigError("$", "one of 'rho' or 'R' is required")
            if not math.isclose(rho, density_for_radius(N, R), rel_tol=1e-9):
                raise ConfigError("$.rho", f"rho={rho} inconsistent with R={R} for N={N}")
        if R is None:
            R = radius_for_density(N, rho)
        if params is None:
            params = fiber_models.default_params(kind)
        return cls(kind, int(N), float(R), params, photonic or PhotonicParams(), int(seed))

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        try:
            jsonschema.validate(d, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(_json_path(exc.absolute_path), exc.message) from None
        try:
            jsonschema.validate(d.get("params", {}), _PARAM_SCHEMAS[d["model"]])
        except jsonschema.ValidationError as exc:
            raise ConfigError(_json_path(["params", *exc.absolute_path]), exc.message) from None
        kind = d["model"]
        raw = dict(d.get("params", {}))
        try:
            if kind == "brito":
                params = fiber_models.WaxmanParams(**raw)
            elif kind == "brito-soares":
                params = fiber_models.SoaresParams(**raw)
            else:
                if "lambda" in raw:
                    raw["lam"] = raw.pop("lambda")
                params = fiber_models.RozenfeldParams(**raw)
            photonic = PhotonicParams(**d.get("photonic", {}))
        except ValueError as exc:
            raise ConfigError("$.params", str(exc)) from None
        if kind == "brito-soares" and d["N"] < params.m + 1:
            raise ConfigError("$.N", f"Brito-Soares needs N >= m+1 = {params.m + 1}")
        return cls.create(
            kind, d["N"], rho=d.get("rho"), R=d.get("R"), params=params,
            photonic=photonic, seed=d.get("seed", 0),
        )

    def to_dict(self) -> dict:
        params = asdict(self.params)
        if "lam" in params:
            params["lambda"] = params.pop("lam")
        return {
            "model": self.kind,
            "N": self.N,
            "R": self.R,
            "params": params,
            "photonic": asdict(self.photonic),
            "seed": self.seed,
        }

    def with_rho(self, rho: float, *, fixed: str = "N") -> ModelConfig:
        """Move to density ``rho`` keeping ``N`` (default) or ``R`` fixed."""
        if fixed == "N":
            return replace(self, R=radius_for_density(self.N, rho))
        n = max(1, int(round(rho * math.pi * self.R**2)))
        return replace(self, N=n)

    def tag(self) -> str:
        return f"{self.kind}_N{self.N}_seed{self.seed}"


# -- single sample and ensembles --------------------------------------------


def build_sample(config: ModelConfig, index: int = 0) -> tuple[SpatialGraph, SpatialGraph]:
    """Positions -> fiber -> photonic for ensemble member ``index``."""
    stream = RngStream(config.seed, index)
    pos = sample_disk(config.N, config.R, stream.child(0))
    fib = fiber_models.generate(config.kind, pos, config.params, stream.child(1))
    phot = sample_overlay(fib, config.photonic, rng=stream.child(2))
    return fib, phot


def _sample_report(job) -> MetricsReport:
    config, index, path_length = job
    _, phot = build_sample(config, index)
    return full_report(phot, path_length=path_length, rng=RngStream(config.seed, index).child(3))


def parallel_map(fn, jobs: Sequence, threads: int | None = 1) -> list:
    """Order-preserving map; results do not depend on ``threads``."""
    jobs = list(jobs)
    threads = threads or os.cpu_count() or 1
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * threads))))


def run_ensemble(config: ModelConfig, samples: int, *, path_length: bool = True, threads: int | None = 1):
    if samples < 1:
        raise ValueError("need at least one sample")
    return parallel_map(_sample_report, [(config, i, path_length) for i in range(samples)], threads)


# -- scans ------------------------------------------------------------------

SCAN_METRICS = (
    "giant_fraction",
    "avg_shortest_path",
    "avg_clustering",
    "assortativity",
    "edges_per_node",
)


@dataclass
class ScanRow:
    value: float
    mean: dict[str, float | None]
    std: dict[str, float | None]
    samples: int
    excluded: dict[str, int] = field(default_factory=dict)


@dataclass
class ScanResult:
    parameter: str
    rows: list[ScanRow]
    metrics: tuple[str, ...] = ("giant_fraction",)
    config: dict | None = None

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])

    def means(self, metric: str) -> np.ndarray:
        return np.array([np.nan if r.mean[metric] is None else r.mean[metric] for r in self.rows])

    def stds(self, metric: str) -> np.ndarray:
        return np.array([np.nan if r.std.get(metric) is None else r.std[metric] for r in self.rows])

    def columns(self) -> list[str]:
        cols = [self.parameter, "samples"]
        with_std = any(r.samples >= 2 for r in self.rows)
        for m in self.metrics:
            cols.append(f"{m}_mean")
            if with_std:
                cols.append(f"{m}_std")
            cols.append(f"{m}_excluded")
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = self.columns()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            row = {self.parameter: repr(r.value), "samples": r.samples}
            for m in self.metrics:
                row[f"{m}_mean"] = _cell(r.mean[m])
                row[f"{m}_std"] = _cell(r.std.get(m))
                row[f"{m}_excluded"] = r.excluded.get(m, 0)
            w.writerow([row[c] for c in cols])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "metrics": list(self.metrics),
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
        }


def _cell(v):
    return UNDEFINED if v is None else repr(float(v))


def aggregate(reports: Iterable[MetricsReport], metrics: Sequence[str]) -> tuple[dict, dict, dict]:
    """Per-metric mean and sample std, skipping undefined values."""
    reports = list(reports)
    mean, std, excluded = {}, {}, {}
    for m in metrics:
        vals = np.array([getattr(r, m) for r in reports if getattr(r, m) is not None], dtype=float)
        excluded[m] = len(reports) - len(vals)
        mean[m] = float(vals.mean()) if len(vals) else None
        std[m] = float(vals.std(ddof=1)) if len(vals) >= 2 else None
    return mean, std, excluded


def scan(config: ModelConfig, parameter: str, grid, samples: int, *,
         metrics: Sequence[str] = ("giant_fraction",), threads: int | None = 1,
         fixed: str = "N") -> ScanResult:
    """Ensemble statistics over a grid of ``rho``, ``R`` or ``N``.

    A ``rho`` scan holds ``N`` fixed and derives ``R`` unless ``fixed="R"``.
    Every grid point reuses stream indices ``0..samples-1`` of the seed.
    """
    grid = [float(x) for x in grid]
    if not grid:
        raise ValueError("empty scan grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("scan grid must be strictly increasing")
    if parameter not in ("rho", "R", "N"):
        raise ValueError(f"cannot scan over {parameter!r}")
    need_path = "avg_shortest_path" in metrics
    configs = []
    for x in grid:
        if parameter == "rho":
            configs.append(config.with_rho(x, fixed=fixed))
        elif parameter == "R":
            configs.append(replace(config, R=x))
        else:
            configs.append(replace(config, N=int(x)))
    jobs = [(c, i, need_path) for c in configs for i in range(samples)]
    reports = parallel_map(_sample_report, jobs, threads)
    rows = []
    for gi, x in enumerate(grid):
        chunk = reports[gi * samples : (gi + 1) * samples]
        mean, std, excluded = aggregate(chunk, metrics)
        rows.append(ScanRow(x, mean, std, samples, excluded))
    return ScanResult(parameter, rows, tuple(metrics), config.to_dict())


def scan_density(config: ModelConfig, rho_grid, samples: int, **kw) -> ScanResult:
    return scan(config, "rho", rho_grid, samples, **kw)


def assortativity_scan(config: ModelConfig, rho_grid, samples: int, **kw) -> ScanResult:
    kw.setdefault("metrics", ("assortativity", "giant_fraction"))
    return scan(config, "rho", rho_grid, samples, **kw)


@dataclass
class CriticalPoint:
    rho_c: float | None
    uncertainty: float | None
    bracketed: bool
    peak_std: float | None = None


def critical_density(result: ScanResult, metric: str = "giant_fraction") -> CriticalPoint:
    """Location of the peak in the ensemble std of ``metric``.

    The grid argmax is refined with the vertex of the parabola through it and
    its two neighbours. A peak on the grid boundary is returned unrefined and
    flagged as not bracketed.
    """
    x = result.values()
    s = result.stds(metric)
    if len(x) == 0 or np.all(np.isnan(s)):
        return CriticalPoint(None, None, False)
    i = int(np.nanargmax(s))
    if i == 0 or i == len(x) - 1 or np.isnan(s[i - 1]) or np.isnan(s[i + 1]):
        spacing = np.diff(x)
        unc = float(spacing[min(i, len(spacing) - 1)] / 2) if len(spacing) else None
        return CriticalPoint(float(x[i]), unc, False, float(s[i]))
    x0, x1, x2 = x[i - 1 : i + 2]
    y0, y1, y2 = s[i - 1 : i + 2]
    num = (x1 - x0) ** 2 * (y1 - y2) - (x1 - x2) ** 2 * (y1 - y0)
    den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0)
    xc = x1 - 0.5 * num / den if den != 0 else x1
    xc = float(min(max(xc, x0), x2))
    return CriticalPoint(xc, float((x2 - x0) / 4), True, float(y1))


@dataclass
class PlateauResult:
    value: float
    slope: float
    plateau: bool
    rho_range: tuple[float, float]


def asymptotic_clustering(result: ScanResult, metric: str = "avg_clustering", tolerance: float = 0.05) -> PlateauResult:
    """Mean of ``metric`` over the top quartile of the grid.

    The region counts as a plateau when a straight-line fit against
    ``log(rho)`` changes by less than ``tolerance`` across it.
    """
    x = result.values()
    y = result.means(metric)
    k = max(1, math.ceil(len(x) / 4))
    xs, ys = x[-k:], y[-k:]
    ok = ~np.isnan(ys)
    if not ok.any():
        raise FitError(f"no defined {metric} values in the plateau region")
    xs, ys = xs[ok], ys[ok]
    slope = float(np.polyfit(np.log(xs), ys, 1)[0]) if len(xs) >= 2 else 0.0
    change = abs(slope) * (math.log(xs[-1] / xs[0]) if len(xs) >= 2 else 0.0)
    return PlateauResult(float(ys.mean()), slope, change < tolerance, (float(xs[0]), float(xs[-1])))


# -- ensemble pooling ---------------------------------------------------------


def pooled_histogram(reports: Sequence[MetricsReport]) -> dict[int, float]:
    """Degree histogram over all nodes of all samples."""
    counts: dict[int, float] = {}
    total = 0
    for r in reports:
        total += r.n_nodes
        for k, p in r.degree_histogram.items():
            counts[k] = counts.get(k, 0.0) + p * r.n_nodes
    return {k: v / total for k, v in sorted(counts.items())}


def pooled_by_degree(reports: Sequence[MetricsReport], field_name: str) -> tuple[dict[int, float], dict[int, int]]:
    """Node-weighted ensemble mean of a per-degree map plus node counts."""
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for r in reports:
        per_k = getattr(r, field_name)
        for k, v in per_k.items():
            nk = int(round(r.degree_histogram.get(k, 0.0) * r.n_nodes))
            sums[k] = sums.get(k, 0.0) + v * nk
            counts[k] = counts.get(k, 0) + nk
    return {k: sums[k] / counts[k] for k in sorted(sums) if counts[k]}, counts


# -- fits -------------------------------------------------------------------


@dataclass
class FitResult:
    form: str
    params: dict[str, float]
    residual: float
    domain: tuple[float, float]
    converged: bool = True
    identifiable: bool = True
    extra: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _xy(data: dict, k_min=None, positive_only=True):
    ks = np.array(sorted(data), dtype=float)
    vs = np.array([data[int(k)] for k in ks], dtype=float)
    keep = vs > 0 if positive_only else np.ones(len(vs), bool)
    if k_min is not None:
        keep &= ks >= k_min
    return ks[keep], vs[keep]


def histogram_mode(hist: dict[int, float]) -> int:
    return max(sorted(hist), key=lambda k: hist[k])


def _linear_lsq(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    return coef, float(res @ res)


def fit_gen_exponential(hist: dict[int, float], k_min: float | None = None, c_bounds=(0.05, 6.0)) -> FitResult:
    """Fit ``P(k) = a * exp(-b * k**c)`` by least squares on ``log P``.

    For each trial ``c`` the model is linear in ``(log a, b)``; ``c`` is
    located on a coarse grid and then polished by bounded scalar
    minimisation. Bins with ``k < k_min`` or ``P = 0`` are ignored.
    """
    k, p = _xy(hist, k_min)
    if len(k) < 4:
        raise FitError(f"generalized exponential needs >= 4 nonzero bins, got {len(k)}")
    y = np.log(p)
    if np.ptp(y) < 1e-12:
        return FitResult("gen-exponential", {"a": float(p[0]), "b": 0.0, "c": float("nan")}, 0.0,
                         (float(k[0]), float(k[-1])), converged=True, identifiable=False)

    def sse(c):
        return _linear_lsq(np.column_stack((np.ones_like(k), -(k**c))), y)[1]

    grid = np.linspace(*c_bounds, 240)
    vals = [sse(c) for c in grid]
    j = int(np.argmin(vals))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
    opt = minimize_scalar(sse, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12, "maxiter": 500})
    c = float(opt.x) if opt.fun <= vals[j] else float(grid[j])
    coef, res = _linear_lsq(np.column_stack((np.ones_like(k), -(k**c))), y)
    a, b = float(np.exp(coef[0])), float(coef[1])
    ident = b > 0 and c_bounds[0] < c < c_bounds[1]
    return FitResult("gen-exponential", {"a": a, "b": b, "c": c}, res, (float(k[0]), float(k[-1])),
                     converged=bool(opt.success), identifiable=ident)


def fit_power_law_tail(hist: dict[int, float], k_min: float) -> FitResult:
    """``P(k) = a * k**-b`` by linear regression of ``log P`` on ``log k``."""
    k, p = _xy(hist, k_min)
    if len(k) < 3:
        raise FitError(f"power-law tail needs >= 3 nonzero bins with k >= {k_min}, got {len(k)}")
    coef, res = _linear_lsq(np.column_stack((np.ones_like(k), np.log(k))), np.log(p))
    return FitResult("power-law", {"a": float(np.exp(coef[0])), "b": float(-coef[1])}, res,
                     (float(k[0]), float(k[-1])))


def fit_path_scaling(points: Sequence[tuple[float, float, float]]) -> FitResult:
    """Fit ``<l> = a * N**delta / rho`` at one density and a log alternative.

    ``extra`` carries both candidates' squared error in linear ``<l>`` space
    (``sse_power``, ``sse_log``) so the two forms can be compared directly,
    and the log-form coefficients ``log_slope`` / ``log_intercept``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise FitError(f"path scaling needs >= 3 points, got {len(pts)}")
    rhos = pts[:, 1]
    if not np.allclose(rhos, rhos[0], rtol=1e-9, atol=0):
        raise FitError("points at several densities; group them with fit_path_scaling_grouped")
    n, rho, l = pts[:, 0], rhos[0], pts[:, 2]
    X = np.column_stack((np.ones_like(n), np.log(n)))
    coef, res = _linear_lsq(X, np.log(l))
    pre, delta = float(np.exp(coef[0])), float(coef[1])
    lcoef, _ = _linear_lsq(np.column_stack((np.log(n), np.ones_like(n))), l)
    sse_power = float(np.sum((l - pre * n**delta) ** 2))
    sse_log = float(np.sum((l - (lcoef[0] * np.log(n) + lcoef[1])) ** 2))
    return FitResult(
        "path-scaling",
        {"delta": delta, "a": pre * rho},
        res,
        (float(n.min()), float(n.max())),
        extra={"rho": float(rho), "sse_power": sse_power, "sse_log": sse_log,
               "log_slope": float(lcoef[0]), "log_intercept": float(lcoef[1])},
    )


def fit_path_scaling_grouped(points) -> dict[float, FitResult]:
    groups: dict[float, list] = {}
    for p in points:
        groups.setdefault(float(p[1]), []).append(p)
    return {rho: fit_path_scaling(g) for rho, g in sorted(groups.items())}


def fit_clustering_power(ck: dict[int, float], k_min: int = 3, counts: dict[int, int] | None = None,
                         min_count: int = 1) -> FitResult:
    """Log-log slope of ``C(k)`` over ``k >= k_min`` (returned as ``exponent``)."""
    data = {k: v for k, v in ck.items() if counts is None or counts.get(k, 0) >= min_count}
    k, c = _xy(data, k_min)
    if len(k) < 3:
        raise FitError(f"C(k) fit needs >= 3 degrees with C > 0, got {len(k)}")
    coef, res = _linear_lsq(np.column_stack((np.ones_like(k), np.log(k))), np.log(c))
    return FitResult("clustering-power", {"exponent": float(coef[1]), "prefactor": float(np.exp(coef[0]))},
                     res, (float(k[0]), float(k[-1])))


def fits_to_csv(fits: dict[str, FitResult]) -> str:
    """Long format: one row per (fit, parameter)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fit", "form", "parameter", "value", "residual", "domain_min", "domain_max", "identifiable"])
    for name, f in fits.items():
        for p, v in {**f.params, **f.extra}.items():
            w.writerow([name, f.form, p, repr(float(v)), repr(f.residual), f.domain[0], f.domain[1], f.identifiable])
    return buf.getvalue()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(type(o).__name__)
