"""Run configuration and the end-to-end construction pipeline."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import fileio, runge
from .dynamics import (
    DEFAULT_OUTER,
    BasinChart,
    ConstructedMap,
    VerificationReport,
    chart_radius_for,
    choose_n,
    classify_grid,
    exterior_certificate,
    verify_approximation,
)
from .model import ModelFamily, choose_delta, choose_lambda
from .polyrat import DEFAULT_SEED, polesum_critical_points, rational_eval
from .scenarios import NORMALIZATION_HINTS, SCENARIOS, generate_scenario
from .sphere import MobiusTransform, RegionSet, cover_boundary, infinity_in_boundary, mobius_normalize

SEPARATION = 1.5  # trap inflation in the disjointness test, room for contours


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it, ``__cause__`` holds the error."""

    def __init__(self, stage: str, err: BaseException):
        super().__init__(f"stage {stage} failed: {err}")
        self.stage = stage


@dataclass
class RunConfig:
    scenario: str = "unit_circle"
    d: int | None = None
    eps: float = 0.25
    resolution: int = 512
    chart_radius: float | None = None  # region chart half-width, default 8/eps
    julia_budget: int = 200  # P-steps allowed for a critical value to enter a trap
    outer_budget: int = DEFAULT_OUTER  # S_n-steps per pixel
    root_budget: int = 400  # Aberth iterations for the critical points
    node_budget: int = runge.NODE_BUDGET
    eta_start: int = -6  # eta moduli run over 10^eta_start .. 10^eta_stop
    eta_stop: int = -1
    min_n: int = 1
    seed: int = DEFAULT_SEED
    out: str | None = None

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        """Build from string or typed values (config file entries, CLI flags)."""
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for k, v in values.items():
            key = k.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {k!r}")
            if v is None:
                continue
            kw[key] = _coerce(key, v)
        return cls(**kw)

    def validate(self) -> None:
        if not (isinstance(self.eps, (int, float)) and 0 < self.eps < 2):
            raise ConfigError(f"eps must lie in (0, 2), got {self.eps}")
        if not 64 <= int(self.resolution) <= 8192:
            raise ConfigError(f"resolution must lie in [64, 8192], got {self.resolution}")
        for name in ("julia_budget", "outer_budget", "root_budget", "node_budget", "min_n"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.eta_start > self.eta_stop:
            raise ConfigError("eta_start must not exceed eta_stop")
        if self.chart_radius is not None and not self.chart_radius >= 8 / self.eps:
            raise ConfigError(f"chart_radius must be at least 8/eps = {8 / self.eps:.6g}")
        if self.scenario not in SCENARIOS:
            if not Path(self.scenario).is_file():
                raise ConfigError(f"scenario {self.scenario!r} is neither built in ({', '.join(SCENARIOS)}) nor a file")
        elif self.scenario == "newton":
            if self.d not in (3, 4, 5):
                raise ConfigError("newton needs d in 3..5")
        elif self.d not in (None, 2):
            raise ConfigError(f"{self.scenario} has d = 2")

    def region_radius(self) -> float:
        return float(self.chart_radius) if self.chart_radius is not None else 8 / self.eps

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items() if v is not None)


_INTS = {"d", "resolution", "julia_budget", "outer_budget", "root_budget", "node_budget", "eta_start", "eta_stop", "min_n", "seed"}
_FLOATS = {"eps", "chart_radius"}


def _coerce(key, v):
    try:
        if key in _INTS:
            return int(v)
        if key in _FLOATS:
            return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value {v!r} for {key}") from None
    return str(v)


def set_threads(env: str = "BASIN_FORGE_THREADS") -> None:
    """Cap the numba worker count from the environment."""
    val = os.environ.get(env)
    if not val:
        return
    import numba

    try:
        k = int(val)
    except ValueError:
        raise ConfigError(f"{env} must be an integer") from None
    if k < 1:
        raise ConfigError(f"{env} must be positive")
    numba.set_num_threads(min(k, numba.config.NUMBA_NUM_THREADS))


# ---------------------------------------------------------------------------
# stages


def load_regions(config: RunConfig) -> RegionSet:
    if config.scenario in SCENARIOS:
        return generate_scenario(config.scenario, config.d, config.resolution, config.region_radius())
    regions = fileio.read_regions(config.scenario)
    if config.d is not None and config.d != regions.d:
        raise ConfigError(f"region file has d = {regions.d}, config says {config.d}")
    regions.validate()
    return regions


def normalization_point(regions: RegionSet, scenario: str | None = None):
    """Boundary point sent to infinity, or None when infinity is in J already."""
    if infinity_in_boundary(regions):
        return None
    if scenario in NORMALIZATION_HINTS:
        return NORMALIZATION_HINTS[scenario]
    # boundary pixel centre nearest the origin, row-major ties
    z = regions.pixel_centers()
    jz = np.where(regions.labels == 0, np.abs(z), np.inf)
    k = int(np.argmin(jz))
    return complex(z.ravel()[k])


@dataclass
class PipelineResult:
    config: RunConfig
    input_regions: RegionSet
    regions: RegionSet  # working frame
    transform: MobiusTransform
    model: ModelFamily | None = None
    shrunk: runge.ShrunkenRegions | None = None
    contours: runge.ContourSet | None = None
    runge: runge.RungeResult | None = None
    perturb: runge.PerturbResult | None = None
    map: ConstructedMap | None = None
    chart: BasinChart | None = None
    report: VerificationReport | None = None
    files: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.report is not None and self.report.passed


class _Stages:
    def __init__(self):
        self.name = None

    def __call__(self, name):
        self.name = name
        return self

    def __enter__(self):
        return self

    def __exit__(self, kind, err, tb):
        if err is not None and not isinstance(err, (StageError, KeyboardInterrupt)):
            raise StageError(self.name, err) from err
        return False


def construct(regions: RegionSet, eps: float, config: RunConfig, res: PipelineResult | None = None, stage=None):
    """From working-frame regions to the ConstructedMap; fills ``res`` as it goes."""
    stage = stage or _Stages()
    res = res or PipelineResult(config, regions, regions, MobiusTransform())
    with stage("cover_boundary"):
        covers = {j: cover_boundary(regions, j, eps) for j in range(1, regions.d + 1)}
        disks = [x for v in covers.values() for x in v]
    with stage("choose_lambda"):
        lam = choose_lambda(regions.d, eps, forbidden=disks)
    with stage("choose_delta"):
        delta, worst = choose_delta(regions.d, lam, eps, clearance=disks, separation=SEPARATION)
        res.model = ModelFamily(regions.d, lam, delta, worst)
    with stage("build_A_eps"):
        res.shrunk = runge.build_A_eps(regions, eps, res.model, covers)
    with stage("build_contours"):
        res.contours = runge.build_contours(res.shrunk)
    with stage("cauchy_runge"):
        res.runge = runge.cauchy_runge(res.contours, res.shrunk, budget=config.node_budget)
    with stage("perturb_eta"):
        r = res.runge.rational
        pts, _ = polesum_critical_points(r, max_iter=config.root_budget, seed=config.seed)
        cv = rational_eval(r, pts)
        res.perturb = runge.perturb_eta(r, res.shrunk, config.julia_budget, config.eta_start, config.eta_stop, cv=cv)
    with stage("choose_n"):
        n = max(choose_n(res.perturb.steps), config.min_n)
        certs = {"contraction": worst, "runge": res.runge.sup_error, "cv": [int(s) for s in res.perturb.steps]}
        res.map = ConstructedMap(res.model, res.perturb.rational, res.perturb.eta, n, tuple(res.shrunk.owners()), res.transform, certs)
    return res


def construction_summary(res: PipelineResult) -> dict:
    """Report entries describing the construction (all deterministic)."""
    m = res.map
    steps = np.asarray(res.perturb.steps)
    out = {
        "transform": m.transform.serialize(),
        "lambda": m.model.lam,
        "delta": m.model.delta,
        "contraction_margin": m.model.contraction,
        "contours": len(res.contours.contours),
        "poles": m.rational.size,
        "runge_sup_error": res.runge.sup_error,
        "runge_tolerance": res.runge.tol,
        "runge_samples": res.shrunk.sample_count,
        "runge_misses": runge.runge_error(m.rational, res.shrunk)[1],
        "eta": complex(m.eta),
        "n": m.n,
        "critical_values": int(steps.size),
        "cv_max_entry_steps": int(steps.max(initial=0)),
        "cv_all_enter": bool(np.all((steps >= 0) & (steps <= m.n))),
        "julia_avoidance_pass": bool(np.all(steps >= 0)),
    }
    return out


def _write(res: PipelineResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)

    def put(name, fn, *args):
        path = out / name
        fn(path, *args)
        res.files[name] = path

    put("config.txt", lambda p: p.write_text(res.config.to_text()))
    put("regions.rgns", fileio.write_regions, res.regions)
    if not res.transform.identity:
        put("input.rgns", fileio.write_regions, res.input_regions)
    if res.map is not None:
        put("map.smap", fileio.write_map, res.map)
    if res.chart is not None:
        put("chart.bcht", fileio.write_chart, res.chart)
        put("basins.ppm", fileio.write_ppm, res.chart.labels)
        put("counts.pgm", fileio.write_pgm, res.chart.counts)
    if res.report is not None:
        put("report.txt", fileio.write_report, res.report)


def run_pipeline(config: RunConfig, out=None) -> PipelineResult:
    """Regions -> S_n -> basin chart -> Hausdorff report.

    The construction and the pass/fail verdict are in the working frame
    (infinity moved into J).  When a coordinate change was needed the
    input-frame distances are added to the report for information.
    Artifacts go to ``out`` (or ``config.out``), also when a stage fails."""
    config.validate()
    out = out if out is not None else config.out
    stage = _Stages()
    res = None
    try:
        with stage("generate"):
            inp = load_regions(config)
            inp.validate(config.eps)
        with stage("mobius_normalize"):
            p = normalization_point(inp, config.scenario)
            if p is None:
                work, tr = inp, MobiusTransform()
            else:
                work, tr = mobius_normalize(inp, p)
            res = PipelineResult(config, inp, work, tr)
        construct(work, config.eps, config, res, stage)
        with stage("classify_grid"):
            L = chart_radius_for(res.map, work)
            N = int(round(2 * L / work.pixel_size))
            res.chart = classify_grid(res.map, N, L, config.outer_budget)
        with stage("verify_approximation"):
            extra = construction_summary(res)
            bound, holds = exterior_certificate(res.map, L)
            extra.update({"map_chart_radius": L, "map_chart_resolution": N, "exterior_bound": bound, "exterior_certified": holds})
            rep = verify_approximation(work, res.chart, config.eps, extra)
            if not tr.identity:
                rep.values.update(_input_frame(res, inp))
            res.report = rep
    except StageError as err:
        if out is not None:
            if res is not None:
                _write(res, Path(out))
            Path(out).mkdir(parents=True, exist_ok=True)
            Path(out, "error.txt").write_text(f"stage = {err.stage}\nerror = {err.__cause__}\n")
        raise
    if out is not None:
        _write(res, Path(out))
    return res


def _input_frame(res: PipelineResult, inp: RegionSet) -> dict:
    """Distances measured on the input chart (information only)."""
    chart = classify_grid(res.map, inp.resolution, inp.chart_radius, res.config.outer_budget, transform=res.transform)
    rep = verify_approximation(inp, chart, res.config.eps)
    return {f"input_frame_{k}": v for k, v in rep.values.items() if k.startswith("hausdorff") or k == "nonconverged_fraction"}


def reclassify(m: ConstructedMap, chart: BasinChart, max_outer: int = DEFAULT_OUTER) -> BasinChart:
    """Classify a map again on the pixel grid of an existing chart."""
    return classify_grid(m, chart.resolution, chart.chart_radius, max_outer)


__all__ = [
    "ConfigError",
    "PipelineResult",
    "RunConfig",
    "StageError",
    "construct",
    "load_regions",
    "normalization_point",
    "reclassify",
    "run_pipeline",
    "set_threads",
]
