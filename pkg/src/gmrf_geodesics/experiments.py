"""Experiment batches: configuration files, runners, summaries, plot data.

A batch is a TOML file (version field, a ``[defaults]`` table, and one
``[[experiment]]`` per run) or a summary.json written by a previous
``run_batch`` call — re-feeding a summary reproduces the trace files
byte-for-byte, since it echoes every resolved setting including seeds.

For every experiment (times ``repeats``, with seeds base, base+1, ...)
the runner integrates the forward geodesic and its time reversal, writes
``<name>_forward.csv`` / ``<name>_reverse.csv`` traces, and collects one
summary row with both geodesic lengths, the straight parameter-space
distance, and the reverse endpoint's miss of the start point.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import BatchFormatError, GmrfGeodesicsError
from .integrator import (
    ChristoffelRefresh,
    DispersionMetrics,
    GeodesicTrace,
    IntegratorConfig,
    Mode,
    TangentVector,
    dispersion_metrics,
    integrate_geodesic,
    reverse_replay,
    save_trace,
)
from .lattice import ParamPoint

__all__ = [
    "ExperimentSpec",
    "SummaryRow",
    "TABLE1_EXPECTED",
    "load_batch",
    "bundled_batch_path",
    "run_batch",
    "run_experiment",
    "emit_plot_series",
    "verify_table1",
]

BATCH_VERSION = 1

#: Published reference results for the Gaussian-submanifold suite: per row
#: (A, alpha0, B, final alpha, geo length A->B, geo length B->A, straight
#: 2D distance).  verify_table1 checks runs of data/table1.toml against
#: these.
TABLE1_EXPECTED = (
    ((0.0, 1.0), (0.1, 0.05), (1.0765, 0.9576), (0.0957, -0.0554), 1.1246, 1.1250, 1.0769),
    ((2.0, 1.0), (0.2, 0.05), (3.4723, 0.2818), (0.0561, -0.0689), 1.7293, 1.7251, 1.6373),
    ((1.0, 2.0), (0.25, 0.25), (3.6214, 1.1789), (0.1471, -0.2396), 3.3177, 3.3178, 2.7461),
    ((10.0, 5.0), (0.5, 0.5), (13.8957, 1.2913), (0.1286, -0.3741), 6.4719, 6.4656, 5.3787),
    ((10.0, 10.0), (0.5, 2.0), (17.6233, 11.3884), (0.5696, -2.0745), 17.0900, 17.0826, 7.7444),
    ((100.0, 100.0), (1.0, 1.0), (109.0051, 68.3735), (0.6830, -5.4847), 34.8442, 35.0553, 32.8869),
)


@dataclass(frozen=True)
class ExperimentSpec:
    """One named experiment: initial conditions plus integrator settings.

    ``repeats`` > 1 reruns the spec with seeds seed, seed+1, ... for
    stochastic studies; names must be unique within a batch.
    """

    name: str
    theta0: ParamPoint
    alpha0: TangentVector
    integrator: IntegratorConfig
    repeats: int = 1

    def __post_init__(self):
        if self.repeats < 1:
            raise BatchFormatError(f"repeats must be >= 1, got {self.repeats} in {self.name!r}")

    @property
    def mode(self) -> Mode:
        return self.integrator.mode


@dataclass
class SummaryRow:
    """Result record of one forward+reverse run."""

    name: str
    mode: str
    seed: int
    a: tuple[float, float, float]
    alpha0: tuple[float, float, float]
    b: tuple[float, float, float]
    alpha_final: tuple[float, float, float]
    geo_ab: float
    geo_ba: float
    euclid: float
    endpoint_gap: float
    terminated_early: bool
    reason: str


_SUMMARY_FIELDS = (
    "name", "mode", "seed",
    "mu_a", "sigma2_a", "beta_a",
    "alpha1_0", "alpha2_0", "alpha3_0",
    "mu_b", "sigma2_b", "beta_b",
    "alpha1_f", "alpha2_f", "alpha3_f",
    "geo_ab", "geo_ba", "euclid", "endpoint_gap",
    "terminated_early", "reason",
)


# --------------------------------------------------------------------------
# Batch files
# --------------------------------------------------------------------------

_INTEGRATOR_KEYS = {
    "t_start", "t_end", "n_steps", "lattice_height", "lattice_width",
    "mcmc_sweeps", "seed", "lambda_reg", "mode", "warm_start",
    "sigma2_floor", "christoffel_refresh",
}
_EXPERIMENT_KEYS = _INTEGRATOR_KEYS | {"name", "theta0", "alpha0", "repeats"}


def _vector3(raw, what: str, name: str) -> tuple[float, float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) not in (2, 3):
        raise BatchFormatError(f"{what} of {name!r} must be a list of 2 or 3 numbers, got {raw!r}")
    vals = [float(v) for v in raw]
    if len(vals) == 2:
        vals.append(0.0)
    return tuple(vals)


def _build_spec(entry: dict, defaults: dict) -> ExperimentSpec:
    name = entry.get("name")
    if not name or not isinstance(name, str):
        raise BatchFormatError(f"every experiment needs a string name, got {entry!r}")
    unknown = set(entry) - _EXPERIMENT_KEYS
    if unknown:
        raise BatchFormatError(f"unknown keys {sorted(unknown)} in experiment {name!r}")
    merged = dict(defaults)
    merged.update(entry)
    if "theta0" not in merged or "alpha0" not in merged:
        raise BatchFormatError(f"experiment {name!r} needs theta0 and alpha0")
    theta = _vector3(merged["theta0"], "theta0", name)
    alpha = _vector3(merged["alpha0"], "alpha0", name)
    integrator_kwargs = {k: merged[k] for k in _INTEGRATOR_KEYS if k in merged}
    try:
        config = IntegratorConfig(**integrator_kwargs)
        spec = ExperimentSpec(
            name=name,
            theta0=ParamPoint(*theta),
            alpha0=TangentVector(*alpha),
            integrator=config,
            repeats=int(merged.get("repeats", 1)),
        )
    except GmrfGeodesicsError as exc:
        raise BatchFormatError(f"experiment {name!r}: {exc}") from exc
    return spec


def _load_toml_batch(path: Path) -> list[ExperimentSpec]:
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise BatchFormatError(f"{path}: {exc}") from exc
    version = doc.get("version")
    if version != BATCH_VERSION:
        raise BatchFormatError(f"{path}: unsupported batch version {version!r} (expected {BATCH_VERSION})")
    defaults = doc.get("defaults", {})
    if not isinstance(defaults, dict):
        raise BatchFormatError(f"{path}: [defaults] must be a table")
    unknown = set(defaults) - _INTEGRATOR_KEYS
    if unknown:
        raise BatchFormatError(f"{path}: unknown default keys {sorted(unknown)}")
    entries = doc.get("experiment", [])
    return [_build_spec(entry, defaults) for entry in entries]


def _load_json_batch(path: Path) -> list[ExperimentSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BatchFormatError(f"{path}: {exc}") from exc
    if doc.get("version") != BATCH_VERSION:
        raise BatchFormatError(f"{path}: unsupported batch version {doc.get('version')!r}")
    specs = []
    for entry in doc.get("experiments", []):
        merged = dict(entry.get("integrator", {}))
        merged.update({k: entry[k] for k in ("name", "theta0", "alpha0", "repeats") if k in entry})
        specs.append(_build_spec(merged, {}))
    return specs


def load_batch(path) -> list[ExperimentSpec]:
    """Parse a batch file (.toml, or a summary .json echo) into specs.

    Raises BatchFormatError for malformed content, unsupported versions,
    or duplicate experiment names.
    """
    path = Path(path)
    if not path.exists():
        raise BatchFormatError(f"batch file not found: {path}")
    if path.suffix.lower() == ".json":
        specs = _load_json_batch(path)
    else:
        specs = _load_toml_batch(path)
    names = [s.name for s in specs]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise BatchFormatError(f"duplicate experiment names: {sorted(dupes)}")
    return specs


def bundled_batch_path(stem: str):
    """Context manager yielding a real filesystem path to a bundled batch
    file (``table1``, ``table2`` or ``dispersion_demo``)."""
    return resources.as_file(resources.files("gmrf_geodesics.data").joinpath(f"{stem}.toml"))


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------

def run_experiment(spec: ExperimentSpec) -> tuple[GeodesicTrace, GeodesicTrace, DispersionMetrics]:
    """Run one spec forward and time-reversed; returns both traces and
    their dispersion metrics."""
    forward = integrate_geodesic(spec.integrator, spec.theta0, spec.alpha0)
    reverse = reverse_replay(spec.integrator, forward)
    return forward, reverse, dispersion_metrics(forward, reverse)


def _expand_runs(specs: list[ExperimentSpec]) -> list[ExperimentSpec]:
    runs = []
    for spec in specs:
        for r in range(spec.repeats):
            name = spec.name if spec.repeats == 1 else f"{spec.name}_r{r}"
            config = replace(spec.integrator, seed=spec.integrator.seed + r)
            runs.append(replace(spec, name=name, integrator=config, repeats=1))
    return runs


def _execute_run(run: ExperimentSpec, out_dir: str) -> SummaryRow:
    out = Path(out_dir)
    try:
        forward, reverse, metrics = run_experiment(run)
        save_trace(forward, out / f"{run.name}_forward.csv")
        save_trace(reverse, out / f"{run.name}_reverse.csv")
        terminated = forward.terminated_early or reverse.terminated_early
        reason = forward.termination_reason or reverse.termination_reason
        b = forward.endpoint()
        alpha_f = forward.final_velocity()
        return SummaryRow(
            name=run.name,
            mode=run.mode.value,
            seed=run.integrator.seed,
            a=(run.theta0.mu, run.theta0.sigma2, run.theta0.beta),
            alpha0=(run.alpha0.a1, run.alpha0.a2, run.alpha0.a3),
            b=(b.mu, b.sigma2, b.beta),
            alpha_final=(alpha_f.a1, alpha_f.a2, alpha_f.a3),
            geo_ab=metrics.geo_ab,
            geo_ba=metrics.geo_ba,
            euclid=metrics.euclid_ab,
            endpoint_gap=metrics.endpoint_gap,
            terminated_early=terminated,
            reason=reason,
        )
    except GmrfGeodesicsError as exc:
        return SummaryRow(
            name=run.name, mode=run.mode.value, seed=run.integrator.seed,
            a=(run.theta0.mu, run.theta0.sigma2, run.theta0.beta),
            alpha0=(run.alpha0.a1, run.alpha0.a2, run.alpha0.a3),
            b=(float("nan"),) * 3, alpha_final=(float("nan"),) * 3,
            geo_ab=float("nan"), geo_ba=float("nan"),
            euclid=float("nan"), endpoint_gap=float("nan"),
            terminated_early=True, reason=str(exc),
        )


def _summary_csv_line(row: SummaryRow) -> str:
    vals = [
        row.name, row.mode, str(row.seed),
        *(f"{v:.12g}" for v in row.a), *(f"{v:.12g}" for v in row.alpha0),
        *(f"{v:.12g}" for v in row.b), *(f"{v:.12g}" for v in row.alpha_final),
        f"{row.geo_ab:.12g}", f"{row.geo_ba:.12g}",
        f"{row.euclid:.12g}", f"{row.endpoint_gap:.12g}",
        str(row.terminated_early).lower(), row.reason.replace(",", ";"),
    ]
    return ",".join(vals)


def _config_echo(config: IntegratorConfig) -> dict:
    echo = asdict(config)
    echo["mode"] = config.mode.value
    echo["christoffel_refresh"] = config.christoffel_refresh.value
    return echo


def write_summary(runs: list[ExperimentSpec], rows: list[SummaryRow], out_dir) -> None:
    out = Path(out_dir)
    lines = [",".join(_SUMMARY_FIELDS)]
    lines += [_summary_csv_line(row) for row in rows]
    (out / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    experiments = []
    for run, row in zip(runs, rows):
        experiments.append({
            "name": run.name,
            "theta0": list(run.theta0.as_array()),
            "alpha0": list(run.alpha0.as_array()),
            "repeats": 1,
            "integrator": _config_echo(run.integrator),
            "results": {
                "b": list(row.b),
                "alpha_final": list(row.alpha_final),
                "geo_ab": row.geo_ab,
                "geo_ba": row.geo_ba,
                "euclid": row.euclid,
                "endpoint_gap": row.endpoint_gap,
                "terminated_early": row.terminated_early,
                "reason": row.reason,
            },
        })
    payload = {"version": BATCH_VERSION, "experiments": experiments}
    (out / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_batch(batch_file, out_dir, jobs: int = 1, seed: int | None = None) -> int:
    """Execute every experiment in a batch (forward + reverse).

    Writes per-run trace CSVs, summary.csv and summary.json into
    ``out_dir``.  ``seed`` overrides the base seed of every experiment.
    ``jobs`` > 1 runs independent experiments in a process pool; outputs
    are identical regardless of parallelism.

    Returns 0 on full success, 1 if any run errored or terminated early
    (the batch still completes and the summary records the failures).
    Raises BatchFormatError/OSError for unusable inputs.
    """
    specs = load_batch(batch_file)
    if seed is not None:
        specs = [replace(s, integrator=replace(s.integrator, seed=int(seed))) for s in specs]
    runs = _expand_runs(specs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if jobs > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_execute_run, runs, [str(out)] * len(runs)))
    else:
        rows = [_execute_run(run, str(out)) for run in runs]

    write_summary(runs, rows, out)
    return 0 if not any(r.terminated_early for r in rows) else 1


# --------------------------------------------------------------------------
# Plot-ready series
# --------------------------------------------------------------------------

_PLOT_KINDS = ("trajectory3d", "entropy", "curvature")


def emit_plot_series(trace: GeodesicTrace, kind: str, out) -> None:
    """Write a tidy, plotter-agnostic CSV for one trace.

    ``trajectory3d`` emits (t, mu, sigma2, beta); ``entropy`` and
    ``curvature`` emit (t, series, value).  No rendering happens here.
    """
    if len(trace) == 0:
        raise BatchFormatError("cannot emit plot series from an empty trace")
    if kind not in _PLOT_KINDS:
        raise BatchFormatError(f"unknown plot kind {kind!r}; expected one of {_PLOT_KINDS}")
    lines = []
    if kind == "trajectory3d":
        lines.append("t,mu,sigma2,beta")
        for k in range(len(trace)):
            lines.append(f"{trace.t[k]:.12g},{trace.mu[k]:.12g},{trace.sigma2[k]:.12g},{trace.beta[k]:.12g}")
    else:
        values = trace.entropy if kind == "entropy" else trace.curvature
        lines.append("t,series,value")
        for k in range(len(trace)):
            lines.append(f"{trace.t[k]:.12g},{kind},{values[k]:.12g}")
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# Built-in verification suite
# --------------------------------------------------------------------------

def verify_table1(tolerance: float = 0.01, out=sys.stdout) -> bool:
    """Run the bundled Gaussian suite and compare with TABLE1_EXPECTED.

    Endpoint coordinates must match within ``tolerance`` relative (or
    0.02 absolute for magnitudes below 1) and both geodesic lengths
    within ``tolerance`` relative.  Prints one line per row; returns
    overall success.
    """
    with bundled_batch_path("table1") as path:
        specs = load_batch(path)
    ok_all = True
    for spec, expected in zip(specs, TABLE1_EXPECTED):
        a, alpha0, b_exp, _alpha_exp, geo_exp, geo_rev_exp, _eucl = expected
        forward, reverse, metrics = run_experiment(spec)
        b = forward.endpoint()
        checks = [
            _close(b.mu, b_exp[0], tolerance),
            _close(b.sigma2, b_exp[1], tolerance),
            _rel_close(metrics.geo_ab, geo_exp, tolerance),
            _rel_close(metrics.geo_ba, geo_rev_exp, tolerance),
        ]
        ok = all(checks)
        ok_all = ok_all and ok
        print(
            f"{'PASS' if ok else 'FAIL'} {spec.name}: A={a} B=({b.mu:.4f}, {b.sigma2:.4f})"
            f" expected {b_exp}; geo {metrics.geo_ab:.4f} vs {geo_exp}"
            f" (reverse {metrics.geo_ba:.4f} vs {geo_rev_exp})",
            file=out,
        )
    return ok_all


def _rel_close(value: float, expected: float, tol: float) -> bool:
    return abs(value - expected) <= tol * abs(expected)


def _close(value: float, expected: float, tol: float) -> bool:
    if abs(expected) < 1.0:
        return abs(value - expected) <= 0.02
    return _rel_close(value, expected, tol)
