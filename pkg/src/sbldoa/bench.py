"""Monte Carlo benchmark harness: trial generation, estimator dispatch, RMSE
aggregation, histogram/convergence/timing studies, and CSV/JSON emission.

Every trial draws its data from an independent random stream keyed by
(base_seed, snr index, snapshot-count index, trial index), so results are
reproducible in any execution order and with any number of worker threads.
All configured methods see the same data realization within a trial.
"""

import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .array_model import (
    AngularGrid,
    ArrayGeometry,
    SourceScenario,
    build_transfer_matrix,
    sample_covariance,
    simulate_snapshots,
)
from .baselines import cbf_spectrum, exhaustive_ml, music_spectrum, pick_peaks
from .sbl_core import SblConfig, run_sbl

__all__ = [
    "MethodSpec",
    "ExperimentConfig",
    "TrialRecord",
    "RmseSummary",
    "METHOD_KINDS",
    "parse_method",
    "parse_config_text",
    "load_config",
    "rmse",
    "doa_assignment_errors",
    "run_monte_carlo",
    "summarize",
    "histogram",
    "convergence_study",
    "timing_study",
    "emit",
    "read_trials_csv",
    "write_jsonl",
    "write_snapshot_file",
    "read_snapshot_file",
]

METHOD_KINDS = ("cbf", "music", "exhaustive", "sbl", "sbl1", "msbl")
SBL_KINDS = ("sbl", "sbl1", "msbl")


@dataclass(frozen=True)
class MethodSpec:
    """One estimator entry: kind plus an optional noise-rule override for the
    SBL family, written as e.g. 'msbl+em'."""

    kind: str
    noise_rule: str | None = None

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ValueError(f"unknown method {self.kind!r}; choose from {METHOD_KINDS}")
        if self.noise_rule is not None and self.kind not in SBL_KINDS:
            raise ValueError(f"noise rule override only applies to {SBL_KINDS}")

    @property
    def label(self) -> str:
        if self.noise_rule is None:
            return self.kind
        return f"{self.kind}+{self.noise_rule}"


def parse_method(token: str) -> MethodSpec:
    token = token.strip()
    if "+" in token:
        kind, noise = token.split("+", 1)
        return MethodSpec(kind=kind.strip(), noise_rule=noise.strip())
    return MethodSpec(kind=token)


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: ArrayGeometry
    grid: AngularGrid
    scenario: SourceScenario
    snr_grid_db: tuple
    snapshot_grid: tuple
    n_trials: int
    methods: tuple
    base_seed: int = 0
    output_dir: str = "out"
    record_timing: bool = False
    k_sources: int | None = None
    sigma2_init: float = 0.1
    gamma_init: float = 1.0
    epsilon_min: float = 1e-3
    j_max: int = 500
    gamma_floor: float = 0.0
    noise_rule: str = "projection"
    strict_sample_cov: bool = False
    exhaustive_budget: int = 2_000_000
    convergence_snapshot_iters: tuple = (1, 10, 200)
    source_text: str | None = None

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if len(self.methods) < 1:
            raise ValueError("methods must be non-empty")
        if len(self.snr_grid_db) < 1 or len(self.snapshot_grid) < 1:
            raise ValueError("snr_grid_db and snapshot_grid must be non-empty")

    @property
    def k(self) -> int:
        return self.k_sources if self.k_sources is not None else self.scenario.k

    def sbl_config(self, spec: MethodSpec) -> SblConfig:
        return SblConfig(
            update_rule=spec.kind,
            noise_rule=spec.noise_rule or self.noise_rule,
            k_sources=self.k,
            sigma2_init=self.sigma2_init,
            gamma_init=self.gamma_init,
            epsilon_min=self.epsilon_min,
            j_max=self.j_max,
            gamma_floor=self.gamma_floor,
            strict_sample_cov=self.strict_sample_cov,
        )


_CONFIG_KEYS = {
    "n_sensors",
    "spacing_wavelengths",
    "grid",
    "doas_deg",
    "magnitudes_db",
    "amplitude_model",
    "snr_grid_db",
    "snapshot_grid",
    "n_trials",
    "methods",
    "base_seed",
    "output_dir",
    "record_timing",
    "k_sources",
    "sigma2_init",
    "gamma_init",
    "epsilon_min",
    "j_max",
    "gamma_floor",
    "noise_rule",
    "strict_sample_cov",
    "exhaustive_budget",
    "convergence_snapshot_iters",
}


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _split_list(value: str) -> list[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the flat key = value experiment config format.

    Lines starting with '#' and blank lines are ignored; list values are
    comma separated; the grid is written as start:step:stop.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno} is not 'key = value': {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r} on line {lineno}")
        if key in raw:
            raise ValueError(f"duplicate config key {key!r} on line {lineno}")
        raw[key] = value.strip()

    for required in ("doas_deg", "magnitudes_db"):
        if required not in raw:
            raise ValueError(f"config is missing required key {required!r}")

    geometry = ArrayGeometry(
        n_sensors=int(raw.get("n_sensors", "20")),
        spacing_wavelengths=float(raw.get("spacing_wavelengths", "0.5")),
    )
    grid = AngularGrid.from_spec(raw.get("grid", "-90:0.5:90"))
    scenario = SourceScenario(
        doas_deg=tuple(float(v) for v in _split_list(raw["doas_deg"])),
        magnitudes_db=tuple(float(v) for v in _split_list(raw["magnitudes_db"])),
        amplitude_model=raw.get("amplitude_model", "random_phase_per_snapshot"),
    )
    methods = tuple(parse_method(tok) for tok in _split_list(raw.get("methods", "cbf,music,sbl,msbl")))
    return ExperimentConfig(
        geometry=geometry,
        grid=grid,
        scenario=scenario,
        snr_grid_db=tuple(float(v) for v in _split_list(raw.get("snr_grid_db", "0"))),
        snapshot_grid=tuple(int(v) for v in _split_list(raw.get("snapshot_grid", "50"))),
        n_trials=int(raw.get("n_trials", "100")),
        methods=methods,
        base_seed=int(raw.get("base_seed", "0")),
        output_dir=raw.get("output_dir", "out"),
        record_timing=_parse_bool(raw.get("record_timing", "false")),
        k_sources=int(raw["k_sources"]) if "k_sources" in raw else None,
        sigma2_init=float(raw.get("sigma2_init", "0.1")),
        gamma_init=float(raw.get("gamma_init", "1.0")),
        epsilon_min=float(raw.get("epsilon_min", "0.001")),
        j_max=int(raw.get("j_max", "500")),
        gamma_floor=float(raw.get("gamma_floor", "0.0")),
        noise_rule=raw.get("noise_rule", "projection"),
        strict_sample_cov=_parse_bool(raw.get("strict_sample_cov", "false")),
        exhaustive_budget=int(raw.get("exhaustive_budget", "2000000")),
        convergence_snapshot_iters=tuple(
            int(v) for v in _split_list(raw.get("convergence_snapshot_iters", "1,10,200"))
        ),
        source_text=text,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r") as handle:
        return parse_config_text(handle.read())


@dataclass
class TrialRecord:
    """One (trial, method) outcome.  Traces are attached only when the run
    was asked to keep them; they are emitted to convergence.jsonl, not CSV."""

    trial: int
    method: str
    snr_db: float
    n_snapshots: int
    doas_true_deg: tuple
    doas_est_deg: tuple
    errors_deg: tuple
    rmse_deg: float
    iterations: int
    converged: bool
    sigma2_hat: float
    sigma2_true: float
    wall_time_s: float
    epsilon_trace: np.ndarray | None = None
    sigma2_trace: np.ndarray | None = None
    evidence_trace: np.ndarray | None = None
    error: str | None = None


@dataclass(frozen=True)
class RmseSummary:
    method: str
    snr_db: float
    n_snapshots: int
    n_trials: int
    mean_rmse_deg: float
    mean_iterations: float
    mean_wall_time_s: float


def doa_assignment_errors(estimated, truth) -> tuple[np.ndarray, float]:
    """Best-assignment per-source errors and the resulting RMSE.

    Minimizes the RMSE over all pairings of estimates with true DOAs; the
    returned errors follow the order of ``truth``.
    """
    est = np.asarray(estimated, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != tru.shape or est.ndim != 1:
        raise ValueError("estimated and truth must be 1-D with equal length")
    k = est.size
    if k > 8:
        raise ValueError("assignment search supports at most 8 sources")
    best = None
    best_val = math.inf
    for perm in itertools.permutations(range(k)):
        errors = est[list(perm)] - tru
        val = float(np.sqrt(np.mean(errors**2)))
        if val < best_val:
            best_val = val
            best = errors
    return best, best_val


def rmse(estimated, truth) -> float:
    """Permutation-matched root mean squared DOA error in degrees."""
    return doa_assignment_errors(estimated, truth)[1]


def _run_method(spec: MethodSpec, y, s_y, a, grid, config: ExperimentConfig):
    """Run one estimator; returns (angles, est_extras dict)."""
    k = config.k
    if spec.kind == "cbf":
        est = pick_peaks(cbf_spectrum(s_y, a, grid.angles_deg), k)
        return est.angles_deg, {}
    if spec.kind == "music":
        est = pick_peaks(music_spectrum(s_y, a, grid.angles_deg, k), k)
        return est.angles_deg, {}
    if spec.kind == "exhaustive":
        est = exhaustive_ml(s_y, a, grid.angles_deg, k, max_subsets=config.exhaustive_budget)
        return est.angles_deg, {}
    result = run_sbl(config.sbl_config(spec), a, y, angles_deg=grid.angles_deg)
    extras = {
        "iterations": result.iterations,
        "converged": result.converged,
        "sigma2_hat": result.sigma2,
        "epsilon_trace": result.epsilon_trace,
        "sigma2_trace": result.sigma2_trace,
        "evidence_trace": result.evidence_trace,
    }
    return tuple(np.sort(result.active_angles_deg)), extras


def _trial_records(config, a, si, li, t, keep_traces) -> list[TrialRecord]:
    snr_db = config.snr_grid_db[si]
    n_snapshots = config.snapshot_grid[li]
    seed = np.random.SeedSequence(entropy=config.base_seed, spawn_key=(si, li, t))
    sim = simulate_snapshots(
        config.scenario, config.geometry, config.grid, snr_db, n_snapshots, seed
    )
    s_y = sample_covariance(sim.y)
    truth = np.asarray(config.scenario.doas_deg, dtype=np.float64)
    truth_sorted = tuple(np.sort(truth))
    records = []
    for spec in config.methods:
        t0 = time.perf_counter()
        try:
            angles, extras = _run_method(spec, sim.y, s_y, a, config.grid, config)
            failure = None
        except Exception as exc:  # recorded per trial, not fatal
            angles, extras, failure = (), {}, f"{type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - t0
        if failure is None:
            errors, rmse_val = doa_assignment_errors(angles, truth_sorted)
            errors = tuple(errors)
            est_sorted = tuple(angles)
        else:
            errors = (math.nan,) * truth.size
            est_sorted = (math.nan,) * truth.size
            rmse_val = math.nan
        records.append(
            TrialRecord(
                trial=t,
                method=spec.label,
                snr_db=snr_db,
                n_snapshots=n_snapshots,
                doas_true_deg=truth_sorted,
                doas_est_deg=est_sorted,
                errors_deg=errors,
                rmse_deg=rmse_val,
                iterations=int(extras.get("iterations", 0)),
                converged=bool(extras.get("converged", failure is None)),
                sigma2_hat=float(extras.get("sigma2_hat", math.nan)),
                sigma2_true=sim.sigma2_true,
                wall_time_s=elapsed if config.record_timing else 0.0,
                epsilon_trace=extras.get("epsilon_trace") if keep_traces else None,
                sigma2_trace=extras.get("sigma2_trace") if keep_traces else None,
                evidence_trace=extras.get("evidence_trace") if keep_traces else None,
                error=failure,
            )
        )
    return records


def run_monte_carlo(
    config: ExperimentConfig, threads: int = 1, keep_traces: bool = False
) -> list[TrialRecord]:
    """Run every configured method on every (snr, L, trial) realization.

    Records come back in deterministic (snr, L, trial, method) order no
    matter how many worker threads are used.
    """
    a = build_transfer_matrix(config.geometry, config.grid)
    tasks = [
        (si, li, t)
        for si in range(len(config.snr_grid_db))
        for li in range(len(config.snapshot_grid))
        for t in range(config.n_trials)
    ]

    def worker(task):
        si, li, t = task
        return task, _trial_records(config, a, si, li, t, keep_traces)

    # The per-trial matrices are small (N x N factorizations), so BLAS-level
    # threading only adds synchronization cost and couples results to the
    # thread count; parallelism lives at the trial level instead.
    with threadpool_limits(limits=1):
        if threads <= 1:
            results = dict(map(worker, tasks))
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = dict(pool.map(worker, tasks))
    records: list[TrialRecord] = []
    for task in tasks:
        records.extend(results[task])
    return records


def summarize(records: list[TrialRecord]) -> list[RmseSummary]:
    """Mean RMSE / iterations / wall time per (method, snr, L), in record order."""
    groups: dict[tuple, list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault((rec.method, rec.snr_db, rec.n_snapshots), []).append(rec)
    out = []
    for (method, snr_db, l), recs in groups.items():
        n = len(recs)
        out.append(
            RmseSummary(
                method=method,
                snr_db=snr_db,
                n_snapshots=l,
                n_trials=n,
                mean_rmse_deg=float(np.sum([r.rmse_deg for r in recs], dtype=np.float64) / n),
                mean_iterations=float(np.sum([r.iterations for r in recs], dtype=np.float64) / n),
                mean_wall_time_s=float(np.sum([r.wall_time_s for r in recs], dtype=np.float64) / n),
            )
        )
    return out


def histogram(records: list[TrialRecord], grid: AngularGrid) -> dict[str, np.ndarray]:
    """Counts of estimated DOAs per grid cell, per method label."""
    counts: dict[str, np.ndarray] = {}
    for rec in records:
        bins = counts.setdefault(rec.method, np.zeros(grid.m, dtype=np.int64))
        if rec.error is not None:
            continue
        for angle in rec.doas_est_deg:
            bins[grid.nearest_index(angle)] += 1
    return counts


def convergence_study(config: ExperimentConfig, threads: int = 1) -> list[dict]:
    """Per-trial convergence traces for the SBL-family methods.

    Uses the first entries of snr_grid_db and snapshot_grid.  The gamma
    spectrum snapshots at ``convergence_snapshot_iters`` are attached to the
    first trial of each method only.
    """
    sbl_methods = [m for m in config.methods if m.kind in SBL_KINDS]
    if not sbl_methods:
        raise ValueError("convergence_study needs at least one SBL-family method")
    a = build_transfer_matrix(config.geometry, config.grid)
    snr_db = config.snr_grid_db[0]
    n_snapshots = config.snapshot_grid[0]

    def worker(t):
        seed = np.random.SeedSequence(entropy=config.base_seed, spawn_key=(0, 0, t))
        sim = simulate_snapshots(
            config.scenario, config.geometry, config.grid, snr_db, n_snapshots, seed
        )
        rows = []
        for spec in sbl_methods:
            snaps = config.convergence_snapshot_iters if t == 0 else ()
            result = run_sbl(
                config.sbl_config(spec),
                a,
                sim.y,
                angles_deg=config.grid.angles_deg,
                gamma_snapshot_iters=snaps,
            )
            ratio = (
                result.sigma2_trace / sim.sigma2_true
                if sim.sigma2_true > 0
                else np.full_like(result.sigma2_trace, math.inf)
            )
            row = {
                "method": spec.label,
                "trial": t,
                "snr_db": snr_db,
                "n_snapshots": n_snapshots,
                "sigma2_true": sim.sigma2_true,
                "iterations": result.iterations,
                "converged": result.converged,
                "epsilon_trace": [float(e) for e in result.epsilon_trace],
                "sigma2_ratio_trace": [float(r) for r in ratio],
            }
            if result.gamma_snapshots:
                row["gamma_snapshots"] = {
                    str(j): [float(g) for g in gam]
                    for j, gam in sorted(result.gamma_snapshots.items())
                }
            rows.append(row)
        return t, rows

    trials = range(config.n_trials)
    with threadpool_limits(limits=1):
        if threads <= 1:
            results = dict(map(worker, trials))
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = dict(pool.map(worker, trials))
    out: list[dict] = []
    for t in trials:
        out.extend(results[t])
    return out


def timing_study(config: ExperimentConfig, threads: int = 1) -> list[dict]:
    """Mean estimator wall time and iteration count per (method, L).

    Timing covers the estimator call only; data generation and dictionary
    construction are excluded.
    """
    timed = replace(config, record_timing=True)
    records = run_monte_carlo(timed, threads=threads)
    out = []
    for summary in summarize(records):
        out.append(
            {
                "method": summary.method,
                "snr_db": summary.snr_db,
                "n_snapshots": summary.n_snapshots,
                "mean_wall_time_s": summary.mean_wall_time_s,
                "mean_iterations": summary.mean_iterations,
                "mean_rmse_deg": summary.mean_rmse_deg,
                "n_trials": summary.n_trials,
            }
        )
    return out


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _trials_header(k: int) -> list[str]:
    return (
        ["trial", "method", "snr_db", "L", "K"]
        + [f"doa_true_{i + 1}" for i in range(k)]
        + [f"doa_est_{i + 1}" for i in range(k)]
        + ["rmse_deg", "iterations", "converged", "sigma2_hat", "sigma2_true", "wall_time_s"]
    )


def emit(
    records: list[TrialRecord],
    summaries: list[RmseSummary],
    output_dir,
    grid: AngularGrid,
    config_text: str | None = None,
    n_sources: int | None = None,
) -> None:
    """Write trials.csv, rmse_summary.csv, histogram.csv, convergence.jsonl,
    and (when the config text is given) a byte-exact config_echo."""
    os.makedirs(output_dir, exist_ok=True)
    k = n_sources if n_sources is not None else (len(records[0].doas_true_deg) if records else 0)

    lines = [",".join(_trials_header(k))]
    for rec in records:
        row = (
            [rec.trial, rec.method, rec.snr_db, rec.n_snapshots, k]
            + [float(v) for v in rec.doas_true_deg]
            + [float(v) for v in rec.doas_est_deg]
            + [rec.rmse_deg, rec.iterations, rec.converged, rec.sigma2_hat, rec.sigma2_true, rec.wall_time_s]
        )
        lines.append(",".join(_fmt(v) for v in row))
    with open(os.path.join(output_dir, "trials.csv"), "w") as handle:
        handle.write("\n".join(lines) + "\n")

    lines = ["method,snr_db,L,n_trials,mean_rmse_deg,mean_iterations,mean_wall_time_s"]
    for s in summaries:
        row = [s.method, s.snr_db, s.n_snapshots, s.n_trials, s.mean_rmse_deg, s.mean_iterations, s.mean_wall_time_s]
        lines.append(",".join(_fmt(v) for v in row))
    with open(os.path.join(output_dir, "rmse_summary.csv"), "w") as handle:
        handle.write("\n".join(lines) + "\n")

    lines = ["method,angle_deg,count"]
    for method, counts in histogram(records, grid).items():
        for angle, count in zip(grid.angles_deg, counts):
            lines.append(f"{method},{float(angle)!r},{int(count)}")
    with open(os.path.join(output_dir, "histogram.csv"), "w") as handle:
        handle.write("\n".join(lines) + "\n")

    trace_rows = []
    for rec in records:
        if rec.epsilon_trace is None:
            continue
        ratio = (
            [float(v) for v in rec.sigma2_trace / rec.sigma2_true]
            if rec.sigma2_true > 0
            else []
        )
        trace_rows.append(
            {
                "method": rec.method,
                "trial": rec.trial,
                "snr_db": rec.snr_db,
                "n_snapshots": rec.n_snapshots,
                "epsilon_trace": [float(v) for v in rec.epsilon_trace],
                "sigma2_ratio_trace": ratio,
                "evidence_trace": [float(v) for v in rec.evidence_trace],
            }
        )
    write_jsonl(os.path.join(output_dir, "convergence.jsonl"), trace_rows)

    if config_text is not None:
        with open(os.path.join(output_dir, "config_echo"), "w") as handle:
            handle.write(config_text)


def write_jsonl(path, rows: list[dict]) -> None:
    with open(path, "w") as handle:
        for row in rows:
            handle.write(json.dumps(row) + "\n")


def read_trials_csv(path) -> list[TrialRecord]:
    """Parse a trials.csv written by ``emit`` back into records."""
    with open(path, "r") as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    header = lines[0].split(",")
    k = sum(1 for name in header if name.startswith("doa_true_"))
    records = []
    for line in lines[1:]:
        parts = line.split(",")
        row = dict(zip(header, parts))
        records.append(
            TrialRecord(
                trial=int(row["trial"]),
                method=row["method"],
                snr_db=float(row["snr_db"]),
                n_snapshots=int(row["L"]),
                doas_true_deg=tuple(float(row[f"doa_true_{i + 1}"]) for i in range(k)),
                doas_est_deg=tuple(float(row[f"doa_est_{i + 1}"]) for i in range(k)),
                errors_deg=(),
                rmse_deg=float(row["rmse_deg"]),
                iterations=int(row["iterations"]),
                converged=row["converged"] == "true",
                sigma2_hat=float(row["sigma2_hat"]),
                sigma2_true=float(row["sigma2_true"]),
                wall_time_s=float(row["wall_time_s"]),
            )
        )
    return records


def write_snapshot_file(path, y: np.ndarray, geometry: ArrayGeometry, grid_spec: str, meta: dict | None = None) -> None:
    """Write one snapshot matrix in the documented text format.

    Line 1 is the format tag, line 2 holds comma-separated key=value metadata
    (N, L, d, grid, plus any extras), then one line per sensor containing the
    L snapshots as re,im pairs.
    """
    n, l = y.shape
    fields = {"N": n, "L": l, "d": geometry.spacing_wavelengths, "grid": grid_spec}
    fields.update(meta or {})
    header = ",".join(f"{key}={_fmt(val)}" for key, val in fields.items())
    lines = ["sbldoa-snapshot v1", header]
    for row in y:
        lines.append(",".join(f"{float(v.real)!r},{float(v.imag)!r}" for v in row))
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def read_snapshot_file(path):
    """Read a snapshot file; returns (y, geometry, grid, meta)."""
    with open(path, "r") as handle:
        lines = [line.rstrip("\n") for line in handle]
    if not lines or lines[0] != "sbldoa-snapshot v1":
        raise ValueError(f"{path} is not a v1 snapshot file")
    meta: dict[str, str] = {}
    for item in lines[1].split(","):
        key, value = item.split("=", 1)
        meta[key] = value
    n = int(meta["N"])
    l = int(meta["L"])
    geometry = ArrayGeometry(n_sensors=n, spacing_wavelengths=float(meta["d"]))
    grid = AngularGrid.from_spec(meta["grid"])
    y = np.zeros((n, l), dtype=np.complex128)
    for i in range(n):
        values = [float(v) for v in lines[2 + i].split(",")]
        if len(values) != 2 * l:
            raise ValueError(f"snapshot row {i} has {len(values)} values, expected {2 * l}")
        y[i] = np.asarray(values[0::2]) + 1j * np.asarray(values[1::2])
    return y, geometry, grid, meta
