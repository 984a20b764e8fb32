"""Command-line interface: simulate snapshots, run one estimator, or run the
full Monte Carlo benchmark / convergence study from a config file."""

import argparse
import json
import os
from dataclasses import replace

import numpy as np
from threadpoolctl import threadpool_limits

from .array_model import build_transfer_matrix, sample_covariance, simulate_snapshots
from .baselines import cbf_spectrum, exhaustive_ml, music_spectrum, pick_peaks, spectrum_to_csv
from .bench import (
    convergence_study,
    emit,
    load_config,
    parse_method,
    read_snapshot_file,
    run_monte_carlo,
    summarize,
    write_jsonl,
    write_snapshot_file,
)
from .sbl_core import run_sbl


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbldoa",
        description="Sparse Bayesian learning DOA estimation benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override base_seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads over trials")
        p.add_argument("--out", default=None, help="override the config output_dir")

    p_sim = sub.add_parser("simulate", help="generate one snapshot matrix and write it to a file")
    add_common(p_sim)

    p_est = sub.add_parser("estimate", help="run one estimator on a snapshot file")
    add_common(p_est)
    p_est.add_argument(
        "--method",
        required=True,
        help="cbf, music, exhaustive, sbl, sbl1, or msbl (SBL kinds accept a "
        "+noise suffix, e.g. msbl+em)",
    )
    p_est.add_argument("--input", required=True, help="snapshot file from 'simulate'")

    p_bench = sub.add_parser("benchmark", help="full Monte Carlo study per the config")
    add_common(p_bench)

    p_conv = sub.add_parser("convergence", help="per-iteration convergence study")
    add_common(p_conv)

    return parser


def _apply_overrides(config, args):
    if args.seed is not None:
        config = replace(config, base_seed=args.seed)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    return config


def _grid_spec(grid) -> str:
    angles = grid.angles_deg
    step = angles[1] - angles[0]
    return f"{angles[0]:g}:{step:g}:{angles[-1]:g}"


def _cmd_simulate(config) -> int:
    snr_db = config.snr_grid_db[0]
    n_snapshots = config.snapshot_grid[0]
    seed = np.random.SeedSequence(entropy=config.base_seed, spawn_key=(0, 0, 0))
    sim = simulate_snapshots(
        config.scenario, config.geometry, config.grid, snr_db, n_snapshots, seed
    )
    os.makedirs(config.output_dir, exist_ok=True)
    path = os.path.join(config.output_dir, "snapshot.txt")
    write_snapshot_file(
        path,
        sim.y,
        config.geometry,
        _grid_spec(config.grid),
        meta={"snr_db": snr_db, "sigma2_true": sim.sigma2_true, "seed": config.base_seed},
    )
    print(path)
    return 0


def _cmd_estimate(config, args) -> int:
    spec = parse_method(args.method)
    y, geometry, grid, _ = read_snapshot_file(args.input)
    a = build_transfer_matrix(geometry, grid)
    s_y = sample_covariance(y)
    k = config.k
    spectrum = None
    if spec.kind == "cbf":
        spectrum = cbf_spectrum(s_y, a, grid.angles_deg)
        est = pick_peaks(spectrum, k)
        payload = {"method": spec.label, "doas_deg": list(est.angles_deg), "source_powers": list(est.source_powers)}
    elif spec.kind == "music":
        spectrum = music_spectrum(s_y, a, grid.angles_deg, k)
        est = pick_peaks(spectrum, k)
        payload = {"method": spec.label, "doas_deg": list(est.angles_deg), "source_powers": list(est.source_powers)}
    elif spec.kind == "exhaustive":
        est = exhaustive_ml(s_y, a, grid.angles_deg, k, max_subsets=config.exhaustive_budget)
        payload = {"method": spec.label, "doas_deg": list(est.angles_deg), "source_powers": list(est.source_powers)}
    else:
        result = run_sbl(config.sbl_config(spec), a, y, angles_deg=grid.angles_deg)
        payload = {"method": spec.label, "doas_deg": sorted(float(v) for v in result.active_angles_deg)}
        payload.update(result.to_json_dict())

    if args.out is None:
        print(json.dumps(payload))
    else:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"estimate_{spec.label.replace('+', '_')}.json")
        with open(path, "w") as handle:
            json.dump(payload, handle)
            handle.write("\n")
        if spectrum is not None:
            spectrum_to_csv(spectrum, os.path.join(args.out, f"spectrum_{spec.kind}.csv"))
        print(path)
    return 0


def _cmd_benchmark(config, args) -> int:
    records = run_monte_carlo(config, threads=args.threads)
    emit(
        records,
        summarize(records),
        config.output_dir,
        config.grid,
        config_text=config.source_text,
        n_sources=config.scenario.k,
    )
    print(os.path.join(config.output_dir, "trials.csv"))
    return 0


def _cmd_convergence(config, args) -> int:
    rows = convergence_study(config, threads=args.threads)
    os.makedirs(config.output_dir, exist_ok=True)
    path = os.path.join(config.output_dir, "convergence.jsonl")
    write_jsonl(path, rows)
    print(path)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    config = _apply_overrides(load_config(args.config), args)
    # Workloads here are many small factorizations; see bench.run_monte_carlo.
    with threadpool_limits(limits=1):
        if args.command == "simulate":
            return _cmd_simulate(config)
        if args.command == "estimate":
            return _cmd_estimate(config, args)
        if args.command == "benchmark":
            return _cmd_benchmark(config, args)
        return _cmd_convergence(config, args)


if __name__ == "__main__":
    raise SystemExit(main())
