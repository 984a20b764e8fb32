"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The per-criterion lines bypass pytest capture so they always reach the
terminal.  The statistical criteria use 100 Monte Carlo trials at the full
problem scale (N=20, M=361, L=50), so the module takes several minutes.
"""

import numpy as np
import pytest

from sbldoa import (
    AngularGrid,
    ArrayGeometry,
    SourceScenario,
    build_transfer_matrix,
    evidence_gradient_gamma,
    gamma_update_msbl,
    gamma_update_sbl,
    gamma_update_sbl1,
    inverse_model_covariance,
    noise_update_projection,
    posterior_covariance,
    run_monte_carlo,
    sample_covariance,
    simulate_snapshots,
    timing_study,
)
from sbldoa.bench import ExperimentConfig, MethodSpec
from sbldoa.cli import main as cli_main

from conftest import random_instance, snapshot_log_evidence

GEOMETRY = ArrayGeometry(20, 0.5)
FINE_GRID = AngularGrid.from_spec("-90:0.5:90")
COARSE_GRID = AngularGrid.from_spec("-90:1:90")
SCENARIO = SourceScenario((-3.0, 2.0, 75.0), (12.0, 22.0, 20.0))
TRUTH = np.array([-3.0, 2.0, 75.0])
BASE_SEED = 0
N_TRIALS = 100
THREADS = 2


@pytest.fixture
def report(capfd):
    def _report(num, name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {num} ({name}): {detail}"
        with capfd.disabled():
            print(f"\n{line}", flush=True)
        assert ok, line

    return _report


def _within_half_degree(estimates):
    return all(np.min(np.abs(np.asarray(estimates) - d)) <= 0.5 for d in TRUTH)


def _base_config(**overrides):
    base = dict(
        geometry=GEOMETRY,
        grid=FINE_GRID,
        scenario=SCENARIO,
        snr_grid_db=(0.0,),
        snapshot_grid=(50,),
        n_trials=N_TRIALS,
        methods=(MethodSpec("sbl"),),
        base_seed=BASE_SEED,
        k_sources=3,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def snr_sweep_records():
    """SNR sweep on the fine grid shared by criteria 5, 6, 7, and 9."""
    config = _base_config(
        snr_grid_db=(0.0, 5.0, 10.0),
        methods=(
            MethodSpec("cbf"),
            MethodSpec("music"),
            MethodSpec("sbl"),
            MethodSpec("msbl"),
        ),
    )
    return run_monte_carlo(config, threads=THREADS)


@pytest.fixture(scope="module")
def msbl_em_records():
    """(M-SBL) with the EM noise estimate at SNR=0 dB, for criterion 9."""
    config = _base_config(methods=(MethodSpec("msbl", noise_rule="em"),))
    return run_monte_carlo(config, threads=THREADS)


@pytest.fixture(scope="module")
def reduced_grid_records():
    """SBL and exhaustive ML on the 1-degree grid, for criterion 6."""
    config = _base_config(
        grid=COARSE_GRID,
        snr_grid_db=(0.0, 5.0),
        methods=(MethodSpec("sbl"), MethodSpec("exhaustive")),
    )
    return run_monte_carlo(config, threads=THREADS)


def _select(records, method, snr_db):
    return [r for r in records if r.method == method and r.snr_db == snr_db]


def test_criterion_01_scalar_oracle(report):
    a = np.array([[1.0 + 0.0j]])
    y = np.array([[2.0 + 0.0j]])
    sigma2 = 1.0
    s_y = sample_covariance(y)
    rules = {
        "sbl": lambda g: gamma_update_sbl(g, sigma2, a, y, s_y),
        "sbl1": lambda g: gamma_update_sbl1(g, sigma2, a, y),
        "msbl": lambda g: gamma_update_msbl(g, sigma2, a, y),
    }
    finals = {}
    for name, step in rules.items():
        gamma = np.array([1.0])
        for _ in range(200):
            gamma = step(gamma)
            if abs(gamma[0] - 3.0) < 1e-6:
                break
        finals[name] = float(gamma[0])
    score = abs(evidence_gradient_gamma(np.array([3.0]), sigma2, a, y)[0])
    ok = all(abs(v - 3.0) < 1e-6 for v in finals.values()) and score < 1e-10
    report(
        1,
        "scalar oracle",
        ok,
        f"final gamma per rule {finals} (target 3 +/- 1e-6), score at optimum {score:.2e} (< 1e-10)",
    )


def test_criterion_02_matrix_identities(report):
    rng = np.random.default_rng(42)
    worst_wood = worst_forms = worst_grad = 0.0
    for _ in range(50):
        a, gamma, sigma2, y = random_instance(rng)
        n, m = a.shape
        l = y.shape[1]

        inv = inverse_model_covariance(gamma, sigma2, a)
        sigma_x = posterior_covariance(gamma, sigma2, a)
        woodbury = np.eye(n) / sigma2 - (a @ sigma_x @ a.conj().T) / sigma2**2
        worst_wood = max(worst_wood, np.linalg.norm(inv - woodbury) / np.linalg.norm(inv))

        info = np.linalg.inv(a.conj().T @ a / sigma2 + np.diag(1.0 / gamma))
        worst_forms = max(
            worst_forms, np.linalg.norm(sigma_x - info) / np.linalg.norm(info)
        )

        grad = evidence_gradient_gamma(gamma, sigma2, a, y)
        floor = 1e-6 * max(1.0, float(np.abs(grad).max()))
        for idx in range(m):
            h = 1e-5 * gamma[idx]
            up, down = gamma.copy(), gamma.copy()
            up[idx] += h
            down[idx] -= h
            fd = (
                snapshot_log_evidence(up, sigma2, a, y)
                - snapshot_log_evidence(down, sigma2, a, y)
            ) / (2 * h * l)
            rel = abs(grad[idx] - fd) / max(abs(grad[idx]), abs(fd), floor)
            worst_grad = max(worst_grad, rel)
    ok = worst_wood < 1e-9 and worst_forms < 1e-8 and worst_grad < 1e-5
    report(
        2,
        "matrix identities",
        ok,
        f"worst relative errors: inversion-lemma {worst_wood:.2e} (<1e-9), "
        f"posterior-covariance forms {worst_forms:.2e} (<1e-8), "
        f"score vs finite differences {worst_grad:.2e} (<1e-5)",
    )


def test_criterion_03_em_ascent(report):
    rng = np.random.default_rng(7)
    worst_drop = 0.0
    for _ in range(20):
        a, gamma, sigma2, y = random_instance(rng)
        prev = snapshot_log_evidence(gamma, sigma2, a, y)
        for _ in range(50):
            gamma = gamma_update_msbl(gamma, sigma2, a, y)
            cur = snapshot_log_evidence(gamma, sigma2, a, y)
            worst_drop = max(worst_drop, prev - cur)
            prev = cur
    ok = worst_drop <= 1e-9
    report(3, "EM ascent", ok, f"worst per-step evidence drop {worst_drop:.2e} (<= 1e-9)")


def test_criterion_04_noise_estimator(report):
    rng = np.random.default_rng(5)
    a_full = build_transfer_matrix(GEOMETRY, FINE_GRID)
    worst_exact = 0.0
    for k in (1, 2, 3):
        cols = a_full[:, rng.choice(FINE_GRID.m, size=k, replace=False)]
        sigma2 = float(rng.uniform(0.5, 3.0))
        est = noise_update_projection(sigma2 * np.eye(20), cols)
        worst_exact = max(worst_exact, abs(est - sigma2))
    true_cols = a_full[:, [FINE_GRID.index_of(d) for d in TRUTH]]
    ratios = []
    for seed in range(20):
        sim = simulate_snapshots(SCENARIO, GEOMETRY, FINE_GRID, 0.0, 500, seed)
        est = noise_update_projection(sample_covariance(sim.y), true_cols)
        ratios.append(est / sim.sigma2_true)
    mean_ratio = float(np.mean(ratios))
    ok = worst_exact < 1e-10 and 0.9 <= mean_ratio <= 1.1
    report(
        4,
        "noise estimator",
        ok,
        f"projection on sigma2*I exact to {worst_exact:.2e} (<1e-10); "
        f"true-support mean ratio over 20 seeds {mean_ratio:.4f} (in [0.9, 1.1])",
    )


def test_criterion_05_scenario_recovery(report, snr_sweep_records):
    # Known red: an exhaustive subset search over the full 0.5-degree grid
    # localizes all three sources within one cell in only ~75% of trials at
    # this noise level, so the 90% threshold is not reachable by any
    # estimator on this data (see README, "Tests").
    hits = {}
    for method in ("sbl", "msbl", "cbf"):
        records = _select(snr_sweep_records, method, 0.0)
        assert len(records) == N_TRIALS
        hits[method] = sum(_within_half_degree(r.doas_est_deg) for r in records)
    cbf_failures = N_TRIALS - hits["cbf"]
    ok = hits["sbl"] >= 90 and hits["msbl"] >= 90 and cbf_failures >= 50
    report(
        5,
        "scenario recovery",
        ok,
        f"trials with all 3 DOAs within 0.5 deg at SNR=0: sbl {hits['sbl']}/100 (>=90), "
        f"msbl {hits['msbl']}/100 (>=90), cbf failures {cbf_failures}/100 (>=50)",
    )


def test_criterion_06_rmse_ordering(report, snr_sweep_records, reduced_grid_records):
    def mean_rmse(records):
        return float(np.mean([r.rmse_deg for r in records]))

    parts = []
    ok = True
    for snr in (0.0, 5.0):
        sbl = mean_rmse(_select(snr_sweep_records, "sbl", snr))
        music = mean_rmse(_select(snr_sweep_records, "music", snr))
        ok &= sbl <= music
        parts.append(f"SNR {snr:g}: rmse sbl {sbl:.3f} <= music {music:.3f}")
        sbl_red = mean_rmse(_select(reduced_grid_records, "sbl", snr))
        exh = mean_rmse(_select(reduced_grid_records, "exhaustive", snr))
        ok &= sbl_red <= 2.0 * exh
        parts.append(f"1-deg grid: sbl {sbl_red:.3f} <= 2x exhaustive {exh:.3f}")
    music10 = _select(snr_sweep_records, "music", 10.0)
    music_hits = sum(_within_half_degree(r.doas_est_deg) for r in music10)
    ok &= music_hits >= 90
    parts.append(f"music at SNR 10: {music_hits}/100 within 0.5 deg (>=90)")
    report(6, "RMSE ordering", ok, "; ".join(parts))


def test_criterion_07_iteration_ordering(report, snr_sweep_records):
    sbl = float(np.mean([r.iterations for r in _select(snr_sweep_records, "sbl", 0.0)]))
    msbl = float(np.mean([r.iterations for r in _select(snr_sweep_records, "msbl", 0.0)]))
    ok = sbl <= 0.7 * msbl
    report(
        7,
        "iteration ordering",
        ok,
        f"mean iterations at SNR=0: sbl {sbl:.1f} <= 0.7 * msbl {msbl:.1f} = {0.7 * msbl:.1f}",
    )


def test_criterion_08_snapshot_scaling(report):
    config = _base_config(
        snr_grid_db=(5.0,),
        snapshot_grid=(10, 25, 50, 100, 200),
        methods=(MethodSpec("sbl"),),
    )
    rows = {row["n_snapshots"]: row for row in timing_study(config, threads=THREADS)}
    times = {l: rows[l]["mean_wall_time_s"] for l in (10, 25, 50, 100, 200)}
    ratio = max(times.values()) / min(times.values())
    rmse_10 = rows[10]["mean_rmse_deg"]
    rmse_200 = rows[200]["mean_rmse_deg"]
    ok = ratio < 2.0 and rmse_200 <= rmse_10
    report(
        8,
        "snapshot scaling",
        ok,
        f"sbl mean time ratio across L in 10..200: {ratio:.2f} (<2); "
        f"rmse L=200 {rmse_200:.3f} <= rmse L=10 {rmse_10:.3f}",
    )


def test_criterion_09_noise_traces(report, snr_sweep_records, msbl_em_records):
    sbl_ratios = [
        r.sigma2_hat / r.sigma2_true for r in _select(snr_sweep_records, "sbl", 0.0)
    ]
    em_ratios = [
        r.sigma2_hat / r.sigma2_true for r in _select(msbl_em_records, "msbl+em", 0.0)
    ]
    sbl_med = float(np.median(sbl_ratios))
    em_med = float(np.median(em_ratios))
    ok = 0.7 <= sbl_med <= 1.3 and em_med < 0.7
    report(
        9,
        "noise traces",
        ok,
        f"median sigma2/sigma2_true at SNR=0: sbl+projection {sbl_med:.3f} (in [0.7, 1.3]), "
        f"msbl+em {em_med:.3e} (<0.7)",
    )


def test_criterion_10_determinism(report, tmp_path):
    config_text = """\
n_sensors = 20
spacing_wavelengths = 0.5
grid = -90:0.5:90
doas_deg = -3, 2, 75
magnitudes_db = 12, 22, 20
snr_grid_db = 0, 5
snapshot_grid = 50
n_trials = 10
methods = cbf, music, sbl
base_seed = 2024
k_sources = 3
"""
    config_path = tmp_path / "experiment.cfg"
    config_path.write_text(config_text)
    outputs = {}
    for label, threads in (("a1", 1), ("b1", 1), ("a8", 8)):
        out = tmp_path / label
        cli_main([
            "benchmark", "--config", str(config_path),
            "--threads", str(threads), "--out", str(out),
        ])
        outputs[label] = (out / "trials.csv").read_bytes()
    repeat_ok = outputs["a1"] == outputs["b1"]
    threads_ok = outputs["a1"] == outputs["a8"]
    ok = repeat_ok and threads_ok
    report(
        10,
        "determinism",
        ok,
        f"trials.csv byte-identical: repeat run {repeat_ok}, 1 vs 8 threads {threads_ok}",
    )
