"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line that pytest prints in an
"acceptance criteria" section at the end of the run.
"""

import math

import numpy as np
import pytest

from spacs_tomo.empirics import bin_centers, sweep_quadratures, uniform_edges
from spacs_tomo.model import ModelParams, expected_quadrature_moments, generate_ensemble, quadrature, transform_trials
from spacs_tomo.patterns import pattern_functions, regular_wavefunctions
from spacs_tomo.runner import ExperimentConfig, analyze_dataset, derive_seed, run_experiment
from spacs_tomo.tomography import build_patterns, forward_map_oracle, q_weights, reconstruct, sample_mean_estimate
from spacs_tomo.wigner import coherent_amplitudes, evaluate_grid, wigner_basis

SQRT_HALF = 1 / math.sqrt(2)
TWO_OVER_PI = 2 / math.pi


@pytest.fixture(scope="module")
def heralded_vacuum_run(full_sweep):
    config = ExperimentConfig()
    ens = generate_ensemble(config.params)
    ds = sweep_quadratures(ens, full_sweep, config.edges(), keep_samples=True)
    return config, ens, ds


@pytest.fixture(scope="module")
def heralded_coherent_run(full_sweep):
    config = ExperimentConfig.from_flat({"alpha_re": "1"})
    ens = generate_ensemble(config.params)
    ds = sweep_quadratures(ens, full_sweep, config.edges(), keep_samples=False)
    return config, ens, ds


def test_criterion_1_closed_form_statistics(acceptance_line):
    n = 10**6
    alpha = 0.8 + 0.6j
    worst = 0.0
    for k, r in enumerate((0.0, 0.4, 1.0)):
        params = ModelParams(alpha=alpha, sigma=SQRT_HALF, r=r, gamma=0.0, seed=derive_seed(1, k))
        b_s, _ = transform_trials(params, n)
        for theta in (0.0, math.pi / 4, math.pi / 2):
            q = quadrature(b_s, theta)
            mean, var = expected_quadrature_moments(params, theta)
            assert mean == pytest.approx(math.sqrt(2) * math.cosh(r) * (alpha * np.exp(-1j * theta)).real)
            assert var == pytest.approx((2 * math.cosh(r) ** 2 - 1) * 0.5)
            z_mean = abs(q.mean() - mean) / math.sqrt(var / n)
            z_var = abs(q.var() - var) / (var * math.sqrt(2 / n))
            worst = max(worst, z_mean, z_var)
    ok = worst < 3
    acceptance_line(1, ok, f"largest deviation over 3x3 (theta, r) grid = {worst:.2f} SE (need < 3)")
    assert ok


def test_criterion_2_known_state_tomography(acceptance_line, vacuum_dataset, coherent_dataset):
    vac = reconstruct(vacuum_dataset, build_patterns(vacuum_dataset, 4)).matrix
    rho00 = vac[0, 0].real
    off = np.abs(vac - np.diag(np.diag(vac)))
    off_max = float(off.max())
    diag_rest = float(np.abs(np.diag(vac)[1:]).max())
    coh = reconstruct(coherent_dataset, build_patterns(coherent_dataset, 4)).matrix
    psi = coherent_amplitudes(1.0, 40)
    coh_err = float(np.abs(coh - np.outer(psi, psi.conj())[:4, :4]).max())
    ok = rho00 >= 0.98 and max(off_max, diag_rest) <= 0.02 and coh_err <= 0.03
    acceptance_line(
        2, ok,
        f"vacuum rho00 = {rho00:.4f}, other entries <= {max(off_max, diag_rest):.4f}; "
        f"coherent alpha=1 max error {coh_err:.4f} (need <= 0.03)",
    )
    assert ok


def test_criterion_3_biorthogonality(acceptance_line):
    q = bin_centers(uniform_edges())
    f = pattern_functions(4, q)
    psi = regular_wavefunctions(4, q)
    w = q_weights(q)
    worst, count = 0.0, 0
    for m in range(4):
        for n in range(4):
            for j in range(4):
                k = j - (m - n)
                if 0 <= k < 4:
                    val = np.sum(w * f[m, n] * psi[j] * psi[k])
                    worst = max(worst, abs(val - float(j == m and k == n)))
                    count += 1
    ok = worst < 1e-3
    acceptance_line(3, ok, f"max biorthogonality error over {count} index sets = {worst:.2e} (need < 1e-3)")
    assert ok


def test_criterion_4_wigner_basis(acceptance_line):
    e00 = abs(complex(wigner_basis(0, 0, 0j)) - TWO_OVER_PI)
    e11 = abs(complex(wigner_basis(1, 1, 0j)) + TWO_OVER_PI)
    x = np.linspace(-5, 5, 401)
    a = x[:, None] + 1j * x[None, :]
    norms = [wigner_basis(n, n, a).real.sum() * (x[1] - x[0]) ** 2 for n in range(4)]
    norm_err = max(abs(v - 1) for v in norms)
    one = np.zeros((4, 4))
    one[1, 1] = 1
    g = evaluate_grid(one)
    min_err = abs(g.min_value + TWO_OVER_PI)
    ok = e00 < 1e-10 and e11 < 1e-10 and norm_err < 1e-3 and min_err < 1e-10 and g.min_location == 0
    acceptance_line(
        4, ok,
        f"|W00(0) - 2/pi| = {e00:.1e}, |W11(0) + 2/pi| = {e11:.1e}, normalization error {norm_err:.1e}, "
        f"|1><1| grid min {g.min_value:.6f} at {g.min_location}",
    )
    assert ok


@pytest.mark.slow
def test_criterion_5_heralded_vacuum(acceptance_line, heralded_vacuum_run):
    config, ens, ds = heralded_vacuum_run
    _, grid, _ = analyze_dataset(ds, config)
    ok = abs(grid.min_value - (-0.11)) <= 0.04
    acceptance_line(
        5, ok,
        f"alpha=0 Wigner min {grid.min_value:.4f} at {grid.min_location:.2f} "
        f"(target -0.11 +- 0.04), efficiency {ens.efficiency:.3e}, {ens.total_trials} trials",
    )
    assert ok


@pytest.mark.slow
def test_criterion_6_heralded_coherent(acceptance_line, heralded_coherent_run):
    config, ens, ds = heralded_coherent_run
    _, grid, fid = analyze_dataset(ds, config)
    loc = grid.min_location
    w0 = float(grid.values[grid.re_axis.size // 2, grid.im_axis.size // 2])
    # band on the minimum kept at 0.05; fidelity band tightened to 0.03 after a 10-seed study
    ok_min = abs(grid.min_value - (-0.29)) <= 0.05
    ok_loc = abs(loc) <= 0.25
    ok_fid = abs(fid - 0.74) <= 0.03
    ok = ok_min and ok_loc and ok_fid
    acceptance_line(
        6, ok,
        f"alpha=1 Wigner min {grid.min_value:.4f} (target -0.29 +- 0.05) at {loc:.2f} (|argmin| <= 0.25), "
        f"W(0) = {w0:.4f}; fidelity {fid:.4f} (target 0.74 +- 0.03)",
    )
    assert ok


@pytest.mark.slow
def test_criterion_7_estimator_agreement(acceptance_line, heralded_vacuum_run):
    _, _, ds = heralded_vacuum_run
    hist = reconstruct(ds, build_patterns(ds, 4)).matrix
    direct = sample_mean_estimate(ds, 4).matrix
    fwd = forward_map_oracle(ds, 4).matrix
    d1 = float(np.abs(hist - direct).max())
    d2 = float(np.abs(hist - fwd).max())
    d3 = float(np.abs(direct - fwd).max())
    ok = max(d1, d2, d3) <= 0.02
    acceptance_line(
        7, ok,
        f"max entrywise gaps: histogram/sample-mean {d1:.1e}, histogram/forward-map {d2:.1e}, "
        f"sample-mean/forward-map {d3:.1e} (need <= 0.02)",
    )
    assert ok


def test_criterion_8_determinism(acceptance_line, tmp_path):
    flat = {"gamma": "1.5", "samples": str(2**14)}
    names = ("config.cfg", "dataset.csv", "dataset.json", "density_matrix.json", "wigner.csv", "wigner.json")
    config = ExperimentConfig.from_flat(dict(flat, out=str(tmp_path / "run")))
    reports, snapshots = [], []
    for _ in range(2):
        reports.append(run_experiment(config).to_dict())
        snapshots.append({n: (tmp_path / "run" / n).read_bytes() for n in names})
    same = [snapshots[0][n] == snapshots[1][n] for n in names]
    for rep in reports:
        rep.pop("timings"), rep.pop("out_dir")
    ok = all(same) and reports[0] == reports[1]
    acceptance_line(
        8, ok,
        f"{sum(same)}/{len(names)} artifact files byte-identical across two runs; "
        f"reports equal apart from timings: {reports[0] == reports[1]}",
    )
    assert ok
