"""Acceptance suite: the thirteen gate criteria, one test each.

Every test prints one line

    ACCEPTANCE <n>: PASS|FAIL - <measured numbers>

before asserting, so the final report carries the measured values either
way.  Tolerances are pinned here, from the criteria, not calibrated after
the fact.  Where a criterion leaves the test function open, the full-torus
indicator is used when statistical power matters (law-of-large-numbers
run) and the quartic bump with r0 = 1/4 for the variance studies, matching
the bump pinned by the variance-scaling criterion.
"""

import json
import math

import numpy as np
import pytest

from toruscrit import kacrice
from toruscrit.ampleness import ampleness_scan
from toruscrit.amplitude import GaussianAmplitude
from toruscrit.config import ExperimentConfig
from toruscrit.covariance import ContinuumKernel, LatticeSpectrum, kernel_gap_bound, kernel_poisson
from toruscrit.critical import (
    BumpTest,
    brute_force_count_1d,
    find_critical_points,
)
from toruscrit.experiments import lln_trajectory, run_mc_stats, scaling_fit
from toruscrit.gauss import holder_continuity_check, regression_covariance, vech_to_sym
from toruscrit.kacrice import (
    blow_up_density,
    mean_density,
    pair_covariance,
    pair_covariance_points,
    two_point_density,
    variance_coefficient,
)
from toruscrit.rng import derive_seed
from toruscrit.sampler import sample_field

AMP = GaussianAmplitude(1.0)
MASTER = 20260810
RICE_M1 = math.sqrt(3.0) / (2.0 * math.pi)
THREADS = 2


def _line(number, ok, detail):
    print(f"\nACCEPTANCE {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def _config(**over):
    cfg = ExperimentConfig.defaults()
    base = {"study__master_seed": MASTER, "run__threads": THREADS}
    base.update(over)
    cfg.override(**base)
    return cfg


# --- shared expensive studies -------------------------------------------------


@pytest.fixture(scope="module")
def m1_scaling_study():
    cfg = _config(
        model__m=1,
        study__R="8 16 32 64",
        study__trials=2000,
        test_function__kind="bump",
        test_function__center="0.5",
        test_function__r0=0.25,
        mc__n_mc=150_000,
    )
    return cfg, run_mc_stats(cfg)


@pytest.fixture(scope="module")
def m2_scaling_study():
    cfg = _config(
        model__m=2,
        study__R="4 8 16",
        study__trials=500,
        test_function__kind="bump",
        test_function__center="0.5",
        test_function__r0=0.25,
        mc__n_mc=150_000,
        mc__quad_nodes=48,
    )
    return cfg, run_mc_stats(cfg)


def test_criterion_01_mean_density():
    """m=1, R=20, 2000 trials, full-torus count against the one-point density."""
    cfg = _config(
        model__m=1,
        study__R="20",
        study__trials=2000,
        test_function__kind="full",
    )
    result = run_mc_stats(cfg, with_reference=False)
    row = result.rows[0]
    c1 = mean_density(AMP, 1, seed=derive_seed(MASTER, "c1"))
    combined = math.hypot(row.mean_stderr, c1.std_error)
    dev = abs(row.mean_weighted - c1.value)
    closed_rel = abs(c1.value - RICE_M1) / RICE_M1
    ok = dev <= 3 * combined and closed_rel <= 0.01
    _line(
        1,
        ok,
        f"mean/R={row.mean_weighted:.5f} vs density {c1.value:.5f} "
        f"({dev/combined:.2f} se); |density-closed form|/closed form="
        f"{closed_rel:.4%}",
    )
    assert dev <= 3 * combined
    assert closed_rel <= 0.01


def test_criterion_02_variance_scaling_m1(m1_scaling_study):
    """Slope of log Var vs log R in [0.85, 1.15]; intercept against the
    variance coefficient within 10% on the log scale."""
    cfg, result = m1_scaling_study
    fit = scaling_fit(result)
    f = BumpTest([0.5], 0.25)
    v1 = result.reference["variance_coefficient"]
    predicted = math.log(v1 * f.square_integral(1))
    slope_ok = 0.85 <= fit.slope <= 1.15
    icept_dev = abs(fit.intercept - predicted)
    icept_ok = icept_dev <= 0.10 * abs(predicted)
    ok = slope_ok and icept_ok
    _line(
        2,
        ok,
        f"slope={fit.slope:.3f}+-{fit.slope_stderr:.3f} (band [0.85,1.15]); "
        f"intercept={fit.intercept:.3f} vs predicted {predicted:.3f} "
        f"(|diff|={icept_dev:.3f}, allowed {0.10*abs(predicted):.3f})",
    )
    assert slope_ok, f"slope {fit.slope:.3f} outside [0.85, 1.15]"
    assert icept_ok, (
        f"intercept {fit.intercept:.3f} vs {predicted:.3f}: "
        f"deviation {icept_dev:.3f} exceeds 10% of |log prediction|"
    )


def test_criterion_03_variance_slope_m2(m2_scaling_study):
    """m=2 slope over R in {4, 8, 16} within [1.7, 2.3]."""
    cfg, result = m2_scaling_study
    fit = scaling_fit(result)
    ok = 1.7 <= fit.slope <= 2.3
    _line(
        3,
        ok,
        f"slope={fit.slope:.3f}+-{fit.slope_stderr:.3f} over R=(4,8,16), "
        f"dropped={fit.dropped_R}",
    )
    assert ok, f"slope {fit.slope:.3f} outside [1.7, 2.3]"


def test_criterion_04_lln_trend():
    """m=2 trajectories at N in {4,8,16,24}, 20 streams: the worst deviation
    from (mean density) x (integral f) shrinks from N=4 to N=24 and ends
    below 15% relative.  Uses the full-torus count (the highest-power
    admissible test function)."""
    cfg = _config(
        model__m=2,
        study__R="4 8 16 24",
        study__streams=20,
        test_function__kind="full",
    )
    result = lln_trajectory(cfg)
    dev = result.max_abs_deviation()
    rel_final = dev[-1] / result.reference
    decreasing = dev[-1] < dev[0]
    ok = decreasing and rel_final < 0.15
    _line(
        4,
        ok,
        "max|dev|/ref over N=(4,8,16,24): "
        + ", ".join(f"{d/result.reference:.3f}" for d in dev)
        + f"; final {rel_final:.1%} (need < 15%)",
    )
    assert decreasing, "worst deviation did not decrease from N=4 to N=24"
    assert rel_final < 0.15, (
        f"final relative deviation {rel_final:.1%} is not below 15%"
    )


def test_criterion_05_poisson_summation():
    """Lattice trig sum vs image sum at 20 random points, m in {1,2}, R in {4,8}."""
    worst = 0.0
    for m in (1, 2):
        for R in (4.0, 8.0):
            spec = LatticeSpectrum(AMP, m, R)
            gen = np.random.default_rng(derive_seed(MASTER, "poisson", m, int(R)))
            for _ in range(20):
                z = gen.uniform(0, R, size=m)
                diff = abs(spec.deriv(z, (0,) * m) - kernel_poisson(AMP, m, R, z))
                worst = max(worst, diff)
    ok = worst < 1e-9
    _line(5, ok, f"max |trig sum - image sum| = {worst:.3e} (need < 1e-9)")
    assert ok


def test_criterion_06_kernel_gap_bound():
    """Observed sup-gap on the working box vs the certified bound, R in {8,16,32}."""
    import mpmath as mp

    r0, m = 0.9, 1
    cont = ContinuumKernel(AMP, m)
    observed_seq, bound_seq = [], []
    for R in (8.0, 16.0, 32.0):
        bound = kernel_gap_bound(AMP, m, R, r0, 0, 2)
        grid = np.linspace(-R * r0 / 2, R * r0 / 2, 100)
        if R <= 16:
            spec = LatticeSpectrum(AMP, m, R)
            observed = max(
                abs(spec.deriv([z], (0,)) - cont.deriv([z], (0,))) for z in grid
            )
        else:
            # the true gap sits below double-precision noise here; evaluate
            # the exact image-sum form of the difference in high precision
            with mp.workdps(40):
                observed = 0.0
                for z in grid:
                    total = mp.mpf(0)
                    for k in range(-4, 5):
                        if k == 0:
                            continue
                        x = mp.mpf(R) * k - mp.mpf(float(z))
                        total += mp.e ** (-(x * x) / 8) / mp.sqrt(8 * mp.pi)
                    observed = max(observed, abs(float(total)))
        observed_seq.append(observed)
        bound_seq.append(bound)
    dominated = all(o <= b for o, b in zip(observed_seq, bound_seq))
    both_decreasing = all(
        a > b for a, b in zip(observed_seq[:-1], observed_seq[1:])
    ) and all(a > b for a, b in zip(bound_seq[:-1], bound_seq[1:]))
    ok = dominated and both_decreasing
    _line(
        6,
        ok,
        "observed="
        + "/".join(f"{o:.2e}" for o in observed_seq)
        + " bound="
        + "/".join(f"{b:.2e}" for b in bound_seq),
    )
    assert dominated and both_decreasing


def test_criterion_07_oracle_equivalence():
    """Newton count equals sign-change count on every one of 100 seeds, R in {8,16}."""
    mismatches = 0
    for R in (8.0, 16.0):
        spec = LatticeSpectrum(AMP, 1, R)
        for i in range(100):
            f = sample_field(spec, derive_seed(MASTER, "oracle", int(R), i))
            if find_critical_points(f).count != brute_force_count_1d(f):
                mismatches += 1
    ok = mismatches == 0
    _line(7, ok, f"{mismatches} mismatches over 200 seeds")
    assert ok


def test_criterion_08_euler_characteristic():
    """Alternating Morse-index sum vanishes on every clean m=2 sample (200 seeds)."""
    spec = LatticeSpectrum(AMP, 2, 8.0)
    violations = 0
    clean = 0
    for i in range(200):
        measure = find_critical_points(
            sample_field(spec, derive_seed(MASTER, "euler", i))
        )
        if measure.is_morse_clean:
            clean += 1
            if measure.euler_characteristic() != 0:
                violations += 1
    ok = violations == 0
    _line(8, ok, f"{violations} violations over {clean} clean samples of 200")
    assert ok


def test_criterion_09_two_point_structure():
    """Factorization within 3 combined se at 5 separations; parity and
    translation invariance hold bitwise at the covariance-matrix level."""
    src = ContinuumKernel(AMP, 1)
    rho = mean_density(AMP, 1, seed=derive_seed(MASTER, "c9"))
    worst_z = 0.0
    for i, r in enumerate((0.5, 1.0, 2.0, 4.0, 7.0)):
        _, tilde, _ = two_point_density(src, [r], n_mc=100_000, seed=900 + i)
        combined = math.hypot(tilde.std_error, 2 * rho.value * rho.std_error)
        worst_z = max(worst_z, abs(tilde.value - rho.value**2) / combined)
    src2 = ContinuumKernel(AMP, 2)
    z = np.array([0.75, -0.5])
    parity_ok = (
        pair_covariance(src2, z).cov.tobytes()
        == pair_covariance(src2, -z).cov.tobytes()
    )
    x = np.array([5, 9]) / 64.0
    zz = np.array([84, 13]) / 64.0
    base = pair_covariance_points(src2, x, x + zz).cov.tobytes()
    translation_ok = all(
        pair_covariance_points(src2, x + t, x + zz + t).cov.tobytes() == base
        for t in (np.array([1.0, -2.0]), np.array([21, 42]) / 64.0, np.array([-3.5, 0.25]))
    )
    ok = worst_z <= 3.0 and parity_ok and translation_ok
    _line(
        9,
        ok,
        f"worst factorization deviation {worst_z:.2f} se (need <= 3); "
        f"parity bitwise={parity_ok}; translation bitwise={translation_ok}",
    )
    assert ok


def test_criterion_10_blow_up_boundedness():
    """Diagonal-rescaled pair density varies by < 2x over r in {1e-1,1e-2,1e-3}
    for m in {1,2}; the divided-difference route matches the direct one at r=0.5."""
    details = []
    ok = True
    for m in (1, 2):
        src = ContinuumKernel(AMP, m)
        vals = [
            blow_up_density(src, r, n_mc=60_000, seed=derive_seed(MASTER, "w", m, i)).value
            for i, r in enumerate((1e-1, 1e-2, 1e-3))
        ]
        spread = max(vals) / min(vals)
        ok &= spread < 2.0
        w = blow_up_density(src, 0.5, n_mc=150_000, seed=derive_seed(MASTER, "wg", m))
        gauge_rho = w.value * 0.5 ** (2 - m)
        gauge_se = w.std_error * 0.5 ** (2 - m)
        z = np.zeros(m)
        z[0] = 0.5
        direct, _, _ = two_point_density(
            src, z, n_mc=150_000, seed=derive_seed(MASTER, "wd", m)
        )
        gap_se = abs(gauge_rho - direct.value) / math.hypot(gauge_se, direct.std_error)
        ok &= gap_se <= 3.0
        details.append(f"m={m}: spread {spread:.3f}x, gauge-vs-direct {gap_se:.2f} se")
    _line(10, ok, "; ".join(details))
    assert ok


def test_criterion_11_regression_formula():
    """Conditional covariance against Monte Carlo conditioning, 4-dim, 1e6 draws."""
    gen = np.random.default_rng(derive_seed(MASTER, "reg"))
    a = gen.standard_normal((4, 4))
    joint = a @ a.T + 0.4 * np.eye(4)
    s11, s21, s22 = joint[:2, :2], joint[2:, :2], joint[2:, 2:]
    cond = regression_covariance(s22, s21, s11)
    ell = np.linalg.cholesky(joint)
    draws = gen.standard_normal((1_000_000, 2)) @ ell[2:, 2:].T
    emp = draws.T @ draws / len(draws)
    worst = 0.0
    for i in range(2):
        for j in range(2):
            se = math.sqrt((cond[i, i] * cond[j, j] + cond[i, j] ** 2) / len(draws))
            worst = max(worst, abs(emp[i, j] - cond[i, j]) / se)
    ok = worst <= 4.0
    _line(11, ok, f"worst conditional-covariance deviation {worst:.2f} se (need <= 4)")
    assert ok


def test_criterion_12_holder_continuity():
    """|I_A - I_A0| over an SPD family scales with exponent >= 0.5 (log-log fit)."""
    gen = np.random.default_rng(derive_seed(MASTER, "holder"))
    b = gen.standard_normal((3, 3))
    a0 = b @ b.T + 0.6 * np.eye(3)
    direction = gen.standard_normal((3, 3))
    direction = 0.5 * (direction + direction.T)
    f = lambda draws: np.abs(np.linalg.det(vech_to_sym(draws, 2)))
    ts = np.geomspace(1e-3, 0.3, 6)
    lhs_list, rhs_list = [], []
    for t in ts:
        lhs, rhs = holder_continuity_check(f, a0, a0 + t * direction, 400_000, seed=7)
        lhs_list.append(lhs)
        rhs_list.append(rhs)
    x = np.log(rhs_list)
    y = np.log(lhs_list)
    slope = np.polyfit(x, y, 1)[0]
    # slope is measured against ||A - A0||^{1/2}, so >= 0.5 in ||A - A0||
    # means >= 1.0 against rhs
    ok = slope >= 1.0
    _line(
        12,
        ok,
        f"log-log slope vs ||dA||^(1/2) = {slope:.2f} "
        f"(exponent in ||dA|| = {slope/2:.2f}, need >= 0.5)",
    )
    assert ok


def test_criterion_13_reproducibility(tmp_path):
    """Identical config + seed give byte-identical result files at 1, 4, 8 workers."""
    from click.testing import CliRunner

    from toruscrit.cli import main

    runner = CliRunner()
    contents = []
    for threads in (1, 4, 8):
        out = tmp_path / f"t{threads}"
        res = runner.invoke(
            main,
            [
                "stats", "--m", "1", "--R", "8", "--R", "12", "--trials", "60",
                "--seed", str(MASTER), "--threads", str(threads), "--out", str(out),
            ],
        )
        assert res.exit_code == 0, res.output
        contents.append(
            (
                (out / "stats.csv").read_bytes(),
                (out / "manifest.json").read_bytes(),
            )
        )
    ok = contents[0] == contents[1] == contents[2]
    _line(13, ok, "stats.csv and manifest.json identical across 1/4/8 workers")
    assert ok


def test_ampleness_gate_for_acceptance_bandwidths():
    """All bandwidths used above sit at or above the empirical pass threshold."""
    scan = ampleness_scan(AMP, 1, [8.0, 16.0, 20.0, 32.0, 64.0])
    scan2 = ampleness_scan(AMP, 2, [4.0, 8.0, 16.0, 24.0])
    ok = len(scan.passing_R) == 5 and len(scan2.passing_R) == 4
    print(f"\nACCEPTANCE gate: {'PASS' if ok else 'FAIL'} - all study bandwidths pass")
    assert ok
