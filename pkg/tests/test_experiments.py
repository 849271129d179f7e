import math

import numpy as np
import pytest

from toruscrit.config import ExperimentConfig
from toruscrit.critical import BumpTest
from toruscrit.errors import ToruscritError
from toruscrit.experiments import (
    StudyResult,
    StudyRow,
    bootstrap_variance_stderr,
    blowup_bound_study,
    gradient_field_sup_norm,
    jackknife_variance_stderr,
    lln_trajectory,
    run_mc_stats,
    scaling_fit,
)
from toruscrit.covariance import LatticeSpectrum
from toruscrit.sampler import sample_field


def _config(**over):
    cfg = ExperimentConfig.defaults()
    base = {
        "model__m": 1,
        "study__R": "8 12",
        "study__trials": 60,
        "study__master_seed": 321,
        "run__threads": 1,
        "mc__n_mc": 20000,
        "mc__quad_nodes": 24,
    }
    base.update(over)
    cfg.override(**base)
    return cfg


def test_zero_test_function_gives_zero():
    cfg = _config(test_function__kind="zero", study__trials=5)
    result = run_mc_stats(cfg, with_reference=False)
    for row in result.rows:
        assert row.mean_weighted == 0.0
        assert row.var_weighted == 0.0


def test_mean_matches_reference_density():
    cfg = _config(test_function__kind="full", study__trials=400, study__R="16")
    result = run_mc_stats(cfg)
    row = result.rows[0]
    ref = result.reference["mean_density"]
    assert abs(row.mean_weighted - ref) <= 4 * row.mean_stderr + 0.01 * ref


def test_stderr_halves_with_quadruple_trials():
    small = run_mc_stats(
        _config(study__trials=100, study__R="8"), with_reference=False
    ).rows[0]
    big = run_mc_stats(
        _config(study__trials=400, study__R="8"), with_reference=False
    ).rows[0]
    # 1/sqrt(n): quadrupling trials halves the stderr within 20 percent
    assert big.mean_stderr == pytest.approx(small.mean_stderr / 2, rel=0.25)


def test_reproducible_across_worker_counts():
    results = []
    for threads in (1, 4, 8):
        cfg = _config(run__threads=threads, study__trials=40)
        results.append(run_mc_stats(cfg, with_reference=False).to_csv())
    assert results[0] == results[1] == results[2]


def test_scaling_fit_exact_powerlaw():
    rows = [
        StudyRow(R, 100, 0.0, 0.0, 7.0 * R**1 / R, 0.01, 0.0, 0, 0)
        for R in (8.0, 16.0, 32.0, 64.0)
    ]
    result = StudyResult(rows, {"model.m": 1}, "h")
    fit = scaling_fit(result)
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(7.0), abs=1e-12)
    assert fit.dropped_R == []


def test_scaling_fit_drops_nonpositive():
    rows = [
        StudyRow(4.0, 100, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0),
        StudyRow(8.0, 100, 0.0, 0.0, 7.0, 0.01, 0.0, 0, 0),
        StudyRow(16.0, 100, 0.0, 0.0, 14.0, 0.01, 0.0, 0, 0),
        StudyRow(32.0, 100, 0.0, 0.0, 28.0, 0.01, 0.0, 0, 0),
    ]
    result = StudyResult(rows, {"model.m": 1}, "h")
    fit = scaling_fit(result)
    assert fit.dropped_R == [4.0]
    assert fit.n_points == 3


def test_scaling_fit_needs_three_points():
    rows = [StudyRow(8.0, 10, 0, 0, 1.0, 0.1, 0, 0, 0)]
    with pytest.raises(ToruscritError):
        scaling_fit(StudyResult(rows, {"model.m": 1}, "h"))


def test_jackknife_against_bootstrap():
    gen = np.random.default_rng(8)
    values = gen.standard_normal(300) ** 2  # skewed, nontrivial variance of variance
    jk = jackknife_variance_stderr(values)
    bs = bootstrap_variance_stderr(values, n_boot=2000, seed=1)
    assert jk == pytest.approx(bs, rel=0.5)


def test_lln_trajectory_shapes_and_reference():
    cfg = _config(
        model__m=1,
        study__R="6 8",
        study__streams=4,
        test_function__kind="bump",
        test_function__center="0.5",
        test_function__r0=0.25,
    )
    result = lln_trajectory(cfg)
    assert result.trajectories.shape == (4, 2)
    # the reference line is (mean density) * (integral of f)
    from toruscrit import kacrice
    from toruscrit.rng import derive_seed

    f = BumpTest([0.5], 0.25)
    c = kacrice.mean_density(
        cfg.amplitude(), 1, seed=derive_seed(cfg["study.master_seed"], "ref-mean")
    )
    assert result.reference == pytest.approx(c.value * f.integral(1), rel=1e-12)
    lines = result.to_csv().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert lines[2] == "stream,N6,N8"
    lo, hi = result.percentile_band()
    assert np.all(lo <= hi)


def test_lln_coupled_streams_nest():
    # same stream at growing N shares the coefficients of shared modes
    cfg = _config(model__m=1, study__R="6 12", study__streams=2)
    from toruscrit.rng import derive_seed

    amp = cfg.amplitude()
    s6 = LatticeSpectrum(amp, 1, 6.0)
    s12 = LatticeSpectrum(amp, 1, 12.0)
    seed = derive_seed(cfg["study.master_seed"], "lln-stream", 0)
    f6 = sample_field(s6, seed)
    f12 = sample_field(s12, seed)
    idx = {tuple(v): i for i, v in enumerate(s12.half_freqs.tolist())}
    for i, v in enumerate(s6.half_freqs.tolist()):
        assert f6.coef_a[i] == f12.coef_a[idx[tuple(v)]]


def test_gradient_field_sup_norm_positive(spec_m1_r8):
    val = gradient_field_sup_norm(sample_field(spec_m1_r8, 3))
    assert val > 0


def test_blowup_study_tables(gauss_amp):
    spec = LatticeSpectrum(gauss_amp, 2, 8.0)
    study = blowup_bound_study(spec, [0.1, 0.05, 0.02], trials=6, n_mc=20_000, seed=5)
    ws = [w for w, _ in study.w_values]
    assert max(ws) < 2 * min(ws)
    m1 = study.c_sup_moments[1][0]
    m2 = study.c_sup_moments[2][0]
    m4 = study.c_sup_moments[4][0]
    assert 0 < m1 and m1**2 <= m2 <= math.sqrt(m4)  # moment monotonicity
    assert study.observed_ratio > 0
    assert "r,w,w_stderr" in study.to_csv()


def test_blowup_moment_stability(gauss_amp):
    spec = LatticeSpectrum(gauss_amp, 1, 8.0)
    a = blowup_bound_study(spec, [0.1], trials=24, n_mc=5000, seed=6)
    b = blowup_bound_study(spec, [0.1], trials=48, n_mc=5000, seed=7)
    ma, sa = a.c_sup_moments[2]
    mb, sb = b.c_sup_moments[2]
    assert abs(ma - mb) <= 4 * math.hypot(sa, sb)
