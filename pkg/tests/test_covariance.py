import math

import numpy as np
import pytest

from toruscrit.amplitude import BumpAmplitude, GaussianAmplitude, TableAmplitude
from toruscrit.covariance import (
    ContinuumKernel,
    LatticeSpectrum,
    kernel_deriv_continuum,
    kernel_deriv_lattice,
    kernel_gap_bound,
    kernel_poisson,
    multi_indices,
    vech_pairs,
)
from toruscrit.errors import UncertifiedTail
from toruscrit.sampler import sample_field

INV_SQRT_8PI = (8.0 * math.pi) ** -0.5


# --- continuum kernel -------------------------------------------------------


def test_continuum_value_at_zero(cont_m1):
    assert cont_m1.deriv([0.0], (0,)) == pytest.approx(INV_SQRT_8PI, rel=1e-12)


def test_closed_form_verified_against_quadrature():
    # the Gaussian closed form must be validated against the Fourier-integral
    # quadrature before the package relies on it
    amp = GaussianAmplitude(1.4)
    table = TableAmplitude(
        np.linspace(0, 6, 400),
        amp(np.linspace(0, 6, 400)),
        tail_coefficient=1.0,
        tail_exponent=10.0,
    )
    closed = ContinuumKernel(amp, 1)
    quad = ContinuumKernel(table, 1)
    for z in (0.0, 0.4, 1.1, 2.5):
        for alpha in ((0,), (1,), (2,)):
            assert closed.deriv([z], alpha) == pytest.approx(
                quad.deriv([z], alpha), rel=2e-5, abs=1e-9
            )


def test_closed_form_matches_quadrature_m2():
    amp = GaussianAmplitude(1.0)
    closed = ContinuumKernel(amp, 2)
    bump_like = TableAmplitude(
        np.linspace(0, 6.5, 500),
        amp(np.linspace(0, 6.5, 500)),
        tail_coefficient=1.0,
        tail_exponent=10.0,
    )
    quad = ContinuumKernel(bump_like, 2)
    z = np.array([0.7, -0.3])
    for alpha in ((0, 0), (1, 1), (2, 0)):
        assert closed.deriv(z, alpha) == pytest.approx(
            quad.deriv(z, alpha), rel=3e-5, abs=1e-9
        )


def test_odd_derivative_zero_at_origin(cont_m2):
    assert cont_m2.deriv(np.zeros(2), (1, 0)) == 0.0
    assert cont_m2.deriv(np.zeros(2), (2, 1)) == 0.0


def test_second_derivative_finite_difference(cont_m1):
    # oracle: central finite differences of the underived kernel at z = 2
    h = 1e-4
    fd = (
        cont_m1.deriv([2 + h], (0,))
        - 2 * cont_m1.deriv([2.0], (0,))
        + cont_m1.deriv([2 - h], (0,))
    ) / h**2
    assert cont_m1.deriv([2.0], (2,)) == pytest.approx(fd, abs=1e-6)


def test_parity_in_z(cont_m2, rng0):
    z = rng0.standard_normal(2)
    for alpha in multi_indices(2, 3):
        sign = (-1) ** sum(alpha)
        assert cont_m2.deriv(-z, alpha) == pytest.approx(
            sign * cont_m2.deriv(z, alpha), rel=1e-10, abs=1e-15
        )


def test_deriv_order_capped(cont_m1):
    with pytest.raises(ValueError):
        cont_m1.deriv([0.0], (5,))


# --- lattice spectrum -------------------------------------------------------


def test_lattice_weight_invariants(spec_m1_r8):
    assert spec_m1_r8.weight([0]) == pytest.approx(8.0**-1, rel=1e-14)
    assert np.all(spec_m1_r8.weights_half >= 0)


def test_lattice_symmetry(spec_m2_r8):
    full = {tuple(v) for v in spec_m2_r8.full_freqs().tolist()}
    for v in list(full):
        assert tuple(-np.array(v)) in full
        assert tuple(np.array(v)[::-1]) in full  # coordinate permutation


def test_lattice_value_positive_at_zero(spec_m2_r8):
    total = spec_m2_r8.deriv(np.zeros(2), (0, 0))
    assert total > 0
    assert total == pytest.approx(
        spec_m2_r8.weight0 + 2 * spec_m2_r8.weights_half.sum(), rel=1e-14
    )


def test_lattice_odd_derivative_zero(spec_m2_r8):
    assert spec_m2_r8.deriv(np.zeros(2), (3, 0)) == 0.0


def test_lattice_periodicity(spec_m1_r8, rng0):
    z = rng0.uniform(0, 8, size=1)
    assert spec_m1_r8.deriv(z + 8.0, (0,)) == pytest.approx(
        spec_m1_r8.deriv(z, (0,)), rel=1e-12
    )


def test_lattice_finite_difference_consistency(spec_m2_r8):
    # order-2 stencil with step 1e-4 * R against its own higher derivative
    h = 1e-4 * spec_m2_r8.R
    z = np.array([1.3, 0.4])
    for alpha in [(1, 0), (0, 1), (2, 0), (1, 1)]:
        direct = spec_m2_r8.deriv(z, alpha)
        ax = 0 if alpha in ((1, 0), (2, 0)) else 1
        lower = list(alpha)
        lower[ax] -= 1
        e = np.zeros(2)
        e[ax] = h
        fd = (
            spec_m2_r8.deriv(z + e, tuple(lower)) - spec_m2_r8.deriv(z - e, tuple(lower))
        ) / (2 * h)
        assert direct == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_omitted_tail_bound_small(spec_m1_r8):
    bound = spec_m1_r8.omitted_tail_bound()
    assert 0 <= bound < 1e-20 * spec_m1_r8.deriv(np.zeros(1), (0,))


def test_free_function_wrappers(gauss_amp, spec_m1_r8):
    assert kernel_deriv_continuum(gauss_amp, 1, [0.5], (0,)) == pytest.approx(
        ContinuumKernel(gauss_amp, 1).deriv([0.5], (0,)), rel=1e-15
    )
    assert kernel_deriv_lattice(spec_m1_r8, [0.5], (0,)) == spec_m1_r8.deriv([0.5], (0,))


# --- Poisson summation ------------------------------------------------------


@pytest.mark.parametrize("m,R", [(1, 4.0), (1, 8.0), (2, 4.0), (2, 8.0)])
def test_poisson_identity(gauss_amp, m, R):
    spec = LatticeSpectrum(gauss_amp, m, R)
    gen = np.random.default_rng(m * 100 + int(R))
    for _ in range(20):
        z = gen.uniform(0, R, size=m)
        trig = spec.deriv(z, (0,) * m)
        images = kernel_poisson(gauss_amp, m, R, z)
        assert abs(trig - images) < 1e-9


def test_poisson_far_from_images(gauss_amp):
    # R = 40: lattice images are negligible, the sum equals the plain kernel
    val = kernel_poisson(gauss_amp, 1, 40.0, [0.0])
    assert val == pytest.approx(INV_SQRT_8PI, abs=1e-12)


def test_poisson_periodicity(gauss_amp):
    a = kernel_poisson(gauss_amp, 1, 8.0, [1.3])
    b = kernel_poisson(gauss_amp, 1, 8.0, [1.3 + 8.0])
    assert a == pytest.approx(b, rel=1e-12)


# --- derivative-sum control quantity ----------------------------------------


def test_derivative_abs_sum(spec_m1_r16, rng0):
    # parity and decay along the axis
    z = rng0.uniform(1, 4, size=1)
    assert spec_m1_r16.derivative_abs_sum(z) == pytest.approx(
        spec_m1_r16.derivative_abs_sum(-z), rel=1e-12
    )
    assert spec_m1_r16.derivative_abs_sum([6.0]) < spec_m1_r16.derivative_abs_sum([1.0])
    # odd contributions vanish at 0: the sum equals the even-index sum
    even_sum = sum(
        abs(spec_m1_r16.deriv(np.zeros(1), a))
        for a in multi_indices(1, 4)
        if sum(a) % 2 == 0
    )
    assert spec_m1_r16.derivative_abs_sum(np.zeros(1)) == pytest.approx(
        even_sum, rel=1e-14
    )


# --- kernel gap bound -------------------------------------------------------


def test_gap_bound_scaling(gauss_amp):
    b10 = kernel_gap_bound(gauss_amp, 1, 10.0, 0.9, 0, 2)
    b20 = kernel_gap_bound(gauss_amp, 1, 20.0, 0.9, 0, 2)
    assert b20 <= b10 / 4.0


def test_gap_bound_dominates_observed(gauss_amp):
    R = 10.0
    bound = kernel_gap_bound(gauss_amp, 1, R, 0.9, 0, 2)
    spec = LatticeSpectrum(gauss_amp, 1, R)
    cont = ContinuumKernel(gauss_amp, 1)
    zs = np.linspace(-R * 0.45, R * 0.45, 100)
    observed = max(abs(spec.deriv([z], (0,)) - cont.deriv([z], (0,))) for z in zs)
    assert observed <= bound


def test_gap_bound_divergent_p(gauss_amp):
    with pytest.raises(ValueError, match="divergent tail sum"):
        kernel_gap_bound(gauss_amp, 2, 8.0, 0.5, 0, 1.5)


def test_gap_bound_bump_far_support():
    # with the translates far beyond the kernel's effective support the
    # integration-by-parts bound collapses
    amp = BumpAmplitude(3.0)
    bound = kernel_gap_bound(amp, 1, 400.0, 0.9, 0, 8)
    assert bound < 1e-12
    spec = LatticeSpectrum(amp, 1, 400.0)
    cont = ContinuumKernel(amp, 1)
    for z in (0.0, 40.0, 111.0):
        assert abs(spec.deriv([z], (0,)) - cont.deriv([z], (0,))) <= bound + 1e-12


def test_gap_bound_uncertified_kind():
    x = np.linspace(0, 4, 64)
    amp = TableAmplitude(x, np.exp(-(x**2)), tail_coefficient=1.0, tail_exponent=8.0)
    with pytest.raises(UncertifiedTail):
        kernel_gap_bound(amp, 1, 10.0, 0.9, 0, 2)


def test_gap_decreasing_in_R(gauss_amp):
    # sup over a fixed grid of |lattice - continuum| decreases along R for
    # every derivative order up to 4
    cont = ContinuumKernel(gauss_amp, 1)
    grid = np.linspace(-0.45, 0.45, 21)  # fixed box, fractions of the period
    prev = None
    for R in (8.0, 16.0, 32.0, 64.0):
        spec = LatticeSpectrum(gauss_amp, 1, R)
        worst = max(
            abs(spec.deriv([z], a) - cont.deriv([z], a))
            for z in grid * 1.0
            for a in multi_indices(1, 4)
        )
        if prev is not None:
            assert worst < prev
        prev = worst


# --- divided-difference stability -------------------------------------------


@pytest.mark.parametrize("source_kind", ["lattice", "continuum"])
def test_grad_second_difference_matches_naive(gauss_amp, source_kind):
    src = (
        LatticeSpectrum(gauss_amp, 2, 16.0)
        if source_kind == "lattice"
        else ContinuumKernel(gauss_amp, 2)
    )
    z = np.array([0.7, -0.2])
    naive = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            alpha = [0, 0]
            alpha[i] += 1
            alpha[j] += 1
            naive[i, j] = src.deriv(z, tuple(alpha)) - src.deriv(np.zeros(2), tuple(alpha))
    stable = src.grad_second_difference(z)
    assert np.allclose(stable, naive, rtol=1e-9, atol=1e-13)


def test_grad_second_difference_tiny_r(cont_m1):
    # at r = 1e-6 the naive difference loses all digits; the stable form must
    # reproduce the quadratic Taylor coefficient K''''(0) r^2 / 2 of K''
    r = 1e-6
    stable = cont_m1.grad_second_difference(np.array([r]))[0, 0]
    k4 = cont_m1.deriv(np.zeros(1), (4,))
    assert stable == pytest.approx(0.5 * k4 * r * r, rel=1e-6)


# --- sign conventions against Monte Carlo field samples ----------------------


def test_covariance_sign_table_against_samples(gauss_amp):
    """The (gradient, Hessian) block sign conventions are load-bearing for
    every density computation; estimate each cross moment from field samples
    and compare with the kernel-derivative formulas."""
    m, R = 2, 8.0
    spec = LatticeSpectrum(gauss_amp, m, R)
    x = np.array([0.21, 0.55])
    y = np.array([0.33, 0.41])
    z = R * (y - x)  # separation of the rescaled field
    n = 6000
    vals = {"fx_fy": [], "gx_fy": [], "gx_gy": [], "hx_gy": [], "gx_hy": [], "hx_hy": [], "fx_hy": []}
    for s in range(n):
        f = sample_field(spec, s)
        v, g, h = f.eval_jet(np.vstack([x, y]), order=2)
        # rescaled-field jets: each unit-torus derivative carries 1/R
        gx, gy = g[0] / R, g[1] / R
        hx, hy = h[0] / R**2, h[1] / R**2
        vals["fx_fy"].append(v[0] * v[1])
        vals["gx_fy"].append(gx[0] * v[1])
        vals["gx_gy"].append(gx[0] * gy[1])
        vals["hx_gy"].append(hx[0, 1] * gy[0])
        vals["gx_hy"].append(gx[0] * hy[0, 1])
        vals["hx_hy"].append(hx[0, 0] * hy[1, 1])
        vals["fx_hy"].append(v[0] * hy[0, 0])
    predictions = {
        "fx_fy": spec.deriv(z, (0, 0)),
        "gx_fy": -spec.deriv(z, (1, 0)),
        "gx_gy": -spec.deriv(z, (1, 1)),
        "hx_gy": spec.deriv(z, (2, 1)),  # E[H_01(x) d_0(y)]: +K at exponents (2,1)
        "gx_hy": -spec.deriv(z, (2, 1)),  # E[d_0(x) H_01(y)]: sign flips
        "hx_hy": spec.deriv(z, (2, 2)),
        "fx_hy": spec.deriv(z, (2, 0)),
    }
    for key, series in vals.items():
        series = np.asarray(series)
        se = series.std(ddof=1) / math.sqrt(n)
        assert abs(series.mean() - predictions[key]) <= 5 * se, (
            key,
            series.mean(),
            predictions[key],
            se,
        )


def test_pair_indexing_helpers():
    assert vech_pairs(2) == [(0, 0), (0, 1), (1, 1)]
    assert len(multi_indices(2, 4)) == 15
