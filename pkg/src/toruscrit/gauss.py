"""Centered Gaussian vectors: conditioning, sampling, determinant functionals.

Covariances arrive from kernel derivatives and may carry eigenvalue dust a
few ulps below zero; ``psd_clip`` repairs dust and rejects anything more
negative.  Conditioning uses the Schur complement of the regression
formula; Monte Carlo expectations of |det| functionals are evaluated from
eigen-factor draws with reported standard errors.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConditioning

PSD_CLIP_REL = 1e-10
MIN_EIG_REL = 1e-12


@dataclass
class DensityReport:
    """A scalar estimate with its Monte Carlo uncertainty."""

    value: float
    std_error: float
    mc_samples: int
    method: str = ""

    def __add__(self, other):
        return DensityReport(
            self.value + other.value,
            float(np.hypot(self.std_error, other.std_error)),
            max(self.mc_samples, other.mc_samples),
            f"{self.method}+{other.method}",
        )


def matrix_scale(mat):
    return float(np.max(np.abs(mat))) if mat.size else 0.0


def psd_clip(mat, rel_tol=PSD_CLIP_REL):
    """Clip negative eigenvalue dust to zero; reject genuine negativity."""
    mat = np.asarray(mat, dtype=float)
    sym = 0.5 * (mat + mat.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    scale = max(float(eigvals[-1]), 0.0)
    floor = -rel_tol * max(scale, 1e-300)
    if eigvals[0] < floor:
        raise DegenerateConditioning(
            f"covariance has eigenvalue {eigvals[0]:.3e} below the dust floor "
            f"{floor:.3e}",
            min_eigenvalue=float(eigvals[0]),
        )
    clipped = np.clip(eigvals, 0.0, None)
    return (eigvecs * clipped) @ eigvecs.T


def regression_covariance(sigma22, sigma21, sigma11, min_eig_rel=MIN_EIG_REL):
    """Conditional covariance of X2 given X1 = 0 (Schur complement).

    sigma21 = cov[X2, X1].  Raises DegenerateConditioning when sigma11 is
    numerically singular, carrying the offending minimum eigenvalue.
    """
    sigma22 = np.asarray(sigma22, dtype=float)
    sigma21 = np.atleast_2d(np.asarray(sigma21, dtype=float))
    sigma11 = np.atleast_2d(np.asarray(sigma11, dtype=float))
    eigvals = np.linalg.eigvalsh(0.5 * (sigma11 + sigma11.T))
    scale = float(np.max(np.abs(eigvals))) if eigvals.size else 0.0
    if scale == 0.0 or eigvals[0] <= min_eig_rel * scale:
        raise DegenerateConditioning(
            "degenerate conditioning: min eigenvalue "
            f"{eigvals[0] if eigvals.size else 0.0:.3e} vs scale {scale:.3e}",
            min_eigenvalue=float(eigvals[0]) if eigvals.size else 0.0,
        )
    solved = np.linalg.solve(sigma11, sigma21.T)
    cond = sigma22 - sigma21 @ solved
    return psd_clip(cond)


def gaussian_sqrt(cov):
    """Symmetric factor S with S S^T = cov (eigen route, deterministic)."""
    cov = psd_clip(cov)
    eigvals, eigvecs = np.linalg.eigh(cov)
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def gaussian_factor(cov):
    """Lower-triangular (Cholesky) factor, falling back to the eigen route.

    Cholesky is continuous in the matrix, so two nearby covariances produce
    nearby factors; paired-sample estimators rely on this to keep their
    common-random-number coupling tight.  Eigen factors would not do: a
    covariance with (near-)repeated eigenvalues has an arbitrarily rotating
    eigenbasis.
    """
    cov = np.asarray(cov, dtype=float)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    clipped = psd_clip(cov)
    scale = max(matrix_scale(clipped), 1e-300)
    try:
        return np.linalg.cholesky(clipped + 1e-14 * scale * np.eye(len(clipped)))
    except np.linalg.LinAlgError:
        return gaussian_sqrt(clipped)


def sample_gaussian(cov, n, seed):
    factor = gaussian_sqrt(cov)
    z = np.random.default_rng(seed).standard_normal((n, factor.shape[1]))
    return z @ factor.T


class GaussianSpec:
    """A zero-mean Gaussian vector with labeled coordinates."""

    def __init__(self, labels, cov):
        self.labels = list(labels)
        self.cov = np.asarray(cov, dtype=float)
        if self.cov.shape != (len(self.labels), len(self.labels)):
            raise ValueError("covariance shape does not match labels")

    def index(self, labels):
        return np.array([self.labels.index(l) for l in labels])

    def submatrix(self, rows, cols=None):
        r = self.index(rows)
        c = r if cols is None else self.index(cols)
        return self.cov[np.ix_(r, c)]

    def condition(self, keep, given):
        """Spec of coordinates ``keep`` conditioned on coordinates ``given`` = 0."""
        s22 = self.submatrix(keep)
        s21 = self.submatrix(keep, given)
        s11 = self.submatrix(given)
        return GaussianSpec(keep, regression_covariance(s22, s21, s11))

    def sample(self, n, seed):
        return sample_gaussian(self.cov, n, seed)

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(0.5 * (self.cov + self.cov.T))[0])


# ---------------------------------------------------------------------------
# determinant functionals
# ---------------------------------------------------------------------------


def vech_to_sym(draws, m):
    """(n, m(m+1)/2) vech draws -> (n, m, m) symmetric matrices."""
    from .covariance import vech_pairs

    draws = np.atleast_2d(draws)
    n = len(draws)
    out = np.empty((n, m, m))
    for a, (i, j) in enumerate(vech_pairs(m)):
        out[:, i, j] = draws[:, a]
        out[:, j, i] = draws[:, a]
    return out


def expected_abs_det(cov_hessian, m, n_mc, seed):
    """Monte Carlo E|det H| for a Gaussian symmetric matrix given its vech covariance."""
    cov_hessian = np.asarray(cov_hessian, dtype=float)
    d = m * (m + 1) // 2
    if cov_hessian.shape != (d, d):
        raise ValueError(f"expected a {d}x{d} vech covariance for m={m}")
    if matrix_scale(cov_hessian) == 0.0:
        return DensityReport(0.0, 0.0, int(n_mc), "zero-covariance")
    draws = sample_gaussian(cov_hessian, int(n_mc), seed)
    dets = np.abs(np.linalg.det(vech_to_sym(draws, m)))
    return DensityReport(
        float(dets.mean()),
        float(dets.std(ddof=1) / np.sqrt(len(dets))),
        int(n_mc),
        "mc-abs-det",
    )


def gauss_integral_abs_functional(f, cov, n_mc, seed):
    """Coupled Monte Carlo of integral f dGamma_cov; the draw is fixed by seed.

    Sharing the seed across covariances turns differences of these integrals
    into smooth functions of the covariance (common random numbers), which
    the Hölder-continuity measurement needs to resolve small perturbations.
    """
    factor = gaussian_sqrt(np.asarray(cov, dtype=float))
    z = np.random.default_rng(seed).standard_normal((int(n_mc), factor.shape[1]))
    vals = f(z @ factor.T)
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(len(vals)))


def holder_continuity_check(f, a0, a, n_mc, seed, min_eig=1e-8):
    """Measured |I_A0(f) - I_A(f)| against the perturbation scale ||A - A0||^{1/2}.

    Returns (lhs, rhs); callers fit the constant across a perturbation
    family.  Both covariances must be SPD.
    """
    a0 = np.asarray(a0, dtype=float)
    a = np.asarray(a, dtype=float)
    for mat in (a0, a):
        if np.linalg.eigvalsh(0.5 * (mat + mat.T))[0] <= min_eig:
            raise DegenerateConditioning("perturbation family left the SPD cone")
    i0, _ = gauss_integral_abs_functional(f, a0, n_mc, seed)
    i1, _ = gauss_integral_abs_functional(f, a, n_mc, seed)
    lhs = abs(i0 - i1)
    rhs = float(np.sqrt(np.linalg.norm(a - a0, 2)))
    return lhs, rhs
