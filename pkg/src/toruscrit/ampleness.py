"""Numerical nondegeneracy diagnostics for the field's Gaussian vectors.

The Kac-Rice computations and the Monte Carlo studies assume that the
jet (value, gradient, Hessian) at a point and the gradient pair at two
distinct points are nondegenerate Gaussian vectors.  For a retained
spectrum this is a finite eigenvalue check; the scan over bandwidths
reports the smallest tested R at which every check passes, and that
empirical threshold gates the experiment configurations.
"""

from dataclasses import dataclass

import numpy as np

from .covariance import LatticeSpectrum
from .kacrice import grad_labels, hess_labels, pair_covariance

PASS_REL = 1e-12


@dataclass
class AmplenessReport:
    check: str
    min_eigenvalue: float
    threshold: float
    passed: bool
    location: object = None

    def __bool__(self):
        return self.passed


def _report(check, cov, location=None):
    cov = np.asarray(cov, dtype=float)
    eigs = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    threshold = PASS_REL * float(np.trace(cov)) / len(cov)
    return AmplenessReport(
        check=check,
        min_eigenvalue=float(eigs[0]),
        threshold=threshold,
        passed=bool(eigs[0] > threshold),
        location=location,
    )


def jet_covariance(source, k):
    """Covariance of the k-jet (k = 1: value+gradient, k = 2: plus vech Hessian)."""
    if k not in (1, 2):
        raise ValueError("jet order must be 1 or 2")
    m = source.m
    val = np.atleast_2d(source.value_variance())
    a = source.grad_variance()
    g0 = np.zeros((1, m))  # value-gradient cross: odd derivative at 0
    blocks = [[val, g0], [g0.T, a]]
    if k == 2:
        h0 = source.hess_variance()
        vh = np.atleast_2d(source.value_hess_cross())
        gh = np.zeros((m, len(h0)))  # gradient-Hessian cross: odd derivative at 0
        blocks = [
            [val, g0, vh],
            [g0.T, a, gh],
            [vh.T, gh.T, h0],
        ]
    return np.block(blocks)


def min_eig_jet(spec, k):
    """Nondegeneracy of the k-jet at a point (stationarity: the point is irrelevant)."""
    return _report(f"jet-{k}", jet_covariance(spec, k))


def min_eig_pair(spec, z):
    """Nondegeneracy of the gradient pair at separation z != 0."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if not np.any(np.mod(z, getattr(spec, "R", np.inf))):
        raise ValueError("pair separation must be nonzero modulo the period")
    full = pair_covariance(spec, z)
    gl = grad_labels("x", spec.m) + grad_labels("y", spec.m)
    return _report("grad-pair", full.submatrix(gl), location=tuple(z))


@dataclass
class AmplenessScan:
    rows: list  # (R, worst jet report, worst pair report)
    passing_R: list
    empirical_threshold: object  # None when nothing passed

    def to_csv(self):
        import io

        buf = io.StringIO()
        buf.write("R,check,min_eigenvalue,threshold,pass\n")
        for R, jet, pair in self.rows:
            for rep in (jet, pair):
                buf.write(
                    f"{R!r},{rep.check},{rep.min_eigenvalue!r},"
                    f"{rep.threshold!r},{int(rep.passed)}\n"
                )
        return buf.getvalue()


def ampleness_scan(amp, m, R_values, z_grid=None, k=2, eps_trunc=1e-12):
    """Worst-case jet and pair nondegeneracy over a bandwidth list.

    Returns the scan rows and the smallest tested R at which both checks
    pass; experiment configurations refuse bandwidths below it.
    """
    rows = []
    passing = []
    for R in R_values:
        spec = LatticeSpectrum(amp, m, R, eps_trunc)
        jet = min_eig_jet(spec, k)
        if z_grid is None:
            grid = _default_separations(spec)
        else:
            grid = [np.atleast_1d(np.asarray(z, dtype=float)) for z in z_grid]
        pair_reports = [min_eig_pair(spec, z) for z in grid]
        worst_pair = min(pair_reports, key=lambda rep: rep.min_eigenvalue)
        rows.append((float(R), jet, worst_pair))
        if jet.passed and worst_pair.passed:
            passing.append(float(R))
    threshold = min(passing) if passing else None
    return AmplenessScan(rows=rows, passing_R=passing, empirical_threshold=threshold)


def _default_separations(spec):
    # radial sweep from near-diagonal to half a period along the first axis
    m, R = spec.m, spec.R
    radii = np.geomspace(0.05, R / 2.0, 12)
    out = []
    for r in radii:
        z = np.zeros(m)
        z[0] = r
        out.append(z)
    if m > 1:
        diag = np.full(m, (R / 2.0) / np.sqrt(m))
        out.append(diag)
    return out
