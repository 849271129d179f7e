"""Critical-point enumeration for field realizations on the torus.

Newton iteration on grad F = 0 is seeded from a uniform grid whose spacing
resolves the field's correlation length (four nodes per correlation cell);
converged points are deduplicated in the torus metric and annotated with
Hessian determinant and Morse index.  A sign-change count of F' with
bisection refinement provides an independent one-dimensional oracle.

Completeness of the Newton enumeration is monitored globally: on the
m-torus every Morse realization satisfies sum_points (-1)^{morse index} = 0,
and a violation triggers one grid-refinement escalation before the sample
is reported.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import backend

log = logging.getLogger(__name__)

DEDUP_TOL = 1e-6
MAX_NEWTON_ITER = 50
NEWTON_TOL_FACTOR = 1e-10
DEGENERACY_FACTOR = 1e-10
SEED_ALL_MAX_GRID = 64
_STEP_CAP = 0.25  # quarter of the torus period


def torus_distance(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b))
    d = np.minimum(d, 1.0 - d)
    return np.sqrt(np.sum(d * d, axis=-1))


@dataclass
class CriticalPoint:
    theta: np.ndarray
    grad_residual: float
    hess_det: float  # determinant of the unit-torus Hessian of F
    morse_index: int
    degenerate: bool = False


@dataclass
class CountingMeasure:
    """Located critical points of one realization."""

    points: list
    R: float
    m: int
    n_seeds: int = 0
    n_dropped_seeds: int = 0
    grid_n: int = 0
    escalations: int = 0

    @property
    def count(self):
        return len(self.points)

    @property
    def n_degenerate(self):
        return sum(1 for p in self.points if p.degenerate)

    @property
    def is_morse_clean(self):
        return self.n_degenerate == 0

    def euler_characteristic(self):
        return int(sum((-1) ** p.morse_index for p in self.points))

    def thetas(self):
        if not self.points:
            return np.zeros((0, self.m))
        return np.array([p.theta for p in self.points])

    def pair(self, f):
        """Sum of f over the located critical points."""
        if not self.points:
            return 0.0
        return float(np.sum(f(self.thetas())))

    def to_csv(self):
        import io

        buf = io.StringIO()
        cols = [f"theta{j+1}" for j in range(self.m)]
        buf.write(",".join(cols) + ",grad_residual,hess_det,morse_index,degenerate\n")
        for p in self.points:
            coords = ",".join(repr(float(v)) for v in np.atleast_1d(p.theta))
            buf.write(
                f"{coords},{p.grad_residual!r},{p.hess_det!r},{p.morse_index},"
                f"{int(p.degenerate)}\n"
            )
        return buf.getvalue()


def pair_measure(measure, f):
    return measure.pair(f)


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


class BumpTest:
    """Compactly supported bump (1 - (d/r0)^2)^3 on a torus ball d < r0 < 1/2."""

    kind = "bump"

    def __init__(self, center, r0):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        if not 0.0 < r0 < 0.5:
            raise ValueError("bump radius must lie in (0, 1/2)")
        self.r0 = float(r0)

    def __call__(self, theta):
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        u = torus_distance(theta, self.center) / self.r0
        return np.where(u < 1.0, (1.0 - u**2) ** 3, 0.0)

    def integral(self, m):
        """integral over R^m of the bump profile (support fits the torus cell)."""
        from scipy import integrate

        from .amplitude import _sphere_monomial_integral

        sphere = _sphere_monomial_integral((0,) * m)
        radial, _ = integrate.quad(
            lambda u: (1 - u**2) ** 3 * u ** (m - 1), 0.0, 1.0, epsrel=1e-12
        )
        return sphere * self.r0**m * radial

    def square_integral(self, m):
        from scipy import integrate

        from .amplitude import _sphere_monomial_integral

        sphere = _sphere_monomial_integral((0,) * m)
        radial, _ = integrate.quad(
            lambda u: (1 - u**2) ** 6 * u ** (m - 1), 0.0, 1.0, epsrel=1e-12
        )
        return sphere * self.r0**m * radial

    def describe(self):
        return f"bump(center={list(self.center)}, r0={self.r0})"


class BoxIndicator:
    """Indicator of an axis-aligned box inside the fundamental cell [0,1)^m."""

    kind = "indicator"

    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if np.any(self.lower < 0) or np.any(self.upper > 1) or np.any(
            self.lower >= self.upper
        ):
            raise ValueError("box must satisfy 0 <= lower < upper <= 1")

    @classmethod
    def full_torus(cls, m):
        return cls(np.zeros(m), np.ones(m))

    def __call__(self, theta):
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        theta = theta - np.floor(theta)
        inside = np.all((theta >= self.lower) & (theta < self.upper), axis=1)
        return inside.astype(float)

    def integral(self, m):
        return float(np.prod(self.upper - self.lower))

    def square_integral(self, m):
        return self.integral(m)

    def describe(self):
        return f"indicator(lower={list(self.lower)}, upper={list(self.upper)})"


class ZeroTest:
    kind = "zero"

    def __call__(self, theta):
        theta = np.atleast_2d(theta)
        return np.zeros(len(theta))

    def integral(self, m):
        return 0.0

    def square_integral(self, m):
        return 0.0

    def describe(self):
        return "zero"


# ---------------------------------------------------------------------------
# Newton enumeration
# ---------------------------------------------------------------------------


def default_grid_n(sample):
    """Four grid nodes per correlation cell of the rescaled field."""
    spec = sample.spec
    return int(math.ceil(4.0 * spec.R / spec.correlation_length()))


def _grid_points(n, m):
    axes = [np.arange(n) / n] * m
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)


def _select_seeds(sample, n):
    """Seed set: all nodes for coarse grids, gradient-screened nodes otherwise."""
    m = sample.m
    if n <= SEED_ALL_MAX_GRID:
        return _grid_points(n, m)
    value, grad, hess = sample.grid_jets(n, order=2)
    gnorm2 = np.sum(np.stack(grad) ** 2, axis=0)
    hscale = np.sqrt(np.sum(np.stack(hess) ** 2, axis=0))
    spacing = 1.0 / n
    spec = sample.spec
    global_h = spec.R**2 * math.sqrt(
        spec.deriv_dirs(np.zeros(m), (0, 0, 0, 0))
    )
    # keep nodes whose gradient could vanish within ~two cells
    thresh = 3.0 * spacing * (hscale + global_h)
    keep = gnorm2 <= thresh**2
    # always keep local minima of |grad|^2 over the 3^m neighborhood
    local_min = np.ones_like(keep)
    for axis in range(m):
        for shift in (-1, 1):
            local_min &= gnorm2 <= np.roll(gnorm2, shift, axis=axis)
    keep |= local_min
    idx = np.argwhere(keep)
    return idx.astype(float) / n


def _newton_solve_steps(grad, hess, m):
    """Newton steps H^{-1} g for a batch, with per-point singularity masks."""
    if m == 1:
        h = hess[:, 0, 0]
        ok = h != 0.0
        step = np.zeros_like(grad)
        step[ok, 0] = grad[ok, 0] / h[ok]
        return step, ok
    if m == 2:
        a = hess[:, 0, 0]
        b = hess[:, 0, 1]
        d = hess[:, 1, 1]
        det = a * d - b * b
        ok = det != 0.0
        step = np.zeros_like(grad)
        g0, g1 = grad[:, 0], grad[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            step[:, 0] = (d * g0 - b * g1) / det
            step[:, 1] = (a * g1 - b * g0) / det
        step[~ok] = 0.0
        return step, ok
    det = np.linalg.det(hess)
    ok = det != 0.0
    step = np.zeros_like(grad)
    if np.any(ok):
        step[ok] = np.linalg.solve(hess[ok], grad[ok][..., None])[..., 0]
    return step, ok


def find_critical_points(
    sample,
    grid_n=None,
    newton_tol=None,
    dedup_tol=DEDUP_TOL,
    max_newton_iter=MAX_NEWTON_ITER,
    _escalations_left=2,
):
    """Enumerate the critical points of one realization.

    Returns a :class:`CountingMeasure`; points with a Hessian determinant
    below the degeneracy floor are kept but flagged, and the sample counts
    as non-Morse for downstream statistics.
    """
    spec = sample.spec
    m, R = sample.m, sample.R
    if grid_n is None:
        grid_n = default_grid_n(sample)
    grad_var = spec.grad_variance()[0, 0]
    grad_scale = R * math.sqrt(grad_var)  # std of one gradient component of F
    if newton_tol is None:
        newton_tol = NEWTON_TOL_FACTOR * grad_scale
    h_var = spec.deriv_dirs(np.zeros(m), (0, 0, 0, 0))
    # degeneracy floor for |det Hess| in rescaled-field units
    det_floor_rescaled = DEGENERACY_FACTOR * h_var**m

    seeds = _select_seeds(sample, grid_n)
    pts = seeds.copy()
    n_seeds = len(seeds)
    active = np.ones(n_seeds, dtype=bool)
    converged = np.zeros(n_seeds, dtype=bool)
    for _ in range(max_newton_iter):
        if not np.any(active):
            break
        idx = np.nonzero(active)[0]
        _, grad, hess = sample.eval_jet(pts[idx], order=2)
        gnorm = np.linalg.norm(grad, axis=1)
        done = gnorm <= newton_tol
        converged[idx[done]] = True
        active[idx[done]] = False
        todo = ~done
        if not np.any(todo):
            continue
        step, ok = _newton_solve_steps(grad[todo], hess[todo], m)
        stepnorm = np.linalg.norm(step, axis=1)
        bad = (~ok) | (stepnorm > _STEP_CAP) | ~np.isfinite(stepnorm)
        sub = idx[todo]
        active[sub[bad]] = False  # diverged seeds are dropped
        good = ~bad
        pts[sub[good]] = np.mod(pts[sub[good]] - step[good], 1.0)
    n_dropped = int(n_seeds - np.count_nonzero(converged))
    if n_dropped:
        log.debug("dropped %d of %d Newton seeds", n_dropped, n_seeds)

    cand = pts[converged]
    points = []
    if len(cand):
        _, grad, hess = sample.eval_jet(cand, order=2)
        resid = np.linalg.norm(grad, axis=1)
        order = np.argsort(resid, kind="stable")
        kept_idx = []
        for i in order:
            if any(
                torus_distance(cand[i], cand[j]) < dedup_tol for j in kept_idx
            ):
                continue
            kept_idx.append(i)
        for i in kept_idx:
            h = hess[i]
            det = float(np.linalg.det(h))
            eigs = np.linalg.eigvalsh(h)
            morse = int(np.count_nonzero(eigs < 0))
            det_rescaled = det / R ** (2 * m)
            degenerate = abs(det_rescaled) < det_floor_rescaled
            points.append(
                CriticalPoint(
                    theta=cand[i].copy(),
                    grad_residual=float(resid[i]),
                    hess_det=det,
                    morse_index=morse,
                    degenerate=degenerate,
                )
            )

    measure = CountingMeasure(
        points=points,
        R=R,
        m=m,
        n_seeds=n_seeds,
        n_dropped_seeds=n_dropped,
        grid_n=grid_n,
    )
    if m >= 2 and measure.euler_characteristic() != 0 and _escalations_left > 0:
        log.info(
            "Euler characteristic %d != 0 at grid %d; refining",
            measure.euler_characteristic(),
            grid_n,
        )
        refined = find_critical_points(
            sample,
            grid_n=2 * grid_n,
            newton_tol=newton_tol,
            dedup_tol=dedup_tol,
            max_newton_iter=max_newton_iter,
            _escalations_left=_escalations_left - 1,
        )
        refined.escalations += 1
        return refined
    return measure


# ---------------------------------------------------------------------------
# one-dimensional oracle
# ---------------------------------------------------------------------------


def _derivative_on_grid(sample, grid_n):
    _, grad, _ = sample.grid_jets(grid_n, order=1)
    return grad[0]


def _checked_derivative_grid(sample, grid_n):
    if sample.m != 1:
        raise ValueError("the sign-change oracle is one-dimensional")
    spec = sample.spec
    min_grid = 16 * max(spec.lmax, 1)
    if grid_n is None:
        grid_n = min_grid
    if grid_n < min_grid:
        raise ValueError(f"grid_n must be >= 16 * lmax = {min_grid}")
    deriv = _derivative_on_grid(sample, grid_n)
    scale = np.max(np.abs(deriv))
    tiny = np.abs(deriv) <= 1e-13 * scale
    if scale == 0.0:
        return deriv, grid_n, True  # constant field: no sign changes
    if np.any(tiny & np.roll(tiny, -1)):
        raise ValueError("resolution insufficient: F' vanishes at adjacent nodes")
    return deriv, grid_n, False


def _zero_nodes_and_crossing_cells(deriv):
    """Exact-zero grid nodes plus cells with a strict sign change.

    A node where F' is exactly zero is itself a located critical point; the
    resolution guard has already rejected adjacent near-zero pairs, so each
    zero node is isolated and the neighboring cells carry no extra crossing.
    """
    zero_idx = np.nonzero(deriv == 0.0)[0]
    cells = np.nonzero(np.sign(deriv) * np.sign(np.roll(deriv, -1)) < 0)[0]
    return zero_idx, cells


def brute_force_count_1d(sample, grid_n=None):
    """Count critical points on the circle by sign changes of F'.

    Independent of the Newton path: F' is evaluated on a periodic grid at
    least 16x denser than the retained frequency count; locations (and the
    bisection confirmation of each crossing) come from
    :func:`brute_force_locations_1d`.
    """
    deriv, _, constant = _checked_derivative_grid(sample, grid_n)
    if constant:
        return 0
    if np.any(deriv == 0.0):
        zero_idx, cells = _zero_nodes_and_crossing_cells(deriv)
        return len(zero_idx) + len(cells)
    return backend.count_sign_changes(deriv)


def brute_force_locations_1d(sample, grid_n=None, bisect_steps=50):
    deriv, grid_n, constant = _checked_derivative_grid(sample, grid_n)
    if constant:
        return np.zeros(0)
    zero_idx, cells = _zero_nodes_and_crossing_cells(deriv)
    locs = [i / grid_n for i in zero_idx]
    for i in cells:
        lo = i / grid_n
        hi = (i + 1) / grid_n
        flo = deriv[i]
        for _ in range(bisect_steps):
            mid = 0.5 * (lo + hi)
            _, g, _ = sample.eval_jet(np.array([[mid]]), order=1)
            fm = g[0, 0]
            if fm == 0.0:
                lo = hi = mid
                break
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        locs.append(0.5 * (lo + hi) % 1.0)
    return np.array(sorted(locs))
