"""Monte Carlo studies of the critical-point counting measure.

Three headline studies, each confronting simulation with the semi-analytic
Kac-Rice route:

* mean/variance statistics of Z_R(f) across bandwidths (against the mean
  density and the variance coefficient),
* the log-log scaling fit of Var[Z_R(f)] versus R,
* law-of-large-numbers trajectories of N^{-m} Z_N(f) along integer
  bandwidths for coupled realization streams.

Trials are independent tasks distributed over a thread pool; results are
reduced in deterministic (R, trial) order, so output files are
byte-identical for a fixed configuration and master seed regardless of
worker count.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kacrice
from .covariance import LatticeSpectrum
from .critical import find_critical_points, pair_measure
from .errors import ToruscritError
from .rng import derive_seed
from .sampler import sample_field

log = logging.getLogger(__name__)

MAX_EXCLUDED_FRACTION = 0.01


@dataclass
class StudyRow:
    R: float
    trials: int
    mean_weighted: float  # R^{-m} E[Z_R(f)]
    mean_stderr: float
    var_weighted: float  # R^{-m} Var[Z_R(f)]
    var_stderr: float  # delete-1 jackknife
    mean_count: float
    n_excluded: int
    escalations: int


@dataclass
class StudyResult:
    rows: list
    config_echo: dict
    config_hash: str
    reference: dict = field(default_factory=dict)

    def row_for(self, R):
        for row in self.rows:
            if row.R == R:
                return row
        raise KeyError(R)

    def to_csv(self):
        import io

        buf = io.StringIO()
        buf.write(f"# config_hash={self.config_hash}\n")
        buf.write(
            "R,trials,mean_weighted,mean_stderr,var_weighted,var_stderr,"
            "mean_count,n_excluded,escalations\n"
        )
        for r in self.rows:
            buf.write(
                f"{r.R!r},{r.trials},{r.mean_weighted!r},{r.mean_stderr!r},"
                f"{r.var_weighted!r},{r.var_stderr!r},{r.mean_count!r},"
                f"{r.n_excluded},{r.escalations}\n"
            )
        return buf.getvalue()


def jackknife_variance_stderr(values):
    """Standard error of the sample variance by delete-1 jackknife."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n < 3:
        return float("nan")
    s1 = values.sum()
    s2 = (values**2).sum()
    mean_i = (s1 - values) / (n - 1)
    var_i = (s2 - values**2 - (n - 1) * mean_i**2) / (n - 2)
    return float(np.sqrt((n - 1) / n * ((var_i - var_i.mean()) ** 2).sum()))


def bootstrap_variance_stderr(values, n_boot=400, seed=0):
    """Bootstrap alternative used to sanity-check the jackknife estimate."""
    values = np.asarray(values, dtype=float)
    gen = np.random.default_rng(seed)
    idx = gen.integers(0, len(values), size=(n_boot, len(values)))
    return float(np.std(values[idx].var(axis=1, ddof=1), ddof=1))


def _run_trial(spec, f, seed):
    sample = sample_field(spec, seed)
    measure = find_critical_points(sample)
    return (
        pair_measure(measure, f),
        measure.count,
        measure.is_morse_clean,
        measure.escalations,
    )


def _map_trials(spec, f, seeds, threads):
    if threads <= 1:
        return [_run_trial(spec, f, s) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_trial, spec, f, s) for s in seeds]
        return [fut.result() for fut in futures]  # deterministic order


def run_mc_stats(config, with_reference=True):
    """Sample `trials` fields per bandwidth and summarize Z_R(f).

    Non-Morse samples are excluded from the statistics and counted; more
    than 1% exclusions at any bandwidth fails the run.
    """
    amp = config.amplitude()
    m = config.m
    f = config.test_function()
    master = config["study.master_seed"]
    trials = config["study.trials"]
    threads = config.threads()
    eps = config["model.eps_trunc"]

    rows = []
    for R in config.bandwidths():
        spec = LatticeSpectrum(amp, m, R, eps)
        seeds = [derive_seed(master, "stats", repr(float(R)), t) for t in range(trials)]
        outcomes = _map_trials(spec, f, seeds, threads)
        z = np.array([o[0] for o in outcomes])
        counts = np.array([o[1] for o in outcomes], dtype=float)
        clean = np.array([o[2] for o in outcomes], dtype=bool)
        escal = int(sum(o[3] for o in outcomes))
        n_excl = int(np.count_nonzero(~clean))
        if n_excl > MAX_EXCLUDED_FRACTION * trials:
            raise ToruscritError(
                f"{n_excl}/{trials} non-Morse samples at R={R}: run rejected"
            )
        z = z[clean]
        counts = counts[clean]
        n = len(z)
        scale = R ** (-m)
        rows.append(
            StudyRow(
                R=float(R),
                trials=n,
                mean_weighted=float(z.mean()) * scale,
                mean_stderr=float(z.std(ddof=1) / math.sqrt(n)) * scale,
                var_weighted=float(z.var(ddof=1)) * scale,
                var_stderr=jackknife_variance_stderr(z) * scale,
                mean_count=float(counts.mean()),
                n_excluded=n_excl,
                escalations=escal,
            )
        )
        log.info(
            "R=%g: mean Z=%.4f var Z=%.4f (%d trials, %d excluded)",
            R,
            rows[-1].mean_weighted / scale,
            rows[-1].var_weighted / scale,
            n,
            n_excl,
        )

    reference = {}
    if with_reference:
        n_mc = config["mc.n_mc"]
        c = kacrice.mean_density(amp, m, seed=derive_seed(master, "ref-mean"))
        reference = {
            "mean_density": c.value,
            "mean_density_stderr": c.std_error,
            "f_integral": f.integral(m),
            "f_square_integral": f.square_integral(m),
        }
        v = kacrice.variance_coefficient(
            amp,
            m,
            n_mc=n_mc,
            quad_nodes=config["mc.quad_nodes"],
            seed=derive_seed(master, "ref-var"),
        )
        reference["variance_coefficient"] = v.value
        reference["variance_coefficient_stderr"] = v.std_error
    return StudyResult(
        rows=rows,
        config_echo=config.as_dict(science_only=True),
        config_hash=config.content_hash(),
        reference=reference,
    )


# ---------------------------------------------------------------------------
# scaling fit
# ---------------------------------------------------------------------------


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    dropped_R: list
    n_points: int


def scaling_fit(result):
    """Least squares of log Var[Z_R(f)] against log R.

    Bandwidths with nonpositive variance estimates are dropped with a
    warning.  Standard errors propagate the per-bandwidth jackknife
    uncertainties through the unweighted fit.
    """
    xs, ys, sigmas, dropped = [], [], [], []
    for row in result.rows:
        var_raw = row.var_weighted * row.R ** _m(result)
        if var_raw <= 0:
            dropped.append(row.R)
            log.warning("dropping R=%g: nonpositive variance estimate", row.R)
            continue
        xs.append(math.log(row.R))
        ys.append(math.log(var_raw))
        sigmas.append(row.var_stderr * row.R ** _m(result) / var_raw)
    if len(xs) < 3:
        raise ToruscritError("scaling fit needs at least 3 usable bandwidths")
    x = np.array(xs)
    y = np.array(ys)
    sig = np.array(sigmas)
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    # parameter covariance of the unweighted fit driven by per-point sigma
    gram_inv = np.linalg.inv(a.T @ a)
    proj = gram_inv @ a.T
    param_var = (proj**2) @ sig**2
    return ScalingFit(
        slope=slope,
        intercept=intercept,
        slope_stderr=float(np.sqrt(param_var[0])),
        intercept_stderr=float(np.sqrt(param_var[1])),
        dropped_R=dropped,
        n_points=len(xs),
    )


def _m(result):
    return int(result.config_echo["model.m"])


# ---------------------------------------------------------------------------
# law-of-large-numbers trajectories
# ---------------------------------------------------------------------------


@dataclass
class LLNResult:
    N_values: list
    trajectories: np.ndarray  # (streams, len(N_values)) of N^{-m} Z_N(f)
    reference: float  # mean density times integral f
    reference_stderr: float
    config_echo: dict
    config_hash: str

    def max_abs_deviation(self):
        return np.max(np.abs(self.trajectories - self.reference), axis=0)

    def percentile_band(self, lo=25, hi=75):
        return (
            np.percentile(self.trajectories, lo, axis=0),
            np.percentile(self.trajectories, hi, axis=0),
        )

    def to_csv(self):
        import io

        buf = io.StringIO()
        buf.write(f"# config_hash={self.config_hash}\n")
        buf.write(f"# reference={self.reference!r}\n")
        buf.write("stream," + ",".join(f"N{int(n)}" for n in self.N_values) + "\n")
        for s, row in enumerate(self.trajectories):
            buf.write(f"{s}," + ",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()


def lln_trajectory(config):
    """Trajectories of N^{-m} Z_N(f) for coupled streams of realizations.

    Within one stream the Gaussian coefficients are keyed by lattice vector
    and shared across N: growing the bandwidth refines the same underlying
    realization, as in the almost-sure statement being illustrated.  For
    m = 1 the run is labeled mean-square only.
    """
    amp = config.amplitude()
    m = config.m
    f = config.test_function()
    master = config["study.master_seed"]
    streams = config["study.streams"]
    threads = config.threads()
    eps = config["model.eps_trunc"]
    n_values = [int(n) for n in config.bandwidths()]
    if m < 2:
        log.warning("m=1 law-of-large-numbers run: mean-square sense only")

    specs = {n: LatticeSpectrum(amp, m, float(n), eps) for n in n_values}
    tasks = [(s, n) for s in range(streams) for n in n_values]

    def _one(task):
        s, n = task
        sample = sample_field(specs[n], derive_seed(master, "lln-stream", s))
        measure = find_critical_points(sample)
        return pair_measure(measure, f) / float(n) ** m

    if threads <= 1:
        vals = [_one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(_one, tasks))
    traj = np.array(vals).reshape(streams, len(n_values))

    c = kacrice.mean_density(amp, m, seed=derive_seed(master, "ref-mean"))
    fint = f.integral(m)
    return LLNResult(
        N_values=n_values,
        trajectories=traj,
        reference=c.value * fint,
        reference_stderr=c.std_error * fint,
        config_echo=config.as_dict(science_only=True),
        config_hash=config.content_hash(),
    )


# ---------------------------------------------------------------------------
# blow-up boundedness study
# ---------------------------------------------------------------------------


@dataclass
class BlowupStudy:
    r_grid: list
    w_values: list  # (value, stderr) per r
    c_sup_moments: dict  # p -> (estimate, stderr) of E[C^p]
    observed_ratio: float
    config_hash: str

    def to_csv(self):
        import io

        buf = io.StringIO()
        buf.write(f"# config_hash={self.config_hash}\n")
        buf.write("r,w,w_stderr\n")
        for r, (w, se) in zip(self.r_grid, self.w_values):
            buf.write(f"{r!r},{w!r},{se!r}\n")
        return buf.getvalue()


def gradient_field_sup_norm(sample, grid_n=None):
    """sup over a dense grid of |grad F| + |Hess F| + |third derivatives of F|.

    The normalization is the rescaled field (unit-variance scale): the
    unit-torus derivative of order k carries a factor R^k.
    """
    spec = sample.spec
    m, R = sample.m, sample.R
    if grid_n is None:
        grid_n = max(8 * spec.lmax + 1, 32)
    _, grad, hess = sample.grid_jets(grid_n, order=2)
    third = _third_derivative_grids(sample, grid_n)
    gnorm = np.sqrt(np.sum(np.stack(grad) ** 2, axis=0)) / R
    hnorm = np.sqrt(np.sum(np.stack(hess) ** 2, axis=0)) / R**2
    tnorm = np.sqrt(np.sum(np.stack(third) ** 2, axis=0)) / R**3
    return float(np.max(gnorm + hnorm + tnorm))


def _third_derivative_grids(sample, grid_n):
    m = sample.m
    triples = [
        (i, j, k)
        for i in range(m)
        for j in range(i, m)
        for k in range(j, m)
    ]
    return sample._grid_fft(grid_n, *triples)


def blowup_bound_study(spec, r_grid, trials, n_mc=50_000, seed=0):
    """Tabulate w(r) = r^{m-2} rho_hat(r) and moments of the field sup-norm.

    The reported ratio sup_r w / E[C] is the observed constant relating the
    diagonal-rescaled pair density to the first sup-norm moment.
    """
    w_values = []
    for i, r in enumerate(r_grid):
        rep = kacrice.blow_up_density(spec, float(r), n_mc=n_mc, seed=derive_seed(seed, "w", i))
        w_values.append((rep.value, rep.std_error))
    sups = np.array(
        [
            gradient_field_sup_norm(sample_field(spec, derive_seed(seed, "sup", t)))
            for t in range(trials)
        ]
    )
    moments = {}
    for p in (1, 2, 4):
        vals = sups**p
        moments[p] = (
            float(vals.mean()),
            float(vals.std(ddof=1) / math.sqrt(len(vals))),
        )
    ratio = max(w for w, _ in w_values) / moments[1][0]
    return BlowupStudy(
        r_grid=list(r_grid),
        w_values=w_values,
        c_sup_moments=moments,
        observed_ratio=float(ratio),
        config_hash="",
    )
