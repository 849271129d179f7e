"""Stationary covariance kernels and their derivative blocks.

Two kernel sources share one interface:

* ``LatticeSpectrum`` - the exact covariance of the band-limited field on
  the rescaled torus [0, R)^m, a finite trigonometric sum over the
  retained frequency lattice;
* ``ContinuumKernel`` - its band-limit-infinity counterpart on R^m, the
  Fourier transform of the isotropic spectral density.

Both expose pointwise partial derivatives up to order 4 and the assembled
covariance blocks of (gradient, Hessian) evaluations of the field at one
or two points.  Every block is produced here and nowhere else, so the
Kac-Rice and nondegeneracy modules are guaranteed to operate on
byte-identical matrices.

Sign conventions (z = y - x, K even, derived by differentiating
E[f(x) f(y)] = K(x - y) and unit-tested against Monte Carlo samples):

    E[ d_i f(x) d_j f(y) ]   = -K_ij(z)
    E[ H_ij(x) d_k f(y) ]    = +K_ijk(z)
    E[ d_k f(x) H_ij(y) ]    = -K_ijk(z)
    E[ H_ij(x) H_kl(y) ]     = +K_ijkl(z)
    E[ f(x) H_ij(y) ]        = +K_ij(z)

The module also provides the Poisson-summation evaluation of the lattice
kernel as a sum of shifted continuum kernels, and a certified upper bound
for the sup-norm gap between the two kernels on a large box.
"""

import itertools
import math

import numpy as np

from .amplitude import GaussianAmplitude
from .errors import QuadratureError, UncertifiedTail

# trig pattern of d^n cos(q.z): [cos, -sin, -cos, sin][n % 4] times q^n
_TRIG_SIGN = (1.0, -1.0, -1.0, 1.0)

_MAX_DERIV_ORDER = 4


def vech_pairs(m):
    """Upper-triangle index pairs (i <= j) in row-major order."""
    return [(i, j) for i in range(m) for j in range(i, m)]


def multi_indices(m, max_order):
    """All exponent multi-indices alpha in N^m with |alpha| <= max_order."""
    out = []
    for total in range(max_order + 1):
        for alpha in itertools.product(range(total + 1), repeat=m):
            if sum(alpha) == total:
                out.append(alpha)
    return out


def _dirs_from_alpha(alpha):
    dirs = []
    for axis, k in enumerate(alpha):
        dirs.extend([axis] * k)
    return tuple(dirs)


class KernelSource:
    """Shared covariance-block assembly on top of ``deriv_dirs``.

    Subclasses implement ``deriv_dirs(z, dirs)`` = the partial derivative of
    the kernel at z in the listed coordinate directions, plus a numerically
    stable ``grad_second_difference``.
    """

    m = None

    def deriv_dirs(self, z, dirs):
        raise NotImplementedError

    def deriv(self, z, alpha):
        """Partial derivative for an exponent multi-index alpha, |alpha| <= 4."""
        alpha = tuple(int(k) for k in alpha)
        if len(alpha) != self.m:
            raise ValueError(f"multi-index length {len(alpha)} != dimension {self.m}")
        if any(k < 0 for k in alpha):
            raise ValueError("multi-index components must be nonnegative")
        if sum(alpha) > _MAX_DERIV_ORDER:
            raise ValueError(
                f"derivative order {sum(alpha)} exceeds {_MAX_DERIV_ORDER}"
            )
        return self.deriv_dirs(np.asarray(z, dtype=float), _dirs_from_alpha(alpha))

    # --- one-point blocks -------------------------------------------------

    def value_variance(self):
        return self.deriv_dirs(np.zeros(self.m), ())

    def grad_variance(self):
        """Var[grad f(0)], entries -K_ij(0)."""
        m = self.m
        z0 = np.zeros(m)
        out = np.empty((m, m))
        for i in range(m):
            for j in range(i, m):
                out[i, j] = out[j, i] = -self.deriv_dirs(z0, (i, j))
        return out

    def hess_variance(self):
        """Covariance of vech(Hessian) at a point, entries +K_ijkl(0)."""
        pairs = vech_pairs(self.m)
        z0 = np.zeros(self.m)
        d = len(pairs)
        out = np.empty((d, d))
        for a, (i, j) in enumerate(pairs):
            for b, (k, l) in enumerate(pairs):
                if b < a:
                    continue
                out[a, b] = out[b, a] = self.deriv_dirs(z0, (i, j, k, l))
        return out

    def value_hess_cross(self):
        """E[f(0) vech H(0)], entries +K_ij(0)."""
        pairs = vech_pairs(self.m)
        z0 = np.zeros(self.m)
        return np.array([self.deriv_dirs(z0, p) for p in pairs])

    # --- two-point blocks, z = y - x ---------------------------------------

    def grad_cross(self, z):
        """cov[grad f(x), grad f(y)], entries -K_ij(z)."""
        m = self.m
        z = np.asarray(z, dtype=float)
        out = np.empty((m, m))
        for i in range(m):
            for j in range(i, m):
                out[i, j] = out[j, i] = -self.deriv_dirs(z, (i, j))
        return out

    def hess_cross(self, z):
        """cov[vech H(x), vech H(y)], entries +K_ijkl(z)."""
        pairs = vech_pairs(self.m)
        z = np.asarray(z, dtype=float)
        d = len(pairs)
        out = np.empty((d, d))
        for a, (i, j) in enumerate(pairs):
            for b, (k, l) in enumerate(pairs):
                out[a, b] = self.deriv_dirs(z, (i, j, k, l))
        return out

    def hess_grad_cross(self, z):
        """cov[vech H(x), grad f(y)], entries +K_ijk(z)."""
        pairs = vech_pairs(self.m)
        z = np.asarray(z, dtype=float)
        out = np.empty((len(pairs), self.m))
        for a, (i, j) in enumerate(pairs):
            for k in range(self.m):
                out[a, k] = self.deriv_dirs(z, (i, j, k))
        return out

    def third_tensor(self, z):
        """K_ijk(z) for vech pairs (i,j) and axis k; same array as hess_grad_cross."""
        return self.hess_grad_cross(z)

    def grad_second_difference(self, z):
        """Matrix K_ij(z) - K_ij(0), computed without catastrophic cancellation.

        Feeds the divided-difference (gauge-changed) conditioning used near
        the two-point diagonal, where the naive difference of two kernel
        evaluations would lose every significant digit.
        """
        raise NotImplementedError

    def derivative_abs_sum(self, z):
        """Sum of |d^alpha K(z)| over all |alpha| <= 4; the far-field control quantity."""
        z = np.asarray(z, dtype=float)
        return float(
            sum(abs(self.deriv(z, alpha)) for alpha in multi_indices(self.m, 4))
        )


class LatticeSpectrum(KernelSource):
    """Truncated frequency lattice of the band-limited field at bandwidth R.

    Retains all integer vectors l with |2 pi l| / R <= L(eps_trunc), stored
    as the lexicographically positive half plus the zero mode; the full set
    is implied by the l -> -l symmetry.  Weight of mode l is
    R^{-m} a(|2 pi l| / R)^2.
    """

    def __init__(self, amp, m, R, eps_trunc=1e-12):
        if m < 1:
            raise ValueError("dimension must be >= 1")
        if R <= 0:
            raise ValueError("R must be positive")
        self.amp = amp
        self.m = int(m)
        self.R = float(R)
        self.eps_trunc = float(eps_trunc)
        self.L_trunc = amp.truncation_radius(self.eps_trunc)
        lmax = int(math.floor(self.L_trunc * self.R / (2.0 * math.pi)))
        self.lmax = lmax
        axes = [np.arange(-lmax, lmax + 1)] * self.m
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.m)
        norms = np.linalg.norm(grid, axis=1)
        keep = 2.0 * math.pi * norms / self.R <= self.L_trunc
        grid = grid[keep]
        # lexicographic positivity: first nonzero coordinate positive
        pos = np.zeros(len(grid), dtype=bool)
        undecided = np.ones(len(grid), dtype=bool)
        for j in range(self.m):
            col = grid[:, j]
            pos |= undecided & (col > 0)
            undecided &= col == 0
        self.half_freqs = np.ascontiguousarray(grid[pos], dtype=np.int64)
        self.amp_half = np.asarray(
            amp(2.0 * math.pi * np.linalg.norm(self.half_freqs, axis=1) / self.R),
            dtype=float,
        )
        self.weight0 = self.R ** (-self.m)
        self.weights_half = self.weight0 * self.amp_half**2
        # angular frequencies of the rescaled field on [0, R)^m
        self.freqs_angular = 2.0 * math.pi * self.half_freqs / self.R

    # -- spectrum-level queries --------------------------------------------

    @property
    def n_half_modes(self):
        return len(self.half_freqs)

    def full_freqs(self):
        """The full symmetric frequency set (for diagnostics and tests)."""
        return np.concatenate(
            [np.zeros((1, self.m), dtype=np.int64), self.half_freqs, -self.half_freqs]
        )

    def weight(self, l):
        l = np.asarray(l)
        r = 2.0 * math.pi * np.linalg.norm(l) / self.R
        if r > self.L_trunc:
            return 0.0
        return self.weight0 * float(self.amp(r)) ** 2

    def omitted_tail_bound(self):
        """Certified bound on the total spectral weight outside the lattice cutoff.

        Sums shell counts against the amplitude's nonincreasing tail envelope
        until the terms fall below 1e-30.
        """
        env = self.amp.tail_envelope
        total = 0.0
        n = self.lmax + 1
        while True:
            count = (2 * n + 1) ** self.m - (2 * n - 1) ** self.m
            radius = 2.0 * math.pi * n / self.R
            bound = float(env(radius))
            term = self.weight0 * count * bound * bound
            total += term
            if term < 1e-30 and bound < self.eps_trunc:
                break
            n += 1
            if n > self.lmax + 10_000:
                raise UncertifiedTail("tail envelope decays too slowly to certify")
        return total

    # -- kernel derivatives --------------------------------------------------

    def deriv_dirs(self, z, dirs):
        z = np.asarray(z, dtype=float)
        n = len(dirs)
        phase = self.freqs_angular @ z
        factor = self.weights_half.copy()
        for d in dirs:
            factor = factor * self.freqs_angular[:, d]
        trig = np.cos(phase) if n % 2 == 0 else np.sin(phase)
        total = 2.0 * float(factor @ trig) * _TRIG_SIGN[n % 4]
        if n == 0:
            total += self.weight0
        return total

    def grad_second_difference(self, z):
        # K_ij(z) - K_ij(0) = sum_l 2 w_l q_i q_j (1 - cos(q.z))
        #                   = sum_l 4 w_l q_i q_j sin^2(q.z / 2)
        z = np.asarray(z, dtype=float)
        s2 = np.sin(0.5 * (self.freqs_angular @ z)) ** 2
        m = self.m
        out = np.empty((m, m))
        for i in range(m):
            for j in range(i, m):
                q2 = self.freqs_angular[:, i] * self.freqs_angular[:, j]
                out[i, j] = out[j, i] = 4.0 * float((self.weights_half * q2) @ s2)
        return out

    def correlation_length(self):
        """Characteristic wavelength sqrt(Var[d1 f] / Var[d11 f]) of the rescaled field."""
        d = self.grad_variance()[0, 0]
        h = self.deriv_dirs(np.zeros(self.m), (0, 0, 0, 0))
        return math.sqrt(d / h)

    def __repr__(self):
        return (
            f"LatticeSpectrum({self.amp.describe()}, m={self.m}, R={self.R}, "
            f"modes={1 + 2 * self.n_half_modes})"
        )


class ContinuumKernel(KernelSource):
    """Band-limit-infinity covariance kernel on R^m.

    For the Gaussian profile a(x) = exp(-(x/s)^2) the kernel is
    (8 pi)^{-m/2} s^m exp(-s^2 |z|^2 / 8) and all derivatives are evaluated
    from exact polynomial recurrences.  Other profiles fall back to
    tensor-product Gauss-Legendre quadrature of the Fourier integral
    (supported for m <= 2).
    """

    def __init__(self, amp, m):
        self.amp = amp
        self.m = int(m)
        if isinstance(amp, GaussianAmplitude):
            s = amp.scale
            self._gauss_a = s * s / 8.0
            self._gauss_c = (8.0 * math.pi) ** (-self.m / 2.0) * s**self.m
            self._polys = _gauss_deriv_polys(self._gauss_a, _MAX_DERIV_ORDER)
        else:
            self._gauss_a = None
            if self.m > 2:
                raise ValueError(
                    "quadrature kernel evaluation supported for m <= 2 only"
                )
            self._quad_L = amp.truncation_radius(1e-16)

    @property
    def is_closed_form(self):
        return self._gauss_a is not None

    def deriv_dirs(self, z, dirs):
        z = np.asarray(z, dtype=float)
        if self.is_closed_form:
            return self._gauss_deriv(z, dirs)
        return self._quad_deriv(z, dirs)

    # -- Gaussian closed form ------------------------------------------------

    def _gauss_deriv(self, z, dirs):
        orders = [0] * self.m
        for d in dirs:
            orders[d] += 1
        value = self._gauss_c * math.exp(-self._gauss_a * float(z @ z))
        for axis, n in enumerate(orders):
            if n:
                value *= _polyval(self._polys[n], z[axis])
        return value

    def grad_second_difference(self, z):
        z = np.asarray(z, dtype=float)
        m = self.m
        out = np.empty((m, m))
        if not self.is_closed_form:
            return self._quad_second_difference(z)
        a, c = self._gauss_a, self._gauss_c
        r2 = float(z @ z)
        decay = math.exp(-a * r2)
        for i in range(m):
            for j in range(i, m):
                if i == j:
                    # c[(-2a + 4a^2 z_i^2) e^{-a r^2} + 2a]
                    out[i, i] = c * (
                        -2.0 * a * math.expm1(-a * r2)
                        + 4.0 * a * a * z[i] * z[i] * decay
                    )
                else:
                    # K_ij(0) = 0 off the diagonal
                    out[i, j] = out[j, i] = c * 4.0 * a * a * z[i] * z[j] * decay
        return out

    # -- quadrature fallback ---------------------------------------------------

    def _quad_nodes(self, zscale, refine=1.0):
        L = self._quad_L
        n = int(refine * (48 + 1.6 * L * (zscale + 6.0)))
        n = min(max(n, 48), 640)
        x, w = np.polynomial.legendre.leggauss(n)
        return 0.5 * L * (x + 1.0), 0.5 * L * w  # nodes on (0, L)

    def _quad_eval(self, integrand, zscale):
        vals = []
        for refine in (1.0, 1.45):
            nodes, w = self._quad_nodes(zscale, refine)
            if self.m == 1:
                xi = nodes[:, None]
                weights = w
            else:
                g1, g2 = np.meshgrid(nodes, nodes, indexing="ij")
                xi = np.stack([g1.ravel(), g2.ravel()], axis=1)
                weights = np.outer(w, w).ravel()
            vals.append(float(weights @ integrand(xi)))
        if abs(vals[1] - vals[0]) > 1e-9 * max(1.0, abs(vals[1])) + 1e-13:
            raise QuadratureError(
                "kernel quadrature did not converge",
                residual=abs(vals[1] - vals[0]),
            )
        return vals[1]

    def _quad_deriv(self, z, dirs):
        n = len(dirs)
        sign = _TRIG_SIGN[n % 4]
        trig = np.cos if n % 2 == 0 else np.sin

        def integrand(xi):
            w = self.amp.spectral_weight(xi)
            phase = xi @ z
            factor = w
            for d in dirs:
                factor = factor * xi[:, d]
            return factor * trig(phase)

        # integrate over the positive orthant image: w and the trig factor are
        # even under xi -> -xi jointly with the monomial only when n is even;
        # integrate symmetrically instead: reflect nodes over each axis.
        total = 0.0
        for signs in itertools.product((1.0, -1.0), repeat=self.m):
            sgn = np.array(signs)

            def reflected(xi, sgn=sgn):
                return integrand(xi * sgn)

            total += self._quad_eval(reflected, float(np.linalg.norm(z)))
        return sign * total / (2.0 * math.pi) ** self.m

    def _quad_second_difference(self, z):
        m = self.m
        out = np.empty((m, m))
        for i in range(m):
            for j in range(i, m):

                def integrand(xi, i=i, j=j):
                    w = self.amp.spectral_weight(xi)
                    s = np.sin(0.5 * (xi @ z))
                    return xi[:, i] * xi[:, j] * 2.0 * s * s * w

                total = 0.0
                for signs in itertools.product((1.0, -1.0), repeat=self.m):
                    sgn = np.array(signs)
                    total += self._quad_eval(
                        lambda xi, sgn=sgn: integrand(xi * sgn),
                        float(np.linalg.norm(z)),
                    )
                out[i, j] = out[j, i] = total / (2.0 * math.pi) ** m
        return out

    def correlation_length(self):
        d = self.grad_variance()[0, 0]
        h = self.deriv_dirs(np.zeros(self.m), (0, 0, 0, 0))
        return math.sqrt(d / h)

    def __repr__(self):
        return f"ContinuumKernel({self.amp.describe()}, m={self.m})"


def _gauss_deriv_polys(a, nmax):
    """Coefficient arrays p_n with d^n/du^n exp(-a u^2) = p_n(u) exp(-a u^2).

    Recurrence p_{n+1} = p_n' - 2 a u p_n, exact in floating point for the
    orders used here.
    """
    polys = [np.array([1.0])]
    for _ in range(nmax):
        p = polys[-1]
        dp = np.polynomial.polynomial.polyder(p) if len(p) > 1 else np.array([0.0])
        shifted = np.zeros(len(p) + 1)
        shifted[1:] = -2.0 * a * p
        width = max(len(dp), len(shifted))
        nxt = np.zeros(width)
        nxt[: len(dp)] += dp
        nxt[: len(shifted)] += shifted
        polys.append(nxt)
    return polys


def _polyval(coeffs, u):
    return float(np.polynomial.polynomial.polyval(u, coeffs))


# ---------------------------------------------------------------------------
# free-function forms of the operations, matching the package-level contracts
# ---------------------------------------------------------------------------


def kernel_deriv_continuum(amp, m, z, alpha):
    return ContinuumKernel(amp, m).deriv(z, alpha)


def kernel_deriv_lattice(spec, z, alpha):
    return spec.deriv(z, alpha)


def derivative_abs_sum(spec, z):
    return spec.derivative_abs_sum(z)


def kernel_tail_sup(amp, m, dirs, t):
    """Certified sup of |d^dirs K(x)| over the region |x|_inf >= t.

    Gaussian profile: per-monomial unimodal bounds on the absolute-coefficient
    majorant of the closed form.  Bump profile (m = 1): integration-by-parts
    bound M_q / t^q with high-precision derivative integrals.  Other profiles
    raise UncertifiedTail.
    """
    if isinstance(amp, GaussianAmplitude):
        return _gauss_tail_sup(amp, m, dirs, t)
    if amp.kind == "bump" and m == 1:
        q = 10
        return _bump_ibp_constant(amp, dirs, q) / max(t, 1e-300) ** q
    raise UncertifiedTail(
        f"no certified kernel tail bound for amplitude kind {amp.kind!r} at m={m}"
    )


def _gauss_tail_sup(amp, m, dirs, t):
    # |d^dirs K(x)| <= c * Q(|x|) * exp(-a |x|^2) with Q the product of
    # absolute-coefficient majorants; each monomial u^k exp(-a u^2) is
    # unimodal with peak at sqrt(k / (2a)), so its sup over u >= t is exact.
    a = amp.scale**2 / 8.0
    c = (8.0 * math.pi) ** (-m / 2.0) * amp.scale**m
    polys = _gauss_deriv_polys(a, _MAX_DERIV_ORDER)
    orders = [0] * m
    for d in dirs:
        orders[d] += 1
    # product of per-axis polynomials, coefficients in absolute value
    coeffs = np.array([1.0])
    for n in orders:
        if n:
            coeffs = np.polynomial.polynomial.polymul(coeffs, np.abs(polys[n]))
    coeffs = np.abs(coeffs)
    total = 0.0
    for k, ck in enumerate(coeffs):
        if ck == 0.0:
            continue
        peak = math.sqrt(k / (2.0 * a)) if k else 0.0
        u = max(t, peak) if t < peak else t
        # sup over u >= t of u^k e^{-a u^2}
        if t >= peak:
            val = t**k * math.exp(-a * t * t)
        else:
            val = peak**k * math.exp(-k / 2.0) if k else 1.0
        total += ck * val
    return c * total


_BUMP_IBP_CACHE = {}


def _bump_ibp_constant(amp, dirs, q):
    """M_q = (2 pi)^-1 * integral |d^q_xi (xi^n w(xi))| dxi for the 1-d bump."""
    key = (amp.radius, len(dirs), q)
    if key in _BUMP_IBP_CACHE:
        return _BUMP_IBP_CACHE[key]
    import mpmath as mp

    n = len(dirs)
    r = mp.mpf(amp.radius)

    def wfun(x):
        u = x / r
        if abs(u) >= 1:
            return mp.mpf(0)
        return x**n * mp.e ** (2 - 2 / (1 - u * u))

    def abs_deriv(x):
        if abs(x) >= float(r) * (1 - 1e-12):
            return mp.mpf(0)
        return abs(mp.diff(wfun, x, q, h=mp.mpf("1e-3") * r))

    with mp.workdps(40):
        integral = mp.quad(abs_deriv, [-r, -r / 2, 0, r / 2, r])
        value = float(integral / (2 * mp.pi))
    _BUMP_IBP_CACHE[key] = value
    return value


def kernel_poisson(amp, m, R, z, tail_target=1e-14):
    """Lattice kernel evaluated as the sum of continuum-kernel translates.

    Computes sum over k in Z^m of K(R k - z), truncated at a certified
    |k|_inf cutoff whose omitted tail is below ``tail_target``.
    """
    z = np.asarray(z, dtype=float)
    kern = ContinuumKernel(amp, m)
    # reduce z into the centered cell so translates decay symmetrically
    z_red = z - R * np.round(z / R)

    def shell_bound(n):
        # translates with |k|_inf = n sit at distance >= R n - |z|_inf >= R(n - 1/2)
        count = (2 * n + 1) ** m - (2 * n - 1) ** m
        return count * kernel_tail_sup(amp, m, (), R * (n - 0.5))

    kmax, remainder = 1, math.inf
    while kmax < 200:
        bounds = [shell_bound(n) for n in range(kmax + 1, kmax + 40)]
        remainder = sum(bounds)
        if remainder < tail_target and bounds[-1] < 1e-3 * tail_target:
            break
        kmax += 1
    total = 0.0
    for k in itertools.product(range(-kmax, kmax + 1), repeat=m):
        total += kern.deriv_dirs(R * np.array(k, dtype=float) - z_red, ())
    return total


def kernel_gap_bound(amp, m, R, r0, ell, p):
    """Certified bound for max_{|alpha|<=ell} sup_{RB} |K_R^alpha - K^alpha|.

    RB is the box [-R r0/2, R r0/2]^m.  The difference of the two kernels is
    the sum of the nonzero continuum-kernel translates, and each translate is
    bounded by the certified tail sup at distance R(|k|_inf - r0/2).  The
    result decreases at least like R^{-p}; p must exceed m for the shell sum
    to converge.
    """
    if p <= m:
        raise ValueError(f"divergent tail sum: need p > m, got p={p}, m={m}")
    if not 0.0 < r0 < 1.0:
        raise ValueError("r0 must lie in (0, 1)")
    if R <= 2.0:
        raise ValueError("R must exceed 2")
    worst = 0.0
    for alpha in multi_indices(m, ell):
        dirs = _dirs_from_alpha(alpha)
        total = 0.0
        n = 1
        while True:
            count = (2 * n + 1) ** m - (2 * n - 1) ** m
            term = count * kernel_tail_sup(amp, m, dirs, R * (n - r0 / 2.0))
            total += term
            if term < 1e-30 * max(total, 1e-300) or (term == 0.0 and n > 2):
                break
            n += 1
            if n > 10_000:
                raise UncertifiedTail("kernel tail shells decay too slowly")
        worst = max(worst, total)
    return worst
