"""Amplitude profiles and the spectral moments of their induced densities.

An amplitude is an even function a with a(0) = 1 and certified decay; it
weights the Fourier modes of the random field and defines the isotropic
spectral density w(xi) = a(|xi|)^2 on R^m.  Everything downstream
(covariance kernels, Kac-Rice densities) is built from a handful of
moments of w, so this module also evaluates

    (2 pi)^{-m} * integral( xi^alpha * w(xi) dxi )

either in closed form (Gaussian profile) or by adaptive radial quadrature.
"""

import math

import numpy as np
from scipy import integrate, interpolate

from .errors import QuadratureError, UncertifiedTail

_MOMENT_RTOL = 1e-10
_MAX_MOMENT_ORDER = 4


class Amplitude:
    """Base class: even profile with a(0) = 1 and a certified tail.

    Subclasses implement ``_eval(r)`` for r >= 0 and ``tail_envelope(r)``,
    a nonincreasing certified upper bound for |a| on [r, infinity).
    """

    kind = "abstract"

    def __call__(self, x):
        return self._eval(np.abs(x))

    def _eval(self, r):
        raise NotImplementedError

    def tail_envelope(self, r):
        raise NotImplementedError

    def spectral_weight(self, xi):
        """w(xi) = a(|xi|)^2 for xi in R^m (vector or batch of vectors)."""
        xi = np.asarray(xi, dtype=float)
        r = np.sqrt(np.sum(xi * xi, axis=-1)) if xi.ndim else np.abs(xi)
        val = self._eval(r)
        return val * val

    def truncation_radius(self, eps):
        """Smallest certified L with |a(x)| <= eps for all |x| >= L."""
        if not 0.0 < eps < 1.0:
            raise ValueError(f"eps must be in (0,1), got {eps}")
        return self._truncation_radius(eps)

    def _truncation_radius(self, eps):
        raise NotImplementedError

    def spectral_moment(self, alpha, m):
        """(2 pi)^{-m} integral of xi^alpha w(xi) over R^m.

        Odd multi-indices return exactly 0.  Components of alpha must be
        nonnegative and |alpha| <= 4.
        """
        alpha = tuple(int(k) for k in alpha)
        if len(alpha) != m:
            raise ValueError(f"multi-index length {len(alpha)} != dimension {m}")
        if any(k < 0 for k in alpha):
            raise ValueError("multi-index components must be nonnegative")
        if sum(alpha) > _MAX_MOMENT_ORDER:
            raise ValueError(f"moment order {sum(alpha)} exceeds {_MAX_MOMENT_ORDER}")
        if any(k % 2 for k in alpha):
            return 0.0
        sphere = _sphere_monomial_integral(alpha)
        radial = self._radial_moment(sum(alpha) + m - 1)
        return sphere * radial / (2.0 * math.pi) ** m

    def _radial_moment(self, power):
        """integral_0^inf r^power w(r) dr, via adaptive quadrature by default."""
        upper = self._truncation_radius(1e-14)
        val, err = integrate.quad(
            lambda r: r**power * self._eval(r) ** 2,
            0.0,
            upper,
            epsrel=_MOMENT_RTOL,
            epsabs=0.0,
            limit=200,
        )
        if not np.isfinite(val) or (val != 0 and err > 1e-8 * abs(val)):
            raise QuadratureError(
                f"radial moment of order {power} did not converge", residual=err
            )
        return val

    def describe(self):
        raise NotImplementedError


def _sphere_monomial_integral(alpha):
    """integral over S^{m-1} of nu^alpha, for even alpha.

    Classical closed form 2 * prod Gamma((alpha_i+1)/2) / Gamma(sum (alpha_i+1)/2);
    for m = 1 the sphere is the two-point set {-1, +1} with counting measure.
    """
    betas = [(k + 1) / 2.0 for k in alpha]
    num = 2.0
    for b in betas:
        num *= math.gamma(b)
    return num / math.gamma(sum(betas))


class GaussianAmplitude(Amplitude):
    """a(x) = exp(-(x/s)^2) for a positive scale s."""

    kind = "gaussian"

    def __init__(self, scale=1.0):
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.scale = float(scale)

    def _eval(self, r):
        u = np.asarray(r, dtype=float) / self.scale
        return np.exp(-u * u)

    def tail_envelope(self, r):
        return self._eval(r)

    def _truncation_radius(self, eps):
        return self.scale * math.sqrt(-math.log(eps))

    def _radial_moment(self, power):
        # integral_0^inf r^p exp(-2 r^2 / s^2) dr = Gamma((p+1)/2) / (2 a^{(p+1)/2}),
        # a = 2/s^2
        a = 2.0 / self.scale**2
        return math.gamma((power + 1) / 2.0) / (2.0 * a ** ((power + 1) / 2.0))

    def quadrature_radial_moment(self, power):
        """Adaptive-quadrature path, kept callable to cross-check the closed form."""
        return Amplitude._radial_moment(self, power)

    def describe(self):
        return f"gaussian({self.scale!r})"

    def __repr__(self):
        return f"GaussianAmplitude(scale={self.scale})"


class BumpAmplitude(Amplitude):
    """Smooth compactly supported profile: exp(1 - 1/(1-(x/r0)^2)) inside |x| < r0."""

    kind = "bump"

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)

    def _eval(self, r):
        u = np.asarray(r, dtype=float) / self.radius
        out = np.zeros_like(u)
        inside = u < 1.0
        ui = u[inside] if u.ndim else (u if inside else None)
        if u.ndim:
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
        elif inside:
            out = np.exp(1.0 - 1.0 / (1.0 - u * u))
        return out

    def tail_envelope(self, r):
        return np.where(np.asarray(r, dtype=float) >= self.radius, 0.0, 1.0)

    def _truncation_radius(self, eps):
        # exactly zero outside the support
        return self.radius

    def describe(self):
        return f"bump({self.radius!r})"

    def __repr__(self):
        return f"BumpAmplitude(radius={self.radius})"


class TableAmplitude(Amplitude):
    """Amplitude tabulated on |x| with an optional certified polynomial tail.

    The table holds (abscissa, value) pairs for 0 = x_0 < ... < x_end; between
    abscissae the profile is a cubic spline in |x|, and it is defined as 0
    beyond x_end.  A tail certificate (coefficient C, exponent p) asserts
    |a(x)| <= C |x|^{-p} for |x| >= x_end and is required by any operation
    that needs a truncation radius.
    """

    kind = "table"

    def __init__(self, abscissae, values, tail_coefficient=None, tail_exponent=None):
        x = np.asarray(abscissae, dtype=float)
        y = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 4:
            raise ValueError("need matching 1-d abscissae/values with >= 4 rows")
        if x[0] != 0.0 or np.any(np.diff(x) <= 0):
            raise ValueError("abscissae must start at 0 and increase strictly")
        if abs(y[0] - 1.0) > 1e-12:
            raise ValueError(f"a(0) must equal 1, got {y[0]}")
        self.x_end = float(x[-1])
        self._spline = interpolate.CubicSpline(x, y, bc_type=((1, 0.0), "natural"))
        self.tail_coefficient = None if tail_coefficient is None else float(tail_coefficient)
        self.tail_exponent = None if tail_exponent is None else float(tail_exponent)
        self._table = (x.copy(), y.copy())

    def _eval(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r <= self.x_end, self._spline(np.minimum(r, self.x_end)), 0.0)
        return out if out.ndim else float(out)

    def tail_envelope(self, r):
        # certified at table resolution only: spline overshoot between
        # abscissae is not accounted for
        if self.tail_coefficient is None or self.tail_exponent is None:
            raise UncertifiedTail("uncertified tail: table amplitude lacks a tail bound")
        c, p = self.tail_coefficient, self.tail_exponent
        x, y = self._table
        tail_at_end = c * self.x_end**-p

        def _one(rr):
            if rr >= self.x_end:
                return c * rr**-p
            later = np.abs(y[x >= rr])
            return max(tail_at_end, float(later.max()) if len(later) else 0.0)

        r = np.asarray(r, dtype=float)
        if r.ndim == 0:
            return _one(float(r))
        return np.array([_one(v) for v in r])

    def _truncation_radius(self, eps):
        if self.tail_coefficient is None or self.tail_exponent is None:
            raise UncertifiedTail("uncertified tail: table amplitude lacks a tail bound")
        certified = (self.tail_coefficient / eps) ** (1.0 / self.tail_exponent)
        return max(self.x_end, certified)

    def describe(self):
        return f"table(n={len(self._table[0])}, tail_exponent={self.tail_exponent})"

    @classmethod
    def from_csv(cls, path, tail_coefficient=None, tail_exponent=None):
        data = np.loadtxt(path, delimiter=",", comments="#")
        return cls(data[:, 0], data[:, 1], tail_coefficient, tail_exponent)


def make_amplitude(descriptor):
    """Parse a textual amplitude descriptor such as 'gaussian(1.0)' or 'bump(3)'."""
    text = descriptor.strip()
    if "(" not in text or not text.endswith(")"):
        raise ValueError(f"cannot parse amplitude descriptor {descriptor!r}")
    name, arg = text[:-1].split("(", 1)
    name = name.strip().lower()
    if name == "gaussian":
        return GaussianAmplitude(float(arg))
    if name == "bump":
        return BumpAmplitude(float(arg))
    raise ValueError(f"unknown amplitude kind {name!r}")
