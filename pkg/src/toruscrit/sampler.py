"""Sampling and exact evaluation of the band-limited random field.

A field sample on the unit torus [0,1)^m is

    F(t) = R^{-m/2} [ A_0 + sqrt(2) * sum_{l > 0} a(|2 pi l|/R)
                      ( A_l cos(2 pi <l,t>) + B_l sin(2 pi <l,t>) ) ]

with independent standard-normal coefficients (A_l, B_l) drawn by a
counter-based generator keyed by (seed, l).  Values, gradients, and
Hessians are exact trigonometric sums; a uniform grid of values comes from
an inverse FFT with the weighted coefficients placed at their frequencies.
"""

import io

import numpy as np

from . import backend, rng


class FieldSample:
    """One realization: retained spectrum plus its Gaussian coefficients.

    Immutable after construction.  ``coef_a``/``coef_b`` follow the order of
    ``spec.half_freqs``; ``a0`` is the constant-mode coefficient.
    """

    def __init__(self, spec, seed, a0, coef_a, coef_b):
        self.spec = spec
        self.seed = seed
        self.a0 = float(a0)
        self.coef_a = np.asarray(coef_a, dtype=float)
        self.coef_b = np.asarray(coef_b, dtype=float)
        if self.coef_a.shape != (spec.n_half_modes,) or self.coef_b.shape != (
            spec.n_half_modes,
        ):
            raise ValueError("coefficient arrays do not match the spectrum")
        scale = np.sqrt(2.0) * spec.R ** (-spec.m / 2.0) * spec.amp_half
        self._cos_coef = scale * self.coef_a
        self._sin_coef = scale * self.coef_b
        self._const = spec.R ** (-spec.m / 2.0) * self.a0
        # angular frequencies in unit-torus coordinates
        self._freqs = 2.0 * np.pi * spec.half_freqs.astype(float)

    @property
    def m(self):
        return self.spec.m

    @property
    def R(self):
        return self.spec.R

    def truncation_remainder_variance(self):
        """Certified bound on the variance of the omitted spectral remainder."""
        return self.spec.omitted_tail_bound()

    def eval_jet(self, theta, order=2):
        """Value, gradient, Hessian of F at torus points (rows of ``theta``).

        ``order`` selects how far to evaluate (0, 1 or 2); higher entries of
        the returned triple are None.  Points are reduced into [0,1)^m
        before the trigonometric sums to keep arguments small.
        """
        if order not in (0, 1, 2):
            raise ValueError(f"unsupported jet order {order}")
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if theta.shape[1] != self.m:
            raise ValueError("points have wrong dimension")
        theta = theta - np.floor(theta)
        return backend.trig_jet(
            theta, self._freqs, self._cos_coef, self._sin_coef, self._const, order
        )

    def grid_values(self, n):
        """F on the uniform n^m grid via inverse FFT.

        Requires n >= 2*lmax + 1 for alias-free placement; smaller n still
        evaluates but aliases the spectrum (a warning is raised).
        """
        return self._grid_fft(n, ())[0]

    def grid_jets(self, n, order=2):
        """Values and derivative grids up to ``order`` via FFT differentiation.

        Returns (value, grad, hess) with shapes (n^m grid), (m, grid),
        (d, grid) where hess rows follow the vech pair order.
        """
        from .covariance import vech_pairs

        dirs_list = [()]
        if order >= 1:
            dirs_list += [(j,) for j in range(self.m)]
        if order >= 2:
            dirs_list += [p for p in vech_pairs(self.m)]
        grids = self._grid_fft(n, *dirs_list)
        value = grids[0]
        grad = hess = None
        if order >= 1:
            grad = np.stack(grids[1 : 1 + self.m])
        if order >= 2:
            hess = np.stack(grids[1 + self.m :])
        return value, grad, hess

    def _grid_fft(self, n, *dirs_list):
        if n < 2:
            raise ValueError("grid needs at least 2 points per dimension")
        if n < 2 * self.spec.lmax + 1:
            import warnings

            warnings.warn(
                f"grid n={n} aliases the retained spectrum (lmax={self.spec.lmax})",
                stacklevel=3,
            )
        m = self.m
        shape = (n,) * m
        half = self.spec.half_freqs
        # complex coefficients of exp(2 pi i <l, t>): Z_l = a (A - i B)/sqrt(2),
        # already including the amplitude weight and R^{-m/2}
        z_half = (self._cos_coef - 1j * self._sin_coef) / 2.0
        out = []
        for dirs in dirs_list:
            coeff = np.zeros(shape, dtype=complex)
            mult = np.ones(len(half), dtype=complex)
            for d in dirs:
                mult = mult * (2j * np.pi * half[:, d])
            idx = tuple(np.mod(half[:, j], n) for j in range(m))
            np.add.at(coeff, idx, z_half * mult)
            # frequency -l carries the conjugate coefficient and multiplier
            idx_neg = tuple(np.mod(-half[:, j], n) for j in range(m))
            np.add.at(coeff, idx_neg, np.conj(z_half * mult))
            if not dirs:
                coeff[(0,) * m] += self._const
            out.append(np.real(np.fft.ifftn(coeff) * n**m))
        return out

    def coefficient_table(self):
        """Rows (l_1..l_m, A_l, B_l) plus the constant mode as the zero vector."""
        zero = np.zeros((1, self.m + 2))
        zero[0, self.m] = self.a0
        body = np.column_stack(
            [self.spec.half_freqs.astype(float), self.coef_a, self.coef_b]
        )
        return np.vstack([zero, body])

    def to_csv(self):
        buf = io.StringIO()
        cols = [f"l{j+1}" for j in range(self.m)] + ["coef_a", "coef_b"]
        buf.write(",".join(cols) + "\n")
        for row in self.coefficient_table():
            ints = ",".join(str(int(v)) for v in row[: self.m])
            buf.write(f"{ints},{float(row[self.m])!r},{float(row[self.m+1])!r}\n")
        return buf.getvalue()

    @classmethod
    def from_coefficients(cls, spec, a0, coef_a, coef_b, seed=-1):
        """Build a sample with injected coefficients (deterministic fields, replay)."""
        return cls(spec, seed, a0, coef_a, coef_b)


def sample_field(spec, seed):
    """Draw a field sample; a pure function of (spec, seed)."""
    a_half, b_half = rng.normal_pairs(seed, spec.half_freqs)
    a0_pair, _ = rng.normal_pairs(seed, np.zeros((1, spec.m), dtype=np.int64))
    return FieldSample(spec, seed, a0_pair[0], a_half, b_half)
