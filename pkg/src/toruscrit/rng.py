"""Counter-based Gaussian draws keyed by lattice vector.

The Fourier coefficients of a field sample must be a pure function of
(seed, lattice vector): reruns reproduce the same sample no matter how work
is scheduled, and enlarging the retained spectrum refines an existing
sample instead of reshuffling it.  A stateless SplitMix64 finalizer mixes
the seed with the lattice coordinates; two mixed words per vector feed a
Box-Muller transform.  The construction below is part of the on-disk
format contract (seeds recorded in manifests replay exactly) and must not
change between versions.
"""

import numpy as np

_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
# distinct tags for the two words feeding Box-Muller
_TAG_A = np.uint64(0xA0761D6478BD642F)
_TAG_B = np.uint64(0xE7037ED1A0B428DB)

_TWO53 = float(2**53)


def _mix64(x):
    """SplitMix64 finalizer, elementwise on uint64 arrays."""
    x = x.copy()
    with np.errstate(over="ignore"):
        x ^= x >> np.uint64(30)
        x *= _MUL1
        x ^= x >> np.uint64(27)
        x *= _MUL2
        x ^= x >> np.uint64(31)
    return x


def _as_u64(value):
    return np.uint64(int(value) & 0xFFFFFFFFFFFFFFFF)


def derive_seed(*parts):
    """Fold integers or strings into a 64-bit sub-seed, order-sensitively.

    Used to hand independent, reproducible seeds to trials, streams, and
    Monte Carlo batches: derive_seed(master, R_index, trial), etc.
    """
    h = np.uint64(0x243F6A8885A308D3)
    with np.errstate(over="ignore"):
        for part in parts:
            if isinstance(part, str):
                for byte in part.encode("utf8"):
                    h = _mix64(np.atleast_1d(h ^ np.uint64(byte) ^ _GOLDEN))[0]
            else:
                h = _mix64(np.atleast_1d(h ^ _as_u64(int(part)) ^ _GOLDEN))[0]
    return int(h)


def normal_pairs(seed, lattice):
    """Two independent standard-normal draws per lattice vector.

    Parameters
    ----------
    seed : int
        64-bit reproducibility token.
    lattice : (n, m) integer array
        Lattice vectors; negative coordinates are folded through their
        two's-complement image, so every vector gets a distinct key.

    Returns
    -------
    (a, b) : pair of (n,) float arrays
    """
    lattice = np.asarray(lattice, dtype=np.int64)
    if lattice.ndim == 1:
        lattice = lattice[:, None]
    n, m = lattice.shape
    with np.errstate(over="ignore"):
        h = np.full(n, _as_u64(int(seed)), dtype=np.uint64)
        h = _mix64(h ^ _GOLDEN)
        for j in range(m):
            col = lattice[:, j].astype(np.uint64)
            h = _mix64(h ^ col ^ (np.uint64(j + 1) * _GOLDEN))
        wa = _mix64(h ^ _TAG_A)
        wb = _mix64(h ^ _TAG_B)
    # uniforms strictly inside (0, 1): top 53 bits, centered on half-steps
    u1 = ((wa >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO53
    u2 = ((wb >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO53
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    return radius * np.cos(angle), radius * np.sin(angle)
