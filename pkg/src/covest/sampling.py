"""Seeded generators for the distributions used in the experiments.

All generators draw from a :class:`RandomStream`, a (seed, stream-id) pair
that maps onto numpy's PCG64 bit generator via ``SeedSequence(seed,
spawn_key=(stream_id,))``.  Normal variates come from numpy's ziggurat
``standard_normal``; under numpy's stream-compatibility policy the same pair
reproduces the same samples on every platform.

Sample sets are ``(N, d)`` float arrays, one sample per row.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import InsufficientDataError, InvalidInputError, InvalidParameterError

_U64 = 2**64


@dataclass(frozen=True)
class RandomStream:
    """Identifies one reproducible stream of random numbers."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) < _U64:
                raise InvalidParameterError(f"{name} must be a 64-bit unsigned integer")

    def generator(self):
        """Fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(seq))

    def substream(self, k):
        """Independent child stream, e.g. for data vs. direction draws."""
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), int(k)))
        return np.random.Generator(np.random.PCG64(seq))


def as_generator(rng):
    """Accept a RandomStream, a numpy Generator or an int seed."""
    if isinstance(rng, RandomStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RandomStream(int(rng)).generator()


def as_samples(x):
    """Validate and return an ``(N, d)`` float array of samples."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] < 1:
        raise InvalidInputError(f"samples must be a 2-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("samples contain non-finite entries")
    return x


def _check_count(n):
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"sample count must be a positive integer, got {n}")
    return int(n)


def sample_gaussian(sigma, n, rng):
    """Centered gaussian vectors ``L g`` with ``L = cholesky(sigma)``."""
    n = _check_count(n)
    low = linalg.cholesky(linalg.covariance(sigma))
    g = as_generator(rng).standard_normal((n, low.shape[0]))
    return g @ low.T


def student_t_kurtosis(nu):
    return (3.0 * nu - 6.0) / (nu - 4.0)


def sample_student_t(nu, sigma, n, rng):
    """Multivariate t vectors with covariance `sigma`.

    Draws ``Z / sqrt(V / nu)`` with ``Z ~ N(0, sigma (nu - 2) / nu)`` and
    ``V`` the sum of `nu` squared standard normals, so that the returned
    vectors have covariance exactly `sigma`.
    """
    if int(nu) != nu or nu <= 4:
        raise InvalidParameterError(f"nu must be an integer > 4, got {nu}")
    nu = int(nu)
    n = _check_count(n)
    gen = as_generator(rng)
    sigma = linalg.covariance(sigma)
    z = sample_gaussian(sigma * ((nu - 2) / nu), n, gen)
    chi2 = np.sum(gen.standard_normal((n, nu)) ** 2, axis=1)
    return z / np.sqrt(chi2 / nu)[:, None]


def sample_subexponential(scales, n, rng):
    """Independent coordinates ``scale_i * (E_i - 1)`` with unit exponentials E_i."""
    scales = np.asarray(scales, dtype=float).ravel()
    if scales.size == 0 or not np.all(scales > 0) or not np.all(np.isfinite(scales)):
        raise InvalidParameterError("scales must be positive and finite")
    n = _check_count(n)
    e = as_generator(rng).standard_exponential((n, scales.size))
    return (e - 1.0) * scales


def _check_decreasing(alpha):
    alpha = np.asarray(alpha, dtype=float).ravel()
    if alpha.size == 0 or np.any(alpha < 0) or np.any(np.diff(alpha) >= 0):
        raise InvalidParameterError("alpha must be strictly decreasing and nonnegative")
    return alpha


def sample_rademacher_diag(alpha, n, rng):
    """Coordinates ``alpha_i * eps_i`` with independent fair signs."""
    alpha = _check_decreasing(alpha)
    n = _check_count(n)
    signs = as_generator(rng).integers(0, 2, size=(n, alpha.size)) * 2.0 - 1.0
    return signs * alpha


def symmetrize(x):
    """Pairwise differences ``(X_{2k-1} - X_{2k}) / sqrt(2)``.

    Consecutive non-overlapping pairs; an odd trailing sample is dropped.
    The result has the same covariance as the input law and is symmetric.
    """
    x = as_samples(x)
    if x.shape[0] < 2:
        raise InsufficientDataError("symmetrization needs at least two samples")
    k = x.shape[0] // 2
    return (x[0:2 * k:2] - x[1:2 * k:2]) / math.sqrt(2.0)


# The L4-L2 constant of a centered unit exponential as a subexponential
# variable: sup_{p>=2} ||E-1||_p / (p ||E-1||_2) is attained at p = 2.
SUBEXP_L0 = 0.5


@dataclass(frozen=True)
class DistributionSpec:
    """Closed-form description of a sampling law.

    Build instances with the ``gaussian``, ``student_t``, ``subexponential``
    and ``rademacher_diag`` constructors.  ``true_covariance`` is exact;
    ``norm_equiv_L`` is exact for gaussian and student-t and an upper bound
    for the other two families.
    """

    kind: str
    params: dict = field(compare=False)

    @classmethod
    def gaussian(cls, sigma):
        return cls("gaussian", {"sigma": linalg.covariance(sigma)})

    @classmethod
    def student_t(cls, nu, sigma):
        if int(nu) != nu or nu <= 4:
            raise InvalidParameterError(f"nu must be an integer > 4, got {nu}")
        return cls("student_t", {"nu": int(nu), "sigma": linalg.covariance(sigma)})

    @classmethod
    def subexponential(cls, scales):
        scales = np.asarray(scales, dtype=float).ravel()
        if scales.size == 0 or not np.all(scales > 0):
            raise InvalidParameterError("scales must be positive")
        return cls("subexponential", {"scales": scales})

    @classmethod
    def rademacher_diag(cls, alpha):
        return cls("rademacher_diag", {"alpha": _check_decreasing(alpha)})

    @property
    def dim(self):
        return self.true_covariance.shape[0]

    @property
    def true_covariance(self):
        p = self.params
        if self.kind in ("gaussian", "student_t"):
            return p["sigma"].copy()
        if self.kind == "subexponential":
            return np.diag(p["scales"] ** 2)
        return np.diag(p["alpha"] ** 2)

    @property
    def norm_equiv_L(self):
        if self.kind == "gaussian":
            return 3.0 ** 0.25
        if self.kind == "student_t":
            return student_t_kurtosis(self.params["nu"]) ** 0.25
        if self.kind == "subexponential":
            # upper bound 4 * L0; the exact sup-kurtosis value is 9 ** 0.25
            return 4.0 * SUBEXP_L0
        # sup of marginal kurtosis of independent signs is below 3
        return 3.0 ** 0.25

    def sample(self, n, rng):
        p = self.params
        if self.kind == "gaussian":
            return sample_gaussian(p["sigma"], n, rng)
        if self.kind == "student_t":
            return sample_student_t(p["nu"], p["sigma"], n, rng)
        if self.kind == "subexponential":
            return sample_subexponential(p["scales"], n, rng)
        return sample_rademacher_diag(p["alpha"], n, rng)


def write_samples(x, fh, header=False):
    """Write samples as CSV, one row per sample, 17 significant digits."""
    x = as_samples(x)
    writer = csv.writer(fh, lineterminator="\n")
    if header:
        writer.writerow([f"x{i + 1}" for i in range(x.shape[1])])
    for row in x:
        writer.writerow([f"{v:.17g}" for v in row])


def read_samples(fh):
    """Read CSV samples; a non-numeric first row is treated as a header."""
    if isinstance(fh, (str, bytes)):
        fh = io.StringIO(fh)
    rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise InsufficientDataError("no samples in input")
    try:
        x = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise InvalidInputError(f"malformed sample row: {exc}") from None
    if x.ndim != 2:
        raise InvalidInputError("rows have inconsistent lengths")
    return as_samples(x)
