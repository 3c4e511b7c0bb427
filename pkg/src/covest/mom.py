"""Block partitioning and scalar median-of-means."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidInputError, InvalidParameterError
from .sampling import as_samples


@dataclass(frozen=True)
class BlockScheme:
    """Partition of the first ``n * m`` indices into `n` contiguous blocks.

    Indices ``n * m .. N - 1`` are left out so that every block has size `m`.
    """

    N: int
    delta: float
    n: int
    m: int

    @property
    def blocks(self):
        return [range(j * self.m, (j + 1) * self.m) for j in range(self.n)]

    @property
    def used(self):
        return self.n * self.m


def partition_blocks(N, delta):
    """Block scheme with ``n = ceil(log(1/delta))`` clamped to ``[1, N // 2]``."""
    if int(N) != N or N < 2:
        raise InvalidParameterError(f"need N >= 2 samples, got {N}")
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")
    N = int(N)
    # rounding guard: delta = exp(-k) must give exactly k blocks
    n = math.ceil(round(-math.log(delta), 9))
    n = min(max(n, 1), N // 2)
    return BlockScheme(N=N, delta=float(delta), n=n, m=N // n)


def lower_median(values):
    """The ceil(k/2)-th smallest of k values."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise InvalidInputError("median of an empty sequence")
    return float(v[(v.size - 1) // 2])


def majority_radius(values):
    """Smallest eps such that more than half of the |values| are <= eps."""
    v = np.sort(np.abs(np.asarray(values, dtype=float).ravel()))
    if v.size == 0:
        raise InvalidInputError("majority radius of an empty sequence")
    return float(v[v.size // 2])


def block_means(values, scheme):
    values = np.asarray(values, dtype=float).ravel()
    if values.size != scheme.N:
        raise InvalidInputError(f"expected {scheme.N} values, got {values.size}")
    return values[: scheme.used].reshape(scheme.n, scheme.m).mean(axis=1)


def mom_scalar(values, scheme):
    """Lower median of the block averages."""
    return lower_median(block_means(values, scheme))


def estimate_trace(x, delta):
    """Median-of-means estimate of E||X||^2 = Tr(Sigma)."""
    x = as_samples(x)
    if x.shape[0] < 2:
        raise InsufficientDataError("trace estimation needs at least two samples")
    sq = np.einsum("ij,ij->i", x, x)
    return mom_scalar(sq, partition_blocks(x.shape[0], delta))
