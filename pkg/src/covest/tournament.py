"""Median-of-means tournament covariance estimator.

The estimator splits the (truncated) sample into blocks, forms the block
second-moment matrices ``M_j`` and looks for a matrix ``Y`` that, for every
test direction pair ``(u, v)``, agrees with a strict majority of blocks:
``|v^T (M_j - Y) u| <= eps``.  The smallest such ``eps`` is the *depth* of
``Y``.  The sphere of direction pairs is replaced by a finite
:class:`DirectionSet` and the search over all matrices by a finite
candidate list; :func:`select_estimate` returns the candidate of least
depth.

:func:`estimate_covariance` chains three such computations on disjoint
thirds of the sample: a median-of-means trace estimate, a tournament at
truncation ``kappa * sqrt(trace)`` whose operator norm estimates
``||Sigma||``, and the final tournament at the level
``(trace * norm * N / gamma) ** (1/4)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg, nets
from .errors import (
    CovestError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
    StageError,
    UnsupportedDimensionError,
)
from .mom import estimate_trace, lower_median, partition_blocks
from .sampling import RandomStream, as_generator, as_samples, symmetrize

SUBGAUSSIAN = "subgaussian"
HEAVY = "heavy"
_MODES = {SUBGAUSSIAN: SUBGAUSSIAN, HEAVY: HEAVY, "heavy-tailed": HEAVY}


@dataclass(frozen=True)
class DirectionSet:
    """Finite list of unit direction pairs ``(u[k], v[k])`` with provenance tags."""

    u: np.ndarray
    v: np.ndarray
    tags: tuple

    def __len__(self):
        return self.u.shape[0]

    def count(self, tag):
        return sum(t == tag for t in self.tags)


@dataclass
class PipelineState:
    phi1: float
    phi2: float
    beta: float
    gamma: float
    mode: str
    bounds: tuple  # (start, stop) row ranges of the three stage samples
    gates: dict = field(default_factory=dict)


@dataclass
class EstimateReport:
    estimate: np.ndarray
    depth: float
    config: dict
    state: PipelineState = None

    def summary(self):
        """Flat key-value view used by the CLI."""
        out = {"depth": self.depth}
        out.update(self.config)
        if self.state is not None:
            s = self.state
            out.update(phi1=s.phi1, phi2=s.phi2, beta=s.beta, gamma=s.gamma, mode=s.mode)
            out.update({f"gate.{k}": v for k, v in s.gates.items()})
        return out


@dataclass(frozen=True)
class PipelineConfig:
    """Tuning knobs of :func:`estimate_covariance`.

    ``frame`` is an orthogonal matrix whose columns replace the standard
    basis wherever the procedure is coordinate dependent (basis direction
    pairs, the coordinatewise-median candidate, random and grid directions).
    Rotating the data by Q and passing ``frame=Q`` rotates the estimate by Q.
    ``c_prime`` only scales the sample-size conditions that are *reported*
    in the result; they are never enforced.
    """

    symmetrize: bool = True
    kappa: float = 4.0
    n_random: int = None
    policy: str = "grid-net"
    seed: int = 0
    frame: np.ndarray = None
    c_prime: float = 1.0


def truncate_samples(x, alpha):
    """Zero every row with Euclidean norm strictly above `alpha`."""
    x = as_samples(x)
    if not alpha > 0:
        raise InvalidParameterError(f"truncation level must be positive, got {alpha}")
    keep = np.sqrt(np.einsum("ij,ij->i", x, x)) <= alpha
    return np.where(keep[:, None], x, 0.0)


def _mirror(a):
    return np.triu(a) + np.swapaxes(np.triu(a, 1), -1, -2)


def second_moment(x):
    """``(1/N) sum_i x_i x_i^T`` as an exactly symmetric matrix."""
    x = as_samples(x)
    return _mirror(x.T @ x / x.shape[0])


def empirical_covariance(x):
    """Plain sample second-moment matrix (the data are taken to be centered)."""
    return second_moment(x)


def block_matrices(x, scheme):
    """Stack of block second-moment matrices, shape ``(n, d, d)``."""
    x = as_samples(x)
    if x.shape[0] != scheme.N:
        raise InvalidInputError(f"scheme expects {scheme.N} samples, got {x.shape[0]}")
    xb = x[: scheme.used].reshape(scheme.n, scheme.m, x.shape[1])
    return _mirror(np.einsum("jmd,jme->jde", xb, xb) / scheme.m)


def coordinate_median(blocks, frame=None):
    """Entrywise lower median of the block matrices, in the given frame."""
    blocks = np.asarray(blocks, dtype=float)
    if frame is not None:
        blocks = np.einsum("di,jde,ek->jik", frame, blocks, frame)
    med = np.sort(blocks, axis=0)[(blocks.shape[0] - 1) // 2]
    if frame is not None:
        med = frame @ med @ frame.T
    return _mirror(med)


def default_candidates(blocks, truncated, frame=None):
    """Coordinatewise median, every block matrix, then the truncated mean."""
    blocks = np.asarray(blocks)
    return [coordinate_median(blocks, frame), *blocks, second_moment(truncated)]


def _unit_rows(a):
    a = np.asarray(a, dtype=float)
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    return a / norms


def build_direction_set(d, rng=None, policy="grid-net", n_random=None,
                        candidates=(), frame=None):
    """Finite surrogate for the set of all unit direction pairs.

    Union, in this order, of: every basis pair ``(f_i, f_j)``; `n_random`
    random pairs (default ``50 d^2``) drawn uniformly on the sphere; every
    pair of eigenvectors of each candidate matrix; and, when ``policy ==
    "grid-net"`` and ``d <= 3``, all pairs from a 1/4-net.  `f_i` are the
    columns of `frame` (identity by default).  Pairs are deduplicated up to
    the sign of either vector.
    """
    if d < 1:
        raise InvalidParameterError("dimension must be positive")
    if policy not in ("grid-net", "stochastic"):
        raise InvalidParameterError(f"unknown direction policy {policy!r}")
    basis = np.eye(d) if frame is None else np.asarray(frame, dtype=float)
    us, vs, tags = [], [], []

    def add(u, v, tag):
        us.append(u)
        vs.append(v)
        tags.extend([tag] * u.shape[0])

    i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    add(basis.T[i.ravel()], basis.T[j.ravel()], "basis")

    k = 50 * d * d if n_random is None else int(n_random)
    if k > 0:
        gen = as_generator(0 if rng is None else rng)
        g = gen.standard_normal((2, k, d))
        u, v = _unit_rows(g[0]), _unit_rows(g[1])
        if frame is not None:
            u, v = u @ basis.T, v @ basis.T
        add(u, v, "random")

    for c in candidates:
        vec = linalg.eigensystem(c).vectors.T
        add(vec[i.ravel()], vec[j.ravel()], "eigen")

    if policy == "grid-net" and d <= 3:
        half = nets.unique_up_to_sign(nets.quarter_net(d))
        if frame is not None:
            half = half @ basis.T
        a, b = np.meshgrid(np.arange(len(half)), np.arange(len(half)), indexing="ij")
        add(half[a.ravel()], half[b.ravel()], "grid-net")

    u = nets.canonical_sign(np.vstack(us))
    v = nets.canonical_sign(np.vstack(vs))
    _, idx = np.unique(np.round(np.hstack([u, v]), 12), axis=0, return_index=True)
    idx = np.sort(idx)
    return DirectionSet(u[idx], v[idx], tuple(tags[t] for t in idx))


def _projections(mats, dirs):
    """``v_k^T A u_k`` for every matrix A in `mats` and pair k."""
    mats = np.asarray(mats, dtype=float)
    return np.einsum("kd,jdk->jk", dirs.v, mats @ dirs.u.T)


def _depths(cands, blocks, dirs):
    pb = _projections(blocks, dirs)  # (n, K)
    pc = _projections(cands, dirs)  # (C, K)
    gap = np.abs(pb[None, :, :] - pc[:, None, :])
    n = pb.shape[0]
    radius = np.partition(gap, n // 2, axis=1)[:, n // 2, :]
    return radius.max(axis=1)


def tournament_depth(y, blocks, dirs):
    """Largest, over direction pairs, majority radius of ``v^T (M_j - Y) u``."""
    y = np.asarray(y, dtype=float)
    blocks = np.asarray(blocks, dtype=float)
    if y.shape != blocks.shape[1:] or y.shape[0] != dirs.u.shape[1]:
        raise InvalidInputError("dimension mismatch between candidate, blocks and directions")
    return float(_depths(y[None], blocks, dirs)[0])


def select_estimate(cands, blocks, dirs):
    """Candidate of least depth; ties go to the earliest candidate."""
    if len(cands) == 0:
        raise InvalidInputError("candidate set is empty")
    cands = np.asarray(cands, dtype=float)
    blocks = np.asarray(blocks, dtype=float)
    if cands.shape[1:] != blocks.shape[1:] or cands.shape[1] != dirs.u.shape[1]:
        raise InvalidInputError("dimension mismatch between candidates, blocks and directions")
    depths = _depths(cands, blocks, dirs)
    best = int(np.argmin(depths))
    return EstimateReport(
        estimate=cands[best].copy(),
        depth=float(depths[best]),
        config={"n_blocks": blocks.shape[0], "n_dirs": len(dirs),
                "n_candidates": cands.shape[0], "winner": best},
    )


def run_tournament(x, alpha, delta, rng=None, policy="grid-net", n_random=None, frame=None):
    """Truncate at `alpha`, block, build candidates and directions, select."""
    x = as_samples(x)
    scheme = partition_blocks(x.shape[0], delta)
    xt = truncate_samples(x, alpha)
    blocks = block_matrices(xt, scheme)
    cands = default_candidates(blocks, xt, frame)
    dirs = build_direction_set(x.shape[1], rng, policy, n_random, cands, frame)
    report = select_estimate(cands, blocks, dirs)
    report.config.update(delta=scheme.delta, alpha=float(alpha), n=scheme.n, m=scheme.m)
    return report


def choose_gamma(mode, r_hat):
    """1 in the subgaussian case, ``max(1, log r_hat)`` under heavy tails."""
    mode = _check_mode(mode)
    if mode == SUBGAUSSIAN:
        return 1.0
    return max(1.0, math.log(max(r_hat, 1.0)))


def choose_beta(phi1, phi2, N, gamma):
    """Final truncation level ``(phi1 * phi2 * N / gamma) ** (1/4)``."""
    if not (phi1 > 0 and phi2 > 0 and N > 0 and gamma > 0):
        raise InvalidParameterError(
            f"truncation level needs positive inputs, got phi1={phi1}, phi2={phi2}, N={N}, gamma={gamma}")
    return (phi1 * phi2 * N / gamma) ** 0.25


def estimate_norm_stage2(x, phi1, delta, kappa=4.0, rng=None, policy="grid-net",
                         n_random=None, frame=None):
    """Operator norm of the tournament estimate at truncation ``kappa * sqrt(phi1)``.

    Returns ``(phi2, report)``.
    """
    if not phi1 > 0:
        raise InvalidParameterError(f"trace estimate must be positive, got {phi1}")
    report = run_tournament(x, kappa * math.sqrt(phi1), delta, rng, policy, n_random, frame)
    return linalg.operator_norm(report.estimate), report


def _check_mode(mode):
    try:
        return _MODES[mode]
    except KeyError:
        raise InvalidParameterError(f"mode must be 'subgaussian' or 'heavy', got {mode!r}") from None


def _run_stage(stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except CovestError as exc:
        raise StageError(stage, exc) from exc


def estimate_covariance(x, delta, mode=SUBGAUSSIAN, config=None):
    """Three-stage robust covariance estimate.

    The (optionally symmetrized) sample is split into consecutive thirds;
    any remainder goes to the last one.  Stage 1 estimates the trace,
    stage 2 the operator norm, stage 3 runs the tournament at the
    resulting truncation level.
    """
    config = config or PipelineConfig()
    mode = _check_mode(mode)
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")
    x = as_samples(x)
    if config.symmetrize:
        if x.shape[0] < 12:
            raise InsufficientDataError("need at least 12 samples with symmetrization")
        x = symmetrize(x)
    if x.shape[0] < 6:
        raise InsufficientDataError("need at least 6 samples")
    third = x.shape[0] // 3
    bounds = ((0, third), (third, 2 * third), (2 * third, x.shape[0]))
    x1, x2, x3 = (x[a:b] for a, b in bounds)
    stream = RandomStream(config.seed)
    frame = None if config.frame is None else np.asarray(config.frame, dtype=float)

    phi1 = _run_stage(1, estimate_trace, x1, delta)
    phi2, _ = _run_stage(2, estimate_norm_stage2, x2, phi1, delta, config.kappa,
                         stream.substream(2), config.policy, config.n_random, frame)
    r_hat = max(1.0, phi1 / phi2) if phi2 > 0 else 1.0
    gamma = choose_gamma(mode, r_hat)
    n3 = x3.shape[0]
    beta = _run_stage(3, choose_beta, phi1, phi2, n3, gamma)
    report = _run_stage(3, run_tournament, x3, beta, delta, stream.substream(3),
                        config.policy, config.n_random, frame)

    log_inv = math.log(1.0 / delta)
    if mode == SUBGAUSSIAN:
        complexity = r_hat
    else:
        complexity = r_hat * math.log(r_hat)
    gates = {
        "stage1": x1.shape[0] >= config.c_prime * log_inv,
        "stage3": n3 >= config.c_prime * (complexity + log_inv),
    }
    report.state = PipelineState(phi1=phi1, phi2=phi2, beta=beta, gamma=gamma, mode=mode,
                                 bounds=bounds, gates=gates)
    report.config.update(symmetrize=config.symmetrize, kappa=config.kappa, seed=config.seed)
    return report


def epsilon_net_norm(x, delta):
    """Norm estimate from median-of-means quadratic forms over a 1/4-net.

    For every net direction u, ``E <X, u>^2`` is estimated by median of
    means at confidence ``delta / |net|``; the maximum is doubled to turn
    the net supremum into an upper estimate of ``||Sigma||``.
    """
    x = as_samples(x)
    d = x.shape[1]
    if d > 3:
        raise UnsupportedDimensionError(f"epsilon-net norm estimate supports d <= 3, got d={d}")
    net = nets.quarter_net(d)
    scheme = partition_blocks(x.shape[0], delta / len(net))
    half = nets.unique_up_to_sign(net)
    sq = (x @ half.T) ** 2
    means = sq[: scheme.used].reshape(scheme.n, scheme.m, -1).mean(axis=1)
    best = max(lower_median(means[:, k]) for k in range(half.shape[0]))
    return 2.0 * best
