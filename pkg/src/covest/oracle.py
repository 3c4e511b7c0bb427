"""Exact-expectation oracles for finite-support laws.

Every expectation here is a weighted sum over the atoms of a
:class:`FiniteSupportDistribution`, so second- and fourth-order quantities
(covariances, truncation bias, weak variance, ``E (Z Z^T)^2``) are exact up
to rounding.  Gaussian and exponential coordinates are represented through
Gauss-Hermite / Gauss-Laguerre product rules, which reproduce every moment
used below exactly.

Suprema over the sphere are taken on a direction grid.  For the weak
variance only ``u`` is gridded: for fixed ``u`` the maximum over ``v`` of
``E (v^T (W - Sigma) u)^2`` is the top eigenvalue of
``E[(W - Sigma) u u^T (W - Sigma)]`` and is computed exactly.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg, nets
from .errors import InvalidInputError, InvalidParameterError

PROB_TOL = 1e-12
DEFAULT_STEP_DEG = 1.0
DEFAULT_SPHERE_POINTS = 10_000


@dataclass(frozen=True)
class FiniteSupportDistribution:
    """Law putting mass ``probs[k]`` on ``atoms[k]``.

    ``norm_equiv_L`` is the declared L4-L2 constant (exact or an upper
    bound), or None when unknown.
    """

    atoms: np.ndarray
    probs: np.ndarray
    norm_equiv_L: float = None
    name: str = ""

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        probs = np.asarray(self.probs, dtype=float).ravel()
        if atoms.ndim != 2 or atoms.shape[0] != probs.size or probs.size == 0:
            raise InvalidInputError("need one probability per atom")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOL:
            raise InvalidInputError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self):
        return self.atoms.shape[1]

    def reversed(self):
        return FiniteSupportDistribution(self.atoms[::-1], self.probs[::-1],
                                         self.norm_equiv_L, self.name)


def rademacher_law(alpha):
    """Independent coordinates ``alpha_i * eps_i`` on all 2^d sign patterns."""
    alpha = np.asarray(alpha, dtype=float).ravel()
    if np.any(alpha < 0):
        raise InvalidParameterError("alpha must be nonnegative")
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=alpha.size)))
    probs = np.full(len(signs), 1.0 / len(signs))
    return FiniteSupportDistribution(signs * alpha, probs, 3.0 ** 0.25,
                                     f"rademacher{tuple(alpha.tolist())}")


def _product_rule(nodes, weights, d):
    pts = np.array(list(itertools.product(nodes, repeat=d)))
    w = np.prod(np.array(list(itertools.product(weights, repeat=d))), axis=1)
    return pts, w / w.sum()


def gaussian_law(sigma, nodes=5):
    """N(0, sigma) through a Gauss-Hermite product rule (exact to degree 2*nodes-1)."""
    sigma = linalg.covariance(sigma)
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    pts, probs = _product_rule(x, w, sigma.shape[0])
    return FiniteSupportDistribution(pts @ linalg.cholesky(sigma).T, probs, 3.0 ** 0.25,
                                     "gaussian")


def exponential_law(scales, nodes=6):
    """Independent ``scale_i * (E_i - 1)`` through a Gauss-Laguerre product rule.

    The declared constant is the subexponential bound 2 used by the sampler.
    """
    scales = np.asarray(scales, dtype=float).ravel()
    x, w = np.polynomial.laguerre.laggauss(nodes)
    pts, probs = _product_rule(x - 1.0, w, scales.size)
    return FiniteSupportDistribution(pts * scales, probs, 2.0, "exponential")


def two_point_law(a, b, d=2):
    """Mass 1/2 on ``a * e_1`` and on ``b * e_1``; L computed in closed form."""
    atoms = np.zeros((2, d))
    atoms[:, 0] = (a, b)
    m2 = (a * a + b * b) / 2.0
    m4 = (a ** 4 + b ** 4) / 2.0
    return FiniteSupportDistribution(atoms, [0.5, 0.5], (m4 / m2 ** 2) ** 0.25,
                                     f"two-point({a},{b})")


def _truncated_atoms(p, alpha):
    if alpha is None:
        return p.atoms
    if not alpha > 0:
        raise InvalidParameterError("truncation level must be positive")
    keep = np.sqrt(np.einsum("ad,ad->a", p.atoms, p.atoms)) <= alpha
    return np.where(keep[:, None], p.atoms, 0.0)


def exact_second_moment(p, alpha=None):
    """``E X X^T``, or ``E X~ X~^T`` for the law truncated at `alpha`."""
    x = _truncated_atoms(p, alpha)
    m = np.einsum("a,ad,ae->de", p.probs, x, x)
    return np.triu(m) + np.triu(m, 1).T


def direction_grid(d, resolution=None, rng=None):
    """Unit directions covering the sphere up to sign.

    d = 2: multiples of `resolution` degrees (default 1).  d = 3:
    `resolution` Fibonacci-sphere points (default 10^4).  d > 3: that many
    random directions (Monte Carlo, needs `rng`).
    """
    if d == 1:
        return np.ones((1, 1)), "exact-enumeration"
    if d == 2:
        return nets.half_circle(resolution or DEFAULT_STEP_DEG), "grid-search"
    n = int(resolution or DEFAULT_SPHERE_POINTS)
    if d == 3:
        return nets.fibonacci_sphere(n), "grid-search"
    g = np.random.default_rng(rng).standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True), "monte-carlo"


def _fourth_moments(p, dirs):
    proj = p.atoms @ dirs.T
    return p.probs @ proj ** 4


@dataclass
class WeakVarianceReport:
    R_value: float
    v_value: float
    u: np.ndarray
    v: np.ndarray
    method: str


def weak_variance(p, resolution=None, rng=None):
    """Grid supremum of ``E (v^T (X X^T - Sigma) u)^2`` (reported as its root).

    The fourth-moment supremum ``v`` is computed on the same grid plus the
    two maximising directions, which guarantees ``R_value <= v_value``.
    """
    dirs, method = direction_grid(p.dim, resolution, rng)
    sigma = exact_second_moment(p)
    centered = np.einsum("ad,ae->ade", p.atoms, p.atoms) - sigma
    w = np.einsum("ade,ke->kad", centered, dirs)
    c = np.einsum("a,kad,kae->kde", p.probs, w, w)
    lam, vec = np.linalg.eigh(c)
    top = lam[:, -1]
    k = int(np.argmax(top))
    u_star, v_star = dirs[k], vec[k, :, -1]
    r2 = max(float(top[k]), 0.0)
    m4 = _fourth_moments(p, np.vstack([dirs, u_star, v_star]))
    return WeakVarianceReport(math.sqrt(r2), math.sqrt(float(m4.max())), u_star, v_star, method)


def fourth_moment_sup(p, resolution=None, rng=None):
    """Grid value of ``v(X) = sqrt(sup_v E <X, v>^4)``."""
    dirs, _ = direction_grid(p.dim, resolution, rng)
    return math.sqrt(float(_fourth_moments(p, dirs).max()))


def norm_equivalence_constant(p, resolution=None, rng=None):
    """Grid estimate (from below) of the law's L4-L2 constant."""
    dirs, _ = direction_grid(p.dim, resolution, rng)
    proj = p.atoms @ dirs.T
    m2 = p.probs @ proj ** 2
    m4 = p.probs @ proj ** 4
    ok = m2 > 1e-14 * max(m2.max(), 1e-300)
    return float(np.max(m4[ok] / m2[ok] ** 2)) ** 0.25


def matrix_variance_B(p, alpha):
    """``||B||`` and ``r(B)`` for ``B = E (Z Z^T)^2``, ``Z`` truncated at `alpha`.

    ``r(B)`` is None when B vanishes.
    """
    z = _truncated_atoms(p, alpha)
    sq = np.einsum("ad,ad->a", z, z)
    b = np.einsum("a,ad,ae->de", p.probs * sq, z, z)
    b = np.triu(b) + np.triu(b, 1).T
    norm = linalg.operator_norm(b)
    if norm == 0.0:
        return 0.0, None
    return norm, linalg.trace(b) / norm


def bernstein_ratio(p, alpha):
    """``||B|| / (||Sigma~|| Tr Sigma~)``, the constant in the lower bound for ||B||."""
    norm_b, _ = matrix_variance_B(p, alpha)
    st = exact_second_moment(p, alpha)
    denom = linalg.operator_norm(st) * linalg.trace(st)
    return norm_b / denom if denom > 0 else math.nan


@dataclass
class TruncationBiasTable:
    """Exact truncation bias per level, with the shape checks."""

    alphas: list
    op_bias: list
    trace_bias: list
    scaled_op: list
    scaled_trace: list
    bound: float
    zero_beyond_support: bool
    monotone: bool
    bounded: bool
    inconclusive: bool = False
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return (not self.inconclusive) and self.zero_beyond_support and self.monotone and self.bounded

    def rows(self):
        return list(zip(self.alphas, self.op_bias, self.trace_bias, self.scaled_op, self.scaled_trace))


def verify_truncation_bias(p, alphas, L=None):
    """Tabulate ``||Sigma~ - Sigma||`` and ``|Tr Sigma~ - Tr Sigma|`` over `alphas`.

    Checks that both vanish once alpha reaches the largest atom norm, that
    they do not increase with alpha, and that ``alpha^2 * bias`` stays below
    ``L^3 ||Sigma|| Tr(Sigma)`` (resp. ``L^3 Tr(Sigma)^2``), the constant the
    Cauchy-Schwarz/Markov argument yields.  `L` defaults to the law's
    declared constant.
    """
    alphas = sorted(float(a) for a in alphas)
    if L is None:
        L = p.norm_equiv_L if p.norm_equiv_L is not None else norm_equivalence_constant(p)
    sigma = exact_second_moment(p)
    norm_s, tr_s = linalg.operator_norm(sigma), linalg.trace(sigma)
    op, tr = [], []
    for a in alphas:
        st = exact_second_moment(p, a)
        op.append(linalg.operator_norm(st - sigma))
        tr.append(abs(linalg.trace(st) - tr_s))
    scale_op = norm_s * tr_s
    scaled_op = [a * a * b / scale_op if scale_op > 0 else 0.0 for a, b in zip(alphas, op)]
    scaled_tr = [a * a * b / tr_s ** 2 if tr_s > 0 else 0.0 for a, b in zip(alphas, tr)]

    norms = np.sqrt(np.einsum("ad,ad->a", p.atoms, p.atoms))[p.probs > 0]
    top = norms.max()
    zero = all(o == 0.0 and t == 0.0 for a, o, t in zip(alphas, op, tr) if a >= top)
    tol = 1e-12 * max(norm_s, tr_s, 1e-300)
    mono = all(op[i + 1] <= op[i] + tol and tr[i + 1] <= tr[i] + tol for i in range(len(alphas) - 1))
    bound = L ** 3
    bounded = all(s <= bound + 1e-12 for s in scaled_op + scaled_tr)
    table = TruncationBiasTable(alphas, op, tr, scaled_op, scaled_tr, bound, zero, mono, bounded)
    if np.unique(np.round(norms, 12)).size < 2:
        table.inconclusive = True
        table.notes.append("all atoms share one norm: truncation is all-or-nothing")
    return table


@dataclass
class LowerBoundCheck:
    passed: bool
    margin: float
    bound: float
    R_value: float


def lower_bound_check(p, resolution=None):
    """Check ``R >= sqrt((r(Sigma) - 1) / d) * ||Sigma||`` with R from the grid."""
    sigma = exact_second_moment(p)
    norm_s = linalg.operator_norm(sigma)
    r = linalg.trace(sigma) / norm_s
    bound = math.sqrt(max(r - 1.0, 0.0) / p.dim) * norm_s
    R = weak_variance(p, resolution).R_value
    return LowerBoundCheck(R >= bound - 1e-9, R - bound, bound, R)
