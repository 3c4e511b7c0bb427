"""Oracle suite behind ``covest verify``."""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg, nets, oracle

DEFAULT_ALPHA_GRID = (1.5, 2.0, 2.5, 3.0)


def _laws():
    return {
        "rademacher-1-1": lambda: oracle.rademacher_law([1.0, 1.0]),
        "rademacher-1-0.5": lambda: oracle.rademacher_law([1.0, 0.5]),
        "rademacher-3d": lambda: oracle.rademacher_law([1.0, 0.9, 0.8]),
        "gaussian-1d": lambda: oracle.gaussian_law([[1.0]]),
        "gaussian-2d": lambda: oracle.gaussian_law(np.diag([2.0, 1.0])),
        "exponential-2d": lambda: oracle.exponential_law([1.0, 0.5]),
        "two-point": lambda: oracle.two_point_law(1.0, 3.0),
    }


LAWS = tuple(_laws())


@dataclass
class CheckResult:
    law: str
    check: str
    status: str  # pass | fail | skip | info
    detail: str = ""

    @property
    def failed(self):
        return self.status == "fail"


def _mark(ok):
    return "pass" if ok else "fail"


def check_law(name, alpha_grid=DEFAULT_ALPHA_GRID, resolution=None):
    p = _laws()[name]()
    out = []
    sigma = oracle.exact_second_moment(p)
    norm_s = linalg.operator_norm(sigma)
    wv = oracle.weak_variance(p, resolution)
    R, v = wv.R_value, wv.v_value
    L = p.norm_equiv_L
    cap = L * L * norm_s
    out.append(CheckResult(name, "R <= v <= L^2 ||Sigma||",
                           _mark(R <= v + 1e-12 and v <= cap + 1e-9),
                           f"R={R:.6g} v={v:.6g} L^2||S||={cap:.6g}"))

    lb = oracle.lower_bound_check(p, resolution)
    out.append(CheckResult(name, "R >= sqrt((r-1)/d) ||Sigma||", _mark(lb.passed),
                           f"bound={lb.bound:.6g} margin={lb.margin:.3g}"))

    if name.startswith("rademacher"):
        a = np.sqrt(np.sort(np.diagonal(sigma))[::-1])
        top = math.sqrt(2.0) * a[0] * a[1]
        out.append(CheckResult(name, "R <= sqrt(2) a1 a2", _mark(R <= top + 1e-12),
                               f"R={R:.6g} bound={top:.6g}"))
    if name == "rademacher-1-1":
        out.append(CheckResult(name, "R = 1 (closed form)", _mark(abs(R - 1.0) <= 1e-3),
                               f"R={R:.12g}"))

    rev = oracle.weak_variance(p.reversed(), resolution)
    same = abs(rev.R_value - R) <= 1e-12 and abs(rev.v_value - v) <= 1e-12
    out.append(CheckResult(name, "atom order independence", _mark(same),
                           f"dR={abs(rev.R_value - R):.2g}"))

    table = oracle.verify_truncation_bias(p, alpha_grid)
    if table.inconclusive:
        out.append(CheckResult(name, "truncation bias shape", "skip", "; ".join(table.notes)))
    else:
        out.append(CheckResult(name, "truncation bias shape", _mark(table.passed),
                               f"max alpha^2 bias={max(table.scaled_op + table.scaled_trace):.4g} "
                               f"bound={table.bound:.4g}"))

    alpha = max(alpha_grid)
    ratio = oracle.bernstein_ratio(p, alpha)
    out.append(CheckResult(name, f"||B|| / (||S~|| Tr S~) at alpha={alpha:g}", "info",
                           f"{ratio:.6g}"))
    return out


def check_net_bracket(count=100, seed=0):
    """sup over 1/4-net pairs <= ||A|| <= 2 sup, for random symmetric 2x2 and 3x3."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    bad = 0
    for i in range(count):
        d = 2 + i % 2
        g = rng.standard_normal((d, d))
        a = (g + g.T) / 2.0
        net = nets.quarter_net(d)
        sup = float(np.max(np.abs(net @ a @ net.T)))
        norm = linalg.operator_norm(a)
        if not (sup <= norm + 1e-12 and norm <= 2.0 * sup):
            bad += 1
        worst = min(worst, 2.0 * sup / norm)
    return CheckResult("random-symmetric", "1/4-net bracket", _mark(bad == 0),
                       f"{count - bad}/{count} ok, min 2 sup/||A||={worst:.4g}")


def run_suite(laws=None, alpha_grid=DEFAULT_ALPHA_GRID, resolution=None):
    results = []
    for name in laws or LAWS:
        results.extend(check_law(name, alpha_grid, resolution))
    results.append(check_net_bracket())
    return results


def format_table(results):
    w1 = max(len(r.law) for r in results)
    w2 = max(len(r.check) for r in results)
    lines = [f"{'law':<{w1}}  {'check':<{w2}}  status  detail"]
    for r in results:
        lines.append(f"{r.law:<{w1}}  {r.check:<{w2}}  {r.status:<6}  {r.detail}")
    return "\n".join(lines)
