"""Seeded Monte Carlo sweeps comparing covariance estimators.

A sweep is described by a flat ``key = value`` config file::

    # N-scaling, gaussian identity
    distribution = gaussian
    grid.d = 8
    grid.shape = identity
    grid.N = 1000, 2000, 4000
    grid.delta = 0.01
    trials = 300
    estimators = pipeline, empirical
    seed = 20240601
    pipeline.mode = subgaussian

Grid keys take comma separated lists and the sweep runs their Cartesian
product.  Shapes are ``identity``, ``rank1`` (e_1 e_1^T), ``diag(a,b,...)``
and ``decay(q)`` (``Sigma_ii = q^(2i)``).

Each trial draws its data from ``RandomStream(seed, stream_id)`` where
``stream_id`` is the first 8 bytes (big endian) of the BLAKE2b digest of
``"<cell key>|<trial>|<seed>"``, so any (cell, trial) can be regenerated in
isolation and results do not depend on scheduling.
"""

import csv
import hashlib
import itertools
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import linalg
from .errors import CovestError, InvalidParameterError
from .sampling import DistributionSpec, RandomStream
from .tournament import (
    PipelineConfig,
    empirical_covariance,
    epsilon_net_norm,
    estimate_covariance,
)

ESTIMATORS = ("pipeline", "empirical", "epsilon-net")
DISTRIBUTIONS = ("gaussian", "student_t", "subexponential", "rademacher")
QUANTILES = (0.5, 0.9, 0.99)
TIMING_FIELDS = ("time_pipeline", "time_empirical", "time_epsnet")


def parse_shape(shape, d):
    """Covariance matrix for a shape name in dimension `d`."""
    shape = shape.strip()
    if shape == "identity":
        return np.eye(d)
    if shape == "rank1":
        sigma = np.zeros((d, d))
        sigma[0, 0] = 1.0
        return sigma
    m = re.fullmatch(r"diag\(([^)]*)\)", shape)
    if m:
        diag = [float(v) for v in m.group(1).split(",")]
        if len(diag) != d:
            raise InvalidParameterError(f"shape {shape} has {len(diag)} entries but d = {d}")
        return np.diag(diag)
    m = re.fullmatch(r"decay\(([^)]*)\)", shape)
    if m:
        q = float(m.group(1))
        return np.diag(q ** (2.0 * np.arange(d)))
    raise InvalidParameterError(f"unknown covariance shape {shape!r}")


def make_distribution(name, sigma, nu=None):
    if name == "gaussian":
        return DistributionSpec.gaussian(sigma)
    if name == "student_t":
        return DistributionSpec.student_t(nu, sigma)
    if not np.array_equal(sigma, np.diag(np.diagonal(sigma))):
        raise InvalidParameterError(f"{name} needs a diagonal covariance shape")
    scales = np.sqrt(np.diagonal(sigma))
    if name == "subexponential":
        return DistributionSpec.subexponential(scales)
    if name == "rademacher":
        return DistributionSpec.rademacher_diag(scales)
    raise InvalidParameterError(f"unknown distribution {name!r}")


@dataclass(frozen=True)
class Cell:
    distribution: str
    d: int
    shape: str
    N: int
    delta: float
    nu: int = None

    @property
    def key(self):
        return f"{self.distribution}|d={self.d}|{self.shape}|N={self.N}|delta={self.delta!r}|nu={self.nu}"

    def spec(self):
        return make_distribution(self.distribution, parse_shape(self.shape, self.d), self.nu)


@dataclass
class BenchConfig:
    distribution: str
    cells: list
    trials: int
    estimators: tuple
    seed: int
    mode: str = "subgaussian"
    symmetrize: bool = True
    kappa: float = 4.0
    dirs: int = None
    out: str = None

    def pipeline_config(self, seed):
        return PipelineConfig(symmetrize=self.symmetrize, kappa=self.kappa,
                              n_random=self.dirs, seed=seed)


def _split_list(value):
    """Split on commas that are not inside parentheses."""
    return [v.strip() for v in re.split(r",(?![^(]*\))", value) if v.strip()]


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def parse_config(text):
    """Parse the flat key-value config format into a :class:`BenchConfig`."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameterError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = value

    known = {"distribution", "grid.d", "grid.shape", "grid.N", "grid.delta", "grid.nu",
             "trials", "estimators", "seed", "out", "pipeline.mode",
             "pipeline.symmetrize", "pipeline.kappa", "pipeline.dirs"}
    unknown = set(raw) - known
    if unknown:
        raise InvalidParameterError(f"unknown config keys: {', '.join(sorted(unknown))}")

    dist = raw.get("distribution", "gaussian")
    if dist not in DISTRIBUTIONS:
        raise InvalidParameterError(f"distribution must be one of {DISTRIBUTIONS}")
    ds = [int(v) for v in _split_list(raw.get("grid.d", "2"))]
    shapes = _split_list(raw.get("grid.shape", "identity"))
    Ns = [int(v) for v in _split_list(raw.get("grid.N", "1000"))]
    deltas = [float(v) for v in _split_list(raw.get("grid.delta", "0.01"))]
    nus = [int(v) for v in _split_list(raw["grid.nu"])] if "grid.nu" in raw else [None]
    if dist == "student_t" and nus == [None]:
        raise InvalidParameterError("student_t sweeps need grid.nu")
    if dist != "student_t":
        nus = [None]

    cells = [Cell(dist, d, s, n, delta, nu)
             for d, s, n, delta, nu in itertools.product(ds, shapes, Ns, deltas, nus)]
    for c in cells:
        c.spec()  # validates shape, nu, ordering constraints
        if not 0 < c.delta < 1:
            raise InvalidParameterError(f"delta must lie in (0, 1): {c.key}")

    estimators = tuple(_split_list(raw.get("estimators", "pipeline,empirical")))
    bad = set(estimators) - set(ESTIMATORS)
    if bad:
        raise InvalidParameterError(f"unknown estimators: {', '.join(sorted(bad))}")
    trials = int(raw.get("trials", "1"))
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    return BenchConfig(
        distribution=dist, cells=cells, trials=trials, estimators=estimators,
        seed=int(raw.get("seed", "0")),
        mode=raw.get("pipeline.mode", "subgaussian"),
        symmetrize=_BOOL[raw.get("pipeline.symmetrize", "true").lower()],
        kappa=float(raw.get("pipeline.kappa", "4.0")),
        dirs=int(raw["pipeline.dirs"]) if "pipeline.dirs" in raw else None,
        out=raw.get("out"),
    )


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def stream_id(cell, trial, master_seed):
    digest = hashlib.blake2b(f"{cell.key}|{trial}|{master_seed}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass
class TrialRecord:
    distribution: str
    d: int
    shape: str
    N: int
    delta: float
    nu: int
    mode: str
    trial: int
    stream_id: int
    err_pipeline: float = None
    err_empirical: float = None
    err_epsnet: float = None
    epsnet_value: float = None
    phi1: float = None
    phi2: float = None
    beta: float = None
    gamma: float = None
    time_pipeline: float = None
    time_empirical: float = None
    time_epsnet: float = None
    status: str = "ok"


def regenerate_sample(cell, trial, master_seed):
    sid = stream_id(cell, trial, master_seed)
    return cell.spec().sample(cell.N, RandomStream(master_seed, sid))


def run_trial(cell, trial, master_seed, estimators=("pipeline", "empirical"), cfg=None):
    """One Monte Carlo replicate; estimator failures land in ``status``."""
    sid = stream_id(cell, trial, master_seed)
    spec = cell.spec()
    sigma = spec.true_covariance
    x = spec.sample(cell.N, RandomStream(master_seed, sid))
    mode = cfg.mode if cfg else "subgaussian"
    rec = TrialRecord(cell.distribution, cell.d, cell.shape, cell.N, cell.delta, cell.nu,
                      mode, trial, sid)
    failures = []
    if "pipeline" in estimators:
        pcfg = cfg.pipeline_config(sid) if cfg else PipelineConfig(seed=sid)
        t0 = time.perf_counter()
        try:
            report = estimate_covariance(x, cell.delta, mode, pcfg)
            rec.err_pipeline = linalg.operator_norm(report.estimate - sigma)
            s = report.state
            rec.phi1, rec.phi2, rec.beta, rec.gamma = s.phi1, s.phi2, s.beta, s.gamma
        except (CovestError, ArithmeticError, ValueError) as exc:
            failures.append(f"pipeline: {exc}")
        rec.time_pipeline = time.perf_counter() - t0
    if "empirical" in estimators:
        t0 = time.perf_counter()
        rec.err_empirical = linalg.operator_norm(empirical_covariance(x) - sigma)
        rec.time_empirical = time.perf_counter() - t0
    if "epsilon-net" in estimators:
        t0 = time.perf_counter()
        try:
            rec.epsnet_value = epsilon_net_norm(x, cell.delta)
            rec.err_epsnet = abs(rec.epsnet_value - linalg.operator_norm(sigma))
        except (CovestError, ArithmeticError, ValueError) as exc:
            failures.append(f"epsilon-net: {exc}")
        rec.time_epsnet = time.perf_counter() - t0
    if failures:
        rec.status = "; ".join(failures)
    return rec


def lower_quantile(values, q):
    """The ceil(q k)-th smallest of k values."""
    v = sorted(values)
    return v[max(math.ceil(q * len(v)), 1) - 1]


def summarize(records):
    """Per-cell quantiles of each estimator's error."""
    out = []
    for key, group in itertools.groupby(records, key=lambda r: (r.distribution, r.d, r.shape,
                                                                r.N, r.delta, r.nu)):
        group = list(group)
        row = dict(zip(("distribution", "d", "shape", "N", "delta", "nu"), key))
        row["trials"] = len(group)
        for col in ("err_pipeline", "err_empirical", "err_epsnet"):
            vals = [getattr(r, col) for r in group if getattr(r, col) is not None]
            for q in QUANTILES:
                row[f"{col}_q{q}"] = lower_quantile(vals, q) if vals else None
        out.append(row)
    return out


@dataclass
class SweepResult:
    records: list
    summary: list = field(default_factory=list)


def _trial_job(args):
    cell, trial, cfg = args
    return run_trial(cell, trial, cfg.seed, cfg.estimators, cfg)


def run_sweep(cfg, jobs=1, out=None, timing=True):
    """Run every (cell, trial); optionally write `out` (also on interruption)."""
    tasks = [(c, t, cfg) for c in cfg.cells for t in range(cfg.trials)]
    records = []
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                records.extend(pool.map(_trial_job, tasks, chunksize=4))
        else:
            for task in tasks:
                records.append(_trial_job(task))
    except KeyboardInterrupt:
        if out:
            write_csv(_sorted(records, cfg), out, timing)
        raise
    records = _sorted(records, cfg)
    result = SweepResult(records, summarize(records))
    if out:
        write_csv(records, out, timing)
        write_summary(result.summary, summary_path(out))
    return result


def _sorted(records, cfg):
    order = {c.key: i for i, c in enumerate(cfg.cells)}

    def key(r):
        cell = Cell(r.distribution, r.d, r.shape, r.N, r.delta, r.nu)
        return order[cell.key], r.trial

    return sorted(records, key=key)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def record_fields(timing=True):
    names = [f.name for f in fields(TrialRecord)]
    return names if timing else [n for n in names if n not in TIMING_FIELDS]


def write_csv(records, path, timing=True):
    """One header row plus one row per record, floats with 17 significant digits."""
    names = record_fields(timing)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(names)
            for r in records:
                row = asdict(r)
                writer.writerow([_fmt(row[n]) for n in names])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


_INT_FIELDS = {"d", "N", "nu", "trial", "stream_id"}
_STR_FIELDS = {"distribution", "shape", "mode", "status"}


def read_csv(path):
    """Inverse of :func:`write_csv`."""
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for k, v in row.items():
                if k in _STR_FIELDS:
                    kw[k] = v
                elif v == "":
                    kw[k] = None
                elif k in _INT_FIELDS:
                    kw[k] = int(v)
                else:
                    kw[k] = float(v)
            records.append(TrialRecord(**kw))
    return records


def summary_path(path):
    stem = path[:-4] if path.endswith(".csv") else path
    return f"{stem}.summary.csv"


def write_summary(summary, path):
    if not summary:
        return
    names = list(summary[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in summary:
            writer.writerow([_fmt(row[n]) for n in names])
