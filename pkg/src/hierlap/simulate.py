"""Monte Carlo sampling of ``Lambda_N`` with scheduling-independent seeding.

Trials are cut into fixed-size blocks.  The draws for block ``b`` at level
``k`` come from the stream ``SeedSequence([seed, b, k])``, so any number of
workers reproduces the same samples bit for bit.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import InsufficientDataError
from .hierarchy import CouplingScheme, LatticeSpec
from .moments import weight_profile
from .noise import NoiseSpec, make_rng

DRAWS_PER_BLOCK = 2**20


@dataclass(frozen=True)
class SimPlan:
    lattice: LatticeSpec
    scheme: CouplingScheme
    noise: NoiseSpec
    trials: int
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def draws_per_trial(self) -> int:
        lat = self.lattice
        return sum(lat.count(k) for k in range(lat.depth + 1)) + lat.tail_depth

    @property
    def block_trials(self) -> int:
        return int(max(1, min(8192, DRAWS_PER_BLOCK // self.lattice.v_N)))


def _block(plan: SimPlan, profile, sigma: float, b: int, n: int) -> np.ndarray:
    out = np.zeros(n)
    lat = plan.lattice
    for k in range(lat.top + 1):
        rng = make_rng(np.random.SeedSequence([plan.seed, b, k]))
        m = lat.count(k)
        draws = plan.noise.sample(n * m, rng).reshape(n, m)
        out += profile.weights[k] * draws.sum(axis=1)
    return out / sigma


def sample_lambda_bar(plan: SimPlan) -> np.ndarray:
    """``plan.trials`` draws of ``Ubar_N / sigma(Ubar_N)`` with the exact sigma.

    Only levels ``0 .. N+K`` are drawn, so sigma is that of the truncated
    sum; with an automatic ``K`` it differs from the full one below 1e-12.
    """
    profile = weight_profile(plan.scheme, plan.lattice)
    sigma = math.sqrt(plan.noise.variance * (profile.sq_norm - profile.tail_sq))
    bt = plan.block_trials
    sizes = [min(bt, plan.trials - start) for start in range(0, plan.trials, bt)]
    jobs = list(enumerate(sizes))
    run = lambda job: _block(plan, profile, sigma, *job)
    if plan.workers > 1:
        with ThreadPoolExecutor(plan.workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    return np.concatenate(parts)


@dataclass(frozen=True)
class SampleSummary:
    count: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    ks_normal: float
    histogram: np.ndarray | None = None

    def to_json(self) -> str:
        rec = asdict(self)
        if self.histogram is not None:
            rec["histogram"] = [float(v) for v in self.histogram]
        return json.dumps(rec, sort_keys=True)


def empirical_stats(samples, grid=None) -> SampleSummary:
    """Unbiased moments and the Kolmogorov distance to the standard normal.

    With ``grid`` given, a histogram on its cells (centred at ``grid.xs``)
    is attached; it integrates to one over samples that fall inside.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("need at least two samples")
    ks = kolmogorov_distance(x, stats.norm.cdf)
    if x.size < 4:
        skew = kurt = math.nan
    else:
        skew = float(stats.skew(x, bias=False))
        kurt = float(stats.kurtosis(x, fisher=True, bias=False))
    hist = None
    if grid is not None:
        h = grid.h
        edges = np.append(grid.xs - h / 2, grid.xs[-1] + h / 2)
        counts, _ = np.histogram(x, bins=edges)
        hist = counts / (max(counts.sum(), 1) * h)
    return SampleSummary(int(x.size), float(x.mean()), float(x.var(ddof=1)),
                         skew, kurt, ks, hist)


def kolmogorov_distance(samples, cdf) -> float:
    """``sup |F_n - F|`` over the sorted sample."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = cdf(x)
    hi = np.arange(1, n + 1) / n - F
    lo = F - np.arange(n) / n
    return float(max(hi.max(), lo.max()))


def dkw_radius(n: int, level: float = 0.99) -> float:
    """Dvoretzky-Kiefer-Wolfowitz band half-width at confidence ``level``."""
    return math.sqrt(math.log(2.0 / (1.0 - level)) / (2.0 * n))


@dataclass(frozen=True)
class PowerSums:
    """Mergeable first four power sums; ``a + b`` pools two sample sets."""

    count: int
    s1: float
    s2: float
    s3: float
    s4: float

    @classmethod
    def of(cls, samples) -> "PowerSums":
        x = np.asarray(samples, dtype=float)
        return cls(x.size, *(float(np.sum(x**k)) for k in range(1, 5)))

    def __add__(self, other: "PowerSums") -> "PowerSums":
        return PowerSums(self.count + other.count, self.s1 + other.s1,
                         self.s2 + other.s2, self.s3 + other.s3, self.s4 + other.s4)

    @property
    def mean(self) -> float:
        return self.s1 / self.count

    def central(self, k: int) -> float:
        n, mu = self.count, self.mean
        raw = [1.0, mu, self.s2 / n, self.s3 / n, self.s4 / n]
        return sum(math.comb(k, j) * raw[j] * (-mu) ** (k - j) for j in range(k + 1))


def binned_density(samples, edges) -> np.ndarray:
    counts, _ = np.histogram(samples, bins=edges)
    return counts / (len(samples) * np.diff(edges))


def binned_l1(samples, grid, width: float = 0.25, span: float = 6.0) -> float:
    """L1 distance between a histogram and the bin-averaged grid density.

    Mass outside ``[-span, span]`` enters as ``|P_n(out) - P(out)|``.
    """
    edges = np.arange(-span, span + width / 2, width)
    hist = binned_density(samples, edges)
    F = np.interp(edges, grid.xs, grid.cdf())
    model = np.diff(F) / width
    x = np.asarray(samples)
    out_emp = np.mean((x < edges[0]) | (x >= edges[-1]))
    out_model = F[0] + (1.0 - F[-1])
    return float(np.sum(np.abs(hist - model)) * width + abs(out_emp - out_model))


def write_samples_csv(samples, path) -> None:
    with open(path, "w") as fh:
        fh.write("lambda\n")
        for v in samples:
            fh.write(f"{float(v)!r}\n")
