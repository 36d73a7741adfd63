"""Second-order theory of the averaged perturbed eigenvalue.

The normalised mean ``Ubar_N`` of the perturbed leaf eigenvalues inside ``O``
is a weighted sum of independent perturbations: level ``k <= N`` contributes
``v_N/v_k`` balls each with weight ``a_k v_k / v_N``, and spine level
``k > N`` contributes one ball with weight ``a_k``.  That list of
``(weight, multiplicity)`` pairs is a :class:`WeightProfile`; the moment,
cumulant and characteristic-function computations all run on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProfileError, RegimeError, UnsupportedOrderError
from .hierarchy import CouplingScheme, LatticeSpec, build_coupling, build_lattice
from .noise import NoiseSpec, make_rng


@dataclass(frozen=True)
class WeightProfile:
    """Independent-sum representation ``sum_i u_i * (sum of m_i i.i.d. eps)``.

    ``n_inner`` leading entries belong to levels ``0..N``; the rest are spine
    entries.  ``tail_sq``/``tail_abs`` hold the closed-form ``sum a_k^2`` and
    ``sum a_k`` of the spine levels dropped by truncation.
    """

    weights: np.ndarray
    mults: np.ndarray
    n_inner: int
    tail_sq: float = 0.0
    tail_abs: float = 0.0

    def __post_init__(self):
        if len(self.weights) != len(self.mults):
            raise ValueError("weights and multiplicities differ in length")

    @property
    def sq_norm(self) -> float:
        """``sigma(Ubar_N)^2 / sigma_eps^2``, truncated tail included."""
        return float(np.sum(self.mults * self.weights**2)) + self.tail_sq

    def power_sum(self, s: float, part: slice = slice(None)) -> float:
        return float(np.sum(self.mults[part] * np.abs(self.weights[part]) ** s))

    @property
    def inner(self) -> slice:
        return slice(0, self.n_inner)

    @property
    def spine(self) -> slice:
        return slice(self.n_inner, None)

    def std(self, noise: NoiseSpec) -> float:
        return math.sqrt(noise.variance * self.sq_norm)

    @classmethod
    def single(cls, weights, mults=None) -> "WeightProfile":
        """Profile with no spine, e.g. for reference sums of i.i.d. terms."""
        w = np.asarray(weights, dtype=float)
        m = np.ones_like(w) if mults is None else np.asarray(mults, dtype=float)
        return cls(w, m, len(w))


def weight_profile(scheme: CouplingScheme, lattice: LatticeSpec) -> WeightProfile:
    if scheme.top != lattice.top:
        raise ValueError("scheme and lattice truncations differ")
    N, vol = lattice.depth, lattice.volumes
    v = np.array(vol, dtype=float)
    w_inner = scheme.a[: N + 1] * v / v[N]
    m_inner = v[N] / v
    w = np.concatenate([w_inner, scheme.a[N + 1:]])
    m = np.concatenate([m_inner, np.ones(lattice.tail_depth)])
    return WeightProfile(
        w, m, N + 1,
        tail_sq=scheme.tail_power_sum(lattice.top + 1, 2.0),
        tail_abs=scheme.tail_weight,
    )


# -- variances ---------------------------------------------------------------


@dataclass(frozen=True)
class VarianceReport:
    var_U: float
    var_X: float

    @property
    def B_N(self) -> float:
        return self.var_U + self.var_X


def exact_variances(scheme: CouplingScheme, lattice: LatticeSpec,
                    noise: NoiseSpec) -> VarianceReport:
    """``sigma(U_N)^2`` (inside ``O``) and ``sigma(X_N)^2`` (whole spine)."""
    N, vol = lattice.depth, lattice.volumes
    s2 = noise.variance
    var_U = s2 * sum(scheme.weight(k) ** 2 * vol[k] / vol[N] for k in range(N + 1))
    var_X = s2 * scheme.tail_power_sum(N + 1, 2.0)
    return VarianceReport(var_U, var_X)


@dataclass(frozen=True)
class RegimeTable:
    """Normalised variances across depths; each column should stay bounded."""

    delta: float
    n_values: np.ndarray
    v_N: np.ndarray
    var_U: np.ndarray
    var_X: np.ndarray
    v_next: np.ndarray

    @property
    def u_ratio(self) -> np.ndarray:
        """``var_U`` divided by its predicted order for this delta."""
        if self.delta > 1:
            return self.var_U * self.v_N
        if self.delta == 1:
            return self.var_U * self.v_N / self.n_values
        return self.var_U * self.v_N**self.delta

    @property
    def x_ratio(self) -> np.ndarray:
        return self.var_X * self.v_next**self.delta


def variance_regime_check(preset: str, params: dict, degrees, noise: NoiseSpec,
                          n_values) -> RegimeTable:
    """Exact variances against ``v_N^{-1}``, ``N v_N^{-1}``, ``v_N^{-delta}``.

    ``degrees`` must supply ``n_1 .. n_{Nmax+1}``; the spine order uses
    ``v_{N+1}`` (with ``n_0 = 1``).
    """
    n_values = np.asarray(list(n_values))
    rows = []
    delta = None
    for N in n_values:
        lat = build_lattice(degrees, int(N) + 1, 0)
        v_next = lat.v_N
        lat = build_lattice(degrees, int(N), 0)
        sch = build_coupling(preset, lat, **params)
        delta = sch.delta
        rep = exact_variances(sch, lat, noise)
        rows.append((lat.v_N, v_next, rep.var_U, rep.var_X))
    v, vn, vu, vx = (np.array(col, dtype=float) for col in zip(*rows))
    return RegimeTable(delta, n_values.astype(float), v, vu, vx, vn)


# -- Lyapunov ratios -----------------------------------------------------------


@dataclass(frozen=True)
class Lyapunov:
    order: float
    ratio: float
    tail_moment: float
    tail_bound: float


def spine_abs_moments(weights, noise: NoiseSpec, orders, draws: int = 10**6,
                      seed=20240601, chunk: int = 2**17) -> dict:
    """Monte Carlo ``E|sum_k w_k eps_k|^s`` for a spine weight vector."""
    weights = np.asarray(weights, dtype=float)
    acc = {s: 0.0 for s in orders}
    if weights.size == 0:
        return acc
    rng = make_rng(seed)
    done = 0
    while done < draws:
        n = min(chunk, draws - done)
        x = np.zeros(n)
        for w in weights:
            x += w * noise.sample(n, rng)
        ax = np.abs(x)
        for s in orders:
            acc[s] += float(np.sum(ax**s))
        done += n
    return {s: acc[s] / draws for s in orders}


def lyapunov(profile: WeightProfile, noise: NoiseSpec, s: float,
             tail_draws: int = 10**6, seed=20240601,
             tail_moment: float | None = None) -> Lyapunov:
    """``L_s = [sum_B E|X_B|^s + E|X_N|^s] / B_N^{s/2}``.

    Inner balls enter individually; the spine sum ``X_N`` is one summand
    whose absolute moment is estimated by Monte Carlo unless supplied.
    """
    if s < 2:
        raise UnsupportedOrderError(f"Lyapunov ratio needs s >= 2, got {s}")
    inner = profile.power_sum(s, profile.inner) * noise.abs_moment(s)
    spine_w = profile.weights[profile.spine]
    if tail_moment is None:
        tail_moment = spine_abs_moments(spine_w, noise, (s,), tail_draws, seed)[s]
    spine_abs = float(np.sum(spine_w)) + profile.tail_abs
    bound = (noise.half_width * spine_abs) ** s
    B = noise.variance * profile.sq_norm
    return Lyapunov(s, (inner + tail_moment) / B ** (s / 2.0), tail_moment, bound)


# -- rate bounds ---------------------------------------------------------------


@dataclass(frozen=True)
class RateBound:
    """Constant-free order of the distance bound.

    ``order = scale ** (-exponent)`` where ``scale`` is ``N`` when
    ``delta == 1`` and ``v_N`` otherwise.
    """

    metric: str
    delta: float
    N: int
    v_N: float
    exponent: float
    variable: str
    applies: bool = True

    @property
    def order(self) -> float:
        if not self.applies:
            return math.nan
        base = self.N if self.variable == "N" else self.v_N
        return float(base) ** (-self.exponent)


def theorem_bound(delta: float, N: int, v_N: float, metric: str) -> RateBound:
    if metric not in ("tv", "kl"):
        raise ValueError(f"metric must be 'tv' or 'kl', got {metric!r}")
    if delta < 1:
        return RateBound(metric, delta, N, v_N, math.nan, "v_N", applies=False)
    if delta == 1:
        return RateBound(metric, delta, N, v_N, 0.5 if metric == "tv" else 1.0, "N")
    if metric == "tv":
        exponent = 1.5 * min(delta - 1.0, 1.0 / 3.0)
    else:
        exponent = 2.0 * min(delta - 1.0, 0.5)
    return RateBound(metric, delta, N, v_N, exponent, "v_N")


# -- cumulants -----------------------------------------------------------------


def kurtosis_excess(profile: WeightProfile, noise: NoiseSpec) -> float:
    """Exact excess kurtosis of ``Lambda_N``: ``kappa4(eps) sum m u^4 / sigma^4``."""
    if profile.sq_norm <= 0:
        raise DegenerateProfileError("profile has zero variance")
    return noise.kurt4 * profile.power_sum(4.0) / (noise.variance * profile.sq_norm) ** 2


# -- non-Gaussian limit (alpha < 1/2) ------------------------------------------


@dataclass(frozen=True)
class LimitLaw:
    p: int
    alpha: float
    w_U: float
    w_V: float
    A: float
    profile: WeightProfile
    noise: NoiseSpec

    def kurtosis(self) -> float:
        """Excess kurtosis from the closed-form geometric series."""
        p, al = self.p, self.alpha
        gu = 1.0 - p ** (2 * al - 1)
        gv = 1.0 - p ** (-2 * al)
        s4 = (self.w_U**4 * gu**2 / (1.0 - p ** (4 * al - 3))
              + self.w_V**4 * gv**2 / (1.0 - p ** (-4 * al)))
        return self.noise.kurt4 / self.noise.variance**2 * s4


def qp_limit_params(p: int, alpha: float, noise: NoiseSpec,
                    tol: float = 1e-12) -> LimitLaw:
    """Limit law ``w_U U + w_V V`` of ``Lambda_N`` for ``0 < alpha < 1/2``.

    ``U`` mixes level sums ``S_k`` of ``p^k`` perturbations with weights
    ``p^{(2 alpha - 1) k / 2}``; ``V`` is the normalised spine series.  Both
    are truncated where their remaining variance share drops below ``tol``.
    Profile weights are in units of ``eps`` (so ``sq_norm == 1`` up to
    truncation).
    """
    p = int(p)
    if not 0 < alpha < 0.5:
        raise RegimeError("limit law is non-Gaussian only for 0 < alpha < 1/2")
    gu = 1.0 - p ** (2 * alpha - 1)
    gv = 1.0 - p ** (-2 * alpha)
    w_U = math.sqrt(gv / (1.0 - 1.0 / p))
    w_V = math.sqrt((p ** (-2 * alpha) - 1.0 / p) / (1.0 - 1.0 / p))
    sigma2 = noise.variance
    A = math.sqrt(sigma2 * (1 - 1 / p) / ((p ** (-2 * alpha) - 1 / p) * gv))
    # level j of U: p^j terms of weight w_U sqrt(gu) p^{(alpha-1) j}
    J = math.ceil(math.log(tol) / math.log(1.0 - gu))
    I = math.ceil(math.log(tol) / math.log(1.0 - gv))
    j = np.arange(J)
    i = np.arange(I)
    wu = w_U * math.sqrt(gu) * float(p) ** ((alpha - 1.0) * j)
    wv = w_V * math.sqrt(gv) * float(p) ** (-alpha * i)
    mu = float(p) ** j
    weights = np.concatenate([wu, wv])
    mults = np.concatenate([mu, np.ones(I)])
    tail_sq = w_U**2 * (1.0 - gu) ** J + w_V**2 * (1.0 - gv) ** I
    profile = WeightProfile(weights, mults, J, tail_sq=tail_sq)
    return LimitLaw(p, alpha, w_U, w_V, A, profile, noise)
