"""Truncated tree of balls, homogeneous couplings and exact operator action.

Levels are horocycle indices ``k >= 0``.  Level 0 holds the leaves (balls of
measure 1); the observation ball ``O`` sits at level ``N`` and the spine
``O_{N+1}, ..., O_{N+K}`` continues above it, one ball per level.  Balls at
level ``k <= N`` are numbered ``0 .. v_N/v_k - 1`` left to right, so the
leaves under ball ``(k, i)`` are ``i*v_k .. (i+1)*v_k - 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DivergenceError,
    InvalidDegreeError,
    LevelRangeError,
    NoiseRangeError,
    PreconditionError,
)


class BallRef(NamedTuple):
    level: int
    index: int


@dataclass(frozen=True)
class LatticeSpec:
    degrees: tuple[int, ...]
    depth: int
    tail_depth: int
    volumes: tuple[int, ...] = field(repr=False)

    @property
    def top(self) -> int:
        """Highest stored level, ``N + K``."""
        return self.depth + self.tail_depth

    @property
    def v_N(self) -> int:
        return self.volumes[self.depth]

    def count(self, k: int) -> int:
        """Number of level-``k`` balls inside ``O`` (1 on the spine)."""
        if not 0 <= k <= self.top:
            raise LevelRangeError(f"level {k} outside [0, {self.top}]")
        if k >= self.depth:
            return 1
        return self.volumes[self.depth] // self.volumes[k]

    def contains(self, ball: BallRef) -> bool:
        k, i = ball
        return 0 <= k <= self.top and 0 <= i < self.count(k)

    def parent(self, ball: BallRef) -> BallRef | None:
        self._check(ball)
        k, i = ball
        if k == self.top:
            return None
        if k < self.depth:
            return BallRef(k + 1, i // self.degrees[k])
        return BallRef(k + 1, 0)

    def leaf_range(self, ball: BallRef) -> range:
        """Leaves under ``ball``; spine balls cover all of ``O``."""
        self._check(ball)
        k, i = ball
        if k >= self.depth:
            return range(self.v_N)
        v = self.volumes[k]
        return range(i * v, (i + 1) * v)

    def _check(self, ball: BallRef) -> None:
        if not self.contains(ball):
            raise LevelRangeError(f"ball {tuple(ball)} not in lattice")


def build_lattice(degrees: Sequence[int], N: int, K: int = 0) -> LatticeSpec:
    """Truncate the tree of balls at observation depth ``N`` and spine ``K``.

    ``degrees`` supplies ``n_1, n_2, ...``; only the first ``N`` are used.
    """
    degrees = tuple(int(n) for n in degrees)
    if any(n < 2 for n in degrees):
        raise InvalidDegreeError(f"every degree must be >= 2, got {degrees}")
    if N < 0 or K < 0:
        raise LevelRangeError("depth and tail depth must be non-negative")
    if len(degrees) < N:
        raise InvalidDegreeError(f"need {N} degrees, got {len(degrees)}")
    degrees = degrees[:N]
    volumes = [1]
    for n in degrees:
        volumes.append(volumes[-1] * n)
    return LatticeSpec(degrees, N, K, tuple(volumes))


def measure(lattice: LatticeSpec, k: int) -> int:
    """m(B) for a level-``k`` ball, normalised to 1 on leaves."""
    if not 0 <= k <= lattice.depth:
        raise LevelRangeError(f"level {k} outside [0, {lattice.depth}]")
    return lattice.volumes[k]


def geodesic(lattice: LatticeSpec, ball: BallRef) -> list[BallRef]:
    """Path from ``ball`` up to level ``N + K``, inclusive of both ends."""
    ball = BallRef(*ball)
    if not lattice.contains(ball):
        raise LevelRangeError(f"ball {tuple(ball)} not in lattice")
    path = [ball]
    while (up := lattice.parent(path[-1])) is not None:
        path.append(up)
    return path


# -- couplings ---------------------------------------------------------------


@dataclass(frozen=True)
class CouplingScheme:
    """Geometric coupling ``a_k = (1 - r) r^k`` stored on levels ``0..N+K``.

    Both presets share this weight shape; they differ in ``lambda_0`` and in
    the diameter base ``q`` used by the homogeneity certificate.
    """

    preset: str
    ratio: float
    lam0: float
    delta: float
    q: float
    a: np.ndarray
    lam: np.ndarray
    c: np.ndarray
    tail_weight: float
    params: dict = field(default_factory=dict, compare=False)

    @property
    def top(self) -> int:
        return len(self.a) - 1

    def weight(self, k: int) -> float:
        """Closed-form ``a_k`` at any level, stored or not."""
        return (1.0 - self.ratio) * self.ratio**k

    def coupling(self, k: int) -> float:
        return self.lam0 * self.weight(k)

    def eigenvalue(self, k: int) -> float:
        """``lambda_k = sum_{l >= k} C_l`` in closed form."""
        return self.lam0 * self.ratio**k

    def tail_power_sum(self, k0: int, s: float = 1.0) -> float:
        """``sum_{k >= k0} a_k^s`` (geometric closed form)."""
        r = self.ratio
        return (1.0 - r) ** s * r ** (s * k0) / (1.0 - r**s)


def _geometric_scheme(preset, ratio, lam0, delta, q, top, params):
    k = np.arange(top + 1)
    a = (1.0 - ratio) * ratio**k
    lam = lam0 * ratio**k
    return CouplingScheme(
        preset=preset,
        ratio=ratio,
        lam0=lam0,
        delta=delta,
        q=q,
        a=a,
        lam=lam,
        c=lam0 * a,
        tail_weight=ratio ** (top + 1),
        params=dict(params),
    )


def coupling_ratio(preset: str, **params) -> float:
    """Geometric ratio ``a_{k+1}/a_k`` for a preset, validating convergence."""
    if preset == "qp":
        p, alpha = int(params["p"]), float(params["alpha"])
        if p < 2:
            raise InvalidDegreeError(f"qp preset needs p >= 2, got {p}")
        if alpha <= 0:
            raise DivergenceError("alpha must be positive")
        return float(p) ** (-alpha)
    if preset == "powerlaw":
        q, delta = float(params["q"]), float(params["delta"])
        if q <= 1:
            raise DivergenceError("diameter base q must exceed 1")
        if delta <= 0:
            raise DivergenceError(
                "delta <= 0 makes lambda(B) a divergent sum of couplings")
        return q ** (-delta / 2.0)
    raise ValueError(f"unknown preset {preset!r}")


def auto_tail_depth(ratio: float, tol: float = 1e-12) -> int:
    """Smallest K whose neglected spine variance is below ``tol`` of var X_N.

    The spine beyond ``N + K`` carries ``r^{2K}`` of the spine variance for
    every N, so the choice does not depend on N or on the degrees.
    """
    return max(2, math.ceil(math.log(tol) / (2.0 * math.log(ratio))))


def build_coupling(preset: str, lattice: LatticeSpec, **params) -> CouplingScheme:
    """Coupling scheme on the levels of ``lattice``.

    ``qp``: ``lambda(B) = (p/diam B)^alpha`` with ``diam B = p^k``, so
    ``lambda_k = p^{-alpha(k-1)}`` and ``delta = 2 alpha``.
    ``powerlaw``: ``C_k = kappa0 q^{-k delta/2}``.
    """
    r = coupling_ratio(preset, **params)
    if preset == "qp":
        p, alpha = int(params["p"]), float(params["alpha"])
        return _geometric_scheme(
            "qp", r, float(p) ** alpha, 2.0 * alpha, float(p), lattice.top,
            {"p": p, "alpha": alpha})
    q, delta = float(params["q"]), float(params["delta"])
    kappa0 = float(params.get("kappa0", 1.0))
    if kappa0 <= 0:
        raise DivergenceError("kappa0 must be positive")
    return _geometric_scheme(
        "powerlaw", r, kappa0 / (1.0 - r), delta, q, lattice.top,
        {"q": q, "delta": delta, "kappa0": kappa0})


@dataclass(frozen=True)
class HomogeneityCertificate:
    delta: float
    kappa: float
    theorem_applies: bool


def verify_homogeneity(scheme: CouplingScheme) -> HomogeneityCertificate:
    """Smallest kappa with ``1/kappa <= C_k q^{k delta/2} <= kappa`` on stored levels."""
    k = np.arange(len(scheme.c))
    scaled = scheme.c * scheme.q ** (k * scheme.delta / 2.0)
    kappa = float(max(scaled.max(), (1.0 / scaled).max()))
    return HomogeneityCertificate(scheme.delta, kappa, scheme.delta >= 1.0)


# -- functions on leaves -----------------------------------------------------


@dataclass(frozen=True)
class LeafFunction:
    """Values on the leaves of the domain ball ``(domain_level, domain_index)``."""

    values: np.ndarray
    domain_level: int
    domain_index: int = 0

    @property
    def domain(self) -> BallRef:
        return BallRef(self.domain_level, self.domain_index)


BallField = tuple  # per-level arrays of perturbations, index = ball number


def draw_field(lattice: LatticeSpec, noise, seed) -> BallField:
    """One i.i.d. perturbation per ball at levels ``0 .. N+K``."""
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(lattice.top + 1)
    return tuple(
        noise.sample(lattice.count(k), children[k]) for k in range(lattice.top + 1)
    )


def eigenfunction(lattice: LatticeSpec, ball: BallRef,
                  domain_level: int | None = None) -> LeafFunction:
    """``f_B = 1_B/m(B) - 1_{B'}/m(B')`` on the leaves of a domain ball."""
    ball = BallRef(*ball)
    M = lattice.depth if domain_level is None else domain_level
    if not lattice.contains(ball) or not 0 <= M <= lattice.depth:
        raise LevelRangeError(f"ball {tuple(ball)} or domain level {M} invalid")
    if ball.level >= M:
        raise LevelRangeError(
            f"parent of {tuple(ball)} is not inside a level-{M} domain")
    parent = lattice.parent(ball)
    dom_index = ball.index // (lattice.volumes[M] // lattice.volumes[ball.level])
    offset = dom_index * lattice.volumes[M]
    values = np.zeros(lattice.volumes[M])
    pr = lattice.leaf_range(parent)
    values[pr.start - offset:pr.stop - offset] -= 1.0 / lattice.volumes[parent.level]
    br = lattice.leaf_range(ball)
    values[br.start - offset:br.stop - offset] += 1.0 / lattice.volumes[ball.level]
    return LeafFunction(values, M, dom_index)


def perturbed_coupling(scheme: CouplingScheme, field_: BallField | None,
                       ball: BallRef) -> float:
    k, i = ball
    if k > scheme.top or field_ is None:
        return scheme.coupling(k)
    return scheme.c[k] * (1.0 + field_[k][i])


def ball_eigenvalue(lattice: LatticeSpec, scheme: CouplingScheme,
                    field_: BallField | None, ball: BallRef) -> float:
    """``lambda(B, omega)``: perturbed couplings summed along the geodesic.

    Levels above ``N + K`` are unperturbed and enter through the closed-form
    ``lambda_{N+K+1}``.
    """
    path = geodesic(lattice, ball)
    total = sum(perturbed_coupling(scheme, field_, b) for b in path)
    return total + scheme.eigenvalue(lattice.top + 1)


def apply_laplacian(lattice: LatticeSpec, scheme: CouplingScheme,
                    f: LeafFunction, field_: BallField | None = None) -> LeafFunction:
    """Exact (perturbed) hierarchical Laplacian of a mean-zero leaf function.

    Balls strictly containing the domain ``R`` see ``avg f = 0``, so they
    contribute ``lambda(R', omega) f`` in total.
    """
    values = np.asarray(f.values, dtype=float)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if abs(values.mean()) > 1e-12 * max(scale, 1.0):
        raise PreconditionError("leaf function must have mean zero on its domain")
    M, r = f.domain_level, f.domain_index
    vol = lattice.volumes
    if values.size != vol[M]:
        raise PreconditionError("leaf vector length does not match domain")
    if field_ is not None:
        _check_field(lattice, field_)
    out = np.zeros_like(values)
    for j in range(1, M + 1):
        blocks = values.reshape(-1, vol[j])
        nb = blocks.shape[0]
        first = r * (vol[M] // vol[j])
        cj = np.full(nb, scheme.c[j]) if j <= scheme.top else np.full(nb, scheme.coupling(j))
        if field_ is not None and j <= scheme.top:
            cj = cj * (1.0 + field_[j][first:first + nb])
        dev = blocks - blocks.mean(axis=1, keepdims=True)
        out += (cj[:, None] * dev).ravel()
    # level-0 balls are single leaves: f(x) - avg f = 0
    up = lattice.parent(f.domain)
    outer = scheme.eigenvalue(M + 1) if up is None else ball_eigenvalue(
        lattice, scheme, field_, up)
    out += outer * values
    return LeafFunction(out, M, r)


def _check_field(lattice: LatticeSpec, field_: BallField) -> None:
    if len(field_) != lattice.top + 1:
        raise PreconditionError("perturbation field must cover levels 0..N+K")
    for k, eps in enumerate(field_):
        if len(eps) != lattice.count(k):
            raise PreconditionError(f"level {k}: expected {lattice.count(k)} values")
        if np.any(np.abs(eps) >= 1.0):
            raise NoiseRangeError(f"level {k}: perturbation outside (-1, 1)")


def perturbed_eigenvalue(scheme: CouplingScheme,
                         eps_path: Iterable[float]) -> float:
    """``lambda_0 (1 + sum_k a_k eps(B_k))`` for a leaf's geodesic values."""
    eps = np.asarray(list(eps_path), dtype=float)
    if eps.size != len(scheme.a):
        raise PreconditionError(
            f"need {len(scheme.a)} geodesic values, got {eps.size}")
    if np.any(np.abs(eps) >= 1.0):
        raise NoiseRangeError("perturbations must lie in (-1, 1)")
    return scheme.lam0 * (1.0 + float(np.dot(scheme.a, eps)))
