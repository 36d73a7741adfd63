"""Symmetric bounded perturbation laws for the couplings ``C(B)(1 + eps(B))``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("uniform", "epanechnikov", "rademacher")

# Below this |c t| the series for cf(t) - 1 is used; cancellation in the
# closed forms would otherwise cost digits that matter once powered up.
_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 12


def _sinc_m1_coeffs():
    # sin(x)/x - 1 = sum_{n>=1} (-1)^n x^{2n} / (2n+1)!
    return [(-1) ** n / math.factorial(2 * n + 1) for n in range(1, _SERIES_TERMS)]


def _epan_m1_coeffs():
    # 3 (sin u - u cos u) / u^3 - 1 = 3 sum_{n>=2} (-1)^{n+1} 2n u^{2n-2} / (2n+1)!
    return [3 * (-1) ** (n + 1) * 2 * n / math.factorial(2 * n + 1)
            for n in range(2, _SERIES_TERMS + 1)]


_COEFFS = {"uniform": _sinc_m1_coeffs(), "epanechnikov": _epan_m1_coeffs()}


def _even_series(x2, coeffs):
    """Horner evaluation of ``sum_j coeffs[j] * x2^(j+1)``."""
    acc = np.zeros_like(x2)
    for c in reversed(coeffs):
        acc = (acc + c) * x2
    return acc


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "uniform"
    half_width: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; choose from {KINDS}")
        if not 0.0 < self.half_width < 1.0:
            raise ValueError("half width must lie in (0, 1)")

    def __str__(self) -> str:
        return f"{self.kind}:{self.half_width:g}"

    @property
    def has_density(self) -> bool:
        return self.kind != "rademacher"

    @property
    def cf_decay(self) -> int:
        """Power of ``|t|^{-1}`` bounding ``|cf(t)|`` at infinity."""
        return {"uniform": 1, "epanechnikov": 2, "rademacher": 0}[self.kind]

    @property
    def variance(self) -> float:
        return self.abs_moment(2)

    @property
    def kurt4(self) -> float:
        """Fourth cumulant ``E eps^4 - 3 sigma^4``."""
        return self.abs_moment(4) - 3.0 * self.variance**2

    def abs_moment(self, s: float) -> float:
        c = self.half_width
        if self.kind == "uniform":
            return c**s / (s + 1.0)
        if self.kind == "epanechnikov":
            return 3.0 * c**s / ((s + 1.0) * (s + 3.0))
        return c**s

    # -- characteristic function ------------------------------------------

    def cf(self, t):
        """``E cos(t eps)``; real because the law is symmetric."""
        return 1.0 + self.cf_minus_one(t)

    def cf_minus_one(self, t):
        """``cf(t) - 1`` without cancellation near ``t = 0``."""
        x = self.half_width * np.abs(np.asarray(t, dtype=float))
        if self.kind == "rademacher":
            return -2.0 * np.sin(x / 2.0) ** 2
        out = np.empty_like(x)
        small = x < _SERIES_CUTOFF
        out[small] = _even_series(x[small] ** 2, _COEFFS[self.kind])
        xl = x[~small]
        if self.kind == "uniform":
            out[~small] = np.sin(xl) / xl - 1.0
        else:
            out[~small] = 3.0 * (np.sin(xl) - xl * np.cos(xl)) / xl**3 - 1.0
        return out

    def log_abs_cf(self, t):
        """``log|cf(t)|`` and ``sign cf(t)``, accurate for tiny ``t``."""
        y = self.cf_minus_one(t)
        with np.errstate(divide="ignore"):
            logabs = np.where(y > -0.5, np.log1p(np.maximum(y, -0.5)),
                              np.log(np.abs(1.0 + y)))
        return logabs, np.where(1.0 + y < 0.0, -1.0, 1.0)

    # -- density ------------------------------------------------------------

    def pdf(self, x):
        self._need_density()
        x = np.asarray(x, dtype=float)
        c = self.half_width
        inside = np.abs(x) <= c
        if self.kind == "uniform":
            return np.where(inside, 0.5 / c, 0.0)
        return np.where(inside, 0.75 / c * (1.0 - (x / c) ** 2), 0.0)

    def cdf(self, x):
        self._need_density()
        c = self.half_width
        z = np.clip(np.asarray(x, dtype=float) / c, -1.0, 1.0)
        if self.kind == "uniform":
            return 0.5 * (1.0 + z)
        return 0.5 + 0.75 * z - 0.25 * z**3

    def _need_density(self):
        if not self.has_density:
            raise ValueError(f"{self.kind} noise has no Lebesgue density")

    # -- sampling -------------------------------------------------------------

    def sample(self, count: int, seed) -> np.ndarray:
        """``count`` i.i.d. draws from an independent stream keyed by ``seed``."""
        rng = make_rng(seed)
        c = self.half_width
        if count == 0:
            return np.empty(0)
        if self.kind == "uniform":
            return rng.uniform(-c, c, count)
        if self.kind == "rademacher":
            return c * (2.0 * rng.integers(0, 2, count) - 1.0)
        # Devroye's three-uniform construction of the Epanechnikov kernel
        u = rng.uniform(-1.0, 1.0, (3, count))
        a = np.abs(u)
        pick2 = (a[2] >= a[1]) & (a[2] >= a[0])
        return c * np.where(pick2, u[1], u[2])


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


def parse_noise(text: str) -> NoiseSpec:
    """Parse the ``kind:half_width`` CLI spelling, e.g. ``uniform:0.5``."""
    kind, _, width = text.partition(":")
    return NoiseSpec(kind.strip(), float(width) if width else 0.5)
