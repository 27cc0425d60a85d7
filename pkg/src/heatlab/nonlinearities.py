"""Named scalar nonlinearities f0 with their growth data (m, K)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Nonlinearity:
    """Scalar map f with f(0) = 0 and df(0) = 0, applied componentwise.

    ``m`` and ``K`` describe the growth |df(w)| <= K |w|^(m-1) when the family
    satisfies a pure power bound (``pure_growth``).  ``lipschitz(M)`` always
    returns sup_{|w| <= M} |df(w)|, which is what the mean-value argument uses.
    """

    name: str
    m: float
    K: float = 1.0
    u_star: float = 0.0
    sign: float = 1.0

    def __post_init__(self):
        if self.name not in ("zero", "square", "flame", "power"):
            raise ValueError(f"unknown nonlinearity {self.name!r}")
        if self.name == "power" and self.m < 2:
            raise ValueError("power nonlinearity needs m >= 2 so that df(0) = 0")

    @classmethod
    def zero(cls):
        return cls("zero", m=2.0, K=0.0)

    @classmethod
    def square(cls, sign: float = 1.0):
        return cls("square", m=2.0, K=2.0, sign=sign)

    @classmethod
    def flame(cls, K: float = 1.0, u_star: float = 1.0):
        return cls("flame", m=3.0, K=K, u_star=u_star)

    @classmethod
    def power(cls, m: float = 3.0, sign: float = 1.0):
        return cls("power", m=float(m), K=float(m), sign=sign)

    @property
    def pure_growth(self) -> bool:
        return self.name in ("zero", "square", "power")

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        if self.name == "zero":
            return np.zeros_like(w)
        if self.name == "square":
            return self.sign * w * w
        if self.name == "flame":
            return self.K * w * w * (w - self.u_star)
        return self.sign * np.abs(w) ** (self.m - 1) * w

    def derivative(self, w):
        w = np.asarray(w, dtype=float)
        if self.name == "zero":
            return np.zeros_like(w)
        if self.name == "square":
            return 2.0 * self.sign * w
        if self.name == "flame":
            return self.K * (3.0 * w * w - 2.0 * self.u_star * w)
        return self.sign * self.m * np.abs(w) ** (self.m - 1)

    def lipschitz(self, M: float) -> float:
        """sup of |df| over [-M, M]."""
        M = abs(float(M))
        if self.name == "zero":
            return 0.0
        if self.name == "flame":
            # |3w^2 - 2u*w| is maximal at an endpoint or at the vertex w = u*/3
            cands = [M, -M]
            if abs(self.u_star) / 3 <= M:
                cands.append(self.u_star / 3)
            return self.K * max(abs(3 * w * w - 2 * self.u_star * w) for w in cands)
        return self.K * M ** (self.m - 1)

    def quadratic_lower_bound(self) -> float:
        """kappa > 0 with f(w) >= kappa w^2 for all w, or 0 when no such bound exists."""
        if self.name == "square" and self.sign > 0:
            return 1.0
        return 0.0
