"""Zipfian rank sampling by rejection inversion.

Samples P(rank = i) proportional to 1/i^theta over ranks 1..n without
tabulating the distribution, so it is exact for any theta >= 0 and cheap even
at n = 10^6.  This is the rejection-inversion scheme of Hormann and
Derflinger for monotone discrete distributions; theta = 0 degenerates to
uniform and theta = 1 is handled through the log-limit helpers.
"""

from __future__ import annotations

import math


def _helper1(x: float) -> float:
    # log(1+x)/x, continuous at 0
    return math.log1p(x) / x if x != 0.0 else 1.0


def _helper2(x: float) -> float:
    # (exp(x)-1)/x, continuous at 0
    return math.expm1(x) / x if x != 0.0 else 1.0


class ZipfianSampler:
    def __init__(self, n: int, theta: float):
        if n < 1:
            raise ValueError("n must be >= 1")
        if theta < 0:
            raise ValueError("theta must be >= 0")
        self.n = n
        self.theta = theta
        self._h_x1 = self._h_integral(1.5) - 1.0
        self._h_n = self._h_integral(n + 0.5)
        self._s = 2.0 - self._h_integral_inverse(self._h_integral(2.5) - self._h(2.0))

    def _h(self, x: float) -> float:
        return math.exp(-self.theta * math.log(x))

    def _h_integral(self, x: float) -> float:
        log_x = math.log(x)
        return _helper2((1.0 - self.theta) * log_x) * log_x

    def _h_integral_inverse(self, x: float) -> float:
        t = x * (1.0 - self.theta)
        if t < -1.0:
            t = -1.0
        return math.exp(_helper1(t) * x)

    def sample(self, rng) -> int:
        if self.n == 1:
            return 1
        while True:
            u = self._h_n + rng.random() * (self._h_x1 - self._h_n)
            x = self._h_integral_inverse(u)
            k = int(x + 0.5)
            if k < 1:
                k = 1
            elif k > self.n:
                k = self.n
            if k - x <= self._s or u >= self._h_integral(k + 0.5) - self._h(k):
                return k

    def pmf(self, i: int) -> float:
        """Analytic probability of rank i, for distribution tests."""
        norm = sum(1.0 / j**self.theta for j in range(1, self.n + 1))
        return (1.0 / i**self.theta) / norm


def zipfian_sample(n: int, theta: float, rng) -> int:
    """One draw; build a ZipfianSampler directly when drawing many."""
    return ZipfianSampler(n, theta).sample(rng)
