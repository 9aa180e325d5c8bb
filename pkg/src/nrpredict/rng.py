"""Portable seeded random streams.

Every stochastic step in the package draws from :class:`PortableRNG`. The raw
bit stream is numpy's PCG64 seeded through ``SeedSequence``, both of which are
documented as stable across platforms and numpy releases. Distributions are
derived here from raw 64-bit words so that results never depend on numpy's
(versioned) distribution samplers.
"""
from __future__ import annotations

import math

import numpy as np

RNG_ALGORITHM = "pcg64-seedseq/u53/acklam-invcdf/v1"

_U53 = 1.0 / 9007199254740992.0  # 2**-53

# Acklam's rational approximation to the standard normal quantile function.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_ppf(p):
    """Standard normal quantile via Acklam's approximation (|rel err| < 1.2e-9).

    Accepts scalars or arrays with entries in the open interval (0, 1).
    """
    p = np.asarray(p, dtype=np.float64)
    out = np.empty_like(p)
    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)

    q = np.sqrt(-2.0 * np.log(p[lo]))
    out[lo] = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
        ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)

    q = p[mid] - 0.5
    r = q * q
    out[mid] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
        (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)

    q = np.sqrt(-2.0 * np.log(1.0 - p[hi]))
    out[hi] = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
        ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    return out if out.ndim else float(out)


class PortableRNG:
    """Sequential random stream with platform-independent derived draws.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit seed.
    stream : int, optional
        Independent sub-stream selector; ``PortableRNG(s, k)`` and
        ``PortableRNG(s, j)`` never overlap for ``k != j``.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int, stream: int | None = None):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        if stream is None:
            ss = np.random.SeedSequence(seed)
        else:
            ss = np.random.SeedSequence(seed, spawn_key=(int(stream),))
        self._bits = np.random.PCG64(ss)

    def raw(self, size: int) -> np.ndarray:
        return self._bits.random_raw(size).astype(np.uint64)

    def uniform(self, size: int | None = None):
        """Doubles in [0, 1) from the top 53 bits of each word."""
        n = 1 if size is None else size
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * _U53
        return float(u[0]) if size is None else u

    def open_uniform(self, size: int | None = None):
        """Doubles in (0, 1), safe to feed to a quantile function."""
        n = 1 if size is None else size
        u = ((self.raw(n) >> np.uint64(11)).astype(np.float64) + 0.5) * _U53
        return float(u[0]) if size is None else u

    def normal(self, mean: float = 0.0, std: float = 1.0, size: int | None = None):
        z = norm_ppf(self.open_uniform(size))
        return mean + std * z

    def integers(self, high: int, size: int | None = None):
        """Uniform integers in [0, high)."""
        u = self.uniform(size)
        if size is None:
            return min(int(u * high), high - 1)
        return np.minimum((u * high).astype(np.int64), high - 1)

    def binomial(self, n: int, p: float) -> int:
        """Exact Binomial(n, p) as a sum of n Bernoulli trials."""
        if n <= 0 or p <= 0.0:
            if n > 0:
                self.raw(n)  # keep stream consumption independent of p
            return 0
        return int(np.count_nonzero(self.uniform(n) < p))

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``arange(n)``."""
        perm = np.arange(n, dtype=np.int64)
        if n < 2:
            return perm
        u = self.uniform(n - 1)
        for k, i in enumerate(range(n - 1, 0, -1)):
            j = min(int(u[k] * (i + 1)), i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def choice_subset(self, p: int, k: int) -> np.ndarray:
        """Sorted random subset of size k from range(p) (partial Fisher-Yates)."""
        pool = list(range(p))
        u = self.uniform(k)
        for i in range(k):
            j = i + min(int(u[i] * (p - i)), p - i - 1)
            pool[i], pool[j] = pool[j], pool[i]
        return np.sort(np.asarray(pool[:k], dtype=np.int64))


def logistic(x):
    if isinstance(x, np.ndarray):
        return 1.0 / (1.0 + np.exp(-x))
    return 1.0 / (1.0 + math.exp(-x))
