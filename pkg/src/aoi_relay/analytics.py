"""Closed-form AoI results for ALOHA access through K relays with an ideal
second hop: capture probability, the AAoI/PAoI lower bound, the stationary
AoI distribution and its n-fold convolution, and the approximate distribution
of the network-average AoI.

Probabilities are assembled in log space and exponentiated last.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TAIL_MASS = 1e-12


@dataclass(frozen=True)
class BoundInputs:
    n_eds: int
    activation_prob: float
    n_channels: int
    n_relays: int
    erasure_p1: float

    @classmethod
    def from_config(cls, cfg) -> "BoundInputs":
        eps = cfg.erasure_p1
        if not isinstance(eps, (int, float)):
            eps = float(np.mean(eps))
        if cfg.hetero_eps1 is not None:
            eps = 0.5 * (cfg.hetero_eps1[0] + cfg.hetero_eps1[1])
        return cls(cfg.n_eds, cfg.activation_prob, cfg.n_channels, cfg.n_relays, float(eps))


@dataclass(frozen=True)
class BoundResult:
    q: float
    aaoi: float
    paoi: float
    p_ratio: float  # pQ / (1 - pQ)


def log_binom_pmf(n: int, q: float) -> np.ndarray:
    """log of Binomial(n, q) pmf at 0..n, coefficients by multiplicative recurrence."""
    out = np.full(n + 1, -np.inf)
    if q <= 0.0:
        out[0] = 0.0
        return out
    if q >= 1.0:
        out[n] = 0.0
        return out
    k = np.arange(n)
    log_c = np.concatenate(([0.0], np.cumsum(np.log((n - k) / (k + 1.0)))))
    j = np.arange(n + 1)
    return log_c + j * math.log(q) + (n - j) * math.log1p(-q)


def prob_n_active(n: int, N: int, p: float) -> float:
    """Probability that exactly ``n`` of the other ``N - 1`` EDs are active."""
    if not 0 <= n <= N - 1:
        return 0.0
    return float(np.exp(log_binom_pmf(N - 1, p)[n]))


def prob_u_same_channel(u: int, n: int, F: int) -> float:
    """Probability that ``u`` of ``n`` other active EDs picked the target's channel."""
    if not 0 <= u <= n:
        return 0.0
    return float(np.exp(log_binom_pmf(n, 1.0 / F)[u]))


def capture_prob(u: int, eps1: float) -> float:
    """Probability one relay captures the target when ``u`` EDs share its channel."""
    return (1.0 - eps1) * eps1 ** u


def success_prob(inputs: BoundInputs, collider_eps1: float | None = None) -> float:
    """Probability Q that an active ED's packet is captured by at least one relay.

    ``collider_eps1`` overrides the erasure rate of the interfering EDs
    (per-ED approximation for heterogeneous networks).
    """
    N, p, F, K, eps = (inputs.n_eds, inputs.activation_prob, inputs.n_channels,
                       inputs.n_relays, inputs.erasure_p1)
    ce = eps if collider_eps1 is None else collider_eps1
    qt = (1.0 - eps) * np.power(ce, np.arange(N, dtype=float))
    with np.errstate(divide="ignore"):
        # 1 - (1 - qt)^K, accurate for tiny qt and exact at qt = 1
        reach = -np.expm1(K * np.log1p(-qt))
    log_pn = log_binom_pmf(N - 1, p)
    total = 0.0
    for n in range(N):
        if log_pn[n] == -np.inf:
            continue
        pu = np.exp(log_binom_pmf(n, 1.0 / F))
        total += math.exp(log_pn[n]) * float(pu @ reach[: n + 1])
    return min(max(total, 0.0), 1.0)


def aoi_bound(inputs: BoundInputs) -> BoundResult:
    q = success_prob(inputs)
    pq = inputs.activation_prob * q
    if pq <= 0.0:
        return BoundResult(q, math.inf, math.inf, 0.0)
    return BoundResult(q, 1.0 / pq, 1.0 / pq, pq / (1.0 - pq) if pq < 1.0 else math.inf)


def stationary_pmf(a, p: float, q: float):
    """Stationary AoI pmf ``pQ (1 - pQ)^(a - 1)`` for a >= 1."""
    pq = p * q
    a = np.asarray(a, dtype=float)
    if pq >= 1.0:
        val = np.where(a == 1, 1.0, 0.0)
    elif pq <= 0.0:
        val = np.zeros_like(a)
    else:
        val = np.where(a >= 1, np.exp(math.log(pq) + (np.maximum(a, 1) - 1) * math.log1p(-pq)), 0.0)
    return float(val) if val.ndim == 0 else val


def truncation_point(p: float, q: float, tail: float = TAIL_MASS) -> int:
    """Smallest a_max with P{AoI > a_max} <= tail."""
    pq = p * q
    if pq >= 1.0:
        return 1
    return max(1, math.ceil(math.log(tail) / math.log1p(-pq)))


def stationary_mean(p: float, q: float, tail: float = TAIL_MASS) -> tuple[float, float]:
    """Mean AoI by direct summation of the pmf; returns ``(mean, mass_defect)``."""
    a = np.arange(1, truncation_point(p, q, tail) + 1)
    pmf = stationary_pmf(a, p, q)
    return float(np.sum(a * pmf)), float(1.0 - np.sum(pmf))


def convolved_pmf_closed(n: int, delta, p: float, q: float):
    """pmf of the sum of ``n`` i.i.d. stationary AoI values, at ``delta``.

    ``P^n (1 - pQ)^delta / (n - 1)! * (delta - 1)! / (delta - n)!`` for
    delta >= n, zero below.
    """
    pq = p * q
    d = np.asarray(delta, dtype=float)
    if pq >= 1.0:
        val = np.where(d == n, 1.0, 0.0)
        return float(val) if val.ndim == 0 else val
    logv = _log_sum_pmf(np.maximum(d, n), n, pq)
    val = np.where(d >= n, np.exp(logv), 0.0)
    return float(val) if val.ndim == 0 else val


def _log_sum_pmf(x: np.ndarray, n: int, pq: float) -> np.ndarray:
    # log of P^n (1 - pQ)^x / (n - 1)! * Gamma(x) / Gamma(x - n + 1), x >= n
    lg = np.vectorize(math.lgamma, otypes=[float])
    log_P = math.log(pq) - math.log1p(-pq)
    return n * log_P + x * math.log1p(-pq) - math.lgamma(n) + lg(x) - lg(x - n + 1)


def network_aoi_pmf(delta, N: int, p: float, q: float):
    """Approximate pmf of the network-average AoI on the lattice {k/N : k >= N}.

    Gamma-function form of the N-fold convolution evaluated at ``delta * N``;
    log-gamma keeps it finite for large N and delta.
    """
    pq = p * q
    d = np.asarray(delta, dtype=float)
    if pq >= 1.0:
        val = np.where(np.isclose(d, 1.0), 1.0, 0.0)
    else:
        x = d * N
        ok = x >= N - 1e-9
        val = np.where(ok, np.exp(_log_sum_pmf(np.maximum(x, N), N, pq)), 0.0)
    return float(val) if val.ndim == 0 else val


@dataclass
class LatticeDistribution:
    """Network-average AoI distribution tabulated on k/N, k = N .. k_max."""

    n_eds: int
    sums: np.ndarray  # k
    pmf: np.ndarray
    defect: float  # 1 - tabulated mass

    @property
    def delta(self) -> np.ndarray:
        return self.sums / self.n_eds

    def cdf_at_sum(self, k) -> np.ndarray:
        """P{sum of ages <= k}."""
        c = np.concatenate(([0.0], np.cumsum(self.pmf)))
        idx = np.clip(np.asarray(k) - self.n_eds + 1, 0, len(self.pmf))
        return c[idx]

    def ccdf(self, delta) -> np.ndarray:
        """P{network-average AoI > delta}."""
        k = np.floor(np.asarray(delta, dtype=float) * self.n_eds + 1e-9).astype(np.int64)
        return 1.0 - self.cdf_at_sum(k)


def network_aoi_distribution(N: int, p: float, q: float, tail: float = TAIL_MASS) -> LatticeDistribution:
    pq = p * q
    if pq >= 1.0:
        return LatticeDistribution(N, np.array([N]), np.array([1.0]), 0.0)
    mean = N / pq
    sd = math.sqrt(N * (1 - pq)) / pq
    k_max = int(mean + 10 * sd + 50)
    while True:
        sums = np.arange(N, k_max + 1)
        pmf = np.exp(_log_sum_pmf(sums.astype(float), N, pq))
        defect = 1.0 - float(pmf.sum())
        if defect <= tail or k_max > 50 * mean + 10_000:
            return LatticeDistribution(N, sums, pmf, defect)
        k_max *= 2


def network_aoi_ccdf(delta, N: int, p: float, q: float):
    """P{network-average AoI > delta} under the i.i.d. approximation."""
    if np.any(np.asarray(delta) < 1):
        raise ValueError("network-average AoI is at least 1")
    val = network_aoi_distribution(N, p, q).ccdf(delta)
    return float(val) if np.ndim(val) == 0 else val


def _golden(f, a: float, b: float, tol: float = 1e-9) -> float:
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (a + b) / 2


def optimize_activation(N: int, F: int, K: int, eps1: float, step: float = 1e-3) -> float:
    """Activation probability minimizing the AAoI lower bound over (0, 1]."""

    def aaoi(p: float) -> float:
        return aoi_bound(BoundInputs(N, p, F, K, eps1)).aaoi

    grid = np.arange(1, int(round(1 / step)) + 1) * step
    vals = np.array([aaoi(p) for p in grid])
    i = int(np.argmin(vals))
    rtol = 1e-12
    left, right = vals[: i + 1], vals[i:]
    if np.any(np.diff(left) > rtol * np.abs(left[1:])) or np.any(np.diff(right) < -rtol * np.abs(right[:-1])):
        raise RuntimeError("AAoI bound is not unimodal in p on the scan grid")
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    p_star = _golden(aaoi, lo, hi)
    # the optimum may sit on the boundary p = 1
    return 1.0 if aaoi(1.0) <= aaoi(p_star) else p_star
