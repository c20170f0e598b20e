"""Running AAoI / PAoI / network-AoI statistics with batch-means error bars."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import analytics


@dataclass
class MetricsAccumulator:
    n_eds: int
    warmup: int
    horizon: int
    n_batches: int = 10
    age_sum: np.ndarray = field(init=False)
    slots: int = field(init=False, default=0)
    peak_sum: np.ndarray = field(init=False)
    peak_count: np.ndarray = field(init=False)
    # histogram of the per-slot sum of ages (network average = sum / N)
    hist: Counter = field(init=False, default_factory=Counter)
    batch_age: np.ndarray = field(init=False)
    batch_slots: np.ndarray = field(init=False)
    batch_peak: np.ndarray = field(init=False)
    batch_peaks: np.ndarray = field(init=False)

    def __post_init__(self):
        N, B = self.n_eds, self.n_batches
        self.age_sum = np.zeros(N, dtype=np.int64)
        self.peak_sum = np.zeros(N, dtype=np.int64)
        self.peak_count = np.zeros(N, dtype=np.int64)
        self.batch_age = np.zeros(B, dtype=np.int64)
        self.batch_slots = np.zeros(B, dtype=np.int64)
        self.batch_peak = np.zeros(B, dtype=np.int64)
        self.batch_peaks = np.zeros(B, dtype=np.int64)

    @property
    def measured(self) -> int:
        return self.horizon - self.warmup

    def _batch(self, t: np.ndarray) -> np.ndarray:
        return (t - self.warmup) * self.n_batches // self.measured

    def record_block(self, t0: int, ages: np.ndarray, peak_slots: np.ndarray, peak_eds: np.ndarray,
                     peak_vals: np.ndarray) -> None:
        """Record ages of slots ``t0 .. t0 + len(ages) - 1`` and the peaks seen there.

        ``peak_*`` list each effective delivery: slot offset, ED, and the ED's
        age in that slot (just before its reset).
        """
        lo = max(self.warmup - t0, 0)
        hi = min(self.horizon - t0, len(ages))
        if hi <= lo:
            return
        a = ages[lo:hi]
        t = np.arange(t0 + lo, t0 + hi)
        b = self._batch(t)
        row = a.sum(axis=1)
        self.age_sum += a.sum(axis=0)
        self.slots += hi - lo
        self.batch_age += np.bincount(b, weights=row, minlength=self.n_batches).astype(np.int64)
        self.batch_slots += np.bincount(b, minlength=self.n_batches)
        keys, counts = np.unique(row, return_counts=True)
        self.hist.update(dict(zip(keys.tolist(), counts.tolist())))
        if len(peak_slots):
            m = (peak_slots >= lo) & (peak_slots < hi)
            ps, pe, pv = peak_slots[m], peak_eds[m], peak_vals[m]
            np.add.at(self.peak_sum, pe, pv)
            np.add.at(self.peak_count, pe, 1)
            pb = self._batch(t0 + ps)
            self.batch_peak += np.bincount(pb, weights=pv, minlength=self.n_batches).astype(np.int64)
            self.batch_peaks += np.bincount(pb, minlength=self.n_batches)

    def merge(self, other: "MetricsAccumulator") -> "MetricsAccumulator":
        if (self.n_eds, self.n_batches) != (other.n_eds, other.n_batches):
            raise ValueError("cannot merge accumulators of different shape")
        out = MetricsAccumulator(self.n_eds, self.warmup, self.horizon, self.n_batches)
        for name in ("age_sum", "peak_sum", "peak_count", "batch_age", "batch_slots", "batch_peak", "batch_peaks"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        out.slots = self.slots + other.slots
        out.hist = self.hist + other.hist
        return out

    # -- estimates ------------------------------------------------------------

    def aaoi_per_ed(self) -> np.ndarray:
        return self.age_sum / max(self.slots, 1)

    @property
    def aaoi(self) -> float:
        return float(self.age_sum.sum() / (max(self.slots, 1) * self.n_eds))

    def paoi_per_ed(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.peak_count > 0, self.peak_sum / np.maximum(self.peak_count, 1), np.nan)

    @property
    def paoi(self) -> float:
        v = self.paoi_per_ed()
        return float(np.nanmean(v)) if np.any(np.isfinite(v)) else float("nan")

    def _se(self, means: np.ndarray) -> float:
        means = means[np.isfinite(means)]
        if len(means) < 2:
            return float("nan")
        return float(np.std(means, ddof=1) / np.sqrt(len(means)))

    @property
    def aaoi_se(self) -> float:
        ok = self.batch_slots > 0
        return self._se(self.batch_age[ok] / (self.batch_slots[ok] * self.n_eds))

    @property
    def paoi_se(self) -> float:
        ok = self.batch_peaks > 0
        return self._se(self.batch_peak[ok] / self.batch_peaks[ok])

    def sums_and_pmf(self) -> tuple[np.ndarray, np.ndarray]:
        keys = np.array(sorted(self.hist), dtype=np.int64)
        counts = np.array([self.hist[k] for k in keys], dtype=float)
        return keys, counts / counts.sum()

    def ccdf(self, delta) -> np.ndarray:
        """Fraction of measured slots whose network-average AoI exceeds ``delta``."""
        keys, pmf = self.sums_and_pmf()
        cdf = np.cumsum(pmf)
        k = np.floor(np.asarray(delta, dtype=float) * self.n_eds + 1e-9)
        idx = np.searchsorted(keys, k, side="right")
        return 1.0 - np.where(idx > 0, cdf[np.maximum(idx - 1, 0)], 0.0)

    def quantile(self, q: float) -> float:
        keys, pmf = self.sums_and_pmf()
        i = int(np.searchsorted(np.cumsum(pmf), q - 1e-12))
        return float(keys[min(i, len(keys) - 1)] / self.n_eds)

    def ks_distance(self, p: float, q: float) -> float:
        """Max CDF gap to the i.i.d. network-AoI approximation, over the lattice."""
        keys, pmf = self.sums_and_pmf()
        dist = analytics.network_aoi_distribution(self.n_eds, p, q)
        hi = max(int(keys[-1]), int(dist.sums[-1]))
        grid = np.arange(self.n_eds, hi + 1)
        emp = np.zeros(len(grid))
        np.add.at(emp, keys - self.n_eds, pmf)
        gap = np.abs(np.cumsum(emp) - dist.cdf_at_sum(grid))
        return float(gap.max())
