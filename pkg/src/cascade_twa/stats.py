"""Ensemble statistics: standard errors, bootstrap bands for ratio estimators,
a streaming accumulator for large trajectory ensembles, and convergence checks."""

from dataclasses import dataclass, field

import numpy as np

ONE_SIGMA = (15.865525393145708, 84.13447460685429)  # percentiles of a normal at -/+ 1 sigma


@dataclass(frozen=True)
class BatchSummary:
    n: int
    mean: complex
    sem: float
    lower: float = None
    upper: float = None
    unbounded: bool = False


def mean_sem(samples):
    """Sample mean and standard error along axis 0."""
    samples = np.asarray(samples)
    n = samples.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    mean = samples.mean(axis=0)
    sem = np.std(samples, axis=0, ddof=1) / np.sqrt(n)
    if np.ndim(mean) == 0:
        mean = mean.item()
        sem = float(sem)
    return BatchSummary(n, mean, sem)


def ratio_of_means(num, den, power=2):
    return np.mean(num, axis=0) / np.mean(den, axis=0) ** power


def bootstrap_ratio(num, den, resamples=400, seed=0, power=2, tol=1e-12, chunk=64):
    """Percentile bootstrap one-sigma band for ``mean(num) / mean(den)**power``.

    ``num`` and ``den`` are paired along axis 0 (one row per trajectory); extra
    axes (e.g. time) are handled column-wise. The band is flagged unbounded when
    the denominator mean, or any resampled denominator mean, is within ``tol``
    of zero.
    """
    if resamples < 200:
        raise ValueError("bootstrap needs at least 200 resamples")
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    if num.shape != den.shape:
        raise ValueError("numerator and denominator samples must be paired")
    n = num.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    flat_num = num.reshape(n, -1)
    flat_den = den.reshape(n, -1)

    rng = np.random.default_rng(seed)
    boot_num = np.empty((resamples, flat_num.shape[1]))
    boot_den = np.empty_like(boot_num)
    for start in range(0, resamples, chunk):
        stop = min(start + chunk, resamples)
        counts = rng.multinomial(n, np.full(n, 1.0 / n), size=stop - start).astype(float)
        boot_num[start:stop] = counts @ flat_num / n
        boot_den[start:stop] = counts @ flat_den / n

    mean_den = flat_den.mean(axis=0)
    unbounded = (np.abs(mean_den) <= tol) | np.any(np.abs(boot_den) <= tol, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        estimate = flat_num.mean(axis=0) / mean_den**power
        lo, hi = np.percentile(boot_num / boot_den**power, ONE_SIGMA, axis=0)
    lo = np.where(unbounded, -np.inf, lo)
    hi = np.where(unbounded, np.inf, hi)

    shape = num.shape[1:]
    if shape == ():
        return BatchSummary(n, float(estimate[0]), float((hi[0] - lo[0]) / 2),
                            float(lo[0]), float(hi[0]), bool(unbounded[0]))
    return BatchSummary(n, estimate.reshape(shape), ((hi - lo) / 2).reshape(shape),
                        lo.reshape(shape), hi.reshape(shape), unbounded.reshape(shape))


@dataclass
class EnsembleAccumulator:
    """Running sums over trajectories for means, standard errors and a Poisson
    bootstrap of ``mean(ratio_num) / mean(ratio_den)**2``.

    Every trajectory receives ``resamples`` independent Poisson(1) weights, which
    keeps the bootstrap streaming (block size 1) without storing trajectories.
    Results depend only on the order of ``update`` calls and their contents.
    """

    resamples: int = 400
    ratio_num: str = "w_n2"
    ratio_den: str = "w_n1"
    n: int = 0
    sums: dict = field(default_factory=dict)
    sq_sums: dict = field(default_factory=dict)
    boot_num: np.ndarray = None
    boot_den: np.ndarray = None
    boot_w: np.ndarray = None

    def update(self, records, rng):
        """Add a batch: ``records`` maps names to ``(n_batch, T)`` arrays."""
        batch_n = None
        for key, values in records.items():
            values = np.asarray(values)
            batch_n = values.shape[0]
            s = values.sum(axis=0)
            q = np.stack([(values.real**2).sum(axis=0), (values.imag**2).sum(axis=0)])
            if key in self.sums:
                self.sums[key] = self.sums[key] + s
                self.sq_sums[key] = self.sq_sums[key] + q
            else:
                self.sums[key] = s
                self.sq_sums[key] = q
        weights = rng.poisson(1.0, size=(batch_n, self.resamples)).astype(float)
        num = np.asarray(records[self.ratio_num]).real
        den = np.asarray(records[self.ratio_den]).real
        bn, bd, bw = weights.T @ num, weights.T @ den, weights.sum(axis=0)
        if self.boot_num is None:
            self.boot_num, self.boot_den, self.boot_w = bn, bd, bw
        else:
            self.boot_num = self.boot_num + bn
            self.boot_den = self.boot_den + bd
            self.boot_w = self.boot_w + bw
        self.n += batch_n

    def mean(self, key):
        return self.sums[key] / self.n

    def sem(self, key, part="real"):
        """Standard error of the real (or imaginary) part."""
        if self.n < 2:
            raise ValueError("need at least 2 trajectories for a standard error")
        m = self.mean(key)
        m = m.real if part == "real" else np.imag(m)
        q = self.sq_sums[key][0 if part == "real" else 1]
        var = (q - self.n * m * m) / (self.n - 1)
        return np.sqrt(np.maximum(var, 0.0) / self.n)

    def ratio_band(self, tol=1e-12):
        """``(estimate, lower, upper, unbounded)`` for the squared-denominator ratio."""
        den_mean = self.mean(self.ratio_den).real
        w = np.maximum(self.boot_w, 1.0)[:, None]
        bn = self.boot_num / w
        bd = self.boot_den / w
        unbounded = (np.abs(den_mean) <= tol) | np.any(np.abs(bd) <= tol, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            estimate = self.mean(self.ratio_num).real / den_mean**2
            lo, hi = np.percentile(bn / bd**2, ONE_SIGMA, axis=0)
        return estimate, np.where(unbounded, -np.inf, lo), np.where(unbounded, np.inf, hi), unbounded


@dataclass(frozen=True)
class ConvergenceReport:
    max_dev_P: float
    max_dev_g2: float
    threshold: float
    passed: bool
    n_points: int


def _sem_units(a, b, sa, sb):
    diff = np.abs(np.asarray(a) - np.asarray(b))
    scale = np.hypot(sa, sb)
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.where(diff == 0, 0.0, diff / scale)
    return dev


def convergence_report(reference, candidate, threshold=2.0, t_max=None):
    """Max discrepancy in P and g2 between two series, in combined-error units.

    ``candidate`` may sit on a finer grid; it is decimated onto the reference
    grid, whose times must all be present in it. Times at or beyond the
    reference ``t_limit`` (or ``t_max`` if given) are excluded.
    """
    t_ref = np.asarray(reference.t)
    t_can = np.asarray(candidate.t)
    pos = np.searchsorted(t_can, t_ref - 1e-9)
    pos = np.minimum(pos, t_can.size - 1)
    if not np.allclose(t_can[pos], t_ref, rtol=0, atol=1e-9):
        raise ValueError("grid mismatch: reference times are not a subset of the candidate grid")
    limit = reference.t_limit if t_max is None else t_max
    keep = t_ref < limit
    if not keep.any():
        raise ValueError("no common times before the comparison limit")

    def pick(series, name, idx):
        return np.asarray(getattr(series, name))[idx]

    ref_idx = np.flatnonzero(keep)
    can_idx = pos[keep]
    dev_p = _sem_units(pick(reference, "P", ref_idx), pick(candidate, "P", can_idx),
                       pick(reference, "sem_P", ref_idx), pick(candidate, "sem_P", can_idx))
    dev_g = _sem_units(pick(reference, "g2", ref_idx), pick(candidate, "g2", can_idx),
                       pick(reference, "err_g2", ref_idx), pick(candidate, "err_g2", can_idx))
    max_p = float(np.max(dev_p))
    max_g = float(np.max(dev_g))
    return ConvergenceReport(max_p, max_g, threshold, bool(max_p < threshold and max_g < threshold), int(keep.sum()))
