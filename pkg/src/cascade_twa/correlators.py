"""Output-field correlators: per-trajectory Weyl-moment propagation along the
chain and ensemble estimates of E, P, G2, g2 and <S^2>."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .phase_space import weyl_spin_symbols
from .stats import EnsembleAccumulator

LIMIT_FRACTION = 1e-3  # t_limit leaves N / 1000 photons still to be emitted


class ShortWindowWarning(UserWarning):
    """The simulated window is too short to place t_limit meaningfully."""


@dataclass(frozen=True)
class FieldMoments:
    w_a: complex
    w_n1: complex
    w_n2: complex
    w_12: complex
    w_02: complex

    @classmethod
    def coherent(cls, alpha):
        alpha = complex(alpha)
        p = abs(alpha) ** 2
        return cls(alpha, complex(p), complex(p * p), p * alpha, alpha * alpha)


@dataclass
class TrajectoryBatch:
    """Per-trajectory records on a shared time grid, shape ``(n_traj, T)``."""

    t: np.ndarray
    w_a: np.ndarray
    w_n1: np.ndarray
    w_n2: np.ndarray
    s2: np.ndarray
    excitation: np.ndarray = None

    def records(self):
        out = {"w_a": self.w_a, "w_n1": self.w_n1, "w_n2": self.w_n2, "s2": self.s2}
        if self.excitation is not None:
            out["excitation"] = self.excitation
        return out


@dataclass
class CorrelatorSeries:
    t: np.ndarray
    E: np.ndarray
    P: np.ndarray
    G2: np.ndarray
    g2: np.ndarray
    S2: np.ndarray
    sem_P: np.ndarray
    sem_G2: np.ndarray
    err_g2: np.ndarray
    sem_S2: np.ndarray
    t_limit: float
    beyond_limit: np.ndarray
    g2_lo: np.ndarray = None
    g2_hi: np.ndarray = None
    sem_E: np.ndarray = None  # (2, T): real and imaginary parts
    excitation: np.ndarray = None
    sem_excitation: np.ndarray = None
    imag_P: np.ndarray = None
    imag_G2: np.ndarray = None
    t_limit_warning: bool = False
    n_trajectories: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.g2_lo is None:
            self.g2_lo = self.g2 - self.err_g2
        if self.g2_hi is None:
            self.g2_hi = self.g2 + self.err_g2
        if self.sem_E is None:
            self.sem_E = np.zeros((2, len(self.t)))


def propagate_field_moments(omega, beta, alpha):
    """Single pass over the chain returning the post-chain :class:`FieldMoments`."""
    beta = np.broadcast_to(np.asarray(beta, dtype=float), omega.theta.shape)
    w_sigma, w_pop, _ = weyl_spin_symbols(omega.theta, omega.phi)
    m = FieldMoments.coherent(alpha)
    w_a, w_n1, w_n2, w_12, w_02 = m.w_a, m.w_n1, m.w_n2, m.w_12, m.w_02
    for b, ws, wp in zip(beta, w_sigma, w_pop):
        sb = np.sqrt(b)
        wsc = np.conj(ws)
        n1 = w_n1 + 1j * sb * (wsc * w_a - np.conj(wsc * w_a)) + b * wp
        n2 = 2j * sb * (wsc * w_12 - np.conj(wsc * w_12)) + w_n2 + 4 * b * w_n1 * wp
        m12 = -1j * sb * (2 * w_n1 * ws - wsc * w_02) + w_12 + 2 * b * wp * w_a
        m02 = w_02 - 2j * sb * ws * w_a
        w_a = w_a - 1j * sb * ws
        w_n1, w_n2, w_12, w_02 = n1, n2, m12, m02
    return FieldMoments(complex(w_a), complex(w_n1), complex(w_n2), complex(w_12), complex(w_02))


def s_squared_symbol(omega):
    """Symbol of the total angular momentum squared.

    Same-atom terms use (sigma^a)^2 = 1, giving 3/4 per atom; cross terms factorise.
    """
    _, _, pauli = weyl_spin_symbols(omega.theta, omega.phi)
    n = omega.theta.shape[-1]
    cross = sum(p.sum(axis=-1) ** 2 - (p * p).sum(axis=-1) for p in pauli)
    return 0.75 * n + 0.25 * cross


def _trapezoid_tail(t, p):
    """``tail[i] = integral of p from t[i] to t[-1]`` by the trapezoid rule."""
    seg = 0.5 * (p[1:] + p[:-1]) * np.diff(t)
    tail = np.zeros_like(np.asarray(t, dtype=float))
    tail[:-1] = np.cumsum(seg[::-1])[::-1]
    return tail


def _t_limit(t, P, n_atoms):
    t = np.asarray(t, dtype=float)
    P = np.asarray(P, dtype=float)
    target = n_atoms * LIMIT_FRACTION
    tail = _trapezoid_tail(t, P)
    hits = np.flatnonzero(tail >= target)
    if hits.size == 0:
        return float(t[-1]), False
    return float(t[hits[-1]]), True


def compute_t_limit(t, P, n_atoms):
    """Latest grid time after which at least ``N/1000`` photons remain to be emitted.

    Returns the window end, with a :class:`ShortWindowWarning`, if the whole
    window carries less than that.
    """
    t_limit, ok = _t_limit(t, P, n_atoms)
    if not ok:
        warnings.warn(
            f"integrated flux over the window is below N/1000 = {n_atoms * LIMIT_FRACTION:g}; "
            "t_limit set to the window end",
            ShortWindowWarning,
            stacklevel=2,
        )
    return t_limit


def series_from_accumulator(t, acc, n_atoms):
    t = np.asarray(t, dtype=float)
    E = acc.mean("w_a")
    n1 = acc.mean("w_n1")
    n2 = acc.mean("w_n2")
    g2, lo, hi, _ = acc.ratio_band()
    t_limit, ok = _t_limit(t, n1.real, n_atoms)
    exc = acc.mean("excitation").real if "excitation" in acc.sums else None
    return CorrelatorSeries(
        t=t,
        E=E,
        P=n1.real,
        G2=n2.real,
        g2=g2,
        S2=acc.mean("s2").real,
        sem_P=acc.sem("w_n1"),
        sem_G2=acc.sem("w_n2"),
        err_g2=(hi - lo) / 2,
        sem_S2=acc.sem("s2"),
        t_limit=t_limit,
        beyond_limit=t > t_limit,
        g2_lo=lo,
        g2_hi=hi,
        sem_E=np.stack([acc.sem("w_a", "real"), acc.sem("w_a", "imag")]),
        excitation=exc,
        sem_excitation=acc.sem("excitation") if exc is not None else None,
        imag_P=n1.imag,
        imag_G2=n2.imag,
        t_limit_warning=not ok,
        n_trajectories=acc.n,
    )


def estimate_series(batch, n_atoms, resamples=400, seed=0, chunk=1024):
    """Ensemble estimates from a :class:`TrajectoryBatch`.

    g2 is the ratio of ensemble means, with a bootstrap one-sigma band.
    """
    n = batch.w_n1.shape[0] if batch is not None else 0
    if n == 0:
        raise ValueError("empty trajectory batch")
    t = np.asarray(batch.t)
    for name, values in batch.records().items():
        if np.shape(values) != (n, t.size):
            raise ValueError(f"record {name!r} does not match the batch time grid")
    acc = EnsembleAccumulator(resamples=resamples)
    records = batch.records()
    for i, start in enumerate(range(0, n, chunk)):
        part = {k: v[start:start + chunk] for k, v in records.items()}
        acc.update(part, np.random.default_rng([seed, i]))
    return series_from_accumulator(t, acc, n_atoms)
