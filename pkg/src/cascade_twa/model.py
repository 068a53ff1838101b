"""Experiment description: system parameters, drive schedules and initial states.

Time is measured in units of the single-atom excited-state lifetime.
"""

from dataclasses import dataclass, field

import numpy as np

from .validation import (
    ConfigError,
    check_beta,
    check_bloch_array,
    check_positive_float,
    check_positive_int,
)


@dataclass(frozen=True)
class DriveSchedule:
    """Piecewise-constant coherent input amplitude.

    ``segments`` is a sequence of ``(t_start, t_stop, alpha)``; ``|alpha|**2`` is
    the input photon flux. Outside every segment the input is vacuum.
    """

    segments: tuple = ()

    def __post_init__(self):
        segs = tuple((float(a), float(b), complex(c)) for a, b, c in self.segments)
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, alpha, t_stop=np.inf):
        return cls(((0.0, t_stop, alpha),))

    @property
    def is_vacuum(self):
        return all(alpha == 0 for _, _, alpha in self.segments)

    def check(self):
        last = -np.inf
        for t0, t1, alpha in self.segments:
            if not (t1 > t0):
                raise ConfigError(f"drive segment ({t0}, {t1}) has non-positive length")
            if t0 < last:
                raise ConfigError("drive segments overlap or are not time-ordered")
            if not np.isfinite(alpha):
                raise ConfigError("drive amplitude must be finite")
            last = t1

    def alpha(self, t):
        for t0, t1, alpha in self.segments:
            if t0 <= t < t1:
                return alpha
        return 0j

    def sample(self, times):
        """Amplitude at each of ``times``; a step starting at ``t`` uses ``alpha(t)``."""
        times = np.asarray(times, dtype=float)
        out = np.zeros(times.shape, dtype=complex)
        for t0, t1, alpha in self.segments:
            out[(times >= t0) & (times < t1)] = alpha
        return out


@dataclass(frozen=True)
class InitialState:
    """Product state given by one Bloch vector ``(u, v, w)`` per atom; ``w = +1`` is excited."""

    bloch: np.ndarray

    def __post_init__(self):
        bloch = np.array(self.bloch, dtype=float)
        if bloch.ndim == 1 and bloch.shape == (3,):
            bloch = bloch[None, :]
        bloch.setflags(write=False)
        object.__setattr__(self, "bloch", bloch)

    @property
    def n_atoms(self):
        return self.bloch.shape[0]

    @classmethod
    def uniform(cls, n_atoms, bloch):
        return cls(np.tile(np.asarray(bloch, dtype=float), (n_atoms, 1)))

    @classmethod
    def inverted(cls, n_atoms):
        return cls.uniform(n_atoms, (0.0, 0.0, 1.0))

    @classmethod
    def ground(cls, n_atoms):
        return cls.uniform(n_atoms, (0.0, 0.0, -1.0))

    @classmethod
    def pulse_area(cls, n_atoms, area):
        return cls.uniform(n_atoms, bloch_from_pulse_area(area))

    @classmethod
    def from_shorthand(cls, shorthand, n_atoms):
        """Build from ``"inverted"``, ``"ground"``, ``"pulse_area:<A>"``, a float
        pulse area, an explicit ``(N, 3)`` array, or an existing state."""
        if isinstance(shorthand, InitialState):
            return shorthand
        if isinstance(shorthand, str):
            key, _, arg = shorthand.strip().partition(":")
            key = key.strip().lower()
            if key == "inverted":
                return cls.inverted(n_atoms)
            if key == "ground":
                return cls.ground(n_atoms)
            if key == "pulse_area":
                try:
                    return cls.pulse_area(n_atoms, float(arg))
                except ValueError:
                    raise ConfigError(f"bad pulse area in initial state {shorthand!r}") from None
            raise ConfigError(f"unknown initial-state shorthand {shorthand!r}")
        if np.isscalar(shorthand):
            return cls.pulse_area(n_atoms, float(shorthand))
        return cls(check_bloch_array(shorthand))

    def ket(self):
        """Single-atom kets in the (e, g) basis; only defined for pure states."""
        kets = []
        for u, v, w in self.bloch:
            if abs(u * u + v * v + w * w - 1) > 1e-9:
                raise ValueError("ket() requires pure single-atom states")
            # |psi> = cos(t/2)|e> + e^{i p} sin(t/2)|g> up to phase, with <sigma> = (u - i v)/2
            theta = np.arccos(np.clip(w, -1, 1))
            kets.append(np.array([np.cos(theta / 2), np.exp(1j * np.arctan2(v, u)) * np.sin(theta / 2)]))
        return kets


@dataclass(frozen=True)
class SystemParams:
    n_atoms: int
    beta: np.ndarray
    drive: DriveSchedule = field(default_factory=DriveSchedule)
    dt: float = 1e-3
    t_end: float = 3.0
    output_stride: int = 10
    n_trajectories: int = 10_000
    seed: int = 0
    theta_min: float = 1e-6

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        if beta.ndim == 0 and isinstance(self.n_atoms, (int, np.integer)) and self.n_atoms > 0:
            beta = np.full(int(self.n_atoms), float(beta))
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if not isinstance(self.drive, DriveSchedule):
            object.__setattr__(self, "drive", DriveSchedule(self.drive))

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    @property
    def record_steps(self):
        return np.arange(0, self.n_steps + 1, self.output_stride)

    @property
    def record_times(self):
        return self.record_steps * self.dt

    @property
    def is_homogeneous(self):
        return bool(np.all(self.beta == self.beta[0]))


def bloch_from_pulse_area(area):
    """Bloch vector of ``cos(A/2)|g> - i sin(A/2)|e>``.

    With sigma_y = i(sigma - sigma^dag) this is ``(0, sin A, -cos A)``.
    """
    area = float(area)
    return (0.0, float(np.sin(area)), float(-np.cos(area)))


def validate(params, init=None):
    """Raise :class:`ConfigError` naming the first violated invariant."""
    check_positive_int(params.n_atoms, "n_atoms")
    check_beta(params.beta, params.n_atoms)
    params.drive.check()
    dt = check_positive_float(params.dt, "dt")
    t_end = check_positive_float(params.t_end, "t_end")
    if t_end < dt:
        raise ConfigError(f"t_end ({t_end}) must be at least dt ({dt})")
    check_positive_int(params.output_stride, "output_stride")
    check_positive_int(params.n_trajectories, "n_trajectories")
    if isinstance(params.seed, bool) or not isinstance(params.seed, (int, np.integer)):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {params.seed!r}")
    if not 0 <= params.seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {params.seed!r}")
    if not 0 < params.theta_min < np.pi / 2:
        raise ConfigError("theta_min must lie in (0, pi/2)")
    if init is not None:
        check_bloch_array(init.bloch, params.n_atoms)
