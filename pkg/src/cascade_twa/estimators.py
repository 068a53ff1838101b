"""scikit-learn style front ends.

``fit(X)`` takes an initial state (shorthand string, pulse area, ``(N, 3)``
Bloch array or :class:`InitialState`) and runs the engine; ``predict(t)``
interpolates ``[P, G2, g2, S2]`` onto arbitrary times. Hyper-parameters live in
``__init__`` so ``get_params``/``set_params``/``clone`` work as usual.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .model import DriveSchedule, InitialState, SystemParams, validate
from .oracle import DT_ORACLE, evolve_cascaded_exact, evolve_dicke
from .simulation import run_ensemble

COLUMNS = ("P", "G2", "g2", "S2")


def _drive(alpha):
    if isinstance(alpha, DriveSchedule):
        return alpha
    if alpha is None or alpha == 0:
        return DriveSchedule()
    return DriveSchedule.constant(alpha)


class _SeriesEstimator(BaseEstimator):

    def _params(self):
        return SystemParams(
            n_atoms=self.n_atoms, beta=self.beta, drive=_drive(self.alpha), dt=self.dt,
            t_end=self.t_end, output_stride=self.output_stride,
            n_trajectories=getattr(self, "n_trajectories", 2), seed=getattr(self, "seed", 0),
        )

    def _store(self, series, params, init):
        self.series_ = series
        self.params_ = params
        self.init_ = init
        self.t_ = series.t
        self.t_limit_ = series.t_limit
        self.n_atoms_ = params.n_atoms
        return self

    def predict(self, t):
        """Linear interpolation of ``[P, G2, g2, S2]``; shape ``(len(t), 4)``."""
        check_is_fitted(self, "series_")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = self.series_
        if np.any(t < s.t[0]) or np.any(t > s.t[-1]):
            raise ValueError(f"prediction times must lie in [{s.t[0]:g}, {s.t[-1]:g}]")
        return np.column_stack([np.interp(t, s.t, getattr(s, c)) for c in COLUMNS])

    def score(self, t, y):
        """Negative mean squared error of predicted P against ``y``."""
        return -float(np.mean((self.predict(t)[:, 0] - np.asarray(y)) ** 2))


class TWASimulator(_SeriesEstimator):
    """Truncated-Wigner ensemble for the cascaded chain."""

    def __init__(self, n_atoms=10, beta=1.0, alpha=0.0, dt=1e-3, t_end=3.0, output_stride=10,
                 n_trajectories=10_000, seed=0, theta_min=1e-6, workers=None, resamples=400):
        self.n_atoms = n_atoms
        self.beta = beta
        self.alpha = alpha
        self.dt = dt
        self.t_end = t_end
        self.output_stride = output_stride
        self.n_trajectories = n_trajectories
        self.seed = seed
        self.theta_min = theta_min
        self.workers = workers
        self.resamples = resamples

    def _params(self):
        p = super()._params()
        return SystemParams(**{**p.__dict__, "theta_min": self.theta_min})

    def fit(self, X="inverted", y=None):
        params = self._params()
        init = InitialState.from_shorthand(X, params.n_atoms)
        validate(params, init)
        series = run_ensemble(params, init, workers=self.workers, resamples=self.resamples)
        return self._store(series, params, init)


class CascadedMasterEquation(_SeriesEstimator):
    """Exact density-matrix solution, up to eight atoms."""

    def __init__(self, n_atoms=2, beta=1.0, alpha=0.0, dt=1e-3, t_end=3.0, output_stride=10,
                 dt_oracle=DT_ORACLE, path="auto"):
        self.n_atoms = n_atoms
        self.beta = beta
        self.alpha = alpha
        self.dt = dt
        self.t_end = t_end
        self.output_stride = output_stride
        self.dt_oracle = dt_oracle
        self.path = path

    def fit(self, X="inverted", y=None):
        params = self._params()
        init = X if isinstance(X, np.ndarray) and X.ndim == 2 and X.shape[1] != 3 else \
            InitialState.from_shorthand(X, params.n_atoms)
        if isinstance(init, InitialState):
            validate(params, init)
        series = evolve_cascaded_exact(params, init, params.record_times, self.dt_oracle, self.path)
        return self._store(series, params, init)


class DickeModel(_SeriesEstimator):
    """Symmetric-sector collective decay with unit collective rate."""

    def __init__(self, n_atoms=10, alpha=0.0, dt=1e-3, t_end=3.0, output_stride=10, dt_oracle=DT_ORACLE):
        self.n_atoms = n_atoms
        self.alpha = alpha
        self.dt = dt
        self.t_end = t_end
        self.output_stride = output_stride
        self.dt_oracle = dt_oracle

    @property
    def beta(self):
        return 1.0

    def fit(self, X="inverted", y=None):
        params = self._params()
        series = evolve_dicke(params.n_atoms, params.drive, params.record_times, X, self.dt_oracle)
        return self._store(series, params, X)
