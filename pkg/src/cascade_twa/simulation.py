"""Trajectory-parallel ensemble runner.

Trajectory ``i`` owns the generator ``trajectory_rng(seed, i)``: it samples its
initial angles from it and then integrates with it. Trajectories are grouped in
fixed-size chunks that are reduced in index order, so results are bit-identical
for any worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._kernels import run_trajectory
from .correlators import TrajectoryBatch, series_from_accumulator
from .model import validate
from .phase_space import sample_initial
from .sde import trajectory_rng
from .stats import EnsembleAccumulator

CHUNK = 256
WORKERS_ENV = "CASCADE_TWA_WORKERS"
BOOTSTRAP_STREAM = 1


def default_workers():
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class _Trajectory:
    """Per-run constants plus the work for a single trajectory index."""

    def __init__(self, params, init):
        self.params = params
        self.init = init
        beta = np.asarray(params.beta, dtype=float)
        self.sqrt_beta = np.sqrt(beta)
        self.loss = 1.0 - beta
        self.sqrt_loss = np.sqrt(self.loss)
        self.alpha = params.drive.sample(np.arange(params.n_steps + 1) * params.dt)
        self.n_records = params.n_steps // params.output_stride + 1

    def __call__(self, index):
        p = self.params
        rng = trajectory_rng(p.seed, index)
        omega = sample_initial(self.init, rng)
        theta = omega.theta.copy()
        phi = omega.phi.copy()
        T = self.n_records
        out_a = np.empty(T, dtype=complex)
        out_n1 = np.empty(T, dtype=complex)
        out_n2 = np.empty(T, dtype=complex)
        out_s2 = np.empty(T)
        out_exc = np.empty(T)
        run_trajectory(theta, phi, self.sqrt_beta, self.loss, self.sqrt_loss, self.alpha,
                       p.dt, p.n_steps, p.output_stride, p.theta_min, rng,
                       out_a, out_n1, out_n2, out_s2, out_exc)
        return out_a, out_n1, out_n2, out_s2, out_exc


def _stack(results):
    keys = ("w_a", "w_n1", "w_n2", "s2", "excitation")
    return {k: np.stack([r[i] for r in results]) for i, k in enumerate(keys)}


def run_ensemble(params, init, workers=None, resamples=400, n_trajectories=None,
                 keep_trajectories=False):
    """Simulate the ensemble and return a :class:`CorrelatorSeries`.

    With ``keep_trajectories`` a :class:`TrajectoryBatch` holding every record
    is returned as well (memory grows with trajectories x records).
    """
    validate(params, init)
    n = params.n_trajectories if n_trajectories is None else int(n_trajectories)
    if n < 2:
        raise ValueError("need at least two trajectories")
    workers = default_workers() if workers is None else max(1, int(workers))
    task = _Trajectory(params, init)
    t = params.record_steps * params.dt
    acc = EnsembleAccumulator(resamples=resamples)
    kept = []

    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for chunk, start in enumerate(range(0, n, CHUNK)):
            indices = range(start, min(start + CHUNK, n))
            results = list(pool.map(task, indices)) if pool else [task(i) for i in indices]
            records = _stack(results)
            acc.update(records, trajectory_rng(params.seed, chunk, stream=BOOTSTRAP_STREAM))
            if keep_trajectories:
                kept.append(records)
    finally:
        if pool:
            pool.shutdown()

    series = series_from_accumulator(t, acc, params.n_atoms)
    if not keep_trajectories:
        return series
    merged = {k: np.concatenate([r[k] for r in kept]) for k in kept[0]}
    return series, TrajectoryBatch(t=t, **merged)
