import warnings
from functools import reduce

import numpy as np
import pytest

from cascade_twa import (
    FieldMoments,
    InitialState,
    PhaseConfig,
    SystemParams,
    TrajectoryBatch,
    compute_t_limit,
    estimate_series,
    run_ensemble,
)
from cascade_twa.correlators import ShortWindowWarning, propagate_field_moments, s_squared_symbol
from cascade_twa.phase_space import kernel_weyl_small_n, local_operator

SIGMA = np.array([[0, 0], [1, 0]], dtype=complex)
PAULI = (SIGMA + SIGMA.conj().T, 1j * (SIGMA - SIGMA.conj().T), np.diag([1.0, -1.0]).astype(complex))


def output_field(beta, alpha):
    n = len(beta)
    a = alpha * np.eye(2**n, dtype=complex)
    for k, b in enumerate(beta):
        a = a - 1j * np.sqrt(b) * local_operator(SIGMA, k, n)
    return a


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_recursion_matches_kernel(n):
    rng = np.random.default_rng(n)
    for _ in range(10):
        om = PhaseConfig(rng.uniform(0.1, 3.0, n), rng.uniform(0, 2 * np.pi, n))
        beta = rng.random(n)
        alpha = complex(*rng.normal(size=2)) * (rng.random() < 0.7)
        m = propagate_field_moments(om, beta, alpha)
        a = output_field(beta, alpha)
        ad = a.conj().T
        assert m.w_a == pytest.approx(kernel_weyl_small_n(a, om), abs=1e-12)
        assert m.w_n1 == pytest.approx(kernel_weyl_small_n(ad @ a, om), abs=1e-12)
        assert m.w_n2 == pytest.approx(kernel_weyl_small_n(ad @ ad @ a @ a, om), abs=1e-12)
        assert m.w_12 == pytest.approx(kernel_weyl_small_n(ad @ a @ a, om), abs=1e-12)
        assert m.w_02 == pytest.approx(kernel_weyl_small_n(a @ a, om), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_s_squared_matches_kernel(n):
    rng = np.random.default_rng(10 + n)
    S = [0.5 * sum(local_operator(p, k, n) for k in range(n)) for p in PAULI]
    s2 = reduce(lambda x, y: x + y, [s @ s for s in S])
    for _ in range(10):
        om = PhaseConfig(rng.uniform(0.1, 3.0, n), rng.uniform(0, 2 * np.pi, n))
        assert s_squared_symbol(om) == pytest.approx(kernel_weyl_small_n(s2, om).real, abs=1e-12)


def test_coherent_input():
    m = FieldMoments.coherent(1 + 2j)
    assert m.w_n1 == pytest.approx(5) and m.w_n2 == pytest.approx(25)
    assert m.w_02 == pytest.approx((1 + 2j) ** 2) and m.w_12 == pytest.approx(5 * (1 + 2j))
    # transparent chain leaves the input untouched
    om = PhaseConfig([1.0, 2.0], [0.3, 0.1])
    out = propagate_field_moments(om, [0.0, 0.0], 1 + 2j)
    assert out == m


def test_ensemble_initial_power():
    n, beta = 6, 0.4
    p = SystemParams(n, beta, dt=1e-3, t_end=1e-3, output_stride=1, n_trajectories=4000, seed=1)
    s = run_ensemble(p, InitialState.inverted(n))
    assert abs(s.P[0] - n * beta) < 5 * s.sem_P[0]
    assert abs(s.S2[0] - (n / 2) * (n / 2 + 1)) < 5 * s.sem_S2[0]


def test_t_limit_single_exponential():
    t = np.arange(0, 12.0001, 0.01)
    assert compute_t_limit(t, np.exp(-t), 1) == pytest.approx(np.log(1000), abs=0.01)
    assert compute_t_limit(t, 10 * np.exp(-t), 10) == pytest.approx(np.log(1000), abs=0.01)


def test_t_limit_short_window_warns():
    t = np.linspace(0, 1, 11)
    with pytest.warns(ShortWindowWarning):
        assert compute_t_limit(t, np.zeros_like(t), 5) == 1.0


def test_t_limit_quiet_when_flux_sufficient():
    t = np.linspace(0, 10, 1001)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        compute_t_limit(t, np.exp(-t), 1)


def _batch(n_traj, T, rng):
    t = np.linspace(0, 1, T)
    n1 = 1 + rng.random((n_traj, T))
    return TrajectoryBatch(t=t, w_a=rng.normal(size=(n_traj, T)) + 0j, w_n1=n1 + 0j,
                           w_n2=(n1**2 + rng.normal(size=(n_traj, T))) + 0j, s2=np.ones((n_traj, T)))


def test_estimate_series_passthrough():
    rng = np.random.default_rng(4)
    b = _batch(500, 5, rng)
    s = estimate_series(b, n_atoms=1)
    assert np.allclose(s.P, b.w_n1.real.mean(axis=0))
    assert np.allclose(s.g2, b.w_n2.real.mean(axis=0) / b.w_n1.real.mean(axis=0) ** 2)
    assert np.allclose(s.sem_P, b.w_n1.real.std(axis=0, ddof=1) / np.sqrt(500))
    assert np.all(s.g2_lo <= s.g2) and np.all(s.g2 <= s.g2_hi)


def test_estimate_series_errors():
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError, match="empty"):
        estimate_series(None, 1)
    b = _batch(10, 5, rng)
    b.s2 = np.ones((10, 4))
    with pytest.raises(ValueError, match="s2"):
        estimate_series(b, 1)


def test_beta_zero_dark():
    p = SystemParams(3, 0.0, dt=1e-3, t_end=1.0, output_stride=100, n_trajectories=500, seed=2)
    s = run_ensemble(p, InitialState.inverted(3))
    assert np.all(np.abs(s.P) <= 5 * s.sem_P + 1e-15)
    assert s.t_limit_warning
