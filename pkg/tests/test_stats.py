import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade_twa import InitialState, SystemParams, run_ensemble
from cascade_twa.stats import EnsembleAccumulator, bootstrap_ratio, convergence_report, mean_sem


def test_mean_sem_examples():
    s = mean_sem([1, 1, 1, 1])
    assert s.mean == 1 and s.sem == 0
    s = mean_sem([0, 2])
    assert s.mean == 1 and s.sem == pytest.approx(1)
    s = mean_sem(np.random.default_rng(0).standard_normal(1_000_000))
    assert abs(s.mean) < 5e-3 and s.sem == pytest.approx(1e-3, rel=0.01)
    with pytest.raises(ValueError):
        mean_sem([1.0])


def test_sem_rate():
    rng = np.random.default_rng(1)
    small = mean_sem(rng.standard_normal(10_000)).sem
    large = mean_sem(rng.standard_normal(40_000)).sem
    assert small / large == pytest.approx(2, rel=0.05)


def test_bootstrap_constant_ratio():
    den = np.full(50, 1.5)
    b = bootstrap_ratio(2 * den**2, den, resamples=200)
    assert b.mean == pytest.approx(2) and b.lower == pytest.approx(2) and b.upper == pytest.approx(2)
    assert b.sem == pytest.approx(0, abs=1e-12) and not b.unbounded


def test_bootstrap_degenerate_denominator():
    b = bootstrap_ratio(np.ones(30), np.zeros(30), resamples=200)
    assert b.unbounded and b.lower == -np.inf and b.upper == np.inf


def test_bootstrap_errors():
    with pytest.raises(ValueError, match="200"):
        bootstrap_ratio(np.ones(5), np.ones(5), resamples=50)
    with pytest.raises(ValueError, match="paired"):
        bootstrap_ratio(np.ones(5), np.ones(6))


def test_bootstrap_deterministic():
    rng = np.random.default_rng(2)
    den = rng.exponential(size=100)
    num = den**2 + rng.normal(size=100)
    a = bootstrap_ratio(num, den, seed=7)
    b = bootstrap_ratio(num, den, seed=7)
    assert (a.lower, a.upper) == (b.lower, b.upper)


def test_bootstrap_coverage():
    # d ~ N(1, 0.09): E[d^2] = 1.09, so E[num] / E[d]^2 = 1.8
    rng = np.random.default_rng(3)
    hits = 0
    for rep in range(100):
        den = rng.normal(1.0, 0.3, 400)
        num = 1.8 / 1.09 * den**2 + rng.normal(0, 1, 400)
        b = bootstrap_ratio(num, den, resamples=400, seed=rep)
        hits += b.lower <= 1.8 <= b.upper
    assert hits >= 60


def test_bootstrap_linear_statistic_matches_sem():
    rng = np.random.default_rng(4)
    x = rng.normal(size=2000)
    b = bootstrap_ratio(x, np.ones_like(x), resamples=10_000, power=0)
    assert b.sem == pytest.approx(mean_sem(x).sem, rel=0.05)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=64)
    perm = rng.permutation(64)
    a, b = mean_sem(x), mean_sem(x[perm])
    assert a.mean == pytest.approx(b.mean, abs=1e-14) and a.sem == pytest.approx(b.sem, abs=1e-14)
    den = 1 + rng.random(64)
    r1 = bootstrap_ratio(x + 3, den, resamples=200, seed=1)
    r2 = bootstrap_ratio((x + 3)[perm], den[perm], resamples=200, seed=1)
    assert r1.mean == pytest.approx(r2.mean, rel=1e-12)


def test_accumulator_matches_direct():
    rng = np.random.default_rng(5)
    data = {"w_n1": 1 + rng.random((300, 4)) + 0.1j * rng.normal(size=(300, 4)),
            "w_n2": rng.random((300, 4)) + 0j}
    acc = EnsembleAccumulator(resamples=200)
    for start in range(0, 300, 64):
        acc.update({k: v[start:start + 64] for k, v in data.items()}, np.random.default_rng(start))
    assert np.allclose(acc.mean("w_n1"), data["w_n1"].mean(axis=0))
    assert np.allclose(acc.sem("w_n1"), data["w_n1"].real.std(axis=0, ddof=1) / np.sqrt(300))
    assert np.allclose(acc.sem("w_n1", "imag"), data["w_n1"].imag.std(axis=0, ddof=1) / np.sqrt(300))
    est, lo, hi, unb = acc.ratio_band()
    assert np.allclose(est, data["w_n2"].real.mean(0) / data["w_n1"].real.mean(0) ** 2)
    assert np.all(lo <= est) and np.all(est <= hi) and not unb.any()


def _decay(n_atoms, dt, stride, n_traj=4000, t_end=3.0):
    p = SystemParams(n_atoms, 1.0, dt=dt, t_end=t_end, output_stride=stride, n_trajectories=n_traj, seed=8)
    return run_ensemble(p, InitialState.inverted(n_atoms))


def test_convergence_identical():
    s = _decay(3, 1e-3, 100, n_traj=500, t_end=1.0)
    r = convergence_report(s, s)
    assert r.max_dev_P == 0 and r.max_dev_g2 == 0 and r.passed


def test_convergence_default_run_passes():
    ref = _decay(10, 1e-3, 100)
    fine = _decay(10, 5e-4, 200)
    r = convergence_report(ref, fine)
    assert r.passed, r


def test_convergence_coarse_dt_fails():
    coarse = _decay(10, 0.2, 1)
    fine = _decay(10, 1e-3, 200)
    r = convergence_report(coarse, fine)
    assert not r.passed, r


def test_convergence_grid_mismatch():
    a = _decay(2, 1e-3, 100, n_traj=100, t_end=0.5)
    b = _decay(2, 1e-3, 70, n_traj=100, t_end=0.5)
    with pytest.raises(ValueError, match="grid mismatch"):
        convergence_report(a, b)
