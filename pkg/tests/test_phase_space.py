from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade_twa import InitialState, PhaseConfig, sample_initial, weyl_spin_symbols
from cascade_twa.cli import sample_check
from cascade_twa.phase_space import c2_amplitude, kernel_weyl_small_n, local_operator, phi_density

TH_E = np.arccos(1 / np.sqrt(3))
TH_G = np.arccos(-1 / np.sqrt(3))
SIGMA = np.array([[0, 0], [1, 0]], dtype=complex)
POP = np.diag([1.0, 0.0]).astype(complex)
SX = SIGMA + SIGMA.conj().T
SY = 1j * (SIGMA - SIGMA.conj().T)
SZ = np.diag([1.0, -1.0]).astype(complex)


bloch = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda b: b[0] ** 2 + b[1] ** 2 + b[2] ** 2 <= 1)


def test_symbol_examples():
    ws, wp, _ = weyl_spin_symbols(TH_E, 0.0)
    assert abs(wp - 1) < 1e-12
    assert abs(ws - np.sqrt(0.5)) < 1e-6
    for phi in (0.0, 1.0, 4.0):
        assert abs(weyl_spin_symbols(TH_G, phi)[1]) < 1e-12


def test_sampler_poles():
    rng = np.random.default_rng(0)
    om = sample_initial(InitialState([[0, 0, 1], [0, 0, -1]]), rng)
    assert om.theta[0] == pytest.approx(0.955317, abs=1e-6)
    assert om.theta[1] == pytest.approx(2.186276, abs=1e-6)
    phis = np.array([sample_initial(InitialState.inverted(1), rng).phi[0] for _ in range(4000)])
    assert phis.min() >= 0 and phis.max() < 2 * np.pi
    # uniform: first circular moment vanishes
    assert abs(np.exp(1j * phis).mean()) < 5 / np.sqrt(4000)


def test_equatorial_state():
    assert c2_amplitude(1, 0, 0) == pytest.approx(0.788675, abs=1e-6)
    om = sample_initial(InitialState([[1, 0, 0]]), np.random.default_rng(1))
    assert om.theta[0] == pytest.approx(np.pi / 2, abs=1e-12)


@pytest.mark.parametrize("target", [(0, 0, 1), (1, 0, 0), (0, 0.6, -0.3), (-0.4, 0.2, 0.1), (0, 0, 0)])
def test_sampler_moments(target):
    report = sample_check(InitialState([target]), 100_000, seed=5)
    dev = np.abs(report["means"] - report["target"])
    assert np.all(dev < 5 * report["sems"] + 1e-12), (report["means"], report["sems"])


@given(bloch)
def test_normalisation_identity(b):
    u, v, w = b
    A = c2_amplitude(u, v, w)
    assert abs(A * A - A + (u * u + v * v) / (2 * (3 - w * w))) < 1e-12


@given(bloch)
@settings(max_examples=60)
def test_density_nonnegative_and_normalised(b):
    grid = np.linspace(0, 2 * np.pi, 10_000, endpoint=False)
    dens = phi_density(grid, *b)
    assert dens.min() >= 0
    assert abs(dens.mean() * 2 * np.pi - 1) < 1e-9


def test_kernel_examples():
    om = PhaseConfig([TH_E], [0.0])
    assert kernel_weyl_small_n(np.eye(2), om) == pytest.approx(1.0, abs=1e-12)
    assert kernel_weyl_small_n(SIGMA, om) == pytest.approx(np.sqrt(0.5), abs=1e-12)
    rng = np.random.default_rng(2)
    om = PhaseConfig(rng.uniform(0.1, 3, 3), rng.uniform(0, 6, 3))
    ws = weyl_spin_symbols(om.theta, om.phi)[0]
    pair = local_operator(SIGMA, 0, 3) @ local_operator(SIGMA, 2, 3)
    assert kernel_weyl_small_n(pair, om) == pytest.approx(ws[0] * ws[2], abs=1e-12)
    assert kernel_weyl_small_n(np.eye(8), om) == pytest.approx(1.0, abs=1e-12)


def test_kernel_agrees_with_symbols():
    rng = np.random.default_rng(7)
    for theta, phi in zip(rng.uniform(0, np.pi, 100), rng.uniform(0, 2 * np.pi, 100)):
        om = PhaseConfig([theta], [phi])
        ws, wp, (wx, wy, wz) = weyl_spin_symbols(theta, phi)
        for op, want in ((SIGMA, ws), (SIGMA.conj().T, np.conj(ws)), (POP, wp), (np.eye(2), 1.0),
                         (SX, wx), (SY, wy), (SZ, wz)):
            assert abs(kernel_weyl_small_n(op, om) - want) < 1e-12


def test_kernel_errors():
    om = PhaseConfig([1.0, 2.0], [0.0, 0.0])
    with pytest.raises(ValueError, match="does not match"):
        kernel_weyl_small_n(np.eye(2), om)
    with pytest.raises(ValueError, match="limited"):
        kernel_weyl_small_n(np.eye(2**7), PhaseConfig(np.ones(7), np.zeros(7)))


def test_product_state_expectations():
    # phase-space averages of sampled product states reproduce two-atom correlators
    b = np.array([[0.5, 0.3, 0.4], [-0.2, 0.7, -0.5]])
    rng = np.random.default_rng(11)
    draws = [sample_initial(InitialState(b), rng) for _ in range(60_000)]
    theta = np.stack([d.theta for d in draws])
    phi = np.stack([d.phi for d in draws])
    ws = weyl_spin_symbols(theta, phi)[0]
    samples = np.conj(ws[:, 0]) * ws[:, 1]
    rho = [0.5 * (np.eye(2) + u * SX + v * SY + w * SZ) for u, v, w in b]
    op = local_operator(SIGMA.conj().T, 0, 2) @ local_operator(SIGMA, 1, 2)
    exact = np.trace(op @ reduce(np.kron, rho))
    sem = samples.std() / np.sqrt(samples.size)
    assert abs(samples.mean() - exact) < 5 * sem
