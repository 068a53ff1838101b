import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cascade_twa import CascadedMasterEquation, ConfigError, DickeModel, TWASimulator


def test_params_roundtrip():
    est = TWASimulator(n_atoms=4, beta=0.3, n_trajectories=100)
    params = est.get_params()
    assert params["n_atoms"] == 4 and params["beta"] == 0.3
    twin = clone(est)
    assert twin.get_params() == params
    twin.set_params(seed=9)
    assert twin.seed == 9 and est.seed == 0


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        TWASimulator().predict([0.0])


def test_twa_fit_predict():
    est = TWASimulator(n_atoms=3, beta=0.5, t_end=0.5, output_stride=100, n_trajectories=400, seed=2)
    assert est.fit("inverted") is est
    out = est.predict([0.0, 0.25, 0.5])
    assert out.shape == (3, 4)
    assert out[0, 0] == pytest.approx(est.series_.P[0])
    assert np.all(np.isfinite(out))
    with pytest.raises(ValueError):
        est.predict([0.6])
    again = clone(est).fit("inverted")
    assert np.array_equal(again.series_.P, est.series_.P)


def test_twa_validates():
    with pytest.raises(ConfigError, match="beta"):
        TWASimulator(n_atoms=2, beta=[0.5, 2.0], n_trajectories=10).fit()
    with pytest.raises(ConfigError):
        TWASimulator(n_atoms=2, n_trajectories=10).fit("sideways")


def test_master_equation_estimator():
    est = CascadedMasterEquation(n_atoms=1, beta=1.0, t_end=1.0, output_stride=100).fit()
    t = np.linspace(0, 1, 5)
    assert np.allclose(est.predict(t)[:, 0], np.exp(-t), atol=2e-3)  # linear interpolation
    assert np.allclose(est.series_.P, np.exp(-est.t_), atol=1e-8)
    assert est.score(est.t_, np.exp(-est.t_)) > -1e-15


def test_master_equation_accepts_density_matrix():
    rho = np.zeros((4, 4), complex)
    rho[0, 0] = 1
    a = CascadedMasterEquation(n_atoms=2, t_end=0.5, output_stride=100).fit(rho)
    b = CascadedMasterEquation(n_atoms=2, t_end=0.5, output_stride=100).fit("inverted")
    assert np.allclose(a.series_.P, b.series_.P)


def test_dicke_estimator():
    est = DickeModel(n_atoms=6, t_end=1.0, output_stride=100).fit()
    assert est.beta == 1.0 and "beta" not in est.get_params()
    assert np.allclose(est.series_.S2, 12)
