"""Ito SDEs for the spin angles of a cascaded chain.

Free-space decay acts independently on every atom (real Wiener increments
``dW_n``); the waveguide couples all atoms through one shared complex increment
``dZ`` with ``E|dZ|^2 = 2 dt``. The field seen by atom ``n`` is built by a single
forward pass along the chain, so one drift evaluation costs O(N).

This module is the readable numpy path. The production integrator in
``_kernels`` performs the same arithmetic and draws noise in the same order.
"""

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .phase_space import SQRT3, PhaseConfig, weyl_spin_symbols

TWO_PI = 2 * np.pi

# Per-atom increment coefficients: d(theta) = theta_drift dt + Re[coll_noise dZ],
# d(phi) = phi_drift dt + free_noise dW - cot(theta) Im[coll_noise dZ].
Increments = namedtuple("Increments", "theta_drift phi_drift coll_noise free_noise")


@dataclass(frozen=True)
class DriftDiffusion:
    f0: np.ndarray
    g0: np.ndarray
    f_coll: np.ndarray
    g_coll: np.ndarray
    w_field: np.ndarray  # field symbol before atom 1..N, then the output (length N+1)

    def increments(self, theta):
        cot = 1 / np.tan(theta)
        return Increments(
            self.f0 + self.f_coll.real,
            -cot * self.f_coll.imag,
            self.g_coll,
            self.g0,
        )


@dataclass(frozen=True)
class NoiseDraw:
    dW: np.ndarray
    dZ: complex


def trajectory_rng(seed, index, stream=0):
    """Independent generator for trajectory ``index``; ``stream`` separates uses."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def draw_noise(rng, dt, beta):
    """Collective increment first, then one ``dW`` per lossy atom (``beta < 1``).

    Atoms with ``beta == 1`` have no free-space channel and consume no draw;
    their ``dW`` entry is zero.
    """
    beta = np.asarray(beta)
    sdt = np.sqrt(dt)
    xy = rng.standard_normal(2)
    lossy = beta < 1
    dW = np.zeros(beta.shape)
    dW[lossy] = rng.standard_normal(int(lossy.sum())) * sdt
    return NoiseDraw(dW, complex(xy[0], xy[1]) * sdt)


def free_decay_terms(theta, beta):
    cot = 1 / np.tan(theta)
    csc = 1 / np.sin(theta)
    bracket = cot + csc / SQRT3
    f0 = (1 - beta) * bracket
    radicand = 1 + 2 * cot * bracket
    radicand = np.where((radicand < 0) & (radicand > -1e-12), 0.0, radicand)
    g0 = np.sqrt(1 - beta) * np.sqrt(radicand)
    return f0, g0


def field_symbols(omega, beta, alpha):
    """Weyl symbols of the waveguide field before each atom and after the chain."""
    w_sigma, _, _ = weyl_spin_symbols(omega.theta, omega.phi)
    emitted = -1j * np.sqrt(beta) * w_sigma
    w_field = np.empty(omega.n_atoms + 1, dtype=complex)
    w_field[0] = alpha
    w_field[1:] = alpha + np.cumsum(emitted)
    return w_field


def collective_terms(omega, beta, alpha):
    beta = np.asarray(beta, dtype=float)
    theta, phi = omega.theta, omega.phi
    sb = np.sqrt(beta)
    e_iphi = np.exp(1j * phi)
    w_field = field_symbols(omega, beta, alpha)
    f0, g0 = free_decay_terms(theta, beta)
    f_coll = 0.5 * beta * (1 / np.tan(theta) + SQRT3 * np.sin(theta)) + 2j * sb * e_iphi * w_field[:-1]
    g_coll = -sb * e_iphi
    return DriftDiffusion(f0, g0, f_coll, g_coll, w_field)


def collective_terms_reference(omega, beta, alpha, return_rows=False):
    """Same increment coefficients from the explicit pairwise sums, O(N^2).

    Rows are the drive Hamiltonian, free-space decay, collective decay with
    ``Gamma_mn = sqrt(beta_m beta_n)`` and the cascaded Hamiltonian with
    ``J_mn = sqrt(beta_m beta_n) sgn(m - n) / 2i``; the azimuth difference is
    ``phi_mn = phi_m - phi_n``.
    """
    beta = np.asarray(beta, dtype=float)
    theta, phi = omega.theta, omega.phi
    n = theta.size
    sb = np.sqrt(beta)
    st = np.sin(theta)
    cot = 1 / np.tan(theta)
    e_a = np.exp(1j * phi) * alpha

    drive = (-2 * sb * e_a.imag, -2 * sb * e_a.real * cot)

    f0, g0 = free_decay_terms(theta, beta)
    free = (f0, np.zeros(n))

    phi_mn = phi[None, :] - phi[:, None]  # [n, m] -> phi_m - phi_n
    weight = sb[None, :] * st[None, :]  # sqrt(beta_m) sin(theta_m)
    cos_sum = (weight * np.cos(phi_mn)).sum(axis=1)
    sin_sum = (weight * np.sin(phi_mn)).sum(axis=1)
    coll = (
        0.5 * sb * (sb * cot + SQRT3 * cos_sum),
        0.5 * sb * SQRT3 * cot * sin_sum,
    )

    idx = np.arange(n)
    sgn = np.sign(idx[None, :] - idx[:, None])  # [n, m] -> sgn(m - n)
    pair = sb[:, None] * sb[None, :] * st[None, :] * sgn
    casc = (
        -0.5 * SQRT3 * (pair * np.cos(phi_mn)).sum(axis=1),
        -0.5 * SQRT3 * cot * (pair * np.sin(phi_mn)).sum(axis=1),
    )

    rows = {"drive": drive, "free": free, "collective": coll, "cascaded": casc}
    inc = Increments(
        sum(r[0] for r in rows.values()),
        sum(r[1] for r in rows.values()),
        -sb * np.exp(1j * phi),
        g0,
    )
    if return_rows:
        return inc, rows
    return inc


def fold_to_sphere(theta, phi):
    """Map angles that stepped through a pole back onto the sphere.

    Plain clamping traps a trajectory between the two poles, where the
    1/sin(theta) drift flips sign every step.
    """
    theta = np.mod(theta, TWO_PI)
    crossed = theta > np.pi
    theta = np.where(crossed, TWO_PI - theta, theta)
    phi = np.where(crossed, phi + np.pi, phi)
    return theta, phi


def apply_increment(omega, drift, noise, dt, theta_min=1e-6):
    """Euler-Maruyama update given precomputed coefficients and one noise draw."""
    theta = omega.theta
    cot = 1 / np.tan(theta)
    coll = drift.f_coll * dt + drift.g_coll * noise.dZ
    d_theta = drift.f0 * dt + coll.real
    d_phi = drift.g0 * noise.dW - cot * coll.imag
    new_theta, new_phi = fold_to_sphere(theta + d_theta, omega.phi + d_phi)
    new_theta = np.clip(new_theta, theta_min, np.pi - theta_min)
    new_phi = np.mod(new_phi, TWO_PI)
    new_phi[new_phi >= TWO_PI] = 0.0
    return PhaseConfig(new_theta, new_phi)


def step(omega, t, dt, params, rng):
    alpha = params.drive.alpha(t)
    drift = collective_terms(omega, params.beta, alpha)
    noise = draw_noise(rng, dt, params.beta)
    return apply_increment(omega, drift, noise, dt, params.theta_min)
