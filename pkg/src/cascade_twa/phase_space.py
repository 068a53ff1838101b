"""Spin Weyl symbols, positive Wigner sampling of product states, and a
brute-force kernel trace used to check symbol identities at small N.

Single-atom basis ordering throughout the package is ``(|e>, |g>)``, so
``sigma = |g><e|`` and ``sigma_z = diag(1, -1)``.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

SQRT3 = np.sqrt(3.0)
THETA_EXCITED = np.arccos(1 / SQRT3)
THETA_GROUND = np.arccos(-1 / SQRT3)

SIGMA = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class PhaseConfig:
    """One phase-space point: polar and azimuthal angle of every atom."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, dtype=float)))
        object.__setattr__(self, "phi", np.atleast_1d(np.asarray(self.phi, dtype=float)))
        if self.theta.shape != self.phi.shape:
            raise ValueError("theta and phi must have the same shape")

    @property
    def n_atoms(self):
        return self.theta.shape[-1]


def weyl_spin_symbols(theta, phi):
    """Weyl symbols of ``sigma``, ``sigma^dag sigma`` and the Pauli triple.

    Works elementwise on arrays. Returns ``(w_sigma, w_pop, (w_x, w_y, w_z))``.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    ct = np.cos(theta)
    w_sigma = 0.5 * SQRT3 * st * np.exp(-1j * phi)
    w_pop = 0.5 * (1 + SQRT3 * ct)
    w_pauli = (SQRT3 * st * np.cos(phi), SQRT3 * st * np.sin(phi), SQRT3 * ct)
    return w_sigma, w_pop, w_pauli


def c2_amplitude(u, v, w):
    """The constant ``A`` of the positive single-atom Wigner function."""
    r2 = np.asarray(u) ** 2 + np.asarray(v) ** 2
    return 0.5 * (1 + np.sqrt(1 - 2 * r2 / (3 - np.asarray(w) ** 2)))


def phi_density(phi, u, v, w):
    """Normalised density of the azimuth for Bloch vector ``(u, v, w)``."""
    amp = c2_amplitude(u, v, w)
    x = 1 + (u * np.cos(phi) + v * np.sin(phi)) / (amp * np.sqrt(3 - w * w))
    return amp * x * x / (2 * np.pi)


def sample_initial(init, rng):
    """Draw one :class:`PhaseConfig` from the product Wigner function of ``init``.

    The polar angle is fixed at ``arccos(w / sqrt3)``; the azimuth is uniform for
    ``u = v = 0`` and otherwise drawn by rejection against a flat envelope.
    """
    bloch = np.asarray(init.bloch if hasattr(init, "bloch") else init, dtype=float)
    u, v, w = bloch[:, 0], bloch[:, 1], bloch[:, 2]
    n = bloch.shape[0]
    theta = np.arccos(w / SQRT3)
    r = np.hypot(u, v)
    polarized = r > 0
    if not polarized.any():
        return PhaseConfig(theta, 2 * np.pi * rng.random(n))

    phi = np.empty(n)
    free = ~polarized
    phi[free] = 2 * np.pi * rng.random(int(free.sum()))

    idx = np.flatnonzero(polarized)
    amp = c2_amplitude(u[idx], v[idx], w[idx])
    c = r[idx] / (amp * np.sqrt(3 - w[idx] ** 2))
    phi0 = np.arctan2(v[idx], u[idx])
    pending = np.arange(idx.size)
    while pending.size:
        trial = 2 * np.pi * rng.random(pending.size)
        accept_p = ((1 + c[pending] * np.cos(trial - phi0[pending])) / (1 + c[pending])) ** 2
        ok = rng.random(pending.size) < accept_p
        phi[idx[pending[ok]]] = trial[ok]
        pending = pending[~ok]
    return PhaseConfig(theta, phi)


def single_atom_kernel(theta, phi):
    st, ct = np.sin(theta), np.cos(theta)
    return 0.5 * np.array(
        [
            [1 + SQRT3 * ct, SQRT3 * np.exp(-1j * phi) * st],
            [SQRT3 * np.exp(1j * phi) * st, 1 - SQRT3 * ct],
        ]
    )


def kernel_weyl_small_n(op, omega, max_atoms=6):
    """``Tr[op Delta(omega)]`` with the tensor-product kernel, by dense algebra."""
    n = omega.n_atoms
    if n > max_atoms:
        raise ValueError(f"kernel oracle limited to {max_atoms} atoms, got {n}")
    op = np.asarray(op)
    if op.shape != (2**n, 2**n):
        raise ValueError(f"operator shape {op.shape} does not match {n} atoms")
    kernel = reduce(np.kron, [single_atom_kernel(t, p) for t, p in zip(omega.theta, omega.phi)])
    return complex(np.einsum("ij,ji->", op, kernel))


def local_operator(single, site, n_atoms):
    """Embed a 2x2 operator acting on atom ``site`` (0-based) into N atoms."""
    mats = [IDENTITY] * n_atoms
    mats[site] = single
    return reduce(np.kron, mats)
