"""Input validation helpers shared by the model, estimators and CLI."""

import numbers

import numpy as np


class ConfigError(ValueError):
    """Raised when an experiment description violates one of its invariants."""


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_positive_float(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a real number, got {value!r}") from None
    if not np.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return value


def check_beta(beta, n_atoms):
    """Return the per-atom coupling as a float array of length ``n_atoms``.

    A scalar is broadcast to every atom.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 0:
        beta = np.full(n_atoms, float(beta))
    if beta.ndim != 1 or beta.shape[0] != n_atoms:
        raise ConfigError(f"beta must have one entry per atom ({n_atoms}), got shape {beta.shape}")
    if not np.all(np.isfinite(beta)):
        raise ConfigError("beta contains non-finite values")
    bad = np.flatnonzero((beta < 0) | (beta > 1))
    if bad.size:
        raise ConfigError(f"beta out of [0,1] at atom {bad[0] + 1}: {beta[bad[0]]:g}")
    return beta


def check_bloch_array(bloch, n_atoms=None, atol=1e-12):
    """Validate an ``(N, 3)`` array of Bloch vectors inside the unit ball."""
    bloch = np.asarray(bloch, dtype=float)
    if bloch.ndim == 1 and bloch.shape[0] == 3:
        bloch = bloch[None, :]
    if bloch.ndim != 2 or bloch.shape[1] != 3:
        raise ConfigError(f"Bloch vectors must have shape (N, 3), got {bloch.shape}")
    if n_atoms is not None and bloch.shape[0] != n_atoms:
        raise ConfigError(f"initial state has {bloch.shape[0]} Bloch vectors for {n_atoms} atoms")
    if not np.all(np.isfinite(bloch)):
        raise ConfigError("Bloch vectors contain non-finite values")
    norms = np.einsum("ij,ij->i", bloch, bloch)
    bad = np.flatnonzero(norms > 1 + atol)
    if bad.size:
        raise ConfigError(f"Bloch norm > 1 for atom {bad[0] + 1}: |r|^2 = {norms[bad[0]]:.6g}")
    return bloch
