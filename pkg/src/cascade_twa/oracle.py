"""Exact small-N references: the full cascaded master equation on 2^N states,
the symmetric-sector Dicke model, and closed-form single-atom decay.

Each solver returns a :class:`CorrelatorSeries` with zero statistical errors so
it drops straight into the TWA comparison code.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from .correlators import CorrelatorSeries, _t_limit
from .model import DriveSchedule, InitialState
from .phase_space import IDENTITY, SIGMA, SIGMA_X, SIGMA_Y, SIGMA_Z

MAX_EXACT_ATOMS = 8
MAX_DICKE_ATOMS = 10_000
MAX_DRIVEN_DICKE_ATOMS = 200
DT_ORACLE = 1e-3

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIGEN_TOL = -1e-8


class OracleError(RuntimeError):
    """Oracle input out of range, or the integrated state left the physical set."""


@dataclass
class DensityMatrix:
    data: np.ndarray

    @property
    def dim(self):
        return self.data.shape[0]

    @classmethod
    def from_ket(cls, psi):
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def product(cls, init):
        """Tensor product of the single-atom states ``(I + u X + v Y + w Z) / 2``."""
        singles = [0.5 * (IDENTITY + u * SIGMA_X + v * SIGMA_Y + w * SIGMA_Z) for u, v, w in init.bloch]
        return cls(reduce(np.kron, singles))

    def violations(self):
        rho = self.data
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        trace = abs(np.trace(rho) - 1)
        min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
        return herm, trace, min_eig

    def check(self, t=None):
        herm, trace, min_eig = self.violations()
        where = "" if t is None else f" at t={t:g}"
        if herm > HERMITIAN_TOL:
            raise OracleError(f"density matrix not Hermitian{where} (deviation {herm:.2e}); reduce dt_oracle")
        if trace > TRACE_TOL:
            raise OracleError(f"trace drifted{where} by {trace:.2e}; reduce dt_oracle")
        if min_eig < EIGEN_TOL:
            raise OracleError(f"negative eigenvalue {min_eig:.2e}{where}; reduce dt_oracle")


def lowering_operators(n_atoms):
    """Sparse sigma_n on N atoms; atom 1 is the leftmost tensor factor."""
    eye = sp.identity(2, format="csr", dtype=complex)
    low = sp.csr_matrix(SIGMA)
    ops = []
    for n in range(n_atoms):
        mats = [eye] * n_atoms
        mats[n] = low
        ops.append(reduce(lambda a, b: sp.kron(a, b, format="csr"), mats))
    return ops


def _dag(op):
    return op.conj().T.tocsr()


def _sandwich(left, rho, right_dag):
    """``left @ rho @ right_dag^dagger`` with sparse operators and dense ``rho``."""
    return left @ (right_dag @ rho.conj().T).conj().T


class _Generator:
    """Right-hand side of the master equation for one constant drive amplitude."""

    def __call__(self, rho):
        raise NotImplementedError


class _CompactGenerator(_Generator):
    """``-i(H rho - rho H^dag) + C rho C^dag + sum (1-beta_n) s_n rho s_n^dag``.

    ``H`` is non-Hermitian and carries both anticommutators; ``C`` is the
    collective jump ``sum sqrt(beta_n) s_n``. Valid for any per-atom beta.
    """

    def __init__(self, ops, beta, alpha):
        sb = np.sqrt(beta)
        dim = ops[0].shape[0]
        self.C = reduce(lambda a, b: a + b, [s * op for s, op in zip(sb, ops)])
        h0 = alpha * _dag(self.C) + np.conj(alpha) * self.C
        casc = sp.csr_matrix((dim, dim), dtype=complex)
        for n in range(len(ops)):
            for k in range(n):
                pair = sb[k] * sb[n] * (_dag(ops[n]) @ ops[k])
                casc = casc + (-0.5j) * (pair - _dag(pair))
        damp = _dag(self.C) @ self.C
        self.local = []
        for b, op in zip(beta, ops):
            if b < 1:
                damp = damp + (1 - b) * (_dag(op) @ op)
                self.local.append((1 - b, op))
        self.H = (h0 + casc - 0.5j * damp).tocsr()

    def __call__(self, rho):
        h_rho = self.H @ rho
        out = -1j * (h_rho - (self.H @ rho.conj().T).conj().T)
        out += _sandwich(self.C, rho, self.C)
        for rate, op in self.local:
            out += rate * _sandwich(op, rho, op)
        return out


class _HomogeneousGenerator(_Generator):
    """Term-by-term homogeneous form: drive, cascaded Hamiltonian, double-sum
    collective dissipator and independent loss, each written out separately."""

    def __init__(self, ops, beta, alpha):
        b = float(beta[0])
        self.ops = ops
        self.ops_dag = [_dag(op) for op in ops]
        self.beta = b
        dim = ops[0].shape[0]
        h = sp.csr_matrix((dim, dim), dtype=complex)
        for op, op_d in zip(ops, self.ops_dag):
            h = h + np.sqrt(b) * (alpha * op_d + np.conj(alpha) * op)
        for m in range(len(ops)):
            for n in range(m):
                pair = self.ops_dag[m] @ ops[n]
                h = h + (-0.5j * b) * (pair - _dag(pair))
        self.H = h.tocsr()

    def __call__(self, rho):
        H = self.H
        out = -1j * (H @ rho - (H @ rho.conj().T).conj().T)
        b = self.beta
        for m, op_m in enumerate(self.ops):
            for n, op_n in enumerate(self.ops):
                mn = self.ops_dag[m] @ op_n
                out += b * (_sandwich(op_n, rho, op_m)
                            - 0.5 * (mn @ rho + (_dag(mn) @ rho.conj().T).conj().T))
        if b < 1:
            for op, op_d in zip(self.ops, self.ops_dag):
                nn = op_d @ op
                out += (1 - b) * (_sandwich(op, rho, op) - 0.5 * (nn @ rho + (nn @ rho.conj().T).conj().T))
        return out


class _InputOutputGenerator(_Generator):
    """Unit-rate decay of every atom plus the coupling of atom ``n`` to the
    waveguide field ``a_n = alpha - i sum_{k<n} sqrt(beta_k) s_k`` arriving at it."""

    def __init__(self, ops, beta, alpha):
        sb = np.sqrt(beta)
        dim = ops[0].shape[0]
        eye = sp.identity(dim, format="csr", dtype=complex)
        self.terms = []
        field = alpha * eye
        for s, op in zip(sb, ops):
            self.terms.append((s, op, _dag(op), field.tocsr()))
            field = field - 1j * s * op

    def __call__(self, rho):
        out = np.zeros_like(rho)
        rho_d = rho.conj().T
        for s, op, op_d, a in self.terms:
            nn = op_d @ op
            out += _sandwich(op, rho, op) - 0.5 * (nn @ rho + (nn @ rho_d).conj().T)
            a_rho = a @ rho
            out += -1j * s * (op_d @ a_rho - (op @ a_rho.conj().T).conj().T
                              - (op_d @ (a @ rho_d)).conj().T + _sandwich(op, rho, a))
        return out


GENERATORS = {
    "homogeneous": _HomogeneousGenerator,
    "inhomogeneous": _CompactGenerator,
    "input_output": _InputOutputGenerator,
}


def _rk4_step(rhs, rho, dt):
    k1 = rhs(rho)
    k2 = rhs(rho + 0.5 * dt * k1)
    k3 = rhs(rho + 0.5 * dt * k2)
    k4 = rhs(rho + dt * k3)
    return rho + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _record_steps(t_grid, dt):
    t_grid = np.asarray(t_grid, dtype=float)
    steps = np.rint(t_grid / dt).astype(int)
    if np.any(np.abs(steps * dt - t_grid) > 1e-9 * max(1.0, t_grid.max())):
        raise OracleError("t_grid points must be multiples of dt_oracle")
    if np.any(np.diff(steps) <= 0) or steps[0] < 0:
        raise OracleError("t_grid must be increasing and non-negative")
    return steps


def _initial_matrix(init, n_atoms, dim):
    if isinstance(init, DensityMatrix):
        rho = init.data
    elif isinstance(init, np.ndarray) and init.ndim == 2:
        rho = init
    elif isinstance(init, np.ndarray) and init.ndim == 1 and init.size == dim:
        rho = DensityMatrix.from_ket(init).data
    else:
        rho = DensityMatrix.product(InitialState.from_shorthand(init, n_atoms)).data
    rho = np.array(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise OracleError(f"initial state has shape {rho.shape}, expected {(dim, dim)}")
    return rho


def _series(t, E, P, G2, S2, exc, n_atoms, meta):
    P = np.asarray(P, dtype=float)
    G2 = np.asarray(G2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        g2 = G2 / P**2
    t_limit, ok = _t_limit(t, P, n_atoms)
    zeros = np.zeros(len(t))
    return CorrelatorSeries(
        t=np.asarray(t, dtype=float), E=np.asarray(E, dtype=complex), P=P, G2=G2, g2=g2,
        S2=np.asarray(S2, dtype=float), sem_P=zeros, sem_G2=zeros, err_g2=zeros, sem_S2=zeros,
        t_limit=t_limit, beyond_limit=np.asarray(t) > t_limit, excitation=np.asarray(exc, dtype=float),
        sem_excitation=zeros, t_limit_warning=not ok, meta=meta,
    )


def evolve_cascaded_exact(params, init="inverted", t_grid=None, dt_oracle=DT_ORACLE, path="auto",
                          check=True, return_states=False):
    """Integrate the cascaded master equation with fixed-step RK4.

    ``init`` may be an :class:`InitialState`, a shorthand, a ket or a density
    matrix. ``path`` picks the generator: ``"homogeneous"`` (term-by-term form,
    scalar beta only), ``"inhomogeneous"`` (compact per-atom form) or
    ``"input_output"`` (written through the field reaching each atom);
    ``"auto"`` uses the compact form.
    """
    n = params.n_atoms
    if n > MAX_EXACT_ATOMS:
        raise OracleError(f"exact oracle supports at most {MAX_EXACT_ATOMS} atoms, got {n}")
    beta = np.asarray(params.beta, dtype=float)
    if path == "auto":
        path = "inhomogeneous"
    if path not in GENERATORS:
        raise OracleError(f"unknown generator path {path!r}")
    if path == "homogeneous" and not np.allclose(beta, beta[0], rtol=0, atol=0):
        raise OracleError("homogeneous path needs identical beta for every atom")
    if t_grid is None:
        t_grid = params.record_times
    steps = _record_steps(t_grid, dt_oracle)

    ops = lowering_operators(n)
    dim = 2**n
    rho = _initial_matrix(init, n, dim)
    eye = sp.identity(dim, format="csr", dtype=complex)
    C = reduce(lambda a, b: a + b, [np.sqrt(b) * op for b, op in zip(beta, ops)])
    excitation_op = reduce(lambda a, b: a + b, [_dag(op) @ op for op in ops])
    s_ops = [0.5 * reduce(lambda a, b: a + b, [sp.csr_matrix(_local(m, k, n)) for k in range(n)])
             for m in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
    s2_op = reduce(lambda a, b: a + b, [s @ s for s in s_ops])

    generators = {}

    def generator(alpha):
        if alpha not in generators:
            generators[alpha] = GENERATORS[path](ops, beta, alpha)
        return generators[alpha]

    out = {k: [] for k in ("E", "P", "G2", "S2", "exc")}
    states = []
    k = 0
    for r, target in enumerate(steps):
        while k < target:
            rho = _rk4_step(generator(complex(params.drive.alpha(k * dt_oracle))), rho, dt_oracle)
            k += 1
        t = k * dt_oracle
        if check:
            DensityMatrix(rho).check(t)
        alpha = complex(params.drive.alpha(t))
        a_out = alpha * eye - 1j * C
        a_dag = _dag(a_out)
        out["E"].append(_expect(a_out, rho))
        out["P"].append(_expect(a_dag @ a_out, rho).real)
        out["G2"].append(_expect(a_dag @ a_dag @ a_out @ a_out, rho).real)
        out["S2"].append(_expect(s2_op, rho).real)
        out["exc"].append(_expect(excitation_op, rho).real)
        if return_states:
            states.append(rho.copy())

    t = steps * dt_oracle
    series = _series(t, out["E"], out["P"], out["G2"], out["S2"], out["exc"], n,
                     {"engine": "exact", "path": path, "dt_oracle": dt_oracle})
    if return_states:
        return series, [DensityMatrix(s) for s in states]
    return series


def _local(single, site, n_atoms):
    mats = [sp.identity(2, format="csr", dtype=complex)] * n_atoms
    mats[site] = sp.csr_matrix(single)
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), mats)


def _expect(op, rho):
    # Tr(op rho) without forming the product
    return complex(op.multiply(rho.T).sum())


# symmetric sector

def dicke_lowering(n_atoms):
    """Collective lowering operator on |j=N/2, m>, index k = j - m (k = 0 fully excited)."""
    j = n_atoms / 2
    m = j - np.arange(n_atoms)
    elems = np.sqrt(j * (j + 1) - m * (m - 1))
    return sp.diags(elems, -1, shape=(n_atoms + 1, n_atoms + 1), format="csr", dtype=complex)


def _dicke_initial(init, n_atoms):
    dim = n_atoms + 1
    if isinstance(init, DensityMatrix):
        return np.array(init.data, dtype=complex)
    if isinstance(init, np.ndarray) and init.shape == (dim, dim):
        return np.array(init, dtype=complex)
    if isinstance(init, np.ndarray) and init.shape == (dim,):
        return DensityMatrix.from_ket(init).data
    state = InitialState.from_shorthand(init, n_atoms)
    bloch = np.asarray(state.bloch)
    if not np.allclose(bloch, bloch[0], atol=1e-12):
        raise OracleError("Dicke oracle needs the same single-atom state on every atom")
    # identical pure product state = spin coherent state inside the symmetric sector
    a_e, a_g = InitialState(bloch[:1]).ket()[0]
    k = np.arange(dim)
    log_binom = gammaln(n_atoms + 1) - gammaln(k + 1) - gammaln(n_atoms - k + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        # 0 * log(0) is taken as 0 so that |e...e> and |g...g> come out exactly
        log_e = np.where(k < n_atoms, (n_atoms - k) * np.log(abs(a_e)), 0.0)
        log_g = np.where(k > 0, k * np.log(abs(a_g)), 0.0)
    log_mag = 0.5 * log_binom + log_e + log_g
    phase = np.exp(1j * ((n_atoms - k) * np.angle(a_e) + k * np.angle(a_g)))
    psi = np.exp(log_mag) * phase
    return DensityMatrix.from_ket(psi).data


def evolve_dicke(n_atoms, drive=None, t_grid=None, init="inverted", dt_oracle=DT_ORACLE):
    """Symmetric-sector decay with unit collective rate and output ``alpha - i S``.

    Undriven runs from a diagonal state reduce to a rate equation for the
    level populations, solved with a stiff implicit integrator; this is what
    makes ``N`` up to 10^4 affordable. Anything else is integrated with RK4.
    """
    if n_atoms < 1 or n_atoms > MAX_DICKE_ATOMS:
        raise OracleError(f"Dicke oracle supports 1..{MAX_DICKE_ATOMS} atoms, got {n_atoms}")
    drive = DriveSchedule() if drive is None else drive
    if isinstance(drive, (int, float, complex)):
        drive = DriveSchedule.constant(drive)
    if t_grid is None:
        t_grid = np.linspace(0, 3, 301)
    t_grid = np.asarray(t_grid, dtype=float)
    rho0 = _dicke_initial(init, n_atoms)
    j = n_atoms / 2
    S = dicke_lowering(n_atoms)
    rates = np.abs(S.diagonal(-1)) ** 2  # decay rate out of level k
    s2 = np.full(len(t_grid), j * (j + 1))
    meta = {"engine": "dicke"}

    diagonal = np.allclose(rho0, np.diag(np.diag(rho0)), atol=1e-14)
    if drive.is_vacuum and diagonal:
        dim = n_atoms + 1
        out_rate = np.append(rates, 0.0)
        in_rate = rates
        Q = sp.diags([-out_rate, in_rate], [0, -1], shape=(dim, dim), format="csr")
        p0 = np.diag(rho0).real
        if len(t_grid) > 1:
            # the ladder rates are symmetric about the middle, so eigen-expansions cancel
            # catastrophically at large N; an implicit stiff solver stays accurate
            sol = solve_ivp(lambda t, y: Q @ y, (t_grid[0], t_grid[-1]), p0, method="Radau",
                            t_eval=t_grid, jac=Q, rtol=1e-10, atol=1e-14)
            if sol.status != 0:
                raise OracleError(f"Dicke rate equation failed: {sol.message}")
            pops = sol.y.T
        else:
            pops = p0[None, :]
        pops = np.clip(pops, 0.0, None)
        P = pops[:, :-1] @ rates
        G2 = pops[:, :-2] @ (rates[:-1] * rates[1:])
        exc = pops @ (n_atoms - np.arange(dim))
        E = np.zeros(len(t_grid), dtype=complex)
        meta["method"] = "rate-equation"
        return _series(t_grid, E, P, G2, s2, exc, n_atoms, meta)

    if n_atoms > MAX_DRIVEN_DICKE_ATOMS:
        raise OracleError(f"driven or coherent Dicke runs support at most {MAX_DRIVEN_DICKE_ATOMS} atoms")
    Sd = S.conj().T.toarray()
    Sm = S.toarray()
    SdS = Sd @ Sm
    eye = np.eye(n_atoms + 1)
    exc_op = np.diag(n_atoms - np.arange(n_atoms + 1)).astype(complex)

    def rhs_for(alpha):
        H = alpha * (Sm + Sd)
        K = H - 0.5j * SdS

        def rhs(rho):
            return -1j * (K @ rho - rho @ K.conj().T) + Sm @ rho @ Sd
        return rhs

    steps = _record_steps(t_grid, dt_oracle)
    rho = rho0
    out = {k: [] for k in ("E", "P", "G2", "exc")}
    k = 0
    for target in steps:
        while k < target:
            rho = _rk4_step(rhs_for(complex(drive.alpha(k * dt_oracle))), rho, dt_oracle)
            k += 1
        alpha = complex(drive.alpha(k * dt_oracle))
        a = alpha * eye - 1j * Sm
        ad = a.conj().T
        out["E"].append(np.trace(a @ rho))
        out["P"].append(np.trace(ad @ a @ rho).real)
        out["G2"].append(np.trace(ad @ ad @ a @ a @ rho).real)
        out["exc"].append(np.trace(exc_op @ rho).real)
    meta["method"] = "rk4"
    return _series(steps * dt_oracle, out["E"], out["P"], out["G2"], s2, out["exc"], n_atoms, meta)


def analytic_single_atom(beta, t, init="inverted"):
    """Undriven single atom: excited population decays as e^{-t}; P = beta * population."""
    state = InitialState.from_shorthand(init, 1)
    pop0 = 0.5 * (1 + state.bloch[0][2])
    population = pop0 * np.exp(-np.asarray(t, dtype=float))
    return population, beta * population

