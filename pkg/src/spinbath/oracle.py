"""Brute-force full-Hilbert-space engine: the ground truth for every other module.

Usable up to N ~ 14 (dense spectrum) / N ~ 20 (sparse Krylov evolution).
All Hamiltonians here are real symmetric in the sz product basis (the yy bond
operator is real), which keeps diagonalization in double-precision real
arithmetic.  Basis ordering: site 1 is the leftmost kron factor and the
spin-up state (sz = +1) is index 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh

from .models import BathSpec, Branch, CouplingSpec, spin_hamiltonian_terms
from .series import EchoSeries
from . import __version__

DENSE_LIMIT = 14
SPARSE_LIMIT = 20
DEGENERACY_GAP = 1e-10
TIE_BREAK_FIELD = 1e-8


class DegenerateGroundStateError(RuntimeError):
    """Ground state remained degenerate after the symmetry-breaking tie-break."""


class NumericalError(RuntimeError):
    """A linear-algebra routine failed to converge to its tolerance."""


_PAULI = {
    "i": np.eye(2),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]]),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}


def pauli_string(n: int, sites: tuple[int, ...], paulis: str) -> sp.csr_matrix:
    """Sparse operator prod_k sigma^{paulis[k]} on 1-based ``sites`` of an n-spin chain."""
    ops = {}
    for site, label in zip(sites, paulis):
        if not 1 <= site <= n:
            raise ValueError(f"site {site} outside 1..{n}")
        mat = _PAULI[label]
        # yy products are assembled from real i*sy factors to keep H real.
        ops[site] = mat
    out = sp.identity(1, format="csr")
    for site in range(1, n + 1):
        factor = sp.csr_matrix(ops.get(site, _PAULI["i"]))
        out = sp.kron(out, factor, format="csr")
    return out


def build_hamiltonian(bath: BathSpec, coupling: CouplingSpec | None = None,
                      branch: Branch = Branch.GROUND, sparse: bool = True):
    """Assemble the branch Hamiltonian from the shared term list.

    Returns a real-symmetric CSR matrix (``sparse=True``) or ndarray.  The
    dense form is limited to N <= 14, the sparse one to N <= 20.
    """
    n = bath.n_spins
    limit = SPARSE_LIMIT if sparse else DENSE_LIMIT
    if n > limit:
        raise ValueError(f"N={n} exceeds the {'sparse' if sparse else 'dense'} limit {limit}")
    dim = 2 ** n
    h = sp.csr_matrix((dim, dim))
    for term in spin_hamiltonian_terms(bath, coupling, branch):
        if term.coeff == 0.0:
            continue
        h = h + term.coeff * pauli_string(n, term.sites, term.paulis).real
    h = sp.csr_matrix(h)
    return h if sparse else h.toarray()


def total_sz(n: int) -> sp.csr_matrix:
    dim = 2 ** n
    op = sp.csr_matrix((dim, dim))
    for site in range(1, n + 1):
        op = op + pauli_string(n, (site,), "z")
    return sp.csr_matrix(op)


def _fix_phase(psi: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(psi)))
    if psi[k].real < 0 or (psi[k].real == 0 and psi[k].imag < 0):
        psi = -psi
    return psi


def ground_state(h, method: str = "iterative", seed: int = 0,
                 tie_break_field: float = TIE_BREAK_FIELD):
    """Lowest eigenpair of a (sparse or dense) real-symmetric Hamiltonian.

    When the gap E1 - E0 falls below 1e-10, a symmetry-breaking field
    ``-h * sum_j sz_j`` (default h = 1e-8) is added and the problem re-solved,
    selecting the fully polarized representative of a degenerate ferromagnetic
    ground space.  If the degeneracy survives the tie-break (e.g. the Ising
    doublet, which the field does not split), DegenerateGroundStateError is
    raised.  The iterative path is deterministic for a given seed.
    """
    dim = h.shape[0]
    n = int(round(np.log2(dim)))

    def solve(mat):
        if method == "dense":
            dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
            w, v = eigh(dense, subset_by_index=(0, min(1, dim - 1)))
            return w, v
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(dim)
        try:
            w, v = spla.eigsh(mat, k=min(2, dim - 1), which="SA", v0=v0)
        except spla.ArpackNoConvergence as exc:  # pragma: no cover
            raise NumericalError(f"eigsh failed to converge: {exc}") from exc
        order = np.argsort(w)
        return w[order], v[:, order]

    w, v = solve(h)
    gap = w[1] - w[0] if len(w) > 1 else np.inf
    if gap < DEGENERACY_GAP and tie_break_field:
        h_tb = h - tie_break_field * total_sz(n)
        w2, v2 = solve(h_tb)
        if len(w2) > 1 and w2[1] - w2[0] < DEGENERACY_GAP:
            raise DegenerateGroundStateError(
                f"gap {w2[1] - w2[0]:.2e} below {DEGENERACY_GAP} after tie-break")
        psi = _fix_phase(v2[:, 0])
        e0 = float(psi @ (h @ psi))
        return e0, psi
    if gap < DEGENERACY_GAP:
        raise DegenerateGroundStateError(f"gap {gap:.2e} below {DEGENERACY_GAP}")
    psi = _fix_phase(v[:, 0])
    return float(w[0]), psi


@dataclass
class DenseSpectrum:
    """Full spectrum, energies ascending; column k of ``states`` is |psi_k>."""

    energies: np.ndarray
    states: np.ndarray


def full_spectrum(h) -> DenseSpectrum:
    dense = h.toarray() if sp.issparse(h) else np.asarray(h)
    w, v = eigh(dense)
    return DenseSpectrum(w, v)


def loschmidt_echo_exact(bath: BathSpec, coupling: CouplingSpec, times,
                         method: str = "auto", seed: int = 0) -> EchoSeries:
    """L(t) = |<psi0| exp(-i H_e t) |psi0>|^2 with psi0 the bath ground state.

    ``method``: "dense" diagonalizes H_e fully and evaluates the overlap in
    closed form (N <= 12 recommended); "krylov" uses sparse Krylov stepping;
    "auto" picks dense for N <= 12.  omega_e drops out of the modulus and is
    ignored here.
    """
    times = np.asarray(times, dtype=float)
    n = bath.n_spins
    if method == "auto":
        method = "dense" if n <= 11 else "krylov"
    h_g = build_hamiltonian(bath, coupling, Branch.GROUND)
    h_e = build_hamiltonian(bath, coupling, Branch.EXCITED)
    _, psi0 = ground_state(h_g, method="dense" if n <= 12 else "iterative", seed=seed)

    if method == "dense":
        spec = full_spectrum(h_e)
        amps = (spec.states.T @ psi0) ** 2  # real H_e, real psi0
        phases = np.exp(-1j * np.outer(spec.energies, times))
        d = amps @ phases
        values = np.abs(d) ** 2
    elif method == "krylov":
        values = _krylov_echo(h_e, psi0, times)
    else:
        raise ValueError(f"unknown method {method!r}")

    meta = _series_meta(bath, coupling, f"exact-{method}", seed=seed)
    return EchoSeries(times, values, meta)


def _krylov_echo(h_e, psi0, times):
    gen = sp.csc_matrix(-1j * h_e)
    psi0c = psi0.astype(complex)
    values = np.empty(len(times))
    dts = np.diff(times)
    uniform = len(times) >= 2 and np.allclose(dts, dts[0], rtol=1e-12, atol=1e-15)
    if uniform and times[0] == 0.0:
        states = spla.expm_multiply(gen, psi0c, start=times[0], stop=times[-1],
                                    num=len(times), endpoint=True)
        for k, state in enumerate(states):
            _check_norm(state)
            values[k] = abs(np.vdot(psi0c, state)) ** 2
    else:
        state = psi0c.copy()
        t_prev = 0.0
        for k, t in enumerate(times):
            if t != t_prev:
                state = spla.expm_multiply(gen * (t - t_prev), state)
                t_prev = t
            _check_norm(state)
            values[k] = abs(np.vdot(psi0c, state)) ** 2
    return values


def _check_norm(state, tol=1e-10):
    err = abs(np.linalg.norm(state) - 1.0)
    if err > tol:
        raise NumericalError(f"Krylov evolution lost norm by {err:.2e}")


def reduced_density_matrix(psi: np.ndarray, n: int, sites: tuple[int, int]) -> np.ndarray:
    """4x4 two-site reduced density matrix, sites 1-based, traced over the rest."""
    i, j = sites
    if not (1 <= i <= n and 1 <= j <= n and i != j):
        raise ValueError(f"bad site pair {sites} for n={n}")
    tensor = np.reshape(psi, (2,) * n)
    tensor = np.moveaxis(tensor, (i - 1, j - 1), (0, 1))
    mat = np.reshape(tensor, (4, -1))
    rho = mat @ mat.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    if abs(np.trace(rho).real - 1.0) > 1e-12:
        raise NumericalError("reduced density matrix trace deviates from 1")
    if np.min(np.linalg.eigvalsh(rho)) < -1e-12:
        raise NumericalError("reduced density matrix is not positive semidefinite")
    return rho


_SY_SY = np.kron(_PAULI["y"], _PAULI["y"]).real  # sy x sy is real


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    r = rho @ _SY_SY @ rho.conj() @ _SY_SY
    mu = np.linalg.eigvals(r).real
    mu = np.sqrt(np.clip(mu, 0.0, None))
    mu.sort()
    return float(max(0.0, mu[-1] - mu[-2] - mu[-3] - mu[-4]))


def perturbative_plateau(bath: BathSpec, coupling: CouplingSpec) -> float:
    """Second-order estimate of the long-time echo plateau.

    L_inf = [1 - (eps^2/2) sum_{k != 0} |<psi_k|sz_site|psi_0>|^2 / (E_k-E_0)^2]^2
    with the sum over the full excited spectrum of the bare bath Hamiltonian.
    """
    n = bath.n_spins
    if n > DENSE_LIMIT:
        raise ValueError(f"perturbative plateau needs the dense spectrum (N <= {DENSE_LIMIT})")
    h_g = build_hamiltonian(bath, None, Branch.GROUND)
    spec = full_spectrum(h_g)
    gap = spec.energies[1] - spec.energies[0]
    if gap < DEGENERACY_GAP:
        raise DegenerateGroundStateError(f"gap {gap:.2e} too small for perturbation theory")
    sz = pauli_string(n, (coupling.site,), "z")
    psi0 = spec.states[:, 0]
    overlaps = spec.states.T @ (sz @ psi0)
    denom = spec.energies - spec.energies[0]
    s = np.sum((overlaps[1:] ** 2) / (denom[1:] ** 2))
    return float((1.0 - 0.5 * coupling.epsilon ** 2 * s) ** 2)


def jordan_wigner_lowering(n: int) -> list[sp.csr_matrix]:
    """Fermion annihilation operators c_1..c_N with spin-up as the occupied state.

    c_j = [prod_{k<j} (-sz_k)] sigma^-_j, the exact inverse of the mapping used
    by the free-fermion engine; used to pin index conventions in tests.
    """
    sigma_minus = sp.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))
    out = []
    for j in range(1, n + 1):
        op = sp.identity(1, format="csr")
        for site in range(1, n + 1):
            if site < j:
                factor = sp.csr_matrix(-_PAULI["z"])
            elif site == j:
                factor = sigma_minus
            else:
                factor = sp.csr_matrix(np.eye(2))
            op = sp.kron(op, factor, format="csr")
        out.append(sp.csr_matrix(op))
    return out


def fermion_correlation_matrix(psi: np.ndarray, n: int) -> np.ndarray:
    """2N x 2N matrix r_{ij} = <Psi_i^dag Psi_j> with Psi = (c_1..c_N, c_1^dag..c_N^dag).

    Brute-force evaluation in the full Hilbert space; the oracle counterpart of
    the free-fermion ground-state correlation matrix.
    """
    cs = jordan_wigner_lowering(n)
    x = np.column_stack([c @ psi for c in cs])          # c_j |psi>
    y = np.column_stack([c.T @ psi for c in cs])        # c_j^dag |psi> (real ops)
    r = np.empty((2 * n, 2 * n), dtype=complex)
    r[:n, :n] = x.conj().T @ x       # <c_i^dag c_j>
    r[:n, n:] = x.conj().T @ y       # <c_i^dag c_j^dag>
    r[n:, :n] = y.conj().T @ x       # <c_i c_j>
    r[n:, n:] = y.conj().T @ y       # <c_i c_j^dag>
    return r


def expectation(psi: np.ndarray, op) -> float:
    val = np.vdot(psi, op @ psi)
    return float(val.real)


def _series_meta(bath, coupling, method, **extra):
    meta = {
        "method": method,
        "engine_version": __version__,
        "bath": {
            "family": bath.family.value, "n_spins": bath.n_spins, "j": bath.j,
            "gamma": bath.gamma, "delta": bath.delta, "lambda": bath.lam,
            "boundary": bath.boundary.value,
        },
        "coupling": {"epsilon": coupling.epsilon, "site": coupling.site,
                     "omega_e": coupling.omega_e},
    }
    meta.update(extra)
    return meta
