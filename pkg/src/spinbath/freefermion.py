"""Exact determinant engine for XY-class open chains at large N.

The Jordan-Wigner map (spin-up = occupied fermion) turns the bath Hamiltonian
into H_E = (1/2) Psi^dag C Psi with Psi^dag = (c_1^dag..c_N^dag, c_1..c_N) and

    C = [[A, B], [-B, -A]],
    A[j,k] = -J (delta_{k,j+1} + delta_{j,k+1}) - 2 (J*lam + eps_j) delta_{j,k},
    B[j,k] = -J*gamma (delta_{k,j+1} - delta_{j,k+1}),

where eps_j = epsilon on the coupled site in the excited branch and zero
otherwise.  The spin-field constants cancel exactly, so H_E equals the
quadratic form with no additive shift and the many-body ground energy is
(1/2) * sum of the negative eigenvalues of C.

Resolved conventions (pinned entrywise against the brute-force oracle at
N <= 8, see tests/test_freefermion.py and spinbath.calibration):

* r[i, j] = <Psi_i^dag Psi_j> in the ground state filling the N lowest modes
  of C; with open boundaries A and B are real, so r is real symmetric and no
  transpose ambiguity survives.
* L(t) = |det(1 - r + r exp(+i C_e t))| with r built from the ground branch
  and C_e from the excited branch.  The Nambu doubling makes the determinant
  equal D(t)^2, so its modulus is the echo itself (no square root).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .models import BathSpec, Boundary, Branch, CouplingSpec, Family
from .oracle import NumericalError, _series_meta
from .series import EchoSeries

ZERO_MODE_TOL = 1e-12


class ZeroModeError(RuntimeError):
    """A single-particle mode of C sits within tolerance of zero energy."""


@dataclass(frozen=True)
class QuadraticForm:
    """Blocks of the fermionized bath: A symmetric, B antisymmetric, both real N x N."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a, b = self.a, self.b
        if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("A and B must be square matrices of equal size")
        if not np.allclose(a, a.T, atol=1e-13):
            raise ValueError("A must be symmetric")
        if not np.allclose(b, -b.T, atol=1e-13):
            raise ValueError("B must be antisymmetric")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def c(self) -> np.ndarray:
        """The 2N x 2N Hermitian block matrix sigma_z x A + i sigma_y x B."""
        return np.block([[self.a, self.b], [-self.b, -self.a]])


def build_quadratic_form(bath: BathSpec, coupling: CouplingSpec | None = None,
                         branch: Branch = Branch.GROUND) -> QuadraticForm:
    """Fermionize an XY-class open chain; rejects XXZ (quartic) and periodic input."""
    if bath.family is not Family.XY:
        raise ValueError("only the XY class maps to a quadratic fermion form")
    if bath.boundary is not Boundary.OPEN:
        raise ValueError("periodic chains are delegated to the exact oracle")
    n, j = bath.n_spins, bath.j
    eps = np.zeros(n)
    if branch is Branch.EXCITED and coupling is not None:
        if not 1 <= coupling.site <= n:
            raise ValueError(f"coupled site {coupling.site} outside 1..{n}")
        eps[coupling.site - 1] = coupling.epsilon
    a = np.diag(-2.0 * (j * bath.lam + eps))
    hop = -j * np.ones(n - 1)
    a += np.diag(hop, 1) + np.diag(hop, -1)
    pair = -j * bath.gamma * np.ones(n - 1)
    b = np.diag(pair, 1) - np.diag(pair, -1)
    return QuadraticForm(a, b)


def diagonalize(form: QuadraticForm):
    """Eigendecomposition C = U diag(w) U^T, w ascending, U real orthogonal."""
    w, u = eigh(form.c)
    return w, u


def ground_energy(form: QuadraticForm) -> float:
    """Many-body ground energy of H_E = (1/2) Psi^dag C Psi; no additive constant."""
    w, _ = diagonalize(form)
    return float(0.5 * np.sum(w[w < 0]))


def ground_state_correlations(form: QuadraticForm, zero_mode_tol: float = ZERO_MODE_TOL,
                              on_zero_mode: str = "raise") -> np.ndarray:
    """Correlation matrix r[i,j] = <Psi_i^dag Psi_j> of the filled-negative-mode state.

    The N lowest modes of C are occupied.  If any mode energy lies within
    ``zero_mode_tol`` of zero the ground state is (numerically) degenerate:
    ``on_zero_mode="raise"`` raises ZeroModeError, ``"fill"`` proceeds with the
    deterministic filling anyway (the echo is insensitive to which member of
    the near-degenerate doublet is selected; used by the echo driver for
    lambda < 1 chains whose edge-mode splitting underflows the tolerance).
    """
    w, u = diagonalize(form)
    n = form.n
    min_mode = float(np.min(np.abs(w)))
    if min_mode < zero_mode_tol:
        if on_zero_mode == "raise":
            raise ZeroModeError(
                f"mode energy {min_mode:.3e} below {zero_mode_tol}; ground state degenerate")
        # Numerically degenerate +-0 pair: eigh mixes its eigenvectors at
        # random within the subspace, which corrupts single-site observables
        # (the echo itself is insensitive).  Half-filling the pair is basis
        # independent inside the subspace, restores the particle-hole
        # constraint exactly, and reproduces the observables of the true
        # (parity-even) finite-N ground state.
        f = np.where(w < -zero_mode_tol, 1.0, 0.0)
        zero = np.abs(w) <= zero_mode_tol
        if np.count_nonzero(zero) % 2:
            raise ZeroModeError("odd number of near-zero modes; cannot pair them")
        f[zero] = 0.5
        if abs(f.sum() - n) > 1e-9:
            raise ZeroModeError("near-zero modes do not pair symmetrically")
        return (u * f) @ u.T
    occ = u[:, :n]
    r = occ @ occ.T  # real orthogonal U: r = (U f U^dag)^T = U f U^T
    return r


def loschmidt_echo_determinant(bath: BathSpec, coupling: CouplingSpec, times,
                               zero_mode_tol: float = ZERO_MODE_TOL) -> EchoSeries:
    """Echo via L(t) = |det(1 - r + r e^{i C_e t})|.

    One eigendecomposition of C_e; per time point the determinant is taken in
    the eigenbasis of C_e (unitary similarity leaves it unchanged), so each
    sample costs one LU factorization of a 2N x 2N complex matrix with the
    log-magnitude accumulated by slogdet to avoid overflow.
    """
    times = np.asarray(times, dtype=float)
    form_g = build_quadratic_form(bath, None, Branch.GROUND)
    form_e = build_quadratic_form(bath, coupling, Branch.EXCITED)

    w_g, _ = diagonalize(form_g)
    zero_mode = bool(np.min(np.abs(w_g)) < zero_mode_tol)
    r = ground_state_correlations(form_g, zero_mode_tol, on_zero_mode="fill")

    w_e, u_e = diagonalize(form_e)
    r_rot = u_e.T @ r @ u_e

    values = np.empty(len(times))
    eye = np.eye(2 * form_g.n)
    for k, t in enumerate(times):
        phases = np.exp(1j * w_e * t)
        m = eye - r_rot + r_rot * phases[np.newaxis, :]
        sign, logabs = np.linalg.slogdet(m)
        if sign == 0:
            raise NumericalError(f"determinant vanished at t={t}")
        values[k] = np.exp(logabs)

    meta = _series_meta(bath, coupling, "determinant", zero_mode=zero_mode)
    return EchoSeries(times, values, meta)


def occupation(form: QuadraticForm, site: int, r: np.ndarray | None = None) -> float:
    """<c_site^dag c_site> from the ground-state correlation matrix (site 1-based)."""
    if r is None:
        r = ground_state_correlations(form)
    return float(r[site - 1, site - 1].real)


def transverse_magnetization(form: QuadraticForm, site: int,
                             r: np.ndarray | None = None) -> float:
    """<sz_site> = 2 <c_site^dag c_site> - 1 in the ground state."""
    if not 1 <= site <= form.n:
        raise ValueError(f"site {site} outside 1..{form.n}")
    return 2.0 * occupation(form, site, r) - 1.0


def nn_spin_correlators(form: QuadraticForm, j: int,
                        r: np.ndarray | None = None) -> dict[str, float]:
    """Nearest-neighbour correlators at bond (j, j+1) by Wick contraction of r.

    Returns <sx_j sx_{j+1}>, <sy_j sy_{j+1}>, <sz_j sz_{j+1}>, <sz_j>, <sz_{j+1}>.
    In Majorana form with A_i = c_i^dag + c_i and B_i = c_i^dag - c_i:
    sx sx = B_j A_{j+1}, sy sy = -A_j B_{j+1}, sz_i = -A_i B_i, and the zz
    correlator is the three-pairing Wick sum of <A_j B_j A_{j+1} B_{j+1}>.
    """
    n = form.n
    if not 1 <= j <= n - 1:
        raise ValueError(f"bond ({j},{j+1}) outside the chain")
    if r is None:
        r = ground_state_correlations(form)

    def pair(kind: str, i1: int, i2: int) -> float:
        """<K_{i1} L_{i2}> for K, L in {A, B}, sites 1-based."""
        i, k = i1 - 1, i2 - 1
        cdc = r[i, k]              # <c_i^dag c_k>
        cdcd = r[i, n + k]         # <c_i^dag c_k^dag>
        cc = r[n + i, k]           # <c_i c_k>
        ccd = r[n + i, n + k]      # <c_i c_k^dag>
        if kind == "AA":
            return float((cdcd + cdc + ccd + cc).real)
        if kind == "AB":
            return float((cdcd - cdc + ccd - cc).real)
        if kind == "BA":
            return float((cdcd + cdc - ccd - cc).real)
        if kind == "BB":
            return float((cdcd - cdc - ccd + cc).real)
        raise ValueError(kind)

    sz_j = -pair("AB", j, j)
    sz_j1 = -pair("AB", j + 1, j + 1)
    xx = pair("BA", j, j + 1)
    yy = -pair("AB", j, j + 1)
    # Wick: <A_j B_j A_{j+1} B_{j+1}> = <A_j B_j><A_{j+1} B_{j+1}>
    #       - <A_j A_{j+1}><B_j B_{j+1}> + <A_j B_{j+1}><B_j A_{j+1}>
    zz = (pair("AB", j, j) * pair("AB", j + 1, j + 1)
          - pair("AA", j, j + 1) * pair("BB", j, j + 1)
          + pair("AB", j, j + 1) * pair("BA", j, j + 1))
    return {"xx": xx, "yy": yy, "zz": zz, "z_left": sz_j, "z_right": sz_j1}
