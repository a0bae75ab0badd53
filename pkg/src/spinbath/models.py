"""Spin-chain bath definitions shared by every engine.

All sign and unit conventions live here.  The bath Hamiltonian is

    H_E = -(J/2) * sum_j [ (1+gamma) sx_j sx_{j+1} + (1-gamma) sy_j sy_{j+1}
                           + delta sz_j sz_{j+1} + 2*lam sz_j ]

with Pauli matrices (eigenvalues +-1), hbar = 1, energies in units of J and
times in 1/J.  ``lam`` is kept dimensionless, so the physical field is lam*J.
The excited qubit branch adds ``-epsilon * sz`` on the coupled site; the
ground branch is the bare bath.  Sites are numbered 1..N.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Family(Enum):
    """Bath universality class: XY (delta=0) or XXZ (lam=0, gamma=0)."""

    XY = "xy"
    XXZ = "xxz"


class Boundary(Enum):
    OPEN = "open"
    PERIODIC = "periodic"


class Branch(Enum):
    """Qubit branch selecting the bath Hamiltonian: H_g = H_E, H_e = H_E - eps*sz_site."""

    GROUND = "ground"
    EXCITED = "excited"


@dataclass(frozen=True)
class BathSpec:
    """Full parameterization of the bath chain.

    The two families are mutually exclusive: XY means delta = 0 (gamma and lam
    free), XXZ means lam = 0 and gamma = 0 (delta free).  Mixed parameter sets
    are rejected.
    """

    family: Family
    n_spins: int
    j: float = 1.0
    gamma: float = 0.0
    delta: float = 0.0
    lam: float = 0.0
    boundary: Boundary = Boundary.OPEN

    def __post_init__(self):
        if self.n_spins < 2:
            raise ValueError(f"need at least 2 bath spins, got {self.n_spins}")
        if self.j <= 0:
            raise ValueError("exchange J must be positive")
        if self.family is Family.XY:
            if self.delta != 0.0:
                raise ValueError("XY family requires delta = 0")
            if not 0.0 <= self.gamma <= 1.0:
                raise ValueError("XY family requires 0 <= gamma <= 1")
        elif self.family is Family.XXZ:
            if self.lam != 0.0:
                raise ValueError("XXZ family requires lam = 0")
            if self.gamma != 0.0:
                raise ValueError("XXZ family requires gamma = 0")

    @property
    def n_bonds(self) -> int:
        return self.n_spins if self.boundary is Boundary.PERIODIC else self.n_spins - 1

    def bonds(self) -> list[tuple[int, int]]:
        """Ordered (j, j+1) site pairs, plus the (N, 1) bond for periodic chains."""
        pairs = [(j, j + 1) for j in range(1, self.n_spins)]
        if self.boundary is Boundary.PERIODIC:
            pairs.append((self.n_spins, 1))
        return pairs


@dataclass(frozen=True)
class CouplingSpec:
    """System-bath coupling: -epsilon |e><e| sz_site, plus the qubit splitting omega_e.

    omega_e only contributes an overall phase to the dephasing factor D(t) and
    never changes the echo L(t); it is carried for the gate compiler.
    """

    epsilon: float
    site: int = 1
    omega_e: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.site < 1:
            raise ValueError("site index is 1-based")


@dataclass(frozen=True)
class Term:
    """One Hermitian term coeff * prod_k sigma^{paulis[k]}_{sites[k]}."""

    sites: tuple[int, ...]
    paulis: str
    coeff: float


def spin_hamiltonian_terms(bath: BathSpec, coupling: CouplingSpec | None = None,
                           branch: Branch = Branch.GROUND) -> list[Term]:
    """Exact term list of the branch Hamiltonian acting on the bath.

    Every structural term is emitted, including those with zero coefficient,
    so the list layout depends only on (n_spins, boundary).  Open chains carry
    N-1 bonds, periodic chains N.
    """
    if coupling is not None and coupling.site > bath.n_spins:
        raise ValueError(f"coupled site {coupling.site} outside chain of {bath.n_spins}")
    j = bath.j
    terms = []
    for (a, b) in bath.bonds():
        terms.append(Term((a, b), "xx", -0.5 * j * (1.0 + bath.gamma)))
        terms.append(Term((a, b), "yy", -0.5 * j * (1.0 - bath.gamma)))
        terms.append(Term((a, b), "zz", -0.5 * j * bath.delta))
    for a in range(1, bath.n_spins + 1):
        coeff = -j * bath.lam
        if branch is Branch.EXCITED and coupling is not None and a == coupling.site:
            coeff -= coupling.epsilon
        terms.append(Term((a,), "z", coeff))
    return terms
