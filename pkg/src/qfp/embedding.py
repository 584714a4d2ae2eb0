"""Fragment embedding: HOMO-LUMO active spaces and single-shot DMET.

Active-space freezing traces inactive occupied orbitals into an effective
one-electron term and a core energy.  The DMET path builds a fragment+bath
cluster from the Schmidt decomposition of the mean-field density matrix in
the Lowdin-localized basis, with a chemical potential on the fragment
diagonal fitted so the cluster holds the right number of electrons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from qfp import fci
from qfp.chem_io import MolecularIntegrals
from qfp.mean_field import MeanFieldSolution

__all__ = [
    "FragmentSpec",
    "ClusterBasis",
    "EmbeddedHamiltonian",
    "transform_integrals",
    "localize_integrals",
    "homo_lumo_active_space",
    "dmet_cluster_basis",
    "dmet_hamiltonian",
    "fit_chemical_potential",
    "fragment_count_builder",
    "cluster_reduce",
    "project_fock",
    "to_molecular_integrals",
    "EmbeddingError",
]


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class FragmentSpec:
    """Fragment orbital indices into the localized orbital basis."""

    indices: tuple
    label: str = ""

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("fragment indices must be unique")


@dataclass
class ClusterBasis:
    """Column-orthonormal split of the localized space around a fragment."""

    fragment: np.ndarray      # n x n_frag
    bath: np.ndarray          # n x n_bath
    env_occupied: np.ndarray  # n x n_eo
    env_virtual: np.ndarray   # n x n_ev
    bath_singular_values: np.ndarray

    @property
    def cluster(self) -> np.ndarray:
        """Active cluster columns: fragment first, then bath."""
        return np.hstack([self.fragment, self.bath])


@dataclass
class EmbeddedHamiltonian:
    """Effective Hamiltonian on an active orbital set.

    h_eff already contains the environment mean field and (for DMET) the
    -mu shift on fragment diagonals; e_core is the frozen-orbital constant
    including nuclear repulsion.
    """

    n_active_orbitals: int
    n_active_electrons: int
    h_eff: np.ndarray
    eri_active: np.ndarray
    e_core: float
    mu: float = 0.0
    fragment_mask: np.ndarray = field(default=None)
    provenance: str = "active-space"

    def __post_init__(self):
        if self.fragment_mask is None:
            self.fragment_mask = np.zeros(self.n_active_orbitals, dtype=bool)
        if self.n_active_electrons % 2 != 0:
            raise EmbeddingError("active electron count must be even")
        if self.n_active_electrons > 2 * self.n_active_orbitals:
            raise EmbeddingError("more electrons than spin orbitals in active space")

    @property
    def homo_lumo_gap(self) -> float:
        """Gap between effective orbitals around the active Fermi level."""
        w = np.linalg.eigvalsh(self.h_eff)
        occ = self.n_active_electrons // 2
        return w[occ] - w[occ - 1]


def transform_integrals(h, eri, C):
    """Rotate one- and two-electron integrals into the basis given by C's columns."""
    h_t = C.T @ h @ C
    tmp = np.einsum("pqrs,pa->aqrs", eri, C, optimize=True)
    tmp = np.einsum("aqrs,qb->abrs", tmp, C, optimize=True)
    tmp = np.einsum("abrs,rc->abcs", tmp, C, optimize=True)
    eri_t = np.einsum("abcs,sd->abcd", tmp, C, optimize=True)
    return h_t, eri_t


def localize_integrals(m: MolecularIntegrals, X: np.ndarray) -> MolecularIntegrals:
    """Integrals in the Lowdin-orthonormalized basis (X = S^{-1/2})."""
    h_loc, eri_loc = transform_integrals(m.h_core, m.eri, X)
    return MolecularIntegrals(
        n_orbitals=m.n_orbitals,
        n_electrons=m.n_electrons,
        S=np.eye(m.n_orbitals),
        h_core=h_loc,
        eri=eri_loc,
        e_nuclear=m.e_nuclear,
    )


def _coulomb_exchange(eri, D, exchange_factor=0.5):
    J = np.einsum("pqrs,rs->pq", eri, D, optimize=True)
    K = np.einsum("prqs,rs->pq", eri, D, optimize=True)
    return J - exchange_factor * K


def _freeze_window(h, eri, e_const, n_electrons, n_elec_act, n_orb_act,
                   eps=None, exchange_factor=0.5):
    """Freeze orbitals outside a window centered on the Fermi level.

    Orbitals are assumed energy-ordered.  Returns (h_eff, eri_act, e_core,
    active index array).
    """
    n = h.shape[0]
    n_occ = n_electrons // 2
    n_act_occ = n_elec_act // 2
    if n_act_occ > n_occ or n_orb_act - n_act_occ > n - n_occ or n_orb_act < n_act_occ:
        raise EmbeddingError(
            f"active window ({n_elec_act}e,{n_orb_act}o) infeasible for "
            f"{n_electrons}e in {n}o"
        )
    lo = n_occ - n_act_occ
    hi = lo + n_orb_act
    if eps is not None:
        for edge in (lo, hi):
            if 0 < edge < n and abs(eps[edge] - eps[edge - 1]) < 1e-8:
                raise EmbeddingError(
                    f"active window edge splits a degenerate pair at index {edge}"
                )
    inact = np.arange(lo)
    act = np.arange(lo, hi)

    D_in = np.zeros((n, n))
    D_in[inact, inact] = 2.0
    V = _coulomb_exchange(eri, D_in, exchange_factor)
    h_eff = (h + V)[np.ix_(act, act)]
    e_core = e_const + np.sum(D_in * h) + 0.5 * np.sum(D_in * V)
    eri_act = eri[np.ix_(act, act, act, act)]
    return h_eff, eri_act, e_core, act


def homo_lumo_active_space(
    m: MolecularIntegrals,
    mf: MeanFieldSolution,
    n_elec_act: int,
    n_orb_act: int,
    exchange_factor: float = 0.5,
) -> EmbeddedHamiltonian:
    """Freeze MOs outside a HOMO/LUMO-centered window at the SCF level."""
    h_mo, eri_mo = transform_integrals(m.h_core, m.eri, mf.C)
    h_eff, eri_act, e_core, _ = _freeze_window(
        h_mo, eri_mo, m.e_nuclear, m.n_electrons, n_elec_act, n_orb_act,
        eps=mf.eps, exchange_factor=exchange_factor,
    )
    return EmbeddedHamiltonian(
        n_active_orbitals=n_orb_act,
        n_active_electrons=n_elec_act,
        h_eff=h_eff,
        eri_active=eri_act,
        e_core=e_core,
        provenance="active-space",
    )


def dmet_cluster_basis(D_loc: np.ndarray, frag: FragmentSpec, tol: float = 1e-6) -> ClusterBasis:
    """Schmidt fragment+bath split of the localized mean-field 1-RDM."""
    n = D_loc.shape[0]
    frag_idx = np.asarray(frag.indices, dtype=int)
    if frag_idx.size and (frag_idx.min() < 0 or frag_idx.max() >= n):
        raise EmbeddingError("fragment index out of range")
    occs = np.linalg.eigvalsh(D_loc)
    if occs.min() < -tol or occs.max() > 2.0 + tol:
        raise EmbeddingError(
            f"density matrix not a valid mean-field RDM (occupations in "
            f"[{occs.min():.3e}, {occs.max():.3e}])"
        )
    env_idx = np.array([i for i in range(n) if i not in set(frag_idx.tolist())])

    fragment = np.eye(n)[:, frag_idx]
    if env_idx.size == 0:
        empty = np.zeros((n, 0))
        return ClusterBasis(fragment, empty, empty, empty, np.zeros(0))

    block = D_loc[np.ix_(env_idx, frag_idx)] / 2.0
    U, s, _ = np.linalg.svd(block, full_matrices=True)
    n_bath = int(np.sum(s > tol))
    if n_bath < s.size and n_bath > 0 and abs(s[n_bath - 1] - s[n_bath]) < tol * 1e-2:
        raise EmbeddingError("degenerate bath singular values at the truncation cutoff")

    def embed(cols):
        out = np.zeros((n, cols.shape[1]))
        out[env_idx, :] = cols
        return out

    bath = embed(U[:, :n_bath])
    rest = U[:, n_bath:]
    if rest.shape[1]:
        D_env = rest.T @ D_loc[np.ix_(env_idx, env_idx)] @ rest
        w, V = np.linalg.eigh(D_env)
        occ_cols = embed(rest @ V[:, w > 0.5])
        vir_cols = embed(rest @ V[:, w <= 0.5])
    else:
        occ_cols = np.zeros((n, 0))
        vir_cols = np.zeros((n, 0))

    return ClusterBasis(
        fragment=fragment,
        bath=bath,
        env_occupied=occ_cols,
        env_virtual=vir_cols,
        bath_singular_values=s[:n_bath],
    )


def dmet_hamiltonian(
    m_loc: MolecularIntegrals,
    cb: ClusterBasis,
    mu: float = 0.0,
    exchange_factor: float = 0.5,
) -> EmbeddedHamiltonian:
    """Cluster Hamiltonian with the environment entering as a mean field."""
    if not np.isfinite(mu):
        raise EmbeddingError("chemical potential must be finite")
    C = cb.cluster
    n_frag = cb.fragment.shape[1]
    D_env = 2.0 * cb.env_occupied @ cb.env_occupied.T

    V = _coulomb_exchange(m_loc.eri, D_env, exchange_factor)
    h_emb = m_loc.h_core + V
    h_eff = C.T @ h_emb @ C
    mask = np.zeros(C.shape[1], dtype=bool)
    mask[:n_frag] = True
    h_eff[np.diag_indices_from(h_eff)] -= mu * mask

    _, eri_act = transform_integrals(np.zeros_like(m_loc.h_core), m_loc.eri, C)
    e_core = m_loc.e_nuclear + np.sum(D_env * m_loc.h_core) + 0.5 * np.sum(D_env * V)

    n_env = float(np.trace(D_env))
    n_act = m_loc.n_electrons - n_env
    n_act_round = int(round(n_act / 2.0)) * 2
    if abs(n_act - n_act_round) > 0.05:
        raise EmbeddingError(
            f"cluster electron count {n_act:.4f} not close to an even integer"
        )

    return EmbeddedHamiltonian(
        n_active_orbitals=C.shape[1],
        n_active_electrons=n_act_round,
        h_eff=h_eff,
        eri_active=eri_act,
        e_core=e_core,
        mu=mu,
        fragment_mask=mask,
        provenance="dmet",
    )


def fragment_count_builder(m_loc: MolecularIntegrals, cb: ClusterBasis,
                           exchange_factor: float = 0.5):
    """builder(mu) -> fragment electron count in the cluster ground state."""
    n_frag = cb.fragment.shape[1]

    def count(mu: float) -> float:
        eh = dmet_hamiltonian(m_loc, cb, mu=mu, exchange_factor=exchange_factor)
        _, psi = fci.fci_ground_state(
            eh.h_eff, eh.eri_active, 0.0, eh.n_active_electrons
        )
        rho = fci.determinant_rdm1(psi, eh.n_active_orbitals)
        return float(np.trace(rho[:n_frag, :n_frag]))

    return count


def fit_chemical_potential(builder, n_target: float, tol: float = 1e-6,
                           bracket=(-1.0, 1.0), max_iter: int = 100) -> float:
    """Bisection on the (monotone) fragment filling as a function of mu."""
    lo, hi = bracket
    f_lo = builder(lo) - n_target
    f_hi = builder(hi) - n_target
    if abs(f_lo) < tol:
        return lo
    if abs(f_hi) < tol:
        return hi
    # Filling increases with mu (deeper fragment levels attract electrons).
    if f_lo * f_hi > 0:
        raise EmbeddingError(
            f"bracket [{lo}, {hi}] does not straddle target filling {n_target}"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = builder(mid) - n_target
        if abs(f_mid) < tol:
            return mid
        if f_mid * f_lo < 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


def project_fock(F_loc: np.ndarray, cb: ClusterBasis) -> np.ndarray:
    """Mean-field Fock matrix projected into the cluster space."""
    C = cb.cluster
    return C.T @ F_loc @ C


def cluster_reduce(
    eh: EmbeddedHamiltonian,
    fock_cluster: np.ndarray,
    n_elec_act: int,
    n_orb_act: int,
    exchange_factor: float = 0.5,
) -> EmbeddedHamiltonian:
    """Rotate to the cluster Fock eigenbasis and freeze a HOMO-LUMO window."""
    if fock_cluster.shape != eh.h_eff.shape:
        raise EmbeddingError("cluster Fock dimension mismatch")
    eps, R = np.linalg.eigh(fock_cluster)
    h_rot, eri_rot = transform_integrals(eh.h_eff, eh.eri_active, R)
    h_eff, eri_act, e_core, _ = _freeze_window(
        h_rot, eri_rot, eh.e_core, eh.n_active_electrons, n_elec_act, n_orb_act,
        eps=eps, exchange_factor=exchange_factor,
    )
    return EmbeddedHamiltonian(
        n_active_orbitals=n_orb_act,
        n_active_electrons=n_elec_act,
        h_eff=h_eff,
        eri_active=eri_act,
        e_core=e_core,
        mu=eh.mu,
        provenance="cluster-reduced",
    )


def to_molecular_integrals(eh: EmbeddedHamiltonian) -> MolecularIntegrals:
    """View an embedded Hamiltonian as integrals (for FCIDUMP interchange)."""
    n = eh.n_active_orbitals
    return MolecularIntegrals(
        n_orbitals=n,
        n_electrons=eh.n_active_electrons,
        S=np.eye(n),
        h_core=eh.h_eff.copy(),
        eri=eh.eri_active.copy(),
        e_nuclear=eh.e_core,
    )
