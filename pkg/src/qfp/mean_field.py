"""Restricted Hartree-Fock via the Roothaan equations.

Plain damped fixed-point SCF (no DIIS): the systems handled here are small
enough that simplicity wins.  Also provides Lowdin symmetric
orthonormalization, which defines the localized orbital basis used by the
embedding layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from qfp.chem_io import MolecularIntegrals

__all__ = [
    "MeanFieldSolution",
    "lowdin_orthonormalize",
    "fock_build",
    "scf_solve",
    "LinearDependenceError",
    "DegeneracyError",
]


class LinearDependenceError(ValueError):
    """Overlap matrix has a near-zero eigenvalue; basis is linearly dependent."""


class DegeneracyError(ValueError):
    """Orbital degeneracy at the Fermi level; closed-shell filling is ambiguous."""


@dataclass
class MeanFieldSolution:
    """Converged (or honestly flagged unconverged) RHF solution."""

    C: np.ndarray          # MO coefficients, AO x MO
    eps: np.ndarray        # orbital energies, ascending
    D: np.ndarray          # spin-summed AO density, trace(D S) = n_electrons
    F: np.ndarray          # final AO Fock matrix
    e_total: float         # electronic + nuclear energy, Hartree
    converged: bool
    n_iterations: int


def lowdin_orthonormalize(S: np.ndarray, min_eig: float = 1e-10) -> np.ndarray:
    """Symmetric orthonormalization X = S^{-1/2}, so X.T @ S @ X = I."""
    S = np.asarray(S, dtype=float)
    w, U = np.linalg.eigh(S)
    if w.min() < min_eig:
        raise LinearDependenceError(
            f"overlap eigenvalue {w.min():.3e} below {min_eig:.0e}"
        )
    return (U / np.sqrt(w)) @ U.T


def fock_build(D: np.ndarray, m: MolecularIntegrals) -> np.ndarray:
    """Closed-shell Fock matrix F = h + J(D) - K(D)/2 for spin-summed D."""
    if D.shape != m.h_core.shape:
        raise ValueError("density/integral dimension mismatch")
    J = np.einsum("pqrs,rs->pq", m.eri, D)
    K = np.einsum("prqs,rs->pq", m.eri, D)
    return m.h_core + J - 0.5 * K


def _density(C: np.ndarray, n_occ: int) -> np.ndarray:
    Cocc = C[:, :n_occ]
    return 2.0 * Cocc @ Cocc.T


def scf_solve(
    m: MolecularIntegrals,
    max_iter: int = 200,
    tol: float = 1e-8,
    damping: float = 0.3,
) -> MeanFieldSolution:
    """Iterate the Roothaan equations to self-consistency.

    damping mixes `damping` of the previous density into each update.
    Non-convergence is reported via the `converged` flag, never hidden.
    """
    if m.n_electrons % 2 != 0:
        raise ValueError("restricted HF needs an even electron count")
    n_occ = m.n_electrons // 2
    if n_occ > m.n_orbitals:
        raise ValueError("more electron pairs than orbitals")

    eps, C = scipy.linalg.eigh(m.h_core, m.S)
    D = _density(C, n_occ)
    converged = False
    n_iter = 0
    F = fock_build(D, m)
    for n_iter in range(1, max_iter + 1):
        eps, C = scipy.linalg.eigh(F, m.S)
        if n_occ < m.n_orbitals and abs(eps[n_occ] - eps[n_occ - 1]) < 1e-9:
            raise DegeneracyError(
                f"HOMO/LUMO degenerate at eps={eps[n_occ - 1]:.10f}; "
                "closed-shell occupation undefined"
            )
        D_new = _density(C, n_occ)
        delta = np.max(np.abs(D_new - D))
        D = damping * D + (1.0 - damping) * D_new
        F = fock_build(D, m)
        if delta < tol:
            converged = True
            break

    e_total = 0.5 * np.sum(D * (m.h_core + F)) + m.e_nuclear
    return MeanFieldSolution(
        C=C, eps=eps, D=D, F=F, e_total=e_total, converged=converged, n_iterations=n_iter
    )
