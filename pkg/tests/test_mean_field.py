import numpy as np
import pytest

from qfp import mean_field
from qfp.chem_io import MolecularIntegrals
from qfp.mean_field import DegeneracyError, LinearDependenceError

from conftest import h2_molecule, h4_molecule


def test_lowdin_orthonormalizes():
    m = h2_molecule(1.4)
    X = mean_field.lowdin_orthonormalize(m.S)
    assert np.allclose(X.T @ m.S @ X, np.eye(2), atol=1e-12)
    assert np.allclose(X, X.T, atol=1e-12)  # symmetric orthogonalization


def test_lowdin_rejects_linear_dependence():
    S = np.array([[1.0, 1.0 - 1e-12], [1.0 - 1e-12, 1.0]])
    with pytest.raises(LinearDependenceError):
        mean_field.lowdin_orthonormalize(S)


def test_h2_hf_energy_literature():
    # E_HF(H2/STO-3G, 1.4 bohr) = -1.1167 Ha (standard textbook value)
    mf = mean_field.scf_solve(h2_molecule(1.4))
    assert mf.converged
    assert mf.e_total == pytest.approx(-1.1167, abs=2e-3)


def test_density_invariants():
    m = h4_molecule(1.4)
    mf = mean_field.scf_solve(m)
    assert mf.converged
    # spin-summed density: trace(D S) = N, idempotency D S D = 2 D
    assert np.trace(mf.D @ m.S) == pytest.approx(m.n_electrons, abs=1e-6)
    assert np.allclose(mf.D @ m.S @ mf.D, 2.0 * mf.D, atol=1e-5)
    assert np.all(np.diff(mf.eps) >= -1e-12)


def test_fock_of_zero_density_is_core():
    m = h2_molecule(1.4)
    assert np.allclose(mean_field.fock_build(np.zeros((2, 2)), m), m.h_core)


def test_energy_expression_consistency():
    m = h2_molecule(1.4)
    mf = mean_field.scf_solve(m)
    e = 0.5 * np.sum(mf.D * (m.h_core + mf.F)) + m.e_nuclear
    assert mf.e_total == pytest.approx(e, abs=1e-12)


def test_odd_electron_count_rejected():
    m = h2_molecule(1.4)
    bad = MolecularIntegrals(
        n_orbitals=2, n_electrons=1, S=m.S, h_core=m.h_core, eri=m.eri,
        e_nuclear=m.e_nuclear,
    )
    with pytest.raises(ValueError, match="even"):
        mean_field.scf_solve(bad)


def test_fermi_level_degeneracy_detected():
    m = MolecularIntegrals(
        n_orbitals=2, n_electrons=2, S=np.eye(2), h_core=np.zeros((2, 2)),
        eri=np.zeros((2, 2, 2, 2)), e_nuclear=0.0,
    )
    with pytest.raises(DegeneracyError):
        mean_field.scf_solve(m)


def test_honest_convergence_flag():
    m = h4_molecule(1.6)
    mf = mean_field.scf_solve(m, max_iter=1)
    assert not mf.converged
    assert mf.n_iterations == 1
