import numpy as np
import pytest

from qfp import chem_io, embedding, fci, mean_field
from qfp.chem_io import MolecularIntegrals
from qfp.embedding import EmbeddingError, FragmentSpec

from conftest import dmet_h2, h2_molecule, h4_molecule


def _localized(m):
    mf = mean_field.scf_solve(m)
    X = mean_field.lowdin_orthonormalize(m.S)
    m_loc = embedding.localize_integrals(m, X)
    S_half = np.linalg.inv(X)
    return mf, m_loc, S_half @ mf.D @ S_half


def test_h2_active_space_fci_matches_full_fci():
    # (2e,2o) active space on a 2-orbital molecule is exact
    m = h2_molecule(1.4)
    mf = mean_field.scf_solve(m)
    eh = embedding.homo_lumo_active_space(m, mf, 2, 2)
    e_act, _ = fci.fci_ground_state(eh.h_eff, eh.eri_active, eh.e_core, 2)
    h_mo, eri_mo = embedding.transform_integrals(m.h_core, m.eri, mf.C)
    e_full, _ = fci.fci_ground_state(h_mo, eri_mo, m.e_nuclear, 2)
    assert e_act == pytest.approx(e_full, abs=1e-10)
    # E_FCI(H2/STO-3G, 1.4 bohr) = -1.1373 Ha (standard textbook value)
    assert e_act == pytest.approx(-1.1373, abs=2e-3)


def test_h4_frozen_core_energy_window():
    # freezing the lowest orbital of H4 must stay variationally sane
    m = h4_molecule(1.6)
    mf = mean_field.scf_solve(m)
    h_mo, eri_mo = embedding.transform_integrals(m.h_core, m.eri, mf.C)
    e_full, _ = fci.fci_ground_state(h_mo, eri_mo, m.e_nuclear, 4)
    eh = embedding.homo_lumo_active_space(m, mf, 2, 3)
    e_act, _ = fci.fci_ground_state(eh.h_eff, eh.eri_active, eh.e_core, 2)
    assert e_full - 1e-8 <= e_act <= mf.e_total + 1e-8


def test_active_space_window_infeasible():
    m = h2_molecule(1.4)
    mf = mean_field.scf_solve(m)
    with pytest.raises(EmbeddingError):
        embedding.homo_lumo_active_space(m, mf, 2, 3)  # only 2 orbitals exist
    with pytest.raises(EmbeddingError):
        embedding.homo_lumo_active_space(m, mf, 4, 1)


def test_homo_lumo_gap_positive():
    m = h4_molecule(1.6)
    mf = mean_field.scf_solve(m)
    eh = embedding.homo_lumo_active_space(m, mf, 4, 4)
    assert eh.homo_lumo_gap > 0


def test_cluster_basis_orthonormal_and_complete():
    m = h4_molecule(1.4)
    _, m_loc, D_loc = _localized(m)
    cb = embedding.dmet_cluster_basis(D_loc, FragmentSpec([0, 1]))
    C = cb.cluster
    assert np.allclose(C.T @ C, np.eye(C.shape[1]), atol=1e-12)
    # fragment columns are the fragment sites themselves
    assert np.allclose(np.abs(C[:2, :2]), np.eye(2), atol=1e-12)


def test_cluster_basis_rejects_invalid_occupations():
    with pytest.raises(EmbeddingError):
        embedding.dmet_cluster_basis(np.diag([2.5, 0.0]), FragmentSpec([0]))
    with pytest.raises(EmbeddingError):
        embedding.dmet_cluster_basis(np.diag([-0.5, 2.0]), FragmentSpec([0]))


def test_whole_system_fragment_reproduces_spectrum():
    m = h2_molecule(1.4)
    _, m_loc, D_loc = _localized(m)
    cb = embedding.dmet_cluster_basis(D_loc, FragmentSpec([0, 1]))
    eh = embedding.dmet_hamiltonian(m_loc, cb)
    H_emb = fci.fock_space_hamiltonian(eh.h_eff, eh.eri_active, eh.e_core)
    H_ref = fci.fock_space_hamiltonian(m_loc.h_core, m_loc.eri, m_loc.e_nuclear)
    w_emb = np.linalg.eigvalsh(H_emb)
    w_ref = np.linalg.eigvalsh(H_ref)
    assert np.allclose(w_emb, w_ref, atol=1e-10)


def test_noninteracting_embedding_recovers_mean_field():
    m = h4_molecule(1.4)
    m0 = MolecularIntegrals(
        n_orbitals=4, n_electrons=4, S=m.S, h_core=m.h_core,
        eri=np.zeros_like(m.eri), e_nuclear=m.e_nuclear,
    )
    mf, m_loc, D_loc = _localized(m0)
    cb = embedding.dmet_cluster_basis(D_loc, FragmentSpec([0, 1]))
    eh = embedding.dmet_hamiltonian(m_loc, cb)
    e, _ = fci.fci_ground_state(eh.h_eff, eh.eri_active, eh.e_core,
                                eh.n_active_electrons)
    assert e == pytest.approx(mf.e_total, abs=1e-8)


def test_h4_chemical_potential_fit():
    m = h4_molecule(1.4)
    _, m_loc, D_loc = _localized(m)
    cb = embedding.dmet_cluster_basis(D_loc, FragmentSpec([0, 1]))
    builder = embedding.fragment_count_builder(m_loc, cb)
    mu = embedding.fit_chemical_potential(builder, 2.0)
    assert abs(builder(mu) - 2.0) < 1e-6


def test_dmet_h2_bath_size():
    eh = dmet_h2(1.4)
    assert eh.n_active_orbitals == 2  # one fragment + one bath orbital
    assert eh.n_active_electrons == 2
    assert eh.fragment_mask.tolist() == [True, False]


def test_cluster_reduce_preserves_energy_at_full_size():
    eh = dmet_h2(1.4)
    red = embedding.cluster_reduce(eh, eh.h_eff, eh.n_active_electrons,
                                   eh.n_active_orbitals)
    e0, _ = fci.fci_ground_state(eh.h_eff, eh.eri_active, eh.e_core,
                                 eh.n_active_electrons)
    e1, _ = fci.fci_ground_state(red.h_eff, red.eri_active, red.e_core,
                                 red.n_active_electrons)
    assert e1 == pytest.approx(e0, abs=1e-10)


def test_fcidump_interchange_preserves_fci_energy():
    eh = dmet_h2(1.4)
    text = chem_io.emit_fcidump(embedding.to_molecular_integrals(eh))
    back = chem_io.parse_fcidump(text)
    e0, _ = fci.fci_ground_state(eh.h_eff, eh.eri_active, eh.e_core, 2)
    e1, _ = fci.fci_ground_state(back.h_core, back.eri, back.e_nuclear, 2)
    assert e1 == pytest.approx(e0, abs=1e-10)


def test_mu_shifts_fragment_diagonal_only():
    m = h2_molecule(1.4)
    _, m_loc, D_loc = _localized(m)
    cb = embedding.dmet_cluster_basis(D_loc, FragmentSpec([0]))
    eh0 = embedding.dmet_hamiltonian(m_loc, cb, mu=0.0)
    eh1 = embedding.dmet_hamiltonian(m_loc, cb, mu=0.3)
    diff = eh0.h_eff - eh1.h_eff
    assert diff[0, 0] == pytest.approx(0.3, abs=1e-12)
    assert np.allclose(diff - np.diag(np.diag(diff)), 0.0, atol=1e-12)
    assert diff[1, 1] == pytest.approx(0.0, abs=1e-12)
