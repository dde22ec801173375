"""Model constructors against dense diagonalization oracles."""

import numpy as np
import pytest

from itflow.models import (
    LocalTerm,
    ModelError,
    ModelSpec,
    block_for,
    build_initial_adiabatic,
    build_xxz,
    initial_state,
    parity_operator,
    total_operator,
)
from itflow.pauli import PauliString, commutator, hermiticity_residual

from oracles import dense_of_sum


class TestXXZ:
    def test_bond_count_and_coefficients(self):
        terms = build_xxz(ModelSpec(3, 2.0))
        assert len(terms) == 2
        for j, t in enumerate(terms):
            assert t.home_site == j
            assert t.block == (j, j + 1)
            assert len(t.op) == 3
            coeffs = sorted(abs(c) for _, c in t.op.terms())
            assert coeffs == pytest.approx([0.25, 0.25, 0.5])

    def test_single_bond_spectrum(self):
        # frozen from the 4x4 dense oracle at lambda_z = 2
        h = total_operator(build_xxz(ModelSpec(2, 2.0)))
        evals = np.linalg.eigvalsh(dense_of_sum(h))
        assert evals == pytest.approx([-1.0, 0.0, 0.5, 0.5], abs=1e-12)

    def test_xy_bond_spectrum(self):
        h = total_operator(build_xxz(ModelSpec(2, 0.0)))
        evals = np.linalg.eigvalsh(dense_of_sum(h))
        assert evals == pytest.approx([-0.5, 0.0, 0.0, 0.5], abs=1e-12)

    def test_ground_energy_l2(self):
        h = total_operator(build_xxz(ModelSpec(2, 2.0)))
        assert np.linalg.eigvalsh(dense_of_sum(h))[0] == pytest.approx(-1.0)

    def test_length_validation(self):
        with pytest.raises(ModelError):
            ModelSpec(1, 2.0)

    def test_hermitian(self):
        for t in build_xxz(ModelSpec(5, 2.0)):
            assert hermiticity_residual(t.op) < 1e-12


class TestInitialField:
    def test_terms_l2(self):
        terms = build_initial_adiabatic(2)
        assert terms[0].op.coefficient(PauliString.from_label("XI")) == 0.5
        assert terms[0].op.coefficient(PauliString.from_label("II")) == 0.5
        assert terms[1].op.coefficient(PauliString.from_label("IX")) == -0.5
        assert terms[1].op.coefficient(PauliString.from_label("II")) == 0.5

    def test_each_term_is_projector(self):
        for t in build_initial_adiabatic(3):
            evals = np.unique(np.round(np.linalg.eigvalsh(dense_of_sum(t.op)), 12))
            assert list(evals) == [0.0, 1.0]

    def test_total_spectrum_l8(self):
        h = total_operator(build_initial_adiabatic(8))
        evals = np.linalg.eigvalsh(dense_of_sum(h))
        assert evals[0] == pytest.approx(0.0, abs=1e-12)
        assert evals[-1] == pytest.approx(8.0)
        assert evals[1] == pytest.approx(1.0)  # gap 1

    def test_hermitian(self):
        for t in build_initial_adiabatic(4):
            assert hermiticity_residual(t.op) < 1e-12


class TestInitialState:
    def test_l1_is_minus_state(self):
        psi = initial_state(1)
        assert psi == pytest.approx(np.array([1.0, -1.0]) / np.sqrt(2))

    def test_annihilation(self):
        for length in range(2, 9):
            h = total_operator(build_initial_adiabatic(length))
            psi = initial_state(length)
            assert np.linalg.norm(dense_of_sum(h) @ psi) < 1e-14
            assert np.linalg.norm(psi) == pytest.approx(1.0)

    def test_ground_state_of_initial_hamiltonian(self):
        length = 5
        h = dense_of_sum(total_operator(build_initial_adiabatic(length)))
        vals, vecs = np.linalg.eigh(h)
        assert vals[0] == pytest.approx(0.0, abs=1e-12)
        overlap = abs(np.vdot(vecs[:, 0], initial_state(length)))
        assert overlap > 1 - 1e-12

    def test_parity_expectation_is_product_of_signs(self):
        for length in (2, 3, 4, 5):
            psi = initial_state(length)
            par = dense_of_sum(parity_operator(length))
            expected = np.prod([(-1.0) ** (j + 1) for j in range(length)])
            assert np.vdot(psi, par @ psi) == pytest.approx(expected)


class TestParity:
    def test_single_term(self):
        p = parity_operator(4)
        assert len(p) == 1
        assert p.coefficient(PauliString.from_label("XXXX")) == 1.0

    def test_commutes_with_model(self):
        for length in (2, 4, 5):
            p = parity_operator(length)
            h = total_operator(build_xxz(ModelSpec(length, 2.0)))
            assert len(commutator(p, h)) == 0
            h0 = total_operator(build_initial_adiabatic(length))
            assert len(commutator(p, h0)) == 0

    def test_squares_to_identity(self):
        from itflow.pauli import sum_multiply

        p = parity_operator(3)
        sq = sum_multiply(p, p)
        assert sq.coefficient(PauliString.from_label("III")) == 1.0
        assert len(sq) == 1


class TestBlocks:
    def test_centered_window(self):
        assert block_for(4, 3, 10) == (3, 5)
        assert block_for(0, 5, 10) == (0, 2)
        assert block_for(9, 5, 10) == (7, 9)
        assert block_for(3, None, 10) == (0, 9)

    def test_local_term_width(self):
        t = LocalTerm(op=parity_operator(3), home_site=1, block=(0, 2))
        assert t.block_width == 3
