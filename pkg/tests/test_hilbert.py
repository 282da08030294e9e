"""Operator and state layer: basis conventions, validation, round-trips."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from molmech.hilbert import (
    DensityMatrix,
    QOperator,
    SpaceDims,
    TruncationWarning,
    annihilator,
    basis_ket,
    displacement_operator,
    dump_operator,
    embed_pair,
    emitter_lowering,
    emitter_projector_excited,
    expectation,
    fock_ket,
    identity,
    ket_density,
    load_operator,
    number_operator,
)


# ---------------------------------------------------------------------------
# dimensions


def test_space_dims_total_and_doubling():
    d = SpaceDims(phonon_cutoff=7)
    assert d.total == 14
    assert d.doubled() == SpaceDims(phonon_cutoff=14)


def test_space_dims_rejects_bad_sizes():
    with pytest.raises(ValueError):
        SpaceDims(phonon_cutoff=1)
    with pytest.raises(ValueError):
        SpaceDims(phonon_cutoff=4, emitter_levels=3)


# ---------------------------------------------------------------------------
# elementary operators


def test_annihilator_matrix_elements():
    b = annihilator(5).mat
    for n in range(1, 5):
        assert b[n - 1, n] == pytest.approx(np.sqrt(n))
    assert np.count_nonzero(b) == 4


def test_commutator_is_identity_except_truncation_corner():
    n = 6
    b = annihilator(n).mat
    comm = b @ b.conj().T - b.conj().T @ b
    expect = np.eye(n)
    expect[-1, -1] = -(n - 1)  # truncation artifact in the last diagonal entry
    assert np.allclose(comm, expect, atol=1e-14)


def test_number_operator_diag():
    assert np.allclose(np.diag(number_operator(4).mat).real, [0, 1, 2, 3])


def test_number_equals_bdag_b_below_truncation():
    n = 5
    b = annihilator(n).mat
    assert np.allclose(b.conj().T @ b, number_operator(n).mat, atol=1e-14)


def test_emitter_operators():
    s = emitter_lowering().mat
    p = emitter_projector_excited().mat
    assert np.allclose(s.conj().T @ s, p)
    assert np.allclose(s @ s, 0.0)
    # |g><e| annihilates |g> and maps |e> to |g> in the (g, e) ordering
    assert np.allclose(s @ np.array([1.0, 0.0]), 0.0)
    assert np.allclose(s @ np.array([0.0, 1.0]), [1.0, 0.0])


def test_embed_pair_is_emitter_major():
    n = 3
    dims = SpaceDims(phonon_cutoff=n)
    pe = embed_pair(emitter_projector_excited(), identity(n))
    nb = embed_pair(identity(2), number_operator(n))
    assert pe.dims == dims
    # |e, m> lives at index n + m; |g, m> at index m
    assert np.allclose(np.diag(pe.mat).real, [0, 0, 0, 1, 1, 1])
    assert np.allclose(np.diag(nb.mat).real, [0, 1, 2, 0, 1, 2])


def test_embed_pair_rejects_wrong_emitter_dim():
    with pytest.raises(ValueError):
        embed_pair(identity(3), identity(3))


def test_basis_ket_indexing():
    dims = SpaceDims(phonon_cutoff=4)
    v = basis_ket(True, 2, dims)
    assert v[4 + 2] == 1.0
    assert np.sum(np.abs(v)) == 1.0
    w = basis_ket(False, 3, dims)
    assert w[3] == 1.0


def test_fock_ket_bounds():
    with pytest.raises(ValueError):
        fock_ket(5, 5)
    with pytest.raises(ValueError):
        fock_ket(-1, 5)


# ---------------------------------------------------------------------------
# QOperator semantics


def test_qoperator_is_immutable():
    op = identity(3)
    with pytest.raises(AttributeError):
        op.mat = np.zeros((3, 3))
    with pytest.raises((ValueError, RuntimeError)):
        op.mat[0, 0] = 2.0


def test_qoperator_herm_flag_detection():
    assert identity(4).herm
    assert not annihilator(4).herm
    with pytest.raises(ValueError):
        QOperator(annihilator(4).mat, herm=True)


def test_qoperator_algebra():
    b = annihilator(4)
    x = b + b.dag()
    assert x.herm
    assert np.allclose(x.mat, b.mat + b.mat.conj().T)
    y = (2.0 * b) @ b.dag() - b.dag() @ b * 2.0
    expect = 2.0 * (b.mat @ b.mat.conj().T - b.mat.conj().T @ b.mat)
    assert np.allclose(y.mat, expect)


def test_qoperator_rejects_nonsquare():
    with pytest.raises(ValueError):
        QOperator(np.zeros((2, 3)))


def test_qoperator_dims_mismatch():
    with pytest.raises(ValueError):
        QOperator(np.eye(5), dims=SpaceDims(phonon_cutoff=3))


# ---------------------------------------------------------------------------
# DensityMatrix validation


def test_density_matrix_accepts_valid_state():
    dims = SpaceDims(phonon_cutoff=3)
    rho = DensityMatrix(np.diag([0.5, 0.25, 0.25, 0, 0, 0]), dims=dims)
    assert rho.dim == 6
    assert rho.dims == dims


def test_density_matrix_rejects_bad_trace():
    with pytest.raises(ValueError, match="trace"):
        DensityMatrix(np.diag([0.5, 0.4]))


def test_density_matrix_rejects_nonhermitian():
    m = np.diag([0.5, 0.5]).astype(complex)
    m[0, 1] = 0.3
    with pytest.raises(ValueError, match="Hermitian"):
        DensityMatrix(m)


def test_density_matrix_rejects_negative_eigenvalue():
    m = np.diag([1.2, -0.2]).astype(complex)
    with pytest.raises(ValueError, match="eigenvalue"):
        DensityMatrix(m)


def test_density_matrix_is_immutable():
    rho = DensityMatrix(np.diag([1.0, 0.0]))
    with pytest.raises(AttributeError):
        rho.mat = np.eye(2)


@given(
    st.lists(
        st.tuples(
            st.floats(-1, 1, allow_nan=False), st.floats(-1, 1, allow_nan=False)
        ),
        min_size=4,
        max_size=8,
    )
)
def test_ket_density_is_always_valid(parts):
    psi = np.array([re + 1j * im for re, im in parts])
    if np.linalg.norm(psi) < 1e-12:
        with pytest.raises(ValueError):
            ket_density(psi)
        return
    rho = ket_density(psi)
    assert abs(np.trace(rho.mat) - 1.0) < 1e-12
    evals = np.linalg.eigvalsh(rho.mat)
    assert evals[0] > -1e-12
    # pure state: largest eigenvalue is one
    assert evals[-1] == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# expectation values


def test_expectation_real_for_hermitian():
    dims = SpaceDims(phonon_cutoff=3)
    rho = ket_density(basis_ket(True, 2, dims), dims=dims)
    nb = embed_pair(identity(2), number_operator(3))
    val = expectation(rho, nb)
    assert isinstance(val, float)
    assert val == pytest.approx(2.0)


def test_expectation_complex_for_general_operator():
    dims = SpaceDims(phonon_cutoff=3)
    psi = (basis_ket(False, 0, dims) + basis_ket(False, 1, dims)) / np.sqrt(2)
    rho = ket_density(psi, dims=dims)
    b = embed_pair(identity(2), annihilator(3))
    val = expectation(rho, b)
    assert isinstance(val, complex)
    assert val == pytest.approx(0.5)


def test_expectation_dimension_mismatch():
    rho = DensityMatrix(np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        expectation(rho, identity(4))


# ---------------------------------------------------------------------------
# displacement operator


def test_displacement_is_unitary_and_displaces():
    n = 40
    alpha = 0.7 - 0.3j
    d = displacement_operator(alpha, n)
    assert np.allclose(d.mat @ d.mat.conj().T, np.eye(n), atol=1e-12)
    psi = d.mat @ fock_ket(0, n)
    rho = ket_density(psi)
    val = expectation(rho, number_operator(n))
    assert val == pytest.approx(abs(alpha) ** 2, rel=1e-10)


def test_displacement_warns_near_truncation():
    with pytest.warns(TruncationWarning):
        displacement_operator(2.0, 8)


# ---------------------------------------------------------------------------
# dump / load round-trip


def test_dump_load_round_trip(tmp_path):
    op = annihilator(5) + 0.25j * number_operator(5)
    path = tmp_path / "op.txt"
    dump_operator(op, path)
    back = load_operator(path)
    assert np.allclose(back.mat, op.mat, atol=1e-15)
