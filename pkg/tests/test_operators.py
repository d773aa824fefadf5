import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmem.errors import InvalidDimension, InvalidMode, InvalidState, SignatureMismatch, TruncationError
from qmem.operators import (DensityMatrix, SpaceSignature, annihilation, basis, coherent_state, commutator,
                            creation, displacement_operator, embed, expectation, fidelity, fock_state, identity,
                            number, partial_trace, product, tensor, thermal_qubit)


def test_annihilation_entries():
    a = annihilation(5).data
    for n in range(1, 5):
        assert a[n - 1, n] == pytest.approx(math.sqrt(n))
    mask = np.ones_like(a, dtype=bool)
    mask[np.arange(4), np.arange(1, 5)] = False
    assert np.all(a[mask] == 0)


def test_ladder_actions():
    a = annihilation(6).data
    assert np.allclose(a @ basis(6, 1), basis(6, 0))
    assert np.allclose(a @ basis(6, 3), math.sqrt(3) * basis(6, 2))
    assert np.allclose(creation(6).data @ a, np.diag(np.arange(6)))
    assert np.allclose(number(6).data, np.diag(np.arange(6)))


@pytest.mark.parametrize("dim", [0, 1, -3])
def test_bad_dimension(dim):
    with pytest.raises(InvalidDimension):
        annihilation(dim)


def test_signature_invariants():
    sig = SpaceSignature((6, 2, 3))
    assert sig.total == 36
    with pytest.raises(InvalidDimension):
        SpaceSignature((6, 1))


@given(st.integers(2, 12))
def test_ladder_commutator_below_truncation(dim):
    a = annihilation(dim)
    c = commutator(a, a.dag()).data
    k = dim - 1
    assert np.max(np.abs(c[:k, :k] - np.eye(k))) < 1e-12


def test_embed_products_and_commutation():
    sig = SpaceSignature((4, 3))
    a, b = annihilation(4), annihilation(3)
    A, B = embed(a, 0, sig), embed(b, 1, sig)
    assert np.allclose((A @ B).data, tensor(a, b).data)
    assert np.allclose(commutator(A, B).data, 0)
    assert np.allclose(embed(identity(SpaceSignature((4,))), 0, sig).data, np.eye(12))
    with pytest.raises(InvalidMode):
        embed(a, 2, sig)
    with pytest.raises(SignatureMismatch):
        embed(b, 0, sig)


def test_displacement_basics():
    assert np.allclose(displacement_operator(0, 8).data, np.eye(8))
    psi = displacement_operator(3, 40).data @ basis(40, 0)
    assert abs(psi[0]) ** 2 == pytest.approx(math.exp(-9), rel=1e-6)
    assert math.exp(-9) == pytest.approx(1.234e-4, rel=1e-3)


def test_displacement_round_trip_against_larger_space():
    # oracle: the same computation in a space twice as large
    out = {}
    for dim in (20, 40):
        d1, d2 = displacement_operator(1.14, dim).data, displacement_operator(-1.14, dim).data
        out[dim] = d2 @ d1 @ basis(dim, 0)
    assert abs(out[20][0]) ** 2 > 1 - 1e-8
    assert np.allclose(out[20], out[40][:20], atol=1e-8)


def test_displacement_truncation_guard():
    with pytest.raises(TruncationError):
        displacement_operator(3.0, 20)


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
@settings(max_examples=25, deadline=None)
def test_displacement_composition(ar, ai, br, bi):
    dim = 40
    al, be = complex(ar, ai), complex(br, bi)
    lhs = displacement_operator(al, dim).data @ displacement_operator(be, dim).data
    rhs = np.exp(1j * (al * be.conjugate()).imag) * displacement_operator(al + be, dim).data
    keep = dim - 20  # well-truncated block
    assert np.max(np.abs((lhs - rhs)[:keep, :keep])) < 1e-6


def test_displacement_unitary_on_retained_levels():
    dim, beta = 30, 1.5
    d = displacement_operator(beta, dim).data
    keep = int(dim - 4 * beta ** 2)
    err = (d @ d.conj().T - np.eye(dim))[:keep, :keep]
    assert np.max(np.abs(err)) < 1e-6


def test_coherent_state_statistics():
    assert np.allclose(coherent_state(0, 10).data, fock_state(10, 0).data)
    rho = coherent_state(3, 30)
    n = expectation(rho, number(30)).real
    assert n == pytest.approx(9.0, abs=0.05)
    # the truncated exponential distorts the top levels; at dim 30 the Poisson
    # tail beyond n=29 is ~1e-8, so compare against D(3)|0> with headroom
    for dim, tol in ((40, 1e-9), (30, 1e-7)):
        psi = displacement_operator(3, dim).data @ basis(dim, 0)
        ref = DensityMatrix.from_ket(SpaceSignature((dim,)), psi / np.linalg.norm(psi))
        assert fidelity(coherent_state(3, dim), ref) > 1 - tol


def test_density_matrix_validation():
    sig = SpaceSignature((2,))
    with pytest.raises(InvalidState):
        DensityMatrix(sig, np.diag([0.6, 0.6]))
    with pytest.raises(InvalidState):
        DensityMatrix(sig, np.array([[0.5, 0.5], [0.0, 0.5]]))
    with pytest.raises(InvalidState):
        DensityMatrix(sig, np.diag([1.1, -0.1]))


def test_partial_trace_of_product():
    a, b = coherent_state(0.7, 8), thermal_qubit(0.2)
    rho = product(a, b)
    assert np.allclose(partial_trace(rho, [0]).data, a.data)
    assert np.allclose(partial_trace(rho, [1]).data, b.data)


def test_partial_trace_embed_consistency():
    a, b = coherent_state(0.5j, 6), thermal_qubit(0.1)
    rho = product(a, b)
    sig = rho.signature
    A = annihilation(6) + creation(6)
    lhs = partial_trace_matrix((embed(A, 0, sig) @ rho).data, sig)
    assert np.allclose(lhs, A.data @ a.data)


def partial_trace_matrix(m, sig):
    ds, dq = sig.dims
    return np.einsum("iaja->ij", m.reshape(ds, dq, ds, dq))


def test_expectation_and_fidelity():
    vac = fock_state(5, 0)
    assert expectation(vac, number(5)) == 0
    rho = coherent_state(0.8 + 0.3j, 12)
    assert abs(expectation(rho, number(12)).imag) < 1e-10
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)
    assert fidelity(fock_state(5, 0), fock_state(5, 1)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(SignatureMismatch):
        fidelity(fock_state(5, 0), fock_state(6, 0))
