import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronos_cv.choi import (
    choi_spacetime_state,
    cv_phi_plus,
    jamiolkowski,
    jamiolkowski_direct,
    jamiolkowski_from_superoperator,
    jordan_state,
    partial_transpose,
)
from chronos_cv.errors import DimensionMismatchError, InvalidParameterError
from chronos_cv.fock import (
    FockState,
    apply_kraus,
    attenuation_kraus,
    coherent_ket,
    identity_kraus,
    reset_to_vacuum_kraus,
    rotation_kraus,
    superoperator,
    thermal_rho,
)
from chronos_cv.spacetime_wigner import SequentialConfig, r_to_wigner, sequential_t_correlation


def swap(d):
    S = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            S[i * d + j, j * d + i] = 1
    return S


def legs_trace(R, d, keep):
    t = R.reshape(d, d, d, d)
    return np.einsum("ijkj->ik", t) if keep == 0 else np.einsum("ijil->jl", t)


def test_phi_plus_is_rank_one_with_trace_dim():
    P = cv_phi_plus(4)
    assert np.trace(P).real == pytest.approx(4)
    assert np.linalg.matrix_rank(P) == 1


def test_identity_channel_gives_swap():
    d = 5
    E = jamiolkowski(identity_kraus(d), d)
    np.testing.assert_allclose(E.matrix, swap(d))
    np.testing.assert_allclose(partial_transpose(cv_phi_plus(d), d), swap(d))


def test_reset_channel_gives_identity_times_vacuum():
    d = 4
    E = jamiolkowski(reset_to_vacuum_kraus(d), d)
    vac = np.zeros((d, d))
    vac[0, 0] = 1
    np.testing.assert_allclose(E.matrix, np.kron(np.eye(d), vac), atol=1e-14)


@pytest.mark.parametrize(
    "kraus",
    [attenuation_kraus(0.4, 5), rotation_kraus(0.9, 5), reset_to_vacuum_kraus(5)],
    ids=["attenuation", "rotation", "reset"],
)
def test_superoperator_route_matches_direct_sum(kraus):
    np.testing.assert_allclose(jamiolkowski(kraus, 5).matrix, jamiolkowski_direct(kraus, 5), atol=1e-13)
    np.testing.assert_allclose(
        jamiolkowski_from_superoperator(superoperator(kraus), 5).matrix, jamiolkowski_direct(kraus, 5), atol=1e-13
    )


def test_displaced_basis_reduces_to_fock_basis_near_zero():
    d = 6
    a = jamiolkowski(attenuation_kraus(0.5, d), d, alpha=1e-9)
    b = jamiolkowski(attenuation_kraus(0.5, d), d)
    np.testing.assert_allclose(a.matrix, b.matrix, atol=1e-7)


def test_partial_transpose_involution_and_legs():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(9, 9))
    for leg in (0, 1):
        np.testing.assert_allclose(partial_transpose(partial_transpose(M, 3, leg), 3, leg), M)
    np.testing.assert_allclose(partial_transpose(partial_transpose(M, 3, 0), 3, 1), M.T)


def test_jordan_state_identity_channel_marginals():
    d = 6
    rho = thermal_rho(0.8, d)
    R = choi_spacetime_state(rho, identity_kraus(d))
    assert R.trace() == pytest.approx(1.0)
    np.testing.assert_allclose(legs_trace(R.matrix, d, 0), rho, atol=1e-12)
    np.testing.assert_allclose(legs_trace(R.matrix, d, 1), rho, atol=1e-12)
    # swap-like operator: timelike correlations give a negative eigenvalue
    assert R.min_eig() < 0


def test_maximally_mixed_input_returns_scaled_jamiolkowski():
    d = 5
    E = jamiolkowski(attenuation_kraus(0.3, d), d)
    R = jordan_state(np.eye(d) / d, E)
    np.testing.assert_allclose(R.matrix, E.matrix / d, atol=1e-14)


def test_jordan_state_dimension_check():
    with pytest.raises(DimensionMismatchError):
        jordan_state(np.eye(3) / 3, jamiolkowski(identity_kraus(4), 4))
    with pytest.raises(DimensionMismatchError):
        jamiolkowski(identity_kraus(4), 5)
    with pytest.raises(InvalidParameterError):
        cv_phi_plus(1)


@pytest.mark.parametrize("kraus_of", [lambda d: attenuation_kraus(0.5, d), lambda d: rotation_kraus(0.7, d)],
                         ids=["attenuation", "rotation"])
def test_choi_state_matches_sequential_correlations(kraus_of):
    d = 20
    rho = FockState(thermal_rho(1.0, d))
    ks = kraus_of(d)
    R = choi_spacetime_state(rho, ks)
    cfg = SequentialConfig(rho, (0, 0), (ks,))
    rng = np.random.default_rng(7)
    for _ in range(5):
        a, b = (complex(*rng.uniform(-1, 1, 2)) for _ in range(2))
        assert r_to_wigner(R, [a, b]) == pytest.approx(sequential_t_correlation(cfg, [a, b]), abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1), st.floats(0, 2 * np.pi), st.floats(0, 2))
def test_choi_state_marginals(eta, theta, nbar):
    d = 8
    ks = [rotation_kraus(theta, d)[0] @ K for K in attenuation_kraus(eta, d)]
    rho = thermal_rho(nbar, d)
    rho = rho / np.trace(rho)
    R = choi_spacetime_state(rho, ks)
    assert R.hermiticity_residual() < 1e-12
    np.testing.assert_allclose(legs_trace(R.matrix, d, 0), rho, atol=1e-12)
    np.testing.assert_allclose(legs_trace(R.matrix, d, 1), apply_kraus(rho, ks), atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
def test_choi_state_of_coherent_input_is_hermitian(ar, ai):
    d = 10
    v = coherent_ket(complex(ar, ai), d)
    R = choi_spacetime_state(np.outer(v, v.conj()), attenuation_kraus(0.5, d))
    assert R.hermiticity_residual() < 1e-12
    assert R.trace() == pytest.approx(np.linalg.norm(v) ** 2)
