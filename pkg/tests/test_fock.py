import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronos_cv.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    InvalidStateError,
    NotTracePreservingError,
    UnsupportedStateError,
)
from chronos_cv.fock import (
    FockState,
    apply_kraus,
    attenuation_kraus,
    coherent_ket,
    displacement,
    displacement_elements,
    gaussian_to_fock,
    hermite_functions,
    identity_kraus,
    kraus_completeness,
    kraus_from_gaussian,
    ladder,
    number,
    parity,
    parity_projectors,
    pointer_kraus,
    quadratures,
    reset_to_vacuum_kraus,
    rotation_kraus,
    sequential_quadrature_moment,
    superoperator,
    t_operator,
    t_operators,
    thermal_rho,
    tmss_ket,
)
from chronos_cv.gaussian import GaussianChannel, GaussianState, make_reference_state, tmss_cov

small = st.floats(-1, 1, allow_nan=False)


def test_ladder_elements():
    a = ladder(5)
    assert a[2, 3] == pytest.approx(np.sqrt(3))
    with pytest.raises(InvalidParameterError):
        ladder(1)


def test_commutator_on_low_block():
    q, p = quadratures(30)
    c = q @ p - p @ q
    np.testing.assert_allclose(c[:29, :29], 1j * np.eye(29), atol=1e-12)


def test_number_and_parity():
    n = number(6)
    np.testing.assert_allclose(np.diag(parity(6)).real, (-1.0) ** np.diag(n).real)


def test_vacuum_quadrature_variance():
    q, _ = quadratures(10)
    assert q[:, 0] @ q[:, 0] == pytest.approx(0.5)


@pytest.mark.parametrize("xi", [0.3, 0.5 + 0.5j, -1j])
def test_displacement_expm_matches_exact_elements(xi):
    D = displacement(xi, 60)
    np.testing.assert_allclose(D[:20, :20], displacement_elements(xi, 60)[:20, :20], atol=1e-10)


def test_displacement_warns_on_large_argument():
    with pytest.warns(RuntimeWarning):
        displacement(3.0, 10)


def test_coherent_state_is_eigenvector_of_a():
    al = 0.7 - 0.2j
    v = coherent_ket(al, 40)
    np.testing.assert_allclose(ladder(40) @ v, al * v, atol=1e-8)


@pytest.mark.parametrize("nbar", [0.0, 0.5, 2.0])
def test_thermal_mean_number(nbar):
    rho = thermal_rho(nbar, 80)
    assert np.trace(rho @ number(80)).real == pytest.approx(nbar, abs=1e-8)


def test_tmss_reduced_state_is_thermal():
    r, d = 0.5, 30
    v = tmss_ket(r, d).reshape(d, d)
    red = v @ v.conj().T
    np.testing.assert_allclose(red, thermal_rho(np.sinh(r) ** 2, d), atol=1e-10)


@pytest.mark.parametrize("alpha", [0.0, 0.4, 0.3 - 0.6j])
def test_t_squared_is_four(alpha):
    T = t_operator(alpha, 60)
    np.testing.assert_allclose(T @ T, 4 * np.eye(60), atol=1e-10)


def test_t_operator_methods_agree_on_safe_block():
    a = 0.5 + 0.3j
    np.testing.assert_allclose(
        t_operator(a, 60, "expm")[:30, :30], t_operator(a, 60, "exact")[:30, :30], atol=1e-8
    )
    with pytest.raises(InvalidParameterError):
        t_operator(a, 10, "series")


def test_t_operator_stack_matches_single():
    al = np.array([0.1, -0.4 + 0.2j, 0.9j])
    stack = t_operators(al, 20)
    for k, a in enumerate(al):
        np.testing.assert_allclose(stack[k], t_operator(a, 20, "exact"), atol=1e-12)


@pytest.mark.parametrize("alpha", [0.0, 0.5, -0.2 + 0.7j])
def test_vacuum_t_expectation_is_wigner(alpha):
    # Tr[T(alpha) |0><0|] = 2 exp(-2|alpha|^2)
    T = t_operator(alpha, 40)
    assert T[0, 0].real == pytest.approx(2 * np.exp(-2 * abs(alpha) ** 2), abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(small, small, small, small)
def test_t_product_identity(ar, ai, br, bi):
    a, b = complex(ar, ai) / np.sqrt(2), complex(br, bi) / np.sqrt(2)
    lhs = (t_operator(a, 60) @ t_operator(b, 60))[:16, :16]
    phase = np.exp(2 * (np.conj(a) * b - a * np.conj(b)))
    rhs = 4 * phase * displacement_elements(2 * a - 2 * b, 60)[:16, :16]
    np.testing.assert_allclose(lhs, rhs, atol=1e-6)


def test_parity_projectors_complete():
    P, M = parity_projectors(0.3, 30)
    np.testing.assert_allclose(P + M, np.eye(30), atol=1e-12)
    np.testing.assert_allclose(P @ P, P, atol=1e-10)


def test_hermite_functions_orthonormal():
    x = np.linspace(-12, 12, 4001)
    h = hermite_functions(10, x)
    gram = h @ h.T * (x[1] - x[0])
    np.testing.assert_allclose(gram, np.eye(10), atol=1e-10)


@pytest.mark.parametrize(
    "kraus",
    [identity_kraus(12), attenuation_kraus(0.3, 12), rotation_kraus(1.1, 12), reset_to_vacuum_kraus(12)],
    ids=["identity", "attenuation", "rotation", "reset"],
)
def test_channels_are_trace_preserving(kraus):
    assert kraus_completeness(kraus) < 1e-12


def test_attenuation_on_coherent_state():
    al, eta, d = 0.8, 0.36, 40
    out = apply_kraus(FockState(coherent_ket(al, d)), attenuation_kraus(eta, d))
    want = coherent_ket(np.sqrt(eta) * al, d)
    np.testing.assert_allclose(out.rho, np.outer(want, want.conj()), atol=1e-10)


def test_reset_gives_vacuum():
    out = apply_kraus(thermal_rho(1.0, 10), reset_to_vacuum_kraus(10))
    assert out[0, 0].real == pytest.approx(1.0)


def test_superoperator_matches_kraus_sum():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    ks = attenuation_kraus(0.4, 6)
    np.testing.assert_allclose((superoperator(ks) @ X.reshape(-1)).reshape(6, 6), apply_kraus(X, ks), atol=1e-12)


def test_apply_kraus_errors():
    with pytest.raises(NotTracePreservingError):
        apply_kraus(thermal_rho(1.0, 4), [0.5 * np.eye(4)])
    with pytest.raises(DimensionMismatchError):
        apply_kraus(thermal_rho(1.0, 4), identity_kraus(5))
    with pytest.raises(InvalidParameterError):
        apply_kraus(thermal_rho(1.0, 4), [])
    sub = apply_kraus(FockState(thermal_rho(1.0, 4)), [0.5 * np.eye(4)], subnormalized=True)
    assert np.trace(sub.rho).real == pytest.approx(0.25)


@pytest.mark.parametrize(
    "rho",
    [np.array([[1.0, 0.2], [0.0, 0.0]]), np.diag([0.7, 0.7]), np.diag([1.5, -0.5]), np.ones((2, 3))],
    ids=["nonhermitian", "trace", "negative", "shape"],
)
def test_fock_state_validation(rho):
    with pytest.raises((InvalidStateError, DimensionMismatchError)):
        FockState(rho)


def test_gaussian_to_fock_reproduces_covariance():
    d = 40
    q, p = quadratures(d)
    for g in (make_reference_state("thermal", (0.7,)), make_reference_state("coherent", (0.4, -0.3))):
        rho = gaussian_to_fock(g, d).rho
        mq = np.trace(rho @ q).real
        var = np.trace(rho @ q @ q).real - mq**2
        assert mq == pytest.approx(g.mean[0], abs=1e-8)
        assert 2 * var == pytest.approx(g.cov[0, 0], abs=1e-8)


def test_gaussian_to_fock_recognizes_unlabeled_states():
    assert gaussian_to_fock(GaussianState(np.zeros(4), tmss_cov(0.3)), 20).n_modes == 2
    with pytest.raises(UnsupportedStateError):
        gaussian_to_fock(GaussianState(np.zeros(2), np.diag([2.0, 0.5])), 10)


def test_kraus_from_gaussian():
    assert len(kraus_from_gaussian(GaussianChannel.attenuation(0.5), 8)) == 8
    with pytest.raises(UnsupportedStateError):
        kraus_from_gaussian(GaussianChannel.identity(2), 8)


def test_pointer_kraus_effects_integrate_to_identity():
    d, eps = 12, 0.3
    q, _ = quadratures(d)
    vs = np.arange(-12, 12, 0.02)
    S = sum(pointer_kraus(q, v, eps).conj().T @ pointer_kraus(q, v, eps) for v in vs) * 0.02
    np.testing.assert_allclose(S, np.eye(d), atol=1e-8)


@pytest.mark.parametrize("r", [0.3, 0.5, 1.0])
def test_sequential_oracle_on_thermal(r):
    rho = FockState(thermal_rho(np.sinh(r) ** 2, 40))
    got = sequential_quadrature_moment(rho, [identity_kraus(40)], (0.0, 0.0), eps=0.05, step=0.05)
    assert got == pytest.approx(0.5 * np.cosh(2 * r), rel=0.02)
