import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronos_cv.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    InvalidStateError,
    SingularCovarianceError,
)
from chronos_cv.gaussian import (
    GaussianChannel,
    GaussianState,
    apply_channel,
    char_function,
    check_uncertainty,
    grid_integral,
    make_reference_state,
    partial_trace,
    partial_transpose,
    symplectic_form,
    tensor,
    tmss_cov,
    wigner,
)

SIGMA_VS = np.array([[1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1]], float)


def omts(r):
    return np.cosh(2 * r) * SIGMA_VS


def test_symplectic_form_two_modes():
    om = symplectic_form(2)
    assert om.shape == (4, 4)
    np.testing.assert_array_equal(om[:2, :2], [[0, 1], [-1, 0]])
    np.testing.assert_array_equal(om[2:, :2], 0)
    np.testing.assert_array_equal(om @ om, -np.eye(4))


@pytest.mark.parametrize(
    "kind,params,cov",
    [
        ("vacuum", (), np.eye(2)),
        ("thermal", (1.0,), 3 * np.eye(2)),
        ("thermal", (0.0,), np.eye(2)),
        ("coherent", (0.5, -0.25), np.eye(2)),
    ],
)
def test_reference_state_covariances(kind, params, cov):
    s = make_reference_state(kind, params)
    np.testing.assert_allclose(s.cov, cov)
    assert s.is_symmetric()


def test_coherent_mean_uses_sqrt2_quadratures():
    s = make_reference_state("coherent", (1.0, 2.0))
    np.testing.assert_allclose(s.mean, np.sqrt(2) * np.array([1.0, 2.0]))


def test_tmss_blocks():
    r = 0.7
    cov = tmss_cov(r)
    np.testing.assert_allclose(cov[:2, :2], np.cosh(2 * r) * np.eye(2))
    np.testing.assert_allclose(cov[:2, 2:], np.sinh(2 * r) * np.diag([1, -1]))


@pytest.mark.parametrize(
    "kind,params",
    [("thermal", ()), ("thermal", (-1.0,)), ("coherent", (1.0,)), ("squeezed", (0.1,)), ("tmss", ())],
)
def test_reference_state_rejects_bad_input(kind, params):
    with pytest.raises(InvalidParameterError):
        make_reference_state(kind, params)


def test_state_rejects_mismatched_shapes():
    with pytest.raises((DimensionMismatchError, InvalidStateError)):
        GaussianState(np.zeros(2), np.eye(4))


@pytest.mark.parametrize(
    "state",
    [
        make_reference_state("vacuum"),
        make_reference_state("thermal", (2.0,)),
        make_reference_state("coherent", (0.3, 0.1)),
        make_reference_state("tmss", (0.8,)),
    ],
    ids=["vacuum", "thermal", "coherent", "tmss"],
)
def test_physical_states_satisfy_uncertainty(state):
    res = check_uncertainty(state)
    assert res["physical"]
    assert res["min_eig"] >= -1e-9


@pytest.mark.parametrize("cov", [SIGMA_VS, omts(0.5), omts(1.0)], ids=["vs", "omts0.5", "omts1"])
def test_temporal_covariances_violate_uncertainty(cov):
    res = check_uncertainty(GaussianState(np.zeros(4), cov))
    assert res["min_eig"] < 0
    assert not res["physical"]


def test_uncertainty_rejects_asymmetric():
    cov = np.eye(2)
    cov[0, 1] = 0.3
    with pytest.raises(InvalidStateError):
        check_uncertainty(GaussianState(np.zeros(2), cov))


def test_vacuum_wigner_peak():
    assert wigner(make_reference_state("vacuum"), [0.0, 0.0]) == pytest.approx(1 / np.pi)


def test_char_function_of_vacuum():
    s = make_reference_state("vacuum")
    xi = np.array([0.6, -0.2])
    assert char_function(s, xi) == pytest.approx(np.exp(-0.25 * xi @ xi))


def test_char_function_at_origin_is_one_for_singular_cov():
    assert char_function(GaussianState(np.zeros(4), SIGMA_VS), np.zeros(4)) == pytest.approx(1.0)


def test_wigner_refuses_singular_and_names_null_direction():
    with pytest.raises(SingularCovarianceError) as exc:
        wigner(GaussianState(np.zeros(4), SIGMA_VS), np.zeros(4))
    null = exc.value.null_direction
    assert np.abs(SIGMA_VS @ null).max() < 1e-9


@pytest.mark.parametrize("nbar", [0.0, 0.5, 2.0])
def test_wigner_grid_normalization(nbar):
    s = make_reference_state("thermal", (nbar,))
    assert grid_integral(s, 6.0, 0.1) == pytest.approx(1.0, abs=1e-3)


def test_partial_trace_of_tmss_is_thermal():
    r = 0.5
    red = partial_trace(make_reference_state("tmss", (r,)), [1])
    np.testing.assert_allclose(red.cov, make_reference_state("thermal", (np.sinh(r) ** 2,)).cov, atol=1e-12)


def test_partial_trace_of_product_extracts_factor():
    th = make_reference_state("thermal", (1.5,))
    both = tensor(make_reference_state("vacuum"), th)
    np.testing.assert_allclose(partial_trace(both, [1]).cov, th.cov)


def test_partial_trace_rejects_bad_modes():
    with pytest.raises(InvalidParameterError):
        partial_trace(make_reference_state("vacuum"), [2])


def test_partial_transpose_flips_pp_block():
    r = 0.4
    pt = partial_transpose(make_reference_state("tmss", (r,)), [0])
    np.testing.assert_allclose(pt.cov[:2, 2:], np.sinh(2 * r) * np.eye(2))


@pytest.mark.parametrize("r", [1.0, 2.0, 3.0])
def test_partial_transpose_matches_temporal_thermal(r):
    pt = partial_transpose(make_reference_state("tmss", (r,)), [0])
    assert np.abs(pt.cov - omts(r)).max() == pytest.approx(np.exp(-2 * r), abs=1e-12)


@pytest.mark.parametrize("eta", [0.0, 0.3, 1.0])
def test_vacuum_is_attenuation_fixed_point(eta):
    out = apply_channel(make_reference_state("vacuum"), GaussianChannel.attenuation(eta))
    np.testing.assert_allclose(out.cov, np.eye(2), atol=1e-14)


def test_rotation_rotates_coherent_mean():
    th = 0.7
    s = make_reference_state("coherent", (1.0, 0.0))
    out = apply_channel(s, GaussianChannel.rotation(th))
    rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    np.testing.assert_allclose(out.mean, rot @ s.mean, atol=1e-14)


def test_channel_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        apply_channel(make_reference_state("tmss", (0.2,)), GaussianChannel.identity(1))


@pytest.mark.parametrize("eta", [-0.1, 1.5])
def test_attenuation_range(eta):
    with pytest.raises(InvalidParameterError):
        GaussianChannel.attenuation(eta)


def test_channels_completely_positive_and_compose():
    a, b = GaussianChannel.attenuation(0.6), GaussianChannel.rotation(0.4)
    assert a.is_completely_positive() and b.is_completely_positive()
    s = make_reference_state("thermal", (1.0,))
    two_step = apply_channel(apply_channel(s, a), b)
    one_step = apply_channel(s, a.compose(b))
    np.testing.assert_allclose(two_step.cov, one_step.cov, atol=1e-12)


finite = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=4, max_size=4), st.floats(0, 1))
def test_channel_keeps_states_physical(mean, eta):
    s = GaussianState(np.array(mean), tmss_cov(0.3))
    out = apply_channel(s, GaussianChannel.attenuation(eta, 2))
    assert check_uncertainty(out)["physical"]


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 2), st.sampled_from([[0], [1], [0, 1]]))
def test_partial_transpose_is_involution(r, modes):
    s = make_reference_state("tmss", (r,))
    back = partial_transpose(partial_transpose(s, modes), modes)
    np.testing.assert_array_equal(back.cov, s.cov)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 3), st.lists(finite, min_size=2, max_size=2))
def test_char_function_bounded_for_physical_states(nbar, xi):
    s = make_reference_state("thermal", (nbar,))
    assert abs(char_function(s, np.array(xi))) <= 1 + 1e-12


def test_to_json_roundtrip_fields():
    obj = make_reference_state("thermal", (1.0,)).to_json()
    assert "cov" in obj and "mean" in obj
