import numpy as np
import pytest

from chronos_cv import config as C
from chronos_cv import report
from chronos_cv.gaussian import GaussianChannel, make_reference_state
from chronos_cv.temporal import EventSchedule, SpacetimeGaussian, analytic_spacetime_gaussian, build_spacetime_gaussian


def vacuum_schedule():
    return EventSchedule(make_reference_state("vacuum"), [(0, 0), (1, 0)], [GaussianChannel.identity()])


def test_empty_table_keys():
    table = report.empty_table()
    assert list(table) == [f"Criterion {k}" for k in range(1, 7)] + [f"Property {k}" for k in range(1, 6)]
    assert {v["status"] for v in table.values()} == {"not_evaluated"}


def test_vacuum_gaussian_criteria_pass():
    sched = vacuum_schedule()
    table = report.gaussian_criteria(build_spacetime_gaussian(sched), sched)
    for k in (1, 2, 3, 4, 5, 6):
        assert table[f"Criterion {k}"]["status"] == "pass", table[f"Criterion {k}"]
    assert table["Criterion 5"]["note"]


def test_tampered_sigma_fails_criterion_1_with_named_entry():
    sched = vacuum_schedule()
    st = analytic_spacetime_gaussian(sched)
    cov = st.cov.copy()
    cov[0, 3] += 0.1
    table = report.gaussian_criteria(SpacetimeGaussian(st.mean, cov, sched), sched)
    entry = table["Criterion 1"]
    assert entry["status"] == "fail"
    assert "sigma[0,3]" in entry["checks"][0]["detail"] or "sigma[3,0]" in entry["checks"][0]["detail"]
    assert table["Criterion 2"]["status"] == "fail"


def test_symmetry_check_passes_symmetric():
    c = report.symmetry_check(np.eye(3))
    assert c.passed and c.detail == ""


@pytest.mark.parametrize("theta", [0.0, 0.9])
def test_heisenberg_check_for_thermal(theta):
    checks = report.heisenberg_checks(make_reference_state("thermal", (0.5,)), 30, 1e-3, angles=[theta])
    assert checks[0].passed


def test_classical_limit_scaling():
    checks = report.classical_limit_checks(vacuum_schedule())
    assert all(c.passed for c in checks)


def test_spacelike_product_properties_pass():
    run = C.PropertiesRun(
        initial={"kind": "product", "factors": [{"kind": "thermal", "params": [0.5]}, {"kind": "coherent", "params": [0.3, 0.2]}]},
        dim=20, modes=[0, 1], channels=[{"kind": "none"}],
    )
    table, _ = report.field_report(run, 0)
    for k in range(1, 6):
        assert table[f"Property {k}"]["status"] == "pass", table[f"Property {k}"]
    assert report.summarize(table)["Criterion 5"] == "not_evaluated"


def test_trajectory_and_tomo_reports():
    cfg = C.RunConfig.model_validate({"subcommand": "trajectory", "trajectory": {}})
    table, _ = report.report_properties(cfg)
    assert table["Criterion 2"]["status"] == "pass"
    assert table["Criterion 5"]["status"] == "pass"
    cfg = C.RunConfig.model_validate(
        {"subcommand": "tomo", "tomo": {"schedule": {"initial": {"kind": "vacuum"}, "events": [{"t": 0}, {"t": 1}],
                                                     "channels": [{"kind": "identity"}]}, "M": 5000}}
    )
    table, _ = report.report_properties(cfg)
    assert table["Criterion 1"]["status"] == "pass"
    assert table["Criterion 4"]["status"] == "pass"
