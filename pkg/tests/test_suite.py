import pytest

import suite
from data_loader import load_config
from errors import ConfigurationError
from suite import SPOT_CHECKS, get_suite_members, select_members
from verify import ScalarCheck

QUICK = ("green_residual", "wronskian", "birman_schwinger", "weyl")
SLOW = tuple(member["name"] for member in get_suite_members() if member["name"] not in QUICK)


def run_cell(name):
    (member,) = select_members([name])
    return member["run"](load_config(None), 0)


def stub_scan(*args, name="scan", **kwargs):
    return ScalarCheck(name, 0.0, 1.0)


def test_registry_names_are_unique():
    names = [member["name"] for member in get_suite_members()]
    assert len(names) == len(set(names)) == 18
    assert all(callable(member["run"]) and member["description"] for member in get_suite_members())


def test_select_members():
    assert len(select_members(["all"])) == 18
    assert [member["name"] for member in select_members(["weyl", "lap"])] == ["lap", "weyl"]
    with pytest.raises(ConfigurationError):
        select_members(["weyl", "no_such_cell"])


@pytest.mark.parametrize("name", QUICK)
def test_quick_cells_pass(name):
    reports = run_cell(name)
    assert reports
    failed = [report.summary_line() for report in reports if not report.passed]
    assert not failed


@pytest.mark.slow
@pytest.mark.parametrize("name", SLOW)
def test_verification_cells_pass(name):
    failed = [report.summary_line() for report in run_cell(name) if not report.passed]
    assert not failed


def test_low_frequency_cell_covers_every_claimed_pair(monkeypatch):
    monkeypatch.setattr(suite, "im_lowfreq_scan", stub_scan)
    names = [report.name for report in suite.im_lowfreq(load_config(None), 0)]
    expected = [
        f"{label}_n{n}_k{k}" for n, k in ((3, 0), (3, 1), (4, 0)) for label in ("im_lowfreq", "im_lowfreq_gaussian")
    ]
    assert names == expected


@pytest.mark.parametrize("refine", [True, False])
def test_refinement_reaches_the_perturbed_scans(tmp_path, monkeypatch, refine):
    monkeypatch.setattr(suite, "lap_scan", stub_scan)
    monkeypatch.setattr(suite, "im_lowfreq_scan", stub_scan)
    monkeypatch.setattr(suite, "refinement_delta", lambda make_scan, grid, name: ScalarCheck(name, 0.0, 1.0))
    path = tmp_path / "refine.conf"
    path.write_text(f"verify.refine={str(refine).lower()}\n", encoding="utf-8")
    config = load_config(str(path))
    names = {report.name for report in suite.lap(config, 0) + suite.im_lowfreq(config, 0)}
    refined = {"lap_refinement", "lap_gaussian_refinement", "im_lowfreq_gaussian_refinement"}
    assert (refined <= names) if refine else not any(name.endswith("_refinement") for name in names)


def test_derivative_cell_samples_twenty_points(monkeypatch):
    counts = []

    def spot_check(grid, nu, k, lam_range, potential, imaginary, count, seed, tol, name):
        counts.append(count)
        return ScalarCheck(name, 0.0, tol)

    monkeypatch.setattr(suite, "derivative_spot_check", spot_check)
    names = [report.name for report in suite.derivatives(load_config(None), 0)]
    assert names == ["derivative_im_k1", "derivative_res_k2", "derivative_perturbed_k1"]
    assert counts == [SPOT_CHECKS] * 3 == [20] * 3
