import threading

import numpy as np
import pytest

from check_versions import format_versions, installed_versions
from utils import composite_gauss, config_hash, default_jobs, gauss_legendre, loglog_fit, run_parallel


def test_composite_gauss_is_exact_for_polynomials():
    nodes, weights = composite_gauss([0.0, 0.5, 2.0, 3.0], 4)
    assert nodes.size == 12
    assert np.all(np.diff(nodes) > 0)
    assert np.sum(weights * nodes**7) == pytest.approx(3.0**8 / 8, rel=1e-13)


def test_gauss_legendre_is_read_only():
    nodes, _ = gauss_legendre(8)
    with pytest.raises(ValueError):
        nodes[0] = 0.0


def test_loglog_fit():
    x = np.geomspace(1.0, 1e3, 7)
    fit = loglog_fit(x, 5.0 * x**-1.5)
    assert fit.slope == pytest.approx(-1.5)
    assert fit.intercept == pytest.approx(np.log10(5.0))
    assert fit.residual < 1e-12
    assert fit.points == 7
    with pytest.raises(ValueError):
        loglog_fit([1.0, 2.0], [1.0, 2.0])


def test_config_hash():
    digest = config_hash('{"n": 3}')
    assert len(digest) == 16
    assert digest == config_hash('{"n": 3}')
    assert digest != config_hash('{"n": 2}')


def test_run_parallel_keeps_input_order():
    threads = set()

    def square(x):
        threads.add(threading.get_ident())
        return x * x

    assert run_parallel(square, range(20), jobs=4) == [x * x for x in range(20)]
    assert run_parallel(square, [], jobs=4) == []
    assert run_parallel(square, [3], jobs=1) == [9]


def test_default_jobs(monkeypatch):
    monkeypatch.delenv("CONE_JOBS", raising=False)
    assert default_jobs() == 1
    monkeypatch.setenv("CONE_JOBS", "3")
    assert default_jobs() == 3
    monkeypatch.setenv("CONE_JOBS", "0")
    assert default_jobs() == 1


def test_installed_versions():
    report = installed_versions({"numpy": "0.0", "surely-not-a-real-package": "1.0"})
    assert report["numpy"][0] is not None
    assert report["surely-not-a-real-package"] == (None, "1.0")
    text = format_versions(report)
    assert "surely-not-a-real-package: Not installed" in text
    assert "(expected 0.0)" in text
