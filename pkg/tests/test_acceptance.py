"""Acceptance gate: one PASS/FAIL line per criterion, printed in the summary.

The two full studies (B=1000 at n = 500..8000) take a few minutes; they are
run once per module and shared.
"""

import math

import numpy as np
import pytest

from subint.estimator import estimate, riesz_norm_growth, sandwich_covariance
from subint.functionals import (
    LinearOnChart,
    TransformOnChart,
    UpperContour,
    directional_derivative,
    evaluate,
)
from subint.montecarlo import (
    circle_h0,
    disk_h0,
    draw_sample,
    empirical_rate,
    get_dgp,
    run_study,
    split_seed,
)
from subint.quadrature import BandSpec, band_integral, box_chart, hausdorff_integral_chart, unit_circle
from subint.spline_sieve import Sample, TensorSplineBasis, fit_sieve

from .conftest import STUDY_SEED, record

N_LIST = [500, 1000, 2000, 4000, 8000]
TABLE1_RMSE = [0.435, 0.305, 0.218, 0.152, 0.110]
TABLE1_COVERAGE = [95.4, 94.4, 94.5, 95.4, 94.5]
TABLE2_RMSE = [0.0645, 0.0455, 0.0335, 0.0233, 0.0172]
TABLE2_COVERAGE = [95.9, 96.0, 94.7, 95.8, 95.2]
BOX = ((-2.0, -2.0), (2.0, 2.0))
B = 1000


@pytest.fixture(scope="module")
def circle_report():
    return run_study(get_dgp("circle"), N_LIST, B, STUDY_SEED, workers=1)


@pytest.fixture(scope="module")
def circle_report_parallel():
    return run_study(get_dgp("circle"), N_LIST, B, STUDY_SEED, workers=2)


@pytest.fixture(scope="module")
def disk_report():
    return run_study(get_dgp("disk"), N_LIST, B, STUDY_SEED, workers=1)


def _table_checks(report, rmse_ref, cov_ref, check_bias):
    ok, parts = True, []
    for row, r_ref, c_ref in zip(report.rows, rmse_ref, cov_ref):
        rmse_ok = abs(row.rmse / r_ref - 1) <= 0.15
        # per-mille integers: coverage is a count out of B=1000
        cov_ok = abs(round(row.coverage * 1000) - round(c_ref * 10)) <= 25
        bias_ok = abs(row.bias) <= 0.2 * row.sd if check_bias else True
        ok &= rmse_ok and cov_ok and bias_ok
        parts.append(
            f"n={row.n} rmse={row.rmse:.4g}({'ok' if rmse_ok else 'off'}) "
            f"cov={100 * row.coverage:.1f}%({'ok' if cov_ok else 'off'})"
            + (f" bias/sd={row.bias / row.sd:+.3f}({'ok' if bias_ok else 'off'})" if check_bias else "")
        )
    return ok, "; ".join(parts)


def test_criterion_1_table1(circle_report):
    ok, detail = _table_checks(circle_report, TABLE1_RMSE, TABLE1_COVERAGE, check_bias=True)
    assert record("1 circle study reproduction", ok, detail)


def test_criterion_2_table2(disk_report):
    ok, detail = _table_checks(disk_report, TABLE2_RMSE, TABLE2_COVERAGE, check_bias=False)
    assert record("2 disk study reproduction", ok, detail)


def test_criterion_3_rates(circle_report, disk_report):
    s1, s2 = empirical_rate(circle_report), empirical_rate(disk_report)
    ok = -0.60 <= s1 <= -0.40 and -0.60 <= s2 <= -0.38
    assert record("3 rate diagnostic", ok, f"circle slope {s1:.4f} in [-0.60,-0.40]; "
                  f"disk slope {s2:.4f} in [-0.60,-0.38]")


def test_criterion_4_norm_growth():
    sizes = (16, 36, 64, 100)
    circ = riesz_norm_growth(LinearOnChart(unit_circle()), sizes, *BOX).slope
    full = riesz_norm_growth(LinearOnChart(box_chart(*BOX)), sizes, *BOX).slope
    ok = 0.3 <= circ <= 0.7 and abs(full) <= 0.15
    assert record("4 Riesz norm growth", ok, f"circle slope {circ:.4f} in [0.3,0.7]; "
                  f"full-dimensional slope {full:+.2e} within 0.15 of 0")


def test_criterion_5_quadrature():
    ones = lambda x: np.ones(len(x))  # noqa: E731
    circ = hausdorff_integral_chart(unit_circle(), ones, 5000)
    truth = hausdorff_integral_chart(unit_circle(), circle_h0, 5000)
    band = band_integral(BandSpec(lambda x: 1 - np.sum(x**2, axis=1), 1e-3, *BOX, 100_000), ones)
    checks = [abs(circ - 2 * math.pi) < 1e-6, abs(truth - math.pi) < 1e-3,
              abs(band.value - math.pi) < 0.02]
    detail = (f"circumference err {circ - 2 * math.pi:+.1e}; circle functional err "
              f"{truth - math.pi:+.1e}; annulus band {band.value:.4f} ({band.count} nodes) err "
              f"{band.value - math.pi:+.4f} vs 0.02")
    assert record("5 quadrature exactness", all(checks), detail)


def _directions(seed=0, count=20):
    coefs = np.random.default_rng(seed).normal(size=(count, 4))

    def make(a):
        return lambda x: a[0] + a[1] * x[:, 0] + a[2] * x[:, 1] + a[3] * np.sin(x[:, 0] * x[:, 1])

    return [make(a) for a in coefs]


def _fd_errors(spec, h, delta):
    errs = []
    for v in _directions():
        fd = (evaluate(spec, lambda x: h(x) + delta * v(x))
              - evaluate(spec, lambda x: h(x) - delta * v(x))) / (2 * delta)
        errs.append(abs(fd - directional_derivative(spec, h, v)))
    return max(errs)


def test_criterion_6_derivative_oracle():
    circle = unit_circle()
    linear = _fd_errors(LinearOnChart(circle), circle_h0, 1e-4)
    transform = _fd_errors(
        TransformOnChart(circle, lambda t, x: np.sin(t) + t**2, lambda t, x: np.cos(t) + 2 * t),
        circle_h0, 1e-4,
    )
    contour = _fd_errors(UpperContour(*BOX, epsilon=1e-3, num_points=100_000,
                                      band_points=100_000), disk_h0, 1e-3)
    ok = linear < 1e-3 and transform < 1e-3 and contour < 0.05
    assert record("6 derivative oracle", ok, f"max error linear {linear:.1e}, transform "
                  f"{transform:.1e} (tol 1e-3); upper contour {contour:.3f} (tol 0.05)")


def _suite_fits():
    fits = []
    for name in ("circle", "disk"):
        dgp = get_dgp(name)
        for n in N_LIST:
            for b in range(3):
                fits.append(fit_sieve(draw_sample(dgp, n, split_seed(STUDY_SEED, n, b)), dgp.basis()))
    rng = np.random.default_rng(1)
    x = rng.uniform(-2, 2, size=(20, 2))
    fits.append(fit_sieve(Sample(x, rng.normal(size=20), *BOX), TensorSplineBasis.for_total_count(36, *BOX)))
    return fits


def test_criterion_7_statistical_sanity():
    def poly(x):
        return 0.5 + x[:, 0] ** 2 - 0.25 * x[:, 0] * x[:, 1] ** 3

    x = np.random.default_rng(2).uniform(-2, 2, size=(2000, 2))
    fit = fit_sieve(Sample(x, poly(x), *BOX), TensorSplineBasis.for_total_count(36, *BOX))
    spec = LinearOnChart(unit_circle())
    res = estimate(spec, fit)
    theta0 = evaluate(spec, poly)
    noiseless_ok = abs(res.theta_hat - theta0) < 1e-6 and res.std_error < 1e-8
    worst_asym, worst_eig = 0.0, 0.0
    psd_ok = True
    for f in _suite_fits() + [fit]:
        cov = sandwich_covariance(f)
        scale = max(1.0, np.max(np.abs(cov)))
        eig = np.linalg.eigvalsh(cov)
        asym = np.max(np.abs(cov - cov.T)) / scale
        rel = eig.min() / max(eig.max(), 1e-300)
        worst_asym, worst_eig = max(worst_asym, asym), min(worst_eig, rel)
        psd_ok &= asym <= 1e-10 and eig.min() >= -1e-8 * max(eig.max(), 0.0)
    assert record("7 statistical sanity", noiseless_ok and psd_ok,
                  f"noiseless err {abs(res.theta_hat - theta0):.1e}, SE {res.std_error:.1e}; "
                  f"sandwich asymmetry {worst_asym:.1e}, min eig/max {worst_eig:+.1e}")


def test_criterion_8_determinism(circle_report, circle_report_parallel, tmp_path):
    a, b = tmp_path / "w1.csv", tmp_path / "w2.csv"
    circle_report.to_csv(a)
    circle_report_parallel.to_csv(b)
    same_csv = a.read_bytes() == b.read_bytes()
    same_raw = all(np.array_equal(circle_report.replications[n], circle_report_parallel.replications[n])
                   for n in N_LIST)
    assert record("8 determinism across worker counts", same_csv and same_raw,
                  f"CSV bytes equal: {same_csv}; raw replication arrays equal: {same_raw}")


def test_rmse_decreasing(circle_report, disk_report):
    for rep in (circle_report, disk_report):
        rmse = [r.rmse for r in rep.rows]
        assert all(b < 1.05 * a for a, b in zip(rmse, rmse[1:]))


def test_coverage_at_n1000(circle_report):
    row = circle_report.rows[N_LIST.index(1000)]
    assert 0.92 <= row.coverage <= 0.97
