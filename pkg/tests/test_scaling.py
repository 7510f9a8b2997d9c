import math

import numpy as np
import pytest

from qrg_fidelity import itf, scaling as sc
from qrg_fidelity.errors import (DomainError, InsufficientPointsError, NonPositiveTransformError,
                                 RegimeNotSpannedError)


@pytest.fixture(scope="module", params=[-1, 1], ids=["ferro", "para"])
def side(request):
    return request.param


@pytest.fixture(scope="module")
def delta_scan(side):
    return {k: sc.sweep_fidelity(sc.delta_scan_grid(k, side=side)) for k in range(5)}


@pytest.fixture(scope="module")
def size_scan(side):
    return {k: sc.sweep_fidelity(sc.size_scan_grid(k, side=side)) for k in range(5)}


def crossover_of(rows, kind="curve"):
    rows = [r for r in rows if r.error is None]
    return sc.detect_crossover([r.n_delta for r in rows], [-r.log_f for r in rows], kind)


class TestRegimes:
    @pytest.mark.parametrize("nd, tag", [(0.01, "small_size"), (0.3, "small_size"),
                                         (0.31, "crossover"), (2.99, "crossover"),
                                         (3.0, "large_size"), (1e4, "large_size")])
    def test_tags(self, nd, tag):
        assert sc.regime_of(nd) == tag
        assert sc.in_regime(nd, tag) and sc.in_regime(nd, None)

    def test_geometric_grid(self):
        g = sc.geometric_grid(1e-8, 1e-3)
        assert len(g) == 101
        assert g[0] == pytest.approx(1e-8) and g[-1] == pytest.approx(1e-3)
        assert np.allclose(np.diff(np.log10(g)), 0.05)


class TestFitLoglog:
    xs = np.geomspace(0.1, 100, 12)

    def test_square(self):
        fit = sc.fit_loglog(self.xs, self.xs ** 2)
        assert abs(fit.slope - 2) <= 1e-10 and fit.residual == pytest.approx(1.0)

    def test_linear(self):
        fit = sc.fit_loglog(self.xs, 3.7 * self.xs)
        assert abs(fit.slope - 1) <= 1e-10
        assert fit.intercept == pytest.approx(math.log(3.7), abs=1e-10)

    def test_refit_predicted_line(self):
        noisy = self.xs ** 1.3 * (1 + 0.1 * np.sin(self.xs))
        fit = sc.fit_loglog(self.xs, noisy)
        refit = sc.fit_loglog(self.xs, [fit.predict(x) for x in self.xs])
        assert abs(refit.slope - fit.slope) <= 1e-12
        assert abs(refit.intercept - fit.intercept) <= 1e-12

    def test_window(self):
        fit = sc.fit_loglog(self.xs, self.xs ** 2, window=(1, 50))
        assert fit.window[0] >= 1 and fit.window[1] <= 50
        assert fit.n_points == int(np.sum((self.xs >= 1) & (self.xs <= 50)))

    def test_stderr(self):
        assert sc.fit_loglog(self.xs, self.xs ** 2).stderr <= 1e-12
        rough = sc.fit_loglog(self.xs, self.xs ** 2 * (1 + 0.2 * (-1) ** np.arange(12)))
        assert rough.stderr > 0

    def test_insufficient(self):
        with pytest.raises(InsufficientPointsError):
            sc.fit_loglog([1, 2, 3], [1, 4, 9])
        with pytest.raises(InsufficientPointsError):
            sc.fit_loglog(self.xs, self.xs, window=(1000, 2000))

    def test_nonpositive(self):
        with pytest.raises(NonPositiveTransformError):
            sc.fit_loglog([1, 2, 3, 4], [1, 0, 2, 3])

    def test_refuses_unit_fidelity(self):
        with pytest.raises(NonPositiveTransformError):
            sc.neg_log_fidelity([-1e-3, 0.0])
        with pytest.raises(NonPositiveTransformError):
            sc.neg_log_fidelity([-1e-17])
        assert sc.neg_log_fidelity([-1e-3]).tolist() == [1e-3]


class TestCrossover:
    x = np.geomspace(0.01, 100, 41)

    def test_synthetic_break(self):
        y = np.where(self.x < 1, self.x ** 2, self.x)
        est = sc.detect_crossover(self.x, y)
        assert abs(est.n_delta - 1) <= 0.05
        assert est.slope_left == pytest.approx(2, abs=1e-6)
        assert est.slope_right == pytest.approx(1, abs=1e-6)
        assert est.within_bounds

    def test_synthetic_break_off_grid(self):
        b = 1.7
        y = np.where(self.x < b, self.x ** 2 / b, self.x)
        assert abs(sc.detect_crossover(self.x, y).n_delta / b - 1) <= 0.05

    def test_slope_series(self):
        slopes = np.where(self.x < 1, 2.0, 1.0)
        est = sc.detect_crossover(self.x, slopes, kind="slope")
        assert est.slope_left == 2.0 and est.slope_right == 1.0
        step = self.x[1] / self.x[0]
        assert 1 / step <= est.n_delta <= step

    def test_not_spanned(self):
        with pytest.raises(RegimeNotSpannedError):
            sc.detect_crossover(self.x[self.x > 1], self.x[self.x > 1])
        with pytest.raises(RegimeNotSpannedError):
            sc.detect_crossover(self.x[self.x < 1], self.x[self.x < 1])

    def test_kind(self):
        with pytest.raises(ValueError):
            sc.detect_crossover(self.x, self.x, kind="spline")


class TestNu:
    sizes = [2 ** e for e in range(5, 15)]

    def test_quadratic(self):
        est = sc.extract_nu(self.sizes, [n ** 2 for n in self.sizes])
        assert est.nu == pytest.approx(1.0, abs=1e-12)

    def test_quartic(self):
        est = sc.extract_nu(self.sizes, [n ** 4 for n in self.sizes])
        assert est.nu == pytest.approx(0.5, abs=1e-12)

    def test_dimension(self):
        est = sc.extract_nu(self.sizes, [n ** 2 for n in self.sizes], dimension=2)
        assert est.nu == pytest.approx(0.5, abs=1e-12)

    def test_span(self):
        with pytest.raises(InsufficientPointsError):
            sc.extract_nu([10, 20, 40, 80, 160], [1, 2, 3, 4, 5])
        with pytest.raises(InsufficientPointsError):
            sc.extract_nu([10, 1000, 10000, 100000], [1, 2, 3, 4])

    def test_itf_chain(self):
        est = sc.extract_nu(*zip(*sc.itf_chi_series(range(4, 14))))
        assert est.nu == pytest.approx(1.0, abs=0.02)
        assert est.stderr < 0.02


class TestAnomaly:
    def test_outlier(self):
        fits = {k: sc.fit_loglog([1, 2, 3, 4], [1, 2 ** s, 3 ** s, 4 ** s])
                for k, s in enumerate([1.2, 1.0, 1.01, 0.99, 1.0])}
        assert sc.flag_anomalous(fits) == {0}

    def test_needs_three(self):
        fit = sc.fit_loglog([1, 2, 3, 4], [1, 2, 3, 4])
        with pytest.raises(InsufficientPointsError):
            sc.flag_anomalous({0: fit, 1: fit})


class TestSweep:
    def test_row_order(self):
        grid = sc.SweepGrid("itf", [1.2, 0.8], [1e-3, 1e-2], [8, 4])
        rows = sc.sweep_fidelity(grid, threads=1)
        assert [(r.coupling, r.delta, r.n_sites) for r in rows] == grid.points()
        assert rows[0].coupling == 1.2 and rows[0].n_sites == 8

    def test_thread_independent(self, monkeypatch):
        grid = sc.SweepGrid("xxz", np.linspace(-0.9, 0.9, 13), [1e-3, 1e-2], [30, 300])
        serial = sc.sweep_fidelity(grid, threads=1)
        assert sc.sweep_fidelity(grid, threads=7) == serial
        monkeypatch.setenv(sc.THREADS_ENV, "3")
        assert sc.thread_count() == 3
        assert sc.sweep_fidelity(grid) == serial

    def test_thread_env_validated(self, monkeypatch):
        monkeypatch.setenv(sc.THREADS_ENV, "0")
        with pytest.raises(ValueError):
            sc.thread_count()
        monkeypatch.delenv(sc.THREADS_ENV)
        assert sc.thread_count() is None

    def test_error_rows(self):
        rows = sc.sweep_fidelity(sc.SweepGrid("itf", [0.0, 0.5], [1e-3], [8]))
        assert rows[0].error and rows[0].f is None
        assert rows[1].error is None and 0 < rows[1].f < 1
        rows = sc.sweep_fidelity(sc.SweepGrid("xxz", [-0.5, 0.995], [0.01], [10]))
        assert rows[0].error is None
        assert rows[1].error and rows[1].log_f is None

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            sc.SweepGrid("itf", [1.0], [1e-3], [12])
        with pytest.raises(ValueError):
            sc.SweepGrid("potts", [1.0], [1e-3], [8])
        with pytest.raises(ValueError):
            sc.SweepGrid("itf", [1.0], [1e-3], [8], k=-1)
        assert sc.SweepGrid("itf", [], [1e-3], [8]).is_empty

    def test_offset_pairs(self):
        assert sc.SweepGrid("itf", [1], [0.1], [4], k=2).pair(1.0, 0.1) == pytest.approx((0.7, 0.8))
        assert sc.SweepGrid("itf", [1], [0.1], [4], k=2, side=1).pair(1.0, 0.1) == pytest.approx((1.2, 1.3))
        assert sc.SweepGrid("itf", [1], [0.1], [4]).pair(1.0, 0.1) is None

    def test_offset_rows_use_pair(self):
        row = sc.sweep_fidelity(sc.SweepGrid("itf", [1.0], [0.01], [64], k=3))[0]
        assert row.log_f == pytest.approx(itf.itf_pair_fidelity(0.96, 0.97, 5).log_f, rel=1e-12)

    def test_small_size_minimum_at_critical(self):
        rows = sc.sweep_fidelity(sc.field_scan_grids()["small_size"])
        best = min(rows, key=lambda r: r.f)
        assert abs(best.coupling - 1.0) <= 0.005

    def test_large_size_window(self):
        rows = sc.sweep_fidelity(sc.field_scan_grids()["large_size"])
        low = [r.coupling for r in rows if r.f < 1e-3]
        assert low and min(low) < 1 < max(low)
        assert max(low) - min(low) <= 3 * 1e-2
        far = [r.f for r in rows if abs(r.coupling - 1) >= 0.08]
        assert min(far) > 0.01

    def test_xxz_unit_fidelity_at_zero_delta(self):
        rows = sc.sweep_fidelity(sc.SweepGrid("xxz", sc.XXZ_CHI_ANISOTROPIES, [0.0], [10, 1000]))
        assert all(r.f == 1.0 for r in rows)


class TestFigures:
    def test_delta_scan_slopes(self, delta_scan, side):
        fam = sc.analyze_family(delta_scan, "delta")
        for k in range(1, 5):
            assert fam.slope(k, "small_size") == pytest.approx(2.0, abs=0.1)
            assert fam.slope(k, "large_size") == pytest.approx(1.0, abs=0.1)
        assert fam.anomalous == {0}

    def test_size_scan_slopes(self, size_scan, side):
        fam = sc.analyze_family(size_scan, "N")
        for k in range(1, 5):
            assert fam.slope(k, "small_size") == pytest.approx(2.05, abs=0.1)
            assert fam.slope(k, "large_size") == pytest.approx(1.0, abs=0.1)

    def test_crossover_tags(self, delta_scan, size_scan):
        for k, rows in [*delta_scan.items(), *size_scan.items()]:
            nds = sorted(r.n_delta for r in rows)
            step = nds[1] / nds[0]
            est = crossover_of(rows)
            assert est.within_bounds
            # the break sits inside the band tagged "crossover", up to one grid step
            assert sc.SMALL_SIZE_MAX / step <= est.n_delta <= sc.LARGE_SIZE_MIN * step, (k, est)

    def test_local_slope_crossover(self, size_scan):
        rows = size_scan[1]
        slopes = sc.local_slopes([r.n_sites for r in rows], [-r.log_f for r in rows])
        nd = [x * 1e-3 for x, _ in slopes]
        est = sc.detect_crossover(nd, [s for _, s in slopes], kind="slope")
        assert est.within_bounds
        assert est.slope_left > 1.5 and est.slope_right == pytest.approx(1.0, abs=0.1)

    def test_local_slopes_window(self):
        with pytest.raises(ValueError):
            sc.local_slopes([1, 2, 3, 4], [1, 2, 3, 4], window=4)
        assert [s for _, s in sc.local_slopes([1, 2, 4, 8, 16], [1, 4, 16, 64, 256], 3)] == \
            pytest.approx([2, 2, 2])

    def test_deterministic(self):
        grid = sc.delta_scan_grid(2)
        assert sc.sweep_fidelity(grid, threads=1) == sc.sweep_fidelity(grid, threads=4)
