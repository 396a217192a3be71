import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from servorig import anova, fdr, reference
from servorig.errors import InsufficientDataError, SingularMatrixError
from servorig.testbed import CampaignLog, WearModel, run_campaign

HELMERT = np.array([[1, -1, 0], [1, 1, -2]]) / np.array([[math.sqrt(2)], [math.sqrt(6)]])


def whitened(n, p, seed):
    """n x p data with zero column means and identity sample covariance."""
    z = np.random.default_rng(seed).standard_normal((n, p))
    z -= z.mean(axis=0)
    l = np.linalg.cholesky(np.cov(z, rowvar=False))
    return z @ np.linalg.inv(l).T


def manova_oracle(y):
    """Eigenvalue form of the four multivariate statistics (Helmert contrasts)."""
    n = len(y)
    d = y @ HELMERT.T
    dbar = d.mean(axis=0)
    h = n * np.outer(dbar, dbar)
    e = (n - 1) * np.cov(d, rowvar=False)
    lam = np.linalg.eigvals(np.linalg.solve(e, h)).real
    return dict(pillai=np.sum(lam / (1 + lam)), wilks=np.prod(1 / (1 + lam)),
                hotelling=lam.sum(), roy=lam.max())


matrices = arrays(np.float64, st.tuples(st.integers(6, 20), st.just(3)),
                  elements=st.floats(-100, 100, allow_nan=False, width=64))


class TestWithinSubjects:
    def test_small_example(self):
        r = anova.within_subjects([[0, 1], [1, 2], [2, 4]])
        assert r.ss_effect == pytest.approx(8 / 3)
        assert r.ss_error == pytest.approx(1 / 3)
        assert r.row("Sphericity Assumed").F == pytest.approx(16)

    def test_constant(self):
        r = anova.within_subjects(np.full((5, 3), 7.0))
        row = r.row("Sphericity Assumed")
        assert r.ss_effect == 0 and row.F == 0 and row.p == 1
        assert r.degenerate

    def test_perfectly_additive(self):
        y = np.add.outer(np.arange(6.0), [0.0, 1.0, 3.0])
        r = anova.within_subjects(y)
        assert r.degenerate and r.ss_error == 0
        assert r.row("Greenhouse-Geisser").F == math.inf
        assert r.row("Greenhouse-Geisser").p == 0

    def test_too_small(self):
        with pytest.raises(InsufficientDataError):
            anova.within_subjects([[1, 2, 3]])

    def test_paired_t_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            y = rng.normal(size=(10, 2)) * rng.uniform(0.1, 10) + rng.normal(size=2)
            t = stats.ttest_rel(y[:, 0], y[:, 1]).statistic
            r = anova.within_subjects(y)
            assert r.row("Sphericity Assumed").F == pytest.approx(t * t, rel=1e-9)
            assert r.row("Sphericity Assumed").p == pytest.approx(
                stats.ttest_rel(y[:, 0], y[:, 1]).pvalue, rel=1e-8)

    @settings(max_examples=60, deadline=None)
    @given(matrices)
    def test_decomposition_and_corrections(self, y):
        assume(np.ptp(y) > 1e-3)
        r = anova.within_subjects(y)
        assert r.ss_effect + r.ss_subjects + r.ss_error == pytest.approx(r.ss_total, rel=1e-9, abs=1e-6)
        fs = {row.F for row in r.rows}
        assert len(fs) == 1
        base, gg = r.row("Sphericity Assumed"), r.row("Greenhouse-Geisser")
        # holds once F clears the region where F curves of different df cross
        if gg.epsilon < 1 and 2 <= base.F < math.inf:
            assert gg.p >= base.p - 1e-15

    def test_correction_can_lower_p_just_above_one(self):
        # with F barely above 1 a smaller df gives the *smaller* tail area,
        # so "F > 1" alone is not enough for p_gg >= p_sphericity
        y = np.ones((7, 3))
        y[0, 0] = 0.0
        r = anova.within_subjects(y)
        base, gg = r.row("Sphericity Assumed"), r.row("Greenhouse-Geisser")
        assert base.F == pytest.approx(1.0) and gg.epsilon < 1
        assert gg.p < base.p
        assert gg.p == pytest.approx(stats.f.sf(base.F, gg.df_effect, gg.df_error), rel=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(matrices, st.floats(-1e3, 1e3), st.floats(0.01, 100))
    def test_shift_scale_invariance(self, y, c, s):
        assume(np.linalg.svd(np.diff(y, axis=1), compute_uv=False)[-1] > 1e-2)
        a = anova.analyze(y)
        b = anova.analyze(y + c)
        g = anova.analyze(y * s)
        assert b.within.ss_effect == pytest.approx(a.within.ss_effect, rel=1e-6, abs=1e-6)
        assert b.within.ss_error == pytest.approx(a.within.ss_error, rel=1e-6, abs=1e-6)
        assert b.sphericity.W == pytest.approx(a.sphericity.W, rel=1e-6, abs=1e-9)
        assert b.sphericity.eps_gg == pytest.approx(a.sphericity.eps_gg, rel=1e-6)
        assert b.multivariate.pillai == pytest.approx(a.multivariate.pillai, rel=1e-6, abs=1e-9)
        for ca, cb in zip(a.contrasts, b.contrasts):
            assert cb.F == pytest.approx(ca.F, rel=1e-6, abs=1e-9)
        assert g.within.ss_effect == pytest.approx(s * s * a.within.ss_effect, rel=1e-6, abs=1e-6)
        assert g.within.ss_error == pytest.approx(s * s * a.within.ss_error, rel=1e-6, abs=1e-6)
        ra, rg = a.within.row("Greenhouse-Geisser"), g.within.row("Greenhouse-Geisser")
        assert rg.F == pytest.approx(ra.F, rel=1e-6)
        assert rg.p == pytest.approx(ra.p, rel=1e-5, abs=1e-12)
        assert g.within.partial_eta2 == pytest.approx(a.within.partial_eta2, rel=1e-6, abs=1e-12)
        assert g.sphericity.eps_hf == pytest.approx(a.sphericity.eps_hf, rel=1e-6)


class TestSphericity:
    def test_compound_symmetry(self):
        y = 5 + np.arange(30.0)[:, None] + whitened(30, 2, 1) @ HELMERT
        s = anova.sphericity(y)
        assert s.W == pytest.approx(1.0)
        assert s.eps_gg == pytest.approx(1.0)
        assert s.chi2 == pytest.approx(0.0, abs=1e-9)

    def test_eigen_ratio_closed_form(self):
        r = 0.1828
        lam = np.array([1.0, r]) * 40
        y = whitened(48, 2, 2) * np.sqrt(lam) @ HELMERT
        s = anova.sphericity(y)
        eps = (1 + r) ** 2 / (2 * (1 + r * r))
        w = 4 * r / (1 + r) ** 2
        assert s.eps_gg == pytest.approx(eps, rel=1e-10)
        assert s.W == pytest.approx(w, rel=1e-10)
        assert round(eps, 3) == 0.677 and round(w, 3) == 0.523

    def test_two_levels(self):
        s = anova.sphericity(np.random.default_rng(0).normal(size=(8, 2)))
        assert (s.W, s.eps_gg, s.eps_hf, s.eps_lb) == (1.0, 1.0, 1.0, 1.0)

    def test_singular(self):
        x = np.arange(10.0)
        s = anova.sphericity(np.column_stack([x, 2 * x, 3 * x]))
        assert s.degenerate and s.W == 0.0

    def test_chi2_formula(self):
        y = np.random.default_rng(3).normal(size=(12, 4))
        s = anova.sphericity(y)
        p, n = 3, 12
        d = 1 - (2 * p * p + p + 2) / (6 * p * (n - 1))
        assert s.chi2 == pytest.approx(-(n - 1) * d * math.log(s.W))
        assert s.df == 5
        assert s.p == pytest.approx(stats.chi2.sf(s.chi2, 5), rel=1e-8)

    @settings(max_examples=80, deadline=None)
    @given(matrices)
    def test_epsilon_order(self, y):
        assume(np.ptp(np.diff(y, axis=1)) > 1e-3)
        s = anova.sphericity(y)
        assert s.eps_lb <= s.eps_gg + 1e-12 <= s.eps_hf + 2e-12 <= 1 + 3e-12
        assert 0 <= s.W <= 1


class TestContrastsAndMultivariate:
    def test_contrasts_match_paired_t(self):
        y = np.random.default_rng(4).normal(size=(15, 3)) + [0, 0.5, 0.7]
        for j, c in enumerate(anova.contrasts(y)):
            t = stats.ttest_rel(y[:, j + 1], y[:, j])
            assert c.F == pytest.approx(t.statistic ** 2, rel=1e-10)
            assert c.p == pytest.approx(t.pvalue, rel=1e-8)
            d = y[:, j + 1] - y[:, j]
            assert c.ss_hypothesis == pytest.approx(15 * d.mean() ** 2)

    def test_identical_columns(self):
        x = np.random.default_rng(1).normal(size=9)
        c = anova.contrasts(np.column_stack([x, x]))[0]
        assert c.F == 0 and c.ss_hypothesis == 0

    def test_manova_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            y = rng.normal(size=(int(rng.integers(5, 30)), 3)) @ rng.normal(size=(3, 3)) + rng.normal(size=3)
            got = anova.multivariate(y)
            want = manova_oracle(y)
            for key, val in want.items():
                assert getattr(got, key) == pytest.approx(val, rel=1e-9)
            assert got.pillai + got.wilks == pytest.approx(1.0)
            assert got.F == pytest.approx(got.hotelling * (len(y) - 2) / 2)

    def test_zero_mean_differences(self):
        d = whitened(10, 2, 7)
        y = np.column_stack([np.zeros(10), d[:, 0], d[:, 0] + d[:, 1]]) + 3
        m = anova.multivariate(y)
        assert m.pillai == pytest.approx(0, abs=1e-12) and m.roy == pytest.approx(0, abs=1e-12)
        assert m.p == pytest.approx(1.0)

    def test_singular_names_columns(self):
        x = np.random.default_rng(0).normal(size=8)
        y = anova.SubjectMatrix(np.column_stack([x, 2 * x, 4 * x]),
                                column_labels=("p1", "p2", "p3"))
        with pytest.raises(SingularMatrixError, match="p2-p1"):
            anova.multivariate(y)

    def test_needs_enough_subjects(self):
        with pytest.raises(InsufficientDataError):
            anova.multivariate(np.eye(3))


class TestPairwiseAndEstimates:
    def test_pairwise_vs_scipy(self):
        y = np.random.default_rng(9).normal(size=(20, 3)) + [0, 0.4, 1]
        res = anova.pairwise(y, 0.05)
        assert len(res) == 6
        for r in res:
            t = stats.ttest_rel(y[:, r.i - 1], y[:, r.j - 1])
            assert r.p_bonferroni == pytest.approx(min(1, 3 * t.pvalue), rel=1e-8)
            crit = stats.t.ppf(1 - 0.05 / 6, 19)
            assert r.ci_high - r.mean_diff == pytest.approx(crit * r.se, rel=1e-9)

    def test_estimates_vs_scipy(self):
        y = np.random.default_rng(10).normal(3, 2, size=(25, 3))
        for j, e in enumerate(anova.param_estimates(y)):
            t = stats.ttest_1samp(y[:, j], 0)
            ci = t.confidence_interval(0.95)
            assert e.t == pytest.approx(t.statistic, rel=1e-10)
            assert e.p == pytest.approx(t.pvalue, rel=1e-8)
            assert (e.ci_low, e.ci_high) == (pytest.approx(ci.low), pytest.approx(ci.high))
            assert e.partial_eta2 == pytest.approx(e.t ** 2 / (e.t ** 2 + 24))

    def test_intercept_on_means(self):
        y = np.random.default_rng(11).normal(5, 1, size=(12, 3))
        r = anova.between_intercept(y)
        z = y.mean(axis=1)
        assert r.ss == pytest.approx(12 * z.mean() ** 2)
        assert r.F == pytest.approx(stats.ttest_1samp(z, 0).statistic ** 2)

    def test_summary_degenerate(self):
        s = anova.column_summary([[1.0, 2.0, 3.0]])
        assert [c.mean for c in s] == [1, 2, 3]
        assert all(not c.sd_defined and math.isnan(c.sd) for c in s)
        assert all(c.sd == 0 for c in anova.column_summary(np.tile([1.0, 4.0], (5, 1))))


class TestReconstructedMatrix:
    def test_period_summaries(self, reconstructed):
        cols = anova.column_summary(reconstructed)
        assert [c.mean for c in cols] == pytest.approx(reference.PERIOD_MEANS, abs=1e-9)
        assert [c.sd for c in cols] == pytest.approx(reference.PERIOD_SDS, abs=1e-9)
        assert reconstructed.n == 48

    def test_difference_variances(self, reconstructed):
        y = reconstructed.values
        for (i, j), v in reference.DIFF_VARIANCES.items():
            assert np.var(y[:, j] - y[:, i], ddof=1) == pytest.approx(v, rel=1e-9)


class TestBuildSubjectMatrix:
    @staticmethod
    def _log(cmd, counts):
        n = len(cmd)
        return CampaignLog(np.arange(n), np.zeros(n), cmd, counts)

    def test_constant_groups(self):
        cmd = np.tile([1, 2, 3, -4], 30)
        m = anova.build_subject_matrix(self._log(cmd, 10 * cmd), 40, 3, 20, seed=0)
        assert m.row_labels == (-4, 1, 2, 3)
        assert np.array_equal(m.values, np.repeat([[-40], [10], [20], [30]], 3, axis=1))

    def test_identity_sampling(self):
        rng = np.random.default_rng(0)
        cmd = rng.integers(-3, 4, size=60)
        cnt = rng.integers(-100, 100, size=60)
        m = anova.build_subject_matrix(self._log(cmd, cnt), 20, 3, 20, seed=5)
        for b in range(3):
            blk = slice(20 * b, 20 * b + 20)
            for r, p in enumerate(m.row_labels):
                assert m.values[r, b] == pytest.approx(cnt[blk][cmd[blk] == p].mean())

    def test_drops_incomplete_positions(self):
        cmd = np.array([1, 2, 1, 2, 1, 3])
        m = anova.build_subject_matrix(self._log(cmd, cmd), 2, 3, 2, seed=0)
        assert m.row_labels == (1,) and m.dropped == (2, 3)

    def test_seeded(self):
        log = run_campaign(reference.FLIGHT_SCHEDULE, 3000, WearModel(seed=1))
        a = anova.build_subject_matrix(log, 1000, 3, 200, seed=4)
        b = anova.build_subject_matrix(log, 1000, 3, 200, seed=4)
        assert np.array_equal(a.values, b.values) and a.row_labels == b.row_labels

    def test_short_log(self):
        with pytest.raises(InsufficientDataError, match="required"):
            anova.build_subject_matrix(self._log(np.ones(10), np.ones(10)), 5, 3, 2, seed=0)

    def test_full_scale_configuration_has_48_subjects(self):
        entries = fdr.parse_fdr(reference.synthetic_fdr()).entries
        sched = fdr.build_schedule(fdr.filter_outliers([fdr.to_deflection(e) for e in entries]),
                                   seed=1)
        log = run_campaign(sched, 393_313, WearModel(seed=2))
        assert len(log) == 393_313
        assert (log.commanded_deg.min(), log.commanded_deg.max()) == (-30, 37)
        m = anova.build_subject_matrix(log, 130_000, 3, 5000, seed=3)
        assert m.n == 48 and m.k == 3
