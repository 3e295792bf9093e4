import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from rsobf.analytics import (GrowthConvergenceError, ScalingLawSpec,
                             chi2_scaled_snr, conditional_corr_snr_law,
                             degenerate_snr, evt_growth_and_lk,
                             exponential_snr, noncentral_chi2_snr,
                             order_stat_max, quantile, rayleigh_closed_form,
                             rician_cascade_snr, rician_tail_approximation,
                             scaling_law, sum_capacity_integral)
from rsobf.beamforming import PhaseVector
from rsobf.numerics import (RngStream, complex_gaussian_block, gamma0_upper,
                            ncx2_log_pdf, ncx2_log_sf)

LN2 = math.log(2.0)


def rate_usub_oracle(c, k):
    """Independent quadrature of E[log2(1+max)] via u = F^K substitution."""
    f = lambda u: math.log1p(-c * math.log1p(-u ** (1.0 / k))) / LN2
    val, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=500)
    return val


class TestOrderStatistics:
    def test_k1_identity(self):
        d = exponential_snr(1.0)
        m = order_stat_max(d, 1)
        assert m is d

    def test_exponential_pair_cdf(self):
        # F_max(ln 4) = (1 - 1/4)^2 = 0.5625 for two unit exponentials
        m = order_stat_max(exponential_snr(1.0), 2)
        assert m.cdf(math.log(4.0)) == pytest.approx(0.5625, rel=1e-12)

    def test_matches_empirical_maximum(self):
        k, draws = 4, 100_000
        gen = RngStream(1, 0).generator()
        samples = gen.exponential(1.0, (draws, k)).max(axis=1)
        m = order_stat_max(exponential_snr(1.0), k)
        xs = np.sort(samples)
        emp = np.arange(1, draws + 1) / draws
        assert np.max(np.abs(m.cdf(xs) - emp)) < 0.01

    def test_pdf_is_derivative(self):
        m = order_stat_max(exponential_snr(2.0), 5)
        x = 3.0
        h = 1e-6
        num = (m.cdf(x + h) - m.cdf(x - h)) / (2 * h)
        assert m.pdf(x) == pytest.approx(num, rel=1e-6)


class TestSumCapacityIntegral:
    def test_k1_exponential_closed_form(self):
        # e * Gamma(0, 1) / ln 2 (note: evaluates to 0.8603474)
        oracle = math.e * gamma0_upper(1.0) / LN2
        assert sum_capacity_integral(exponential_snr(1.0), 1) == pytest.approx(
            oracle, abs=1e-9)

    def test_degenerate_unit_snr(self):
        assert sum_capacity_integral(degenerate_snr(1.0), 1) == 1.0
        assert sum_capacity_integral(degenerate_snr(1.0), 7) == 1.0

    def test_against_independent_quadrature(self):
        for (c, k) in [(1.0, 256), (3.0, 128), (0.5, 8), (5.0, 64)]:
            ours = sum_capacity_integral(exponential_snr(c), k)
            assert ours == pytest.approx(rate_usub_oracle(c, k), abs=2e-7)

    def test_large_k_value_matches_paper_simulation(self):
        # Fig. 2(b) "Sim. OS M=1" at K = 256 is 2.8065; exact value 2.8112
        val = sum_capacity_integral(exponential_snr(1.0), 256)
        assert val == pytest.approx(2.8111792593548, abs=1e-9)
        assert val == pytest.approx(2.8065, abs=0.03)

    def test_chi2_law(self):
        # whitened MISO SNR law: Gamma(M, c); spot value via u-substitution
        d = chi2_scaled_snr(2, 1.0)
        def usub(u):
            from scipy import special
            x = special.gammaincinv(2, u ** (1.0 / 64))
            return math.log1p(x) / LN2
        ref, _ = integrate.quad(usub, 0, 1, epsabs=1e-12, limit=400)
        assert sum_capacity_integral(d, 64) == pytest.approx(ref, abs=1e-6)


class TestClosedForm:
    def test_k1(self):
        oracle = math.e * gamma0_upper(1.0) / LN2
        assert rayleigh_closed_form(1, 1.0) == pytest.approx(oracle, rel=1e-12)

    @pytest.mark.parametrize("k", [2, 5, 10, 20, 30])
    @pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
    def test_matches_quadrature(self, k, c):
        closed = rayleigh_closed_form(k, c)
        quad = sum_capacity_integral(exponential_snr(c), k)
        assert closed == pytest.approx(quad, abs=1e-6)

    def test_k30_tight(self):
        assert rayleigh_closed_form(30, 3.0) == pytest.approx(
            sum_capacity_integral(exponential_snr(3.0), 30), abs=1e-6)

    def test_delegates_above_threshold(self):
        # K > 40 goes through quadrature; no overflow, sane value
        val = rayleigh_closed_form(256, 1.0)
        assert val == pytest.approx(2.8111792593548, abs=1e-8)

    def test_no_overflow_small_c(self):
        val = rayleigh_closed_form(40, 0.05)
        assert np.isfinite(val) and val > 0


class TestEvt:
    def test_exponential_growth_and_quantile(self):
        c = 2.7
        d = exponential_snr(c)
        g, lk = evt_growth_and_lk(d, 1000)
        assert g == pytest.approx(c, rel=1e-9)
        assert lk == pytest.approx(c * math.log(1000), rel=1e-10)

    def test_chi2_growth_and_quantile_ratio(self):
        zeta, rho, beta, n, m = 0.8, 1.0, 1.0, 2, 2
        c = zeta * rho * beta ** 2 * n
        d = chi2_scaled_snr(m, c)
        g, lk6 = evt_growth_and_lk(d, 10 ** 6, probe_factor=1e4)
        assert g == pytest.approx(c, rel=0.01)
        _, lk2 = evt_growth_and_lk(d, 10 ** 2, probe_factor=1e4)
        ratio6 = lk6 / (c * math.log(1e6))
        ratio2 = lk2 / (c * math.log(1e2))
        # l_K = c ln K + O(ln ln K): the ratio drifts towards 1
        assert ratio2 > ratio6 > 1.0
        assert ratio6 < 1.25

    def test_noncentral_tail_needs_deep_probe(self):
        n, kappa, rho = 2, 10.0, 1.0
        a, u = kappa / 11, 1.0 / 11
        d = rician_cascade_snr(n, 1.0, a, u, rho)
        # the growth function settles like 1/sqrt(x): the default probe
        # (1e3 x mean) still sees a few percent of drift
        with pytest.raises(GrowthConvergenceError):
            evt_growth_and_lk(d, 100)
        g, _ = evt_growth_and_lk(d, 100, probe_factor=1e7)
        assert g == pytest.approx(rho * n * 1.0 ** 2 * u, rel=0.01)

    def test_quantile_accuracy(self):
        d = exponential_snr(1.0)
        assert quantile(d, 1 - 1e-6) == pytest.approx(-math.log(1e-6), rel=1e-10)


class TestScalingLaws:
    def test_golden_values_from_figure_data(self):
        assert scaling_law(ScalingLawSpec("eq3"), 256) == pytest.approx(
            2.7104323052034447, abs=1e-9)
        assert scaling_law(ScalingLawSpec("cor1", n=2), 2) == pytest.approx(
            1.6226687411473426, abs=1e-9)
        assert scaling_law(ScalingLawSpec("cor1", n=2), 256) == pytest.approx(
            4.140413219459064, abs=1e-9)
        assert scaling_law(ScalingLawSpec("eq4", kappa=10.0), 256) == pytest.approx(
            1.9134636298675, abs=1e-7)
        assert scaling_law(ScalingLawSpec("eq6", m=2, kappa=10.0), 256) == pytest.approx(
            2.3887488247811, abs=1e-7)
        assert scaling_law(ScalingLawSpec("cor3", n=2, lambda_max=1.8), 128) == pytest.approx(
            4.5434550032307, abs=1e-7)

    def test_k1_conventions(self):
        # ln 1 = 0: fixed components only
        assert scaling_law(ScalingLawSpec("eq3"), 1) == 0.0
        assert scaling_law(ScalingLawSpec("eq4", kappa=10.0), 1) == pytest.approx(
            math.log2(1 + 10.0 / 11.0), rel=1e-12)
        assert scaling_law(ScalingLawSpec("eq6", m=2, kappa=10.0), 1) == pytest.approx(
            math.log2(1 + 20.0 / 11.0), rel=1e-12)
        # composite Rician fixed component: (N sqrt(a) + sqrt(a_B))^2, a = 10/11
        xi0 = (2 * math.sqrt(10.0 / 11.0) + math.sqrt(10.0 / 11.0)) ** 2
        assert scaling_law(ScalingLawSpec("cor2", n=2, kappa=10.0, kappa_b=10.0),
                           1) == pytest.approx(math.log2(1 + xi0), rel=1e-12)

    def test_bad_k_rejected(self):
        with pytest.raises(ValueError):
            scaling_law(ScalingLawSpec("eq3"), 0)
        with pytest.raises(ValueError):
            scaling_law(ScalingLawSpec("nope"), 4)

    @given(st.integers(min_value=2, max_value=10 ** 6),
           st.floats(min_value=0.1, max_value=10.0),
           st.floats(min_value=0.1, max_value=10.0),
           st.integers(min_value=1, max_value=64),
           st.floats(min_value=0.05, max_value=1.0),
           st.integers(min_value=1, max_value=8))
    @settings(max_examples=200, deadline=None)
    def test_structural_identities(self, k, rho_r, rho_b, n, beta, L):
        base = dict(rho_r=rho_r, rho_b=rho_b, n=n, beta=beta)
        cor1 = scaling_law(ScalingLawSpec("cor1", **base), k)
        # Corollary 5 (homogeneous OFDMA) = L x Corollary 1, exactly
        cor5 = scaling_law(ScalingLawSpec("cor5", subcarriers=L, **base), k)
        assert cor5 == pytest.approx(L * cor1, rel=1e-15)
        # Corollary 4 = Theorem 3 at lambda_max = N, exactly
        cor4 = scaling_law(ScalingLawSpec("cor4", rho_r=rho_r, n=n, beta=beta), k)
        thm3 = scaling_law(ScalingLawSpec("thm3", rho_r=rho_r, n=n, beta=beta,
                                          lambda_max=float(n)), k)
        assert cor4 == pytest.approx(thm3, rel=1e-15)
        # Corollary 2 degenerates to Corollary 1 at kappa = kappa_B = 0
        cor2 = scaling_law(ScalingLawSpec("cor2", kappa=0.0, kappa_b=0.0, **base), k)
        assert cor2 == pytest.approx(cor1, rel=1e-12)
        # Theorem 1 = Corollary 1 without the direct link
        thm1 = scaling_law(ScalingLawSpec("thm1", rho_r=rho_r, n=n, beta=beta), k)
        cor1_no_direct = scaling_law(ScalingLawSpec(
            "cor1", rho_r=rho_r, rho_b=0.0, n=n, beta=beta), k)
        assert thm1 == pytest.approx(cor1_no_direct, rel=1e-15)

    @given(st.integers(min_value=2, max_value=10 ** 5),
           st.floats(min_value=0.1, max_value=20.0),
           st.floats(min_value=0.1, max_value=20.0))
    @settings(max_examples=100, deadline=None)
    def test_thm2_equals_eq4_at_n1(self, k, rho, kappa):
        thm2 = scaling_law(ScalingLawSpec("thm2", rho_r=rho, n=1, beta=1.0,
                                          kappa=kappa), k)
        eq4 = scaling_law(ScalingLawSpec("eq4", rho_b=rho, kappa=kappa), k)
        assert thm2 == pytest.approx(eq4, rel=1e-12)

    def test_monotone_in_k_and_n(self):
        ks = [2, 4, 16, 64, 256, 4096]
        for law, kw in [("eq3", {}), ("eq4", {"kappa": 10.0}),
                        ("eq6", {"m": 2, "kappa": 10.0}),
                        ("cor1", {"n": 4}), ("thm2", {"n": 4, "kappa": 10.0}),
                        ("cor2", {"n": 4, "kappa": 10.0, "kappa_b": 10.0}),
                        ("cor3", {"n": 4, "lambda_max": 1.5}),
                        ("cor4", {"n": 4}),
                        ("thm4", {"n": 4, "m": 2, "tr_r_inv": 2.5})]:
            vals = [scaling_law(ScalingLawSpec(law, **kw), k) for k in ks]
            assert np.all(np.diff(vals) > 0), law
        for law in ("thm1", "cor1", "thm2", "cor2", "cor3", "cor4"):
            kw = {"kappa": 1.0, "kappa_b": 1.0} if law in ("thm2", "cor2") else {}
            vals = [scaling_law(ScalingLawSpec(law, n=n, **kw), 64)
                    for n in (1, 2, 4, 8, 16)]
            assert np.all(np.diff(vals) > 0), law

    def test_thm4_power_conventions(self):
        # Remark 4 divides the whitened SNR by M
        spec = ScalingLawSpec("thm4", n=2, m=2, tr_r_inv=2.0)
        spec_p1 = ScalingLawSpec("thm4-remark4", n=2, m=2, tr_r_inv=2.0)
        k = 256
        g = 2 ** scaling_law(spec, k) - 1
        g_p1 = 2 ** scaling_law(spec_p1, k) - 1
        assert g_p1 == pytest.approx(g / 2, rel=1e-12)


class TestRicianTails:
    n, beta, rho, delta = 2, 1.0, 1.0, 0.0
    kappa = 10.0
    a, u = kappa / 11, 1.0 / 11

    def law(self):
        return rician_cascade_snr(self.n, self.beta, self.a, self.u, self.rho)

    def test_pdf_ratio_at_50_mean(self):
        law = self.law()
        x = 50.0 * law.mean
        approx = rician_tail_approximation(x, self.n, self.beta, self.a,
                                           self.u, self.rho)
        up = self.n * self.beta ** 2 * self.u
        lam = (self.n * self.beta * math.sqrt(self.a)) ** 2
        exact_log = ncx2_log_pdf(x, lam / up, self.rho * up)
        ratio = math.exp(approx.log_pdf - exact_log)
        assert ratio == pytest.approx(1.0, abs=0.02)

    def test_cdf_tail_ratio_carries_geometric_factor(self):
        # the paper's tail form drops the geometric series sum_m r^m I_m/I_0;
        # the true ratio is 1 - sqrt(lambda rho / x) + O(1/tau), far from 1
        # at 50x the mean (see the decisions ledger)
        law = self.law()
        up = self.n * self.beta ** 2 * self.u
        lam = (self.n * self.beta * math.sqrt(self.a)) ** 2
        for mult in (10.0, 50.0, 200.0):
            x = mult * law.mean
            approx = rician_tail_approximation(x, self.n, self.beta, self.a,
                                               self.u, self.rho)
            exact_log = ncx2_log_sf(x, lam / up, self.rho * up)
            ratio = math.exp(approx.log_sf - exact_log)
            r = math.sqrt(lam * self.rho / x)
            assert ratio == pytest.approx(1.0 - r, abs=0.01)

    def test_growth_from_approximations(self):
        # g built from the two approximations is exactly rho N beta^2 u
        law = self.law()
        x = 1000.0 * law.mean
        approx = rician_tail_approximation(x, self.n, self.beta, self.a,
                                           self.u, self.rho)
        g = math.exp(approx.log_sf - approx.log_pdf)
        assert g == pytest.approx(self.rho * self.n * self.beta ** 2 * self.u,
                                  rel=0.01)

    def test_linear_fields_underflow_gracefully(self):
        law = self.law()
        far = rician_tail_approximation(500 * law.mean, self.n, self.beta,
                                        self.a, self.u, self.rho)
        assert far.pdf == 0.0 and far.sf == 0.0 and far.cdf == 1.0
        near = rician_tail_approximation(5 * law.mean, self.n, self.beta,
                                         self.a, self.u, self.rho)
        assert near.pdf > 0 and 0 < near.sf < 1


class TestConditionalLaw:
    def test_identity_rbar(self):
        vbar = PhaseVector.from_phases(np.zeros(4), 0.5)
        law = conditional_corr_snr_law(vbar, np.eye(4), 2.0)
        assert law.mean == pytest.approx(2.0 * 4 * 0.25, rel=1e-12)

    def test_lk_is_exact_exponential_quantile(self):
        vbar = PhaseVector.from_phases(np.array([0.0, 1.0]), 1.0)
        rbar = np.array([[1.0, 0.8], [0.8, 1.0]], dtype=complex)
        law = conditional_corr_snr_law(vbar, rbar, 1.3)
        _, lk = evt_growth_and_lk(law, 512)
        assert lk == pytest.approx(law.mean * math.log(512), rel=1e-10)

    def test_monte_carlo_ks(self):
        gen = RngStream(30, 0).generator()
        rbar = np.array([[1.0, 0.8], [0.8, 1.0]], dtype=complex)
        vbar = PhaseVector.from_phases(gen.uniform(0, 2 * np.pi, 2), 1.0)
        law = conditional_corr_snr_law(vbar, rbar, 1.0)
        from rsobf.numerics import hermitian_sqrt
        s = hermitian_sqrt(rbar)
        draws = 1_000_000
        hbar = complex_gaussian_block((draws, 2), gen) @ s.T
        v = np.conj(vbar.values)
        snr = np.abs(hbar @ v) ** 2
        xs = np.sort(snr)
        emp = np.arange(1, draws + 1) / draws
        assert np.max(np.abs(law.cdf(xs) - emp)) < 0.005


class TestNoncentralDescriptor:
    def test_mean_and_central_reduction(self):
        d = noncentral_chi2_snr(0.0, 1.7)
        assert d.mean == pytest.approx(1.7)
        assert d.cdf(1.7) == pytest.approx(1 - math.exp(-1.0), rel=1e-12)
