import math

import numpy as np
import pytest

from rsobf.analytics import rician_cascade_snr
from rsobf.channel import (CorrelatedRayleigh, FullyCorrelated, Rayleigh,
                           Rician, RsConfig, SlotRealization, cascade_gain,
                           composite_gain, los_matrix, los_vector,
                           miso_rs_channel, prepare_los_phases,
                           sample_fading_block, sample_user_fading,
                           wideband_slot)
from rsobf.numerics import RngStream, complex_gaussian_block, hermitian_sqrt


def ks_distance(samples, cdf):
    xs = np.sort(samples)
    emp = np.arange(1, xs.size + 1) / xs.size
    theo = cdf(xs)
    return max(np.max(np.abs(theo - emp)),
               np.max(np.abs(theo - (emp - 1.0 / xs.size))))


class TestRsConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            RsConfig(elements=0)
        with pytest.raises(ValueError):
            RsConfig(elements=2, beta=0.0)
        with pytest.raises(ValueError):
            RsConfig(elements=2, beta=1.2)

    def test_los_vector_is_unit_modulus(self):
        cfg = RsConfig(elements=8, los_angles=0.7)
        h1 = los_vector(cfg)
        assert np.abs(h1) == pytest.approx(np.ones(8), rel=1e-15)

    def test_first_element_has_zero_phase(self):
        h1 = los_vector(RsConfig(elements=4, los_angles=1.1))
        assert h1[0] == 1.0 + 0.0j

    def test_zero_angles_give_all_ones(self):
        h1 = los_vector(RsConfig(elements=5, los_angles=0.0))
        assert h1 == pytest.approx(np.ones(5))

    def test_half_wavelength_broadside(self):
        # d = 0.5, angle pi/2: element 2 phase is 2 pi (1) 0.5 sin(pi/2) = pi
        h1 = los_vector(RsConfig(elements=2, spacing=0.5, los_angles=np.pi / 2))
        assert h1[1] == pytest.approx(-1.0 + 0.0j, abs=1e-12)


class TestFadingFamilies:
    def test_rayleigh_unit_energy(self):
        gen = RngStream(1, 0).generator()
        h = sample_fading_block(Rayleigh(), 500_000, 2, gen)
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.01)

    def test_rician_energy_split(self):
        kappa = 10.0
        spec = Rician(kappa)
        gen = RngStream(2, 0).generator()
        phases = prepare_los_phases(spec, 200_000, 2, 0.5, gen)
        h = sample_fading_block(spec, 200_000, 2, gen, los_phases=phases)
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.01)
        fixed = np.sqrt(spec.los_energy) * np.exp(1j * phases)
        diffuse = h - fixed
        assert np.mean(np.abs(diffuse) ** 2) == pytest.approx(
            1.0 / (1.0 + kappa), abs=0.005)

    def test_rician_infinite_kappa_is_pure_los(self):
        h = sample_user_fading(Rician(math.inf), 4, RngStream(3, 1))
        assert np.abs(h) == pytest.approx(np.ones(4), rel=1e-15)

    def test_correlated_covariance_oracle(self):
        r = np.array([[1.0, 0.8], [0.8, 1.0]])
        spec = CorrelatedRayleigh(r)
        gen = RngStream(4, 0).generator()
        h = sample_fading_block(spec, 1_000_000, 2, gen)
        emp = h.T @ h.conj() / h.shape[0]   # E[h h^H] entrywise
        assert np.real(emp) == pytest.approx(r, abs=0.01)
        assert np.imag(emp) == pytest.approx(np.zeros((2, 2)), abs=0.01)

    def test_correlation_matrix_validation(self):
        with pytest.raises(ValueError):
            CorrelatedRayleigh(np.array([[1.0, 0.2], [0.3, 1.0]]))  # not Hermitian
        with pytest.raises(ValueError):
            CorrelatedRayleigh(np.array([[2.0, 0.0], [0.0, 1.0]]))  # trace != N

    def test_fully_correlated_structure(self):
        spec = FullyCorrelated()
        gen = RngStream(5, 0).generator()
        phases = prepare_los_phases(spec, 3, 4, 0.5, gen)
        h = sample_fading_block(spec, 3, 4, gen, los_phases=phases)
        # rank one per user: h_n / e^{j phi_n} identical across n
        rot = h * np.exp(-1j * phases)
        assert np.max(np.abs(rot - rot[:, :1])) < 1e-12

    def test_fully_correlated_energy(self):
        spec = FullyCorrelated()
        gen = RngStream(6, 0).generator()
        phases = prepare_los_phases(spec, 300_000, 4, 0.5, gen)
        h = sample_fading_block(spec, 300_000, 4, gen, los_phases=phases)
        assert np.mean(np.sum(np.abs(h) ** 2, axis=1)) == pytest.approx(4.0, rel=0.01)

    def test_sample_user_fading_dimension_check(self):
        with pytest.raises(ValueError):
            sample_user_fading(CorrelatedRayleigh(np.eye(2)), 3, RngStream(1))


class TestCascadeAndComposite:
    def test_single_element_identity(self):
        assert cascade_gain(1.0, np.ones(1), np.ones(1), np.ones(1)) == 1.0

    def test_coherent_sum_reaches_bound(self):
        # v cancels arg(h1 h2): modulus N beta sqrt(rho)
        n, beta, rho = 5, 0.8, 2.0
        gen = RngStream(7, 0).generator()
        h1 = np.exp(1j * gen.uniform(0, 2 * np.pi, n))
        h2 = np.exp(1j * gen.uniform(0, 2 * np.pi, n))
        v = beta * np.exp(-1j * np.angle(h1 * h2))
        g = cascade_gain(rho, h1, v, h2)
        assert abs(g) == pytest.approx(n * beta * math.sqrt(rho), rel=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            cascade_gain(1.0, np.ones(3), np.ones(2), np.ones(3))

    def test_cascade_mean_energy(self):
        # E|h_R|^2 = rho beta^2 N under Rayleigh fading and any phases
        n, beta, rho, draws = 3, 0.9, 1.7, 1_000_000
        gen = RngStream(8, 0).generator()
        h1 = los_vector(RsConfig(elements=n, los_angles=0.3))
        theta = gen.uniform(0, 2 * np.pi, (draws, n))
        h2 = complex_gaussian_block((draws, n), gen)
        g = cascade_gain(rho, h1, beta * np.exp(1j * theta), h2)
        assert np.mean(np.abs(g) ** 2) == pytest.approx(rho * beta ** 2 * n, rel=0.01)

    def test_cascade_snr_is_exponential(self):
        # |h_R|^2 ~ Exp(mean rho beta^2 N): KS < 0.005 over 1e6 samples
        n, beta, rho, draws = 2, 1.0, 1.0, 1_000_000
        gen = RngStream(9, 0).generator()
        h1 = los_vector(RsConfig(elements=n))
        theta = gen.uniform(0, 2 * np.pi, (draws, n))
        h2 = complex_gaussian_block((draws, n), gen)
        snr = np.abs(cascade_gain(rho, h1, beta * np.exp(1j * theta), h2)) ** 2
        mean = rho * beta ** 2 * n
        assert ks_distance(snr, lambda x: 1.0 - np.exp(-x / mean)) < 0.005

    def test_amplitude_is_rayleigh(self):
        # |h| for the N = 2, beta = 1 cascade: Rayleigh with mean square 2
        gen = RngStream(10, 0).generator()
        draws = 1_000_000
        theta = gen.uniform(0, 2 * np.pi, (draws, 2))
        h2 = complex_gaussian_block((draws, 2), gen)
        amp = np.abs(np.sum(np.exp(1j * theta) * h2, axis=1))
        assert np.mean(amp ** 2) == pytest.approx(2.0, rel=0.01)
        assert ks_distance(amp, lambda r: 1.0 - np.exp(-r ** 2 / 2.0)) < 0.01

    def test_composite_trivial_cases(self):
        assert composite_gain(1.5 + 0j, 0.0, 1.0) == 1.5 + 0j
        assert composite_gain(0.0 + 0j, 4.0, 1.0) == 2.0 + 0j

    def test_composite_energy_adds(self):
        n, rho_r, rho_b, draws = 2, 1.3, 0.7, 1_000_000
        gen = RngStream(11, 0).generator()
        h1 = los_vector(RsConfig(elements=n))
        theta = gen.uniform(0, 2 * np.pi, (draws, n))
        h2 = complex_gaussian_block((draws, n), gen)
        hd = complex_gaussian_block((draws,), gen)
        g = composite_gain(cascade_gain(rho_r, h1, np.exp(1j * theta), h2),
                           rho_b, hd)
        assert np.mean(np.abs(g) ** 2) == pytest.approx(rho_r * n + rho_b, rel=0.01)

    def test_rician_beamforming_configuration_is_noncentral(self):
        # phases aligned to user's LoS: SNR follows the noncentral law
        n, kappa, rho = 2, 10.0, 1.0
        a, u = kappa / (1 + kappa), 1 / (1 + kappa)
        spec = Rician(kappa)
        gen = RngStream(12, 0).generator()
        cfg = RsConfig(elements=n, los_angles=0.4)
        h1 = los_vector(cfg)
        phases = prepare_los_phases(spec, 1, n, cfg.spacing, gen)
        v = np.exp(-1j * (np.angle(h1) + phases[0]))   # beamforming config
        draws = 1_000_000
        h2 = (np.sqrt(a) * np.exp(1j * phases)
              + np.sqrt(u) * complex_gaussian_block((draws, n), gen))
        snr = np.abs(cascade_gain(rho, h1, v, h2)) ** 2
        law = rician_cascade_snr(n, 1.0, a, u, rho)
        assert ks_distance(snr, law.cdf) < 0.005


class TestWideband:
    def test_single_carrier_matches_manual_composition(self):
        # identical stream: the op must reproduce the manual draw sequence
        stream = RngStream(13, 2)
        out = wideband_slot(1, RsConfig(elements=3), Rayleigh(), Rayleigh(),
                            1.2, 0.8, 5, stream)
        gen = stream.generator()
        h1 = los_vector(RsConfig(elements=3))
        theta = gen.uniform(0, 2 * np.pi, 3)
        h2 = sample_fading_block(Rayleigh(), 5, 3, gen)
        hd = sample_fading_block(Rayleigh(), 5, 1, gen)[:, 0]
        manual = composite_gain(cascade_gain(1.2, h1, np.exp(1j * theta), h2),
                                0.8, hd)
        assert len(out) == 1
        assert np.array_equal(out[0].gains, manual)

    def test_subcarriers_are_independent(self):
        snr_a, snr_b = [], []
        for t in range(4000):
            reals = wideband_slot(2, RsConfig(elements=2), Rayleigh(),
                                  Rayleigh(), 1.0, 1.0, 1, RngStream(14, t))
            snr_a.append(reals[0].snrs[0])
            snr_b.append(reals[1].snrs[0])
        rho = np.corrcoef(snr_a, snr_b)[0, 1]
        assert abs(rho) < 0.05

    def test_phase_schedule_shared_within_slot(self):
        # pure-LoS fading on both subcarriers exposes the shared schedule
        spec = Rician(math.inf)
        reals = wideband_slot(2, RsConfig(elements=4), spec, None,
                              1.0, 0.0, 3, RngStream(15, 0))
        assert np.allclose(reals[0].gains, reals[1].gains)

    def test_slot_realization_invariant(self):
        real = SlotRealization.from_gains(np.array([1 + 1j, 2.0]))
        assert real.snrs == pytest.approx([2.0, 4.0])


class TestMisoChannel:
    def test_los_matrix_unit_modulus_and_trace(self):
        gen = RngStream(16, 0).generator()
        h1m = los_matrix(3, 5, rng=RngStream(16, 0))
        assert np.abs(h1m) == pytest.approx(np.ones((3, 5)))
        r = h1m @ h1m.conj().T / 5
        assert np.trace(r).real == pytest.approx(3.0, rel=1e-12)

    def test_single_antenna_row(self):
        h1m = los_matrix(1, 4, angles=np.array([0.1, 0.2, 0.3, 0.4]))
        assert h1m.shape == (1, 4)
        assert np.allclose(h1m, 1.0)   # e^{j 2 pi * 0 * sin} = 1

    def test_equal_angles_rank_one(self):
        h1m = los_matrix(4, 3, angles=np.full(3, 0.7))
        r = h1m @ h1m.conj().T / 3
        w = np.linalg.eigvalsh(r)
        assert w[-1] == pytest.approx(4.0, rel=1e-12)
        assert np.max(np.abs(w[:-1])) < 1e-10

    def test_miso_channel_identity_covariance(self):
        rho, n, beta, m = 1.5, 4, 0.9, 2
        gen = RngStream(17, 0).generator()
        draws = 500_000
        s = hermitian_sqrt(np.eye(m))
        z = complex_gaussian_block((draws, m), gen)
        h = np.sqrt(rho * n) * beta * (z @ s.T)
        emp = h.T @ h.conj() / draws
        target = rho * beta ** 2 * n * np.eye(m)
        assert np.real(emp) == pytest.approx(np.real(target), abs=0.01 * rho * n)

    def test_miso_channel_correlated_covariance(self):
        rho, n, beta = 1.0, 2, 1.0
        r = np.array([[1.0, 0.6 + 0.2j], [0.6 - 0.2j, 1.0]])
        s = hermitian_sqrt(r)
        gen = RngStream(18, 0).generator()
        draws = 1_000_000
        z = complex_gaussian_block((draws, 2), gen)
        h = np.sqrt(rho * n) * beta * (z @ s.T)
        emp = h.T @ h.conj() / draws
        assert emp == pytest.approx(rho * beta ** 2 * n * r, abs=0.01 * rho * n)

    def test_op_matches_block_formula(self):
        r = np.array([[1.0, 0.5], [0.5, 1.0]])
        stream = RngStream(19, 7)
        h = miso_rs_channel(2.0, 3, 0.8, r, stream)
        gen = stream.generator()
        z = complex_gaussian_block((2,), gen)
        manual = np.sqrt(2.0 * 3) * 0.8 * (hermitian_sqrt(r) @ z)
        assert np.array_equal(h, manual)

    def test_scalar_reduction(self):
        h = miso_rs_channel(1.0, 2, 1.0, np.eye(1), RngStream(20, 0))
        assert h.shape == (1,)


class TestFullyCorrelatedBound:
    def test_coherent_bound_never_violated(self):
        n = 4
        gen = RngStream(21, 0).generator()
        worst = 0.0
        for _ in range(100):
            phases = gen.uniform(0, 2 * np.pi, (100_000, n))
            s = np.abs(np.exp(1j * phases).sum(axis=1)) ** 2
            worst = max(worst, float(s.max()))
        assert worst <= n ** 2 + 1e-9

    def test_aligned_phases_achieve_bound(self):
        n = 6
        s = np.abs(np.exp(1j * np.zeros(n)).sum()) ** 2
        assert s == pytest.approx(n ** 2)
