"""Opportunistic max-SNR scheduling and Monte-Carlo sum-rate estimation.

Every slot gets its own counter-based random stream keyed by
``(seed, domain, slot)``, so estimates are bit-identical no matter how the
slots are partitioned across workers. The per-run user state (fixed LoS
phases) comes from dedicated setup streams derived from the seed alone.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import beamforming, channel
from .channel import (CorrelatedRayleigh, FadingSpec, FullyCorrelated,
                      Rayleigh, Rician, RsConfig)
from .numerics import RngStream, complex_gaussian_block, hermitian_eig

# stream domains (top byte of the stream index)
_DOM_SLOT = 1
_DOM_USER_RS = 2
_DOM_USER_DIRECT = 3
_DOM_PLACEMENT = 4

def _stream(seed: int, domain: int, index: int = 0) -> RngStream:
    return RngStream(seed, (domain << 56) + index)


# ---------------------------------------------------------------------------
# Scenario and estimate types
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    """One simulated system: user count, link budgets, surface and fading.

    ``rho_r``/``rho_b`` are linear average SNRs, scalar for homogeneous
    networks or per-user arrays. When ``placement`` is set (an object with
    ``sample(gen, K) -> (rho_r, rho_b)``) fresh per-user budgets are drawn
    every slot and the scalar fields are ignored.
    """

    users: int
    rho_r: Union[float, np.ndarray] = 1.0
    rho_b: Union[float, np.ndarray] = 1.0
    rs: Optional[RsConfig] = None
    rs_fading: FadingSpec = field(default_factory=Rayleigh)
    direct_fading: Optional[FadingSpec] = field(default_factory=Rayleigh)
    subcarriers: int = 1
    bs_antennas: int = 1
    rs_phase_mode: str = "random"          # "random" | "deterministic"
    power: str = "per-antenna"             # "per-antenna" | "total" (MISO)
    miso_angles: Optional[np.ndarray] = None
    placement: Optional[object] = None

    def __post_init__(self):
        if self.users < 1:
            raise ValueError("need at least one user")
        if self.subcarriers < 1:
            raise ValueError("need at least one subcarrier")
        if self.bs_antennas < 1:
            raise ValueError("need at least one BS antenna")
        if self.rs_phase_mode not in ("random", "deterministic"):
            raise ValueError("rs_phase_mode must be 'random' or 'deterministic'")
        if self.power not in ("per-antenna", "total"):
            raise ValueError("power must be 'per-antenna' or 'total'")
        if self.direct_fading is not None and not isinstance(
                self.direct_fading, channel.SCALAR_FAMILIES):
            raise ValueError("direct link fading must be Rayleigh or Rician")
        if self.rs is None and self.direct_fading is None:
            raise ValueError("scenario has neither a surface nor a direct link")
        if self.rs_phase_mode == "deterministic" and self.rs is not None:
            if not isinstance(self.rs_fading, (Rayleigh, CorrelatedRayleigh)):
                raise ValueError("deterministic phase design requires a common "
                                 "correlation matrix (Rayleigh or correlated)")

    def rho_arrays(self):
        rr = np.broadcast_to(np.asarray(self.rho_r, dtype=float), (self.users,))
        rb = np.broadcast_to(np.asarray(self.rho_b, dtype=float), (self.users,))
        return rr, rb


@dataclass(frozen=True)
class SumRateEstimate:
    """Monte-Carlo sum-rate: mean, standard error, slot count and seed."""

    mean: float
    stderr: float
    n_slots: int
    seed: int


# ---------------------------------------------------------------------------
# Elementary operations
# ---------------------------------------------------------------------------

def schedule_slot(snrs) -> int:
    """Index of the max-SNR user; ties go to the lowest index."""
    snrs = np.asarray(snrs, dtype=float)
    if snrs.size == 0:
        raise ValueError("cannot schedule with no users")
    if not np.all(np.isfinite(snrs)) or np.any(snrs < 0):
        raise ValueError("SNRs must be finite and nonnegative")
    return int(np.argmax(snrs))


def slot_rate(gamma_max: float) -> float:
    """Shannon rate log2(1 + gamma) of the scheduled user."""
    if gamma_max < 0:
        raise ValueError("SNR must be nonnegative")
    return math.log2(1.0 + gamma_max)


# ---------------------------------------------------------------------------
# Per-run setup (fixed user state, deterministic designs)
# ---------------------------------------------------------------------------

@dataclass
class _RunSetup:
    rs_phases: list            # per subcarrier: (K, N) table or None
    direct_phases: list        # per subcarrier: (K, 1) table or None
    sqrt_corr: Optional[np.ndarray]
    h1: Optional[np.ndarray]
    v_fixed: Optional[np.ndarray]    # applied v for the deterministic mode
    rho_r: Optional[np.ndarray] = None   # hoisted budgets (homogeneous case)
    rho_b: Optional[np.ndarray] = None


def _prepare_run(scenario: Scenario, seed: int) -> _RunSetup:
    k, l = scenario.users, scenario.subcarriers
    rs_phases: list = [None] * l
    direct_phases: list = [None] * l
    sqrt_corr = None
    h1 = None
    v_fixed = None
    if scenario.rs is not None:
        cfg = scenario.rs
        h1 = channel.los_vector(cfg)
        if isinstance(scenario.rs_fading, CorrelatedRayleigh):
            sqrt_corr = scenario.rs_fading.sqrt()
        for i in range(l):
            gen = _stream(seed, _DOM_USER_RS, i).generator()
            rs_phases[i] = channel.prepare_los_phases(
                scenario.rs_fading, k, cfg.elements, cfg.spacing, gen)
        if scenario.rs_phase_mode == "deterministic":
            if isinstance(scenario.rs_fading, CorrelatedRayleigh):
                rbar = beamforming.effective_correlation(
                    scenario.rs_fading.corr, h1)
            else:
                rbar = np.eye(cfg.elements, dtype=complex)
            design, _ = beamforming.deterministic_phase_design(rbar, cfg.beta)
            v_fixed = np.conj(design.values)
    if scenario.direct_fading is not None:
        m = scenario.bs_antennas
        for i in range(l):
            gen = _stream(seed, _DOM_USER_DIRECT, i).generator()
            direct_phases[i] = channel.prepare_los_phases(
                scenario.direct_fading, k, m, 0.5, gen)
    setup = _RunSetup(rs_phases, direct_phases, sqrt_corr, h1, v_fixed)
    if scenario.placement is None:
        setup.rho_r, setup.rho_b = scenario.rho_arrays()
    return setup


# ---------------------------------------------------------------------------
# Slot simulation
# ---------------------------------------------------------------------------

def _slot_subcarrier_snrs(scenario: Scenario, setup: _RunSetup,
                          slot: int, seed: int) -> np.ndarray:
    """SNR matrix (L, K) for one slot; shared phase schedule across L.

    Draw order per slot stream: user placement (when geometric), then the
    reflection phases, then per subcarrier the surface fading followed by
    the direct-link draws (weights before antenna fading for dumb-antenna
    OBF). The schedule law matches random_phase_schedule.
    """
    gen = _stream(seed, _DOM_SLOT, slot).generator()
    k, l = scenario.users, scenario.subcarriers
    if scenario.placement is not None:
        rho_r, rho_b = scenario.placement.sample(gen, k)
    else:
        rho_r, rho_b = setup.rho_r, setup.rho_b
    cfg = scenario.rs
    v = None
    if cfg is not None:
        if setup.v_fixed is not None:
            v = setup.v_fixed
        else:
            theta = gen.uniform(0.0, 2.0 * np.pi, cfg.elements)
            v = cfg.beta * np.exp(1j * theta)
        vh1 = v * setup.h1
        sqrt_rho_r = np.sqrt(rho_r)
    if scenario.direct_fading is not None:
        sqrt_rho_b = np.sqrt(rho_b)
    snrs = np.empty((l, k))
    m = scenario.bs_antennas
    for i in range(l):
        if cfg is not None:
            h2 = channel.sample_fading_block(
                scenario.rs_fading, k, cfg.elements, gen,
                los_phases=setup.rs_phases[i], sqrt_corr=setup.sqrt_corr)
            gains = sqrt_rho_r * (h2 @ vh1)
        else:
            gains = np.zeros(k, dtype=complex)
        if scenario.direct_fading is not None:
            hmk = channel.sample_fading_block(
                scenario.direct_fading, k, m, gen,
                los_phases=setup.direct_phases[i])
            if m == 1:
                hd = hmk[:, 0]
            else:
                weights = beamforming.bs_obf_weights(m, gen)
                hd = beamforming.bs_obf_effective_gain(weights, hmk)
            gains = gains + sqrt_rho_b * hd
        snrs[i] = gains.real ** 2 + gains.imag ** 2
    return snrs


def _slot_rate_value(scenario: Scenario, setup: _RunSetup,
                     slot: int, seed: int) -> float:
    snrs = _slot_subcarrier_snrs(scenario, setup, slot, seed)
    # the scheduled user's SNR is the row maximum (ties cannot change it)
    total = 0.0
    for i in range(snrs.shape[0]):
        total += math.log2(1.0 + snrs[i].max())
    return total


def _rate_block(scenario: Scenario, setup: _RunSetup, seed: int,
                start: int, stop: int) -> np.ndarray:
    return np.array([_slot_rate_value(scenario, setup, t, seed)
                     for t in range(start, stop)])


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def _reduce(rates: np.ndarray, n_slots: int, seed: int) -> SumRateEstimate:
    # fsum is exactly rounded, hence independent of how slots were computed
    mean = math.fsum(rates) / n_slots
    if n_slots > 1:
        var = math.fsum((r - mean) ** 2 for r in rates) / (n_slots - 1)
        stderr = math.sqrt(var / n_slots)
    else:
        stderr = 0.0
    return SumRateEstimate(mean=mean, stderr=stderr, n_slots=n_slots, seed=seed)


def _run_estimate(rate_block_fn, args, n_slots: int, seed: int,
                  n_jobs: int) -> SumRateEstimate:
    if n_slots < 1:
        raise ValueError("need at least one slot")
    if n_jobs <= 1:
        rates = rate_block_fn(*args, seed, 0, n_slots)
    else:
        bounds = np.linspace(0, n_slots, n_jobs + 1, dtype=int)
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(rate_block_fn, *args, seed, int(a), int(b))
                       for a, b in zip(bounds[:-1], bounds[1:])]
            rates = np.concatenate([f.result() for f in futures])
    return _reduce(rates, n_slots, seed)


def estimate_sum_rate(scenario: Scenario, n_slots: int, seed: int,
                      n_jobs: int = 1) -> SumRateEstimate:
    """Mean of log2(1 + max_k SNR_k) over independent slots (L = 1)."""
    if scenario.subcarriers != 1:
        raise ValueError("estimate_sum_rate expects a single-carrier scenario; "
                         "use estimate_ofdma_sum_rate")
    return estimate_ofdma_sum_rate(scenario, n_slots, seed, n_jobs)


def estimate_ofdma_sum_rate(scenario: Scenario, n_slots: int, seed: int,
                            n_jobs: int = 1) -> SumRateEstimate:
    """Per slot, schedule the best user independently on each subcarrier and
    sum the L rates."""
    setup = _prepare_run(scenario, seed)
    return _run_estimate(_rate_block, (scenario, setup), n_slots, seed, n_jobs)


# ---------------------------------------------------------------------------
# MISO pipeline
# ---------------------------------------------------------------------------

def _miso_constants(scenario: Scenario, angles: Optional[np.ndarray]):
    """(sqrt_R, zeta) for fixed angles, or None when angles are per-slot."""
    if angles is None:
        return None
    cfg = scenario.rs
    h1m = channel.los_matrix(scenario.bs_antennas, cfg.elements, angles)
    corr = h1m @ h1m.conj().T / cfg.elements
    return _miso_from_corr(corr)


def _miso_from_corr(corr: np.ndarray):
    w, u = hermitian_eig(corr)
    w = np.clip(w, 0.0, None)
    sqrt_r = (u * np.sqrt(w)) @ u.conj().T
    pos = w[w > 1e-12 * max(w[0], 1.0)]
    zeta = corr.shape[0] / float(np.sum(1.0 / pos)) if pos.size == corr.shape[0] else 0.0
    return sqrt_r, zeta


def _miso_rate_block(scenario: Scenario, whitening: bool, seed: int,
                     start: int, stop: int) -> np.ndarray:
    cfg = scenario.rs
    k, m, n = scenario.users, scenario.bs_antennas, cfg.elements
    rho = float(np.asarray(scenario.rho_r, dtype=float))
    beta = cfg.beta
    consts = _miso_constants(scenario, scenario.miso_angles)
    rates = np.empty(stop - start)
    for idx, t in enumerate(range(start, stop)):
        gen = _stream(seed, _DOM_SLOT, t).generator()
        if consts is None:
            ang = gen.uniform(0.0, 2.0 * np.pi, n)
            h1m = channel.los_matrix(m, n, ang)
            sqrt_r, zeta = _miso_from_corr(h1m @ h1m.conj().T / n)
        else:
            sqrt_r, zeta = consts
        z = complex_gaussian_block((k, m), gen)
        if whitening:
            if zeta == 0.0:
                raise ValueError("whitening requires a non-singular "
                                 "LoS correlation matrix")
            snrs = zeta * rho * beta ** 2 * n * np.sum(np.abs(z) ** 2, axis=1)
        else:
            h = np.sqrt(rho * n) * beta * (z @ sqrt_r.T)
            snrs = np.sum(np.abs(h) ** 2, axis=1)
        if scenario.power == "total":
            snrs = snrs / m
        rates[idx] = slot_rate(snrs[schedule_slot(snrs)])
    return rates


def estimate_miso_sum_rate(scenario: Scenario, n_slots: int, seed: int,
                           whitening: bool = False,
                           n_jobs: int = 1) -> SumRateEstimate:
    """Sum rate of the M-antenna downlink over the surface-assisted link.

    The fed-back SNR is ||h_k||^2 for the true correlated channel
    h_k = sqrt(rho_R N) beta R^{1/2} z_k (default), or the whitened form
    zeta rho_R beta^2 N ||z_k||^2 with zeta = M / trace(R^{-1}) when
    ``whitening`` is set. Under the total-power convention (P = 1 instead
    of per-antenna unit power) every SNR is divided by M. LoS angles are
    redrawn each slot unless ``scenario.miso_angles`` pins them.
    """
    if scenario.rs is None:
        raise ValueError("the MISO pipeline models the surface-assisted link")
    if scenario.rs_fading != Rayleigh():
        raise ValueError("the MISO pipeline is defined for Rayleigh fading")
    if scenario.subcarriers != 1:
        raise ValueError("the MISO pipeline is single-carrier")
    if np.ndim(scenario.rho_r) != 0:
        raise ValueError("the MISO pipeline expects a homogeneous rho_r")
    return _run_estimate(_miso_rate_block, (scenario, whitening),
                         n_slots, seed, n_jobs)
