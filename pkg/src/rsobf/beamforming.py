"""Per-slot control variables: reflection phase schedules, dumb-antenna
weights and the MISO whitening transform.

The reflection vector v(t) enters the cascade as v^T diag(h1) h2; its
conjugate vbar = conj(v) is the quantity the deterministic design of the
correlated-fading scheme optimises (the conditional SNR mean is
rho_R * vbar^H Rbar vbar).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import as_generator, hermitian_eig


def linear_array_phases(angle: float, count: int, spacing: float) -> np.ndarray:
    """Uniform linear-array offsets r(angle, m) = 2 pi d (m-1) sin(angle)."""
    return 2.0 * np.pi * spacing * np.arange(count) * np.sin(angle)


@dataclass(frozen=True)
class PhaseVector:
    """Reflection coefficients v_n = beta e^{j theta_n}, |v_n| = beta exactly."""

    values: np.ndarray
    beta: float

    @classmethod
    def from_phases(cls, phases: np.ndarray, beta: float) -> "PhaseVector":
        return cls(values=beta * np.exp(1j * np.asarray(phases, dtype=float)),
                   beta=beta)

    def conjugate(self) -> "PhaseVector":
        return PhaseVector(values=np.conj(self.values), beta=self.beta)


@dataclass(frozen=True)
class BsObfWeights:
    """Dumb-antenna gains: power fractions alpha (sum exactly 1) and phases."""

    alpha: np.ndarray
    theta: np.ndarray


@dataclass(frozen=True)
class WhiteningTransform:
    """W = sqrt(zeta) R^{-1/2} with zeta = M / trace(R^{-1})."""

    matrix: np.ndarray
    zeta: float


def random_phase_schedule(n: int, beta: float, rng) -> PhaseVector:
    """Fresh uniform phases on [0, 2 pi) for every element."""
    if n < 1:
        raise ValueError("need at least one element")
    theta = as_generator(rng).uniform(0.0, 2.0 * np.pi, n)
    return PhaseVector.from_phases(theta, beta)


def bs_obf_weights(m: int, rng) -> BsObfWeights:
    """Random power split (flat Dirichlet) and uniform phases for M antennas."""
    if m < 1:
        raise ValueError("need at least one antenna")
    gen = as_generator(rng)
    alpha = gen.dirichlet(np.ones(m))
    alpha = alpha / alpha.sum()      # renormalise so the sum is exactly 1
    theta = gen.uniform(0.0, 2.0 * np.pi, m)
    return BsObfWeights(alpha=alpha, theta=theta)


def bs_obf_effective_gain(weights: BsObfWeights, h_mk: np.ndarray):
    """Overall gain sum_m sqrt(alpha_m) e^{j theta_m} h_mk (broadcasts users)."""
    w = np.sqrt(weights.alpha) * np.exp(1j * weights.theta)
    return np.sum(w * h_mk, axis=-1)


def aligned_bs_phases(theta0: float, m: int, spacing: float = 0.5) -> np.ndarray:
    """Fully-correlated OBF schedule theta_m = -theta0 - r(theta0, m) for a
    uniform linear array."""
    return -theta0 - linear_array_phases(theta0, m, spacing)


def effective_correlation(corr: np.ndarray, h1: np.ndarray) -> np.ndarray:
    """Rbar = diag(h1) R diag(h1^H); unitarily similar to R, same trace."""
    h1 = np.asarray(h1)
    corr = np.asarray(corr, dtype=complex)
    if corr.shape != (h1.size, h1.size):
        raise ValueError("dimension mismatch between R and h1")
    rbar = (h1[:, None] * corr) * np.conj(h1)[None, :]
    return (rbar + rbar.conj().T) / 2.0


def deterministic_phase_design(rbar: np.ndarray, beta: float):
    """Phase-only design vbar = beta e^{j angle(u_max)} for a slowly varying
    effective correlation Rbar.

    Returns ``(design, achieved)`` where ``design.values`` is vbar (its
    conjugate is the vector applied in the cascade) and ``achieved`` is the
    quadratic form vbar^H Rbar vbar. Entries of u_max that are exactly zero
    get phase 0; the global phase is fixed by making the largest-magnitude
    entry real-positive so the design is deterministic.
    """
    w, u = hermitian_eig(rbar)
    if w[-1] < -1e-10 * max(abs(w[0]), 1.0):
        raise ValueError("Rbar must be positive semi-definite")
    umax = u[:, 0]
    pivot = int(np.argmax(np.abs(umax)))
    ref = umax[pivot]
    umax = umax * np.conj(ref) / abs(ref)
    phases = np.where(np.abs(umax) > 0.0, np.angle(umax), 0.0)
    design = PhaseVector.from_phases(phases, beta)
    vbar = design.values
    achieved = float(np.real(vbar.conj() @ (rbar @ vbar)))
    return design, achieved


def whitening_transform(corr: np.ndarray, m: int) -> WhiteningTransform:
    """Whitening for the correlated MISO downlink.

    W = sqrt(zeta) R^{-1/2} with zeta = M / trace(R^{-1}) chosen so the
    transmit power constraint E[x^H x] = M holds (trace(W W^H) = M).
    """
    corr = np.asarray(corr, dtype=complex)
    if corr.shape != (m, m):
        raise ValueError("R must be M x M")
    w, u = hermitian_eig(corr)
    if w[-1] <= 1e-12 * max(abs(w[0]), 1.0):
        raise ValueError(
            "whitening requires a non-singular correlation matrix "
            f"(eigenvalues range [{w[-1]:.3e}, {w[0]:.3e}])")
    zeta = m / float(np.sum(1.0 / w))
    inv_sqrt = (u / np.sqrt(w)) @ u.conj().T
    return WhiteningTransform(matrix=np.sqrt(zeta) * inv_sqrt, zeta=zeta)
