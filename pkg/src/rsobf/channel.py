"""Channel generation: LoS components, fading laws and composite gains.

The composite downlink gain for user k in one slot is

    h_k = sqrt(rho_R) * v^T diag(h1) h2_k  +  sqrt(rho_B) * h_d,k

where h1 is the static unit-modulus LoS vector to the surface, v the
per-slot reflection phase vector (amplitude beta per element), h2_k the
surface-to-user fading vector and h_d,k the direct-link fading scalar.
Four fading families are supported for h2_k: independent Rayleigh,
independent Rician, correlated Rayleigh (common correlation matrix) and
fully correlated (rank-one, per-user LoS angle).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .numerics import (RngStream, as_generator, complex_gaussian_block,
                       hermitian_sqrt, is_correlation_matrix)


# ---------------------------------------------------------------------------
# Configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RsConfig:
    """Reconfigurable-surface geometry: N elements, reflection amplitude
    beta, normalised spacing d and per-element LoS angles (radians) on the
    BS side. A scalar angle means a uniform linear array facing the BS."""

    elements: int
    beta: float = 1.0
    spacing: float = 0.5
    los_angles: Union[float, np.ndarray] = 0.0

    def __post_init__(self):
        if self.elements < 1:
            raise ValueError("element count must be >= 1")
        if not (0.0 < self.beta <= 1.0):
            raise ValueError("reflection amplitude must lie in (0, 1]")
        angles = np.atleast_1d(np.asarray(self.los_angles, dtype=float))
        if angles.size not in (1, self.elements):
            raise ValueError("los_angles must be scalar or length N")

    @property
    def angle_array(self) -> np.ndarray:
        a = np.atleast_1d(np.asarray(self.los_angles, dtype=float))
        if a.size == 1:
            a = np.full(self.elements, a[0])
        return a


@dataclass(frozen=True)
class Rayleigh:
    """h2 ~ CN(0, I_N); unit energy per element."""


@dataclass(frozen=True)
class Rician:
    """h2 = sqrt(a) e^{j phi} + b,  b ~ CN(0, u I_N), a = k/(1+k), u = 1/(1+k).

    ``los_phases`` optionally pins the per-element LoS phases; when omitted
    they are drawn uniform once per user and held fixed across slots.
    ``kappa = inf`` gives a pure LoS (non-fading) channel.
    """

    kappa: float
    los_phases: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.kappa >= 0.0):
            raise ValueError("kappa must be nonnegative")

    @property
    def los_energy(self) -> float:
        return 1.0 if np.isinf(self.kappa) else self.kappa / (1.0 + self.kappa)

    @property
    def diffuse_energy(self) -> float:
        return 0.0 if np.isinf(self.kappa) else 1.0 / (1.0 + self.kappa)


@dataclass(frozen=True)
class CorrelatedRayleigh:
    """h2 = R^{1/2} b with b ~ CN(0, I_N); R Hermitian PSD, trace N."""

    corr: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.corr, dtype=complex)
        object.__setattr__(self, "corr", r)
        if not is_correlation_matrix(r, r.shape[0]):
            raise ValueError("corr must be Hermitian PSD with trace N")

    def sqrt(self) -> np.ndarray:
        return hermitian_sqrt(self.corr)


@dataclass(frozen=True)
class FullyCorrelated:
    """h2 = l e^{j phi} with scalar Rayleigh l (E|l|^2 = 1) and constant
    phases phi_n = 2 pi d (n-1) sin(phi0) set by the user's LoS angle."""

    los_angles: Optional[np.ndarray] = None  # per-user phi0 (radians)


FadingSpec = Union[Rayleigh, Rician, CorrelatedRayleigh, FullyCorrelated]

SCALAR_FAMILIES = (Rayleigh, Rician)


@dataclass
class SlotRealization:
    """Per-user composite gains and SNRs for one coherence slot."""

    gains: np.ndarray          # (K,) complex, or (K, M) for MISO vectors
    snrs: np.ndarray           # (K,) nonnegative
    slot: int = 0

    @classmethod
    def from_gains(cls, gains: np.ndarray, slot: int = 0) -> "SlotRealization":
        gains = np.asarray(gains)
        snrs = np.abs(gains) ** 2
        if snrs.ndim == 2:
            snrs = snrs.sum(axis=1)
        return cls(gains=gains, snrs=snrs, slot=slot)


# ---------------------------------------------------------------------------
# LoS components
# ---------------------------------------------------------------------------

def los_vector(cfg: RsConfig) -> np.ndarray:
    """Static BS-to-surface LoS vector, h1_n = e^{j 2 pi (n-1) d sin(theta_n)}."""
    n = np.arange(cfg.elements)
    phase = 2.0 * np.pi * n * cfg.spacing * np.sin(cfg.angle_array)
    return np.exp(1j * phase)


def los_matrix(m: int, n: int, angles=None, rng=None) -> np.ndarray:
    """M x N LoS matrix with entries e^{j 2 pi (m-1) sin(theta'_n)}.

    ``angles`` may be a length-N array; if omitted they are drawn uniform
    on [0, 2 pi) from ``rng``. The implied correlation (1/N) H1 H1^H has
    trace exactly M because every entry has unit modulus.
    """
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be >= 1")
    if angles is None:
        if rng is None:
            raise ValueError("need angles or an rng to draw them")
        angles = as_generator(rng).uniform(0.0, 2.0 * np.pi, n)
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (n,):
        raise ValueError("angles must have length N")
    rows = np.arange(m)[:, None]
    return np.exp(1j * 2.0 * np.pi * rows * np.sin(angles)[None, :])


# ---------------------------------------------------------------------------
# Fading draws
# ---------------------------------------------------------------------------

def prepare_los_phases(spec: FadingSpec, n_users: int, n_elements: int,
                       spacing: float, rng) -> Optional[np.ndarray]:
    """Per-user fixed phase table (K, N) for specs that carry one.

    Rician: uniform per user and element unless pinned on the spec.
    Fully correlated: phi_{n,k} = 2 pi d (n-1) sin(phi0_k), with the LoS
    angles phi0_k drawn uniform when not supplied.
    Returns None for families without fixed per-user phases.
    """
    if isinstance(spec, Rician):
        if spec.los_phases is not None:
            ph = np.asarray(spec.los_phases, dtype=float)
            if ph.shape != (n_users, n_elements):
                raise ValueError("los_phases must have shape (K, N)")
            return ph
        return as_generator(rng).uniform(0.0, 2.0 * np.pi,
                                         (n_users, n_elements))
    if isinstance(spec, FullyCorrelated):
        if spec.los_angles is not None:
            phi0 = np.asarray(spec.los_angles, dtype=float)
            if phi0.shape != (n_users,):
                raise ValueError("los_angles must have shape (K,)")
        else:
            phi0 = as_generator(rng).uniform(0.0, 2.0 * np.pi, n_users)
        n = np.arange(n_elements)[None, :]
        return 2.0 * np.pi * spacing * n * np.sin(phi0)[:, None]
    return None


def sample_fading_block(spec: FadingSpec, n_users: int, n_elements: int,
                        gen: np.random.Generator,
                        los_phases: Optional[np.ndarray] = None,
                        sqrt_corr: Optional[np.ndarray] = None) -> np.ndarray:
    """One slot of h2 draws for all users, shape (K, N).

    ``los_phases`` is the fixed table from :func:`prepare_los_phases`;
    ``sqrt_corr`` caches R^{1/2} for the correlated family.
    """
    shape = (n_users, n_elements)
    if isinstance(spec, Rayleigh):
        return complex_gaussian_block(shape, gen)
    if isinstance(spec, Rician):
        if los_phases is None:
            raise ValueError("Rician sampling needs the per-user phase table")
        fixed = np.sqrt(spec.los_energy) * np.exp(1j * los_phases)
        if spec.diffuse_energy == 0.0:
            return fixed + 0j
        return fixed + np.sqrt(spec.diffuse_energy) * complex_gaussian_block(shape, gen)
    if isinstance(spec, CorrelatedRayleigh):
        s = spec.sqrt() if sqrt_corr is None else sqrt_corr
        b = complex_gaussian_block(shape, gen)
        return b @ s.T          # rows are users: (S @ b_k) for each k
    if isinstance(spec, FullyCorrelated):
        if los_phases is None:
            raise ValueError("fully correlated sampling needs the phase table")
        l = complex_gaussian_block((n_users,), gen)
        return l[:, None] * np.exp(1j * los_phases)
    raise TypeError(f"unknown fading spec {spec!r}")


def sample_user_fading(spec: FadingSpec, n_elements: int, rng) -> np.ndarray:
    """One draw of a single user's h2 vector (spec-level convenience).

    Per-user phases not pinned on the spec are drawn fresh from ``rng``
    before the fading draw.
    """
    gen = as_generator(rng)
    if isinstance(spec, Rician) and spec.los_phases is not None:
        ph = np.asarray(spec.los_phases, dtype=float).reshape(1, -1)
        if ph.shape[1] != n_elements:
            raise ValueError("los_phases length must match N")
        phases = ph
    elif isinstance(spec, (Rician, FullyCorrelated)):
        single = spec
        if isinstance(spec, FullyCorrelated) and spec.los_angles is not None:
            single = FullyCorrelated(np.asarray(spec.los_angles)[:1])
        phases = prepare_los_phases(single, 1, n_elements, 0.5, gen)
    else:
        phases = None
    if isinstance(spec, CorrelatedRayleigh) and spec.corr.shape[0] != n_elements:
        raise ValueError("correlation matrix size must match N")
    block = sample_fading_block(spec, 1, n_elements, gen, los_phases=phases)
    return block[0]


# ---------------------------------------------------------------------------
# Gain composition
# ---------------------------------------------------------------------------

def cascade_gain(rho_r, h1: np.ndarray, v: np.ndarray, h2: np.ndarray):
    """Surface-assisted gain sqrt(rho_R) * sum_n v_n h1_n h2_n.

    Broadcasts over leading axes of ``v`` and ``h2`` (users, slots), so a
    (K, N) block of fading vectors yields (K,) gains.
    """
    h1 = np.asarray(h1)
    v = np.asarray(v)
    h2 = np.asarray(h2)
    if h1.shape[-1] != v.shape[-1] or h1.shape[-1] != h2.shape[-1]:
        raise ValueError("h1, v and h2 must share the element dimension")
    return np.sqrt(rho_r) * np.sum(v * h1 * h2, axis=-1)


def composite_gain(cascade, rho_b, h_d):
    """Superpose the direct link: cascade + sqrt(rho_B) * h_d."""
    return cascade + np.sqrt(rho_b) * h_d


def miso_rs_channel(rho_r, n_elements: int, beta: float, corr: np.ndarray,
                    rng) -> np.ndarray:
    """Surface-assisted MISO vector h = sqrt(rho_R N) beta R^{1/2} z.

    ``corr`` is the M x M matrix (1/N) H1 H1^H; the result has covariance
    rho_R beta^2 N R.
    """
    s = hermitian_sqrt(corr)
    m = s.shape[0]
    gen = as_generator(rng)
    z = complex_gaussian_block((m,), gen)
    return np.sqrt(rho_r * n_elements) * beta * (s @ z)


def wideband_slot(subcarriers: int, cfg: Optional[RsConfig],
                  rs_spec: FadingSpec, direct_spec: Optional[FadingSpec],
                  rho_r, rho_b, n_users: int, rng, *,
                  phase_vector: Optional[np.ndarray] = None,
                  user_phases: Optional[np.ndarray] = None,
                  direct_phases: Optional[np.ndarray] = None,
                  slot: int = 0) -> list[SlotRealization]:
    """One coherence slot of an L-subcarrier system.

    All subcarriers share the same reflection phase schedule (drawn here
    unless ``phase_vector`` pins it) while fading is independent across
    subcarriers. Returns one realization per subcarrier.
    """
    if subcarriers < 1:
        raise ValueError("subcarrier count must be >= 1")
    gen = as_generator(rng)
    h1 = los_vector(cfg) if cfg is not None else None
    v = phase_vector
    if cfg is not None and v is None:
        theta = gen.uniform(0.0, 2.0 * np.pi, cfg.elements)
        v = cfg.beta * np.exp(1j * theta)
    if user_phases is None and cfg is not None:
        user_phases = prepare_los_phases(rs_spec, n_users, cfg.elements,
                                         cfg.spacing, gen)
    if direct_phases is None and isinstance(direct_spec, Rician):
        direct_phases = prepare_los_phases(direct_spec, n_users, 1, 0.5, gen)

    sqrt_corr = rs_spec.sqrt() if isinstance(rs_spec, CorrelatedRayleigh) else None
    out = []
    for _ in range(subcarriers):
        if cfg is not None:
            h2 = sample_fading_block(rs_spec, n_users, cfg.elements, gen,
                                     los_phases=user_phases,
                                     sqrt_corr=sqrt_corr)
            gains = cascade_gain(rho_r, h1, v, h2)
        else:
            gains = np.zeros(n_users, dtype=complex)
        if direct_spec is not None:
            hd = sample_fading_block(direct_spec, n_users, 1, gen,
                                     los_phases=direct_phases)[:, 0]
            gains = composite_gain(gains, rho_b, hd)
        out.append(SlotRealization.from_gains(gains, slot=slot))
    return out
