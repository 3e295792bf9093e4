"""Special functions, Hermitian matrix helpers and the RNG stream contract.

Everything in this module is pure: results depend only on the arguments.
Random draws are obtained through :class:`RngStream`, a counter-based
(Philox) stream keyed by ``(seed, stream)`` so that any worker can
regenerate exactly the same draws regardless of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

EULER_GAMMA = 0.5772156649015329

_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# RNG streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream)``.

    Distinct stream indices give statistically independent Philox streams;
    the same pair always reproduces the same draws, which is what makes
    parallel Monte-Carlo runs bit-identical to serial ones.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream & _MASK64],
                       dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.seed, (self.stream + index) & _MASK64)


def as_generator(rng) -> np.random.Generator:
    """Accept either an RngStream or a ready numpy Generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def sample_standard_complex_gaussian(dim: int, rng) -> np.ndarray:
    """Draw a length-``dim`` circularly symmetric CN(0, 1) vector.

    Real and imaginary parts are independent N(0, 1/2) so E|z_i|^2 = 1.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    gen = as_generator(rng)
    z = gen.standard_normal(2 * dim)
    return (z[:dim] + 1j * z[dim:]) / np.sqrt(2.0)


def complex_gaussian_block(shape, gen: np.random.Generator) -> np.ndarray:
    """CN(0,1) array of the given shape (vectorised helper)."""
    re = gen.standard_normal(shape)
    im = gen.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Exponential integral  Gamma(0, x) = E1(x)
# ---------------------------------------------------------------------------

def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x + sum_{n>=1} (-1)^{n+1} x^n / (n n!)   (x < 1)
    total = 0.0
    term = 1.0
    for n in range(1, 80):
        term *= -x / n
        add = -term / n
        total += add
        if abs(add) <= 1e-17 * max(abs(total), 1e-300):
            break
    return -EULER_GAMMA - math.log(x) + total

def _e1_scaled_cf(x: float) -> float:
    # e^x E1(x) = 1/(x+1 - 1^2/(x+3 - 2^2/(x+5 - ...)))  via modified Lentz
    tiny = 1e-300
    f = tiny
    c, d = f, 0.0
    for n in range(1, 300):
        a = 1.0 if n == 1 else -float((n - 1) * (n - 1))
        b = x + (2 * n - 1)
        d = b + a * d
        if d == 0.0:
            d = tiny
        c = b + a / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return f


def gamma0_upper_scaled(x: float) -> float:
    """e^x * Gamma(0, x), stable for large x (never overflows)."""
    x = float(x)
    if x <= 0.0:
        raise ValueError("gamma0_upper requires x > 0")
    if x < 1.0:
        return math.exp(x) * _e1_series(x)
    return _e1_scaled_cf(x)


def gamma0_upper(x: float) -> float:
    """Upper incomplete gamma Gamma(0, x) = E1(x) for x > 0.

    Power series below x = 1, continued fraction above; relative error is
    at machine precision over [1e-6, 700].
    """
    x = float(x)
    if x <= 0.0:
        raise ValueError("gamma0_upper requires x > 0")
    if x < 1.0:
        return _e1_series(x)
    return _e1_scaled_cf(x) * math.exp(-x)


# ---------------------------------------------------------------------------
# Modified Bessel functions of the first kind
# ---------------------------------------------------------------------------

def bessel_i_scaled(m: int, x) -> np.ndarray | float:
    """e^{-x} I_m(x) for x >= 0 (overflow-free form)."""
    if m < 0:
        raise ValueError("order must be a nonnegative integer")
    if np.any(np.asarray(x) < 0):
        raise ValueError("bessel_i requires x >= 0")
    return special.ive(m, x)


def bessel_i(m: int, x) -> np.ndarray | float:
    """Modified Bessel function I_m(x), x >= 0."""
    return bessel_i_scaled(m, x) * np.exp(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# Scaled noncentral chi-square with 2 degrees of freedom
# ---------------------------------------------------------------------------
#
# X = scale * |nu + w|^2 with w ~ CN(0, 1) and |nu|^2 = s2. For s2 = 0 this
# is exponential with the given mean ``scale``; generally the mean is
# scale * (1 + s2).

def _check_ncx2_args(x, s2: float, scale: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    if s2 < 0:
        raise ValueError("noncentrality must be nonnegative")
    if scale <= 0:
        raise ValueError("scale must be positive")
    return x


def noncentral_chi2_2dof(x, s2: float, scale: float):
    """pdf and cdf of the scaled noncentral chi^2 with 2 dof.

    pdf(x) = (1/scale) exp(-(s2 + x/scale)) I0(2 sqrt(s2 x / scale))
    cdf(x) = sum_j Pois(j; s2) * P(j+1, x/scale)

    where P is the regularised lower incomplete gamma (a Poisson mixture of
    Erlang distributions, numerically robust since all terms are positive).
    Both accept array ``x``.
    """
    x = _check_ncx2_args(x, s2, scale)
    z = x / scale
    # pdf in exponentially-scaled form to survive large arguments
    pdf = np.exp(ncx2_log_pdf(x, s2, scale))
    if s2 == 0.0:
        cdf = -np.expm1(-z)
        return pdf, cdf
    # Poisson weights around j ~ s2
    j_hi = int(s2 + 12.0 * math.sqrt(s2) + 40)
    j = np.arange(0, j_hi + 1)
    logw = -s2 + j * math.log(s2) - special.gammaln(j + 1)
    w = np.exp(logw)
    cdf = np.zeros_like(z)
    for jj, wj in zip(j, w):
        if wj < 1e-18:
            continue
        cdf += wj * special.gammainc(jj + 1, z)
    return pdf, np.clip(cdf, 0.0, 1.0)


def ncx2_log_pdf(x, s2: float, scale: float) -> np.ndarray:
    """log pdf of the scaled noncentral chi^2(2); usable far in the tail."""
    x = _check_ncx2_args(x, s2, scale)
    z = x / scale
    tau = 2.0 * np.sqrt(s2 * z)
    # exp(-(s2+z)) I0(tau) = exp(-(sqrt z - sqrt s2)^2) * ive(0, tau)
    return (-(np.sqrt(z) - math.sqrt(s2)) ** 2
            + np.log(special.ive(0, tau)) - math.log(scale))


def ncx2_log_sf(x, s2: float, scale: float, max_terms: int = 400) -> np.ndarray:
    """log of the survival function 1 - cdf, usable far in the tail.

    Uses the Marcum-Q series 1-F = exp(-(s2+z)) sum_m r^m I_m(tau) with
    r = sqrt(s2/z), written with scaled Bessel terms so only the single
    factor exp(-(sqrt z - sqrt s2)^2) carries the decay.
    """
    x = _check_ncx2_args(x, s2, scale)
    scalar = x.ndim == 0
    z = np.atleast_1d(x / scale)
    out = np.empty_like(z)
    for i, zi in enumerate(z):
        if zi == 0.0:
            out[i] = 0.0
            continue
        if s2 == 0.0:
            out[i] = -zi
            continue
        tau = 2.0 * math.sqrt(s2 * zi)
        r = math.sqrt(s2 / zi)
        total = 0.0
        rm = 1.0
        for m in range(max_terms):
            t = rm * special.ive(m, tau)
            total += t
            rm *= r
            if m > 4 and t < 1e-18 * total:
                break
        out[i] = -(math.sqrt(zi) - math.sqrt(s2)) ** 2 + math.log(total)
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# Hermitian matrix operations
# ---------------------------------------------------------------------------

def _require_hermitian(a: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(np.linalg.norm(a), 1e-300)
    if np.linalg.norm(a - a.conj().T) > rtol * scale * 10:
        raise ValueError("matrix is not Hermitian")
    return a


def hermitian_eig(a: np.ndarray):
    """Eigendecomposition A = U diag(w) U^H with eigenvalues sorted descending."""
    a = _require_hermitian(a)
    w, u = np.linalg.eigh(a)
    order = np.argsort(w)[::-1]
    return w[order].real, u[:, order]


def hermitian_sqrt(r: np.ndarray, clamp: float = 1e-12) -> np.ndarray:
    """Hermitian PSD square root S with S @ S = R.

    Eigenvalues below -clamp (relative to the largest) raise; tiny negative
    values from roundoff are clamped to zero.
    """
    w, u = hermitian_eig(r)
    scale = max(abs(w[0]), 1.0)
    if w[-1] < -clamp * scale:
        raise ValueError(
            f"matrix is not positive semi-definite (min eigenvalue {w[-1]:.3e})")
    w = np.clip(w, 0.0, None)
    s = (u * np.sqrt(w)) @ u.conj().T
    return (s + s.conj().T) / 2.0


def is_correlation_matrix(r: np.ndarray, n: int, rtol: float = 1e-9) -> bool:
    """Hermitian PSD with trace equal to its dimension (trace normalisation)."""
    r = np.asarray(r, dtype=complex)
    if r.shape != (n, n):
        return False
    try:
        w, _ = hermitian_eig(r)
    except ValueError:
        return False
    if w[-1] < -1e-10 * max(abs(w[0]), 1.0):
        return False
    return abs(np.trace(r).real - n) <= rtol * n
