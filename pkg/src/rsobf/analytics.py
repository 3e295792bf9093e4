"""Exact finite-K sum-capacity formulas, extreme-value machinery and the
large-K scaling laws, used to cross-validate the Monte-Carlo estimators.

Scaling-law conventions: ``log K`` is the natural logarithm (this choice
is fixed by the analytic figure data, e.g. log2(1 + ln 256) = 2.7104323),
O(log log K) correction terms are dropped, and K = 1 evaluates the fixed
component only (ln 1 = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special

from .numerics import (gamma0_upper_scaled, ncx2_log_pdf, ncx2_log_sf,
                       noncentral_chi2_2dof)

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# SNR distribution descriptors
# ---------------------------------------------------------------------------

@dataclass
class SnrDistribution:
    """A nonnegative SNR law: vectorised cdf/pdf plus optional log-tail
    forms (needed to probe growth functions far beyond double range)."""

    cdf: Callable[[np.ndarray], np.ndarray]
    pdf: Callable[[np.ndarray], np.ndarray]
    mean: float
    label: str = ""
    log_sf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    log_pdf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    point_mass: Optional[float] = None


def exponential_snr(mean: float, label: str = "") -> SnrDistribution:
    if mean <= 0:
        raise ValueError("mean must be positive")
    return SnrDistribution(
        cdf=lambda x: -np.expm1(-np.asarray(x, dtype=float) / mean),
        pdf=lambda x: np.exp(-np.asarray(x, dtype=float) / mean) / mean,
        mean=mean,
        label=label or f"exponential(mean={mean:g})",
        log_sf=lambda x: -np.asarray(x, dtype=float) / mean,
        log_pdf=lambda x: -np.asarray(x, dtype=float) / mean - math.log(mean),
    )


def chi2_scaled_snr(m: int, scale: float, label: str = "") -> SnrDistribution:
    """SNR = scale * ||z||^2 with z ~ CN(0, I_M): a Gamma(M, scale) law,
    i.e. (scale/2) chi^2(2M)."""
    if m < 1 or scale <= 0:
        raise ValueError("need m >= 1 and positive scale")

    def cdf(x):
        return special.gammainc(m, np.asarray(x, dtype=float) / scale)

    def pdf(x):
        z = np.asarray(x, dtype=float) / scale
        return np.exp(special.xlogy(m - 1, z) - z
                      - special.gammaln(m)) / scale

    def log_sf(x):
        z = np.asarray(x, dtype=float) / scale
        with np.errstate(divide="ignore"):
            return np.log(special.gammaincc(m, z))

    def log_pdf(x):
        z = np.asarray(x, dtype=float) / scale
        return (special.xlogy(m - 1, z) - z - special.gammaln(m)
                - math.log(scale))

    # gammaincc underflows around z ~ 700; fall back to the asymptotic
    # log-tail log(sf) ~ (m-1) log z - z - lgamma(m) there.
    def log_sf_robust(x):
        out = log_sf(x)
        z = np.asarray(x, dtype=float) / scale
        bad = ~np.isfinite(out)
        if np.any(bad):
            zb = np.atleast_1d(z)[np.atleast_1d(bad)]
            tail = special.xlogy(m - 1, zb) - zb - special.gammaln(m) \
                + np.log1p((m - 1) / np.maximum(zb, 1.0))
            if np.ndim(out) == 0:
                return tail[0]
            out = np.array(out)
            out[np.atleast_1d(bad)] = tail
        return out

    return SnrDistribution(cdf=cdf, pdf=pdf, mean=m * scale,
                           label=label or f"chi2(2*{m})*{scale:g}/2",
                           log_sf=log_sf_robust, log_pdf=log_pdf)


def noncentral_chi2_snr(s2: float, scale: float,
                        label: str = "") -> SnrDistribution:
    """Scaled noncentral chi^2(2): SNR = scale * |nu + w|^2, |nu|^2 = s2."""
    return SnrDistribution(
        cdf=lambda x: noncentral_chi2_2dof(x, s2, scale)[1],
        pdf=lambda x: noncentral_chi2_2dof(x, s2, scale)[0],
        mean=scale * (1.0 + s2),
        label=label or f"ncx2(s2={s2:g}, scale={scale:g})",
        log_sf=lambda x: ncx2_log_sf(x, s2, scale),
        log_pdf=lambda x: ncx2_log_pdf(x, s2, scale),
    )


def rician_cascade_snr(n: int, beta: float, a: float, u: float,
                       rho_r: float, delta: float = 0.0) -> SnrDistribution:
    """SNR law of the cascade when the surface is in (or delta-close to)
    the beamforming configuration of the user's LoS component.

    Noncentral chi^2(2) with noncentrality (N beta sqrt(a) - delta)^2 and
    diffuse variance N beta^2 u, both scaled by rho_R.
    """
    up = n * beta ** 2 * u
    lam = (n * beta * math.sqrt(a) - delta) ** 2
    if up <= 0:
        raise ValueError("needs a nonzero diffuse component")
    return noncentral_chi2_snr(lam / up, rho_r * up,
                               label=f"rician-cascade(N={n})")


def degenerate_snr(value: float) -> SnrDistribution:
    """Point mass (non-fading channel)."""
    def cdf(x):
        return (np.asarray(x, dtype=float) >= value).astype(float)
    return SnrDistribution(cdf=cdf, pdf=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                           mean=value, label=f"degenerate({value:g})",
                           point_mass=value)


# ---------------------------------------------------------------------------
# Order statistics and exact sum-capacity
# ---------------------------------------------------------------------------

def order_stat_max(dist: SnrDistribution, k: int) -> SnrDistribution:
    """Distribution of the maximum of K i.i.d. draws: cdf F^K, pdf K f F^{K-1}."""
    if k < 1:
        raise ValueError("K must be >= 1")
    if k == 1:
        return dist

    def cdf(x):
        return dist.cdf(x) ** k

    def pdf(x):
        return k * dist.pdf(x) * dist.cdf(x) ** (k - 1)

    return SnrDistribution(cdf=cdf, pdf=pdf, mean=float("nan"),
                           label=f"max{k}[{dist.label}]",
                           point_mass=dist.point_mass)


def quantile(dist: SnrDistribution, p: float) -> float:
    """Inverse cdf by bracketed root finding (1e-10 relative)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    hi = max(dist.mean, 1.0)
    for _ in range(200):
        if dist.cdf(hi) > p:
            break
        hi *= 2.0
    else:
        raise RuntimeError("failed to bracket the quantile")
    return float(optimize.brentq(lambda x: dist.cdf(x) - p, 0.0, hi,
                                 xtol=1e-300, rtol=1e-12, maxiter=300))


def sum_capacity_integral(dist: SnrDistribution, k: int) -> float:
    """E[log2(1 + max of K i.i.d. SNRs)] by adaptive quadrature (abs err <= 1e-8)."""
    if k < 1:
        raise ValueError("K must be >= 1")
    if dist.point_mass is not None:
        return math.log2(1.0 + dist.point_mass)
    anchor = quantile(dist, 1.0 - 1.0 / k) if k >= 2 else dist.mean

    def integrand(x):
        f = dist.pdf(x)
        if f == 0.0:
            return 0.0
        return math.log1p(x) / LN2 * k * f * dist.cdf(x) ** (k - 1)

    pieces = [0.0, 0.5 * anchor, anchor, 2.0 * anchor, 4.0 * anchor]
    total, err_total = 0.0, 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        val, err = integrate.quad(integrand, a, b, epsabs=1e-11,
                                  epsrel=1e-11, limit=300)
        total += val
        err_total += err
    val, err = integrate.quad(integrand, pieces[-1], np.inf,
                              epsabs=1e-11, epsrel=1e-11, limit=300)
    total += val
    err_total += err
    if not math.isfinite(total) or err_total > 1e-6:
        raise RuntimeError(
            f"quadrature did not converge (error estimate {err_total:.2e})")
    return total


CLOSED_FORM_MAX_K = 40


def rayleigh_closed_form(k: int, c: float) -> float:
    """Exact sum-capacity for exponential SNR with mean c.

    (K/ln 2) sum_j (-1)^j/(j+1) C(K-1, j) e^{(j+1)/c} Gamma(0, (j+1)/c),
    evaluated with exact binomials, exponentially-scaled Gamma(0, .) and
    compensated (Neumaier) summation in extended precision. The alternating
    sum loses digits as K grows, so above K = 40 this delegates to
    :func:`sum_capacity_integral`.
    """
    if k < 1:
        raise ValueError("K must be >= 1")
    if c <= 0:
        raise ValueError("c must be positive")
    if k > CLOSED_FORM_MAX_K:
        return sum_capacity_integral(exponential_snr(c), k)
    total = np.longdouble(0.0)
    comp = np.longdouble(0.0)
    for j in range(k):
        x = (j + 1) / c
        term = np.longdouble(math.comb(k - 1, j)) * np.longdouble(
            gamma0_upper_scaled(x)) / (j + 1)
        if j % 2:
            term = -term
        t = total + term
        if abs(total) >= abs(term):
            comp += (total - t) + term
        else:
            comp += (term - t) + total
        total = t
    return float((total + comp) * k / np.longdouble(LN2))


# ---------------------------------------------------------------------------
# Extreme-value machinery
# ---------------------------------------------------------------------------

class GrowthConvergenceError(RuntimeError):
    """The growth function (1-F)/f showed no finite limit on the probed range."""


def evt_growth_and_lk(dist: SnrDistribution, k: int,
                      probe_factor: float = 1e3,
                      rtol: float = 0.01):
    """Growth-function limit c = lim (1-F)/f and the 1 - 1/K quantile l_K.

    ``c`` is estimated on a geometric grid reaching ``probe_factor`` times
    the distribution mean and declared convergent when the last two decades
    agree within ``rtol``; otherwise :class:`GrowthConvergenceError` is
    raised (slowly converging tails need a larger probe_factor).
    """
    if k < 2:
        raise ValueError("l_K needs K >= 2")

    def growth(x):
        x = np.asarray(x, dtype=float)
        if dist.log_sf is not None and dist.log_pdf is not None:
            return np.exp(dist.log_sf(x) - dist.log_pdf(x))
        with np.errstate(divide="ignore", invalid="ignore"):
            return (1.0 - dist.cdf(x)) / dist.pdf(x)

    hi = probe_factor * dist.mean
    grid = np.geomspace(hi / 100.0, hi, 17)   # last two decades, 8 pts/decade
    g = growth(grid)
    if not np.all(np.isfinite(g)):
        raise GrowthConvergenceError(
            f"growth function not evaluable up to {hi:g} for {dist.label}")
    spread = (g.max() - g.min()) / abs(g[-1])
    if spread > rtol:
        raise GrowthConvergenceError(
            f"growth function of {dist.label} varies by {spread:.1%} over the "
            f"last two probed decades (x <= {hi:g}); no finite limit declared")
    c = float(g[-1])
    l_k = quantile(dist, 1.0 - 1.0 / k)
    return c, l_k


# ---------------------------------------------------------------------------
# Scaling laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingLawSpec:
    """Parameters for one asymptotic sum-capacity law.

    All laws drop O(log log K) terms; ``law`` picks the expression.
    """

    law: str
    rho_r: float = 1.0
    rho_b: float = 1.0
    n: int = 1
    m: int = 1
    beta: float = 1.0
    kappa: float = 0.0
    kappa_b: float = 0.0
    lambda_max: float = 1.0
    subcarriers: int = 1
    tr_r_inv: Optional[float] = None


def _ric(kappa: float):
    if math.isinf(kappa):
        return 1.0, 0.0
    return kappa / (1.0 + kappa), 1.0 / (1.0 + kappa)


def _xi(p: ScalingLawSpec, lnk: float) -> float:
    """Composite Rician growth term of the direct+surface channel."""
    a, u = _ric(p.kappa)
    a_b, u_b = _ric(p.kappa_b)
    diffuse = p.rho_r * p.n * p.beta ** 2 * u + p.rho_b * u_b
    fixed = (p.n * p.beta * math.sqrt(p.rho_r * a)
             + math.sqrt(p.rho_b * a_b))
    return (math.sqrt(diffuse * lnk) + fixed) ** 2


def _law_value(p: ScalingLawSpec, lnk: float) -> float:
    n, m, b2 = p.n, p.m, p.beta ** 2
    a, u = _ric(p.kappa)
    if p.law == "eq3":
        g = p.rho_b * lnk
    elif p.law == "eq4":
        g = p.rho_b * (math.sqrt(lnk) + math.sqrt(p.kappa)) ** 2 * u
    elif p.law == "eq6":
        g = p.rho_b * (math.sqrt(lnk) + math.sqrt(m * p.kappa)) ** 2 * u
    elif p.law == "eq7":
        g = m * p.rho_b * lnk
    elif p.law == "thm1":
        g = p.rho_r * b2 * n * lnk
    elif p.law == "cor1":
        g = (p.rho_r * b2 * n + p.rho_b) * lnk
    elif p.law == "thm2":
        g = p.rho_r * n * b2 * u * (math.sqrt(lnk) + math.sqrt(n * p.kappa)) ** 2
    elif p.law == "cor2":
        g = _xi(p, lnk)
    elif p.law in ("thm3", "lem2-thm3"):
        g = p.rho_r * n * b2 * p.lambda_max * lnk
    elif p.law == "cor3":
        g = (p.rho_r * n * b2 * p.lambda_max + p.rho_b) * lnk
    elif p.law == "cor4":
        g = p.rho_r * n ** 2 * b2 * lnk
    elif p.law == "cor5":
        return p.subcarriers * _law_value(replace_law(p, "cor1"), lnk)
    elif p.law == "cor6":
        return p.subcarriers * _law_value(replace_law(p, "cor2"), lnk)
    elif p.law in ("thm4", "thm4-remark4"):
        tr_inv = p.tr_r_inv if p.tr_r_inv is not None else float(m)
        zeta = m / tr_inv
        g = zeta * p.rho_r * b2 * n * lnk
        if p.law == "thm4-remark4":
            g /= m
    else:
        raise ValueError(f"unknown scaling law {p.law!r}")
    return math.log2(1.0 + g)


def replace_law(p: ScalingLawSpec, law: str) -> ScalingLawSpec:
    from dataclasses import replace
    return replace(p, law=law)


LAW_IDS = ("eq3", "eq4", "eq6", "eq7", "thm1", "cor1", "thm2", "cor2",
           "thm3", "lem2-thm3", "cor3", "cor4", "cor5", "cor6",
           "thm4", "thm4-remark4")


def scaling_law(spec: ScalingLawSpec, k: int) -> float:
    """Evaluate one large-K law at finite K (natural log, K = 1 -> ln 1 = 0)."""
    if k < 1:
        raise ValueError("K must be >= 1")
    return _law_value(spec, math.log(k))


# ---------------------------------------------------------------------------
# Rician tail approximations (used in the EVT argument)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailApproximation:
    pdf: float
    sf: float
    cdf: float
    log_pdf: float
    log_sf: float


def rician_tail_approximation(x: float, n: int, beta: float, a: float,
                              u: float, rho_r: float,
                              delta: float = 0.0) -> TailApproximation:
    """Large-x forms of the cascade SNR pdf and cdf tail under Rician fading,
    obtained from I_m(t) ~ e^t / sqrt(2 pi t).

    Log fields stay finite far beyond double range; the linear fields
    underflow to 0 where exp cannot represent them.
    """
    if x <= 0:
        raise ValueError("the tail approximation needs x > 0")
    s = n * beta * math.sqrt(a) - delta
    up = n * beta ** 2 * u
    if s <= 0 or up <= 0:
        raise ValueError("needs a positive LoS component and diffuse energy")
    z = x / rho_r
    expo = -(math.sqrt(z) - s) ** 2 / up
    log_pdf = expo - math.log(2.0) - 0.5 * math.log(
        math.pi * up * s * math.sqrt(x * rho_r ** 3))
    log_sf = expo + 0.5 * math.log(up) - math.log(2.0) - 0.5 * math.log(
        math.pi * s * math.sqrt(z))
    sf = math.exp(log_sf) if log_sf > -745 else 0.0
    return TailApproximation(pdf=math.exp(log_pdf) if log_pdf > -745 else 0.0,
                             sf=sf, cdf=1.0 - sf,
                             log_pdf=log_pdf, log_sf=log_sf)


def conditional_corr_snr_law(vbar, rbar: np.ndarray,
                             rho_r: float) -> SnrDistribution:
    """Conditional SNR law given the phase vector under correlated fading:
    exponential with mean rho_R * (vbar^H Rbar vbar)."""
    values = getattr(vbar, "values", vbar)
    values = np.asarray(values)
    lam = float(np.real(values.conj() @ (np.asarray(rbar) @ values)))
    if lam <= 0:
        raise ValueError("the quadratic form must be positive")
    return exponential_snr(rho_r * lam, label=f"conditional(lambda={lam:g})")
