"""Figure reproduction: each job sweeps a grid, runs the estimators and the
matching analytic laws, and emits one CSV per curve.

CSV schema (stable): header ``x,sum_rate,stderr,label,kind`` with values
printed to 9 significant digits; ``kind`` is ``sim`` or ``analytic``. For
the amplitude-pdf figure the ``sum_rate`` column carries the density.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analytics, channel, scheduler
from .analytics import ScalingLawSpec, scaling_law
from .channel import CorrelatedRayleigh, Rayleigh, Rician
from .numerics import RngStream, complex_gaussian_block
from .scenario import (Geometry, build_geometric_scenario,
                       build_homogeneous_scenario, exponential_profile_corr)

K_GRID = (1, 2, 4, 8, 16, 32, 64, 128, 256)
ETA_GRID = tuple(round(0.1 * i, 1) for i in range(9))
N_GRID_FIG3 = (2, 4, 8, 16, 32)

FIGURES = ("fig2a", "fig2b", "fig2c", "fig3", "fig4", "fig5", "fig6")


@dataclass
class FigureJob:
    """One figure reproduction: identifier, sweep sizes, slots and seed."""

    figure: str
    out_dir: Path
    slots: int = 100_000
    seed: int = 2024
    n_jobs: int = 1
    k_grid: tuple = K_GRID

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ValueError(f"unknown figure {self.figure!r}; "
                             f"choose from {FIGURES}")
        self.out_dir = Path(self.out_dir)
        if len(self.k_grid) == 0 or list(self.k_grid) != sorted(self.k_grid):
            raise ValueError("sweep grid must be nonempty and sorted")


@dataclass
class Curve:
    label: str
    kind: str                  # "sim" | "analytic"
    points: list = field(default_factory=list)   # (x, value, stderr)

    def add(self, x, value, stderr=0.0):
        self.points.append((float(x), float(value), float(stderr)))


def _slug(label: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", label.lower()).strip("-")


def write_curve(curve: Curve, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{_slug(curve.label)}.csv"
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "sum_rate", "stderr", "label", "kind"])
            for x, v, s in curve.points:
                w.writerow([f"{x:.9g}", f"{v:.9g}", f"{s:.9g}",
                            curve.label, curve.kind])
    except OSError as exc:
        raise OSError(f"cannot write curve CSV at {path}: {exc}") from exc
    return path


def _sim_curve(label, scenarios, job, estimator=scheduler.estimate_sum_rate,
               xs=None, **est_kwargs) -> Curve:
    curve = Curve(label, "sim")
    xs = xs if xs is not None else [s.users for s in scenarios]
    for x, sc in zip(xs, scenarios):
        est = estimator(sc, job.slots, job.seed, n_jobs=job.n_jobs,
                        **est_kwargs)
        curve.add(x, est.mean, est.stderr)
    return curve


def _law_curve(label, law_spec, ks, xs=None, scale=1.0) -> Curve:
    curve = Curve(label, "analytic")
    xs = xs if xs is not None else ks
    for x, k in zip(xs, ks):
        curve.add(x, scale * scaling_law(law_spec, k))
    return curve


# ---------------------------------------------------------------------------
# Individual figures
# ---------------------------------------------------------------------------

def _fig2a(job: FigureJob) -> list[Curve]:
    """Amplitude pdf of the surface-assisted Rayleigh channel (N = 2,
    beta = 1, cascade only): |h| is Rayleigh with mean-square 2."""
    n, draws = 2, max(job.slots, 1_000_000)
    gen = RngStream(job.seed, 0).generator()
    h2 = complex_gaussian_block((draws, n), gen)
    theta = gen.uniform(0.0, 2.0 * np.pi, (draws, n))
    amp = np.abs(np.sum(np.exp(1j * theta) * h2, axis=1))
    edges = np.linspace(0.0, 6.0, 101)
    hist, _ = np.histogram(amp, bins=edges, density=True)
    centers = (edges[:-1] + edges[1:]) / 2.0
    sim = Curve("amplitude pdf sim RS N=2 Rayleigh", "sim")
    nbin = np.histogram(amp, bins=edges)[0]
    width = edges[1] - edges[0]
    for c, h, m in zip(centers, hist, nbin):
        stderr = math.sqrt(max(m, 1)) / (draws * width)
        sim.add(c, h, stderr)
    ana = Curve("amplitude pdf analytic rayleigh ms2", "analytic")
    ms = float(n)   # mean square of |h| = beta^2 N
    for c in centers:
        ana.add(c, 2.0 * c / ms * math.exp(-c * c / ms))
    return [sim, ana]


def _fig2b(job: FigureJob) -> list[Curve]:
    ks = job.k_grid
    curves = []
    awgn = Curve("awgn baseline", "analytic")
    for k in ks:
        awgn.add(k, 1.0)
    curves.append(awgn)
    curves.append(_sim_curve(
        "sim OS M=1", [build_homogeneous_scenario(k) for k in ks], job))
    curves.append(_law_curve("ana OS M=1 eq3", ScalingLawSpec("eq3"), ks))
    curves.append(_sim_curve(
        "sim BS-assisted OBF M=2",
        [build_homogeneous_scenario(k, bs_antennas=2) for k in ks], job))
    for n in (2, 4):
        curves.append(_sim_curve(
            f"sim RS-assisted OBF N={n} M=1",
            [build_homogeneous_scenario(k, elements=n) for k in ks], job))
    curves.append(_law_curve("ana RS-assisted OBF cor1 N=2",
                             ScalingLawSpec("cor1", n=2), ks))
    return curves


def _fig2c(job: FigureJob) -> list[Curve]:
    ks = job.k_grid
    kappa = 10.0
    rician = Rician(kappa)
    curves = [
        _sim_curve("sim OS M=1 rician",
                   [build_homogeneous_scenario(k, rs_fading=rician)
                    for k in ks], job),
        _law_curve("ana OS M=1 eq4", ScalingLawSpec("eq4", kappa=kappa), ks),
        _sim_curve("sim BS-assisted OBF M=2 rician",
                   [build_homogeneous_scenario(k, bs_antennas=2,
                                               rs_fading=rician)
                    for k in ks], job),
        _law_curve("ana BS-assisted OBF eq6 M=2",
                   ScalingLawSpec("eq6", m=2, kappa=kappa), ks),
    ]
    for n in (2, 4):
        curves.append(_sim_curve(
            f"sim RS-assisted OBF N={n} M=1 rician",
            [build_homogeneous_scenario(k, elements=n, rs_fading=rician)
             for k in ks], job))
    curves.append(_law_curve(
        "ana RS-assisted OBF cor2 N=2",
        ScalingLawSpec("cor2", n=2, kappa=kappa, kappa_b=kappa), ks))
    return curves


def _fig3(job: FigureJob) -> list[Curve]:
    """Per-user path loss, Rician kappa = 10: sum rate versus N.

    Absolute levels depend on the unstated transmit power (default 30 dBm);
    the reproduction target is the curve ordering and the crossover N.
    """
    kappa = 10.0
    geometry = Geometry()
    curves = []
    for k in (64, 128):
        flat = {}
        for m in (1, 2, 4, 8):
            sc = build_geometric_scenario(k, 0, geometry=geometry,
                                          rs_fading=Rician(kappa),
                                          bs_antennas=m)
            est = scheduler.estimate_sum_rate(sc, job.slots, job.seed,
                                              n_jobs=job.n_jobs)
            flat[m] = est
        for m, est in flat.items():
            label = (f"sim OS M=1 K={k}" if m == 1
                     else f"sim BS-assisted OBF M={m} K={k}")
            c = Curve(label, "sim")
            for n in N_GRID_FIG3:
                c.add(n, est.mean, est.stderr)
            curves.append(c)
        rs_curve = Curve(f"sim RS-assisted OBF M=1 K={k}", "sim")
        for n in N_GRID_FIG3:
            sc = build_geometric_scenario(k, n, geometry=geometry,
                                          rs_fading=Rician(kappa))
            est = scheduler.estimate_sum_rate(sc, job.slots, job.seed,
                                              n_jobs=job.n_jobs)
            rs_curve.add(n, est.mean, est.stderr)
        curves.append(rs_curve)
    return curves


def _fig4(job: FigureJob) -> list[Curve]:
    k = 128
    curves = []
    for n in (2, 3):
        base = build_homogeneous_scenario(k, elements=n)
        est = scheduler.estimate_sum_rate(base, job.slots, job.seed,
                                          n_jobs=job.n_jobs)
        flat = Curve(f"sim rayleigh RS-assisted OBF N={n}", "sim")
        for eta in ETA_GRID:
            flat.add(eta, est.mean, est.stderr)
        curves.append(flat)
        if n == 2:
            os_est = scheduler.estimate_sum_rate(
                build_homogeneous_scenario(k), job.slots, job.seed,
                n_jobs=job.n_jobs)
            os_curve = Curve("sim rayleigh OS M=1", "sim")
            for eta in ETA_GRID:
                os_curve.add(eta, os_est.mean, os_est.stderr)
            curves.append(os_curve)
        rand_c = Curve(f"sim corr rayleigh RS-assisted OBF N={n}", "sim")
        det_c = Curve(f"sim corr rayleigh RS-assisted det OBF N={n}", "sim")
        ana_c = Curve(f"ana cor3 N={n}", "analytic")
        for eta in ETA_GRID:
            if eta == 0.0:
                fading = Rayleigh()
                lam = 1.0
            else:
                corr = exponential_profile_corr(n, eta)
                fading = CorrelatedRayleigh(corr)
                lam = float(np.linalg.eigvalsh(corr).max())
            sc = build_homogeneous_scenario(k, elements=n, rs_fading=fading,
                                            direct_fading=Rayleigh())
            est = scheduler.estimate_sum_rate(sc, job.slots, job.seed,
                                              n_jobs=job.n_jobs)
            rand_c.add(eta, est.mean, est.stderr)
            det_sc = build_homogeneous_scenario(
                k, elements=n, rs_fading=fading, direct_fading=Rayleigh(),
                rs_phase_mode="deterministic")
            det_est = scheduler.estimate_sum_rate(det_sc, job.slots, job.seed,
                                                  n_jobs=job.n_jobs)
            det_c.add(eta, det_est.mean, det_est.stderr)
            ana_c.add(eta, scaling_law(
                ScalingLawSpec("cor3", n=n, lambda_max=lam), k))
        curves.extend([rand_c, det_c, ana_c])
    return curves


def _fig5(job: FigureJob) -> list[Curve]:
    ks = job.k_grid
    curves = []
    for L in (1, 4):
        curves.append(_sim_curve(
            f"sim OS M=1 L={L}",
            [build_homogeneous_scenario(k, subcarriers=L) for k in ks], job,
            estimator=scheduler.estimate_ofdma_sum_rate))
        curves.append(_law_curve(f"ana eq3 L={L}",
                                 ScalingLawSpec("eq3"), ks, scale=L))
        curves.append(_sim_curve(
            f"sim RS-assisted OBF N=2 L={L}",
            [build_homogeneous_scenario(k, elements=2, subcarriers=L)
             for k in ks], job, estimator=scheduler.estimate_ofdma_sum_rate))
        curves.append(_law_curve(
            f"ana cor5 N=2 L={L}",
            ScalingLawSpec("cor5", n=2, subcarriers=L), ks))
    return curves


def _fig6(job: FigureJob) -> list[Curve]:
    """MISO downlink, Rayleigh fading. The surface-assisted curves feed back
    the true correlated-channel SNR ||h_k||^2 (LoS angles redrawn per slot);
    P = 1 variants divide the per-antenna convention by M."""
    ks = job.k_grid
    curves = [
        _sim_curve("sim OS M=1",
                   [build_homogeneous_scenario(k) for k in ks], job),
        _sim_curve("sim BS-assisted OBF M=2",
                   [build_homogeneous_scenario(k, bs_antennas=2)
                    for k in ks], job),
        _sim_curve("sim BS-assisted OBF P=1 M=2",
                   [build_homogeneous_scenario(k, bs_antennas=2, rho_b=0.5)
                    for k in ks], job),
    ]
    def miso(k, m, power):
        return scheduler.Scenario(
            users=k, rho_r=1.0, rho_b=0.0,
            rs=channel.RsConfig(elements=2), rs_fading=Rayleigh(),
            direct_fading=None, bs_antennas=m, power=power)
    for m in (1, 2):
        curves.append(_sim_curve(
            f"sim RS-assisted OBF M={m} N=2",
            [miso(k, m, "per-antenna") for k in ks], job,
            estimator=scheduler.estimate_miso_sum_rate))
    curves.append(_sim_curve(
        "sim RS-assisted OBF P=1 M=2 N=2",
        [miso(k, 2, "total") for k in ks], job,
        estimator=scheduler.estimate_miso_sum_rate))
    return curves


_BUILDERS = {"fig2a": _fig2a, "fig2b": _fig2b, "fig2c": _fig2c,
             "fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6}


def run_figure(job: FigureJob) -> list[Path]:
    """Run one figure job and write its curves; returns the CSV paths."""
    curves = _BUILDERS[job.figure](job)
    out = job.out_dir / job.figure
    return [write_curve(c, out) for c in curves]
