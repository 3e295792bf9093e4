"""Scenario construction: homogeneous networks, the geometric deployment
with per-user path loss, and YAML config round-tripping.

Config grammar (YAML, nested sections; all SNRs linear unless the _db
variant is used):

    users: 256
    rho_r: 1.0            # or rho_r_db: 0.0
    rho_b: 1.0            # or rho_b_db: 0.0
    surface:              # omit for a direct-link-only system
      elements: 2
      beta: 1.0
      spacing: 0.5
      los_angle: 0.0
    rs_fading:            # family: rayleigh | rician | correlated | fully_correlated
      family: rayleigh    # rician adds kappa; correlated adds eta (or matrix rows)
    direct_fading:        # family: rayleigh | rician | none
      family: rayleigh
    subcarriers: 1
    bs_antennas: 1
    rs_phase_mode: random     # or deterministic
    power: per-antenna        # or total
    geometry:                 # optional; enables per-slot user placement
      bs: [0.0, 0.0, 0.0]
      rs: [50.0, 50.0, 40.0]
      user_region: {x: [0.0, 100.0], y: [50.0, 150.0], height: 0.0}
      carrier_hz: 28.0e9
      bandwidth_hz: 100.0e6
      tx_power_dbm: 30.0
      noise_density_dbm_hz: -174.0
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from .channel import (CorrelatedRayleigh, FadingSpec, FullyCorrelated,
                      Rayleigh, Rician, RsConfig)
from .numerics import as_generator
from .scheduler import Scenario

SPEED_OF_LIGHT = 299792458.0


# ---------------------------------------------------------------------------
# Geometry and path loss
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Geometry:
    """Deployment for the non-homogeneous network: BS/surface positions in
    metres, a user rectangle at fixed height, and the link budget knobs.

    The paper leaves the transmit power unstated, so absolute rates from
    this geometry are calibration-dependent; tx_power_dbm is the knob.
    """

    bs: tuple = (0.0, 0.0, 0.0)
    rs: tuple = (50.0, 50.0, 40.0)
    x_range: tuple = (0.0, 100.0)
    y_range: tuple = (50.0, 150.0)
    user_height: float = 0.0
    carrier_hz: float = 28e9
    bandwidth_hz: float = 100e6
    tx_power_dbm: float = 30.0
    noise_density_dbm_hz: float = -174.0

    def __post_init__(self):
        if self.carrier_hz <= 0 or self.bandwidth_hz <= 0:
            raise ValueError("carrier and bandwidth must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def noise_power_dbm(self) -> float:
        return self.noise_density_dbm_hz + 10.0 * math.log10(self.bandwidth_hz)

    def friis_gain_db(self, distance) -> np.ndarray:
        """Free-space gain  (lambda / (4 pi d))^2  in dB (negative)."""
        d = np.maximum(np.asarray(distance, dtype=float), 1e-9)
        return 20.0 * np.log10(self.wavelength / (4.0 * np.pi * d))

    def link_budgets(self, positions: np.ndarray):
        """Linear (rho_r, rho_b) for user positions of shape (..., 3).

        The surface link is attenuated over the summed path d_BR + d_RU
        (anomalous-reflector regime), the direct link over d_BU.
        """
        bs = np.asarray(self.bs, dtype=float)
        rs = np.asarray(self.rs, dtype=float)
        d_bu = np.linalg.norm(positions - bs, axis=-1)
        d_ru = np.linalg.norm(positions - rs, axis=-1)
        d_br = float(np.linalg.norm(rs - bs))
        snr_db_direct = (self.tx_power_dbm + self.friis_gain_db(d_bu)
                         - self.noise_power_dbm)
        snr_db_rs = (self.tx_power_dbm + self.friis_gain_db(d_br + d_ru)
                     - self.noise_power_dbm)
        return 10.0 ** (snr_db_rs / 10.0), 10.0 ** (snr_db_direct / 10.0)


def place_users_and_path_loss(geometry: Geometry, k: int, rng):
    """Drop K users uniformly in the rectangle and return (rho_r, rho_b)."""
    if k < 1:
        raise ValueError("need at least one user")
    gen = as_generator(rng)
    xy = gen.uniform([geometry.x_range[0], geometry.y_range[0]],
                     [geometry.x_range[1], geometry.y_range[1]], (k, 2))
    pos = np.concatenate([xy, np.full((k, 1), geometry.user_height)], axis=1)
    return geometry.link_budgets(pos)


@dataclass(frozen=True)
class GeometricPlacement:
    """Per-slot placement hook for the estimators (duck-typed)."""

    geometry: Geometry

    def sample(self, gen, k: int):
        return place_users_and_path_loss(self.geometry, k, gen)


# ---------------------------------------------------------------------------
# Scenario builders
# ---------------------------------------------------------------------------

def exponential_profile_corr(n: int, eta: float) -> np.ndarray:
    """[R]_{i,j} = eta^{|i-j|}; Hermitian PSD with trace N."""
    idx = np.arange(n)
    return eta ** np.abs(idx[:, None] - idx[None, :]) + 0.0j


def build_homogeneous_scenario(users: int,
                               elements: int = 0,
                               rho_r: float = 1.0,
                               rho_b: float = 1.0,
                               beta: float = 1.0,
                               spacing: float = 0.5,
                               rs_fading: Optional[FadingSpec] = None,
                               direct_fading: Union[FadingSpec, None, str] = "auto",
                               subcarriers: int = 1,
                               bs_antennas: int = 1,
                               rs_phase_mode: str = "random",
                               power: str = "per-antenna") -> Scenario:
    """Equal link budgets for every user (the paper's default setup:
    beta = 1 and 0 dB average SNR on every link).

    ``elements = 0`` builds a direct-link-only system. By default the
    direct link inherits the fading family of the surface-user link
    (Rayleigh with Rayleigh, Rician(kappa) with Rician).
    """
    rs = None
    if elements > 0:
        rs = RsConfig(elements=elements, beta=beta, spacing=spacing)
    if rs_fading is None:
        rs_fading = Rayleigh()
    if direct_fading == "auto":
        if isinstance(rs_fading, Rician):
            direct_fading = Rician(rs_fading.kappa)
        else:
            direct_fading = Rayleigh()
    return Scenario(users=users, rho_r=rho_r, rho_b=rho_b, rs=rs,
                    rs_fading=rs_fading, direct_fading=direct_fading,
                    subcarriers=subcarriers, bs_antennas=bs_antennas,
                    rs_phase_mode=rs_phase_mode, power=power)


def build_geometric_scenario(users: int, elements: int,
                             geometry: Optional[Geometry] = None,
                             **kwargs) -> Scenario:
    """Non-homogeneous network: budgets re-drawn from the geometry each slot."""
    geometry = geometry or Geometry()
    scenario = build_homogeneous_scenario(users, elements, **kwargs)
    scenario.placement = GeometricPlacement(geometry)
    return scenario


# ---------------------------------------------------------------------------
# Config round-trip
# ---------------------------------------------------------------------------

def _fading_to_dict(spec: Optional[FadingSpec]) -> dict:
    if spec is None:
        return {"family": "none"}
    if isinstance(spec, Rayleigh):
        return {"family": "rayleigh"}
    if isinstance(spec, Rician):
        out = {"family": "rician", "kappa": float(spec.kappa)}
        if spec.los_phases is not None:
            out["los_phases"] = np.asarray(spec.los_phases).tolist()
        return out
    if isinstance(spec, CorrelatedRayleigh):
        r = np.asarray(spec.corr)
        n = r.shape[0]
        if n > 1 and abs(r[0, 1]) > 0:
            eta = float(np.real(r[0, 1]))
            if np.allclose(r, exponential_profile_corr(n, eta), atol=1e-12):
                return {"family": "correlated", "eta": eta}
        return {"family": "correlated",
                "matrix_real": np.real(r).tolist(),
                "matrix_imag": np.imag(r).tolist()}
    if isinstance(spec, FullyCorrelated):
        out = {"family": "fully_correlated"}
        if spec.los_angles is not None:
            out["los_angles"] = np.asarray(spec.los_angles).tolist()
        return out
    raise TypeError(f"unknown fading spec {spec!r}")


def _fading_from_dict(d: Optional[dict], elements: int) -> Optional[FadingSpec]:
    if d is None:
        return None
    family = d.get("family", "rayleigh")
    if family == "none":
        return None
    if family == "rayleigh":
        return Rayleigh()
    if family == "rician":
        phases = d.get("los_phases")
        return Rician(float(d["kappa"]),
                      None if phases is None else np.asarray(phases))
    if family == "correlated":
        if "eta" in d:
            corr = exponential_profile_corr(elements, float(d["eta"]))
        else:
            corr = (np.asarray(d["matrix_real"], dtype=float)
                    + 1j * np.asarray(d.get("matrix_imag", 0.0), dtype=float))
        return CorrelatedRayleigh(corr)
    if family == "fully_correlated":
        angles = d.get("los_angles")
        return FullyCorrelated(None if angles is None else np.asarray(angles))
    raise ValueError(f"unknown fading family {family!r}")


def scenario_to_dict(s: Scenario) -> dict:
    out = {
        "users": int(s.users),
        "rho_r": np.asarray(s.rho_r, dtype=float).tolist(),
        "rho_b": np.asarray(s.rho_b, dtype=float).tolist(),
        "rs_fading": _fading_to_dict(s.rs_fading),
        "direct_fading": _fading_to_dict(s.direct_fading),
        "subcarriers": int(s.subcarriers),
        "bs_antennas": int(s.bs_antennas),
        "rs_phase_mode": s.rs_phase_mode,
        "power": s.power,
    }
    if s.rs is not None:
        out["surface"] = {
            "elements": int(s.rs.elements),
            "beta": float(s.rs.beta),
            "spacing": float(s.rs.spacing),
            "los_angle": np.asarray(s.rs.los_angles, dtype=float).tolist(),
        }
    if s.placement is not None:
        g = s.placement.geometry
        out["geometry"] = {
            "bs": list(g.bs), "rs": list(g.rs),
            "user_region": {"x": list(g.x_range), "y": list(g.y_range),
                            "height": g.user_height},
            "carrier_hz": g.carrier_hz,
            "bandwidth_hz": g.bandwidth_hz,
            "tx_power_dbm": g.tx_power_dbm,
            "noise_density_dbm_hz": g.noise_density_dbm_hz,
        }
    return out


def _linear(d: dict, key: str, default: float = 1.0) -> float | list:
    if f"{key}_db" in d:
        return 10.0 ** (float(d[f"{key}_db"]) / 10.0)
    return d.get(key, default)


def scenario_from_dict(d: dict) -> Scenario:
    surface = d.get("surface")
    rs = None
    elements = 0
    if surface is not None:
        elements = int(surface["elements"])
        angle = surface.get("los_angle", 0.0)
        rs = RsConfig(elements=elements,
                      beta=float(surface.get("beta", 1.0)),
                      spacing=float(surface.get("spacing", 0.5)),
                      los_angles=np.squeeze(np.asarray(angle, dtype=float))[()])
    rho_r = _linear(d, "rho_r")
    rho_b = _linear(d, "rho_b")
    to_arr = lambda v: np.asarray(v, dtype=float) if isinstance(v, list) else float(v)
    scenario = Scenario(
        users=int(d["users"]),
        rho_r=to_arr(rho_r), rho_b=to_arr(rho_b), rs=rs,
        rs_fading=_fading_from_dict(d.get("rs_fading", {"family": "rayleigh"}),
                                    elements) or Rayleigh(),
        direct_fading=_fading_from_dict(d.get("direct_fading",
                                              {"family": "rayleigh"}), 1),
        subcarriers=int(d.get("subcarriers", 1)),
        bs_antennas=int(d.get("bs_antennas", 1)),
        rs_phase_mode=d.get("rs_phase_mode", "random"),
        power=d.get("power", "per-antenna"),
    )
    geo = d.get("geometry")
    if geo is not None:
        region = geo.get("user_region", {})
        geometry = Geometry(
            bs=tuple(geo.get("bs", (0.0, 0.0, 0.0))),
            rs=tuple(geo.get("rs", (50.0, 50.0, 40.0))),
            x_range=tuple(region.get("x", (0.0, 100.0))),
            y_range=tuple(region.get("y", (50.0, 150.0))),
            user_height=float(region.get("height", 0.0)),
            carrier_hz=float(geo.get("carrier_hz", 28e9)),
            bandwidth_hz=float(geo.get("bandwidth_hz", 100e6)),
            tx_power_dbm=float(geo.get("tx_power_dbm", 30.0)),
            noise_density_dbm_hz=float(geo.get("noise_density_dbm_hz", -174.0)),
        )
        scenario.placement = GeometricPlacement(geometry)
    return scenario


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config {path} does not hold a mapping")
    return scenario_from_dict(data)


def dump_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(scenario),
                                         sort_keys=False),
                          encoding="utf-8")
