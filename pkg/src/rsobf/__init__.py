"""Opportunistic scheduling and beamforming for surface-assisted downlinks.

Modules: ``numerics`` (special functions, matrix helpers, RNG streams),
``channel`` (fading and composite gains), ``beamforming`` (phase schedules,
dumb-antenna weights, whitening), ``scheduler`` (max-SNR scheduling and
Monte-Carlo estimators), ``analytics`` (exact formulas, EVT, scaling laws)
and the harness (``scenario``, ``figures``, ``cli``).
"""

from .channel import (CorrelatedRayleigh, FullyCorrelated, Rayleigh, Rician,
                      RsConfig, SlotRealization)
from .numerics import RngStream
from .scheduler import (Scenario, SumRateEstimate, estimate_miso_sum_rate,
                        estimate_ofdma_sum_rate, estimate_sum_rate,
                        schedule_slot, slot_rate)

__all__ = [
    "CorrelatedRayleigh", "FullyCorrelated", "Rayleigh", "Rician",
    "RsConfig", "SlotRealization", "RngStream", "Scenario",
    "SumRateEstimate", "estimate_miso_sum_rate", "estimate_ofdma_sum_rate",
    "estimate_sum_rate", "schedule_slot", "slot_rate",
]

__version__ = "0.1.0"
