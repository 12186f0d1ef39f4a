"""Beamforming solutions and the metrics that judge them.

SINR here counts only other information beams as interference: energy
carriers are known waveforms the information receivers cancel before
decoding. Harvested power counts every beam and is the RF power collected
by the rectifier (unit conversion efficiency).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet, PhaseShifts, effective_rows


@dataclass(eq=False)
class QosTargets:
    """Per-user service requirements, all in linear units."""

    sinr_min: np.ndarray       # (K_I,) minimum SINR
    harvest_min_w: np.ndarray  # (K_E,) minimum harvested power, watts

    def __post_init__(self):
        self.sinr_min = np.asarray(self.sinr_min, dtype=float).reshape(-1)
        self.harvest_min_w = np.asarray(self.harvest_min_w, dtype=float).reshape(-1)
        for name in ("sinr_min", "harvest_min_w"):
            v = getattr(self, name)
            if v.size and (not np.all(np.isfinite(v)) or np.any(v <= 0)):
                raise ValueError(f"{name} entries must be positive and finite")


@dataclass(eq=False)
class BeamformingSolution:
    """Transmit beams plus the reflection configuration that produced them."""

    info_beams: np.ndarray    # (M, K_I) one column per information user
    energy_beams: np.ndarray  # (M, n_e) dedicated energy carriers, n_e may be 0
    phases: PhaseShifts

    def __post_init__(self):
        self.info_beams = np.asarray(self.info_beams, dtype=complex)
        self.energy_beams = np.asarray(self.energy_beams, dtype=complex)
        if self.info_beams.ndim != 2 or self.energy_beams.ndim != 2:
            raise ValueError("beam matrices must be 2-D (antennas x beams)")
        if self.info_beams.shape[0] != self.energy_beams.shape[0]:
            raise ValueError("beam matrices must share the antenna axis")

    @property
    def n_antennas(self) -> int:
        return self.info_beams.shape[0]


def transmit_power(solution: BeamformingSolution) -> float:
    """Total radiated power, watts."""
    return float(np.sum(np.abs(solution.info_beams) ** 2)
                 + np.sum(np.abs(solution.energy_beams) ** 2))


def _iu_rows(channels: ChannelSet, phases: PhaseShifts) -> np.ndarray:
    return effective_rows(channels.iu_direct, channels.iu_reflected,
                          channels.ap_irs, phases)


def _eu_rows(channels: ChannelSet, phases: PhaseShifts) -> np.ndarray:
    return effective_rows(channels.eu_direct, channels.eu_reflected,
                          channels.ap_irs, phases)


def sinr(channels: ChannelSet, solution: BeamformingSolution,
         noise_pow) -> np.ndarray:
    """Per-IU SINR under the solution's phases, shape (K_I,)."""
    rows = _iu_rows(channels, solution.phases)
    noise = np.broadcast_to(np.asarray(noise_pow, dtype=float), (channels.n_iu,))
    prods = rows.conj() @ solution.info_beams  # (K_I, K_I), entry [k, i] = row_k^H w_i
    gains = np.abs(prods) ** 2
    signal = np.diag(gains)
    interference = gains.sum(axis=1) - signal
    return signal / (interference + noise)


def harvested_power(channels: ChannelSet, solution: BeamformingSolution) -> np.ndarray:
    """Per-EU harvested RF power in watts, shape (K_E,)."""
    rows = _eu_rows(channels, solution.phases)
    total = np.zeros(channels.n_eu)
    for beams in (solution.info_beams, solution.energy_beams):
        if beams.shape[1]:
            total += (np.abs(rows.conj() @ beams) ** 2).sum(axis=1)
    return total


@dataclass(eq=False)
class FeasibilityReport:
    """Margins of every QoS constraint; margin = achieved / required."""

    sinr_margin: np.ndarray
    harvest_margin: np.ndarray
    rel_tol: float
    feasible: bool = field(init=False)

    def __post_init__(self):
        self.sinr_margin = np.asarray(self.sinr_margin, dtype=float).reshape(-1)
        self.harvest_margin = np.asarray(self.harvest_margin, dtype=float).reshape(-1)
        self.feasible = bool(self.min_margin >= 1.0 - self.rel_tol)

    @property
    def min_margin(self) -> float:
        margins = np.concatenate([self.sinr_margin, self.harvest_margin])
        return float(margins.min()) if margins.size else np.inf


def qos_feasibility(channels: ChannelSet, solution: BeamformingSolution,
                    targets: QosTargets, noise_pow, rel_tol: float = 1e-3
                    ) -> FeasibilityReport:
    """Check every constraint at a relative tolerance; absent sides pass vacuously."""
    if targets.sinr_min.size != channels.n_iu or targets.harvest_min_w.size != channels.n_eu:
        raise ValueError("targets do not match the channel set's user counts")
    sm = (sinr(channels, solution, noise_pow) / targets.sinr_min
          if channels.n_iu else np.zeros(0))
    hm = (harvested_power(channels, solution) / targets.harvest_min_w
          if channels.n_eu else np.zeros(0))
    return FeasibilityReport(sinr_margin=sm, harvest_margin=hm, rel_tol=rel_tol)
