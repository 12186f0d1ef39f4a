"""Deployment geometry and radio parameters for an IRS-assisted SWIPT downlink.

Conventions used throughout the package:

  positions     3-vectors in meters, [x, y, z]
  AP            M-antenna transmitter at a fixed position
  IRS panel     n_y x n_z reflecting elements in the y-z plane, spanning +y/+z
                from the panel's reference (corner) element
  IU / EU       single-antenna information / energy users
  noise         flat PSD in dBm/Hz over the system bandwidth
  gains         dBi, converted to linear power factors at channel generation
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

C_LIGHT = 2.998e8  # m/s, pinned for reproducibility


def db2pow(db: float) -> float:
    return 10.0 ** (db / 10.0)


def pow2db(p: float) -> float:
    return 10.0 * np.log10(p)


@dataclass(eq=False)
class IrsSpec:
    """One reflecting panel: a rectangular element grid in the y-z plane."""

    reference_position: np.ndarray  # (3,) corner element, grid grows toward +y/+z
    n_y: int
    n_z: int
    element_spacing: float = 0.2  # m

    def __post_init__(self):
        self.reference_position = np.asarray(self.reference_position, dtype=float)
        if self.reference_position.shape != (3,):
            raise ValueError("reference_position must be a 3-vector")
        if not np.all(np.isfinite(self.reference_position)):
            raise ValueError("reference_position must be finite")
        if self.n_y < 1 or self.n_z < 1:
            raise ValueError("element grid must be at least 1 x 1")
        if self.element_spacing <= 0:
            raise ValueError("element_spacing must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_y * self.n_z

    def element_positions(self) -> np.ndarray:
        """Per-element coordinates, shape (n_y*n_z, 3).

        Elements are stacked y-fastest: index n = iz * n_y + iy.
        """
        iy = np.arange(self.n_y)
        iz = np.arange(self.n_z)
        offs = np.zeros((self.n_z, self.n_y, 3))
        offs[:, :, 1] = iy[None, :] * self.element_spacing
        offs[:, :, 2] = iz[:, None] * self.element_spacing
        return self.reference_position[None, :] + offs.reshape(-1, 3)


AP_IRS_FADING_MODES = ("los", "rayleigh")


@dataclass(eq=False)
class Scenario:
    """Full deployment: AP, panels, user positions, and link-budget parameters."""

    ap_position: np.ndarray
    ap_antennas: int
    irs: tuple[IrsSpec, ...] = ()
    iu_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    eu_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    carrier_freq_hz: float = 750e6
    bandwidth_hz: float = 1e6
    noise_psd_dbm_hz: float = -150.0
    pl_exp_ap_user: float = 3.8
    pl_exp_ap_irs: float = 2.2
    pl_exp_irs_user: float = 2.2
    ap_gain_dbi: float = 0.0
    irs_element_gain_dbi: float = 3.0
    ap_irs_fading: str | tuple[str, ...] = "los"
    wavelength_override_m: float | None = None
    seed: int = 0

    def __post_init__(self):
        self.ap_position = np.asarray(self.ap_position, dtype=float)
        self.iu_positions = np.asarray(self.iu_positions, dtype=float).reshape(-1, 3)
        self.eu_positions = np.asarray(self.eu_positions, dtype=float).reshape(-1, 3)
        self.irs = tuple(self.irs)
        if self.ap_position.shape != (3,):
            raise ValueError("ap_position must be a 3-vector")
        if self.ap_antennas < 1:
            raise ValueError("ap_antennas must be >= 1")
        if self.carrier_freq_hz <= 0 or self.bandwidth_hz <= 0:
            raise ValueError("carrier_freq_hz and bandwidth_hz must be positive")
        for name in ("pl_exp_ap_user", "pl_exp_ap_irs", "pl_exp_irs_user"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not isinstance(self.ap_irs_fading, str):
            self.ap_irs_fading = tuple(self.ap_irs_fading)
            if len(self.ap_irs_fading) != len(self.irs):
                raise ValueError("per-panel ap_irs_fading needs one mode per panel")
        modes = (self.ap_irs_fading,) if isinstance(self.ap_irs_fading, str) \
            else self.ap_irs_fading
        for mode in modes:
            if mode not in AP_IRS_FADING_MODES:
                raise ValueError(f"ap_irs_fading must be one of {AP_IRS_FADING_MODES}")
        if self.wavelength_override_m is not None and self.wavelength_override_m <= 0:
            raise ValueError("wavelength_override_m must be positive")
        for pos in (self.iu_positions, self.eu_positions):
            if not np.all(np.isfinite(pos)):
                raise ValueError("user positions must be finite")

    @property
    def n_iu(self) -> int:
        return self.iu_positions.shape[0]

    @property
    def n_eu(self) -> int:
        return self.eu_positions.shape[0]

    @property
    def n_elements_total(self) -> int:
        return sum(p.n_elements for p in self.irs)

    @property
    def wavelength_m(self) -> float:
        """Carrier wavelength used by the path-loss reference gain.

        Precedence: explicit override, else twice the first panel's element
        spacing (panels are assumed half-wavelength sampled), else c/f.
        """
        if self.wavelength_override_m is not None:
            return self.wavelength_override_m
        if self.irs:
            return 2.0 * self.irs[0].element_spacing
        return C_LIGHT / self.carrier_freq_hz

    @property
    def noise_power_w(self) -> float:
        """Receiver noise power over the system bandwidth, in watts."""
        total_dbm = self.noise_psd_dbm_hz + 10.0 * np.log10(self.bandwidth_hz)
        return 10.0 ** ((total_dbm - 30.0) / 10.0)

    def noise_vector(self) -> np.ndarray:
        """Per-IU noise powers (identical receivers), shape (n_iu,)."""
        return np.full(self.n_iu, self.noise_power_w)

    def panel_fading_modes(self) -> tuple[str, ...]:
        """AP->panel fading mode per panel; a plain string applies to all."""
        if isinstance(self.ap_irs_fading, str):
            return (self.ap_irs_fading,) * len(self.irs)
        return self.ap_irs_fading

    def irs_slices(self) -> tuple[tuple[int, int], ...]:
        """Half-open (start, stop) index ranges of each panel in the stacked element axis."""
        out = []
        start = 0
        for panel in self.irs:
            out.append((start, start + panel.n_elements))
            start += panel.n_elements
        return tuple(out)
