"""Channel generation and effective-channel composition.

Channel containers store user channels as rows; the product seen by user k
for a beam w is vdot(row_k, w) = row_k^H w, i.e. rows are the unconjugated
channel vectors and conjugation happens at the product.

Reflected links are stored per element: the row entry of user k at element n
is the element->user gain, and the cascade through a panel with phase
configuration u (unit phasors, u_n = exp(j*theta_n)) composes as

    effective_row = direct_row + (reflected_row * conj(u)) @ conj(ap_irs)

which reproduces row^H w = (direct + reflected^H diag(u) F)^* w.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import C_LIGHT, Scenario, db2pow

REFERENCE_DISTANCE_M = 1.0


def path_loss(distance_m, exponent: float, *, wavelength_m: float | None = None,
              carrier_freq_hz: float | None = None):
    """Distance-power law with a free-space reference gain at 1 m.

    The reference gain is (wavelength / 4 pi)^2; pass either the wavelength
    directly or a carrier frequency to derive it. Accepts scalar or array
    distances, all strictly positive.
    """
    if wavelength_m is None:
        if carrier_freq_hz is None:
            raise ValueError("need wavelength_m or carrier_freq_hz")
        wavelength_m = C_LIGHT / carrier_freq_hz
    if wavelength_m <= 0:
        raise ValueError("wavelength must be positive")
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distances must be positive")
    c0 = (wavelength_m / (4.0 * np.pi)) ** 2
    out = c0 * (d / REFERENCE_DISTANCE_M) ** (-exponent)
    return out if out.ndim else float(out)


@dataclass(eq=False)
class PhaseShifts:
    """Per-element reflection coefficients, unit modulus."""

    phasor: np.ndarray  # (N,) complex, entry n = exp(j * theta_n)

    def __post_init__(self):
        self.phasor = np.asarray(self.phasor, dtype=complex).reshape(-1)
        mag = np.abs(self.phasor)
        if self.phasor.size and not np.allclose(mag, 1.0, atol=1e-9):
            raise ValueError("phase shifts must have unit modulus")
        if self.phasor.size:
            self.phasor = self.phasor / mag  # exact unit modulus

    @classmethod
    def from_theta(cls, theta) -> "PhaseShifts":
        return cls(np.exp(1j * np.asarray(theta, dtype=float).reshape(-1)))

    @classmethod
    def flat(cls, n: int) -> "PhaseShifts":
        return cls(np.ones(n, dtype=complex))

    @property
    def n_elements(self) -> int:
        return self.phasor.size

    @property
    def theta(self) -> np.ndarray:
        """Angles in [0, 2 pi)."""
        return np.mod(np.angle(self.phasor), 2.0 * np.pi)


@dataclass(eq=False)
class ChannelSet:
    """All propagation coefficients of one deployment snapshot."""

    iu_direct: np.ndarray      # (K_I, M) AP -> IU
    iu_reflected: np.ndarray   # (K_I, N) element -> IU, panels stacked
    eu_direct: np.ndarray      # (K_E, M) AP -> EU
    eu_reflected: np.ndarray   # (K_E, N) element -> EU
    ap_irs: np.ndarray         # (N, M)  AP -> element
    irs_slices: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        self.iu_direct = np.asarray(self.iu_direct, dtype=complex)
        self.iu_reflected = np.asarray(self.iu_reflected, dtype=complex)
        self.eu_direct = np.asarray(self.eu_direct, dtype=complex)
        self.eu_reflected = np.asarray(self.eu_reflected, dtype=complex)
        self.ap_irs = np.asarray(self.ap_irs, dtype=complex)
        self.irs_slices = tuple(tuple(s) for s in self.irs_slices)
        for name in ("iu_direct", "iu_reflected", "eu_direct", "eu_reflected", "ap_irs"):
            if getattr(self, name).ndim != 2:
                raise ValueError(f"{name} must be 2-D (users x coefficients)")
        m, n = self.n_antennas, self.n_elements
        if self.iu_direct.shape != (self.n_iu, m) or self.eu_direct.shape != (self.n_eu, m):
            raise ValueError("direct channel shapes disagree on antenna count")
        if self.iu_reflected.shape != (self.n_iu, n) or self.eu_reflected.shape != (self.n_eu, n):
            raise ValueError("reflected channel shapes disagree on element count")
        covered = 0
        for start, stop in self.irs_slices:
            if start != covered or stop < start:
                raise ValueError("irs_slices must partition the element axis in order")
            covered = stop
        if self.irs_slices and covered != n:
            raise ValueError("irs_slices must cover all elements")

    @property
    def n_iu(self) -> int:
        return self.iu_direct.shape[0]

    @property
    def n_eu(self) -> int:
        return self.eu_direct.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.iu_direct.shape[1]

    @property
    def n_elements(self) -> int:
        return self.ap_irs.shape[0]


def _crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    """Circularly symmetric unit-variance complex Gaussian draws."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _user_stream(scenario_seed: int, kind: int, idx: int, link: int) -> np.random.Generator:
    # Independent substream per (user, link) so adding panels or users never
    # perturbs the draws of existing links.
    ss = np.random.SeedSequence(scenario_seed, spawn_key=(kind, idx, link))
    return np.random.default_rng(ss)


def generate_channels(scenario: Scenario, seed: int | None = None) -> ChannelSet:
    """Draw one channel snapshot for a deployment.

    Direct AP->user links and element->user links are Rayleigh faded around
    the distance power law; AP->panel blocks are all-ones LoS or Rayleigh per
    the scenario's ap_irs_fading. The AP antenna gain enters AP-originating
    user links, the element gain enters the element->user segment once.
    """
    if seed is None:
        seed = scenario.seed
    m = scenario.ap_antennas
    n = scenario.n_elements_total
    lam = scenario.wavelength_m
    ap_gain = db2pow(scenario.ap_gain_dbi)
    el_gain = db2pow(scenario.irs_element_gain_dbi)

    def direct_rows(positions: np.ndarray, kind: int) -> np.ndarray:
        rows = np.zeros((positions.shape[0], m), dtype=complex)
        for i, pos in enumerate(positions):
            d = np.linalg.norm(pos - scenario.ap_position)
            pl = path_loss(d, scenario.pl_exp_ap_user, wavelength_m=lam)
            rng = _user_stream(seed, kind, i, 0)
            rows[i] = np.sqrt(ap_gain * pl) * _crandn(rng, m)
        return rows

    def reflected_rows(positions: np.ndarray, kind: int) -> np.ndarray:
        rows = np.zeros((positions.shape[0], n), dtype=complex)
        for i, pos in enumerate(positions):
            for ell, (panel, (start, stop)) in enumerate(zip(scenario.irs, scenario.irs_slices())):
                # spherical wavefront: per-element distance, not panel-center
                d = np.linalg.norm(panel.element_positions() - pos[None, :], axis=1)
                pl = path_loss(d, scenario.pl_exp_irs_user, wavelength_m=lam)
                rng = _user_stream(seed, kind, i, 1 + ell)
                rows[i, start:stop] = np.sqrt(el_gain * pl) * _crandn(rng, stop - start)
        return rows

    ap_irs = np.zeros((n, m), dtype=complex)
    fading = scenario.panel_fading_modes()
    for ell, (panel, (start, stop)) in enumerate(zip(scenario.irs, scenario.irs_slices())):
        d = np.linalg.norm(panel.reference_position - scenario.ap_position)
        pl = path_loss(d, scenario.pl_exp_ap_irs, wavelength_m=lam)
        if fading[ell] == "rayleigh":
            rng = _user_stream(seed, 2, ell, 0)
            block = _crandn(rng, stop - start, m)
        else:
            block = np.ones((stop - start, m), dtype=complex)
        ap_irs[start:stop] = np.sqrt(ap_gain * pl) * block

    return ChannelSet(
        iu_direct=direct_rows(scenario.iu_positions, 0),
        iu_reflected=reflected_rows(scenario.iu_positions, 0),
        eu_direct=direct_rows(scenario.eu_positions, 1),
        eu_reflected=reflected_rows(scenario.eu_positions, 1),
        ap_irs=ap_irs,
        irs_slices=scenario.irs_slices(),
    )


def effective_rows(direct: np.ndarray, reflected: np.ndarray, ap_irs: np.ndarray,
                   phases: PhaseShifts) -> np.ndarray:
    """Compose direct plus cascaded rows for every user at once."""
    if ap_irs.shape[0] == 0:
        return direct.copy()
    return direct + (reflected * phases.phasor.conj()[None, :]) @ ap_irs.conj()


def effective_channel(channels: ChannelSet, phases: PhaseShifts, kind: str,
                      index: int) -> np.ndarray:
    """Effective AP->user row for one user under a phase configuration."""
    if kind == "iu":
        direct, refl = channels.iu_direct, channels.iu_reflected
    elif kind == "eu":
        direct, refl = channels.eu_direct, channels.eu_reflected
    else:
        raise ValueError("kind must be 'iu' or 'eu'")
    return effective_rows(direct[index:index + 1], refl[index:index + 1],
                          channels.ap_irs, phases)[0]


def freeze_phases(channels: ChannelSet, phases: PhaseShifts) -> ChannelSet:
    """Bake a phase configuration into the direct links and drop the panels."""
    if phases.n_elements != channels.n_elements:
        raise ValueError("phase vector length must match element count")
    m = channels.n_antennas
    return ChannelSet(
        iu_direct=effective_rows(channels.iu_direct, channels.iu_reflected,
                                 channels.ap_irs, phases),
        iu_reflected=np.zeros((channels.n_iu, 0), dtype=complex),
        eu_direct=effective_rows(channels.eu_direct, channels.eu_reflected,
                                 channels.ap_irs, phases),
        eu_reflected=np.zeros((channels.n_eu, 0), dtype=complex),
        ap_irs=np.zeros((0, m), dtype=complex),
        irs_slices=(),
    )


def strip_irs(channels: ChannelSet) -> ChannelSet:
    """Remove all reflected paths, keeping the direct links untouched."""
    m = channels.n_antennas
    return ChannelSet(
        iu_direct=channels.iu_direct.copy(),
        iu_reflected=np.zeros((channels.n_iu, 0), dtype=complex),
        eu_direct=channels.eu_direct.copy(),
        eu_reflected=np.zeros((channels.n_eu, 0), dtype=complex),
        ap_irs=np.zeros((0, m), dtype=complex),
        irs_slices=(),
    )
