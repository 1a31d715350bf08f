"""
Sources Module
Seeded generators of correlated observation triples (X, Y, Z): the Gaussian
fading model and a geometric range-angle (RA) map model with Eve variants
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0
# Normal cyclic prefix is 144/2048 of the useful OFDM symbol
CP_FRACTION = 144 / 2048
ALICE_ECHO_LOSS_DB = 6.0
LOG_POWER_FLOOR = 1e-12


class EveMode(str, Enum):
    ABSENT = "absent"
    UNCORRELATED = "uncorrelated"
    CORRELATED = "correlated"


@dataclass
class SampleBatch:
    """Row-aligned observations of Alice (x), Bob (y) and Eve (z, possibly zero-width)."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.z is None:
            self.z = np.zeros((len(self.x), 0))
        self.z = np.asarray(self.z, dtype=np.float64)
        if not len(self.x) == len(self.y) == len(self.z):
            raise ValueError(f"row counts differ: x={len(self.x)}, y={len(self.y)}, z={len(self.z)}")
        for name in ("x", "y", "z"):
            arr = getattr(self, name)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")

    def __len__(self) -> int:
        return len(self.x)

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.x.shape[1], self.y.shape[1], self.z.shape[1]

    @property
    def has_eve(self) -> bool:
        return self.z.shape[1] > 0

    def take(self, index: np.ndarray) -> "SampleBatch":
        return SampleBatch(self.x[index], self.y[index], self.z[index])


def dbm_to_linear(p_dbm: float) -> float:
    """Convert dBm to linear power (mW-normalized); -inf maps to 0."""
    return float(10.0 ** (p_dbm / 10.0))


################### Gaussian fading ###################

@dataclass(frozen=True)
class FadingConfig:
    p_dbm: float = 0.0
    n1_dbm: float = -20.0
    n2_dbm: float = -20.0
    n3_dbm: float = 0.0
    dim: int = 8
    eve_mode: EveMode = EveMode.ABSENT

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        for name in ("p_dbm", "n1_dbm", "n2_dbm", "n3_dbm"):
            value = getattr(self, name)
            if math.isnan(value) or value == math.inf:
                raise ValueError(f"{name} must be finite or -inf, got {value}")
        object.__setattr__(self, "eve_mode", EveMode(self.eve_mode))


def gen_fading(cfg: FadingConfig, batch: int, rng: np.random.Generator) -> SampleBatch:
    """X = H + W1, Y = H + W2 and, per Eve mode, Z = H + W3 or independent N(0, P).

    Draw order is fixed (H, W1, W2, Z) so a seed fully determines the batch.
    """
    p = dbm_to_linear(cfg.p_dbm)
    shape = (batch, cfg.dim)
    h = rng.normal(0.0, math.sqrt(p), size=shape)
    x = h + rng.normal(0.0, 1.0, size=shape) * math.sqrt(dbm_to_linear(cfg.n1_dbm))
    y = h + rng.normal(0.0, 1.0, size=shape) * math.sqrt(dbm_to_linear(cfg.n2_dbm))
    if cfg.eve_mode is EveMode.CORRELATED:
        z = h + rng.normal(0.0, 1.0, size=shape) * math.sqrt(dbm_to_linear(cfg.n3_dbm))
    elif cfg.eve_mode is EveMode.UNCORRELATED:
        z = rng.normal(0.0, math.sqrt(p), size=shape)
    else:
        z = np.zeros((batch, 0))
    return SampleBatch(x, y, z)


def gaussian_mi_bits(cfg: FadingConfig) -> Dict[str, float]:
    """Closed-form per-scalar I(X;Y) and I(X;Z) for the fading model, in bits."""
    p = dbm_to_linear(cfg.p_dbm)
    n1, n2, n3 = (dbm_to_linear(v) for v in (cfg.n1_dbm, cfg.n2_dbm, cfg.n3_dbm))

    def _mi(noise_a: float, noise_b: float) -> float:
        rho2 = p * p / ((p + noise_a) * (p + noise_b))
        if rho2 >= 1.0:
            return math.inf
        return -0.5 * math.log2(1.0 - rho2)

    i_xz = _mi(n1, n3) if cfg.eve_mode is EveMode.CORRELATED else 0.0
    return {"i_xy_bits": _mi(n1, n2), "i_xz_bits": i_xz}


################### range-angle maps ###################

@dataclass(frozen=True)
class RaConfig:
    delta_f: float = 120e3
    n_sc: int = 3300
    n_ifft: int = 4096
    n_beams: int = 64
    sector: Tuple[float, float] = (-45.0, 45.0)
    array_elems: int = 16
    n_range_bins: int = 256

    def __post_init__(self):
        if self.n_ifft < self.n_sc:
            raise ValueError(f"n_ifft={self.n_ifft} must be >= n_sc={self.n_sc}")
        if not 0 < self.n_range_bins <= self.n_ifft:
            raise ValueError(f"n_range_bins={self.n_range_bins} must lie in (0, n_ifft]")
        if self.n_beams < 1 or self.array_elems < 1:
            raise ValueError("n_beams and array_elems must be positive")
        lo, hi = self.sector
        if not -90.0 <= lo < hi <= 90.0:
            raise ValueError(f"invalid sector {self.sector}")
        object.__setattr__(self, "sector", (float(lo), float(hi)))

    @property
    def beam_angles(self) -> np.ndarray:
        return np.linspace(self.sector[0], self.sector[1], self.n_beams)

    @property
    def beam_spacing(self) -> float:
        return (self.sector[1] - self.sector[0]) / max(self.n_beams - 1, 1)

    @property
    def cp_seconds(self) -> float:
        return CP_FRACTION / self.delta_f

    @property
    def max_range_m(self) -> float:
        """Largest round-trip range whose echo stays within the cyclic prefix."""
        return SPEED_OF_LIGHT * self.cp_seconds / 2.0

    def bob_bin(self, distance: float) -> float:
        return distance * self.delta_f * self.n_ifft / SPEED_OF_LIGHT

    def alice_bin(self, distance: float) -> float:
        return 2.0 * self.bob_bin(distance)


@dataclass(frozen=True)
class RaScene:
    """Bob's position relative to Alice plus environment scatterers."""

    bob_range: float
    bob_azimuth: float
    rcs_dbsm: float = 0.0
    clutter_paths: Tuple[Tuple[float, float, float], ...] = ()
    snr_db: float = 10.0


def validate_scene(scene: RaScene, cfg: RaConfig) -> None:
    lo, hi = cfg.sector
    if not 0.0 < scene.bob_range <= cfg.max_range_m:
        raise ValueError(f"Bob range {scene.bob_range} m outside (0, {cfg.max_range_m:.1f}] m")
    if not lo <= scene.bob_azimuth <= hi:
        raise ValueError(f"Bob azimuth {scene.bob_azimuth} deg outside sector [{lo}, {hi}]")
    for rng_m, az, _ in scene.clutter_paths:
        if not 0.0 < rng_m <= cfg.max_range_m:
            raise ValueError(f"clutter range {rng_m} m outside (0, {cfg.max_range_m:.1f}] m")
        if not lo <= az <= hi:
            raise ValueError(f"clutter azimuth {az} deg outside sector [{lo}, {hi}]")


def array_factor(theta_rx: np.ndarray, theta_path: float, elems: int) -> np.ndarray:
    """Normalized ULA response a(theta_rx)^H a(theta_path) / M, half-wavelength spacing."""
    m = np.arange(elems)
    delta = np.sin(np.deg2rad(theta_path)) - np.sin(np.deg2rad(np.asarray(theta_rx)))
    return np.exp(1j * np.pi * np.outer(delta, m)).sum(axis=1) / elems


def beam_gain(theta_rx: np.ndarray, theta_path: float, elems: int) -> np.ndarray:
    """|a(theta_rx)^H a(theta_path)|^2 / M^2."""
    return np.abs(array_factor(theta_rx, theta_path, elems)) ** 2


def _polar(distance: float, azimuth_deg: float) -> np.ndarray:
    a = math.radians(azimuth_deg)
    return np.array([distance * math.cos(a), distance * math.sin(a)])


def _scene_paths(scene: RaScene) -> Tuple[List[Tuple[complex, float, float]], List[Tuple[complex, float, float]]]:
    """(amplitude, delay, arrival angle) lists for Alice's echoes and Bob's arrivals.

    Alice sits at the origin with boresight +x; Bob's array is parallel and faces
    Alice, so the line-of-sight arrival angle is the same at both ends.
    """
    echo_loss = 10 ** (-ALICE_ECHO_LOSS_DB / 20)
    rcs = 10 ** (scene.rcs_dbsm / 10)
    alice = [(echo_loss * math.sqrt(rcs), 2 * scene.bob_range / SPEED_OF_LIGHT, scene.bob_azimuth)]
    bob = [(1.0, scene.bob_range / SPEED_OF_LIGHT, scene.bob_azimuth)]

    bob_pos = _polar(scene.bob_range, scene.bob_azimuth)
    for rng_m, az, gain_db in scene.clutter_paths:
        amp = 10 ** (gain_db / 20)
        alice.append((echo_loss * amp, 2 * rng_m / SPEED_OF_LIGHT, az))
        scatter = _polar(rng_m, az)
        leg = scatter - bob_pos
        arrival = math.degrees(math.atan2(-leg[1], -leg[0]))
        bob.append((amp, (rng_m + float(np.hypot(*leg))) / SPEED_OF_LIGHT, arrival))
    return alice, bob


def _range_profiles(paths, cfg: RaConfig, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    beams = cfg.beam_angles
    subcarriers = np.arange(cfg.n_sc)
    channel = np.zeros((cfg.n_beams, cfg.n_sc), dtype=complex)
    for amp, delay, angle in paths:
        steering = array_factor(beams, angle, cfg.array_elems)
        phase = np.exp(-2j * np.pi * subcarriers * cfg.delta_f * delay)
        channel += amp * np.outer(steering, phase)
    sigma = math.sqrt(10 ** (-snr_db / 10) / 2)
    channel += sigma * (rng.normal(size=channel.shape) + 1j * rng.normal(size=channel.shape))
    # (1/N) |sum_n' h[n'] e^{+j2pi n n'/N}|^2 = N |ifft(h)|^2
    spectrum = np.fft.ifft(channel, n=cfg.n_ifft, axis=1) * cfg.n_ifft
    profiles = np.abs(spectrum) ** 2 / cfg.n_ifft
    return profiles[:, : cfg.n_range_bins].T


def gen_ra_maps(scene: RaScene, cfg: RaConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Synthesize Alice's and Bob's RA maps, each n_range_bins x n_beams, nonnegative.

    Raises:
        ValueError: If the scene lies outside the sector or the CP-limited range
    """
    validate_scene(scene, cfg)
    alice_paths, bob_paths = _scene_paths(scene)
    ra_alice = _range_profiles(alice_paths, cfg, scene.snr_db, rng)
    ra_bob = _range_profiles(bob_paths, cfg, scene.snr_db, rng)
    return ra_alice, ra_bob


def strongest_peak(ra_map: np.ndarray) -> Tuple[int, int]:
    """(range bin, beam index) of the largest entry."""
    r, a = np.unravel_index(int(np.argmax(ra_map)), ra_map.shape)
    return int(r), int(a)


def noise_floor(ra_map: np.ndarray) -> float:
    """Noise floor taken as the 90th percentile of the map's bins."""
    return float(np.percentile(ra_map, 90))


def eve_position_obs(scene: RaScene, delta_d_max: float, delta_theta_max: float,
                     rng: np.random.Generator) -> Tuple[float, float]:
    """Eve's position estimate (d + dd, theta + dtheta), dd ~ U[-dD/2, dD/2], dtheta ~ U[-dT/2, dT/2]."""
    if delta_d_max < 0 or delta_theta_max < 0:
        raise ValueError("uncertainty widths must be nonnegative")
    d_hat = scene.bob_range + rng.uniform(-delta_d_max / 2, delta_d_max / 2)
    theta_hat = scene.bob_azimuth + rng.uniform(-delta_theta_max / 2, delta_theta_max / 2)
    return float(d_hat), float(theta_hat)


@dataclass(frozen=True)
class RaSourceConfig:
    """Scene distribution and Eve model for RA-map datasets."""

    ra: RaConfig = field(default_factory=RaConfig)
    snr_db: float = 10.0
    rcs_dbsm_range: Tuple[float, float] = (-10.0, 10.0)
    range_m: Tuple[float, float] = (5.0, 75.0)
    n_clutter: int = 2
    clutter_gain_db: Tuple[float, float] = (-20.0, -6.0)
    eve_mode: EveMode = EveMode.ABSENT
    eve_delta_d: float = 10.0
    eve_delta_theta: float = 15.0

    def __post_init__(self):
        object.__setattr__(self, "eve_mode", EveMode(self.eve_mode))
        if not 0 < self.range_m[0] < self.range_m[1] <= self.ra.max_range_m:
            raise ValueError(f"range interval {self.range_m} must lie in (0, {self.ra.max_range_m:.1f}]")


def sample_scene(cfg: RaSourceConfig, rng: np.random.Generator) -> RaScene:
    """Bob uniform in range and sector, RCS uniform in dBsm, random clutter scatterers."""
    lo, hi = cfg.ra.sector
    bob_range = rng.uniform(*cfg.range_m)
    bob_azimuth = rng.uniform(lo, hi)
    rcs = rng.uniform(*cfg.rcs_dbsm_range)
    clutter = tuple(
        (float(rng.uniform(*cfg.range_m)), float(rng.uniform(lo, hi)), float(rng.uniform(*cfg.clutter_gain_db)))
        for _ in range(cfg.n_clutter)
    )
    return RaScene(bob_range=float(bob_range), bob_azimuth=float(bob_azimuth), rcs_dbsm=float(rcs),
                   clutter_paths=clutter, snr_db=cfg.snr_db)


def to_log_power(ra_map: np.ndarray) -> np.ndarray:
    return 10.0 * np.log10(np.maximum(ra_map, LOG_POWER_FLOOR))


def gen_ramap_batch(cfg: RaSourceConfig, batch: int, rng: np.random.Generator) -> SampleBatch:
    """Rows of flattened log-power RA maps (range-major), with Eve's view per mode."""
    width = cfg.ra.n_range_bins * cfg.ra.n_beams
    x = np.empty((batch, width))
    y = np.empty((batch, width))
    z = np.zeros((batch, 0 if cfg.eve_mode is EveMode.ABSENT else 2))
    for i in range(batch):
        scene = sample_scene(cfg, rng)
        ra_alice, ra_bob = gen_ra_maps(scene, cfg.ra, rng)
        x[i] = to_log_power(ra_alice).ravel()
        y[i] = to_log_power(ra_bob).ravel()
        if cfg.eve_mode is EveMode.CORRELATED:
            z[i] = eve_position_obs(scene, cfg.eve_delta_d, cfg.eve_delta_theta, rng)
        elif cfg.eve_mode is EveMode.UNCORRELATED:
            lo, hi = cfg.ra.sector
            z[i] = (rng.uniform(*cfg.range_m), rng.uniform(lo, hi))
    return SampleBatch(x, y, z)


################### input normalization ###################

@dataclass
class Standardizer:
    """Per-feature zero-mean / unit-variance map fit on the training split."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> "Standardizer":
        data = np.asarray(data, dtype=np.float64)
        std = data.std(axis=0)
        return cls(mean=data.mean(axis=0), std=np.where(std > 0, std, 1.0))

    @classmethod
    def identity(cls, width: int) -> "Standardizer":
        return cls(mean=np.zeros(width), std=np.ones(width))

    def apply(self, data: np.ndarray) -> np.ndarray:
        return (np.asarray(data, dtype=np.float64) - self.mean) / self.std


################### batch sources for training ###################

class FadingSource:
    """Fresh simulator draws per batch."""

    def __init__(self, cfg: FadingConfig):
        self.cfg = cfg
        self.dims = (cfg.dim, cfg.dim, 0 if cfg.eve_mode is EveMode.ABSENT else cfg.dim)

    def sample(self, batch: int, rng: np.random.Generator) -> SampleBatch:
        return gen_fading(self.cfg, batch, rng)


class RaMapSource:
    """Fresh scenes per batch."""

    def __init__(self, cfg: RaSourceConfig):
        self.cfg = cfg
        width = cfg.ra.n_range_bins * cfg.ra.n_beams
        self.dims = (width, width, 0 if cfg.eve_mode is EveMode.ABSENT else 2)

    def sample(self, batch: int, rng: np.random.Generator) -> SampleBatch:
        return gen_ramap_batch(self.cfg, batch, rng)


class DatasetSource:
    """Uniform row draws (with replacement across batches) from a stored dataset."""

    def __init__(self, data: SampleBatch):
        if len(data) == 0:
            raise ValueError("dataset is empty")
        self.data = data
        self.dims = data.dims

    def sample(self, batch: int, rng: np.random.Generator) -> SampleBatch:
        index = rng.choice(len(self.data), size=batch, replace=batch > len(self.data))
        return self.data.take(np.sort(index))


def batch_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator keyed by (seed, stream ids)."""
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *stream]))
