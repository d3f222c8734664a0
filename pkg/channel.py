#!/usr/bin/env python3
"""
Channel Module

This module synthesizes every wireless link of the full-duplex network from
geometry using the field-response model C = F^H Sigma E, where antenna and
RIS element positions enter only through per-path phase terms. It also
provides the analytic derivative of every link with respect to a single
position coordinate, and a versioned JSON format for channel realizations.

Author: MA-FD Optimizer
Version: 1.0
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

REALIZATION_FORMAT_VERSION = 1

# Link keys: BS->RIS, RIS->BS, BS->DL, UL->BS, RIS->DL, UL->RIS, BS_tx->BS_rx.
LINKS: Tuple[str, ...] = ("BR", "RB", "Bd", "Bu", "Rd", "Ru", "SI")

DEFAULT_PATH_LOSS_EXPONENTS = {
    "BR": 2.1, "RB": 2.1, "Bd": 3.5, "Bu": 3.5, "Rd": 2.2, "Ru": 2.2, "ud": 3.7,
}
DEFAULT_NUM_PATHS = {link: 6 for link in LINKS}


class ConfigurationError(ValueError):
    """Raised when a scenario, sweep or link description is inconsistent."""


class PositionError(ValueError):
    """Raised when a PositionSet violates its region box or minimum separation."""


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** (value_dbm / 10.0) / 1000.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical constants, placements, budgets and thresholds of one scenario."""
    wavelength_m: float = 0.1
    beta0_db: float = -30.0
    path_loss_exponents: Dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_PATH_LOSS_EXPONENTS))
    num_paths: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_NUM_PATHS))
    bs_position_m: Tuple[float, float, float] = (5.0, 0.0, 15.0)
    ris_position_m: Tuple[float, float, float] = (0.0, 10.0, 10.0)
    ul_position_m: Tuple[float, float, float] = (65.0, 60.0, 1.5)
    dl_position_m: Tuple[float, float, float] = (5.0, 80.0, 1.5)
    region_side_m: float = 0.4
    min_separation_m: float = 0.05
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 1.0
    si_db: float = -90.0
    eta: float = 1e-8
    power_bs_max_dbm: float = 37.0
    power_ul_max_dbm: float = 20.0
    rate_threshold_dl_bps_hz: float = 1.0
    rate_threshold_ul_bps_hz: float = 1.0
    num_tx_antennas: int = 4
    num_rx_antennas: int = 2
    num_elements: int = 16

    # Derived quantities

    @property
    def beta0(self) -> float:
        return db_to_linear(self.beta0_db)

    @property
    def noise_power_w(self) -> float:
        return dbm_to_watts(self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_hz))

    @property
    def power_bs_max_w(self) -> float:
        return dbm_to_watts(self.power_bs_max_dbm)

    @property
    def power_ul_max_w(self) -> float:
        return dbm_to_watts(self.power_ul_max_dbm)

    @property
    def gamma_min_dl(self) -> float:
        return 2.0 ** self.rate_threshold_dl_bps_hz - 1.0

    @property
    def gamma_min_ul(self) -> float:
        return 2.0 ** self.rate_threshold_ul_bps_hz - 1.0

    def link_distance_m(self, link: str) -> float:
        """Endpoint distance of a link; the SI link uses the unit reference distance."""
        ends = {
            "BR": (self.bs_position_m, self.ris_position_m),
            "RB": (self.ris_position_m, self.bs_position_m),
            "Bd": (self.bs_position_m, self.dl_position_m),
            "Bu": (self.ul_position_m, self.bs_position_m),
            "Rd": (self.ris_position_m, self.dl_position_m),
            "Ru": (self.ul_position_m, self.ris_position_m),
            "ud": (self.ul_position_m, self.dl_position_m),
        }
        if link == "SI":
            return 1.0
        if link not in ends:
            raise ConfigurationError(f"Unknown link '{link}'")
        a, b = ends[link]
        return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))

    def path_variance(self, link: str) -> float:
        """Per-path gain variance beta0 * d^-alpha / L (SI: 10^(si_db/10) / L)."""
        num = self.num_paths[link]
        if link == "SI":
            return db_to_linear(self.si_db) / num
        alpha = self.path_loss_exponents[link]
        return self.beta0 * self.link_distance_m(link) ** (-alpha) / num

    def with_overrides(self, **changes: Any) -> "ScenarioConfig":
        data = self.to_dict()
        data.update(changes)
        return ScenarioConfig.from_dict(data)

    # Validation and serialization

    def validate(self) -> None:
        """Check every invariant, raising ConfigurationError on the first violation."""
        if not self.wavelength_m > 0:
            raise ConfigurationError(f"wavelength_m must be > 0, got {self.wavelength_m}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigurationError(f"eta must lie in [0, 1], got {self.eta}")
        if self.min_separation_m < 0 or self.region_side_m <= 0:
            raise ConfigurationError("region_side_m must be > 0 and min_separation_m >= 0")
        if self.bandwidth_hz <= 0:
            raise ConfigurationError(f"bandwidth_hz must be > 0, got {self.bandwidth_hz}")
        for name in ("num_tx_antennas", "num_rx_antennas", "num_elements"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        for link in LINKS:
            if self.num_paths.get(link, 0) < 1:
                raise ConfigurationError(f"num_paths['{link}'] must be >= 1")
        for link in ("BR", "RB", "Bd", "Bu", "Rd", "Ru", "ud"):
            if link not in self.path_loss_exponents:
                raise ConfigurationError(f"Missing path-loss exponent for link '{link}'")
        for name in ("bs_position_m", "ris_position_m", "ul_position_m", "dl_position_m"):
            if len(getattr(self, name)) != 3:
                raise ConfigurationError(f"{name} must be a 3-vector")
        for count_name in ("num_tx_antennas", "num_rx_antennas", "num_elements"):
            count = getattr(self, count_name)
            needed = self.min_separation_m * (math.ceil(math.sqrt(count)) - 1)
            if self.region_side_m + 1e-12 < needed:
                raise ConfigurationError(
                    f"region_side_m={self.region_side_m} cannot pack {count_name}={count} "
                    f"at separation {self.min_separation_m} (needs {needed:.6g})")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for name in ("bs_position_m", "ris_position_m", "ul_position_m", "dl_position_m"):
            data[name] = list(data[name])
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown configuration keys: {', '.join(unknown)}")
        values = dict(data)
        for name in ("bs_position_m", "ris_position_m", "ul_position_m", "dl_position_m"):
            if name in values:
                values[name] = tuple(float(x) for x in values[name])
        if "path_loss_exponents" in values:
            merged = dict(DEFAULT_PATH_LOSS_EXPONENTS)
            merged.update(values["path_loss_exponents"])
            values["path_loss_exponents"] = merged
        if "num_paths" in values:
            merged_paths = dict(DEFAULT_NUM_PATHS)
            merged_paths.update({k: int(v) for k, v in values["num_paths"].items()})
            values["num_paths"] = merged_paths
        config = cls(**values)
        config.validate()
        return config


def load_config(config_path: str) -> ScenarioConfig:
    """
    Load a scenario configuration from a JSON file.

    Args:
        config_path: Path to the JSON file (unit-suffixed keys)

    Returns:
        Validated ScenarioConfig
    """
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"Configuration file not found: {config_path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in configuration file {config_path}: {e}")
    logger.debug(f"Loaded scenario configuration from {config_path}")
    return ScenarioConfig.from_dict(data)


@dataclass(frozen=True)
class PathSet:
    """Per-path gains and two-ended angles of one link."""
    gains: np.ndarray
    tx_elevation: np.ndarray
    tx_azimuth: np.ndarray
    rx_elevation: np.ndarray
    rx_azimuth: np.ndarray

    def __post_init__(self):
        size = len(self.gains)
        for name in ("tx_elevation", "tx_azimuth", "rx_elevation", "rx_azimuth"):
            if len(getattr(self, name)) != size:
                raise ConfigurationError(f"PathSet field '{name}' does not match {size} paths")
        if not np.all(np.isfinite(self.gains)):
            raise ConfigurationError("PathSet gains must be finite")

    @property
    def num_paths(self) -> int:
        return len(self.gains)

    def tx_directions(self) -> Tuple[np.ndarray, np.ndarray]:
        return _direction_cosines(self.tx_elevation, self.tx_azimuth)

    def rx_directions(self) -> Tuple[np.ndarray, np.ndarray]:
        return _direction_cosines(self.rx_elevation, self.rx_azimuth)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gains_re": self.gains.real.tolist(),
            "gains_im": self.gains.imag.tolist(),
            "tx_elevation": self.tx_elevation.tolist(),
            "tx_azimuth": self.tx_azimuth.tolist(),
            "rx_elevation": self.rx_elevation.tolist(),
            "rx_azimuth": self.rx_azimuth.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PathSet":
        return cls(
            gains=np.asarray(data["gains_re"], dtype=float) + 1j * np.asarray(data["gains_im"], dtype=float),
            tx_elevation=np.asarray(data["tx_elevation"], dtype=float),
            tx_azimuth=np.asarray(data["tx_azimuth"], dtype=float),
            rx_elevation=np.asarray(data["rx_elevation"], dtype=float),
            rx_azimuth=np.asarray(data["rx_azimuth"], dtype=float),
        )


def _direction_cosines(elevation: np.ndarray, azimuth: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-path (kappa_x, kappa_y) = (cos(theta) sin(phi), sin(theta))."""
    return np.cos(elevation) * np.sin(azimuth), np.sin(elevation)


@dataclass(frozen=True)
class ScenarioRealization:
    """Sampled path sets of the seven links plus the inter-user scalar."""
    paths: Dict[str, PathSet]
    inter_user: complex
    wavelength_m: float

    def __post_init__(self):
        missing = [link for link in LINKS if link not in self.paths]
        if missing:
            raise ConfigurationError(f"Realization is missing links: {', '.join(missing)}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": REALIZATION_FORMAT_VERSION,
            "wavelength_m": self.wavelength_m,
            "inter_user": [float(np.real(self.inter_user)), float(np.imag(self.inter_user))],
            "links": {link: self.paths[link].to_dict() for link in LINKS},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioRealization":
        version = data.get("format_version")
        if version != REALIZATION_FORMAT_VERSION:
            raise ConfigurationError(f"Unsupported realization format_version: {version}")
        re_part, im_part = data["inter_user"]
        return cls(
            paths={link: PathSet.from_dict(data["links"][link]) for link in LINKS},
            inter_user=complex(re_part, im_part),
            wavelength_m=float(data["wavelength_m"]),
        )


def save_realization(realization: ScenarioRealization, output_path: str) -> None:
    with open(output_path, 'w', encoding='utf-8') as f:
        json.dump(realization.to_dict(), f, indent=2)
    logger.debug(f"Realization saved to {output_path}")


def load_realization(input_path: str) -> ScenarioRealization:
    try:
        with open(input_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"Realization file not found: {input_path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in realization file {input_path}: {e}")
    return ScenarioRealization.from_dict(data)


def sample_realization(config: ScenarioConfig, seed: int) -> ScenarioRealization:
    """
    Draw one channel realization.

    Path gains are CSCG with variance beta0 * d^-alpha / L for the link's
    endpoint distance; all angles are uniform on [0, 2*pi]. The inter-user
    scalar is a single CSCG coefficient with variance beta0 * d_ud^-alpha_ud.

    Args:
        config: Validated scenario configuration
        seed: Seed of the random generator

    Returns:
        ScenarioRealization determined by (config, seed)
    """
    rng = np.random.default_rng(seed)
    paths = {}
    for link in LINKS:
        num = config.num_paths[link]
        angles = rng.uniform(0.0, 2.0 * np.pi, size=(4, num))
        scale = math.sqrt(config.path_variance(link) / 2.0)
        gains = scale * (rng.normal(size=num) + 1j * rng.normal(size=num))
        paths[link] = PathSet(gains=gains, tx_elevation=angles[0], tx_azimuth=angles[1],
                              rx_elevation=angles[2], rx_azimuth=angles[3])
    ud_scale = math.sqrt(
        config.beta0 * config.link_distance_m("ud") ** (-config.path_loss_exponents["ud"]) / 2.0)
    inter_user = complex(ud_scale * rng.normal(), ud_scale * rng.normal())
    return ScenarioRealization(paths=paths, inter_user=inter_user, wavelength_m=config.wavelength_m)


@dataclass(frozen=True)
class PositionSet:
    """2-D local coordinates (2 x M, metres) of one movable array."""
    coords: np.ndarray
    half_side_m: float
    min_separation_m: float

    @property
    def count(self) -> int:
        return self.coords.shape[1]

    def min_pairwise_distance(self) -> float:
        if self.count < 2:
            return math.inf
        diffs = self.coords[:, :, None] - self.coords[:, None, :]
        dist = np.sqrt(np.sum(diffs ** 2, axis=0))
        return float(dist[np.triu_indices(self.count, k=1)].min())

    def validate(self, tol: float = 1e-9) -> None:
        """Raise PositionError naming the violated constraint and index."""
        if self.coords.ndim != 2 or self.coords.shape[0] != 2:
            raise PositionError(f"Positions must be a 2 x M matrix, got shape {self.coords.shape}")
        limit = self.half_side_m * (1.0 + tol)
        outside = np.where(np.any(np.abs(self.coords) > limit, axis=0))[0]
        if outside.size:
            raise PositionError(
                f"Region box violated: column {int(outside[0])} at {self.coords[:, outside[0]].tolist()} "
                f"outside [-{self.half_side_m}, {self.half_side_m}]^2")
        floor = self.min_separation_m * (1.0 - tol)
        for m in range(self.count):
            for k in range(m + 1, self.count):
                dist = float(np.linalg.norm(self.coords[:, m] - self.coords[:, k]))
                if dist < floor:
                    raise PositionError(
                        f"Minimum separation violated: columns {m} and {k} are {dist:.6g} m apart "
                        f"(min {self.min_separation_m})")

    def with_coords(self, coords: np.ndarray) -> "PositionSet":
        return PositionSet(coords=np.array(coords, dtype=float), half_side_m=self.half_side_m,
                           min_separation_m=self.min_separation_m)

    def to_dict(self) -> Dict[str, Any]:
        return {"coords": self.coords.tolist(), "half_side_m": self.half_side_m,
                "min_separation_m": self.min_separation_m}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PositionSet":
        return cls(coords=np.asarray(data["coords"], dtype=float).reshape(2, -1),
                   half_side_m=float(data["half_side_m"]),
                   min_separation_m=float(data["min_separation_m"]))


@dataclass(frozen=True)
class ChannelSet:
    """Assembled links; vector channels are stored as 1-D arrays."""
    H: np.ndarray       # N x M_t, BS -> RIS
    G: np.ndarray       # M_r x N, RIS -> BS
    h_d: np.ndarray     # M_t, BS -> DL
    h_u: np.ndarray     # M_r, UL -> BS
    h_ris_dl: np.ndarray  # N, RIS -> DL
    g: np.ndarray       # N, UL -> RIS
    F_si: np.ndarray    # M_r x M_t, BS_tx -> BS_rx
    inter_user: complex

    def items(self) -> Iterator[Tuple[str, Any]]:
        for f in fields(self):
            yield f.name, getattr(self, f.name)

    def equals(self, other: "ChannelSet") -> bool:
        return all(np.array_equal(value, getattr(other, name)) for name, value in self.items())


def frv(position: np.ndarray, paths: PathSet, wavelength_m: float, side: str = "tx") -> np.ndarray:
    """
    Field-response vector of one antenna for one link end.

    Element l is exp(j*2*pi/lambda*(x*cos(theta_l)*sin(phi_l) + y*sin(theta_l)))
    with the angles of the requested end ('tx' departure, 'rx' arrival).
    """
    kx, ky = paths.tx_directions() if side == "tx" else paths.rx_directions()
    x, y = float(position[0]), float(position[1])
    return np.exp(1j * (2.0 * np.pi / wavelength_m) * (x * kx + y * ky))


def frm(positions: np.ndarray, paths: PathSet, wavelength_m: float, side: str = "tx") -> np.ndarray:
    """Field-response matrix (L x count), one FRV per column."""
    kx, ky = paths.tx_directions() if side == "tx" else paths.rx_directions()
    phase = np.outer(kx, positions[0]) + np.outer(ky, positions[1])
    return np.exp(1j * (2.0 * np.pi / wavelength_m) * phase)


def assemble_channel(recv_frm: np.ndarray, prm: np.ndarray, tx_frm: np.ndarray) -> np.ndarray:
    """
    Return F^H Sigma E.

    Args:
        recv_frm: L x N_r receive field-response matrix
        prm: length-L path gains or L x L diagonal path-response matrix
        tx_frm: L x N_t transmit field-response matrix
    """
    gains = np.diag(prm) if np.ndim(prm) == 2 else np.asarray(prm)
    if recv_frm.ndim != 2 or tx_frm.ndim != 2:
        raise ConfigurationError("Field-response matrices must be 2-D")
    if not (recv_frm.shape[0] == tx_frm.shape[0] == gains.shape[0]):
        raise ConfigurationError(
            f"Path dimension mismatch: recv {recv_frm.shape}, prm {gains.shape}, tx {tx_frm.shape}")
    return recv_frm.conj().T @ (gains[:, None] * tx_frm)


_ORIGIN = np.zeros((2, 1))


class CoordinateArray(Enum):
    TX = "T_t"
    RX = "T_r"
    RIS = "R"


@dataclass(frozen=True)
class CoordinateId:
    """One scalar coordinate: axis 0 is x, 1 is y of column `index` of `array`."""
    array: CoordinateArray
    index: int
    axis: int


# (link, tx-side array, rx-side array); None means the fixed reference point.
_LINK_ENDS = {
    "BR": (CoordinateArray.TX, CoordinateArray.RIS),
    "RB": (CoordinateArray.RIS, CoordinateArray.RX),
    "Bd": (CoordinateArray.TX, None),
    "Bu": (None, CoordinateArray.RX),
    "Rd": (CoordinateArray.RIS, None),
    "Ru": (None, CoordinateArray.RIS),
    "SI": (CoordinateArray.TX, CoordinateArray.RX),
}


def _link_matrices(real: ScenarioRealization, arrays: Dict[CoordinateArray, np.ndarray]) -> Dict[str, np.ndarray]:
    lam = real.wavelength_m
    out = {}
    for link, (tx_arr, rx_arr) in _LINK_ENDS.items():
        paths = real.paths[link]
        tx_pos = arrays[tx_arr] if tx_arr is not None else _ORIGIN
        rx_pos = arrays[rx_arr] if rx_arr is not None else _ORIGIN
        out[link] = assemble_channel(frm(rx_pos, paths, lam, "rx"), paths.gains,
                                     frm(tx_pos, paths, lam, "tx"))
    return out


def _to_channel_set(mats: Dict[str, np.ndarray], inter_user: complex) -> ChannelSet:
    return ChannelSet(
        H=mats["BR"], G=mats["RB"], h_d=mats["Bd"][0, :], h_u=mats["Bu"][:, 0],
        h_ris_dl=mats["Rd"][0, :], g=mats["Ru"][:, 0], F_si=mats["SI"], inter_user=inter_user)


def build_channels(real: ScenarioRealization, T_t: PositionSet, T_r: PositionSet,
                   R: PositionSet, validate: bool = True) -> ChannelSet:
    """
    Assemble all seven links for the given layouts; I is copied from the realization.

    `validate=False` skips the layout checks, for finite-difference probes
    and SCA trial points that may sit outside the feasible set.
    """
    if validate:
        for pos in (T_t, T_r, R):
            pos.validate()
    arrays = {CoordinateArray.TX: T_t.coords, CoordinateArray.RX: T_r.coords,
              CoordinateArray.RIS: R.coords}
    return _to_channel_set(_link_matrices(real, arrays), real.inter_user)


def d_channel_d_position(real: ScenarioRealization, T_t: PositionSet, T_r: PositionSet,
                         R: PositionSet, which: CoordinateId) -> ChannelSet:
    """
    Partial derivative of every link with respect to one position coordinate.

    A transmit-side coordinate perturbs one column of E, giving
    dE[:, m]/dq = j*(2*pi/lambda)*kappa_q*E[:, m]; a receive-side coordinate
    perturbs one column of F and therefore one row of F^H Sigma E. Links that
    do not depend on the coordinate report zeros; dI/dq is always 0.
    """
    arrays = {CoordinateArray.TX: T_t.coords, CoordinateArray.RX: T_r.coords,
              CoordinateArray.RIS: R.coords}
    target = arrays[which.array]
    if which.axis not in (0, 1) or not 0 <= which.index < target.shape[1]:
        raise ConfigurationError(
            f"Coordinate out of range: {which.array.value}[{which.axis}, {which.index}] "
            f"for {target.shape[1]} columns")
    lam = real.wavelength_m
    k = 2.0 * np.pi / lam
    mats = {}
    for link, (tx_arr, rx_arr) in _LINK_ENDS.items():
        paths = real.paths[link]
        tx_pos = arrays[tx_arr] if tx_arr is not None else _ORIGIN
        rx_pos = arrays[rx_arr] if rx_arr is not None else _ORIGIN
        E = frm(tx_pos, paths, lam, "tx")
        F = frm(rx_pos, paths, lam, "rx")
        deriv = np.zeros((F.shape[1], E.shape[1]), dtype=complex)
        if tx_arr is which.array:
            kappa = paths.tx_directions()[which.axis]
            dE_col = 1j * k * kappa * E[:, which.index]
            deriv[:, which.index] += F.conj().T @ (paths.gains * dE_col)
        if rx_arr is which.array:
            kappa = paths.rx_directions()[which.axis]
            dF_col = 1j * k * kappa * F[:, which.index]
            deriv[which.index, :] += dF_col.conj() @ (paths.gains[:, None] * E)
        mats[link] = deriv
    return _to_channel_set(mats, 0j)


def iter_coordinates(array: CoordinateArray, count: int) -> Iterator[CoordinateId]:
    """Coordinates in vec() order: x0, y0, x1, y1, ..."""
    for index in range(count):
        for axis in (0, 1):
            yield CoordinateId(array=array, index=index, axis=axis)


def grid_positions(count: int, side_m: float, spacing_m: float) -> np.ndarray:
    """
    Compact centred sub-grid of `count` points with the given spacing.

    Raises:
        ConfigurationError: the region cannot hold `count` points on the grid
    """
    per_side = int(math.floor(side_m / spacing_m + 1e-9)) + 1 if spacing_m > 0 else count
    capacity = per_side ** 2
    if count > capacity:
        raise ConfigurationError(
            f"Cannot place {count} points: grid capacity is {capacity} "
            f"({per_side}x{per_side} at spacing {spacing_m} m in side {side_m} m)")
    n_side = math.ceil(math.sqrt(count))
    offsets = (np.arange(n_side) - (n_side - 1) / 2.0) * spacing_m
    xs, ys = np.meshgrid(offsets, offsets)
    points = np.vstack([xs.ravel(), ys.ravel()])[:, :count]
    return points


def initial_position_set(config: ScenarioConfig, count: int) -> PositionSet:
    coords = grid_positions(count, config.region_side_m, config.min_separation_m)
    return PositionSet(coords=coords, half_side_m=config.region_side_m / 2.0,
                       min_separation_m=config.min_separation_m)


def describe(config: Optional[ScenarioConfig] = None) -> str:
    cfg = config or ScenarioConfig()
    return (f"M_t={cfg.num_tx_antennas}, M_r={cfg.num_rx_antennas}, N={cfg.num_elements}, "
            f"A={cfg.region_side_m} m, d0={cfg.min_separation_m} m, eta={cfg.eta:g}")
