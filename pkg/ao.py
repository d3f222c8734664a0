#!/usr/bin/env python3
"""
AO Module

Alternating optimization over the blocks omega -> v -> p -> Phi -> T_t ->
T_r -> R: initialization, the outer loop with its stopping rule, variant
masks for fixed-antenna / fixed-element baselines, and the per-iteration
trace with CSV and JSON snapshot export.

Author: MA-FD Optimizer
Version: 1.0
"""

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from channel import (ChannelSet, ConfigurationError, CoordinateArray, ScenarioConfig,
                     ScenarioRealization, build_channels, initial_position_set)
from metrics import (OptState, RateReport, effective_dl_channel, effective_ul_channel, sum_rate)
from subproblems import (SrocrSettings, TrustRegionState, update_omega, update_p, update_phi,
                         update_positions, update_v)

logger = logging.getLogger(__name__)

BLOCK_ORDER: Tuple[str, ...] = ("omega", "v", "p", "phases", "T_t", "T_r", "R")
POSITION_BLOCKS = {"T_t": CoordinateArray.TX, "T_r": CoordinateArray.RX, "R": CoordinateArray.RIS}


@dataclass(frozen=True)
class VariantMask:
    """Enables or disables each block; a disabled position block keeps its initial layout."""
    optimize_beamformer: bool = True
    optimize_combiner: bool = True
    optimize_power: bool = True
    optimize_phases: bool = True
    move_tx_antennas: bool = True
    move_rx_antennas: bool = True
    move_ris_elements: bool = True

    def enabled(self, block: str) -> bool:
        return {
            "omega": self.optimize_beamformer, "v": self.optimize_combiner, "p": self.optimize_power,
            "phases": self.optimize_phases, "T_t": self.move_tx_antennas,
            "T_r": self.move_rx_antennas, "R": self.move_ris_elements,
        }[block]


VARIANTS: Dict[str, VariantMask] = {
    "MA-ME": VariantMask(),
    "FA-ME": VariantMask(move_tx_antennas=False, move_rx_antennas=False),
    "MA-FE": VariantMask(move_ris_elements=False),
    "FA-FE": VariantMask(move_tx_antennas=False, move_rx_antennas=False, move_ris_elements=False),
}
DUPLEX_MODES = ("FD", "HD")


def parse_variant(name: str) -> Tuple[VariantMask, str]:
    """'MA-ME' -> (mask, 'FD'); 'FA-FE-HD' -> (mask, 'HD')."""
    base, duplex = name, "FD"
    if name.endswith("-HD"):
        base, duplex = name[:-3], "HD"
    if base not in VARIANTS:
        valid = ", ".join(list(VARIANTS) + [f"{v}-HD" for v in VARIANTS])
        raise ConfigurationError(f"Unknown variant '{name}'. Valid variants: {valid}")
    return VARIANTS[base], duplex


@dataclass(frozen=True)
class AoSettings:
    """Stopping rule, inner caps and trust-region starting radii."""
    epsilon: float = 1e-3
    max_iterations: int = 50
    inner_sca_iterations: int = 10
    phase_radius_rad: float = 0.25
    position_radius_wavelengths: float = 0.25
    power_tol: float = 1e-4
    srocr: SrocrSettings = field(default_factory=SrocrSettings)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AoSettings":
        values = dict(data)
        if "srocr" in values:
            values["srocr"] = SrocrSettings(**values["srocr"])
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class AoIterationRecord:
    iteration: int
    rate_sum: float
    rate_dl: float
    rate_ul: float
    gamma_dl: float
    gamma_ul: float
    feasible: bool
    qos_dl_ok: bool
    qos_ul_ok: bool
    srocr_iterations: int = 0
    srocr_rank_ratio: float = math.nan
    srocr_gap: float = math.nan
    trust_radii: Dict[str, float] = field(default_factory=dict)
    block_times: Dict[str, float] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)


@dataclass
class AoTrace:
    records: List[AoIterationRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return max(0, len(self.records) - 1)

    @property
    def rates(self) -> List[float]:
        return [r.rate_sum for r in self.records]

    @property
    def final(self) -> AoIterationRecord:
        return self.records[-1]

    def is_monotone(self, tol: float = 1e-6) -> bool:
        return all(b >= a - tol for a, b in zip(self.rates, self.rates[1:]))

    def to_frame(self, include_timing: bool = False) -> pd.DataFrame:
        """One row per iteration; wall times only on request so exports stay reproducible."""
        rows = []
        for r in self.records:
            row = {k: v for k, v in asdict(r).items()
                   if k not in ("trust_radii", "block_times", "errors")}
            row.update({f"radius_{k}": v for k, v in r.trust_radii.items()})
            if include_timing:
                row.update({f"time_{k}": v for k, v in r.block_times.items()})
            row["errors"] = "; ".join(r.errors)
            rows.append(row)
        return pd.DataFrame(rows)

    def to_csv(self, path: str, include_timing: bool = False) -> None:
        self.to_frame(include_timing).to_csv(path, index=False, float_format="%.17g")


def save_state(state: OptState, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(state.to_dict(), f, indent=2)


def load_state(path: str) -> OptState:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return OptState.from_dict(json.load(f))
    except FileNotFoundError:
        raise ConfigurationError(f"State snapshot not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in state snapshot {path}: {e}")


def initialize(config: ScenarioConfig, realization: ScenarioRealization, seed: int) -> OptState:
    """
    Feasible starting point.

    Arrays sit on a compact d0 grid inside their regions, phases are uniform
    random, omega is maximum-ratio towards the downlink effective channel at
    full power, v is the matched filter and p = P_u_max.

    Raises:
        ConfigurationError: an array does not fit its region on the grid
    """
    T_t = initial_position_set(config, config.num_tx_antennas)
    T_r = initial_position_set(config, config.num_rx_antennas)
    R = initial_position_set(config, config.num_elements)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, config.num_elements)
    ch = build_channels(realization, T_t, T_r, R)

    h_dl = effective_dl_channel(ch, theta)
    omega = np.zeros(config.num_tx_antennas, dtype=complex)
    if np.linalg.norm(h_dl) > 0:
        omega = h_dl.conj() / np.linalg.norm(h_dl)
    else:
        omega[0] = 1.0
    omega = omega * math.sqrt(config.power_bs_max_w)

    a = effective_ul_channel(ch, theta)
    v = np.zeros(config.num_rx_antennas, dtype=complex)
    if np.linalg.norm(a) > 0:
        v = a / np.linalg.norm(a)
    else:
        v[0] = 1.0
    return OptState(omega=omega, v=v, p=config.power_ul_max_w, theta=theta, T_t=T_t, T_r=T_r, R=R)


class AlternatingOptimizer:
    """
    Runs the block loop for one (config, realization, mask).

    Every block is guarded by the true sum rate, so the trace is
    non-decreasing; a block that raises is logged, recorded in the
    iteration's errors and leaves the state untouched.
    """

    def __init__(self, config: ScenarioConfig, realization: ScenarioRealization,
                 mask: Optional[VariantMask] = None, settings: Optional[AoSettings] = None):
        self.config = config
        self.realization = realization
        self.mask = mask or VariantMask()
        self.settings = settings or AoSettings()
        self.trust = {"phases": TrustRegionState.for_phases(self.settings.phase_radius_rad)}
        for block in POSITION_BLOCKS:
            self.trust[block] = TrustRegionState.for_positions(
                config, self.settings.position_radius_wavelengths)
        self._srocr_info: Dict[str, float] = {}

    def _rate(self, ch: ChannelSet, state: OptState) -> float:
        return sum_rate(ch, state, self.config).rate_sum

    def _block(self, name: str, ch: ChannelSet, state: OptState) -> Tuple[OptState, ChannelSet]:
        cfg = self.config
        if name == "omega":
            update = update_omega(ch, state, cfg, self.settings.srocr)
            self._srocr_info = {"iterations": update.srocr_iterations,
                                "ratio": update.rank_ratio, "gap": update.gap}
            return state.evolve(omega=update.omega), ch
        if name == "v":
            v, _ = update_v(ch, state, cfg)
            return state.evolve(v=v), ch
        if name == "p":
            update = update_p(ch, state, cfg, self.settings.power_tol)
            return state.evolve(p=update.p), ch
        if name == "phases":
            outcome = update_phi(ch, state, cfg, self.trust["phases"], self.settings.inner_sca_iterations,
                                 track_combiner=self.mask.optimize_combiner)
            self.trust["phases"] = outcome.trust
            return state.evolve(theta=outcome.x, v=outcome.v), ch
        which = POSITION_BLOCKS[name]
        update = update_positions(self.realization, state, cfg, which, self.trust[name],
                                  self.settings.inner_sca_iterations,
                                  track_combiner=self.mask.optimize_combiner)
        self.trust[name] = update.trust
        return state.evolve(v=update.v, **{name: update.positions}), update.channels

    def _record(self, iteration: int, report: RateReport, times: Dict[str, float],
                errors: List[str]) -> AoIterationRecord:
        return AoIterationRecord(
            iteration=iteration, rate_sum=report.rate_sum, rate_dl=report.rate_dl,
            rate_ul=report.rate_ul, gamma_dl=report.gamma_dl, gamma_ul=report.gamma_ul,
            feasible=report.feasible, qos_dl_ok=report.qos_dl_ok, qos_ul_ok=report.qos_ul_ok,
            srocr_iterations=int(self._srocr_info.get("iterations", 0)),
            srocr_rank_ratio=float(self._srocr_info.get("ratio", math.nan)),
            srocr_gap=float(self._srocr_info.get("gap", math.nan)),
            trust_radii={k: t.radius for k, t in self.trust.items()},
            block_times=times, errors=errors)

    def run(self, state: OptState) -> Tuple[OptState, AoTrace]:
        ch = build_channels(self.realization, state.T_t, state.T_r, state.R)
        report = sum_rate(ch, state, self.config)
        trace = AoTrace(records=[self._record(0, report, {}, [])])
        previous = report.rate_sum

        for iteration in range(1, self.settings.max_iterations + 1):
            times: Dict[str, float] = {}
            errors: List[str] = []
            self._srocr_info = {}
            for name in BLOCK_ORDER:
                if not self.mask.enabled(name):
                    continue
                start = time.perf_counter()
                try:
                    before = self._rate(ch, state)
                    new_state, new_ch = self._block(name, ch, state)
                    if self._rate(new_ch, new_state) >= before:
                        state, ch = new_state, new_ch
                    else:
                        logger.debug(f"Block {name} rejected (rate would decrease)")
                except Exception as e:
                    logger.error(f"Block {name} failed at iteration {iteration}: {e}")
                    errors.append(f"{name}: {e}")
                times[name] = time.perf_counter() - start

            report = sum_rate(ch, state, self.config)
            trace.records.append(self._record(iteration, report, times, errors))
            logger.info(f"AO iteration {iteration}: R_sum={report.rate_sum:.6f} "
                        f"(DL {report.rate_dl:.4f}, UL {report.rate_ul:.4f}) feasible={report.feasible}")
            if report.rate_sum - previous <= self.settings.epsilon:
                trace.converged = True
                break
            previous = report.rate_sum
        return state, trace


def run(config: ScenarioConfig, realization: ScenarioRealization, mask: Optional[VariantMask] = None,
        seed: int = 0, settings: Optional[AoSettings] = None,
        initial_state: Optional[OptState] = None) -> Tuple[OptState, AoTrace]:
    """
    Initialize (unless a state is given) and run the alternating optimization.

    Args:
        config: Scenario configuration
        realization: Channel realization
        mask: Enabled blocks (default: all)
        seed: Seed for the random initial phases
        settings: Algorithm settings
        initial_state: Resume from this state instead of initializing

    Returns:
        Tuple of (final state, trace)
    """
    state = initial_state if initial_state is not None else initialize(config, realization, seed)
    optimizer = AlternatingOptimizer(config, realization, mask, settings)
    return optimizer.run(state)
