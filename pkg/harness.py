#!/usr/bin/env python3
"""
Harness Module

Experiment front end: sweep specifications, paired Monte Carlo sweeps over a
worker pool, result tables with CSV persistence and aggregation, SVG plots
with error bars, the finite-difference gradient audit and the small-instance
oracle comparisons.

Author: MA-FD Optimizer
Version: 1.0
"""

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import scipy.linalg

import ao
from channel import (ConfigurationError, CoordinateArray, ScenarioConfig, build_channels,
                     load_config, sample_realization)
from metrics import OptState, half_duplex_rate, rate_from_sinrs, sinr_dl, sinr_ul, sum_rate
from subproblems import (TrustRegionState, phase_gradients, position_gradients, update_p,
                         update_phi, update_positions, update_v)

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = {
    "N": "num_elements", "num_elements": "num_elements",
    "eta": "eta",
    "P_BS_max": "power_bs_max_dbm", "power_bs_max_dbm": "power_bs_max_dbm",
    "duplex": "duplex",
}

RESULT_COLUMNS = ["variant", "value", "seed_index", "seed", "rate_sum", "rate_dl", "rate_ul",
                  "iterations", "converged", "qos_feasible", "error"]


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter, its values, the variants and the realization count."""
    parameter: str
    values: Tuple[Any, ...]
    variants: Tuple[str, ...] = ("MA-ME", "FA-ME", "MA-FE", "FA-FE")
    realizations: int = 20
    base_config: ScenarioConfig = field(default_factory=ScenarioConfig)
    seed_base: int = 2024
    settings: ao.AoSettings = field(default_factory=ao.AoSettings)

    def validate(self) -> None:
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigurationError(
                f"Unknown sweep parameter '{self.parameter}'. Valid: {', '.join(SWEEP_PARAMETERS)}")
        if not self.values:
            raise ConfigurationError("Sweep value list must be non-empty")
        if self.realizations < 1:
            raise ConfigurationError("Sweep needs at least one realization")
        if not self.variants:
            raise ConfigurationError("Sweep variant list must be non-empty")
        for variant in self.variants:
            ao.parse_variant(variant)
        if SWEEP_PARAMETERS[self.parameter] == "duplex":
            bad = [v for v in self.values if v not in ao.DUPLEX_MODES]
            if bad:
                raise ConfigurationError(f"Duplex values must be FD or HD, got {bad}")


def load_sweep_spec(spec_path: str, base_config: Optional[ScenarioConfig] = None) -> SweepSpec:
    """
    Load a sweep specification from JSON.

    The file may name a scenario file ("config": path relative to the spec)
    and carry inline overrides ("overrides"); `base_config` is used otherwise.
    """
    try:
        with open(spec_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"Sweep specification not found: {spec_path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in sweep specification {spec_path}: {e}")

    config = base_config or ScenarioConfig()
    if "config" in data:
        config = load_config(os.path.join(os.path.dirname(os.path.abspath(spec_path)), data["config"]))
    if data.get("overrides"):
        config = config.with_overrides(**data["overrides"])
    spec = SweepSpec(
        parameter=data["parameter"], values=tuple(data["values"]),
        variants=tuple(data.get("variants", SweepSpec.variants)),
        realizations=int(data.get("realizations", 20)), base_config=config,
        seed_base=int(data.get("seed_base", 2024)),
        settings=ao.AoSettings.from_dict(data.get("settings", {})))
    spec.validate()
    return spec


def derive_seed(seed_base: int, value: Any, index: int) -> int:
    """Seed shared by every variant of one (value, realization index) cell."""
    digest = hashlib.sha256(f"{value!r}|{index}".encode('utf-8')).hexdigest()
    return (seed_base ^ int(digest[:8], 16)) & 0x7FFFFFFF


def apply_parameter(config: ScenarioConfig, parameter: str, value: Any) -> Tuple[ScenarioConfig, Optional[str]]:
    """Config for one swept value and the duplex override it implies (if any)."""
    key = SWEEP_PARAMETERS[parameter]
    if key == "duplex":
        return config, str(value)
    if key == "num_elements":
        value = int(value)
    return config.with_overrides(**{key: value}), None


def run_cell(config_data: Dict[str, Any], settings_data: Dict[str, Any], variant: str,
             value: Any, seed_index: int, seed: int, duplex_override: Optional[str]) -> Dict[str, Any]:
    """Sample, optimize and score one sweep cell; failures become an error row."""
    row = {"variant": variant, "value": value, "seed_index": seed_index, "seed": seed,
           "rate_sum": math.nan, "rate_dl": math.nan, "rate_ul": math.nan,
           "iterations": 0, "converged": False, "qos_feasible": False, "error": ""}
    try:
        config = ScenarioConfig.from_dict(config_data)
        settings = ao.AoSettings.from_dict(settings_data)
        mask, duplex = ao.parse_variant(variant)
        duplex = duplex_override or duplex
        realization = sample_realization(config, seed)
        state, trace = ao.run(config, realization, mask, seed, settings)
        ch = build_channels(realization, state.T_t, state.T_r, state.R)
        report = half_duplex_rate(ch, state, config) if duplex == "HD" else sum_rate(ch, state, config)
        row.update(rate_sum=report.rate_sum, rate_dl=report.rate_dl, rate_ul=report.rate_ul,
                   iterations=trace.iterations, converged=trace.converged,
                   qos_feasible=report.qos_ok)
    except Exception as e:
        logger.error(f"Sweep cell {variant} value={value} seed={seed} failed: {e}")
        row["error"] = str(e)
    return row


class ResultTable:
    """Rows of (variant, value, seed) outcomes backed by a pandas DataFrame."""

    def __init__(self, frame: pd.DataFrame):
        self.frame = frame[RESULT_COLUMNS].reset_index(drop=True)

    @classmethod
    def from_rows(cls, rows: List[Dict[str, Any]]) -> "ResultTable":
        return cls(pd.DataFrame(rows, columns=RESULT_COLUMNS))

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def variants(self) -> List[str]:
        return list(dict.fromkeys(self.frame["variant"]))

    def aggregate(self) -> pd.DataFrame:
        """Mean and standard error per (variant, value) over successful rows."""
        ok = self.frame[self.frame["error"].fillna("") == ""]
        grouped = ok.groupby(["variant", "value"], sort=False)
        summary = grouped[["rate_sum", "rate_dl", "rate_ul"]].agg(["mean", "sem", "count"])
        summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
        return summary.fillna({c: 0.0 for c in summary.columns if c.endswith("_sem")}).reset_index()

    def to_csv(self, path: str) -> None:
        self.frame.to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path: str) -> "ResultTable":
        try:
            frame = pd.read_csv(path, keep_default_na=False, na_values={
                c: ["", "nan", "NaN"] for c in RESULT_COLUMNS if c not in ("error", "variant")})
        except FileNotFoundError:
            raise ConfigurationError(f"Results file not found: {path}")
        frame["error"] = frame["error"].astype(str)
        return cls(frame)


def _cells(spec: SweepSpec) -> List[Tuple]:
    cells = []
    for value in spec.values:
        config, duplex = apply_parameter(spec.base_config, spec.parameter, value)
        for index in range(spec.realizations):
            seed = derive_seed(spec.seed_base, value, index)
            for variant in spec.variants:
                cells.append((config.to_dict(), spec.settings.to_dict(), variant, value,
                              index, seed, duplex))
    return cells


def run_sweep(spec: SweepSpec, workers: int = 1) -> ResultTable:
    """
    Run every (variant, value, realization) cell of a sweep.

    Variants of the same (value, index) share one realization seed. Rows are
    returned in cell order whatever the pool's completion order.
    """
    spec.validate()
    cells = _cells(spec)
    logger.info(f"Sweep over {spec.parameter}: {len(cells)} cells, {workers} worker(s)")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, *zip(*cells)))
    else:
        rows = [run_cell(*cell) for cell in cells]
    for row in rows:
        logger.info(f"cell {row['variant']} value={row['value']} seed_index={row['seed_index']}: "
                    f"R_sum={row['rate_sum']:.4f}")
    return ResultTable.from_rows(rows)


# Plots and outputs

def _axis_values(values: Sequence[Any]) -> Tuple[List[float], Optional[List[str]]]:
    if all(isinstance(v, (int, float, np.integer, np.floating)) for v in values):
        return [float(v) for v in values], None
    labels = [str(v) for v in values]
    return list(range(len(labels))), labels


def build_rate_figure(summary: pd.DataFrame, metrics: Sequence[str], xlabel: str) -> plt.Figure:
    """One error-bar series per (variant, metric)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for variant, group in summary.groupby("variant", sort=False):
        xs, labels = _axis_values(list(group["value"]))
        for metric in metrics:
            label = variant if len(metrics) == 1 else f"{variant} {metric.replace('rate_', '').upper()}"
            ax.errorbar(xs, group[f"{metric}_mean"], yerr=group[f"{metric}_sem"],
                        marker="o", capsize=3, label=label)
        if labels:
            ax.set_xticks(xs)
            ax.set_xticklabels(labels)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("Rate (bps/Hz)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def emit_outputs(table: ResultTable, out_dir: str, variants: Optional[Sequence[str]] = None,
                 xlabel: str = "swept value", plots: bool = True) -> List[str]:
    """
    Write results.csv, summary.csv and the sum-rate / per-user rate SVG plots.

    Args:
        table: Sweep results
        out_dir: Output directory (created if missing)
        variants: Optional subset of variants to plot
        xlabel: Label of the swept axis
        plots: Write the SVG figures as well as the CSV files

    Returns:
        Paths of the written files

    Raises:
        ConfigurationError: empty or unknown variant filter
        OSError: output location not writable (path named)
    """
    valid = table.variants
    if variants is not None:
        unknown = [v for v in variants if v not in valid]
        if not variants or unknown:
            raise ConfigurationError(f"Variant filter {list(variants)} is invalid. "
                                     f"Valid variants: {', '.join(valid)}")
    if len(table) == 0:
        raise ConfigurationError("Result table is empty")

    try:
        os.makedirs(out_dir, exist_ok=True)
        written = []
        results_path = os.path.join(out_dir, "results.csv")
        table.to_csv(results_path)
        written.append(results_path)
        summary = table.aggregate()
        if variants is not None:
            summary = summary[summary["variant"].isin(variants)]
        summary_path = os.path.join(out_dir, "summary.csv")
        summary.to_csv(summary_path, index=False, float_format="%.17g")
        written.append(summary_path)
        if plots:
            for name, metrics in (("sum_rate.svg", ["rate_sum"]), ("user_rates.svg", ["rate_dl", "rate_ul"])):
                fig = build_rate_figure(summary, metrics, xlabel)
                path = os.path.join(out_dir, name)
                fig.savefig(path, format="svg")
                plt.close(fig)
                written.append(path)
    except OSError as e:
        raise OSError(f"Cannot write outputs to {out_dir}: {e}") from e
    for path in written:
        logger.info(f"Wrote {path}")
    return written


def plot_convergence(traces: Dict[str, ao.AoTrace], path: str) -> None:
    """Sum rate versus AO iteration, one line per labelled trace."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, trace in traces.items():
        ax.plot(range(len(trace.rates)), trace.rates, marker=".", label=label)
    ax.set_xlabel("AO iteration")
    ax.set_ylabel("Sum rate (bps/Hz)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg")
    except OSError as e:
        raise OSError(f"Cannot write convergence plot to {path}: {e}") from e
    finally:
        plt.close(fig)


# Gradient audit

def random_state(config: ScenarioConfig, seed: int) -> Tuple[Any, OptState]:
    """Realization plus a randomized feasible state around the initial layout."""
    realization = sample_realization(config, seed)
    state = ao.initialize(config, realization, seed)
    rng = np.random.default_rng(seed + 1)
    omega = rng.normal(size=config.num_tx_antennas) + 1j * rng.normal(size=config.num_tx_antennas)
    omega *= math.sqrt(config.power_bs_max_w) / np.linalg.norm(omega)
    v = rng.normal(size=config.num_rx_antennas) + 1j * rng.normal(size=config.num_rx_antennas)
    p = float(rng.uniform(0.1, 1.0)) * config.power_ul_max_w
    return realization, state.evolve(omega=omega, v=v, p=p)


def _rate_at(realization, state: OptState, config: ScenarioConfig) -> float:
    ch = build_channels(realization, state.T_t, state.T_r, state.R, validate=False)
    return rate_from_sinrs(sinr_dl(ch, state, config), sinr_ul(ch, state, config))


def gradient_audit(config: ScenarioConfig, seed: int, probes: int = 200,
                   phase_step: float = 1e-6, position_step_wavelengths: float = 1e-6) -> Dict[str, float]:
    """
    Largest relative error between analytic and central-difference derivatives
    of R_sum, per block, over `probes` random (state, coordinate) probes.
    """
    rng = np.random.default_rng(seed)
    errors = {"phases": 0.0, "T_t": 0.0, "T_r": 0.0, "R": 0.0}
    h_pos = position_step_wavelengths * config.wavelength_m
    for probe in range(probes):
        realization, state = random_state(config, int(rng.integers(0, 2 ** 31 - 1)))
        ch = build_channels(realization, state.T_t, state.T_r, state.R)

        analytic = phase_gradients(ch, state, config).d_rate_sum
        k = int(rng.integers(0, config.num_elements))
        plus, minus = state.theta.copy(), state.theta.copy()
        plus[k] += phase_step
        minus[k] -= phase_step
        fd = (_rate_at(realization, state.evolve(theta=plus), config)
              - _rate_at(realization, state.evolve(theta=minus), config)) / (2.0 * phase_step)
        errors["phases"] = max(errors["phases"], _relative_error(analytic[k], fd, analytic))

        for block, array in ao.POSITION_BLOCKS.items():
            analytic = position_gradients(realization, state, config, array, ch).d_rate_sum
            coords = getattr(state, block).coords
            j = int(rng.integers(0, 2 * coords.shape[1]))
            shifted = []
            for sign in (1.0, -1.0):
                moved = coords.copy()
                moved[j % 2, j // 2] += sign * h_pos
                shifted.append(_rate_at(realization, state.evolve(
                    **{block: getattr(state, block).with_coords(moved)}), config))
            fd = (shifted[0] - shifted[1]) / (2.0 * h_pos)
            errors[block] = max(errors[block], _relative_error(analytic[j], fd, analytic))
    return errors


def _relative_error(analytic: float, fd: float, gradient: np.ndarray) -> float:
    scale = max(abs(analytic), abs(fd), 1e-3 * float(np.max(np.abs(gradient))), 1e-300)
    return abs(analytic - fd) / scale


# Oracles

def power_oracle(config: ScenarioConfig, seed: int, grid_points: int = 100001) -> Dict[str, float]:
    """Bisection power against an exhaustive grid over the QoS-feasible part of [0, P_u_max]."""
    realization, state = random_state(config, seed)
    ch = build_channels(realization, state.T_t, state.T_r, state.R)
    update = update_p(ch, state, config)
    grid = np.linspace(0.0, config.power_ul_max_w, grid_points)
    rates = []
    for p in grid:
        probe = state.evolve(p=float(p))
        g_dl, g_ul = sinr_dl(ch, probe, config), sinr_ul(ch, probe, config)
        feasible = g_dl >= config.gamma_min_dl and g_ul >= config.gamma_min_ul
        rates.append(rate_from_sinrs(g_dl, g_ul) if feasible or not update.qos_feasible else -math.inf)
    best = int(np.argmax(rates))
    bisection_rate = sum_rate(ch, state.evolve(p=update.p), config).rate_sum
    return {"p_bisection": update.p, "p_grid": float(grid[best]),
            "p_error": abs(update.p - float(grid[best])) / config.power_ul_max_w,
            "rate_bisection": bisection_rate, "rate_grid": float(rates[best]),
            "qos_feasible": float(update.qos_feasible)}


def combiner_oracle(config: ScenarioConfig, seed: int) -> Dict[str, float]:
    """Closed-form combiner against the dominant generalized eigenvector."""
    realization, state = random_state(config, seed)
    ch = build_channels(realization, state.T_t, state.T_r, state.R)
    v, _ = update_v(ch, state, config)
    a = ch.h_u + ch.G @ (state.phase_shifts * ch.g)
    b = (ch.F_si + ch.G @ (state.phase_shifts[:, None] * ch.H)) @ state.omega
    interference = config.eta * np.outer(b, b.conj()) + config.noise_power_w * np.eye(a.size)
    _, vectors = scipy.linalg.eigh(np.outer(a, a.conj()), interference)
    reference = vectors[:, -1] / np.linalg.norm(vectors[:, -1])
    overlap = min(1.0, abs(np.vdot(reference, v)))
    return {"angle_rad": float(math.acos(overlap)),
            "gamma_ul": sinr_ul(ch, state.evolve(v=v), config),
            "gamma_ul_reference": sinr_ul(ch, state.evolve(v=reference), config)}


def single_element_config(config: ScenarioConfig) -> ScenarioConfig:
    """One antenna per side, one RIS element, single-path links."""
    return config.with_overrides(num_tx_antennas=1, num_rx_antennas=1, num_elements=1,
                                 num_paths={link: 1 for link in config.num_paths})


def _single_element_rates(ch, state: OptState, config: ScenarioConfig, phases: np.ndarray) -> np.ndarray:
    """Sum rate for N = 1 over a vector of phases."""
    shift = np.exp(1j * phases)
    w, v = state.omega, state.v
    s = ch.h_d @ w + shift * ch.h_ris_dl[0] * (ch.H[0] @ w)
    c = ch.inter_user + shift * ch.h_ris_dl[0] * ch.g[0]
    vg = np.vdot(v, ch.G[:, 0])
    va = np.vdot(v, ch.h_u) + shift * vg * ch.g[0]
    vb = np.vdot(v, ch.F_si @ w) + shift * vg * (ch.H[0] @ w)
    noise = config.noise_power_w
    g_dl = np.abs(s) ** 2 / (state.p * np.abs(c) ** 2 + noise)
    g_ul = state.p * np.abs(va) ** 2 / (config.eta * np.abs(vb) ** 2 + noise * np.vdot(v, v).real)
    return np.log2(1.0 + g_dl) + np.log2(1.0 + g_ul)


def single_element_oracle(config: ScenarioConfig, seed: int, phase_points: int = 201,
                          position_points: int = 201, coarse_points: int = 5,
                          rounds: int = 20) -> Dict[str, float]:
    """
    Joint phase + element-position SCA against an exhaustive grid for N = 1.

    The SCA is multi-started from a coarse_points x coarse_points layout
    grid, each start taking the best of a few phases at that layout, and
    alternates the phase and RIS-position blocks until neither improves.
    The best SCA result is compared with the fine grid.
    """
    cfg = single_element_config(config)
    realization = sample_realization(cfg, seed)
    state = ao.initialize(cfg, realization, seed)
    half = cfg.region_side_m / 2.0

    def channels_at(xy: np.ndarray):
        return build_channels(realization, state.T_t, state.T_r, state.R.with_coords(xy), validate=False)

    phases = np.linspace(0.0, 2.0 * np.pi, phase_points)
    grid_rate = -math.inf
    for x in np.linspace(-half, half, position_points):
        for y in np.linspace(-half, half, position_points):
            rates = _single_element_rates(channels_at(np.array([[x], [y]])), state, cfg, phases)
            grid_rate = max(grid_rate, float(np.max(rates)))

    def polish(xy: np.ndarray) -> float:
        start_phases = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
        ch = channels_at(xy)
        phase = start_phases[int(np.argmax(_single_element_rates(ch, state, cfg, start_phases)))]
        current = state.evolve(R=state.R.with_coords(xy), theta=np.array([phase]))
        phase_trust = TrustRegionState.for_phases()
        position_trust = TrustRegionState.for_positions(cfg)
        for _ in range(rounds):
            before = sum_rate(ch, current, cfg).rate_sum
            outcome = update_phi(ch, current, cfg, phase_trust)
            phase_trust = outcome.trust
            current = current.evolve(theta=outcome.x, v=outcome.v)
            update = update_positions(realization, current, cfg, CoordinateArray.RIS, position_trust)
            position_trust = update.trust
            current, ch = current.evolve(R=update.positions, v=update.v), update.channels
            if sum_rate(ch, current, cfg).rate_sum - before <= 1e-9:
                break
        return sum_rate(ch, current, cfg).rate_sum

    starts = np.linspace(-half, half, coarse_points) if coarse_points > 1 else np.zeros(1)
    sca_rate = max(polish(np.array([[x], [y]])) for x in starts for y in starts)
    return {"sca_rate": sca_rate, "grid_rate": grid_rate,
            "relative_shortfall": max(0.0, (grid_rate - sca_rate) / grid_rate) if grid_rate > 0 else 0.0}
