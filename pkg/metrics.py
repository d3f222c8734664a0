#!/usr/bin/env python3
"""
Metrics Module

SINRs, per-user rates, the full-duplex sum rate and the half-duplex
baseline for a given channel set and optimization state.

Author: MA-FD Optimizer
Version: 1.0
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, List

import numpy as np

from channel import ChannelSet, PositionError, PositionSet, ScenarioConfig

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9


class InvalidStateError(ValueError):
    """Raised when an OptState cannot be evaluated (e.g. all-zero combiner)."""


@dataclass(frozen=True)
class OptState:
    """The optimization variables {p, omega, v, Phi, T_t, T_r, R}."""
    omega: np.ndarray
    v: np.ndarray
    p: float
    theta: np.ndarray
    T_t: PositionSet
    T_r: PositionSet
    R: PositionSet

    @property
    def phase_shifts(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    def evolve(self, **changes: Any) -> "OptState":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "omega_re": self.omega.real.tolist(), "omega_im": self.omega.imag.tolist(),
            "v_re": self.v.real.tolist(), "v_im": self.v.imag.tolist(),
            "p": float(self.p), "theta": self.theta.tolist(),
            "T_t": self.T_t.to_dict(), "T_r": self.T_r.to_dict(), "R": self.R.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OptState":
        return cls(
            omega=np.asarray(data["omega_re"]) + 1j * np.asarray(data["omega_im"]),
            v=np.asarray(data["v_re"]) + 1j * np.asarray(data["v_im"]),
            p=float(data["p"]), theta=np.asarray(data["theta"], dtype=float),
            T_t=PositionSet.from_dict(data["T_t"]), T_r=PositionSet.from_dict(data["T_r"]),
            R=PositionSet.from_dict(data["R"]),
        )


RATE_COLUMNS: List[str] = [
    "gamma_dl", "gamma_ul", "rate_dl", "rate_ul", "rate_sum",
    "power_bs_ok", "power_ul_ok", "phases_ok", "positions_ok", "qos_dl_ok", "qos_ul_ok",
]


@dataclass(frozen=True)
class RateReport:
    """SINRs, rates (bps/Hz) and constraint flags; serializes to one CSV row."""
    gamma_dl: float
    gamma_ul: float
    rate_dl: float
    rate_ul: float
    rate_sum: float
    power_bs_ok: bool = True
    power_ul_ok: bool = True
    phases_ok: bool = True
    positions_ok: bool = True
    qos_dl_ok: bool = True
    qos_ul_ok: bool = True

    @property
    def qos_ok(self) -> bool:
        return self.qos_dl_ok and self.qos_ul_ok

    @property
    def feasible(self) -> bool:
        return (self.power_bs_ok and self.power_ul_ok and self.phases_ok
                and self.positions_ok and self.qos_ok)

    def to_row(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in RATE_COLUMNS}


# Effective channels

def effective_dl_channel(ch: ChannelSet, theta: np.ndarray) -> np.ndarray:
    """h_d + h~ Phi H (length M_t)."""
    return ch.h_d + (ch.h_ris_dl * np.exp(1j * theta)) @ ch.H


def dl_interference_channel(ch: ChannelSet, theta: np.ndarray) -> complex:
    """I + h~ Phi g."""
    return ch.inter_user + complex(np.sum(ch.h_ris_dl * np.exp(1j * theta) * ch.g))


def effective_ul_channel(ch: ChannelSet, theta: np.ndarray) -> np.ndarray:
    """h_u + G Phi g (length M_r)."""
    return ch.h_u + ch.G @ (np.exp(1j * theta) * ch.g)


def si_channel(ch: ChannelSet, theta: np.ndarray) -> np.ndarray:
    """F + G Phi H (M_r x M_t)."""
    return ch.F_si + ch.G @ (np.exp(1j * theta)[:, None] * ch.H)


# SINRs and rates

def sinr_dl(ch: ChannelSet, st: OptState, cfg: ScenarioConfig) -> float:
    signal = abs(effective_dl_channel(ch, st.theta) @ st.omega) ** 2
    interference = st.p * abs(dl_interference_channel(ch, st.theta)) ** 2
    return float(signal / (interference + cfg.noise_power_w))


def sinr_ul(ch: ChannelSet, st: OptState, cfg: ScenarioConfig) -> float:
    v_norm2 = float(np.vdot(st.v, st.v).real)
    if v_norm2 == 0.0:
        raise InvalidStateError("Receive combiner v is all zeros")
    signal = st.p * abs(np.vdot(st.v, effective_ul_channel(ch, st.theta))) ** 2
    si = cfg.eta * abs(np.vdot(st.v, si_channel(ch, st.theta) @ st.omega)) ** 2
    return float(signal / (si + cfg.noise_power_w * v_norm2))


def constraint_flags(st: OptState, cfg: ScenarioConfig, gamma_dl: float, gamma_ul: float) -> Dict[str, bool]:
    """Direct evaluation of the power, phase, position and QoS constraints."""
    positions_ok = True
    for pos in (st.T_t, st.T_r, st.R):
        try:
            pos.validate()
        except PositionError:
            positions_ok = False
    omega_power = float(np.vdot(st.omega, st.omega).real)
    return {
        "power_bs_ok": omega_power <= cfg.power_bs_max_w * (1.0 + FEASIBILITY_TOL),
        "power_ul_ok": 0.0 <= st.p <= cfg.power_ul_max_w * (1.0 + FEASIBILITY_TOL),
        "phases_ok": bool(np.all((st.theta >= 0.0) & (st.theta <= 2.0 * np.pi))),
        "positions_ok": positions_ok,
        "qos_dl_ok": gamma_dl >= cfg.gamma_min_dl * (1.0 - FEASIBILITY_TOL),
        "qos_ul_ok": gamma_ul >= cfg.gamma_min_ul * (1.0 - FEASIBILITY_TOL),
    }


def rate_from_sinrs(gamma_dl: float, gamma_ul: float) -> float:
    return math.log2(1.0 + gamma_dl) + math.log2(1.0 + gamma_ul)


def sum_rate(ch: ChannelSet, st: OptState, cfg: ScenarioConfig) -> RateReport:
    """
    Full-duplex sum rate R_DL + R_UL with the feasibility flags.

    Args:
        ch: Channels at the state's positions
        st: Optimization state
        cfg: Scenario configuration (noise, eta, budgets, thresholds)

    Returns:
        RateReport
    """
    g_dl = sinr_dl(ch, st, cfg)
    g_ul = sinr_ul(ch, st, cfg)
    r_dl, r_ul = math.log2(1.0 + g_dl), math.log2(1.0 + g_ul)
    return RateReport(gamma_dl=g_dl, gamma_ul=g_ul, rate_dl=r_dl, rate_ul=r_ul,
                      rate_sum=r_dl + r_ul, **constraint_flags(st, cfg, g_dl, g_ul))


def half_duplex_rate(ch: ChannelSet, st: OptState, cfg: ScenarioConfig) -> RateReport:
    """Equal time split with the inter-user and SI terms removed."""
    hd_cfg = cfg.with_overrides(eta=0.0)
    g_dl = sinr_dl(ch, st.evolve(p=0.0), cfg)
    g_ul = sinr_ul(ch, st, hd_cfg)
    r_dl, r_ul = 0.5 * math.log2(1.0 + g_dl), 0.5 * math.log2(1.0 + g_ul)
    return RateReport(gamma_dl=g_dl, gamma_ul=g_ul, rate_dl=r_dl, rate_ul=r_ul,
                      rate_sum=r_dl + r_ul, **constraint_flags(st, cfg, g_dl, g_ul))
