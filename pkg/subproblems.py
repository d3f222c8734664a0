#!/usr/bin/env python3
"""
Subproblems Module

The six block updates of the alternating optimization:

- omega: fractional-programming transforms (Lagrangian dual + quadratic),
  semidefinite relaxation and sequential rank-one constraint relaxation,
- v: closed-form whitened MMSE combiner,
- p: bisection over the QoS-feasible power interval,
- phases, transmit/receive antenna positions and RIS element positions:
  successive convex approximation with a trust region and acceptance on
  the true objective.

Author: MA-FD Optimizer
Version: 1.0
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from channel import (ChannelSet, CoordinateArray, PositionSet, ScenarioConfig, ScenarioRealization,
                     build_channels, d_channel_d_position, iter_coordinates)
from convex_kernels import (DEFAULT_SDP_TOL, SdpProblem, SdpStatus, Sense, TrustRegionLp,
                            dominant_eigpair, solve_sdp, solve_tr_lp, whitened_mmse_direction)
from metrics import (OptState, dl_interference_channel, effective_dl_channel, effective_ul_channel,
                     rate_from_sinrs, si_channel, sinr_dl, sinr_ul)

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


@dataclass(frozen=True)
class FpAuxiliaries:
    """LDT auxiliaries zeta and QT auxiliaries beta."""
    zeta_dl: float
    zeta_ul: float
    beta_dl: complex
    beta_ul: complex


@dataclass(frozen=True)
class SrocrSettings:
    epsilon: float = 1e-3
    max_iterations: int = 30
    aux_refresh: int = 5
    sdp_tol: float = DEFAULT_SDP_TOL


@dataclass
class SrocrState:
    W: np.ndarray
    level: float = 0.0
    step: float = 0.0
    iteration: int = 0
    failed_steps: int = 0

    @property
    def rank_ratio(self) -> float:
        return rank_one_ratio(self.W)


@dataclass(frozen=True)
class TrustRegionState:
    """Radius of one SCA block and its ratio-test schedule."""
    radius: float
    min_radius: float = 1e-6
    max_radius: float = math.pi
    grow: float = 2.0
    shrink: float = 0.5
    accept_low: float = 0.25
    accept_high: float = 0.75

    @classmethod
    def for_phases(cls, radius: float = 0.25) -> "TrustRegionState":
        return cls(radius=radius, max_radius=math.pi)

    @classmethod
    def for_positions(cls, cfg: ScenarioConfig, radius_wavelengths: float = 0.25) -> "TrustRegionState":
        return cls(radius=radius_wavelengths * cfg.wavelength_m, max_radius=cfg.region_side_m / 2.0)

    def grown(self) -> "TrustRegionState":
        return replace(self, radius=min(self.max_radius, self.radius * self.grow))

    def shrunk(self) -> "TrustRegionState":
        return replace(self, radius=max(self.min_radius, self.radius * self.shrink))

    @property
    def exhausted(self) -> bool:
        return self.radius <= self.min_radius


# Scalar pieces of both SINRs

@dataclass(frozen=True)
class _Terms:
    s_dl: complex   # (h_d + h~ Phi H) omega
    c_dl: complex   # I + h~ Phi g
    va: complex     # v^H (h_u + G Phi g)
    vb: complex     # v^H (F + G Phi H) omega
    v_norm2: float


def _terms(ch: ChannelSet, st: OptState) -> _Terms:
    return _Terms(
        s_dl=complex(effective_dl_channel(ch, st.theta) @ st.omega),
        c_dl=dl_interference_channel(ch, st.theta),
        va=complex(np.vdot(st.v, effective_ul_channel(ch, st.theta))),
        vb=complex(np.vdot(st.v, si_channel(ch, st.theta) @ st.omega)),
        v_norm2=float(np.vdot(st.v, st.v).real),
    )


def _ratio_parts(t: _Terms, p: float, cfg: ScenarioConfig) -> Tuple[float, float, float, float]:
    """(A_DL, B_DL, A_UL, B_UL) with gamma_i = A_i / B_i."""
    noise = cfg.noise_power_w
    return (abs(t.s_dl) ** 2, p * abs(t.c_dl) ** 2 + noise,
            p * abs(t.va) ** 2, cfg.eta * abs(t.vb) ** 2 + noise * t.v_norm2)


def _sinr_derivatives(t: _Terms, p: float, cfg: ScenarioConfig, ds, dc, dva, dvb):
    """Chain rule for gamma_DL and gamma_UL given derivatives of the scalar pieces."""
    a_dl, b_dl, a_ul, b_ul = _ratio_parts(t, p, cfg)
    d_a_dl = 2.0 * np.real(np.conj(t.s_dl) * ds)
    d_b_dl = p * 2.0 * np.real(np.conj(t.c_dl) * dc)
    d_a_ul = p * 2.0 * np.real(np.conj(t.va) * dva)
    d_b_ul = cfg.eta * 2.0 * np.real(np.conj(t.vb) * dvb)
    d_gamma_dl = (d_a_dl * b_dl - a_dl * d_b_dl) / b_dl ** 2
    d_gamma_ul = (d_a_ul * b_ul - a_ul * d_b_ul) / b_ul ** 2
    return a_dl / b_dl, a_ul / b_ul, d_gamma_dl, d_gamma_ul


@dataclass(frozen=True)
class SinrGradients:
    gamma_dl: float
    gamma_ul: float
    d_gamma_dl: np.ndarray
    d_gamma_ul: np.ndarray

    @property
    def d_rate_dl(self) -> np.ndarray:
        return self.d_gamma_dl / ((1.0 + self.gamma_dl) * LN2)

    @property
    def d_rate_ul(self) -> np.ndarray:
        return self.d_gamma_ul / ((1.0 + self.gamma_ul) * LN2)

    @property
    def d_rate_sum(self) -> np.ndarray:
        return self.d_rate_dl + self.d_rate_ul


def phase_gradients(ch: ChannelSet, st: OptState, cfg: ScenarioConfig) -> SinrGradients:
    """Gradients of both SINRs with respect to the N phases."""
    t = _terms(ch, st)
    shifts = st.phase_shifts
    h_omega = ch.H @ st.omega
    v_g = st.v.conj() @ ch.G
    ds = 1j * shifts * ch.h_ris_dl * h_omega
    dc = 1j * shifts * ch.h_ris_dl * ch.g
    dva = 1j * shifts * v_g * ch.g
    dvb = 1j * shifts * v_g * h_omega
    g_dl, g_ul, d_dl, d_ul = _sinr_derivatives(t, st.p, cfg, ds, dc, dva, dvb)
    return SinrGradients(g_dl, g_ul, d_dl, d_ul)


def _positions_of(st: OptState, array: CoordinateArray) -> PositionSet:
    return {CoordinateArray.TX: st.T_t, CoordinateArray.RX: st.T_r, CoordinateArray.RIS: st.R}[array]


def _with_positions(st: OptState, array: CoordinateArray, positions: PositionSet) -> OptState:
    key = {CoordinateArray.TX: "T_t", CoordinateArray.RX: "T_r", CoordinateArray.RIS: "R"}[array]
    return st.evolve(**{key: positions})


def position_gradients(real: ScenarioRealization, st: OptState, cfg: ScenarioConfig,
                       array: CoordinateArray, ch: Optional[ChannelSet] = None) -> SinrGradients:
    """
    Gradients of both SINRs with respect to vec(positions) of one array.

    The ordering is x_0, y_0, x_1, y_1, ...; every entry is assembled from
    the derivative channel set of that coordinate.
    """
    if ch is None:
        ch = build_channels(real, st.T_t, st.T_r, st.R, validate=False)
    t = _terms(ch, st)
    shifts = st.phase_shifts
    count = _positions_of(st, array).count
    ds, dc, dva, dvb = (np.zeros(2 * count, dtype=complex) for _ in range(4))
    for k, coord in enumerate(iter_coordinates(array, count)):
        d = d_channel_d_position(real, st.T_t, st.T_r, st.R, coord)
        d_h_dl = d.h_d + (d.h_ris_dl * shifts) @ ch.H + (ch.h_ris_dl * shifts) @ d.H
        ds[k] = d_h_dl @ st.omega
        dc[k] = np.sum(d.h_ris_dl * shifts * ch.g + ch.h_ris_dl * shifts * d.g)
        d_a = d.h_u + d.G @ (shifts * ch.g) + ch.G @ (shifts * d.g)
        dva[k] = np.vdot(st.v, d_a)
        d_b = d.F_si + d.G @ (shifts[:, None] * ch.H) + ch.G @ (shifts[:, None] * d.H)
        dvb[k] = np.vdot(st.v, d_b @ st.omega)
    g_dl, g_ul, d_dl, d_ul = _sinr_derivatives(t, st.p, cfg, ds, dc, dva, dvb)
    return SinrGradients(g_dl, g_ul, d_dl, d_ul)


# Fractional programming transforms

def ldt_aux(ch: ChannelSet, st: OptState, cfg: ScenarioConfig) -> Tuple[float, float]:
    """Optimal LDT auxiliaries: the current SINRs."""
    return sinr_dl(ch, st, cfg), sinr_ul(ch, st, cfg)


def ldt_objective(ch: ChannelSet, st: OptState, cfg: ScenarioConfig, zeta: Tuple[float, float]) -> float:
    """
    Lagrangian dual transform of the sum rate, in bits.

    sum_i ln(1 + zeta_i) - zeta_i + (1 + zeta_i) A_i / (A_i + B_i), divided
    by ln 2; equal to R_sum at zeta = gamma, which is also its maximizer.
    """
    a_dl, b_dl, a_ul, b_ul = _ratio_parts(_terms(ch, st), st.p, cfg)
    total = 0.0
    for z, a, b in ((zeta[0], a_dl, b_dl), (zeta[1], a_ul, b_ul)):
        total += math.log1p(z) - z + (1.0 + z) * a / (a + b)
    return total / LN2


def qt_aux(ch: ChannelSet, st: OptState, cfg: ScenarioConfig, zeta: Tuple[float, float]) -> Tuple[complex, complex]:
    """Closed-form optimal QT auxiliaries for the given zeta."""
    t = _terms(ch, st)
    a_dl, b_dl, a_ul, b_ul = _ratio_parts(t, st.p, cfg)
    beta_dl = math.sqrt(1.0 + zeta[0]) * t.s_dl / (a_dl + b_dl)
    beta_ul = math.sqrt(st.p * (1.0 + zeta[1])) * t.va / (a_ul + b_ul)
    return complex(beta_dl), complex(beta_ul)


def qt_objective(ch: ChannelSet, st: OptState, cfg: ScenarioConfig, zeta: Tuple[float, float],
                 beta: Tuple[complex, complex]) -> float:
    """sum_i 2 sqrt(1 + zeta_i) Re{beta_i^* sqrt(A_i)} - |beta_i|^2 (A_i + B_i)."""
    t = _terms(ch, st)
    a_dl, b_dl, a_ul, b_ul = _ratio_parts(t, st.p, cfg)
    amplitudes = (t.s_dl, math.sqrt(st.p) * t.va)
    total = 0.0
    for z, bt, amp, a, b in ((zeta[0], beta[0], amplitudes[0], a_dl, b_dl),
                             (zeta[1], beta[1], amplitudes[1], a_ul, b_ul)):
        total += 2.0 * math.sqrt(1.0 + z) * (np.conj(bt) * amp).real - abs(bt) ** 2 * (a + b)
    return float(total)


def fp_auxiliaries(ch: ChannelSet, st: OptState, cfg: ScenarioConfig) -> FpAuxiliaries:
    zeta = ldt_aux(ch, st, cfg)
    beta = qt_aux(ch, st, cfg, zeta)
    return FpAuxiliaries(zeta_dl=zeta[0], zeta_ul=zeta[1], beta_dl=beta[0], beta_ul=beta[1])


# Beamformer: SDR + SROCR

@dataclass(frozen=True)
class BeamformingSurrogate:
    """2 Re{a omega} - omega^H B omega + constant, with its lifted SDP."""
    linear: np.ndarray
    quadratic: np.ndarray
    constant: float
    problem: SdpProblem

    def value(self, omega: np.ndarray) -> float:
        return float(2.0 * np.real(self.linear @ omega)
                     - np.real(np.vdot(omega, self.quadratic @ omega)) + self.constant)


def build_sdr(ch: ChannelSet, st: OptState, cfg: ScenarioConfig, aux: FpAuxiliaries,
              enforce_qos: bool = True) -> BeamformingSurrogate:
    """
    Lift the beamforming surrogate to W = [omega; 1][omega; 1]^H.

    Emits tr(E_DL W) >= b_DL, tr(E_UL W) >= b_UL, tr(W) <= P_BS_max + 1 and
    W[M, M] = 1; `enforce_qos=False` drops the two QoS rows.
    """
    t = _terms(ch, st)
    m = st.omega.shape[0]
    noise = cfg.noise_power_w
    h_dl = effective_dl_channel(ch, st.theta)
    h_ul = math.sqrt(cfg.eta) * (st.v.conj() @ si_channel(ch, st.theta))

    linear = np.conj(aux.beta_dl) * math.sqrt(1.0 + aux.zeta_dl) * h_dl
    quadratic = abs(aux.beta_ul) ** 2 * np.outer(h_ul.conj(), h_ul)
    constant = (2.0 * math.sqrt(1.0 + aux.zeta_ul) * (np.conj(aux.beta_ul) * math.sqrt(st.p) * t.va).real
                - abs(aux.beta_ul) ** 2 * (st.p * abs(t.va) ** 2 + noise * t.v_norm2)
                - abs(aux.beta_dl) ** 2 * (st.p * abs(t.c_dl) ** 2 + noise))

    objective = np.zeros((m + 1, m + 1), dtype=complex)
    objective[:m, :m] = -quadratic
    objective[:m, m] = linear.conj()
    objective[m, :m] = linear
    problem = SdpProblem(objective=objective)

    if enforce_qos:
        e_dl = np.zeros((m + 1, m + 1), dtype=complex)
        e_dl[:m, :m] = np.outer(h_dl.conj(), h_dl)
        b_dl = cfg.gamma_min_dl * (st.p * abs(t.c_dl) ** 2 + noise)
        e_ul = np.zeros((m + 1, m + 1), dtype=complex)
        e_ul[:m, :m] = -cfg.gamma_min_ul * np.outer(h_ul.conj(), h_ul)
        b_ul = cfg.gamma_min_ul * noise * t.v_norm2 - st.p * abs(t.va) ** 2
        problem = problem.with_constraint(e_dl, Sense.GE, b_dl).with_constraint(e_ul, Sense.GE, b_ul)

    problem = problem.with_constraint(np.eye(m + 1), Sense.LE, cfg.power_bs_max_w + 1.0)
    corner = np.zeros((m + 1, m + 1))
    corner[m, m] = 1.0
    problem = problem.with_constraint(corner, Sense.EQ, 1.0)
    return BeamformingSurrogate(linear=linear, quadratic=quadratic, constant=float(constant),
                                problem=problem)


def rank_one_ratio(W: np.ndarray) -> float:
    trace = float(np.real(np.trace(W)))
    if trace <= 0.0:
        return 0.0
    return dominant_eigpair(W)[0] / trace


def srocr(problem: SdpProblem, W0: np.ndarray, settings: SrocrSettings) -> SrocrState:
    """
    Sequential rank-one constraint relaxation starting from the relaxed optimum.

    Each step adds u^H W u >= m tr(W) for the dominant eigenvector u of the
    previous iterate with m = min(cap, lambda_max/tr + delta). An infeasible
    step keeps the previous W and divides delta by 3. The level is capped
    at 1 - epsilon/2 so the restricted SDP keeps an interior.
    """
    state = SrocrState(W=W0)
    ratio = rank_one_ratio(W0)
    if 1.0 - ratio <= settings.epsilon:
        return state
    state.step = 0.5 * (1.0 - ratio)
    cap = 1.0 - 0.5 * settings.epsilon
    n = W0.shape[0]
    while state.iteration < settings.max_iterations:
        state.iteration += 1
        level = min(cap, ratio + state.step)
        _, u = dominant_eigpair(state.W)
        restricted = problem.with_constraint(np.outer(u, u.conj()) - level * np.eye(n), Sense.GE, 0.0)
        result = solve_sdp(restricted, tol=settings.sdp_tol)
        if result.status is SdpStatus.OPTIMAL:
            state.W = result.W
            state.level = max(state.level, level)
        else:
            state.step /= 3.0
            state.failed_steps += 1
            logger.debug(f"SROCR step {state.iteration} {result.status.value}; delta -> {state.step:.3e}")
        ratio = rank_one_ratio(state.W)
        if 1.0 - ratio <= settings.epsilon:
            break
    return state


def recover_beamformer(W: np.ndarray, power_max: float) -> np.ndarray:
    """Principal component of W scaled by its augmented coordinate, then power-clipped."""
    lam, u = dominant_eigpair(W)
    lifted = math.sqrt(max(lam, 0.0)) * u
    tail = lifted[-1]
    omega = lifted[:-1] / tail if abs(tail) > 1e-12 else lifted[:-1]
    power = float(np.vdot(omega, omega).real)
    if power > power_max:
        omega = omega * math.sqrt(power_max / power)
    return omega


@dataclass
class OmegaUpdate:
    omega: np.ndarray
    accepted: bool = False
    qos_feasible: bool = True
    srocr_iterations: int = 0
    rank_ratio: float = math.nan
    sdr_bound: float = math.nan
    surrogate_value: float = math.nan

    @property
    def gap(self) -> float:
        """Relative gap between the relaxed bound and the recovered surrogate value."""
        if not math.isfinite(self.sdr_bound):
            return math.nan
        return (self.sdr_bound - self.surrogate_value) / max(abs(self.sdr_bound), 1e-12)


def update_omega(ch: ChannelSet, st: OptState, cfg: ScenarioConfig,
                 settings: Optional[SrocrSettings] = None) -> OmegaUpdate:
    """
    Beamformer block: refresh (zeta, beta), solve the SDR, run SROCR, recover omega.

    Up to `aux_refresh` rounds are performed; the best beamformer by true
    sum rate is kept and the block returns the old omega unless it improves.
    """
    settings = settings or SrocrSettings()
    base_rate = rate_from_sinrs(sinr_dl(ch, st, cfg), sinr_ul(ch, st, cfg))
    best = OmegaUpdate(omega=st.omega)
    best_rate = base_rate
    current = st
    for refresh in range(settings.aux_refresh):
        aux = fp_auxiliaries(ch, current, cfg)
        surrogate = build_sdr(ch, current, cfg, aux)
        relaxed = solve_sdp(surrogate.problem, tol=settings.sdp_tol)
        qos_feasible = relaxed.status is SdpStatus.OPTIMAL
        if not qos_feasible:
            logger.debug(f"Beamforming SDR with QoS rows: {relaxed.status.value}; relaxing QoS")
            best.qos_feasible = False
            surrogate = build_sdr(ch, current, cfg, aux, enforce_qos=False)
            relaxed = solve_sdp(surrogate.problem, tol=settings.sdp_tol)
            if relaxed.status is not SdpStatus.OPTIMAL:
                logger.warning(f"Beamforming SDR failed: {relaxed.status.value}")
                break
        rank = srocr(surrogate.problem, relaxed.W, settings)
        omega = recover_beamformer(rank.W, cfg.power_bs_max_w)
        candidate = current.evolve(omega=omega)
        rate = rate_from_sinrs(sinr_dl(ch, candidate, cfg), sinr_ul(ch, candidate, cfg))
        logger.debug(f"omega round {refresh}: rate={rate:.6f} ratio={rank.rank_ratio:.6f} "
                     f"srocr_iterations={rank.iteration}")
        best.srocr_iterations += rank.iteration
        best.rank_ratio = rank.rank_ratio
        best.sdr_bound = relaxed.objective + surrogate.constant
        best.surrogate_value = surrogate.value(omega)
        if rate <= best_rate + 1e-9:
            break
        best.omega, best.accepted = omega, True
        best_rate = rate
        current = candidate
    return best


def mmse_combiner(ch: ChannelSet, st: OptState, cfg: ScenarioConfig) -> np.ndarray:
    """Unit combiner maximizing gamma_UL for the state's omega, phases and channels."""
    a = effective_ul_channel(ch, st.theta)
    b = si_channel(ch, st.theta) @ st.omega
    return whitened_mmse_direction(a, cfg.eta * np.outer(b, b.conj()), cfg.noise_power_w)


def update_v(ch: ChannelSet, st: OptState, cfg: ScenarioConfig) -> Tuple[np.ndarray, bool]:
    """Whitened MMSE combiner and whether the UL QoS holds with it."""
    v = mmse_combiner(ch, st, cfg)
    qos_ok = sinr_ul(ch, st.evolve(v=v), cfg) >= cfg.gamma_min_ul * (1.0 - 1e-9)
    return v, qos_ok


# Power

@dataclass(frozen=True)
class PowerUpdate:
    p: float
    qos_feasible: bool
    interval: Tuple[float, float]


def update_p(ch: ChannelSet, st: OptState, cfg: ScenarioConfig, tol: float = 1e-4) -> PowerUpdate:
    """
    Uplink power by bisection over the QoS-feasible interval.

    gamma_DL(p) = S / (p C + sigma_d^2) falls and gamma_UL(p) = alpha p rises
    with p; the bisection locates the stationary point of R_sum(p) and the
    maximizer is taken among the interval ends and that point. An empty
    interval returns the power with the smallest total rate shortfall.
    """
    t = _terms(ch, st)
    noise = cfg.noise_power_w
    p_max = cfg.power_ul_max_w
    signal = abs(t.s_dl) ** 2
    coupling = abs(t.c_dl) ** 2
    alpha = abs(t.va) ** 2 / (cfg.eta * abs(t.vb) ** 2 + noise * t.v_norm2)

    def rate(p: float) -> float:
        return rate_from_sinrs(signal / (p * coupling + noise), alpha * p)

    def slope(p: float) -> float:
        x = p * coupling + noise
        return -signal * coupling / (x * (x + signal)) + alpha / (1.0 + alpha * p)

    g_dl, g_ul = cfg.gamma_min_dl, cfg.gamma_min_ul
    if g_ul <= 0.0:
        low = 0.0
    else:
        low = g_ul / alpha if alpha > 0.0 else math.inf
    if g_dl <= 0.0 or coupling == 0.0:
        high = p_max if signal >= g_dl * noise else -math.inf
    else:
        high = (signal / g_dl - noise) / coupling
    low, high = max(low, 0.0), min(high, p_max)

    if low > high:
        def shortfall(p: float) -> float:
            r_dl = math.log2(1.0 + signal / (p * coupling + noise))
            r_ul = math.log2(1.0 + alpha * p)
            return (max(0.0, cfg.rate_threshold_dl_bps_hz - r_dl)
                    + max(0.0, cfg.rate_threshold_ul_bps_hz - r_ul))
        grid = np.linspace(0.0, p_max, 1001)
        best = float(grid[int(np.argmin([shortfall(p) for p in grid]))])
        step = p_max / 1000.0
        refined = minimize_scalar(shortfall, bounds=(max(0.0, best - step), min(p_max, best + step)),
                                  method='bounded', options={'xatol': tol * p_max * 1e-2})
        p_star = float(refined.x) if shortfall(refined.x) < shortfall(best) else best
        logger.debug(f"Power interval empty ([{low:.3e}, {high:.3e}]); least-violation p={p_star:.3e}")
        return PowerUpdate(p=p_star, qos_feasible=False, interval=(low, high))

    candidates = [low, high]
    a, b = low, high
    if slope(a) * slope(b) < 0.0:
        while b - a > tol * p_max * 1e-3:
            mid = 0.5 * (a + b)
            if slope(mid) * slope(a) > 0.0:
                a = mid
            else:
                b = mid
        candidates.append(0.5 * (a + b))
    p_star = max(candidates, key=rate)
    return PowerUpdate(p=float(p_star), qos_feasible=True, interval=(low, high))


# Trust-region SCA blocks

@dataclass
class ScaOutcome:
    x: np.ndarray
    trust: TrustRegionState
    accepted: int = 0
    rejected: int = 0
    objective: float = math.nan
    v: Optional[np.ndarray] = None


@dataclass
class _ScaModel:
    """Callbacks describing one SCA block over a real vector x."""
    objective: Callable[[np.ndarray], float]
    linearize: Callable[[np.ndarray], Tuple[np.ndarray, List[Tuple[float, np.ndarray, float]]]]
    lower: Callable[[np.ndarray], np.ndarray]
    upper: Callable[[np.ndarray], np.ndarray]
    extra_rows: Callable[[np.ndarray, float], Tuple[np.ndarray, np.ndarray]] = None
    finalize: Callable[[np.ndarray], np.ndarray] = lambda x: x
    is_valid: Callable[[np.ndarray], bool] = lambda x: True


def _qos_rows(x: np.ndarray, qos: List[Tuple[float, np.ndarray, float]]) -> Tuple[np.ndarray, np.ndarray]:
    """gamma + grad^T (x' - x) >= gamma_min, relaxed to 'no worse' when already violated."""
    rows, rhs = [], []
    for gamma, grad, gamma_min in qos:
        rows.append(grad)
        if gamma >= gamma_min:
            rhs.append(gamma_min - gamma + grad @ x)
        else:
            rhs.append(grad @ x)
    return np.array(rows).reshape(len(rows), x.size), np.array(rhs)


def _run_sca(model: _ScaModel, x0: np.ndarray, trust: TrustRegionState, max_steps: int) -> ScaOutcome:
    x = np.array(x0, dtype=float)
    value = model.objective(x)
    outcome = ScaOutcome(x=x, trust=trust, objective=value)
    for _ in range(max_steps):
        grad, qos = model.linearize(x)
        if not np.any(grad):
            break
        rows, rhs = _qos_rows(x, qos)
        if model.extra_rows is not None:
            extra_g, extra_h = model.extra_rows(x, outcome.trust.radius)
            rows = np.vstack([rows, extra_g]) if extra_g.size else rows
            rhs = np.concatenate([rhs, extra_h]) if extra_h.size else rhs
        lp = TrustRegionLp(gradient=grad, center=x, radius=outcome.trust.radius,
                           lower=model.lower(x), upper=model.upper(x), rows=rows, rhs=rhs)
        candidate, _ = solve_tr_lp(lp)
        predicted = float(grad @ (candidate - x))
        if predicted <= 1e-12 * (1.0 + abs(value)):
            break
        candidate = model.finalize(candidate)
        if not model.is_valid(candidate):
            outcome.rejected += 1
            outcome.trust = outcome.trust.shrunk()
        else:
            new_value = model.objective(candidate)
            ratio = (new_value - value) / predicted
            if new_value <= value:
                outcome.rejected += 1
                outcome.trust = outcome.trust.shrunk()
            else:
                outcome.accepted += 1
                x, value = candidate, new_value
                if ratio > outcome.trust.accept_high:
                    outcome.trust = outcome.trust.grown()
                elif ratio < outcome.trust.accept_low:
                    outcome.trust = outcome.trust.shrunk()
        if outcome.rejected and outcome.trust.exhausted:
            break
    outcome.x, outcome.objective = x, value
    return outcome


def update_phi(ch: ChannelSet, st: OptState, cfg: ScenarioConfig, trust: TrustRegionState,
               max_steps: int = 10, track_combiner: bool = True) -> ScaOutcome:
    """
    Phase block. The SINR rows linearize gamma_i itself; the box is applied
    as theta +- pi (phases are periodic) and accepted points wrap into [0, 2pi).

    With `track_combiner` every trial point is scored with its own MMSE
    combiner, so the block optimizes max_v R_sum. The combiner is the
    maximizer of gamma_UL, hence the fixed-v gradient at that combiner is
    the gradient of the tracked objective. The outcome carries the combiner
    of the returned phases.
    """
    def state_at(theta: np.ndarray) -> OptState:
        probe = st.evolve(theta=theta)
        return probe.evolve(v=mmse_combiner(ch, probe, cfg)) if track_combiner else probe

    def objective(theta: np.ndarray) -> float:
        probe = state_at(theta)
        return rate_from_sinrs(sinr_dl(ch, probe, cfg), sinr_ul(ch, probe, cfg))

    def linearize(theta: np.ndarray):
        grads = phase_gradients(ch, state_at(theta), cfg)
        qos = [(grads.gamma_dl, grads.d_gamma_dl, cfg.gamma_min_dl),
               (grads.gamma_ul, grads.d_gamma_ul, cfg.gamma_min_ul)]
        return grads.d_rate_sum, qos

    model = _ScaModel(objective=objective, linearize=linearize,
                      lower=lambda x: x - math.pi, upper=lambda x: x + math.pi,
                      finalize=lambda x: np.mod(x, 2.0 * math.pi))
    outcome = _run_sca(model, st.theta, trust, max_steps)
    outcome.v = state_at(outcome.x).v
    logger.debug(f"phase SCA: accepted={outcome.accepted} rejected={outcome.rejected} "
                 f"radius={outcome.trust.radius:.3e}")
    return outcome


def separation_rows(coords: np.ndarray, min_separation: float, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    u^T (x_m - x_k) >= d0 with u the unit vector between the current points.

    By Cauchy-Schwarz the row implies ||x_m - x_k|| >= d0. Pairs further
    apart than d0 + 2 * radius cannot violate the bound inside the ball and
    are skipped.
    """
    count = coords.shape[1]
    rows, rhs = [], []
    for m in range(count):
        for k in range(m + 1, count):
            diff = coords[:, m] - coords[:, k]
            dist = float(np.linalg.norm(diff))
            if dist > min_separation + 2.0 * radius or dist == 0.0:
                continue
            u = diff / dist
            row = np.zeros(2 * count)
            row[2 * m:2 * m + 2] = u
            row[2 * k:2 * k + 2] = -u
            rows.append(row)
            rhs.append(min_separation)
    return np.array(rows).reshape(len(rows), 2 * count), np.array(rhs)


@dataclass
class PositionUpdate:
    positions: PositionSet
    channels: ChannelSet
    trust: TrustRegionState
    accepted: int
    rejected: int
    v: np.ndarray


def update_positions(real: ScenarioRealization, st: OptState, cfg: ScenarioConfig,
                     which: CoordinateArray, trust: TrustRegionState,
                     max_steps: int = 10, track_combiner: bool = True) -> PositionUpdate:
    """
    Position block for T_t, T_r or R.

    The objective is the sum rate for T_t and R and the uplink rate for T_r
    (the downlink does not depend on the receive array). Channels are rebuilt
    for every trial point; a point violating the box or the true minimum
    separation is rejected and the radius shrinks. As in `update_phi`,
    `track_combiner` scores each trial point with its own MMSE combiner.
    """
    base = _positions_of(st, which)
    uplink_only = which is CoordinateArray.RX

    def layout(x: np.ndarray) -> PositionSet:
        return base.with_coords(x.reshape(-1, 2).T)

    def evaluate(x: np.ndarray) -> Tuple[OptState, ChannelSet]:
        probe = _with_positions(st, which, layout(x))
        ch = build_channels(real, probe.T_t, probe.T_r, probe.R, validate=False)
        if track_combiner:
            probe = probe.evolve(v=mmse_combiner(ch, probe, cfg))
        return probe, ch

    def objective(x: np.ndarray) -> float:
        probe, ch = evaluate(x)
        g_ul = sinr_ul(ch, probe, cfg)
        if uplink_only:
            return math.log2(1.0 + g_ul)
        return rate_from_sinrs(sinr_dl(ch, probe, cfg), g_ul)

    def linearize(x: np.ndarray):
        probe, ch = evaluate(x)
        grads = position_gradients(real, probe, cfg, which, ch)
        qos = [(grads.gamma_ul, grads.d_gamma_ul, cfg.gamma_min_ul)]
        if uplink_only:
            return grads.d_rate_ul, qos
        qos.insert(0, (grads.gamma_dl, grads.d_gamma_dl, cfg.gamma_min_dl))
        return grads.d_rate_sum, qos

    def is_valid(x: np.ndarray) -> bool:
        try:
            layout(x).validate()
        except ValueError:
            return False
        return True

    half = base.half_side_m
    model = _ScaModel(
        objective=objective, linearize=linearize,
        lower=lambda x: np.full_like(x, -half), upper=lambda x: np.full_like(x, half),
        extra_rows=lambda x, radius: separation_rows(x.reshape(-1, 2).T, base.min_separation_m, radius),
        is_valid=is_valid)
    outcome = _run_sca(model, base.coords.T.ravel(), trust, max_steps)
    positions = layout(outcome.x)
    final, _ = evaluate(outcome.x)
    channels = build_channels(real, final.T_t, final.T_r, final.R)
    logger.debug(f"{which.value} SCA: accepted={outcome.accepted} rejected={outcome.rejected} "
                 f"radius={outcome.trust.radius:.3e}")
    return PositionUpdate(positions=positions, channels=channels, trust=outcome.trust,
                          accepted=outcome.accepted, rejected=outcome.rejected, v=final.v)
