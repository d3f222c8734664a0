#!/usr/bin/env python3
"""
ConvexKernels Module

Small dense numerical kernels shared by the block updates:

- a primal-dual path-following SDP solver (HKM direction) working on the
  real symmetric embedding of complex Hermitian problems,
- the dominant eigenpair of a Hermitian matrix,
- the whitened MMSE direction (sigma^2 I + S)^-1 a,
- a trust-region subproblem with a linear objective, linear rows, a box
  and a Euclidean ball, solved with SLSQP.

Author: MA-FD Optimizer
Version: 1.0
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, TextIO, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

logger = logging.getLogger(__name__)

DEFAULT_SDP_TOL = 1e-7
DEFAULT_TR_LP_TOL = 1e-8
DEFAULT_SIZE_CAP = 64


class SdpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max_iterations"


class Sense(Enum):
    GE = ">="
    LE = "<="
    EQ = "=="


@dataclass(frozen=True)
class SdpConstraint:
    """tr(matrix @ W) <sense> rhs."""
    matrix: np.ndarray
    sense: Sense
    rhs: float


@dataclass(frozen=True)
class SdpProblem:
    """Maximize tr(objective @ W) over Hermitian W >= 0 subject to the constraints."""
    objective: np.ndarray
    constraints: Tuple[SdpConstraint, ...] = ()
    size_cap: int = DEFAULT_SIZE_CAP

    @property
    def size(self) -> int:
        return self.objective.shape[0]

    def with_constraint(self, matrix: np.ndarray, sense: Sense, rhs: float) -> "SdpProblem":
        return SdpProblem(objective=self.objective,
                          constraints=self.constraints + (SdpConstraint(matrix, sense, float(rhs)),),
                          size_cap=self.size_cap)

    def validate(self) -> None:
        n = self.size
        if n > self.size_cap:
            raise ValueError(f"SDP size {n} exceeds the small-scale cap {self.size_cap}")
        for k, mat in enumerate([self.objective] + [c.matrix for c in self.constraints]):
            if mat.shape != (n, n):
                raise ValueError(f"SDP matrix {k} has shape {mat.shape}, expected {(n, n)}")
            scale = max(1.0, float(np.max(np.abs(mat))))
            if np.max(np.abs(mat - mat.conj().T)) > 1e-10 * scale:
                raise ValueError(f"SDP matrix {k} is not Hermitian")

    def objective_value(self, W: np.ndarray) -> float:
        return float(np.real(np.trace(self.objective @ W)))

    def max_violation(self, W: np.ndarray) -> float:
        """Largest constraint violation scaled by 1 + |b_k|."""
        worst = 0.0
        for c in self.constraints:
            lhs = float(np.real(np.trace(c.matrix @ W)))
            if c.sense is Sense.GE:
                gap = c.rhs - lhs
            elif c.sense is Sense.LE:
                gap = lhs - c.rhs
            else:
                gap = abs(lhs - c.rhs)
            worst = max(worst, gap / (1.0 + abs(c.rhs)))
        return worst


@dataclass
class SdpResult:
    W: Optional[np.ndarray]
    status: SdpStatus
    objective: float = math.nan
    iterations: int = 0
    gap: float = math.nan


def real_embedding(M: np.ndarray) -> np.ndarray:
    """Hermitian n x n -> real symmetric 2n x 2n with tr(C W) = tr(C^ W^) / 2."""
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def complex_from_embedding(X: np.ndarray, n: int) -> np.ndarray:
    """Project a 2n x 2n real symmetric matrix back onto the Hermitian structure."""
    re = 0.5 * (X[:n, :n] + X[n:, n:])
    im = 0.5 * (X[n:, :n] - X[:n, n:])
    W = re + 1j * im
    return 0.5 * (W + W.conj().T)


class _StandardForm:
    """min <C, X> s.t. <A_i, X> = b_i, X >= 0 with X = blkdiag(W^, diag(slacks))."""

    def __init__(self, problem: SdpProblem):
        self.n = problem.size
        self.infeasible_rows: List[int] = []
        rows = []
        for k, con in enumerate(problem.constraints):
            block = 0.5 * real_embedding(con.matrix)
            scale = float(np.linalg.norm(block))
            if scale == 0.0:
                ok = {Sense.GE: con.rhs <= 0.0, Sense.LE: con.rhs >= 0.0,
                      Sense.EQ: con.rhs == 0.0}[con.sense]
                if not ok:
                    self.infeasible_rows.append(k)
                continue
            rows.append((block / scale, con.sense, con.rhs / scale))

        self.num_slacks = sum(1 for _, sense, _ in rows if sense is not Sense.EQ)
        dim_w = 2 * self.n
        self.dim = dim_w + self.num_slacks
        self.A = np.zeros((len(rows), self.dim, self.dim))
        self.b = np.zeros(len(rows))
        slack = dim_w
        for i, (block, sense, rhs) in enumerate(rows):
            self.A[i, :dim_w, :dim_w] = block
            if sense is not Sense.EQ:
                self.A[i, slack, slack] = -1.0 if sense is Sense.GE else 1.0
                slack += 1
            self.b[i] = rhs

        self.C = np.zeros((self.dim, self.dim))
        obj = -0.5 * real_embedding(problem.objective)
        self.obj_scale = float(np.linalg.norm(obj)) or 1.0
        self.C[:dim_w, :dim_w] = obj / self.obj_scale

    def apply(self, X: np.ndarray) -> np.ndarray:
        return np.einsum('kij,ij->k', self.A, X)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return np.tensordot(y, self.A, axes=1)


def _max_step(X: np.ndarray, D: np.ndarray) -> float:
    """Largest alpha with X + alpha D >= 0 (X positive definite)."""
    try:
        L = scipy.linalg.cholesky(X, lower=True)
    except (scipy.linalg.LinAlgError, ValueError):
        return 0.0
    T = scipy.linalg.solve_triangular(L, D, lower=True)
    S = scipy.linalg.solve_triangular(L, T.T, lower=True)
    lam_min = float(np.linalg.eigvalsh(0.5 * (S + S.T))[0])
    return math.inf if lam_min >= 0 else -1.0 / lam_min


def solve_sdp(problem: SdpProblem, tol: float = DEFAULT_SDP_TOL, max_iterations: int = 100,
              debug_stream: Optional[TextIO] = None) -> SdpResult:
    """
    Solve a small Hermitian SDP with an infeasible-start primal-dual method.

    Args:
        problem: Maximization problem over Hermitian PSD matrices
        tol: Relative tolerance on residuals and duality gap
        max_iterations: Iteration cap
        debug_stream: Optional text stream receiving one line per iterate

    Returns:
        SdpResult with W (None unless OPTIMAL or MAX_ITERATIONS) and status
    """
    problem.validate()
    sf = _StandardForm(problem)
    if sf.infeasible_rows:
        logger.debug(f"SDP rows {sf.infeasible_rows} are infeasible constants")
        return SdpResult(W=None, status=SdpStatus.INFEASIBLE)

    N = sf.dim
    m = len(sf.b)
    X = np.eye(N) * max(10.0, math.sqrt(N), 10.0 * float(np.max(np.abs(sf.b), initial=0.0)))
    Z = np.eye(N) * max(10.0, math.sqrt(N))
    y = np.zeros(m)
    b_norm = float(np.linalg.norm(sf.b))
    c_norm = float(np.linalg.norm(sf.C))

    def direction(sigma: float, mu: float, rp: np.ndarray, Rd: np.ndarray,
                  Zinv: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if m == 0:
            dy = np.zeros(0)
        else:
            XAZ = np.einsum('ij,kjl,lm->kim', X, sf.A, Zinv)
            M = np.einsum('kij,lij->kl', sf.A, XAZ)
            rhs = rp - sf.apply(sigma * mu * Zinv) + sf.apply(X) + sf.apply(X @ Rd @ Zinv)
            try:
                dy = scipy.linalg.solve(M, rhs, assume_a='sym')
            except (scipy.linalg.LinAlgError, ValueError):
                dy = np.linalg.lstsq(M, rhs, rcond=None)[0]
        dZ = Rd - sf.adjoint(dy)
        dX = sigma * mu * Zinv - X - X @ dZ @ Zinv
        return 0.5 * (dX + dX.T), dy, 0.5 * (dZ + dZ.T)

    status = SdpStatus.MAX_ITERATIONS
    iteration = 0
    gap = math.nan
    for iteration in range(1, max_iterations + 1):
        rp = sf.b - sf.apply(X)
        Rd = sf.C - sf.adjoint(y) - Z
        mu = float(np.sum(X * Z)) / N
        pobj = float(np.sum(sf.C * X))
        dobj = float(sf.b @ y)
        gap = abs(pobj - dobj)
        p_res = float(np.linalg.norm(rp))
        d_res = float(np.linalg.norm(Rd))
        if debug_stream is not None:
            debug_stream.write(f"{iteration:3d} pobj={pobj:+.10e} dobj={dobj:+.10e} "
                               f"rp={p_res:.3e} rd={d_res:.3e} mu={mu:.3e}\n")

        if (p_res <= tol * (1.0 + b_norm) and d_res <= tol * (1.0 + c_norm)
                and gap <= tol * (1.0 + abs(pobj))):
            status = SdpStatus.OPTIMAL
            break

        y_norm = float(np.linalg.norm(y))
        if y_norm > 1e3 and dobj / y_norm > 1e-8:
            cert = -sf.adjoint(y / y_norm)
            if float(np.linalg.eigvalsh(cert)[0]) >= -1e-7:
                status = SdpStatus.INFEASIBLE
                break
        x_trace = float(np.trace(X))
        if x_trace > 1e6:
            Xn = X / x_trace
            if (float(np.linalg.norm(sf.apply(Xn))) <= 1e-6
                    and float(np.sum(sf.C * Xn)) < -1e-8):
                status = SdpStatus.UNBOUNDED
                break
        if x_trace > 1e12 or y_norm > 1e12:
            status = SdpStatus.INFEASIBLE if y_norm > 1e12 else SdpStatus.UNBOUNDED
            break

        try:
            Zinv = scipy.linalg.cho_solve(scipy.linalg.cho_factor(Z), np.eye(N))
        except (scipy.linalg.LinAlgError, ValueError):
            logger.debug("SDP dual iterate lost definiteness")
            break
        Zinv = 0.5 * (Zinv + Zinv.T)

        # Predictor step fixes the centering parameter.
        dX, dy, dZ = direction(0.0, mu, rp, Rd, Zinv)
        a_p = min(1.0, _max_step(X, dX))
        a_d = min(1.0, _max_step(Z, dZ))
        mu_aff = float(np.sum((X + a_p * dX) * (Z + a_d * dZ))) / N
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        dX, dy, dZ = direction(sigma, mu, rp, Rd, Zinv)
        a_p = min(1.0, 0.95 * _max_step(X, dX))
        a_d = min(1.0, 0.95 * _max_step(Z, dZ))
        if a_p < 1e-12 and a_d < 1e-12:
            logger.debug("SDP step length collapsed")
            break
        X = X + a_p * dX
        y = y + a_d * dy
        Z = Z + a_d * dZ
        X = 0.5 * (X + X.T)
        Z = 0.5 * (Z + Z.T)

    logger.debug(f"SDP finished: status={status.value} iterations={iteration} gap={gap:.3e}")
    if status in (SdpStatus.INFEASIBLE, SdpStatus.UNBOUNDED):
        return SdpResult(W=None, status=status, iterations=iteration, gap=gap)
    W = complex_from_embedding(X[:2 * sf.n, :2 * sf.n], sf.n)
    return SdpResult(W=W, status=status, objective=problem.objective_value(W),
                     iterations=iteration, gap=gap * sf.obj_scale)


def dominant_eigpair(M: np.ndarray, degeneracy_tol: float = 1e-12) -> Tuple[float, np.ndarray]:
    """
    Largest eigenvalue and a unit eigenvector of a Hermitian matrix.

    Ties in the top eigenspace are resolved by projecting the first canonical
    basis vector onto it; the returned vector's phase is fixed so that its
    first significant entry is real and positive.
    """
    H = 0.5 * (M + M.conj().T)
    values, vectors = scipy.linalg.eigh(H)
    lam = float(values[-1])
    scale = max(1.0, abs(lam))
    top = vectors[:, values >= lam - degeneracy_tol * scale]
    if top.shape[1] > 1:
        u = None
        for k in range(H.shape[0]):
            probe = top @ top[k, :].conj()
            if np.linalg.norm(probe) > 1e-8:
                u = probe
                break
        u = top[:, 0] if u is None else u
    else:
        u = top[:, 0]
    u = u / np.linalg.norm(u)
    lead = int(np.argmax(np.abs(u) > 1e-8 * np.max(np.abs(u))))
    u = u * np.exp(-1j * np.angle(u[lead]))
    return lam, u


def whitened_mmse_direction(a: np.ndarray, S: np.ndarray, noise_power: float) -> np.ndarray:
    """Unit vector along (sigma^2 I + S)^-1 a."""
    n = a.shape[0]
    if not np.any(a):
        unit = np.zeros(n, dtype=complex)
        unit[0] = 1.0
        return unit
    x = scipy.linalg.solve(noise_power * np.eye(n) + S, a, assume_a='her')
    return x / np.linalg.norm(x)


class TrLpStatus(Enum):
    OPTIMAL = "optimal"
    CENTER = "center"
    INFEASIBLE_RESTORE = "infeasible_restore"


@dataclass(frozen=True)
class TrustRegionLp:
    """Maximize c^T x s.t. G x >= h, lower <= x <= upper, ||x - center|| <= radius."""
    gradient: np.ndarray
    center: np.ndarray
    radius: float
    lower: np.ndarray
    upper: np.ndarray
    rows: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    rhs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def has_rows(self) -> bool:
        return self.rows.size > 0

    def is_feasible(self, x: np.ndarray, tol: float) -> bool:
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return False
        if np.linalg.norm(x - self.center) > self.radius * (1.0 + tol) + tol:
            return False
        if self.has_rows:
            slack = self.rows @ x - self.rhs
            if np.any(slack < -tol * (1.0 + np.abs(self.rhs))):
                return False
        return True


def solve_tr_lp(prob: TrustRegionLp, tol: float = DEFAULT_TR_LP_TOL) -> Tuple[np.ndarray, TrLpStatus]:
    """
    Solve the trust-region linear subproblem.

    The objective at the returned point is never below its value at the
    center; when SLSQP fails or does not improve, the center is returned.
    """
    c = np.asarray(prob.gradient, dtype=float)
    x0 = np.asarray(prob.center, dtype=float)
    c_norm = float(np.linalg.norm(c))
    if c_norm == 0.0:
        return x0.copy(), TrLpStatus.OPTIMAL
    if not prob.is_feasible(x0, max(tol, 1e-9)):
        logger.debug("Trust-region center violates its rows or box")
        return x0.copy(), TrLpStatus.INFEASIBLE_RESTORE

    step = x0 + prob.radius * c / c_norm
    if not prob.has_rows and np.all(step >= prob.lower) and np.all(step <= prob.upper):
        return step, TrLpStatus.OPTIMAL

    # Work in z = (x - x0) / radius so the ball is the unit ball.
    delta = prob.radius
    c_hat = c / c_norm
    lower = np.maximum((prob.lower - x0) / delta, -1.0)
    upper = np.minimum((prob.upper - x0) / delta, 1.0)
    constraints = [{
        'type': 'ineq',
        'fun': lambda z: 1.0 - z @ z,
        'jac': lambda z: -2.0 * z,
    }]
    if prob.has_rows:
        G = prob.rows * delta
        h = prob.rhs - prob.rows @ x0
        norms = np.linalg.norm(G, axis=1)
        norms[norms == 0.0] = 1.0
        Gn, hn = G / norms[:, None], h / norms
        constraints.append({
            'type': 'ineq',
            'fun': lambda z: Gn @ z - hn,
            'jac': lambda z: Gn,
        })

    result = minimize(lambda z: -(c_hat @ z), np.zeros_like(x0), jac=lambda z: -c_hat,
                      method='SLSQP', bounds=list(zip(lower, upper)), constraints=constraints,
                      options={'ftol': tol, 'maxiter': 200})
    z = result.x
    z_norm = float(np.linalg.norm(z))
    if z_norm > 1.0:
        # Scaling toward a feasible center keeps the box and rows satisfied.
        z = z / z_norm
    x = np.clip(x0 + delta * z, prob.lower, prob.upper)
    if not prob.is_feasible(x, max(tol, 1e-9)) or c @ x <= c @ x0:
        logger.debug(f"SLSQP returned no usable step ({result.message})")
        return x0.copy(), TrLpStatus.CENTER
    return x, TrLpStatus.OPTIMAL
