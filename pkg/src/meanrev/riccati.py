"""Matrix Riccati ODEs on an inverse-time grid, with closed-form oracles.

Two first-class equations drive everything downstream:

* the A-equation, whose solution enters the value function, and
* the D-equation, whose solution is the feedback matrix of the optimal
  position rule alpha = -w D(tau) x.

The explicitly solvable special cases (scalar, uncorrelated, common
reversion rate, single mean-reverting asset hedged by Brownian motions)
are provided as independent closed forms so the integrator can always be
cross-checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BlowUpDetected, OutOfRange, TrigSingularity
from .model import OUParams, Preferences


class SolutionKind(Enum):
    A_MATRIX = "A"
    D_MATRIX = "D"
    F_MATRIX = "F"
    Q_MATRIX = "Q"


@dataclass(frozen=True)
class StepControl:
    """Adaptive integrator settings."""

    tol: float = 1e-10
    first_step_fraction: float = 1e-3
    min_step_fraction: float = 1e-9
    blowup_threshold: float = 1e12
    dense_points: int = 1024


@dataclass(frozen=True)
class QuadraticOperator:
    """Right-hand side M -> M' of a matrix ODE, closed over fixed matrices.

    ``trace_weight`` selects what the running trace integral accumulates:
    Tr(M(u) @ trace_weight) du.
    """

    rhs: Callable[[float, np.ndarray], np.ndarray]
    n: int
    kind: SolutionKind
    initial: np.ndarray
    trace_weight: np.ndarray

    def __call__(self, tau: float, m: np.ndarray) -> np.ndarray:
        return self.rhs(tau, m)


class RiccatiSolution:
    """A time-indexed matrix function on a tau grid in [0, T].

    Stores dense output at uniform points plus every adaptive accept point,
    together with the running trace integral, and interpolates with the
    integrator's own dense interpolant (order-matched, exact at grid points).
    """

    def __init__(self, tau_grid, values, trace_integral, kind, dense, horizon):
        self.tau_grid = np.asarray(tau_grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.trace_integral = np.asarray(trace_integral, dtype=float)
        self.kind = kind
        self.horizon = float(horizon)
        self._dense = dense
        self.n = self.values.shape[1]

    def __call__(self, tau: float) -> np.ndarray:
        return self.interpolate(tau)

    def interpolate(self, tau: float) -> np.ndarray:
        if tau < 0 or tau > self.horizon:
            raise OutOfRange(f"tau={tau} outside [0, {self.horizon}]")
        idx = np.searchsorted(self.tau_grid, tau)
        if idx < len(self.tau_grid) and self.tau_grid[idx] == tau:
            return self.values[idx]
        return self._dense(tau)[: self.n * self.n].reshape(self.n, self.n)

    def trace_integral_at(self, tau: float) -> float:
        if tau < 0 or tau > self.horizon:
            raise OutOfRange(f"tau={tau} outside [0, {self.horizon}]")
        idx = np.searchsorted(self.tau_grid, tau)
        if idx < len(self.tau_grid) and self.tau_grid[idx] == tau:
            return float(self.trace_integral[idx])
        return float(self._dense(tau)[-1])

    def at_many(self, taus: np.ndarray) -> np.ndarray:
        """Matrices at several tau values, shape (len(taus), n, n)."""
        taus = np.asarray(taus, dtype=float)
        if taus.size == 0:
            return np.empty((0, self.n, self.n))
        if taus.min() < 0 or taus.max() > self.horizon:
            raise OutOfRange("tau values outside solution span")
        flat = self._dense(taus)[: self.n * self.n]
        return np.moveaxis(flat.reshape(self.n, self.n, -1), 2, 0)


def ric_operator_A(a: np.ndarray, corr: np.ndarray, kappa: np.ndarray, delta: float) -> np.ndarray:
    """Quadratic operator of the A-equation.

    kappa is the vector of reversion rates (the matrix is diagonal).
    """
    s = a.T + a
    kd = kappa[:, None]  # diag(kappa) @ M  ==  kappa[:, None] * M
    corr_inv = np.linalg.inv(corr)
    const = (delta * (delta - 1.0) / 2.0) * (kd * corr_inv * kappa[None, :])
    return 0.5 * s @ corr @ s - 0.5 * (delta + 1.0) * (kd * s) - 0.5 * (delta - 1.0) * (s * kappa[None, :]) + const


def ric_operator_D(d: np.ndarray, corr: np.ndarray, kappa: np.ndarray, delta: float) -> np.ndarray:
    """Quadratic operator of the D-equation: -D^T Theta D + delta K Theta^{-1} K."""
    corr_inv = np.linalg.inv(corr)
    return -d.T @ corr @ d + delta * (kappa[:, None] * corr_inv * kappa[None, :])


def make_A_operator(params: OUParams, prefs: Preferences) -> QuadraticOperator:
    corr, kappa, delta = params.corr, params.kappa, prefs.delta
    corr_inv = np.linalg.inv(corr)
    kd = kappa[:, None]
    const = (delta * (delta - 1.0) / 2.0) * (kd * corr_inv * kappa[None, :])

    def rhs(tau, a):
        s = a.T + a
        return 0.5 * s @ corr @ s - 0.5 * (delta + 1.0) * (kd * s) - 0.5 * (delta - 1.0) * (s * kappa[None, :]) + const

    return QuadraticOperator(
        rhs=rhs, n=params.n, kind=SolutionKind.A_MATRIX,
        initial=np.zeros((params.n, params.n)), trace_weight=corr,
    )


def make_D_operator(params: OUParams, prefs: Preferences) -> QuadraticOperator:
    corr, kappa, delta = params.corr, params.kappa, prefs.delta
    corr_inv = np.linalg.inv(corr)
    const = delta * (kappa[:, None] * corr_inv * kappa[None, :])

    def rhs(tau, d):
        return -d.T @ corr @ d + const

    return QuadraticOperator(
        rhs=rhs, n=params.n, kind=SolutionKind.D_MATRIX,
        initial=delta * corr_inv @ np.diag(kappa), trace_weight=corr,
    )


def solve(op: QuadraticOperator, horizon: float, ctrl: StepControl | None = None) -> RiccatiSolution:
    """Integrate a matrix Riccati ODE over tau in [0, horizon].

    The running trace integral is carried as an extra state component so it
    shares the stepper's quadrature order.  Divergence raises BlowUpDetected
    with the inverse time at which it was observed.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    ctrl = ctrl or StepControl()
    n = op.n
    weight = op.trace_weight

    def rhs_flat(tau, y):
        m = y[: n * n].reshape(n, n)
        dm = op.rhs(tau, m)
        dtrace = float(np.sum(m * weight.T))  # Tr(M @ W)
        return np.append(dm.ravel(), dtrace)

    def blowup_event(tau, y):
        return ctrl.blowup_threshold - np.abs(y[: n * n]).max()

    blowup_event.terminal = True
    blowup_event.direction = -1

    y0 = np.append(np.asarray(op.initial, dtype=float).ravel(), 0.0)
    result = solve_ivp(
        rhs_flat,
        (0.0, horizon),
        y0,
        method="RK45",
        dense_output=True,
        rtol=1e-10,
        atol=ctrl.tol,
        first_step=ctrl.first_step_fraction * horizon,
        events=blowup_event,
    )
    if result.status == 1 or (result.status == 0 and result.t[-1] < horizon):
        raise BlowUpDetected(result.t[-1])
    if result.status < 0:
        raise BlowUpDetected(result.t[-1], f"integrator failed near tau = {result.t[-1]:.6g}: {result.message}")

    uniform = np.linspace(0.0, horizon, ctrl.dense_points)
    tau_grid = np.union1d(uniform, result.t)
    dense = result.sol
    stacked = dense(tau_grid)
    values = np.moveaxis(stacked[: n * n].reshape(n, n, -1), 2, 0)
    # Pin the initial condition exactly; dense output can carry ~1e-16 noise.
    values[0] = np.asarray(op.initial, dtype=float)
    trace = stacked[-1]
    trace[0] = 0.0
    return RiccatiSolution(tau_grid, values, trace, op.kind, dense, horizon)


def solve_A(params: OUParams, prefs: Preferences, horizon: float, ctrl: StepControl | None = None) -> RiccatiSolution:
    return solve(make_A_operator(params, prefs), horizon, ctrl)


def solve_D(params: OUParams, prefs: Preferences, horizon: float, ctrl: StepControl | None = None) -> RiccatiSolution:
    return solve(make_D_operator(params, prefs), horizon, ctrl)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def d_scalar_closed_form(kappa: float, delta: float, tau) -> np.ndarray | float:
    """Scalar feedback multiplier: a shifted and scaled sigmoid in tau.

    D(tau) = k sqrt(d) (sqrt(d) cosh u + sinh u) / (sqrt(d) sinh u + cosh u)
    with u = k sqrt(d) tau; evaluated via tanh for overflow safety.
    Returns 0 identically at kappa = 0.
    """
    if kappa < 0 or delta <= 0:
        raise ValueError("need kappa >= 0 and delta > 0")
    tau = np.asarray(tau, dtype=float)
    if kappa == 0.0:
        return np.zeros_like(tau) if tau.ndim else 0.0
    sd = np.sqrt(delta)
    t = np.tanh(kappa * sd * tau)
    out = kappa * sd * (sd + t) / (sd * t + 1.0)
    return out if tau.ndim else float(out)


def d_uncorrelated(kappas, delta: float, tau: float) -> np.ndarray:
    """Feedback matrix for independent assets: diagonal of scalar solutions."""
    kappas = np.asarray(kappas, dtype=float)
    return np.diag([d_scalar_closed_form(float(k), delta, tau) for k in kappas])


def d_common_kappa(kappa: float, corr: np.ndarray, delta: float, tau: float) -> np.ndarray:
    """Feedback matrix when all assets share one reversion rate.

    The Cholesky factor-portfolio transform reduces this case to independent
    assets, giving D(tau) = D_scalar(tau) * Theta^{-1}.
    """
    return d_scalar_closed_form(kappa, delta, tau) * np.linalg.inv(corr)


def single_mr_blowup_tau(kappa: float, corr: np.ndarray, gamma: float) -> float | None:
    """Pole location of the risk-seeking branch, or None if no pole exists."""
    prefs = Preferences(gamma=gamma)
    delta = prefs.delta
    zeta = float(np.linalg.inv(corr)[0, 0])
    if not gamma * zeta > 1.0:
        return None
    lam = np.sqrt(abs(delta * (delta - 1.0) * zeta - delta**2))
    # denominator d sin(l k t) + l cos(l k t) first crosses zero at
    # l k t = pi - arctan(l / d)
    return float((np.pi - np.arctan2(lam, delta)) / (lam * kappa))


def d_single_mr(kappa: float, corr: np.ndarray, gamma: float, tau: float) -> np.ndarray:
    """Feedback matrix for one mean-reverting asset plus Brownian hedges.

    Reversion-rate matrix diag(kappa, 0, ..., 0).  Only the first column is
    nonzero: rows below the first hold the constant hedge coefficients
    delta*kappa*(Theta^{-1})_{j1}; the (1,1) entry follows one of three
    branches selected by the sign of gamma - 1/zeta, zeta = (Theta^{-1})_11.
    """
    if not gamma < 1:
        raise ValueError("gamma must be < 1")
    delta = Preferences(gamma=gamma).delta
    corr_inv = np.linalg.inv(corr)
    n = corr.shape[0]
    zeta = float(corr_inv[0, 0])
    lam = np.sqrt(abs(delta * (delta - 1.0) * zeta - delta**2))
    shift = delta * kappa * (zeta - 1.0)

    if abs(gamma * zeta - 1.0) < 1e-12:
        d11 = kappa * delta / (1.0 + delta * kappa * tau) + shift
    elif gamma * zeta < 1.0:
        t = np.tanh(lam * kappa * tau)
        d11 = kappa * lam * (delta + lam * t) / (delta * t + lam) + shift
    else:
        tau_star = single_mr_blowup_tau(kappa, corr, gamma)
        if tau_star is not None and tau >= tau_star:
            raise TrigSingularity(tau_star)
        u = lam * kappa * tau
        d11 = kappa * lam * (delta * np.cos(u) - lam * np.sin(u)) / (delta * np.sin(u) + lam * np.cos(u)) + shift

    out = np.zeros((n, n))
    out[0, 0] = d11
    out[1:, 0] = delta * kappa * corr_inv[1:, 0]
    return out


def interpolate(sol: RiccatiSolution, tau: float) -> np.ndarray:
    """Matrix at an arbitrary tau within the solution's span."""
    return sol.interpolate(tau)
