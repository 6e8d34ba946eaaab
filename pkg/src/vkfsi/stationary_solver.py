"""Stationary shell states under a time-independent transversal load.

Stationary solutions have zero fluid velocity and minimise

    Pi(u) = 1/2 [ |Lap w|^2 + Q(u) ] - (g, w)

over the same modal space as the dynamics, so a minimiser is an exact fixed
point of the reduced ODE system.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .coupled_galerkin import ForcingSpec, GalerkinSystem, ModalState, nonlinear_load, zero_state
from .diagnostics_energy import _modal_membrane
from .shell_mechanics import Kinematics, strain_from_kinematics

logger = logging.getLogger(__name__)


@dataclass
class StationaryProblem:
    sys: GalerkinSystem
    forcing: ForcingSpec

    def __post_init__(self):
        if not self.forcing.stationary_compatible:
            raise ValueError("stationary problem needs stationary-compatible forcing (G_f = 0, in-plane loads 0, static g)")

    @property
    def load(self) -> np.ndarray:
        """``(g, zeta_k)`` for every shell mode."""
        return self.sys.modal_profiles(self.forcing)[1][self.sys.m :]

    @property
    def dim(self) -> int:
        return 2 * self.sys.n


@dataclass
class StationaryResult:
    beta: np.ndarray
    pi: float
    residual: float
    identity_residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "pi": self.pi,
            "residual": self.residual,
            "identity_residual": self.identity_residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def pi_functional(beta: np.ndarray, problem: StationaryProblem) -> float:
    sys = problem.sys
    n = sys.n
    bend = float(np.sum(sys.kappa[n:] * beta[n:] ** 2))
    memb = _modal_membrane(beta, None, sys)
    return 0.5 * (bend + memb) - float(problem.load @ beta)


def pi_gradient(beta: np.ndarray, problem: StationaryProblem) -> np.ndarray:
    """Modal gradient of Pi: exactly the static part of the shell equations of the reduced system."""
    sys = problem.sys
    return sys.kappa * beta + nonlinear_load(beta, None, sys) - problem.load


def _scale(problem: StationaryProblem) -> float:
    return max(1.0, float(np.max(np.abs(problem.load))) if problem.load.size else 1.0)


def stationary_residual(beta: np.ndarray, problem: StationaryProblem) -> float:
    """max_k |(Lap w, Lap d_k) + qbar(u, zeta_k) - (g, d_k)| over the unit modal test directions, normalized."""
    return float(np.max(np.abs(pi_gradient(beta, problem)))) / _scale(problem)


def _fd_hessian(beta: np.ndarray, problem: StationaryProblem, g0: np.ndarray) -> np.ndarray:
    d = beta.size
    H = np.empty((d, d))
    for j in range(d):
        h = 1e-7 * max(1.0, abs(beta[j]))
        e = beta.copy()
        e[j] += h
        H[:, j] = (pi_gradient(e, problem) - g0) / h
    return 0.5 * (H + H.T)


def solve_stationary(
    problem: StationaryProblem,
    beta0: np.ndarray | None = None,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> StationaryResult:
    """Damped Newton on the modal coefficients with forward-difference Hessian and gradient fallback."""
    beta = np.zeros(problem.dim) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    if beta.shape != (problem.dim,):
        raise ValueError(f"start vector must have length {problem.dim}")
    kmax = float(np.max(problem.sys.kappa))
    pi = pi_functional(beta, problem)
    history = []
    it = 0
    res = stationary_residual(beta, problem)
    while res > tol and it < max_iter:
        it += 1
        g = pi_gradient(beta, problem)
        H = _fd_hessian(beta, problem, g)
        try:
            L = np.linalg.cholesky(H)
            d = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        except np.linalg.LinAlgError:
            d = -g / kmax
        if d @ g >= 0:
            d = -g / kmax
        s = 1.0
        while s > 1e-12:
            trial = beta + s * d
            p_new = pi_functional(trial, problem)
            if p_new <= pi + 1e-4 * s * (d @ g) or stationary_residual(trial, problem) < 0.5 * res:
                break
            s *= 0.5
        beta = beta + s * d
        pi = pi_functional(beta, problem)
        res = stationary_residual(beta, problem)
        history.append((it, pi, res, s))
        logger.debug("newton it=%d pi=%.12g res=%.3e step=%.3g", it, pi, res, s)
    converged = res <= tol
    if not converged:
        logger.warning("stationary solve stopped at the iteration cap with residual %.3e", res)
    return StationaryResult(
        beta=beta,
        pi=pi,
        residual=res,
        identity_residual=boundedness_identity(beta, problem),
        iterations=it,
        converged=converged,
        history=history,
    )


def boundedness_identity(beta: np.ndarray, problem: StationaryProblem) -> float:
    """| 1/2 |Lap w|^2 + Q(u) - 1/2 (k1 N11 + k2 N22, w) - 1/2 (g, w) |, normalized.

    Exact at stationary points: it is the stationary equation tested with ``u`` itself.
    """
    sys = problem.sys
    n = sys.n
    bend = float(np.sum(sys.kappa[n:] * beta[n:] ** 2))
    kin = Kinematics(*np.tensordot(beta, sys.mode_kin, axes=1))
    st = strain_from_kinematics(kin, sys.k1t, sys.k2t, sys.params.mu)
    area = sys.bases.grids.shell.tri_area
    Q = _modal_membrane(beta, None, sys)
    curv = area * float(np.sum((sys.k1t * st.n11 + sys.k2t * st.n22) * kin.wbar))
    gw = float(problem.load @ beta)
    lhs = 0.5 * bend + Q - 0.5 * curv
    return abs(lhs - 0.5 * gw) / max(1.0, abs(0.5 * gw))


def stationary_state(beta: np.ndarray, sys: GalerkinSystem) -> ModalState:
    """The dynamic state (v, u, u_t) = (0, u*, 0)."""
    s = zero_state(sys)
    s.beta = np.asarray(beta, dtype=float).copy()
    return s


def energy_distance(a: ModalState, b: ModalState, sys: GalerkinSystem, hessian: np.ndarray | None = None) -> float:
    """sqrt of the quadratic energy of the difference of two modal states.

    Kinetic part exact; potential part either the stiffness ``1/2 kappa dbeta^2``
    or, if given, ``1/2 dbeta^T H dbeta`` with a Hessian of Pi.
    """
    y = np.concatenate([a.alpha - b.alpha, a.betadot - b.betadot])
    db = a.beta - b.beta
    kin = 0.5 * float(y @ (sys.gram @ y)) + 0.5 * float(np.sum(sys.rho_k * (a.betadot - b.betadot) ** 2))
    pot = 0.5 * float(db @ (hessian @ db)) if hessian is not None else 0.5 * float(np.sum(sys.kappa * db**2))
    return float(np.sqrt(max(kin + pot, 0.0)))


def hessian_at(beta: np.ndarray, problem: StationaryProblem) -> np.ndarray:
    return _fd_hessian(beta, problem, pi_gradient(beta, problem))
