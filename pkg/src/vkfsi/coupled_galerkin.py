"""Spectral Galerkin reduction of the coupled fluid / shell system and its time integration.

Modal indexing follows the in-plane-first convention: for ``k < n`` the shell
mode is ``zeta_k = (eta_k, 0)`` with stiffness ``kappa~_k``, no damping and
inertia ``rho``; for ``k >= n`` it is ``zeta_k = (0, 0, xi_{k-n})`` with
stiffness ``kappa^_{k-n}``, damping ``gamma`` and unit inertia.  The fluid
velocity is ``v = sum alpha_i psi_i + sum betadot_j phi_j`` with
``phi_j = N0(zeta_j)``, so its trace matches the shell velocity by construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .domain_grid import Grids, MeanCarrier, mean_carrier, project_mean_zero
from .shell_mechanics import (
    PhysicalParams,
    ShellBasis,
    curvatures_on_triangles,
    inplane_eigenbasis,
    kinematics,
    malpha_matrix,
    transversal_eigenbasis,
)
from .stokes_flow import (
    DivergenceFreeSpace,
    StokesBasis,
    StokesSystem,
    interface_data,
    lift_N0,
    stokes_eigenbasis,
    trace_to_interface,
)

logger = logging.getLogger(__name__)


class NumericalAbort(RuntimeError):
    """Non-finite state encountered during time stepping."""


# --------------------------------------------------------------------------- bases


@dataclass
class Bases:
    grids: Grids
    m: int
    n: int
    alpha: float
    mu: float
    stokes: StokesBasis
    transversal: ShellBasis
    inplane: ShellBasis
    phi: np.ndarray  # (2n, fluid size) lifted shell modes
    carrier: MeanCarrier
    _stokes_system: StokesSystem | None = field(default=None, repr=False)

    @property
    def zeta(self) -> np.ndarray:
        """Shell modes as displacement triples, shape (2n, 3, nx+1, ny+1)."""
        sh = self.grids.shell
        out = np.zeros((2 * self.n, 3) + sh.shape)
        out[: self.n, :2] = self.inplane.modes
        out[self.n :, 2] = self.transversal.modes
        return out

    @property
    def kappa(self) -> np.ndarray:
        return np.concatenate([self.inplane.values, self.transversal.values])

    @property
    def stokes_system(self) -> StokesSystem:
        if self._stokes_system is None:
            self._stokes_system = StokesSystem(self.grids.fluid)
        return self._stokes_system


def build_bases(grids: Grids, params: PhysicalParams, m: int, n: int) -> Bases:
    if m < 1 or n < 1:
        raise ValueError("mode counts m, n must be at least 1")
    space = DivergenceFreeSpace(grids.fluid)
    stokes = stokes_eigenbasis(m, grids.fluid, space)
    tr = transversal_eigenbasis(n, params, grids.shell)
    ip = inplane_eigenbasis(n, params, grids.shell)
    system = StokesSystem(grids.fluid)
    bases = Bases(grids, m, n, params.alpha, params.mu, stokes, tr, ip, np.zeros(0), mean_carrier(grids.shell))
    bases._stokes_system = system
    bases.phi = np.array([lift_N0(z, system, grids.shell) for z in bases.zeta])
    logger.info("bases built: mu_1=%.4g kappa^_1=%.4g kappa~_1=%.4g", stokes.mu[0], tr.values[0], ip.values[0])
    return bases


# --------------------------------------------------------------------------- forcing


@dataclass
class ForcingSpec:
    """Body force on the fluid and load on the shell, each a fixed profile times a time factor."""

    name: str = "zero"
    fluid_profile: np.ndarray | None = None  # flat fluid field
    fluid_time: Callable[[float], float] | None = None
    shell_profile: np.ndarray | None = None  # (3, nx+1, ny+1)
    shell_time: Callable[[float], float] | None = None
    stationary_compatible: bool = True

    def __post_init__(self):
        if self.stationary_compatible:
            if self.fluid_profile is not None and np.any(self.fluid_profile != 0):
                raise ValueError("stationary-compatible forcing requires G_f = 0")
            if self.shell_profile is not None and np.any(self.shell_profile[:2] != 0):
                raise ValueError("stationary-compatible forcing requires zero in-plane shell loads")
            if self.shell_time is not None:
                raise ValueError("stationary-compatible forcing must be time-independent")

    def fluid_factor(self, t: float) -> float:
        if self.fluid_profile is None:
            return 0.0
        return 1.0 if self.fluid_time is None else float(self.fluid_time(t))

    def shell_factor(self, t: float) -> float:
        if self.shell_profile is None:
            return 0.0
        return 1.0 if self.shell_time is None else float(self.shell_time(t))

    def G_f(self, t: float, size: int) -> np.ndarray:
        if self.fluid_profile is None:
            return np.zeros(size)
        return self.fluid_factor(t) * self.fluid_profile

    def G_sh(self, t: float, shape) -> np.ndarray:
        if self.shell_profile is None:
            return np.zeros((3,) + tuple(shape))
        return self.shell_factor(t) * self.shell_profile

    @property
    def g(self) -> np.ndarray | None:
        """Transversal stationary load (only meaningful when stationary-compatible)."""
        return None if self.shell_profile is None else self.shell_profile[2]


def static_g_profile(grids: Grids, g0: float) -> np.ndarray:
    sh = grids.shell
    g = g0 * np.sin(np.pi * sh.X / sh.lx) * np.sin(np.pi * sh.Y / sh.ly)
    g = g - sh.integral(g) / (sh.lx * sh.ly)
    prof = np.zeros((3,) + sh.shape)
    prof[2] = g
    return prof


def pulse_window(t_on: float) -> Callable[[float], float]:
    def s(t: float) -> float:
        return float(np.sin(np.pi * t / t_on) ** 2) if 0.0 <= t <= t_on else 0.0

    return s


def pulse_profile(grids: Grids, amplitude: float) -> np.ndarray:
    d = grids.domain

    def f(x, y, z):
        zeta = (z + d.hz) / d.hz
        return (
            amplitude * np.sin(2 * np.pi * y / d.ly) * zeta,
            amplitude * np.sin(np.pi * x / d.lx) * zeta**2,
            amplitude * np.sin(np.pi * x / d.lx) * np.sin(2 * np.pi * y / d.ly) * zeta,
        )

    return grids.fluid.sample(f)


def forcing_preset(name: str, grids: Grids, amplitude: float = 1.0, t_on: float = 0.25) -> ForcingSpec:
    if name == "zero":
        return ForcingSpec("zero")
    if name == "static-g":
        return ForcingSpec("static-g", shell_profile=static_g_profile(grids, amplitude))
    if name == "pulse":
        return ForcingSpec(
            "pulse",
            fluid_profile=pulse_profile(grids, amplitude),
            fluid_time=pulse_window(t_on),
            stationary_compatible=False,
        )
    raise ValueError(f"unknown forcing preset {name!r} (known: zero, static-g, pulse)")


# --------------------------------------------------------------------------- system


_KIN_FIELDS = ("u1x", "u1y", "u2x", "u2y", "wx", "wy", "wbar")


def _kin_array(u: np.ndarray, grids: Grids) -> np.ndarray:
    k = kinematics(u, grids.shell)
    return np.array([getattr(k, f) for f in _KIN_FIELDS])


@dataclass
class GalerkinSystem:
    bases: Bases
    params: PhysicalParams
    m: int
    n: int
    gram: np.ndarray  # (m+2n)^2 Gram of [psi; phi]
    visc: np.ndarray  # (m+2n)^2 E-form of [psi; phi]
    mu: np.ndarray
    kappa: np.ndarray
    gamma_k: np.ndarray
    rho_k: np.ndarray
    M: np.ndarray
    mode_kin: np.ndarray  # (2n, 7, ntri)
    k1t: np.ndarray
    k2t: np.ndarray
    _chol: tuple = field(default=None, repr=False)
    _cn_cache: dict = field(default_factory=dict, repr=False)

    @property
    def nfluid(self) -> int:
        return self.m + 2 * self.n

    @property
    def fields(self) -> np.ndarray:
        return np.vstack([self.bases.stokes.psi, self.bases.phi])

    def solve_mass(self, rhs: np.ndarray) -> np.ndarray:
        return sla.cho_solve(self._chol, rhs)

    # modal loads of a forcing spec, cached per spec
    def modal_profiles(self, forcing: ForcingSpec) -> tuple[np.ndarray, np.ndarray]:
        key = id(forcing)
        cached = self._cn_cache.get(("forcing", key))
        if cached is not None and cached[0] is forcing:
            return cached[1]
        fl = self.bases.grids.fluid
        sh = self.bases.grids.shell
        ff = np.zeros(self.nfluid)
        fs = np.zeros(self.nfluid)
        if forcing.fluid_profile is not None:
            ff = self.fields @ (fl.mass_weights * forcing.fluid_profile)
        if forcing.shell_profile is not None:
            z = self.bases.zeta
            fs[self.m :] = np.einsum("kcij,cij->k", z, sh.weights[None] * forcing.shell_profile)
        self._cn_cache[("forcing", key)] = (forcing, (ff, fs))
        return ff, fs

    def modal_force(self, forcing: ForcingSpec, t: float) -> np.ndarray:
        ff, fs = self.modal_profiles(forcing)
        return forcing.fluid_factor(t) * ff + forcing.shell_factor(t) * fs


def build_system(bases: Bases, params: PhysicalParams, m: int | None = None, n: int | None = None) -> GalerkinSystem:
    m = bases.m if m is None else m
    n = bases.n if n is None else n
    if m != bases.m or n != bases.n:
        raise ValueError(f"dimension mismatch: bases have (m, n) = ({bases.m}, {bases.n}), asked ({m}, {n})")
    if not (np.isclose(params.alpha, bases.alpha) and np.isclose(params.mu, bases.mu)):
        raise ValueError("bases were built for different alpha / mu")
    fl = bases.grids.fluid
    F = np.vstack([bases.stokes.psi, bases.phi])
    gram = F @ (fl.mass_weights[:, None] * F.T)
    gram = 0.5 * (gram + gram.T)
    visc = F @ (fl.viscous_matrix @ F.T)
    visc = 0.5 * (visc + visc.T)
    gamma_k = np.concatenate([np.zeros(n), np.full(n, params.gamma)])
    rho_k = np.concatenate([np.full(n, params.rho), np.ones(n)])
    M = gram.copy()
    M[m:, m:] += np.diag(rho_k)
    try:
        chol = sla.cho_factor(M)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("mass matrix is not positive definite (corrupted basis?)") from exc
    mode_kin = np.array([_kin_array(z, bases.grids) for z in bases.zeta])
    k1t, k2t = curvatures_on_triangles(params, bases.grids.shell)
    return GalerkinSystem(
        bases=bases,
        params=params,
        m=m,
        n=n,
        gram=gram,
        visc=visc,
        mu=bases.stokes.mu.copy(),
        kappa=bases.kappa,
        gamma_k=gamma_k,
        rho_k=rho_k,
        M=M,
        mode_kin=mode_kin,
        k1t=k1t,
        k2t=k2t,
        _chol=chol,
    )


# --------------------------------------------------------------------------- state


@dataclass
class ModalState:
    t: float
    alpha: np.ndarray
    beta: np.ndarray
    betadot: np.ndarray
    frozen_mean: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta, self.betadot])

    def with_vector(self, z: np.ndarray, t: float) -> "ModalState":
        m, k = self.alpha.size, self.beta.size
        return replace(self, t=t, alpha=z[:m].copy(), beta=z[m : m + k].copy(), betadot=z[m + k :].copy())


def zero_state(sys: GalerkinSystem, t: float = 0.0) -> ModalState:
    sh = sys.bases.grids.shell
    return ModalState(t, np.zeros(sys.m), np.zeros(2 * sys.n), np.zeros(2 * sys.n), np.zeros(sh.shape))


def reconstruct(state: ModalState, bases: Bases):
    """Fields ``(v, u, u_t)`` synthesised from the modal sums plus the frozen mean of ``w``."""
    v = state.alpha @ bases.stokes.psi + state.betadot @ bases.phi
    z = bases.zeta
    u = np.tensordot(state.beta, z, axes=1)
    u[2] += state.frozen_mean
    ut = np.tensordot(state.betadot, z, axes=1)
    return v, u, ut


def compatibility_check(state: ModalState, bases: Bases) -> dict:
    """Volume defect ``|int w_t|`` and interface trace mismatch of a state."""
    sh = bases.grids.shell
    v, _, ut = reconstruct(state, bases)
    wt_norm = np.sqrt(sh.inner(ut[2], ut[2]))
    volume = abs(sh.integral(ut[2]))
    tr = trace_to_interface(v, bases.grids.fluid, sh)
    diff = tr - ut
    mis = np.sqrt(sum(sh.inner(a, a) for a in diff))
    ref = np.sqrt(sum(sh.inner(a, a) for a in ut))
    return {
        "volume": volume,
        "volume_rel": volume / wt_norm if wt_norm > 0 else 0.0,
        "trace_mismatch": mis,
        "trace_mismatch_rel": mis / ref if ref > 0 else 0.0,
    }


class IncompatibleInitialData(ValueError):
    pass


def project_initial_data(v0, u0, u1, bases: Bases, params: PhysicalParams, tol: float = 1e-8) -> ModalState:
    """Galerkin initial state from fluid velocity ``v0``, displacement ``u0`` and shell velocity ``u1``."""
    g = bases.grids
    sh, fl = g.shell, g.fluid
    v0 = np.asarray(v0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    # compatibility on Omega, measured on the interface unknowns
    top = fl.top_dofs
    target = interface_data(u1 if params.rho > 0 else np.array([0 * u1[0], 0 * u1[1], u1[2]]), fl, sh)
    got = v0.copy()
    if params.rho == 0:
        got[fl.index("ut")] = 0.0
        got[fl.index("vt")] = 0.0
    mis = np.linalg.norm(got[top] - target[top])
    scale = max(np.linalg.norm(target[top]), np.linalg.norm(got[top]), 1.0)
    if mis > tol * scale:
        raise IncompatibleInitialData(f"initial fluid trace does not match shell velocity (mismatch {mis:.3e})")

    n, m = bases.n, bases.m
    mc = bases.carrier
    w0_hat = project_mean_zero(u0[2], mc, sh)
    frozen = u0[2] - w0_hat

    def inplane_coeffs(ubar):
        return np.array([sh.inner(ubar[0], e[0]) + sh.inner(ubar[1], e[1]) for e in bases.inplane.modes])

    xi = bases.transversal.modes
    G = np.array([[sh.inner(a, b) for b in xi] for a in xi])

    def transversal_coeffs(w):
        rhs = np.array([sh.inner(w, a) for a in xi])
        return np.linalg.solve(G, rhs)

    beta = np.concatenate([inplane_coeffs(u0[:2]), transversal_coeffs(w0_hat)])
    w1_hat = project_mean_zero(u1[2], mc, sh) if abs(sh.integral(u1[2])) > 0 else u1[2]
    betadot = np.concatenate([inplane_coeffs(u1[:2]), transversal_coeffs(w1_hat)])
    lifted = betadot @ bases.phi
    alpha = bases.stokes.psi @ (fl.mass_weights * (v0 - lifted))
    return ModalState(0.0, alpha, beta, betadot, frozen)


# --------------------------------------------------------------------------- dynamics


def nonlinear_load(beta: np.ndarray, frozen_kin: np.ndarray | None, sys: GalerkinSystem) -> np.ndarray:
    """``q(u_n, zeta_k)`` for every shell mode, from the grid strains of the reconstructed displacement."""
    kin = np.tensordot(beta, sys.mode_kin, axes=1)
    if frozen_kin is not None:
        kin = kin + frozen_kin
    u1x, u1y, u2x, u2y, wx, wy, wbar = kin
    mu = sys.params.mu
    c = 2.0 / (1.0 - mu)
    e11 = u1x + sys.k1t * wbar + 0.5 * wx**2
    e22 = u2y + sys.k2t * wbar + 0.5 * wy**2
    e12 = u1y + u2x + wx * wy
    n11 = c * (e11 + mu * e22)
    n22 = c * (e22 + mu * e11)
    n12 = e12
    # stress increments over the linear in-plane stresses
    t11 = n11 - c * (u1x + mu * u2y)
    t22 = n22 - c * (u2y + mu * u1x)
    t12 = n12 - (u1y + u2x)
    cd = sys.k1t * n11 + sys.k2t * n22
    sx = n11 * wx + n12 * wy
    sy = n12 * wx + n22 * wy
    K = sys.mode_kin
    area = sys.bases.grids.shell.tri_area
    val = K[:, 6] @ cd + K[:, 4] @ sx + K[:, 5] @ sy + K[:, 0] @ t11 + K[:, 3] @ t22 + (K[:, 1] + K[:, 2]) @ t12
    return area * val


def _frozen_kin(state: ModalState, sys: GalerkinSystem) -> np.ndarray | None:
    if not np.any(state.frozen_mean):
        return None
    u = np.zeros((3,) + sys.bases.grids.shell.shape)
    u[2] = state.frozen_mean
    return _kin_array(u, sys.bases.grids)


def _derivative(z: np.ndarray, t: float, sys: GalerkinSystem, forcing: ForcingSpec, fk, include_q=True):
    m, k = sys.m, 2 * sys.n
    alpha, beta, betadot = z[:m], z[m : m + k], z[m + k :]
    y = np.concatenate([alpha, betadot])
    F = sys.modal_force(forcing, t) - sys.params.nu * (sys.visc @ y)
    shell = sys.kappa * beta + sys.gamma_k * betadot
    if include_q:
        shell = shell + nonlinear_load(beta, fk, sys)
    F[m:] -= shell
    x = sys.solve_mass(F)
    return np.concatenate([x[:m], betadot, x[m:]])


def rhs(state: ModalState, sys: GalerkinSystem, forcing: ForcingSpec, t: float | None = None, include_q: bool = True):
    """Time derivative ``(alpha', beta'', beta')`` of a modal state."""
    if state.alpha.size != sys.m or state.beta.size != 2 * sys.n:
        raise ValueError("state dimensions do not match the Galerkin system")
    t = state.t if t is None else t
    z = _derivative(state.vector(), t, sys, forcing, _frozen_kin(state, sys), include_q)
    m, k = sys.m, 2 * sys.n
    return z[:m], z[m + k :], z[m : m + k]


def linear_operator(sys: GalerkinSystem) -> np.ndarray:
    """Dense matrix of the linear part acting on ``(alpha, beta, betadot)``."""
    m, k = sys.m, 2 * sys.n
    N = m + 2 * k
    A = np.zeros((N, N))
    # rows of M^{-1} applied to -nu visc [alpha; betadot] - [0; kappa beta + gamma betadot]
    blk = np.zeros((m + k, N))
    visc = sys.params.nu * sys.visc
    blk[:, :m] = -visc[:, :m]
    blk[:, m + k :] = -visc[:, m:]
    blk[m:, m : m + k] -= np.diag(sys.kappa)
    blk[m:, m + k :] -= np.diag(sys.gamma_k)
    sol = sys.solve_mass(blk)
    A[:m] = sol[:m]
    A[m + k :] = sol[m:]
    A[m : m + k, m + k :] = np.eye(k)
    return A


def stable_dt(sys: GalerkinSystem, safety: float = 1.0) -> float:
    """Step size keeping ``dt * |lambda_max|`` below the RK4 stability radius (about 2.78)."""
    lam = np.max(np.abs(np.linalg.eigvals(linear_operator(sys))))
    return safety * 2.0 / lam


def _check_finite(z: np.ndarray, t: float):
    if not np.all(np.isfinite(z)):
        raise NumericalAbort(f"non-finite state at t={t:.6g}")


def step(
    state: ModalState,
    sys: GalerkinSystem,
    forcing: ForcingSpec,
    dt: float,
    scheme: str = "rk4",
    nonlinear: bool = True,
) -> ModalState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    z0, t = state.vector(), state.t
    _check_finite(z0, t)
    fk = _frozen_kin(state, sys)
    if scheme == "rk4":
        f = lambda z, s: _derivative(z, s, sys, forcing, fk, nonlinear)  # noqa: E731
        k1 = f(z0, t)
        k2 = f(z0 + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = f(z0 + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = f(z0 + dt * k3, t + dt)
        z1 = z0 + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    elif scheme == "cn-extrap":
        key = ("cn", float(dt))
        if key not in sys._cn_cache:
            L = linear_operator(sys)
            eye = np.eye(L.shape[0])
            sys._cn_cache[key] = (L, sla.lu_factor(eye - 0.5 * dt * L), eye + 0.5 * dt * L)
        L, lu, rhs_mat = sys._cn_cache[key]
        full = _derivative(z0, t, sys, forcing, fk, nonlinear)
        zmid = z0 + 0.5 * dt * full
        nonlin = _derivative(zmid, t + 0.5 * dt, sys, forcing, fk, nonlinear) - L @ zmid
        z1 = sla.lu_solve(lu, rhs_mat @ z0 + dt * nonlin)
    else:
        raise ValueError(f"unknown scheme {scheme!r} (rk4 | cn-extrap)")
    _check_finite(z1, t + dt)
    return state.with_vector(z1, t + dt)


def integrate(
    state: ModalState,
    sys: GalerkinSystem,
    forcing: ForcingSpec,
    dt: float,
    nsteps: int,
    scheme: str = "rk4",
    observer: Callable[[int, ModalState], None] | None = None,
    nonlinear: bool = True,
) -> ModalState:
    """Advance ``nsteps`` steps; ``observer(k, state)`` sees the initial state and every accepted step."""
    if nsteps < 0:
        raise ValueError("nsteps must be non-negative")
    t0 = state.t
    if observer is not None:
        observer(0, state)
    for k in range(1, nsteps + 1):
        state = step(state, sys, forcing, dt, scheme, nonlinear)
        state.t = t0 + k * dt  # no accumulated round-off in the clock
        if observer is not None:
            observer(k, state)
    return state
