"""Energy functionals, the energy balance residual and the Lyapunov functionals Phi, Psi, Lambda.

Two evaluation paths are offered.  Field-based functions act on reconstructed
grid fields and are the reference; modal ones act on a :class:`ModalState` using
the precomputed Galerkin blocks and are what the time loop records every step.
Both agree to round-off (tested).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, fields

import numpy as np

from .coupled_galerkin import (
    Bases,
    ForcingSpec,
    GalerkinSystem,
    ModalState,
    _frozen_kin,
    compatibility_check,
    reconstruct,
)
from .domain_grid import Grids, project_mean_zero
from .shell_mechanics import (
    PhysicalParams,
    bending_form,
    malpha_matrix,
    potential_Q,
    potential_Q0,
    strain_from_kinematics,
    Kinematics,
    energy_density_eps,
)
from .stokes_flow import lift_N0

logger = logging.getLogger(__name__)


@dataclass
class EnergyParts:
    kinetic_fluid: float
    kinetic_shell: float
    bending: float
    membrane: float

    @property
    def total(self) -> float:
        return self.kinetic_fluid + self.kinetic_shell + self.bending + self.membrane


def _malpha_norm2(wt: np.ndarray, params: PhysicalParams, grids: Grids) -> float:
    sh = grids.shell
    wi = sh.restrict(wt)
    return float(wi @ (malpha_matrix(sh, params.alpha) @ wi))


def energy_total(v, u, ut, params: PhysicalParams, grids: Grids) -> EnergyParts:
    """Parts of E = 1/2 [ |v|^2 + (M_a w_t, w_t) + rho |ubar_t|^2 + |Lap w|^2 + Q(u) ]."""
    fl, sh = grids.fluid, grids.shell
    v = np.asarray(v, dtype=float)
    kin_f = 0.5 * float(np.sum(fl.mass_weights * v * v))
    kin_s = 0.5 * (_malpha_norm2(ut[2], params, grids) + params.rho * (sh.inner(ut[0], ut[0]) + sh.inner(ut[1], ut[1])))
    bend = 0.5 * bending_form(u[2], u[2], sh)
    memb = 0.5 * potential_Q(u, params, sh)
    return EnergyParts(kin_f, kin_s, bend, memb)


def energy_quadratic(v, u, ut, params: PhysicalParams, grids: Grids) -> float:
    """E_0: as :func:`energy_total` with the linear-strain energy Q_0 in place of Q."""
    p = energy_total(v, u, ut, params, grids)
    return p.kinetic_fluid + p.kinetic_shell + p.bending + 0.5 * potential_Q0(u, params, grids.shell)


# --------------------------------------------------------------------------- modal path


def _modal_membrane(beta: np.ndarray, fk, sys: GalerkinSystem, linear: bool = False) -> float:
    kin = np.tensordot(beta, sys.mode_kin, axes=1)
    if fk is not None:
        kin = kin + fk
    k = Kinematics(*kin)
    st = strain_from_kinematics(k, sys.k1t, sys.k2t, sys.params.mu, linear=linear)
    return float(sys.bases.grids.shell.tri_area * np.sum(energy_density_eps(st)))


def _frozen_bending(state: ModalState, sys: GalerkinSystem) -> float:
    if not np.any(state.frozen_mean):
        return 0.0
    return bending_form(state.frozen_mean, state.frozen_mean, sys.bases.grids.shell)


def modal_energy(state: ModalState, sys: GalerkinSystem, fk=None) -> EnergyParts:
    """Energy parts from modal coefficients (bending uses (Lap, Lap)-orthogonality of the mean split)."""
    m, n = sys.m, sys.n
    y = np.concatenate([state.alpha, state.betadot])
    kin_f = 0.5 * float(y @ (sys.gram @ y))
    kin_s = 0.5 * float(np.sum(sys.rho_k * state.betadot**2))
    bend = 0.5 * (float(np.sum(sys.kappa[n:] * state.beta[n:] ** 2)) + _frozen_bending(state, sys))
    if fk is None:
        fk = _frozen_kin(state, sys)
    memb = 0.5 * _modal_membrane(state.beta, fk, sys)
    return EnergyParts(kin_f, kin_s, bend, memb)


def modal_rates(state: ModalState, sys: GalerkinSystem, forcing: ForcingSpec) -> dict:
    """Instantaneous dissipation and power integrands at ``state.t``."""
    n = sys.n
    y = np.concatenate([state.alpha, state.betadot])
    ff, fs = sys.modal_profiles(forcing)
    return {
        "visc": sys.params.nu * float(y @ (sys.visc @ y)),
        "damp": sys.params.gamma * float(np.sum(state.betadot[n:] ** 2)),
        "work_fluid": forcing.fluid_factor(state.t) * float(ff @ y),
        "work_shell": forcing.shell_factor(state.t) * float(fs[sys.m :] @ state.betadot),
    }


def _modal_load_work(state: ModalState, sys: GalerkinSystem, forcing: ForcingSpec) -> float:
    """``(g, w)`` for a stationary-compatible load, including the frozen mean."""
    if forcing.g is None:
        return 0.0
    _, fs = sys.modal_profiles(forcing)
    val = float(fs[sys.m :] @ state.beta)
    if np.any(state.frozen_mean):
        val += sys.bases.grids.shell.inner(forcing.g, state.frozen_mean)
    return val


def default_eta(params: PhysicalParams) -> float:
    """eta = omega = 1/2 min(gamma/2, nu): gamma - eta - omega >= 0 and nu - omega >= 0."""
    return 0.5 * min(0.5 * params.gamma, params.nu)


def modal_psi(state: ModalState, sys: GalerkinSystem) -> float:
    m, n = sys.m, sys.n
    y = np.concatenate([state.alpha, state.betadot])
    shell = float(np.sum(state.betadot[n:] * state.beta[n:])) + sys.params.rho * float(
        np.sum(state.betadot[:n] * state.beta[:n])
    )
    return shell + float(y @ (sys.gram[:, m:] @ state.beta))


# --------------------------------------------------------------------------- Lyapunov functionals


def lyapunov_phi(v, u, ut, params: PhysicalParams, grids: Grids, forcing: ForcingSpec) -> float:
    """Phi = E - (g, w); only defined for stationary-compatible loads."""
    if not forcing.stationary_compatible:
        raise ValueError("Phi is a Lyapunov function only for stationary-compatible forcing")
    e = energy_total(v, u, ut, params, grids).total
    if forcing.g is None:
        return e
    return e - grids.shell.inner(forcing.g, u[2])


def psi_lambda(v, u, ut, params: PhysicalParams, bases: Bases, eta: float | None = None) -> tuple[float, float]:
    """(Psi, Lambda) with Psi = (M_a w_t, w) + rho (ubar_t, ubar) + (v, N0[u]) and Lambda = E + eta Psi.

    The lifted and paired displacement is the mean-zero part ``(ubar, P w)``: only
    it has an admissible (flux-free) lift, and the mean part is constant in time.
    """
    if params.gamma == 0:
        warnings.warn("Lambda decay needs gamma > 0", RuntimeWarning, stacklevel=2)
    eta = default_eta(params) if eta is None else float(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    grids = bases.grids
    sh, fl = grids.shell, grids.fluid
    u = np.asarray(u, dtype=float)
    uhat = u.copy()
    uhat[2] = project_mean_zero(u[2], bases.carrier, sh)
    wi, wti = sh.restrict(uhat[2]), sh.restrict(ut[2])
    psi = float(wti @ (malpha_matrix(sh, params.alpha) @ wi))
    psi += params.rho * (sh.inner(ut[0], uhat[0]) + sh.inner(ut[1], uhat[1]))
    lifted = lift_N0(uhat, bases.stokes_system, sh)
    psi += float(np.sum(fl.mass_weights * np.asarray(v) * lifted))
    e = energy_total(v, u, ut, params, grids).total
    return psi, e + eta * psi


# --------------------------------------------------------------------------- trajectories


CSV_COLUMNS = (
    "t",
    "kinetic_fluid",
    "kinetic_shell",
    "bending",
    "membrane",
    "total",
    "quadratic",
    "diss_visc",
    "diss_damp",
    "work_fluid",
    "work_shell",
    "balance_residual",
    "phi",
    "psi",
    "lam",
    "volume_rel",
    "trace_mismatch_rel",
)


@dataclass
class EnergyReport:
    t: float
    kinetic_fluid: float
    kinetic_shell: float
    bending: float
    membrane: float
    total: float
    quadratic: float
    diss_visc: float
    diss_damp: float
    work_fluid: float
    work_shell: float
    balance_residual: float
    phi: float
    psi: float
    lam: float
    volume_rel: float
    trace_mismatch_rel: float

    def row(self) -> list[float]:
        return [getattr(self, c) for c in CSV_COLUMNS]


assert tuple(f.name for f in fields(EnergyReport)) == CSV_COLUMNS


@dataclass
class TrajectoryLog:
    """Per-step energy and integrand samples plus sparser compatibility samples.

    Use as the ``observer`` of :func:`integrate`.
    """

    sys: GalerkinSystem
    forcing: ForcingSpec
    stride: int = 1
    eta: float | None = None
    keep_states: bool = False
    t: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    quadratic: list = field(default_factory=list)
    parts: list = field(default_factory=list)
    visc: list = field(default_factory=list)
    damp: list = field(default_factory=list)
    work_fluid: list = field(default_factory=list)
    work_shell: list = field(default_factory=list)
    load_work: list = field(default_factory=list)
    psi: list = field(default_factory=list)
    compat: list = field(default_factory=list)
    states: list = field(default_factory=list)

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("sample stride must be >= 1")
        self._fk = None

    def __call__(self, k: int, state: ModalState):
        sys = self.sys
        if self._fk is None:
            self._fk = (_frozen_kin(state, sys),)
        fk = self._fk[0]
        p = modal_energy(state, sys, fk)
        r = modal_rates(state, sys, self.forcing)
        self.t.append(state.t)
        self.parts.append(p)
        self.energy.append(p.total)
        q0 = 0.5 * _modal_membrane(state.beta, fk, sys, linear=True)
        self.quadratic.append(p.kinetic_fluid + p.kinetic_shell + p.bending + q0)
        self.visc.append(r["visc"])
        self.damp.append(r["damp"])
        self.work_fluid.append(r["work_fluid"])
        self.work_shell.append(r["work_shell"])
        self.load_work.append(_modal_load_work(state, sys, self.forcing))
        self.psi.append(modal_psi(state, sys))
        if k % self.stride == 0:
            self.compat.append((k, compatibility_check(state, sys.bases)))
            if self.keep_states:
                self.states.append(state)

    # cumulative trapezoid integrals
    def _cum(self, vals) -> np.ndarray:
        t = np.asarray(self.t)
        v = np.asarray(vals)
        out = np.zeros_like(v)
        if v.size > 1:
            out[1:] = np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))
        return out

    def balance_series(self) -> np.ndarray:
        """Normalized balance defect at every recorded time."""
        if len(self.t) < 2:
            raise ValueError("balance residual needs at least 2 samples")
        e = np.asarray(self.energy)
        defect = e + self._cum(self.visc) + self._cum(self.damp) - e[0] - self._cum(self.work_fluid) - self._cum(self.work_shell)
        scale = np.maximum(np.maximum(e[0], e), 1.0)
        return np.abs(defect) / scale

    def phi_series(self) -> np.ndarray:
        if not self.forcing.stationary_compatible:
            raise ValueError("Phi is a Lyapunov function only for stationary-compatible forcing")
        return np.asarray(self.energy) - np.asarray(self.load_work)

    def reports(self) -> list[EnergyReport]:
        bal = self.balance_series() if len(self.t) > 1 else np.zeros(len(self.t))
        eta = default_eta(self.sys.params) if self.eta is None else self.eta
        phi = (
            self.phi_series()
            if self.forcing.stationary_compatible
            else np.full(len(self.t), np.nan)
        )
        cv, cd = self._cum(self.visc), self._cum(self.damp)
        cf, cs = self._cum(self.work_fluid), self._cum(self.work_shell)
        out = []
        for k, c in self.compat:
            p = self.parts[k]
            out.append(
                EnergyReport(
                    t=self.t[k],
                    kinetic_fluid=p.kinetic_fluid,
                    kinetic_shell=p.kinetic_shell,
                    bending=p.bending,
                    membrane=p.membrane,
                    total=p.total,
                    quadratic=self.quadratic[k],
                    diss_visc=cv[k],
                    diss_damp=cd[k],
                    work_fluid=cf[k],
                    work_shell=cs[k],
                    balance_residual=bal[k],
                    phi=phi[k],
                    psi=self.psi[k],
                    lam=p.total + eta * self.psi[k],
                    volume_rel=c["volume_rel"],
                    trace_mismatch_rel=c["trace_mismatch_rel"],
                )
            )
        return out


def balance_residual(log: TrajectoryLog) -> float:
    """max_t |E(t) + nu int E(v,v) + gamma int |w_t|_a^2 - E(0) - int work| / max(E(0), E(t), 1)."""
    return float(np.max(log.balance_series()))


def denergy_rate_check(log: TrajectoryLog) -> float:
    """max over steps of |dE/dt - (-nu E(v,v) - gamma (M_a w_t, w_t) + (g, w_t))| at midpoints, normalized."""
    if not log.forcing.stationary_compatible:
        raise ValueError("rate check is defined for stationary-compatible forcing")
    if len(log.t) < 2:
        raise ValueError("rate check needs at least 2 samples")
    t = np.asarray(log.t)
    e = np.asarray(log.energy)
    rate = -np.asarray(log.visc) - np.asarray(log.damp) + np.asarray(log.work_shell)
    mid = 0.5 * (rate[1:] + rate[:-1])
    fd = np.diff(e) / np.diff(t)
    scale = max(float(np.max(np.abs(rate))), 1e-300)
    return float(np.max(np.abs(fd - mid)) / scale)


def field_energy(state: ModalState, bases: Bases, params: PhysicalParams) -> EnergyParts:
    v, u, ut = reconstruct(state, bases)
    return energy_total(v, u, ut, params, bases.grids)
