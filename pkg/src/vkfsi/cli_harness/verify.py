"""Named invariant checks over one configuration, reported as a deterministic pass/fail table."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..coupled_galerkin import (
    Bases,
    build_system,
    forcing_preset,
    integrate,
    zero_state,
)
from ..diagnostics_energy import TrajectoryLog, _modal_membrane, balance_residual
from ..domain_grid import inner_product, project_mean_zero, shell_operator
from ..sampling import random_clamped, random_state, random_triple
from ..shell_mechanics import (
    PhysicalParams,
    bending_form,
    form_a,
    form_q,
    form_qbar,
    korn_probe,
    potential_Q,
    strain,
)
from ..stationary_solver import (
    StationaryProblem,
    pi_functional,
    pi_gradient,
    solve_stationary,
)
from ..stokes_flow import (
    DivergenceFreeSpace,
    eigen_residual,
    lift_N0,
    trace_to_interface,
)

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _e(x: float) -> str:
    return f"{x:.3e}"


class Verifier:
    def __init__(self, grids, params: PhysicalParams, bases: Bases, seed: int = 0):
        self.grids = grids
        self.params = params
        self.bases = bases
        self.seed = seed

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    @cached_property
    def sys(self):
        return build_system(self.bases, self.params)

    # ------------------------------------------------------------------ domain_grid

    def check_forms_symmetric(self):
        sh = self.grids.shell
        rng = self.rng(1)
        worst = 0.0
        for _ in range(100):
            f, g = random_clamped(sh, rng), random_clamped(sh, rng)
            nf, ng = np.sqrt(sh.inner(f, f)), np.sqrt(sh.inner(g, g))
            for kind in ("laplacian", "malpha", "biharmonic"):
                a = sh.inner(shell_operator(kind, f, sh, self.params.alpha), g)
                b = sh.inner(shell_operator(kind, g, sh, self.params.alpha), f)
                scale = max(abs(a), abs(b), nf * ng)
                worst = max(worst, abs(a - b) / scale)
        return worst <= 1e-13, f"max asym {_e(worst)}"

    def check_mean_zero_idempotent(self):
        sh = self.grids.shell
        mc = self.bases.carrier
        rng = self.rng(2)
        worst = 0.0
        for _ in range(20):
            w = random_clamped(sh, rng)
            p = project_mean_zero(w, mc, sh)
            pp = project_mean_zero(p, mc, sh)
            worst = max(worst, np.sqrt(sh.inner(pp - p, pp - p) / sh.inner(w, w)))
        return worst <= 1e-12, f"max rel {_e(worst)}"

    def check_inner_positive(self):
        rng = self.rng(3)
        sh, fl = self.grids.shell, self.grids.fluid
        vals = []
        for _ in range(20):
            f = random_clamped(sh, rng)
            vals.append(inner_product(f, f, "omega", sh))
            v = np.zeros(fl.size)
            v[fl.interior_dofs] = rng.standard_normal(fl.interior_dofs.size)
            vals.append(inner_product(v, v, "fluid", fl))
        zero = inner_product(np.zeros(sh.shape), np.zeros(sh.shape), "omega", sh)
        return min(vals) > 0 and zero == 0.0, f"min {_e(min(vals))}"

    def check_trace_linear(self):
        rng = self.rng(4)
        fl, sh = self.grids.fluid, self.grids.shell
        v, w = rng.standard_normal(fl.size), rng.standard_normal(fl.size)
        v[fl.wall_dofs] = w[fl.wall_dofs] = 0.0
        a, b = 0.7, -1.3
        lhs = trace_to_interface(a * v + b * w, fl, sh)
        rhs = a * trace_to_interface(v, fl, sh) + b * trace_to_interface(w, fl, sh)
        err = float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))
        return err <= 1e-14, f"rel {_e(err)}"

    # ------------------------------------------------------------------ stokes_flow

    def check_lift_divergence(self):
        rng = self.rng(5)
        fl, sh = self.grids.fluid, self.grids.shell
        div, wall = 0.0, 0.0
        for _ in range(10):
            v = lift_N0(random_triple(sh, rng), self.bases.stokes_system, sh)
            div = max(div, float(np.max(np.abs(fl.divergence @ v))))
            wall = max(wall, float(np.max(np.abs(v[fl.wall_dofs]))))
        return div <= 1e-10 and wall == 0.0, f"max div {_e(div)}, max |v| on S {_e(wall)}"

    def check_stokes_eigen_residual(self):
        space = DivergenceFreeSpace(self.grids.fluid)
        res = eigen_residual(self.bases.stokes, self.grids.fluid, space)
        rel = float(np.max(res / self.bases.stokes.mu))
        return rel <= 1e-8, f"max rel residual {_e(rel)}"

    def check_fluid_korn(self):
        rng = self.rng(6)
        fl = self.grids.fluid
        I = fl.interior_dofs
        X = np.linalg.qr(rng.standard_normal((I.size, 20)))[0]
        V = np.zeros((fl.size, 20))
        V[I] = X
        G = V.T @ (fl.viscous_matrix @ V)
        lam = float(np.linalg.eigvalsh(0.5 * (G + G.T)).min())
        return lam > 0, f"min eig {_e(lam)}"

    # ------------------------------------------------------------------ shell_mechanics

    def _random_u(self, rng, scale=0.1):
        sh = self.grids.shell
        return scale * random_triple(sh, rng)

    def _curved(self):
        return self.params.with_(k1=0.5, k2=0.3)

    def check_hooke_closure(self):
        rng = self.rng(7)
        p = self._curved()
        worst = 0.0
        for _ in range(10):
            st = strain(self._random_u(rng), p, self.grids.shell)
            c = 2 / (1 - p.mu)
            r = np.abs(st.n11 - c * (st.eps11 + p.mu * st.eps22)) + np.abs(st.n22 - c * (st.eps22 + p.mu * st.eps11))
            worst = max(worst, float(np.max(r)) / max(1.0, float(np.max(np.abs(st.n11)))))
        return worst <= 1e-13, f"max {_e(worst)}"

    def check_korn_probe(self):
        rep = korn_probe(self.params, self.grids.shell, n=self.bases.n, seed=self.seed)
        ok = rep.lam_min > 0 and np.isfinite(rep.constant)
        return ok, f"lam_min {_e(rep.lam_min)}, C {_e(rep.constant)}"

    def check_gateaux(self):
        rng = self.rng(8)
        sh = self.grids.shell
        p = self._curved()
        worst = 0.0
        for _ in range(50):
            u, b = self._random_u(rng), self._random_u(rng)
            exact = bending_form(u[2], b[2], sh) + form_a(u[:2], b[:2], p, sh) + form_q(u, b, p, sh)
            h = 1e-5

            def pot(s):
                x = u + s * b
                return 0.5 * bending_form(x[2], x[2], sh) + 0.5 * potential_Q(x, p, sh)

            fd = (pot(h) - pot(-h)) / (2 * h)
            worst = max(worst, abs(fd - exact) / max(abs(exact), 1e-300))
        return worst <= 1e-6, f"max rel {_e(worst)}"

    def check_qbar_q_a(self):
        rng = self.rng(9)
        sh = self.grids.shell
        p = self._curved()
        worst = 0.0
        for _ in range(50):
            u, b = self._random_u(rng), self._random_u(rng)
            qb, q, a = form_qbar(u, b, p, sh), form_q(u, b, p, sh), form_a(u[:2], b[:2], p, sh)
            worst = max(worst, abs(qb - q - a) / max(abs(qb) + abs(q) + abs(a), 1e-300))
        return worst <= 1e-10, f"max rel {_e(worst)}"

    # ------------------------------------------------------------------ coupled_galerkin

    def _pulse_runs(self, params, t_end, dts):
        sys = build_system(self.bases, params)
        f = forcing_preset("pulse", self.grids, amplitude=100.0)
        logs = []
        for dt in dts:
            log = TrajectoryLog(sys, f, stride=max(1, int(round(0.05 / dt))))
            integrate(zero_state(sys), sys, f, dt, int(round(t_end / dt)), observer=log)
            logs.append(log)
        return logs

    def check_balance_order_undamped(self):
        logs = self._pulse_runs(self.params.with_(gamma=0.0), 0.5, (2e-3, 1e-3))
        r = [balance_residual(lg) for lg in logs]
        ratio = r[0] / r[1]
        self._volume_logs = getattr(self, "_volume_logs", []) + logs
        return 3.0 <= ratio <= 5.0, f"residuals {_e(r[0])} {_e(r[1])}, ratio {ratio:.3f}"

    def check_volume_invariant(self):
        if not getattr(self, "_volume_logs", None):
            self.check_balance_order_undamped()
        worst = max(c["volume_rel"] for lg in self._volume_logs for _, c in lg.compat)
        return worst <= 1e-12, f"max rel volume {_e(worst)}"

    def check_rho0_spd(self):
        sys = build_system(self.bases, self.params.with_(rho=0.0))
        lam = float(np.linalg.eigvalsh(sys.M).min())
        return lam > 0, f"min eig M {_e(lam)}"

    def check_linearized_decay(self):
        sys = self.sys
        rng = self.rng(10)
        s = random_state(sys, rng)
        zero = forcing_preset("zero", self.grids)
        dt = 1e-3
        energies = []

        def quad(k, st):
            y = np.concatenate([st.alpha, st.betadot])
            energies.append(
                0.5 * (y @ sys.gram @ y + np.sum(sys.rho_k * st.betadot**2) + np.sum(sys.kappa * st.beta**2))
            )

        integrate(s, sys, zero, dt, 200, observer=quad, nonlinear=False)
        e = np.asarray(energies)
        worst = float(np.max(np.diff(e)))
        return worst <= dt**4 * e[0], f"max step increase {_e(worst)} (E0 {_e(e[0])})"

    # ------------------------------------------------------------------ diagnostics_energy

    def check_balance_order_reference(self):
        logs = self._pulse_runs(self.params, 1.0, (1e-3, 5e-4))
        r = [balance_residual(lg) for lg in logs]
        ratio = r[0] / r[1]
        self._volume_logs = getattr(self, "_volume_logs", []) + logs
        return r[0] <= 1e-4 and 3.0 <= ratio <= 5.0, f"residual {_e(r[0])}, ratio {ratio:.3f}"

    def check_phi_monotone(self):
        sys = self.sys
        f = forcing_preset("static-g", self.grids, amplitude=1000.0)
        dt = 2e-3
        log = TrajectoryLog(sys, f, stride=50)
        integrate(zero_state(sys), sys, f, dt, 500, observer=log)
        phi = log.phi_series()
        scale = max(float(np.max(np.asarray(log.visc) + np.asarray(log.damp))) * dt, 1e-300)
        worst = float(np.max(np.diff(phi)))
        return worst <= 10 * dt**2 * scale, f"max increase {_e(worst)}, slack {_e(10 * dt**2 * scale)}"

    def check_e0_positive(self):
        sys = self.sys
        rng = self.rng(11)
        worst = np.inf
        for _ in range(200):
            s = random_state(sys, rng)
            s.beta = s.beta * 1e-3  # keep away from the membrane nonlinearity
            z = s.vector()
            y = np.concatenate([s.alpha, s.betadot])
            e0 = 0.5 * (y @ sys.gram @ y + np.sum(sys.rho_k * s.betadot**2) + np.sum(sys.kappa * s.beta**2))
            worst = min(worst, e0 / (z @ z))
        return worst > 0, f"min Rayleigh quotient {_e(worst)}"

    # ------------------------------------------------------------------ stationary_solver

    def _flat(self):
        return build_system(self.bases, self.params.with_(k1=0.0, k2=0.0))

    def check_pi_gradient(self):
        prob = StationaryProblem(self._flat(), forcing_preset("static-g", self.grids, amplitude=1000.0))
        rng = self.rng(12)
        worst = 0.0
        for _ in range(5):
            beta = 0.02 * rng.standard_normal(prob.dim) * np.sqrt(prob.sys.kappa[-1] / prob.sys.kappa)
            g = pi_gradient(beta, prob)
            fd = np.empty_like(g)
            for k in range(beta.size):
                h = 1e-6 * max(1.0, abs(beta[k]))
                e = np.zeros_like(beta)
                e[k] = h
                fd[k] = (pi_functional(beta + e, prob) - pi_functional(beta - e, prob)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fd - g)) / np.max(np.abs(g))))
        return worst <= 1e-6, f"max rel {_e(worst)}"

    def check_stationary_solve(self):
        prob = StationaryProblem(self._flat(), forcing_preset("static-g", self.grids, amplitude=1000.0))
        r = solve_stationary(prob)
        ok = r.converged and r.iterations <= 200 and r.identity_residual <= 1e-8
        return ok, f"residual {_e(r.residual)}, identity {_e(r.identity_residual)}, iterations {r.iterations}"

    def check_stationary_bounded(self):
        sys = self._flat()
        prob = StationaryProblem(sys, forcing_preset("static-g", self.grids, amplitude=1000.0))
        n = sys.n
        r0 = solve_stationary(prob)

        def energy(beta):  # |Lap w|^2 + Q(u)
            return float(np.sum(sys.kappa[n:] * beta[n:] ** 2)) + _modal_membrane(beta, None, sys)

        bound = 2 * (energy(r0.beta) + abs(prob.load @ r0.beta))
        rng = self.rng(13)
        worst = 0.0
        for _ in range(10):
            start = 0.05 * rng.standard_normal(prob.dim)
            r = solve_stationary(prob, start)
            worst = max(worst, energy(r.beta))
        return worst <= bound, f"max {_e(worst)}, bound {_e(bound)}"

    def check_zero_load(self):
        prob = StationaryProblem(self._flat(), forcing_preset("zero", self.grids))
        r = solve_stationary(prob)
        size = float(np.max(np.abs(r.beta)))
        return size <= 1e-10, f"max |beta| {_e(size)}"

    # ------------------------------------------------------------------ table

    CHECKS = (
        ("domain_grid.forms_symmetric", "check_forms_symmetric"),
        ("domain_grid.mean_zero_idempotent", "check_mean_zero_idempotent"),
        ("domain_grid.inner_product_positive", "check_inner_positive"),
        ("domain_grid.trace_linear", "check_trace_linear"),
        ("stokes_flow.lift_divergence_free", "check_lift_divergence"),
        ("stokes_flow.eigen_residual", "check_stokes_eigen_residual"),
        ("stokes_flow.fluid_korn", "check_fluid_korn"),
        ("shell_mechanics.hooke_closure", "check_hooke_closure"),
        ("shell_mechanics.korn_probe", "check_korn_probe"),
        ("shell_mechanics.gateaux_identity", "check_gateaux"),
        ("shell_mechanics.qbar_minus_q_equals_a", "check_qbar_q_a"),
        ("coupled_galerkin.balance_order_undamped", "check_balance_order_undamped"),
        ("coupled_galerkin.volume_invariant", "check_volume_invariant"),
        ("coupled_galerkin.rho0_mass_spd", "check_rho0_spd"),
        ("coupled_galerkin.linearized_decay", "check_linearized_decay"),
        ("diagnostics_energy.balance_order_reference", "check_balance_order_reference"),
        ("diagnostics_energy.phi_monotone", "check_phi_monotone"),
        ("diagnostics_energy.e0_positive_definite", "check_e0_positive"),
        ("stationary_solver.gradient_matches_fd", "check_pi_gradient"),
        ("stationary_solver.solve_and_identity", "check_stationary_solve"),
        ("stationary_solver.bounded_solutions", "check_stationary_bounded"),
        ("stationary_solver.zero_load_zero_solution", "check_zero_load"),
    )

    def run(self, only: list[str] | None = None) -> list[CheckResult]:
        out = []
        for name, meth in self.CHECKS:
            if only is not None and name not in only:
                continue
            try:
                ok, detail = getattr(self, meth)()
            except Exception as exc:  # a crashing check is a failing check
                ok, detail = False, f"error: {type(exc).__name__}: {exc}"
            logger.info("%s %s %s", name, "PASS" if ok else "FAIL", detail)
            out.append(CheckResult(name, bool(ok), detail))
        return out


def format_report(results: list[CheckResult], header: str = "") -> str:
    width = max(len(r.name) for r in results) if results else 10
    lines = [header] if header else []
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"
