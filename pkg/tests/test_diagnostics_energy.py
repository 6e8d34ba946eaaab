import numpy as np
import pytest

from vkfsi.coupled_galerkin import ForcingSpec, build_system, forcing_preset, integrate, reconstruct, zero_state
from vkfsi.diagnostics_energy import (
    CSV_COLUMNS,
    EnergyReport,
    TrajectoryLog,
    balance_residual,
    default_eta,
    denergy_rate_check,
    energy_quadratic,
    energy_total,
    field_energy,
    lyapunov_phi,
    modal_energy,
    modal_psi,
    psi_lambda,
)
from vkfsi.sampling import random_state
from vkfsi.shell_mechanics import PhysicalParams


def test_modal_energy_matches_field_energy(small_system, rng):
    s = small_system
    for _ in range(3):
        st = random_state(s, rng)
        st.frozen_mean = 0.3 * s.bases.carrier.e
        a, b = modal_energy(st, s), field_energy(st, s.bases, s.params)
        for name in ("kinetic_fluid", "kinetic_shell", "bending", "membrane"):
            assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-11, abs=1e-14)


def test_unit_transversal_velocity_has_half_energy(small_system):
    s = small_system
    st = zero_state(s)
    st.betadot[s.n] = 1.0
    v, u, ut = reconstruct(st, s.bases)
    e = energy_total(v, 0 * u, ut, s.params.with_(rho=1.0), s.bases.grids)
    assert e.kinetic_shell == pytest.approx(0.5, rel=1e-10)
    assert e.bending == 0 and e.membrane == 0


def test_quadratic_energy_drops_nonlinear_membrane(small_system, rng):
    s = small_system
    st = random_state(s, rng, 1e-4)
    v, u, ut = reconstruct(st, s.bases)
    e, q = energy_total(v, u, ut, s.params, s.bases.grids).total, energy_quadratic(v, u, ut, s.params, s.bases.grids)
    assert q == pytest.approx(e, rel=1e-5)
    big = random_state(s, np.random.default_rng(1), 10.0)
    v, u, ut = reconstruct(big, s.bases)
    assert abs(energy_quadratic(v, u, ut, s.params, s.bases.grids) - energy_total(v, u, ut, s.params, s.bases.grids).total) > 1e-3


def test_phi_refuses_time_dependent_forcing(small_system, small_grids):
    s = small_system
    v, u, ut = reconstruct(zero_state(s), s.bases)
    with pytest.raises(ValueError):
        lyapunov_phi(v, u, ut, s.params, small_grids, forcing_preset("pulse", small_grids))
    g = forcing_preset("static-g", small_grids, 2.0)
    u = u.copy()
    u[2] = s.bases.transversal.modes[0]
    phi = lyapunov_phi(v, u, ut, s.params, small_grids, g)
    assert phi == pytest.approx(energy_total(v, u, ut, s.params, small_grids).total - small_grids.shell.inner(g.g, u[2]))


def test_psi_modal_matches_field_and_lambda(small_system, rng):
    s = small_system
    st = random_state(s, rng)
    v, u, ut = reconstruct(st, s.bases)
    psi, lam = psi_lambda(v, u, ut, s.params, s.bases)
    assert psi == pytest.approx(modal_psi(st, s), rel=1e-9)
    e = energy_total(v, u, ut, s.params, s.bases.grids).total
    assert lam == pytest.approx(e + default_eta(s.params) * psi, rel=1e-12)
    with pytest.raises(ValueError):
        psi_lambda(v, u, ut, s.params, s.bases, eta=0.0)


def test_psi_warns_without_damping(small_bases, params):
    s = build_system(small_bases, params.with_(gamma=0.0))
    v, u, ut = reconstruct(zero_state(s), small_bases)
    with pytest.warns(RuntimeWarning):
        psi_lambda(v, u, ut, s.params, small_bases, eta=0.01)


def test_default_eta():
    assert default_eta(PhysicalParams(nu=0.1, gamma=0.5)) == pytest.approx(0.05)
    assert default_eta(PhysicalParams(nu=1.0, gamma=0.4)) == pytest.approx(0.1)


def test_zero_trajectory_has_zero_balance(small_system):
    log = TrajectoryLog(small_system, ForcingSpec())
    integrate(zero_state(small_system), small_system, ForcingSpec(), 1e-3, 5, observer=log)
    assert balance_residual(log) == 0.0
    with pytest.raises(ValueError):
        TrajectoryLog(small_system, ForcingSpec(), stride=0)


def test_balance_converges_under_refinement(small_system, small_grids, rng):
    st = random_state(small_system, rng, 0.3)
    f = forcing_preset("pulse", small_grids, 20.0, t_on=0.05)
    res = []
    for dt in (2e-3, 1e-3):
        log = TrajectoryLog(small_system, f)
        integrate(st, small_system, f, dt, int(round(0.1 / dt)), observer=log)
        res.append(balance_residual(log))
    assert res[1] < res[0] and 3 < res[0] / res[1] < 5


def test_rate_check_is_second_order(small_system, small_grids, rng):
    st = random_state(small_system, rng, 0.3)
    f = forcing_preset("static-g", small_grids, 5.0)
    vals = []
    for dt in (2e-3, 1e-3):
        log = TrajectoryLog(small_system, f)
        integrate(st, small_system, f, dt, int(round(0.05 / dt)), observer=log)
        vals.append(denergy_rate_check(log))
    assert 3 < vals[0] / vals[1] < 5
    with pytest.raises(ValueError):
        denergy_rate_check(TrajectoryLog(small_system, forcing_preset("pulse", small_grids)))


def test_reports_follow_csv_columns(small_system, small_grids):
    f = forcing_preset("static-g", small_grids, 5.0)
    log = TrajectoryLog(small_system, f, stride=2)
    integrate(zero_state(small_system), small_system, f, 1e-3, 6, observer=log)
    reps = log.reports()
    assert [r.t for r in reps] == pytest.approx([0, 2e-3, 4e-3, 6e-3])
    assert len(reps[0].row()) == len(CSV_COLUMNS) and CSV_COLUMNS[0] == "t"
    assert isinstance(reps[-1], EnergyReport) and reps[-1].total > 0
    assert reps[-1].phi == pytest.approx(reps[-1].total - log.load_work[6])
