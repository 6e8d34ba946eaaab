import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

import oracles
from vkfsi.domain_grid import Grids, build_domain
from vkfsi.sampling import random_triple
from vkfsi.stokes_flow import (
    DivergenceFreeSpace,
    IncompatibleFluxError,
    StokesSystem,
    eigen_residual,
    fix_sign,
    interface_data,
    lift_N0,
    solve_stokes,
    stokes_eigenbasis,
    trace_to_interface,
    viscous_form,
)


def test_viscosity_must_be_positive(small_grids):
    with pytest.raises(ValueError):
        StokesSystem(small_grids.fluid, nu=0.0)


def _manufactured(hz):
    x, y, z = sp.symbols("x y z")
    s = sp.sin(sp.pi * z / hz) ** 2
    A = sp.sin(sp.pi * x) ** 2 * sp.sin(sp.pi * y) ** 2 * s
    v = [sp.diff(A, y), -sp.diff(A, x), sp.Integer(0)]
    p = sp.cos(sp.pi * x) * sp.cos(sp.pi * y) * sp.cos(sp.pi * z / hz)
    lap = [sum(sp.diff(c, q, 2) for q in (x, y, z)) for c in v]
    g = [-lap[i] + sp.diff(p, q) for i, q in enumerate((x, y, z))]
    assert sp.simplify(sum(sp.diff(c, q) for c, q in zip(v, (x, y, z)))) == 0
    f = lambda expr: sp.lambdify((x, y, z), expr, "numpy")  # noqa: E731
    return [f(c) for c in v], [f(c) for c in g]


def test_manufactured_stokes_second_order():
    vx, gx = _manufactured(0.5)

    def field(fns):
        return lambda x, y, z: tuple(np.broadcast_to(fn(x, y, z), np.broadcast(x, y, z).shape) for fn in fns)

    errs = []
    for n in (8, 16):
        g = Grids(build_domain(1, 1, 0.5, n, n, n // 2), n, n)
        fl = g.fluid
        system = StokesSystem(fl)
        v, p = system.solve(fl.sample(field(gx)))
        exact = fl.sample(field(vx))
        errs.append(np.max(np.abs(v - exact)))
        assert abs(p.mean()) < 1e-12
    assert errs[0] / errs[1] > 3.0


def test_interface_data_rejects_flux(small_grids):
    sh = small_grids.shell
    psi = np.zeros((3,) + sh.shape)
    psi[2][sh.interior_mask] = 1.0
    with pytest.raises(IncompatibleFluxError):
        interface_data(psi, small_grids.fluid, sh)
    with pytest.raises(ValueError):
        interface_data(np.zeros((2,) + sh.shape), small_grids.fluid, sh)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_lift_properties(small_bases, seed):
    g = small_bases.grids
    fl, sh = g.fluid, g.shell
    rng = np.random.default_rng(seed)
    a, b = random_triple(sh, rng), random_triple(sh, rng)
    va = lift_N0(a, small_bases.stokes_system, sh)
    vb = lift_N0(b, small_bases.stokes_system, sh)
    assert np.max(np.abs(fl.divergence @ va)) <= 1e-10
    assert np.all(va[fl.wall_dofs] == 0.0)
    vab = lift_N0(2 * a - b, small_bases.stokes_system, sh)
    np.testing.assert_allclose(vab, 2 * va - vb, atol=1e-11 * np.abs(va).max())


def test_lift_of_zero_is_zero(small_bases):
    sh = small_bases.grids.shell
    v = lift_N0(np.zeros((3,) + sh.shape), small_bases.stokes_system, sh)
    assert not np.any(v)


def test_solve_stokes_wrapper(small_bases, rng):
    sh = small_bases.grids.shell
    psi = random_triple(sh, rng)
    v, p = solve_stokes(None, psi, small_bases.stokes_system, sh)
    np.testing.assert_allclose(v, lift_N0(psi, small_bases.stokes_system, sh))
    assert abs(p.mean()) < 1e-10


def test_stokes_eigenvalues_match_oracle(small_grids):
    fl = small_grids.fluid
    basis = stokes_eigenbasis(6, fl)
    ref = oracles.stokes_eigenvalues(fl, 6)
    np.testing.assert_allclose(basis.mu, ref, rtol=1e-8)


def test_stokes_basis_orthonormal_and_solenoidal(small_bases):
    fl = small_bases.grids.fluid
    psi = small_bases.stokes.psi
    G = psi @ (fl.mass_weights[:, None] * psi.T)
    np.testing.assert_allclose(G, np.eye(len(psi)), atol=1e-10)
    E = np.array([[viscous_form(a, b, fl) for b in psi] for a in psi])
    np.testing.assert_allclose(E, np.diag(small_bases.stokes.mu), atol=1e-9 * small_bases.stokes.mu.max())
    assert np.max(np.abs(fl.divergence @ psi.T)) < 1e-10
    assert np.all(psi[:, fl.top_dofs] == 0) and np.all(psi[:, fl.wall_dofs] == 0)


def test_eigen_residual_small(small_grids):
    space = DivergenceFreeSpace(small_grids.fluid)
    basis = stokes_eigenbasis(4, small_grids.fluid, space)
    assert np.all(eigen_residual(basis, small_grids.fluid, space) <= 1e-8 * basis.mu)


def test_eigenbasis_mode_count_validated(small_grids):
    with pytest.raises(ValueError):
        stokes_eigenbasis(0, small_grids.fluid)


def test_fix_sign_rule():
    v = np.array([0.1, -0.5, 0.5, 0.2])
    assert fix_sign(v)[1] == 0.5  # first entry of largest magnitude made positive
    np.testing.assert_array_equal(fix_sign(-v), fix_sign(v))


def test_fluid_korn(small_grids, rng):
    fl = small_grids.fluid
    I = fl.interior_dofs
    X = np.linalg.qr(rng.standard_normal((I.size, 20)))[0]
    V = np.zeros((fl.size, 20))
    V[I] = X
    G = V.T @ (fl.viscous_matrix @ V)
    assert np.linalg.eigvalsh(0.5 * (G + G.T)).min() > 0


def test_lift_trace_matches_boundary_data(small_bases, rng):
    g = small_bases.grids
    psi = random_triple(g.shell, rng)
    v = lift_N0(psi, small_bases.stokes_system, g.shell)
    tr = trace_to_interface(v, g.fluid, g.shell)
    rel = np.max(np.abs(tr - psi)) / np.max(np.abs(psi))
    assert rel < 0.2  # O(h^2); the refinement test lives in the acceptance suite
