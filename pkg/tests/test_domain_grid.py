import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

import oracles
from vkfsi.domain_grid import (
    BoxDomain,
    FluidGrid,
    Grids,
    ShellGrid,
    build_domain,
    inner_product,
    laplacian_clamped_field,
    mean_carrier,
    project_mean_zero,
    shell_operator,
)
from vkfsi.sampling import random_clamped, smooth_clamped, smooth_coefficients
from vkfsi.stokes_flow import trace_to_interface


@pytest.mark.parametrize(
    "kw",
    [
        dict(lx=0.0),
        dict(ly=-1.0),
        dict(hz=0.0),
        dict(nx=3),
        dict(nz=2),
    ],
)
def test_box_domain_rejects_bad_input(kw):
    base = dict(lx=1.0, ly=1.0, hz=0.5, nx=8, ny=8, nz=4)
    base.update(kw)
    with pytest.raises(ValueError):
        build_domain(**base)


def test_shell_grid_must_refine_fluid_grid():
    with pytest.raises(ValueError, match="refine"):
        Grids(build_domain(1, 1, 0.5, 8, 8, 4), 12, 16)


def test_constants_integrate_exactly(small_grids):
    sh, fl = small_grids.shell, small_grids.fluid
    one = np.ones(sh.shape)
    assert inner_product(one, one, "omega", sh) == pytest.approx(1.0, rel=1e-14)
    d = fl.domain
    for key in ("u", "v", "w"):
        total = fl.mass_weights[fl.index(key)].sum()
        assert total == pytest.approx(d.lx * d.ly * d.hz, rel=1e-14)
    assert fl.mass_weights[fl.index("ut")].sum() == 0.0


def test_trapezoid_exact_for_bilinear():
    sh = ShellGrid(2.0, 1.0, 8, 6)
    f = 1 + 3 * sh.X - sh.Y + 2 * sh.X * sh.Y
    # int_0^2 int_0^1 (1 + 3x - y + 2xy) dy dx = 2 + 6 - 1 + 2
    assert sh.integral(f) == pytest.approx(9.0, rel=1e-13)


def test_inner_product_rejects_bad_region(small_grids):
    sh = small_grids.shell
    with pytest.raises(ValueError):
        inner_product(np.ones(sh.shape), np.ones(sh.shape), "mars", sh)
    with pytest.raises(ValueError):
        inner_product(np.ones(3), np.ones(4), "omega", sh)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_inner_product_positive(seed):
    sh = ShellGrid(1, 1, 8, 8)
    f = random_clamped(sh, np.random.default_rng(seed))
    assert inner_product(f, f, "omega", sh) > 0
    assert inner_product(0 * f, 0 * f, "omega", sh) == 0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), kind=st.sampled_from(["laplacian", "malpha", "biharmonic"]))
def test_shell_forms_symmetric(seed, kind):
    sh = ShellGrid(1, 1, 10, 8)
    rng = np.random.default_rng(seed)
    f, g = random_clamped(sh, rng), random_clamped(sh, rng)
    a = sh.inner(shell_operator(kind, f, sh, 0.01), g)
    b = sh.inner(shell_operator(kind, g, sh, 0.01), f)
    assert abs(a - b) <= 1e-13 * max(abs(a), np.sqrt(sh.inner(f, f) * sh.inner(g, g)))


def test_shell_operator_validates(small_grids):
    sh = small_grids.shell
    f = np.ones(sh.shape)
    with pytest.raises(ValueError, match="boundary ring"):
        shell_operator("laplacian", f, sh)
    with pytest.raises(ValueError, match="unknown"):
        shell_operator("curl", 0 * f, sh)
    with pytest.raises(ValueError):
        shell_operator("laplacian", np.zeros((3, 3)), sh)


def test_biharmonic_form_matches_13_point_stencil():
    sh = ShellGrid(1.0, 0.8, 9, 7)
    B = oracles.biharmonic_13pt(sh.nx, sh.ny, sh.hx, sh.hy)
    np.testing.assert_allclose(sh.biharmonic_form.toarray(), sh.hx * sh.hy * B, atol=1e-9 * np.abs(B).max())


def _manufactured():
    x, y = sp.symbols("x y")
    w = sp.sin(sp.pi * x) ** 2 * sp.sin(sp.pi * y) ** 2
    lap = sp.diff(w, x, 2) + sp.diff(w, y, 2)
    bih = sp.diff(lap, x, 2) + sp.diff(lap, y, 2)
    return sp.lambdify((x, y), w), sp.lambdify((x, y), lap), sp.lambdify((x, y), bih)


@pytest.mark.parametrize("which", ["laplacian", "biharmonic"])
def test_clamped_operators_second_order(which):
    w, lap, bih = _manufactured()
    errs = []
    for n in (16, 32):
        sh = ShellGrid(1, 1, n, n)
        f = w(sh.X, sh.Y)
        f[~sh.interior_mask] = 0.0  # round-off residue of sin^2 on the ring
        if which == "laplacian":
            num, ex = laplacian_clamped_field(f, sh), lap(sh.X, sh.Y)
        else:
            num, ex = shell_operator("biharmonic", f, sh), bih(sh.X, sh.Y)
            num, ex = num[sh.interior_mask], ex[sh.interior_mask]
        errs.append(np.max(np.abs(num - ex)))
    assert errs[0] / errs[1] > 3.5


def test_mean_carrier_solves_clamped_problem():
    sh = ShellGrid(1, 1, 12, 12)
    mc = mean_carrier(sh)
    assert mc.mass > 0
    assert np.all(mc.e[sh.interior_mask] > 0)
    np.testing.assert_allclose(shell_operator("biharmonic", mc.e, sh)[sh.interior_mask], 1.0, rtol=1e-9)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_mean_zero_projection(seed):
    sh = ShellGrid(1, 1, 10, 10)
    mc = mean_carrier(sh)
    w = random_clamped(sh, np.random.default_rng(seed))
    p = project_mean_zero(w, mc, sh)
    nw = np.sqrt(sh.inner(w, w))
    assert abs(sh.integral(p)) <= 1e-13 * nw
    pp = project_mean_zero(p, mc, sh)
    assert np.sqrt(sh.inner(pp - p, pp - p)) <= 1e-12 * nw
    # (Lap, Lap)-orthogonal to the carrier
    bf = sh.restrict(p) @ (sh.biharmonic_form @ sh.restrict(mc.e))
    assert abs(bf) <= 1e-10 * nw * np.sqrt(sh.restrict(mc.e) @ (sh.biharmonic_form @ sh.restrict(mc.e)))


def test_fluid_divergence_matches_loop_oracle(small_grids):
    fl = small_grids.fluid
    np.testing.assert_array_equal(fl.divergence.toarray(), oracles.mac_divergence(fl))


def test_strain_form_is_laplacian_plus_divergence(small_grids, rng):
    # E(v, v) = (-Lap v, v) + |div v|^2 for fields vanishing on the whole boundary
    fl = small_grids.fluid
    A = oracles.mac_vector_laplacian(fl)
    dv = fl.cell_volume
    for _ in range(5):
        v = np.zeros(fl.size)
        v[fl.interior_dofs] = rng.standard_normal(fl.interior_dofs.size)
        e = v @ (fl.viscous_matrix @ v)
        ref = dv * (v @ A @ v) + dv * np.sum((fl.divergence @ v) ** 2)
        assert e == pytest.approx(ref, rel=1e-12)


def test_trace_linear_and_exact_for_linear_profiles(small_grids, rng):
    fl, sh = small_grids.fluid, small_grids.shell
    v, w = rng.standard_normal(fl.size), rng.standard_normal(fl.size)
    v[fl.wall_dofs] = w[fl.wall_dofs] = 0
    np.testing.assert_allclose(
        trace_to_interface(2 * v - 3 * w, fl, sh),
        2 * trace_to_interface(v, fl, sh) - 3 * trace_to_interface(w, fl, sh),
        atol=1e-13,
    )


def test_trace_converges_for_smooth_field():
    coeffs = smooth_coefficients(np.random.default_rng(3))
    errs = []
    for n in (8, 16):
        g = Grids(build_domain(1, 1, 0.5, n, n, 4), 2 * n, 2 * n)
        sh = g.shell
        ref = np.array([smooth_clamped(c, sh) for c in coeffs])

        def f(x, y, z):
            out = []
            for c in coeffs:
                s = np.zeros(np.broadcast(x, y).shape)
                for j in range(c.shape[0]):
                    for k in range(c.shape[1]):
                        s = s + c[j, k] * np.cos(j * np.pi * x) * np.cos(k * np.pi * y)
                out.append((np.sin(np.pi * x) * np.sin(np.pi * y)) ** 2 * s * (1 + 0 * z))
            return out

        v = g.fluid.sample(f)
        errs.append(np.max(np.abs(trace_to_interface(v, g.fluid, sh) - ref)))
    assert errs[0] / errs[1] > 3.0
