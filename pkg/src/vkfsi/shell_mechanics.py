"""Full von Karman shell: strains, membrane energies, weak forms a / q / qbar, M_alpha and shell eigenbases.

Displacements are ``(3, nx+1, ny+1)`` node arrays ``(u1, u2, w)`` vanishing on
the boundary ring.  Strains are evaluated per triangle from the exact P1
gradients, with ``w`` averaged to the centroid for the curvature terms.  All
stiffness forms are derived from the same discrete strains, so that

    (Lap w, Lap d) + a(u, b) + q(u, b) = d/ds [ 1/2 ||Lap(w + s d)||^2 + 1/2 Q(u + s b) ]_{s=0}

holds to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain_grid import ShellGrid, mean_zero_basis
from .stokes_flow import fix_sign


@dataclass(frozen=True)
class PhysicalParams:
    nu: float = 0.1
    gamma: float = 0.5
    alpha: float = 0.01
    rho: float = 1.0
    mu: float = 0.3
    k1: float | np.ndarray = 0.0
    k2: float | np.ndarray = 0.0

    def __post_init__(self):
        if not 0.0 < self.mu < 0.5:
            raise ValueError(f"Poisson ratio mu must lie in (0, 1/2), got {self.mu}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.nu <= 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.gamma < 0 or self.rho < 0:
            raise ValueError("gamma and rho must be non-negative")

    @property
    def lam(self) -> float:
        return (1.0 + self.mu) / (1.0 - self.mu)

    @property
    def kappa1(self):
        return self.k1 + self.mu * self.k2

    @property
    def kappa2(self):
        return self.k2 + self.mu * self.k1

    def with_(self, **kw) -> "PhysicalParams":
        vals = {f: getattr(self, f) for f in ("nu", "gamma", "alpha", "rho", "mu", "k1", "k2")}
        vals.update(kw)
        return PhysicalParams(**vals)

    @property
    def flat_shell(self) -> bool:
        return np.all(np.asarray(self.k1) == 0) and np.all(np.asarray(self.k2) == 0)


def curvatures_on_triangles(params: PhysicalParams, grid: ShellGrid) -> tuple[np.ndarray, np.ndarray]:
    out = []
    for k in (params.k1, params.k2):
        k = np.asarray(k, dtype=float)
        if k.ndim == 0:
            out.append(np.full(grid.ntri, float(k)))
        elif k.shape == grid.shape:
            out.append(grid.tri_average @ k.ravel())
        else:
            raise ValueError(f"curvature field shape {k.shape} does not match grid {grid.shape}")
    return out[0], out[1]


@dataclass
class Kinematics:
    """Per-triangle derivatives of a displacement triple."""

    u1x: np.ndarray
    u1y: np.ndarray
    u2x: np.ndarray
    u2y: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    wbar: np.ndarray


def kinematics(u: np.ndarray, grid: ShellGrid) -> Kinematics:
    u = np.asarray(u, dtype=float)
    if u.shape != (3,) + grid.shape:
        raise ValueError(f"displacement must have shape {(3,) + grid.shape}, got {u.shape}")
    gx, gy = grid.tri_gradient
    flat = u.reshape(3, -1)
    return Kinematics(
        u1x=gx @ flat[0],
        u1y=gy @ flat[0],
        u2x=gx @ flat[1],
        u2y=gy @ flat[1],
        wx=gx @ flat[2],
        wy=gy @ flat[2],
        wbar=grid.tri_average @ flat[2],
    )


@dataclass
class StrainState:
    eps11: np.ndarray
    eps22: np.ndarray
    eps12: np.ndarray
    n11: np.ndarray = field(init=False)
    n22: np.ndarray = field(init=False)
    n12: np.ndarray = field(init=False)
    mu: float = 0.3

    def __post_init__(self):
        c = 2.0 / (1.0 - self.mu)
        self.n11 = c * (self.eps11 + self.mu * self.eps22)
        self.n22 = c * (self.eps22 + self.mu * self.eps11)
        self.n12 = np.array(self.eps12, dtype=float, copy=True)


def strain_from_kinematics(kin: Kinematics, k1t, k2t, mu: float, linear: bool = False) -> StrainState:
    if linear:
        return StrainState(kin.u1x, kin.u2y, kin.u1y + kin.u2x, mu=mu)
    return StrainState(
        kin.u1x + k1t * kin.wbar + 0.5 * kin.wx**2,
        kin.u2y + k2t * kin.wbar + 0.5 * kin.wy**2,
        kin.u1y + kin.u2x + kin.wx * kin.wy,
        mu=mu,
    )


def strain(u: np.ndarray, params: PhysicalParams, grid: ShellGrid) -> StrainState:
    """Nonlinear strains and Hooke stresses per triangle."""
    k1t, k2t = curvatures_on_triangles(params, grid)
    return strain_from_kinematics(kinematics(u, grid), k1t, k2t, params.mu)


def energy_density_eps(st: StrainState) -> np.ndarray:
    mu = st.mu
    return (2.0 / (1.0 - mu)) * (
        st.eps11**2 + st.eps22**2 + 2 * mu * st.eps11 * st.eps22 + 0.5 * (1 - mu) * st.eps12**2
    )


def energy_density_n(st: StrainState) -> np.ndarray:
    mu = st.mu
    return (st.n11**2 + st.n22**2 - 2 * mu * st.n11 * st.n22 + 2 * (1 + mu) * st.n12**2) / (2 * (1 + mu))


def q_from_strain(st: StrainState, area: float | np.ndarray) -> tuple[float, float]:
    """Membrane energy from both closed forms: (strain form, stress form)."""
    return float(np.sum(area * energy_density_eps(st))), float(np.sum(area * energy_density_n(st)))


def potential_Q(u: np.ndarray, params: PhysicalParams, grid: ShellGrid) -> float:
    return q_from_strain(strain(u, params, grid), grid.tri_area)[0]


def potential_Q_forms(u, params, grid) -> tuple[float, float]:
    return q_from_strain(strain(u, params, grid), grid.tri_area)


def potential_Q0(u: np.ndarray, params: PhysicalParams, grid: ShellGrid) -> float:
    """Quadratic membrane energy with the linear strains only; independent of ``w``."""
    st = strain_from_kinematics(kinematics(u, grid), 0.0, 0.0, params.mu, linear=True)
    return q_from_strain(st, grid.tri_area)[0]


def form_a(ubar: np.ndarray, bbar: np.ndarray, params: PhysicalParams, grid: ShellGrid) -> float:
    """In-plane elastic form in strain-based form (symmetric, coercive on Dirichlet fields)."""
    z = np.zeros(grid.shape)
    ku = kinematics(np.array([ubar[0], ubar[1], z]), grid)
    kb = kinematics(np.array([bbar[0], bbar[1], z]), grid)
    mu = params.mu
    c = 2.0 / (1.0 - mu)
    val = (
        c * (ku.u1x + mu * ku.u2y) * kb.u1x
        + c * (ku.u2y + mu * ku.u1x) * kb.u2y
        + (ku.u1y + ku.u2x) * (kb.u1y + kb.u2x)
    )
    return float(grid.tri_area * np.sum(val))


def form_a_gradient(ubar, bbar, params, grid) -> float:
    """``sum_i (grad u^i, grad b^i) + lam (div u, div b)``: the literal gradient/divergence form."""
    z = np.zeros(grid.shape)
    ku = kinematics(np.array([ubar[0], ubar[1], z]), grid)
    kb = kinematics(np.array([bbar[0], bbar[1], z]), grid)
    val = ku.u1x * kb.u1x + ku.u1y * kb.u1y + ku.u2x * kb.u2x + ku.u2y * kb.u2y
    val = val + params.lam * (ku.u1x + ku.u2y) * (kb.u1x + kb.u2y)
    return float(grid.tri_area * np.sum(val))


def _q_terms(st: StrainState, ku: Kinematics, kb: Kinematics, k1t, k2t, params) -> float:
    mu = params.mu
    kap1 = k1t + mu * k2t
    kap2 = k2t + mu * k1t
    d_bar, dx, dy = kb.wbar, kb.wx, kb.wy
    wx, wy = ku.wx, ku.wy
    val = (k1t * st.n11 + k2t * st.n22) * d_bar
    val = val + (st.n11 * wx + st.n12 * wy) * dx + (st.n12 * wx + st.n22 * wy) * dy
    val = val + ((wx**2 + mu * wy**2) * kb.u1x + (wy**2 + mu * wx**2) * kb.u2y) / (1.0 - mu)
    val = val + wx * wy * (kb.u1y + kb.u2x)
    # kappa2 on b2_x2: the printed kappa1 there breaks q = qbar - a and the Gateaux identity
    val = val + (2.0 / (1.0 - mu)) * ku.wbar * (kap1 * kb.u1x + kap2 * kb.u2y)
    return val


def form_q(u: np.ndarray, b: np.ndarray, params: PhysicalParams, grid: ShellGrid) -> float:
    """Nonlinear coupling form q(u, b), linear in ``b = (b1, b2, d)``."""
    k1t, k2t = curvatures_on_triangles(params, grid)
    ku, kb = kinematics(u, grid), kinematics(b, grid)
    st = strain_from_kinematics(ku, k1t, k2t, params.mu)
    return float(grid.tri_area * np.sum(_q_terms(st, ku, kb, k1t, k2t, params)))


def form_qbar(u: np.ndarray, beta: np.ndarray, params: PhysicalParams, grid: ShellGrid) -> float:
    """Full-stress form qbar(u, beta): the membrane part of the first variation of Q / 2."""
    k1t, k2t = curvatures_on_triangles(params, grid)
    ku, kb = kinematics(u, grid), kinematics(beta, grid)
    st = strain_from_kinematics(ku, k1t, k2t, params.mu)
    val = (k1t * st.n11 + k2t * st.n22) * kb.wbar
    val = val + (st.n11 * ku.wx + st.n12 * ku.wy) * kb.wx + (st.n12 * ku.wx + st.n22 * ku.wy) * kb.wy
    val = val + st.n11 * kb.u1x + st.n12 * (kb.u1y + kb.u2x) + st.n22 * kb.u2y
    return float(grid.tri_area * np.sum(val))


def bending_form(w: np.ndarray, d: np.ndarray, grid: ShellGrid) -> float:
    """``(Lap w, Lap d)`` with the clamped ghost-reflection Laplacian."""
    return float(grid.restrict(w) @ (grid.biharmonic_form @ grid.restrict(d)))


# --------------------------------------------------------------------------- M_alpha


@lru_cache(maxsize=16)
def _malpha_factor(grid: ShellGrid, alpha: float):
    n = grid.ninterior
    mat = sp.eye(n) - alpha * grid.laplacian_dirichlet
    return spla.splu(mat.tocsc())


def malpha_apply(f: np.ndarray, params_or_alpha, grid: ShellGrid) -> np.ndarray:
    alpha = getattr(params_or_alpha, "alpha", params_or_alpha)
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    fi = grid.restrict(f)
    return grid.embed(fi - alpha * (grid.laplacian_dirichlet @ fi))


def malpha_solve(f: np.ndarray, params_or_alpha, grid: ShellGrid) -> np.ndarray:
    alpha = float(getattr(params_or_alpha, "alpha", params_or_alpha))
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return grid.embed(_malpha_factor(grid, alpha).solve(grid.restrict(f)))


def malpha_matrix(grid: ShellGrid, alpha: float) -> sp.csr_matrix:
    """Matrix of ``(M_alpha f, g)`` on interior unknowns: mass plus alpha times stiffness."""
    h2 = grid.hx * grid.hy
    return (h2 * sp.eye(grid.ninterior) - alpha * h2 * grid.laplacian_dirichlet).tocsr()


# --------------------------------------------------------------------------- eigenbases


@dataclass
class ShellBasis:
    modes: np.ndarray  # (n, nx+1, ny+1) transversal or (n, 2, nx+1, ny+1) in-plane
    values: np.ndarray


def transversal_eigenbasis(n: int, params: PhysicalParams, grid: ShellGrid) -> ShellBasis:
    """Clamped, zero-mean modes of ``(Lap xi, Lap w) = k (M_alpha xi, w)``, M_alpha-orthonormal."""
    Z = mean_zero_basis(grid)
    if n < 1 or n > Z.shape[1]:
        raise ValueError(f"requested {n} transversal modes, space has dimension {Z.shape[1]}")
    B = grid.biharmonic_form
    Ma = malpha_matrix(grid, params.alpha)
    A = Z.T @ (B @ Z)
    Mz = Z.T @ (Ma @ Z)
    vals, vecs = sla.eigh(0.5 * (A + A.T), 0.5 * (Mz + Mz.T), subset_by_index=[0, n - 1])
    modes = []
    for i in range(n):
        xi = Z @ vecs[:, i]
        xi /= np.sqrt(xi @ (Ma @ xi))
        modes.append(grid.embed(fix_sign(xi)))
    return ShellBasis(np.array(modes), vals.copy())


def inplane_stiffness(params: PhysicalParams, grid: ShellGrid) -> sp.csr_matrix:
    """Matrix of ``a`` on the stacked interior unknowns ``(u1, u2)``."""
    gx, gy = grid.tri_gradient
    gx, gy = gx[:, grid.interior], gy[:, grid.interior]
    mu = params.mu
    c = 2.0 / (1.0 - mu)
    zero = sp.csr_matrix(gx.shape)
    # strain rows: e11 = [gx, 0], e22 = [0, gy], e12 = [gy, gx]
    e11 = sp.hstack([gx, zero])
    e22 = sp.hstack([zero, gy])
    e12 = sp.hstack([gy, gx])
    A = c * (e11.T @ e11 + e22.T @ e22 + mu * (e11.T @ e22 + e22.T @ e11)) + e12.T @ e12
    A = grid.tri_area * A
    return (0.5 * (A + A.T)).tocsr()


def inplane_h1_matrix(grid: ShellGrid) -> sp.csr_matrix:
    """Matrix of the full H1 inner product on stacked in-plane interior unknowns."""
    h2 = grid.hx * grid.hy
    one = h2 * sp.eye(grid.ninterior) + grid.stiffness
    return sp.block_diag([one, one]).tocsr()


def inplane_eigenbasis(n: int, params: PhysicalParams, grid: ShellGrid) -> ShellBasis:
    """Dirichlet modes of ``a(eta, w) = k (eta, w)``, L2-normalised."""
    N = grid.ninterior
    if n < 1 or n > 2 * N:
        raise ValueError(f"requested {n} in-plane modes, space has dimension {2 * N}")
    A = inplane_stiffness(params, grid).toarray()
    h2 = grid.hx * grid.hy
    vals, vecs = sla.eigh(A, h2 * np.eye(2 * N), subset_by_index=[0, n - 1])
    modes = []
    for i in range(n):
        v = vecs[:, i] / np.sqrt(h2 * vecs[:, i] @ vecs[:, i])
        v = fix_sign(v)
        modes.append(np.array([grid.embed(v[:N]), grid.embed(v[N:])]))
    return ShellBasis(np.array(modes), vals.copy())


# --------------------------------------------------------------------------- traction


def traction_on_interface(v: np.ndarray, p: np.ndarray, params: PhysicalParams, fluid, shell: ShellGrid):
    """Fluid surface force on the shell, evaluated at x3 = 0 and interpolated to shell nodes.

    Diagnostic only; the weak Galerkin form never needs it.
    """
    from .domain_grid import _bilinear

    d = fluid.domain
    dx, dy, dz = d.spacing
    nu = params.nu
    parts = fluid.components(np.asarray(v, dtype=float))
    u, vv, w = parts["u"], parts["v"], parts["w"]
    p = np.asarray(p, dtype=float).reshape(d.nx, d.ny, d.nz)
    # one-sided second-order normal derivatives at x3 = 0
    du_dz = (8 * parts["ut"] - 9 * u[:, :, -1] + u[:, :, -2]) / (3 * dz)
    dv_dz = (8 * parts["vt"] - 9 * vv[:, :, -1] + vv[:, :, -2]) / (3 * dz)
    dw_dz = (3 * w[:, :, -1] - 4 * w[:, :, -2] + w[:, :, -3]) / (2 * dz)
    p_top = 1.5 * p[:, :, -1] - 0.5 * p[:, :, -2]
    wt = w[:, :, -1]
    wpad_x = np.concatenate([-wt[:1], wt, -wt[-1:]], axis=0)
    dw_dx = (wpad_x[1:] - wpad_x[:-1]) / dx  # at (i dx, (j+1/2) dy)
    wpad_y = np.concatenate([-wt[:, :1], wt, -wt[:, -1:]], axis=1)
    dw_dy = (wpad_y[:, 1:] - wpad_y[:, :-1]) / dy  # at ((i+1/2) dx, j dy)

    xn = np.arange(d.nx + 1) * dx
    yn = np.arange(d.ny + 1) * dy
    xc = (np.arange(d.nx) + 0.5) * dx
    yc = (np.arange(d.ny) + 0.5) * dy
    X, Y = shell.X, shell.Y
    t1 = nu * (_bilinear(xn, yc, du_dz, X, Y) + _bilinear(xn, yc, dw_dx, X, Y))
    t2 = nu * (_bilinear(xc, yn, dv_dz, X, Y) + _bilinear(xc, yn, dw_dy, X, Y))
    t3 = 2 * nu * _bilinear(xc, yc, dw_dz, X, Y) - _bilinear(xc, yc, p_top, X, Y)
    return np.array([t1, t2, t3])


# --------------------------------------------------------------------------- Korn probe


@dataclass
class KornReport:
    lam_min: float  # min generalized eigenvalue of a against the H1 form on the probed space
    constant: float  # sampled sup |u|_1^2 / Q(u, 0)
    samples: int


def korn_probe(params: PhysicalParams, grid: ShellGrid, n: int = 8, samples: int = 100, seed: int = 0) -> KornReport:
    """Coercivity of the in-plane elastic form on the span of the first ``n`` in-plane modes.

    ``Q(ubar, 0)`` with ``w = 0`` and flat geometry equals ``a(ubar, ubar)``, so the
    sampled ratio is bounded by ``1 / lam_min``.
    """
    basis = inplane_eigenbasis(n, params, grid)
    V = np.array([np.concatenate([grid.restrict(e[0]), grid.restrict(e[1])]) for e in basis.modes]).T
    A = V.T @ (inplane_stiffness(params, grid) @ V)
    H = V.T @ (inplane_h1_matrix(grid) @ V)
    lam = sla.eigh(0.5 * (A + A.T), 0.5 * (H + H.T), eigvals_only=True)
    rng = np.random.default_rng(seed)
    flat = params.with_(k1=0.0, k2=0.0)
    worst = 0.0
    for _ in range(samples):
        c = rng.standard_normal(n)
        u = np.zeros((3,) + grid.shape)
        u[:2] = np.tensordot(c, basis.modes, axes=1)
        x = V @ c
        h1 = float(x @ (inplane_h1_matrix(grid) @ x))
        worst = max(worst, h1 / potential_Q(u, flat, grid))
    return KornReport(float(lam[0]), worst, samples)
