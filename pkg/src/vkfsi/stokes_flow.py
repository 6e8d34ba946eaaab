"""Discrete Stokes problem on the MAC grid: solver, lifting operator N0, eigenbasis, viscous form.

The momentum operator is the strain-rate form ``E`` of :class:`FluidGrid`.  For
discretely divergence-free fields vanishing on the whole boundary it coincides
with the MAC vector Laplacian, so the eigenproblem is the usual Stokes one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain_grid import FluidGrid, ShellGrid, _bilinear


class IncompatibleFluxError(ValueError):
    """Normal boundary data with non-zero net flux through Omega."""


def viscous_form(v: np.ndarray, w: np.ndarray, grid: FluidGrid) -> float:
    """``E(v, w) = 1/2 sum_ij (v^j_i + v^i_j)(w^j_i + w^i_j)`` by staggered quadrature."""
    return float(v @ (grid.viscous_matrix @ w))


def divergence_norm(v: np.ndarray, grid: FluidGrid) -> float:
    return float(np.max(np.abs(grid.divergence @ v)))


class StokesSystem:
    """Factorized saddle-point system for ``-nu Lap v + grad p = g``, zero-mean pressure.

    Unknowns are the interior velocity faces, the cell pressures and one
    multiplier enforcing the pressure gauge.  Interface data enters through the
    top-face unknowns of the flat layout.
    """

    def __init__(self, grid: FluidGrid, nu: float = 1.0):
        if nu <= 0:
            raise ValueError("viscosity must be positive")
        self.grid = grid
        self.nu = float(nu)
        I = grid.interior_dofs
        self.I = I
        E = grid.viscous_matrix
        D = grid.divergence
        dv = grid.cell_volume
        nc = grid.ncells
        self.E_II = E[I][:, I]
        self.E_IB = E[I]
        self.D_I = D[:, I]
        self.D = D
        gauge = sp.csr_matrix(np.full((nc, 1), dv))
        K = sp.bmat(
            [
                [self.nu * self.E_II, -dv * self.D_I.T, None],
                [-dv * self.D_I, None, gauge],
                [None, gauge.T, None],
            ],
            format="csc",
        )
        self.matrix = K
        self._lu = spla.splu(K)

    def solve(self, g: np.ndarray | None = None, boundary: np.ndarray | None = None):
        """Solve with face forcing ``g`` and a boundary vector carrying the top-face data.

        Returns ``(v, p)``: the full flat velocity and zero-mean cell pressures.
        """
        grid = self.grid
        dv = grid.cell_volume
        vb = np.zeros(grid.size) if boundary is None else np.asarray(boundary, dtype=float).copy()
        vb[grid.interior_dofs] = 0.0
        vb[grid.wall_dofs] = 0.0
        rhs_v = -self.nu * (self.E_IB @ vb)
        if g is not None:
            rhs_v = rhs_v + (grid.mass_weights * np.asarray(g, dtype=float))[self.I]
        rhs_p = dv * (self.D @ vb)
        rhs = np.concatenate([rhs_v, rhs_p, [0.0]])
        sol = self._lu.solve(rhs)
        v = vb
        v[self.I] = sol[: self.I.size]
        p = sol[self.I.size : self.I.size + grid.ncells]
        return v, p.reshape(grid.domain.nx, grid.domain.ny, grid.domain.nz)


def interface_data(psi_bc: np.ndarray, fluid: FluidGrid, shell: ShellGrid, tol: float = 1e-10) -> np.ndarray:
    """Map a nodal shell triple ``(psi1, psi2, psi3)`` to the top-face unknowns of the fluid layout.

    Tangential components are interpolated at their staggered positions; the
    normal component becomes the exact integral of its bilinear interpolant over
    each top face, so the discrete net flux equals the trapezoid mean on Omega.
    """
    psi_bc = np.asarray(psi_bc, dtype=float)
    if psi_bc.shape != (3,) + shell.shape:
        raise ValueError(f"boundary triple must have shape {(3,) + shell.shape}, got {psi_bc.shape}")
    d = fluid.domain
    rx, ry = shell.nx // d.nx, shell.ny // d.ny
    scale = np.sqrt(sum(shell.inner(c, c) for c in psi_bc))
    flux = shell.integral(psi_bc[2])
    if abs(flux) > tol * max(scale, 1e-300) and abs(flux) > 1e-300:
        raise IncompatibleFluxError(f"incompatible boundary flux: int psi3 = {flux:.3e}")

    X, Y, _ = fluid.coords("ut")
    ut = _bilinear(shell.x, shell.y, psi_bc[0], X, Y)
    X, Y, _ = fluid.coords("vt")
    vt = _bilinear(shell.x, shell.y, psi_bc[1], X, Y)
    # trapezoid over the rx x ry shell cells covering each fluid cell
    cellavg = 0.25 * (psi_bc[2][:-1, :-1] + psi_bc[2][1:, :-1] + psi_bc[2][:-1, 1:] + psi_bc[2][1:, 1:])
    wt = cellavg.reshape(d.nx, rx, d.ny, ry).mean(axis=(1, 3))
    wt = wt - wt.mean()  # remove the round-off flux left by the tolerance check
    vec = np.zeros(fluid.size)
    vec[fluid.index("ut")] = ut
    vec[fluid.index("vt")] = vt
    vec[fluid.index("w")[:, :, -1]] = wt
    vec[fluid.wall_dofs] = 0.0
    return vec


def lift_N0(psi_bc: np.ndarray, system: StokesSystem, shell: ShellGrid) -> np.ndarray:
    """Divergence-free extension of interface data: homogeneous Stokes solve, zero on S."""
    vb = interface_data(psi_bc, system.grid, shell)
    v, _ = system.solve(None, vb)
    return v


def trace_to_interface(v: np.ndarray, fluid: FluidGrid, shell: ShellGrid) -> np.ndarray:
    """Velocity on Omega at the shell nodes, linear interpolation from the staggered locations.

    No-slip wall values close the interpolation stencils at the edges of Omega.
    """
    d = fluid.domain
    dx, dy, _ = d.spacing
    parts = fluid.components(np.asarray(v, dtype=float))
    xn = np.arange(d.nx + 1) * dx
    yn = np.arange(d.ny + 1) * dy
    xe = np.concatenate([[0.0], (np.arange(d.nx) + 0.5) * dx, [d.lx]])
    ye = np.concatenate([[0.0], (np.arange(d.ny) + 0.5) * dy, [d.ly]])

    def pad(a, axes):
        pw = [(1, 1) if ax in axes else (0, 0) for ax in range(a.ndim)]
        return np.pad(a, pw)

    out = np.empty((3,) + shell.shape)
    out[0] = _bilinear(xn, ye, pad(parts["ut"], (1,)), shell.X, shell.Y)
    out[1] = _bilinear(xe, yn, pad(parts["vt"], (0,)), shell.X, shell.Y)
    out[2] = _bilinear(xe, ye, pad(parts["w"][:, :, -1], (0, 1)), shell.X, shell.Y)
    return out


@dataclass
class StokesBasis:
    psi: np.ndarray  # (m, size) full flat fields
    mu: np.ndarray  # (m,)


def fix_sign(vec: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    """Make the first entry of (numerically) largest magnitude positive."""
    mag = np.abs(vec)
    k = int(np.flatnonzero(mag >= mag.max() * (1 - rtol))[0])
    return vec if vec[k] > 0 else -vec


class DivergenceFreeSpace:
    """Orthonormal (Euclidean) basis of the discrete solenoidal interior fields."""

    def __init__(self, grid: FluidGrid):
        self.grid = grid
        D_I = grid.divergence[:, grid.interior_dofs].toarray()
        self.Z = sla.null_space(D_I)

    @cached_property
    def E(self) -> np.ndarray:
        I = self.grid.interior_dofs
        EI = self.grid.viscous_matrix[I][:, I]
        A = self.Z.T @ (EI @ self.Z)
        return 0.5 * (A + A.T)

    @cached_property
    def M(self) -> np.ndarray:
        mw = self.grid.mass_weights[self.grid.interior_dofs]
        B = self.Z.T @ (mw[:, None] * self.Z)
        return 0.5 * (B + B.T)


def stokes_eigenbasis(m: int, grid: FluidGrid, space: DivergenceFreeSpace | None = None) -> StokesBasis:
    """The ``m`` lowest eigenpairs of ``-Lap psi + grad p = mu psi``, ``psi = 0`` on the boundary."""
    space = space or DivergenceFreeSpace(grid)
    ndof = space.Z.shape[1]
    if m < 1 or m > ndof:
        raise ValueError(f"requested {m} Stokes modes, solenoidal space has dimension {ndof}")
    vals, vecs = sla.eigh(space.E, space.M, subset_by_index=[0, m - 1])
    if np.any(~np.isfinite(vals)) or vals[0] <= 0:
        raise RuntimeError(f"Stokes eigensolve failed: leading eigenvalue {vals[0]}")
    psi = np.zeros((m, grid.size))
    for i in range(m):
        full = np.zeros(grid.size)
        full[grid.interior_dofs] = space.Z @ vecs[:, i]
        full /= np.sqrt(np.sum(grid.mass_weights * full * full))
        psi[i] = fix_sign(full)
    return StokesBasis(psi=psi, mu=vals.copy())


def eigen_residual(basis: StokesBasis, grid: FluidGrid, space: DivergenceFreeSpace) -> np.ndarray:
    """``|| A psi_i - mu_i psi_i ||`` measured in the solenoidal subspace, per mode."""
    I = grid.interior_dofs
    EI = grid.viscous_matrix[I][:, I]
    mw = grid.mass_weights[I]
    out = []
    for psi, mu in zip(basis.psi, basis.mu):
        r = space.Z.T @ (EI @ psi[I] - mu * mw * psi[I])
        out.append(np.linalg.norm(r) / np.sqrt(np.sum(mw)))
    return np.array(out)


def solve_stokes(g, psi_bc, system: StokesSystem, shell: ShellGrid):
    """Stokes solve with body force ``g`` and interface data ``psi_bc`` on Omega (zero on S)."""
    vb = None if psi_bc is None else interface_data(psi_bc, system.grid, shell)
    return system.solve(g, vb)
