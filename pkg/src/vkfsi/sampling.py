"""Seeded random fields for property checks: clamped shell fields, admissible interface triples, modal states."""

from __future__ import annotations

import numpy as np

from .coupled_galerkin import GalerkinSystem, ModalState
from .domain_grid import ShellGrid


def random_clamped(grid: ShellGrid, rng: np.random.Generator) -> np.ndarray:
    """Rough field: i.i.d. normal values on interior nodes, zero on the ring."""
    return grid.embed(rng.standard_normal(grid.ninterior))


def smooth_coefficients(rng: np.random.Generator, order: int = 3) -> np.ndarray:
    """Grid-independent coefficients for :func:`smooth_clamped`, shape (3, order, order)."""
    return rng.standard_normal((3, order, order)) / (1.0 + np.add.outer(np.arange(order), np.arange(order)))[None]


def _bump(grid: ShellGrid) -> np.ndarray:
    return (np.sin(np.pi * grid.X / grid.lx) * np.sin(np.pi * grid.Y / grid.ly)) ** 2


def smooth_clamped(coeffs: np.ndarray, grid: ShellGrid) -> np.ndarray:
    """``bump(x, y) * sum c_jk cos(j pi x) cos(k pi y)``: zero value and slope on the boundary."""
    X, Y = grid.X / grid.lx, grid.Y / grid.ly
    s = np.zeros(grid.shape)
    for j in range(coeffs.shape[0]):
        for k in range(coeffs.shape[1]):
            s += coeffs[j, k] * np.cos(j * np.pi * X) * np.cos(k * np.pi * Y)
    return _bump(grid) * s


def smooth_triple(coeffs: np.ndarray, grid: ShellGrid) -> np.ndarray:
    """Admissible interface triple: third component has zero discrete mean over Omega."""
    out = np.array([smooth_clamped(c, grid) for c in coeffs])
    b = _bump(grid)
    out[2] -= grid.integral(out[2]) / grid.integral(b) * b
    return out


def random_triple(grid: ShellGrid, rng: np.random.Generator, order: int = 3) -> np.ndarray:
    return smooth_triple(smooth_coefficients(rng, order), grid)


def random_state(sys: GalerkinSystem, rng: np.random.Generator, scale: float = 1.0) -> ModalState:
    """Random modal state; displacement coefficients scaled by 1/sqrt(kappa) so energies are O(scale^2)."""
    k = 2 * sys.n
    beta = scale * rng.standard_normal(k) / np.sqrt(sys.kappa)
    return ModalState(
        t=0.0,
        alpha=scale * rng.standard_normal(sys.m),
        beta=beta,
        betadot=scale * rng.standard_normal(k),
        frozen_mean=np.zeros(sys.bases.grids.shell.shape),
    )
