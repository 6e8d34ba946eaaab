"""Box geometry, staggered fluid grid, node-centred shell grid and their discrete operators.

The fluid occupies ``[0, lx] x [0, ly] x [-hz, 0]``; the shell sits on the top
face ``x3 = 0``.  Fluid velocities live on a MAC grid and are stored as one flat
vector per field (see :class:`FluidGrid` for the layout).  Shell fields are
plain ``(nx + 1, ny + 1)`` node arrays that vanish on the boundary ring.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

MIN_CELLS = 4


@dataclass(frozen=True)
class BoxDomain:
    lx: float
    ly: float
    hz: float
    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for name in ("lx", "ly", "hz"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0.0:
                raise ValueError(f"extent {name} must be positive, got {val}")
        for name in ("nx", "ny", "nz"):
            if int(getattr(self, name)) < MIN_CELLS:
                raise ValueError(f"grid too coarse: {name}={getattr(self, name)} < {MIN_CELLS}")

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.lx / self.nx, self.ly / self.ny, self.hz / self.nz)


def build_domain(lx, ly, hz, nx, ny, nz) -> BoxDomain:
    return BoxDomain(float(lx), float(ly), float(hz), int(nx), int(ny), int(nz))


# --------------------------------------------------------------------------- fluid


def _sel(n_out: int, n_in: int, rows, cols, vals) -> sp.csr_matrix:
    return sp.csr_matrix(
        (np.asarray(vals, dtype=float), (np.asarray(rows), np.asarray(cols))), shape=(n_out, n_in)
    )


class FluidGrid:
    """MAC grid on the fluid box.

    Flat vector layout: ``u`` on x-faces ``(nx+1, ny, nz)``, ``v`` on y-faces
    ``(nx, ny+1, nz)``, ``w`` on z-faces ``(nx, ny, nz+1)``, then the tangential
    trace on the top face: ``ut`` at ``(nx+1, ny)`` and ``vt`` at ``(nx, ny+1)``.
    Layer ``k = nz`` of ``w`` is the top face ``x3 = 0``; ``k = 0`` is the bottom.
    """

    def __init__(self, domain: BoxDomain):
        self.domain = domain
        nx, ny, nz = domain.nx, domain.ny, domain.nz
        self.shapes = {
            "u": (nx + 1, ny, nz),
            "v": (nx, ny + 1, nz),
            "w": (nx, ny, nz + 1),
            "ut": (nx + 1, ny),
            "vt": (nx, ny + 1),
        }
        self.offsets = {}
        off = 0
        for key, shape in self.shapes.items():
            self.offsets[key] = off
            off += int(np.prod(shape))
        self.size = off
        self.ncells = nx * ny * nz

    # -- layout helpers
    def index(self, key: str) -> np.ndarray:
        shape = self.shapes[key]
        return self.offsets[key] + np.arange(int(np.prod(shape))).reshape(shape)

    def components(self, vec: np.ndarray) -> dict[str, np.ndarray]:
        return {k: vec[self.index(k)] for k in self.shapes}

    def pack(self, **parts) -> np.ndarray:
        vec = np.zeros(self.size)
        for key, arr in parts.items():
            vec[self.index(key)] = arr
        return vec

    def coords(self, key: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical coordinates of the unknowns of one component (broadcast arrays)."""
        d = self.domain
        dx, dy, dz = d.spacing
        xn = np.arange(d.nx + 1) * dx
        yn = np.arange(d.ny + 1) * dy
        xc = (np.arange(d.nx) + 0.5) * dx
        yc = (np.arange(d.ny) + 0.5) * dy
        zc = -d.hz + (np.arange(d.nz) + 0.5) * dz
        zn = -d.hz + np.arange(d.nz + 1) * dz
        table = {
            "u": (xn, yc, zc),
            "v": (xc, yn, zc),
            "w": (xc, yc, zn),
            "ut": (xn, yc, np.zeros(1)),
            "vt": (xc, yn, np.zeros(1)),
        }
        x, y, z = table[key]
        if key in ("ut", "vt"):
            X, Y = np.meshgrid(x, y, indexing="ij")
            return X, Y, np.zeros_like(X)
        return np.meshgrid(x, y, z, indexing="ij")

    def sample(self, fn) -> np.ndarray:
        """Sample ``fn(x, y, z) -> (f1, f2, f3)`` at every staggered location, walls set to zero."""
        parts = {}
        for key, comp in (("u", 0), ("v", 1), ("w", 2), ("ut", 0), ("vt", 1)):
            X, Y, Z = self.coords(key)
            parts[key] = np.broadcast_to(fn(X, Y, Z)[comp], X.shape).copy()
        vec = self.pack(**parts)
        vec[self.wall_dofs] = 0.0
        return vec

    # -- degrees of freedom
    @cached_property
    def wall_dofs(self) -> np.ndarray:
        """Unknowns fixed to zero by no-slip on S (sides and bottom)."""
        u, v, w = self.index("u"), self.index("v"), self.index("w")
        ut, vt = self.index("ut"), self.index("vt")
        parts = [u[0].ravel(), u[-1].ravel(), v[:, 0].ravel(), v[:, -1].ravel(), w[:, :, 0].ravel()]
        parts += [ut[0], ut[-1], vt[:, 0], vt[:, -1]]
        return np.unique(np.concatenate(parts))

    @cached_property
    def top_dofs(self) -> np.ndarray:
        """Unknowns carrying interface data on Omega (top normal faces and tangential trace)."""
        ut, vt = self.index("ut"), self.index("vt")
        parts = [self.index("w")[:, :, -1].ravel(), ut[1:-1].ravel(), vt[:, 1:-1].ravel()]
        return np.concatenate(parts)

    @cached_property
    def interior_dofs(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        mask[self.wall_dofs] = False
        mask[self.top_dofs] = False
        return np.flatnonzero(mask)

    # -- quadrature
    @cached_property
    def mass_weights(self) -> np.ndarray:
        """Face control-volume weights; half volumes on boundary faces, zero for the top trace."""
        d = self.domain
        dx, dy, dz = d.spacing
        dv = dx * dy * dz
        wts = np.zeros(self.size)
        for key, axis in (("u", 0), ("v", 1), ("w", 2)):
            arr = np.full(self.shapes[key], dv)
            idx = [slice(None)] * 3
            for end in (0, -1):
                idx[axis] = end
                arr[tuple(idx)] *= 0.5
            wts[self.index(key).ravel()] = arr.ravel()
        return wts

    @cached_property
    def cell_volume(self) -> float:
        dx, dy, dz = self.domain.spacing
        return dx * dy * dz

    # -- difference operators
    @cached_property
    def divergence(self) -> sp.csr_matrix:
        """Cell-centred discrete divergence (ncells x size)."""
        d = self.domain
        dx, dy, dz = d.spacing
        cells = np.arange(self.ncells).reshape(d.nx, d.ny, d.nz)
        u, v, w = self.index("u"), self.index("v"), self.index("w")
        rows, cols, vals = [], [], []
        for arr, lo, hi, h in (
            (u, u[:-1], u[1:], dx),
            (v, v[:, :-1], v[:, 1:], dy),
            (w, w[:, :, :-1], w[:, :, 1:], dz),
        ):
            rows += [cells.ravel(), cells.ravel()]
            cols += [hi.ravel(), lo.ravel()]
            vals += [np.full(self.ncells, 1.0 / h), np.full(self.ncells, -1.0 / h)]
        return _sel(self.ncells, self.size, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))

    def _edge_derivative(self, key: str, axis: int) -> tuple[sp.csr_matrix, np.ndarray]:
        """Derivative of a tangential component across ``axis`` at the edges between its faces.

        Wall ghosts reflect with a sign flip (no-slip); on the top face the stored
        trace ``ut``/``vt`` closes the stencil at half spacing.
        """
        d = self.domain
        h = d.spacing[axis]
        idx = self.index(key)
        shape = list(idx.shape)
        n = shape[axis]
        out_shape = shape.copy()
        out_shape[axis] = n + 1
        out = np.arange(int(np.prod(out_shape))).reshape(out_shape)
        rows, cols, vals = [], [], []

        def take(a, k):
            s = [slice(None)] * a.ndim
            s[axis] = k
            return a[tuple(s)]

        for k in range(1, n):
            r = take(out, k).ravel()
            rows += [r, r]
            cols += [take(idx, k).ravel(), take(idx, k - 1).ravel()]
            vals += [np.full(r.size, 1.0 / h), np.full(r.size, -1.0 / h)]
        # lower end: ghost = -first, derivative = 2 first / h
        r = take(out, 0).ravel()
        rows.append(r)
        cols.append(take(idx, 0).ravel())
        vals.append(np.full(r.size, 2.0 / h))
        r = take(out, n).ravel()
        if axis == 2:
            trace = self.index("ut" if key == "u" else "vt")
            rows += [r, r]
            cols += [trace.ravel(), take(idx, n - 1).ravel()]
            vals += [np.full(r.size, 2.0 / h), np.full(r.size, -2.0 / h)]
        else:
            rows.append(r)
            cols.append(take(idx, n - 1).ravel())
            vals.append(np.full(r.size, -2.0 / h))
        mat = _sel(out.size, self.size, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
        return mat, np.array(out_shape)

    @cached_property
    def strain_blocks(self) -> list[tuple[sp.csr_matrix, np.ndarray, float]]:
        """Quadrature blocks ``(S, weights, factor)`` with ``E(v, phi) = sum factor (S v)^T diag(weights) (S phi)``."""
        d = self.domain
        dv = self.cell_volume
        blocks = []
        div = self.divergence
        # diagonal strain rates d_i v^i at cell centres
        d = self.domain
        dx, dy, dz = d.spacing
        cells = np.arange(self.ncells).reshape(d.nx, d.ny, d.nz)
        for key, axis, h in (("u", 0, dx), ("v", 1, dy), ("w", 2, dz)):
            idx = self.index(key)
            s_hi = [slice(None)] * 3
            s_lo = [slice(None)] * 3
            s_hi[axis] = slice(1, None)
            s_lo[axis] = slice(None, -1)
            r = cells.ravel()
            mat = _sel(
                self.ncells,
                self.size,
                np.concatenate([r, r]),
                np.concatenate([idx[tuple(s_hi)].ravel(), idx[tuple(s_lo)].ravel()]),
                np.concatenate([np.full(r.size, 1 / h), np.full(r.size, -1 / h)]),
            )
            blocks.append((mat, np.full(self.ncells, dv), 2.0))
        del div
        # shear rates d_j v^i + d_i v^j on edges
        for (ka, axa), (kb, axb) in (((("u", 1)), ("v", 0)), (("u", 2), ("w", 0)), (("v", 2), ("w", 1))):
            ma, sha = self._edge_derivative(ka, axa)
            mb, shb = self._edge_derivative(kb, axb)
            assert np.array_equal(sha, shb)
            wts = np.full(tuple(sha), dv)
            for axis in (axa, axb):
                s = [slice(None)] * 3
                for end in (0, -1):
                    s[axis] = end
                    wts[tuple(s)] *= 0.5
            blocks.append(((ma + mb).tocsr(), wts.ravel(), 1.0))
        return blocks

    @cached_property
    def viscous_matrix(self) -> sp.csr_matrix:
        """Symmetric matrix of the strain-rate form ``E`` on the full flat layout."""
        mat = None
        for S, wts, fac in self.strain_blocks:
            term = fac * (S.T @ sp.diags(wts) @ S)
            mat = term if mat is None else mat + term
        mat = 0.5 * (mat + mat.T)
        return mat.tocsr()


# --------------------------------------------------------------------------- shell


class ShellGrid:
    """Node-centred grid on Omega with a right-triangle split of every cell.

    Lower triangle of cell (i, j): nodes (i,j), (i+1,j), (i,j+1); upper
    triangle: (i+1,j+1), (i,j+1), (i+1,j).  Gradients are exact for the
    piecewise-linear interpolant; strains and membrane energies are evaluated on
    triangles with one-point (centroid) quadrature.
    """

    def __init__(self, lx: float, ly: float, nx: int, ny: int):
        if nx < MIN_CELLS or ny < MIN_CELLS:
            raise ValueError(f"grid too coarse: shell grid {nx}x{ny}")
        self.lx, self.ly, self.nx, self.ny = float(lx), float(ly), int(nx), int(ny)
        self.hx, self.hy = self.lx / nx, self.ly / ny
        self.shape = (nx + 1, ny + 1)
        self.nnodes = (nx + 1) * (ny + 1)
        self.x = np.arange(nx + 1) * self.hx
        self.y = np.arange(ny + 1) * self.hy
        self.X, self.Y = np.meshgrid(self.x, self.y, indexing="ij")
        mask = np.zeros(self.shape, dtype=bool)
        mask[1:-1, 1:-1] = True
        self.interior_mask = mask
        self.interior = np.flatnonzero(mask.ravel())
        self.ninterior = self.interior.size
        self.ntri = 2 * nx * ny
        self.tri_area = 0.5 * self.hx * self.hy

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights on the node grid, shape ``(nx+1, ny+1)``."""
        wx = np.full(self.nx + 1, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny + 1, self.hy)
        wy[[0, -1]] *= 0.5
        return np.outer(wx, wy)

    def embed(self, interior_values: np.ndarray) -> np.ndarray:
        """Interior coefficient vector(s) -> full node arrays with a zero boundary ring."""
        vals = np.asarray(interior_values)
        out = np.zeros(vals.shape[:-1] + (self.nnodes,))
        out[..., self.interior] = vals
        return out.reshape(vals.shape[:-1] + self.shape)

    def restrict(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        return f.reshape(f.shape[: f.ndim - 2] + (self.nnodes,))[..., self.interior]

    @cached_property
    def _node_index(self) -> np.ndarray:
        return np.arange(self.nnodes).reshape(self.shape)

    @cached_property
    def tri_gradient(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """(Gx, Gy): node values -> constant gradient per triangle, ``ntri x nnodes``."""
        nid = self._node_index
        nc = self.nx * self.ny
        lo = np.arange(nc)
        up = nc + np.arange(nc)
        a = nid[:-1, :-1].ravel()  # (i, j)
        b = nid[1:, :-1].ravel()  # (i+1, j)
        c = nid[:-1, 1:].ravel()  # (i, j+1)
        e = nid[1:, 1:].ravel()  # (i+1, j+1)
        ones = np.ones(nc)
        gx = _sel(
            self.ntri,
            self.nnodes,
            np.concatenate([lo, lo, up, up]),
            np.concatenate([b, a, e, c]),
            np.concatenate([ones, -ones, ones, -ones]) / self.hx,
        )
        gy = _sel(
            self.ntri,
            self.nnodes,
            np.concatenate([lo, lo, up, up]),
            np.concatenate([c, a, e, b]),
            np.concatenate([ones, -ones, ones, -ones]) / self.hy,
        )
        return gx, gy

    @cached_property
    def tri_average(self) -> sp.csr_matrix:
        """Node values -> centroid values (mean of the three vertices)."""
        nid = self._node_index
        nc = self.nx * self.ny
        lo = np.arange(nc)
        up = nc + np.arange(nc)
        a, b = nid[:-1, :-1].ravel(), nid[1:, :-1].ravel()
        c, e = nid[:-1, 1:].ravel(), nid[1:, 1:].ravel()
        rows = np.concatenate([lo, lo, lo, up, up, up])
        cols = np.concatenate([a, b, c, e, c, b])
        return _sel(self.ntri, self.nnodes, rows, cols, np.full(rows.size, 1.0 / 3.0))

    @cached_property
    def tri_centroids(self) -> tuple[np.ndarray, np.ndarray]:
        cx = self.tri_average @ self.X.ravel()
        cy = self.tri_average @ self.Y.ravel()
        return cx, cy

    @cached_property
    def laplacian_dirichlet(self) -> sp.csr_matrix:
        """Five-point Laplacian on interior nodes, zero Dirichlet data (interior x interior)."""
        n1, n2 = self.nx - 1, self.ny - 1
        d1 = sp.diags([np.ones(n1 - 1), -2 * np.ones(n1), np.ones(n1 - 1)], [-1, 0, 1]) / self.hx**2
        d2 = sp.diags([np.ones(n2 - 1), -2 * np.ones(n2), np.ones(n2 - 1)], [-1, 0, 1]) / self.hy**2
        return (sp.kron(d1, sp.eye(n2)) + sp.kron(sp.eye(n1), d2)).tocsr()

    @cached_property
    def laplacian_clamped(self) -> sp.csr_matrix:
        """Five-point Laplacian at *all* nodes of a clamped field (nnodes x interior).

        The ghost layer mirrors the first interior line (zero normal slope), so at
        a boundary node the Laplacian reduces to ``2 w_inner / h^2``.
        """
        full = sp.lil_matrix((self.nnodes, self.nnodes))
        nid = self._node_index
        nx, ny = self.nx, self.ny
        for i in range(nx + 1):
            for j in range(ny + 1):
                r = nid[i, j]
                full[r, r] += -2.0 / self.hx**2 - 2.0 / self.hy**2
                for di, h in ((-1, self.hx), (1, self.hx)):
                    ii = i + di
                    if ii < 0 or ii > nx:
                        ii = i - di  # mirror ghost
                    full[r, nid[ii, j]] += 1.0 / h**2
                for dj, h in ((-1, self.hy), (1, self.hy)):
                    jj = j + dj
                    if jj < 0 or jj > ny:
                        jj = j - dj
                    full[r, nid[i, jj]] += 1.0 / h**2
        return full.tocsr()[:, self.interior]

    @cached_property
    def biharmonic_form(self) -> sp.csr_matrix:
        """Matrix of ``(Lap w, Lap d)`` over interior unknowns, trapezoid quadrature."""
        L = self.laplacian_clamped
        mat = L.T @ sp.diags(self.weights.ravel()) @ L
        return (0.5 * (mat + mat.T)).tocsr()

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Matrix of ``(grad f, grad g)`` over interior unknowns (exact for P1 on the triangle split)."""
        gx, gy = self.tri_gradient
        gx, gy = gx[:, self.interior], gy[:, self.interior]
        mat = self.tri_area * (gx.T @ gx + gy.T @ gy)
        return (0.5 * (mat + mat.T)).tocsr()

    def inner(self, f, g) -> float:
        f, g = np.asarray(f), np.asarray(g)
        if f.shape != g.shape or f.shape[-2:] != self.shape:
            raise ValueError(f"shape mismatch: {f.shape} vs {g.shape} on grid {self.shape}")
        return float(np.sum(self.weights * f * g))

    def integral(self, f) -> float:
        return float(np.sum(self.weights * np.asarray(f)))

    def interpolate(self, f: np.ndarray, xq: np.ndarray, yq: np.ndarray) -> np.ndarray:
        """Bilinear interpolation of node values at arbitrary points inside Omega."""
        return _bilinear(self.x, self.y, f, xq, yq)


def _bilinear(xs, ys, vals, xq, yq):
    xq = np.clip(np.asarray(xq, dtype=float), xs[0], xs[-1])
    yq = np.clip(np.asarray(yq, dtype=float), ys[0], ys[-1])
    i = np.clip(np.searchsorted(xs, xq, side="right") - 1, 0, len(xs) - 2)
    j = np.clip(np.searchsorted(ys, yq, side="right") - 1, 0, len(ys) - 2)
    tx = (xq - xs[i]) / (xs[i + 1] - xs[i])
    ty = (yq - ys[j]) / (ys[j + 1] - ys[j])
    return (
        (1 - tx) * (1 - ty) * vals[i, j]
        + tx * (1 - ty) * vals[i + 1, j]
        + (1 - tx) * ty * vals[i, j + 1]
        + tx * ty * vals[i + 1, j + 1]
    )


# --------------------------------------------------------------------------- public operations


def inner_product(f, g, region: str, grid) -> float:
    """L2 inner product on Omega (trapezoid) or on the fluid box (per-face midpoint)."""
    f, g = np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape}")
    if region == "omega":
        if f.ndim == 3:  # vector field on the shell
            return float(sum(grid.inner(a, b) for a, b in zip(f, g)))
        return grid.inner(f, g)
    if region == "fluid":
        if f.shape != (grid.size,):
            raise ValueError(f"fluid field must have length {grid.size}, got {f.shape}")
        return float(np.sum(grid.mass_weights * f * g))
    raise ValueError(f"unknown region {region!r}")


def shell_operator(kind: str, f: np.ndarray, grid: ShellGrid, alpha: float = 0.0):
    """Apply a discrete shell operator to a node field that vanishes on the boundary ring."""
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match shell grid {grid.shape}")
    if kind in ("laplacian", "malpha", "biharmonic"):
        ring = f.copy()
        ring[grid.interior_mask] = 0.0
        if np.any(ring != 0.0):
            raise ValueError(f"{kind} needs a field vanishing on the boundary ring")
    fi = grid.restrict(f)
    if kind == "gradient":
        gx, gy = grid.tri_gradient
        return gx @ f.ravel(), gy @ f.ravel()
    if kind == "laplacian":
        return grid.embed(grid.laplacian_dirichlet @ fi)
    if kind == "malpha":
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        return grid.embed(fi - alpha * (grid.laplacian_dirichlet @ fi))
    if kind == "biharmonic":
        return grid.embed((grid.biharmonic_form @ fi) / (grid.hx * grid.hy))
    raise ValueError(f"unknown shell operator {kind!r}")


def laplacian_clamped_field(f: np.ndarray, grid: ShellGrid) -> np.ndarray:
    """Laplacian of a clamped field at every node (ghost reflection on the ring)."""
    return (grid.laplacian_clamped @ grid.restrict(f)).reshape(grid.shape)


@dataclass(frozen=True)
class MeanCarrier:
    e: np.ndarray
    mass: float


def mean_carrier(grid: ShellGrid) -> MeanCarrier:
    """Solve the clamped problem ``Lap^2 e = 1`` on interior nodes by direct factorization."""
    strong = grid.biharmonic_form / (grid.hx * grid.hy)
    e_int = spla.spsolve(strong.tocsc(), np.ones(grid.ninterior))
    if not np.all(np.isfinite(e_int)):
        raise RuntimeError("clamped biharmonic system is singular")
    e = grid.embed(e_int)
    mass = grid.integral(e)
    if mass <= 0:
        raise RuntimeError(f"mean carrier has non-positive mass {mass}")
    return MeanCarrier(e=e, mass=mass)


def project_mean_zero(w: np.ndarray, mc: MeanCarrier, grid: ShellGrid) -> np.ndarray:
    """``w - (int w / int e) e``: the (Lap, Lap)-orthogonal projection onto zero-mean fields."""
    w = np.asarray(w, dtype=float)
    return w - (grid.integral(w) / mc.mass) * mc.e


def mean_zero_basis(grid: ShellGrid) -> np.ndarray:
    """Orthonormal basis (interior x (interior-1)) of interior fields with zero trapezoid mean."""
    wts = grid.restrict(grid.weights)[None, :]
    return sla.null_space(wts)


@dataclass
class Grids:
    """Fluid and shell grids sharing the horizontal extents of one box."""

    domain: BoxDomain
    shell_nx: int
    shell_ny: int
    fluid: FluidGrid = field(init=False)
    shell: ShellGrid = field(init=False)

    def __post_init__(self):
        d = self.domain
        if self.shell_nx % d.nx or self.shell_ny % d.ny:
            raise ValueError(
                f"shell grid {self.shell_nx}x{self.shell_ny} must refine the fluid grid {d.nx}x{d.ny}"
            )
        self.fluid = FluidGrid(d)
        self.shell = ShellGrid(d.lx, d.ly, self.shell_nx, self.shell_ny)
