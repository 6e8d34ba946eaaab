"""Independent reference implementations, assembled entry by entry with explicit loops.

Nothing here calls the package's operator builders; only the flat index layout
of the fluid vector is shared.
"""

import numpy as np
import scipy.linalg as sla


def mac_divergence(fl):
    d = fl.domain
    dx, dy, dz = d.spacing
    iu, iv, iw = fl.index("u"), fl.index("v"), fl.index("w")
    D = np.zeros((d.nx * d.ny * d.nz, fl.size))
    c = 0
    for i in range(d.nx):
        for j in range(d.ny):
            for k in range(d.nz):
                D[c, iu[i + 1, j, k]] += 1 / dx
                D[c, iu[i, j, k]] -= 1 / dx
                D[c, iv[i, j + 1, k]] += 1 / dy
                D[c, iv[i, j, k]] -= 1 / dy
                D[c, iw[i, j, k + 1]] += 1 / dz
                D[c, iw[i, j, k]] -= 1 / dz
                c += 1
    return D


def mac_vector_laplacian(fl):
    """-Lap on interior faces, zero velocity on every face of the box (ghost reflection)."""
    d = fl.domain
    h = d.spacing
    n = (d.nx, d.ny, d.nz)
    A = np.zeros((fl.size, fl.size))
    for comp, key in enumerate(("u", "v", "w")):
        idx = fl.index(key)
        shp = idx.shape
        for pos in np.ndindex(*shp):
            if pos[comp] == 0 or pos[comp] == shp[comp] - 1:
                continue  # wall-normal face on the boundary: not an unknown
            row = idx[pos]
            for ax in range(3):
                A[row, row] += 2 / h[ax] ** 2
                for step in (-1, 1):
                    nb = list(pos)
                    nb[ax] += step
                    if ax == comp:
                        if 0 < nb[ax] < shp[ax] - 1:
                            A[row, idx[tuple(nb)]] -= 1 / h[ax] ** 2
                    elif 0 <= nb[ax] < n[ax]:
                        A[row, idx[tuple(nb)]] -= 1 / h[ax] ** 2
                    else:
                        A[row, row] += 1 / h[ax] ** 2  # ghost = -value
    return A


def stokes_eigenvalues(fl, m):
    """Lowest m eigenvalues of -Lap on the discretely solenoidal interior fields."""
    I = fl.interior_dofs
    A = mac_vector_laplacian(fl)[np.ix_(I, I)]
    D = mac_divergence(fl)[:, I]
    U, s, Vt = np.linalg.svd(D)
    rank = int(np.sum(s > 1e-10 * s[0]))
    Z = Vt[rank:].T
    return sla.eigh(Z.T @ A @ Z, eigvals_only=True, subset_by_index=[0, m - 1])


def _interior_numbering(nx, ny):
    num = -np.ones((nx + 1, ny + 1), dtype=int)
    c = 0
    for i in range(1, nx):
        for j in range(1, ny):
            num[i, j] = c
            c += 1
    return num, c


def biharmonic_13pt(nx, ny, hx, hy):
    """Strong clamped Lap^2 on interior nodes: Lap applied twice, mirror ghosts across the ring."""
    num, N = _interior_numbering(nx, ny)

    def lap_coeffs(i, j):
        # Lap at node (i, j) as {interior node: coeff}; w = 0 on the ring, mirror ghosts outside
        out = {}

        def add(p, q, c):
            if p < 0:
                p = -p
            if p > nx:
                p = 2 * nx - p
            if q < 0:
                q = -q
            if q > ny:
                q = 2 * ny - q
            if num[p, q] >= 0:
                out[num[p, q]] = out.get(num[p, q], 0.0) + c

        add(i, j, -2 / hx**2 - 2 / hy**2)
        add(i - 1, j, 1 / hx**2)
        add(i + 1, j, 1 / hx**2)
        add(i, j - 1, 1 / hy**2)
        add(i, j + 1, 1 / hy**2)
        return out

    B = np.zeros((N, N))
    for i in range(1, nx):
        for j in range(1, ny):
            r = num[i, j]
            for (p, q, c) in (
                (i, j, -2 / hx**2 - 2 / hy**2),
                (i - 1, j, 1 / hx**2),
                (i + 1, j, 1 / hx**2),
                (i, j - 1, 1 / hy**2),
                (i, j + 1, 1 / hy**2),
            ):
                for col, cc in lap_coeffs(p, q).items():
                    B[r, col] += c * cc
    return B


def dirichlet_laplacian_5pt(nx, ny, hx, hy):
    num, N = _interior_numbering(nx, ny)
    L = np.zeros((N, N))
    for i in range(1, nx):
        for j in range(1, ny):
            r = num[i, j]
            L[r, r] = -2 / hx**2 - 2 / hy**2
            for p, q, c in ((i - 1, j, hx), (i + 1, j, hx), (i, j - 1, hy), (i, j + 1, hy)):
                if num[p, q] >= 0:
                    L[r, num[p, q]] = 1 / c**2
    return L


def transversal_eigenvalues(nx, ny, hx, hy, alpha, n):
    """Clamped, zero-mean modes of Lap^2 xi = k (1 - alpha Lap) xi + const."""
    B = biharmonic_13pt(nx, ny, hx, hy)
    N = B.shape[0]
    Ma = np.eye(N) - alpha * dirichlet_laplacian_5pt(nx, ny, hx, hy)
    # zero-sum subspace spanned by differences e_i - e_{N-1}
    Z = np.zeros((N, N - 1))
    for i in range(N - 1):
        Z[i, i] = 1.0
        Z[N - 1, i] = -1.0
    Z = np.linalg.qr(Z)[0]
    A = Z.T @ B @ Z
    M = Z.T @ Ma @ Z
    return sla.eigh(0.5 * (A + A.T), 0.5 * (M + M.T), eigvals_only=True, subset_by_index=[0, n - 1])


def inplane_eigenvalues(nx, ny, hx, hy, mu, n):
    """P1 gradient / divergence form sum |grad u_i|^2 + lam (div u)^2 on right-triangle splits, L2 lumped mass."""
    lam = (1 + mu) / (1 - mu)
    num, N = _interior_numbering(nx, ny)
    K = np.zeros((2 * N, 2 * N))
    area = 0.5 * hx * hy
    tris = []
    for i in range(nx):
        for j in range(ny):
            tris.append([(i, j), (i + 1, j), (i, j + 1)])
            tris.append([(i + 1, j + 1), (i, j + 1), (i + 1, j)])
    for tri in tris:
        P = np.array([[p * hx, q * hy] for p, q in tri])
        # gradients of barycentric functions
        T = np.array([[1, *P[0]], [1, *P[1]], [1, *P[2]]])
        G = np.linalg.inv(T)[1:]  # (2, 3): column a = grad phi_a
        for a in range(3):
            ra = num[tri[a]]
            if ra < 0:
                continue
            for b in range(3):
                rb = num[tri[b]]
                if rb < 0:
                    continue
                gg = G[:, a] @ G[:, b]
                for c in range(2):
                    K[c * N + ra, c * N + rb] += area * gg
                for c in range(2):
                    for e in range(2):
                        K[c * N + ra, e * N + rb] += area * lam * G[c, a] * G[e, b]
    return sla.eigh(K, hx * hy * np.eye(2 * N), eigvals_only=True, subset_by_index=[0, n - 1])
