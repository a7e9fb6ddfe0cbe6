"""Desk-scale dataset generators.

Generators are pure functions of (arguments, seed). Per-sample
independence comes from deriving the i-th sample's seed as
splitmix64(seed XOR i), so samples can be produced in any order or in
parallel with identical output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64(x):
    """SplitMix64 finalizer; maps a 64-bit seed to a well-mixed 64-bit value."""
    x = (int(x) + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def sample_seed(seed, index):
    return splitmix64((int(seed) & _MASK64) ^ (int(index) & _MASK64))


@dataclass
class Mesh1D:
    """Uniform grid on the periodic unit interval; points x_j = j/n."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"mesh needs n >= 2 points, got {self.n}")

    @property
    def points(self):
        return np.arange(self.n) / self.n


@dataclass
class Mesh2D:
    """Uniform grid on the unit square, nx columns by ny rows, endpoints included."""

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"mesh needs nx, ny >= 3, got ({self.nx}, {self.ny})")

    @property
    def xs(self):
        return np.linspace(0.0, 1.0, self.nx)

    @property
    def ys(self):
        return np.linspace(0.0, 1.0, self.ny)

    @property
    def n_boundary(self):
        return 2 * self.nx + 2 * self.ny - 4


@dataclass
class Dataset:
    """Paired discretized input/output functions with provenance."""

    inputs: np.ndarray        # (N, d_in, n_pts_u)
    outputs: np.ndarray       # (N, d_out, n_pts_v)
    generator: str
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ValueError(
                f"inputs ({self.inputs.shape[0]}) and outputs "
                f"({self.outputs.shape[0]}) disagree on sample count"
            )

    @property
    def n_samples(self):
        return self.inputs.shape[0]


def _grf_modes_1d(n):
    """Real Fourier design matrix (modes x n) and per-mode standard deviations
    for the covariance operator (-Laplacian + 9)^(-2) on the unit torus.

    Modes are {1, sqrt(2) cos(2 pi k x), sqrt(2) sin(2 pi k x)} for
    k = 1 .. n/2 - 1 (truncated below Nyquist); the coefficient of mode k
    has standard deviation ((2 pi k)^2 + 9)^(-1).
    """
    x = np.arange(n) / n
    rows = [np.ones(n)]
    stds = [1.0 / 9.0]
    for k in range(1, n // 2):
        lam = 1.0 / ((2.0 * np.pi * k) ** 2 + 9.0)
        rows.append(np.sqrt(2.0) * np.cos(2.0 * np.pi * k * x))
        stds.append(lam)
        rows.append(np.sqrt(2.0) * np.sin(2.0 * np.pi * k * x))
        stds.append(lam)
    return np.array(rows), np.array(stds)


def sample_grf_periodic_1d(mesh, n_samples, seed):
    """Sample mean-zero periodic Gaussian random fields with covariance
    (-Laplacian + 9)^(-2), returned as an (n_samples, n) array."""
    if mesh.n % 2 != 0:
        raise ValueError(f"mesh size must be even for spectral synthesis, got {mesh.n}")
    phi, stds = _grf_modes_1d(mesh.n)
    out = np.empty((n_samples, mesh.n))
    for i in range(n_samples):
        rng = np.random.default_rng(sample_seed(seed, i))
        coeffs = rng.standard_normal(stds.size) * stds
        out[i] = coeffs @ phi
    return out


def advection_dataset(mesh, n_samples, seed):
    """Constant-speed periodic transport of sign-valued initial data.

    Input: u0 = sign(xi) with xi a GRF draw and sign(0) := +1. Output:
    the exact solution after half a period, i.e. the input rotated by
    n/2 grid indices.
    """
    if mesh.n % 2 != 0:
        raise ValueError(f"mesh size must be divisible by 2, got {mesh.n}")
    fields = sample_grf_periodic_1d(mesh, n_samples, seed)
    u0 = np.where(fields >= 0.0, 1.0, -1.0)
    ut = np.roll(u0, mesh.n // 2, axis=1)
    return Dataset(
        inputs=u0[:, None, :],
        outputs=ut[:, None, :],
        generator="advection",
        seed=seed,
        meta={"mesh_n": mesh.n, "speed": 1.0, "time": 0.5},
    )


def _rbf_factor(n_points, lengthscale):
    """Symmetric square root of the RBF kernel matrix on uniform points in
    [0, 1], via eigendecomposition with eigenvalues floored at 1e-12."""
    x = np.linspace(0.0, 1.0, n_points)
    diff = x[:, None] - x[None, :]
    kernel = np.exp(-(diff * diff) / (2.0 * lengthscale * lengthscale))
    w, vecs = np.linalg.eigh(kernel)
    w = np.maximum(w, 1e-12)
    return vecs * np.sqrt(w)


def sample_gp_rbf_1d(n_points, lengthscale, n_samples, seed):
    """Zero-mean Gaussian process draws with RBF covariance on uniform
    points in [0, 1]; shape (n_samples, n_points)."""
    if n_points < 2:
        raise ValueError(f"need at least 2 points, got {n_points}")
    factor = _rbf_factor(n_points, lengthscale)
    out = np.empty((n_samples, n_points))
    for i in range(n_samples):
        rng = np.random.default_rng(sample_seed(seed, i))
        out[i] = factor @ rng.standard_normal(n_points)
    return out


def _poisson_matrix(mesh):
    """Sparse 5-point operator for -Laplacian on interior nodes (Dirichlet)."""
    nx, ny = mesh.nx, mesh.ny
    hx = 1.0 / (nx - 1)
    hy = 1.0 / (ny - 1)
    nix, niy = nx - 2, ny - 2
    n_int = nix * niy

    def idx(i, j):  # i: x index 1..nx-2, j: y index 1..ny-2
        return (j - 1) * nix + (i - 1)

    rows, cols, vals = [], [], []
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            r = idx(i, j)
            rows.append(r); cols.append(r)
            vals.append(2.0 / hx**2 + 2.0 / hy**2)
            for di, dj, w in ((1, 0, hx), (-1, 0, hx), (0, 1, hy), (0, -1, hy)):
                ii, jj = i + di, j + dj
                if 1 <= ii <= nx - 2 and 1 <= jj <= ny - 2:
                    rows.append(r); cols.append(idx(ii, jj))
                    vals.append(-1.0 / w**2)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_int, n_int))


def solve_poisson_dirichlet(mesh, boundary_grid, source=-1.0, residual_tol=1e-10):
    """Solve -Laplacian(h) = source on the unit square with Dirichlet data.

    boundary_grid is an (ny, nx) array whose edge entries carry the
    boundary values (interior entries ignored). Returns the full (ny, nx)
    field; raises on residual above ``residual_tol`` (relative).
    """
    nx, ny = mesh.nx, mesh.ny
    hx = 1.0 / (nx - 1)
    hy = 1.0 / (ny - 1)
    a = _poisson_matrix(mesh)
    b = np.full((ny - 2, nx - 2), float(source))
    # boundary contributions move to the right-hand side
    b[0, :] += boundary_grid[0, 1:nx - 1] / hy**2
    b[-1, :] += boundary_grid[ny - 1, 1:nx - 1] / hy**2
    b[:, 0] += boundary_grid[1:ny - 1, 0] / hx**2
    b[:, -1] += boundary_grid[1:ny - 1, nx - 1] / hx**2
    rhs = b.reshape(-1)
    interior = spla.spsolve(a.tocsc(), rhs)
    residual = np.linalg.norm(a @ interior - rhs)
    scale = max(np.linalg.norm(rhs), 1.0)
    if residual > residual_tol * scale:
        raise RuntimeError(
            f"Poisson solve residual {residual:.3e} exceeds tolerance "
            f"{residual_tol:.1e} (rhs norm {scale:.3e})"
        )
    field = boundary_grid.copy()
    field[1:ny - 1, 1:nx - 1] = interior.reshape(ny - 2, nx - 2)
    return field


def boundary_walk_indices(mesh):
    """(row, col) indices of the boundary walk: bottom left-to-right, right
    upward, top right-to-left, left downward; each corner visited once."""
    nx, ny = mesh.nx, mesh.ny
    walk = []
    walk.extend((0, i) for i in range(nx))                      # bottom
    walk.extend((j, nx - 1) for j in range(1, ny))              # right
    walk.extend((ny - 1, i) for i in range(nx - 2, -1, -1))     # top
    walk.extend((j, 0) for j in range(ny - 2, 0, -1))           # left
    return walk


def _assemble_boundary(mesh, traces):
    """Place four side traces (bottom, right, top, left) on an (ny, nx) grid,
    averaging the two adjacent draws at each corner."""
    nx, ny = mesh.nx, mesh.ny
    bottom, right, top, left = traces
    grid = np.zeros((ny, nx))
    grid[0, :] = bottom
    grid[:, nx - 1] = right
    grid[ny - 1, :] = top
    grid[:, 0] = left
    grid[0, 0] = 0.5 * (bottom[0] + left[0])
    grid[0, nx - 1] = 0.5 * (bottom[nx - 1] + right[0])
    grid[ny - 1, nx - 1] = 0.5 * (right[ny - 1] + top[nx - 1])
    grid[ny - 1, 0] = 0.5 * (top[0] + left[ny - 1])
    return grid


def poisson_dataset(mesh, n_samples, seed, lengthscale=0.2):
    """Dirichlet data from four RBF Gaussian-process traces mapped to the
    interior field of -Laplacian(h) = -1 on the unit square.

    Input: boundary values along the walk of :func:`boundary_walk_indices`
    (2nx + 2ny - 4 points). Output: the full solution field, flattened
    row-major as (ny, nx).
    """
    nx, ny = mesh.nx, mesh.ny
    factor_x = _rbf_factor(nx, lengthscale)
    factor_y = _rbf_factor(ny, lengthscale)
    walk = boundary_walk_indices(mesh)
    walk_rows = np.array([w[0] for w in walk])
    walk_cols = np.array([w[1] for w in walk])
    inputs = np.empty((n_samples, 1, mesh.n_boundary))
    outputs = np.empty((n_samples, 1, nx * ny))
    for i in range(n_samples):
        rng = np.random.default_rng(sample_seed(seed, i))
        bottom = factor_x @ rng.standard_normal(nx)
        right = factor_y @ rng.standard_normal(ny)
        top = factor_x @ rng.standard_normal(nx)
        left = factor_y @ rng.standard_normal(ny)
        grid = _assemble_boundary(mesh, (bottom, right, top, left))
        field = solve_poisson_dirichlet(mesh, grid, source=-1.0)
        inputs[i, 0] = grid[walk_rows, walk_cols]
        outputs[i, 0] = field.reshape(-1)
    return Dataset(
        inputs=inputs,
        outputs=outputs,
        generator="poisson",
        seed=seed,
        meta={"nx": nx, "ny": ny, "lengthscale": lengthscale, "source": -1.0},
    )


def linear_operator_dataset(n_in, n_out, rank, n_samples, noise_std, seed):
    """Gaussian inputs pushed through a fixed random rank-``rank`` matrix,
    optionally with additive noise; the matrix is stored in meta['matrix']."""
    if rank > min(n_in, n_out):
        raise ValueError(f"rank {rank} exceeds min({n_in}, {n_out})")
    rng = np.random.default_rng(splitmix64(int(seed) ^ 0xA5A5A5A5A5A5A5A5))
    u = rng.standard_normal((n_out, rank))
    v = rng.standard_normal((n_in, rank))
    matrix = (u @ v.T) / np.sqrt(rank)
    inputs = np.empty((n_samples, 1, n_in))
    outputs = np.empty((n_samples, 1, n_out))
    for i in range(n_samples):
        srng = np.random.default_rng(sample_seed(seed, i))
        f = srng.standard_normal(n_in)
        g = matrix @ f
        if noise_std > 0.0:
            g = g + noise_std * srng.standard_normal(n_out)
        inputs[i, 0] = f
        outputs[i, 0] = g
    return Dataset(
        inputs=inputs,
        outputs=outputs,
        generator="linear",
        seed=seed,
        meta={"matrix": matrix, "rank": rank, "noise_std": noise_std},
    )
