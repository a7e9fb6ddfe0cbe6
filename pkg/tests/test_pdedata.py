import numpy as np
import pytest

from gitnet import pdedata


class TestSeeding:
    def test_splitmix64_reference_values(self):
        # first outputs of the SplitMix64 sequence seeded 0 and 1
        assert pdedata.splitmix64(0) == 0xE220A8397B1DCDAF
        assert pdedata.splitmix64(1) == 0x910A2DEC89025CC1
        # wrap-around stays in 64 bits
        assert 0 <= pdedata.splitmix64(0xFFFFFFFFFFFFFFFF) < 2**64

    def test_sample_seed_is_xor_then_mix(self):
        assert pdedata.sample_seed(42, 7) == pdedata.splitmix64(42 ^ 7)

    def test_sample_seeds_distinct(self):
        seeds = {pdedata.sample_seed(123, i) for i in range(1000)}
        assert len(seeds) == 1000

    def test_prefix_stability(self):
        # sample i is the same regardless of how many samples are requested
        mesh = pdedata.Mesh1D(32)
        few = pdedata.sample_grf_periodic_1d(mesh, 3, seed=5)
        many = pdedata.sample_grf_periodic_1d(mesh, 10, seed=5)
        np.testing.assert_array_equal(many[:3], few)


class TestMeshes:
    def test_mesh1d_points(self):
        mesh = pdedata.Mesh1D(4)
        np.testing.assert_array_equal(mesh.points, [0.0, 0.25, 0.5, 0.75])

    def test_mesh2d_counts(self):
        mesh = pdedata.Mesh2D(5, 4)
        assert mesh.n_boundary == 2 * 5 + 2 * 4 - 4
        assert mesh.xs[0] == 0.0 and mesh.xs[-1] == 1.0
        assert len(mesh.ys) == 4

    def test_validation(self):
        with pytest.raises(ValueError):
            pdedata.Mesh1D(1)
        with pytest.raises(ValueError):
            pdedata.Mesh2D(2, 5)


class TestGrf:
    def test_shapes_and_determinism(self):
        mesh = pdedata.Mesh1D(64)
        a = pdedata.sample_grf_periodic_1d(mesh, 5, seed=1)
        b = pdedata.sample_grf_periodic_1d(mesh, 5, seed=1)
        assert a.shape == (5, 64)
        np.testing.assert_array_equal(a, b)
        c = pdedata.sample_grf_periodic_1d(mesh, 5, seed=2)
        assert not np.array_equal(a, c)

    def test_odd_mesh_rejected(self):
        with pytest.raises(ValueError):
            pdedata.sample_grf_periodic_1d(pdedata.Mesh1D(33), 1, seed=0)

    def test_mode_scaling(self):
        # projecting draws onto Fourier modes recovers the spectral decay
        mesh = pdedata.Mesh1D(64)
        n_draws = 4000
        fields = pdedata.sample_grf_periodic_1d(mesh, n_draws, seed=3)
        x = mesh.points
        for k, expected_std in [(1, 1.0 / ((2 * np.pi) ** 2 + 9.0)),
                                (4, 1.0 / ((8 * np.pi) ** 2 + 9.0))]:
            # modes are orthonormal in (1/n) sum f g, so this recovers coefficients
            mode = np.sqrt(2.0) * np.cos(2 * np.pi * k * x)
            coeffs = fields @ mode / mesh.n
            var = np.var(coeffs)
            rel_se = np.sqrt(2.0 / n_draws)
            assert abs(var - expected_std**2) < 4 * rel_se * expected_std**2

    def test_field_is_smooth(self):
        # spectral decay ~k^-2 means adjacent values barely differ
        mesh = pdedata.Mesh1D(128)
        fields = pdedata.sample_grf_periodic_1d(mesh, 10, seed=4)
        jumps = np.abs(np.diff(fields, axis=1))
        assert jumps.max() < 0.1 * np.abs(fields).max()


class TestAdvection:
    def test_inputs_are_signs(self):
        ds = pdedata.advection_dataset(pdedata.Mesh1D(32), 4, seed=0)
        assert set(np.unique(ds.inputs)) <= {-1.0, 1.0}

    def test_output_is_half_period_shift(self):
        ds = pdedata.advection_dataset(pdedata.Mesh1D(16), 3, seed=1)
        for i in range(3):
            np.testing.assert_array_equal(
                ds.outputs[i, 0], np.roll(ds.inputs[i, 0], 8))

    def test_shift_matches_exact_transport(self):
        # u(x, t) = u0(x - t) with speed 1 at t = 1/2 on points j/n:
        # value at x_j comes from x_{j - n/2}
        n = 32
        ds = pdedata.advection_dataset(pdedata.Mesh1D(n), 2, seed=2)
        u0 = ds.inputs[0, 0]
        for j in range(n):
            assert ds.outputs[0, 0, j] == u0[(j - n // 2) % n]

    def test_deterministic(self):
        a = pdedata.advection_dataset(pdedata.Mesh1D(32), 3, seed=9)
        b = pdedata.advection_dataset(pdedata.Mesh1D(32), 3, seed=9)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.outputs, b.outputs)


class TestRbfGp:
    def test_covariance_matches_kernel(self):
        n_pts, ell, n_draws = 16, 0.2, 6000
        draws = pdedata.sample_gp_rbf_1d(n_pts, ell, n_draws, seed=5)
        x = np.linspace(0.0, 1.0, n_pts)
        diff = x[:, None] - x[None, :]
        kernel = np.exp(-(diff**2) / (2 * ell**2))
        empirical = draws.T @ draws / n_draws
        assert np.abs(empirical - kernel).max() < 0.1

    def test_zero_mean(self):
        draws = pdedata.sample_gp_rbf_1d(12, 0.3, 5000, seed=6)
        assert np.abs(draws.mean(axis=0)).max() < 0.06


class TestPoisson:
    def test_manufactured_quadratic(self):
        # u = (x^2 + y^2)/4 satisfies -Laplacian(u) = -1 and the 5-point
        # stencil is exact on quadratics, so the FD solution is exact too
        mesh = pdedata.Mesh2D(9, 7)
        xx, yy = np.meshgrid(mesh.xs, mesh.ys)
        exact = (xx**2 + yy**2) / 4.0
        solved = pdedata.solve_poisson_dirichlet(mesh, exact, source=-1.0)
        np.testing.assert_allclose(solved, exact, atol=1e-11)

    def test_laplace_mean_value_bounds(self):
        # with source 0, the solution attains its extrema on the boundary
        mesh = pdedata.Mesh2D(8, 8)
        rng = np.random.default_rng(7)
        grid = np.zeros((8, 8))
        grid[0, :] = rng.uniform(-1, 1, 8)
        grid[-1, :] = rng.uniform(-1, 1, 8)
        grid[:, 0] = rng.uniform(-1, 1, 8)
        grid[:, -1] = rng.uniform(-1, 1, 8)
        solved = pdedata.solve_poisson_dirichlet(mesh, grid, source=0.0)
        interior = solved[1:-1, 1:-1]
        boundary = np.concatenate([grid[0, :], grid[-1, :], grid[:, 0], grid[:, -1]])
        assert interior.max() <= boundary.max() + 1e-12
        assert interior.min() >= boundary.min() - 1e-12

    def test_boundary_walk(self):
        mesh = pdedata.Mesh2D(4, 3)
        walk = pdedata.boundary_walk_indices(mesh)
        assert len(walk) == mesh.n_boundary
        assert len(set(walk)) == len(walk)          # corners visited once
        assert walk[0] == (0, 0)
        assert walk[3] == (0, 3)                    # end of the bottom edge
        # consecutive entries are grid neighbors, and the walk closes
        closed = walk + [walk[0]]
        for (r1, c1), (r2, c2) in zip(closed, closed[1:]):
            assert abs(r1 - r2) + abs(c1 - c2) == 1

    def test_dataset_boundary_consistency(self):
        # the stored input trace matches the boundary of the stored field
        mesh = pdedata.Mesh2D(7, 6)
        ds = pdedata.poisson_dataset(mesh, 3, seed=8)
        walk = pdedata.boundary_walk_indices(mesh)
        for i in range(3):
            field = ds.outputs[i, 0].reshape(mesh.ny, mesh.nx)
            trace = np.array([field[r, c] for r, c in walk])
            np.testing.assert_array_equal(trace, ds.inputs[i, 0])

    def test_dataset_solves_pde(self):
        # interior of each output satisfies the 5-point equation with source -1
        mesh = pdedata.Mesh2D(8, 8)
        ds = pdedata.poisson_dataset(mesh, 2, seed=9)
        h = 1.0 / 7
        for i in range(2):
            u = ds.outputs[i, 0].reshape(8, 8)
            lap = (u[1:-1, :-2] + u[1:-1, 2:] + u[:-2, 1:-1] + u[2:, 1:-1]
                   - 4 * u[1:-1, 1:-1]) / h**2
            np.testing.assert_allclose(-lap, np.full((6, 6), -1.0), atol=1e-8)

    def test_deterministic(self):
        mesh = pdedata.Mesh2D(6, 6)
        a = pdedata.poisson_dataset(mesh, 2, seed=10)
        b = pdedata.poisson_dataset(mesh, 2, seed=10)
        np.testing.assert_array_equal(a.outputs, b.outputs)


class TestLinearOperator:
    def test_exact_map_without_noise(self):
        ds = pdedata.linear_operator_dataset(12, 10, rank=4, n_samples=6,
                                             noise_std=0.0, seed=0)
        A = ds.meta["matrix"]
        assert A.shape == (10, 12)
        assert np.linalg.matrix_rank(A) == 4
        for i in range(6):
            np.testing.assert_allclose(ds.outputs[i, 0], A @ ds.inputs[i, 0],
                                       rtol=1e-13)

    def test_noise_level(self):
        ds = pdedata.linear_operator_dataset(8, 8, rank=8, n_samples=4000,
                                             noise_std=0.3, seed=1)
        A = ds.meta["matrix"]
        clean = np.einsum("ij,bj->bi", A, ds.inputs[:, 0, :])
        noise = ds.outputs[:, 0, :] - clean
        assert np.std(noise) == pytest.approx(0.3, rel=0.05)

    def test_matrix_depends_on_seed_not_index(self):
        a = pdedata.linear_operator_dataset(6, 6, 3, 2, 0.0, seed=2)
        b = pdedata.linear_operator_dataset(6, 6, 3, 5, 0.0, seed=2)
        np.testing.assert_array_equal(a.meta["matrix"], b.meta["matrix"])
        np.testing.assert_array_equal(a.inputs, b.inputs[:2])

    def test_rank_validation(self):
        with pytest.raises(ValueError):
            pdedata.linear_operator_dataset(4, 4, 5, 1, 0.0, seed=0)
