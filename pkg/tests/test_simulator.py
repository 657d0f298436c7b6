import numpy as np
import pytest
from scipy.linalg import solve_discrete_lyapunov

from netlavarx import (
    DegenerateGeometry,
    InvalidInput,
    NetworkTopology,
    UnstableSystem,
    generate_system,
    oblique_projector,
    principal_angles,
    simulate,
)
from netlavarx.simulate import GroundTruthSystem, companion_matrix, spectral_radius

from conftest import three_node_topology


def assemble_companion_independently(system):
    """Companion matrix rebuilt from scratch (oracle for the generator)."""
    topo = system.topology
    L = sum(topo.n_dlvs)
    s = topo.max_lag
    offs = np.concatenate([[0], np.cumsum(topo.n_dlvs)])
    top = np.zeros((L, L * s))
    for i in range(topo.n_nodes):
        for h in range(topo.ar_orders[i]):
            top[offs[i] : offs[i + 1], h * L + offs[i] : h * L + offs[i + 1]] = system.ar_blocks[i][h]
            for j in topo.neighbors[i]:
                top[offs[i] : offs[i + 1], h * L + offs[j] : h * L + offs[j + 1]] = system.cross_blocks[i][j][h]
    comp = np.zeros((L * s, L * s))
    comp[:L] = top
    comp[L:, : L * (s - 1)] = np.eye(L * (s - 1))
    return comp


class TestGenerateSystem:
    def test_deterministic(self):
        topo = three_node_topology()
        a = generate_system(topo, seed=1, spectral_target=0.9)
        b = generate_system(topo, seed=1, spectral_target=0.9)
        for i in range(3):
            assert np.array_equal(a.loadings[i], b.loadings[i])
            assert np.array_equal(a.static_loadings[i], b.static_loadings[i])
            for h in range(2):
                assert np.array_equal(a.ar_blocks[i][h], b.ar_blocks[i][h])

    def test_spectral_target_hit(self):
        topo = three_node_topology()
        system = generate_system(topo, seed=2, spectral_target=0.95)
        comp = assemble_companion_independently(system)
        radius = np.abs(np.linalg.eigvals(comp)).max()
        assert abs(radius - 0.95) <= 1e-6

    def test_full_latent_dimension_drops_static_part(self):
        topo = NetworkTopology.fully_connected(["a", "b"], [3, 2], [0, 0], [3, 2], [1, 1])
        system = generate_system(topo, seed=3, spectral_target=0.8)
        for i in range(2):
            assert system.static_loadings[i].shape[1] == 0
        traj = simulate(system, 100, seed=4)
        for i in range(2):
            # outputs decompose exactly with no static term
            np.testing.assert_allclose(traj.outputs[i], traj.dlvs[i] @ system.loadings[i].T, atol=1e-12)

    def test_rejects_bad_target(self):
        with pytest.raises(InvalidInput):
            generate_system(three_node_topology(), seed=0, spectral_target=1.5)


class TestSimulate:
    def test_zero_everything_is_fixed_point(self):
        topo = three_node_topology()
        system = generate_system(topo, seed=5, spectral_target=0.9, dlv_noise_std=0.0, static_noise_std=0.0)
        traj = simulate(system, 50, inputs="zero", seed=6)
        for i in range(3):
            np.testing.assert_array_equal(traj.outputs[i], np.zeros_like(traj.outputs[i]))

    def test_decoupled_when_cross_terms_zero(self):
        topo = three_node_topology()
        base = generate_system(topo, seed=7, spectral_target=0.9)
        zero_cross = GroundTruthSystem(
            topology=base.topology,
            loadings=base.loadings,
            static_loadings=base.static_loadings,
            ar_blocks=base.ar_blocks,
            input_blocks=base.input_blocks,
            cross_blocks=tuple({j: tuple(np.zeros_like(b) for b in blocks) for j, blocks in node.items()}
                               for node in base.cross_blocks),
            dlv_noise_std=base.dlv_noise_std,
            static_noise_std=base.static_noise_std,
        )
        t1 = simulate(zero_cross, 200, seed=[11, 22, 33])
        t2 = simulate(zero_cross, 200, seed=[11, 99, 77])  # only neighbor seeds change
        assert np.array_equal(t1.dlvs[0], t2.dlvs[0])
        assert not np.array_equal(t1.dlvs[1], t2.dlvs[1])

    def test_coupled_nodes_react_to_neighbor_seeds(self):
        topo = three_node_topology()
        system = generate_system(topo, seed=8, spectral_target=0.9)
        t1 = simulate(system, 200, seed=[11, 22, 33])
        t2 = simulate(system, 200, seed=[11, 99, 77])
        assert not np.array_equal(t1.dlvs[0], t2.dlvs[0])

    def test_deterministic_trajectory(self):
        topo = three_node_topology()
        system = generate_system(topo, seed=9, spectral_target=0.9)
        t1 = simulate(system, 300, seed=13)
        t2 = simulate(system, 300, seed=13)
        for i in range(3):
            assert np.array_equal(t1.outputs[i], t2.outputs[i])

    def test_output_decomposition_exact(self):
        topo = three_node_topology()
        system = generate_system(topo, seed=10, spectral_target=0.9)
        traj = simulate(system, 400, seed=21)
        for i in range(3):
            residual = traj.outputs[i] - traj.dlvs[i] @ system.loadings[i].T
            # what remains is exactly the static part: it lies in range(static loadings)
            proj = oblique_projector(system.loadings[i], system.static_loadings[i])
            np.testing.assert_allclose(traj.dlvs[i], traj.outputs[i] @ proj, atol=1e-9)
            assert residual.shape == traj.outputs[i].shape

    def test_unstable_system_rejected(self):
        topo = NetworkTopology(("a",), (2,), (0,), (1,), (1,), ((),))
        system = generate_system(topo, seed=11, spectral_target=0.5)
        unstable = GroundTruthSystem(
            topology=system.topology,
            loadings=system.loadings,
            static_loadings=system.static_loadings,
            ar_blocks=((np.array([[1.2]]),),),
            input_blocks=system.input_blocks,
            cross_blocks=system.cross_blocks,
            dlv_noise_std=system.dlv_noise_std,
            static_noise_std=system.static_noise_std,
        )
        with pytest.raises(UnstableSystem):
            simulate(unstable, 100, seed=0)

    @pytest.mark.slow
    def test_stationary_variance_matches_lyapunov(self):
        topo = NetworkTopology.fully_connected(["a", "b"], [4, 3], [0, 0], [2, 1], [2, 2])
        system = generate_system(topo, seed=3, spectral_target=0.9)
        comp = companion_matrix(system)
        L = sum(topo.n_dlvs)
        noise = np.zeros_like(comp)
        pos = 0
        for i in range(topo.n_nodes):
            li = topo.n_dlvs[i]
            noise[pos : pos + li, pos : pos + li] = np.eye(li) * system.dlv_noise_std[i] ** 2
            pos += li
        expected = np.diag(solve_discrete_lyapunov(comp, noise))[:L]
        traj = simulate(system, 100_000, inputs="zero", seed=77)
        observed = np.hstack(traj.dlvs).var(axis=0)
        assert np.all(np.abs(observed - expected) / expected < 0.10)


class TestObliqueProjector:
    def test_orthogonal_case(self):
        P = np.array([[1.0], [0.0]])
        Pbar = np.array([[0.0], [1.0]])
        R = oblique_projector(P, Pbar)
        np.testing.assert_allclose(R, P, atol=1e-14)
        np.testing.assert_allclose(P @ R.T, np.diag([1.0, 0.0]), atol=1e-14)

    def test_hand_case(self):
        P = np.array([[1.0], [1.0]])
        Pbar = np.array([[0.0], [1.0]])
        R = oblique_projector(P, Pbar)
        np.testing.assert_allclose(R, [[1.0], [0.0]], atol=1e-12)
        proj = P @ R.T
        np.testing.assert_allclose(proj, [[1.0, 0.0], [1.0, 0.0]], atol=1e-12)
        np.testing.assert_allclose(proj @ proj, proj, atol=1e-12)

    def test_recovers_latent_part(self):
        rng = np.random.default_rng(5)
        P = rng.standard_normal((6, 2))
        Pbar = rng.standard_normal((6, 4))
        R = oblique_projector(P, Pbar)
        v = rng.standard_normal((10, 2))
        w = rng.standard_normal((10, 4))
        y = v @ P.T + w @ Pbar.T
        np.testing.assert_allclose(y @ R, v, atol=1e-10)

    def test_identities(self):
        rng = np.random.default_rng(6)
        P = rng.standard_normal((5, 2))
        Pbar = rng.standard_normal((5, 3))
        R = oblique_projector(P, Pbar)
        np.testing.assert_allclose(R.T @ P, np.eye(2), atol=1e-10)
        np.testing.assert_allclose(R.T @ Pbar, np.zeros((2, 3)), atol=1e-10)
        proj = P @ R.T
        np.testing.assert_allclose(proj @ proj, proj, atol=1e-10)

    def test_degenerate_geometry(self):
        P = np.array([[1.0], [0.0]])
        Pbar = np.array([[1.0], [0.0]])  # [P Pbar] singular
        with pytest.raises(DegenerateGeometry):
            oblique_projector(P, Pbar)


class TestPrincipalAngles:
    def test_identical(self):
        a = np.random.default_rng(7).standard_normal((5, 2))
        np.testing.assert_allclose(principal_angles(a, a), [0.0, 0.0], atol=1e-6)

    def test_orthogonal(self):
        a = np.array([[1.0], [0.0]])
        b = np.array([[0.0], [1.0]])
        np.testing.assert_allclose(principal_angles(a, b), [90.0], atol=1e-10)

    def test_basis_change_invariance(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((7, 3))
        m = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        angles = principal_angles(a, a @ m)
        assert angles.max() < 1e-8

    def test_ascending(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((8, 3))
        b = rng.standard_normal((8, 3))
        angles = principal_angles(a, b)
        assert np.all(np.diff(angles) >= -1e-12)
        assert np.all((angles >= 0) & (angles <= 90))

    def test_rank_deficient_rejected(self):
        a = np.ones((4, 2))
        b = np.random.default_rng(10).standard_normal((4, 2))
        with pytest.raises(InvalidInput):
            principal_angles(a, b)

    def test_against_scipy(self):
        from scipy.linalg import subspace_angles

        rng = np.random.default_rng(11)
        for _ in range(10):
            a = rng.standard_normal((9, 3))
            b = rng.standard_normal((9, 3))
            mine = principal_angles(a, b)
            reference = np.degrees(np.sort(subspace_angles(a, b)))
            np.testing.assert_allclose(mine, reference, atol=1e-9)
