import numpy as np
import pytest

from netlavarx import NetworkTopology, TimeSeriesDataset, generate_system, simulate


def three_node_topology(n_dlvs=(2, 2, 1), ar_orders=(2, 2, 2), input_dims=(0, 0, 0)):
    return NetworkTopology.fully_connected(
        ["N1", "N2", "N3"], [8, 8, 6], list(input_dims), list(n_dlvs), list(ar_orders)
    )


def simulated_dataset(topology, seed, n_samples, inputs="zero", dlv_noise=1.0, static_noise=0.05,
                      spectral=0.9, input_std=1.0):
    system = generate_system(topology, seed=seed, spectral_target=spectral,
                             dlv_noise_std=dlv_noise, static_noise_std=static_noise)
    trajectory = simulate(system, n_samples, inputs=inputs, seed=seed + 10_000, input_std=input_std)
    dataset = TimeSeriesDataset.from_arrays(list(trajectory.outputs), list(trajectory.inputs),
                                            list(topology.node_names))
    return system, trajectory, dataset


@pytest.fixture(scope="session")
def fitted_three_node():
    """One converged reference fit shared by several test modules."""
    from netlavarx import FitSettings, fit

    topo = three_node_topology()
    system, trajectory, dataset = simulated_dataset(topo, seed=42, n_samples=3000)
    model = fit(dataset, topo, FitSettings())
    assert model.diagnostics.converged
    return topo, system, trajectory, dataset, model


def rng(seed=0):
    return np.random.default_rng(seed)
