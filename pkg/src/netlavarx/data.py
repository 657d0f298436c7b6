"""Datasets, node topology, standardization, and lagged data blocks.

Sample indexing follows the 1-based convention in documentation (sample
``y_1`` is the first row); arrays are 0-based internally. All containers are
treated as immutable after construction and are safe to share across
concurrent fits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstantColumn,
    DependencyNotReady,
    InsufficientData,
    InvalidInput,
)

__all__ = [
    "NetworkTopology",
    "TimeSeriesDataset",
    "Standardizer",
    "ShiftedMatrices",
    "AugmentedRegressors",
    "standardize",
    "build_shifted",
    "attach_dlvs",
    "build_augmented",
]

MIN_COLUMN_STD = 1e-12


@dataclass(frozen=True)
class NetworkTopology:
    """Node layout of a networked latent dynamic system.

    Per node: output dimension ``p``, input dimension ``m``, number of dynamic
    latent variables ``l`` (``1 <= l <= p``), autoregressive order ``s`` and
    the set of incoming neighbor nodes. Carrying the dimensions here keeps the
    topology self-contained for system generation.
    """

    node_names: tuple
    output_dims: tuple
    input_dims: tuple
    n_dlvs: tuple
    ar_orders: tuple
    neighbors: tuple

    def __post_init__(self):
        names = tuple(str(n) for n in self.node_names)
        p = tuple(int(v) for v in self.output_dims)
        m = tuple(int(v) for v in self.input_dims)
        l = tuple(int(v) for v in self.n_dlvs)
        s = tuple(int(v) for v in self.ar_orders)
        M = len(names)
        if not M:
            raise InvalidInput("topology needs at least one node")
        if len(set(names)) != M:
            raise InvalidInput("node names must be unique")
        for seq, label in ((p, "output_dims"), (m, "input_dims"), (l, "n_dlvs"), (s, "ar_orders"), (self.neighbors, "neighbors")):
            if len(seq) != M:
                raise InvalidInput(f"{label} must have one entry per node")
        nbrs = []
        for i in range(M):
            if p[i] < 1:
                raise InvalidInput(f"node {names[i]}: output dimension must be >= 1")
            if m[i] < 0:
                raise InvalidInput(f"node {names[i]}: input dimension must be >= 0")
            if not 0 < l[i] <= p[i]:
                raise InvalidInput(f"node {names[i]}: latent count must satisfy 0 < l <= p, got l={l[i]}, p={p[i]}")
            if s[i] < 1:
                raise InvalidInput(f"node {names[i]}: autoregressive order must be >= 1")
            ni = tuple(sorted(int(j) for j in self.neighbors[i]))
            if i in ni:
                raise InvalidInput(f"node {names[i]} lists itself as a neighbor")
            if any(j < 0 or j >= M for j in ni):
                raise InvalidInput(f"node {names[i]} has a neighbor index out of range")
            if len(set(ni)) != len(ni):
                raise InvalidInput(f"node {names[i]} lists a neighbor twice")
            nbrs.append(ni)
        object.__setattr__(self, "node_names", names)
        object.__setattr__(self, "output_dims", p)
        object.__setattr__(self, "input_dims", m)
        object.__setattr__(self, "n_dlvs", l)
        object.__setattr__(self, "ar_orders", s)
        object.__setattr__(self, "neighbors", tuple(nbrs))

    @property
    def n_nodes(self):
        return len(self.node_names)

    @property
    def max_lag(self):
        return max(self.ar_orders)

    def with_hyperparams(self, n_dlvs, ar_orders):
        """Copy of this topology with new per-node latent counts and orders."""
        return NetworkTopology(
            node_names=self.node_names,
            output_dims=self.output_dims,
            input_dims=self.input_dims,
            n_dlvs=tuple(n_dlvs),
            ar_orders=tuple(ar_orders),
            neighbors=self.neighbors,
        )

    @staticmethod
    def fully_connected(node_names, output_dims, input_dims, n_dlvs, ar_orders):
        """Topology in which every node receives every other node."""
        M = len(node_names)
        nbrs = tuple(tuple(j for j in range(M) if j != i) for i in range(M))
        return NetworkTopology(node_names, output_dims, input_dims, n_dlvs, ar_orders, nbrs)

    def parameter_count(self):
        """Total free parameters of a model on this topology (tie-break key)."""
        total = 0
        for i in range(self.n_nodes):
            li, mi, si = self.n_dlvs[i], self.input_dims[i], self.ar_orders[i]
            cross = sum(self.n_dlvs[j] for j in self.neighbors[i])
            total += 2 * self.output_dims[i] * li + si * li * (li + mi + cross)
        return total


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Aligned output/input sample matrices for all nodes.

    ``outputs[i]`` is ``(rows, p_i)`` and ``inputs[i]`` is ``(rows, m_i)``
    (``m_i`` may be 0); all nodes share the same row count and entries must be
    finite.
    """

    node_names: tuple
    outputs: tuple
    inputs: tuple
    output_names: tuple
    input_names: tuple

    def __post_init__(self):
        names = tuple(str(n) for n in self.node_names)
        outs = tuple(np.ascontiguousarray(a, dtype=float) for a in self.outputs)
        ins = tuple(np.ascontiguousarray(a, dtype=float) for a in self.inputs)
        if not names:
            raise InvalidInput("dataset needs at least one node")
        if len(outs) != len(names) or len(ins) != len(names):
            raise InvalidInput("outputs/inputs must have one matrix per node")
        rows = outs[0].shape[0] if outs[0].ndim == 2 else -1
        for i, name in enumerate(names):
            if outs[i].ndim != 2 or ins[i].ndim != 2:
                raise InvalidInput(f"node {name}: matrices must be 2-D")
            if outs[i].shape[1] < 1:
                raise InvalidInput(f"node {name}: needs at least one output column")
            if outs[i].shape[0] != rows or ins[i].shape[0] != rows:
                raise InvalidInput(f"node {name}: all node matrices must share the row count")
            if not np.isfinite(outs[i]).all() or (ins[i].size and not np.isfinite(ins[i]).all()):
                raise InvalidInput(f"node {name}: non-finite entries")
            if len(self.output_names[i]) != outs[i].shape[1]:
                raise InvalidInput(f"node {name}: output name count mismatch")
            if len(self.input_names[i]) != ins[i].shape[1]:
                raise InvalidInput(f"node {name}: input name count mismatch")
        object.__setattr__(self, "node_names", names)
        object.__setattr__(self, "outputs", outs)
        object.__setattr__(self, "inputs", ins)
        object.__setattr__(self, "output_names", tuple(tuple(v) for v in self.output_names))
        object.__setattr__(self, "input_names", tuple(tuple(v) for v in self.input_names))

    @staticmethod
    def from_arrays(outputs, inputs=None, node_names=None):
        """Build a dataset from plain arrays, generating default names."""
        M = len(outputs)
        if inputs is None:
            inputs = [np.zeros((np.asarray(outputs[i]).shape[0], 0)) for i in range(M)]
        if node_names is None:
            node_names = [f"N{i + 1}" for i in range(M)]
        out_names = tuple(
            tuple(f"{node_names[i]}.y{k + 1}" for k in range(np.asarray(outputs[i]).shape[1]))
            for i in range(M)
        )
        in_names = tuple(
            tuple(f"{node_names[i]}.u{k + 1}" for k in range(np.asarray(inputs[i]).shape[1]))
            for i in range(M)
        )
        return TimeSeriesDataset(tuple(node_names), tuple(outputs), tuple(inputs), out_names, in_names)

    @property
    def n_nodes(self):
        return len(self.node_names)

    @property
    def n_samples(self):
        return self.outputs[0].shape[0]

    @property
    def output_dims(self):
        return tuple(a.shape[1] for a in self.outputs)

    @property
    def input_dims(self):
        return tuple(a.shape[1] for a in self.inputs)

    def slice(self, start, stop):
        """Contiguous row range ``[start, stop)`` as a new dataset."""
        if not 0 <= start < stop <= self.n_samples:
            raise InvalidInput(f"bad slice [{start}, {stop}) for {self.n_samples} rows")
        return TimeSeriesDataset(
            self.node_names,
            tuple(a[start:stop].copy() for a in self.outputs),
            tuple(a[start:stop].copy() for a in self.inputs),
            self.output_names,
            self.input_names,
        )


@dataclass(frozen=True)
class Standardizer:
    """Per-column means and sample standard deviations (divisor ``N - 1``).

    Supports the forward transform of new data and the inverse transform of
    predictions. Statistics are computed on whatever rows were passed to
    :func:`standardize` (callers pass training rows only, so later segments
    never leak into the statistics).
    """

    output_means: tuple
    output_stds: tuple
    input_means: tuple
    input_stds: tuple

    @staticmethod
    def fit(dataset):
        out_mu, out_sd, in_mu, in_sd = [], [], [], []
        for i in range(dataset.n_nodes):
            for arr, names, mus, sds in (
                (dataset.outputs[i], dataset.output_names[i], out_mu, out_sd),
                (dataset.inputs[i], dataset.input_names[i], in_mu, in_sd),
            ):
                mu = arr.mean(axis=0) if arr.size else np.zeros(arr.shape[1])
                sd = arr.std(axis=0, ddof=1) if arr.size else np.zeros(arr.shape[1])
                for k, name in enumerate(names):
                    if sd[k] <= MIN_COLUMN_STD:
                        raise ConstantColumn(f"column '{name}' is (near-)constant and cannot be standardized")
                mus.append(mu)
                sds.append(sd)
        return Standardizer(tuple(out_mu), tuple(out_sd), tuple(in_mu), tuple(in_sd))

    @staticmethod
    def identity(dataset):
        """No-op standardizer matching the dataset's shapes."""
        return Standardizer(
            tuple(np.zeros(p) for p in dataset.output_dims),
            tuple(np.ones(p) for p in dataset.output_dims),
            tuple(np.zeros(m) for m in dataset.input_dims),
            tuple(np.ones(m) for m in dataset.input_dims),
        )

    def transform(self, dataset):
        outs = tuple(
            (dataset.outputs[i] - self.output_means[i]) / self.output_stds[i]
            for i in range(dataset.n_nodes)
        )
        ins = tuple(
            (dataset.inputs[i] - self.input_means[i]) / self.input_stds[i]
            if dataset.inputs[i].size
            else dataset.inputs[i]
            for i in range(dataset.n_nodes)
        )
        return TimeSeriesDataset(dataset.node_names, outs, ins, dataset.output_names, dataset.input_names)

    def inverse(self, dataset):
        outs = tuple(
            dataset.outputs[i] * self.output_stds[i] + self.output_means[i]
            for i in range(dataset.n_nodes)
        )
        ins = tuple(
            dataset.inputs[i] * self.input_stds[i] + self.input_means[i]
            if dataset.inputs[i].size
            else dataset.inputs[i]
            for i in range(dataset.n_nodes)
        )
        return TimeSeriesDataset(dataset.node_names, outs, ins, dataset.output_names, dataset.input_names)

    def inverse_outputs(self, node, array):
        """Map standardized output columns of one node back to original units."""
        return np.asarray(array) * self.output_stds[node] + self.output_means[node]


def standardize(dataset):
    """Scale every column to zero mean, unit sample variance.

    Returns the transformed dataset and the fitted :class:`Standardizer`.
    Raises :class:`ConstantColumn` (naming the column) when a column's sample
    standard deviation is at or below ``1e-12``.
    """
    standardizer = Standardizer.fit(dataset)
    return standardizer.transform(dataset), standardizer


@dataclass
class ShiftedMatrices:
    """Time-shifted blocks for lags ``0 .. max_lag`` with ``n_rows`` rows each.

    Row ``k`` of the lag-``j`` output block equals sample ``y_{j+k}`` (1-based),
    i.e. ``outputs[i][j] == Y_i[j : j + N]``. Latent score blocks (``dlvs``)
    start out absent and are attached once projection weights exist.
    """

    n_rows: int
    max_lag: int
    outputs: list
    inputs: list
    dlvs: list = field(default_factory=list)

    def __post_init__(self):
        if not self.dlvs:
            self.dlvs = [None] * len(self.outputs)


@dataclass(frozen=True)
class AugmentedRegressors:
    """Lag-stacked regressor blocks for one node.

    ``own_dlvs`` is ``(N, s_i * l_i)`` with lag-1 columns first, ``own_inputs``
    is ``(N, s_i * m_i)``, and ``neighbor_dlvs`` holds ``(j, block)`` pairs in
    ascending neighbor index.
    """

    node: int
    own_dlvs: np.ndarray
    own_inputs: np.ndarray
    neighbor_dlvs: tuple


def build_shifted(dataset, max_lag):
    """Construct lag blocks 0..``max_lag`` with ``N = rows - max_lag`` rows each.

    Raises :class:`InsufficientData` when ``max_lag < 1`` or when fewer than
    ``max_lag + 2`` rows are available (at least two effective samples).
    """
    s = int(max_lag)
    if s < 1:
        raise InsufficientData(f"lag depth must be >= 1, got {s}")
    rows = dataset.n_samples
    if rows < s + 2:
        raise InsufficientData(f"need at least {s + 2} rows for lag depth {s}, got {rows}")
    N = rows - s
    outputs = [[dataset.outputs[i][j : j + N].copy() for j in range(s + 1)] for i in range(dataset.n_nodes)]
    inputs = [[dataset.inputs[i][j : j + N].copy() for j in range(s + 1)] for i in range(dataset.n_nodes)]
    return ShiftedMatrices(n_rows=N, max_lag=s, outputs=outputs, inputs=inputs)


def attach_dlvs(shifted, node, weights):
    """Attach latent score blocks ``V_j = Y_j @ weights`` for every lag of one node."""
    w = np.asarray(weights, dtype=float)
    shifted.dlvs[node] = [block @ w for block in shifted.outputs[node]]


def _stack_lags(blocks, max_lag, order):
    return np.hstack([blocks[max_lag - h] for h in range(1, order + 1)])


def build_augmented(shifted, topology, node):
    """Lag-stacked regressor blocks for ``node``.

    Every block uses the receiving node's own order ``s_i`` (neighbor blocks
    included) with lags ascending ``h = 1 .. s_i`` inside each group. Requires
    latent score blocks for the node and all its neighbors; raises
    :class:`DependencyNotReady` otherwise.
    """
    i = node
    s = shifted.max_lag
    si = topology.ar_orders[i]
    needed = (i,) + topology.neighbors[i]
    for j in needed:
        if shifted.dlvs[j] is None:
            raise DependencyNotReady(f"latent scores for node {topology.node_names[j]} not attached")
    own_dlvs = _stack_lags(shifted.dlvs[i], s, si)
    own_inputs = _stack_lags(shifted.inputs[i], s, si)
    neighbor = tuple((j, _stack_lags(shifted.dlvs[j], s, si)) for j in topology.neighbors[i])
    return AugmentedRegressors(node=i, own_dlvs=own_dlvs, own_inputs=own_inputs, neighbor_dlvs=neighbor)
