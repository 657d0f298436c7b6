"""CSV ingestion, partition configuration, and structured-text helpers.

The wide CSV convention: one header row, first column a sample index or
timestamp (ignored for the math), remaining columns named variables. The
partition config is a JSON document mapping column names to nodes and roles::

    {"nodes": [{"name": "reactor",
                "outputs": ["T1", "T2"],
                "inputs": ["valve"],
                "neighbors": ["stripper"],   # optional; default: all others
                "l": 2, "s": 3}]}            # optional; may come from flags

Numeric output uses ``repr`` floats so files round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .data import NetworkTopology, TimeSeriesDataset
from .errors import DataError

__all__ = [
    "read_wide_csv",
    "write_wide_csv",
    "write_dataset_csv",
    "PartitionConfig",
    "load_partition",
    "load_dataset",
    "encode_matrix",
    "decode_matrix",
]


def _fmt(x):
    return repr(float(x))


def read_wide_csv(path):
    """Read a wide CSV into ``(column_names, index_labels, matrix)``.

    The first column is treated as a sample index/timestamp and returned as
    raw strings; all remaining cells must parse as floats.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: need an index column plus at least one variable")
        names = [h.strip() for h in header[1:]]
        index, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            index.append(row[0])
            try:
                rows.append([float(cell) for cell in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return names, index, np.asarray(rows, dtype=float)


def write_wide_csv(path, names, index, matrix):
    matrix = np.asarray(matrix, dtype=float)
    lines = ["index," + ",".join(names)]
    for k in range(matrix.shape[0]):
        lines.append(str(index[k]) + "," + ",".join(_fmt(v) for v in matrix[k]))
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_dataset_csv(path, dataset, index=None):
    """Write a dataset as one wide CSV (outputs then inputs per node)."""
    names, blocks = [], []
    for i in range(dataset.n_nodes):
        names.extend(dataset.output_names[i])
        blocks.append(dataset.outputs[i])
        names.extend(dataset.input_names[i])
        blocks.append(dataset.inputs[i])
    matrix = np.hstack([b for b in blocks if b.shape[1]]) if any(b.shape[1] for b in blocks) else np.zeros((dataset.n_samples, 0))
    if index is None:
        index = range(1, dataset.n_samples + 1)
    write_wide_csv(path, names, list(index), matrix)


@dataclass(frozen=True)
class PartitionConfig:
    """Parsed partition file: node names, column roles, optional hyperparameters."""

    node_names: tuple
    output_columns: tuple
    input_columns: tuple
    neighbor_names: tuple  # per node: tuple of names, or None for the default
    n_dlvs: tuple          # per node int or None
    ar_orders: tuple       # per node int or None

    @property
    def n_nodes(self):
        return len(self.node_names)

    def topology(self, n_dlvs=None, ar_orders=None):
        """Resolve a :class:`NetworkTopology`, with optional overrides for l/s."""
        M = self.n_nodes
        l = list(n_dlvs) if n_dlvs is not None else list(self.n_dlvs)
        s = list(ar_orders) if ar_orders is not None else list(self.ar_orders)
        for i in range(M):
            if l[i] is None:
                raise DataError(f"node '{self.node_names[i]}': latent count 'l' missing (set it in the partition file or via --l)")
            if s[i] is None:
                raise DataError(f"node '{self.node_names[i]}': order 's' missing (set it in the partition file or via --s)")
        index = {name: k for k, name in enumerate(self.node_names)}
        neighbors = []
        for i in range(M):
            if self.neighbor_names[i] is None:
                neighbors.append(tuple(j for j in range(M) if j != i))
            else:
                try:
                    neighbors.append(tuple(index[n] for n in self.neighbor_names[i]))
                except KeyError as exc:
                    raise DataError(f"node '{self.node_names[i]}': unknown neighbor {exc}") from None
        return NetworkTopology(
            node_names=self.node_names,
            output_dims=tuple(len(c) for c in self.output_columns),
            input_dims=tuple(len(c) for c in self.input_columns),
            n_dlvs=tuple(int(v) for v in l),
            ar_orders=tuple(int(v) for v in s),
            neighbors=tuple(neighbors),
        )


def load_partition(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    nodes = doc.get("nodes")
    if not isinstance(nodes, list) or not nodes:
        raise DataError(f"{path}: partition config needs a non-empty 'nodes' list")
    names, outs, ins, nbrs, ls, ss = [], [], [], [], [], []
    for k, entry in enumerate(nodes):
        name = entry.get("name", f"N{k + 1}")
        outputs = entry.get("outputs")
        if not outputs:
            raise DataError(f"{path}: node '{name}' needs a non-empty 'outputs' list")
        names.append(str(name))
        outs.append(tuple(str(c) for c in outputs))
        ins.append(tuple(str(c) for c in entry.get("inputs", [])))
        nbrs.append(tuple(str(n) for n in entry["neighbors"]) if "neighbors" in entry else None)
        ls.append(int(entry["l"]) if "l" in entry else None)
        ss.append(int(entry["s"]) if "s" in entry else None)
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate node names")
    return PartitionConfig(tuple(names), tuple(outs), tuple(ins), tuple(nbrs), tuple(ls), tuple(ss))


def load_dataset(csv_path, partition):
    """Assemble a :class:`TimeSeriesDataset` from a wide CSV and a partition.

    Raises :class:`DataError` naming any partition column absent from the CSV.
    """
    names, _, matrix = read_wide_csv(csv_path)
    col = {name: k for k, name in enumerate(names)}
    seen = set()
    outputs, inputs = [], []
    for i in range(partition.n_nodes):
        for group in (partition.output_columns[i], partition.input_columns[i]):
            for c in group:
                if c not in col:
                    raise DataError(f"column '{c}' referenced by the partition is missing from {csv_path}")
                if c in seen:
                    raise DataError(f"column '{c}' assigned to more than one role")
                seen.add(c)
        outputs.append(matrix[:, [col[c] for c in partition.output_columns[i]]])
        mi = partition.input_columns[i]
        inputs.append(matrix[:, [col[c] for c in mi]] if mi else np.zeros((matrix.shape[0], 0)))
    return TimeSeriesDataset(
        node_names=partition.node_names,
        outputs=tuple(outputs),
        inputs=tuple(inputs),
        output_names=partition.output_columns,
        input_names=partition.input_columns,
    )


def encode_matrix(a):
    """Matrix as a JSON-safe dict: shape header plus row-major entries."""
    arr = np.asarray(a, dtype=float)
    return {"shape": [int(arr.shape[0]), int(arr.shape[1])], "data": [float(v) for v in arr.ravel(order="C")]}


def decode_matrix(doc):
    r, c = (int(v) for v in doc["shape"])
    return np.asarray(doc["data"], dtype=float).reshape(r, c)


def topology_to_doc(topology):
    return {
        "names": list(topology.node_names),
        "p": list(topology.output_dims),
        "m": list(topology.input_dims),
        "l": list(topology.n_dlvs),
        "s": list(topology.ar_orders),
        "neighbors": [list(n) for n in topology.neighbors],
    }


def topology_from_doc(doc):
    return NetworkTopology(
        node_names=tuple(doc["names"]),
        output_dims=tuple(doc["p"]),
        input_dims=tuple(doc["m"]),
        n_dlvs=tuple(doc["l"]),
        ar_orders=tuple(doc["s"]),
        neighbors=tuple(tuple(n) for n in doc["neighbors"]),
    )
