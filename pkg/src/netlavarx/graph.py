"""Cross-correlation network over the fitted latent variables.

Vertices are individual latent variables labeled ``N<node>.<index>`` (1-based)
and carry a predictability score (one-step R2); undirected edges connect pairs
whose absolute correlation reaches the threshold. Exports are deterministic:
vertices ordered by (node, latent index), edges by vertex-pair.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidFormat, InvalidInput
from .evaluate import predict_one_step

__all__ = [
    "DlvVertex",
    "DlvEdge",
    "DlvGraph",
    "dlv_cross_correlation",
    "per_dlv_r2",
    "build_graph",
    "export_graph",
    "parse_graph_json",
]


@dataclass(frozen=True)
class DlvVertex:
    label: str
    node: int        # owning node index (0-based)
    index: int       # latent index within the node (0-based)
    r2: float


@dataclass(frozen=True)
class DlvEdge:
    a: int           # vertex positions, a < b
    b: int
    weight: float    # |correlation|, in [threshold, 1]


@dataclass(frozen=True)
class DlvGraph:
    vertices: tuple
    edges: tuple
    threshold: float

    def cross_node_edges(self):
        return tuple(e for e in self.edges if self.vertices[e.a].node != self.vertices[e.b].node)


def _score_matrix(model, dataset, standardized):
    data = dataset if standardized else model.standardizer.transform(dataset)
    scores = model.dlv_scores(data)
    return np.hstack(scores)


def _lagged_max_corr(x, y, max_lag):
    """Signed correlation with the largest magnitude over lags -max_lag..max_lag."""
    best = 0.0
    n = x.shape[0]
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            a, b = x[lag:], y[: n - lag]
        else:
            a, b = x[: n + lag], y[-lag:]
        if a.shape[0] < 2:
            continue
        am, bm = a - a.mean(), b - b.mean()
        denom = np.sqrt(float(am @ am) * float(bm @ bm))
        if denom <= 0.0:
            continue
        r = float(am @ bm / denom)
        if abs(r) > abs(best):
            best = r
    return best


def dlv_cross_correlation(model, dataset, standardized=False, max_lag=0):
    """Pearson correlation matrix of all latent score columns across nodes.

    Lag 0 by default; with ``max_lag > 0`` each entry is the signed
    correlation of largest magnitude over lags ``-max_lag .. max_lag``.
    Zero-variance score columns are flagged with a warning and their
    off-diagonal entries set to NaN.
    """
    V = _score_matrix(model, dataset, standardized)
    n_cols = V.shape[1]
    stds = V.std(axis=0, ddof=1)
    degenerate = np.flatnonzero(stds <= 0.0)
    if degenerate.size:
        warnings.warn(f"zero-variance latent score columns: {degenerate.tolist()}", stacklevel=2)
    if max_lag == 0:
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.corrcoef(V, rowvar=False)
        corr = np.atleast_2d(corr)
        corr = np.clip(corr, -1.0, 1.0)
    else:
        corr = np.eye(n_cols)
        for a in range(n_cols):
            for b in range(a + 1, n_cols):
                corr[a, b] = corr[b, a] = _lagged_max_corr(V[:, a], V[:, b], int(max_lag))
    for k in degenerate:
        corr[k, :] = np.nan
        corr[:, k] = np.nan
    np.fill_diagonal(corr, 1.0)
    return corr


def per_dlv_r2(model, dataset, standardized=False):
    """One-step predictability (R2) of every latent variable, concatenated.

    Compares the latent one-step prediction against the projected actual
    scores over the evaluation rows; values at or below zero are reported
    as-is (an unpredictable latent direction).
    """
    result = predict_one_step(model, dataset, standardized=standardized)
    values = []
    for i in range(model.topology.n_nodes):
        actual = result.dlv_actual[i]
        pred = result.dlv_predicted[i]
        for k in range(actual.shape[1]):
            a = actual[:, k]
            sst = float(np.sum((a - a.mean()) ** 2))
            if sst <= 0.0:
                values.append(float("nan"))
            else:
                values.append(1.0 - float(np.sum((pred[:, k] - a) ** 2)) / sst)
    return np.asarray(values)


def build_graph(corr, r2, topology, threshold=0.1):
    """Thresholded undirected graph over all latent variables.

    An edge exists iff the pair is distinct and ``|r| >= threshold`` (closed
    threshold: the boundary value is included). NaN correlations never form
    edges.
    """
    corr = np.asarray(corr, dtype=float)
    n_total = sum(topology.n_dlvs)
    if corr.shape != (n_total, n_total):
        raise InvalidInput(f"correlation matrix must be {n_total}x{n_total}, got {corr.shape}")
    r2 = np.asarray(r2, dtype=float)
    if r2.shape != (n_total,):
        raise InvalidInput(f"r2 vector must have {n_total} entries")
    vertices = []
    for i in range(topology.n_nodes):
        for k in range(topology.n_dlvs[i]):
            vertices.append(DlvVertex(label=f"N{i + 1}.{k + 1}", node=i, index=k, r2=float(r2[len(vertices)])))
    edges = []
    for a in range(n_total):
        for b in range(a + 1, n_total):
            r = corr[a, b]
            if np.isnan(r):
                continue
            if abs(r) >= threshold:
                edges.append(DlvEdge(a=a, b=b, weight=float(abs(r))))
    return DlvGraph(vertices=tuple(vertices), edges=tuple(edges), threshold=float(threshold))


def _graph_to_doc(graph):
    return {
        "format": "netlavarx-graph-v1",
        "threshold": graph.threshold,
        "vertices": [
            {"label": v.label, "node": v.node, "index": v.index, "r2": v.r2} for v in graph.vertices
        ],
        "edges": [{"a": e.a, "b": e.b, "weight": e.weight} for e in graph.edges],
    }


def _dot_escape(s):
    return s.replace("\\", "\\\\").replace('"', '\\"')


def export_graph(graph, fmt="json"):
    """Serialize a graph as DOT text or as lossless JSON."""
    if fmt == "json":
        return json.dumps(_graph_to_doc(graph), indent=1) + "\n"
    if fmt == "dot":
        lines = ["graph dlv_network {"]
        for v in graph.vertices:
            r2_txt = repr(v.r2)
            lines.append(
                f'  "{_dot_escape(v.label)}" [label="{_dot_escape(v.label)}", group="{v.node + 1}", r2="{r2_txt}"];'
            )
        for e in graph.edges:
            a, b = graph.vertices[e.a].label, graph.vertices[e.b].label
            penwidth = 0.5 + 4.0 * e.weight
            lines.append(
                f'  "{_dot_escape(a)}" -- "{_dot_escape(b)}" [weight="{e.weight!r}", penwidth="{penwidth!r}"];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise InvalidFormat(f"unknown graph format '{fmt}'")


def parse_graph_json(text):
    doc = json.loads(text)
    if doc.get("format") != "netlavarx-graph-v1":
        raise InvalidFormat(f"unsupported graph document {doc.get('format')!r}")
    vertices = tuple(
        DlvVertex(label=v["label"], node=int(v["node"]), index=int(v["index"]), r2=float(v["r2"]))
        for v in doc["vertices"]
    )
    edges = tuple(DlvEdge(a=int(e["a"]), b=int(e["b"]), weight=float(e["weight"])) for e in doc["edges"])
    return DlvGraph(vertices=vertices, edges=edges, threshold=float(doc["threshold"]))
