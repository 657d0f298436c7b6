"""One-step-ahead prediction through a fitted model and performance metrics.

Prediction conditions on the measured past: latent histories are obtained by
projecting measured outputs through the fitted weights, the latent VARX sum
gives the one-step latent prediction, and the loadings map it back to the
output space. The first ``s = max(s_i)`` rows of any evaluation segment are
consumed as lag initialization and excluded from metrics; chronological
splitters prepend the tail of the preceding segment so no evaluation row is
lost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, ShapeMismatch
from .estimator import stack_coefficients

__all__ = [
    "PredictionResult",
    "MetricsReport",
    "predict_one_step",
    "reconstruct",
    "compute_metrics",
    "evaluate_model",
]


@dataclass
class PredictionResult:
    """Aligned predictions and actuals for one evaluation segment.

    All blocks have ``rows - s`` rows; row ``k`` corresponds to input row
    ``k + sample_offset``. ``standardized`` records the scale of the output
    blocks.
    """

    node_names: tuple
    dlv_predicted: list
    dlv_actual: list
    outputs_predicted: list
    outputs_actual: list
    sample_offset: int
    standardized: bool = True


def _lagged(array, s, order):
    rows = array.shape[0]
    return np.hstack([array[s - h : rows - h] for h in range(1, order + 1)])


def predict_one_step(model, dataset, standardized=False):
    """One-step-ahead predictions for every node of ``dataset``.

    ``dataset`` is given in original units unless ``standardized`` says it has
    already been transformed with the model's standardizer. Requires at least
    ``s + 1`` rows (one predictable row after lag initialization).
    """
    topo = model.topology
    s = topo.max_lag
    if dataset.n_samples < s + 1:
        raise InsufficientData(f"evaluation segment needs at least {s + 1} rows, got {dataset.n_samples}")
    data = dataset if standardized else model.standardizer.transform(dataset)
    scores = model.dlv_scores(data)
    predicted_dlvs, actual_dlvs, predicted_outputs, actual_outputs = [], [], [], []
    for i in range(topo.n_nodes):
        si = topo.ar_orders[i]
        blocks = [_lagged(scores[i], s, si), _lagged(data.inputs[i], s, si)]
        blocks += [_lagged(scores[j], s, si) for j in topo.neighbors[i]]
        z = np.hstack(blocks)
        v_hat = z @ stack_coefficients(model.nodes[i], topo, i)
        predicted_dlvs.append(v_hat)
        actual_dlvs.append(scores[i][s:].copy())
        predicted_outputs.append(v_hat @ model.nodes[i].loadings.T)
        actual_outputs.append(data.outputs[i][s:].copy())
    return PredictionResult(
        node_names=dataset.node_names,
        dlv_predicted=predicted_dlvs,
        dlv_actual=actual_dlvs,
        outputs_predicted=predicted_outputs,
        outputs_actual=actual_outputs,
        sample_offset=s,
        standardized=True,
    )


def to_original_units(model, result):
    """Copy of a prediction result with outputs mapped back to original units."""
    if not result.standardized:
        return result
    inv = model.standardizer.inverse_outputs
    return PredictionResult(
        node_names=result.node_names,
        dlv_predicted=[v.copy() for v in result.dlv_predicted],
        dlv_actual=[v.copy() for v in result.dlv_actual],
        outputs_predicted=[inv(i, y) for i, y in enumerate(result.outputs_predicted)],
        outputs_actual=[inv(i, y) for i, y in enumerate(result.outputs_actual)],
        sample_offset=result.sample_offset,
        standardized=False,
    )


def reconstruct(model, dataset, standardized=False):
    """Project each node's outputs onto its latent subspace: ``Y @ R @ P.T``.

    The map is idempotent, fixes anything already in the latent column span,
    and is the identity when a node's latent count equals its output count.
    """
    data = dataset if standardized else model.standardizer.transform(dataset)
    return [
        data.outputs[i] @ model.nodes[i].weights @ model.nodes[i].loadings.T
        for i in range(model.topology.n_nodes)
    ]


@dataclass(frozen=True)
class ColumnMetrics:
    node: str
    variable: str
    r2: float    # NaN marks an undefined value (zero-variance actual)
    corr: float
    rmse: float
    mae: float


@dataclass(frozen=True)
class MetricsReport:
    """Per-variable, per-node, and pooled metrics.

    Pooled and per-node values are unweighted means over columns; columns with
    undefined R2/Corr (zero-variance actuals) are excluded from those two
    pools only.
    """

    columns: tuple
    per_node: dict
    pooled: dict

    def table_rows(self):
        """Rows for delimited output: (scope, node, variable, r2, corr, rmse, mae)."""
        rows = []
        for c in self.columns:
            rows.append(("variable", c.node, c.variable, c.r2, c.corr, c.rmse, c.mae))
        for node, vals in self.per_node.items():
            rows.append(("node", node, "", vals["r2"], vals["corr"], vals["rmse"], vals["mae"]))
        p = self.pooled
        rows.append(("pooled", "", "", p["r2"], p["corr"], p["rmse"], p["mae"]))
        return rows


def _column_metrics(a, p):
    n = a.shape[0]
    err = p - a
    rmse = float(np.sqrt(np.mean(err * err)))
    mae = float(np.mean(np.abs(err)))
    sst = float(np.sum((a - a.mean()) ** 2))
    if sst <= 0.0:
        return float("nan"), float("nan"), rmse, mae
    r2 = 1.0 - float(np.sum(err * err)) / sst
    pa = a - a.mean()
    pp = p - p.mean()
    denom = np.sqrt(float(np.sum(pa * pa)) * float(np.sum(pp * pp)))
    corr = float(np.clip(np.sum(pa * pp) / denom, -1.0, 1.0)) if denom > 0.0 else float("nan")
    return r2, corr, rmse, mae


def _pool(cols):
    out = {}
    for key in ("r2", "corr", "rmse", "mae"):
        vals = [getattr(c, key) for c in cols if not np.isnan(getattr(c, key))]
        out[key] = float(np.mean(vals)) if vals else float("nan")
    return out


def compute_metrics(actual, predicted, node_names=None, variable_names=None):
    """R2, Pearson correlation, RMSE, MAE per column, per node, and pooled.

    ``actual``/``predicted`` are single matrices or per-node lists of matrices
    with identical shapes and at least two rows. R2 uses the actual column's
    mean over the evaluation rows; zero-variance actual columns get NaN
    markers for R2/Corr and are excluded from those pools.
    """
    if isinstance(actual, np.ndarray):
        actual, predicted = [actual], [predicted]
    if len(actual) != len(predicted):
        raise ShapeMismatch("actual and predicted must have the same node count")
    if node_names is None:
        node_names = [f"N{i + 1}" for i in range(len(actual))]
    columns = []
    for i, (a, p) in enumerate(zip(actual, predicted)):
        a = np.asarray(a, dtype=float)
        p = np.asarray(p, dtype=float)
        if a.shape != p.shape:
            raise ShapeMismatch(f"node {node_names[i]}: actual {a.shape} vs predicted {p.shape}")
        if a.shape[0] < 2:
            raise InsufficientData("metrics need at least 2 rows")
        names = variable_names[i] if variable_names is not None else [f"y{k + 1}" for k in range(a.shape[1])]
        for k in range(a.shape[1]):
            r2, corr, rmse, mae = _column_metrics(a[:, k], p[:, k])
            columns.append(ColumnMetrics(node=str(node_names[i]), variable=str(names[k]), r2=r2, corr=corr, rmse=rmse, mae=mae))
    per_node = {}
    for i, name in enumerate(node_names):
        per_node[str(name)] = _pool([c for c in columns if c.node == str(name)])
    return MetricsReport(columns=tuple(columns), per_node=per_node, pooled=_pool(columns))


def evaluate_model(model, dataset, standardized=False, original_units=False):
    """Predict one step ahead and score the predictions in one call."""
    result = predict_one_step(model, dataset, standardized=standardized)
    if original_units:
        result = to_original_units(model, result)
    report = compute_metrics(
        result.outputs_actual,
        result.outputs_predicted,
        node_names=dataset.node_names,
        variable_names=dataset.output_names,
    )
    return result, report
