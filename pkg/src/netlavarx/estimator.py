"""Fitting of networked latent autoregressive models by alternating eigen-updates.

The fit extracts, per node, the most predictable latent directions of a
high-dimensional output series under a canonical-correlation objective: latent
scores are constrained to unit covariance, and predictability is measured by
the projection of the whitened outputs onto the span of the lagged regressors
(own latent lags, own input lags, neighbor latent lags).

Sketch of one fit:

1. standardize the data and build lag blocks up to ``s = max(s_i)``;
2. per node, take the economy SVD ``Y_s = U diag(d) V.T`` once; any candidate
   weight matrix is parameterized as ``R = V diag(1/d) W`` so the score
   constraint reduces to ``W.T W = I``;
3. sweep the nodes in order, each time rebuilding the lagged regressor matrix
   ``Z`` from the latest weights and replacing ``W`` by the leading
   eigenvectors of ``U.T (Z Z^+) U`` (a symmetric matrix with spectrum in
   [0, 1]);
4. declare convergence when the projector ``W W.T`` stops moving for every
   node, then rescale so training scores have unit sample variance, and solve
   the latent VARX coefficients by a minimum-norm least-squares fit.

Within its own update a node's lagged scores use its pre-update weights;
nodes earlier in the sweep contribute their freshly updated weights
(Gauss-Seidel ordering).
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import dataio
from .data import (
    NetworkTopology,
    Standardizer,
    attach_dlvs,
    build_augmented,
    build_shifted,
    standardize,
)
from .errors import InsufficientRank, InvalidInput, ShapeMismatch
from .numerics import economy_svd, pinv, sym_eig_desc

__all__ = [
    "FitSettings",
    "NodeModel",
    "FitDiagnostics",
    "NetLavarxModel",
    "fit",
    "assemble_regressors",
    "update_node_weights",
    "subspace_change",
    "check_convergence",
    "solve_varx_coefficients",
    "unstack_coefficients",
    "stack_coefficients",
    "save_model",
    "load_model",
]

MODEL_FORMAT = "netlavarx-model-v1"


@dataclass(frozen=True)
class FitSettings:
    """Loop controls for the alternating fit.

    ``rank_tol`` (relative to the largest singular value) is passed through to
    every SVD/pseudo-inverse rank decision; ``None`` keeps the default rule.
    ``restarts`` adds that many extra runs from random orthonormal starts and
    keeps the run with the largest final objective.
    """

    max_iter: int = 300
    tol: float = 1e-8
    rank_tol: float | None = None
    restarts: int = 0
    restart_seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidInput("max_iter must be >= 1")
        if not self.tol > 0:
            raise InvalidInput("tol must be positive")
        if self.restarts < 0:
            raise InvalidInput("restarts must be >= 0")


@dataclass
class NodeModel:
    """Fitted quantities of one node.

    ``weights`` maps measurements to latent scores (scores = Y @ weights),
    ``loadings`` maps scores back to measurements, ``mixing`` is the
    orthonormal coordinate of the weights in the whitened basis. Coefficient
    blocks are indexed ``[h-1]`` for lag ``h``; ``cross_blocks[j]`` holds the
    blocks receiving neighbor ``j``.
    """

    weights: np.ndarray
    loadings: np.ndarray
    mixing: np.ndarray
    ar_blocks: list
    input_blocks: list
    cross_blocks: dict


@dataclass
class FitDiagnostics:
    iterations: int = 0
    converged: bool = False
    subspace_change: float = float("inf")
    ranks: list = field(default_factory=list)
    n_effective: int = 0
    eigenvalues: list = field(default_factory=list)   # final spectrum per node
    objective: list = field(default_factory=list)     # per sweep: per-node kept-eigenvalue sums
    training_metrics: dict | None = None


@dataclass
class NetLavarxModel:
    """A fitted networked latent VARX model plus its standardization."""

    topology: NetworkTopology
    standardizer: Standardizer
    nodes: list
    diagnostics: FitDiagnostics

    def dlv_scores(self, dataset_std):
        """Latent scores per node for an already-standardized dataset."""
        return [dataset_std.outputs[i] @ self.nodes[i].weights for i in range(self.topology.n_nodes)]


def assemble_regressors(shifted, topology, node):
    """Lagged regressor matrix for one node: [own latents | own inputs | neighbors].

    Lags ascend within each group; neighbor groups ascend by node index. The
    coefficient layout of :func:`unstack_coefficients` mirrors this order.
    """
    aug = build_augmented(shifted, topology, node)
    blocks = [aug.own_dlvs, aug.own_inputs] + [b for _, b in aug.neighbor_dlvs]
    rows = {b.shape[0] for b in blocks}
    if len(rows) != 1:
        raise ShapeMismatch(f"regressor blocks disagree on row count: {sorted(rows)}")
    return np.hstack(blocks)


def update_node_weights(u_basis, z, n_keep, rank_tol=None):
    """Leading eigenvectors of the whitened predictability matrix.

    ``u_basis`` has orthonormal columns and ``Z Z^+`` is an orthogonal
    projector, so the matrix ``U.T (Z Z^+) U`` is symmetric positive
    semidefinite with eigenvalues in [0, 1]. Returns the ``n_keep`` leading
    eigenvectors and the full descending spectrum.
    """
    u_basis = np.asarray(u_basis, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.shape[0] != u_basis.shape[0]:
        raise ShapeMismatch(f"row mismatch: basis has {u_basis.shape[0]} rows, regressors {z.shape[0]}")
    r = u_basis.shape[1]
    if n_keep > r:
        raise InsufficientRank(f"requested {n_keep} latent directions but the basis rank is {r}")
    q, _, _, rank_z = economy_svd(z, rank_tol=rank_tol)
    if rank_z == 0:
        g = np.zeros((r, r))
    else:
        t = q.T @ u_basis
        g = t.T @ t
    eigvals, eigvecs = sym_eig_desc(g)
    return eigvecs[:, :n_keep].copy(), eigvals


def subspace_change(w_prev, w_new):
    """Largest Frobenius distance between the per-node projectors ``W W.T``."""
    worst = 0.0
    for wp, wn in zip(w_prev, w_new):
        if wp.shape != wn.shape:
            raise ShapeMismatch(f"weight shapes changed between sweeps: {wp.shape} vs {wn.shape}")
        worst = max(worst, float(np.linalg.norm(wn @ wn.T - wp @ wp.T)))
    return worst


def check_convergence(w_prev, w_new, tol):
    """Converged when every node's latent subspace stopped moving.

    The distance is taken between projectors, so sign flips and orthogonal
    mixing within a node's subspace do not count as movement.
    """
    return subspace_change(w_prev, w_new) < tol


def solve_varx_coefficients(z, v_target, topology=None, node=None, rank_tol=None):
    """Minimum-norm least-squares coefficients for ``v_target ~= z @ q``.

    When ``topology``/``node`` are given the stacked solution is also unstacked
    into per-lag blocks matching :func:`assemble_regressors` column order.
    """
    z = np.asarray(z, dtype=float)
    v_target = np.asarray(v_target, dtype=float)
    if z.shape[0] != v_target.shape[0]:
        raise ShapeMismatch(f"row mismatch: regressors {z.shape[0]}, targets {v_target.shape[0]}")
    q = pinv(z, rank_tol=rank_tol) @ v_target
    if topology is None:
        return q
    return unstack_coefficients(q, topology, node)


def unstack_coefficients(q, topology, node):
    """Split a stacked coefficient matrix into (ar, input, cross) lag blocks."""
    i = node
    si = topology.ar_orders[i]
    li = topology.n_dlvs[i]
    mi = topology.input_dims[i]
    expected = si * (li + mi + sum(topology.n_dlvs[j] for j in topology.neighbors[i]))
    if q.shape[0] != expected:
        raise ShapeMismatch(f"stacked coefficients have {q.shape[0]} rows, layout expects {expected}")
    pos = 0

    def take(width):
        nonlocal pos
        blocks = []
        for _ in range(si):
            blocks.append(q[pos : pos + width].T.copy())
            pos += width
        return blocks

    ar = take(li)
    inputs = take(mi)
    cross = {j: take(topology.n_dlvs[j]) for j in topology.neighbors[i]}
    return ar, inputs, cross


def stack_coefficients(node_model, topology, node):
    """Inverse of :func:`unstack_coefficients`: stacked matrix in regressor order."""
    i = node
    rows = [b.T for b in node_model.ar_blocks]
    rows += [b.T for b in node_model.input_blocks]
    for j in topology.neighbors[i]:
        rows += [b.T for b in node_model.cross_blocks[j]]
    return np.vstack(rows)


def _unscaled_weights(basis, w):
    u, d, v, r = basis
    return v @ (w / d[:, None])


def fit(dataset, topology, settings=None):
    """Fit a networked latent VARX model on the given rows.

    Standardization is (re)computed on exactly the rows passed in, so callers
    doing chronological splits simply pass the training slice. Non-convergence
    within ``max_iter`` sweeps is reported via ``diagnostics.converged``, not
    raised. Raises :class:`InsufficientRank` when a node's lag-aligned output
    block has rank below its requested latent count.
    """
    settings = settings or FitSettings()
    if dataset.n_nodes != topology.n_nodes:
        raise InvalidInput(f"dataset has {dataset.n_nodes} nodes, topology {topology.n_nodes}")
    for i in range(topology.n_nodes):
        if dataset.output_dims[i] != topology.output_dims[i] or dataset.input_dims[i] != topology.input_dims[i]:
            raise InvalidInput(f"node {topology.node_names[i]}: dataset dimensions do not match the topology")
    std_data, standardizer = standardize(dataset)
    s = topology.max_lag
    shifted = build_shifted(std_data, s)
    N = shifted.n_rows
    M = topology.n_nodes

    bases = []
    for i in range(M):
        u, d, v, r = economy_svd(shifted.outputs[i][s], rank_tol=settings.rank_tol)
        if r < topology.n_dlvs[i]:
            raise InsufficientRank(
                f"node {topology.node_names[i]}: output block rank {r} < requested latent count {topology.n_dlvs[i]}"
            )
        bases.append((u, d, v, r))
        n_regressors = topology.ar_orders[i] * (
            topology.n_dlvs[i] + topology.input_dims[i] + sum(topology.n_dlvs[j] for j in topology.neighbors[i])
        )
        if N <= n_regressors:
            warnings.warn(
                f"node {topology.node_names[i]}: {N} effective samples for {n_regressors} regressors; "
                "estimates will be rank-deficient",
                stacklevel=2,
            )

    def run(w_init):
        w_list = [w.copy() for w in w_init]
        for j in range(M):
            attach_dlvs(shifted, j, _unscaled_weights(bases[j], w_list[j]))
        objective = []
        eig_final = [None] * M
        iterations = 0
        converged = False
        change = float("inf")
        while iterations < settings.max_iter and not converged:
            previous = [w.copy() for w in w_list]
            sums = []
            for i in range(M):
                z = assemble_regressors(shifted, topology, i)
                w_new, eigvals = update_node_weights(bases[i][0], z, topology.n_dlvs[i], rank_tol=settings.rank_tol)
                w_list[i] = w_new
                eig_final[i] = eigvals
                sums.append(float(eigvals[: topology.n_dlvs[i]].sum()))
                attach_dlvs(shifted, i, _unscaled_weights(bases[i], w_list[i]))
            objective.append(sums)
            change = subspace_change(previous, w_list)
            converged = change < settings.tol
            iterations += 1
        return w_list, objective, eig_final, iterations, converged, change

    init = [np.eye(bases[i][3])[:, : topology.n_dlvs[i]] for i in range(M)]
    best = run(init)
    if settings.restarts:
        rng = np.random.default_rng(np.random.SeedSequence(settings.restart_seed))
        for _ in range(settings.restarts):
            candidate_init = []
            for i in range(M):
                g = rng.standard_normal((bases[i][3], topology.n_dlvs[i]))
                q, _ = np.linalg.qr(g)
                candidate_init.append(q)
            candidate = run(candidate_init)
            if sum(candidate[1][-1]) > sum(best[1][-1]):
                best = candidate
    w_list, objective, eig_final, iterations, converged, change = best

    scale = np.sqrt(N - 1.0)
    nodes = []
    for i in range(M):
        u, d, v, r = bases[i]
        w = w_list[i]
        weights = scale * (v @ (w / d[:, None]))
        loadings = (v * d) @ w / scale
        attach_dlvs(shifted, i, weights)
        nodes.append(NodeModel(weights=weights, loadings=loadings, mixing=w, ar_blocks=[], input_blocks=[], cross_blocks={}))
    for i in range(M):
        z = assemble_regressors(shifted, topology, i)
        v_target = shifted.dlvs[i][s]
        ar, inputs, cross = solve_varx_coefficients(z, v_target, topology, i, rank_tol=settings.rank_tol)
        nodes[i].ar_blocks = ar
        nodes[i].input_blocks = inputs
        nodes[i].cross_blocks = cross

    diagnostics = FitDiagnostics(
        iterations=iterations,
        converged=converged,
        subspace_change=change,
        ranks=[b[3] for b in bases],
        n_effective=N,
        eigenvalues=[e.copy() for e in eig_final],
        objective=objective,
    )
    model = NetLavarxModel(topology=topology, standardizer=standardizer, nodes=nodes, diagnostics=diagnostics)

    from .evaluate import compute_metrics, predict_one_step  # late import: evaluate imports this module at load time

    prediction = predict_one_step(model, dataset)
    report = compute_metrics(prediction.outputs_actual, prediction.outputs_predicted,
                             node_names=dataset.node_names, variable_names=dataset.output_names)
    diagnostics.training_metrics = dict(report.pooled)
    return model


def score_second_moment(scores, n_effective):
    """Per-column second moment about zero with divisor ``N - 1``.

    Training scores come from zero-mean standardized data, so this is the
    variance convention under which the unit-variance constraint is exact.
    """
    arr = np.asarray(scores, dtype=float)
    return (arr * arr).sum(axis=0) / (n_effective - 1.0)


def model_to_doc(model):
    nodes = []
    for i, nm in enumerate(model.nodes):
        nodes.append(
            {
                "weights": dataio.encode_matrix(nm.weights),
                "loadings": dataio.encode_matrix(nm.loadings),
                "mixing": dataio.encode_matrix(nm.mixing),
                "ar": [dataio.encode_matrix(b) for b in nm.ar_blocks],
                "input": [dataio.encode_matrix(b) for b in nm.input_blocks],
                "cross": {str(j): [dataio.encode_matrix(b) for b in blocks] for j, blocks in sorted(nm.cross_blocks.items())},
            }
        )
    diag = model.diagnostics
    return {
        "format": MODEL_FORMAT,
        "topology": dataio.topology_to_doc(model.topology),
        "standardizer": {
            "output_means": [list(map(float, v)) for v in model.standardizer.output_means],
            "output_stds": [list(map(float, v)) for v in model.standardizer.output_stds],
            "input_means": [list(map(float, v)) for v in model.standardizer.input_means],
            "input_stds": [list(map(float, v)) for v in model.standardizer.input_stds],
        },
        "nodes": nodes,
        "diagnostics": {
            "iterations": diag.iterations,
            "converged": diag.converged,
            "subspace_change": float(diag.subspace_change),
            "ranks": list(diag.ranks),
            "n_effective": diag.n_effective,
            "eigenvalues": [list(map(float, e)) for e in diag.eigenvalues],
            "objective": [[float(v) for v in sweep] for sweep in diag.objective],
            "training_metrics": diag.training_metrics,
        },
    }


def model_from_doc(doc):
    if doc.get("format") != MODEL_FORMAT:
        raise InvalidInput(f"unsupported model format {doc.get('format')!r}")
    topology = dataio.topology_from_doc(doc["topology"])
    sd = doc["standardizer"]
    standardizer = Standardizer(
        tuple(np.asarray(v, dtype=float) for v in sd["output_means"]),
        tuple(np.asarray(v, dtype=float) for v in sd["output_stds"]),
        tuple(np.asarray(v, dtype=float) for v in sd["input_means"]),
        tuple(np.asarray(v, dtype=float) for v in sd["input_stds"]),
    )
    nodes = []
    for entry in doc["nodes"]:
        nodes.append(
            NodeModel(
                weights=dataio.decode_matrix(entry["weights"]),
                loadings=dataio.decode_matrix(entry["loadings"]),
                mixing=dataio.decode_matrix(entry["mixing"]),
                ar_blocks=[dataio.decode_matrix(b) for b in entry["ar"]],
                input_blocks=[dataio.decode_matrix(b) for b in entry["input"]],
                cross_blocks={int(j): [dataio.decode_matrix(b) for b in blocks] for j, blocks in entry["cross"].items()},
            )
        )
    dd = doc["diagnostics"]
    diagnostics = FitDiagnostics(
        iterations=int(dd["iterations"]),
        converged=bool(dd["converged"]),
        subspace_change=float(dd["subspace_change"]),
        ranks=[int(v) for v in dd["ranks"]],
        n_effective=int(dd["n_effective"]),
        eigenvalues=[np.asarray(e, dtype=float) for e in dd["eigenvalues"]],
        objective=[list(map(float, sweep)) for sweep in dd["objective"]],
        training_metrics=dd.get("training_metrics"),
    )
    return NetLavarxModel(topology=topology, standardizer=standardizer, nodes=nodes, diagnostics=diagnostics)


def model_to_text(model):
    return json.dumps(model_to_doc(model), indent=1) + "\n"


def save_model(model, path):
    text = model_to_text(model)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_doc(json.load(fh))
