"""Chronological data splitting and hyperparameter grid search.

The split is strictly chronological (train, then validation, then test);
validation and test predictions seed their lag initialization from the tail of
the preceding segment, so every row of those segments is scored. After
selection the winning hyperparameters are refit on train + validation, with
standardization statistics recomputed on that larger segment, and test metrics
are reported for the refit model.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GridExhausted, InsufficientData, InvalidInput, NetLavarxError
from .estimator import FitSettings, fit
from .evaluate import evaluate_model

__all__ = ["SplitSpec", "GridSpec", "GridCellResult", "GridSearchResult", "split", "grid_search"]

HIGHER_IS_BETTER = {"r2": True, "corr": True, "rmse": False, "mae": False}
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SplitSpec:
    """Contiguous chronological fractions; train gets the earliest rows."""

    train: float = 0.60
    validation: float = 0.15
    test: float = 0.25

    def __post_init__(self):
        if min(self.train, self.validation, self.test) <= 0:
            raise InvalidInput("split fractions must be positive")
        if abs(self.train + self.validation + self.test - 1.0) > 1e-9:
            raise InvalidInput("split fractions must sum to 1")

    def row_counts(self, n):
        """Floor the train/validation counts; the remainder goes to test."""
        n_train = int(np.floor(self.train * n))
        n_val = int(np.floor(self.validation * n))
        return n_train, n_val, n - n_train - n_val


def split(dataset, spec=None, min_rows=1):
    """Cut a dataset into chronological (train, validation, test) segments."""
    spec = spec or SplitSpec()
    n_train, n_val, n_test = spec.row_counts(dataset.n_samples)
    if min(n_train, n_val, n_test) < min_rows:
        raise InsufficientData(
            f"split of {dataset.n_samples} rows gives segments {n_train}/{n_val}/{n_test}; each needs >= {min_rows}"
        )
    return (
        dataset.slice(0, n_train),
        dataset.slice(n_train, n_train + n_val),
        dataset.slice(n_train + n_val, dataset.n_samples),
    )


@dataclass(frozen=True)
class GridSpec:
    """Candidate latent counts and orders, either shared or per node.

    ``dlv_grid``/``order_grid`` are lists of candidate lists, one per node;
    a shared axis uses the same value for every node and keeps the cell count
    linear in the candidates. Cells are enumerated in a fixed deterministic
    order; ties on the selection metric fall back to the smaller total
    parameter count and then to the lexicographically smaller ``(l, s)``.
    """

    dlv_grid: tuple
    order_grid: tuple
    metric: str = "rmse"
    shared_dlvs: bool = False
    shared_orders: bool = False

    def __post_init__(self):
        if self.metric not in HIGHER_IS_BETTER:
            raise InvalidInput(f"unknown selection metric '{self.metric}'")
        object.__setattr__(self, "dlv_grid", tuple(tuple(int(v) for v in g) for g in self.dlv_grid))
        object.__setattr__(self, "order_grid", tuple(tuple(int(v) for v in g) for g in self.order_grid))
        if any(not g for g in self.dlv_grid) or any(not g for g in self.order_grid):
            raise InvalidInput("grid candidate lists must be non-empty")

    @staticmethod
    def shared(dlv_candidates, order_candidates, n_nodes, metric="rmse"):
        return GridSpec(
            dlv_grid=tuple([tuple(dlv_candidates)] * n_nodes),
            order_grid=tuple([tuple(order_candidates)] * n_nodes),
            metric=metric,
            shared_dlvs=True,
            shared_orders=True,
        )

    def cells(self):
        """All (l_tuple, s_tuple) combinations in deterministic order."""
        M = len(self.dlv_grid)
        if self.shared_dlvs:
            l_axis = [tuple([v] * M) for v in self.dlv_grid[0]]
        else:
            l_axis = [tuple(c) for c in itertools.product(*self.dlv_grid)]
        if self.shared_orders:
            s_axis = [tuple([v] * M) for v in self.order_grid[0]]
        else:
            s_axis = [tuple(c) for c in itertools.product(*self.order_grid)]
        return [(l, s) for l in l_axis for s in s_axis]


@dataclass
class GridCellResult:
    index: int
    n_dlvs: tuple
    ar_orders: tuple
    metrics: dict | None = None       # pooled validation metrics
    parameter_count: int = 0
    error: str | None = None
    selected: bool = False


@dataclass
class GridSearchResult:
    cells: list
    best_index: int
    topology: object
    model: object                     # refit on train + validation
    test_metrics: dict
    metric: str
    split_rows: tuple = field(default_factory=tuple)


def _validate_grid(grid, topology_template):
    for i in range(topology_template.n_nodes):
        p = topology_template.output_dims[i]
        for v in grid.dlv_grid[i if not grid.shared_dlvs else 0]:
            if not 1 <= v <= p:
                raise InvalidInput(f"latent candidate {v} outside [1, {p}] for node {topology_template.node_names[i]}")
        for v in grid.order_grid[i if not grid.shared_orders else 0]:
            if v < 1:
                raise InvalidInput(f"order candidate {v} must be >= 1")


def grid_search(dataset, topology_template, grid, settings=None, split_spec=None, workers=1):
    """Exhaustive search over the grid; returns the audit table and refit winner.

    Every cell fits on the train segment and is scored by the pooled selection
    metric on validation (lag context taken from the train tail). Failed cells
    are recorded with their error message; only if every cell fails is
    :class:`GridExhausted` raised.
    """
    settings = settings or FitSettings()
    split_spec = split_spec or SplitSpec()
    _validate_grid(grid, topology_template)
    cells = grid.cells()
    if not cells:
        raise InvalidInput("empty grid")
    n_train, n_val, n_test = split_spec.row_counts(dataset.n_samples)
    if min(n_train, n_val, n_test) < 1:
        raise InsufficientData("dataset too short for the requested split")
    train = dataset.slice(0, n_train)

    def run_cell(args):
        index, (l, s) = args
        topo = topology_template.with_hyperparams(l, s)
        cell = GridCellResult(index=index, n_dlvs=l, ar_orders=s, parameter_count=topo.parameter_count())
        try:
            s_max = topo.max_lag
            if n_train < s_max + 2:
                raise InsufficientData(f"train segment of {n_train} rows too short for order {s_max}")
            model = fit(train, topo, settings)
            val_with_context = dataset.slice(n_train - s_max, n_train + n_val)
            _, report = evaluate_model(model, val_with_context)
            cell.metrics = dict(report.pooled)
        except NetLavarxError as exc:
            cell.error = f"{type(exc).__name__}: {exc}"
        return cell

    jobs = list(enumerate(cells))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, jobs))
    else:
        results = [run_cell(j) for j in jobs]
    results.sort(key=lambda c: c.index)

    fitted = [c for c in results if c.error is None and np.isfinite(c.metrics.get(grid.metric, float("nan")))]
    if not fitted:
        raise GridExhausted("every grid cell failed to fit", failures=[(c.index, c.error) for c in results])
    sign = -1.0 if HIGHER_IS_BETTER[grid.metric] else 1.0
    optimum = min(sign * c.metrics[grid.metric] for c in fitted)
    tied = [c for c in fitted if sign * c.metrics[grid.metric] <= optimum + TIE_TOLERANCE]
    best = min(tied, key=lambda c: (c.parameter_count, c.n_dlvs, c.ar_orders, c.index))
    best.selected = True

    best_topo = topology_template.with_hyperparams(best.n_dlvs, best.ar_orders)
    refit_model = fit(dataset.slice(0, n_train + n_val), best_topo, settings)
    s_max = best_topo.max_lag
    test_with_context = dataset.slice(n_train + n_val - s_max, dataset.n_samples)
    _, test_report = evaluate_model(refit_model, test_with_context)
    return GridSearchResult(
        cells=results,
        best_index=best.index,
        topology=best_topo,
        model=refit_model,
        test_metrics=dict(test_report.pooled),
        metric=grid.metric,
        split_rows=(n_train, n_val, n_test),
    )
