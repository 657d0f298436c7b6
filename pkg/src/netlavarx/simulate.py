"""Ground-truth system generation, trajectory simulation, and subspace oracles.

The generated systems pair a static outer map ``y = P v + Pbar e_static`` with
coupled latent autoregressive dynamics driven by exogenous inputs and neighbor
interactions. Stability is imposed at generation time by rescaling the
dynamics so the coupled companion matrix hits a requested spectral radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateGeometry,
    GenerationFailed,
    InvalidInput,
    UnstableSystem,
)
from .numerics import economy_svd

__all__ = [
    "GroundTruthSystem",
    "Trajectory",
    "generate_system",
    "simulate",
    "companion_matrix",
    "spectral_radius",
    "oblique_projector",
    "principal_angles",
]

MAX_CONDITION = 1e6
BURN_IN_FACTOR = 10


@dataclass(frozen=True)
class GroundTruthSystem:
    """True loadings, latent dynamics, and noise levels of a generated system.

    Per node ``i``: loadings ``(p_i, l_i)``, static loadings
    ``(p_i, p_i - l_i)``, autoregressive blocks ``ar_blocks[i][h-1]`` of shape
    ``(l_i, l_i)``, input blocks ``(l_i, m_i)`` and cross blocks
    ``cross_blocks[i][j][h-1]`` of shape ``(l_i, l_j)`` for each neighbor j.
    """

    topology: object
    loadings: tuple
    static_loadings: tuple
    ar_blocks: tuple
    input_blocks: tuple
    cross_blocks: tuple
    dlv_noise_std: tuple
    static_noise_std: tuple


@dataclass(frozen=True)
class Trajectory:
    """Realized samples: per node outputs (T, p_i), latent states (T, l_i), inputs (T, m_i)."""

    outputs: tuple
    dlvs: tuple
    inputs: tuple

    @property
    def n_samples(self):
        return self.outputs[0].shape[0]


def companion_matrix(system):
    """Companion form of the coupled latent dynamics.

    The joint state stacks all nodes' latent vectors; lag blocks ``F_h`` carry
    each node's own autoregressive block on the diagonal and cross blocks off
    the diagonal. Shape is ``(L * s, L * s)`` with ``L = sum(l_i)`` and
    ``s = max(s_i)``.
    """
    topo = system.topology
    M = topo.n_nodes
    L = sum(topo.n_dlvs)
    s = topo.max_lag
    offsets = np.concatenate([[0], np.cumsum(topo.n_dlvs)])
    F = [np.zeros((L, L)) for _ in range(s)]
    for i in range(M):
        rows = slice(offsets[i], offsets[i + 1])
        for h in range(topo.ar_orders[i]):
            F[h][rows, rows] = system.ar_blocks[i][h]
            for j in topo.neighbors[i]:
                F[h][rows, offsets[j] : offsets[j + 1]] = system.cross_blocks[i][j][h]
    comp = np.zeros((L * s, L * s))
    comp[:L] = np.hstack(F)
    if s > 1:
        comp[L:, : L * (s - 1)] = np.eye(L * (s - 1))
    return comp


def spectral_radius(system):
    return float(np.abs(np.linalg.eigvals(companion_matrix(system))).max())


def _draw_loadings(rng, p, l, orthogonal):
    if orthogonal:
        q, _ = np.linalg.qr(rng.standard_normal((p, p)))
        return q[:, :l].copy(), q[:, l:].copy()
    return rng.standard_normal((p, l)), rng.standard_normal((p, p - l))


def generate_system(
    topology,
    seed,
    spectral_target,
    dlv_noise_std=1.0,
    static_noise_std=0.05,
    orthogonal=False,
    max_retries=10,
):
    """Draw a random stable system on ``topology``, deterministic for a fixed seed.

    Coefficients come from a standard normal draw; autoregressive and cross
    blocks at lag ``h`` are then scaled by ``c**h`` with
    ``c = spectral_target / radius``, which moves every companion eigenvalue by
    the factor ``c`` exactly and lands the radius on ``spectral_target``.
    Loadings pairs are redrawn until ``[P Pbar]`` has condition number below
    1e6 (the oblique geometry stays well-posed); set ``orthogonal`` to make
    ``Pbar`` exactly orthogonal to ``P``.
    """
    if not 0.0 < float(spectral_target) < 1.0:
        raise InvalidInput(f"spectral_target must lie in (0, 1), got {spectral_target}")
    M = topology.n_nodes
    dlv_std = _per_node(dlv_noise_std, M, "dlv_noise_std")
    static_std = _per_node(static_noise_std, M, "static_noise_std")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    for _ in range(max_retries):
        loadings, static_loadings = [], []
        ok = True
        for i in range(M):
            p, l = topology.output_dims[i], topology.n_dlvs[i]
            for _ in range(max_retries):
                P, Pbar = _draw_loadings(rng, p, l, orthogonal)
                if np.linalg.cond(np.hstack([P, Pbar])) < MAX_CONDITION:
                    break
            else:
                ok = False
                break
            loadings.append(P)
            static_loadings.append(Pbar)
        if not ok:
            continue
        ar = tuple(
            tuple(rng.standard_normal((topology.n_dlvs[i], topology.n_dlvs[i])) for _ in range(topology.ar_orders[i]))
            for i in range(M)
        )
        inp = tuple(
            tuple(rng.standard_normal((topology.n_dlvs[i], topology.input_dims[i])) for _ in range(topology.ar_orders[i]))
            for i in range(M)
        )
        cross = tuple(
            {
                j: tuple(rng.standard_normal((topology.n_dlvs[i], topology.n_dlvs[j])) for _ in range(topology.ar_orders[i]))
                for j in topology.neighbors[i]
            }
            for i in range(M)
        )
        system = GroundTruthSystem(
            topology=topology,
            loadings=tuple(loadings),
            static_loadings=tuple(static_loadings),
            ar_blocks=ar,
            input_blocks=inp,
            cross_blocks=cross,
            dlv_noise_std=dlv_std,
            static_noise_std=static_std,
        )
        radius = spectral_radius(system)
        if radius <= 1e-12:
            continue
        c = float(spectral_target) / radius
        scaled = GroundTruthSystem(
            topology=topology,
            loadings=system.loadings,
            static_loadings=system.static_loadings,
            ar_blocks=tuple(tuple(c ** (h + 1) * blk for h, blk in enumerate(node)) for node in ar),
            input_blocks=inp,
            cross_blocks=tuple(
                {j: tuple(c ** (h + 1) * blk for h, blk in enumerate(blocks)) for j, blocks in node.items()}
                for node in cross
            ),
            dlv_noise_std=dlv_std,
            static_noise_std=static_std,
        )
        if abs(spectral_radius(scaled) - float(spectral_target)) <= 1e-6:
            return scaled
    raise GenerationFailed(f"could not generate a valid system after {max_retries} attempts")


def _per_node(value, M, name):
    if np.isscalar(value):
        return tuple(float(value) for _ in range(M))
    vals = tuple(float(v) for v in value)
    if len(vals) != M:
        raise InvalidInput(f"{name} must be a scalar or one value per node")
    return vals


def _node_rngs(seed, M):
    if np.isscalar(seed):
        children = np.random.SeedSequence(int(seed)).spawn(M)
        return [np.random.default_rng(c) for c in children]
    seeds = list(seed)
    if len(seeds) != M:
        raise InvalidInput("per-node seeds must supply one value per node")
    return [np.random.default_rng(np.random.SeedSequence(int(s))) for s in seeds]


def simulate(system, n_samples, inputs="zero", seed=0, input_std=1.0):
    """Simulate a trajectory of ``n_samples`` recorded rows.

    ``inputs`` is ``"zero"``, ``"white"`` (i.i.d. normal with ``input_std``),
    or a list of per-node arrays of shape ``(n_samples, m_i)``. A burn-in of
    ``10 * s`` steps starting from the zero state is discarded, so the first
    recorded sample already reflects the stationary regime; provided input
    matrices apply to the recorded window only (burn-in inputs are zero).

    Each node consumes its own random stream derived from ``seed`` (a single
    master seed or a per-node sequence), so one node's draws never depend on
    how much randomness other nodes use.
    """
    topo = system.topology
    M = topo.n_nodes
    s = topo.max_lag
    T = int(n_samples)
    if T <= s:
        raise InvalidInput(f"n_samples must exceed the maximum order {s}")
    radius = spectral_radius(system)
    if radius >= 1.0:
        raise UnstableSystem(f"spectral radius {radius:.6f} >= 1")
    burn = BURN_IN_FACTOR * s
    total = burn + T
    rngs = _node_rngs(seed, M)

    eps, eps_bar, u_full = [], [], []
    for i in range(M):
        p, l, m = topo.output_dims[i], topo.n_dlvs[i], topo.input_dims[i]
        eps.append(rngs[i].standard_normal((total, l)) * system.dlv_noise_std[i])
        eps_bar.append(rngs[i].standard_normal((total, p - l)) * system.static_noise_std[i])
        if m == 0:
            u_full.append(np.zeros((total, 0)))
        elif isinstance(inputs, str) and inputs == "zero":
            u_full.append(np.zeros((total, m)))
        elif isinstance(inputs, str) and inputs == "white":
            u_full.append(rngs[i].standard_normal((total, m)) * float(input_std))
        elif isinstance(inputs, str):
            raise InvalidInput(f"unknown input policy '{inputs}'")
        else:
            provided = np.asarray(inputs[i], dtype=float)
            if provided.shape != (T, m):
                raise InvalidInput(f"node {topo.node_names[i]}: provided inputs must be ({T}, {m})")
            u_full.append(np.vstack([np.zeros((burn, m)), provided]))

    v = [np.zeros((total, topo.n_dlvs[i])) for i in range(M)]
    for k in range(total):
        for i in range(M):
            acc = eps[i][k].copy()
            for h in range(1, topo.ar_orders[i] + 1):
                if k - h < 0:
                    break
                acc += system.ar_blocks[i][h - 1] @ v[i][k - h]
                if topo.input_dims[i]:
                    acc += system.input_blocks[i][h - 1] @ u_full[i][k - h]
                for j in topo.neighbors[i]:
                    acc += system.cross_blocks[i][j][h - 1] @ v[j][k - h]
            v[i][k] = acc
    outputs = tuple(
        v[i][burn:] @ system.loadings[i].T + eps_bar[i][burn:] @ system.static_loadings[i].T
        for i in range(M)
    )
    return Trajectory(
        outputs=outputs,
        dlvs=tuple(v[i][burn:].copy() for i in range(M)),
        inputs=tuple(u_full[i][burn:].copy() for i in range(M)),
    )


def oblique_projector(loadings, static_loadings):
    """Weight matrix ``R`` that extracts the dynamic factors and kills the static ones.

    Given ``P`` (p x l) and ``Pbar`` (p x (p - l)) with ``[P Pbar]``
    nonsingular, returns ``R = Pbar_perp @ inv(P.T @ Pbar_perp)`` where
    ``Pbar_perp`` spans the orthogonal complement of ``range(Pbar)`` (taken
    from the full SVD of ``Pbar``). Then ``R.T P = I``, ``R.T Pbar = 0``, and
    ``P R.T`` is idempotent, so ``R.T (P v + Pbar w) = v`` for every v, w.
    """
    P = np.asarray(loadings, dtype=float)
    Pbar = np.asarray(static_loadings, dtype=float)
    if P.ndim != 2 or Pbar.ndim != 2 or P.shape[0] != Pbar.shape[0]:
        raise InvalidInput("loadings matrices must be 2-D with matching row counts")
    p, l = P.shape
    if Pbar.shape[1] != p - l:
        raise InvalidInput(f"static loadings must have {p - l} columns, got {Pbar.shape[1]}")
    if not (np.isfinite(P).all() and np.isfinite(Pbar).all()):
        raise InvalidInput("loadings contain non-finite entries")
    if Pbar.shape[1] == 0:
        perp = np.eye(p)
    else:
        u, d, _ = np.linalg.svd(Pbar, full_matrices=True)
        rank = int(np.count_nonzero(d > (d[0] * p * np.finfo(float).eps if d.size else 0.0)))
        if rank < Pbar.shape[1]:
            raise DegenerateGeometry("static loadings are rank-deficient; [P Pbar] is singular")
        perp = u[:, rank:]
    G = P.T @ perp
    gu, gd, gvt = np.linalg.svd(G)
    if gd.size == 0 or gd[-1] <= gd[0] * l * np.finfo(float).eps:
        raise DegenerateGeometry("P.T @ Pbar_perp is singular; [P Pbar] is singular")
    G_inv = (gvt.T / gd) @ gu.T
    return perp @ G_inv


def principal_angles(a, b):
    """Canonical angles (degrees, ascending) between two column spans.

    Both matrices must have full column rank and identical shapes. Angles come
    from the singular values of ``Qa.T @ Qb`` (cosines), switching to the
    sine-based formula where the cosine loses precision, so near-identical
    subspaces resolve far below 1e-8 degrees.
    """
    A = np.asarray(a, dtype=float)
    B = np.asarray(b, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape != B.shape:
        raise InvalidInput("principal_angles expects two matrices of identical shape")
    qa, _, _, ra = economy_svd(A)
    qb, _, _, rb = economy_svd(B)
    if ra < A.shape[1] or rb < B.shape[1]:
        raise InvalidInput("principal_angles requires full column rank inputs")
    c = qa.T @ qb
    cosines = np.clip(np.linalg.svd(c, compute_uv=False), -1.0, 1.0)
    # sines ascend once reversed, pairing with the descending cosines
    sines = np.linalg.svd(qb - qa @ c, compute_uv=False)[::-1]
    sines = np.clip(sines, -1.0, 1.0)
    angles = np.where(cosines**2 >= 0.5, np.arcsin(sines), np.arccos(cosines))
    return np.clip(np.degrees(angles), 0.0, 90.0)
