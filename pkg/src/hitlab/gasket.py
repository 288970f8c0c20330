"""Sierpinski gasket graphs and hitting measure of the simple random walk.

Generation 1 is a single triangle; generation n is built by tripling
generation n-1 and gluing the copies at shared corner vertices.  Hitting
(absorption) distributions are computed exactly by sparse linear solves of
the absorbed-chain equations, with a Monte Carlo walker as an independent
cross-check, and entropy scans compare the measures against the
generation-index bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix, diags
from scipy.sparse.linalg import cg as sparse_cg

from ._parallel import chunk_sizes, map_ordered
from .rng import RngStream
from .stats import entropy_base2

MAX_GENERATION = 12

#: acceptable residual of (I - Q) h = r per solve, in the max norm
SOLVER_RESIDUAL_TOL = 1e-10

_WALK_CHUNK = 16384


class GasketGraph:
    """Generation-n gasket graph with labelled corner and side vertices.

    Vertices are ordered lexicographically by coordinate, which makes ids,
    exports and subset definitions reproducible.  Attributes:

    - ``generation``: the generation index n (1 = single triangle)
    - ``coords``: (n_vertices, 2) float array, unit side length
    - ``edges``: (n_edges, 2) int array, each row u < v
    - ``top``: id of the apex vertex
    - ``bottom_side``, ``left_side``, ``right_side``: ordered id arrays;
      the three corner vertices belong to two sides each
    - ``degrees``: vertex degrees (2 at the corners, 4 elsewhere)
    """

    def __init__(self, generation, coords, edges, top, bottom_side, left_side, right_side):
        self.generation = int(generation)
        self.coords = np.asarray(coords, dtype=float)
        self.edges = np.asarray(edges, dtype=np.int64)
        self.top = int(top)
        self.bottom_side = np.asarray(bottom_side, dtype=np.int64)
        self.left_side = np.asarray(left_side, dtype=np.int64)
        self.right_side = np.asarray(right_side, dtype=np.int64)

        n = self.coords.shape[0]
        u, v = self.edges[:, 0], self.edges[:, 1]
        heads = np.concatenate([u, v])
        tails = np.concatenate([v, u])
        order = np.lexsort((tails, heads))
        heads, tails = heads[order], tails[order]
        self._indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(heads, minlength=n), out=self._indptr[1:])
        self._indices = tails
        self.degrees = np.diff(self._indptr)

        pad = np.full((n, int(self.degrees.max())), -1, dtype=np.int64)
        for v_id in range(n):
            nbrs = self.neighbors(v_id)
            pad[v_id, : nbrs.size] = nbrs
        self._nbr_pad = pad

    @property
    def n_vertices(self) -> int:
        return int(self.coords.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def neighbors(self, v: int) -> np.ndarray:
        return self._indices[self._indptr[v] : self._indptr[v + 1]]

    def adjacency(self) -> csr_matrix:
        n = self.n_vertices
        data = np.ones(self._indices.size, dtype=float)
        return csr_matrix((data, self._indices, self._indptr), shape=(n, n))

    def vertex_roles(self) -> list[str]:
        """One of top/bottom/side/interior per vertex (top wins over sides)."""
        roles = ["interior"] * self.n_vertices
        for v in self.left_side:
            roles[v] = "side"
        for v in self.right_side:
            roles[v] = "side"
        for v in self.bottom_side:
            roles[v] = "bottom"
        roles[self.top] = "top"
        return roles


def vertex_count(generation: int) -> int:
    """Closed-form vertex count 3 (3^{n-1} + 1) / 2."""
    return 3 * (3 ** (generation - 1) + 1) // 2


def bottom_side_size(generation: int) -> int:
    """Closed-form bottom-side size 2^{n-1} + 1."""
    return 2 ** (generation - 1) + 1


def build_gasket(n: int) -> GasketGraph:
    """Construct the generation-n gasket graph.

    Built iteratively on an integer triangular lattice: generation g is
    three shifted copies of generation g-1 glued at the three touching
    corner points, so vertex identification is exact integer equality.
    """
    if not 1 <= n <= MAX_GENERATION:
        raise ValueError(f"generation must lie in 1..{MAX_GENERATION}")

    edges = [((0, 0), (1, 0)), ((0, 0), (0, 1)), ((1, 0), (0, 1))]
    for g in range(2, n + 1):
        shift = 2 ** (g - 2)
        edges = [
            ((a[0] + di, a[1] + dj), (b[0] + di, b[1] + dj))
            for (di, dj) in ((0, 0), (shift, 0), (0, shift))
            for (a, b) in edges
        ]

    side = 2 ** (n - 1)
    # canonical order: lexicographic by Cartesian coordinate, exact in integers
    points = sorted({p for e in edges for p in e}, key=lambda p: (2 * p[0] + p[1], p[1]))
    ids = {p: k for k, p in enumerate(points)}

    coords = np.array(
        [((i + 0.5 * j) / side, (j * math.sqrt(3.0) / 2.0) / side) for i, j in points]
    )
    edge_ids = np.array(
        sorted(tuple(sorted((ids[a], ids[b]))) for a, b in edges), dtype=np.int64
    )

    bottom = [ids[(i, 0)] for i in range(side + 1)]
    left = [ids[(0, j)] for j in range(side + 1)]
    right = [ids[(side - j, j)] for j in range(side + 1)]
    return GasketGraph(
        generation=n,
        coords=coords,
        edges=edge_ids,
        top=ids[(0, side)],
        bottom_side=bottom,
        left_side=left,
        right_side=right,
    )


@dataclass(frozen=True)
class HittingLaw:
    """Probability distribution over a finite set of target vertices."""

    targets: np.ndarray
    probs: np.ndarray
    max_residual: float | None = None

    def __post_init__(self):
        targets = np.asarray(self.targets, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=float)
        if targets.ndim != 1 or targets.shape != probs.shape or targets.size == 0:
            raise ValueError("targets and probs must be equally long and non-empty")
        if np.any(probs < 0.0) or np.any(probs > 1.0 + 1e-12):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 within 1e-12")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "probs", probs)


def _check_absorbing(g: GasketGraph, start: int, absorbing) -> np.ndarray:
    targets = np.asarray(list(absorbing), dtype=np.int64)
    if targets.size == 0:
        raise ValueError("absorbing set must be non-empty")
    if np.unique(targets).size != targets.size:
        raise ValueError("absorbing set contains duplicate vertices")
    if np.any(targets < 0) or np.any(targets >= g.n_vertices):
        raise ValueError("absorbing set contains invalid vertex ids")
    if not 0 <= start < g.n_vertices:
        raise ValueError("start vertex is not in the graph")
    return targets


def hitting_distribution(
    g: GasketGraph, start: int, absorbing, method: str = "cg"
) -> HittingLaw:
    """Exact absorption distribution of the simple random walk from `start`.

    For each target the absorbed-chain equations (I - Q) h = r are solved
    on the transient vertices; the system is attacked in its symmetrised
    positive-definite form (D - A) h = (column of A into the target), with
    conjugate gradients by default and a dense solve as cross-check
    (`method="dense"`).  Solver residuals are verified against
    ``SOLVER_RESIDUAL_TOL`` before the law is normalised.
    """
    targets = _check_absorbing(g, start, absorbing)
    if start in set(targets.tolist()):
        probs = (targets == start).astype(float)
        return HittingLaw(targets, probs, max_residual=0.0)
    if method not in ("cg", "dense"):
        raise ValueError("method must be 'cg' or 'dense'")

    absorbing_mask = np.zeros(g.n_vertices, dtype=bool)
    absorbing_mask[targets] = True
    transient = np.nonzero(~absorbing_mask)[0]
    t_index = -np.ones(g.n_vertices, dtype=np.int64)
    t_index[transient] = np.arange(transient.size)

    adj = g.adjacency()
    a_tt = adj[transient][:, transient]
    a_ta = adj[transient][:, targets]
    deg_t = g.degrees[transient].astype(float)
    m = diags(deg_t) - a_tt  # symmetric positive definite grounded Laplacian
    start_row = t_index[start]

    if method == "dense":
        h = np.linalg.solve(m.toarray(), a_ta.toarray())
        resid = np.abs(a_ta.toarray() - m @ h) / deg_t[:, None]
        max_residual = float(resid.max())
        probs_raw = h[start_row, :].copy()
    else:
        precond = diags(1.0 / deg_t)
        probs_raw = np.empty(targets.size)
        max_residual = 0.0
        for k in range(targets.size):
            b = np.asarray(a_ta[:, k].todense()).ravel()
            h, info = sparse_cg(m, b, M=precond, rtol=1e-12, atol=0.0, maxiter=100_000)
            if info != 0:
                raise RuntimeError(f"conjugate gradients failed to converge (info={info})")
            resid = float(np.max(np.abs(b - m @ h) / deg_t))
            max_residual = max(max_residual, resid)
            probs_raw[k] = h[start_row]

    if max_residual > SOLVER_RESIDUAL_TOL:
        raise RuntimeError(
            f"solver residual {max_residual:g} exceeds {SOLVER_RESIDUAL_TOL:g}"
        )
    probs = np.clip(probs_raw, 0.0, None)
    probs /= probs.sum()
    return HittingLaw(targets, probs, max_residual=max_residual)


def mc_srw_hitting(
    g: GasketGraph,
    start: int,
    absorbing,
    replicates: int,
    rng: RngStream,
    workers: int = 1,
) -> HittingLaw:
    """Empirical absorption frequencies from independent random walks.

    Deterministic given (seed, stream assignment): walks are generated in
    fixed chunks keyed by substream index, independent of worker count.
    """
    targets = _check_absorbing(g, start, absorbing)
    if replicates < 1:
        raise ValueError("replicates must be positive")
    if start in set(targets.tolist()):
        probs = (targets == start).astype(float)
        return HittingLaw(targets, probs)

    slot = -np.ones(g.n_vertices, dtype=np.int64)
    slot[targets] = np.arange(targets.size)
    is_absorbing = slot >= 0
    deg = g.degrees
    pad = g._nbr_pad
    step_guard = 200 * 5**g.generation + 10_000

    def walk_chunk(args):
        index, count = args
        gen = rng.substream(index).generator()
        pos = np.full(count, start, dtype=np.int64)
        counts = np.zeros(targets.size, dtype=np.int64)
        for _ in range(step_guard):
            pos = pad[pos, gen.integers(0, deg[pos])]
            hit = is_absorbing[pos]
            if hit.any():
                counts += np.bincount(slot[pos[hit]], minlength=targets.size)
                pos = pos[~hit]
                if pos.size == 0:
                    return counts
        raise RuntimeError("random walks exceeded the step guard before absorption")

    jobs = list(enumerate(chunk_sizes(replicates, _WALK_CHUNK)))
    counts = np.sum(map_ordered(walk_chunk, jobs, workers), axis=0)
    return HittingLaw(targets, counts / replicates)


def entropy_bits(law: HittingLaw) -> float:
    """Base-2 entropy of a hitting law."""
    return entropy_base2(law.probs)


@dataclass(frozen=True)
class ScanRow:
    generation: int
    subset: str
    size: int
    entropy: float
    bound: float
    within_bound: bool
    is_max: bool


def conjecture_scan(
    n_max: int,
    subsets=("bottom_side", "all_boundary", "random"),
    random_subsets: int = 2,
    rng: RngStream | None = None,
) -> list[ScanRow]:
    """Exact entropy of hitting measures from the top vertex, per generation.

    For each generation up to `n_max` and each named subset family
    (bottom_side, all_boundary = union of the three sides, and random
    subsets of bottom-side size drawn without replacement) the scan records
    the exact entropy, whether it stays at or below the generation index,
    and whether the bottom side attains the maximum among scanned subsets.
    Violations of the bound are findings in the output, never errors.
    """
    if not 1 <= n_max <= 9:
        raise ValueError("n_max must lie in 1..9")
    known = {"bottom_side", "all_boundary", "random"}
    if not set(subsets) <= known:
        raise ValueError(f"subset names must be among {sorted(known)}")
    rng = rng or RngStream(seed=0)

    rows: list[ScanRow] = []
    for n in range(1, n_max + 1):
        g = build_gasket(n)
        named: list[tuple[str, np.ndarray]] = []
        if "bottom_side" in subsets:
            named.append(("bottom_side", g.bottom_side))
        if "all_boundary" in subsets:
            boundary = np.unique(
                np.concatenate([g.bottom_side, g.left_side, g.right_side])
            )
            named.append(("all_boundary", boundary))
        if "random" in subsets:
            gen = rng.substream(n).generator()
            candidates = np.setdiff1d(np.arange(g.n_vertices), [g.top])
            size = min(bottom_side_size(n), candidates.size)
            for k in range(random_subsets):
                pick = np.sort(gen.choice(candidates, size=size, replace=False))
                named.append((f"random_{k}", pick))

        results = []
        for name, subset in named:
            law = hitting_distribution(g, g.top, subset)
            results.append((name, subset.size, entropy_bits(law)))
        top_entropy = max(e for _, _, e in results)
        for name, size, e in results:
            rows.append(
                ScanRow(
                    generation=n,
                    subset=name,
                    size=int(size),
                    entropy=float(e),
                    bound=float(n),
                    within_bound=bool(e <= n + 1e-9),
                    is_max=bool(e >= top_entropy - 1e-12),
                )
            )
    return rows
