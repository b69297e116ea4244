"""Exact transport and bounded-Lipschitz distances between atom clouds.

All measures here are uniform: mass 1/n on each of n atoms in R^d. For two
such clouds of equal size an optimal transport plan can be taken to be a
permutation (Birkhoff), so W_p reduces to a balanced assignment problem and
is computed exactly. In one dimension sorting gives the same optimum in
O(n log n). Clouds of different sizes are compared exactly by replicating
atoms up to the least common multiple, which leaves both measures unchanged.

The bounded-Lipschitz distance maximizes int f d(mu - nu) over test functions
with 2*(sup|f| + Lip(f)) <= 1. Restricted to the union of the supports this
is a small linear program and the restriction is lossless for discrete
measures (any feasible f on the support points extends to R^d with the same
sup and Lipschitz bounds via the McShane extension).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import csr_matrix

ASSIGNMENT_CAP = 4096
BL_CAP = 512
SORTED_CAP = 1 << 20


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform probability measure on finitely many atoms, shape (n, d)."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise ValueError("an empirical measure needs a (n, d) array with n >= 1")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("empirical measure atoms must be finite")
        object.__setattr__(self, "atoms", atoms)

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True)
class MeasureFlow:
    """One empirical measure per grid time, with a constant atom count."""

    measures: Tuple[EmpiricalMeasure, ...]

    def __post_init__(self):
        measures = tuple(self.measures)
        if not measures:
            raise ValueError("a measure flow needs at least one time point")
        counts = {m.n for m in measures}
        if len(counts) > 1:
            raise ValueError("atom count must be constant across the flow")
        object.__setattr__(self, "measures", measures)

    def __len__(self) -> int:
        return len(self.measures)

    def __getitem__(self, i: int) -> EmpiricalMeasure:
        return self.measures[i]

    @classmethod
    def from_paths(cls, paths: np.ndarray) -> "MeasureFlow":
        """Flow of the particle cloud of a (n, steps+1, d) path array."""
        paths = np.asarray(paths, dtype=float)
        return cls(tuple(EmpiricalMeasure(paths[:, m, :]) for m in range(paths.shape[1])))


def empirical_at(paths: np.ndarray, step: int) -> EmpiricalMeasure:
    """Particle cloud at one grid step of a (n, steps+1, d) path array."""
    paths = np.asarray(paths, dtype=float)
    if not 0 <= step < paths.shape[1]:
        raise ValueError(f"step {step} outside the grid of length {paths.shape[1]}")
    return EmpiricalMeasure(paths[:, step, :])


def w1_sorted_1d(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """W1 between equal-size clouds on the line: mean gap of sorted atoms."""
    if a.dim != 1 or b.dim != 1:
        raise ValueError("sorted W1 is one-dimensional only")
    if a.n != b.n:
        raise ValueError("sorted W1 needs equal atom counts")
    return float(np.mean(np.abs(np.sort(a.atoms[:, 0]) - np.sort(b.atoms[:, 0]))))


def _sorted_1d(x: np.ndarray, y: np.ndarray, p: int) -> float:
    gaps = np.abs(np.sort(x) - np.sort(y))
    return float(np.mean(gaps ** p) ** (1.0 / p))


def wasserstein_exact(a: EmpiricalMeasure, b: EmpiricalMeasure, p: int) -> float:
    """W_p by solving the balanced assignment problem with cost |x - y|^p.

    Equal atom counts only (uniform-to-uniform transport); exact for p in
    {1, 2} since an optimal coupling of two uniform clouds of the same size
    is a permutation matrix.
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if a.n != b.n:
        raise ValueError("equal atom counts required; replicate atoms to compare unequal clouds")
    n = a.n
    if n > ASSIGNMENT_CAP:
        raise ValueError(f"assignment solver capped at n <= {ASSIGNMENT_CAP}")
    diff = a.atoms[:, None, :] - b.atoms[None, :, :]
    cost = np.linalg.norm(diff, axis=2)
    if p == 2:
        cost = cost ** 2
    rows, cols = linear_sum_assignment(cost)
    return float((cost[rows, cols].sum() / n) ** (1.0 / p))


def wasserstein(a: EmpiricalMeasure, b: EmpiricalMeasure, p: int) -> float:
    """W_p dispatcher: sorting in 1-d, assignment otherwise.

    Unequal atom counts are handled exactly by replicating each cloud up to
    lcm(n_a, n_b) atoms, which represents the same two measures.
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if a.n == b.n:
        if a.dim == 1:
            return _sorted_1d(a.atoms[:, 0], b.atoms[:, 0], p)
        return wasserstein_exact(a, b, p)
    m = math.lcm(a.n, b.n)
    if a.dim == 1:
        if m > SORTED_CAP:
            raise ValueError(f"replicated cloud of {m} atoms exceeds the 1-d cap {SORTED_CAP}")
        x = np.repeat(np.sort(a.atoms[:, 0]), m // a.n)
        y = np.repeat(np.sort(b.atoms[:, 0]), m // b.n)
        return float(np.mean(np.abs(x - y) ** p) ** (1.0 / p))
    if m > ASSIGNMENT_CAP:
        raise ValueError(f"replicated cloud of {m} atoms exceeds the assignment cap {ASSIGNMENT_CAP}")
    ax = np.repeat(a.atoms, m // a.n, axis=0)
    bx = np.repeat(b.atoms, m // b.n, axis=0)
    return wasserstein_exact(EmpiricalMeasure(ax), EmpiricalMeasure(bx), p)


def bounded_lipschitz(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """Bounded-Lipschitz distance via a linear program on the union support.

    Variables are the test-function values f_k at the support points plus the
    envelope bounds s >= sup|f| and L >= Lip(f); the feasible set is
    |f_k| <= s, |f_k - f_l| <= L * |x_k - x_l|, s + L <= 1/2 and the objective
    is the mean of f over a minus the mean over b. f = 0 is always feasible.
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    support = np.vstack([a.atoms, b.atoms])
    k = support.shape[0]
    if k > BL_CAP:
        raise ValueError(f"bounded-Lipschitz LP capped at {BL_CAP} support points")

    weights = np.concatenate([np.full(a.n, 1.0 / a.n), np.full(b.n, -1.0 / b.n)])
    # variable order: f_0 .. f_{k-1}, s, L
    c = np.concatenate([-weights, [0.0, 0.0]])

    rows_i, rows_j = np.triu_indices(k, k=1)
    dists = np.linalg.norm(support[rows_i] - support[rows_j], axis=1)
    npairs = rows_i.size

    # rows: +-f_k - s <= 0 ; +-(f_i - f_j) - d_ij L <= 0 ; s + L <= 1/2
    n_rows = 2 * k + 2 * npairs + 1
    ks = np.arange(k)
    env_rows = np.arange(2 * k)
    env_row_idx = np.concatenate([env_rows, env_rows])
    env_col_idx = np.concatenate([np.tile(ks, 2), np.full(2 * k, k)])
    env_data = np.concatenate([np.ones(k), -np.ones(k), -np.ones(2 * k)])

    pair_rows = 2 * k + np.arange(2 * npairs)
    pair_row_idx = np.concatenate([pair_rows, pair_rows, pair_rows])
    pair_col_idx = np.concatenate(
        [np.tile(rows_i, 2), np.tile(rows_j, 2), np.full(2 * npairs, k + 1)]
    )
    pair_data = np.concatenate(
        [np.ones(npairs), -np.ones(npairs), -np.ones(npairs), np.ones(npairs), -np.tile(dists, 2)]
    )

    last = n_rows - 1
    row_idx = np.concatenate([env_row_idx, pair_row_idx, [last, last]])
    col_idx = np.concatenate([env_col_idx, pair_col_idx, [k, k + 1]])
    data = np.concatenate([env_data, pair_data, [1.0, 1.0]])

    a_ub = csr_matrix((data, (row_idx, col_idx)), shape=(n_rows, k + 2))
    b_ub = np.zeros(n_rows)
    b_ub[-1] = 0.5
    bounds = [(None, None)] * k + [(0.0, None), (0.0, None)]

    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if not res.success:
        raise RuntimeError(f"bounded-Lipschitz LP failed: {res.message}")
    return max(float(-res.fun), 0.0)


_METRICS = {
    "W1": lambda a, b: wasserstein(a, b, 1),
    "W2": lambda a, b: wasserstein(a, b, 2),
    "dBL": bounded_lipschitz,
}


def distance(a: EmpiricalMeasure, b: EmpiricalMeasure, metric: str) -> float:
    try:
        fn = _METRICS[metric]
    except KeyError:
        raise ValueError(f"unknown metric '{metric}'; choose one of {sorted(_METRICS)}") from None
    return fn(a, b)


def sup_distance(flow_a: MeasureFlow, flow_b: MeasureFlow, metric: str) -> float:
    """Largest per-time distance over a shared grid (grid max, not continuum sup)."""
    if len(flow_a) != len(flow_b):
        raise ValueError("measure flows must share the grid length")
    return max(distance(flow_a[m], flow_b[m], metric) for m in range(len(flow_a)))


def fournier_guillin_rate(p: float, q: float, d: int, n: int) -> float:
    """Moment-convergence rate alpha_{p,q}(n) for empirical measures in R^d.

    Case split on p versus d/2; the boundary parameter combinations
    (q = 2p alongside p >= d/2, q = d/(d-p) alongside p < d/2) are outside
    all cases and rejected.
    """
    if p <= 0.0:
        raise ValueError("p must be positive")
    if q <= p:
        raise ValueError("q must exceed p")
    if d < 1 or n < 1:
        raise ValueError("d and n must be >= 1")
    half_d = d / 2.0
    if p > half_d:
        if q == 2.0 * p:
            raise ValueError("boundary q = 2p excluded for p > d/2")
        return n ** (-0.5) + n ** (-(q - p) / q)
    if p == half_d:
        if q == 2.0 * p:
            raise ValueError("boundary q = 2p excluded for p = d/2")
        return n ** (-0.5) * math.log(1.0 + n) + n ** (-(q - p) / q)
    if q == d / (d - p):
        raise ValueError("boundary q = d/(d-p) excluded for p < d/2")
    return n ** (-p / d) + n ** (-(q - p) / q)
