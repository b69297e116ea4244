"""Graphon kernels, deterministic weight matrices, and adjacency sampling.

A graphon is a symmetric measurable kernel G: [0,1]^2 -> [0,1]. For a system
of n particles labelled u_i = i/n it induces

* a deterministic weight matrix with entries G(i/n, j/n)/n,
* a random 0/1 adjacency matrix with edge probabilities p * G(i/n, j/n),
* the normalized random interaction matrix xi/(n*p) and its centered
  deviation from the weight matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class Graphon:
    """Symmetric kernel on the unit square with values in [0, 1].

    ``kernel`` must accept numpy arrays and broadcast. ``lipschitz_constant``
    is optional metadata for kernels that are Lipschitz on the whole square
    (piecewise-constant grids are not).
    """

    name: str
    kernel: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lipschitz_constant: Optional[float] = None


def constant(value: float) -> Graphon:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"constant graphon value must lie in [0, 1], got {value}")
    v = float(value)

    def kernel(u, w):
        shape = np.broadcast_shapes(np.shape(u), np.shape(w))
        return np.full(shape, v)

    return Graphon("constant", kernel, 0.0)


def product() -> Graphon:
    return Graphon("product", lambda u, w: np.asarray(u, float) * np.asarray(w, float), 1.0)


def minimum() -> Graphon:
    return Graphon("min", lambda u, w: np.minimum(np.asarray(u, float), np.asarray(w, float)), 1.0)


def piecewise_constant(values) -> Graphon:
    """Step graphon on an m x m grid of equal cells.

    Cells are left-closed; the boundary u = 1 maps into the last cell, so the
    kernel is defined everywhere on [0, 1]^2.
    """
    grid = np.asarray(values, dtype=float)
    if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
        raise ValueError("grid graphon needs a square value matrix")
    if not np.array_equal(grid, grid.T):
        raise ValueError("grid graphon value matrix must be symmetric")
    if grid.min() < 0.0 or grid.max() > 1.0:
        raise ValueError("grid graphon values must lie in [0, 1]")
    m = grid.shape[0]

    def kernel(u, w):
        iu = np.minimum((np.asarray(u, float) * m).astype(int), m - 1)
        iw = np.minimum((np.asarray(w, float) * m).astype(int), m - 1)
        return grid[iu, iw]

    return Graphon("piecewise_constant", kernel, None)


def custom(kernel: Callable, lipschitz_constant: Optional[float] = None) -> Graphon:
    """Wrap a user kernel; symmetry and range are spot-checked on first use."""
    return Graphon("custom", kernel, lipschitz_constant)


def evaluate(g: Graphon, u, v):
    """Evaluate G(u, v); rejects arguments outside the unit square."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u < 0.0) or np.any(u > 1.0) or np.any(v < 0.0) or np.any(v > 1.0):
        raise ValueError("graphon arguments must lie in [0, 1]")
    out = np.asarray(g.kernel(u, v), dtype=float)
    if out.shape == ():
        return float(out)
    return out


def spot_check(g: Graphon, rng: np.random.Generator, trials: int = 256, tol: float = 1e-12) -> None:
    """Probe symmetry and range on random points; raises on violation."""
    u = rng.random(trials)
    v = rng.random(trials)
    a = evaluate(g, u, v)
    b = evaluate(g, v, u)
    if np.max(np.abs(np.asarray(a) - np.asarray(b))) > tol:
        raise ValueError(f"graphon '{g.name}' is not symmetric")
    if np.min(a) < -tol or np.max(a) > 1.0 + tol:
        raise ValueError(f"graphon '{g.name}' leaves [0, 1]")


@dataclass(frozen=True)
class SparsityRule:
    """Edge-retention probability p(n): either p(n) = 1 or p(n) = n^-gamma."""

    form: str  # "dense" | "power_law"
    exponent: float = 0.0

    def __post_init__(self):
        if self.form not in ("dense", "power_law"):
            raise ValueError(f"unknown sparsity form '{self.form}'")
        if self.form == "power_law" and self.exponent <= 0.0:
            raise ValueError("power-law sparsity needs a positive exponent")

    def probability(self, n: int) -> float:
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.form == "dense":
            return 1.0
        return float(n) ** (-self.exponent)

    def degree_diverges(self) -> bool:
        """Whether n * p(n) -> infinity (diverging mean degree)."""
        return self.form == "dense" or self.exponent < 1.0

    def squared_degree_diverges(self) -> bool:
        """Whether p(n) -> 0 with n * p(n)^2 -> infinity, or p(n) = 1."""
        return self.form == "dense" or self.exponent < 0.5


@dataclass(frozen=True)
class AdjacencySample:
    """Symmetric 0/1 adjacency matrix with its sampling parameters."""

    n: int
    p: float
    xi: np.ndarray  # (n, n) int8, xi[i, j] == xi[j, i]


@dataclass(frozen=True)
class InteractionMatrices:
    """The three n x n interaction matrices of one sampled system.

    ``weights`` is xi/(n*p); ``mean_weights`` is G(i/n, j/n)/n, the entrywise
    expectation of ``weights``; ``deviation`` is their exact difference.
    """

    weights: np.ndarray
    mean_weights: np.ndarray
    deviation: np.ndarray


def weight_matrix(g: Graphon, n: int) -> np.ndarray:
    """Deterministic weights G(i/n, j/n)/n for i, j = 1..n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = np.arange(1, n + 1, dtype=float) / n
    return evaluate(g, u[:, None], u[None, :]) / n


def sample_adjacency(
    g: Graphon,
    n: int,
    p: float,
    rng: np.random.Generator,
    self_loops: bool = True,
) -> AdjacencySample:
    """Draw xi[i, j] ~ Bernoulli(p * G(i/n, j/n)) for i <= j, mirrored below.

    Uniform variates are consumed in row-major order over the upper triangle,
    so a given generator state yields a bit-identical matrix. Diagonal entries
    are sampled by default (the i = j case is not excluded); ``self_loops``
    exists for sensitivity checks.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"edge retention probability must lie in (0, 1], got {p}")
    u = np.arange(1, n + 1, dtype=float) / n
    rows, cols = np.triu_indices(n, k=0 if self_loops else 1)
    probs = p * np.asarray(evaluate(g, u[rows], u[cols]))
    draws = rng.random(rows.size)
    xi = np.zeros((n, n), dtype=np.int8)
    xi[rows, cols] = draws < probs
    xi[cols, rows] = xi[rows, cols]
    return AdjacencySample(n=n, p=float(p), xi=xi)


def interaction_matrices(a: AdjacencySample, g: Graphon) -> InteractionMatrices:
    weights = a.xi.astype(float) / (a.n * a.p)
    mean_weights = weight_matrix(g, a.n)
    return InteractionMatrices(
        weights=weights,
        mean_weights=mean_weights,
        deviation=weights - mean_weights,
    )


def save_adjacency_csv(sample: AdjacencySample, path) -> None:
    """Dense 0/1 CSV dump for debugging."""
    np.savetxt(path, sample.xi, fmt="%d", delimiter=",")
