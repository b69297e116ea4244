"""The infinity-to-one matrix norm and closed-form concentration bounds.

The norm is sup <x, A y> over x, y in [-1, 1]^n. The objective is bilinear,
so the sup is attained at sign vectors, and for fixed x the inner problem is
solved by y = sign(A^T x); the outer maximization is a 2^(n-1) enumeration
(x and -x give the same value). Above the exact cutoff an alternating
sign-ascent heuristic provides a certified lower bound.

The bound evaluators are direct formula translations; the tail bounds for
the centered interaction matrix are probabilities, while the Gram-matrix
bound and the distance-concentration bounds are upper bounds that may exceed
one and are deliberately not clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXACT_CAP = 22
_CHUNK = 1 << 14


@dataclass(frozen=True)
class BoundParams:
    """User-supplied constants for the concentration bounds.

    The underlying results only assert existence of such constants, so these
    are illustrative knobs, not estimated quantities.
    """

    delta: float = 1.0
    big_k: float = 1.0

    def __post_init__(self):
        if self.delta <= 0.0 or self.big_k <= 0.0:
            raise ValueError("bound parameters must be strictly positive")


def _sign_patterns(nbits: int, start: int, count: int) -> np.ndarray:
    codes = np.arange(start, start + count, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(nbits, dtype=np.int64)[None, :]) & 1
    return (2 * bits - 1).astype(np.float64)


def norm_inf_to_1_exact(a: np.ndarray) -> float:
    """Exact norm by enumerating x in {-1, 1}^n with the first sign fixed.

    max_x ||A^T x||_1 equals the bilinear sup; cost is O(2^n * n^2), so n is
    capped at 22. Larger matrices should use the heuristic.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix required")
    n = a.shape[0]
    if n > EXACT_CAP:
        raise ValueError(f"exact enumeration capped at n <= {EXACT_CAP}; use norm_inf_to_1_heuristic")
    if n == 1:
        return float(abs(a[0, 0]))
    total = 1 << (n - 1)
    first_row = a[0, :]
    rest = a[1:, :]
    best = 0.0
    for start in range(0, total, _CHUNK):
        count = min(_CHUNK, total - start)
        signs = _sign_patterns(n - 1, start, count)
        vals = np.abs(first_row[None, :] + signs @ rest).sum(axis=1)
        best = max(best, float(vals.max()))
    return best


def norm_inf_to_1_heuristic(a: np.ndarray, restarts: int, rng: np.random.Generator) -> float:
    """Alternating sign-ascent lower bound on the norm.

    From a random x, iterate y = sign(A^T x), x = sign(A y); each half-step
    is the exact inner maximization, so the value is nondecreasing and the
    result never exceeds the true norm. Ties sign(0) resolve to +1 for
    determinism.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix required")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    n = a.shape[0]
    best = 0.0
    for _ in range(restarts):
        x = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        value = -math.inf
        for _ in range(200):
            y = np.where(a.T @ x >= 0.0, 1.0, -1.0)
            x = np.where(a @ y >= 0.0, 1.0, -1.0)
            new_value = float(x @ a @ y)
            if new_value <= value:
                break
            value = new_value
        best = max(best, value)
    return max(best, 0.0)


def gram_norm(a: np.ndarray, method: str = "auto", restarts: int = 50, rng=None) -> float:
    """Norm of A^T A, exactly when the size permits, else by the heuristic."""
    a = np.asarray(a, dtype=float)
    gram = a.T @ a
    n = gram.shape[0]
    if method == "auto":
        method = "exact" if n <= EXACT_CAP else "heuristic"
    if method == "exact":
        return norm_inf_to_1_exact(gram)
    if method == "heuristic":
        if rng is None:
            rng = np.random.default_rng(0)
        return norm_inf_to_1_heuristic(gram, restarts, rng)
    raise ValueError(f"unknown method '{method}'")


def cutnorm_tail_bound(eta: float, n: int, p: float) -> float:
    """P[norm of the centered interaction matrix / n > eta] upper bound.

    Valid for every n and 0 < eta <= n; the value is a probability and is
    clamped to [0, 1].
    """
    if not 0.0 < eta <= n:
        raise ValueError(f"eta must lie in (0, n] = (0, {n}], got {eta}")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    value = math.exp(-(eta ** 2) * n ** 2 * p / (2.0 + eta / 3.0))
    return min(max(value, 0.0), 1.0)


def gram_tail_bound(eta: float, n: int, p: float) -> float:
    """Upper bound on P[norm of Gram of the centered matrix / n > eta].

    Holds for all large n only, and can exceed 1 (vacuous region); it is not
    clamped because it is an analytic bound rather than a probability.
    """
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    return 3.0 * n ** 2 * math.exp(-2.0 * eta ** 2 * n * p ** 4 / (9.0 + 4.0 * eta))


#: Tail-bound variants, named by metric and by which finite system the bound
#: concerns. The *_sparse variants need the sparsity value p; the others do
#: not. ``w2_sparse_dense`` is the dense-graph (p = 1) specialization.
TAIL_BOUND_KINDS = (
    "w1_weight",
    "w1_sparse",
    "bl_sparse",
    "w2_weight",
    "w2_sparse",
    "w2_sparse_dense",
)


def concentration_tail_bound(kind: str, a: float, n: int, params: BoundParams, p: float = None) -> float:
    """Closed-form right-hand side of the selected concentration bound.

    All variants are monotone nonincreasing in the threshold ``a`` and may
    exceed 1 for small a (not clamped).
    """
    if a <= 0.0:
        raise ValueError("threshold a must be positive")
    if kind == "w1_weight" or kind == "w2_weight":
        return 2.0 * math.exp(-params.delta * a ** 2 * n / 4.0)
    if kind == "w1_sparse" or kind == "bl_sparse":
        return 3.0 * math.exp(-params.delta * a ** 2 * n / 16.0)
    if kind == "w2_sparse":
        if p is None:
            raise ValueError("the w2_sparse bound needs the sparsity value p")
        if not 0.0 < p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        k = params.big_k
        return 4.0 * n ** 2 * math.exp(-(a ** 4) * n * p ** 4 / (72.0 * k ** 2 + 8.0 * a ** 2 * k))
    if kind == "w2_sparse_dense":
        return math.exp(-params.delta * a ** 4 * n / (a ** 2 + params.delta))
    raise ValueError(f"unknown bound kind '{kind}'; choose one of {TAIL_BOUND_KINDS}")


def bernstein_bound(u: float, v: float, b: float) -> float:
    """Classic Bernstein tail exp(-u^2 / (2(v + bu/3))) for bounded sums."""
    if u <= 0.0:
        raise ValueError("u must be positive")
    if v < 0.0:
        raise ValueError("v must be nonnegative")
    if b <= 0.0:
        raise ValueError("b must be positive")
    return math.exp(-(u ** 2) / (2.0 * (v + b * u / 3.0)))
