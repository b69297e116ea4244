"""Interaction models and the shared-noise Euler-Maruyama integrator.

Two finite systems are simulated side by side from identical initial states
and identical Brownian increments:

* the random-graph system, with pairwise drift averaged through the sampled
  adjacency matrix scaled by 1/(n p(n)),
* the graphon-weight system, with the deterministic weights G(i/n, j/n)/n.

Both share one recursion, so when the two weight matrices coincide the paths
agree float-for-float. A large weighted system (the reference ensemble, run
on an independent noise stream) stands in for the label-averaged law of the
continuum system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from . import rng as streams
from .graphon import (
    Graphon,
    InteractionMatrices,
    SparsityRule,
    interaction_matrices,
    sample_adjacency,
    weight_matrix,
)

TWO_PI = 2.0 * math.pi
FOURIER_RESIDUE_TOL = 1e-10


class SimulationOverflow(RuntimeError):
    """A path left the finite floats; the replication is aborted."""

    def __init__(self, system: str, step: int):
        super().__init__(f"non-finite state in {system} system at step {step}")
        self.system = system
        self.step = step


@dataclass(frozen=True)
class FourierInteraction:
    """A real kernel written as the Fourier transform of a finite atomic measure.

    ``atoms`` is a sequence of (frequency z in R^{2d}, complex weight w) and
    the kernel value at (x, y) is the real part of
    sum_k w_k * exp(2*pi*i * <(x, y), z_k>). ``total_mass`` is the total mass
    of the measure split into its four nonnegative parts, i.e.
    sum_k |Re w_k| + |Im w_k|.
    """

    atoms: Tuple[Tuple[np.ndarray, complex], ...]
    total_mass: float = field(default=0.0)

    def __post_init__(self):
        norm_atoms = tuple((np.asarray(z, dtype=float).ravel(), complex(w)) for z, w in self.atoms)
        object.__setattr__(self, "atoms", norm_atoms)
        mass = sum(abs(w.real) + abs(w.imag) for _, w in norm_atoms)
        if self.total_mass == 0.0:
            object.__setattr__(self, "total_mass", mass)
        elif self.total_mass < mass - 1e-12:
            raise ValueError("total_mass below the four-part decomposition of the atom weights")


def fourier_evaluate(fi: FourierInteraction, x, y) -> float:
    """Evaluate the kernel at (x, y); the result must be real.

    Raises if the imaginary residue exceeds 1e-10, which signals a measure
    that does not represent a real-valued function.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    point = np.concatenate([x, y])
    total = 0.0 + 0.0j
    for z, w in fi.atoms:
        total += w * np.exp(1j * TWO_PI * float(np.dot(point, z)))
    if abs(total.imag) > FOURIER_RESIDUE_TOL:
        raise ValueError(f"imaginary residue {total.imag:.3e} exceeds {FOURIER_RESIDUE_TOL}")
    return float(total.real)


def kuramoto_fourier(coupling: float) -> FourierInteraction:
    """Atomic measure reproducing K*sin(y - x) under the 2*pi convention.

    sin(y - x) = (e^{i(y-x)} - e^{-i(y-x)}) / (2i), so the atoms sit at
    z = (-1, 1)/(2*pi) and z = (1, -1)/(2*pi) with weights +-K/(2i).
    """
    k = float(coupling)
    w = k / 2j
    z = np.array([-1.0, 1.0]) / TWO_PI
    return FourierInteraction(atoms=((z, w), (-z, -w)))


@dataclass(frozen=True)
class InteractionModel:
    """Pairwise drift phi, single-particle drift psi, and constant diffusion.

    ``phi(x, y)`` and ``psi(x)`` must accept broadcasting numpy arrays whose
    last axis has length ``dim`` and return arrays of the same trailing shape.
    ``lipschitz_k`` bounds |phi(x1,y1)-phi(x2,y2)| + |psi(x1)-psi(x2)| by
    k*(|x1-x2| + |y1-y2|); ``phi_bound`` bounds |phi| (may be inf for
    unbounded toy models).
    """

    dim: int
    phi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    psi: Callable[[np.ndarray], np.ndarray]
    sigma: np.ndarray
    lipschitz_k: float
    phi_bound: float
    fourier: Optional[Tuple[FourierInteraction, ...]] = None
    name: str = "custom"
    # optional O(n^2)-multiply shortcut for sum_j w_ij phi(x_i, x_j); must be
    # algebraically identical to the pairwise evaluation
    pair_rowsum: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sigma.shape != (self.dim, self.dim):
            raise ValueError(f"sigma must be {self.dim}x{self.dim}, got {sigma.shape}")
        object.__setattr__(self, "sigma", sigma)

    def spot_check(self, rng: np.random.Generator, trials: int = 1000, scale: float = 3.0) -> None:
        """Probe the Lipschitz and boundedness contracts on random inputs."""
        d = self.dim
        x1, y1, x2, y2 = (scale * rng.standard_normal((trials, d)) for _ in range(4))
        lhs = _norm(self.phi(x1, y1) - self.phi(x2, y2)) + _norm(self.psi(x1) - self.psi(x2))
        rhs = self.lipschitz_k * (_norm(x1 - x2) + _norm(y1 - y2))
        if np.any(lhs > rhs * (1.0 + 1e-9) + 1e-12):
            raise ValueError(f"model '{self.name}' violates its Lipschitz constant {self.lipschitz_k}")
        if math.isfinite(self.phi_bound):
            vals = _norm(self.phi(x1, y1))
            if np.any(vals > self.phi_bound * (1.0 + 1e-9) + 1e-12):
                raise ValueError(f"model '{self.name}' violates its phi bound {self.phi_bound}")


def _norm(a: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.atleast_2d(a), axis=-1)


def _psi_zero(x):
    return np.zeros_like(x)


def _compose_psi(psi_name: str, theta: float) -> Tuple[Callable, float]:
    if psi_name == "zero":
        return _psi_zero, 0.0
    if psi_name == "ou":
        t = float(theta)
        return (lambda x: -t * x), abs(t)
    raise ValueError(f"unknown single-particle drift '{psi_name}'")


def make_model(
    name: str,
    *,
    coupling: float = 1.0,
    dim: int = 1,
    psi_name: str = "zero",
    theta: float = 1.0,
    sigma: float = 1.0,
) -> InteractionModel:
    """Build one of the named models; sigma is a scalar multiple of identity.

    ``kuramoto``: d = 1, phi(x, y) = coupling * sin(y - x).
    ``linear_attraction``: phi(x, y) = y - x (unbounded; phi_bound = inf).
    ``zero``: phi = 0.
    """
    psi, psi_lip = _compose_psi(psi_name, theta)
    sig = float(sigma) * np.eye(dim if name != "kuramoto" else 1)
    if name == "kuramoto":
        k = float(coupling)

        def kuramoto_rowsum(weights, state):
            # sum_j w_ij sin(x_j - x_i) = cos(x_i)(W sin x)_i - sin(x_i)(W cos x)_i
            col = state[:, 0]
            s, c = np.sin(col), np.cos(col)
            return (k * (c * (weights @ s) - s * (weights @ c)))[:, None]

        return InteractionModel(
            dim=1,
            phi=lambda x, y: k * np.sin(y - x),
            psi=psi,
            sigma=sig,
            lipschitz_k=k + psi_lip,
            phi_bound=k,
            fourier=(kuramoto_fourier(k),),
            name="kuramoto",
            pair_rowsum=kuramoto_rowsum,
        )
    if name == "linear_attraction":

        def linear_rowsum(weights, state):
            # sum_j w_ij (x_j - x_i) = (W x)_i - x_i * rowsum(W)_i
            return weights @ state - state * weights.sum(axis=1)[:, None]

        return InteractionModel(
            dim=dim,
            phi=lambda x, y: y - x,
            psi=psi,
            sigma=sig,
            lipschitz_k=1.0 + psi_lip,
            phi_bound=math.inf,
            name="linear_attraction",
            pair_rowsum=linear_rowsum,
        )
    if name == "zero":
        return InteractionModel(
            dim=dim,
            phi=lambda x, y: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y))),
            psi=psi,
            sigma=sig,
            lipschitz_k=psi_lip,
            phi_bound=0.0,
            name="zero",
            pair_rowsum=lambda weights, state: np.zeros_like(state),
        )
    raise ValueError(f"unknown model '{name}'")


@dataclass(frozen=True)
class InitialLaw:
    """Initial particle distribution, optionally label-dependent.

    ``params`` values may be constants (broadcastable to (dim,)) or callables
    of the label u in [0, 1]; callables should be piecewise Lipschitz in u.
    All three kinds are sub-Gaussian by construction.
    """

    kind: str  # "gaussian" | "point_mass" | "uniform_box"
    params: dict

    def __post_init__(self):
        if self.kind == "gaussian":
            if "mean" not in self.params or "cov" not in self.params:
                raise ValueError("gaussian initial law needs 'mean' and 'cov'")
            cov = np.atleast_2d(np.asarray(self.params["cov"], dtype=float))
            if not np.allclose(cov, cov.T):
                raise ValueError("gaussian covariance must be symmetric")
            if np.linalg.eigvalsh(cov).min() < -1e-12:
                raise ValueError("gaussian covariance must be positive semidefinite")
            self.params["_chol"] = np.linalg.cholesky(cov + 1e-15 * np.eye(cov.shape[0]))
        elif self.kind == "point_mass":
            self.params.setdefault("at", 0.0)
        elif self.kind == "uniform_box":
            if "low" not in self.params or "high" not in self.params:
                raise ValueError("uniform box initial law needs 'low' and 'high'")
            lo, hi = self.params["low"], self.params["high"]
            if not callable(lo) and not callable(hi) and np.any(np.asarray(lo) > np.asarray(hi)):
                raise ValueError("uniform box needs low <= high")
        else:
            raise ValueError(f"unknown initial law '{self.kind}'")

    def _param(self, key, u, dim):
        value = self.params[key]
        if callable(value):
            return np.stack([np.broadcast_to(np.asarray(value(ui), float), (dim,)) for ui in u])
        return np.broadcast_to(np.asarray(value, dtype=float), (len(u), dim))

    def sample(self, u: np.ndarray, dim: int, rng: np.random.Generator) -> np.ndarray:
        """One draw per label; consumes draws in particle-major order."""
        u = np.asarray(u, dtype=float)
        n = len(u)
        if self.kind == "point_mass":
            return self._param("at", u, dim).copy()
        if self.kind == "uniform_box":
            lo = self._param("low", u, dim)
            hi = self._param("high", u, dim)
            return lo + (hi - lo) * rng.random((n, dim))
        z = rng.standard_normal((n, dim))
        return self._param("mean", u, dim) + z @ self.params["_chol"].T


def make_initial_law(kind: str, **params) -> InitialLaw:
    return InitialLaw(kind, params)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, horizon] with ``steps`` Euler steps."""

    horizon: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("time grid needs at least one step")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")

    @property
    def step_size(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)


@dataclass(frozen=True)
class CoupledPaths:
    """Trajectories of the two finite systems from shared randomness.

    ``random_graph`` and ``graphon_weight`` are (n, steps+1, dim) arrays; both
    recursions consumed the recorded ``initial`` states and raw Brownian
    ``increments`` (variance h per step, before sigma is applied).
    """

    n: int
    grid: TimeGrid
    random_graph: np.ndarray
    graphon_weight: np.ndarray
    initial: np.ndarray
    increments: np.ndarray
    matrices: InteractionMatrices


@dataclass(frozen=True)
class ReferenceEnsemble:
    """Large graphon-weight system standing in for the averaged continuum law."""

    n_ref: int
    grid: TimeGrid
    paths: np.ndarray  # (n_ref, steps+1, dim)


def pairwise_interaction(model: InteractionModel, state: np.ndarray) -> np.ndarray:
    """phi(state_i, state_j) for all ordered pairs, shape (n, n, dim)."""
    return model.phi(state[:, None, :], state[None, :, :])


def drift(model: InteractionModel, weights: np.ndarray, state: np.ndarray) -> np.ndarray:
    """Row i: sum_j weights[i, j] * phi(state_i, state_j) + psi(state_i).

    Uses the model's row-sum shortcut when it has one; both finite systems
    always take the same branch, so coupled runs stay bit-comparable.
    """
    if model.pair_rowsum is not None:
        inter = model.pair_rowsum(weights, state)
    elif model.dim == 1:
        col = state[:, 0]
        inter = np.einsum("ij,ij->i", weights, model.phi(col[:, None], col[None, :]))[:, None]
    else:
        inter = np.einsum("ij,ijk->ik", weights, pairwise_interaction(model, state))
    return inter + model.psi(state)


def drift_sparse(model: InteractionModel, matrices: InteractionMatrices, state: np.ndarray) -> np.ndarray:
    return drift(model, matrices.weights, state)


def drift_weight(model: InteractionModel, matrices: InteractionMatrices, state: np.ndarray) -> np.ndarray:
    return drift(model, matrices.mean_weights, state)


def euler_paths(
    model: InteractionModel,
    weights: np.ndarray,
    initial: np.ndarray,
    increments: np.ndarray,
    step_size: float,
    system: str = "weighted",
) -> np.ndarray:
    """Explicit Euler-Maruyama recursion on a fixed grid.

    ``increments`` holds the raw Brownian increments (n, steps, dim) with
    per-step variance equal to ``step_size``; sigma is applied here. Aborts
    with SimulationOverflow on the first non-finite state.
    """
    n, steps, dim = increments.shape
    noise = increments @ model.sigma.T
    out = np.empty((n, steps + 1, dim), dtype=float)
    state = np.array(initial, dtype=float, copy=True)
    out[:, 0, :] = state
    for m in range(steps):
        state = state + step_size * drift(model, weights, state) + noise[:, m, :]
        if not np.all(np.isfinite(state)):
            raise SimulationOverflow(system, m + 1)
        out[:, m + 1, :] = state
    return out


def brownian_increments(
    master_seed: int, purpose: int, replication: int, n: int, grid: TimeGrid, dim: int
) -> np.ndarray:
    """Raw increments, N(0, h) per coordinate, addressable by (particle, step).

    Drawn in particle-major order from the (purpose, replication) stream, so
    the block for particle i is independent of n.
    """
    gen = streams.stream(master_seed, purpose, replication)
    return gen.standard_normal((n, grid.steps, dim)) * math.sqrt(grid.step_size)


def simulate_coupled(
    model: InteractionModel,
    initial_law: InitialLaw,
    g: Graphon,
    sparsity: SparsityRule,
    n: int,
    grid: TimeGrid,
    master_seed: int,
    replication: int = 0,
) -> CoupledPaths:
    """Run both finite systems from shared initial states and increments.

    The adjacency matrix is sampled once per replication and frozen for the
    whole horizon. Identical (model, inputs, seed, replication) reproduce the
    paths bit-for-bit on one platform/build.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    model.spot_check(streams.stream(master_seed, streams.PROBE, 0))
    p = sparsity.probability(n)
    adjacency = sample_adjacency(g, n, p, streams.stream(master_seed, streams.ADJACENCY, replication))
    matrices = interaction_matrices(adjacency, g)
    labels = np.arange(1, n + 1, dtype=float) / n
    initial = initial_law.sample(labels, model.dim, streams.stream(master_seed, streams.INITIAL, replication))
    increments = brownian_increments(master_seed, streams.BROWNIAN, replication, n, grid, model.dim)
    h = grid.step_size
    random_graph = euler_paths(model, matrices.weights, initial, increments, h, system="random-graph")
    graphon_weight = euler_paths(model, matrices.mean_weights, initial, increments, h, system="graphon-weight")
    return CoupledPaths(
        n=n,
        grid=grid,
        random_graph=random_graph,
        graphon_weight=graphon_weight,
        initial=initial,
        increments=increments,
        matrices=matrices,
    )


def simulate_reference(
    model: InteractionModel,
    initial_law: InitialLaw,
    g: Graphon,
    n_ref: int,
    grid: TimeGrid,
    master_seed: int,
) -> ReferenceEnsemble:
    """Weighted system with n_ref particles on its own noise streams.

    Callers are expected to enforce n_ref >= 4 * (largest compared n) at
    configuration time; a single-particle ensemble is rejected outright.
    """
    if n_ref < 2:
        raise ValueError("reference ensemble needs at least 2 particles")
    model.spot_check(streams.stream(master_seed, streams.PROBE, 0))
    weights = weight_matrix(g, n_ref)
    labels = np.arange(1, n_ref + 1, dtype=float) / n_ref
    initial = initial_law.sample(
        labels, model.dim, streams.stream(master_seed, streams.REFERENCE_INITIAL, 0)
    )
    increments = brownian_increments(
        master_seed, streams.REFERENCE_BROWNIAN, 0, n_ref, grid, model.dim
    )
    paths = euler_paths(model, weights, initial, increments, grid.step_size, system="reference")
    return ReferenceEnsemble(n_ref=n_ref, grid=grid, paths=paths)


def export_paths_csv(paths: np.ndarray, replication: int, fh) -> None:
    """Columnar dump: replication, particle, step, coordinate, value."""
    n, steps1, dim = paths.shape
    for i in range(n):
        for m in range(steps1):
            for k in range(dim):
                fh.write(f"{replication},{i},{m},{k},{paths[i, m, k]:.17g}\n")
