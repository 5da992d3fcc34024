"""State spaces and their particle-function representations.

Two backends share one small interface used by the sequence algebra, the
cumulant operators and the solvers:

``FinitePhase``
    ``M`` abstract phase points with positive weights.  An ``n``-particle
    function is a dense ``numpy`` table of shape ``(M,) * n``; every integral is
    an exact weighted sum.

``ContinuousPhase``
    Particles in ``R^d x R^d``.  An ``n``-particle function is a
    :class:`PhaseFunction`, evaluated lazily on arrays of phase points of shape
    ``(..., n, 2d)`` (positions first, then momenta).  Integrals use a tensor
    Gauss-Hermite rule per coordinate, or seeded Monte Carlo.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .combinatorics import ResourceLimitError
from .numerics import NumericError, compensated_sum

__all__ = [
    "FinitePhase",
    "ContinuousPhase",
    "PhaseFunction",
    "ZeroFunction",
    "ConstantFunction",
    "is_finite_space",
]

TABLE_LIMIT = 65536


class FinitePhase:
    """Finite weighted phase model with ``M`` points."""

    def __init__(self, M: int, weights: Sequence[float] | None = None, table_limit: int = TABLE_LIMIT):
        if M < 1:
            raise ValueError("M must be positive")
        w = np.ones(M) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (M,):
            raise ValueError(f"expected {M} weights, got shape {w.shape}")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and strictly positive")
        self.M = M
        self.weights = w
        self.weights.setflags(write=False)
        self.table_limit = table_limit

    def __repr__(self) -> str:
        return f"FinitePhase(M={self.M}, weights={self.weights.tolist()})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FinitePhase)
            and self.M == other.M
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self) -> int:
        return hash((self.M, self.weights.tobytes()))

    # -- construction -------------------------------------------------------

    def check_arity(self, n: int) -> None:
        if self.M**n > self.table_limit:
            raise ResourceLimitError(f"table of {self.M}**{n} entries exceeds limit {self.table_limit}")

    def zeros(self, n: int) -> np.ndarray:
        self.check_arity(n)
        return np.zeros((self.M,) * n)

    def constant(self, n: int, c: float) -> np.ndarray:
        self.check_arity(n)
        return np.full((self.M,) * n, float(c))

    def from_callable(self, n: int, fn: Callable[..., float]) -> np.ndarray:
        out = self.zeros(n)
        for idx in itertools.product(range(self.M), repeat=n):
            out[idx] = fn(*idx)
        return out

    def random_symmetric(self, n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        self.check_arity(n)
        return scale * symmetrize(rng.standard_normal((self.M,) * n))

    # -- backend interface ----------------------------------------------------

    @staticmethod
    def arity(f: np.ndarray) -> int:
        return np.ndim(f)

    @staticmethod
    def is_zero(f) -> bool:
        return not np.any(f)

    def integrate_last(self, f: np.ndarray, k: int) -> np.ndarray:
        n = np.ndim(f)
        if k < 0 or k > n:
            raise ValueError(f"cannot integrate {k} arguments of an arity-{n} function")
        out = np.asarray(f, dtype=float)
        for _ in range(k):
            out = np.tensordot(out, self.weights, axes=([-1], [0]))
        return out

    def integrate_all(self, f: np.ndarray) -> float:
        return float(self.integrate_last(f, np.ndim(f)))

    def embed(self, f: np.ndarray, positions: Sequence[int], n: int) -> np.ndarray:
        """View ``f`` as an ``n``-variable function of the variables ``positions``.

        The result broadcasts against ``(M,) * n``; axis ``positions[j]`` carries
        axis ``j`` of ``f`` and the others have length one.
        """
        positions = list(positions)
        k = np.ndim(f)
        if len(positions) != k:
            raise ValueError("positions must match the arity of f")
        g = np.reshape(f, np.shape(f) + (1,) * (n - k))
        rest = [i for i in range(n) if i not in positions]
        return np.moveaxis(g, list(range(n)), positions + rest)

    def product(self, factors: Sequence[tuple[np.ndarray, Sequence[int]]], n: int) -> np.ndarray:
        out = self.constant(n, 1.0)
        for f, pos in factors:
            out = out * self.embed(f, pos, n)
        return out

    def linear_combination(self, coeffs: Sequence[float], funcs: Sequence[np.ndarray], n: int) -> np.ndarray:
        if not funcs:
            return self.zeros(n)
        full = (self.M,) * n
        return np.asarray(
            compensated_sum(np.broadcast_to(c * np.asarray(f), full) for c, f in zip(coeffs, funcs)),
            dtype=float,
        ).reshape(full)

    def permute(self, f: np.ndarray, order: Sequence[int]) -> np.ndarray:
        """``g(x_0..x_{n-1}) = f(x_{order[0]}, ..., x_{order[n-1]})``."""
        return np.moveaxis(f, list(range(len(order))), list(order))

    def scalar(self, f) -> float:
        return float(np.asarray(f))


def symmetrize(f: np.ndarray) -> np.ndarray:
    n = np.ndim(f)
    if n < 2:
        return np.array(f, dtype=float)
    perms = list(itertools.permutations(range(n)))
    return sum(np.transpose(f, p) for p in perms) / len(perms)


def is_finite_space(space) -> bool:
    return isinstance(space, FinitePhase)


# ---------------------------------------------------------------------------
# Continuous phase space
# ---------------------------------------------------------------------------


class PhaseFunction:
    """An evaluable ``n``-particle function on ``(R^d x R^d)^n``.

    ``fn`` receives an array of shape ``(..., n, 2d)`` and returns ``(...)``.
    """

    def __init__(self, arity: int, fn: Callable[[np.ndarray], np.ndarray], label: str = ""):
        self.arity = arity
        self._fn = fn
        self.label = label

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim < 2 or X.shape[-2] != self.arity:
            raise ValueError(f"expected points of shape (..., {self.arity}, 2d), got {X.shape}")
        out = np.asarray(self._fn(X), dtype=float)
        return np.broadcast_to(out, X.shape[:-2])

    def __repr__(self) -> str:
        return f"PhaseFunction(arity={self.arity}{', ' + self.label if self.label else ''})"


class ZeroFunction(PhaseFunction):
    def __init__(self, arity: int):
        super().__init__(arity, lambda X: np.zeros(X.shape[:-2]), "0")


class ConstantFunction(PhaseFunction):
    def __init__(self, arity: int, value: float):
        self.value = float(value)
        super().__init__(arity, lambda X: np.full(X.shape[:-2], self.value), f"{value}")


@dataclass
class ContinuousPhase:
    """Continuous phase space ``(R^d x R^d)`` with a per-coordinate quadrature.

    ``center`` and ``scale`` (length ``2d``: positions then momenta) adapt the
    Gauss-Hermite nodes to the bulk of the data; ``method='monte_carlo'`` uses
    ``mc_samples`` seeded Gaussian importance samples per particle instead.
    """

    d: int = 1
    nodes: int = 20
    center: Sequence[float] | None = None
    scale: Sequence[float] | None = None
    method: str = "gauss_hermite"
    mc_samples: int = 100_000
    seed: int = 0
    chunk: int = 2_000_000
    _grid: tuple[np.ndarray, np.ndarray] | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.nodes < 1:
            raise ValueError("quadrature needs at least one node per coordinate")
        dim = 2 * self.d
        self.center = np.zeros(dim) if self.center is None else np.asarray(self.center, dtype=float)
        self.scale = np.ones(dim) if self.scale is None else np.asarray(self.scale, dtype=float)
        if self.center.shape != (dim,) or self.scale.shape != (dim,):
            raise ValueError(f"center and scale need {dim} entries")
        if not np.all(self.scale > 0):
            raise ValueError("quadrature scales must be positive")
        if self.method not in ("gauss_hermite", "monte_carlo"):
            raise ValueError(f"unknown quadrature method {self.method!r}")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ContinuousPhase)
            and self.d == other.d
            and self.nodes == other.nodes
            and self.method == other.method
            and np.array_equal(self.center, other.center)
            and np.array_equal(self.scale, other.scale)
        )

    def __hash__(self) -> int:
        return hash((self.d, self.nodes, self.method))

    @property
    def dim(self) -> int:
        return 2 * self.d

    def one_particle_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes ``(Q, 2d)`` and weights ``(Q,)`` integrating one particle."""
        if self._grid is None:
            if self.method == "gauss_hermite":
                xi, om = np.polynomial.hermite.hermgauss(self.nodes)
                per_axis = []
                for c, s in zip(self.center, self.scale):
                    per_axis.append((c + math.sqrt(2.0) * s * xi, math.sqrt(2.0) * s * om * np.exp(xi**2)))
                pts = np.array(list(itertools.product(*[a[0] for a in per_axis])))
                wts = np.array([math.prod(w) for w in itertools.product(*[a[1] for a in per_axis])])
            else:
                rng = np.random.default_rng(self.seed)
                z = rng.standard_normal((self.mc_samples, self.dim))
                pts = self.center + self.scale * z
                log_pdf = -0.5 * np.sum(z**2, axis=1) - np.sum(np.log(self.scale)) - 0.5 * self.dim * math.log(2 * math.pi)
                wts = np.exp(-log_pdf) / self.mc_samples
            self._grid = (pts, wts)
        return self._grid

    # -- backend interface ----------------------------------------------------

    @staticmethod
    def arity(f: PhaseFunction) -> int:
        return f.arity

    @staticmethod
    def is_zero(f) -> bool:
        return isinstance(f, ZeroFunction)

    def zeros(self, n: int) -> PhaseFunction:
        return ZeroFunction(n)

    def constant(self, n: int, c: float) -> PhaseFunction:
        return ConstantFunction(n, c)

    def integrate_last(self, f: PhaseFunction, k: int) -> PhaseFunction:
        n = f.arity
        if k < 0 or k > n:
            raise ValueError(f"cannot integrate {k} arguments of an arity-{n} function")
        if k == 0:
            return f
        if isinstance(f, ZeroFunction):
            return ZeroFunction(n - k)
        if k > 1:
            # one particle at a time keeps memory at O(Q) per evaluation point
            return self.integrate_last(self.integrate_last(f, 1), k - 1)
        pts, wts = self.one_particle_grid()
        G = pts[:, None, :]  # (Q, 1, 2d)
        W = wts
        dim = self.dim

        def integrated(X: np.ndarray) -> np.ndarray:
            batch = X.shape[:-2]
            Xf = X.reshape((int(np.prod(batch, dtype=int)), n - k, dim))
            out = np.empty(Xf.shape[0])
            step = max(1, self.chunk // max(1, len(W) * n))
            for a in range(0, Xf.shape[0], step):
                xs = Xf[a : a + step]
                full = np.concatenate(
                    [
                        np.broadcast_to(xs[:, None], (xs.shape[0], len(W), n - k, dim)),
                        np.broadcast_to(G[None], (xs.shape[0], len(W), k, dim)),
                    ],
                    axis=2,
                )
                vals = f(full)
                out[a : a + step] = vals @ W
            if not np.all(np.isfinite(out)):
                raise NumericError("non-finite value in quadrature")
            return out.reshape(batch)

        return PhaseFunction(n - k, integrated, f"int_{k}[{f.label}]")

    def integrate_all(self, f: PhaseFunction) -> float:
        g = self.integrate_last(f, f.arity)
        return float(g(np.zeros((0, self.dim))))

    def embed(self, f: PhaseFunction, positions: Sequence[int], n: int) -> PhaseFunction:
        positions = list(positions)
        if len(positions) != f.arity:
            raise ValueError("positions must match the arity of f")
        if isinstance(f, ZeroFunction):
            return ZeroFunction(n)
        if positions == list(range(n)):
            return f
        return PhaseFunction(n, lambda X: f(X[..., positions, :]), f.label)

    def product(self, factors: Sequence[tuple[PhaseFunction, Sequence[int]]], n: int) -> PhaseFunction:
        factors = [(f, list(p)) for f, p in factors]
        if any(isinstance(f, ZeroFunction) for f, _ in factors):
            return ZeroFunction(n)

        def prod(X: np.ndarray) -> np.ndarray:
            out = np.ones(X.shape[:-2])
            for f, p in factors:
                out = out * f(X[..., p, :])
            return out

        return PhaseFunction(n, prod, "*".join(f.label for f, _ in factors))

    def linear_combination(self, coeffs: Sequence[float], funcs: Sequence[PhaseFunction], n: int) -> PhaseFunction:
        pairs = [(float(c), f) for c, f in zip(coeffs, funcs) if c != 0 and not isinstance(f, ZeroFunction)]
        if not pairs:
            return ZeroFunction(n)

        def comb(X: np.ndarray) -> np.ndarray:
            return compensated_sum(c * f(X) for c, f in pairs)

        return PhaseFunction(n, comb, "lin")

    def permute(self, f: PhaseFunction, order: Sequence[int]) -> PhaseFunction:
        order = list(order)
        return PhaseFunction(f.arity, lambda X: f(X[..., order, :]), f.label)

    def scalar(self, f) -> float:
        if isinstance(f, PhaseFunction):
            return float(f(np.zeros((0, self.dim))))
        return float(f)

    def random_points(self, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
        return self.center + self.scale * rng.standard_normal((count, n, self.dim))
