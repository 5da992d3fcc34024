"""Evolution groups ``S_n(t)`` on both models and the generators behind them.

Two model objects expose the same interface to the cumulant and solver code:

``evolve(f, t, blocks, direction)``
    Apply ``prod_B S_{|B|}(-t, B)`` (states) or ``prod_B S_{|B|}(t, B)``
    (observables) to an ``n``-particle function; each block of positions
    evolves as an isolated cluster and uncovered positions are left alone.
``evolve_derivative(f, t, blocks, direction)``
    The time derivative of ``evolve``.
``interaction(f, positions)``
    The part of the state generator attached to exactly the particles in
    ``positions``: ``{K(p_i), f}`` for one particle, ``{Phi^(k), f}`` for ``k``.
    Summing it over all nonempty subsets of ``range(n)`` gives ``{H_n, f}``.

On the finite model the generator of ``n`` particles is
``L_n = sum_i K^(i) + sum_{i<j} Phi^(ij) + ...`` and ``S_n(-t) = exp(t L_n)``.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .combinatorics import ResourceLimitError, subsets
from .numerics import NumericError
from .spaces import ContinuousPhase, FinitePhase, PhaseFunction, ZeroFunction

__all__ = [
    "STATE",
    "OBSERVABLE",
    "PairPotential",
    "HarmonicPair",
    "GaussianPair",
    "KBodyPotential",
    "Hamiltonian",
    "hamilton_flow",
    "harmonic_flow",
    "verlet_flow",
    "compose_flow",
    "poisson_bracket_with",
    "liouville_rhs",
    "FiniteLiouvillian",
    "apply_sites",
    "finite_flow",
    "FiniteModel",
    "ContinuousModel",
]

STATE = "state"
OBSERVABLE = "observable"
N_DYN_MAX = 6


def _check_direction(direction: str) -> float:
    """Sign ``sigma`` with ``S = exp(sigma * t * L)``: +1 for states, -1 for observables."""
    if direction == STATE:
        return 1.0
    if direction == OBSERVABLE:
        return -1.0
    raise ValueError(f"direction must be {STATE!r} or {OBSERVABLE!r}, got {direction!r}")


# ---------------------------------------------------------------------------
# Hamiltonians of the continuous model
# ---------------------------------------------------------------------------


class PairPotential:
    """``Phi(q_i - q_j)`` for a radially symmetric pair interaction."""

    def value(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, r: np.ndarray) -> np.ndarray:
        """``d Phi / d r`` with the same shape as ``r`` (last axis is the d coordinates)."""
        raise NotImplementedError


@dataclass(frozen=True)
class HarmonicPair(PairPotential):
    kappa: float = 1.0

    def value(self, r):
        return 0.5 * self.kappa * np.sum(r * r, axis=-1)

    def gradient(self, r):
        return self.kappa * r


@dataclass(frozen=True)
class GaussianPair(PairPotential):
    """Smooth bounded repulsion ``eps * exp(-|r|^2 / (2 sigma^2))``."""

    eps: float = 1.0
    sigma: float = 1.0

    def value(self, r):
        return self.eps * np.exp(-np.sum(r * r, axis=-1) / (2 * self.sigma**2))

    def gradient(self, r):
        return -(r / self.sigma**2) * self.value(r)[..., None]


@dataclass(frozen=True)
class KBodyPotential:
    """A ``k``-body potential given by its value and position gradient.

    ``value(Q)`` takes positions of shape ``(..., k, d)`` and returns ``(...)``;
    ``gradient(Q)`` returns ``(..., k, d)``.
    """

    k: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Hamiltonian:
    """``H_n = sum_i |p_i|^2/(2m) + sum_{i<j} Phi(q_i - q_j) + sum_k sum Phi^(k)``."""

    mass: float = 1.0
    d: int = 1
    pair: PairPotential | None = field(default_factory=HarmonicPair)
    many_body: tuple[KBodyPotential, ...] = ()

    def __post_init__(self) -> None:
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        for pot in self.many_body:
            if pot.k < 3:
                raise ValueError("many-body potentials start at k = 3; use `pair` for k = 2")

    @property
    def is_quadratic(self) -> bool:
        return (self.pair is None or isinstance(self.pair, HarmonicPair)) and not self.many_body

    def split(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self.d
        if X.shape[-1] != 2 * d:
            raise ValueError(f"phase points need {2 * d} coordinates, got {X.shape[-1]}")
        return X[..., :d], X[..., d:]

    def potential_gradient(self, Q: np.ndarray) -> np.ndarray:
        """``d H / d q`` for positions ``(..., n, d)``."""
        n = Q.shape[-2]
        grad = np.zeros_like(Q)
        if self.pair is not None and n > 1:
            r = Q[..., :, None, :] - Q[..., None, :, :]
            g = self.pair.gradient(r)
            idx = np.arange(n)
            g[..., idx, idx, :] = 0.0
            grad = grad + np.sum(g, axis=-2)
        for pot in self.many_body:
            for J in itertools.combinations(range(n), pot.k):
                grad[..., J, :] += pot.gradient(Q[..., J, :])
        return grad

    def energy(self, X: np.ndarray) -> np.ndarray:
        Q, P = self.split(np.asarray(X, dtype=float))
        n = Q.shape[-2]
        e = np.sum(P * P, axis=(-1, -2)) / (2 * self.mass)
        if self.pair is not None:
            for i, j in itertools.combinations(range(n), 2):
                e = e + self.pair.value(Q[..., i, :] - Q[..., j, :])
        for pot in self.many_body:
            for J in itertools.combinations(range(n), pot.k):
                e = e + pot.value(Q[..., J, :])
        return e

    def gradients(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(dH/dq, dH/dp)`` at phase points ``(..., n, 2d)``."""
        Q, P = self.split(X)
        return self.potential_gradient(Q), P / self.mass


# ---------------------------------------------------------------------------
# Hamilton flows
# ---------------------------------------------------------------------------


def harmonic_flow(points: np.ndarray, t: float, h: Hamiltonian) -> np.ndarray:
    """Exact flow of the harmonic pair chain, by its normal modes.

    The centre of mass moves freely; every relative mode oscillates with
    ``omega = sqrt(n kappa / m)`` because the all-pairs Laplacian has the
    single nonzero eigenvalue ``n``.
    """
    X = np.asarray(points, dtype=float)
    Q, P = h.split(X)
    n = Q.shape[-2]
    m = h.mass
    kappa = h.pair.kappa if h.pair is not None else 0.0
    Qc = np.mean(Q, axis=-2, keepdims=True)
    Pc = np.mean(P, axis=-2, keepdims=True)
    Qr, Pr = Q - Qc, P - Pc
    Qc_t = Qc + t * Pc / m
    if kappa == 0.0 or n == 1:
        Qr_t, Pr_t = Qr + t * Pr / m, Pr
    else:
        w = math.sqrt(n * kappa / m)
        c, s = math.cos(w * t), math.sin(w * t)
        Qr_t = c * Qr + s / (m * w) * Pr
        Pr_t = -m * w * s * Qr + c * Pr
    return np.concatenate([Qc_t + Qr_t, Pc + Pr_t], axis=-1)


def verlet_flow(points: np.ndarray, t: float, h: Hamiltonian, dt: float = 1e-3, drift_tol: float = 1e-4) -> np.ndarray:
    """Velocity Verlet with the step shrunk so that an integer number of steps lands on ``t``."""
    X = np.asarray(points, dtype=float)
    if t == 0:
        return X.copy()
    steps = max(1, math.ceil(abs(t) / dt))
    step = t / steps
    Q, P = (a.copy() for a in h.split(X))
    e0 = h.energy(X)
    F = -h.potential_gradient(Q)
    for _ in range(steps):
        P += 0.5 * step * F
        Q += step * P / h.mass
        F = -h.potential_gradient(Q)
        P += 0.5 * step * F
    out = np.concatenate([Q, P], axis=-1)
    e1 = h.energy(out)
    drift = np.abs(e1 - e0) / np.maximum(1.0, np.abs(e0))
    if not np.all(np.isfinite(out)) or np.any(drift > drift_tol):
        raise NumericError(f"energy drift {float(np.max(drift)):.3e} exceeds {drift_tol:g}")
    return out


def hamilton_flow(points: np.ndarray, t: float, h: Hamiltonian, dt: float = 1e-3, drift_tol: float = 1e-4) -> np.ndarray:
    """Phase points after evolving ``n`` particles for time ``t`` under ``h``.

    ``points`` has shape ``(..., n, 2d)``.  The state group uses this at ``-t``:
    ``(S_n(-t) f)(x) = f(hamilton_flow(x, -t))``.
    """
    X = np.asarray(points, dtype=float)
    n = X.shape[-2]
    if n > N_DYN_MAX:
        raise ResourceLimitError(f"{n} particles exceed n_dyn_max={N_DYN_MAX}")
    if not math.isfinite(t):
        raise ValueError("time must be finite")
    if t == 0:
        return X.copy()
    if h.is_quadratic:
        return harmonic_flow(X, t, h)
    return verlet_flow(X, t, h, dt, drift_tol)


def compose_flow(f: PhaseFunction, t: float, h: Hamiltonian, direction: str = STATE, **flow_kw) -> PhaseFunction:
    """``S_n(-t) f`` for states or ``S_n(t) f`` for observables."""
    sigma = _check_direction(direction)
    if t == 0 or isinstance(f, ZeroFunction):
        return f
    tau = -sigma * t
    return PhaseFunction(f.arity, lambda X: f(hamilton_flow(X, tau, h, **flow_kw)), f"S[{f.label}]")


def _fd_gradient(f: PhaseFunction, X: np.ndarray, step: float) -> np.ndarray:
    """Central-difference gradient of ``f`` at ``X`` with respect to every coordinate."""
    n, dim = X.shape[-2], X.shape[-1]
    grad = np.empty(X.shape)
    for i in range(n):
        for c in range(dim):
            Xp = X.copy()
            Xm = X.copy()
            Xp[..., i, c] += step
            Xm[..., i, c] -= step
            grad[..., i, c] = (f(Xp) - f(Xm)) / (2 * step)
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite finite-difference gradient")
    return grad


def poisson_bracket_with(
    grad_q: Callable[[np.ndarray], np.ndarray],
    grad_p: Callable[[np.ndarray], np.ndarray],
    f: PhaseFunction,
    d: int,
    step: float = 1e-5,
) -> PhaseFunction:
    """``{A, f} = sum_i dA/dq_i . df/dp_i - dA/dp_i . df/dq_i`` with analytic ``A`` gradients."""

    def bracket(X):
        g = _fd_gradient(f, X, step)
        return np.sum(grad_q(X) * g[..., d:], axis=(-1, -2)) - np.sum(grad_p(X) * g[..., :d], axis=(-1, -2))

    return PhaseFunction(f.arity, bracket, f"{{H,{f.label}}}")


def liouville_rhs(f, model, direction: str = STATE):
    """``{H_n, f_n}`` for states, ``{f_n, H_n}`` for observables."""
    sigma = _check_direction(direction)
    out = model.liouville(f)
    return out if sigma > 0 else model.space.linear_combination([-1.0], [out], model.space.arity(f))


# ---------------------------------------------------------------------------
# Finite model
# ---------------------------------------------------------------------------


def _permutation_matrix(M: int, k: int, perm: Sequence[int]) -> np.ndarray:
    size = M**k
    idx = np.arange(size).reshape((M,) * k)
    moved = np.transpose(idx, perm).ravel()
    P = np.zeros((size, size))
    P[np.arange(size), moved] = 1.0
    return P


def _skew_generator(M: int, k: int, weights: np.ndarray, rng: np.random.Generator, scale: float) -> np.ndarray:
    """``W^{-1} Pi (A - A^T) Pi``, symmetrized over site permutations."""
    size = M**k
    A = rng.standard_normal((size, size))
    Pi = np.eye(size) - np.full((size, size), 1.0 / size)
    S = Pi @ (A - A.T) @ Pi
    if k > 1:
        perms = list(itertools.permutations(range(k)))
        S = sum(_permutation_matrix(M, k, p) @ S @ _permutation_matrix(M, k, p).T for p in perms) / len(perms)
    wk = weights
    for _ in range(k - 1):
        wk = np.kron(wk, weights)
    return scale * S / wk[:, None]


def apply_sites(G: np.ndarray, f: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Apply a ``k``-site matrix (acting on row-major ``M^k`` vectors) to the given axes of ``f``."""
    axes = list(axes)
    k = len(axes)
    f = np.asarray(f, dtype=float)
    n = f.ndim
    M = f.shape[0] if n else 1
    front = np.moveaxis(f, axes, list(range(k)))
    shape = front.shape
    out = (G @ front.reshape(M**k, -1)).reshape(shape)
    return np.moveaxis(out, list(range(k)), axes)


class FiniteLiouvillian:
    """Site generators of the finite model.

    ``generators[k]`` is an ``M^k x M^k`` matrix; ``k = 1`` plays the kinetic
    term, ``k = 2`` the pair interaction and larger ``k`` many-body terms.  With
    ``W`` the diagonal of the product weights, every generator satisfies
    ``G 1 = 0`` (constants are stationary), ``1^T W G = 0`` (the measure is
    preserved) and ``W G`` is skew-symmetric (the flow is measure-unitary, so
    observables and states evolve by adjoint groups).
    """

    def __init__(self, M: int, generators: dict[int, np.ndarray], weights: Sequence[float] | None = None):
        self.space = FinitePhase(M, weights)
        self.M = M
        self.generators = {int(k): np.asarray(G, dtype=float) for k, G in generators.items()}
        for k, G in self.generators.items():
            if G.shape != (M**k, M**k):
                raise ValueError(f"{k}-site generator needs shape {(M**k, M**k)}, got {G.shape}")
        if 1 not in self.generators:
            self.generators[1] = np.zeros((M, M))
        self._cache: dict = {}
        self._lock = threading.Lock()

    @classmethod
    def random(
        cls,
        M: int,
        rng: np.random.Generator,
        weights: Sequence[float] | None = None,
        k_max: int = 2,
        kinetic_scale: float = 1.0,
        interaction_scale: float = 1.0,
    ) -> "FiniteLiouvillian":
        w = np.ones(M) if weights is None else np.asarray(weights, dtype=float)
        gens = {1: _skew_generator(M, 1, w, rng, kinetic_scale)}
        for k in range(2, k_max + 1):
            gens[k] = _skew_generator(M, k, w, rng, interaction_scale)
        return cls(M, gens, w)

    @property
    def K_mat(self) -> np.ndarray:
        return self.generators[1]

    @property
    def Phi_mat(self) -> np.ndarray:
        return self.generators.get(2, np.zeros((self.M**2, self.M**2)))

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(sorted(k for k, G in self.generators.items() if np.any(G)))

    def without_interactions(self) -> "FiniteLiouvillian":
        return FiniteLiouvillian(self.M, {1: self.K_mat}, self.space.weights)

    def product_weights(self, k: int) -> np.ndarray:
        wk = np.ones(1)
        for _ in range(k):
            wk = np.kron(wk, self.space.weights)
        return wk

    def validate(self, tol: float = 1e-12) -> dict[str, float]:
        """Largest violation of each generator invariant (all zero up to rounding)."""
        report = {"constants": 0.0, "measure": 0.0, "skew": 0.0, "swap": 0.0}
        for k, G in self.generators.items():
            wk = self.product_weights(k)
            WG = wk[:, None] * G
            report["constants"] = max(report["constants"], float(np.max(np.abs(G.sum(axis=1)))))
            report["measure"] = max(report["measure"], float(np.max(np.abs(WG.sum(axis=0)))))
            report["skew"] = max(report["skew"], float(np.max(np.abs(WG + WG.T))))
            for p in itertools.permutations(range(k)):
                P = _permutation_matrix(self.M, k, p)
                report["swap"] = max(report["swap"], float(np.max(np.abs(P @ G @ P.T - G))))
        bad = {key: v for key, v in report.items() if v > tol * max(1.0, self.scale())}
        if bad:
            raise ValueError(f"generator invariants violated: {bad}")
        return report

    def scale(self) -> float:
        return max(float(np.max(np.abs(G))) for G in self.generators.values())

    def local(self, k: int) -> np.ndarray | None:
        G = self.generators.get(k)
        if G is None or not np.any(G):
            return None
        return G

    def generator(self, n: int) -> np.ndarray:
        """Dense ``L_n`` on row-major ``M^n`` vectors."""
        key = ("L", n)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        self.space.check_arity(n)
        size = self.M**n
        eye = np.eye(size).reshape((self.M,) * n + (size,))
        L = np.zeros_like(eye)
        for J in subsets(range(n), 1):
            G = self.local(len(J))
            if G is not None:
                L = L + apply_sites(G, eye, J)
        L = L.reshape(size, size)
        with self._lock:
            self._cache.setdefault(key, L)
        return L

    def flow_matrix(self, n: int, t: float) -> np.ndarray:
        """``exp(t L_n)`` (scaling and squaring), computed once per ``(n, t)``."""
        key = ("S", n, float(t))
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        E = np.eye(self.M**n) if t == 0 else expm(t * self.generator(n))
        with self._lock:
            return self._cache.setdefault(key, E)


def finite_flow(n: int, t: float, L: FiniteLiouvillian) -> np.ndarray:
    """``exp(t L_n)``: the state group ``S_n(-t)``, or ``S_n(t)`` for observables at ``-t``."""
    return L.flow_matrix(n, t)


@dataclass
class FiniteModel:
    """Exact finite surrogate of the many-particle dynamics."""

    liouvillian: FiniteLiouvillian

    kind = "finite"

    @property
    def space(self) -> FinitePhase:
        return self.liouvillian.space

    @property
    def interaction_orders(self) -> tuple[int, ...]:
        return tuple(k for k in self.liouvillian.orders if k >= 2)

    def evolve(self, f, t: float, blocks: Sequence[Sequence[int]], direction: str = STATE):
        sigma = _check_direction(direction)
        out = np.asarray(f, dtype=float)
        if t == 0:
            return out.copy()
        for B in blocks:
            if not B:
                continue
            out = apply_sites(self.liouvillian.flow_matrix(len(B), sigma * t), out, B)
        return out

    def block_generator(self, f, blocks: Sequence[Sequence[int]], direction: str = STATE):
        """``sigma * sum_B L_B f`` (each block's generator acts on its own axes)."""
        sigma = _check_direction(direction)
        f = np.asarray(f, dtype=float)
        terms = []
        for B in blocks:
            for J in subsets(B, 1):
                G = self.liouvillian.local(len(J))
                if G is not None:
                    terms.append(apply_sites(G, f, J))
        if not terms:
            return np.zeros_like(f)
        return sigma * np.sum(terms, axis=0)

    def evolve_derivative(self, f, t: float, blocks: Sequence[Sequence[int]], direction: str = STATE):
        """Exact ``d/dt`` of :meth:`evolve`; block generators commute with block flows."""
        return self.block_generator(self.evolve(f, t, blocks, direction), blocks, direction)

    def interaction(self, f, positions: Sequence[int]):
        G = self.liouvillian.local(len(positions))
        if G is None:
            return np.zeros(np.shape(f))
        return apply_sites(G, f, positions)

    def liouville(self, f):
        n = np.ndim(f)
        return self.block_generator(f, [tuple(range(n))]) if n else np.zeros(())

    def time_derivative_is_exact(self) -> bool:
        return True


@dataclass
class ContinuousModel:
    """Particles in ``R^d x R^d`` with Hamiltonian flows and quadrature integrals."""

    hamiltonian: Hamiltonian
    space: ContinuousPhase
    dt: float = 1e-3
    drift_tol: float = 1e-4
    fd_step: float = 1e-5
    time_step: float = 1e-4

    kind = "continuous"

    def __post_init__(self) -> None:
        if self.space.d != self.hamiltonian.d:
            raise ValueError("space and Hamiltonian disagree on the dimension d")

    @property
    def interaction_orders(self) -> tuple[int, ...]:
        orders = [2] if self.hamiltonian.pair is not None else []
        orders += [p.k for p in self.hamiltonian.many_body]
        return tuple(sorted(set(orders)))

    def _flow(self, X, tau):
        return hamilton_flow(X, tau, self.hamiltonian, self.dt, self.drift_tol)

    def evolve(self, f: PhaseFunction, t: float, blocks: Sequence[Sequence[int]], direction: str = STATE):
        sigma = _check_direction(direction)
        blocks = [list(B) for B in blocks if len(B)]
        if t == 0 or isinstance(f, ZeroFunction) or not blocks:
            return f
        tau = -sigma * t

        def evolved(X):
            Y = np.array(X, dtype=float, copy=True)
            for B in blocks:
                Y[..., B, :] = self._flow(X[..., B, :], tau)
            return f(Y)

        return PhaseFunction(f.arity, evolved, f"S[{f.label}]")

    def evolve_derivative(self, f, t: float, blocks, direction: str = STATE):
        """Central difference in ``t`` with step ``time_step``."""
        h = self.time_step
        plus = self.evolve(f, t + h, blocks, direction)
        minus = self.evolve(f, t - h, blocks, direction)
        return self.space.linear_combination([1 / (2 * h), -1 / (2 * h)], [plus, minus], f.arity)

    def interaction(self, f: PhaseFunction, positions: Sequence[int]):
        J = list(positions)
        h = self.hamiltonian
        d = h.d
        k = len(J)
        if isinstance(f, ZeroFunction):
            return f
        if k == 1:
            i = J[0]

            def gq(X):
                return np.zeros(X.shape[:-1] + (d,))

            def gp(X):
                out = np.zeros(X.shape[:-1] + (d,))
                out[..., i, :] = X[..., i, d:] / h.mass
                return out

            return poisson_bracket_with(gq, gp, f, d, self.fd_step)
        pots = []
        if k == 2 and h.pair is not None:
            pots.append(lambda Q: _pair_grad(h.pair, Q))
        pots += [p.gradient for p in h.many_body if p.k == k]
        if not pots:
            return ZeroFunction(f.arity)

        def gq(X):
            out = np.zeros(X.shape[:-1] + (d,))
            Q = X[..., J, :d]
            out[..., J, :] = sum(g(Q) for g in pots)
            return out

        def gp(X):
            return np.zeros(X.shape[:-1] + (d,))

        return poisson_bracket_with(gq, gp, f, d, self.fd_step)

    def liouville(self, f: PhaseFunction):
        h = self.hamiltonian
        d = h.d

        def gq(X):
            return h.potential_gradient(X[..., :d])

        def gp(X):
            return X[..., d:] / h.mass

        return poisson_bracket_with(gq, gp, f, d, self.fd_step)

    def time_derivative_is_exact(self) -> bool:
        return False


def _pair_grad(pair: PairPotential, Q: np.ndarray) -> np.ndarray:
    r = Q[..., 0, :] - Q[..., 1, :]
    g = pair.gradient(r)
    return np.stack([g, -g], axis=-2)
