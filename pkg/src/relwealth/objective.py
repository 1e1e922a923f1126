"""Utilities and the deterministic quadratic that E[U] reduces to.

For a constant portfolio ``p`` the terminal utility
``U = V^(1-gamma) * prod_j V_j^(-gamma_j)`` is lognormal, and

    E[U] = exp(T * H(p)),   H = F + G / 2,

where ``F`` is the drift of ``log U`` and ``G`` its instantaneous variance.
``H`` is an exactly quadratic function of ``p`` with Hessian
``-gamma (1 - gamma) A``; every optimizer in this package maximizes it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DomainError, ParameterError, StructuralError
from .model import MarketModel


@dataclass(frozen=True)
class UtilityParams:
    """Absolute-wealth exponent ``gamma`` and relative-wealth exponents ``gammas``.

    ``gamma`` must lie strictly inside (0, 1). The ``gammas`` may be any
    finite reals; negative values are accepted with a warning since they
    reward *under*-performing a benchmark.
    """

    gamma: float
    gammas: tuple[float, ...] = ()

    def __post_init__(self):
        gamma = float(self.gamma)
        if not (0.0 < gamma < 1.0):
            raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
        gammas = tuple(float(x) for x in np.atleast_1d(np.asarray(self.gammas, dtype=float)))
        if not all(math.isfinite(x) for x in gammas):
            raise ParameterError("relative-wealth exponents must be finite")
        if any(x < 0 for x in gammas):
            warnings.warn("negative relative-wealth exponent", UserWarning, stacklevel=3)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "gammas", gammas)

    @property
    def k(self) -> int:
        return len(self.gammas)


@dataclass(frozen=True)
class BenchmarkSet:
    """``k`` benchmark portfolios, one weight vector per row (cash is the remainder)."""

    weights: NDArray[np.float64]

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.size == 0:
            w = w.reshape(0, w.shape[-1] if w.ndim == 2 else 0)
        if w.ndim == 1:
            w = w.reshape(1, -1)
        if w.ndim != 2:
            raise StructuralError(f"benchmark weights must be a (k, N) array, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise StructuralError("benchmark weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def empty(cls, n_assets: int) -> BenchmarkSet:
        return cls(np.zeros((0, n_assets)))

    @classmethod
    def of(cls, rows: Sequence[Sequence[float]], n_assets: int) -> BenchmarkSet:
        if len(rows) == 0:
            return cls.empty(n_assets)
        return cls(np.asarray(rows, dtype=np.float64))

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def n_assets(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class Portfolio:
    """Proportions of wealth in each risky asset; shorts are allowed."""

    weights: NDArray[np.float64]

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise StructuralError("portfolio weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def cash(self) -> float:
        return 1.0 - float(self.weights.sum())


def _weights(pi) -> NDArray[np.float64]:
    if isinstance(pi, Portfolio):
        return pi.weights
    return np.asarray(pi, dtype=np.float64)


@dataclass(frozen=True)
class ObjectiveContext:
    """Market, utility and benchmarks bundled with the pieces of ``H`` that do not move.

    ``bench_sum`` is ``sum_j gamma_j rho_j`` and ``bench_const`` is the
    benchmark-only part of ``F``:
    ``-sum_j gamma_j [rho_j.g + (1 - 1.rho_j) r - A rho_j.rho_j / 2]``.
    """

    model: MarketModel
    params: UtilityParams
    benchmarks: BenchmarkSet
    bench_sum: NDArray[np.float64] = field(init=False, repr=False)
    bench_const: float = field(init=False, repr=False)

    def __post_init__(self):
        n = self.model.n_assets
        if self.benchmarks.k and self.benchmarks.n_assets != n:
            raise StructuralError(
                f"benchmarks have {self.benchmarks.n_assets} assets, market has {n}"
            )
        if self.benchmarks.k != self.params.k:
            raise StructuralError(
                f"{self.benchmarks.k} benchmarks but {self.params.k} relative-wealth exponents"
            )
        g, a, r = self.model.drift, self.model.covariance, self.model.risk_free
        gammas = np.asarray(self.params.gammas, dtype=np.float64)
        rho = self.benchmarks.weights
        if self.benchmarks.k:
            bench_sum = gammas @ rho
            growth = rho @ g + (1.0 - rho.sum(axis=1)) * r - 0.5 * np.einsum("ji,ik,jk->j", rho, a, rho)
            bench_const = -float(gammas @ growth)
        else:
            bench_sum = np.zeros(n)
            bench_const = 0.0
        bench_sum.setflags(write=False)
        object.__setattr__(self, "bench_sum", bench_sum)
        object.__setattr__(self, "bench_const", bench_const)

    @classmethod
    def build(cls, model: MarketModel, gamma: float, benchmarks=(), gammas=()) -> ObjectiveContext:
        """Convenience constructor from plain arrays."""
        return cls(model, UtilityParams(gamma, tuple(gammas)), BenchmarkSet.of(list(benchmarks), model.n_assets))

    @property
    def n_assets(self) -> int:
        return self.model.n_assets

    def without_benchmarks(self) -> ObjectiveContext:
        return ObjectiveContext(self.model, UtilityParams(self.params.gamma), BenchmarkSet.empty(self.n_assets))


class ObjectiveTerms(NamedTuple):
    F: float
    G: float
    H: float


def power_utility(x: float, gamma: float) -> float:
    """CRRA utility ``x**gamma / gamma``, or ``log(x)`` at ``gamma == 0``."""
    if not gamma < 1:
        raise ParameterError(f"power utility needs gamma < 1, got {gamma}")
    if not x > 0:
        raise DomainError(f"power utility needs positive wealth, got {x}")
    if gamma == 0:
        return math.log(x)
    return math.exp(gamma * math.log(x)) / gamma


def combined_utility(v: float, v_bench: Sequence[float], params: UtilityParams) -> float:
    """``V^(1-gamma) * prod_j V_j^(-gamma_j)``, evaluated in log space."""
    v_bench = [float(x) for x in np.atleast_1d(np.asarray(v_bench, dtype=float))]
    if len(v_bench) != params.k:
        raise StructuralError(f"expected {params.k} benchmark wealths, got {len(v_bench)}")
    if not v > 0 or any(not w > 0 for w in v_bench):
        raise DomainError("wealths must be strictly positive")
    log_u = (1.0 - params.gamma) * math.log(v)
    for gj, vj in zip(params.gammas, v_bench):
        log_u -= gj * math.log(vj)
    return math.exp(log_u)


def _check_dim(p: NDArray[np.float64], ctx: ObjectiveContext) -> None:
    if p.shape != (ctx.n_assets,):
        raise StructuralError(f"portfolio has shape {p.shape}, market has {ctx.n_assets} assets")


def objective_terms(pi, ctx: ObjectiveContext) -> ObjectiveTerms:
    """``F``, ``G`` and ``H = F + G/2`` at a constant portfolio."""
    p = _weights(pi)
    _check_dim(p, ctx)
    m, gamma = ctx.model, ctx.params.gamma
    a = m.covariance
    growth = p @ m.drift + (1.0 - p.sum()) * m.risk_free - 0.5 * (p @ a @ p)
    f = (1.0 - gamma) * growth + ctx.bench_const
    v = (1.0 - gamma) * p - ctx.bench_sum
    g = float(v @ a @ v)
    return ObjectiveTerms(float(f), g, float(f + 0.5 * g))


def objective_H(pi, ctx: ObjectiveContext) -> float:
    return objective_terms(pi, ctx).H


def grad_H(pi, ctx: ObjectiveContext) -> NDArray[np.float64]:
    """Analytic gradient ``(1 - gamma) [g - r 1 - gamma A p - A sum_j gamma_j rho_j]``."""
    p = _weights(pi)
    _check_dim(p, ctx)
    m, gamma = ctx.model, ctx.params.gamma
    a = m.covariance
    return (1.0 - gamma) * (m.excess_drift - gamma * (a @ p) - a @ ctx.bench_sum)


def hessian_H(ctx: ObjectiveContext) -> NDArray[np.float64]:
    gamma = ctx.params.gamma
    return -gamma * (1.0 - gamma) * ctx.model.covariance


def portfolio_beta(weights, betas, investable: bool) -> float:
    """Portfolio beta against the benchmark.

    In the investable case ``weights = (pi_0, q)`` where ``pi_0`` sits in the
    benchmark itself (beta 1), so the result is ``pi_0 + b.q``. Otherwise it
    is ``b.pi``.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    b = np.asarray(betas, dtype=np.float64).reshape(-1)
    if investable:
        if w.size != b.size + 1:
            raise StructuralError(f"expected {b.size + 1} weights (benchmark first), got {w.size}")
        return float(w[0] + b @ w[1:])
    if w.size != b.size:
        raise StructuralError(f"expected {b.size} weights, got {w.size}")
    return float(b @ w)
