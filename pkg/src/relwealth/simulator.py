"""Monte Carlo for terminal log-wealth of constant-weight portfolios.

For a constant portfolio ``p`` the log-wealth obeys

    d ln V = [p.(g - r) + r - A p.p / 2] dt + p.(L dW),   L L^T = A,

so one Gaussian step per path is exact. All portfolios and benchmarks in a
call share the same driving noise per path (common random numbers), which
keeps comparisons between nearby portfolios sharp.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import ParameterError, StructuralError, ValidationError
from .model import MarketModel, cholesky_factor, validate_market
from .objective import BenchmarkSet, ObjectiveContext, UtilityParams, objective_H
from .rng import path_normals

# fixed so results never depend on the worker count
CHUNK_PATHS = 16384
SCHEMES = ("exact_log", "euler_log")


@dataclass(frozen=True)
class SimConfig:
    horizon: float = 1.0
    steps: int = 1
    paths: int = 100_000
    seed: int = 0
    scheme: str = "exact_log"

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ParameterError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ParameterError(f"steps must be a positive integer, got {self.steps}")
        if int(self.paths) != self.paths or self.paths < 1:
            raise ParameterError(f"paths must be a positive integer, got {self.paths}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.scheme not in SCHEMES:
            raise ParameterError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass(frozen=True)
class TerminalSamples:
    """Terminal log-wealths, one row per path.

    Columns are the simulated portfolios followed by the benchmarks.
    """

    log_wealth: NDArray[np.float64]
    portfolios: NDArray[np.float64]
    benchmarks: BenchmarkSet
    model: MarketModel
    config: SimConfig

    @property
    def n_portfolios(self) -> int:
        return self.portfolios.shape[0]

    @property
    def portfolio_log_wealth(self) -> NDArray[np.float64]:
        return self.log_wealth[:, : self.n_portfolios]

    @property
    def benchmark_log_wealth(self) -> NDArray[np.float64]:
        return self.log_wealth[:, self.n_portfolios :]


@dataclass(frozen=True)
class SimResult:
    """Monte Carlo estimate of E[U] next to the exact ``exp(T H(p))``."""

    mean_utility: float
    stderr: float
    analytic: float
    z_score: float
    per_portfolio: tuple["SimResult", ...] = ()


def _log_growth(weights: NDArray[np.float64], model: MarketModel) -> NDArray[np.float64]:
    """Drift of ``ln V`` for each row of ``weights``."""
    a = model.covariance
    quad = np.einsum("ji,ik,jk->j", weights, a, weights)
    return weights @ model.excess_drift + model.risk_free - 0.5 * quad


def simulate_terminal(
    model: MarketModel,
    portfolios,
    benchmarks: BenchmarkSet | None,
    cfg: SimConfig,
    workers: int = 1,
) -> TerminalSamples:
    """Sample ``ln V(T)`` for constant portfolios and benchmarks.

    ``exact_log`` draws ``W(T)`` as the sum of the per-step increments and
    applies the closed-form solution; ``euler_log`` accumulates the same
    increments step by step. With ``steps=1`` the two agree bit for bit.
    """
    report = validate_market(model)
    if not report.ok:
        raise ValidationError(f"invalid market model: {report.summary()}", report)
    n = model.n_assets
    ports = np.atleast_2d(np.asarray(portfolios, dtype=np.float64))
    if ports.shape[1] != n:
        raise StructuralError(f"portfolios have {ports.shape[1]} weights, market has {n} assets")
    if benchmarks is None:
        benchmarks = BenchmarkSet.empty(n)
    if benchmarks.k and benchmarks.n_assets != n:
        raise StructuralError(f"benchmarks have {benchmarks.n_assets} weights, market has {n} assets")
    weights = np.vstack([ports, benchmarks.weights]) if benchmarks.k else ports
    growth = _log_growth(weights, model)
    lower = cholesky_factor(model.covariance).lower
    horizon, steps = float(cfg.horizon), int(cfg.steps)
    dt = horizon / steps
    sqrt_dt = math.sqrt(dt)
    out = np.empty((int(cfg.paths), weights.shape[0]))

    def run_chunk(bounds: tuple[int, int]) -> None:
        start, stop = bounds
        z = path_normals(cfg.seed, start, stop, n * steps).reshape(stop - start, steps, n)
        dw = z * sqrt_dt
        if cfg.scheme == "exact_log":
            shocks = dw.sum(axis=1) @ lower.T
            for j, w in enumerate(weights):
                out[start:stop, j] = growth[j] * horizon + shocks @ w
        else:
            acc = np.zeros((stop - start, weights.shape[0]))
            for s in range(steps):
                shocks = dw[:, s, :] @ lower.T
                for j, w in enumerate(weights):
                    acc[:, j] += growth[j] * dt + shocks @ w
            out[start:stop] = acc

    chunks = [(s, min(s + CHUNK_PATHS, int(cfg.paths))) for s in range(0, int(cfg.paths), CHUNK_PATHS)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_chunk, chunks))
    else:
        for bounds in chunks:
            run_chunk(bounds)
    return TerminalSamples(out, ports, benchmarks, model, cfg)


def _z(mean: float, stderr: float, target: float) -> float:
    if stderr > 0:
        return (mean - target) / stderr
    if mean == target:
        return 0.0
    return math.copysign(math.inf, mean - target)


def _mean_stderr(x: NDArray[np.float64]) -> tuple[float, float]:
    mean = float(np.mean(x))
    if x.size < 2:
        return mean, 0.0
    return mean, float(np.std(x, ddof=1) / math.sqrt(x.size))


def log_utility_samples(samples: TerminalSamples, params: UtilityParams) -> NDArray[np.float64]:
    """``(1 - gamma) ln V - sum_j gamma_j ln V_j`` per path and portfolio."""
    if samples.benchmarks.k != params.k:
        raise StructuralError(
            f"samples carry {samples.benchmarks.k} benchmarks but params have {params.k} exponents"
        )
    bench = np.zeros(samples.log_wealth.shape[0])
    for gj, col in zip(params.gammas, samples.benchmark_log_wealth.T):
        bench += gj * col
    return (1.0 - params.gamma) * samples.portfolio_log_wealth - bench[:, None]


def estimate_expected_utility(samples: TerminalSamples, params: UtilityParams) -> SimResult:
    """Sample mean and standard error of ``U`` against ``exp(T H(p))``.

    The returned result describes the first portfolio; when several were
    simulated, ``per_portfolio`` holds one result for each.
    """
    utils = np.exp(log_utility_samples(samples, params))
    ctx = ObjectiveContext(samples.model, params, samples.benchmarks)
    results = []
    for j, w in enumerate(samples.portfolios):
        mean, se = _mean_stderr(utils[:, j])
        analytic = math.exp(samples.config.horizon * objective_H(w, ctx))
        results.append(SimResult(mean, se, analytic, _z(mean, se, analytic)))
    head = results[0]
    if len(results) == 1:
        return head
    return SimResult(head.mean_utility, head.stderr, head.analytic, head.z_score, tuple(results))


@dataclass(frozen=True)
class OptimalityReport:
    """Candidate versus ``n`` perturbed portfolios ``candidate + d_i``, ``|d_i| = radius``.

    ``analytic_violations`` counts ``H(candidate + d) > H(candidate)``;
    ``mc_violations`` counts perturbations whose common-random-number
    estimate of ``E[U(candidate)] - E[U(candidate + d)]`` is below -3
    standard errors.
    """

    n_perturbations: int
    radius: float
    candidate_value: float
    analytic_violations: int
    mc_violations: int
    max_analytic_gain: float
    min_mc_z: float
    analytic_gaps: NDArray[np.float64]
    mc_z: NDArray[np.float64]


def verify_optimality(
    model: MarketModel,
    params: UtilityParams,
    benchmarks: BenchmarkSet,
    candidate,
    cfg: SimConfig,
    n_perturbations: int = 200,
    radius: float = 0.1,
    workers: int = 1,
    batch: int = 32,
) -> OptimalityReport:
    cand = np.asarray(getattr(candidate, "weights", candidate), dtype=np.float64)
    ctx = ObjectiveContext(model, params, benchmarks)
    rng = np.random.default_rng(cfg.seed)
    dirs = rng.standard_normal((n_perturbations, cand.size))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs = radius * dirs / np.where(norms > 0, norms, 1.0)

    h0 = objective_H(cand, ctx)
    gaps = np.array([h0 - objective_H(cand + d, ctx) for d in dirs])

    mc_z = np.empty(n_perturbations)
    for start in range(0, n_perturbations, batch):
        block = dirs[start : start + batch]
        samples = simulate_terminal(model, np.vstack([cand, cand + block]), benchmarks, cfg, workers)
        utils = np.exp(log_utility_samples(samples, params))
        for i in range(block.shape[0]):
            mean, se = _mean_stderr(utils[:, 0] - utils[:, i + 1])
            mc_z[start + i] = _z(mean, se, 0.0)

    return OptimalityReport(
        n_perturbations=n_perturbations,
        radius=float(radius),
        candidate_value=h0,
        analytic_violations=int(np.sum(gaps < 0)),
        mc_violations=int(np.sum(mc_z < -3.0)),
        max_analytic_gain=float(max(0.0, -gaps.min())) if gaps.size else 0.0,
        min_mc_z=float(mc_z.min()) if mc_z.size else 0.0,
        analytic_gaps=gaps,
        mc_z=mc_z,
    )
