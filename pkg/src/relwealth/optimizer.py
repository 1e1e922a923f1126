"""Closed-form optimal portfolios and the KKT oracle that adjudicates them.

The oracle maximizes ``H`` subject to at most one linear equality by solving
the symmetric KKT system. It sees the objective only through ``grad_H``
evaluations, so it shares no algebra with the closed forms it checks.

Where printed beta-constrained formulas disagree with the oracle, the oracle
wins; each candidate formula is attached to the solution as a
:class:`Diagnostic` recording whether it matched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .errors import ConditioningError, FactorizationError, ParameterError, StructuralError, ValidationError
from .model import (
    DEFAULT_EPS_FLOOR,
    CapmModel,
    CholeskyFactor,
    assemble_capm_investable,
    assemble_capm_noninvestable,
    cholesky_factor,
    validate_capm,
)
from .objective import (
    BenchmarkSet,
    ObjectiveContext,
    Portfolio,
    UtilityParams,
    grad_H,
    objective_H,
)

MATCH_TOL = 1e-8
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class ConstraintSpec:
    """Linear beta target.

    ``investable_beta``: ``pi_0 + b.q = beta0`` over ``(pi_0, q)``.
    ``vector_beta``: ``b.pi = beta0``.
    """

    kind: str = "none"
    beta0: float = 0.0
    betas: Optional[NDArray[np.float64]] = None

    def __post_init__(self):
        if self.kind not in ("none", "investable_beta", "vector_beta"):
            raise ParameterError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "none":
            return
        if not np.isfinite(self.beta0):
            raise ParameterError("beta0 must be finite")
        if self.betas is None:
            raise ParameterError(f"{self.kind} constraint needs betas")
        b = np.array(self.betas, dtype=np.float64).reshape(-1)
        if self.kind == "vector_beta" and not np.any(b):
            raise ParameterError("betas are all zero; the constraint would read 0 = beta0")
        b.setflags(write=False)
        object.__setattr__(self, "betas", b)
        object.__setattr__(self, "beta0", float(self.beta0))

    def row(self) -> Optional[NDArray[np.float64]]:
        """Gradient of the constraint's left-hand side, or ``None`` if unconstrained."""
        if self.kind == "none":
            return None
        if self.kind == "investable_beta":
            return np.concatenate(([1.0], self.betas))
        return self.betas


UNCONSTRAINED = ConstraintSpec()


@dataclass(frozen=True)
class Diagnostic:
    """A closed-form candidate compared against the oracle.

    ``documented`` marks candidates whose disagreement with the oracle is a
    known defect of the printed formula: a mismatch is then a warning, not a
    failure.
    """

    name: str
    weights: NDArray[np.float64]
    deviation: float
    matches: bool
    documented: bool = False

    @property
    def severity(self) -> str:
        if self.matches:
            return "ok"
        return "warning" if self.documented else "error"


@dataclass(frozen=True)
class Solution:
    """An optimal portfolio with its certificates.

    ``weights`` spans every asset of the solved market. In the investable
    CAPM case that market has the benchmark at index 0, ``pi0`` repeats that
    weight and :attr:`risky` gives the remaining ``q``.
    """

    weights: NDArray[np.float64]
    objective_value: float
    gradient_norm: float
    lagrange_multiplier: Optional[float] = None
    constraint_residual: Optional[float] = None
    pi0: Optional[float] = None
    diagnostics: tuple[Diagnostic, ...] = ()

    @property
    def portfolio(self) -> Portfolio:
        return Portfolio(self.weights)

    @property
    def risky(self) -> NDArray[np.float64]:
        return self.weights[1:] if self.pi0 is not None else self.weights

    @property
    def failures(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    @property
    def matched(self) -> list[str]:
        return [d.name for d in self.diagnostics if d.matches]


def _factor(a, eps_floor: float, label: str) -> CholeskyFactor:
    try:
        return cholesky_factor(a, eps_floor)
    except FactorizationError as exc:
        if exc.pivot >= -eps_floor:
            raise ConditioningError(
                f"{label} is numerically singular (pivot {exc.index} = {exc.pivot:.3g})"
            ) from exc
        raise


def _diagnostic(name: str, candidate, reference, tol: float, documented: bool) -> Diagnostic:
    candidate = np.asarray(candidate, dtype=np.float64)
    dev = float(np.max(np.abs(candidate - reference))) if candidate.size else 0.0
    return Diagnostic(name, candidate, dev, bool(dev <= tol), documented)


def merton_optimal(ctx: ObjectiveContext, eps_floor: float = DEFAULT_EPS_FLOOR) -> Solution:
    """Unconstrained optimum ``(1/gamma) A^-1 (g - r) - (1/gamma) sum_j gamma_j rho_j``.

    With no benchmarks this is the classic Merton portfolio; each benchmark
    shifts it by ``-(gamma_j / gamma) rho_j`` and changes nothing else.
    """
    m, gamma = ctx.model, ctx.params.gamma
    chol = _factor(m.covariance, eps_floor, "covariance")
    merton = chol.solve(m.excess_drift) / gamma
    weights = merton - ctx.bench_sum / gamma
    grad = grad_H(weights, ctx)
    return Solution(
        weights=weights,
        objective_value=objective_H(weights, ctx),
        gradient_norm=float(np.max(np.abs(grad))),
    )


def merton_optimal_60_40(ctx: ObjectiveContext, theta: float, eps_floor: float = DEFAULT_EPS_FLOOR) -> Solution:
    """Optimum when the single benchmark holds ``theta`` in asset 0 and the rest in cash.

    Only ``ctx.model`` and ``ctx.params`` are used; the benchmark is rebuilt
    as ``theta * e``.
    """
    if ctx.params.k != 1:
        raise StructuralError(f"expected exactly one relative-wealth exponent, got {ctx.params.k}")
    rho = np.zeros(ctx.n_assets)
    rho[0] = theta
    bench_ctx = ObjectiveContext(ctx.model, ctx.params, BenchmarkSet(rho.reshape(1, -1)))
    return merton_optimal(bench_ctx, eps_floor)


def kkt_oracle(
    ctx: ObjectiveContext,
    constraint: ConstraintSpec = UNCONSTRAINED,
    max_condition: float = MAX_CONDITION,
) -> Solution:
    """Maximize ``H`` subject to an optional linear equality via the KKT system.

    The Hessian is assembled column by column from ``grad_H(e_i) - grad_H(0)``
    and the linear term is ``grad_H(0)``; both are exact for a quadratic up to
    rounding. One step of iterative refinement follows the direct solve.

    Raises
    ------
    ConditioningError
        If the KKT matrix has a 2-norm condition number above ``max_condition``.
    """
    n = ctx.n_assets
    zero = np.zeros(n)
    lin = grad_H(zero, ctx)
    hess = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        hess[:, i] = grad_H(e, ctx) - lin
    hess = 0.5 * (hess + hess.T)

    row = constraint.row()
    if row is None:
        kkt, rhs = hess, -lin
    else:
        if row.size != n:
            raise StructuralError(f"constraint has {row.size} coefficients, market has {n} assets")
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = hess
        kkt[:n, n] = row
        kkt[n, :n] = row
        rhs = np.concatenate((-lin, [constraint.beta0]))

    cond = float(np.linalg.cond(kkt))
    if not cond <= max_condition:
        raise ConditioningError(f"KKT matrix condition number {cond:.3g} exceeds {max_condition:.3g}")
    x = np.linalg.solve(kkt, rhs)
    x = x + np.linalg.solve(kkt, rhs - kkt @ x)

    weights = x[:n]
    grad = grad_H(weights, ctx)
    if row is None:
        return Solution(weights, objective_H(weights, ctx), float(np.max(np.abs(grad))))
    lam = float(x[n])
    return Solution(
        weights=weights,
        objective_value=objective_H(weights, ctx),
        gradient_norm=float(np.max(np.abs(grad + lam * row))),
        lagrange_multiplier=lam,
        constraint_residual=float(row @ weights - constraint.beta0),
    )


@dataclass(frozen=True)
class PerturbationCheck:
    samples: int
    violations: int
    min_gap: float  # smallest H(p*) - H(p* + d) seen


def check_perturbations(
    ctx: ObjectiveContext,
    weights,
    constraint: ConstraintSpec = UNCONSTRAINED,
    samples: int = 1000,
    seed: int = 0,
    norm_range: tuple[float, float] = (1e-3, 1.0),
) -> PerturbationCheck:
    """Count feasible directions ``d`` along which ``H(p + d) > H(p)``.

    Directions are Gaussian, projected onto the constraint's null space and
    rescaled to a norm drawn uniformly from ``norm_range``. Directions that
    vanish after projection are skipped, so ``samples`` in the result counts
    only the directions actually tested.
    """
    rng = np.random.default_rng(seed)
    p = np.asarray(weights, dtype=np.float64)
    base = objective_H(p, ctx)
    row = constraint.row()
    lo, hi = norm_range
    violations = 0
    tested = 0
    min_gap = np.inf
    for _ in range(samples):
        d = rng.standard_normal(p.size)
        raw = np.linalg.norm(d)
        if row is not None:
            d -= (row @ d) / (row @ row) * row
        norm = np.linalg.norm(d)
        # a one-point feasible set leaves only rounding residue after projection
        if norm <= 1e-12 * raw:
            continue
        tested += 1
        d *= rng.uniform(lo, hi) / norm
        gap = base - objective_H(p + d, ctx)
        min_gap = min(min_gap, gap)
        if gap < 0:
            violations += 1
    return PerturbationCheck(tested, violations, float(min_gap))


def _capm_factor(c: CapmModel, eps_floor: float) -> CholeskyFactor:
    report = validate_capm(c, eps_floor)
    if "ellipticity" in report.codes():
        raise ConditioningError(f"residual covariance is numerically singular (min pivot {report.min_pivot:.3g})")
    if not report.ok:
        raise ValidationError(f"invalid CAPM model: {report.summary()}", report)
    return _factor(c.residual_cov, eps_floor, "residual covariance")


def _benchmarks(benchmarks, n_assets: int) -> BenchmarkSet:
    if isinstance(benchmarks, BenchmarkSet):
        return benchmarks
    return BenchmarkSet.of(list(benchmarks), n_assets)


def investable_candidates(c: CapmModel, ctx: ObjectiveContext, chol: CholeskyFactor) -> dict[str, NDArray[np.float64]]:
    """Closed-form candidates for the risky weights ``q`` with the benchmark held directly.

    With ``(v_0, v) = sum_j gamma_j A rho_j``:

    ``printed``          ``sigma^2 C^-1 (v - v_0 b)``
    ``proof_display``    ``sigma^-2 C^-1 (v - v_0 b)``, read off ``v_0 b + sigma^2 C q = v``
    ``proof_corrected``  ``(1/gamma) C^-1 (v_0 b - v)``, redoing the Lagrange
                         algebra with ``A p = sigma^2 beta_0 (1, b) + (0, C q)``
    """
    vv = ctx.model.covariance @ ctx.bench_sum
    v0, v = vv[0], vv[1:]
    s2, b, gamma = c.sigma**2, c.betas, ctx.params.gamma
    base = chol.solve(v - v0 * b)
    return {
        "printed": s2 * base,
        "proof_display": base / s2,
        "proof_corrected": -base / gamma,
    }


def capm_constrained_investable(
    c: CapmModel,
    params: UtilityParams,
    benchmarks,
    beta0: float,
    tol: float = MATCH_TOL,
    eps_floor: float = DEFAULT_EPS_FLOOR,
) -> Solution:
    """Beta-constrained optimum when the benchmark is itself investable.

    ``benchmarks`` are weight vectors over the ``N + 1`` assets with the
    benchmark first. The KKT oracle is the answer; the closed forms from
    :func:`investable_candidates` ride along as diagnostics, with the two
    printed variants marked as documented discrepancies.
    """
    chol = _capm_factor(c, eps_floor)
    model = assemble_capm_investable(c, eps_floor)
    ctx = ObjectiveContext(model, params, _benchmarks(benchmarks, model.n_assets))
    sol = kkt_oracle(ctx, ConstraintSpec("investable_beta", beta0, c.betas))
    q = sol.weights[1:]
    documented = {"printed": True, "proof_display": True, "proof_corrected": False}
    diags = tuple(
        _diagnostic(name, cand, q, tol, documented[name])
        for name, cand in investable_candidates(c, ctx, chol).items()
    )
    return replace(sol, pi0=float(sol.weights[0]), diagnostics=diags)


def noninvestable_candidates(
    c: CapmModel, ctx: ObjectiveContext, chol: CholeskyFactor, beta0: float
) -> dict[str, NDArray[np.float64]]:
    """Closed-form candidates when only the ``N`` beta-loaded assets are held.

    ``printed``           ``beta_0 C^-1 b / (b^T C^-1 b)``
    ``pre_cancellation``  ``-s + (beta_0 + s.b) C^-1 b / (b^T C^-1 b)`` with
                          ``s = sum_i (gamma_i / gamma) rho_i``
    """
    b = c.betas
    cinv_b = chol.solve(b)
    denom = float(b @ cinv_b)
    s = ctx.bench_sum / ctx.params.gamma
    return {
        "printed": beta0 * cinv_b / denom,
        "pre_cancellation": -s + (beta0 + s @ b) * cinv_b / denom,
    }


def capm_constrained_noninvestable(
    c: CapmModel,
    params: UtilityParams,
    benchmarks,
    beta0: float,
    tol: float = MATCH_TOL,
    eps_floor: float = DEFAULT_EPS_FLOOR,
) -> Solution:
    """Beta-constrained optimum over the ``N`` assets when the benchmark is not held.

    The printed benchmark-free formula is exact only when
    ``sum_i gamma_i rho_i`` is parallel to ``C^-1 b``; elsewhere its mismatch
    is reported as a documented warning.
    """
    if not np.any(c.betas):
        raise ParameterError("betas are all zero; the constraint b.pi = beta0 is degenerate")
    chol = _capm_factor(c, eps_floor)
    model = assemble_capm_noninvestable(c, eps_floor)
    ctx = ObjectiveContext(model, params, _benchmarks(benchmarks, model.n_assets))
    sol = kkt_oracle(ctx, ConstraintSpec("vector_beta", beta0, c.betas))
    documented = {"printed": True, "pre_cancellation": False}
    diags = tuple(
        _diagnostic(name, cand, sol.weights, tol, documented[name])
        for name, cand in noninvestable_candidates(c, ctx, chol, beta0).items()
    )
    return replace(sol, diagnostics=diags)


def merton_with_oracle(ctx: ObjectiveContext, tol: float = MATCH_TOL, eps_floor: float = DEFAULT_EPS_FLOOR) -> Solution:
    """Closed-form optimum with the unconstrained oracle attached as a diagnostic."""
    sol = merton_optimal(ctx, eps_floor)
    oracle = kkt_oracle(ctx)
    return replace(sol, diagnostics=(_diagnostic("oracle", oracle.weights, sol.weights, tol, False),))
