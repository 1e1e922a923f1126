"""Market primitives: constant-coefficient GBM markets and the CAPM special case.

A :class:`MarketModel` holds the drift vector ``g``, covariance ``A`` and
risk-free rate ``r`` of ``N`` risky assets. A :class:`CapmModel` describes a
benchmark asset plus ``N`` assets whose excess returns load on it with betas
``b`` and residual covariance ``C``; :func:`assemble_capm_investable` and
:func:`assemble_capm_noninvestable` turn it into a plain market model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import FactorizationError, StructuralError, ValidationError

DEFAULT_EPS_FLOOR = 1e-12
SYMMETRY_WARN = 1e-12
SYMMETRY_ERROR = 1e-6


def _as_vector(x, name: str) -> NDArray[np.float64]:
    arr = np.array(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise StructuralError(f"{name} must be a vector, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _as_square(x, n: int, name: str) -> NDArray[np.float64]:
    arr = np.array(x, dtype=np.float64)
    if arr.ndim == 0 and n == 1:
        arr = arr.reshape(1, 1)
    if arr.shape != (n, n):
        raise StructuralError(f"{name} must have shape ({n}, {n}), got {arr.shape}")
    return arr


def _symmetrize(a: NDArray[np.float64]) -> tuple[NDArray[np.float64], float]:
    """Return ``(A + A^T)/2`` and the relative asymmetry of the input."""
    with np.errstate(invalid="ignore"):
        scale = float(np.max(np.abs(a))) if a.size else 0.0
        gap = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if not np.isfinite(gap):
        rel = np.inf
    else:
        rel = gap / scale if scale > 0 else gap
    sym = 0.5 * (a + a.T)
    sym.setflags(write=False)
    return sym, rel


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" or "warning"
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_market` / :func:`validate_capm`.

    ``ok`` is true iff no finding has severity ``"error"``. ``min_pivot`` is
    the smallest Cholesky pivot seen, which makes the ellipticity constant an
    observable number rather than a yes/no answer.
    """

    findings: tuple[Finding, ...]
    min_pivot: float

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "error"]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "warning"]

    def codes(self) -> set[str]:
        return {f.code for f in self.findings}

    def summary(self) -> str:
        if not self.findings:
            return "ok"
        return "; ".join(f"{f.severity}:{f.code}: {f.message}" for f in self.findings)


@dataclass(frozen=True)
class MarketModel:
    """Constant drift ``g``, covariance ``A`` and risk-free rate ``r``.

    The covariance is symmetrized on construction; the relative asymmetry of
    the raw input is kept in ``asymmetry`` so validation can report it.
    """

    drift: NDArray[np.float64]
    covariance: NDArray[np.float64]
    risk_free: float
    asymmetry: float = field(default=0.0, compare=False)

    def __post_init__(self):
        g = _as_vector(self.drift, "drift")
        a, rel = _symmetrize(_as_square(self.covariance, g.size, "covariance"))
        object.__setattr__(self, "drift", g)
        object.__setattr__(self, "covariance", a)
        object.__setattr__(self, "risk_free", float(self.risk_free))
        object.__setattr__(self, "asymmetry", max(float(self.asymmetry), rel))

    @property
    def n_assets(self) -> int:
        return self.drift.size

    @property
    def excess_drift(self) -> NDArray[np.float64]:
        return self.drift - self.risk_free


@dataclass(frozen=True)
class CapmModel:
    """Benchmark ``dS0/S0 = mu dt + sigma dW0`` plus ``N`` beta-loaded assets.

    Each asset earns ``beta_i`` times the benchmark return, ``1 - beta_i``
    times the risk-free return, plus residual noise with covariance ``C``
    independent of the benchmark.
    """

    mu: float
    sigma: float
    risk_free: float
    betas: NDArray[np.float64]
    residual_cov: NDArray[np.float64]
    asymmetry: float = field(default=0.0, compare=False)

    def __post_init__(self):
        b = _as_vector(self.betas, "betas")
        c, rel = _symmetrize(_as_square(self.residual_cov, b.size, "residual_cov"))
        object.__setattr__(self, "betas", b)
        object.__setattr__(self, "residual_cov", c)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "risk_free", float(self.risk_free))
        object.__setattr__(self, "asymmetry", max(float(self.asymmetry), rel))

    @property
    def n_assets(self) -> int:
        return self.betas.size


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular ``L`` with ``L @ L.T == A``."""

    lower: NDArray[np.float64]
    pivots: NDArray[np.float64]

    @property
    def min_pivot(self) -> float:
        return float(self.pivots.min())

    def solve(self, rhs) -> NDArray[np.float64]:
        """Solve ``A x = rhs`` by two triangular sweeps."""
        y = _forward(self.lower, np.asarray(rhs, dtype=np.float64))
        return _forward(self.lower.T[::-1, ::-1], y[::-1])[::-1]


def _forward(lower: NDArray[np.float64], rhs: NDArray[np.float64]) -> NDArray[np.float64]:
    n = lower.shape[0]
    x = np.zeros_like(rhs, dtype=np.float64)
    for i in range(n):
        x[i] = (rhs[i] - lower[i, :i] @ x[:i]) / lower[i, i]
    return x


def _cholesky(a: NDArray[np.float64], floor: float):
    """Row-by-row Cholesky that records every pivot.

    Returns ``(lower, pivots, failed_index)``; ``failed_index`` is ``None``
    on success. A pivot is the diagonal Schur complement before the square
    root, so it is ``1`` for the identity.
    """
    n = a.shape[0]
    lower = np.zeros((n, n))
    pivots = []
    for j in range(n):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        pivots.append(pivot)
        if not pivot > floor:
            return lower, np.array(pivots), j
        lower[j, j] = np.sqrt(pivot)
        lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return lower, np.array(pivots), None


def cholesky_factor(a, eps_floor: float = 0.0) -> CholeskyFactor:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    FactorizationError
        If a pivot is not above ``eps_floor``; carries the pivot index.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StructuralError(f"expected a square matrix, got shape {a.shape}")
    lower, pivots, failed = _cholesky(a, eps_floor)
    if failed is not None:
        raise FactorizationError(failed, float(pivots[failed]))
    lower.setflags(write=False)
    return CholeskyFactor(lower=lower, pivots=pivots)


def _check_covariance(
    a: NDArray[np.float64], asymmetry: float, eps_floor: float, label: str
) -> tuple[list[Finding], float]:
    findings: list[Finding] = []
    if not np.all(np.isfinite(a)):
        findings.append(Finding("error", "non_finite", f"{label} has non-finite entries"))
        return findings, float("nan")

    if asymmetry > SYMMETRY_ERROR:
        findings.append(
            Finding("error", "asymmetric", f"{label} asymmetry {asymmetry:.3g} exceeds {SYMMETRY_ERROR:g}")
        )
    elif asymmetry > SYMMETRY_WARN:
        findings.append(
            Finding("warning", "symmetrized", f"{label} symmetrized (relative asymmetry {asymmetry:.3g})")
        )

    _, pivots, failed = _cholesky(a, eps_floor)
    min_pivot = float(pivots.min()) if pivots.size else float("nan")
    if failed is not None:
        pivot = float(pivots[failed])
        if pivot < -eps_floor:
            findings.append(
                Finding("error", "not_positive_definite",
                        f"{label} is not positive definite (pivot {failed} = {pivot:.6g})")
            )
        else:
            findings.append(
                Finding("error", "ellipticity",
                        f"{label} fails uniform ellipticity (pivot {failed} = {pivot:.3g} <= {eps_floor:g})")
            )
    return findings, min_pivot


def validate_market(m: MarketModel, eps_floor: float = DEFAULT_EPS_FLOOR) -> ValidationReport:
    """Check finiteness, symmetry, positive definiteness and ellipticity."""
    findings: list[Finding] = []
    if not np.all(np.isfinite(m.drift)):
        findings.append(Finding("error", "non_finite", "drift has non-finite entries"))
    if not np.isfinite(m.risk_free):
        findings.append(Finding("error", "non_finite", "risk_free is not finite"))
    cov_findings, min_pivot = _check_covariance(m.covariance, m.asymmetry, eps_floor, "covariance")
    findings.extend(cov_findings)
    return ValidationReport(tuple(findings), min_pivot)


def validate_capm(c: CapmModel, eps_floor: float = DEFAULT_EPS_FLOOR) -> ValidationReport:
    findings: list[Finding] = []
    scalars = {"mu": c.mu, "sigma": c.sigma, "risk_free": c.risk_free}
    for name, value in scalars.items():
        if not np.isfinite(value):
            findings.append(Finding("error", "non_finite", f"{name} is not finite"))
    if not np.all(np.isfinite(c.betas)):
        findings.append(Finding("error", "non_finite", "betas have non-finite entries"))
    if not c.sigma > 0:
        findings.append(Finding("error", "sigma_nonpositive", f"sigma must be positive, got {c.sigma}"))
    if not c.mu > c.risk_free:
        findings.append(
            Finding("error", "mu_not_above_rate",
                    f"benchmark drift mu={c.mu} must exceed risk_free={c.risk_free}")
        )
    cov_findings, min_pivot = _check_covariance(c.residual_cov, c.asymmetry, eps_floor, "residual_cov")
    findings.extend(cov_findings)
    return ValidationReport(tuple(findings), min_pivot)


def _require_valid_capm(c: CapmModel, eps_floor: float) -> None:
    report = validate_capm(c, eps_floor)
    if not report.ok:
        raise ValidationError(f"invalid CAPM model: {report.summary()}", report)


def _checked(m: MarketModel, block: str, eps_floor: float) -> MarketModel:
    report = validate_market(m, eps_floor)
    if not report.ok:
        raise ValidationError(f"assembled covariance block {block} is invalid: {report.summary()}", report)
    return m


def assemble_capm_investable(c: CapmModel, eps_floor: float = DEFAULT_EPS_FLOOR) -> MarketModel:
    """``N + 1`` asset market with the benchmark as asset 0.

    Drift is ``(mu, mu*b + r*(1 - b))`` and covariance is
    ``[[s2, s2*b^T], [s2*b, C + s2*b b^T]]`` with ``s2 = sigma**2``.
    """
    _require_valid_capm(c, eps_floor)
    b, s2, r = c.betas, c.sigma**2, c.risk_free
    n = b.size
    drift = np.empty(n + 1)
    drift[0] = c.mu
    drift[1:] = c.mu * b + r * (1.0 - b)
    cov = np.empty((n + 1, n + 1))
    cov[0, 0] = s2
    cov[0, 1:] = s2 * b
    cov[1:, 0] = s2 * b
    cov[1:, 1:] = c.residual_cov + s2 * np.outer(b, b)
    return _checked(MarketModel(drift, cov, r), "[[s2, s2 b^T], [s2 b, C + s2 b b^T]]", eps_floor)


def assemble_capm_noninvestable(c: CapmModel, eps_floor: float = DEFAULT_EPS_FLOOR) -> MarketModel:
    """``N`` asset market when the benchmark itself cannot be held.

    Drift ``(mu - r) b + r`` and covariance ``C + sigma^2 b b^T``; this is the
    risky sub-block of :func:`assemble_capm_investable`.
    """
    _require_valid_capm(c, eps_floor)
    b, s2, r = c.betas, c.sigma**2, c.risk_free
    drift = c.mu * b + r * (1.0 - b)
    cov = c.residual_cov + s2 * np.outer(b, b)
    return _checked(MarketModel(drift, cov, r), "C + s2 b b^T", eps_floor)
