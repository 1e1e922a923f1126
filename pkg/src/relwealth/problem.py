"""Problem files: a YAML key/value tree describing one optimization problem.

Grammar (YAML 1.1; JSON also parses)::

    mode: merton | capm_investable | capm_noninvestable
    market:                      # mode: merton
      drift: [g_1, ..., g_N]
      covariance: [[...], ...]   # N x N
      risk_free: r
    market:                      # mode: capm_*
      mu: benchmark drift
      sigma: benchmark volatility
      risk_free: r
      betas: [b_1, ..., b_N]
      residual_cov: [[...], ...] # N x N
    utility:
      gamma: absolute-wealth exponent, strictly inside (0, 1)
      gammas: [gamma_1, ..., gamma_k]      # optional, default []
    benchmarks:                  # optional, k weight vectors
      - [rho_11, ..., rho_1M]    # M = N, or N + 1 for capm_investable (benchmark first)
    constraint:                  # required for capm_* modes
      beta0: target beta
    simulation:                  # optional
      horizon: T (years, > 0)
      steps: time steps per path
      paths: number of paths
      seed: unsigned 64-bit integer
      scheme: exact_log | euler_log
    portfolio: [w_1, ..., w_M]   # optional weights for `simulate`

Every error found is reported at once with its field path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import DimensionError, SchemaError
from .model import CapmModel, MarketModel
from .objective import BenchmarkSet, UtilityParams
from .simulator import SCHEMES, SimConfig

MODES = ("merton", "capm_investable", "capm_noninvestable")
_TOP_KEYS = {"mode", "market", "utility", "benchmarks", "constraint", "simulation", "portfolio"}
_MERTON_KEYS = ("drift", "covariance", "risk_free")
_CAPM_KEYS = ("mu", "sigma", "risk_free", "betas", "residual_cov")
_SIM_DEFAULTS = {"horizon": 1.0, "steps": 1, "paths": 100_000, "seed": 0, "scheme": "exact_log"}


@dataclass
class ProblemSpec:
    """Validated contents of a problem file, held as plain Python data."""

    mode: str
    market: dict[str, Any]
    gamma: float
    gammas: list[float] = field(default_factory=list)
    benchmarks: list[list[float]] = field(default_factory=list)
    beta0: Optional[float] = None
    simulation: Optional[dict[str, Any]] = None
    portfolio: Optional[list[float]] = None

    @property
    def n_assets(self) -> int:
        """Number of assets in the market actually optimized over."""
        if self.mode == "merton":
            return len(self.market["drift"])
        n = len(self.market["betas"])
        return n + 1 if self.mode == "capm_investable" else n

    def market_model(self) -> MarketModel:
        m = self.market
        return MarketModel(m["drift"], m["covariance"], m["risk_free"])

    def capm_model(self) -> CapmModel:
        m = self.market
        return CapmModel(m["mu"], m["sigma"], m["risk_free"], m["betas"], m["residual_cov"])

    def params(self) -> UtilityParams:
        return UtilityParams(self.gamma, tuple(self.gammas))

    def benchmark_set(self) -> BenchmarkSet:
        return BenchmarkSet.of(self.benchmarks, self.n_assets)

    def sim_config(self) -> SimConfig:
        return SimConfig(**(self.simulation or _SIM_DEFAULTS))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"mode": self.mode}
        keys = _MERTON_KEYS if self.mode == "merton" else _CAPM_KEYS
        out["market"] = {k: self.market[k] for k in keys}
        out["utility"] = {"gamma": self.gamma, "gammas": list(self.gammas)}
        out["benchmarks"] = [list(b) for b in self.benchmarks]
        if self.beta0 is not None:
            out["constraint"] = {"beta0": self.beta0}
        if self.simulation is not None:
            out["simulation"] = {k: self.simulation[k] for k in _SIM_DEFAULTS}
        if self.portfolio is not None:
            out["portfolio"] = list(self.portfolio)
        return out

    def with_simulation(self, **overrides) -> ProblemSpec:
        """Copy with simulation settings overridden (``None`` values are ignored)."""
        sim = dict(self.simulation or _SIM_DEFAULTS)
        sim.update({k: v for k, v in overrides.items() if v is not None})
        SimConfig(**sim)
        return ProblemSpec(
            self.mode, self.market, self.gamma, list(self.gammas), [list(b) for b in self.benchmarks],
            self.beta0, sim, None if self.portfolio is None else list(self.portfolio),
        )


class _Checker:
    def __init__(self):
        self.errors: list[tuple[str, str]] = []
        self.dimension_errors: list[tuple[str, str]] = []

    def fail(self, path: str, msg: str) -> None:
        self.errors.append((path, msg))

    def number(self, value, path: str) -> Optional[float]:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, found {type(value).__name__}")
            return None
        if not math.isfinite(value):
            self.fail(path, "must be finite")
            return None
        return float(value)

    def integer(self, value, path: str) -> Optional[int]:
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(path, f"expected an integer, found {type(value).__name__}")
            return None
        return int(value)

    def vector(self, value, path: str) -> Optional[list[float]]:
        if not isinstance(value, list):
            self.fail(path, f"expected a list of numbers, found {type(value).__name__}")
            return None
        items = [self.number(x, f"{path}[{i}]") for i, x in enumerate(value)]
        return None if any(x is None for x in items) else items

    def matrix(self, value, n: Optional[int], path: str) -> Optional[list[list[float]]]:
        if not isinstance(value, list):
            self.fail(path, f"expected a list of rows, found {type(value).__name__}")
            return None
        rows = [self.vector(row, f"{path}[{i}]") for i, row in enumerate(value)]
        if any(r is None for r in rows):
            return None
        if n is not None and (len(rows) != n or any(len(r) != n for r in rows)):
            self.dimension(path, f"expected a {n} x {n} matrix")
            return None
        return rows

    def dimension(self, path: str, msg: str) -> None:
        self.dimension_errors.append((path, msg))

    def section(self, data: dict, key: str, required: bool = True) -> Optional[dict]:
        value = data.get(key)
        if value is None:
            if required:
                self.fail(key, "missing section")
            return None
        if not isinstance(value, dict):
            self.fail(key, f"expected a mapping, found {type(value).__name__}")
            return None
        return value

    def raise_if_any(self) -> None:
        if self.errors:
            raise SchemaError(self.errors + self.dimension_errors)
        if self.dimension_errors:
            raise DimensionError(self.dimension_errors)


def _check_keys(chk: _Checker, section: dict, allowed, prefix: str) -> None:
    for key in section:
        if key not in allowed:
            chk.fail(f"{prefix}.{key}" if prefix else str(key), "unknown field")


def parse_problem(data: Any) -> ProblemSpec:
    """Validate an already-parsed problem tree."""
    chk = _Checker()
    if not isinstance(data, dict):
        raise SchemaError([("<root>", "expected a mapping at the top level")])
    _check_keys(chk, data, _TOP_KEYS, "")

    mode = data.get("mode")
    if mode not in MODES:
        chk.fail("mode", f"expected one of {', '.join(MODES)}, found {mode!r}")
        chk.raise_if_any()

    market_in = chk.section(data, "market") or {}
    keys = _MERTON_KEYS if mode == "merton" else _CAPM_KEYS
    _check_keys(chk, market_in, keys, "market")
    market: dict[str, Any] = {}
    for key in keys:
        if key not in market_in:
            chk.fail(f"market.{key}", "missing field")
    n: Optional[int] = None
    if mode == "merton":
        if "drift" in market_in:
            market["drift"] = chk.vector(market_in["drift"], "market.drift")
            n = len(market["drift"]) if market["drift"] is not None else None
            if n == 0:
                chk.fail("market.drift", "needs at least one asset")
        if "covariance" in market_in:
            market["covariance"] = chk.matrix(market_in["covariance"], n, "market.covariance")
    else:
        if "betas" in market_in:
            market["betas"] = chk.vector(market_in["betas"], "market.betas")
            n = len(market["betas"]) if market["betas"] is not None else None
            if n == 0:
                chk.fail("market.betas", "needs at least one asset")
        if "residual_cov" in market_in:
            market["residual_cov"] = chk.matrix(market_in["residual_cov"], n, "market.residual_cov")
        for key in ("mu", "sigma"):
            if key in market_in:
                market[key] = chk.number(market_in[key], f"market.{key}")
        if market.get("sigma") is not None and market["sigma"] <= 0:
            chk.fail("market.sigma", "must be positive")
    if "risk_free" in market_in:
        market["risk_free"] = chk.number(market_in["risk_free"], "market.risk_free")

    width = None if n is None else (n + 1 if mode == "capm_investable" else n)

    utility = chk.section(data, "utility") or {}
    _check_keys(chk, utility, ("gamma", "gammas"), "utility")
    gamma = None
    if "gamma" not in utility:
        chk.fail("utility.gamma", "missing field")
    else:
        gamma = chk.number(utility["gamma"], "utility.gamma")
        if gamma is not None and not 0 < gamma < 1:
            chk.fail("utility.gamma", f"absolute-wealth exponent must lie strictly inside (0, 1), found {gamma}")
    gammas = chk.vector(utility.get("gammas", []), "utility.gammas") or []

    bench_in = data.get("benchmarks", []) or []
    benchmarks: list[list[float]] = []
    if not isinstance(bench_in, list):
        chk.fail("benchmarks", "expected a list of weight vectors")
    else:
        for j, row in enumerate(bench_in):
            vec = chk.vector(row, f"benchmarks[{j}]")
            if vec is None:
                continue
            if width is not None and len(vec) != width:
                chk.dimension(f"benchmarks[{j}]", f"expected {width} weights, found {len(vec)}")
            benchmarks.append(vec)
        if len(bench_in) != len(gammas):
            chk.dimension(
                "utility.gammas", f"{len(bench_in)} benchmarks but {len(gammas)} relative-wealth exponents"
            )

    beta0 = None
    constraint = chk.section(data, "constraint", required=mode != "merton")
    if constraint is not None:
        _check_keys(chk, constraint, ("beta0",), "constraint")
        if mode == "merton":
            chk.fail("constraint", "only allowed for capm_* modes")
        elif "beta0" not in constraint:
            chk.fail("constraint.beta0", "missing field")
        else:
            beta0 = chk.number(constraint["beta0"], "constraint.beta0")

    simulation = None
    sim_in = chk.section(data, "simulation", required=False)
    if sim_in is not None:
        _check_keys(chk, sim_in, _SIM_DEFAULTS, "simulation")
        simulation = dict(_SIM_DEFAULTS)
        for key in ("horizon",):
            if key in sim_in:
                simulation[key] = chk.number(sim_in[key], f"simulation.{key}")
        for key in ("steps", "paths", "seed"):
            if key in sim_in:
                simulation[key] = chk.integer(sim_in[key], f"simulation.{key}")
        if "scheme" in sim_in:
            if sim_in["scheme"] not in SCHEMES:
                chk.fail("simulation.scheme", f"expected one of {', '.join(SCHEMES)}")
            simulation["scheme"] = sim_in["scheme"]
        if all(v is not None for v in simulation.values()):
            try:
                SimConfig(**simulation)
            except ValueError as exc:
                chk.fail("simulation", str(exc))

    portfolio = None
    if data.get("portfolio") is not None:
        portfolio = chk.vector(data["portfolio"], "portfolio")
        if portfolio is not None and width is not None and len(portfolio) != width:
            chk.dimension("portfolio", f"expected {width} weights, found {len(portfolio)}")

    chk.raise_if_any()
    return ProblemSpec(mode, market, gamma, gammas, benchmarks, beta0, simulation, portfolio)


def load_problem(path) -> ProblemSpec:
    """Read and validate a problem file.

    Raises
    ------
    SchemaError
        On YAML syntax errors (path is ``line L, column C``) or schema
        violations (path is the dotted field path).
    DimensionError
        When sections disagree about sizes.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else str(path)
        raise SchemaError([(where, f"parse error: {exc.problem}")]) from exc
    except yaml.YAMLError as exc:
        raise SchemaError([(str(path), f"parse error: {exc}")]) from exc
    return parse_problem(data)


def dump_problem(spec: ProblemSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=False, default_flow_style=None, width=1000)


def save_problem(spec: ProblemSpec, path) -> None:
    from .report import atomic_write_text

    atomic_write_text(path, dump_problem(spec))
