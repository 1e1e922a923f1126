"""Plain sample moments from a table of simple per-period returns.

Simple returns (not log returns) are used because the model is stated in
``dS/S`` form: the per-period mean of ``dS/S`` is ``g dt`` and its covariance
is ``A dt``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import EstimationError, SchemaError
from .model import MarketModel, validate_market
from .simulator import SimConfig, simulate_terminal


@dataclass(frozen=True)
class ReturnsTable:
    names: tuple[str, ...]
    returns: NDArray[np.float64]  # (T_obs, N)
    dt: float

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.returns, dtype=np.float64))
        if r.shape[1] != len(self.names):
            raise SchemaError([("returns", f"{len(self.names)} names but {r.shape[1]} columns")])
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise SchemaError([("dt", f"period length must be positive, got {self.dt}")])
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n_obs(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


def read_returns_csv(path, dt: float) -> ReturnsTable:
    """Parse a header-plus-rows CSV of simple returns. Empty cells are errors."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError([(str(path), "empty file")])
    names = [h.strip() for h in rows[0]]
    data = []
    errors = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(names):
            errors.append((f"line {lineno}", f"expected {len(names)} cells, found {len(row)}"))
            continue
        values = []
        for col, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                errors.append((f"line {lineno}, column {col + 1}", f"not a number: {cell!r}"))
                continue
            if not math.isfinite(value):
                errors.append((f"line {lineno}, column {col + 1}", f"not finite: {cell!r}"))
            values.append(value)
        data.append(values)
    if errors:
        raise SchemaError(errors)
    return ReturnsTable(tuple(names), np.array(data, dtype=np.float64).reshape(-1, len(names)), float(dt))


def write_returns_csv(table: ReturnsTable, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.names)
        for row in table.returns:
            writer.writerow([repr(float(x)) for x in row])


def estimate_from_returns(table: ReturnsTable, risk_free: float) -> MarketModel:
    """Annualized drift and covariance from simple returns.

    ``g = mean / dt`` and ``A = sample covariance (ddof=1) / dt``.

    Raises
    ------
    EstimationError
        If there are fewer than ``N + 2`` rows, or the estimated covariance
        fails validation (e.g. a constant or duplicated column). The raw
        estimates and the validation report are attached.
    """
    n_obs, n = table.returns.shape
    if n_obs < n + 2:
        raise EstimationError(f"need at least {n + 2} rows for {n} assets, got {n_obs}")
    drift = table.returns.mean(axis=0) / table.dt
    cov = np.atleast_2d(np.cov(table.returns, rowvar=False, ddof=1)) / table.dt
    model = MarketModel(drift, cov, risk_free)
    report = validate_market(model)
    if not report.ok:
        raise EstimationError(
            f"estimated covariance is invalid: {report.summary()}", report, drift=drift, covariance=cov
        )
    return model


def generate_returns(model: MarketModel, n_obs: int, dt: float, seed: int, names=None) -> ReturnsTable:
    """Simple returns over ``n_obs`` independent periods of length ``dt``.

    Each period is one simulator path of the single-asset portfolios ``e_i``.
    """
    n = model.n_assets
    cfg = SimConfig(horizon=dt, steps=1, paths=n_obs, seed=seed)
    log_prices = simulate_terminal(model, np.eye(n), None, cfg).portfolio_log_wealth
    names = tuple(names) if names is not None else tuple(f"asset{i + 1}" for i in range(n))
    return ReturnsTable(names, np.expm1(log_prices), dt)
