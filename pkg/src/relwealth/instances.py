"""Reference instances and seeded random instance generators."""

from __future__ import annotations

import numpy as np

from .model import CapmModel, MarketModel
from .objective import BenchmarkSet, ObjectiveContext, UtilityParams

# one risky asset: g = 0.08, r = 0.02, A = 0.04; Merton weight at gamma = 0.5 is 3.0
ONE_ASSET = MarketModel([0.08], [[0.04]], 0.02)

TWO_ASSET = MarketModel([0.08, 0.05], [[0.04, 0.01], [0.01, 0.09]], 0.02)

# benchmark mu = 0.08, sigma = 0.2, r = 0.02 and one asset with beta 1.5, residual variance 0.05
ONE_ASSET_CAPM = CapmModel(mu=0.08, sigma=0.2, risk_free=0.02, betas=[1.5], residual_cov=[[0.05]])


def _estimation_market() -> MarketModel:
    vols = np.array([0.4, 0.5, 0.6])
    corr = np.full((3, 3), 0.2)
    np.fill_diagonal(corr, 1.0)
    return MarketModel([0.12, 0.14, 0.16], np.outer(vols, vols) * corr, 0.02)


# default instance for estimation round trips; high volatility keeps drift-estimation
# noise in the weights small relative to the weights themselves
ESTIMATION_MARKET = _estimation_market()
ESTIMATION_GAMMA = 0.9


def random_spd(rng: np.random.Generator, n: int, eig_range=(0.01, 0.5)) -> np.ndarray:
    """Random SPD matrix with eigenvalues uniform on ``eig_range``."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    eig = rng.uniform(*eig_range, size=n)
    a = (q * eig) @ q.T
    return 0.5 * (a + a.T)


def random_market(rng: np.random.Generator, n: int, eig_range=(0.01, 0.5)) -> MarketModel:
    r = rng.uniform(0.0, 0.04)
    g = r + rng.uniform(-0.02, 0.12, size=n)
    return MarketModel(g, random_spd(rng, n, eig_range), r)


def random_context(
    rng: np.random.Generator,
    n: int,
    k: int,
    gamma_range=(0.1, 0.9),
    eig_range=(0.01, 0.5),
) -> ObjectiveContext:
    """Random market with ``k`` benchmarks whose weights lie in [0, 1]."""
    model = random_market(rng, n, eig_range)
    gamma = rng.uniform(*gamma_range)
    gammas = tuple(rng.uniform(0.0, 0.5, size=k))
    rho = rng.uniform(0.0, 1.0, size=(k, n)) / max(n, 1)
    return ObjectiveContext(model, UtilityParams(gamma, gammas), BenchmarkSet(rho.reshape(k, n)))


def random_capm(rng: np.random.Generator, n: int) -> CapmModel:
    r = rng.uniform(0.0, 0.04)
    return CapmModel(
        mu=r + rng.uniform(0.03, 0.09),
        sigma=rng.uniform(0.1, 0.3),
        risk_free=r,
        betas=rng.uniform(0.5, 1.5, size=n),
        residual_cov=random_spd(rng, n, (0.01, 0.1)),
    )
