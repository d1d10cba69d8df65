"""Stochastic net-demand scenarios around a point prediction.

Forecast errors are an AR(1)-correlated Gaussian chain over the planning
lags: every lag has its own marginal standard deviation and consecutive lags
share a fixed correlation coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profile_io import TimeSeries


@dataclass(frozen=True)
class GpParams:
    lag_stds: np.ndarray
    step_correlation: float = 0.7

    def __post_init__(self):
        stds = np.array(self.lag_stds, dtype=float).reshape(-1)
        if np.any(stds < 0) or not np.all(np.isfinite(stds)):
            raise ValueError("lag_stds must be finite and non-negative")
        if not -1.0 <= self.step_correlation <= 1.0:
            raise ValueError("step_correlation must lie in [-1, 1]")
        stds.setflags(write=False)
        object.__setattr__(self, "lag_stds", stds)


def default_gp_params(base: TimeSeries, std_fraction: float = 0.05,
                      step_correlation: float = 0.7) -> GpParams:
    """Error std grows linearly with lead time from ``std_fraction * peak``."""
    w = len(base)
    peak = float(np.max(np.abs(base.values))) if w else 0.0
    lags = np.arange(w)
    return GpParams(std_fraction * peak * (1.0 + lags / max(w, 1)), step_correlation)


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    base: TimeSeries
    deviations: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        dev = np.atleast_2d(np.asarray(self.deviations, dtype=float))
        prob = np.asarray(self.probabilities, dtype=float).reshape(-1)
        if dev.shape[1] != len(self.base):
            raise ValueError("deviation rows must match the horizon length")
        if prob.shape[0] != dev.shape[0]:
            raise ValueError("one probability per scenario required")
        if abs(prob.sum() - 1.0) > 1e-9:
            raise ValueError("scenario probabilities must sum to 1")
        dev.setflags(write=False)
        prob.setflags(write=False)
        object.__setattr__(self, "deviations", dev)
        object.__setattr__(self, "probabilities", prob)

    @property
    def count(self) -> int:
        return self.deviations.shape[0]

    @property
    def horizon(self) -> int:
        return self.deviations.shape[1]

    def net_paths(self) -> np.ndarray:
        """Scenario net-demand matrix, shape (count, horizon)."""
        return self.base.values[None, :] + self.deviations

    @classmethod
    def deterministic(cls, base: TimeSeries) -> ScenarioSet:
        return cls(base, np.zeros((1, len(base))), np.ones(1))


def ar1_deviations(lag_stds, rho: float, count: int, rng) -> np.ndarray:
    """Draw ``count`` error chains with per-lag marginal stds ``lag_stds``.

    d(0) = s0 e0,  d(l) = rho d(l-1) s_l / s_{l-1} + s_l sqrt(1 - rho^2) e_l,
    so that std(d(l)) = s_l and corr(d(l-1), d(l)) = rho.
    """
    stds = np.asarray(lag_stds, dtype=float)
    w = len(stds)
    eps = rng.standard_normal((count, w))
    dev = np.empty((count, w))
    if w == 0:
        return dev
    innov = np.sqrt(max(0.0, 1.0 - rho * rho))
    dev[:, 0] = stds[0] * eps[:, 0]
    for lag in range(1, w):
        prev = stds[lag - 1]
        carry = rho * stds[lag] / prev if prev > 0 else 0.0
        # a zero-variance predecessor cannot carry correlation; restart the chain
        scale = stds[lag] * innov if prev > 0 else stds[lag]
        dev[:, lag] = carry * dev[:, lag - 1] + scale * eps[:, lag]
    return dev


def generate_scenarios(base: TimeSeries, params: GpParams, count: int, seed) -> ScenarioSet:
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if len(params.lag_stds) != len(base):
        raise ValueError(
            f"lag_stds has {len(params.lag_stds)} entries but the base covers {len(base)} periods"
        )
    rng = np.random.default_rng(seed)
    dev = ar1_deviations(params.lag_stds, params.step_correlation, count, rng)
    return ScenarioSet(base, dev, np.full(count, 1.0 / count))


def scenario_residual(scn: ScenarioSet, exchange, battery_dispatch) -> np.ndarray:
    """Residual demand per scenario: net + exchange + battery dispatch (kW)."""
    ex = exchange.values if isinstance(exchange, TimeSeries) else np.asarray(exchange, dtype=float)
    pb = np.asarray(battery_dispatch, dtype=float)
    if ex.shape != (scn.horizon,):
        raise ValueError(f"exchange has shape {ex.shape}, expected ({scn.horizon},)")
    if pb.shape != (scn.count, scn.horizon):
        raise ValueError(f"dispatch has shape {pb.shape}, expected {(scn.count, scn.horizon)}")
    return scn.net_paths() + ex[None, :] + pb
