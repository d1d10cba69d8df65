"""Single-prosumer physics: battery SOC dynamics, the naive dispatch policy,
residual demand and the bilateral loan ledger.

Sign conventions (all powers in kW, energies in kWh):

* battery dispatch ``> 0`` charges the battery, ``< 0`` discharges it;
* an exchange entry ``> 0`` is energy the agent sends to its peer, so it adds
  to the agent's residual demand exactly like extra load;
* residual = net demand + exchange + dispatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from ._kernels import SOC_TOL, simulate_greedy
from .profile_io import TimeSeries


class DispatchError(ValueError):
    """A dispatch request would leave the rate limits or the SOC window."""

    def __init__(self, message, feasible_range):
        super().__init__(f"{message}; feasible dispatch is "
                         f"[{feasible_range[0]:.6g}, {feasible_range[1]:.6g}] kW")
        self.feasible_range = feasible_range


class ContractRejected(ValueError):
    """A loan exceeds the physical link limit between two agents."""


@dataclass(frozen=True)
class Battery:
    capacity_kwh: float = 7.0
    soc_kwh: float = 3.85
    soc_min_frac: float = 0.2
    soc_max_frac: float = 0.9
    charge_rate_kw: float = 1.3
    discharge_rate_kw: float = 3.3
    eff_charge: float = 0.9
    eff_discharge: float = 0.9
    degradation_kwh_per_step: float = 0.0

    def __post_init__(self):
        if self.capacity_kwh < 0:
            raise ValueError("capacity must be non-negative")
        if not 0.0 <= self.soc_min_frac <= self.soc_max_frac <= 1.0:
            raise ValueError("SOC window must satisfy 0 <= min <= max <= 1")
        if self.charge_rate_kw <= 0 or self.discharge_rate_kw <= 0:
            raise ValueError("charge and discharge rates must be positive")
        if not (0 < self.eff_charge <= 1 and 0 < self.eff_discharge <= 1):
            raise ValueError("efficiencies must lie in (0, 1]")
        if self.degradation_kwh_per_step < 0:
            raise ValueError("degradation must be non-negative")
        if not self.soc_min - SOC_TOL <= self.soc_kwh <= self.soc_max + SOC_TOL:
            raise ValueError(
                f"SOC {self.soc_kwh} outside [{self.soc_min}, {self.soc_max}] kWh"
            )

    @property
    def soc_min(self) -> float:
        return self.soc_min_frac * self.capacity_kwh

    @property
    def soc_max(self) -> float:
        return self.soc_max_frac * self.capacity_kwh

    @classmethod
    def from_fraction(cls, soc_frac: float = 0.5, **kwargs) -> Battery:
        cap = kwargs.get("capacity_kwh", cls.capacity_kwh)
        return cls(soc_kwh=soc_frac * cap, **kwargs)

    def policy_args(self, dt_hours):
        """Positional parameters of the compiled greedy policy after ``soc0``."""
        return (dt_hours, self.soc_min, self.soc_max, self.charge_rate_kw,
                self.discharge_rate_kw, self.eff_charge, self.eff_discharge,
                self.degradation_kwh_per_step)


@dataclass(frozen=True)
class LinkParams:
    link_limit_kw: float = 5.0
    link_efficiency: float = 1.0

    def __post_init__(self):
        if self.link_limit_kw <= 0:
            raise ValueError("link limit must be positive")
        if not 0 < self.link_efficiency <= 1:
            raise ValueError("link efficiency must lie in (0, 1]")

    def max_energy(self, dt_hours: float) -> float:
        """Largest loan volume (kWh) deliverable in one period."""
        return self.link_efficiency * self.link_limit_kw * dt_hours


def soc_delta(b: Battery, dispatch_kw: float, dt_hours: float) -> float:
    eta = b.eff_charge if dispatch_kw >= 0 else 1.0 / b.eff_discharge
    return eta * dispatch_kw * dt_hours - b.degradation_kwh_per_step


def feasible_dispatch(b: Battery, dt_hours: float) -> tuple[float, float]:
    """Dispatch interval (kW) honouring both rate limits and the SOC window."""
    degr = b.degradation_kwh_per_step
    hi = min(b.charge_rate_kw, (b.soc_max - b.soc_kwh + degr) / (b.eff_charge * dt_hours))
    room_down = b.soc_kwh - degr - b.soc_min
    if room_down >= 0:
        lo = max(-b.discharge_rate_kw, -room_down * b.eff_discharge / dt_hours)
    else:
        lo = -room_down / (b.eff_charge * dt_hours)
    return lo, hi


def battery_step(b: Battery, dispatch_kw: float, dt_hours: float) -> Battery:
    """Advance the SOC by one period; infeasible requests raise ``DispatchError``."""
    if dispatch_kw > b.charge_rate_kw + 1e-12 or dispatch_kw < -b.discharge_rate_kw - 1e-12:
        raise DispatchError(f"dispatch {dispatch_kw} kW exceeds the rate limit",
                            feasible_dispatch(b, dt_hours))
    soc = b.soc_kwh + soc_delta(b, dispatch_kw, dt_hours)
    if soc < b.soc_min - SOC_TOL or soc > b.soc_max + SOC_TOL:
        raise DispatchError(
            f"dispatch {dispatch_kw} kW would move SOC to {soc:.6g} kWh outside "
            f"[{b.soc_min:.6g}, {b.soc_max:.6g}]",
            feasible_dispatch(b, dt_hours),
        )
    return replace(b, soc_kwh=min(max(soc, b.soc_min), b.soc_max))


def net_demand(load: TimeSeries, pv: TimeSeries) -> TimeSeries:
    if len(load) != len(pv) or load.granularity_minutes != pv.granularity_minutes:
        raise ValueError("load and pv must share length and granularity")
    return load.with_values(load.values - pv.values)


class DispatchResult(NamedTuple):
    dispatch: TimeSeries
    residual: TimeSeries
    soc: np.ndarray


def naive_dispatch(b: Battery, net: TimeSeries, exchange: TimeSeries | None = None) -> DispatchResult:
    """Greedy per-period battery schedule offsetting net demand plus exchange.

    ``soc`` holds the trajectory including the initial state (length n + 1).
    """
    ex = np.zeros(len(net)) if exchange is None else np.asarray(
        exchange.values if isinstance(exchange, TimeSeries) else exchange, dtype=float)
    if ex.shape != (len(net),):
        raise ValueError("net demand and exchange must have equal length")
    demand = net.values + ex
    dispatch, soc = simulate_greedy(b.soc_kwh, demand, *b.policy_args(net.dt_hours))
    return DispatchResult(net.with_values(dispatch), net.with_values(demand + dispatch), soc)


@dataclass(frozen=True)
class LedgerEntry:
    counterparty: str
    period: int
    energy_kwh: float


@dataclass(frozen=True)
class ExchangeLedger:
    """Immutable record of one agent's loan legs, the ``ex_{i,j}`` vectors."""

    entries: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def counterparties(self) -> set[str]:
        return {e.counterparty for e in self.entries}

    def energy_by_period(self, counterparty: str | None = None) -> dict[int, float]:
        totals: dict[int, float] = {}
        for e in self.entries:
            if counterparty is None or e.counterparty == counterparty:
                totals[e.period] = totals.get(e.period, 0.0) + e.energy_kwh
        return totals

    def exchange_kw(self, start: int, length: int, dt_hours: float) -> np.ndarray:
        """Aggregate exchange power over ``[start, start + length)``."""
        out = np.zeros(length)
        for e in self.entries:
            k = e.period - start
            if 0 <= k < length:
                out[k] += e.energy_kwh / dt_hours
        return out


def apply_contract(ledger: ExchangeLedger, peer: str, t: int, contract,
                   link: LinkParams, dt_hours: float = 1.0) -> ExchangeLedger:
    """Append the two legs of a loan: ``+q`` at ``t`` and ``-q`` at ``t + tau``.

    ``q`` is taken from the ledger owner's side; the counterparty records the
    same contract with ``q`` negated.  A zero-volume contract is the no-deal
    outcome and leaves the ledger untouched.
    """
    q = float(contract.quantity_kwh)
    if abs(q) > link.max_energy(dt_hours) + 1e-12:
        raise ContractRejected(
            f"|q| = {abs(q)} kWh exceeds the link limit of {link.max_energy(dt_hours)} kWh per period"
        )
    if q == 0.0:
        return ledger
    legs = (LedgerEntry(peer, t, q), LedgerEntry(peer, t + int(contract.return_delay), -q))
    return ExchangeLedger(ledger.entries + legs)
