"""Energy-loan contracts, their evaluation under uncertainty, and the
utility-ordered contract space each agent negotiates from.

Utilities are negated weighted costs: both criteria (battery flexibility loss
and energy traded with the external grid) are non-negative kWh quantities, so
every utility is <= 0 and larger is better.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._kernels import evaluate_grid, restore_energy
from .prosumer import Battery, ContractRejected, LinkParams
from .scenarios import ScenarioSet


class EmptySpaceError(LookupError):
    """Raised when a statistic is requested from an empty contract space."""


@dataclass(frozen=True)
class EnergyContract:
    """Loan of ``quantity_kwh`` now, returned ``return_delay`` periods later.

    The quantity is stated from the side of whoever holds the contract: a
    positive value means that agent sends energy now and receives it back.
    """

    quantity_kwh: float
    return_delay: int

    def __post_init__(self):
        if int(self.return_delay) != self.return_delay or self.return_delay < 1:
            raise ValueError(f"return_delay must be a positive integer, got {self.return_delay}")
        object.__setattr__(self, "quantity_kwh", float(self.quantity_kwh))
        object.__setattr__(self, "return_delay", int(self.return_delay))

    def mirrored(self) -> EnergyContract:
        """The same loan seen from the counterparty."""
        return EnergyContract(-self.quantity_kwh, self.return_delay)

    @property
    def is_no_deal(self) -> bool:
        return self.quantity_kwh == 0.0


def tie_break_key(contract: EnergyContract):
    """Least-commitment order among equal utilities."""
    q = contract.quantity_kwh
    return (abs(q), contract.return_delay, 0 if q > 0 else 1)


@dataclass(frozen=True)
class NegotiationDomain:
    quantities: tuple
    delays: tuple

    def __post_init__(self):
        qs = tuple(float(q) for q in self.quantities)
        ds = tuple(int(d) for d in self.delays)
        if not qs or not ds:
            raise ValueError("domain needs at least one quantity and one delay")
        if len(set(qs)) != len(qs) or len(set(ds)) != len(ds):
            raise ValueError("domain values must be distinct")
        if min(ds) < 1:
            raise ValueError("return delays must be positive")
        object.__setattr__(self, "quantities", tuple(sorted(qs)))
        object.__setattr__(self, "delays", tuple(sorted(ds)))

    @classmethod
    def symmetric(cls, max_quantity: float, n_quantities: int = 15, horizon: int = 96,
                  min_delay: int = 2) -> NegotiationDomain:
        """``n_quantities`` evenly spaced volumes in [-max, max] including 0,
        delays ``min_delay..horizon``."""
        if n_quantities < 1 or n_quantities % 2 == 0:
            raise ValueError("n_quantities must be a positive odd number")
        m = n_quantities // 2
        step = max_quantity / m if m else 0.0
        # k * step keeps mirrored quantities bit-identical
        qs = tuple(k * step for k in range(-m, m + 1))
        return cls(qs, tuple(range(min_delay, horizon + 1)))

    @classmethod
    def for_link(cls, link: LinkParams, dt_hours: float, n_quantities: int = 15,
                 horizon: int = 96) -> NegotiationDomain:
        return cls.symmetric(link.max_energy(dt_hours), n_quantities, horizon)

    def __len__(self) -> int:
        return len(self.quantities) * len(self.delays)

    def __contains__(self, contract) -> bool:
        return contract.quantity_kwh in self.quantities and contract.return_delay in self.delays

    def contracts(self):
        for q, d in itertools.product(self.quantities, self.delays):
            yield EnergyContract(q, d)

    @property
    def max_delay(self) -> int:
        return self.delays[-1]

    def check_link(self, link: LinkParams, dt_hours: float) -> None:
        qmax = max(abs(q) for q in self.quantities)
        if qmax > link.max_energy(dt_hours) + 1e-12:
            raise ValueError(f"domain quantity {qmax} kWh exceeds the link limit")


@dataclass(frozen=True)
class CriterionWeights:
    w_flex: float = 0.5
    w_autarky: float = 0.5

    def __post_init__(self):
        if self.w_flex < 0 or self.w_autarky < 0:
            raise ValueError("criterion weights must be non-negative")
        if abs(self.w_flex + self.w_autarky - 1.0) > 1e-9:
            raise ValueError("criterion weights must sum to 1")


@dataclass(frozen=True, eq=False)
class PlanningState:
    """What an agent knows when it evaluates contracts at ``period``.

    ``exchange`` is the exchange power (kW) already committed over the
    planning window, aligned with the scenario base.
    """

    battery: Battery
    weights: CriterionWeights
    exchange: np.ndarray
    dt_hours: float = 0.25
    link: LinkParams = field(default_factory=LinkParams)
    period: int = 0

    def __post_init__(self):
        ex = np.array(self.exchange, dtype=float).reshape(-1)
        ex.setflags(write=False)
        object.__setattr__(self, "exchange", ex)


def evaluate_flex_loss(dispatch, soc_paths, b: Battery, dt_hours: float = 1.0) -> np.ndarray:
    """Loss in flexibility per scenario (kWh).

    Energy drawn by the battery over the window plus the grid-side energy that
    restores the final SOC to its initial value.
    """
    pb = np.atleast_2d(np.asarray(dispatch, dtype=float))
    soc = np.atleast_2d(np.asarray(soc_paths, dtype=float))
    if soc.shape != (pb.shape[0], pb.shape[1] + 1):
        raise ValueError("soc paths must have one more column than dispatch")
    out = pb.sum(axis=1) * dt_hours
    for s in range(out.shape[0]):
        out[s] += restore_energy(soc[s, 0] - soc[s, -1], b.eff_charge, b.eff_discharge)
    return out


def evaluate_autarky(residual, dt_hours: float = 1.0) -> np.ndarray:
    """Energy exchanged with the external grid per scenario (kWh)."""
    res = np.atleast_2d(np.asarray(residual, dtype=float))
    return np.abs(res).sum(axis=1) * dt_hours


def _grid(state: PlanningState, scn: ScenarioSet, quantities, delays) -> np.ndarray:
    if state.exchange.shape[0] != scn.horizon:
        raise ValueError(
            f"committed exchange covers {state.exchange.shape[0]} periods, scenarios {scn.horizon}"
        )
    b = state.battery
    return evaluate_grid(
        np.ascontiguousarray(scn.net_paths()),
        np.ascontiguousarray(scn.probabilities),
        np.ascontiguousarray(state.exchange),
        np.asarray(quantities, dtype=float) / state.dt_hours,
        np.asarray(delays, dtype=np.int64),
        b.soc_kwh,
        *b.policy_args(state.dt_hours),
        state.weights.w_flex,
        state.weights.w_autarky,
    )


def expected_utility(state: PlanningState, contract: EnergyContract, scn: ScenarioSet) -> float:
    """Probability-weighted utility of executing ``contract`` this period."""
    if abs(contract.quantity_kwh) > state.link.max_energy(state.dt_hours) + 1e-12:
        raise ContractRejected(f"|q| = {abs(contract.quantity_kwh)} kWh exceeds the link limit")
    return float(_grid(state, scn, [contract.quantity_kwh], [contract.return_delay])[0, 0])


def reservation_value(state: PlanningState, scn: ScenarioSet) -> float:
    """Utility of the no-exchange plan."""
    return expected_utility(state, EnergyContract(0.0, 1), scn)


class ContractSpace:
    """Contracts ordered by descending utility plus a lookup index.

    The cursor only moves forward: each contract is offered at most once.
    """

    def __init__(self, entries):
        self.ordered = sorted(entries, key=lambda e: (-e[1], *tie_break_key(e[0])))
        self.index = {c: u for c, u in self.ordered}
        if len(self.index) != len(self.ordered):
            raise ValueError("duplicate contracts in space")
        self.cursor = 0

    def __len__(self):
        return len(self.ordered)

    def __contains__(self, contract):
        return contract in self.index

    def utility(self, contract: EnergyContract) -> float:
        return self.index[contract]

    @property
    def utilities(self) -> np.ndarray:
        return np.array([u for _, u in self.ordered])

    @property
    def remaining(self) -> int:
        return len(self.ordered) - self.cursor

    def peek(self):
        if self.cursor >= len(self.ordered):
            return None
        return self.ordered[self.cursor]

    def pop(self):
        """Next unproposed ``(contract, utility)`` or ``None`` when exhausted."""
        entry = self.peek()
        if entry is not None:
            self.cursor += 1
        return entry

    def fresh(self) -> ContractSpace:
        """Same contracts and utilities with the cursor rewound."""
        clone = ContractSpace.__new__(ContractSpace)
        clone.ordered = self.ordered
        clone.index = self.index
        clone.cursor = 0
        return clone


def build_contract_space(state: PlanningState, domain: NegotiationDomain,
                         scn: ScenarioSet) -> ContractSpace:
    if domain.max_delay >= scn.horizon:
        raise ValueError(
            f"return delay {domain.max_delay} falls outside the {scn.horizon}-period window"
        )
    domain.check_link(state.link, state.dt_hours)
    grid = _grid(state, scn, domain.quantities, domain.delays)
    entries = [
        (EnergyContract(q, d), float(grid[i, j]))
        for i, q in enumerate(domain.quantities)
        for j, d in enumerate(domain.delays)
    ]
    return ContractSpace(entries)


def aspiration_value(space: ContractSpace, quantile: float) -> float:
    """Utility at ``quantile`` of the space's utility distribution (linear interpolation)."""
    if len(space) == 0:
        raise EmptySpaceError("aspiration value of an empty contract space")
    if not 0.0 <= quantile <= 1.0:
        raise ValueError(f"quantile must lie in [0, 1], got {quantile}")
    return float(np.quantile(space.utilities, quantile))
