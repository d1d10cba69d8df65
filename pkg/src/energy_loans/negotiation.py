"""Bilateral alternating-offers negotiation over energy loans.

Both agents hold their own utility-ordered contract space for the period.  On
even rounds agent A proposes, on odd rounds B.  A proposer walks down its
space and stops proposing once the next contract falls below its aspiration
value; the receiver mirrors the offer to its own side and accepts only if its
utility strictly exceeds its aspiration value.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

from .analysis import euclidean, nash_solution
from .contracts import (
    ContractSpace,
    EnergyContract,
    NegotiationDomain,
    PlanningState,
    aspiration_value,
    build_contract_space,
    reservation_value,
)
from .prosumer import ExchangeLedger, LinkParams, apply_contract
from .scenarios import ScenarioSet

log = logging.getLogger(__name__)

TRANSCRIPT_COLUMNS = ("period", "agent_a", "agent_b", "round", "proposer", "q", "tau",
                      "proposer_utility", "response")


class ProtocolError(RuntimeError):
    """An offer or domain that the protocol cannot process."""


@dataclass(frozen=True)
class SessionConfig:
    deadline_rounds: int = 5000
    period: int = 0

    def __post_init__(self):
        if self.deadline_rounds < 1:
            raise ValueError("deadline must be at least one round")


@dataclass(frozen=True)
class Party:
    """One side of a session: its planning view, scenarios and attitude.

    A prebuilt ``space`` (and ``reservation``) short-circuits evaluation.
    """

    agent_id: str
    state: PlanningState | None = None
    scenarios: ScenarioSet | None = None
    aspiration_quantile: float = 0.8
    ledger: ExchangeLedger = field(default_factory=ExchangeLedger)
    individually_rational: bool = True
    space: ContractSpace | None = None
    reservation: float | None = None


def effective_aspiration(space: ContractSpace, quantile: float, reservation: float,
                         individually_rational: bool = True) -> float:
    value = aspiration_value(space, quantile)
    return max(value, reservation) if individually_rational else value


@dataclass
class SessionOutcome:
    agreed: bool
    agreement: EnergyContract | None
    rounds_used: int
    utilities: tuple
    nash_point: tuple
    nash_distance: float
    reservations: tuple = (0.0, 0.0)
    aspirations: tuple = (0.0, 0.0)
    nash_contract: EnergyContract | None = None
    ideal_point: tuple = (0.0, 0.0)
    proposer: str | None = None
    agents: tuple = ("A", "B")
    period: int = 0
    transcript: list = field(default_factory=list, repr=False)
    ledgers: tuple = field(default=(None, None), repr=False)

    @property
    def no_deal_distance(self) -> float:
        return euclidean(self.reservations, self.nash_point)

    @property
    def ideal_distance(self) -> float:
        """Distance from the no-deal point to the pair of best attainable utilities."""
        return euclidean(self.reservations, self.ideal_point)


def make_offer(space: ContractSpace, aspiration: float):
    """Pop the best unproposed contract; ``None`` once it falls below ``aspiration``."""
    entry = space.pop()
    if entry is None:
        return None
    contract, utility = entry
    if utility < aspiration:
        return None
    return contract


def accept_offer(index, offer: EnergyContract, aspiration: float) -> bool:
    """Receiver's decision on ``offer`` stated from the proposer's side.

    ``index`` maps the receiver's contracts to utilities (a ``ContractSpace``
    or a plain mapping).
    """
    own = offer.mirrored()
    lookup = index.index if isinstance(index, ContractSpace) else index
    try:
        utility = lookup[own]
    except KeyError:
        raise ProtocolError(f"offer {offer} is not part of the receiver's domain") from None
    return utility > aspiration


@dataclass
class SessionResult:
    agreed: bool
    agreement: EnergyContract | None
    proposer_side: int | None
    rounds_used: int
    transcript: list


def run_session(space_a: ContractSpace, space_b: ContractSpace, aspiration_a: float,
                aspiration_b: float, cfg: SessionConfig = SessionConfig(),
                agents=("A", "B")) -> SessionResult:
    """Alternating offers on two prepared spaces.

    Stops at the first acceptance, at the deadline, or as soon as neither
    agent has anything left to propose.  The agreement is returned from A's
    side.
    """
    spaces = (space_a, space_b)
    aspirations = (aspiration_a, aspiration_b)
    exhausted = [False, False]
    transcript = []
    r = 0
    while r < cfg.deadline_rounds:
        me = r % 2
        other = 1 - me
        offer = None if exhausted[me] else make_offer(spaces[me], aspirations[me])
        if offer is None:
            exhausted[me] = True
            transcript.append((cfg.period, agents[0], agents[1], r + 1, agents[me],
                               "", "", "", "none"))
            r += 1
            if exhausted[other]:
                break
            continue
        accepted = accept_offer(spaces[other], offer, aspirations[other])
        transcript.append((cfg.period, agents[0], agents[1], r + 1, agents[me],
                           offer.quantity_kwh, offer.return_delay,
                           spaces[me].utility(offer), "accept" if accepted else "reject"))
        r += 1
        if accepted:
            agreement = offer if me == 0 else offer.mirrored()
            return SessionResult(True, agreement, me, r, transcript)
    return SessionResult(False, None, None, r, transcript)


def _prepare(party: Party, domain: NegotiationDomain) -> ContractSpace:
    if party.space is not None:
        if len(party.space) != len(domain) or any(c not in domain for c, _ in party.space.ordered):
            raise ProtocolError(f"agent {party.agent_id} holds a space over a different domain")
        return party.space.fresh()
    return build_contract_space(party.state, domain, party.scenarios)


def _settle(party: Party, peer: str, period: int, contract: EnergyContract) -> ExchangeLedger:
    if party.state is None:
        return apply_contract(party.ledger, peer, period, contract, LinkParams(float("inf")))
    return apply_contract(party.ledger, peer, period, contract, party.state.link,
                          party.state.dt_hours)


def _reservation(party: Party) -> float:
    if party.reservation is not None:
        return party.reservation
    return reservation_value(party.state, party.scenarios)


def negotiate(a: Party, b: Party, cfg: SessionConfig, domain: NegotiationDomain) -> SessionOutcome:
    """Run one session between ``a`` and ``b`` and settle its outcome.

    On agreement both ledgers receive the loan (B with the mirrored volume);
    on failure both keep their ledgers unchanged.
    """
    if a.agent_id == b.agent_id:
        raise ProtocolError("an agent cannot negotiate with itself")
    if any(-q not in domain.quantities for q in domain.quantities):
        raise ProtocolError("domain quantities must be symmetric so offers can be mirrored")
    space_a = _prepare(a, domain)
    space_b = _prepare(b, domain)
    res_a = _reservation(a)
    res_b = _reservation(b)
    asp_a = effective_aspiration(space_a, a.aspiration_quantile, res_a, a.individually_rational)
    asp_b = effective_aspiration(space_b, b.aspiration_quantile, res_b, b.individually_rational)

    result = run_session(space_a, space_b, asp_a, asp_b, cfg, (a.agent_id, b.agent_id))

    nash_contract, nash_point = nash_solution(space_a, space_b, (res_a, res_b))
    if result.agreed:
        utilities = (space_a.utility(result.agreement),
                     space_b.utility(result.agreement.mirrored()))
        ledger_a = _settle(a, b.agent_id, cfg.period, result.agreement)
        ledger_b = _settle(b, a.agent_id, cfg.period, result.agreement.mirrored())
        proposer = (a.agent_id, b.agent_id)[result.proposer_side]
    else:
        utilities = (res_a, res_b)
        ledger_a, ledger_b = a.ledger, b.ledger
        proposer = None
    log.debug("period %s %s-%s: %s after %d rounds", cfg.period, a.agent_id, b.agent_id,
              result.agreement if result.agreed else "no deal", result.rounds_used)
    return SessionOutcome(
        agreed=result.agreed,
        agreement=result.agreement,
        rounds_used=result.rounds_used,
        utilities=utilities,
        nash_point=nash_point,
        nash_distance=euclidean(utilities, nash_point),
        reservations=(res_a, res_b),
        aspirations=(asp_a, asp_b),
        nash_contract=nash_contract,
        ideal_point=(float(space_a.utilities.max()), float(space_b.utilities.max())),
        proposer=proposer,
        agents=(a.agent_id, b.agent_id),
        period=cfg.period,
        transcript=result.transcript,
        ledgers=(ledger_a, ledger_b),
    )


def write_transcript(outcomes, path) -> None:
    """Write the round-by-round transcript of ``outcomes`` as CSV to a path or stream."""
    if hasattr(path, "write"):
        _write_rows(path, outcomes)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, outcomes)


def _write_rows(fh, outcomes) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRANSCRIPT_COLUMNS)
    for out in outcomes:
        for row in out.transcript:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
