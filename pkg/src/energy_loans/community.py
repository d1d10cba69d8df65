"""Rolling-horizon simulation of a cooperative of prosumers.

Each period, under the negotiation strategy, agents pair up (epsilon-greedy
on the historical fairness of past sessions), negotiate one loan per pair and
then every agent runs its battery on the realised residual demand.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ._kernels import greedy_step
from .analysis import performance
from .contracts import CriterionWeights, NegotiationDomain, PlanningState, build_contract_space
from .negotiation import Party, SessionConfig, negotiate
from .profile_io import default_noise_std, pseudo_predict
from .prosumer import Battery, ExchangeLedger, LinkParams
from .scenarios import default_gp_params, generate_scenarios

log = logging.getLogger(__name__)


class Strategy(str, Enum):
    NO_FLEXIBILITY = "no_flexibility"
    INDIVIDUAL_CONTROL = "individual_control"
    NEGOTIATION_AND_CONTROL = "negotiation_and_control"

    @property
    def label(self) -> str:
        return {"no_flexibility": "s0", "individual_control": "s1",
                "negotiation_and_control": "s2"}[self.value]

    @classmethod
    def parse(cls, value) -> Strategy:
        if isinstance(value, cls):
            return value
        aliases = {"s0": cls.NO_FLEXIBILITY, "s1": cls.INDIVIDUAL_CONTROL,
                   "s2": cls.NEGOTIATION_AND_CONTROL}
        if value in aliases:
            return aliases[value]
        return cls(value)


@dataclass
class PeerRecord:
    sessions: int = 0
    successes: int = 0
    mean_nash_distance: float = 0.0

    def add(self, success: bool, distance: float) -> None:
        self.sessions += 1
        self.successes += int(success)
        self.mean_nash_distance += (distance - self.mean_nash_distance) / self.sessions


@dataclass
class PeerStats:
    """One agent's running record of its sessions with each opponent."""

    records: dict = field(default_factory=dict)

    def record(self, peer: str, success: bool, distance: float) -> None:
        if distance < 0:
            raise ValueError("distance must be non-negative")
        self.records.setdefault(peer, PeerRecord()).add(success, distance)

    def get(self, peer: str) -> PeerRecord | None:
        return self.records.get(peer)

    def __contains__(self, peer):
        return peer in self.records


def failure_signal(outcome) -> float:
    """Learning signal of a session: distance of the outcome to the Nash point,
    or for a failure the distance from no-deal to the best attainable pair."""
    if outcome.agreed:
        return outcome.nash_distance
    return max(outcome.no_deal_distance, outcome.ideal_distance)


def select_peer(stats: PeerStats, candidates, epsilon: float, rng) -> str:
    """Epsilon-greedy choice among ``candidates``.

    Exploits the lowest mean distance to the Nash solution; unseen peers count
    as distance 0 so that every peer is tried once.  Ties prefer fewer
    sessions, then the smaller id.
    """
    pool = sorted(candidates)
    if not pool:
        raise LookupError("no candidate peers to select from")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return pool[int(rng.integers(len(pool)))]

    def key(peer):
        rec = stats.get(peer)
        if rec is None:
            return (0.0, 0, peer)
        return (rec.mean_nash_distance, rec.sessions, peer)

    return min(pool, key=key)


def match_period(agents, stats: dict, epsilon: float, rng):
    """Greedy sequential pairing; returns (pairs, unmatched)."""
    agents = list(agents)
    if len(agents) < 2:
        raise ValueError("matching needs at least two agents")
    order = [agents[i] for i in rng.permutation(len(agents))]
    unmatched = set(agents)
    pairs, solo = [], []
    for agent in order:
        if agent not in unmatched:
            continue
        unmatched.discard(agent)
        if not unmatched:
            solo.append(agent)
            break
        peer = select_peer(stats[agent], unmatched, epsilon, rng)
        unmatched.discard(peer)
        pairs.append((agent, peer))
    return pairs, solo


@dataclass(frozen=True)
class AgentConfig:
    agent_id: str
    battery: Battery = field(default_factory=Battery)
    weights: CriterionWeights = field(default_factory=CriterionWeights)
    aspiration_quantile: float = 0.8
    individually_rational: bool = True


@dataclass(frozen=True)
class RunConfig:
    strategy: Strategy = Strategy.NEGOTIATION_AND_CONTROL
    epsilon: float = 0.1
    horizon_w: int = 96
    total_periods: int = 96
    seed: int = 0
    scenario_count: int = 100
    n_quantities: int = 15
    deadline_rounds: int = 5000
    noise_fraction: float = 0.05
    gp_std_fraction: float = 0.05
    gp_correlation: float = 0.7
    link: LinkParams = field(default_factory=LinkParams)
    settle_loans: bool = True
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.horizon_w < 1 or self.total_periods < 1:
            raise ValueError("horizon and total periods must be positive")

    @property
    def window(self) -> int:
        """Planning window length; the inclusive horizon covers ``w + 1`` periods."""
        return self.horizon_w + 1


@dataclass
class RunResult:
    strategy: Strategy
    agent_ids: list
    dt_hours: float
    periods: int
    negotiation_periods: int
    net: dict
    exchange: dict
    dispatch: dict
    residual: dict
    soc: dict
    ledgers: dict
    outcomes: list
    stats: dict
    agents: dict

    def performances(self) -> dict:
        out = {}
        for a in self.agent_ids:
            cfg = self.agents[a]
            soc = None if self.strategy is Strategy.NO_FLEXIBILITY else self.soc[a]
            out[a] = performance(self.dispatch[a], soc, self.residual[a], cfg.weights,
                                 cfg.battery, self.dt_hours)
        return out

    @property
    def success_rate(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(o.agreed for o in self.outcomes) / len(self.outcomes)


def _seed(*parts) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(p) for p in parts]))


def predictions(profiles, run: RunConfig) -> dict:
    """Seeded pseudo-predictions of every agent's net demand."""
    out = {}
    for k, p in enumerate(profiles):
        std = default_noise_std(p.net, run.noise_fraction)
        out[p.agent_id] = pseudo_predict(p.net, std, seed=_seed(run.seed, 1, k).integers(2**32))
    return out


def run_domain(run: RunConfig, dt_hours: float) -> NegotiationDomain:
    return NegotiationDomain.for_link(run.link, dt_hours, run.n_quantities, run.horizon_w)


def plan_party(cfg: AgentConfig, predicted, soc_kwh: float, exchange_window, ledger,
               t: int, agent_index: int, run: RunConfig, domain: NegotiationDomain) -> Party:
    """Everything one agent brings to a session at period ``t``.

    Scenarios are drawn around the agent's prediction for the window
    ``[t, t + w]``; ``exchange_window`` holds the loans already committed there.
    """
    dt = predicted.dt_hours
    battery = replace(cfg.battery, soc_kwh=soc_kwh)
    state = PlanningState(battery, cfg.weights, exchange_window, dt, run.link, t)
    base = predicted.window(t, run.window)
    params = default_gp_params(base, run.gp_std_fraction, run.gp_correlation)
    scn = generate_scenarios(base, params, run.scenario_count,
                             _seed(run.seed, 3, agent_index, t))
    space = build_contract_space(state, domain, scn)
    reservation = space.utility(next(c for c, _ in space.ordered if c.is_no_deal))
    return Party(cfg.agent_id, state, scn, cfg.aspiration_quantile, ledger,
                 cfg.individually_rational, space, reservation)


def run_simulation(profiles, configs, run: RunConfig) -> RunResult:
    """Simulate ``run.total_periods`` decision periods of one strategy.

    With ``settle_loans`` the run continues for ``horizon_w`` more periods
    without new negotiations so that every loan is returned before the
    books close; all strategies are scored over the same span.
    """
    profiles = list(profiles)
    cfg_by_id = {c.agent_id: c for c in configs}
    ids = [p.agent_id for p in profiles]
    if set(ids) != set(cfg_by_id) or len(ids) != len(cfg_by_id):
        raise ValueError("profiles and agent configs must cover the same agents")
    if len(ids) < 2 and run.strategy is Strategy.NEGOTIATION_AND_CONTROL:
        raise ValueError("negotiation needs at least two agents")
    lengths = {len(p) for p in profiles}
    grans = {p.load.granularity_minutes for p in profiles}
    if len(lengths) != 1 or len(grans) != 1:
        raise ValueError("profiles must be aligned (same length and granularity)")
    length = lengths.pop()
    if run.total_periods > length - run.horizon_w:
        raise ValueError(
            f"total_periods {run.total_periods} exceeds profile length {length} minus "
            f"horizon {run.horizon_w}"
        )
    dt = profiles[0].load.dt_hours
    w = run.horizon_w
    end = run.total_periods + (w if run.settle_loans else 0)
    negotiating = run.strategy is Strategy.NEGOTIATION_AND_CONTROL
    use_battery = run.strategy is not Strategy.NO_FLEXIBILITY

    net = {p.agent_id: p.net.values for p in profiles}
    predicted = predictions(profiles, run)
    domain = run_domain(run, dt)
    exchange = {a: np.zeros(length) for a in ids}
    dispatch = {a: np.zeros(end) for a in ids}
    residual = {a: np.zeros(end) for a in ids}
    soc = {a: np.zeros(end + 1) for a in ids}
    batteries = {a: cfg_by_id[a].battery for a in ids}
    for a in ids:
        soc[a][0] = batteries[a].soc_kwh
    ledgers = {a: ExchangeLedger() for a in ids}
    stats = {a: PeerStats() for a in ids}
    outcomes = []
    match_rng = _seed(run.seed, 2)
    index_of = {a: k for k, a in enumerate(ids)}
    pool = ThreadPoolExecutor(run.jobs) if run.jobs > 1 else None

    def plan(agent, t):
        return plan_party(cfg_by_id[agent], predicted[agent], soc[agent][t],
                          exchange[agent][t:t + w + 1], ledgers[agent], t, index_of[agent],
                          run, domain)

    try:
        for t in range(end):
            if negotiating and t < run.total_periods:
                pairs, _ = match_period(ids, stats, run.epsilon, match_rng)
                busy = [a for pair in pairs for a in pair]
                jobs = [(a, t) for a in busy]
                parties = dict(zip(busy, pool.map(lambda j: plan(*j), jobs) if pool
                                   else (plan(*j) for j in jobs)))
                scfg = SessionConfig(run.deadline_rounds, t)
                period_outcomes = []
                for a, b in pairs:
                    out = negotiate(parties[a], parties[b], scfg, domain)
                    period_outcomes.append(out)
                    if out.agreed:
                        ledgers[a], ledgers[b] = out.ledgers
                        q = out.agreement.quantity_kwh / dt
                        tau = out.agreement.return_delay
                        exchange[a][t] += q
                        exchange[a][t + tau] -= q
                        exchange[b][t] -= q
                        exchange[b][t + tau] += q
                for out in period_outcomes:
                    a, b = out.agents
                    signal = failure_signal(out)
                    stats[a].record(b, out.agreed, signal)
                    stats[b].record(a, out.agreed, signal)
                outcomes.extend(period_outcomes)

            for a in ids:
                demand = net[a][t] + exchange[a][t]
                if use_battery:
                    p, s = greedy_step(soc[a][t], demand, *batteries[a].policy_args(dt))
                else:
                    p, s = 0.0, soc[a][t]
                dispatch[a][t] = p
                soc[a][t + 1] = s
                residual[a][t] = demand + p
    finally:
        if pool is not None:
            pool.shutdown()

    return RunResult(
        strategy=run.strategy,
        agent_ids=ids,
        dt_hours=dt,
        periods=end,
        negotiation_periods=run.total_periods if negotiating else 0,
        net={a: net[a][:end] for a in ids},
        exchange={a: exchange[a][:end] for a in ids},
        dispatch=dispatch,
        residual=residual,
        soc=soc,
        ledgers=ledgers,
        outcomes=outcomes,
        stats=stats,
        agents=cfg_by_id,
    )
