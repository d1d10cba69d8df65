"""Peer-to-peer energy loans negotiated by prosumer agents."""

from .analysis import (
    WelfareReport,
    build_report,
    export_reports,
    nash_distance,
    nash_solution,
    peak_exchange_stats,
    performance,
    social_welfare,
)
from .community import (
    AgentConfig,
    PeerStats,
    RunConfig,
    RunResult,
    Strategy,
    match_period,
    run_simulation,
    select_peer,
)
from .config import ConfigError, SimulationConfig, load_config
from .contracts import (
    ContractSpace,
    CriterionWeights,
    EnergyContract,
    NegotiationDomain,
    PlanningState,
    aspiration_value,
    build_contract_space,
    expected_utility,
    reservation_value,
)
from .negotiation import Party, SessionConfig, SessionOutcome, negotiate
from .profile_io import AgentProfile, TimeSeries, load_profiles, synth_complementary
from .prosumer import Battery, ExchangeLedger, LinkParams, apply_contract, battery_step, naive_dispatch
from .scenarios import GpParams, ScenarioSet, generate_scenarios

__version__ = "0.1.0"
