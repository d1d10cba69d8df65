from pathlib import Path

import numpy as np
import pytest

from energy_loans.community import (
    AgentConfig,
    PeerStats,
    RunConfig,
    Strategy,
    failure_signal,
    match_period,
    run_simulation,
    select_peer,
)
from energy_loans.config import load_config
from energy_loans.contracts import CriterionWeights
from energy_loans.negotiation import SessionOutcome
from energy_loans.profile_io import synth_complementary
from energy_loans.prosumer import Battery

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _small(strategy="s2", seed=3, jobs=1, agents=4):
    profiles = synth_complementary(agents, 24 + 12, seed=5, granularity_minutes=60)
    cfgs = [AgentConfig(p.agent_id, Battery(5.0, 2.5), CriterionWeights(0.3, 0.7), 0.7)
            for p in profiles]
    run = RunConfig(strategy=strategy, horizon_w=12, total_periods=24, seed=seed,
                    scenario_count=8, n_quantities=7, jobs=jobs)
    return profiles, cfgs, run


@pytest.fixture(scope="module")
def small_s2():
    return run_simulation(*_small())


def test_strategy_labels_and_aliases():
    assert Strategy.parse("s1") is Strategy.INDIVIDUAL_CONTROL
    assert Strategy.parse("negotiation_and_control").label == "s2"
    with pytest.raises(ValueError):
        Strategy.parse("s9")


def test_unseen_peers_first_then_lowest_id():
    rng = np.random.default_rng(0)
    assert select_peer(PeerStats(), {"c", "b", "d"}, 0.0, rng) == "b"
    stats = PeerStats()
    stats.record("b", True, 0.1)
    assert select_peer(stats, {"b", "c"}, 0.0, rng) == "c"


def test_exploit_lowest_mean_distance():
    stats = PeerStats()
    stats.record("B", True, 0.2)
    stats.record("C", False, 0.9)
    assert select_peer(stats, {"B", "C"}, 0.0, np.random.default_rng(1)) == "B"


def test_ties_prefer_fewer_sessions():
    stats = PeerStats()
    for _ in range(3):
        stats.record("a", True, 0.5)
    stats.record("b", True, 0.5)
    assert select_peer(stats, {"a", "b"}, 0.0, np.random.default_rng(0)) == "b"


def test_full_exploration_is_uniform():
    rng = np.random.default_rng(2)
    stats = PeerStats()
    stats.record("a", True, 0.0)
    peers = ["a", "b", "c", "d"]
    n = 10_000
    draws = [select_peer(stats, set(peers), 1.0, rng) for _ in range(n)]
    sigma = np.sqrt(n * 0.25 * 0.75)
    for p in peers:
        assert abs(draws.count(p) - n / 4) < 3 * sigma


def test_select_peer_errors():
    with pytest.raises(LookupError):
        select_peer(PeerStats(), set(), 0.1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        select_peer(PeerStats(), {"a"}, 1.5, np.random.default_rng(0))


def test_running_mean_matches_arithmetic_mean():
    rng = np.random.default_rng(3)
    values = rng.uniform(0, 5, 500)
    stats = PeerStats()
    for k, v in enumerate(values):
        stats.record("p", k % 3 == 0, float(v))
    rec = stats.get("p")
    assert abs(rec.mean_nash_distance - values.mean()) < 1e-12
    assert rec.sessions == 500 and rec.successes == 167
    with pytest.raises(ValueError):
        stats.record("p", False, -0.1)


def test_failure_signal_prefers_larger_gap():
    out = SessionOutcome(False, None, 2, (-5.0, -5.0), (-5.0, -5.0), 0.0,
                         reservations=(-5.0, -5.0), ideal_point=(-2.0, -1.0))
    assert failure_signal(out) == pytest.approx(5.0)
    ok = SessionOutcome(True, None, 2, (-3.0, -3.0), (-2.0, -3.0), 1.0)
    assert failure_signal(ok) == 1.0


@pytest.mark.parametrize("n, pairs, solo", [(2, 1, 0), (9, 4, 1), (6, 3, 0)])
def test_matching_is_disjoint(n, pairs, solo):
    ids = [str(k) for k in range(n)]
    stats = {a: PeerStats() for a in ids}
    got, alone = match_period(ids, stats, 0.1, np.random.default_rng(n))
    flat = [a for p in got for a in p]
    assert len(got) == pairs and len(alone) == solo
    assert len(set(flat)) == len(flat) and set(flat) | set(alone) == set(ids)
    with pytest.raises(ValueError):
        match_period(["x"], {"x": PeerStats()}, 0.1, np.random.default_rng(0))


def test_no_flexibility_passes_net_through():
    res = run_simulation(*_small("s0"))
    for a in res.agent_ids:
        assert np.all(res.dispatch[a] == 0)
        assert np.array_equal(res.residual[a], res.net[a])
    assert res.outcomes == []


def test_individual_control_uses_battery_without_trading():
    res = run_simulation(*_small("s1"))
    assert res.outcomes == []
    assert any(np.any(res.dispatch[a] != 0) for a in res.agent_ids)
    assert all(np.all(res.exchange[a] == 0) for a in res.agent_ids)


def test_each_agent_negotiates_at_most_once_per_period(small_s2):
    by_period = {}
    for o in small_s2.outcomes:
        by_period.setdefault(o.period, []).extend(o.agents)
    assert len(by_period) == 24
    for agents in by_period.values():
        assert len(agents) == len(set(agents))


def test_ledgers_pair_and_match_exchange(small_s2):
    res = small_s2
    assert any(o.agreed for o in res.outcomes)
    for a in res.agent_ids:
        assert sum(e.energy_kwh for e in res.ledgers[a]) == pytest.approx(0.0, abs=1e-12)
        from_ledger = res.ledgers[a].exchange_kw(0, res.periods, res.dt_hours)
        assert np.allclose(from_ledger, res.exchange[a], atol=1e-12)
    total = sum(res.exchange[a] for a in res.agent_ids)
    assert np.allclose(total, 0.0, atol=1e-12)
    # loans are settled before the books close
    assert all(e.period < res.periods for a in res.agent_ids for e in res.ledgers[a])


def test_soc_stays_in_window(small_s2):
    for a in small_s2.agent_ids:
        b = small_s2.agents[a].battery
        assert np.all(small_s2.soc[a] >= b.soc_min) and np.all(small_s2.soc[a] <= b.soc_max)


def test_runs_are_bit_identical_and_thread_independent(small_s2):
    again = run_simulation(*_small(jobs=3))
    for a in small_s2.agent_ids:
        assert np.array_equal(small_s2.residual[a], again.residual[a])
        assert np.array_equal(small_s2.soc[a], again.soc[a])
    assert [(o.agents, o.agreement) for o in small_s2.outcomes] == \
        [(o.agents, o.agreement) for o in again.outcomes]


def test_toy_pair_agrees_in_first_period():
    cfg = load_config(CONFIGS / "toy.toml")
    res = run_simulation(cfg.profiles(), cfg.agents, cfg.run)
    (out,) = res.outcomes
    assert out.agreed and out.period == 0
    assert res.ledgers["A"].energy_by_period() == {0: -1.0, 4: 1.0}


def test_simulation_argument_errors():
    profiles, cfgs, run = _small()
    with pytest.raises(ValueError):
        run_simulation(profiles, cfgs[:-1], run)
    with pytest.raises(ValueError):
        run_simulation(profiles, cfgs, RunConfig(horizon_w=12, total_periods=30))
    with pytest.raises(ValueError):
        RunConfig(epsilon=2.0)
