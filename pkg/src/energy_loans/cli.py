"""Command-line front end: ``energy-loans <command> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or usage.
Set ``ENERGY_LOANS_LOG`` (e.g. ``DEBUG``) to change log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import build_report, export_reports, export_series, nash_solution
from .community import Strategy, plan_party, predictions, run_domain, run_simulation
from .config import ConfigError, SimulationConfig, load_config
from .negotiation import SessionConfig, negotiate, write_transcript
from .profile_io import synth_complementary, write_profiles
from .prosumer import ExchangeLedger

log = logging.getLogger("energy_loans")

LOG_ENV = "ENERGY_LOANS_LOG"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="worker threads for contract evaluation")
    p.add_argument("--strategy", choices=["s0", "s1", "s2"], help="strategy to run")
    p.add_argument("--epsilon", type=float, help="exploration rate of peer selection")
    p.add_argument("--periods", type=int, help="number of negotiation periods")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="energy-loans",
                                     description="Energy-loan negotiation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("simulate", help="run one strategy end to end"))
    _common(sub.add_parser("compare", help="run s0, s1 and s2 and report welfare"))
    for name, text in (("negotiate-once", "one session between two agents, with transcript"),
                       ("nash-oracle", "Nash point of a session between two agents")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--period", type=int, default=0, help="decision period")
        p.add_argument("--agents", nargs=2, metavar=("A", "B"),
                       help="agent ids (default: the first two)")

    p = sub.add_parser("gen-profiles", help="write synthetic complementary profiles as CSV")
    p.add_argument("--n-agents", type=int, default=9)
    p.add_argument("--length", type=int, default=672, help="periods per agent")
    p.add_argument("--granularity", type=int, default=15, help="minutes per period")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV file to write")
    return parser


def _load(args) -> tuple[SimulationConfig, list]:
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(seed=args.seed, jobs=args.jobs, epsilon=args.epsilon,
                             total_periods=args.periods,
                             strategy=Strategy.parse(args.strategy) if args.strategy else None)
    if cfg.run.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    profiles = cfg.profiles()
    lengths = {len(p) for p in profiles}
    if len(lengths) != 1:
        raise ConfigError("profiles differ in length")
    needed = cfg.run.total_periods + cfg.run.horizon_w
    if lengths.pop() < needed:
        raise ConfigError(f"profiles are shorter than periods + horizon_w = {needed}")
    return cfg, profiles


def _out_dir(args) -> Path:
    out = Path(args.out or "results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _simulate(args, strategies) -> int:
    cfg, profiles = _load(args)
    runs = {}
    for strategy in strategies:
        run_cfg = cfg.run if strategy is None else cfg.with_overrides(strategy=strategy).run
        log.info("running %s for %d periods", run_cfg.strategy.label, run_cfg.total_periods)
        result = run_simulation(profiles, cfg.agents, run_cfg)
        runs[run_cfg.strategy.label] = result
    report = build_report(runs)
    out = _out_dir(args)
    export_reports(report, out)
    export_series(runs, out / "series.csv")
    write_transcript(report.sessions, out / "transcripts.csv")
    for label in sorted(report.sw):
        print(f"sw[{label}] = {report.sw[label]:.6f}")
    for key in sorted(report.nw_log10):
        sign = report.nw_sign[key]
        print(f"nw[{key}] = {'-' if sign < 0 else ''}10^{report.nw_log10[key]:.4f}")
    if "s2" in runs:
        print(f"success rate s2 = {runs['s2'].success_rate:.4f}")
    return 0


def _session(args):
    cfg, profiles = _load(args)
    ids = [p.agent_id for p in profiles]
    a, b = args.agents or ids[:2]
    for agent in (a, b):
        if agent not in ids:
            raise ConfigError(f"unknown agent {agent!r}")
    if a == b:
        raise ConfigError("the two agents must differ")
    run = cfg.run
    length = len(profiles[0])
    if not 0 <= args.period <= length - run.window:
        raise ConfigError(f"period must lie in [0, {length - run.window}]")
    dt = profiles[0].load.dt_hours
    predicted = predictions(profiles, run)
    domain = run_domain(run, dt)
    by_id = {c.agent_id: c for c in cfg.agents}
    parties = []
    for agent in (a, b):
        agent_cfg = by_id[agent]
        parties.append(plan_party(agent_cfg, predicted[agent], agent_cfg.battery.soc_kwh,
                                  np.zeros(run.window), ExchangeLedger(), args.period,
                                  ids.index(agent), run, domain))
    return run, domain, parties


def _negotiate_once(args) -> int:
    run, domain, (pa, pb) = _session(args)
    out = negotiate(pa, pb, SessionConfig(run.deadline_rounds, args.period), domain)
    if args.out:
        write_transcript([out], _out_dir(args) / "transcript.csv")
    else:
        write_transcript([out], sys.stdout)
    if out.agreed:
        c = out.agreement
        print(f"agreement q={c.quantity_kwh!r} kWh (from {pa.agent_id}'s side) "
              f"tau={c.return_delay} after {out.rounds_used} rounds")
    else:
        print(f"no agreement after {out.rounds_used} rounds")
    print(f"utilities {out.utilities[0]!r} {out.utilities[1]!r}; "
          f"nash distance {out.nash_distance!r}")
    return 0


def _nash_oracle(args) -> int:
    _, _, (pa, pb) = _session(args)
    contract, point = nash_solution(pa.space, pb.space, (pa.reservation, pb.reservation))
    print(f"nash contract q={contract.quantity_kwh!r} tau={contract.return_delay} "
          f"(from {pa.agent_id}'s side)")
    print(f"nash point {point[0]!r} {point[1]!r}; reservations "
          f"{pa.reservation!r} {pb.reservation!r}")
    return 0


def _gen_profiles(args) -> int:
    if args.n_agents < 2 or args.length < 1 or args.granularity < 1:
        raise ConfigError("need n-agents >= 2, length >= 1 and granularity >= 1")
    profiles = synth_complementary(args.n_agents, args.length, args.seed, args.granularity)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_profiles(profiles, out)
    return 0


def main(argv=None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    handlers = {
        "simulate": lambda: _simulate(args, [None]),
        "compare": lambda: _simulate(args, list(Strategy)),
        "negotiate-once": lambda: _negotiate_once(args),
        "nash-oracle": lambda: _nash_oracle(args),
        "gen-profiles": lambda: _gen_profiles(args),
    }
    try:
        return handlers[args.command]()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
