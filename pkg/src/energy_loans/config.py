"""Declarative run configuration (TOML).

A config file holds optional ``[run]``, ``[scenarios]``, ``[link]``,
``[profiles]`` and ``[battery]`` tables plus an ``[[agents]]`` array.  Every
key has a default; the defaults describe a 9-agent cooperative on synthetic
profiles at 15-minute resolution with a one-day horizon.

``[battery]`` sets defaults that each ``[[agents]]`` entry may override.
Percentages (``degradation_pct``) are of capacity per step.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .community import AgentConfig, RunConfig, Strategy
from .contracts import CriterionWeights
from .profile_io import AgentProfile, IngestionError, load_profiles, synth_complementary
from .prosumer import Battery, LinkParams


class ConfigError(ValueError):
    """The configuration file is missing, unparsable or inconsistent."""


# Per-agent (aspiration quantile, flexibility weight, efficiency, degradation %)
DEFAULT_AGENTS = (
    (0.70, 0.33, 0.90, 0.04),
    (0.70, 0.67, 0.90, 0.04),
    (0.60, 0.33, 0.85, 0.02),
    (0.60, 0.67, 0.80, 0.02),
    (0.75, 0.33, 0.90, 0.02),
    (0.75, 0.67, 0.90, 0.04),
    (0.80, 0.33, 0.85, 0.04),
    (0.80, 0.67, 0.80, 0.02),
    (0.85, 0.33, 0.75, 0.02),
)

_RUN_KEYS = {"strategy", "epsilon", "horizon_w", "periods", "seed", "scenario_count",
             "n_quantities", "deadline_rounds", "noise_fraction", "settle_loans", "jobs"}
_SCENARIO_KEYS = {"std_fraction", "correlation"}
_LINK_KEYS = {"limit_kw", "efficiency"}
_PROFILE_KEYS = {"source", "path", "granularity_minutes", "seed"}
_BATTERY_KEYS = {"capacity_kwh", "initial_soc_frac", "soc_min_frac", "soc_max_frac",
                 "charge_rate_kw", "discharge_rate_kw", "efficiency", "eff_charge",
                 "eff_discharge", "degradation_pct"}
_AGENT_KEYS = _BATTERY_KEYS | {"id", "aspiration_quantile", "w_flex", "individually_rational"}
_TABLES = {"run": _RUN_KEYS, "scenarios": _SCENARIO_KEYS, "link": _LINK_KEYS,
           "profiles": _PROFILE_KEYS, "battery": _BATTERY_KEYS}


@dataclass(frozen=True)
class SimulationConfig:
    run: RunConfig
    agents: tuple
    profile_source: str = "synthetic"
    profile_path: Path | None = None
    granularity_minutes: int = 15
    profile_seed: int | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    def profiles(self) -> list[AgentProfile]:
        """Profiles long enough for the run (``periods + horizon_w`` steps)."""
        length = self.run.total_periods + self.run.horizon_w
        if self.profile_source == "toy":
            return synth_complementary(2, 5, 0)
        if self.profile_source == "csv":
            try:
                profiles = load_profiles(self.profile_path, self.granularity_minutes)
            except (OSError, IngestionError) as exc:
                raise ConfigError(str(exc)) from exc
            by_id = {p.agent_id: p for p in profiles}
            missing = [a.agent_id for a in self.agents if a.agent_id not in by_id]
            if missing:
                raise ConfigError(f"profile file has no data for agent(s) {', '.join(missing)}")
            return [by_id[a.agent_id] for a in self.agents]
        seed = self.run.seed if self.profile_seed is None else self.profile_seed
        synthetic = synth_complementary(len(self.agents), length, seed, self.granularity_minutes)
        return [replace(p, agent_id=a.agent_id) for p, a in zip(synthetic, self.agents)]

    def with_overrides(self, **kwargs) -> SimulationConfig:
        """Replace run fields (``None`` values are ignored)."""
        changes = {k: v for k, v in kwargs.items() if v is not None}
        if not changes:
            return self
        try:
            return replace(self, run=replace(self.run, **changes))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _check_keys(where: str, table, allowed) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"[{where}]: unknown key(s) {', '.join(unknown)}")
    return table


def _battery(spec: dict, where: str) -> Battery:
    eff = spec.get("efficiency", 0.9)
    try:
        capacity = float(spec.get("capacity_kwh", 7.0))
        soc_frac = float(spec.get("initial_soc_frac", 0.5))
        return Battery(
            capacity_kwh=capacity,
            soc_kwh=soc_frac * capacity,
            soc_min_frac=float(spec.get("soc_min_frac", 0.2)),
            soc_max_frac=float(spec.get("soc_max_frac", 0.9)),
            charge_rate_kw=float(spec.get("charge_rate_kw", 1.3)),
            discharge_rate_kw=float(spec.get("discharge_rate_kw", 3.3)),
            eff_charge=float(spec.get("eff_charge", eff)),
            eff_discharge=float(spec.get("eff_discharge", eff)),
            degradation_kwh_per_step=float(spec.get("degradation_pct", 0.0)) / 100.0 * capacity,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _agent(spec: dict, battery_defaults: dict, where: str) -> AgentConfig:
    _check_keys(where, spec, _AGENT_KEYS)
    if "id" not in spec:
        raise ConfigError(f"{where}: missing key id")
    merged = {**battery_defaults, **{k: v for k, v in spec.items() if k in _BATTERY_KEYS}}
    w_flex = float(spec.get("w_flex", 0.5))
    try:
        weights = CriterionWeights(w_flex, 1.0 - w_flex)
        quantile = float(spec.get("aspiration_quantile", 0.8))
        if not 0.0 <= quantile <= 1.0:
            raise ValueError("aspiration_quantile must lie in [0, 1]")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return AgentConfig(str(spec["id"]), _battery(merged, where), weights, quantile,
                       bool(spec.get("individually_rational", True)))


def default_agents(battery_defaults: dict | None = None) -> tuple:
    battery_defaults = battery_defaults or {}
    agents = []
    for k, (quantile, w_flex, eff, degr) in enumerate(DEFAULT_AGENTS):
        spec = {"id": str(k + 1), "aspiration_quantile": quantile, "w_flex": w_flex,
                "efficiency": eff, "degradation_pct": degr}
        agents.append(_agent(spec, battery_defaults, f"default agent {k + 1}"))
    return tuple(agents)


def parse_config(data: dict, base_dir: Path | None = None) -> SimulationConfig:
    base_dir = Path.cwd() if base_dir is None else base_dir
    unknown = sorted(set(data) - set(_TABLES) - {"agents"})
    if unknown:
        raise ConfigError(f"unknown table(s) {', '.join(unknown)}")
    tables = {name: _check_keys(name, data.get(name, {}), keys) for name, keys in _TABLES.items()}
    run_t, scn_t, link_t, prof_t, batt_t = (tables[k] for k in
                                            ("run", "scenarios", "link", "profiles", "battery"))

    agent_specs = data.get("agents")
    if agent_specs is None:
        agents = default_agents(batt_t)
    else:
        if not isinstance(agent_specs, list) or not agent_specs:
            raise ConfigError("[[agents]] must be a non-empty array of tables")
        agents = tuple(_agent(a, batt_t, f"agents[{k}]") for k, a in enumerate(agent_specs))
    ids = [a.agent_id for a in agents]
    if len(set(ids)) != len(ids):
        raise ConfigError("agent ids must be unique")

    source = prof_t.get("source", "synthetic")
    if source not in ("synthetic", "csv", "toy"):
        raise ConfigError(f"[profiles] source must be synthetic, csv or toy, got {source!r}")
    path = None
    if source == "csv":
        if "path" not in prof_t:
            raise ConfigError("[profiles] source = csv needs a path")
        path = (base_dir / prof_t["path"]).resolve()
        if not path.is_file():
            raise ConfigError(f"profile file {path} does not exist")
    if source == "toy" and ids != ["A", "B"]:
        raise ConfigError("toy profiles need exactly the agents A and B")

    granularity = 60 if source == "toy" else int(prof_t.get("granularity_minutes", 15))
    steps_per_day = 24 * 60 // granularity
    default_w, default_periods = (4, 1) if source == "toy" else (steps_per_day, 7 * steps_per_day)
    try:
        link = LinkParams(float(link_t.get("limit_kw", 5.0)), float(link_t.get("efficiency", 1.0)))
        run = RunConfig(
            strategy=Strategy.parse(run_t.get("strategy", "s2")),
            epsilon=float(run_t.get("epsilon", 0.1)),
            horizon_w=int(run_t.get("horizon_w", default_w)),
            total_periods=int(run_t.get("periods", default_periods)),
            seed=int(run_t.get("seed", 0)),
            scenario_count=int(run_t.get("scenario_count", 100)),
            n_quantities=int(run_t.get("n_quantities", 15)),
            deadline_rounds=int(run_t.get("deadline_rounds", 5000)),
            noise_fraction=float(run_t.get("noise_fraction", 0.05)),
            gp_std_fraction=float(scn_t.get("std_fraction", 0.05)),
            gp_correlation=float(scn_t.get("correlation", 0.7)),
            link=link,
            settle_loans=bool(run_t.get("settle_loans", True)),
            jobs=int(run_t.get("jobs", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if run.scenario_count < 1 or run.n_quantities < 1 or run.deadline_rounds < 1 or run.jobs < 1:
        raise ConfigError("scenario_count, n_quantities, deadline_rounds and jobs must be >= 1")
    if run.n_quantities % 2 == 0:
        raise ConfigError("n_quantities must be odd so the domain contains the no-deal volume")
    if run.noise_fraction < 0 or run.gp_std_fraction < 0:
        raise ConfigError("noise and scenario std fractions must be non-negative")

    return SimulationConfig(run, agents, source, path, granularity,
                            prof_t.get("seed"), base_dir)


def load_config(path) -> SimulationConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, path.resolve().parent)
