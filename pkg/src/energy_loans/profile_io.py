"""Per-agent load / PV time series: CSV ingestion, pseudo-predictions and
synthetic complementary profiles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("agent_id", "t", "load_kw", "pv_kw")

# Net demand of the two-agent worked example (1 h granularity).
TOY_NET_A = (1.0, 1.0, -2.0, 1.0, -1.0)
TOY_NET_B = (-2.0, 1.0, -1.0, -1.0, 2.0)


class IngestionError(ValueError):
    """Raised when a profile file cannot be parsed into aligned series."""


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled power signal (kW), one value per period."""

    values: np.ndarray
    start_index: int = 0
    granularity_minutes: int = 15

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if self.granularity_minutes <= 0:
            raise ValueError("granularity_minutes must be positive")
        if not np.all(np.isfinite(values)):
            raise ValueError("time series values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dt_hours(self) -> float:
        return self.granularity_minutes / 60.0

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.start_index == other.start_index
            and self.granularity_minutes == other.granularity_minutes
            and np.array_equal(self.values, other.values)
        )

    def window(self, start: int, length: int) -> TimeSeries:
        """Sub-series of ``length`` periods starting at absolute period ``start``."""
        offset = start - self.start_index
        if offset < 0 or offset + length > len(self):
            raise IndexError(f"window [{start}, {start + length}) outside series")
        return TimeSeries(self.values[offset:offset + length], start, self.granularity_minutes)

    def with_values(self, values) -> TimeSeries:
        return TimeSeries(values, self.start_index, self.granularity_minutes)


@dataclass(frozen=True)
class AgentProfile:
    agent_id: str
    load: TimeSeries
    pv: TimeSeries = field(repr=False)

    def __post_init__(self):
        if len(self.load) != len(self.pv):
            raise ValueError(f"agent {self.agent_id}: load and pv lengths differ")
        if self.load.granularity_minutes != self.pv.granularity_minutes:
            raise ValueError(f"agent {self.agent_id}: load and pv granularity differ")

    def __len__(self) -> int:
        return len(self.load)

    @property
    def net(self) -> TimeSeries:
        """Net demand after self-consumption (load minus PV)."""
        return self.load.with_values(self.load.values - self.pv.values)


def load_profiles(path, granularity_minutes: int = 15) -> list[AgentProfile]:
    """Read a long-format CSV (``agent_id, t, load_kw, pv_kw``) into profiles.

    Rows may come in any order; each agent must cover the same contiguous
    range of period indices.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise IngestionError(f"{path}: missing column(s) {', '.join(missing)}")
        col = {name: header.index(name) for name in CSV_COLUMNS}

        rows: dict[str, dict[int, tuple[float, float]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise IngestionError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            agent = row[col["agent_id"]].strip()
            parsed = []
            for name in ("t", "load_kw", "pv_kw"):
                cell = row[col[name]].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"{path}: row {lineno}, column {name}: non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise IngestionError(
                        f"{path}: row {lineno}, column {name}: non-finite value {cell!r}"
                    )
                parsed.append(value)
            t, load, pv = parsed
            if t != int(t):
                raise IngestionError(f"{path}: row {lineno}, column t: not an integer period")
            series = rows.setdefault(agent, {})
            if int(t) in series:
                raise IngestionError(f"{path}: row {lineno}: duplicate period {int(t)} for {agent}")
            series[int(t)] = (load, pv)

    if not rows:
        raise IngestionError(f"{path}: no data rows")

    periods = None
    profiles = []
    for agent, series in rows.items():
        ts = sorted(series)
        if ts != list(range(ts[0], ts[0] + len(ts))):
            raise IngestionError(f"{path}: agent {agent} has gaps in column t")
        if periods is None:
            periods = ts
        elif ts != periods:
            raise IngestionError(
                f"{path}: agent {agent} covers periods {ts[0]}..{ts[-1]}, "
                f"expected {periods[0]}..{periods[-1]} (ragged rows)"
            )
        load = np.array([series[t][0] for t in ts])
        pv = np.array([series[t][1] for t in ts])
        profiles.append(AgentProfile(
            agent,
            TimeSeries(load, ts[0], granularity_minutes),
            TimeSeries(pv, ts[0], granularity_minutes),
        ))
    return profiles


def write_profiles(profiles, path) -> None:
    """Write profiles in the ingestion CSV schema; values round-trip exactly."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for prof in profiles:
            start = prof.load.start_index
            for k, (load, pv) in enumerate(zip(prof.load.values, prof.pv.values)):
                writer.writerow((prof.agent_id, start + k, repr(float(load)), repr(float(pv))))


def default_noise_std(net: TimeSeries, fraction: float = 0.05) -> float:
    """Prediction noise level: a fraction of the agent's peak absolute net demand."""
    if len(net) == 0:
        return 0.0
    return fraction * float(np.max(np.abs(net.values)))


def pseudo_predict(actual: TimeSeries, noise_std: float, seed: int) -> TimeSeries:
    """Forecast stand-in: ``actual`` plus i.i.d. Gaussian noise."""
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    if noise_std == 0:
        return actual.with_values(actual.values.copy())
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_std, size=len(actual))
    return actual.with_values(actual.values + noise)


def _split_net(net, granularity_minutes, start=0):
    net = np.asarray(net, dtype=float)
    load = np.where(net > 0, net, 0.0)
    pv = np.where(net < 0, -net, 0.0)
    return TimeSeries(load, start, granularity_minutes), TimeSeries(pv, start, granularity_minutes)


def synth_complementary(n_agents: int, length: int, seed: int,
                        granularity_minutes: int = 15) -> list[AgentProfile]:
    """Synthetic cooperative with anti-phase surplus / deficit patterns.

    Agents alternate between two household types: a south-facing array with
    morning and evening load, and an east-facing array with a midday load
    peak.  Each type has surplus while the other is short, so pairs of
    opposite type gain from lending in both directions.  A common PV scale is solved so that
    aggregate surplus and deficit balance.  ``n_agents=2, length=5`` returns the two-agent worked example.
    """
    if n_agents < 2:
        raise ValueError(f"need at least 2 agents, got {n_agents}")
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")

    if n_agents == 2 and length == 5:
        profiles = []
        for name, net in (("A", TOY_NET_A), ("B", TOY_NET_B)):
            load, pv = _split_net(net, 60)
            profiles.append(AgentProfile(name, load, pv))
        return profiles

    rng = np.random.default_rng(seed)
    steps_per_day = int(round(24 * 60 / granularity_minutes))
    hour = (np.arange(length) % steps_per_day) * (24.0 / steps_per_day)

    def bump(center, width):
        return np.exp(-0.5 * ((hour - center) / width) ** 2)

    def sun(peak_hour, half_span):
        x = (hour - peak_hour) / half_span
        return np.where(np.abs(x) < 1.0, np.cos(0.5 * np.pi * x) ** 2, 0.0)

    loads, pv_shapes = [], []
    for i in range(n_agents):
        base = rng.uniform(0.15, 0.3)
        if i % 2 == 0:
            # south array; deficits early morning and evening
            shape = 0.9 * bump(7.5, 1.0) + 1.6 * bump(19.5, 1.8)
            pv = rng.uniform(2.6, 3.4) * sun(12.5, 6.5)
        else:
            # east array; surplus in the morning, deficit around midday
            shape = 1.6 * bump(13.0, 1.6) + 0.7 * bump(20.5, 2.0)
            pv = rng.uniform(1.8, 2.4) * sun(9.0, 4.5)
        load = base + rng.uniform(0.8, 1.2) * shape
        load = load * (1.0 + 0.1 * rng.standard_normal(length))
        loads.append(np.clip(load, 0.0, None))
        daily = 1.0 + 0.1 * rng.standard_normal(length // steps_per_day + 1)
        pv_shapes.append(pv * np.repeat(daily, steps_per_day)[:length])

    loads = np.array(loads)
    pv_shapes = np.clip(np.array(pv_shapes), 0.0, None)

    def imbalance(scale):
        net = loads - scale * pv_shapes
        return net[net > 0].sum() - (-net[net < 0]).sum()

    scale = 1.0
    if pv_shapes.sum() > 0:
        lo, hi = 0.0, 1.0
        while imbalance(hi) > 0 and hi < 1e6:
            hi *= 2.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if imbalance(mid) > 0:
                lo = mid
            else:
                hi = mid
        scale = 0.5 * (lo + hi)

    return [
        AgentProfile(
            str(i + 1),
            TimeSeries(loads[i], 0, granularity_minutes),
            TimeSeries(scale * pv_shapes[i], 0, granularity_minutes),
        )
        for i in range(n_agents)
    ]
