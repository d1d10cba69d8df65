"""Fairness and welfare metrics over negotiation outcomes and simulated runs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import restore_energy
from .contracts import EnergyContract, tie_break_key

STRATEGY_PAIRS = (("s2", "s0"), ("s1", "s0"), ("s2", "s1"))


class ExportError(OSError):
    """Report files could not be written."""


def euclidean(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def nash_distance(outcome, nash_point) -> float:
    """Euclidean distance between two points of the two-agent utility plane."""
    return euclidean(outcome, nash_point)


def nash_solution(space_a, space_b, reservations):
    """Contract maximising the product of both agents' surpluses.

    ``space_a`` / ``space_b`` map contracts to utilities (``ContractSpace`` or
    plain dicts); contracts are read from A's side and mirrored for B.  Only
    contracts with both surpluses >= 0 qualify; ties go to the least-commitment
    contract.  Without any qualifying contract the no-deal point is returned.
    """
    index_a = getattr(space_a, "index", space_a)
    index_b = getattr(space_b, "index", space_b)
    if len(index_a) != len(index_b):
        raise ValueError("contract spaces cover different domains")
    r_a, r_b = reservations
    best = None
    best_product = -1.0
    for contract in sorted(index_a, key=tie_break_key):
        u_a = index_a[contract]
        try:
            u_b = index_b[contract.mirrored()]
        except KeyError:
            raise ValueError(f"contract {contract} missing from the second space") from None
        s_a = u_a - r_a
        s_b = u_b - r_b
        if s_a < 0 or s_b < 0:
            continue
        product = s_a * s_b
        if product > best_product:
            best, best_product = (contract, (u_a, u_b)), product
    if best is None:
        return EnergyContract(0.0, 1), (r_a, r_b)
    return best


def flexibility_loss(dispatch, soc_path, eff_charge, eff_discharge, dt_hours) -> float:
    loss = float(np.sum(dispatch)) * dt_hours
    if soc_path is not None and len(soc_path):
        loss += restore_energy(soc_path[0] - soc_path[-1], eff_charge, eff_discharge)
    return loss


def performance(dispatch, soc_path, residual, weights, battery=None, dt_hours: float = 0.25) -> float:
    """Realised performance of one agent over a run (negated weighted cost).

    Pass ``soc_path=None`` for an agent without battery activity.
    """
    flex = 0.0
    if soc_path is not None:
        flex = flexibility_loss(dispatch, soc_path, battery.eff_charge, battery.eff_discharge,
                                dt_hours)
    autarky = float(np.sum(np.abs(residual))) * dt_hours
    return -(weights.w_flex * flex + weights.w_autarky * autarky)


def signed_log_product(factors):
    """Product as (sign, log10|product|); a zero factor gives (0, -inf)."""
    sign = 1
    log_mag = 0.0
    for f in factors:
        if f == 0:
            return 0, -math.inf
        sign *= 1 if f > 0 else -1
        log_mag += math.log10(abs(f))
    return sign, log_mag


@dataclass
class WelfareReport:
    xi: dict
    sw: dict
    nw: dict
    nw_sign: dict
    nw_log10: dict
    sessions: list = field(default_factory=list)
    peaks: dict = field(default_factory=dict)
    peer_edges: list = field(default_factory=list)
    dt_hours: float = 0.25


def social_welfare(xi: dict, pairs=STRATEGY_PAIRS) -> WelfareReport:
    """Utilitarian welfare per strategy and Nash welfare of strategy pairs.

    ``xi`` maps strategy -> {agent_id: performance}.
    """
    agent_sets = {s: frozenset(v) for s, v in xi.items()}
    if len(set(agent_sets.values())) > 1:
        raise ValueError("strategies cover different agent sets")
    agents = sorted(next(iter(agent_sets.values()))) if agent_sets else []
    sw = {s: sum(vals[a] for a in agents) for s, vals in xi.items()}
    nw, nw_sign, nw_log = {}, {}, {}
    for s, h in pairs:
        if s not in xi or h not in xi:
            continue
        key = f"{s}|{h}"
        factors = [xi[s][a] - xi[h][a] for a in agents]
        sign, log_mag = signed_log_product(factors)
        nw_sign[key] = sign
        nw_log[key] = log_mag
        nw[key] = 0.0 if sign == 0 else sign * 10.0 ** min(log_mag, 308.0)
    return WelfareReport(xi=xi, sw=sw, nw=nw, nw_sign=nw_sign, nw_log10=nw_log)


@dataclass
class PeakStats:
    intra_rec_kw: np.ndarray
    pcc_kw: np.ndarray

    @property
    def summary(self) -> dict:
        def stats(x):
            return (float(np.mean(x)), float(np.max(x))) if len(x) else (0.0, 0.0)
        (im, ix), (pm, px) = stats(self.intra_rec_kw), stats(self.pcc_kw)
        return {"intra_rec_mean_kw": im, "intra_rec_max_kw": ix,
                "pcc_mean_kw": pm, "pcc_max_kw": px}


def peak_exchange_stats(ledgers: dict, residuals: dict, dt_hours: float,
                        periods: int | None = None) -> PeakStats:
    """Per-period power exchanged inside the cooperative and at the PCC.

    Every loan leg appears in both agents' ledgers and is counted once.
    ``residuals`` maps agent -> residual power series (kW).
    """
    if periods is None:
        lengths = [len(r) for r in residuals.values()]
        periods = max(lengths) if lengths else 0
    intra = np.zeros(periods)
    for ledger in ledgers.values():
        for e in ledger:
            if 0 <= e.period < periods:
                intra[e.period] += abs(e.energy_kwh)
    intra = intra / 2.0 / dt_hours
    pcc = np.zeros(periods)
    for res in residuals.values():
        pcc[:len(res)] += np.asarray(res, dtype=float)[:periods]
    return PeakStats(intra, np.abs(pcc))


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _write(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def export_reports(report: WelfareReport, out_dir) -> list[Path]:
    """Write the report as CSV files into ``out_dir``; returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []

        rows = []
        for s in sorted(report.xi):
            for agent in sorted(report.xi[s]):
                rows.append(("xi", s, agent, report.xi[s][agent]))
        for s in sorted(report.sw):
            rows.append(("sw", s, "", report.sw[s]))
        for key in sorted(report.nw):
            rows.append(("nw", key, "", report.nw[key]))
            rows.append(("nw_log10", key, "", report.nw_log10[key]))
        paths.append(out / "welfare.csv")
        _write(paths[-1], ("metric", "strategy", "agent_id", "value"), rows)

        paths.append(out / "nash_distances.csv")
        _write(paths[-1], ("period", "agent_a", "agent_b", "agreed", "nash_distance",
                           "no_deal_distance"),
               ((o.period, o.agents[0], o.agents[1], int(o.agreed), o.nash_distance,
                 o.no_deal_distance) for o in report.sessions))

        paths.append(out / "exchanges_by_hour.csv")
        _write(paths[-1], ("period", "hour", "agent_a", "agent_b", "q_kwh", "tau"),
               ((o.period, int((o.period * report.dt_hours) % 24), o.agents[0], o.agents[1],
                 o.agreement.quantity_kwh, o.agreement.return_delay)
                for o in report.sessions if o.agreed))

        rows = []
        for s in sorted(report.peaks):
            peaks = report.peaks[s]
            for t, (intra, pcc) in enumerate(zip(peaks.intra_rec_kw, peaks.pcc_kw)):
                rows.append((s, t, intra, pcc))
        paths.append(out / "peaks.csv")
        _write(paths[-1], ("strategy", "period", "intra_rec_kw", "pcc_kw"), rows)

        paths.append(out / "peer_graph.csv")
        _write(paths[-1], ("agent_a", "agent_b", "sessions", "successes", "mean_nash_distance"),
               report.peer_edges)
    except OSError as exc:
        raise ExportError(f"could not write reports to {out}: {exc}") from exc
    return paths


def peer_graph(sessions) -> list[tuple]:
    """Undirected edges weighted by the mean outcome distance to the Nash point."""
    acc: dict[tuple, list] = {}
    for o in sessions:
        key = tuple(sorted(o.agents))
        rec = acc.setdefault(key, [0, 0, 0.0])
        rec[0] += 1
        rec[1] += int(o.agreed)
        rec[2] += o.nash_distance
    return [(a, b, n, k, total / n) for (a, b), (n, k, total) in sorted(acc.items())]


def build_report(runs: dict) -> WelfareReport:
    """Welfare report over runs of several strategies on the same agents.

    ``runs`` maps strategy label (``s0``/``s1``/``s2``) -> ``RunResult``.
    """
    xi = {label: run.performances() for label, run in runs.items()}
    report = social_welfare(xi)
    first = next(iter(runs.values()), None)
    if first is not None:
        report.dt_hours = first.dt_hours
    for label in sorted(runs):
        run = runs[label]
        report.sessions.extend(run.outcomes)
        report.peaks[label] = peak_exchange_stats(run.ledgers, run.residual, run.dt_hours,
                                                  run.periods)
    report.peer_edges = peer_graph(report.sessions)
    return report


def export_series(runs: dict, path) -> Path:
    """Per-agent, per-period realised series of every run as one CSV."""
    path = Path(path)
    rows = []
    for label in sorted(runs):
        run = runs[label]
        for a in run.agent_ids:
            for t in range(run.periods):
                rows.append((label, a, t, run.net[a][t], run.exchange[a][t], run.dispatch[a][t],
                             run.residual[a][t], run.soc[a][t + 1]))
    try:
        _write(path, ("strategy", "agent_id", "period", "net_kw", "exchange_kw", "dispatch_kw",
                      "residual_kw", "soc_kwh"), rows)
    except OSError as exc:
        raise ExportError(f"could not write {path}: {exc}") from exc
    return path
