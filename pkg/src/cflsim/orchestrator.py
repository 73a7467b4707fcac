"""The hierarchical round loop.

Each global round: every edge selects clients (two-phase or baseline),
broadcasts each cluster's model to its members, trains them locally,
drops deadline violators, aggregates per cluster and per edge, then
evaluates the split/stop machinery. The cloud collects edge and
specialized models either every `r_agg` rounds (round-based) or in rounds
where some edge committed a split (split-based), averages edge models
into the global model, and groups congruent specialized models from
different edges into a shared average.

Everything is deterministic in (population, scheme, rounds, seed, params):
per-round per-client RNG streams are derived from the seed, and all
reductions iterate in ascending id order.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import radio
from .clusterer import (Cluster, SplitDecision, bipartition, build_similarity,
                        check_split, cosine_similarity, cross_and_intra,
                        gamma_check)
from .errors import ConfigError, DegenerateDeltaError, NumericDivergenceError
from .learner import (Architecture, ModelParams, evaluate_accuracy, init_model,
                      local_train, model_size_bits)
from .metrics import (EVENT_BUDGET_HALT, EVENT_CLOUD_AGG, EVENT_DEADLINE_DROP,
                      EVENT_SPLIT, EVENT_STOP, RoundMetrics)
from .radio import CostLedger
from .scheduler import (PHASE_GREEDY, PHASE_ROUND_ROBIN, SelectionOutcome,
                        compose_selection, select_fair, select_random_baseline)
from .synthdata import Population

# RNG stream tags (first entry after the run seed)
_S_TRAIN = 20
_S_FADING = 21
_S_AVAIL = 22
_S_BASELINE = 23

SCHEME_NAMES = ("fg-round", "fg-split", "frr-round", "frr-split",
                "baseline", "hfl")


@dataclass
class SchemeConfig:
    """Which selection policy, aggregation trigger and guards a run uses."""

    selection: str = "greedy"            # greedy | round_robin
    aggregation: str = "round_based"     # round_based | split_based
    r_agg: int = 1
    t_budget: float | None = None
    deadline_policy: str = "adaptive"    # adaptive | fixed | none
    deadline_value: float | None = None
    deadline_percentile: float = 95.0
    baseline: bool = False
    hfl_only: bool = False

    def validate(self) -> None:
        if self.selection not in (PHASE_GREEDY, PHASE_ROUND_ROBIN):
            raise ConfigError("selection", f"unknown policy {self.selection!r}")
        if self.aggregation not in ("round_based", "split_based"):
            raise ConfigError("aggregation", f"unknown scheme {self.aggregation!r}")
        if self.aggregation == "round_based" and self.r_agg < 1:
            raise ConfigError("r_agg", "must be >= 1 for round-based aggregation")
        if self.deadline_policy not in ("adaptive", "fixed", "none"):
            raise ConfigError("deadline_policy", f"unknown {self.deadline_policy!r}")
        if self.deadline_policy == "fixed" and (
                self.deadline_value is None or self.deadline_value <= 0):
            raise ConfigError("deadline_value", "fixed policy needs a positive value")
        if not 0 < self.deadline_percentile <= 100:
            raise ConfigError("deadline_percentile", "must be in (0, 100]")
        if self.hfl_only and self.aggregation != "round_based":
            raise ConfigError("aggregation", "hfl runs use round-based aggregation")
        if self.t_budget is not None and self.t_budget < 0:
            raise ConfigError("t_budget", "must be non-negative")


def scheme_from_name(name: str, r_agg: int = 1,
                     **overrides) -> SchemeConfig:
    """Map a scheme name to its configuration. The baseline aggregates
    every round; hfl disables clustering."""
    table = {
        "fg-round": dict(selection="greedy", aggregation="round_based", r_agg=r_agg),
        "fg-split": dict(selection="greedy", aggregation="split_based"),
        "frr-round": dict(selection="round_robin", aggregation="round_based", r_agg=r_agg),
        "frr-split": dict(selection="round_robin", aggregation="split_based"),
        "baseline": dict(selection="greedy", aggregation="round_based", r_agg=1,
                         baseline=True),
        "hfl": dict(selection="greedy", aggregation="round_based", r_agg=r_agg,
                    hfl_only=True),
    }
    if name not in table:
        raise ConfigError("scheme", f"unknown scheme {name!r}")
    cfg = SchemeConfig(**{**table[name], **overrides})
    cfg.validate()
    return cfg


@dataclass
class RunParams:
    """Training, clustering and radio knobs shared by every scheme."""

    arch_kind: str = "logreg"
    n_hidden: int = 32
    epochs: int = 10
    batch: int = 32
    lr: float = 0.01
    eps1: float | None = None        # absolute override; default is derived
    eps2: float | None = None
    eps1_ratio: float = 0.4          # eps1 = ratio * ||round-1 mean delta||
    eps2_ratio: float = 1.6          # eps2 = ratio * eps1
    total_bandwidth_hz: float = 1e7
    noise_power_w: float = 1e-8
    backhaul_rate_bps: float = 1e7
    backhaul_power_w: float = 1.0
    fading: bool = False
    p_avail: float = 1.0
    baseline_budget_frac: float | None = None
    theta_cloud: float = 0.9
    cloud_recluster: bool = True

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs", "must be >= 1")
        if self.batch < 1:
            raise ConfigError("batch", "must be >= 1")
        if self.lr < 0:
            raise ConfigError("lr", "must be non-negative")
        for name in ("eps1_ratio", "eps2_ratio", "total_bandwidth_hz",
                     "noise_power_w", "backhaul_rate_bps", "backhaul_power_w"):
            if getattr(self, name) <= 0:
                raise ConfigError(name, "must be positive")
        for name in ("eps1", "eps2"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ConfigError(name, "absolute threshold must be positive")
        if not 0 <= self.p_avail <= 1:
            raise ConfigError("p_avail", "must be in [0, 1]")
        if self.baseline_budget_frac is not None and not (
                0 < self.baseline_budget_frac <= 1):
            raise ConfigError("baseline_budget_frac", "must be in (0, 1]")
        if not -1 <= self.theta_cloud <= 1:
            raise ConfigError("theta_cloud", "must be in [-1, 1]")


@dataclass
class EdgeState:
    id: int
    members: tuple[int, ...]
    clusters: list[Cluster]
    edge_model: ModelParams
    bandwidth_hz: float
    split_events: list[dict] = field(default_factory=list)

    def cluster_of(self, client_id: int) -> Cluster:
        for cluster in self.clusters:
            if client_id in cluster.members:
                return cluster
        raise KeyError(f"client {client_id} not in edge {self.id}")

    def check_partition(self) -> None:
        seen = [m for c in self.clusters for m in c.members]
        if sorted(seen) != sorted(self.members):
            raise AssertionError(f"clusters no longer partition edge {self.id}")


@dataclass
class CloudState:
    global_model: ModelParams
    init_values: np.ndarray
    specialized: dict[int, dict[int, ModelParams]] = field(default_factory=dict)
    rounds_elapsed: int = 0
    cumulative_time: float = 0.0
    cumulative_energy: float = 0.0
    pending_split: bool = False
    sync_refs: dict[int, np.ndarray] = field(default_factory=dict)
    parent_of: dict[int, int] = field(default_factory=dict)

    def ref_for(self, cluster: Cluster) -> np.ndarray:
        """Reference point for a specialized model's cloud-observed delta:
        its model at the previous cloud sync, inherited through split
        lineage, falling back to the initial global model."""
        cur: int | None = cluster.id
        while cur is not None:
            if cur in self.sync_refs:
                return self.sync_refs[cur]
            cur = self.parent_of.get(cur)
        return self.init_values


@dataclass
class _RunContext:
    population: Population
    scheme: SchemeConfig
    params: RunParams
    seed: int
    arch: Architecture
    z_bits: int
    eps_by_edge: dict[int, tuple[float, float]] = field(default_factory=dict)
    last_deltas: dict[int, np.ndarray] = field(default_factory=dict)
    latency_table: dict[int, float] = field(default_factory=dict)
    cursors: dict[int, int] = field(default_factory=dict)
    cluster_ids: "itertools.count[int]" = field(default_factory=itertools.count)

    def train_size(self, client_id: int) -> int:
        return len(self.population.clients[client_id].train)


@dataclass
class EdgeRoundReport:
    edge_id: int
    participants: tuple[int, ...] = ()
    dropped: tuple[int, ...] = ()
    deltas: dict[int, np.ndarray] = field(default_factory=dict)
    ledgers: dict[int, CostLedger] = field(default_factory=dict)
    latency: float = 0.0
    energy: float = 0.0
    events: list[dict] = field(default_factory=list)
    split_committed: bool = False
    cluster_mean_delta_norm: dict[int, float] = field(default_factory=dict)


def enforce_budget_and_deadline(cumulative_time: float, projected_next: float,
                                t_budget: float | None) -> bool:
    """True while another round fits in the time budget: the run halts once
    the cumulative time plus the projected next round would exceed it."""
    if t_budget is None:
        return True
    if cumulative_time >= t_budget:
        return False
    return cumulative_time + projected_next <= t_budget


def _client_ledgers(ctx: _RunContext, edge: EdgeState, selected: Sequence[int],
                    round_idx: int) -> dict[int, CostLedger]:
    """Round costs for the selected clients; the edge band is split equally
    among them."""
    beta = 1.0 / len(selected)
    ledgers = {}
    for cid in sorted(selected):
        prof = ctx.population.clients[cid].profile
        fading = None
        if ctx.params.fading:
            rng = np.random.default_rng(
                np.random.SeedSequence([ctx.seed, _S_FADING, round_idx, cid]))
            fading = float(rng.exponential(1.0))
        gain = radio.channel_gain(prof, fading)
        rate = radio.transmission_rate(beta, edge.bandwidth_hz, gain,
                                       prof.tx_power_w, ctx.params.noise_power_w)
        n = ctx.train_size(cid)
        t_com = radio.comm_time(ctx.z_bits, rate)
        ledgers[cid] = CostLedger(
            t_cmp=radio.comp_time(ctx.params.epochs, n, prof.cycles_per_sample,
                                  prof.cpu_hz),
            t_com=t_com,
            e_cmp=radio.comp_energy(prof.capacitance, prof.cpu_hz,
                                    ctx.params.epochs, n, prof.cycles_per_sample),
            e_com=radio.comm_energy(t_com, prof.tx_power_w),
        )
    return ledgers


def _optimistic_latency(ctx: _RunContext, edge: EdgeState, client_id: int) -> float:
    """Best-case round latency from the static profile (full band)."""
    prof = ctx.population.clients[client_id].profile
    gain = radio.channel_gain(prof)
    rate = radio.transmission_rate(1.0, edge.bandwidth_hz, gain,
                                   prof.tx_power_w, ctx.params.noise_power_w)
    n = ctx.train_size(client_id)
    return (radio.comp_time(ctx.params.epochs, n, prof.cycles_per_sample,
                            prof.cpu_hz)
            + radio.comm_time(ctx.z_bits, rate))


def _round_deadline(scheme: SchemeConfig,
                    ledgers: Mapping[int, CostLedger]) -> float:
    if scheme.deadline_policy == "none" or not ledgers:
        return math.inf
    if scheme.deadline_policy == "fixed":
        return float(scheme.deadline_value)
    totals = [ledger.t_total for ledger in ledgers.values()]
    return float(np.percentile(totals, scheme.deadline_percentile))


def _resolve_eps(ctx: _RunContext, edge: EdgeState,
                 deltas: Mapping[int, np.ndarray]) -> tuple[float, float]:
    """Split/stop thresholds for this edge, fixed at its first evaluation:
    eps1 as a fraction of the first observed weighted mean delta norm and
    eps2 as a multiple of eps1, unless absolute overrides are set."""
    if edge.id in ctx.eps_by_edge:
        return ctx.eps_by_edge[edge.id]
    p = ctx.params
    if p.eps1 is not None:
        eps1 = p.eps1
        eps2 = p.eps2 if p.eps2 is not None else p.eps2_ratio * eps1
    else:
        weights = np.array([ctx.train_size(c) for c in sorted(deltas)], float)
        weights /= weights.sum()
        mean = sum(w * deltas[c] for w, c in zip(weights, sorted(deltas)))
        ref = float(np.linalg.norm(mean))
        if ref == 0.0:
            return math.inf, math.inf  # nothing learned yet; try again later
        eps1 = p.eps1_ratio * ref
        eps2 = p.eps2 if p.eps2 is not None else p.eps2_ratio * eps1
    ctx.eps_by_edge[edge.id] = (eps1, eps2)
    return eps1, eps2


def _assign_stragglers(ctx: _RunContext, members: Sequence[int],
                       c1: Sequence[int], c2: Sequence[int],
                       deltas: Mapping[int, np.ndarray]) -> tuple[list[int], list[int]]:
    """Full membership for a committed split: clients without a usable
    delta this round follow their latest known update direction, or the
    first child when none was ever observed."""
    side1, side2 = list(c1), list(c2)
    mean1 = np.mean([deltas[c] for c in c1], axis=0)
    mean2 = np.mean([deltas[c] for c in c2], axis=0)
    for m in members:
        if m in deltas and (m in side1 or m in side2):
            continue
        last = ctx.last_deltas.get(m)
        target = side1
        if last is not None and np.linalg.norm(last) > 0:
            try:
                if cosine_similarity(last, mean2) > cosine_similarity(last, mean1):
                    target = side2
            except DegenerateDeltaError:
                pass
        target.append(m)
    return sorted(side1), sorted(side2)


def _select(ctx: _RunContext, edge: EdgeState, availability: set[int],
            round_idx: int) -> SelectionOutcome:
    members_avail = [m for m in edge.members if m in availability]
    if ctx.scheme.baseline:
        budget = None
        if ctx.params.baseline_budget_frac is not None:
            budget = max(1, math.floor(
                ctx.params.baseline_budget_frac * len(members_avail)))
        rng = np.random.default_rng(np.random.SeedSequence(
            [ctx.seed, _S_BASELINE, round_idx, edge.id]))
        return select_random_baseline(edge.members, budget, rng, members_avail)
    if ctx.scheme.hfl_only:
        return select_fair(edge.clusters, members_avail)
    return compose_selection(edge.clusters, ctx.scheme.selection,
                             members_avail, ctx.cursors, ctx.latency_table)


def edge_round(ctx: _RunContext, edge: EdgeState, selection: SelectionOutcome,
               ledgers: Mapping[int, CostLedger], deadline: float,
               round_idx: int) -> EdgeRoundReport:
    """One edge's round: train the selected clients on their cluster models,
    drop deadline violators, aggregate per cluster and per edge, then run
    the split/stop evaluation (at most one committed split per cluster)."""
    report = EdgeRoundReport(edge_id=edge.id)
    if not selection.selected:
        return report

    survivors = [c for c in selection.selected if ledgers[c].t_total <= deadline]
    dropped = [c for c in selection.selected if c not in set(survivors)]
    report.participants = tuple(survivors)
    report.dropped = tuple(dropped)
    report.ledgers = {c: ledgers[c] for c in survivors}
    # violators pay for the local work already done, but not for the upload
    report.energy = (sum(ledgers[c].e_total for c in survivors)
                     + sum(ledgers[c].e_cmp for c in dropped))
    if dropped:
        report.events.append({
            "round": round_idx, "edge": edge.id, "event": EVENT_DEADLINE_DROP,
            "payload": {"clients": sorted(dropped), "deadline": deadline},
        })
    if not survivors:
        report.latency = deadline if math.isfinite(deadline) else 0.0
        return report
    report.latency = radio.edge_round_latency(report.ledgers)

    for cid in survivors:
        cluster = edge.cluster_of(cid)
        rng = np.random.default_rng(np.random.SeedSequence(
            [ctx.seed, _S_TRAIN, round_idx, cid]))
        try:
            train = local_train(cluster.model, ctx.population.clients[cid].train,
                                ctx.params.epochs, ctx.params.batch,
                                ctx.params.lr, rng)
        except NumericDivergenceError as err:
            raise err.with_round(round_idx)
        report.deltas[cid] = train.delta.values
        ctx.last_deltas[cid] = train.delta.values
        ctx.latency_table[cid] = ledgers[cid].t_total

    # per-cluster aggregation (sample-count weighted), then the edge model
    # as the weighted average over every participant's post-training model
    edge_weights: list[float] = []
    edge_models: list[np.ndarray] = []
    participants_by_cluster: dict[int, list[int]] = {}
    for cluster in edge.clusters:
        parts = [c for c in survivors if c in cluster.members]
        if not parts:
            continue
        participants_by_cluster[cluster.id] = parts
        weights = np.array([ctx.train_size(c) for c in parts], float)
        weights /= weights.sum()
        start = cluster.model.values
        for w, c in zip(weights, parts):
            edge_weights.append(ctx.train_size(c))
            edge_models.append(start + report.deltas[c])
        mean_delta = sum(w * report.deltas[c] for w, c in zip(weights, parts))
        cluster.model = ModelParams(start + mean_delta, cluster.model.arch_tag)
        report.cluster_mean_delta_norm[cluster.id] = float(
            np.linalg.norm(mean_delta))
    total_w = sum(edge_weights)
    edge.edge_model = ModelParams(
        sum((w / total_w) * m for w, m in zip(edge_weights, edge_models)),
        edge.edge_model.arch_tag)

    if ctx.scheme.hfl_only:
        return report

    eps1, eps2 = _resolve_eps(ctx, edge, report.deltas)
    if not math.isfinite(eps1):
        return report

    new_clusters: list[Cluster] = []
    for cluster in edge.clusters:
        parts = participants_by_cluster.get(cluster.id)
        if cluster.stopped or not parts:
            new_clusters.append(cluster)
            continue
        dvecs = [report.deltas[c] for c in parts]
        weights = [ctx.train_size(c) for c in parts]
        decision = check_split(dvecs, weights, eps1, eps2)
        if decision is SplitDecision.STOP:
            cluster.stopped = True
            report.events.append({
                "round": round_idx, "edge": edge.id, "event": EVENT_STOP,
                "payload": {"cluster": cluster.id,
                            "members": list(cluster.members)},
            })
            new_clusters.append(cluster)
            continue
        if decision is not SplitDecision.SPLIT:
            new_clusters.append(cluster)
            continue
        part_deltas = {c: report.deltas[c] for c in parts}
        sim = build_similarity(part_deltas)
        if len(sim.ids) < 2:
            new_clusters.append(cluster)
            continue
        c1, c2 = bipartition(sim)
        try:
            certified = gamma_check(part_deltas, c1, c2, sim)
        except DegenerateDeltaError:
            certified = False
        if not certified:
            new_clusters.append(cluster)
            continue
        side1, side2 = _assign_stragglers(ctx, cluster.members, c1, c2,
                                          part_deltas)
        max_cross, min_intra, gap = cross_and_intra(sim, [list(c1), list(c2)])
        child1 = Cluster(next(ctx.cluster_ids), tuple(side1),
                         cluster.model.copy(), parent=cluster.id,
                         split_round=round_idx)
        child2 = Cluster(next(ctx.cluster_ids), tuple(side2),
                         cluster.model.copy(), parent=cluster.id,
                         split_round=round_idx)
        new_clusters.extend([child1, child2])
        report.split_committed = True
        event = {
            "round": round_idx, "edge": edge.id, "event": EVENT_SPLIT,
            "payload": {
                "parent": cluster.id,
                "children": [child1.id, child2.id],
                "members": [list(child1.members), list(child2.members)],
                "gap": gap, "max_cross": max_cross, "min_intra": min_intra,
            },
        }
        report.events.append(event)
        edge.split_events.append(event)
    edge.clusters = new_clusters
    edge.check_partition()
    return report


def _union_groups(ids: Sequence[int], adjacency: set[tuple[int, int]]
                  ) -> list[list[int]]:
    parent = {i: i for i in ids}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in adjacency:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in ids:
        groups.setdefault(find(i), []).append(i)
    return [sorted(g) for _, g in sorted(groups.items())]


def _cloud_aggregate(ctx: _RunContext, cloud: CloudState,
                     edges: Sequence[EdgeState], round_idx: int,
                     trigger: str) -> list[dict]:
    """Pull edge and specialized models: the global model becomes the
    sample-weighted average of edge models, and congruent specialized
    models from different edges are grouped (pairwise cosine of their
    cloud-observed deltas above the grouping threshold) and replaced by
    their weighted average."""
    edge_weights = np.array(
        [sum(ctx.train_size(c) for c in e.members) for e in edges], float)
    edge_weights /= edge_weights.sum()
    cloud.global_model = ModelParams(
        sum(w * e.edge_model.values for w, e in zip(edge_weights, edges)),
        cloud.global_model.arch_tag)

    clusters = [c for e in edges for c in e.clusters]
    n_specialized = len(clusters)
    groups_payload: list[list[int]] = []
    if (ctx.params.cloud_recluster and not ctx.scheme.hfl_only
            and n_specialized > 2):
        deltas = {c.id: c.model.values - cloud.ref_for(c) for c in clusters}
        movable = [cid for cid, d in deltas.items() if np.linalg.norm(d) > 0]
        adjacency = set()
        for a, b in itertools.combinations(movable, 2):
            if cosine_similarity(deltas[a], deltas[b]) >= ctx.params.theta_cloud:
                adjacency.add((a, b))
        by_id = {c.id: c for c in clusters}
        for group in _union_groups(movable, adjacency):
            if len(group) < 2:
                continue
            weights = np.array(
                [sum(ctx.train_size(m) for m in by_id[cid].members)
                 for cid in group], float)
            weights /= weights.sum()
            merged = sum(w * by_id[cid].model.values
                         for w, cid in zip(weights, group))
            for cid in group:
                by_id[cid].model = ModelParams(merged.copy(),
                                               by_id[cid].model.arch_tag)
            groups_payload.append(group)

    for cluster in clusters:
        cloud.sync_refs[cluster.id] = cluster.model.values.copy()
    cloud.specialized = {
        e.id: {c.id: c.model.copy() for c in e.clusters} for e in edges}
    return [{
        "round": round_idx, "edge": None, "event": EVENT_CLOUD_AGG,
        "payload": {"trigger": trigger, "n_specialized": n_specialized,
                    "merged_groups": groups_payload},
    }]


def cloud_round_based(ctx: _RunContext, cloud: CloudState,
                      edges: Sequence[EdgeState], round_idx: int,
                      r_agg: int) -> list[dict]:
    """Cloud aggregation every `r_agg` rounds."""
    if round_idx % r_agg != 0:
        return []
    return _cloud_aggregate(ctx, cloud, edges, round_idx, "round_based")


def cloud_split_based(ctx: _RunContext, cloud: CloudState,
                      edges: Sequence[EdgeState], round_idx: int) -> list[dict]:
    """Cloud aggregation only in rounds where some edge committed a split."""
    if not cloud.pending_split:
        return []
    cloud.pending_split = False
    return _cloud_aggregate(ctx, cloud, edges, round_idx, "split_based")


def _availability(ctx: _RunContext, round_idx: int) -> set[int]:
    ids = [c.id for c in ctx.population.clients]
    if ctx.params.p_avail >= 1.0:
        return set(ids)
    rng = np.random.default_rng(
        np.random.SeedSequence([ctx.seed, _S_AVAIL, round_idx]))
    draws = rng.random(len(ids))
    return {cid for cid, u in zip(ids, draws) if u < ctx.params.p_avail}


def _global_hash(model: ModelParams) -> str:
    return hashlib.sha256(model.values.tobytes()).hexdigest()[:16]


def _build_metrics(ctx: _RunContext, cloud: CloudState,
                   edges: Sequence[EdgeState], round_idx: int,
                   reports: Mapping[int, EdgeRoundReport],
                   selections: Mapping[int, SelectionOutcome], t_round: float,
                   e_round: float, events: list[dict]) -> RoundMetrics:
    cluster_acc: dict[int, tuple[float, float, float]] = {}
    client_spec: dict[int, float] = {}
    client_glob: dict[int, float] = {}
    for edge in edges:
        for cluster in edge.clusters:
            accs = []
            for m in cluster.members:
                acc = evaluate_accuracy(cluster.model,
                                        ctx.population.clients[m].test)
                client_spec[m] = acc
                accs.append(acc)
            cluster_acc[cluster.id] = (min(accs), sum(accs) / len(accs),
                                       max(accs))
    for client in ctx.population.clients:
        client_glob[client.id] = evaluate_accuracy(cloud.global_model,
                                                   client.test)
    provenance: dict[str, int] = {}
    delta_norms: dict[int, float] = {}
    wmd: dict[int, float] = {}
    n_selected = n_dropped = 0
    for report in reports.values():
        n_selected += len(report.participants) + len(report.dropped)
        n_dropped += len(report.dropped)
        for c, d in report.deltas.items():
            delta_norms[c] = float(np.linalg.norm(d))
        wmd.update(report.cluster_mean_delta_norm)
    for sel in selections.values():
        for phase in sel.provenance.values():
            provenance[phase] = provenance.get(phase, 0) + 1
    return RoundMetrics(
        round=round_idx, t_round=t_round, e_round=e_round,
        t_cum=cloud.cumulative_time, e_cum=cloud.cumulative_energy,
        n_selected=n_selected, n_dropped=n_dropped,
        provenance_counts=provenance, cloud_agg=any(
            e["event"] == EVENT_CLOUD_AGG for e in events),
        clusters_per_edge={e.id: len(e.clusters) for e in edges},
        stopped_per_edge={e.id: sum(c.stopped for c in e.clusters)
                          for e in edges},
        cluster_accuracy=cluster_acc, cluster_mean_delta_norm=wmd,
        client_delta_norms=delta_norms, client_spec_accuracy=client_spec,
        client_global_accuracy=client_glob,
        global_model_hash=_global_hash(cloud.global_model), events=events)


def _setup(population: Population, scheme: SchemeConfig, params: RunParams,
           seed: int) -> tuple[_RunContext, list[EdgeState], CloudState]:
    """Initial run state: one all-member cluster per edge, every model a
    copy of the seeded initial model, optimistic latency estimates."""
    gen = population.gen
    arch = Architecture(params.arch_kind, gen["n_features"], gen["n_classes"],
                        params.n_hidden if params.arch_kind == "mlp" else 0)
    init = init_model(arch, seed)
    ctx = _RunContext(population=population, scheme=scheme, params=params,
                      seed=seed, arch=arch, z_bits=model_size_bits(arch))
    n_edges = population.n_edges
    edges = []
    for k in range(n_edges):
        members = tuple(population.edge_members(k))
        edges.append(EdgeState(
            id=k, members=members,
            clusters=[Cluster(next(ctx.cluster_ids), members, init.copy())],
            edge_model=init.copy(),
            bandwidth_hz=params.total_bandwidth_hz / n_edges))
    cloud = CloudState(global_model=init.copy(), init_values=init.values.copy())
    for edge in edges:
        for client in edge.members:
            ctx.latency_table[client] = _optimistic_latency(ctx, edge, client)
    return ctx, edges, cloud


def run_experiment(population: Population, scheme: SchemeConfig, rounds: int,
                   seed: int, params: RunParams | None = None
                   ) -> list[RoundMetrics]:
    """Run `rounds` global rounds (or fewer if the time budget runs out)
    and return one RoundMetrics per executed round."""
    params = params or RunParams()
    scheme.validate()
    params.validate()
    if rounds < 0:
        raise ConfigError("rounds", "must be non-negative")
    ctx, edges, cloud = _setup(population, scheme, params, seed)

    history: list[RoundMetrics] = []
    last_round_time = 0.0
    for round_idx in range(1, rounds + 1):
        if not enforce_budget_and_deadline(cloud.cumulative_time,
                                           last_round_time, scheme.t_budget):
            halt = {"round": round_idx, "edge": None,
                    "event": EVENT_BUDGET_HALT,
                    "payload": {"t_cum": cloud.cumulative_time,
                                "projected": last_round_time,
                                "t_budget": scheme.t_budget}}
            if history:
                history[-1].events.append(halt)
            break

        availability = _availability(ctx, round_idx)
        events: list[dict] = []
        reports: dict[int, EdgeRoundReport] = {}
        selections: dict[int, SelectionOutcome] = {}
        any_split = False
        for edge in edges:
            selection = _select(ctx, edge, availability, round_idx)
            selections[edge.id] = selection
            ledgers = (_client_ledgers(ctx, edge, selection.selected, round_idx)
                       if selection.selected else {})
            deadline = _round_deadline(scheme, ledgers)
            report = edge_round(ctx, edge, selection, ledgers, deadline,
                                round_idx)
            for child in edge.clusters:
                if child.parent is not None:
                    cloud.parent_of.setdefault(child.id, child.parent)
            reports[edge.id] = report
            events.extend(report.events)
            any_split = any_split or report.split_committed

        cloud.pending_split = cloud.pending_split or any_split
        if scheme.aggregation == "round_based":
            cloud_events = cloud_round_based(ctx, cloud, edges, round_idx,
                                             scheme.r_agg)
        else:
            cloud_events = cloud_split_based(ctx, cloud, edges, round_idx)
        events.extend(cloud_events)
        uploaded = bool(cloud_events)

        cloud_time = {}
        cloud_energy = {}
        for edge in edges:
            upload_bits = (1 + len(edge.clusters)) * ctx.z_bits
            t_up = radio.comm_time(upload_bits, params.backhaul_rate_bps)
            cloud_time[edge.id] = t_up
            cloud_energy[edge.id] = radio.comm_energy(t_up,
                                                      params.backhaul_power_w)
        t_round, e_round = radio.system_round_totals(
            {e.id: reports[e.id].latency for e in edges},
            {e.id: reports[e.id].energy for e in edges},
            cloud_time, cloud_energy,
            {e.id: uploaded for e in edges})
        cloud.rounds_elapsed = round_idx
        cloud.cumulative_time += t_round
        cloud.cumulative_energy += e_round
        last_round_time = t_round

        history.append(_build_metrics(ctx, cloud, edges, round_idx, reports,
                                      selections, t_round, e_round, events))
    return history
