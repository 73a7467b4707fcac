"""Two-phase client selection.

Phase one gives every available client of a still-training cluster an
equal opportunity to participate. Phase two kicks in per cluster once it
has reached its stopping point: either the cheapest available member
(greedy, by latest observed round latency) or members in cyclic order
(round-robin) continue training on the cluster's behalf. The random
baseline ignores cluster state entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, MutableMapping, Sequence

import numpy as np

from .clusterer import Cluster

PHASE_FAIR = "fair"
PHASE_GREEDY = "greedy"
PHASE_ROUND_ROBIN = "round_robin"
PHASE_RANDOM = "random"


@dataclass
class SelectionOutcome:
    selected: tuple[int, ...]
    provenance: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        self.selected = tuple(sorted(self.selected))
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("selection contains duplicate ids")


def select_fair(clusters: Sequence[Cluster],
                availability: Iterable[int]) -> SelectionOutcome:
    """Every available member of every non-stopped cluster."""
    avail = set(availability)
    chosen = sorted(
        m for c in clusters if not c.stopped for m in c.members if m in avail)
    return SelectionOutcome(tuple(chosen), {m: PHASE_FAIR for m in chosen})


def select_greedy(stopped: Sequence[Cluster], latencies: Mapping[int, float],
                  availability: Iterable[int]) -> SelectionOutcome:
    """One client per stopped cluster: the available member with the lowest
    known round latency (ties go to the lowest id). Clusters with nobody
    available contribute no one this round."""
    avail = set(availability)
    chosen: dict[int, str] = {}
    for cluster in sorted(stopped, key=lambda c: c.id):
        candidates = [m for m in cluster.members if m in avail]
        if not candidates:
            continue
        winner = min(candidates, key=lambda m: (latencies[m], m))
        chosen[winner] = PHASE_GREEDY
    return SelectionOutcome(tuple(chosen), chosen)


def select_round_robin(stopped: Sequence[Cluster],
                       cursors: MutableMapping[int, int],
                       availability: Iterable[int]) -> SelectionOutcome:
    """One client per stopped cluster in ascending-id cyclic order; the
    cursor advances past the pick and skips unavailable members."""
    avail = set(availability)
    chosen: dict[int, str] = {}
    for cluster in sorted(stopped, key=lambda c: c.id):
        members = cluster.members  # kept sorted by Cluster
        start = cursors.get(cluster.id, 0) % len(members)
        for off in range(len(members)):
            idx = (start + off) % len(members)
            if members[idx] in avail:
                chosen[members[idx]] = PHASE_ROUND_ROBIN
                cursors[cluster.id] = (idx + 1) % len(members)
                break
    return SelectionOutcome(tuple(chosen), chosen)


def select_random_baseline(member_ids: Sequence[int], budget: int | None,
                           rng: np.random.Generator,
                           availability: Iterable[int]) -> SelectionOutcome:
    """Uniform sample without replacement from the available clients,
    blind to cluster state and resources. A budget of None means everyone."""
    avail = sorted(set(availability) & set(member_ids))
    if budget is None or budget >= len(avail):
        chosen = avail
    else:
        if budget < 0:
            raise ValueError("budget must be non-negative")
        chosen = sorted(rng.choice(len(avail), size=budget, replace=False))
        chosen = [avail[i] for i in chosen]
    return SelectionOutcome(tuple(chosen), {m: PHASE_RANDOM for m in chosen})


def compose_selection(clusters: Sequence[Cluster], policy: str,
                      availability: Iterable[int],
                      cursors: MutableMapping[int, int],
                      latencies: Mapping[int, float]) -> SelectionOutcome:
    """Fair phase over non-stopped clusters plus the per-scheme policy over
    stopped clusters; the two phases select disjoint clients."""
    if policy not in (PHASE_GREEDY, PHASE_ROUND_ROBIN):
        raise ValueError(f"unknown selection policy {policy!r}")
    fair = select_fair(clusters, availability)
    stopped = [c for c in clusters if c.stopped]
    if policy == PHASE_GREEDY:
        second = select_greedy(stopped, latencies, availability)
    else:
        second = select_round_robin(stopped, cursors, availability)
    provenance = dict(fair.provenance)
    provenance.update(second.provenance)
    return SelectionOutcome(tuple(provenance), provenance)
