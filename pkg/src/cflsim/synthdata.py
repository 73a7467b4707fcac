"""Synthetic client populations with ground-truth incongruent tasks.

Every distribution shares one base task (Gaussian class blobs in feature
space) but applies its own label permutation, so distributions have
incongruent optima by construction while the feature geometry stays fixed.
Clients are placed on edges round-robin by id; each edge hosts a contiguous
cyclic block of distributions so that neighbouring edges share
distributions whenever the blocks overlap (always the case for K >= 3).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .radio import RadioProfile

SCHEMA_VERSION = 1

# stream tags for seed derivation
_S_CENTERS, _S_PERMS, _S_PROFILES, _S_SIZES, _S_SHUFFLE = 0, 1, 2, 3, 4
_S_CLIENT = 10


@dataclass(frozen=True)
class DistributionSpec:
    """One latent data distribution: a label permutation of the base task."""

    id: int
    kind: str
    permutation: tuple[int, ...]


@dataclass
class ClientDataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray    # (n,) int64
    owner: int
    dist_id: int

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass
class ClientState:
    id: int
    train: ClientDataset
    test: ClientDataset
    dist_id: int
    profile: RadioProfile


@dataclass
class Population:
    clients: list[ClientState]
    edge_assignment: dict[int, int]
    J: int
    distributions: list[DistributionSpec]
    seed: int
    gen: dict = field(default_factory=dict)

    @property
    def n_edges(self) -> int:
        return len(set(self.edge_assignment.values()))

    def edge_members(self, edge_id: int) -> list[int]:
        return sorted(c for c, e in self.edge_assignment.items() if e == edge_id)

    def client(self, client_id: int) -> ClientState:
        return self.clients[client_id]


def _distribution_specs(n_dists: int, n_classes: int,
                        rng: np.random.Generator) -> list[DistributionSpec]:
    """Cyclic label shifts when they suffice (pairwise disjoint relabelings);
    otherwise seeded random distinct permutations."""
    if n_dists <= n_classes:
        perms = [tuple((c + j) % n_classes for c in range(n_classes))
                 for j in range(n_dists)]
    else:
        if n_dists > math.factorial(n_classes):
            raise ConfigError("J", "more distributions than label permutations")
        seen: set[tuple[int, ...]] = set()
        perms = []
        while len(perms) < n_dists:
            p = tuple(int(x) for x in rng.permutation(n_classes))
            if p not in seen:
                seen.add(p)
                perms.append(p)
    return [DistributionSpec(j, "label_permutation", p)
            for j, p in enumerate(perms)]


def _edge_dist_blocks(n_dists: int, edge_sizes: Mapping[int, int],
                      n_total: int) -> dict[int, list[int]]:
    """Distribution ids hosted by each edge: a cyclic block of size
    min(J, max(2, ceil(J * N_k / N))) starting at floor(k * J / K).

    Block size is floored at two (when J >= 2) so every edge holds at least
    one incongruent pair, and capped so a single edge never hosts more
    distributions than it can tell apart through recursive bipartitioning.
    """
    n_edges = len(edge_sizes)
    blocks = {}
    for k, n_k in edge_sizes.items():
        if n_dists == 1:
            blocks[k] = [0]
            continue
        size = min(n_dists, max(2, math.ceil(n_dists * n_k / n_total)))
        offset = (k * n_dists) // n_edges
        blocks[k] = [(offset + i) % n_dists for i in range(size)]
    return blocks


def _default_gen_params() -> dict:
    return {
        "n_features": 20,
        "n_classes": 10,
        "samples_range": [60, 120],
        "test_fraction": 0.25,     # relative to train size: an 80/20 split
        "center_scale": 3.0,
        "noise_sigma": 0.5,
        "distance_range": [20.0, 100.0],
        "cpu_hz_range": [1e9, 9e9],
        "tx_power_dbm_range": [-10.0, 20.0],
        "cycles_per_sample": 20.0,
        "capacitance": 2e-28,
        "ref_gain_db": -35.0,
        "ref_distance_m": 2.0,
        "imbalance_factor": 1.0,
    }


def _class_centers(seed: int, n_classes: int, n_features: int,
                   center_scale: float) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, _S_CENTERS]))
    centers = rng.normal(size=(n_classes, n_features))
    centers *= center_scale / np.linalg.norm(centers, axis=1, keepdims=True)
    return centers


def _sample_dataset(seed: int, client_id: int, n_samples: int, owner: int,
                    dist: DistributionSpec, centers: np.ndarray,
                    noise_sigma: float, stream: int) -> ClientDataset:
    rng = np.random.default_rng(
        np.random.SeedSequence([seed, stream, client_id, n_samples]))
    base = rng.integers(0, centers.shape[0], size=n_samples)
    features = centers[base] + noise_sigma * rng.normal(
        size=(n_samples, centers.shape[1]))
    labels = np.asarray(dist.permutation, dtype=np.int64)[base]
    return ClientDataset(features, labels, owner=owner, dist_id=dist.id)


def _build_clients(seed: int, sizes: Sequence[int], dist_of: Sequence[int],
                   profiles: Sequence[RadioProfile],
                   dists: Sequence[DistributionSpec], gen: dict,
                   stream: int) -> list[ClientState]:
    centers = _class_centers(seed, gen["n_classes"], gen["n_features"],
                             gen["center_scale"])
    clients = []
    for i, n_train in enumerate(sizes):
        n_test = max(1, round(n_train * gen["test_fraction"]))
        spec = dists[dist_of[i]]
        train = _sample_dataset(seed, i, n_train, i, spec, centers,
                                gen["noise_sigma"], stream)
        test = _sample_dataset(seed, i + 1_000_000, n_test, i, spec, centers,
                               gen["noise_sigma"], stream)
        clients.append(ClientState(i, train, test, spec.id, profiles[i]))
    return clients


def generate_population(seed: int, n_clients: int, n_edges: int, n_dists: int,
                        n_features: int = 20, n_classes: int = 10,
                        samples_range: tuple[int, int] = (60, 120),
                        placement: Mapping[int, int] | None = None,
                        **gen_overrides) -> Population:
    """Deterministically generate a client population.

    Per-client train sizes are uniform in `samples_range`; a held-out test
    set of a quarter of the train size (an 80/20 split of the generated
    data) accompanies each client. Client -> edge placement is round-robin
    by id unless `placement` is given.
    """
    if n_edges < 1:
        raise ConfigError("K", "need at least one edge server")
    if n_clients < n_edges:
        raise ConfigError("N", f"need N >= K, got N={n_clients} K={n_edges}")
    if n_dists < 1:
        raise ConfigError("J", "need at least one distribution")
    low, high = int(samples_range[0]), int(samples_range[1])
    if low < 1 or high < low:
        raise ConfigError("samples_range", f"invalid range [{low}, {high}]")

    gen = _default_gen_params()
    gen.update({"n_features": n_features, "n_classes": n_classes,
                "samples_range": [low, high]})
    for key, value in gen_overrides.items():
        if key not in gen:
            raise ConfigError(key, "unknown generation parameter")
        gen[key] = value

    rng_perm = np.random.default_rng(np.random.SeedSequence([seed, _S_PERMS]))
    dists = _distribution_specs(n_dists, gen["n_classes"], rng_perm)

    if placement is not None:
        edge_assignment = {int(c): int(e) for c, e in placement.items()}
        if sorted(edge_assignment) != list(range(n_clients)):
            raise ConfigError("placement", "must map every client exactly once")
        if not set(edge_assignment.values()) <= set(range(n_edges)):
            raise ConfigError("placement", "edge id out of range")
    else:
        edge_assignment = {i: i % n_edges for i in range(n_clients)}

    edge_sizes = {k: 0 for k in range(n_edges)}
    for e in edge_assignment.values():
        edge_sizes[e] += 1
    blocks = _edge_dist_blocks(n_dists, edge_sizes, n_clients)

    # clients of an edge cycle through the edge's distribution block
    dist_of = [0] * n_clients
    for k in range(n_edges):
        members = sorted(c for c, e in edge_assignment.items() if e == k)
        for pos, c in enumerate(members):
            dist_of[c] = blocks[k][pos % len(blocks[k])]

    rng_sizes = np.random.default_rng(np.random.SeedSequence([seed, _S_SIZES]))
    sizes = [int(rng_sizes.integers(low, high + 1)) for _ in range(n_clients)]

    rng_prof = np.random.default_rng(np.random.SeedSequence([seed, _S_PROFILES]))
    profiles = []
    for _ in range(n_clients):
        d = rng_prof.uniform(*gen["distance_range"])
        f = rng_prof.uniform(*gen["cpu_hz_range"])
        dbm = rng_prof.uniform(*gen["tx_power_dbm_range"])
        profiles.append(RadioProfile(
            distance_m=d, tx_power_w=10.0 ** (dbm / 10.0 - 3.0), cpu_hz=f,
            cycles_per_sample=gen["cycles_per_sample"],
            ref_gain_db=gen["ref_gain_db"],
            ref_distance_m=gen["ref_distance_m"],
            capacitance=gen["capacitance"]))

    clients = _build_clients(seed, sizes, dist_of, profiles, dists, gen,
                             _S_CLIENT)
    return Population(clients=clients, edge_assignment=edge_assignment,
                      J=n_dists, distributions=dists, seed=seed, gen=gen)


def make_unbalanced(population: Population, imbalance_factor: float) -> Population:
    """Rescale client dataset sizes to a log-spaced spread with
    max/min ~= imbalance_factor, preserving the total sample count."""
    if imbalance_factor < 1:
        raise ConfigError("imbalance_factor", "must be >= 1")
    if imbalance_factor == 1:
        return population

    n = len(population.clients)
    old_sizes = [len(c.train) for c in population.clients]
    total = sum(old_sizes)
    if n == 1:
        return population
    weights = np.array([imbalance_factor ** (r / (n - 1)) for r in range(n)])
    rng = np.random.default_rng(
        np.random.SeedSequence([population.seed, _S_SHUFFLE]))
    rng.shuffle(weights)
    new_sizes = [max(1, round(total * w / weights.sum())) for w in weights]

    gen = dict(population.gen)
    gen["imbalance_factor"] = float(imbalance_factor)
    dist_of = [c.dist_id for c in population.clients]
    profiles = [c.profile for c in population.clients]
    clients = _build_clients(population.seed, new_sizes, dist_of, profiles,
                             population.distributions, gen, _S_CLIENT)
    return Population(clients=clients,
                      edge_assignment=dict(population.edge_assignment),
                      J=population.J, distributions=population.distributions,
                      seed=population.seed, gen=gen)


def ground_truth_partition(population: Population, edge_id: int) -> dict[int, list[int]]:
    """Per-edge partition of clients by latent distribution id."""
    groups: dict[int, list[int]] = {}
    for c in population.edge_members(edge_id):
        groups.setdefault(population.clients[c].dist_id, []).append(c)
    return groups


def population_to_dict(population: Population) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": population.seed,
        "J": population.J,
        "gen": population.gen,
        "distributions": [
            {"id": d.id, "kind": d.kind, "permutation": list(d.permutation)}
            for d in population.distributions
        ],
        "edge_assignment": {str(c): e for c, e in
                            sorted(population.edge_assignment.items())},
        "clients": [
            {
                "id": c.id,
                "dist_id": c.dist_id,
                "profile": {
                    "distance_m": c.profile.distance_m,
                    "tx_power_w": c.profile.tx_power_w,
                    "cpu_hz": c.profile.cpu_hz,
                    "cycles_per_sample": c.profile.cycles_per_sample,
                    "ref_gain_db": c.profile.ref_gain_db,
                    "ref_distance_m": c.profile.ref_distance_m,
                    "capacitance": c.profile.capacitance,
                },
                "train": {
                    "features": c.train.features.tolist(),
                    "labels": c.train.labels.tolist(),
                },
                "test": {
                    "features": c.test.features.tolist(),
                    "labels": c.test.labels.tolist(),
                },
            }
            for c in population.clients
        ],
    }


def population_to_json(population: Population) -> bytes:
    """Canonical JSON snapshot: sorted keys, compact separators."""
    return json.dumps(population_to_dict(population), sort_keys=True,
                      separators=(",", ":")).encode()


def population_from_dict(doc: dict) -> Population:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported snapshot version {doc.get('schema_version')}")
    dists = [DistributionSpec(d["id"], d["kind"], tuple(d["permutation"]))
             for d in doc["distributions"]]
    clients = []
    for c in doc["clients"]:
        profile = RadioProfile(**c["profile"])
        train = ClientDataset(np.asarray(c["train"]["features"], dtype=np.float64),
                              np.asarray(c["train"]["labels"], dtype=np.int64),
                              owner=c["id"], dist_id=c["dist_id"])
        test = ClientDataset(np.asarray(c["test"]["features"], dtype=np.float64),
                             np.asarray(c["test"]["labels"], dtype=np.int64),
                             owner=c["id"], dist_id=c["dist_id"])
        clients.append(ClientState(c["id"], train, test, c["dist_id"], profile))
    return Population(
        clients=clients,
        edge_assignment={int(k): v for k, v in doc["edge_assignment"].items()},
        J=doc["J"], distributions=dists, seed=doc["seed"], gen=doc["gen"])


def population_from_json(blob: bytes) -> Population:
    return population_from_dict(json.loads(blob.decode()))


def population_hash(population: Population) -> str:
    return hashlib.sha256(population_to_json(population)).hexdigest()
