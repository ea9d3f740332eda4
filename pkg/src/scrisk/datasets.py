"""Subnetwork extraction and a synthetic supply network generator.

The generator stands in for confidential transaction data. Firms get heavy
tailed activity, sectors are unevenly populated and every sector buys from a
handful of supplier sectors, so the sector-pair buckets used by swaps are
well populated.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import ConfigError, IntegrityError
from .network import ScNetwork, induced_subgraph, nace2, to_units
from .production import Essentiality, EssentialityMatrix

# NACE Rev.2 sections and the divisions they span
NACE_SECTIONS = {
    "A": (1, 3), "B": (5, 9), "C": (10, 33), "D": (35, 35), "E": (36, 39),
    "F": (41, 43), "G": (45, 47), "H": (49, 53), "I": (55, 56), "J": (58, 63),
    "K": (64, 66), "L": (68, 68), "M": (69, 75), "N": (77, 82), "O": (84, 84),
    "P": (85, 85), "Q": (86, 88), "R": (90, 93), "S": (94, 96), "T": (97, 98),
    "U": (99, 99),
}


@dataclass(frozen=True)
class SeedSector:
    seed_nace4: str
    n_supplier_groups: int
    n_customer_groups: int
    min_group_size: int = 5

    def __post_init__(self):
        if min(self.n_supplier_groups, self.n_customer_groups, self.min_group_size) < 1:
            raise ConfigError("group counts must be at least 1")


@dataclass(frozen=True)
class Community:
    nace_section_filter: str
    target_size: int

    def __post_init__(self):
        if self.target_size < 1:
            raise ConfigError("target_size must be at least 1")


def section_divisions(sections: str) -> set[str]:
    """Two-digit divisions covered by one or more section letters, e.g. ``"C"`` or ``"CG"``."""
    out = set()
    for letter in sections.upper().replace(",", ""):
        if letter not in NACE_SECTIONS:
            raise ConfigError(f"unknown NACE section {letter!r}")
        lo, hi = NACE_SECTIONS[letter]
        out.update(f"{d:02d}" for d in range(lo, hi + 1))
    return out


def _largest_wcc(net: ScNetwork) -> ScNetwork:
    g = nx.Graph()
    g.add_nodes_from(range(net.n_firms))
    g.add_edges_from((lk.source, lk.target) for lk in net.links())
    comps = list(nx.connected_components(g))
    if len(comps) <= 1:
        return net
    best = max(comps, key=lambda c: (len(c), -min(c)))
    return induced_subgraph(net, best)


def overrepresentation(tier: list[int], net: ScNetwork, exclude: str) -> dict[str, float]:
    """Share of each sector among ``tier`` firms divided by its share in ``net``.

    Firms of the ``exclude`` class (matched on 4-digit activity) are left out
    of both counts.
    """
    def keep(i):
        return net.activities[i] != exclude

    everyone = Counter(net.sectors[i] for i in range(net.n_firms) if keep(i))
    chosen = Counter(net.sectors[i] for i in tier if keep(i))
    n_all, n_tier = sum(everyone.values()), sum(chosen.values())
    if n_tier == 0:
        return {}
    return {g: (c / n_tier) / (everyone[g] / n_all) for g, c in chosen.items()}


def _pick_groups(tier, net, exclude, n_groups, min_size):
    ratio = overrepresentation(tier, net, exclude)
    sizes = Counter(net.sectors[i] for i in tier if net.activities[i] != exclude)
    ranked = sorted((g for g in ratio if sizes[g] >= min_size), key=lambda g: (-ratio[g], g))
    return ranked[:n_groups]


def extract_seed_sector(net: ScNetwork, spec: SeedSector) -> ScNetwork:
    """Seed-class firms plus their most overrepresented supplier and customer groups.

    The seed class is matched against firm activities (4-digit codes). The
    result is the largest weakly connected component of the induced subgraph.
    """
    if all(a is None for a in net.activities):
        raise IntegrityError("seed extraction needs 4-digit activities (source_nace4, target_nace4 columns)")
    seeds = [i for i in range(net.n_firms) if net.activities[i] == spec.seed_nace4]
    if not seeds:
        raise IntegrityError(f"no firm has activity {spec.seed_nace4}")
    seed_set = set(seeds)
    suppliers = sorted({s for i in seeds for s in net.in_neighbors(i)} - seed_set)
    customers = sorted({t for i in seeds for t in net.out_neighbors(i)} - seed_set)
    sup_groups = set(_pick_groups(suppliers, net, spec.seed_nace4, spec.n_supplier_groups, spec.min_group_size))
    cus_groups = set(_pick_groups(customers, net, spec.seed_nace4, spec.n_customer_groups, spec.min_group_size))
    keep = set(seeds)
    keep.update(i for i in suppliers if net.sectors[i] in sup_groups and net.activities[i] != spec.seed_nace4)
    keep.update(i for i in customers if net.sectors[i] in cus_groups and net.activities[i] != spec.seed_nace4)
    return _largest_wcc(induced_subgraph(net, keep))


def undirected_graph(net: ScNetwork) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(net.n_firms))
    g.add_edges_from((lk.source, lk.target) for lk in net.links())
    return g


def cnm_communities(g: nx.Graph) -> list[set]:
    """Greedy modularity communities, largest first, ties by smallest member."""
    comms = [set(c) for c in nx.community.greedy_modularity_communities(g)] if g.number_of_edges() else \
        [{v} for v in g.nodes]
    return sorted(comms, key=lambda c: (-len(c), min(c)))


def extract_community(net: ScNetwork, spec: Community) -> ScNetwork:
    """The greedy-modularity community of the section-filtered network closest in size to the target."""
    divisions = section_divisions(spec.nace_section_filter)
    members = [i for i in range(net.n_firms) if nace2(net.sectors[i]) in divisions]
    if not members:
        raise IntegrityError(f"no firm in section(s) {spec.nace_section_filter}")
    sub = induced_subgraph(net, members)
    comms = cnm_communities(undirected_graph(sub))
    best = min(comms, key=lambda c: (abs(len(c) - spec.target_size), -len(c), min(c)))
    return induced_subgraph(sub, best)


@dataclass(frozen=True)
class SynthSpec:
    n_firms: int = 200
    n_sectors: int = 12
    degree_exponent: float = 2.5
    weight_exponent: float = 2.0
    reciprocity_target: float = 0.05
    essentiality_density: float = 0.4
    seed: int = 0
    mean_degree: float = 4.0
    supplier_sectors: int = 3

    def validate(self) -> None:
        if self.n_firms < 2:
            raise ConfigError("need at least two firms")
        if not 1 <= self.n_sectors <= self.n_firms:
            raise ConfigError("n_sectors must lie in [1, n_firms]")
        if self.n_sectors > 180:
            raise ConfigError("at most 180 sectors")
        if self.degree_exponent <= 1 or self.weight_exponent <= 1:
            raise ConfigError("exponents must exceed 1")
        for name in ("reciprocity_target", "essentiality_density"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.mean_degree <= 0 or self.supplier_sectors < 1:
            raise ConfigError("mean_degree and supplier_sectors must be positive")


def _sector_codes(n: int) -> list[str]:
    # two groups per division starting at manufacturing, so nace2 lookups share rows
    return [f"{10 + k // 2:02d}{k % 2 + 1}" for k in range(n)]


def _pareto(rng, exponent, size):
    return (1.0 - rng.random(size)) ** (-1.0 / (exponent - 1.0))


def generate_synthetic(spec: SynthSpec) -> tuple[ScNetwork, EssentialityMatrix]:
    """Random weighted supply network and a matching essentiality matrix.

    Raises ``ConfigError`` if the spec is infeasible.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, m = spec.n_firms, spec.n_sectors
    codes = _sector_codes(m)

    # skewed sector sizes, each sector populated at least once
    pop = (np.arange(1, m + 1)) ** -0.8
    sec = np.concatenate([np.arange(m), rng.choice(m, size=n - m, p=pop / pop.sum())])
    rng.shuffle(sec)

    # each buying sector sources from a few supplier sectors (often its own)
    k_sup = min(spec.supplier_sectors, m)
    suppliers_of = [rng.choice(m, size=k_sup, replace=False, p=pop / pop.sum()) for _ in range(m)]
    customers_of = [[b for b in range(m) if a in suppliers_of[b]] for a in range(m)]

    out_fit = _pareto(rng, spec.degree_exponent, n)
    in_fit = _pareto(rng, spec.degree_exponent, n)
    members = [np.flatnonzero(sec == a) for a in range(m)]

    pairs: dict[tuple[int, int], None] = {}
    for i in rng.permutation(n):
        i = int(i)
        buyers = customers_of[sec[i]]
        if not buyers:
            continue
        deg = max(1, int(round(spec.mean_degree * out_fit[i] / out_fit.mean())))
        for _ in range(deg):
            b = buyers[int(rng.integers(len(buyers)))]
            pool = members[b][members[b] != i]
            if len(pool) == 0:
                continue
            j = int(rng.choice(pool, p=in_fit[pool] / in_fit[pool].sum()))
            pairs[(i, j)] = None

    # reverse a fraction q = r / (2 - r) of links so reciprocity lands near r
    q = spec.reciprocity_target / (2.0 - spec.reciprocity_target) if spec.reciprocity_target < 1 else 1.0
    for (i, j) in list(pairs):
        if (j, i) not in pairs and rng.random() < q:
            pairs[(j, i)] = None

    # firms nobody touched get one supplier from their own sector pool
    touched = np.zeros(n, dtype=bool)
    for (i, j) in pairs:
        touched[i] = touched[j] = True
    for i in np.flatnonzero(~touched):
        i = int(i)
        pool = [s for s in np.flatnonzero(touched) if s != i]
        if not pool:
            pool = [s for s in range(n) if s != i]
        s = int(pool[int(rng.integers(len(pool)))])
        pairs[(s, i)] = None
        touched[i] = touched[s] = True

    weights = 3000.0 * _pareto(rng, spec.weight_exponent, len(pairs))
    weights = np.minimum(np.round(weights, 2), 3000.0 * 1e4)
    links = [(i, j, to_units(w)) for (i, j), w in zip(pairs, weights)]
    labels = [f"F{i:0{len(str(n - 1))}d}" for i in range(n)]
    net = ScNetwork(labels, [codes[a] for a in sec], links, weighted=True,
                    activities=[codes[a] + "0" for a in sec])

    divisions = sorted({nace2(c) for c in codes})
    table = {}
    for a in divisions:
        for b in divisions:
            table[(a, b)] = Essentiality.ESSENTIAL if rng.random() < spec.essentiality_density \
                else Essentiality.NON_ESSENTIAL
    return net, EssentialityMatrix(table, default=Essentiality.NON_ESSENTIAL)


def write_provenance(path, spec, extra: dict | None = None) -> None:
    """JSON record of the spec (and any extra fields) that produced a dataset."""
    body = {"kind": type(spec).__name__, "spec": asdict(spec)}
    if extra:
        body.update(extra)
    Path(path).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")


__all__ = [
    "SeedSector", "Community", "SynthSpec", "NACE_SECTIONS", "section_divisions",
    "overrepresentation", "extract_seed_sector", "extract_community", "cnm_communities",
    "generate_synthetic", "write_provenance",
]
