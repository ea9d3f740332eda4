"""Structural network measures for comparing empirical and rewired networks.

Directed measures (components, reciprocity, degrees) use the directed simple
graph: parallel links between the same ordered pair count once. Clustering,
diameter and path lengths use the undirected simple graph, and the last two
are restricted to its largest connected component so disconnected networks
still get finite values.
"""
from __future__ import annotations

import csv
import json
import re
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import networkx as nx
import numpy as np

from .network import ScNetwork

# report field -> column header used in summary tables
COLUMNS = {
    "n_nodes": "N",
    "n_links": "L",
    "mean_total_degree": "<k_tot>",
    "mean_neighbor_total_degree": "<<k_tot>_NN>",
    "global_clustering": "Global clustering coefficient",
    "diameter": "Diameter*",
    "avg_shortest_path": "Average shortest path*",
    "top3_scc_sizes": "Size of the 3 largest SCCs",
    "largest_wcc_size": "Size of the largest WCC",
    "reciprocity": "Reciprocity",
}


@dataclass(frozen=True)
class MetricsReport:
    n_nodes: int
    n_links: int
    mean_total_degree: float
    mean_neighbor_total_degree: float
    global_clustering: float
    diameter: int
    avg_shortest_path: float
    top3_scc_sizes: tuple
    largest_wcc_size: int
    reciprocity: float

    def as_dict(self) -> dict:
        d = asdict(self)
        d["top3_scc_sizes"] = list(self.top3_scc_sizes)
        return d

    def table_row(self) -> dict:
        """Values keyed by table header; SCC sizes joined as ``a/b/c``."""
        row = {}
        for key, header in COLUMNS.items():
            v = getattr(self, key)
            row[header] = "/".join(str(x) for x in v) if key == "top3_scc_sizes" else v
        return row

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n", encoding="utf-8")


def directed_graph(net: ScNetwork) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(range(net.n_firms))
    _, src, tgt, _ = net.arrays()
    g.add_edges_from(zip(src.tolist(), tgt.tolist()))
    return g


def metrics_from_digraph(g: nx.DiGraph) -> MetricsReport:
    """All measures for a directed simple graph without self-loops."""
    n = g.number_of_nodes()
    if n == 0:
        raise ValueError("empty network")
    n_links = g.number_of_edges()
    ktot = {v: g.in_degree(v) + g.out_degree(v) for v in g}
    u = g.to_undirected(as_view=False)

    nn = [np.mean([ktot[w] for w in u[v]]) for v in u if len(u[v])]
    knn = float(np.mean(nn)) if nn else 0.0

    wccs = sorted(nx.connected_components(u), key=lambda c: (-len(c), min(c)))
    core = u.subgraph(wccs[0])
    if len(core) > 1:
        lengths = dict(nx.all_pairs_shortest_path_length(core))
        dists = [d for a, row in lengths.items() for b, d in row.items() if a != b]
        diameter = int(max(dists))
        aspl = float(sum(dists)) / len(dists)
    else:
        diameter, aspl = 0, 0.0

    sccs = sorted((len(c) for c in nx.strongly_connected_components(g)), reverse=True)
    mutual = sum(1 for a, b in g.edges if g.has_edge(b, a))
    return MetricsReport(
        n_nodes=n,
        n_links=n_links,
        mean_total_degree=2.0 * n_links / n,
        mean_neighbor_total_degree=knn,
        global_clustering=float(nx.transitivity(u)),
        diameter=diameter,
        avg_shortest_path=aspl,
        top3_scc_sizes=tuple(sccs[:3]),
        largest_wcc_size=len(wccs[0]),
        reciprocity=mutual / n_links if n_links else 0.0,
    )


def compute_metrics(net: ScNetwork) -> MetricsReport:
    return metrics_from_digraph(directed_graph(net))


def write_table(rows: dict, path) -> None:
    """CSV with one row per named report, columns as in :data:`COLUMNS`."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["network", *COLUMNS.values()])
        for name, rep in rows.items():
            w.writerow([name, *rep.table_row().values()])


_STEP = re.compile(r"step_(\d+)\.csv$")


def metrics_trajectory(run_dir, steps=None, mode: str = "weighted") -> list[dict]:
    """Long-form table ``(step, metric, value)`` over a run's stored snapshots.

    ``steps`` restricts the table to those snapshot steps; any that are
    missing on disk are skipped with a warning.
    """
    from .io import load_edge_list

    snap_dir = Path(run_dir) / "snapshots"
    found = {int(m.group(1)): p for p in sorted(snap_dir.glob("step_*.csv")) if (m := _STEP.search(p.name))}
    wanted = sorted(found) if steps is None else list(steps)
    rows = []
    for step in wanted:
        if step not in found:
            warnings.warn(f"snapshot for step {step} missing in {snap_dir}", stacklevel=2)
            continue
        rep = compute_metrics(load_edge_list(found[step], mode=mode, min_weight=0))
        for key, value in rep.as_dict().items():
            if key == "top3_scc_sizes":
                for k, size in enumerate(value, start=1):
                    rows.append({"step": step, "metric": f"scc_size_{k}", "value": size})
            else:
                rows.append({"step": step, "metric": key, "value": value})
    return rows


def write_trajectory(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["step", "metric", "value"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


__all__ = [
    "COLUMNS", "MetricsReport", "compute_metrics", "metrics_from_digraph", "directed_graph",
    "metrics_trajectory", "write_table", "write_trajectory",
]
