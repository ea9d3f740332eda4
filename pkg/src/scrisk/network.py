"""Supply-chain network data model.

Firms are dense integer handles ``0..N-1`` with a sidecar table of external
labels. Link weights are held internally as integer hundredths of a monetary
unit so that every strength sum is exact no matter in which order links are
added, removed or merged by the rewiring moves.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IntegrityError

WEIGHT_SCALE = 100


def to_units(weight: float) -> int:
    """Convert a monetary weight to internal integer hundredths."""
    return int(round(float(weight) * WEIGHT_SCALE))


def nace2(code: str) -> str:
    return code[:2]


@dataclass(frozen=True)
class Firm:
    id: int
    label: str
    sector: str
    out_strength0: float
    in_strength0_by_product: Mapping[str, float]
    activity: str | None = None

    @property
    def nace2(self) -> str:
        return nace2(self.sector)


@dataclass(frozen=True)
class SupplyLink:
    id: int
    source: int
    target: int
    weight: float
    product: str


@dataclass(frozen=True)
class NetworkSnapshot:
    """Immutable copy of a network state; see :func:`snapshot` and :func:`restore`."""

    labels: tuple
    sectors: tuple
    activities: tuple
    weighted: bool
    ids: np.ndarray
    src: np.ndarray
    tgt: np.ndarray
    units: np.ndarray
    out_strength0_units: np.ndarray
    next_id: int
    version: int = 0
    format_version: int = 1

    def link_multiset(self) -> list[tuple[int, int, int]]:
        return sorted(zip(self.src.tolist(), self.tgt.tolist(), self.units.tolist()))


class ScNetwork:
    """Directed multigraph of firms and weighted supply links.

    Parameters
    ----------
    labels, sectors:
        External id and 3-digit sector code of every firm, indexed by handle.
    links:
        Iterable of ``(source, target, units)`` with weights in internal units
        (see :func:`to_units`), or ``(id, source, target, units)`` 4-tuples to
        keep explicit link ids.
    weighted:
        In unweighted mode every link weighs one unit of output and each
        (source, target) pair occurs at most once.
    out_strength0_units:
        Empirical out-strengths. Defaults to the strengths of ``links``.
    """

    def __init__(
        self,
        labels: Sequence[str],
        sectors: Sequence[str],
        links: Iterable[tuple] = (),
        weighted: bool = True,
        activities: Sequence[str | None] | None = None,
        out_strength0_units: np.ndarray | None = None,
        next_id: int | None = None,
    ):
        if len(labels) != len(sectors):
            raise IntegrityError("labels and sectors differ in length")
        if len(set(labels)) != len(labels):
            raise IntegrityError("duplicate firm label")
        for s in sectors:
            if not s:
                raise IntegrityError("empty sector code")
        self.labels = list(labels)
        self.sectors = list(sectors)
        self.activities = list(activities) if activities is not None else [None] * len(labels)
        self.weighted = bool(weighted)
        self.sector_codes = sorted(set(self.sectors))
        code_index = {c: k for k, c in enumerate(self.sector_codes)}
        self.sector_idx = np.array([code_index[s] for s in self.sectors], dtype=np.int64)
        self._label_index = {lab: i for i, lab in enumerate(self.labels)}

        n = len(self.labels)
        self._links: dict[int, tuple[int, int, int]] = {}
        self._ids: list[int] = []
        self._pos: dict[int, int] = {}
        self._bucket: dict[tuple[int, int], dict[int, None]] = {}
        self._pair: dict[tuple[int, int], list[int]] = {}
        self._out_nb: list[dict[int, int]] = [dict() for _ in range(n)]
        self._in_nb: list[dict[int, int]] = [dict() for _ in range(n)]
        self._sout = np.zeros(n, dtype=np.int64)
        self._sin = np.zeros(n, dtype=np.int64)
        self._next_id = 0
        self.version = 0

        for rec in links:
            if len(rec) == 4:
                lid, s, t, u = rec
            else:
                s, t, u = rec
                lid = None
            self._add_link(int(s), int(t), int(u), lid)
        if next_id is not None:
            self._next_id = max(self._next_id, int(next_id))
        self.version = 0

        if out_strength0_units is None:
            self.out_strength0_units = self._sout.copy()
        else:
            self.out_strength0_units = np.asarray(out_strength0_units, dtype=np.int64).copy()
        self.out_strength0_units.setflags(write=False)
        self._in0_by_product = self.in_strength_by_product()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_links(cls, labels, sectors, links, weighted=True, activities=None):
        """Build from ``(source, target, weight)`` triples with weights in money units."""
        recs = []
        for s, t, *rest in links:
            w = rest[0] if (rest and weighted) else 1.0
            recs.append((s, t, to_units(w)))
        return cls(labels, sectors, recs, weighted=weighted, activities=activities)

    def copy(self) -> "ScNetwork":
        return restore(snapshot(self))

    # -- primitive mutations (used by the rewiring module) ----------------------

    def _add_link(self, s: int, t: int, units: int, lid: int | None = None) -> int:
        n = len(self.labels)
        if not (0 <= s < n and 0 <= t < n):
            raise IntegrityError(f"link endpoint out of range: {s}->{t}")
        if s == t:
            raise IntegrityError(f"self-loop on firm {s}")
        if units <= 0:
            raise IntegrityError(f"non-positive weight on {s}->{t}")
        if not self.weighted:
            if units != WEIGHT_SCALE:
                raise IntegrityError("unweighted links must have unit weight")
            if (s, t) in self._pair:
                raise IntegrityError(f"multi-edge {s}->{t} in unweighted network")
        if lid is None:
            lid = self._next_id
        elif lid in self._links:
            raise IntegrityError(f"link id {lid} already in use")
        self._next_id = max(self._next_id, lid + 1)
        self._links[lid] = (s, t, units)
        self._pos[lid] = len(self._ids)
        self._ids.append(lid)
        key = (int(self.sector_idx[s]), int(self.sector_idx[t]))
        self._bucket.setdefault(key, {})[lid] = None
        self._pair.setdefault((s, t), []).append(lid)
        self._out_nb[s][t] = self._out_nb[s].get(t, 0) + 1
        self._in_nb[t][s] = self._in_nb[t].get(s, 0) + 1
        self._sout[s] += units
        self._sin[t] += units
        self.version += 1
        return lid

    def _remove_link(self, lid: int) -> tuple[int, int, int]:
        try:
            s, t, units = self._links.pop(lid)
        except KeyError:
            raise IntegrityError(f"unknown link id {lid}") from None
        p = self._pos.pop(lid)
        last = self._ids.pop()
        if last != lid:
            self._ids[p] = last
            self._pos[last] = p
        key = (int(self.sector_idx[s]), int(self.sector_idx[t]))
        bucket = self._bucket[key]
        del bucket[lid]
        if not bucket:
            del self._bucket[key]
        plist = self._pair[(s, t)]
        plist.remove(lid)
        if not plist:
            del self._pair[(s, t)]
        for nb, other in ((self._out_nb[s], t), (self._in_nb[t], s)):
            c = nb[other] - 1
            if c:
                nb[other] = c
            else:
                del nb[other]
        self._sout[s] -= units
        self._sin[t] -= units
        self.version += 1
        return s, t, units

    def _set_weight(self, lid: int, units: int) -> int:
        if units <= 0:
            raise IntegrityError("non-positive weight")
        s, t, old = self._links[lid]
        if not self.weighted and units != WEIGHT_SCALE:
            raise IntegrityError("unweighted links must have unit weight")
        self._links[lid] = (s, t, units)
        self._sout[s] += units - old
        self._sin[t] += units - old
        self.version += 1
        return old

    # -- read access -----------------------------------------------------------

    @property
    def n_firms(self) -> int:
        return len(self.labels)

    @property
    def n_links(self) -> int:
        return len(self._links)

    def index_of(self, label: str) -> int:
        return self._label_index[label]

    def firm(self, i: int) -> Firm:
        return Firm(
            id=i,
            label=self.labels[i],
            sector=self.sectors[i],
            out_strength0=self.out_strength0_units[i] / WEIGHT_SCALE,
            in_strength0_by_product=dict(self._in0_by_product[i]),
            activity=self.activities[i],
        )

    def has_link(self, lid: int) -> bool:
        return lid in self._links

    def link(self, lid: int) -> tuple[int, int, int]:
        """``(source, target, units)`` of link ``lid``."""
        return self._links[lid]

    def links(self) -> list[SupplyLink]:
        return [
            SupplyLink(lid, s, t, u / WEIGHT_SCALE, self.sectors[s])
            for lid, (s, t, u) in sorted(self._links.items())
        ]

    def link_ids(self) -> list[int]:
        """Link ids in sampling order (not sorted)."""
        return self._ids

    def arrays(self):
        """``(ids, src, tgt, units)`` as int64 arrays in ascending id order."""
        ids = np.fromiter(sorted(self._links), dtype=np.int64, count=len(self._links))
        recs = [self._links[i] for i in ids.tolist()]
        if recs:
            arr = np.array(recs, dtype=np.int64)
            return ids, arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy()
        empty = np.zeros(0, dtype=np.int64)
        return ids, empty, empty.copy(), empty.copy()

    def link_multiset(self) -> list[tuple[int, int, int]]:
        return sorted(self._links.values())

    def bucket(self, source_sector: int, target_sector: int):
        """Link ids whose endpoints have the given sector indices."""
        return self._bucket.get((source_sector, target_sector), {})

    def pair_links(self, s: int, t: int) -> list[int]:
        return self._pair.get((s, t), [])

    def out_neighbors(self, i: int):
        return self._out_nb[i].keys()

    def in_neighbors(self, i: int):
        return self._in_nb[i].keys()

    def out_degree(self) -> np.ndarray:
        return np.array([sum(nb.values()) for nb in self._out_nb], dtype=np.int64)

    def in_degree(self) -> np.ndarray:
        return np.array([sum(nb.values()) for nb in self._in_nb], dtype=np.int64)

    @property
    def out_strength_units(self) -> np.ndarray:
        return self._sout.copy()

    @property
    def in_strength_units(self) -> np.ndarray:
        return self._sin.copy()

    @property
    def out_strength(self) -> np.ndarray:
        return self._sout / WEIGHT_SCALE

    @property
    def in_strength(self) -> np.ndarray:
        return self._sin / WEIGHT_SCALE

    @property
    def out_strength0(self) -> np.ndarray:
        """Empirical out-strength recorded when the network was built."""
        return self.out_strength0_units / WEIGHT_SCALE

    @property
    def total_units(self) -> int:
        return int(self._sout.sum())

    def in_strength_by_product(self, units: bool = False) -> list[dict[str, float]]:
        """Current per-product input volume of every firm."""
        acc: list[dict[str, int]] = [dict() for _ in range(self.n_firms)]
        for s, t, u in self._links.values():
            k = self.sectors[s]
            acc[t][k] = acc[t].get(k, 0) + u
        if units:
            return acc
        return [{k: v / WEIGHT_SCALE for k, v in d.items()} for d in acc]

    @property
    def in_strength0_by_product(self) -> list[dict[str, float]]:
        return [dict(d) for d in self._in0_by_product]

    def sales_by_buyer_sector(self) -> list[dict[str, int]]:
        """Per firm, units sold into each buyer sector."""
        acc: list[dict[str, int]] = [dict() for _ in range(self.n_firms)]
        for s, t, u in self._links.values():
            k = self.sectors[t]
            acc[s][k] = acc[s].get(k, 0) + u
        return acc

    def check_invariants(self) -> None:
        """Recompute every index from the link table; raise on any mismatch."""
        n = self.n_firms
        sout = np.zeros(n, dtype=np.int64)
        sin = np.zeros(n, dtype=np.int64)
        buckets: dict = {}
        pairs: dict = {}
        for lid, (s, t, u) in self._links.items():
            if s == t:
                raise IntegrityError(f"self-loop on link {lid}")
            if u <= 0:
                raise IntegrityError(f"non-positive weight on link {lid}")
            if not self.weighted and u != WEIGHT_SCALE:
                raise IntegrityError(f"non-unit weight on link {lid}")
            sout[s] += u
            sin[t] += u
            buckets.setdefault((int(self.sector_idx[s]), int(self.sector_idx[t])), set()).add(lid)
            pairs.setdefault((s, t), set()).add(lid)
        if not np.array_equal(sout, self._sout) or not np.array_equal(sin, self._sin):
            raise IntegrityError("strength arrays out of sync with links")
        if {k: set(v) for k, v in self._bucket.items()} != buckets:
            raise IntegrityError("sector-pair index out of sync")
        if {k: set(v) for k, v in self._pair.items()} != pairs:
            raise IntegrityError("pair index out of sync")
        if not self.weighted and any(len(v) > 1 for v in pairs.values()):
            raise IntegrityError("multi-edge in unweighted network")
        if sorted(self._ids) != sorted(self._links) or any(self._ids[p] != lid for lid, p in self._pos.items()):
            raise IntegrityError("sampling list out of sync")
        out_c: list[dict[int, int]] = [dict() for _ in range(n)]
        in_c: list[dict[int, int]] = [dict() for _ in range(n)]
        for (s, t), v in pairs.items():
            out_c[s][t] = len(v)
            in_c[t][s] = len(v)
        for i in range(n):
            if out_c[i] != self._out_nb[i] or in_c[i] != self._in_nb[i]:
                raise IntegrityError(f"adjacency of firm {i} out of sync")

    def __repr__(self) -> str:
        mode = "weighted" if self.weighted else "unweighted"
        return f"ScNetwork(firms={self.n_firms}, links={self.n_links}, {mode})"


def snapshot(net: ScNetwork) -> NetworkSnapshot:
    ids, src, tgt, units = net.arrays()
    for a in (ids, src, tgt, units):
        a.setflags(write=False)
    return NetworkSnapshot(
        labels=tuple(net.labels),
        sectors=tuple(net.sectors),
        activities=tuple(net.activities),
        weighted=net.weighted,
        ids=ids,
        src=src,
        tgt=tgt,
        units=units,
        out_strength0_units=np.array(net.out_strength0_units),
        next_id=net._next_id,
        version=net.version,
    )


def restore(snap: NetworkSnapshot) -> ScNetwork:
    links = zip(snap.ids.tolist(), snap.src.tolist(), snap.tgt.tolist(), snap.units.tolist())
    net = ScNetwork(
        snap.labels,
        snap.sectors,
        links,
        weighted=snap.weighted,
        activities=snap.activities,
        out_strength0_units=snap.out_strength0_units,
        next_id=snap.next_id,
    )
    return net


def induced_subgraph(net: ScNetwork, firms: Iterable[int]) -> ScNetwork:
    """Subnetwork on ``firms`` with every link among them; empirical strengths recomputed."""
    keep = sorted(set(int(f) for f in firms))
    remap = {old: new for new, old in enumerate(keep)}
    links = [
        (remap[s], remap[t], u)
        for _, (s, t, u) in sorted(net._links.items())
        if s in remap and t in remap
    ]
    return ScNetwork(
        [net.labels[i] for i in keep],
        [net.sectors[i] for i in keep],
        links,
        weighted=net.weighted,
        activities=[net.activities[i] for i in keep],
    )
