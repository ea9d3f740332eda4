"""Constraint-preserving two-link swaps.

Two links ``i->j`` and ``k->l`` with the same (source sector, target sector)
exchange suppliers. If their weights differ by at most ``epsilon`` the whole
links swap (``k->j`` carries ``w1``, ``i->l`` carries ``w2``), which keeps
in-strengths exact and shifts the suppliers' out-strengths by the residue;
the move is refused if a supplier would leave its band around the empirical
out-strength. Otherwise only the lighter weight is exchanged: the heavier
link shrinks and two cross links appear, keeping all four strengths exact.

Every move is recorded as an edit script of primitive operations so it can
be applied, reverted and replayed exactly.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ExhaustionError, IntegrityError
from .network import ScNetwork, to_units


class SwapKind(enum.Enum):
    FULL = "full"
    PARTIAL = "partial"


@dataclass(frozen=True)
class SwapConstraints:
    epsilon: float = 3000.0
    out_strength_band: float = 0.20
    resample_budget: int | None = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if not 0 <= self.out_strength_band < 1:
            raise ValueError("out_strength_band must lie in [0, 1)")

    def budget(self, net: ScNetwork) -> int:
        return self.resample_budget if self.resample_budget is not None else 10 * net.n_links


@dataclass
class SwapProposal:
    link1: int
    link2: int
    kind: SwapKind
    swap_amount: int
    ops: list
    base_version: int
    base_next_id: int
    applied_version: int | None = None

    @property
    def created_links(self) -> list[int]:
        return [op[1] for op in self.ops if op[0] == "add"]

    @property
    def removed_links(self) -> list[int]:
        return [op[1] for op in self.ops if op[0] == "remove"]

    @property
    def weight_deltas(self) -> dict[int, int]:
        return {op[1]: op[3] - op[2] for op in self.ops if op[0] == "reweight"}

    def to_json(self) -> dict:
        return {
            "link1": self.link1,
            "link2": self.link2,
            "kind": self.kind.value,
            "swap_amount": self.swap_amount,
            "ops": [list(op) for op in self.ops],
        }

    @classmethod
    def from_json(cls, d: dict, net: ScNetwork) -> "SwapProposal":
        return cls(
            link1=d["link1"],
            link2=d["link2"],
            kind=SwapKind(d["kind"]),
            swap_amount=d["swap_amount"],
            ops=[tuple(op) for op in d["ops"]],
            base_version=net.version,
            base_next_id=net._next_id,
        )


class _EditScript:
    """Builds primitive operations against an overlay of the current network."""

    def __init__(self, net: ScNetwork):
        self.net = net
        self.ops: list[tuple] = []
        self.weight: dict[int, int | None] = {}
        self.new_pairs: dict[tuple[int, int], int] = {}
        self.next_id = net._next_id

    def _w(self, lid):
        return self.weight[lid] if lid in self.weight else self.net.link(lid)[2]

    def remove(self, lid):
        s, t, _ = self.net.link(lid)
        self.ops.append(("remove", lid, s, t, self._w(lid)))
        self.weight[lid] = None

    def reweight(self, lid, units):
        self.ops.append(("reweight", lid, self._w(lid), units))
        self.weight[lid] = units

    def add(self, s, t, units):
        if self.net.weighted:
            live = [x for x in self.net.pair_links(s, t) if self.weight.get(x, 0) is not None]
            if (s, t) in self.new_pairs:
                live.append(self.new_pairs[(s, t)])
            if live:
                target = min(live)
                self.reweight(target, self._w(target) + units)
                return
        lid = self.next_id
        self.next_id += 1
        self.ops.append(("add", lid, s, t, units))
        self.weight[lid] = units
        self.new_pairs[(s, t)] = lid


def _eligible(net: ScNetwork, l1: int) -> list[int]:
    i, j, _ = net.link(l1)
    bucket = net.bucket(int(net.sector_idx[i]), int(net.sector_idx[j]))
    if len(bucket) < 2:
        return []
    link = net.link
    if net.weighted:
        out = []
        for l2 in bucket:
            s, t, _ = link(l2)
            if l2 != l1 and s != j and t != i:
                out.append(l2)
        return out
    in_j = net.in_neighbors(j)
    out_i = net.out_neighbors(i)
    out = []
    for l2 in bucket:
        s, t, _ = link(l2)
        if s != j and t != i and s not in in_j and t not in out_i:
            out.append(l2)
    return out


def find_two_links(net: ScNetwork, rng: np.random.Generator, budget: int | None = None) -> tuple[int, int]:
    """Sample a first link uniformly, then a uniform eligible partner.

    The partner shares the first link's sector pair; its source may not be the
    first link's target and its target may not be the first link's source. In
    unweighted networks sources already supplying the first target and targets
    already served by the first source are excluded too (no multi-edges, no
    trivial swaps). An empty candidate set triggers a fresh first link.
    """
    ids = net.link_ids()
    n_links = len(ids)
    if n_links < 2:
        raise ExhaustionError("need at least two links")
    budget = 10 * n_links if budget is None else budget
    for _ in range(budget):
        l1 = ids[int(rng.integers(n_links))]
        cand = _eligible(net, l1)
        if cand:
            return l1, cand[int(rng.integers(len(cand)))]
    raise ExhaustionError(f"no eligible link pair after {budget} attempts")


def _in_band(net: ScNetwork, firm: int, new_units: int, band: float) -> bool:
    ref = int(net.out_strength0_units[firm])
    return (1.0 - band) * ref <= new_units <= (1.0 + band) * ref


def propose_swap(net: ScNetwork, link1: int, link2: int,
                 constraints: SwapConstraints = SwapConstraints()) -> SwapProposal | None:
    """Edit script for swapping the two links, or ``None`` if the band forbids it."""
    i, j, w1 = net.link(link1)
    k, l, w2 = net.link(link2)
    ed = _EditScript(net)
    eps = to_units(constraints.epsilon)
    if not net.weighted or abs(w1 - w2) <= eps:
        if i != k and w1 != w2:
            sout = net._sout
            if not (_in_band(net, i, int(sout[i]) - w1 + w2, constraints.out_strength_band)
                    and _in_band(net, k, int(sout[k]) - w2 + w1, constraints.out_strength_band)):
                return None
        ed.remove(link1)
        ed.remove(link2)
        ed.add(k, j, w1)
        ed.add(i, l, w2)
        kind, amount = SwapKind.FULL, min(w1, w2)
    else:
        small = min(w1, w2)
        if w1 > w2:
            ed.reweight(link1, w1 - w2)
            ed.remove(link2)
        else:
            ed.reweight(link2, w2 - w1)
            ed.remove(link1)
        ed.add(k, j, small)
        ed.add(i, l, small)
        kind, amount = SwapKind.PARTIAL, small
    return SwapProposal(link1, link2, kind, amount, ed.ops, net.version, net._next_id)


def _run_ops(net: ScNetwork, ops) -> None:
    for op in ops:
        tag, lid = op[0], op[1]
        if tag == "remove":
            if not net.has_link(lid) or net.link(lid) != tuple(op[2:5]):
                raise IntegrityError(f"stale edit: link {lid} is not {tuple(op[2:5])}")
            net._remove_link(lid)
        elif tag == "add":
            if net.has_link(lid):
                raise IntegrityError(f"stale edit: link id {lid} already exists")
            net._add_link(op[2], op[3], op[4], lid)
        elif tag == "reweight":
            if not net.has_link(lid) or net.link(lid)[2] != op[2]:
                raise IntegrityError(f"stale edit: link {lid} weight changed")
            net._set_weight(lid, op[3])
        else:
            raise IntegrityError(f"unknown edit op {tag!r}")


def _inverse(op):
    tag = op[0]
    if tag == "remove":
        return ("add",) + tuple(op[1:])
    if tag == "add":
        return ("remove",) + tuple(op[1:])
    return ("reweight", op[1], op[3], op[2])


def apply(net: ScNetwork, proposal: SwapProposal) -> None:
    if proposal.applied_version is not None:
        raise IntegrityError("proposal already applied")
    if net.version != proposal.base_version:
        raise IntegrityError("stale proposal: network changed since it was proposed")
    _run_ops(net, proposal.ops)
    proposal.applied_version = net.version


def revert(net: ScNetwork, proposal: SwapProposal) -> None:
    if proposal.applied_version is None or net.version != proposal.applied_version:
        raise IntegrityError("proposal is not the last change applied to this network")
    _run_ops(net, [_inverse(op) for op in reversed(proposal.ops)])
    net._next_id = proposal.base_next_id
    proposal.applied_version = None
    proposal.base_version = net.version


def replay(net: ScNetwork, moves) -> None:
    """Apply serialized moves (``SwapProposal.to_json`` dicts) in order."""
    for d in moves:
        _run_ops(net, [tuple(op) for op in d["ops"]])


def sample_swap(net: ScNetwork, rng: np.random.Generator,
                constraints: SwapConstraints = SwapConstraints()) -> tuple[SwapProposal, int]:
    """Draw pairs until one yields an admissible swap.

    Returns the proposal and the number of band rejections along the way.
    """
    budget = constraints.budget(net)
    rejected = 0
    while rejected <= budget:
        l1, l2 = find_two_links(net, rng, budget)
        prop = propose_swap(net, l1, l2, constraints)
        if prop is not None:
            return prop, rejected
        rejected += 1
    raise ExhaustionError(f"every sampled pair violated the out-strength band ({rejected} tries)")


@dataclass(frozen=True)
class InvariantReference:
    """Quantities every admissible sequence of swaps must leave untouched."""

    in_by_product: tuple
    total_units: int
    out_degree: np.ndarray | None
    in_degree: np.ndarray | None
    sales_by_sector: tuple | None


def invariant_reference(net: ScNetwork, exact_sales: bool | None = None) -> InvariantReference:
    """Capture the reference state.

    Per-firm sales into each buyer sector are exactly invariant only when every
    full swap exchanges equal weights (always in unweighted networks, and in
    weighted ones when ``epsilon`` is 0); pass ``exact_sales`` to force the check.
    """
    if exact_sales is None:
        exact_sales = not net.weighted
    return InvariantReference(
        in_by_product=tuple(net.in_strength_by_product(units=True)),
        total_units=net.total_units,
        out_degree=None if net.weighted else net.out_degree(),
        in_degree=None if net.weighted else net.in_degree(),
        sales_by_sector=tuple(net.sales_by_buyer_sector()) if exact_sales else None,
    )


def check_swap_invariants(net: ScNetwork, ref: InvariantReference,
                          band: float = SwapConstraints.out_strength_band) -> None:
    """Full recomputation from the link table; raises ``IntegrityError`` on any violation."""
    net.check_invariants()
    if tuple(net.in_strength_by_product(units=True)) != ref.in_by_product:
        raise IntegrityError("per-product in-strength changed")
    if net.total_units != ref.total_units:
        raise IntegrityError("total weight changed")
    sout = net.out_strength_units
    out0 = net.out_strength0_units
    if np.any(sout < (1.0 - band) * out0) or np.any(sout > (1.0 + band) * out0):
        raise IntegrityError("out-strength left its band")
    if ref.out_degree is not None:
        if not (np.array_equal(net.out_degree(), ref.out_degree) and np.array_equal(net.in_degree(), ref.in_degree)):
            raise IntegrityError("degrees changed in unweighted network")
    if ref.sales_by_sector is not None and tuple(net.sales_by_buyer_sector()) != ref.sales_by_sector:
        raise IntegrityError("sales per buyer sector changed")
