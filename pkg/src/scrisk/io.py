"""Edge-list and snapshot files.

Edge lists are UTF-8 CSV with header ``source,target,source_nace3,target_nace3,weight``
(the weight column is absent for unweighted files). Optional columns
``source_nace4,target_nace4`` carry the 4-digit activity class used by
seed-based extraction.
"""
from __future__ import annotations

import csv
import json
from decimal import Decimal, InvalidOperation, ROUND_HALF_EVEN
from pathlib import Path

import numpy as np

from .errors import IntegrityError, ParseError
from .network import WEIGHT_SCALE, NetworkSnapshot, ScNetwork

REQUIRED = ("source", "target", "source_nace3", "target_nace3")
DEFAULT_MIN_WEIGHT = 3000


def _parse_mode(mode) -> bool:
    if isinstance(mode, bool):
        return mode
    if mode not in ("weighted", "unweighted"):
        raise ValueError(f"mode must be 'weighted' or 'unweighted', got {mode!r}")
    return mode == "weighted"


def load_edge_list(path, mode="weighted", min_weight=DEFAULT_MIN_WEIGHT) -> ScNetwork:
    """Read an edge list into a network.

    Links lighter than ``min_weight`` and self-loops are dropped; firms are
    kept only if they touch a surviving link. In weighted mode repeated
    (source, target) rows stay separate links; in unweighted mode they collapse.
    """
    weighted = _parse_mode(mode)
    min_w = Decimal(str(min_weight)) if min_weight is not None else None
    sector: dict[str, str] = {}
    activity: dict[str, str | None] = {}
    rows: list[tuple[str, str, int]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        missing = [c for c in REQUIRED if c not in header]
        if missing:
            raise ParseError(f"missing columns {missing}", line=1)
        col = {name: k for k, name in enumerate(header)}
        has_weight = "weight" in col
        if weighted and not has_weight:
            raise ParseError("weighted mode requires a 'weight' column", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            src, tgt = row[col["source"]].strip(), row[col["target"]].strip()
            s3, t3 = row[col["source_nace3"]].strip(), row[col["target_nace3"]].strip()
            if not src or not tgt or not s3 or not t3:
                raise ParseError("empty id or sector field", line=lineno)
            for firm, code, c4 in ((src, s3, "source_nace4"), (tgt, t3, "target_nace4")):
                prev = sector.setdefault(firm, code)
                if prev != code:
                    raise IntegrityError(f"line {lineno}: firm {firm!r} has sectors {prev!r} and {code!r}")
                if c4 in col:
                    a = row[col[c4]].strip() or None
                    prev_a = activity.setdefault(firm, a)
                    if prev_a != a:
                        raise IntegrityError(f"line {lineno}: firm {firm!r} has classes {prev_a!r} and {a!r}")
            units = WEIGHT_SCALE
            if has_weight:
                try:
                    w = Decimal(row[col["weight"]].strip())
                except InvalidOperation:
                    raise ParseError(f"bad weight {row[col['weight']]!r}", line=lineno) from None
                if not w.is_finite() or w <= 0:
                    raise ParseError(f"weight must be positive, got {w}", line=lineno)
                if min_w is not None and w < min_w:
                    continue
                if weighted:
                    units = int((w * WEIGHT_SCALE).to_integral_value(rounding=ROUND_HALF_EVEN))
            if src == tgt:
                continue
            rows.append((src, tgt, units))

    index: dict[str, int] = {}
    for src, tgt, _ in rows:
        for f in (src, tgt):
            if f not in index:
                index[f] = len(index)
    labels = list(index)
    links = []
    seen = set()
    for src, tgt, units in rows:
        s, t = index[src], index[tgt]
        if not weighted:
            if (s, t) in seen:
                continue
            seen.add((s, t))
        links.append((s, t, units))
    return ScNetwork(
        labels,
        [sector[f] for f in labels],
        links,
        weighted=weighted,
        activities=[activity.get(f) for f in labels],
    )


def format_units(units: int) -> str:
    """Fixed two-decimal rendering of an internal weight."""
    return f"{units // WEIGHT_SCALE}.{units % WEIGHT_SCALE:02d}"


def write_edge_list(net: ScNetwork, path) -> None:
    with_class = any(a is not None for a in net.activities)
    header = list(REQUIRED)
    if with_class:
        header += ["source_nace4", "target_nace4"]
    if net.weighted:
        header.append("weight")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        _, src, tgt, units = net.arrays()
        for s, t, u in zip(src.tolist(), tgt.tolist(), units.tolist()):
            row = [net.labels[s], net.labels[t], net.sectors[s], net.sectors[t]]
            if with_class:
                row += [net.activities[s] or "", net.activities[t] or ""]
            if net.weighted:
                row.append(format_units(u))
            w.writerow(row)


def save_snapshot(snap: NetworkSnapshot, path) -> None:
    """Write a snapshot as ``.npz`` with a JSON metadata block; round-trips exactly."""
    meta = {
        "format_version": snap.format_version,
        "labels": list(snap.labels),
        "sectors": list(snap.sectors),
        "activities": list(snap.activities),
        "weighted": snap.weighted,
        "next_id": snap.next_id,
        "version": snap.version,
    }
    with open(path, "wb") as fh:
        np.savez(
            fh,
            meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
            ids=snap.ids,
            src=snap.src,
            tgt=snap.tgt,
            units=snap.units,
            out0=snap.out_strength0_units,
        )


def load_snapshot(path) -> NetworkSnapshot:
    with np.load(path) as z:
        meta = json.loads(z["meta"].tobytes().decode("utf-8"))
        if meta["format_version"] != 1:
            raise ParseError(f"unsupported snapshot version {meta['format_version']}")
        arrays = {k: z[k].copy() for k in ("ids", "src", "tgt", "units", "out0")}
    for a in arrays.values():
        a.setflags(write=False)
    return NetworkSnapshot(
        labels=tuple(meta["labels"]),
        sectors=tuple(meta["sectors"]),
        activities=tuple(meta["activities"]),
        weighted=meta["weighted"],
        ids=arrays["ids"],
        src=arrays["src"],
        tgt=arrays["tgt"],
        units=arrays["units"],
        out_strength0_units=arrays["out0"],
        next_id=meta["next_id"],
        version=meta["version"],
    )
