"""Input essentiality and the generalized Leontief production function.

Each firm produces

    x = min( min_{k essential} delivered_k / alpha_k,
             beta_bar + (1/alpha_ne) * sum_{k non-essential} delivered_k,
             x0 )

with parameters calibrated so that the observed inputs yield exactly the
observed output ``x0``. Labor and capital are treated as never binding.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ParseError
from .network import ScNetwork, nace2


class Essentiality(enum.Enum):
    ESSENTIAL = "E"
    NON_ESSENTIAL = "N"
    IRRELEVANT = "I"


@dataclass
class EssentialityMatrix:
    """Lookup ``(supplier nace2, buyer nace2) -> Essentiality`` with a fallback."""

    table: dict = field(default_factory=dict)
    default: Essentiality = Essentiality.ESSENTIAL

    def lookup(self, supplier: str, buyer: str) -> Essentiality:
        return self.table.get((supplier[:2], buyer[:2]), self.default)

    def __len__(self):
        return len(self.table)

    @classmethod
    def read_csv(cls, path, default: Essentiality | str = Essentiality.ESSENTIAL) -> "EssentialityMatrix":
        default = Essentiality(default) if isinstance(default, str) else default
        table = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader, [])]
            if header[:3] != ["supplier_nace2", "buyer_nace2", "class"]:
                raise ParseError("expected header supplier_nace2,buyer_nace2,class", line=1)
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) < 3:
                    raise ParseError("expected 3 fields", line=lineno)
                sup, buy, cls_ = (c.strip() for c in row[:3])
                if len(sup) != 2 or len(buy) != 2:
                    raise ParseError("nace2 codes must have two digits", line=lineno)
                try:
                    table[(sup, buy)] = Essentiality(cls_)
                except ValueError:
                    raise ParseError(f"class must be E, N or I, got {cls_!r}", line=lineno) from None
        return cls(table, default)

    def write_csv(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["supplier_nace2", "buyer_nace2", "class"])
            for (sup, buy), v in sorted(self.table.items()):
                w.writerow([sup, buy, v.value])


@dataclass(frozen=True)
class GlpfParams:
    """Calibrated production function of one firm (amounts in money units)."""

    alpha_es: Mapping[str, float]
    alpha_ne: float
    beta_bar: float
    ess_inputs: frozenset
    ne_inputs: frozenset
    x0: float
    sink: bool = False


def evaluate_glpf(params: GlpfParams, delivered: Mapping[str, float]) -> float:
    """Output level for the given delivered input amounts, clamped to ``[0, x0]``."""
    out = params.x0
    for k in params.ess_inputs:
        out = min(out, delivered.get(k, 0.0) / params.alpha_es[k])
    if params.ne_inputs and math.isfinite(params.alpha_ne):
        linear = params.beta_bar + sum(delivered.get(k, 0.0) for k in params.ne_inputs) / params.alpha_ne
        out = min(out, linear)
    return min(max(out, 0.0), params.x0)


def classify_inputs(net: ScNetwork, ess: EssentialityMatrix, firm: int) -> tuple[set, set]:
    """Split a firm's empirical input products into essential and non-essential sets.

    Irrelevant products are dropped and never constrain output.
    """
    buyer = nace2(net.sectors[firm])
    es, ne = set(), set()
    for k in net.in_strength0_by_product[firm]:
        c = ess.lookup(nace2(k), buyer)
        if c is Essentiality.ESSENTIAL:
            es.add(k)
        elif c is Essentiality.NON_ESSENTIAL:
            ne.add(k)
    return es, ne


@dataclass
class ProductionModel:
    params: list
    gamma_ne: float
    sector_codes: list
    x0: np.ndarray
    sink: np.ndarray
    # flattened (firm, product) input slots, grouped by firm
    slot_ptr: np.ndarray
    slot_prod: np.ndarray
    slot_pi: np.ndarray
    slot_ess: np.ndarray
    slot_key: np.ndarray
    gamma_eff: np.ndarray

    @property
    def n_firms(self) -> int:
        return len(self.params)

    @property
    def esri_weights(self) -> np.ndarray:
        """Normalized output weights; sinks count zero, uniform if all firms are sinks."""
        w = np.where(self.sink, 0.0, self.x0)
        tot = w.sum()
        if tot <= 0:
            return np.full(len(w), 1.0 / len(w)) if len(w) else w
        return w / tot

    def slot_of(self, firms: np.ndarray, products: np.ndarray) -> np.ndarray:
        """Slot index for each (firm, product) pair, -1 where the input is irrelevant/absent."""
        keys = firms * len(self.sector_codes) + products
        pos = np.searchsorted(self.slot_key, keys)
        pos = np.minimum(pos, max(len(self.slot_key) - 1, 0))
        if len(self.slot_key) == 0:
            return np.full(len(keys), -1, dtype=np.int64)
        hit = self.slot_key[pos] == keys
        return np.where(hit, pos, -1).astype(np.int64)


def calibrate(net: ScNetwork, ess: EssentialityMatrix, gamma_ne: float = 0.5) -> ProductionModel:
    """Fit every firm's production function to its empirical inputs and output.

    ``gamma_ne`` is the largest fractional output loss caused by losing all
    non-essential inputs. Firms with zero empirical output get ``x0 = 1`` and
    are flagged as sinks.
    """
    if not 0.0 <= gamma_ne <= 1.0:
        raise ValueError("gamma_ne must lie in [0, 1]")
    n = net.n_firms
    codes = net.sector_codes
    code_idx = {c: k for k, c in enumerate(codes)}
    pi_units = net.in_strength_by_product(units=True)
    empirical = net.in_strength0_by_product
    params = []
    x0 = np.empty(n)
    sink = np.zeros(n, dtype=bool)
    slot_ptr = [0]
    slot_prod, slot_pi, slot_ess = [], [], []
    gamma_eff = np.zeros(n)
    for i in range(n):
        out0 = float(net.out_strength0[i])
        if out0 <= 0:
            out0, sink[i] = 1.0, True
        x0[i] = out0
        es, ne = classify_inputs(net, ess, i)
        pi = empirical[i]
        alpha_es = {k: pi[k] / out0 for k in es}
        ne_total = sum(pi[k] for k in ne)
        if ne and gamma_ne > 0:
            beta_bar = out0 * (1.0 - gamma_ne)
            alpha_ne = ne_total / (gamma_ne * out0)
            gamma_eff[i] = gamma_ne
        else:
            beta_bar, alpha_ne = out0, math.inf
        params.append(GlpfParams(alpha_es, alpha_ne, beta_bar, frozenset(es), frozenset(ne), out0, bool(sink[i])))
        for k in sorted(es | ne, key=code_idx.__getitem__):
            slot_prod.append(code_idx[k])
            slot_pi.append(float(pi_units[i][k]))
            slot_ess.append(k in es)
        slot_ptr.append(len(slot_prod))
    slot_ptr = np.asarray(slot_ptr, dtype=np.int64)
    slot_prod = np.asarray(slot_prod, dtype=np.int64)
    firm_of_slot = np.repeat(np.arange(n, dtype=np.int64), np.diff(slot_ptr))
    return ProductionModel(
        params=params,
        gamma_ne=gamma_ne,
        sector_codes=list(codes),
        x0=x0,
        sink=sink,
        slot_ptr=slot_ptr,
        slot_prod=slot_prod,
        slot_pi=np.asarray(slot_pi, dtype=np.float64),
        slot_ess=np.asarray(slot_ess, dtype=np.bool_),
        slot_key=firm_of_slot * len(codes) + slot_prod,
        gamma_eff=gamma_eff,
    )


__all__ = [
    "Essentiality",
    "EssentialityMatrix",
    "GlpfParams",
    "ProductionModel",
    "calibrate",
    "classify_inputs",
    "evaluate_glpf",
]
