"""Shock cascades and the economic systemic risk index (ESRI).

A firm failure propagates synchronously. Every step each firm's production
level ``h_i`` becomes the minimum of its previous level, the level its inputs
still allow (downstream) and the share of its sales still demanded (upstream):

    f_ik   = sum_{j supplies k to i} W_ji * (1 - m_j * (1 - h_j)) / Pi_ik
    h_down = GLPF_i(f_i* Pi_i*) / x0_i
    h_up   = sum_{j customer of i} W_ij * h_j / s_i^out
    h_i   <- min(h_i, h_down, h_up)

``m_j`` is the supplier's market share: lost supply from a small producer is
mostly replaced, from a sole producer not at all. ESRI of the shocked firm is
the output-weighted production loss once the iteration settles.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from . import _kernels
from .errors import IntegrityError
from .network import ScNetwork
from .production import ProductionModel

WORKERS_ENV = "SCRISK_WORKERS"


@dataclass(frozen=True)
class CascadeConfig:
    tol: float = 1e-6
    t_max: int = 1000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")


@dataclass
class CascadeState:
    h: np.ndarray
    t: int
    converged: bool
    trace: np.ndarray | None = None


@dataclass
class RiskProfile:
    esri: np.ndarray
    labels: list
    iterations: np.ndarray
    converged: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.esri)) if len(self.esri) else 0.0

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    def order(self) -> np.ndarray:
        """Firm indices by descending ESRI, ties by index."""
        return np.lexsort((np.arange(len(self.esri)), -self.esri))

    def ranks(self) -> np.ndarray:
        r = np.empty(len(self.esri), dtype=np.int64)
        r[self.order()] = np.arange(1, len(self.esri) + 1)
        return r

    def top(self, k: int = 10) -> list[tuple[str, float]]:
        return [(self.labels[i], float(self.esri[i])) for i in self.order()[:k]]

    def to_csv(self, path) -> None:
        ranks = self.ranks()
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["firm", "esri", "rank"])
            for i in range(len(self.esri)):
                w.writerow([self.labels[i], repr(float(self.esri[i])), int(ranks[i])])

    @classmethod
    def read_csv(cls, path) -> "RiskProfile":
        labels, values = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                labels.append(row["firm"])
                values.append(float(row["esri"]))
        n = len(values)
        return cls(np.array(values), labels, np.zeros(n, dtype=np.int64), np.ones(n, dtype=bool))

    def summary(self, top_k: int = 10) -> dict:
        return {
            "mean_esri": self.mean,
            "n_firms": len(self.esri),
            "top": [{"firm": f, "esri": v} for f, v in self.top(top_k)],
            "all_converged": self.all_converged,
            "not_converged": [self.labels[i] for i in np.flatnonzero(~self.converged)],
            "max_iterations": int(self.iterations.max()) if len(self.iterations) else 0,
        }

    def write_summary(self, path, top_k: int = 10) -> None:
        Path(path).write_text(json.dumps(self.summary(top_k), indent=2) + "\n", encoding="utf-8")


def market_shares(net: ScNetwork, model: ProductionModel | None = None, current: bool = False) -> np.ndarray:
    """Each firm's share of its product's total output.

    Empirical out-strengths are used unless ``current`` is set. Products
    nobody sells get share 0 (nothing to lose). In unweighted networks
    strengths are degrees, so shares are degree-based.
    """
    units = net.out_strength_units if current else net.out_strength0_units
    strength = units.astype(np.float64)
    totals = np.bincount(net.sector_idx, weights=strength, minlength=len(net.sector_codes))
    tot = totals[net.sector_idx]
    return np.divide(strength, tot, out=np.zeros_like(strength), where=tot > 0)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return numba.config.NUMBA_NUM_THREADS


class CascadeEngine:
    """Evaluates cascades for one calibrated model against any rewiring of its network.

    The model and market shares are fixed at construction; each call takes the
    current link set from ``net``.
    """

    def __init__(self, model: ProductionModel, shares: np.ndarray, cfg: CascadeConfig | None = None,
                 workers: int | None = None):
        self.model = model
        self.shares = np.ascontiguousarray(shares, dtype=np.float64)
        self.cfg = cfg or CascadeConfig()
        self.workers = default_workers() if workers is None else max(1, int(workers))
        self.weights = model.esri_weights

    def _link_arrays(self, net: ScNetwork) -> tuple:
        if net.n_firms != self.model.n_firms or net.sector_codes != self.model.sector_codes:
            raise IntegrityError("network does not match the calibrated model")
        m = self.model
        n = net.n_firms
        _, src, tgt, units = net.arrays()
        w = units.astype(np.float64)
        lslot = m.slot_of(tgt, net.sector_idx[src])
        sout = np.bincount(src, weights=w, minlength=n).astype(np.float64)
        return (n, src, tgt, w, lslot, self.shares, m.slot_ptr, m.slot_pi, m.slot_ess,
                m.gamma_eff, sout)

    def run(self, net: ScNetwork, shocked: int, trace: bool = False) -> CascadeState:
        if not 0 <= shocked < net.n_firms:
            raise IndexError(f"no firm {shocked}")
        args = self._link_arrays(net)
        n = net.n_firms
        h = np.empty(n)
        tr = np.empty((self.cfg.t_max + 1, n)) if trace else np.empty((0, 0))
        t, delta = _kernels.cascade_one(shocked, *args, h, tr, self.cfg.tol, self.cfg.t_max)
        return CascadeState(h=h, t=int(t), converged=bool(delta < self.cfg.tol),
                            trace=tr[: t + 1].copy() if trace else None)

    def esri(self, net: ScNetwork, firm: int) -> float:
        state = self.run(net, firm)
        return float(np.dot(self.weights, 1.0 - state.h))

    def profile(self, net: ScNetwork) -> RiskProfile:
        n = net.n_firms
        esri = np.empty(n)
        iters = np.empty(n, dtype=np.int64)
        last = np.empty(n)
        args = self._link_arrays(net) + (self.weights, self.cfg.tol, self.cfg.t_max, esri, iters, last)
        if self.workers > 1 and n > 1:
            prev = numba.get_num_threads()
            numba.set_num_threads(min(self.workers, numba.config.NUMBA_NUM_THREADS))
            try:
                _kernels.profile_parallel(*args)
            finally:
                numba.set_num_threads(prev)
        else:
            _kernels.profile_serial(*args)
        return RiskProfile(esri=esri, labels=list(net.labels), iterations=iters,
                           converged=last < self.cfg.tol)

    def mean_esri(self, net: ScNetwork) -> float:
        return self.profile(net).mean


def run_cascade(net, model, shares, shocked, cfg=None, trace=False) -> CascadeState:
    """Propagate the failure of ``shocked`` and return final production levels."""
    return CascadeEngine(model, shares, cfg, workers=1).run(net, shocked, trace=trace)


def esri(net, model, shares, firm, cfg=None) -> float:
    return CascadeEngine(model, shares, cfg, workers=1).esri(net, firm)


def risk_profile(net, model, cfg=None, shares=None, workers=None) -> RiskProfile:
    """ESRI of every firm, evaluated independently per shock origin."""
    if shares is None:
        shares = market_shares(net, model)
    return CascadeEngine(model, shares, cfg, workers).profile(net)
