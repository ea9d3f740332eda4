"""Metropolis-Hastings search over rewired networks minimizing mean ESRI."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from . import rewiring
from .cascade import CascadeConfig, CascadeEngine, RiskProfile, market_shares
from .errors import ConfigError, IntegrityError
from .io import write_edge_list
from .network import NetworkSnapshot, ScNetwork, snapshot
from .rewiring import SwapConstraints, SwapProposal

TRAJECTORY_COLUMNS = ("step", "beta", "mean_esri", "accepted", "kind", "link_count")


@dataclass(frozen=True)
class FixedBeta:
    beta: float

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError("beta must be non-negative")

    def __call__(self, step: int) -> float:
        return float(self.beta)

    def describe(self) -> str:
        return f"fixed:{self.beta:g}"


@dataclass(frozen=True)
class LinearBeta:
    """Annealing curve ``beta(step) = beta_max * step / total_steps``."""

    beta_max: float
    total_steps: int

    def __post_init__(self):
        if self.beta_max < 0 or self.total_steps < 1:
            raise ConfigError("linear schedule needs beta_max >= 0 and total_steps >= 1")

    def __call__(self, step: int) -> float:
        return self.beta_max * step / self.total_steps

    def describe(self) -> str:
        return f"linear:{self.beta_max:g}:{self.total_steps}"


Schedule = Union[FixedBeta, LinearBeta]


def parse_schedule(text: str) -> Schedule:
    """``"0"``, ``"fixed:<beta>"`` or ``"linear:<beta_max>:<steps>"``."""
    parts = str(text).strip().split(":")
    try:
        if len(parts) == 1:
            return FixedBeta(float(parts[0]))
        if parts[0] == "fixed" and len(parts) == 2:
            return FixedBeta(float(parts[1]))
        if parts[0] == "linear" and len(parts) == 3:
            return LinearBeta(float(parts[1]), int(parts[2]))
    except ValueError:
        pass
    raise ConfigError(f"cannot parse beta schedule {text!r}")


@dataclass
class RunConfig:
    steps: int
    schedule: Schedule = field(default_factory=lambda: FixedBeta(0.0))
    constraints: SwapConstraints = field(default_factory=SwapConstraints)
    cascade: CascadeConfig = field(default_factory=CascadeConfig)
    seed: int = 0
    record_every: int = 1
    snapshot_every: int = 0
    recompute_shares: bool = False

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("steps must be non-negative")
        if self.record_every < 1 or self.snapshot_every < 0:
            raise ConfigError("record_every must be >= 1 and snapshot_every >= 0")


@dataclass
class TrajectoryRecord:
    step: int
    beta: float
    mean_esri: float
    accepted: bool
    kind: str
    link_count: int
    proposed_mean: float = float("nan")
    band_rejections: int = 0
    converged: bool = True

    def row(self) -> list:
        return [self.step, repr(float(self.beta)), repr(float(self.mean_esri)),
                int(self.accepted), self.kind, self.link_count]


def acceptance_probability(delta: float, beta: float) -> float:
    """``min(1, exp(-beta * delta))``."""
    x = beta * delta
    return 1.0 if x <= 0 else math.exp(-x)


def metropolis_accept(delta: float, beta: float, rng: np.random.Generator) -> bool:
    # one uniform per decision keeps the stream aligned across beta values
    return bool(rng.random() < acceptance_probability(delta, beta))


@dataclass
class StepResult:
    accepted: bool
    mean: float
    proposed_mean: float
    proposal: SwapProposal
    band_rejections: int
    profile: RiskProfile


def mh_step(net: ScNetwork, engine: CascadeEngine, current_mean: float, beta: float,
            rng: np.random.Generator, constraints: SwapConstraints = SwapConstraints(),
            recompute_shares: bool = False) -> StepResult:
    """Propose one admissible swap, score it and keep or undo it.

    ``engine`` bundles the calibrated model, the market shares and the cascade
    settings.
    """
    proposal, rejections = rewiring.sample_swap(net, rng, constraints)
    rewiring.apply(net, proposal)
    saved_shares = engine.shares
    if recompute_shares:
        engine.shares = market_shares(net, current=True)
    profile = engine.profile(net)
    new_mean = profile.mean
    if metropolis_accept(new_mean - current_mean, beta, rng):
        return StepResult(True, new_mean, new_mean, proposal, rejections, profile)
    rewiring.revert(net, proposal)
    engine.shares = saved_shares
    return StepResult(False, current_mean, new_mean, proposal, rejections, profile)


class RunWriter:
    """Streams run artifacts into ``out_dir`` in step order."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "snapshots").mkdir(exist_ok=True)
        self._traj = open(self.dir / "trajectory.csv", "w", newline="", encoding="utf-8")
        self._csv = csv.writer(self._traj, lineterminator="\n")
        self._csv.writerow(TRAJECTORY_COLUMNS)
        self._moves = open(self.dir / "moves.jsonl", "w", encoding="utf-8")

    def record(self, rec: TrajectoryRecord) -> None:
        self._csv.writerow(rec.row())

    def move(self, step: int, proposal: SwapProposal) -> None:
        self._moves.write(json.dumps({"step": step, **proposal.to_json()}, sort_keys=True) + "\n")

    def snapshot(self, step: int, net: ScNetwork) -> Path:
        path = self.dir / "snapshots" / f"step_{step:08d}.csv"
        write_edge_list(net, path)
        return path

    def close(self) -> None:
        for fh in (self._traj, self._moves):
            if not fh.closed:
                fh.flush()
                fh.close()


@dataclass
class RunResult:
    network: ScNetwork
    trajectory: list
    best: NetworkSnapshot
    best_mean: float
    best_step: int
    initial_profile: RiskProfile
    final_profile: RiskProfile
    moves: list
    snapshots: list
    steps: int = 0
    n_accepted: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.steps if self.steps else float("nan")

    @property
    def initial_mean(self) -> float:
        return self.initial_profile.mean


def run(net: ScNetwork, engine: CascadeEngine, cfg: RunConfig, out_dir=None,
        check_invariants: bool = True, progress=None) -> RunResult:
    """Run ``cfg.steps`` Metropolis-Hastings decisions on ``net`` in place.

    Deterministic given ``cfg.seed``. Tracks the lowest mean ESRI seen; with
    ``out_dir`` the trajectory, accepted-move log and periodic snapshots are
    streamed to disk and flushed even if the run fails.
    """
    rng = np.random.default_rng(cfg.seed)
    writer = RunWriter(out_dir) if out_dir is not None else None
    ref = rewiring.invariant_reference(net) if check_invariants else None
    initial = engine.profile(net)
    mean = initial.mean
    best_mean, best, best_step = mean, snapshot(net), 0
    trajectory = [TrajectoryRecord(0, cfg.schedule(0), mean, True, "initial", net.n_links,
                                   mean, 0, initial.all_converged)]
    moves, snaps = [], []
    last_profile = initial
    n_accepted = 0
    try:
        if writer:
            writer.record(trajectory[0])
        if cfg.snapshot_every:
            snaps.append((0, snapshot(net)))
            if writer:
                writer.snapshot(0, net)
        for step in range(1, cfg.steps + 1):
            beta = cfg.schedule(step)
            res = mh_step(net, engine, mean, beta, rng, cfg.constraints, cfg.recompute_shares)
            mean = res.mean
            if res.accepted:
                n_accepted += 1
                last_profile = res.profile
                moves.append({"step": step, **res.proposal.to_json()})
                if writer:
                    writer.move(step, res.proposal)
                if mean < best_mean:
                    best_mean, best, best_step = mean, snapshot(net), step
            rec = TrajectoryRecord(step, beta, mean, res.accepted, res.proposal.kind.value, net.n_links,
                                   res.proposed_mean, res.band_rejections, res.profile.all_converged)
            if step % cfg.record_every == 0 or step == cfg.steps:
                trajectory.append(rec)
                if writer:
                    writer.record(rec)
            if cfg.snapshot_every and step % cfg.snapshot_every == 0:
                if ref is not None:
                    rewiring.check_swap_invariants(net, ref, cfg.constraints.out_strength_band)
                snaps.append((step, snapshot(net)))
                if writer:
                    writer.snapshot(step, net)
            if progress is not None:
                progress(step, rec)
    finally:
        if writer:
            writer.close()
    if ref is not None:
        rewiring.check_swap_invariants(net, ref, cfg.constraints.out_strength_band)
    return RunResult(net, trajectory, best, best_mean, best_step, initial, last_profile, moves, snaps,
                     cfg.steps, n_accepted)


@dataclass
class ProfileDiff:
    labels: list
    before: np.ndarray
    after: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return self.after - self.before

    @property
    def mean_delta(self) -> float:
        return float(np.mean(self.delta))

    @property
    def empirical_order(self) -> np.ndarray:
        """Firms by descending ESRI before rewiring."""
        return np.lexsort((np.arange(len(self.before)), -self.before))

    @property
    def rewired_order(self) -> np.ndarray:
        return np.lexsort((np.arange(len(self.after)), -self.after))

    def top(self, k: int = 10) -> list[dict]:
        rows = []
        rank_after = np.empty(len(self.after), dtype=np.int64)
        rank_after[self.rewired_order] = np.arange(1, len(self.after) + 1)
        for rank, i in enumerate(self.empirical_order[:k], start=1):
            rows.append({
                "firm": self.labels[i],
                "rank_before": rank,
                "rank_after": int(rank_after[i]),
                "esri_before": float(self.before[i]),
                "esri_after": float(self.after[i]),
                "delta": float(self.after[i] - self.before[i]),
            })
        return rows

    def top_mean(self, k: int = 10) -> tuple[float, float]:
        """Mean ESRI of the ``k`` riskiest empirical firms, before and after."""
        idx = self.empirical_order[:k]
        return float(self.before[idx].mean()), float(self.after[idx].mean())

    def to_csv(self, path) -> None:
        rank_after = np.empty(len(self.after), dtype=np.int64)
        rank_after[self.rewired_order] = np.arange(1, len(self.after) + 1)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["firm", "esri_before", "esri_after", "delta", "rank_before", "rank_after"])
            for rank, i in enumerate(self.empirical_order, start=1):
                w.writerow([self.labels[i], repr(float(self.before[i])), repr(float(self.after[i])),
                            repr(float(self.after[i] - self.before[i])), rank, int(rank_after[i])])


def compare_profiles(before: RiskProfile, after: RiskProfile) -> ProfileDiff:
    if list(before.labels) != list(after.labels):
        raise IntegrityError("profiles cover different firms")
    return ProfileDiff(list(before.labels), np.asarray(before.esri, float), np.asarray(after.esri, float))


__all__ = [
    "FixedBeta", "LinearBeta", "parse_schedule", "RunConfig", "TrajectoryRecord",
    "acceptance_probability", "metropolis_accept", "mh_step", "run", "RunResult",
    "compare_profiles", "ProfileDiff",
]
