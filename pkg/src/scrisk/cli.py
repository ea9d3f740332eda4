"""Command-line front end.

    scrisk ingest    raw.csv -o clean.csv
    scrisk generate  -o data/ --n-firms 200 --seed 1
    scrisk extract   clean.csv -o sub.csv --section C --target-size 150
    scrisk esri      sub.csv --essentiality ess.csv -o scores/
    scrisk optimize  sub.csv --essentiality ess.csv --beta linear:12800:50000 -o run/
    scrisk optimize  --replay run/manifest.json -o run-again/
    scrisk report    run/ --baseline run-beta0/

Options can also come from a TOML file (``--config``): top-level keys apply to
every command, a table named after the command overrides them, and explicit
flags override both. Keys use the long flag names with underscores, e.g.
``steps = 20000`` or ``beta = "linear:12800:20000"``.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .cascade import CascadeConfig, CascadeEngine, RiskProfile, market_shares
from .datasets import (Community, SeedSector, SynthSpec, extract_community, extract_seed_sector,
                       generate_synthetic, write_provenance)
from .errors import ConfigError, ExhaustionError, IntegrityError, ParseError, ScriskError
from .io import load_edge_list, write_edge_list
from .network import restore
from .optimizer import RunConfig, compare_profiles, parse_schedule
from .optimizer import run as run_optimizer
from .production import Essentiality, EssentialityMatrix, calibrate
from .rewiring import SwapConstraints

log = logging.getLogger("scrisk")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4

# option defaults; None means "not set" so config files can fill them in
DEFAULTS = {
    "mode": "weighted",
    "min_weight": 3000.0,
    "gamma_ne": 0.5,
    "tol": 1e-6,
    "t_max": 1000,
    "workers": None,
    "default_essential": False,
    "steps": 1000,
    "beta": "0",
    "seed": 0,
    "epsilon": 3000.0,
    "band": 0.2,
    "record_every": 1,
    "snapshot_every": 0,
    "recompute_shares": False,
    "top_k": 10,
}


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def resolve(args: argparse.Namespace, command: str) -> dict:
    """Merge defaults, config file and explicit flags (in rising priority)."""
    opts = {k: v for k, v in DEFAULTS.items()}
    if getattr(args, "config", None):
        cfg = _read_config(args.config)
        layered = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
        layered.update(cfg.get(command, {}))
        for k, v in layered.items():
            if k not in DEFAULTS:
                raise ConfigError(f"unknown config key {k!r}")
            opts[k] = v
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    if opts["mode"] not in ("weighted", "unweighted"):
        raise ConfigError("mode must be 'weighted' or 'unweighted'")
    return opts


def _load_network(path, opts, min_weight=None):
    try:
        return load_edge_list(path, mode=opts["mode"],
                              min_weight=opts["min_weight"] if min_weight is None else min_weight)
    except FileNotFoundError:
        raise IntegrityError(f"network file not found: {path}") from None


def _load_essentiality(path, opts) -> EssentialityMatrix:
    if path is None:
        return EssentialityMatrix(default=Essentiality.ESSENTIAL)
    if not Path(path).exists():
        if opts["default_essential"]:
            log.warning("essentiality file %s missing; treating every input as essential", path)
            return EssentialityMatrix(default=Essentiality.ESSENTIAL)
        raise IntegrityError(f"essentiality file not found: {path} (use --default-essential to fall back)")
    return EssentialityMatrix.read_csv(path)


def _engine(net, ess, opts) -> CascadeEngine:
    try:
        cfg = CascadeConfig(tol=float(opts["tol"]), t_max=int(opts["t_max"]))
        model = calibrate(net, ess, gamma_ne=float(opts["gamma_ne"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return CascadeEngine(model, market_shares(net), cfg, workers=opts["workers"])


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- commands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    opts = resolve(args, "ingest")
    net = _load_network(args.input, opts)
    write_edge_list(net, args.output)
    summary = {"firms": net.n_firms, "links": net.n_links, "weighted": net.weighted,
               "sectors": len(net.sector_codes), "input_sha256": sha256(args.input)}
    _write_json(Path(args.output).with_suffix(".json"), summary)
    print(f"{net.n_firms} firms, {net.n_links} links -> {args.output}")
    return EXIT_OK


def cmd_generate(args) -> int:
    spec = SynthSpec(
        n_firms=args.n_firms, n_sectors=args.n_sectors, degree_exponent=args.degree_exponent,
        weight_exponent=args.weight_exponent, reciprocity_target=args.reciprocity,
        essentiality_density=args.essentiality_density, seed=args.seed, mean_degree=args.mean_degree,
    )
    net, ess = generate_synthetic(spec)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(net, out / "network.csv")
    ess.write_csv(out / "essentiality.csv")
    write_provenance(out / "provenance.json", spec, {"tool_version": __version__})
    print(f"{net.n_firms} firms, {net.n_links} links -> {out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    opts = resolve(args, "extract")
    net = _load_network(args.input, opts)
    if args.seed_nace4:
        spec = SeedSector(args.seed_nace4, args.suppliers, args.customers, args.min_group_size)
        sub = extract_seed_sector(net, spec)
    elif args.section:
        spec = Community(args.section, args.target_size)
        sub = extract_community(net, spec)
    else:
        raise ConfigError("extract needs --seed-nace4 or --section")
    write_edge_list(sub, args.output)
    write_provenance(Path(args.output).with_suffix(".provenance.json"), spec,
                     {"input_sha256": sha256(args.input), "tool_version": __version__})
    print(f"{sub.n_firms} firms, {sub.n_links} links -> {args.output}")
    return EXIT_OK


def cmd_esri(args) -> int:
    opts = resolve(args, "esri")
    net = _load_network(args.network, opts)
    ess = _load_essentiality(args.essentiality, opts)
    engine = _engine(net, ess, opts)
    prof = engine.profile(net)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    prof.to_csv(out / "profile.csv")
    prof.write_summary(out / "summary.json", top_k=int(opts["top_k"]))
    print(f"mean ESRI {prof.mean:.6f} over {net.n_firms} firms")
    if not prof.all_converged:
        log.warning("%d cascades did not converge within t_max", int((~prof.converged).sum()))
    return EXIT_OK


def _optimize(network_path, ess_path, opts, out: Path, command_line) -> dict:
    t0 = time.perf_counter()
    net = _load_network(network_path, opts)
    ess = _load_essentiality(ess_path, opts)
    engine = _engine(net, ess, opts)
    try:
        cfg = RunConfig(
            steps=int(opts["steps"]),
            schedule=parse_schedule(opts["beta"]),
            constraints=SwapConstraints(epsilon=float(opts["epsilon"]), out_strength_band=float(opts["band"])),
            cascade=engine.cfg,
            seed=int(opts["seed"]),
            record_every=int(opts["record_every"]),
            snapshot_every=int(opts["snapshot_every"]),
            recompute_shares=bool(opts["recompute_shares"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(net, out / "empirical.csv")
    links_before = net.n_links
    t1 = time.perf_counter()
    res = run_optimizer(net, engine, cfg, out_dir=out)
    t2 = time.perf_counter()
    write_edge_list(res.network, out / "final.csv")
    write_edge_list(restore(res.best), out / "best.csv")
    res.initial_profile.to_csv(out / "profile_initial.csv")
    res.final_profile.to_csv(out / "profile_final.csv")
    manifest = {
        "tool": "scrisk",
        "version": __version__,
        "command": "optimize",
        "command_line": command_line,
        "config": {k: opts[k] for k in sorted(opts) if k != "workers"},
        "schedule": cfg.schedule.describe(),
        "seeds": {"metropolis": cfg.seed},
        "inputs": {
            "network": {"path": str(Path(network_path).resolve()), "sha256": sha256(network_path)},
            "essentiality": None if ess_path is None or not Path(ess_path).exists() else
            {"path": str(Path(ess_path).resolve()), "sha256": sha256(ess_path)},
        },
        "outputs": {"trajectory_sha256": sha256(out / "trajectory.csv")},
        "results": {
            "initial_mean_esri": res.initial_mean,
            "final_mean_esri": res.final_profile.mean,
            "best_mean_esri": res.best_mean,
            "best_step": res.best_step,
            "acceptance_rate": res.acceptance_rate,
            "links_before": links_before,
            "links_after": res.network.n_links,
        },
        "timings": {"setup_s": t1 - t0, "run_s": t2 - t1, "workers": engine.workers},
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def cmd_optimize(args) -> int:
    if args.replay:
        return _replay(args)
    if not args.network:
        raise ConfigError("optimize needs a network file or --replay")
    opts = resolve(args, "optimize")
    out = Path(args.output)
    m = _optimize(args.network, args.essentiality, opts, out, sys.argv[1:])
    r = m["results"]
    print(f"mean ESRI {r['initial_mean_esri']:.6f} -> {r['final_mean_esri']:.6f} "
          f"(best {r['best_mean_esri']:.6f} at step {r['best_step']}), "
          f"acceptance {r['acceptance_rate']:.3f}")
    return EXIT_OK


def _replay(args) -> int:
    try:
        manifest = json.loads(Path(args.replay).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"manifest not found: {args.replay}") from None
    inputs = manifest["inputs"]
    for name, rec in inputs.items():
        if rec is not None and sha256(rec["path"]) != rec["sha256"]:
            raise IntegrityError(f"{name} input {rec['path']} changed since the recorded run")
    opts = dict(DEFAULTS)
    opts.update(manifest["config"])
    if args.workers is not None:
        opts["workers"] = args.workers
    ess = inputs["essentiality"]["path"] if inputs["essentiality"] else None
    out = Path(args.output)
    m = _optimize(inputs["network"]["path"], ess, opts, out, manifest["command_line"])
    same = m["outputs"]["trajectory_sha256"] == manifest["outputs"]["trajectory_sha256"]
    print(f"replayed into {out}: trajectory {'identical' if same else 'DIFFERS'}")
    return EXIT_OK if same else EXIT_RUNTIME


REQUIRED_ARTIFACTS = ("empirical.csv", "final.csv", "trajectory.csv", "profile_initial.csv", "profile_final.csv")


def _check_run_dir(run_dir: Path) -> None:
    if not run_dir.is_dir():
        raise IntegrityError(f"run directory not found: {run_dir}")
    missing = [a for a in REQUIRED_ARTIFACTS if not (run_dir / a).exists()]
    if missing:
        raise IntegrityError(f"{run_dir} lacks {', '.join(missing)}")


def cmd_report(args) -> int:
    from . import metrics, plots

    opts = resolve(args, "report")
    run_dir = Path(args.run_dir)
    _check_run_dir(run_dir)
    manifest_path = run_dir / "manifest.json"
    mode = opts["mode"]
    if manifest_path.exists():
        mode = json.loads(manifest_path.read_text(encoding="utf-8"))["config"].get("mode", mode)
    load = {"mode": mode, "min_weight": 0}
    before = RiskProfile.read_csv(run_dir / "profile_initial.csv")
    after = RiskProfile.read_csv(run_dir / "profile_final.csv")
    artifacts = {
        "empirical": (run_dir / "empirical.csv", before),
        "rewired": (run_dir / "final.csv", after),
    }
    if args.baseline:
        base = Path(args.baseline)
        _check_run_dir(base)
        artifacts["configuration model"] = (base / "final.csv", RiskProfile.read_csv(base / "profile_final.csv"))
    out = Path(args.output) if args.output else run_dir / "report"
    out.mkdir(parents=True, exist_ok=True)

    rows, reports = [], {}
    for name, (path, prof) in artifacts.items():
        rep = metrics.compute_metrics(load_edge_list(path, **load))
        reports[name] = rep
        reduction = prof.mean / before.mean - 1.0 if before.mean > 0 else 0.0
        rows.append({"network": name, "<ESRI>": prof.mean, "<ESRI> reduction": reduction, **rep.table_row()})
    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    _write_json(out / "summary.json", {"rows": rows})

    traj = np.genfromtxt(run_dir / "trajectory.csv", delimiter=",", names=True, dtype=None, encoding="utf-8")
    plots.trajectory(traj["step"], traj["mean_esri"], out / "trajectory.svg")
    diff = compare_profiles(before, after)
    plots.profile_bars(diff, out / "profile_bars.svg")
    deg_by_label = _degree_by_label(run_dir / "empirical.csv", load)
    plots.degree_vs_esri([deg_by_label.get(l, 0) for l in before.labels], before.esri, out / "degree_esri.svg")
    for row in rows:
        print(f"{row['network']:>22}: <ESRI> {row['<ESRI>']:.6f} ({row['<ESRI> reduction']:+.1%}), "
              f"N={row['N']} L={row['L']} reciprocity={row['Reciprocity']:.3f}")
    print(f"report -> {out}")
    return EXIT_OK


def _degree_by_label(path, load) -> dict:
    net = load_edge_list(path, **load)
    k = net.out_degree() + net.in_degree()
    return {lab: int(k[i]) for i, lab in enumerate(net.labels)}


# -- parser -----------------------------------------------------------------


def _common(p, network_opts=True):
    p.add_argument("--config", help="TOML file with option defaults")
    if network_opts:
        p.add_argument("--mode", choices=["weighted", "unweighted"], default=None)
        p.add_argument("--min-weight", type=float, default=None, help="drop lighter links (default 3000)")


def _model_opts(p):
    p.add_argument("--essentiality", help="CSV supplier_nace2,buyer_nace2,class")
    p.add_argument("--default-essential", action="store_true", default=None,
                   help="fall back to all-essential inputs if the essentiality file is missing")
    p.add_argument("--gamma-ne", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--t-max", type=int, default=None)
    p.add_argument("--workers", type=int, default=None, help="cascade threads (default: SCRISK_WORKERS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scrisk", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"scrisk {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and normalize an edge list")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("generate", help="write a synthetic network and essentiality matrix")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--n-firms", type=int, default=200)
    p.add_argument("--n-sectors", type=int, default=12)
    p.add_argument("--degree-exponent", type=float, default=2.5)
    p.add_argument("--weight-exponent", type=float, default=2.0)
    p.add_argument("--reciprocity", type=float, default=0.05)
    p.add_argument("--essentiality-density", type=float, default=0.4)
    p.add_argument("--mean-degree", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("extract", help="cut a subnetwork by seed class or community")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed-nace4")
    p.add_argument("--suppliers", type=int, default=3)
    p.add_argument("--customers", type=int, default=3)
    p.add_argument("--min-group-size", type=int, default=5)
    p.add_argument("--section", help="NACE section letter(s), e.g. C")
    p.add_argument("--target-size", type=int, default=150)
    _common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("esri", help="systemic risk profile of a network")
    p.add_argument("network")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--top-k", type=int, default=None)
    _common(p)
    _model_opts(p)
    p.set_defaults(func=cmd_esri)

    p = sub.add_parser("optimize", help="Metropolis-Hastings rewiring run")
    p.add_argument("network", nargs="?")
    p.add_argument("-o", "--output", required=True, help="run directory")
    p.add_argument("--replay", help="re-run from a manifest.json")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--beta", default=None, help='"0", "fixed:<b>" or "linear:<b_max>:<steps>"')
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None, help="full-swap weight tolerance")
    p.add_argument("--band", type=float, default=None, help="allowed relative out-strength drift")
    p.add_argument("--record-every", type=int, default=None)
    p.add_argument("--snapshot-every", type=int, default=None)
    p.add_argument("--recompute-shares", action="store_true", default=None)
    _common(p)
    _model_opts(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("report", help="metrics table and plots for a run directory")
    p.add_argument("run_dir")
    p.add_argument("--baseline", help="run directory of a beta=0 run")
    p.add_argument("-o", "--output", help="default: <run_dir>/report")
    _common(p)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, IntegrityError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ExhaustionError, ScriskError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
