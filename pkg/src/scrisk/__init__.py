"""Firm-level supply network systemic risk: cascades, ESRI and risk-reducing rewiring."""
from .cascade import CascadeConfig, CascadeEngine, RiskProfile, esri, market_shares, risk_profile, run_cascade
from .datasets import Community, SeedSector, SynthSpec, extract_community, extract_seed_sector, generate_synthetic
from .errors import ConfigError, ExhaustionError, IntegrityError, ParseError, ScriskError
from .io import load_edge_list, load_snapshot, save_snapshot, write_edge_list
from .metrics import MetricsReport, compute_metrics
from .network import ScNetwork, induced_subgraph, restore, snapshot
from .optimizer import FixedBeta, LinearBeta, RunConfig, compare_profiles, parse_schedule, run
from .production import Essentiality, EssentialityMatrix, calibrate
from .rewiring import SwapConstraints, apply, find_two_links, propose_swap, revert

__version__ = "0.1.0"
