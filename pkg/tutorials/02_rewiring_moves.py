# ---
# jupyter:
#   jupytext:
#     formats: ipynb,py
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Rewiring moves
#
# Two links whose suppliers share a sector and whose buyers share a sector
# can trade partners. Equal weights swap outright, unequal weights move only
# the smaller amount.

# +
from scrisk import ScNetwork
from scrisk import rewiring as rw

links = [(0, 2, 50000.0), (1, 3, 10000.0)]
net = ScNetwork.from_links(["i", "k", "j", "l"], ["101", "101", "201", "201"], links)
p = rw.propose_swap(net, 0, 1)
print(p.kind, p.swap_amount / 100)
rw.apply(net, p)
for lk in net.links():
    print(net.labels[lk.source], "->", net.labels[lk.target], lk.weight)
# -

# Every move is an edit script, so it can be undone or replayed later.

# +
rw.revert(net, p)
print(net.link_multiset())
# -

# On a larger network, a long random walk keeps what each firm buys per
# product and the total volume, and keeps sales within 20% of the start.

# +
import numpy as np
from scrisk import SynthSpec, generate_synthetic

net, _ = generate_synthetic(SynthSpec(n_firms=300, seed=2))
ref = rw.invariant_reference(net)
rng = np.random.default_rng(0)
kinds = {"full": 0, "partial": 0}
for _ in range(5000):
    move, _ = rw.sample_swap(net, rng)
    rw.apply(net, move)
    kinds[move.kind.value] += 1
rw.check_swap_invariants(net, ref)
print(kinds, "links now", net.n_links)
drift = net.out_strength_units / net.out_strength0_units
print("out-strength drift range", drift.min().round(3), drift.max().round(3))
