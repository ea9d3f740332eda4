import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import E, I, N, net_from
from scrisk.errors import ParseError
from scrisk.production import EssentialityMatrix, GlpfParams, calibrate, classify_inputs, evaluate_glpf


def test_classify_inputs_by_division():
    net = net_from(["101", "221", "301"], [(0, 2, 10), (1, 2, 10)])
    ess = EssentialityMatrix({("10", "30"): E, ("22", "30"): N})
    assert classify_inputs(net, ess, 2) == ({"101"}, {"221"})


def test_default_applies_to_unknown_pairs():
    assert EssentialityMatrix(default=E).lookup("45", "46") is E
    assert EssentialityMatrix(default=N).lookup("45", "46") is N


def test_irrelevant_inputs_never_bind():
    net = net_from(["101", "221", "301"], [(0, 2, 10), (1, 2, 10), (2, 0, 5)])
    model = calibrate(net, EssentialityMatrix(default=I))
    p = model.params[2]
    assert evaluate_glpf(p, {}) == p.x0


def test_single_essential_input():
    net = net_from(["101", "201", "301"], [(0, 1, 40), (1, 2, 100)])
    p = calibrate(net, EssentialityMatrix(default=E)).params[1]
    assert p.x0 == 100 and p.alpha_es == {"101": pytest.approx(0.4)}
    assert evaluate_glpf(p, {"101": 20}) / p.x0 == pytest.approx(0.5)
    assert evaluate_glpf(p, {"101": 0}) == 0


def test_non_essential_linear_branch():
    net = net_from(["101", "201", "301"], [(0, 1, 50), (1, 2, 100)])
    p = calibrate(net, EssentialityMatrix(default=N), gamma_ne=0.5).params[1]
    assert p.beta_bar == pytest.approx(50)
    assert p.alpha_ne == pytest.approx(1.0)
    assert evaluate_glpf(p, {"101": 0}) == pytest.approx(50)
    assert evaluate_glpf(p, {"101": 50}) == pytest.approx(100)


def test_gamma_zero_disables_non_essential_losses():
    net = net_from(["101", "201", "301"], [(0, 1, 50), (1, 2, 100)])
    p = calibrate(net, EssentialityMatrix(default=N), gamma_ne=0.0).params[1]
    assert p.beta_bar == p.x0 and math.isinf(p.alpha_ne)
    assert evaluate_glpf(p, {"101": 0}) == p.x0


def test_mixed_inputs():
    # essential at 100 %, non-essential at 0 %
    net = net_from(["101", "221", "301", "401"], [(0, 2, 30), (1, 2, 20), (2, 3, 80)])
    ess = EssentialityMatrix({("10", "30"): E, ("22", "30"): N})
    p = calibrate(net, ess, gamma_ne=0.5).params[2]
    assert evaluate_glpf(p, {"101": 30, "221": 0}) == pytest.approx(0.5 * p.x0)


def test_sink_gets_sentinel_output():
    net = net_from(["101", "201"], [(0, 1, 40)])
    model = calibrate(net, EssentialityMatrix(default=E))
    assert model.x0[1] == 1.0 and model.sink[1]
    assert model.esri_weights.tolist() == [1.0, 0.0]


def test_gamma_out_of_range():
    net = net_from(["101", "201"], [(0, 1, 40)])
    with pytest.raises(ValueError):
        calibrate(net, EssentialityMatrix(), gamma_ne=1.5)


flows = st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(1, 10**6)), min_size=1, max_size=20)


@settings(max_examples=60, deadline=None)
@given(flows, st.floats(0, 1), st.sampled_from([E, N, I]), st.sampled_from([E, N, I]))
def test_full_inputs_reproduce_output(raw, gamma, c1, c2):
    links = [(s, t, w / 100) for s, t, w in raw if s != t]
    if not links:
        return
    net = net_from(["101", "221", "101", "341", "221"], links)
    ess = EssentialityMatrix({("10", "22"): c1, ("22", "10"): c2}, default=N)
    model = calibrate(net, ess, gamma_ne=gamma)
    for i, p in enumerate(model.params):
        full = net.in_strength0_by_product[i]
        assert evaluate_glpf(p, full) == pytest.approx(p.x0, rel=1e-12)
        # monotone in each delivered amount
        for k in full:
            less = dict(full, **{k: full[k] * 0.5})
            assert evaluate_glpf(p, less) <= evaluate_glpf(p, full)


def test_matrix_csv_roundtrip(tmp_path):
    m = EssentialityMatrix({("10", "20"): E, ("20", "10"): N, ("30", "30"): I})
    m.write_csv(tmp_path / "m.csv")
    back = EssentialityMatrix.read_csv(tmp_path / "m.csv", default="N")
    assert back.table == m.table and back.default is N


def test_matrix_csv_errors(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("supplier_nace2,buyer_nace2,class\n10,20,X\n")
    with pytest.raises(ParseError) as exc:
        EssentialityMatrix.read_csv(p)
    assert exc.value.line == 2
    p.write_text("a,b,c\n")
    with pytest.raises(ParseError):
        EssentialityMatrix.read_csv(p)
