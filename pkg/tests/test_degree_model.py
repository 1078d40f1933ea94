import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ubac_ldpc.degree_model import (
    RATE_MISMATCH,
    REFERENCE_RAW,
    CheckDegreeOne,
    DomainError,
    EnsembleSpec,
    NegativeFraction,
    Perspective,
    RateOutOfRange,
    Side,
    SumNotOne,
    ZeroDegree,
    design_rate,
    edge_reading_rate,
    edge_to_node,
    eval_poly,
    format_codespec,
    load_code,
    node_to_edge,
    parse_codespec,
    reference_code,
    validate,
)


def test_validate_single_degree():
    d = validate({2: 1.0}, "node", "variable")
    assert d.as_dict() == {2: 1.0}
    assert d.perspective is Perspective.NODE and d.side is Side.VARIABLE


def test_validate_code1_row_sums_to_one():
    d = validate({1: 0.376, 2: 0.594, 5: 0.014, 6: 0.016}, "node", "variable")
    assert math.isclose(sum(d.fractions), 1.0, abs_tol=1e-12)


def test_validate_rejects_bad_sum():
    with pytest.raises(SumNotOne):
        validate({2: 0.5, 3: 0.6})


def test_validate_never_silently_renormalizes():
    with pytest.raises(SumNotOne):
        validate({2: 0.5, 3: 0.5 + 1e-6})


def test_validate_lenient_normalizes_explicitly():
    d = validate({4: 0.586, 5: 0.188, 10: 0.227}, "node", "check", lenient=True)
    assert math.isclose(sum(d.fractions), 1.0, abs_tol=1e-12)
    with pytest.raises(SumNotOne):
        validate({4: 0.586, 5: 0.188, 10: 0.227}, "node", "check")


@pytest.mark.parametrize(
    "raw, exc",
    [({2: -0.1, 3: 1.1}, NegativeFraction), ({0: 0.5, 2: 0.5}, ZeroDegree), ({-1: 0.0, 2: 1.0}, ZeroDegree)],
)
def test_validate_errors(raw, exc):
    with pytest.raises(exc):
        validate(raw)


def test_check_degree_one_needs_opt_in():
    with pytest.raises(CheckDegreeOne):
        validate({1: 0.5, 3: 0.5}, "node", "check")
    assert validate({1: 0.5, 3: 0.5}, "node", "check", allow_check_degree_one=True).get(1) == 0.5


def test_node_to_edge_examples():
    assert node_to_edge(validate({2: 1.0})).as_dict() == {2: 1.0}
    e = node_to_edge(validate({1: 0.5, 3: 0.5}))
    assert e.get(1) == pytest.approx(0.25) and e.get(3) == pytest.approx(0.75)
    lam = node_to_edge(validate({1: 0.376, 2: 0.594, 5: 0.014, 6: 0.016}))
    assert lam.get(1) == pytest.approx(0.376 / 1.730, abs=1e-12)


def test_perspective_type_mismatch():
    with pytest.raises(TypeError):
        edge_to_node(validate({2: 1.0}))
    with pytest.raises(TypeError):
        node_to_edge(node_to_edge(validate({2: 1.0})))


@st.composite
def distributions(draw):
    degs = draw(st.lists(st.integers(1, 30), min_size=1, max_size=6, unique=True))
    w = draw(st.lists(st.floats(0.01, 1.0), min_size=len(degs), max_size=len(degs)))
    s = sum(w)
    return {d: x / s for d, x in zip(degs, w)}


@settings(max_examples=200, deadline=None)
@given(distributions())
def test_round_trip(raw):
    d = validate(raw)
    back = edge_to_node(node_to_edge(d))
    for k in raw:
        assert back.get(k) == pytest.approx(d.get(k), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(distributions(), st.lists(st.floats(0, 1), min_size=2, max_size=20))
def test_eval_poly_monotone_and_normalized(raw, xs):
    for persp in ("node", "edge"):
        d = validate(raw, persp)
        xs_sorted = np.sort(np.array(xs))
        vals = eval_poly(d, xs_sorted)
        assert np.all(np.diff(vals) >= -1e-12)
        assert eval_poly(d, 1.0) == pytest.approx(1.0, abs=1e-12)
        assert np.all((vals >= 0) & (vals <= 1 + 1e-12))


def test_eval_poly_examples():
    assert eval_poly(validate({2: 1.0}, "edge"), 0.5) == pytest.approx(0.5)
    L = validate({1: 0.376, 2: 0.594, 5: 0.014, 6: 0.016})
    by_hand = 0.376 * 0.5 + 0.594 * 0.25 + 0.014 * 0.5**5 + 0.016 * 0.5**6
    assert eval_poly(L, 0.5) == pytest.approx(by_hand, abs=1e-15)
    assert by_hand == pytest.approx(0.3371, abs=1e-4)


@pytest.mark.parametrize("x", [-0.1, 1.1, float("nan")])
def test_eval_poly_domain(x):
    with pytest.raises(DomainError):
        eval_poly(validate({2: 1.0}), x)


def test_design_rate_examples():
    assert design_rate(validate({2: 1.0}), validate({4: 1.0}, side="check")) == pytest.approx(0.5)
    assert reference_code("code1").design_rate == pytest.approx(0.689, abs=0.002)
    assert reference_code("code2").design_rate == pytest.approx(0.716, abs=0.002)


def test_design_rate_out_of_range():
    with pytest.raises(RateOutOfRange):
        design_rate(validate({4: 1.0}), validate({2: 1.0}, side="check"))


def test_code3_mismatch_is_flagged():
    spec = reference_code("code3")
    assert "code3" in RATE_MISMATCH
    assert spec.design_rate == pytest.approx(0.7036, abs=5e-4)
    vn, cn = REFERENCE_RAW["code3"]
    assert edge_reading_rate(vn, cn) == pytest.approx(0.7235, abs=5e-4)


def test_ensemble_requires_sides():
    with pytest.raises(ValueError):
        EnsembleSpec(validate({2: 1.0}, side="check"), validate({4: 1.0}, side="check"))


def test_distribution_is_immutable():
    d = validate({2: 1.0})
    with pytest.raises(TypeError):
        d.coefficients[3] = 0.1


def test_codespec_round_trip(tmp_path):
    spec = reference_code("code2")
    text = format_codespec(spec, n=500, comment="test")
    parsed = parse_codespec(text)
    assert parsed.n == 500
    assert parsed.spec.design_rate == pytest.approx(spec.design_rate, abs=1e-10)
    p = tmp_path / "c.txt"
    p.write_text(text)
    assert load_code(str(p)).spec.design_rate == pytest.approx(spec.design_rate, abs=1e-10)


def test_codespec_parse_errors():
    with pytest.raises(ValueError):
        parse_codespec("vn 2 1.0\n")
    with pytest.raises(ValueError):
        parse_codespec("vn 2 1.0\ncn four 1.0\n")


def test_shipped_codespec_files_match_reference():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "codes"
    for name in ("code1", "code2", "code3"):
        spec = load_code(str(root / f"{name}.txt")).spec
        assert spec.design_rate == pytest.approx(reference_code(name).design_rate, abs=1e-12)
