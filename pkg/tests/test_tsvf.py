import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weaktrace.netgraph import Element, build_nested_mzi, make_network, random_network
from weaktrace.tsvf import (Cut, InvalidCutError, ZeroOverlapError, backward_amplitudes, closed_form_weak_values,
                            cut_weak_values, find_cut, forward_amplitudes, iter_cuts, two_state_vector,
                            validate_cut, weak_values)

SQ3 = math.sqrt(3)
TAGS = "ABCEF"


def seg(net, *tags):
    return [net.mirror_segment(t) for t in tags]


def cut_of(net, *tags):
    return Cut.of(seg(net, *tags))


def test_original_weak_values():
    wv = weak_values(build_nested_mzi(0.0))
    np.testing.assert_allclose([wv[t] for t in TAGS], [1, -1, 1, 0, 0], atol=1e-12)
    assert wv.overlap == pytest.approx(1 / 3)


def test_pf_weak_values():
    wv = weak_values(build_nested_mzi(math.pi / 2))
    np.testing.assert_allclose([wv[t] for t in TAGS], [-1j, 1j, 1, 0, 0], atol=1e-12)
    assert wv.overlap == pytest.approx(1j / 3)


@given(st.floats(-2 * math.pi, 2 * math.pi))
def test_general_phase_closed_form(phi):
    wv = weak_values(build_nested_mzi(phi))
    ref = closed_form_weak_values(phi)
    np.testing.assert_allclose([wv[t] for t in TAGS], [ref[t] for t in TAGS], atol=1e-12)


def test_forward_on_ABC_cut():
    net = build_nested_mzi(0.0)
    fwd = forward_amplitudes(net, cut_of(net, "A", "B", "C"))
    np.testing.assert_allclose([fwd[s] for s in seg(net, "A", "B", "C")], np.array([1, 1j, 1]) / SQ3, atol=1e-15)


def test_forward_toward_F_vanishes():
    net = build_nested_mzi(0.8)
    fwd = forward_amplitudes(net, cut_of(net, "F", "C"))
    assert abs(fwd[net.mirror_segment("F")]) < 1e-15


def test_backward_from_E_vanishes():
    net = build_nested_mzi(0.0)
    bwd = backward_amplitudes(net, cut_of(net, "E", "C"))
    assert abs(bwd[net.mirror_segment("E")]) < 1e-15


def test_backward_on_ABC_cut():
    net = build_nested_mzi(0.0)
    bwd = backward_amplitudes(net, cut_of(net, "A", "B", "C"))
    np.testing.assert_allclose([bwd[s] for s in seg(net, "A", "B", "C")], np.array([1, 1j, 1]) / SQ3, atol=1e-15)


def test_trivial_cuts():
    net = make_network([Element("junction", "J", ("s",), ("d",))], "s", "d")
    assert forward_amplitudes(net, Cut.of(["s"])) == {"s": 1}
    assert backward_amplitudes(net, Cut.of(["d"])) == {"d": 1}


def test_validate_cut():
    net = build_nested_mzi(0.0)
    assert validate_cut(net, cut_of(net, "A", "B", "C"))[0]
    assert validate_cut(net, cut_of(net, "E", "C"))[0]
    assert validate_cut(net, cut_of(net, "F", "C"))[0]
    ok, why = validate_cut(net, cut_of(net, "A", "C"))
    assert not ok and "E->B->F" in why and "0 cut segments" in why
    ok, why = validate_cut(net, Cut.of(["zzz"]))
    assert not ok and "unknown" in why


def test_invalid_cut_raises():
    net = build_nested_mzi(0.0)
    with pytest.raises(InvalidCutError):
        forward_amplitudes(net, cut_of(net, "A", "C"))


def test_cut_sum_rule_nested():
    net = build_nested_mzi(0.37)
    for tags in ("ABC", "EC", "FC"):
        vals = cut_weak_values(net, cut_of(net, *tags))
        assert sum(vals.values()) == pytest.approx(1, abs=1e-12)


def test_overlap_independent_of_cut():
    net = build_nested_mzi(0.37)
    overlaps = [two_state_vector(net, c).overlap for c in iter_cuts(net)]
    assert len(overlaps) > 3
    np.testing.assert_allclose(overlaps, overlaps[0], atol=1e-15)


def test_zero_overlap_is_an_error():
    # balanced MZI dark toward the detector port
    els = [Element("splitter", "S1", ("s",), ("a", "b"), {"t": math.sqrt(0.5)}),
           Element("mirror", "M", ("a",), ("a2",)),
           Element("phase", "P", ("b",), ("b2",), {"phi": 0.0}),
           Element("splitter", "S2", ("a2", "b2"), ("d", "x"), {"t": math.sqrt(0.5)})]
    net = make_network(els, "s", "x", ["d"])
    assert abs(net.forward_pass()["x"]) > 0.9
    dark = make_network(els, "s", "d", ["x"])
    with pytest.raises(ZeroOverlapError):
        weak_values(dark)


def test_find_cut_contains_segment():
    net = build_nested_mzi(0.0)
    c = find_cut(net, net.mirror_segment("E"))
    assert net.mirror_segment("E") in c.segments
    assert validate_cut(net, c)[0]


def test_report_csv():
    text = weak_values(build_nested_mzi(0.0), phi_C=0.0).to_csv()
    lines = text.splitlines()
    assert lines[0] == "mirror,re,im,abs"
    assert lines[1:6] == ["A,1,0,1", "B,-1,0,1", "C,1,0,1", "E,0,0,0", "F,0,0,0"]
    assert lines[6].startswith("overlap,0.333333333333,0,")
    assert lines[7] == "# phi_C=0"


def test_runtime_under_a_millisecond():
    import timeit

    net = build_nested_mzi(0.0)
    weak_values(net)
    best = min(timeit.repeat(lambda: weak_values(net), number=20, repeat=5)) / 20
    assert best < 1e-3


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cut_sum_rule_random(seed):
    net = random_network(np.random.default_rng(seed), max_elements=8)
    if abs(net.forward_pass()[net.detector]) < 1e-3:
        return
    for k, cut in enumerate(iter_cuts(net)):
        assert validate_cut(net, cut)[0]
        assert sum(cut_weak_values(net, cut).values()) == pytest.approx(1, abs=1e-10)
        if k > 50:
            break


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-math.pi, math.pi))
def test_global_phase_invariance(seed, phase):
    from weaktrace.netgraph import with_source_phase

    net = random_network(np.random.default_rng(seed))
    if not net.mirrors or abs(net.forward_pass()[net.detector]) < 1e-3:
        return
    try:
        a = weak_values(net)
    except InvalidCutError:
        return
    b = weak_values(with_source_phase(net, phase))
    for t in a.values:
        assert b[t] == pytest.approx(a[t], abs=1e-12)
    assert b.overlap == pytest.approx(a.overlap * cmath.exp(1j * phase), abs=1e-12)
