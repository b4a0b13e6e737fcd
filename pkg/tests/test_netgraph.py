import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weaktrace.netgraph import (Element, NetworkError, build_nested_mzi, enumerate_paths, is_isomorphic,
                                make_network, random_network, transfer_amplitude, validate_network,
                                with_source_phase)

SQ3 = math.sqrt(3)


def single_splitter(t=0.6):
    return make_network([Element("splitter", "S", ("s",), ("a", "b"), {"t": t})], "s", "a", ["b"])


def test_splitter_convention():
    el = Element("splitter", "S", ("x", "y"), ("T", "R"), {"t": 0.6})
    m = el.matrix()
    np.testing.assert_allclose(m, [[0.6, 0.8j], [0.8j, 0.6]])
    np.testing.assert_allclose(m.conj().T @ m, np.eye(2), atol=1e-15)


def test_phase_plate_matrix():
    el = Element("phase", "P", ("x",), ("y",), {"phi": 0.3})
    assert el.coupling(0, 0) == pytest.approx(cmath.exp(0.3j))


def test_nested_mzi_paths():
    net = build_nested_mzi(0.0)
    paths = enumerate_paths(net)
    assert sorted(p.tags for p in paths) == [("C",), ("E", "A", "F"), ("E", "B", "F")]


def test_single_splitter_path_coefficient():
    paths = enumerate_paths(single_splitter(0.6))
    assert len(paths) == 1
    assert paths.paths[0].coefficient == pytest.approx(0.6)


@pytest.mark.parametrize("phi", [0.0, 0.4, math.pi / 2, -2.0])
def test_forward_amplitudes_at_mirrors(phi):
    net = build_nested_mzi(phi)
    fwd = net.forward_pass()
    got = [fwd[net.mirror_segment(t)] for t in "ABC"]
    np.testing.assert_allclose(got, np.array([1, 1j, cmath.exp(1j * phi)]) / SQ3, atol=1e-15)


def test_backward_amplitudes_at_mirrors():
    net = build_nested_mzi(0.7)
    bwd = net.backward_pass()
    got = [bwd[net.mirror_segment(t)] for t in "ABC"]
    np.testing.assert_allclose(got, np.array([1, 1j, 1]) / SQ3, atol=1e-15)


def test_transfer_amplitude_values():
    assert abs(transfer_amplitude(build_nested_mzi(0.0), "s0", "d")) == pytest.approx(1 / 3, abs=1e-15)
    assert transfer_amplitude(build_nested_mzi(math.pi / 2), "s0", "d") == pytest.approx(1j / 3, abs=1e-15)
    assert transfer_amplitude(build_nested_mzi(0.0), "c2", "c2") == 1


def test_transfer_amplitude_unknown_segment():
    with pytest.raises(NetworkError, match="unknown segment"):
        transfer_amplitude(build_nested_mzi(), "s0", "nowhere")


def test_path_sum_equals_transfer_amplitude():
    net = build_nested_mzi(0.0)
    assert enumerate_paths(net).total == pytest.approx(transfer_amplitude(net, net.source, net.detector), abs=1e-15)


def test_dark_port_toward_F():
    net = build_nested_mzi(1.1)
    assert abs(net.forward_pass()["f0"]) < 1e-15


@given(st.floats(-10, 10))
def test_builder_always_valid(phi):
    validate_network(build_nested_mzi(phi))


def test_z_offsets_and_unknown_tag():
    net = build_nested_mzi(0.0, z_offsets={"A": 5.0})
    assert net.element("A").z == 5.0
    with pytest.raises(NetworkError):
        build_nested_mzi(0.0, z_offsets={"Q": 1.0})


def test_validation_errors():
    S = lambda lb, i, o, t=0.5: Element("splitter", lb, i, o, {"t": t})  # noqa: E731
    with pytest.raises(NetworkError, match="duplicate label"):
        make_network([S("S", ("s",), ("a", "b")), Element("junction", "S", ("a",), ("c",))], "s", "c", ["b"])
    with pytest.raises(NetworkError, match="dangling"):
        make_network([S("S", ("s",), ("a", "b"))], "s", "a", [])
    with pytest.raises(NetworkError, match="out of range"):
        make_network([S("S", ("s",), ("a", "b"), t=1.2)], "s", "a", ["b"])
    with pytest.raises(NetworkError, match="consumed by both"):
        make_network([S("S", ("s",), ("a", "b")), Element("junction", "J1", ("a",), ("c",)),
                      Element("junction", "J2", ("a",), ("e",))], "s", "c", ["b", "e"])


def test_cycle_rejected():
    els = [Element("splitter", "S", ("s", "loop"), ("a", "b"), {"t": 0.5}),
           Element("junction", "J", ("b",), ("loop",))]
    with pytest.raises(NetworkError, match="cycle"):
        make_network(els, "s", "a")


def test_source_phase_is_global():
    net = build_nested_mzi(0.3)
    shifted = with_source_phase(net, 0.9)
    ratio = enumerate_paths(shifted).total / enumerate_paths(net).total
    assert ratio == pytest.approx(cmath.exp(0.9j))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_networks_path_sum_matches_forward_pass(seed):
    net = random_network(np.random.default_rng(seed))
    fwd = net.forward_pass()
    assert enumerate_paths(net).total == pytest.approx(fwd[net.detector], abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_networks_conserve_power(seed):
    net = random_network(np.random.default_rng(seed))
    fwd = net.forward_pass()
    assert sum(abs(fwd[s]) ** 2 for s in net.terminals) == pytest.approx(1.0, abs=1e-12)


def test_isomorphism():
    assert is_isomorphic(build_nested_mzi(0.0), build_nested_mzi(0.0))
    assert not is_isomorphic(build_nested_mzi(0.0), build_nested_mzi(0.5))
    assert not is_isomorphic(build_nested_mzi(0.0), single_splitter())
