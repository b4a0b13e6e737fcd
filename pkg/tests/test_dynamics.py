import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weaktrace.beamprop import BeamParams
from weaktrace.dynamics import (DEFAULT_FREQS, Drive, TraceReport, VibrationConfig, VibrationError,
                                analytic_first_order, field_sidebands, fit_scaling_exponent, power_spectrum,
                                simulate_timeseries, trace_strength, trace_strengths)
from weaktrace.netgraph import build_nested_mzi
from weaktrace.tsvf import weak_values

P = BeamParams()
FAR = 1e6 * P.z_R
EPS = 1e-3
# first-order far-field peak for |Re W| = 1: (2 sqrt(2/pi) eps) / 2
PEAK = math.sqrt(2 / math.pi) * EPS


def vib(eps=EPS, **kw):
    return VibrationConfig.uniform(P, eps, **kw)


def only(tag, eps=EPS):
    v = vib(eps)
    for t in v.drives:
        if t != tag:
            v = v.without(t)
    return v


def test_vibration_validation():
    with pytest.raises(VibrationError, match="distinct"):
        VibrationConfig({"A": Drive(13, 1e-7), "B": Drive(13, 1e-7)})
    with pytest.raises(VibrationError, match="not an integer"):
        VibrationConfig({"A": Drive(13.5, 1e-7)})
    with pytest.raises(VibrationError, match="sample rate"):
        VibrationConfig({"A": Drive(13, 1e-7), "B": Drive(17, 1e-7)}, sample_rate=64)
    with pytest.raises(VibrationError, match="collides"):
        VibrationConfig({"A": Drive(10, 1e-7), "B": Drive(20, 1e-7), "C": Drive(30, 1e-7)})


def test_default_frequencies_are_clean():
    combos = vib().combination_freqs()
    assert not set(DEFAULT_FREQS.values()) & set(combos.values())


def test_undriven_series_is_flat():
    v = vib(0.0)
    ts = simulate_timeseries(build_nested_mzi(0.0), v, FAR)
    assert np.all(np.abs(ts.normalized) < 1e-15)


def test_only_C_driven_is_linear():
    net = build_nested_mzi(0.0)
    amps = []
    for eps in (1e-4, 1e-3):
        spec = power_spectrum(simulate_timeseries(net, only("C", eps), FAR), only("C", eps))
        amps.append(spec.peak("C") / eps)
        others = [abs(b) for f, b in zip(spec.freqs, spec.bins) if abs(abs(f) - DEFAULT_FREQS["C"]) > 0.5]
        assert max(others) < 1e-3 * spec.peak("C")
    assert amps[1] / amps[0] == pytest.approx(1, rel=1e-3)


def test_original_far_field_spectrum():
    v = vib()
    spec = power_spectrum(simulate_timeseries(build_nested_mzi(0.0), v, FAR), v)
    for t in "ABC":
        assert spec.peak(t) == pytest.approx(PEAK, rel=1e-5)
    assert spec.peak("E") < 1e-3 * spec.peak("C")
    assert spec.peak("F") < 1e-3 * spec.peak("C")
    assert spec.signed_peak("A") > 0 and spec.signed_peak("C") > 0
    assert spec.signed_peak("B") == pytest.approx(-spec.signed_peak("A"), rel=1e-5)


def test_pf_far_field_spectrum_nulls_A_and_B():
    v = vib()
    spec = power_spectrum(simulate_timeseries(build_nested_mzi(math.pi / 2), v, FAR), v)
    assert spec.peak("C") == pytest.approx(PEAK, rel=1e-5)
    assert spec.peak("A") < 1e-3 * spec.peak("C")
    assert spec.peak("B") < 1e-3 * spec.peak("C")


def test_power_spectrum_pure_sinusoid():
    v = vib()
    a = 0.37
    x = a * np.sin(2 * np.pi * DEFAULT_FREQS["B"] * v.times)
    spec = power_spectrum(x, v)
    assert spec.peak("B") == pytest.approx(a / 2, abs=1e-10)
    assert spec.signed_peak("B") == pytest.approx(a, abs=1e-10)
    assert spec.peak("A") < 1e-12
    assert np.all(power_spectrum(np.zeros(v.n_samples), v).bins == 0)
    with pytest.raises(ValueError, match="expected"):
        power_spectrum(np.zeros(10), v)


def test_parseval():
    v = vib()
    x = np.random.default_rng(1).normal(size=v.n_samples)
    spec = power_spectrum(x, v)
    assert np.sum(np.abs(spec.bins) ** 2) == pytest.approx(np.mean(x**2), rel=1e-12)


def test_predictor_far_field_reads_real_part():
    pred = analytic_first_order(weak_values(build_nested_mzi(0.0)), vib(), FAR)
    signed = {t: (2j * pred[t]).real / (2 * PEAK) for t in pred}
    np.testing.assert_allclose([signed[t] for t in "ABCEF"], [1, -1, 1, 0, 0], atol=2e-6)


def test_predictor_quarter_gouy():
    wv = weak_values(build_nested_mzi(math.pi / 2))
    at_waist = analytic_first_order(wv, vib(), 0.0)
    quarter = analytic_first_order(wv, vib(), P.z_for_gouy(math.pi / 4))
    for t in "AB":
        assert abs(quarter[t]) / abs(at_waist[t]) == pytest.approx(math.sqrt(2) / 2, rel=1e-12)


@pytest.mark.parametrize("phi", [0.0, math.pi / 4, math.pi / 2])
@pytest.mark.parametrize("zeta", [math.pi / 6, math.pi / 3])
def test_predictor_converges(phi, zeta):
    net = build_nested_mzi(phi)
    v = vib(1e-4)
    z_D = P.z_for_gouy(zeta)
    spec = power_spectrum(simulate_timeseries(net, v, z_D), v)
    pred = analytic_first_order(weak_values(net), v, z_D)
    top = max(abs(p) for p in pred.values())
    for t in "ABCEF":
        if abs(pred[t]) < 1e-3 * top:
            assert spec.peak(t) < 1e-3 * top
        else:
            assert spec.peaks[t] / pred[t] == pytest.approx(1, abs=1e-3)


def test_predictor_with_offsets():
    z_off = {"A": 300.0, "B": -200.0, "C": 100.0, "E": -50.0, "F": 400.0}
    net = build_nested_mzi(0.6, z_offsets=z_off)
    v = vib(1e-4)
    z_D = P.z_for_gouy(1.0)
    spec = power_spectrum(simulate_timeseries(net, v, z_D), v)
    pred = analytic_first_order(weak_values(net), v, z_D, z_offsets=z_off)
    for t in "ABC":
        assert spec.peaks[t] / pred[t] == pytest.approx(1, abs=1e-3)


def test_traces_persist_when_readout_nulls():
    v = vib()
    a0 = trace_strength(build_nested_mzi(0.0), v, FAR, "A")
    a1 = trace_strength(build_nested_mzi(math.pi / 2), v, FAR, "A")
    assert a0 == pytest.approx(EPS, rel=1e-5)
    assert a1 == pytest.approx(a0, rel=1e-2)


def test_trace_ratio_E_to_C_vanishes_linearly():
    net = build_nested_mzi(0.0)
    r = []
    for eps in (1e-4, 1e-3):
        tr = trace_strengths(net, vib(eps), FAR)
        r.append(tr["E"] / tr["C"])
    assert r[1] / r[0] == pytest.approx(10, rel=1e-3)


def test_undriven_mirror_has_no_trace():
    v = vib().without("A")
    assert trace_strength(build_nested_mzi(0.0), v, FAR, "A") == 0.0


def test_field_sidebands_second_order():
    net = build_nested_mzi(0.0)
    s1 = field_sidebands(net, vib(1e-4), FAR, labels=["E+A", "F-B"])
    s2 = field_sidebands(net, vib(1e-3), FAR, labels=["E+A", "F-B"])
    for lb in s1:
        assert s2[lb] / s1[lb] == pytest.approx(100, rel=1e-3)


@pytest.mark.parametrize("c, p", [(3.0, 1), (0.5, 2)])
def test_fit_exact_power_law(c, p):
    eps = np.logspace(-5, -3, 5)
    fit = fit_scaling_exponent(list(zip(eps, c * eps**p)))
    assert fit.exponent == pytest.approx(p, abs=1e-6)


def test_fit_floor_and_errors():
    eps = np.logspace(-5, -3, 5)
    fit = fit_scaling_exponent(list(zip(eps, np.full(5, 1e-20))))
    assert fit.exponent is None and "below measurable floor" in fit.note
    with pytest.raises(ValueError):
        fit_scaling_exponent([(1e-3, 1.0)] * 3)
    with pytest.raises(ValueError, match="decade"):
        fit_scaling_exponent(list(zip(np.linspace(1e-3, 2e-3, 5), np.ones(5))))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.5, 3))
def test_fit_recovers_random_power_law(c, p):
    eps = np.logspace(-4, -2, 6)
    fit = fit_scaling_exponent(list(zip(eps, c * eps**p)))
    assert fit.exponent == pytest.approx(p, abs=1e-9)


def test_trace_report_csv():
    eps = np.logspace(-5, -3, 5)
    fits = {"A": fit_scaling_exponent(list(zip(eps, eps))),
            "E": fit_scaling_exponent(list(zip(eps, np.zeros(5))))}
    text = TraceReport({"A": 1e-3, "E": 0.0}, fits).to_csv()
    lines = text.splitlines()
    assert lines[0] == "mirror,strength,exponent,residual"
    assert lines[1].startswith("A,0.001,1.0")
    assert "below measurable floor" in lines[2]


def test_quad_cell_sidebands_need_an_offset_split():
    # the centred difference signal is odd in the kicks, so second-order lines cancel
    net = build_nested_mzi(0.0)
    z_D = P.z_for_gouy(1.0)
    centred = []
    offset = []
    for eps in (1e-4, 1e-3):
        v = vib(eps)
        centred.append(abs(power_spectrum(simulate_timeseries(net, v, z_D), v).sidebands["A+E"]))
        ts = simulate_timeseries(net, v, z_D, split_offset=0.3 * P.width(z_D))
        offset.append(abs(power_spectrum(ts, v).sidebands["A+E"]))
    assert max(centred) < 1e-14
    assert offset[1] / offset[0] == pytest.approx(100, rel=1e-2)
