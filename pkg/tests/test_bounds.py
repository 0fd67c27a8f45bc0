import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftlab.bounds import (
    BoundConfig,
    bias_lower,
    bias_upper,
    bounds_report,
    fit_constant,
    TightnessReport,
    tightness_ratios,
    variance_lower,
    variance_upper,
    variance_upper_parts,
)
from shiftlab.errors import InvalidParameterError, PropertyFailure, UnsupportedRatioError
from shiftlab.spectra import Multiplicative, PerIndex, Spectrum, SpectrumPair, SpikedParams, apply_shift, make_spiked


@pytest.fixture
def fig1_pair(fig1_source):
    return SpectrumPair.identity(fig1_source)


@pytest.fixture
def cfg():
    return BoundConfig(60, 10)


def e(i, p=1000):
    v = np.zeros(p)
    v[i] = 1.0
    return v


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        BoundConfig(10, 10)
    with pytest.raises(InvalidParameterError):
        BoundConfig(10, 2, c=0)


def test_k_defaults_to_k_star(fig1_pair):
    assert BoundConfig(60).resolve_k(fig1_pair) == 10


def test_variance_lower_fig1(fig1_pair, cfg):
    # oracle (40-digit): (10 + 990/17.5^2)/60
    assert variance_lower(fig1_pair, cfg) == pytest.approx(0.22054421768707483, rel=1e-12)


def test_variance_lower_zero_target(fig1_source, cfg):
    pair = SpectrumPair(fig1_source, Spectrum(np.zeros(1000)))
    assert variance_lower(pair, cfg) == 0 and variance_upper(pair, cfg) == 0


def test_variance_lower_all_ones():
    pair = SpectrumPair.identity(Spectrum(np.ones(10)))
    assert variance_lower(pair, BoundConfig(5, 0)) == pytest.approx(0.22222222222222222, rel=1e-14)


def test_variance_upper_fig1(fig1_pair, cfg):
    assert variance_upper(fig1_pair, cfg) == pytest.approx(0.22727272727272727, rel=1e-12)


def test_variance_upper_fig1_shifted(fig1_source, cfg):
    pair = apply_shift(fig1_source, Multiplicative(10, 2.0, 0.1))
    assert variance_upper(pair, cfg) == pytest.approx(0.33939393939393939, rel=1e-12)


def test_bias_zero_theta(fig1_pair, cfg):
    assert bias_lower(fig1_pair, np.zeros(1000), cfg) == 0
    assert bias_upper(fig1_pair, np.zeros(1000), cfg) == 0


def test_bias_lower_tail_coordinate(fig1_source):
    pair = apply_shift(fig1_source, Multiplicative(10, 2.0, 0.3))
    assert bias_lower(pair, e(10), BoundConfig(60, 10, c=2.0)) == pytest.approx(0.3e-6 / 2, rel=1e-14)


def test_bias_lower_head_coordinate(fig1_pair, cfg):
    assert bias_lower(fig1_pair, e(0), cfg) == pytest.approx(2.7224101597235530e-10, rel=1e-10)


def test_bias_upper_head_coordinate(fig1_pair, cfg):
    assert bias_upper(fig1_pair, e(0), cfg) == pytest.approx(1.0984258489734919e-3, rel=1e-10)
    # each head term is close to lambda_{k+1} rho_k
    assert bias_upper(fig1_pair, e(0), cfg) == pytest.approx(10 * 1.65e-5 + 990e-6 / (1 + 1 / 16.5), rel=1e-4)


def test_bias_sandwich_k0_single_coordinate():
    # p = 1, k = 0, n = 1: rho_0 = 1, lower/upper = 1 + 1/rho_0 = 2 at c = 1,
    # so the ordering needs a constant c >= sqrt(2)
    pair = SpectrumPair.identity(Spectrum([1.3]))
    theta = np.array([0.7])
    lo, up = bias_lower(pair, theta, BoundConfig(1, 0)), bias_upper(pair, theta, BoundConfig(1, 0))
    assert lo / up == pytest.approx(2.0, rel=1e-14)
    c = np.sqrt(2.0) * (1 + 1e-12)
    assert bias_upper(pair, theta, BoundConfig(1, 0, c)) >= bias_lower(pair, theta, BoundConfig(1, 0, c))


def test_tightness_fig1(fig1_pair, cfg):
    t = tightness_ratios(fig1_pair, None, cfg)
    assert t.v_ratio == pytest.approx(0.97039455782312925, rel=1e-12)
    assert t.v_bracket == (0.25, 1.0) and t.v_inside and t.k_is_minimal


def test_tightness_bias_bracket_single_coordinate(fig1_pair, cfg):
    t = tightness_ratios(fig1_pair, e(3), cfg, check=False)
    assert t.b_bracket[0] == pytest.approx(1 / (1 + 1e6), rel=1e-12)
    # the upper bound keeps terms where theta_i = 0, so a sparse model can
    # fall below the bracket; the checked call reports it
    assert not t.b_inside
    with pytest.raises(PropertyFailure):
        tightness_ratios(fig1_pair, e(3), cfg)


@given(st.integers(0, 2**32 - 1), st.integers(20, 400), st.floats(1e-4, 0.5))
def test_bias_bracket_dense_models(seed, m, eps):
    src = make_spiked(SpikedParams(5, 1.0, eps, 5 + m))
    g = np.random.default_rng(seed)
    n = max(6, m // 4)
    theta = g.standard_normal(src.p)
    t = tightness_ratios(SpectrumPair.identity(src), theta, BoundConfig(n, 5), check=False)
    assert t.b_inside


def test_tightness_bias_bracket_equal_spectrum():
    pair = SpectrumPair.identity(Spectrum(np.ones(20)))
    theta = np.array([0.5, 2.0] + [1.0] * 18)
    t = tightness_ratios(pair, theta, BoundConfig(5, 0))
    assert t.b_bracket[0] == pytest.approx(0.25 / (2 * theta @ theta))


def test_tightness_needs_benign(fig1_pair):
    with pytest.raises(InvalidParameterError):
        tightness_ratios(fig1_pair, None, BoundConfig(60, 5))


def test_tightness_check_raises():
    bad = TightnessReport(0.1, (0.25, 1.0), None, None, True)
    assert not bad.v_inside
    with pytest.raises(PropertyFailure):
        bad.check()


def test_unsupported_ratio():
    pair = SpectrumPair(Spectrum([1.0, 0.0]), Spectrum([1.0, 0.5]))
    with pytest.raises(UnsupportedRatioError):
        variance_lower(pair, BoundConfig(3, 0))


def test_report_flags_non_benign(fig1_pair):
    r = bounds_report(fig1_pair, BoundConfig(60, 5), e(0))
    assert r.benign_violated and r.v_upper > 0 and r.b_upper is not None
    ok = bounds_report(fig1_pair, BoundConfig(60))
    assert ok.k == 10 and ok.benign_ok and ok.rho_k == pytest.approx(16.5)


def test_fit_constant():
    assert fit_constant([(0.1, 0.2, 0.3)]) == 1.0
    assert fit_constant([(0.4, 0.2, 0.3), (0.1, 0.6, 0.3)]) == pytest.approx(2.0)


spiked = st.builds(
    lambda k, m, ratio: make_spiked(SpikedParams(k, 1.0, ratio, k + m)),
    st.integers(0, 8),
    st.integers(20, 300),
    st.floats(1e-4, 1.0),
)


@given(spiked, st.data())
def test_upper_monotone_in_target(src, data):
    n = data.draw(st.integers(src.p // 40 + 2, 40))
    k = data.draw(st.integers(0, min(n, src.p) - 1))
    f = np.asarray(data.draw(st.lists(st.floats(0, 3), min_size=src.p, max_size=src.p)))
    i = data.draw(st.integers(0, src.p - 1))
    bump = f.copy()
    bump[i] += data.draw(st.floats(0.01, 2.0))
    cfg = BoundConfig(n, k)
    a = variance_upper(apply_shift(src, PerIndex(tuple(f))), cfg)
    b = variance_upper(apply_shift(src, PerIndex(tuple(bump))), cfg)
    assert b >= a


@given(spiked, st.floats(0, 5), st.floats(0, 5), st.integers(2, 60))
def test_shift_linearity(src, alpha, beta, n):
    k = min(src.p - 1, n - 1, 8)
    cfg = BoundConfig(n, k)
    head, tail = variance_upper_parts(SpectrumPair.identity(src), cfg)
    pair = apply_shift(src, Multiplicative(k, alpha, beta))
    assert variance_upper(pair, cfg) == pytest.approx(alpha * head + beta * tail, rel=1e-12, abs=1e-300)
