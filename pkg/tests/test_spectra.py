import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftlab.errors import DegenerateTailError, InvalidParameterError
from shiftlab.spectra import (
    LogSelf,
    Multiplicative,
    PerIndex,
    Power,
    PowerLog,
    Spectrum,
    SpectrumPair,
    SpikedParams,
    apply_shift,
    benign_report,
    big_R_k,
    k_star,
    make_decay,
    make_spiked,
    rho_k,
    R_table,
    rho_table,
    shift_factors,
    source_from_dict,
)


# -- construction ----------------------------------------------------------

def test_spectrum_rejects_negative_and_empty():
    with pytest.raises(InvalidParameterError):
        Spectrum([1.0, -0.1])
    with pytest.raises(InvalidParameterError):
        Spectrum([])
    with pytest.raises(InvalidParameterError):
        Spectrum([1.0, float("nan")])


def test_spectrum_values_are_read_only():
    s = Spectrum([2.0, 1.0])
    with pytest.raises(ValueError):
        s.values[0] = 5.0


def test_pair_validation():
    with pytest.raises(InvalidParameterError):
        SpectrumPair(Spectrum([1.0, 2.0]), Spectrum([1.0, 2.0]))
    with pytest.raises(InvalidParameterError):
        SpectrumPair(Spectrum([2.0, 1.0]), Spectrum([1.0]))
    SpectrumPair(Spectrum([2.0, 0.0]), Spectrum([0.0, 0.0]))


def test_make_spiked_fig1(fig1_source):
    v = fig1_source.values
    assert v.shape == (1000,)
    assert np.all(v[:10] == 1.0) and np.all(v[10:] == 1e-6)


def test_make_spiked_no_signal():
    assert np.array_equal(make_spiked(SpikedParams(0, 1.0, 0.5, 3)).values, [0.5, 0.5, 0.5])


def test_spiked_trace(fig1_source):
    # oracle: 10 + 990e-6 in 40-digit arithmetic
    assert fig1_source.trace() == pytest.approx(10.00099, rel=1e-14)


def test_spiked_params_validation():
    with pytest.raises(InvalidParameterError):
        SpikedParams(4, 1.0, 1e-3, 3)
    with pytest.raises(InvalidParameterError):
        SpikedParams(1, 1e-3, 1.0, 3)


def test_powerlog_first_eigenvalue():
    assert make_decay(PowerLog(1, 2), 1).values[0] == pytest.approx(2.0813689810056078, rel=1e-14)


def test_power_law():
    np.testing.assert_allclose(make_decay(Power(2), 3).values, [1, 0.25, 1 / 9], rtol=1e-15)


def test_powerlog_fig8_second_eigenvalue():
    assert make_decay(PowerLog(1, 1.5), 2).values[1] == pytest.approx(0.43421350363586908, rel=1e-13)


def test_log_self_decays():
    v = make_decay(LogSelf(), 6).values
    assert v[0] == 1.0
    assert np.all(np.diff(v) < 0)
    assert v[2] == pytest.approx(3.0 ** (-math.log(3)))


# -- effective ranks ---------------------------------------------------------

def test_rho_fig1(fig1_source):
    assert rho_k(fig1_source, 10, 60) == pytest.approx(16.5, rel=1e-12)


def test_rho_all_ones():
    assert rho_k(Spectrum(np.ones(10)), 0, 5) == 2.0


def test_rho_single_tail():
    s = Spectrum([5.0, 3.0, 0.7])
    assert rho_k(s, 2, 13) == pytest.approx(1 / 13)


def test_R_equal_tail(fig1_source):
    assert big_R_k(fig1_source, 10) == pytest.approx(990, rel=1e-12)


def test_R_single_nonzero():
    assert big_R_k(Spectrum([3.0, 1e-3, 0.0, 0.0]), 1) == 1.0


def test_R_two_element_tail():
    assert big_R_k(Spectrum([5.0, 2.0, 1.0]), 1) == pytest.approx(1.8)


def test_degenerate_tail_raises():
    s = Spectrum([1.0, 0.0, 0.0])
    with pytest.raises(DegenerateTailError):
        rho_k(s, 1, 10)
    with pytest.raises(DegenerateTailError):
        big_R_k(s, 1)


def test_k_star_fig1(fig1_source):
    assert k_star(fig1_source, 60, 1.0) == 10


def test_k_star_all_ones():
    assert k_star(Spectrum(np.ones(100)), 10, 1.0) == 0


def test_k_star_absent_for_log_self():
    assert k_star(make_decay(LogSelf(), 50), 50, 1.0) is None


def test_benign_report_fig1(fig1_source):
    r = benign_report(fig1_source, 60, 1.0)
    assert r.k_star == 10
    assert r.rho_0 == pytest.approx(0.16668316666666667, rel=1e-12)
    assert r.k_star_over_n == pytest.approx(1 / 6)
    assert r.n_over_R == pytest.approx(0.060606060606060606, rel=1e-12)
    assert not r.degenerate


def test_benign_report_all_ones():
    # rho_k = (10 - k)/100 < 1 for every k, so no k qualifies at b = 1
    s = Spectrum(np.ones(10))
    r = benign_report(s, 100, 1.0)
    assert r.k_star is None
    assert r.rho_0 == pytest.approx(0.1)
    assert 100 / big_R_k(s, 0) == pytest.approx(10.0)


def test_benign_report_p1_degenerate():
    r = benign_report(Spectrum([2.0]), 5, 1.0)
    assert r.degenerate
    assert r.k_star in (None, 0)


# -- shifts ------------------------------------------------------------------

def test_fig1_shift(fig1_source):
    pair = apply_shift(fig1_source, Multiplicative(10, 2.0, 0.1))
    expected = make_spiked(SpikedParams(10, 2.0, 1e-7, 1000)).values
    np.testing.assert_allclose(pair.target.values, expected, rtol=1e-15)


def test_identity_shift(fig1_source):
    pair = apply_shift(fig1_source, Multiplicative(10, 1.0, 1.0))
    assert pair.target == fig1_source


def test_per_index_zero():
    pair = apply_shift(Spectrum([3.0, 2.0, 1.0]), PerIndex((0.0, 0.0, 0.0)))
    assert np.all(pair.target.values == 0)


def test_per_index_wrong_length():
    with pytest.raises(InvalidParameterError):
        apply_shift(Spectrum([3.0, 2.0]), PerIndex((1.0,)))


# -- serialization -------------------------------------------------------------

def test_csv_and_json_round_trip(tmp_path, fig1_source):
    s = make_decay(PowerLog(1, 2), 37)
    assert Spectrum.from_csv(s.to_csv()) == s
    assert Spectrum.from_json(s.to_json()) == s
    for name in ("s.csv", "s.json"):
        s.save(tmp_path / name)
        assert Spectrum.load(tmp_path / name) == s
    pair = apply_shift(fig1_source, Multiplicative(10, 2.0, 0.1))
    back = SpectrumPair.from_json(pair.to_json())
    assert back.source == pair.source and back.target == pair.target


def test_csv_header_required():
    with pytest.raises(InvalidParameterError):
        Spectrum.from_csv("1.0\n2.0\n")


def test_source_from_dict():
    assert source_from_dict({"kind": "spiked", "k": 2, "delta": 1, "eps": 0.1, "p": 9}, p=5).p == 5
    assert source_from_dict({"kind": "values", "values": [2, 1]}) == Spectrum([2.0, 1.0])
    with pytest.raises(InvalidParameterError):
        source_from_dict({"kind": "bogus", "p": 3})


# -- properties ------------------------------------------------------------------

spiked_params = st.builds(
    lambda k, m, delta, ratio: SpikedParams(k, delta, delta * ratio, k + m),
    st.integers(0, 20),
    st.integers(1, 300),
    st.floats(1e-3, 1e3),
    st.floats(1e-6, 1.0),
)


@given(spiked_params, st.integers(1, 500), st.integers(1, 50))
def test_rho_non_increasing_in_n(params, n, dn):
    s = make_spiked(params)
    assert rho_k(s, params.k, n + dn) <= rho_k(s, params.k, n)


@given(spiked_params, st.integers(1, 200), st.floats(1e-3, 1e3))
def test_ranks_scale_invariant(params, n, c):
    s = make_spiked(params)
    k = params.k
    assert rho_k(s.scaled(c), k, n) == pytest.approx(rho_k(s, k, n), rel=1e-12)
    assert big_R_k(s.scaled(c), k) == pytest.approx(big_R_k(s, k), rel=1e-12)


@given(spiked_params, st.integers(1, 200))
def test_spiked_closed_forms(params, n):
    s = make_spiked(params)
    m = params.p - params.k
    assert big_R_k(s, params.k) == pytest.approx(m, rel=1e-12)
    assert rho_k(s, params.k, n) == pytest.approx(m / n, rel=1e-12)


@given(spiked_params, st.integers(1, 200), st.floats(1.0, 5.0))
def test_k_star_is_minimal(params, n, b):
    s = make_spiked(params)
    ks = k_star(s, n, b)
    table = rho_table(s, n)
    if ks is None:
        assert np.all(table < b)
    else:
        assert table[ks] >= b
        if ks >= 1:
            assert table[ks - 1] < b


@given(
    st.lists(st.floats(1e-6, 1e3), min_size=2, max_size=30),
    st.data(),
)
def test_shift_factors_recovered(values, data):
    src = Spectrum(sorted(values, reverse=True))
    factor = st.one_of(st.just(0.0), st.floats(1e-3, 10.0))
    f = data.draw(st.lists(factor, min_size=src.p, max_size=src.p))
    pair = apply_shift(src, PerIndex(tuple(f)))
    np.testing.assert_allclose(shift_factors(pair), f, rtol=1e-14, atol=0)


def test_k_star_rejects_small_b():
    with pytest.raises(InvalidParameterError):
        k_star(Spectrum([1.0, 1.0]), 1, 0.5)


def test_pair_json_keys(fig1_source):
    d = json.loads(SpectrumPair.identity(Spectrum([2.0, 1.0])).to_json())
    assert set(d) == {"source", "target"}


@given(st.lists(st.one_of(st.just(0.0), st.floats(1e-100, 1e6)), min_size=1, max_size=60), st.integers(1, 100))
def test_tables_match_scalar_functions(values, n):
    s = Spectrum(sorted(values, reverse=True))
    rt = rho_table(s, n)
    for k in range(s.p):
        if s.values[k] > 0:
            assert rt[k] == rho_k(s, k, n)
            assert R_table(s)[k] == big_R_k(s, k)
