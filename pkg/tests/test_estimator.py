import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msrc.errors import InvalidParams
from msrc.estimator import (
    DEFAULT_PARAMS,
    N_PARAMS,
    OFFSETS,
    PARAMS_BLOB_SIZE,
    ContextState,
    EstimatorParams,
    activity,
    context_features,
    logistic_pmf,
    masked_cross_entropy,
    predict_pmf,
    quantize_pmf,
    zero_symbol,
)


def ctx(h=5, w=5, anchor=None, sym=None, recon=None, zero=0, prev=None):
    anchor = np.zeros((h, w), bool) if anchor is None else anchor
    sym = np.zeros((h, w), np.int64) if sym is None else sym
    recon = np.zeros((h, w)) if recon is None else recon
    return ContextState(sym, anchor, recon, zero, prev)


def test_offsets_cover_window():
    assert len(OFFSETS) == 24
    assert (0, 0) not in OFFSETS
    assert set(OFFSETS) == {(di, dj) for di in range(-2, 3) for dj in range(-2, 3)} - {(0, 0)}
    assert N_PARAMS == 30


def test_zero_symbol():
    assert zero_symbol(-3) == 3
    assert zero_symbol(0) == 0
    assert zero_symbol(5) == 59


def test_mu_is_zero_symbol_without_context():
    mu, scale = context_features(ctx(zero=17), DEFAULT_PARAMS)
    assert (mu == 17).all()
    assert np.allclose(scale, DEFAULT_PARAMS.b0)


def test_floor_mass_one_is_uniform():
    p = logistic_pmf(np.array([31.5]), np.array([0.5]), 1.0)
    assert np.allclose(p, 1 / 64, atol=0, rtol=1e-12)


def test_wide_scale_flattens_interior():
    # open outer bins take the tails, so only the 62 interior bins even out
    p = logistic_pmf(np.array([31.5]), np.array([1e6]), DEFAULT_PARAMS.floor_mass)[0]
    assert np.ptp(p[1:-1]) < 1e-12
    assert p[0] == pytest.approx(p[-1])
    assert p[0] > 0.49


def test_argmax_at_neighbour_symbol():
    anchor = np.ones((5, 5), bool)
    anchor[2, 2] = False
    params = EstimatorParams(w_zero=0.0, w_ch=0.0, b0=0.3)
    p = predict_pmf(ctx(anchor=anchor, sym=np.full((5, 5), 10)), params)
    assert int(np.argmax(p[2, 2])) == 10


def test_rows_sum_to_one_and_floor():
    r = np.random.default_rng(0)
    anchor = r.random((9, 11)) < 0.5
    sym = r.integers(0, 64, (9, 11))
    recon = r.integers(0, 256, (9, 11)).astype(float)
    p = predict_pmf(ctx(9, 11, anchor, sym, recon, 4, r.integers(0, 64, (9, 11))), DEFAULT_PARAMS)
    assert np.abs(p.sum(axis=-1) - 1).max() < 1e-9
    assert p.min() >= DEFAULT_PARAMS.floor_mass / 64 - 1e-15


def test_causality_unanchored_values_ignored():
    r = np.random.default_rng(1)
    anchor = r.random((8, 8)) < 0.4
    sym = r.integers(0, 64, (8, 8))
    flipped = sym.copy()
    flipped[~anchor] = 63 - flipped[~anchor]
    a = predict_pmf(ctx(8, 8, anchor, sym), DEFAULT_PARAMS)
    b = predict_pmf(ctx(8, 8, anchor, flipped), DEFAULT_PARAMS)
    assert np.array_equal(a, b)


def test_more_agreeing_context_is_more_confident():
    sym = np.full((5, 5), 20)
    few = np.zeros((5, 5), bool)
    few[1, 2] = True
    many = np.ones((5, 5), bool)
    many[2, 2] = False
    params = EstimatorParams(c_act=0.0, b0=2.0, w_zero=0.1)
    pf = predict_pmf(ctx(anchor=few, sym=sym), params)[2, 2, 20]
    pm = predict_pmf(ctx(anchor=many, sym=sym), params)[2, 2, 20]
    assert pm > pf


def test_activity():
    assert activity(np.zeros((1, 1))).tolist() == [[0.0]]
    a = activity(np.array([[0.0, 255.0]]))
    assert np.allclose(a, 1.0)


def test_quantize_examples():
    q = quantize_pmf(np.full(64, 1 / 64))
    assert (q == 1024).all()
    eps = 1e-9
    p = np.full(64, eps)
    p[0] = 1 - 63 * eps
    q = quantize_pmf(p)
    assert q[0] == 65536 - 63 and (q[1:] == 1).all()


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 63), st.floats(0.05, 50), st.floats(1e-6, 0.1))
def test_quantize_valid_and_idempotent(mu, scale, floor):
    q = quantize_pmf(logistic_pmf(np.array([mu]), np.array([scale]), floor))
    assert q.sum() == 65536 and q.min() >= 1
    assert np.array_equal(quantize_pmf(q / 65536.0), q)


def test_cross_entropy_examples():
    truth = np.zeros((3, 3), np.int64)
    mask = np.ones((3, 3), bool)
    uniform = np.full((3, 3, 64), 1 / 64)
    assert masked_cross_entropy(uniform, truth, mask) == pytest.approx(6.0)
    sharp = np.full((3, 3, 64), 1e-12)
    sharp[..., 0] = 1 - 63e-12
    assert masked_cross_entropy(sharp, truth, mask) < 1e-9
    assert masked_cross_entropy(uniform, truth, np.zeros((3, 3), bool)) == 0.0


def test_params_bytes_roundtrip():
    blob = DEFAULT_PARAMS.to_bytes()
    assert len(blob) == PARAMS_BLOB_SIZE == 250
    assert EstimatorParams.from_bytes(blob) == DEFAULT_PARAMS
    with pytest.raises(InvalidParams):
        EstimatorParams.from_bytes(blob[:-1])
    with pytest.raises(InvalidParams):
        EstimatorParams.from_bytes(b"XXXXXXXX" + blob[8:])


def test_params_validation():
    with pytest.raises(InvalidParams):
        EstimatorParams(b0=0.0)
    with pytest.raises(InvalidParams):
        EstimatorParams(floor_mass=math.nan)
    with pytest.raises(InvalidParams):
        EstimatorParams(w_off=(0.0,) * 24, w_ch=0.0, w_zero=0.0)
    with pytest.raises(InvalidParams):
        EstimatorParams(w_off=(1.0,) * 23)
