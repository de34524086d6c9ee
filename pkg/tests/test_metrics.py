import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fibresense.reconstruction.metrics import evaluate, evaluate_columns


def test_perfect_prediction():
    m = evaluate([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
    assert m.rmse == 0 and m.r2 == 1


def test_mean_prediction_has_zero_r2():
    ref = np.array([1.0, 3.0, 8.0, -2.0])
    assert evaluate(np.full(4, ref.mean()), ref).r2 == pytest.approx(0.0, abs=1e-15)


def test_five_point_hand_case():
    ref = [0.0, 10.0, 20.0, 30.0, 40.0]
    pred = [1.0, 9.0, 22.0, 30.0, 37.0]
    # errors 1, -1, 2, 0, -3 -> SSE 15, SST 1000
    m = evaluate(pred, ref, value_range=90.0)
    assert m.rmse == pytest.approx(math.sqrt(3.0))
    assert m.r2 == pytest.approx(1 - 15 / 1000)
    assert m.nrmse == pytest.approx(math.sqrt(3.0) / 90.0)


def test_constant_reference_flags_r2():
    m = evaluate([1.0, 2.0], [3.0, 3.0])
    assert not m.r2_defined and math.isnan(m.r2)


def test_length_mismatch():
    with pytest.raises(ValueError):
        evaluate([1.0], [1.0, 2.0])


def test_columns_and_aggregate():
    ref = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 4.0]])
    pred = ref + np.array([[0.0, 1.0]])
    out = evaluate_columns(pred, ref, ["a", "b"], ranges=[10.0, 30.0])
    assert out["a"].rmse == 0 and out["b"].rmse == 1
    assert out["aggregate"].rmse == pytest.approx(math.sqrt(0.5))
    assert out["aggregate"].nrmse == pytest.approx(math.sqrt(0.5) / 20.0)


@given(arrays(np.float64, 20, elements=st.floats(-100, 100)), st.floats(-5, 5))
def test_rmse_shift(ref, d):
    assert evaluate(ref + d, ref).rmse == pytest.approx(abs(d), abs=1e-9)
