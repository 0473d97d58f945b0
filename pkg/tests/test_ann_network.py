import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import fd_residual_jacobian, max_relative_deviation, scalar_forward
from soilchar.ann.network import (
    Network,
    NetworkTopology,
    Normalizer,
    fit_normalizer,
    forward,
    forward_normalized,
    jacobian,
    jacobian_normalized,
)
from soilchar.errors import DomainError, ValidationError


def identity_norms():
    inputs = Normalizer(lo=-np.ones(4), hi=np.ones(4))
    target = Normalizer(lo=np.array(-1.0), hi=np.array(1.0))
    return inputs, target


def test_topology():
    assert NetworkTopology(10).n_params == 61
    assert NetworkTopology(1).n_params == 7
    with pytest.raises(ValidationError):
        NetworkTopology(0)
    with pytest.raises(ValidationError):
        NetworkTopology(3, input_dim=5)


def test_normalizer_endpoints():
    norm = fit_normalizer(np.array([[0.0], [50.0], [100.0]]))
    assert norm.apply(np.array([[0.0], [50.0], [100.0]])).ravel().tolist() == [-1.0, 0.0, 1.0]


def test_normalizer_constant_feature():
    data = np.array([[1.0, 7.0], [2.0, 7.0], [3.0, 7.0]])
    z = fit_normalizer(data).apply(data)
    assert np.all(z[:, 1] == 0.0)
    assert z[:, 0].tolist() == [-1.0, 0.0, 1.0]


def test_normalizer_log_column():
    data = np.array([[1.0, 0.01], [2.0, 1.0], [3.0, 100.0]])
    norm = fit_normalizer(data, log_columns=[False, True])
    assert norm.apply(data)[:, 1] == pytest.approx([-1.0, 0.0, 1.0])
    with pytest.raises(DomainError):
        norm.apply(np.array([[1.0, -1.0]]))


@settings(max_examples=50)
@given(
    arrays(np.float64, (12, 4), elements=st.floats(-1e3, 1e3)),
    st.booleans(),
)
def test_normalizer_round_trip(data, log_last):
    if log_last:
        data[:, 3] = np.abs(data[:, 3]) + 1e-2
    norm = fit_normalizer(data, log_columns=[False, False, False, log_last])
    back = norm.unapply(norm.apply(data))
    varying = norm.hi > norm.lo
    scale = np.maximum(np.abs(data), 1.0)
    assert np.all((np.abs(back - data) / scale)[:, varying] <= 1e-12)


def test_normalizer_dict_round_trip():
    norm = fit_normalizer(np.random.default_rng(0).uniform(1, 2, (5, 4)), log_columns=[0, 0, 0, 1])
    again = Normalizer.from_dict(norm.to_dict())
    assert np.array_equal(again.lo, norm.lo) and np.array_equal(again.hi, norm.hi)
    assert again.log_columns.tolist() == [False, False, False, True]


def test_forward_zero_network():
    inputs, target = identity_norms()
    target = Normalizer(lo=np.array(10.0), hi=np.array(30.0))
    net = Network(NetworkTopology(3), np.zeros(19), inputs, target)
    assert forward(net, [0.3, 0.1, -0.2, 0.9]) == pytest.approx(20.0)


def test_forward_hand_set():
    params = np.array([1.0, 0, 0, 0, 0.0, 1.0, 0.0])
    y, act = forward_normalized(params, 1, np.array([[0.5, 0.2, -0.7, 0.1]]))
    assert y[0] == pytest.approx(math.tanh(0.5))
    assert y[0] == pytest.approx(0.4621, abs=5e-5)


@given(arrays(np.float64, (8, 4), elements=st.floats(-50, 50)), st.integers(0, 2**16))
def test_hidden_activation_range(xn, seed):
    params = np.random.default_rng(seed).normal(0, 3, 6 * 5 + 1)
    _, act = forward_normalized(params, 5, xn)
    assert np.all(np.abs(act) <= 1.0)


def test_forward_rejects_bad_input():
    inputs, target = identity_norms()
    net = Network(NetworkTopology(2), np.zeros(13), inputs, target)
    with pytest.raises(DomainError):
        forward(net, [0, 0, float("nan"), 0])
    with pytest.raises(ValidationError):
        forward(net, [0, 0, 0])


def test_forward_matches_scalar_oracle():
    rng = np.random.default_rng(3)
    params = rng.uniform(-1, 1, 6 * 4 + 1)
    xn = rng.uniform(-1, 1, (6, 4))
    y, _ = forward_normalized(params, 4, xn)
    assert y == pytest.approx([scalar_forward(params, 4, x) for x in xn], rel=1e-13)


@pytest.mark.parametrize("hidden, batch, seed", [(3, 8, 0), (1, 1, 1), (8, 32, 2), (5, 4, 3)])
def test_jacobian_vs_finite_differences(hidden, batch, seed):
    rng = np.random.default_rng(seed)
    params = rng.uniform(-1, 1, 6 * hidden + 1)
    xn = rng.uniform(-1, 1, (batch, 4))
    analytic = jacobian_normalized(params, hidden, xn)
    assert analytic.shape == (batch, 6 * hidden + 1)
    assert max_relative_deviation(analytic, fd_residual_jacobian(params, hidden, xn)) <= 1e-4


def test_jacobian_output_bias_column():
    inputs, target = identity_norms()
    params = np.zeros(6 * 3 + 1)
    params[15:18] = [0.4, -0.2, 1.0]
    net = Network(NetworkTopology(3), params, inputs, target)
    jac = jacobian(net, np.zeros((5, 4)))
    assert np.all(jac[:, -1] == -1.0)


def test_jacobian_rows_are_per_sample():
    rng = np.random.default_rng(9)
    params = rng.uniform(-1, 1, 6 * 3 + 1)
    xn = rng.uniform(-1, 1, (4, 4))
    doubled = np.vstack([xn, xn[2:3]])
    jac = jacobian_normalized(params, 3, doubled)
    assert np.array_equal(jac[2], jac[4])


def test_network_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    data = rng.uniform(0.5, 5, (20, 4))
    net = Network(
        NetworkTopology(4),
        rng.normal(size=25),
        fit_normalizer(data, log_columns=[0, 0, 0, 1]),
        fit_normalizer(rng.uniform(0, 100, 20)),
        seed=11,
    )
    path = tmp_path / "net.json"
    net.save(path)
    again = Network.load(path)
    assert np.array_equal(again.params, net.params)
    assert again.seed == 11
    assert np.array_equal(again.predict(data), net.predict(data))


def test_network_rejects_bad_params():
    inputs, target = identity_norms()
    with pytest.raises(ValidationError):
        Network(NetworkTopology(2), np.zeros(12), inputs, target)
    with pytest.raises(ValidationError):
        Network(NetworkTopology(1), [0, 0, 0, 0, 0, float("inf"), 0], inputs, target)


def test_oracle_catches_a_wrong_jacobian():
    rng = np.random.default_rng(3)
    params = rng.uniform(-1, 1, 6 * 3 + 1)
    xn = rng.uniform(-1, 1, (6, 4))
    wrong = jacobian_normalized(params, 3, xn)
    wrong[:, 4] *= 1.001  # one weight column off by 0.1 %
    assert max_relative_deviation(wrong, fd_residual_jacobian(params, 3, xn)) > 1e-4
