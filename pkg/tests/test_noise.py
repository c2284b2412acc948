import math

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from nvqr import noise, qstate
from nvqr.qstate import DensityMatrix

lam2s = st.floats(0.5, 1.0)
BELL = [qstate.bell_vector(k) for k in ("phi+", "psi+", "phi-", "psi-")]


def bell_diagonal(w):
    data = sum(p * np.outer(v, v.conj()) for p, v in zip(w, BELL))
    return DensityMatrix(["a", "b"], data)


def test_lambda2_limits():
    assert noise.lambda2(0, 1.0) == 1
    assert noise.lambda2(1e6, 1.0) == pytest.approx(0.5)
    assert noise.lambda2(1.0, 1.0) == pytest.approx(0.5 + 0.5 / math.e)
    with pytest.raises(ValueError):
        noise.lambda2(-1, 1.0)
    with pytest.raises(ValueError):
        noise.lambda2(1, 0.0)


def test_block_fidelity_limits():
    assert noise.lambda4(1) == 1 and noise.lambda64(1) == 1
    assert noise.lambda4(0.5) == pytest.approx(1 / 4)
    assert noise.lambda64(0.5) == pytest.approx(1 / 64)
    with pytest.raises(ValueError):
        noise.lambda4(0.3)


@given(lam2s, st.lists(st.floats(0, 1), min_size=4, max_size=4).filter(lambda w: sum(w) > 1e-3))
def test_qubitwise_equals_pair_map_on_bell_diagonal(lam, w):
    w = np.array(w) / sum(w)
    rho = bell_diagonal(w)
    exact = noise.depolarize_qubitwise_exact(rho, ["a", "b"], lam)
    approx = noise.depolarize_pair_approx(rho, ["a", "b"], noise.lambda4(lam))
    assert np.max(np.abs(exact.data - approx.data)) <= 1e-12


@given(lam2s)
def test_lambda4_is_bell_fidelity(lam):
    out = noise.depolarize_qubitwise_exact(bell_diagonal([1, 0, 0, 0]), ["a", "b"], lam)
    assert qstate.fidelity(out, BELL[0]) == pytest.approx(noise.lambda4(lam), abs=1e-12)


@given(lam2s)
def test_lambda64_is_encoded_fidelity(lam):
    labels = list(range(6))
    rho = DensityMatrix.from_pure(labels, qstate.encoded_bell_vector())
    out = noise.depolarize_qubitwise_exact(rho, labels, lam)
    assert qstate.fidelity(out, qstate.encoded_bell_vector()) == pytest.approx(noise.lambda64(lam), abs=1e-12)


def test_pair_map_is_not_exact_off_bell_diagonal():
    # product states have non-mixed marginals, so the block map is only an approximation
    rho = DensityMatrix.basis(["a", "b"], "00")
    exact = noise.depolarize_qubitwise_exact(rho, ["a", "b"], 0.8)
    approx = noise.depolarize_pair_approx(rho, ["a", "b"], noise.lambda4(0.8))
    assert np.max(np.abs(exact.data - approx.data)) > 1e-3


def test_block_maps_have_requested_fidelity():
    rho = bell_diagonal([1, 0, 0, 0])
    out = noise.depolarize_pair_approx(rho, ["a", "b"], 0.7)
    assert qstate.fidelity(out, BELL[0]) == pytest.approx(0.7)
    labels = list(range(6))
    enc = DensityMatrix.from_pure(labels, qstate.encoded_bell_vector())
    out = noise.depolarize_encoded_approx(enc, labels, 0.4)
    assert qstate.fidelity(out, qstate.encoded_bell_vector()) == pytest.approx(0.4)


def test_block_map_argument_checks():
    rho = bell_diagonal([1, 0, 0, 0])
    with pytest.raises(ValueError):
        noise.depolarize_pair_approx(rho, ["a"], 0.9)
    with pytest.raises(ValueError):
        noise.depolarize_pair_approx(rho, ["a", "b"], 1.2)
    with pytest.raises(ValueError):
        noise.depolarize_encoded_approx(rho, ["a", "b"], 0.9)


def test_per_target_lambdas():
    rho = bell_diagonal([1, 0, 0, 0])
    a = noise.depolarize_qubitwise_exact(rho, ["a", "b"], [0.9, 1.0])
    b = noise.depolarize_qubitwise_exact(rho, ["a"], 0.9)
    assert np.allclose(a.data, b.data)


@given(lam2s)
def test_pauli_weights_normalised(lam):
    w = noise.pauli_weights(lam)
    assert w.as_array().sum() == pytest.approx(1)
    assert w.w_i - w.w_x == pytest.approx(2 * lam - 1)


@given(st.floats(0, 1))
def test_werner_weights_make_werner_state(f):
    w = noise.werner_weights(f).as_array()
    kraus = [np.sqrt(p) * P for p, P in zip(w, (qstate.I2, qstate.X, qstate.Y, qstate.Z))]
    out = qstate.apply_kraus(bell_diagonal([1, 0, 0, 0]), kraus, ["b"])
    assert np.allclose(out.data, qstate.werner(["a", "b"], f).data, atol=1e-12)


def test_block_depolarizing_probability():
    assert noise.block_depolarizing_probability(1.0, 4) == 0
    assert noise.block_depolarizing_probability(0.25, 4) == pytest.approx(1)
    assert noise.block_depolarizing_probability(1 / 64, 64) == pytest.approx(1)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        noise.DecoherenceParams(0, 1)
    with pytest.raises(ValueError):
        noise.PauliWeights(0.5, 0.5, 0.5, -0.5)
    with pytest.raises(ValueError):
        noise.werner_weights(1.1)
