import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from nvqr import noise, qstate
from nvqr.pauli_engine import (
    BLOCK, FrameError, Gate, Measure, Noise, NoiseTable, PauliFrame, Readout, Retire, Tally,
    TrajectorySpec, compile_noise, enumerate_frame, estimate_qber, propagate, qber_from_tally,
    run_events, sample_measurement, sample_tally,
)
from nvqr.protocols import SystemParams, build_schedule
from nvqr.protocols.circuits import chain_spec
from nvqr.qstate import DensityMatrix

BELL = {(0, 0): "phi+", (1, 0): "psi+", (0, 1): "phi-", (1, 1): "psi-"}


def pair_classes(channel, value, one_sided=False):
    """Distribution of the relative Pauli class (x_a^x_b, z_a^z_b) after the channel."""
    groups = (np.array([1]),) if one_sided else (np.array([0]), np.array([1]))
    spec = TrajectorySpec(2, [Noise(compile_noise(channel, value), groups)])
    frame = enumerate_frame(spec)
    out = {}
    for i, w in enumerate(frame.weights):
        key = (int(frame.x[0, i] ^ frame.x[1, i]), int(frame.z[0, i] ^ frame.z[1, i]))
        out[key] = out.get(key, 0) + w
    return out


def dense_bell_weights(rho):
    return {k: qstate.fidelity(rho, qstate.bell_vector(v)) for k, v in BELL.items()}


@given(st.floats(0.25, 1.0))
def test_pair_channel_matches_dense(lam4):
    rho = DensityMatrix.from_pure(["a", "b"], qstate.bell_vector())
    ref = dense_bell_weights(noise.depolarize_pair_approx(rho, ["a", "b"], lam4))
    got = pair_classes("pair", lam4)
    for k in BELL:
        assert got.get(k, 0) == pytest.approx(ref[k], abs=1e-12)


@given(st.floats(0, 1))
def test_cnot_channel_matches_dense(beta):
    rho = DensityMatrix.from_pure(["a", "b"], qstate.bell_vector())
    # CNOT maps |phi+> to |+0>; compare after undoing it
    noisy = qstate.apply_cnot_noisy(rho, "a", "b", beta)
    noisy = qstate.apply_unitary(noisy, qstate.CNOT, ["a", "b"])
    ref = dense_bell_weights(noisy)
    got = pair_classes("cnot", beta)
    for k in BELL:
        assert got.get(k, 0) == pytest.approx(ref[k], abs=1e-12)


@given(st.floats(0.5, 1.0))
def test_decoherence_channel_matches_dense(lam):
    rho = DensityMatrix.from_pure(["a", "b"], qstate.bell_vector())
    ref = dense_bell_weights(noise.depolarize_qubitwise_exact(rho, ["b"], lam))
    got = pair_classes("decoherence", lam, one_sided=True)
    for k in BELL:
        assert got.get(k, 0) == pytest.approx(ref[k], abs=1e-12)


@given(st.floats(0, 1))
def test_werner_channel(f):
    got = pair_classes("werner", f, one_sided=True)
    assert got.get((0, 0), 0) == pytest.approx(f, abs=1e-12)


def test_encoded_channel_fidelity():
    table = compile_noise("encoded", 0.5)
    p_mix = noise.block_depolarizing_probability(0.5, 64)
    assert table.k == 6
    assert table.probs[0] == pytest.approx(1 - p_mix + p_mix / 4**6)


def test_unknown_channel():
    with pytest.raises(ValueError):
        compile_noise("amplitude-damping", 0.1)
    with pytest.raises(ValueError):
        compile_noise("cnot", 2.0)


def test_noise_table_validation():
    with pytest.raises(ValueError):
        NoiseTable(("I", "X"), [0.5, 0.6])
    with pytest.raises(ValueError):
        NoiseTable(("I", "XX"), [0.5, 0.5])
    assert NoiseTable(("I", "X"), [1.0, 0.0]).is_identity()


def test_cnot_propagation_rules():
    f = PauliFrame.clean(2)
    f.x[0] = True
    g = propagate(f, "CNOT", [[0], [1]])
    assert g.x[:, 0].tolist() == [True, True] and not f.x[1, 0]
    f = PauliFrame.clean(2)
    f.z[1] = True
    g = propagate(f, "CNOT", [[0], [1]])
    assert g.z[:, 0].tolist() == [True, True]
    f = PauliFrame.clean(1)
    f.x[0] = True
    g = propagate(f, "H", [[0]])
    assert g.z[0, 0] and not g.x[0, 0]
    with pytest.raises(FrameError):
        propagate(f, "T", [[0]])


def test_sample_measurement_statistics():
    f = PauliFrame.clean(2, 100_000)
    f.x[0] = True
    rng = np.random.default_rng(0)
    out = sample_measurement(f, 0, "Z", 0.1, rng=rng)
    assert abs(out.mean() - 0.9) < 0.005
    out = sample_measurement(f, 1, "X", 0.0, rng=rng)
    assert not out.any()
    with pytest.raises(FrameError):
        sample_measurement(f, 0, "Z", 0.0, rng=rng)


def test_spec_validation():
    with pytest.raises(FrameError):
        TrajectorySpec(2, [Measure(np.array([0]), "Z", 0.0, "m"), Gate("CNOT", ([0], [1]))])
    with pytest.raises(FrameError):
        TrajectorySpec(2, [Noise(compile_noise("cnot", 0.1), (np.array([0]),))])
    with pytest.raises(FrameError):
        TrajectorySpec(2, [Gate("CNOT", ([0], [0]))])
    with pytest.raises(FrameError):
        TrajectorySpec(2, [Retire(np.array([3]))])


def test_retired_bits_are_cleared():
    spec = TrajectorySpec(2, [Noise(compile_noise("pair", 0.25), (np.array([0]), np.array([1]))),
                              Retire(np.array([0]))])
    frame = enumerate_frame(spec)
    assert not frame.x[0].any() and not frame.z[0].any()
    # branches differing only on the retired qubit are merged
    assert frame.trajectories == 4
    assert frame.weights.sum() == pytest.approx(1)


def _schedule(protocol="P1", n=1, **kw):
    prm = SystemParams(**{"beta": 3e-3, "eta_c": 0.3, "L_tot": 100, **kw})
    return build_schedule(protocol, n, prm)


def test_sampling_is_deterministic_and_seed_sensitive():
    spec = chain_spec(_schedule())
    a = sample_tally(spec, 5000, seed=11)
    b = sample_tally(spec, 5000, seed=11)
    c = sample_tally(spec, 5000, seed=12)
    assert a == b
    assert a != c


def test_worker_count_does_not_change_result():
    spec = chain_spec(_schedule("P3", 2))
    samples = 3 * BLOCK + 17
    assert sample_tally(spec, samples, (5, 1), workers=1) == sample_tally(spec, samples, (5, 1), workers=3)


def test_sampling_agrees_with_enumeration():
    # one noisy Bell pair measured at both ends
    spec = TrajectorySpec(2, [
        Noise(compile_noise("werner", 0.8), (np.array([1]),)),
        Readout(np.array([0]), 0.05, "alice"),
        Readout(np.array([1]), 0.05, "bob"),
    ], _pair_post)
    ex = enumerate_frame(spec)
    exact = Tally.from_outcomes(_pair_post(ex.records), ex.weights)
    est = estimate_qber(spec, 40_000, seed=3)
    ref = qber_from_tally(exact)
    assert abs(est.Q_z - ref.Q_z) < 4 * est.stderr_z
    assert abs(est.Q_x - ref.Q_x) < 4 * est.stderr_x
    # Werner(0.8): X and Y hit Z outcomes, Z and Y hit X outcomes
    e = 0.2 * 2 / 3
    flips = 2 * 0.05 * 0.95
    assert ref.Q_z == pytest.approx(e * (1 - flips) + (1 - e) * flips)


def _pair_post(records, x=None, z=None):
    acc = np.ones(records["alice/Z"].shape[1], bool)
    return {
        "accept": acc,
        "z_reject": ~acc,
        "z_err": (records["alice/Z"] ^ records["bob/Z"])[0],
        "x_err": (records["alice/X"] ^ records["bob/X"])[0],
    }


def test_qber_from_tally():
    t = Tally(total=100, accept=50, accept_z=40, z_err=5, z_err_detect=2, x_err=10)
    maj = qber_from_tally(t, "majority")
    det = qber_from_tally(t, "error-detect")
    assert (maj.Q_z, maj.Q_x, maj.acceptance) == (0.1, 0.2, 0.5)
    assert (det.Q_z, det.Q_x, det.acceptance) == (0.05, 0.2, 0.4)
    assert maj.stderr_z == pytest.approx(np.sqrt(0.09 / 50))
    empty = qber_from_tally(Tally(total=10))
    assert np.isnan(empty.Q_z) and empty.acceptance == 0 and not empty.defined
    with pytest.raises(ValueError):
        qber_from_tally(t, "other")


def test_feedforward_toggles_target():
    from nvqr.pauli_engine import Feedforward
    f = PauliFrame.clean(2, 1)
    f.x[0] = True
    spec = TrajectorySpec(2, [Measure(np.array([0]), "Z", 0.0, "m"),
                              Feedforward(np.array([1]), "X", (("m", np.array([0])),))])
    run_events(spec, f, np.random.default_rng(0))
    assert f.x[1, 0] and f.records["m"][0, 0]
